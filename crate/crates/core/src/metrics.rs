//! Evaluation quantities computed from simulation traces.

use crate::config::{ScenarioConfig, Scheme};
use crate::content::ContentState;
use crate::protocol::SlotReport;

/// Full record of one simulation run.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub config: ScenarioConfig,
    pub scheme: Scheme,
    pub seed: u64,
    /// Possession right after the V2R phase.
    pub initial_content: ContentState,
    /// One report per simulated slot, slots `1..`.
    pub reports: Vec<SlotReport>,
    pub completed: bool,
    /// Slot at which every OBU held the full file (`0` if already at start).
    pub completion_slot: Option<u64>,
}

impl Trace {
    pub fn demand(&self) -> u64 {
        self.config.demand()
    }

    pub fn initial_possessed(&self) -> u64 {
        self.initial_content.possessed()
    }

    /// `P(t)` for `t = 1..=len`.
    pub fn possessed_series(&self) -> Vec<u64> {
        self.reports.iter().map(|r| r.possessed).collect()
    }

    pub fn total_switches(&self) -> usize {
        self.reports.iter().map(|r| r.switches).sum()
    }

    pub fn final_possessed(&self) -> u64 {
        self.reports.last().map_or(self.initial_possessed(), |r| r.possessed)
    }

    /// `P / NM` at the end of the run.
    pub fn completion_fraction(&self) -> f64 {
        self.final_possessed() as f64 / self.demand() as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DelayEstimate {
    pub seconds: f64,
    /// `false` when the run was truncated before every OBU had the file; the
    /// value is then the partial sum up to the horizon.
    pub complete: bool,
}

/// `(1/N) Σ_t (NM − P(t)) T` over the given per-slot possession series.
pub fn delay_from_series(vehicles: usize, packets: usize, slot_secs: f64, possessed: &[u64]) -> f64 {
    let demand = (vehicles * packets) as u64;
    let deficit: u64 = possessed.iter().map(|&p| demand - p).sum();
    deficit as f64 * slot_secs / vehicles as f64
}

/// Average delay of a run, from the realised possession curve.
pub fn average_delay(trace: &Trace) -> DelayEstimate {
    let c = &trace.config;
    DelayEstimate {
        seconds: delay_from_series(c.vehicles, c.packets, c.slot_secs, &trace.possessed_series()),
        complete: trace.completed,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StandardDelay {
    /// `(T/N) Σ_{t=1}^{NM} (NM − t)`.
    pub exact: f64,
    /// `N M² T / 2`.
    pub approx: f64,
}

/// Average delay of the reference schedule that delivers one packet per slot.
pub fn standard_average_delay(vehicles: usize, packets: usize, slot_secs: f64) -> StandardDelay {
    let nm = (vehicles * packets) as u64;
    let sum = nm * (nm - 1) / 2;
    StandardDelay {
        exact: sum as f64 * slot_secs / vehicles as f64,
        approx: (vehicles * packets * packets) as f64 * slot_secs / 2.0,
    }
}

/// One row of the per-slot CSV.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlotRow {
    pub slot: u64,
    /// `P(t) / NM`.
    pub normalized: f64,
    pub transmitters: usize,
    pub switches: usize,
    pub subnetworks: usize,
}

pub fn per_slot_series(trace: &Trace) -> Vec<SlotRow> {
    let demand = trace.demand() as f64;
    trace
        .reports
        .iter()
        .map(|r| SlotRow {
            slot: r.slot,
            normalized: r.possessed as f64 / demand,
            transmitters: r.transmitters(),
            switches: r.switches,
            subnetworks: r.subnetworks.len(),
        })
        .collect()
}

/// Normalised `P(t)` for `t = 0..=horizon`; a run that stopped early keeps
/// its final value.
pub fn normalized_curve(trace: &Trace, horizon: u64) -> Vec<f64> {
    let demand = trace.demand() as f64;
    let mut curve = Vec::with_capacity(horizon as usize + 1);
    let mut last = trace.initial_possessed();
    curve.push(last as f64 / demand);
    for t in 1..=horizon {
        if let Some(r) = trace.reports.get(t as usize - 1) {
            last = r.possessed;
        }
        curve.push(last as f64 / demand);
    }
    curve
}

/// Per-slot switch counts for `t = 1..=horizon`; zero after the run ended.
pub fn switch_curve(trace: &Trace, horizon: u64) -> Vec<f64> {
    (1..=horizon)
        .map(|t| trace.reports.get(t as usize - 1).map_or(0.0, |r| r.switches as f64))
        .collect()
}

/// Element-wise mean of equally long curves.
pub fn mean_curve(curves: &[Vec<f64>]) -> Vec<f64> {
    let Some(len) = curves.first().map(Vec::len) else {
        return Vec::new();
    };
    (0..len)
        .map(|k| curves.iter().map(|c| c[k]).sum::<f64>() / curves.len() as f64)
        .collect()
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}
