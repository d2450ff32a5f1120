//! End-to-end V2V phase: network splitting, per-subnetwork coalition
//! formation, broadcast of the best coalition, and global collision
//! resolution. Also the carrier-sensing baseline.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use thiserror::Error;

use crate::channel::{build_link_snapshot, ChannelParams, LinkSnapshot};
use crate::coalition::{run_formation, CoalitionError, Partition};
use crate::config::{ScenarioConfig, Scheme};
use crate::content::{initial_allocation, ContentState, Delivery};
use crate::game::{Coalition, SlotContext, ValueCache};
use crate::metrics::Trace;
use crate::mobility::{compute_links, init_fleet, step_mobility, FleetState, Geometry, MobilityError};
use crate::rng::{stream, Stream};

/// Round cap for one formation run.
pub const MAX_FORMATION_ROUNDS: usize = 1000;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Mobility(#[from] MobilityError),
    #[error("slot {slot}, subnetwork {subnet}: {source}")]
    Formation { slot: u64, subnet: usize, source: CoalitionError },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Subnetwork {
    pub id: usize,
    /// Sorted member ids.
    pub members: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Transmission {
    pub sender: usize,
    pub packet: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlotReport {
    pub slot: u64,
    pub subnetworks: Vec<Subnetwork>,
    /// Final partition per subnetwork (empty for the baseline).
    pub partitions: Vec<Partition>,
    /// Broadcasting coalition per subnetwork, if any.
    pub broadcasting: Vec<Option<Coalition>>,
    pub transmissions: Vec<Transmission>,
    pub deliveries: Vec<Delivery>,
    /// Expected service rate of each subnetwork's broadcasting coalition.
    pub expected_rates: Vec<f64>,
    pub switches: usize,
    /// `P` after this slot's deliveries.
    pub possessed: u64,
}

impl SlotReport {
    pub fn transmitters(&self) -> usize {
        self.transmissions.len()
    }
}

/// Mutable simulation state between slots.
#[derive(Clone, Debug)]
pub struct SimState {
    pub fleet: FleetState,
    pub content: ContentState,
    pub subnetworks: Vec<Subnetwork>,
    /// Last slot's final partitions, used for warm starts.
    pub last_partition: Vec<Partition>,
}

impl SimState {
    pub fn new(fleet: FleetState, content: ContentState) -> Self {
        Self { fleet, content, subnetworks: Vec::new(), last_partition: Vec::new() }
    }
}

/// Sequential join rule: in random order every OBU joins the largest
/// subnetwork below `max_size` that already holds one of its neighbours
/// (ties to the older subnetwork), or founds a new one.
pub fn split_network<R: Rng + ?Sized>(
    geometry: &Geometry,
    max_size: usize,
    rng: &mut R,
) -> Vec<Subnetwork> {
    let n = geometry.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in order {
        let best = groups
            .iter()
            .enumerate()
            .filter(|(_, g)| g.len() < max_size && g.iter().any(|&j| geometry.adjacent(i, j)))
            .max_by(|(a, ga), (b, gb)| ga.len().cmp(&gb.len()).then(b.cmp(a)))
            .map(|(k, _)| k);
        match best {
            Some(k) => groups[k].push(i),
            None => groups.push(vec![i]),
        }
    }
    groups
        .into_iter()
        .enumerate()
        .map(|(id, mut members)| {
            members.sort_unstable();
            Subnetwork { id, members }
        })
        .collect()
}

/// Realised receptions for one slot.
///
/// A non-transmitting OBU that hears exactly one transmitter receives its
/// packet when it lacks it and `coins[receiver] < p`; hearing two or more
/// transmitters yields nothing.
pub fn resolve_deliveries(
    transmissions: &[Transmission],
    links: &LinkSnapshot,
    content: &ContentState,
    coins: &[f64],
) -> Vec<Delivery> {
    let n = links.len();
    let mut transmitting = vec![false; n];
    for t in transmissions {
        transmitting[t.sender] = true;
    }
    let mut deliveries = Vec::new();
    for receiver in 0..n {
        if transmitting[receiver] {
            continue;
        }
        let mut heard = transmissions.iter().filter(|t| links.adjacent(receiver, t.sender));
        let (Some(t), None) = (heard.next(), heard.next()) else {
            continue;
        };
        if !content.set(receiver).contains(t.packet) && coins[receiver] < links.prob(t.sender, receiver) {
            deliveries.push(Delivery { receiver, sender: t.sender, packet: t.packet });
        }
    }
    deliveries
}

/// Per-receiver reception coins for one slot, shared by both schemes.
pub fn draw_coins(seed: u64, slot: u64, n: usize) -> Vec<f64> {
    let mut rng = stream(seed, Stream::Delivery, slot, 0);
    (0..n).map(|_| rng.random::<f64>()).collect()
}

/// Proposed scheme for one slot; `state.content` is not modified.
pub fn run_slot_proposed(
    state: &mut SimState,
    links: &LinkSnapshot,
    config: &ScenarioConfig,
    seed: u64,
    slot: u64,
) -> Result<SlotReport, SimError> {
    if state.subnetworks.is_empty() || (slot - 1).is_multiple_of(config.split_period) {
        let mut rng = stream(seed, Stream::Split, slot, 0);
        state.subnetworks = split_network(&links.geometry, config.max_subnet, &mut rng);
    }

    let ctx = SlotContext::new(links, &state.content, config.alpha, config.beta);
    let previous = Partition::from_coalitions(
        state.last_partition.iter().flat_map(|p| p.coalitions().iter().cloned()).collect(),
        &(0..links.len()).collect::<Vec<_>>(),
    )
    .ok();

    let mut partitions = Vec::with_capacity(state.subnetworks.len());
    let mut broadcasting = Vec::with_capacity(state.subnetworks.len());
    let mut expected_rates = Vec::with_capacity(state.subnetworks.len());
    let mut transmissions = Vec::new();
    let mut switches = 0;

    for subnet in &state.subnetworks {
        let members = &subnet.members;
        let initial = match (&previous, config.warm_start) {
            (Some(prev), true) => prev.restricted_to(members),
            _ => Partition::singletons(members),
        };
        let mut values = ValueCache::new(ctx);
        let mut rng = stream(seed, Stream::Formation, slot, subnet.id as u64);
        let outcome = run_formation(members, initial, &mut values, &mut rng, MAX_FORMATION_ROUNDS)
            .map_err(|source| SimError::Formation { slot, subnet: subnet.id, source })?;
        switches += outcome.switches;

        // Highest expected rate; coalitions are ordered by smallest member, so
        // the first maximum wins ties.
        let mut best: Option<(Coalition, f64)> = None;
        for c in outcome.partition.coalitions() {
            let x = values.evaluate(c).total_rate;
            if x > 0.0 && best.as_ref().is_none_or(|(_, bx)| x > *bx) {
                best = Some((c.clone(), x));
            }
        }
        match best {
            Some((coalition, x)) => {
                let eval = values.evaluate(&coalition);
                for (&sender, packet) in coalition.members().iter().zip(&eval.packets) {
                    // Members with nothing useful still broadcast: the
                    // all-zero greedy argmax is the lowest owned packet.
                    let own = state.content.set(sender);
                    if let Some(packet) = packet.or_else(|| own.iter().next()) {
                        transmissions.push(Transmission { sender, packet });
                    }
                }
                broadcasting.push(Some(coalition));
                expected_rates.push(x);
            }
            None => {
                broadcasting.push(None);
                expected_rates.push(0.0);
            }
        }
        partitions.push(outcome.partition);
    }

    let coins = draw_coins(seed, slot, links.len());
    let deliveries = resolve_deliveries(&transmissions, links, &state.content, &coins);
    state.last_partition = partitions.clone();
    Ok(SlotReport {
        slot,
        subnetworks: state.subnetworks.clone(),
        partitions,
        broadcasting,
        transmissions,
        deliveries,
        expected_rates,
        switches,
        possessed: state.content.possessed(),
    })
}

/// Carrier-sensing baseline for one slot; `state.content` is not modified.
///
/// OBUs sense in random order; each commits when it owns something and no
/// neighbour has already committed, then broadcasts a uniformly random owned
/// packet. Receivers are resolved by the same collision rule as the proposed
/// scheme, so hidden terminals still collide.
pub fn run_slot_baseline(
    state: &SimState,
    links: &LinkSnapshot,
    seed: u64,
    slot: u64,
) -> SlotReport {
    let n = links.len();
    let mut rng = stream(seed, Stream::Baseline, slot, 0);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut committed = vec![false; n];
    let mut transmissions = Vec::new();
    for i in order {
        let own = state.content.set(i);
        if own.is_empty() || links.neighbors(i).any(|j| committed[j]) {
            continue;
        }
        committed[i] = true;
        let owned: Vec<usize> = own.iter().collect();
        let packet = *owned.choose(&mut rng).expect("non-empty");
        transmissions.push(Transmission { sender: i, packet });
    }
    transmissions.sort_by_key(|t| t.sender);
    let coins = draw_coins(seed, slot, n);
    let deliveries = resolve_deliveries(&transmissions, links, &state.content, &coins);
    SlotReport {
        slot,
        subnetworks: Vec::new(),
        partitions: Vec::new(),
        broadcasting: Vec::new(),
        transmissions,
        deliveries,
        expected_rates: Vec::new(),
        switches: 0,
        possessed: state.content.possessed(),
    }
}

/// Runs the V2V phase from the closed-form V2R allocation until every OBU
/// holds the whole file or `t_max` slots have elapsed.
///
/// Fleet motion and fading come from scheme-independent streams, so both
/// schemes see the same road for a given seed.
pub fn simulate(config: &ScenarioConfig, scheme: Scheme, seed: u64) -> Result<Trace, SimError> {
    let fleet = init_fleet(config, &mut stream(seed, Stream::Fleet, 0, 0))?;
    let content = initial_allocation(&fleet, config);
    let initial_content = content.clone();
    let params = ChannelParams::from_config(config);
    let mut state = SimState::new(fleet, content);
    let mut reports = Vec::new();

    for slot in 1..=config.t_max {
        if state.content.is_complete() {
            break;
        }
        state.fleet = step_mobility(&state.fleet, config, &mut stream(seed, Stream::Mobility, slot, 0));
        let geometry = compute_links(&state.fleet, config);
        let links = build_link_snapshot(geometry, &params, &mut stream(seed, Stream::Fading, slot, 0));
        let mut report = match scheme {
            Scheme::Proposed => run_slot_proposed(&mut state, &links, config, seed, slot)?,
            Scheme::Baseline => run_slot_baseline(&state, &links, seed, slot),
        };
        state.content.apply_deliveries(&report.deliveries);
        report.possessed = state.content.possessed();
        reports.push(report);
    }

    let completed = state.content.is_complete();
    let completion_slot = completed.then(|| reports.last().map_or(0, |r| r.slot));
    Ok(Trace {
        config: config.clone(),
        scheme,
        seed,
        initial_content,
        reports,
        completed,
        completion_slot,
    })
}
