//! Two-lane highway mobility.
//!
//! Speeds follow a bounded random walk (hold, `+a` or `-a` each slot), with a
//! safety rule that escapes a too-close leader by changing lanes or braking to
//! `v_min`, and a catch-up rule that sends a vehicle to `v_max` when its
//! leader has drifted `d_max` away. The road is unbounded ahead.

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::config::ScenarioConfig;

#[derive(Debug, Error, PartialEq)]
pub enum MobilityError {
    #[error("cannot place {vehicles} vehicles {d_min} m apart on two lanes of {length} m")]
    Infeasible { vehicles: usize, d_min: f64, length: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Lane {
    Right,
    Left,
}

impl Lane {
    pub fn other(self) -> Lane {
        match self {
            Lane::Right => Lane::Left,
            Lane::Left => Lane::Right,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VehicleState {
    pub id: usize,
    pub lane: Lane,
    /// Metres along the travel direction.
    pub position: f64,
    /// Metres per second.
    pub speed: f64,
}

/// The fleet at one slot. `vehicles[i].id == i` always holds.
#[derive(Clone, Debug, PartialEq)]
pub struct FleetState {
    pub vehicles: Vec<VehicleState>,
    pub slot: u64,
}

impl FleetState {
    pub fn len(&self) -> usize {
        self.vehicles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vehicles.is_empty()
    }

    /// Vehicle ids ordered front to back (largest position first, ties by id).
    pub fn front_to_back(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.vehicles.len()).collect();
        order.sort_by(|&a, &b| {
            let (va, vb) = (&self.vehicles[a], &self.vehicles[b]);
            vb.position.total_cmp(&va.position).then(a.cmp(&b))
        });
        order
    }
}

/// Largest number of vehicles one lane of `length` can hold with gaps above `d_min`.
fn lane_capacity(length: f64, d_min: f64) -> usize {
    (length / d_min).ceil() as usize
}

/// Places the fleet uniformly over `[0, L]` on both lanes, keeping same-lane
/// gaps above `d_min`, with speeds uniform in `[v_min, v_max]`.
pub fn init_fleet<R: Rng + ?Sized>(
    config: &ScenarioConfig,
    rng: &mut R,
) -> Result<FleetState, MobilityError> {
    let n = config.vehicles;
    let (length, d_min) = (config.fleet_length, config.d_min);
    if n as f64 * d_min > 2.0 * length {
        return Err(MobilityError::Infeasible { vehicles: n, d_min, length });
    }
    let capacity = lane_capacity(length, d_min);

    let mut lanes: Vec<Lane> =
        (0..n).map(|_| if rng.random_bool(0.5) { Lane::Left } else { Lane::Right }).collect();
    for lane in [Lane::Right, Lane::Left] {
        let mut count = lanes.iter().filter(|&&l| l == lane).count();
        for l in lanes.iter_mut() {
            if count <= capacity {
                break;
            }
            if *l == lane {
                *l = lane.other();
                count -= 1;
            }
        }
    }

    let mut slots: Vec<(Lane, f64)> = Vec::with_capacity(n);
    for lane in [Lane::Right, Lane::Left] {
        let count = lanes.iter().filter(|&&l| l == lane).count();
        if count == 0 {
            continue;
        }
        // Uniform over valid configurations: sorted uniforms on the free
        // length, then shift the k-th by k * d_min.
        let free = (length - (count - 1) as f64 * d_min).max(0.0);
        let mut offsets: Vec<f64> = (0..count).map(|_| rng.random::<f64>() * free).collect();
        offsets.sort_by(f64::total_cmp);
        for (k, u) in offsets.into_iter().enumerate() {
            slots.push((lane, u + k as f64 * d_min));
        }
    }
    slots.shuffle(rng);

    let vehicles = slots
        .into_iter()
        .enumerate()
        .map(|(id, (lane, position))| VehicleState {
            id,
            lane,
            position,
            speed: config.v_min + rng.random::<f64>() * (config.v_max - config.v_min),
        })
        .collect();
    Ok(FleetState { vehicles, slot: 0 })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpeedDraw {
    Hold,
    Accelerate,
    Decelerate,
}

pub fn draw_speed_change<R: Rng + ?Sized>(rng: &mut R, p: f64) -> SpeedDraw {
    let u: f64 = rng.random();
    if u < p {
        SpeedDraw::Accelerate
    } else if u < 2.0 * p {
        SpeedDraw::Decelerate
    } else {
        SpeedDraw::Hold
    }
}

/// Nearest vehicle ahead of `position` in `lane`, as `(id, gap)`.
fn leader_in(
    vehicles: &[VehicleState],
    lanes: &[Lane],
    me: usize,
    lane: Lane,
) -> Option<(usize, f64)> {
    let pos = vehicles[me].position;
    vehicles
        .iter()
        .filter(|v| v.id != me && lanes[v.id] == lane)
        .filter(|v| v.position > pos || (v.position == pos && v.id < me))
        .map(|v| (v.id, v.position - pos))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
}

/// Nearest vehicle behind `position` in `lane`, as `(id, gap)`.
fn follower_in(
    vehicles: &[VehicleState],
    lanes: &[Lane],
    me: usize,
    lane: Lane,
) -> Option<(usize, f64)> {
    let pos = vehicles[me].position;
    vehicles
        .iter()
        .filter(|v| v.id != me && lanes[v.id] == lane)
        .filter(|v| v.position < pos || (v.position == pos && v.id > me))
        .map(|v| (v.id, pos - v.position))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
}

/// Advances the fleet by one slot.
///
/// Vehicles are handled front to back. Each draws its speed change, then the
/// safety rule (leader within `d_min`) and, if that did not fire, the
/// catch-up rule. A lane change is only taken when the target lane keeps more
/// than `d_min` to both the nearest vehicle ahead and behind; decisions of
/// vehicles further ahead are already visible. Positions move last.
pub fn step_mobility<R: Rng + ?Sized>(
    fleet: &FleetState,
    config: &ScenarioConfig,
    rng: &mut R,
) -> FleetState {
    let vehicles = &fleet.vehicles;
    let mut lanes: Vec<Lane> = vehicles.iter().map(|v| v.lane).collect();
    let mut speeds: Vec<f64> = vehicles.iter().map(|v| v.speed).collect();

    for i in fleet.front_to_back() {
        let current = vehicles[i].speed;
        let mut speed = match draw_speed_change(rng, config.p_change) {
            SpeedDraw::Hold => current,
            SpeedDraw::Accelerate => (current + config.accel).min(config.v_max),
            SpeedDraw::Decelerate => (current - config.accel).max(config.v_min),
        };

        let lane = lanes[i];
        let same = leader_in(vehicles, &lanes, i, lane);
        let other_ahead = leader_in(vehicles, &lanes, i, lane.other());
        let other_behind = follower_in(vehicles, &lanes, i, lane.other());
        let can_merge = || {
            other_ahead.is_none_or(|(_, gap)| gap > config.d_min)
                && other_behind.is_none_or(|(_, gap)| gap > config.d_min)
        };

        match same {
            Some((_, gap)) if gap <= config.d_min => {
                if can_merge() {
                    lanes[i] = lane.other();
                } else {
                    speed = config.v_min;
                }
            }
            Some((_, gap)) if gap >= config.d_max => speed = config.v_max,
            Some(_) => {
                if other_ahead.is_some_and(|(_, gap)| gap >= config.d_max)
                    && can_merge()
                {
                    lanes[i] = lane.other();
                    speed = config.v_max;
                }
            }
            None => {}
        }
        speeds[i] = speed;
    }

    let next = vehicles
        .iter()
        .map(|v| VehicleState {
            id: v.id,
            lane: lanes[v.id],
            position: v.position + speeds[v.id] * config.slot_secs,
            speed: speeds[v.id],
        })
        .collect();
    FleetState { vehicles: next, slot: fleet.slot + 1 }
}

/// Pairwise longitudinal distances and the line-of-sight neighbour relation.
#[derive(Clone, Debug, PartialEq)]
pub struct Geometry {
    n: usize,
    distances: Vec<f64>,
    adjacency: Vec<bool>,
}

impl Geometry {
    pub fn from_parts(n: usize, distances: Vec<f64>, adjacency: Vec<bool>) -> Self {
        assert_eq!(distances.len(), n * n);
        assert_eq!(adjacency.len(), n * n);
        Self { n, distances, adjacency }
    }

    /// Geometry where `edges` are adjacent at distance `distance` and every
    /// other pair is far apart. Handy for hand-built topologies.
    pub fn from_edges(n: usize, edges: &[(usize, usize)], distance: f64) -> Self {
        let mut distances = vec![f64::INFINITY; n * n];
        let mut adjacency = vec![false; n * n];
        for i in 0..n {
            distances[i * n + i] = 0.0;
        }
        for &(i, j) in edges {
            assert_ne!(i, j);
            for (a, b) in [(i, j), (j, i)] {
                distances[a * n + b] = distance;
                adjacency[a * n + b] = true;
            }
        }
        Self { n, distances, adjacency }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.distances[i * self.n + j]
    }

    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        self.adjacency[i * self.n + j]
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&j| self.adjacent(i, j))
    }
}

/// Lanes are treated as co-located, so `d = |x_i - x_j|`; neighbours are the
/// pairs within `R_los`.
pub fn compute_links(fleet: &FleetState, config: &ScenarioConfig) -> Geometry {
    let n = fleet.len();
    let mut distances = vec![0.0; n * n];
    let mut adjacency = vec![false; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = (fleet.vehicles[i].position - fleet.vehicles[j].position).abs();
            let near = d <= config.los_range;
            distances[i * n + j] = d;
            distances[j * n + i] = d;
            adjacency[i * n + j] = near;
            adjacency[j * n + i] = near;
        }
    }
    Geometry { n, distances, adjacency }
}
