//! Packet possession bookkeeping.

use crate::config::ScenarioConfig;
use crate::mobility::FleetState;

/// Membership set over the `M` packets of the file.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PacketSet {
    words: Vec<u64>,
    universe: usize,
    count: usize,
}

impl PacketSet {
    pub fn empty(universe: usize) -> Self {
        Self { words: vec![0; universe.div_ceil(64)], universe, count: 0 }
    }

    pub fn full(universe: usize) -> Self {
        let mut set = Self::empty(universe);
        for k in 0..universe {
            set.insert(k);
        }
        set
    }

    pub fn from_indices(universe: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut set = Self::empty(universe);
        for k in indices {
            set.insert(k);
        }
        set
    }

    /// Circular run `start, start+1, …, start+len-1 (mod M)`.
    pub fn arc(universe: usize, start: usize, len: usize) -> Self {
        Self::from_indices(universe, (0..len.min(universe)).map(|k| (start + k) % universe))
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn is_full(&self) -> bool {
        self.count == self.universe
    }

    pub fn contains(&self, packet: usize) -> bool {
        packet < self.universe && self.words[packet / 64] & (1 << (packet % 64)) != 0
    }

    /// Returns `true` if the packet was not owned before.
    pub fn insert(&mut self, packet: usize) -> bool {
        assert!(packet < self.universe, "packet {packet} outside 0..{}", self.universe);
        let (w, bit) = (packet / 64, 1u64 << (packet % 64));
        if self.words[w] & bit != 0 {
            return false;
        }
        self.words[w] |= bit;
        self.count += 1;
        true
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.universe).filter(move |&k| self.contains(k))
    }

    /// Whether the owned packets form a single circular run (empty and full
    /// sets count as runs).
    pub fn is_circular_arc(&self) -> bool {
        if self.count == 0 || self.count == self.universe {
            return true;
        }
        // A circular run has exactly one owned packet whose predecessor is missing.
        let starts = (0..self.universe)
            .filter(|&k| self.contains(k) && !self.contains((k + self.universe - 1) % self.universe))
            .count();
        starts == 1
    }
}

/// A received packet: `sender` broadcast `packet` and `receiver` decoded it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Delivery {
    pub receiver: usize,
    pub sender: usize,
    pub packet: usize,
}

/// What every OBU owns, plus the running total `P`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContentState {
    sets: Vec<PacketSet>,
    total: u64,
}

impl ContentState {
    pub fn new(sets: Vec<PacketSet>) -> Self {
        let total = sets.iter().map(|s| s.len() as u64).sum();
        Self { sets, total }
    }

    pub fn set(&self, obu: usize) -> &PacketSet {
        &self.sets[obu]
    }

    pub fn sets(&self) -> &[PacketSet] {
        &self.sets
    }

    pub fn obus(&self) -> usize {
        self.sets.len()
    }

    pub fn packets(&self) -> usize {
        self.sets.first().map_or(0, PacketSet::universe)
    }

    /// `P = Σ |Γ_i|`.
    pub fn possessed(&self) -> u64 {
        self.total
    }

    pub fn demand(&self) -> u64 {
        (self.obus() * self.packets()) as u64
    }

    /// `N·M − P`.
    pub fn remaining(&self) -> u64 {
        self.demand() - self.total
    }

    pub fn is_complete(&self) -> bool {
        self.total == self.demand()
    }

    /// Unions each delivery into its receiver's set; returns how many were new.
    pub fn apply_deliveries(&mut self, deliveries: &[Delivery]) -> u64 {
        let mut novel = 0;
        for d in deliveries {
            if self.sets[d.receiver].insert(d.packet) {
                novel += 1;
            }
        }
        self.total += novel;
        novel
    }
}

/// Packets collected while crossing the RSU coverage: `floor(c0 D / (v s))`,
/// clipped to `M`.
pub fn initial_count(config: &ScenarioConfig, speed: f64) -> usize {
    let n = (config.v2r_rate * config.rsu_diameter / (speed * config.packet_bits())).floor();
    (n.max(0.0) as usize).min(config.packets)
}

/// V2R allocation at the start of the V2V phase.
///
/// The front-most OBU starts its arc at packet 0. Every other OBU continues
/// from its nearest predecessor `j` (next vehicle ahead, either lane) with an
/// offset of `floor(c0 d_ij / (v_i s))` packets.
pub fn initial_allocation(fleet: &FleetState, config: &ScenarioConfig) -> ContentState {
    let m = config.packets;
    let s = config.packet_bits();
    let mut sets = vec![PacketSet::empty(m); fleet.len()];
    let mut prev: Option<(usize, usize)> = None;
    for i in fleet.front_to_back() {
        let v = &fleet.vehicles[i];
        let start = match prev {
            None => 0,
            Some((j, theta_j)) => {
                let gap = fleet.vehicles[j].position - v.position;
                let shift = (config.v2r_rate * gap / (v.speed * s)).floor();
                ((theta_j as f64 + shift) % m as f64) as usize
            }
        };
        sets[i] = PacketSet::arc(m, start, initial_count(config, v.speed));
        prev = Some((i, start));
    }
    ContentState::new(sets)
}
