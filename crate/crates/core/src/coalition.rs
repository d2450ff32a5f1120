//! Hedonic coalition formation by switch operations.
//!
//! An OBU `i` strictly prefers coalition `S1` over `S2` (both containing `i`)
//! when its own payoff is higher in `S1` and neither coalition is *least
//! preferred*. A coalition is least preferred by `i` when some other member
//! would be better off without `i`; any coalition that is not least preferred
//! beats one that is. A switch moves `i` from its coalition to another one of
//! the partition (or to a new singleton) when the result is strictly preferred
//! and not a coalition `i` has already left during this run.

use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::game::{Coalition, ValueCache};

#[derive(Debug, Error, PartialEq)]
pub enum CoalitionError {
    #[error("OBU {obu} is not a member of {coalition}")]
    NotMember { obu: usize, coalition: Coalition },
    #[error("coalitions do not partition the member set")]
    InvalidPartition,
    #[error("coalition formation did not converge within {rounds} rounds")]
    NonConvergence { rounds: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preference {
    Strict,
    Weak,
    NotPreferred,
}

/// Disjoint non-empty coalitions, kept sorted by smallest member.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    coalitions: Vec<Coalition>,
}

impl Partition {
    pub fn singletons(members: &[usize]) -> Self {
        let mut p = Self { coalitions: members.iter().map(|&i| Coalition::singleton(i)).collect() };
        p.normalize();
        p
    }

    pub fn from_coalitions(
        coalitions: Vec<Coalition>,
        members: &[usize],
    ) -> Result<Self, CoalitionError> {
        let mut p = Self { coalitions };
        p.normalize();
        if p.coalitions.iter().any(Coalition::is_empty) || !p.partitions(members) {
            return Err(CoalitionError::InvalidPartition);
        }
        Ok(p)
    }

    fn normalize(&mut self) {
        self.coalitions.retain(|c| !c.is_empty());
        self.coalitions.sort_by_key(Coalition::min_member);
    }

    pub fn coalitions(&self) -> &[Coalition] {
        &self.coalitions
    }

    pub fn len(&self) -> usize {
        self.coalitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coalitions.is_empty()
    }

    pub fn coalition_of(&self, i: usize) -> Option<&Coalition> {
        self.coalitions.iter().find(|c| c.contains(i))
    }

    /// Whether the coalitions are disjoint and their union is exactly `members`.
    pub fn partitions(&self, members: &[usize]) -> bool {
        let mut seen = HashSet::new();
        for c in &self.coalitions {
            for &i in c.members() {
                if !seen.insert(i) {
                    return false;
                }
            }
        }
        let wanted: HashSet<usize> = members.iter().copied().collect();
        seen == wanted
    }

    /// Moves `i` from its coalition into `target ∪ {i}`; an empty target
    /// makes `i` a singleton.
    pub fn apply_switch(&mut self, i: usize, target: &Coalition) {
        for c in self.coalitions.iter_mut() {
            if c.contains(i) {
                *c = c.without(i);
            } else if !target.is_empty() && c == target {
                *c = c.with(i);
            }
        }
        if target.is_empty() {
            self.coalitions.push(Coalition::singleton(i));
        }
        self.normalize();
    }

    /// Previous partition restricted to `members`; members it does not cover
    /// become singletons.
    pub fn restricted_to(&self, members: &[usize]) -> Self {
        let keep: HashSet<usize> = members.iter().copied().collect();
        let mut coalitions: Vec<Coalition> = self
            .coalitions
            .iter()
            .map(|c| Coalition::new(c.members().iter().copied().filter(|i| keep.contains(i))))
            .collect();
        let covered: HashSet<usize> =
            coalitions.iter().flat_map(|c| c.members().iter().copied()).collect();
        coalitions.extend(members.iter().filter(|i| !covered.contains(i)).map(|&i| Coalition::singleton(i)));
        let mut p = Self { coalitions };
        p.normalize();
        p
    }
}

/// Per-OBU coalitions visited and left during one formation run.
#[derive(Clone, Debug, Default)]
pub struct History {
    left: HashMap<usize, HashSet<Coalition>>,
}

impl History {
    pub fn record(&mut self, i: usize, coalition: Coalition) {
        self.left.entry(i).or_default().insert(coalition);
    }

    pub fn contains(&self, i: usize, coalition: &Coalition) -> bool {
        self.left.get(&i).is_some_and(|h| h.contains(coalition))
    }

    pub fn len(&self, i: usize) -> usize {
        self.left.get(&i).map_or(0, HashSet::len)
    }
}

/// Some other member of `s` would gain if `i` left.
pub fn least_preferred(i: usize, s: &Coalition, values: &mut ValueCache) -> bool {
    let rest = s.without(i);
    rest.members().iter().any(|&j| values.payoff(j, s) < values.payoff(j, &rest))
}

pub fn prefers(
    i: usize,
    s1: &Coalition,
    s2: &Coalition,
    values: &mut ValueCache,
) -> Result<Preference, CoalitionError> {
    for s in [s1, s2] {
        if !s.contains(i) {
            return Err(CoalitionError::NotMember { obu: i, coalition: s.clone() });
        }
    }
    if least_preferred(i, s1, values) {
        return Ok(Preference::NotPreferred);
    }
    if s1 != s2 && least_preferred(i, s2, values) {
        return Ok(Preference::Strict);
    }
    let (a, b) = (values.payoff(i, s1), values.payoff(i, s2));
    Ok(if a > b {
        Preference::Strict
    } else if a == b {
        Preference::Weak
    } else {
        Preference::NotPreferred
    })
}

/// Candidate targets for `i`: the other coalitions by ascending smallest
/// member, then the empty coalition.
fn candidates<'p>(i: usize, partition: &'p Partition) -> impl Iterator<Item = Coalition> + 'p {
    partition
        .coalitions()
        .iter()
        .filter(move |c| !c.contains(i))
        .cloned()
        .chain(std::iter::once(Coalition::empty()))
}

/// First admissible switch target for `i`, if any.
pub fn try_switch(
    i: usize,
    partition: &Partition,
    history: &History,
    values: &mut ValueCache,
) -> Option<Coalition> {
    let current = partition.coalition_of(i)?.clone();
    for target in candidates(i, partition) {
        let joined = target.with(i);
        if joined == current || history.contains(i, &joined) {
            continue;
        }
        if prefers(i, &joined, &current, values) == Ok(Preference::Strict) {
            return Some(target);
        }
    }
    None
}

#[derive(Clone, Debug, PartialEq)]
pub struct SwitchRecord {
    pub obu: usize,
    pub from: Coalition,
    pub to: Coalition,
    pub payoff_before: f64,
    pub payoff_after: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FormationOutcome {
    pub partition: Partition,
    pub switches: usize,
    pub rounds: usize,
    pub log: Vec<SwitchRecord>,
}

/// Runs switch rounds until one full round changes nothing.
///
/// Each round visits the members in a fresh uniformly random order; each
/// visited OBU performs at most one switch, recording the coalition it leaves
/// in its history first.
pub fn run_formation<R: Rng + ?Sized>(
    members: &[usize],
    initial: Partition,
    values: &mut ValueCache,
    rng: &mut R,
    max_rounds: usize,
) -> Result<FormationOutcome, CoalitionError> {
    if !initial.partitions(members) {
        return Err(CoalitionError::InvalidPartition);
    }
    let mut partition = initial;
    let mut history = History::default();
    let mut log = Vec::new();
    let mut order = members.to_vec();
    let mut rounds = 0;
    loop {
        if rounds == max_rounds {
            return Err(CoalitionError::NonConvergence { rounds });
        }
        rounds += 1;
        order.shuffle(rng);
        let mut switched = 0;
        for &i in &order {
            let Some(target) = try_switch(i, &partition, &history, values) else {
                continue;
            };
            let from = partition.coalition_of(i).cloned().expect("member present");
            let to = target.with(i);
            log.push(SwitchRecord {
                obu: i,
                payoff_before: values.payoff(i, &from),
                payoff_after: values.payoff(i, &to),
                from: from.clone(),
                to,
            });
            history.record(i, from);
            partition.apply_switch(i, &target);
            switched += 1;
        }
        if switched == 0 {
            break;
        }
    }
    Ok(FormationOutcome { partition, switches: log.len(), rounds, log })
}

/// No OBU strictly prefers joining another coalition of the partition, or
/// going alone, over staying where it is.
pub fn is_nash_stable(partition: &Partition, values: &mut ValueCache) -> bool {
    for current in partition.coalitions() {
        for &i in current.members() {
            for target in candidates(i, partition) {
                let joined = target.with(i);
                if &joined == current {
                    continue;
                }
                if prefers(i, &joined, current, values) == Ok(Preference::Strict) {
                    return false;
                }
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::LinkSnapshot;
    use crate::content::{ContentState, PacketSet};
    use crate::game::SlotContext;
    use crate::mobility::Geometry;
    use crate::rng::{stream, Stream};

    fn links(n: usize, edges: &[(usize, usize, f64)]) -> LinkSnapshot {
        let pairs: Vec<(usize, usize)> = edges.iter().map(|&(i, j, _)| (i, j)).collect();
        let mut prob = vec![0.0; n * n];
        for &(i, j, p) in edges {
            prob[i * n + j] = p;
            prob[j * n + i] = p;
        }
        LinkSnapshot::from_parts(Geometry::from_edges(n, &pairs, 30.0), prob)
    }

    fn content(m: usize, owned: &[&[usize]]) -> ContentState {
        ContentState::new(owned.iter().map(|o| PacketSet::from_indices(m, o.iter().copied())).collect())
    }

    /// Two transmitters 0 and 1, each with a private receiver (2 and 3).
    fn two_cells() -> (LinkSnapshot, ContentState) {
        (
            links(4, &[(0, 2, 0.9), (1, 3, 0.8)]),
            content(4, &[&[0, 1], &[2, 3], &[], &[]]),
        )
    }

    #[test]
    fn preference_is_irreflexive() {
        let (l, c) = two_cells();
        let mut v = ValueCache::new(SlotContext::new(&l, &c, 100.0, 1.0));
        for s in [Coalition::singleton(0), Coalition::new([0, 1])] {
            assert_ne!(prefers(0, &s, &s, &mut v), Ok(Preference::Strict));
        }
        assert_eq!(
            prefers(0, &Coalition::singleton(0), &Coalition::singleton(0), &mut v),
            Ok(Preference::Weak)
        );
    }

    #[test]
    fn non_member_is_an_error() {
        let (l, c) = two_cells();
        let mut v = ValueCache::new(SlotContext::new(&l, &c, 100.0, 1.0));
        assert!(matches!(
            prefers(0, &Coalition::singleton(1), &Coalition::singleton(0), &mut v),
            Err(CoalitionError::NotMember { obu: 0, .. })
        ));
    }

    #[test]
    fn least_preferred_loses_to_anything_else() {
        // 1 has a private receiver 3; 0 is adjacent to 3 and owns nothing
        // useful, so adding 0 to {1} jams 3 and hurts 1.
        let l = links(4, &[(0, 3, 0.9), (1, 3, 0.9), (0, 2, 0.1)]);
        let c = content(4, &[&[0], &[2], &[0], &[]]);
        let mut v = ValueCache::new(SlotContext::new(&l, &c, 100.0, 1.0));
        let pair = Coalition::new([0, 1]);
        assert!(v.payoff(1, &pair) < v.payoff(1, &Coalition::singleton(1)));
        assert!(least_preferred(0, &pair, &mut v));
        let alone = Coalition::singleton(0);
        assert_eq!(prefers(0, &alone, &pair, &mut v), Ok(Preference::Strict));
        assert_eq!(prefers(0, &pair, &alone, &mut v), Ok(Preference::NotPreferred));
    }

    #[test]
    fn exhausted_history_blocks_switch() {
        let (l, c) = two_cells();
        let mut v = ValueCache::new(SlotContext::new(&l, &c, 100.0, 1.0));
        let p = Partition::singletons(&[0, 1, 2, 3]);
        let mut h = History::default();
        for target in [[0, 1], [0, 2], [0, 3]] {
            h.record(0, Coalition::new(target));
        }
        assert_eq!(try_switch(0, &p, &h, &mut v), None);
    }

    #[test]
    fn negative_member_leaves_for_singleton() {
        // 0 and 1 share receiver 2: together nobody is served and the
        // coalition is worth −αR − 2β; alone 0 serves 2.
        let l = links(3, &[(0, 2, 0.9), (1, 2, 0.9)]);
        let c = content(2, &[&[0], &[1], &[]]);
        let mut v = ValueCache::new(SlotContext::new(&l, &c, 100.0, 1.0));
        let pair = Coalition::new([0, 1]);
        let p = Partition::from_coalitions(vec![pair.clone(), Coalition::singleton(2)], &[0, 1, 2])
            .unwrap();
        assert!(v.payoff(0, &pair) < 0.0);
        assert!(v.payoff(0, &Coalition::singleton(0)) > v.payoff(0, &pair));
        let target = try_switch(0, &p, &History::default(), &mut v);
        // {2} ∪ {0} jams nothing but 2 transmits and cannot receive; the
        // empty target is strictly better for 0.
        let target = target.expect("a switch exists");
        let mut next = p.clone();
        next.apply_switch(0, &target);
        assert!(next.partitions(&[0, 1, 2]));
        assert!(v.payoff(0, next.coalition_of(0).unwrap()) > v.payoff(0, &pair));
    }

    #[test]
    fn switch_rewrites_partition() {
        let mut p = Partition::from_coalitions(
            vec![Coalition::new([0, 1]), Coalition::new([2]), Coalition::new([3, 4])],
            &[0, 1, 2, 3, 4],
        )
        .unwrap();
        p.apply_switch(2, &Coalition::new([3, 4]));
        assert_eq!(p.coalitions(), &[Coalition::new([0, 1]), Coalition::new([2, 3, 4])]);
        p.apply_switch(0, &Coalition::empty());
        assert_eq!(
            p.coalitions(),
            &[Coalition::singleton(0), Coalition::singleton(1), Coalition::new([2, 3, 4])]
        );
    }

    #[test]
    fn invalid_partitions_rejected() {
        assert_eq!(
            Partition::from_coalitions(vec![Coalition::new([0, 1]), Coalition::new([1])], &[0, 1]),
            Err(CoalitionError::InvalidPartition)
        );
        assert_eq!(
            Partition::from_coalitions(vec![Coalition::new([0])], &[0, 1]),
            Err(CoalitionError::InvalidPartition)
        );
    }

    #[test]
    fn single_member_formation() {
        let l = links(1, &[]);
        let c = content(3, &[&[0]]);
        let mut v = ValueCache::new(SlotContext::new(&l, &c, 100.0, 1.0));
        let out = run_formation(&[0], Partition::singletons(&[0]), &mut v, &mut stream(0, Stream::Formation, 0, 0), 10)
            .unwrap();
        assert_eq!(out.partition.coalitions(), &[Coalition::singleton(0)]);
        assert_eq!(out.switches, 0);
        assert_eq!(out.rounds, 1);
    }

    #[test]
    fn complementary_pair_forms() {
        let (l, c) = two_cells();
        let members = [0, 1, 2, 3];
        let mut v = ValueCache::new(SlotContext::new(&l, &c, 100.0, 1.0));
        // Exhaustive check over the two partitions of {0, 1}: both members
        // earn more together.
        let pair = Coalition::new([0, 1]);
        assert!(v.payoff(0, &pair) > v.payoff(0, &Coalition::singleton(0)));
        assert!(v.payoff(1, &pair) > v.payoff(1, &Coalition::singleton(1)));
        for seed in 0..20 {
            let out = run_formation(
                &members,
                Partition::singletons(&members),
                &mut v,
                &mut stream(seed, Stream::Formation, 0, 0),
                100,
            )
            .unwrap();
            assert_eq!(out.partition.coalition_of(0), Some(&pair), "seed {seed}");
            assert!(is_nash_stable(&out.partition, &mut v));
        }
    }

    #[test]
    fn negative_singletons_are_stable() {
        // A clique: any coalition of two or more transmitters serves nobody.
        let l = links(3, &[(0, 1, 0.9), (0, 2, 0.9), (1, 2, 0.9)]);
        let c = content(3, &[&[0], &[1], &[2]]);
        let mut v = ValueCache::new(SlotContext::new(&l, &c, 100.0, 1.0));
        let p = Partition::singletons(&[0, 1, 2]);
        assert!(is_nash_stable(&p, &mut v));
    }

    #[test]
    fn profitable_deviation_is_unstable() {
        let (l, c) = two_cells();
        let mut v = ValueCache::new(SlotContext::new(&l, &c, 100.0, 1.0));
        let p = Partition::singletons(&[0, 1, 2, 3]);
        assert!(!is_nash_stable(&p, &mut v));
        let joined = Partition::from_coalitions(
            vec![Coalition::new([0, 1]), Coalition::singleton(2), Coalition::singleton(3)],
            &[0, 1, 2, 3],
        )
        .unwrap();
        assert!(is_nash_stable(&joined, &mut v));
    }

    #[test]
    fn switches_are_strict_improvements() {
        let l = links(
            6,
            &[(0, 3, 0.9), (1, 4, 0.5), (2, 5, 0.7), (0, 4, 0.2), (1, 2, 0.3)],
        );
        let c = content(5, &[&[0, 1], &[2, 3], &[4], &[], &[1], &[0, 4]]);
        let members: Vec<usize> = (0..6).collect();
        let mut v = ValueCache::new(SlotContext::new(&l, &c, 100.0, 1.0));
        for seed in 0..30 {
            let out = run_formation(
                &members,
                Partition::singletons(&members),
                &mut v,
                &mut stream(seed, Stream::Formation, 0, 0),
                1000,
            )
            .unwrap();
            assert!(out.partition.partitions(&members));
            for rec in &out.log {
                let strict = rec.payoff_after > rec.payoff_before
                    || least_preferred(rec.obu, &rec.from, &mut v);
                assert!(strict, "{rec:?}");
            }
            assert!(is_nash_stable(&out.partition, &mut v));
        }
    }
}
