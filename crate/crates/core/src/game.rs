//! Per-slot value structure of the broadcast game.
//!
//! A coalition `S` is a set of OBUs that broadcast together in the current
//! slot. Each member picks the owned packet that maximises its expected number
//! of collision-free, novel receptions; the sum over members is the expected
//! service rate `x`. The coalition value is the delay-reduction utility of
//! `x` minus a coordination cost linear in `|S|`, shared among members in
//! proportion to their contributions.

use std::collections::HashMap;
use std::fmt;

use crate::channel::LinkSnapshot;
use crate::content::ContentState;

/// Sorted, duplicate-free set of OBU ids.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Coalition(Vec<usize>);

impl Coalition {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn singleton(i: usize) -> Self {
        Self(vec![i])
    }

    pub fn new(members: impl IntoIterator<Item = usize>) -> Self {
        let mut v: Vec<usize> = members.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        Self(v)
    }

    pub fn members(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    pub fn min_member(&self) -> Option<usize> {
        self.0.first().copied()
    }

    pub fn with(&self, i: usize) -> Self {
        let mut v = self.0.clone();
        if let Err(pos) = v.binary_search(&i) {
            v.insert(pos, i);
        }
        Self(v)
    }

    pub fn without(&self, i: usize) -> Self {
        Self(self.0.iter().copied().filter(|&k| k != i).collect())
    }
}

impl fmt::Display for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

/// Everything a coalition evaluation depends on within one slot.
#[derive(Clone, Copy, Debug)]
pub struct SlotContext<'a> {
    pub links: &'a LinkSnapshot,
    pub content: &'a ContentState,
    /// Remaining demand `R = N·M − P`, in packets.
    pub remaining: u64,
    pub alpha: f64,
    pub beta: f64,
}

impl<'a> SlotContext<'a> {
    pub fn new(links: &'a LinkSnapshot, content: &'a ContentState, alpha: f64, beta: f64) -> Self {
        Self { links, content, remaining: content.remaining(), alpha, beta }
    }
}

/// Neighbours of transmitter `i` that are not transmitting and hear no
/// member of `transmitters` other than `i`.
pub fn eligible_receivers(i: usize, transmitters: &Coalition, ctx: &SlotContext) -> Vec<usize> {
    ctx.links
        .neighbors(i)
        .filter(|&j| !transmitters.contains(j))
        .filter(|&j| {
            transmitters.members().iter().all(|&k| k == i || !ctx.links.adjacent(j, k))
        })
        .collect()
}

/// Owned packet with the largest expected number of novel receptions among
/// the eligible receivers, as `(packet, score)`. Ties go to the lowest index;
/// `None` when nothing owned would be useful.
pub fn greedy_packet(i: usize, transmitters: &Coalition, ctx: &SlotContext) -> Option<(usize, f64)> {
    let own = ctx.content.set(i);
    if own.is_empty() {
        return None;
    }
    let mut score = vec![0.0; own.universe()];
    for j in eligible_receivers(i, transmitters, ctx) {
        let p = ctx.links.prob(i, j);
        if p <= 0.0 {
            continue;
        }
        let theirs = ctx.content.set(j);
        for k in own.iter().filter(|&k| !theirs.contains(k)) {
            score[k] += p;
        }
    }
    let mut best: Option<(usize, f64)> = None;
    for k in own.iter() {
        if best.is_none_or(|(_, s)| score[k] > s) {
            best = Some((k, score[k]));
        }
    }
    best.filter(|&(_, s)| s > 0.0)
}

/// Expected number of packets delivered in the slot when `transmitters`
/// broadcast their greedy packets.
pub fn expected_service_rate(transmitters: &Coalition, ctx: &SlotContext) -> f64 {
    transmitters
        .members()
        .iter()
        .filter_map(|&i| greedy_packet(i, transmitters, ctx))
        .map(|(_, s)| s)
        .sum()
}

/// Delay reduction relative to a one-packet-per-slot schedule:
/// `α (x²/2 + (R − ½) x − R)`.
pub fn utility(rate: f64, remaining: f64, alpha: f64) -> f64 {
    alpha * (rate * rate / 2.0 + (remaining - 0.5) * rate - remaining)
}

/// `β |S|` for proper coalitions, nothing for singletons.
pub fn cost(size: usize, beta: f64) -> f64 {
    if size > 1 {
        beta * size as f64
    } else {
        0.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoalitionEvaluation {
    pub coalition: Coalition,
    /// Greedy packet per member, aligned with `coalition.members()`.
    pub packets: Vec<Option<usize>>,
    /// Expected receptions contributed by each member.
    pub rates: Vec<f64>,
    pub total_rate: f64,
    pub utility: f64,
    pub cost: f64,
    pub value: f64,
    pub payoffs: Vec<f64>,
}

impl CoalitionEvaluation {
    pub fn payoff(&self, i: usize) -> Option<f64> {
        let idx = self.coalition.members().binary_search(&i).ok()?;
        Some(self.payoffs[idx])
    }
}

/// Evaluates `S` as the only transmitting set.
///
/// With `x > 0` payoffs are `φ_i = (x_i / x) V`, which sums to `V`. With
/// `x = 0` there are no contributions to weigh; every member then carries the
/// whole utility shortfall plus its own share of the cost, `φ_i = U − C/|S|`,
/// so pooling silent OBUs never dilutes the shortfall.
pub fn coalition_value(coalition: &Coalition, ctx: &SlotContext) -> CoalitionEvaluation {
    assert!(!coalition.is_empty(), "cannot evaluate the empty coalition");
    let mut packets = Vec::with_capacity(coalition.len());
    let mut rates = Vec::with_capacity(coalition.len());
    for &i in coalition.members() {
        match greedy_packet(i, coalition, ctx) {
            Some((k, s)) => {
                packets.push(Some(k));
                rates.push(s);
            }
            None => {
                packets.push(None);
                rates.push(0.0);
            }
        }
    }
    let total_rate: f64 = rates.iter().sum();
    let u = utility(total_rate, ctx.remaining as f64, ctx.alpha);
    let c = cost(coalition.len(), ctx.beta);
    let value = u - c;
    let payoffs = if total_rate > 0.0 {
        rates.iter().map(|r| r / total_rate * value).collect()
    } else {
        vec![u - c / coalition.len() as f64; coalition.len()]
    };
    CoalitionEvaluation {
        coalition: coalition.clone(),
        packets,
        rates,
        total_rate,
        utility: u,
        cost: c,
        value,
        payoffs,
    }
}

/// Memoised [`coalition_value`] for one slot context.
pub struct ValueCache<'a> {
    ctx: SlotContext<'a>,
    cache: HashMap<Coalition, CoalitionEvaluation>,
}

impl<'a> ValueCache<'a> {
    pub fn new(ctx: SlotContext<'a>) -> Self {
        Self { ctx, cache: HashMap::new() }
    }

    pub fn context(&self) -> &SlotContext<'a> {
        &self.ctx
    }

    pub fn evaluate(&mut self, coalition: &Coalition) -> &CoalitionEvaluation {
        let ctx = self.ctx;
        self.cache.entry(coalition.clone()).or_insert_with(|| coalition_value(coalition, &ctx))
    }

    /// `φ_i(S)`; panics if `i ∉ S`.
    pub fn payoff(&mut self, i: usize, coalition: &Coalition) -> f64 {
        self.evaluate(coalition).payoff(i).expect("payoff requested for a non-member")
    }

    pub fn evaluations(&self) -> usize {
        self.cache.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::content::PacketSet;
    use crate::mobility::Geometry;

    /// Links over `edges` with explicit symmetric probabilities.
    fn links(n: usize, edges: &[(usize, usize, f64)]) -> LinkSnapshot {
        let pairs: Vec<(usize, usize)> = edges.iter().map(|&(i, j, _)| (i, j)).collect();
        let geometry = Geometry::from_edges(n, &pairs, 30.0);
        let mut prob = vec![0.0; n * n];
        for &(i, j, p) in edges {
            prob[i * n + j] = p;
            prob[j * n + i] = p;
        }
        LinkSnapshot::from_parts(geometry, prob)
    }

    fn content(m: usize, owned: &[&[usize]]) -> ContentState {
        ContentState::new(owned.iter().map(|o| PacketSet::from_indices(m, o.iter().copied())).collect())
    }

    #[test]
    fn lone_transmitter_reaches_private_neighbor() {
        let l = links(3, &[(0, 1, 0.5), (1, 2, 0.5)]);
        let c = content(2, &[&[0], &[], &[]]);
        let ctx = SlotContext::new(&l, &c, 1.0, 1.0);
        assert_eq!(eligible_receivers(0, &Coalition::singleton(0), &ctx), vec![1]);
    }

    #[test]
    fn shared_neighbor_is_jammed() {
        let l = links(3, &[(0, 1, 0.5), (1, 2, 0.5)]);
        let c = content(2, &[&[0], &[], &[1]]);
        let ctx = SlotContext::new(&l, &c, 1.0, 1.0);
        let s = Coalition::new([0, 2]);
        assert!(eligible_receivers(0, &s, &ctx).is_empty());
        assert!(eligible_receivers(2, &s, &ctx).is_empty());
    }

    #[test]
    fn transmitters_do_not_receive() {
        let l = links(3, &[(0, 1, 0.5), (0, 2, 0.5)]);
        let c = content(2, &[&[0], &[1], &[]]);
        let ctx = SlotContext::new(&l, &c, 1.0, 1.0);
        let s = Coalition::new([0, 1]);
        assert_eq!(eligible_receivers(0, &s, &ctx), vec![2]);
        assert!(!eligible_receivers(0, &s, &ctx).contains(&1));
    }

    #[test]
    fn greedy_without_receivers_is_none() {
        let l = links(2, &[]);
        let c = content(2, &[&[0, 1], &[]]);
        let ctx = SlotContext::new(&l, &c, 1.0, 1.0);
        assert_eq!(greedy_packet(0, &Coalition::singleton(0), &ctx), None);
        let c = content(2, &[&[], &[]]);
        let ctx = SlotContext::new(&l, &c, 1.0, 1.0);
        assert_eq!(greedy_packet(0, &Coalition::singleton(0), &ctx), None);
    }

    #[test]
    fn greedy_single_candidate() {
        let l = links(2, &[(0, 1, 0.7)]);
        let c = content(3, &[&[0], &[]]);
        let ctx = SlotContext::new(&l, &c, 1.0, 1.0);
        assert_eq!(greedy_packet(0, &Coalition::singleton(0), &ctx), Some((0, 0.7)));
    }

    #[test]
    fn greedy_picks_best_packet() {
        // A lacks γ0 (p = 0.4), B lacks γ1 (p = 0.9).
        let l = links(3, &[(0, 1, 0.4), (0, 2, 0.9)]);
        let c = content(2, &[&[0, 1], &[1], &[0]]);
        let ctx = SlotContext::new(&l, &c, 1.0, 1.0);
        // Brute force over both candidates.
        let score = |k: usize| -> f64 {
            [(1usize, 0.4), (2usize, 0.9)]
                .iter()
                .filter(|(j, _)| !c.set(*j).contains(k))
                .map(|(_, p)| p)
                .sum()
        };
        assert!(score(1) > score(0));
        assert_eq!(greedy_packet(0, &Coalition::singleton(0), &ctx), Some((1, score(1))));
    }

    #[test]
    fn greedy_tie_goes_to_lowest_index() {
        let l = links(3, &[(0, 1, 0.5), (0, 2, 0.5)]);
        let c = content(4, &[&[1, 3], &[], &[]]);
        let ctx = SlotContext::new(&l, &c, 1.0, 1.0);
        assert_eq!(greedy_packet(0, &Coalition::singleton(0), &ctx), Some((1, 1.0)));
    }

    #[test]
    fn service_rate_cases() {
        let l = links(3, &[(0, 1, 0.5), (0, 2, 0.5)]);
        let c = content(2, &[&[0], &[], &[]]);
        let ctx = SlotContext::new(&l, &c, 1.0, 1.0);
        assert_eq!(expected_service_rate(&Coalition::empty(), &ctx), 0.0);
        assert_eq!(expected_service_rate(&Coalition::singleton(0), &ctx), 1.0);

        // Two transmitters whose receivers are all common neighbours.
        let l = links(4, &[(0, 2, 0.9), (0, 3, 0.9), (1, 2, 0.9), (1, 3, 0.9)]);
        let c = content(2, &[&[0], &[1], &[], &[]]);
        let ctx = SlotContext::new(&l, &c, 1.0, 1.0);
        assert_eq!(expected_service_rate(&Coalition::new([0, 1]), &ctx), 0.0);
    }

    #[test]
    fn utility_values() {
        for (r, a) in [(0.0, 1.0), (10.0, 100.0), (799.0, 3.5)] {
            assert_eq!(utility(1.0, r, a), 0.0);
        }
        assert_eq!(utility(0.0, 10.0, 100.0), -1000.0);
        assert_eq!(utility(2.0, 10.0, 1.0), 11.0);
    }

    #[test]
    fn neutral_singleton() {
        let l = links(2, &[(0, 1, 1.0)]);
        let c = content(2, &[&[0], &[]]);
        let ctx = SlotContext::new(&l, &c, 100.0, 1.0);
        let e = coalition_value(&Coalition::singleton(0), &ctx);
        assert_eq!(e.total_rate, 1.0);
        assert_eq!((e.utility, e.cost, e.value), (0.0, 0.0, 0.0));
        assert_eq!(e.payoffs, vec![0.0]);
    }

    #[test]
    fn silent_triple() {
        // Fully connected: any two transmitters jam every receiver, x = 0.
        let l = links(3, &[(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)]);
        let c = content(6, &[&[0], &[1], &[2, 3, 4, 5]]);
        let ctx = SlotContext::new(&l, &c, 100.0, 1.0);
        assert_eq!(ctx.remaining, 12);
        let ctx = SlotContext { remaining: 5, ..ctx };
        let e = coalition_value(&Coalition::new([0, 1, 2]), &ctx);
        assert_eq!(e.total_rate, 0.0);
        assert_eq!(e.value, -503.0);
        // Each member carries the full shortfall and a third of the cost.
        assert_eq!(e.payoffs, vec![-501.0; 3]);
    }

    #[test]
    fn budget_balance_with_positive_rate() {
        let l = links(5, &[(0, 1, 0.6), (2, 3, 0.8), (4, 3, 0.3)]);
        let c = content(4, &[&[0, 1], &[], &[2], &[], &[3]]);
        let ctx = SlotContext::new(&l, &c, 100.0, 1.0);
        let e = coalition_value(&Coalition::new([0, 2]), &ctx);
        assert!((e.total_rate - 1.4).abs() < 1e-12);
        assert!((e.payoffs.iter().sum::<f64>() - e.value).abs() < 1e-9);
        assert!((e.value - e.utility + e.cost).abs() < 1e-12);
    }

    #[test]
    fn cache_returns_same_evaluation() {
        let l = links(3, &[(0, 1, 0.6), (1, 2, 0.6)]);
        let c = content(2, &[&[0], &[], &[1]]);
        let ctx = SlotContext::new(&l, &c, 100.0, 1.0);
        let mut cache = ValueCache::new(ctx);
        let s = Coalition::new([0, 2]);
        let first = cache.evaluate(&s).clone();
        assert_eq!(cache.evaluate(&s), &first);
        assert_eq!(cache.evaluations(), 1);
        assert_eq!(first, coalition_value(&s, &ctx));
    }

    #[test]
    fn coalition_set_ops() {
        let s = Coalition::new([4, 1, 4, 2]);
        assert_eq!(s.members(), &[1, 2, 4]);
        assert_eq!(s.with(3).members(), &[1, 2, 3, 4]);
        assert_eq!(s.with(2), s);
        assert_eq!(s.without(2).members(), &[1, 4]);
        assert_eq!(s.min_member(), Some(1));
        assert_eq!(s.to_string(), "{1,2,4}");
    }
}
