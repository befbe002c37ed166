//! Exact brute-force distributions over push outcomes.
//!
//! Everything here enumerates the full probability space with rational
//! arithmetic, independently of the sampling implementations in
//! [`crate::protocol`] and the coupled samplers in the parent module. The
//! enumeration guard rejects instances whose joint choice space exceeds
//! [`ENUMERATION_GUARD`].

use num::{BigInt, BigRational, One, Zero};
use std::collections::BTreeMap;

use crate::dyngraph::GraphSnapshot;
use crate::error::{Error, Result};
use crate::nodeset::NodeSet;

use super::{modify_graph, ModifiedGraph};

/// Maximum number of joint neighbor choices an instance may have.
pub const ENUMERATION_GUARD: u64 = 10_000_000;

/// Exact probability distribution over push outcomes, keyed by the number
/// of newly informed (real) nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeDistribution {
    support: BTreeMap<u32, BigRational>,
}

impl OutcomeDistribution {
    /// Build from atom counts over a common denominator.
    pub fn from_counts(counts: BTreeMap<u32, u64>, denominator: u64) -> Self {
        debug_assert_eq!(counts.values().sum::<u64>(), denominator);
        let support = counts
            .into_iter()
            .map(|(k, c)| {
                (
                    k,
                    BigRational::new(BigInt::from(c), BigInt::from(denominator)),
                )
            })
            .collect();
        Self { support }
    }

    /// Build from explicit probabilities; must sum to exactly one.
    pub fn from_probabilities(support: BTreeMap<u32, BigRational>) -> Result<Self> {
        let dist = Self { support };
        if !dist.total().is_one() {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {}, not 1",
                dist.total()
            )));
        }
        Ok(dist)
    }

    pub fn point_mass(value: u32) -> Self {
        let mut support = BTreeMap::new();
        support.insert(value, BigRational::one());
        Self { support }
    }

    pub fn support(&self) -> &BTreeMap<u32, BigRational> {
        &self.support
    }

    pub fn probability(&self, value: u32) -> BigRational {
        self.support.get(&value).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn probability_f64(&self, value: u32) -> f64 {
        ratio_to_f64(&self.probability(value))
    }

    pub fn total(&self) -> BigRational {
        self.support.values().sum()
    }

    pub fn is_normalized(&self) -> bool {
        self.total().is_one()
    }

    pub fn mean(&self) -> BigRational {
        self.support
            .iter()
            .map(|(&k, p)| BigRational::from(BigInt::from(k)) * p)
            .sum()
    }

    pub fn max_value(&self) -> u32 {
        self.support.keys().next_back().copied().unwrap_or(0)
    }

    /// Pr[X ≤ h].
    pub fn cdf(&self, h: u32) -> BigRational {
        self.support
            .iter()
            .filter(|&(&k, _)| k <= h)
            .map(|(_, p)| p)
            .sum()
    }

    /// Pr[X ≥ threshold] for a rational threshold.
    pub fn tail_at_least(&self, threshold: &BigRational) -> BigRational {
        self.support
            .iter()
            .filter(|&(&k, _)| &BigRational::from(BigInt::from(k)) >= threshold)
            .map(|(_, p)| p)
            .sum()
    }
}

pub(crate) fn ratio_to_f64(r: &BigRational) -> f64 {
    let numer = r.numer();
    let denom = r.denom();
    // Exact for the modest denominators the guard admits.
    use num::ToPrimitive;
    numer.to_f64().unwrap_or(f64::NAN) / denom.to_f64().unwrap_or(f64::NAN)
}

/// Neighbor lists of the nodes that actually push (informed, degree ≥ 1).
fn active_pushers(graph: &GraphSnapshot, informed: &NodeSet) -> Vec<Vec<u32>> {
    let adj = graph.adjacency();
    informed
        .iter()
        .map(|u| adj.neighbors(u).to_vec())
        .filter(|nbrs| !nbrs.is_empty())
        .collect()
}

fn choice_space(pushers: &[Vec<u32>]) -> Result<u64> {
    let mut product = 1u64;
    for nbrs in pushers {
        product = product.saturating_mul(nbrs.len() as u64);
        if product > ENUMERATION_GUARD {
            return Err(Error::InstanceTooLarge(format!(
                "joint choice space exceeds {ENUMERATION_GUARD}"
            )));
        }
    }
    Ok(product)
}

/// Walk every joint choice of push targets; `visit` sees the set of newly
/// informed nodes with id below `real_limit`.
fn walk_choices(
    pushers: &[Vec<u32>],
    informed: &NodeSet,
    real_limit: u32,
    newly: &mut NodeSet,
    visit: &mut impl FnMut(&NodeSet),
) {
    match pushers.split_first() {
        None => visit(newly),
        Some((first, rest)) => {
            for &v in first {
                let fresh = v < real_limit && !informed.contains(v) && newly.insert(v);
                walk_choices(rest, informed, real_limit, newly, visit);
                if fresh {
                    newly.remove(v);
                }
            }
        }
    }
}

/// Exact distribution of the number of newly informed nodes when `informed`
/// performs one Push operation on `graph`.
pub fn exact_push_distribution(
    graph: &GraphSnapshot,
    informed: &NodeSet,
) -> Result<OutcomeDistribution> {
    let pushers = active_pushers(graph, informed);
    let denominator = choice_space(&pushers)?;
    let mut counts: BTreeMap<u32, u64> = BTreeMap::new();
    let mut newly = NodeSet::new(graph.n());
    walk_choices(
        &pushers,
        informed,
        graph.n() as u32,
        &mut newly,
        &mut |newly| {
            *counts.entry(newly.len() as u32).or_insert(0) += 1;
        },
    );
    Ok(OutcomeDistribution::from_counts(counts, denominator))
}

/// Exact distribution over the resulting informed set (keyed by the sorted
/// node list) of one Push operation.
pub fn exact_push_set_distribution(
    graph: &GraphSnapshot,
    informed: &NodeSet,
) -> Result<BTreeMap<Vec<u32>, BigRational>> {
    let pushers = active_pushers(graph, informed);
    let denominator = choice_space(&pushers)?;
    let mut counts: BTreeMap<Vec<u32>, u64> = BTreeMap::new();
    let mut newly = NodeSet::new(graph.n());
    walk_choices(
        &pushers,
        informed,
        graph.n() as u32,
        &mut newly,
        &mut |newly| {
            let mut key = informed.to_vec();
            key.extend(newly.iter());
            key.sort_unstable();
            *counts.entry(key).or_insert(0) += 1;
        },
    );
    Ok(counts
        .into_iter()
        .map(|(k, c)| {
            (
                k,
                BigRational::new(BigInt::from(c), BigInt::from(denominator)),
            )
        })
        .collect())
}

/// Exact distribution of newly informed *real* nodes when `informed`
/// performs one Push operation on the (I,b)-modified graph.
pub fn exact_modified_push_distribution(
    graph: &GraphSnapshot,
    informed: &NodeSet,
    b: usize,
) -> Result<OutcomeDistribution> {
    let modified = modify_graph(graph, informed, b)?;
    exact_modified_distribution(&modified)
}

pub(crate) fn exact_modified_distribution(
    modified: &ModifiedGraph,
) -> Result<OutcomeDistribution> {
    let informed_ext = NodeSet::from_iter(modified.graph.n(), modified.informed.iter());
    let pushers = active_pushers(&modified.graph, &informed_ext);
    let denominator = choice_space(&pushers)?;
    let mut counts: BTreeMap<u32, u64> = BTreeMap::new();
    let mut newly = NodeSet::new(modified.graph.n());
    walk_choices(
        &pushers,
        &informed_ext,
        modified.base_n as u32,
        &mut newly,
        &mut |newly| {
            *counts.entry(newly.len() as u32).or_insert(0) += 1;
        },
    );
    Ok(OutcomeDistribution::from_counts(counts, denominator))
}

/// Exact expected completion round of Push on a static graph, computed on
/// the 2^n informed-set Markov chain. Independent of the simulator: the
/// transition law comes from [`exact_push_set_distribution`].
pub fn exact_push_absorption_time(graph: &GraphSnapshot, source: u32) -> Result<BigRational> {
    let n = graph.n();
    if n > 16 {
        return Err(Error::InstanceTooLarge(format!(
            "absorption chain has 2^{n} states"
        )));
    }
    if source as usize >= n {
        return Err(Error::InvalidParameter(format!(
            "source {source} out of range for n={n}"
        )));
    }
    let full: u32 = (1u32 << n) - 1;
    let source_bit = 1u32 << source;
    // Masks containing the source, processed by descending popcount so every
    // strictly-larger successor is already solved.
    let mut masks: Vec<u32> = (0..=full).filter(|m| m & source_bit != 0).collect();
    masks.sort_by_key(|m| std::cmp::Reverse(m.count_ones()));
    let mut expected: BTreeMap<u32, BigRational> = BTreeMap::new();
    expected.insert(full, BigRational::zero());
    for &mask in &masks {
        if mask == full {
            continue;
        }
        let informed = NodeSet::from_iter(n, (0..n as u32).filter(|v| mask & (1 << v) != 0));
        let dist = exact_push_set_distribution(graph, &informed)?;
        let mut self_prob = BigRational::zero();
        let mut acc = BigRational::one();
        for (set, prob) in dist {
            let next_mask = set.iter().fold(0u32, |m, &v| m | (1 << v));
            if next_mask == mask {
                self_prob += prob;
            } else {
                acc += prob * expected.get(&next_mask).expect("descending popcount order");
            }
        }
        if self_prob.is_one() {
            return Err(Error::NotApplicable(
                "informed set can never grow: infinite expected completion".into(),
            ));
        }
        expected.insert(mask, acc / (BigRational::one() - self_prob));
    }
    Ok(expected.remove(&source_bit).expect("source state solved"))
}

/// Exact marginal of the time-window coupling for a single node, given its
/// per-round neighbor lists. Enumerates every joint outcome of the round
/// choices and the upgrade coins; the returned map sends each final choice
/// (None while the node was isolated throughout) to its exact probability.
pub fn enumerate_window_marginal(
    neighbor_sets: &[Vec<u32>],
) -> BTreeMap<Option<u32>, BigRational> {
    let mut out = BTreeMap::new();
    let union0: Vec<u32> = Vec::new();
    window_walk(
        neighbor_sets,
        0,
        None,
        &union0,
        BigRational::one(),
        &mut out,
    );
    out
}

fn window_walk(
    rounds: &[Vec<u32>],
    t: usize,
    delta_h: Option<u32>,
    union: &[u32],
    prob: BigRational,
    out: &mut BTreeMap<Option<u32>, BigRational>,
) {
    if t == rounds.len() {
        *out.entry(delta_h).or_insert_with(BigRational::zero) += prob;
        return;
    }
    let nbrs = &rounds[t];
    let d = nbrs.len();
    if d == 0 {
        window_walk(rounds, t + 1, delta_h, union, prob, out);
        return;
    }
    let mut next_union: Vec<u32> = union.to_vec();
    for &v in nbrs {
        if !union.contains(&v) {
            next_union.push(v);
        }
    }
    let h = next_union.len();
    let inv_d = BigRational::new(BigInt::one(), BigInt::from(d));
    let coin_yes = BigRational::new(BigInt::from(d), BigInt::from(h));
    let coin_no = BigRational::one() - &coin_yes;
    for &delta in nbrs {
        let fresh = !union.contains(&delta);
        let branch = prob.clone() * &inv_d;
        if h == d {
            // Forced upgrade coin; also covers the first active round.
            let next = if fresh { Some(delta) } else { delta_h };
            window_walk(rounds, t + 1, next, &next_union, branch, out);
        } else {
            let next_if_yes = if fresh { Some(delta) } else { delta_h };
            window_walk(
                rounds,
                t + 1,
                next_if_yes,
                &next_union,
                branch.clone() * &coin_yes,
                out,
            );
            window_walk(
                rounds,
                t + 1,
                delta_h,
                &next_union,
                branch * &coin_no,
                out,
            );
        }
    }
}

/// One atom of the joint enumeration of sequence-push vs union-push.
#[derive(Debug, Clone)]
pub struct WindowAtom {
    /// Informed count after the full T-round sequence push.
    pub sequence_count: u32,
    /// Informed count of the coupled single push on the window union.
    pub union_count: u32,
    /// Whether the union-push informed set was contained in the sequence one.
    pub containment: bool,
    pub probability: BigRational,
}

/// Exhaustive joint enumeration of T rounds of Push on `snapshots` together
/// with the time-window coupling for the initially informed set. Every atom
/// carries both counts and the containment check, so both the dominance of
/// the marginals and the pointwise coupling property are machine-checkable.
pub fn enumerate_window_joint(
    snapshots: &[GraphSnapshot],
    informed: &NodeSet,
) -> Result<Vec<WindowAtom>> {
    if snapshots.is_empty() {
        return Err(Error::InvalidParameter("empty snapshot sequence".into()));
    }
    let n = snapshots[0].n();
    if snapshots.iter().any(|g| g.n() != n) {
        return Err(Error::ShapeMismatch("window mixes node counts".into()));
    }
    if informed.capacity() != n || informed.is_empty() {
        return Err(Error::InvalidParameter(
            "informed set must be non-empty over [0, n)".into(),
        ));
    }
    // Per original-informed node: per-round neighbor list, prior union, h_t.
    let coupled: Vec<u32> = informed.to_vec();
    let mut rounds_info: Vec<BTreeMap<u32, (Vec<u32>, Vec<u32>, usize)>> = Vec::new();
    {
        let mut unions: BTreeMap<u32, Vec<u32>> = coupled.iter().map(|&u| (u, Vec::new())).collect();
        for g in snapshots {
            let adj = g.adjacency();
            let mut per_node = BTreeMap::new();
            for &u in &coupled {
                let nbrs = adj.neighbors(u).to_vec();
                let prior = unions.get(&u).expect("initialized").clone();
                let mut next_union = prior.clone();
                for &v in &nbrs {
                    if !next_union.contains(&v) {
                        next_union.push(v);
                    }
                }
                let h = next_union.len();
                per_node.insert(u, (nbrs, prior, h));
                unions.insert(u, next_union);
            }
            rounds_info.push(per_node);
        }
    }

    let mut atoms = Vec::new();
    let state = JointState {
        informed: informed.clone(),
        delta_h: coupled.iter().map(|&u| (u, None)).collect(),
    };
    joint_round(
        snapshots,
        &rounds_info,
        informed,
        0,
        state,
        BigRational::one(),
        &mut atoms,
    )?;
    Ok(atoms)
}

#[derive(Clone)]
struct JointState {
    informed: NodeSet,
    delta_h: BTreeMap<u32, Option<u32>>,
}

fn joint_round(
    snapshots: &[GraphSnapshot],
    rounds_info: &[BTreeMap<u32, (Vec<u32>, Vec<u32>, usize)>],
    original: &NodeSet,
    t: usize,
    state: JointState,
    prob: BigRational,
    atoms: &mut Vec<WindowAtom>,
) -> Result<()> {
    if t == snapshots.len() {
        let mut union_set = NodeSet::from_iter(original.capacity(), original.iter());
        for (_, delta) in state.delta_h.iter() {
            if let Some(v) = delta {
                union_set.insert(*v);
            }
        }
        atoms.push(WindowAtom {
            sequence_count: state.informed.len() as u32,
            union_count: union_set.len() as u32,
            containment: union_set.is_subset_of(&state.informed),
            probability: prob,
        });
        return Ok(());
    }
    let adj = snapshots[t].adjacency();
    let pushers: Vec<(u32, Vec<u32>)> = state
        .informed
        .iter()
        .map(|u| (u, adj.neighbors(u).to_vec()))
        .filter(|(_, nbrs)| !nbrs.is_empty())
        .collect();
    let space: u64 = pushers
        .iter()
        .try_fold(1u64, |acc, (_, nbrs)| {
            let next = acc.saturating_mul(nbrs.len() as u64 * 2);
            (next <= ENUMERATION_GUARD).then_some(next)
        })
        .ok_or_else(|| Error::InstanceTooLarge("joint window space too large".into()))?;
    let _ = space;
    joint_decision(
        snapshots,
        rounds_info,
        original,
        t,
        &pushers,
        0,
        state,
        Vec::new(),
        prob,
        atoms,
    )
}

#[allow(clippy::too_many_arguments)]
fn joint_decision(
    snapshots: &[GraphSnapshot],
    rounds_info: &[BTreeMap<u32, (Vec<u32>, Vec<u32>, usize)>],
    original: &NodeSet,
    t: usize,
    pushers: &[(u32, Vec<u32>)],
    idx: usize,
    state: JointState,
    pending: Vec<u32>,
    prob: BigRational,
    atoms: &mut Vec<WindowAtom>,
) -> Result<()> {
    if idx == pushers.len() {
        let mut next = state;
        for v in pending {
            next.informed.insert(v);
        }
        return joint_round(snapshots, rounds_info, original, t + 1, next, prob, atoms);
    }
    let (u, nbrs) = &pushers[idx];
    let d = nbrs.len();
    let inv_d = BigRational::new(BigInt::one(), BigInt::from(d));
    for &delta in nbrs {
        let mut pending_next = pending.clone();
        pending_next.push(delta);
        let branch = prob.clone() * &inv_d;
        if original.contains(*u) {
            let (_, prior, h) = &rounds_info[t][u];
            let fresh = !prior.contains(&delta);
            let coin_yes = BigRational::new(BigInt::from(d), BigInt::from(*h));
            let coin_no = BigRational::one() - &coin_yes;
            // Upgrade branch (C_t = 1).
            let mut upgraded = state.clone();
            if fresh {
                upgraded.delta_h.insert(*u, Some(delta));
            }
            joint_decision(
                snapshots,
                rounds_info,
                original,
                t,
                pushers,
                idx + 1,
                upgraded,
                pending_next.clone(),
                branch.clone() * &coin_yes,
                atoms,
            )?;
            // Keep branch (C_t = 0); weight zero when the coin is forced.
            if !coin_no.is_zero() {
                joint_decision(
                    snapshots,
                    rounds_info,
                    original,
                    t,
                    pushers,
                    idx + 1,
                    state.clone(),
                    pending_next,
                    branch * &coin_no,
                    atoms,
                )?;
            }
        } else {
            joint_decision(
                snapshots,
                rounds_info,
                original,
                t,
                pushers,
                idx + 1,
                state.clone(),
                pending_next,
                branch,
                atoms,
            )?;
        }
    }
    Ok(())
}

/// Marginal distributions (sequence-push count, union-push count) of a set
/// of window atoms.
pub fn window_atom_marginals(
    atoms: &[WindowAtom],
) -> Result<(OutcomeDistribution, OutcomeDistribution)> {
    let mut seq: BTreeMap<u32, BigRational> = BTreeMap::new();
    let mut uni: BTreeMap<u32, BigRational> = BTreeMap::new();
    for atom in atoms {
        *seq.entry(atom.sequence_count)
            .or_insert_with(BigRational::zero) += &atom.probability;
        *uni.entry(atom.union_count).or_insert_with(BigRational::zero) += &atom.probability;
    }
    Ok((
        OutcomeDistribution::from_probabilities(seq)?,
        OutcomeDistribution::from_probabilities(uni)?,
    ))
}

/// Largest λ ∈ [0, 1] with Pr[X ≥ λ·m] ≥ λ for a distribution given as
/// (value, probability) pairs. Returns 1 when m = 0.
pub fn largest_rate_floor(support: &BTreeMap<u32, f64>, m: f64) -> f64 {
    if m <= 0.0 {
        return 1.0;
    }
    let mut best: f64 = 0.0;
    let mut tail = 0.0;
    for (&value, &prob) in support.iter().rev() {
        tail += prob;
        // λ = min(value/m, Pr[X ≥ value]) satisfies Pr[X ≥ λm] ≥ tail ≥ λ.
        best = best.max((f64::from(value) / m).min(tail).min(1.0));
    }
    best
}
