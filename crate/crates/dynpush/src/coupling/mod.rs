//! Coupling constructions that make the stochastic-dominance arguments
//! machine-checkable.
//!
//! Two couplings are implemented as samplers whose joint draws expose the
//! pointwise containment property, plus exact enumeration oracles (in
//! [`oracle`]) for the same constructions so dominance can be verified with
//! rational arithmetic on small instances:
//!
//! * the virtual-nodes coupling between one Push on a graph and one Push on
//!   its (I,b)-modified version, and
//! * the time-window coupling between T rounds of Push on a snapshot
//!   sequence and a single Push on the union graph of the window.

pub mod corpus;
pub mod oracle;

pub use oracle::{
    enumerate_window_joint, enumerate_window_marginal, exact_modified_push_distribution,
    exact_push_absorption_time, exact_push_distribution, exact_push_set_distribution,
    largest_rate_floor, window_atom_marginals, OutcomeDistribution, WindowAtom,
    ENUMERATION_GUARD,
};

use num::{BigInt, BigRational, Zero};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::dyngraph::GraphSnapshot;
use crate::error::{Error, Result};
use crate::nodeset::NodeSet;

/// The (I,b)-modified graph: virtual node ids are `base_n..base_n+b`.
///
/// Construction, applied to the base graph:
/// 1. every informed node with degree > b loses all incident edges
///    (collected in `deactivated`);
/// 2. every informed node with degree ≤ b gains an edge to each of the b
///    virtual nodes;
/// 3. all informed–informed edges are removed.
#[derive(Debug, Clone)]
pub struct ModifiedGraph {
    /// Graph over `base_n + b` node ids.
    pub graph: GraphSnapshot,
    pub base_n: usize,
    pub b: usize,
    pub informed: NodeSet,
    /// Informed nodes stripped by operation 1.
    pub deactivated: NodeSet,
}

/// Apply the (I,b) modification.
pub fn modify_graph(graph: &GraphSnapshot, informed: &NodeSet, b: usize) -> Result<ModifiedGraph> {
    let n = graph.n();
    if b < 1 || b > n {
        return Err(Error::InvalidParameter(format!(
            "b = {b} not in [1, n] for n = {n}"
        )));
    }
    if informed.capacity() != n {
        return Err(Error::InvalidParameter(
            "informed set capacity must equal n".into(),
        ));
    }
    let adj = graph.adjacency();
    let mut deactivated = NodeSet::new(n);
    for u in informed.iter() {
        if adj.degree(u) > b {
            deactivated.insert(u);
        }
    }
    let mut pairs: Vec<(u32, u32)> = Vec::with_capacity(graph.edge_count() + informed.len() * b);
    for (u, v) in graph.edges() {
        if informed.contains(u) && informed.contains(v) {
            continue;
        }
        if deactivated.contains(u) || deactivated.contains(v) {
            continue;
        }
        pairs.push((u, v));
    }
    for u in informed.iter() {
        if !deactivated.contains(u) {
            for j in 0..b {
                pairs.push((u, (n + j) as u32));
            }
        }
    }
    Ok(ModifiedGraph {
        graph: GraphSnapshot::new(n + b, pairs)?,
        base_n: n,
        b,
        informed: informed.clone(),
        deactivated,
    })
}

impl ModifiedGraph {
    /// Check the structural invariants of the construction against the
    /// base graph it was built from.
    pub fn validate(&self, base: &GraphSnapshot) -> Result<()> {
        let adj = self.graph.adjacency();
        let base_adj = base.adjacency();
        for (u, v) in self.graph.edges() {
            let u_informed = (u as usize) < self.base_n && self.informed.contains(u);
            let v_informed = (v as usize) < self.base_n && self.informed.contains(v);
            if u_informed && v_informed {
                return Err(Error::ShapeMismatch(format!(
                    "informed-informed edge {u}-{v} survived"
                )));
            }
        }
        for u in self.informed.iter() {
            let expect_deactivated = base_adj.degree(u) > self.b;
            if expect_deactivated != self.deactivated.contains(u) {
                return Err(Error::ShapeMismatch(format!("wrong deactivation of {u}")));
            }
            let virtual_degree = adj
                .neighbors(u)
                .iter()
                .filter(|&&v| v as usize >= self.base_n)
                .count();
            if self.deactivated.contains(u) {
                if adj.degree(u) != 0 {
                    return Err(Error::ShapeMismatch(format!(
                        "deactivated node {u} kept edges"
                    )));
                }
            } else if virtual_degree != self.b {
                return Err(Error::ShapeMismatch(format!(
                    "node {u} has {virtual_degree} virtual neighbors, wanted {}",
                    self.b
                )));
            }
        }
        for j in 0..self.b {
            let vid = (self.base_n + j) as u32;
            for &w in adj.neighbors(vid) {
                if !(self.informed.contains(w) && !self.deactivated.contains(w)) {
                    return Err(Error::ShapeMismatch(format!(
                        "virtual node {vid} linked to non-eligible {w}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One coupled sample of the virtual-nodes construction.
#[derive(Debug, Clone)]
pub struct CoupledPushSample {
    /// Newly informed count in the original graph.
    pub new_in_original: u32,
    /// Newly informed real-node count in the modified graph.
    pub new_in_modified: u32,
    /// Modified-graph new informed ⊆ original-graph new informed.
    pub containment: bool,
    /// Per informed node, the neighbor it pushed in the original graph
    /// (None for isolated nodes with degree ≤ b). Exposed for marginal
    /// uniformity checks.
    pub original_choices: Vec<(u32, Option<u32>)>,
}

/// Run one coupled Push on `graph` and its (I,b)-modified version.
///
/// For each informed node u with deg ≤ b: the modified-graph choice is
/// uniform over its k non-informed neighbors plus the b virtual nodes; a
/// real choice is copied verbatim to the original graph, a virtual one
/// falls back to a non-informed neighbor with probability
/// x = k(b−h)/((h+k)b) and to an informed neighbor otherwise. All branch
/// probabilities are sampled with exact integer arithmetic. Nodes with
/// deg > b push only in the original graph, with fresh randomness.
pub fn coupled_push_modified(
    graph: &GraphSnapshot,
    informed: &NodeSet,
    b: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(u32, u32, bool)> {
    let sample = coupled_push_modified_detailed(graph, informed, b, rng)?;
    Ok((
        sample.new_in_original,
        sample.new_in_modified,
        sample.containment,
    ))
}

/// As [`coupled_push_modified`], also reporting every original-graph choice.
pub fn coupled_push_modified_detailed(
    graph: &GraphSnapshot,
    informed: &NodeSet,
    b: usize,
    rng: &mut ChaCha8Rng,
) -> Result<CoupledPushSample> {
    let n = graph.n();
    if b < 1 || b > n {
        return Err(Error::InvalidParameter(format!(
            "b = {b} not in [1, n] for n = {n}"
        )));
    }
    let adj = graph.adjacency();
    let mut new_original = NodeSet::new(n);
    let mut new_modified = NodeSet::new(n);
    let mut original_choices = Vec::with_capacity(informed.len());
    let b_u64 = b as u64;
    for u in informed.iter() {
        let neighbors = adj.neighbors(u);
        if neighbors.len() > b {
            // Deactivated in the modified graph: independent push in G only.
            let delta = neighbors[rng.random_range(0..neighbors.len())];
            if !informed.contains(delta) {
                new_original.insert(delta);
            }
            original_choices.push((u, Some(delta)));
            continue;
        }
        let (informed_nbrs, open_nbrs): (Vec<u32>, Vec<u32>) =
            neighbors.iter().partition(|&&v| informed.contains(v));
        let h = informed_nbrs.len() as u64;
        let k = open_nbrs.len() as u64;
        if h + k == 0 {
            // Only virtual neighbors in H; no push at all in G.
            original_choices.push((u, None));
            continue;
        }
        // δ_H uniform over k real non-informed + b virtual slots.
        let slot = rng.random_range(0..k + b_u64);
        let delta = if slot < k {
            let v = open_nbrs[slot as usize];
            new_modified.insert(v);
            v
        } else {
            // Virtual hit: fall to non-informed with probability
            // x = k(b−h)/((h+k)b), exactly, via an integer draw.
            let threshold = k * (b_u64 - h);
            if rng.random_range(0..(h + k) * b_u64) < threshold {
                open_nbrs[rng.random_range(0..open_nbrs.len())]
            } else {
                informed_nbrs[rng.random_range(0..informed_nbrs.len())]
            }
        };
        if !informed.contains(delta) {
            new_original.insert(delta);
        }
        original_choices.push((u, Some(delta)));
    }
    let containment = new_modified.is_subset_of(&new_original);
    Ok(CoupledPushSample {
        new_in_original: new_original.len() as u32,
        new_in_modified: new_modified.len() as u32,
        containment,
        original_choices,
    })
}

/// Exact mixing probability x = k(b−h)/((h+k)b) of the virtual-nodes
/// coupling (the chance a virtual hit falls back to a non-informed
/// neighbor).
pub fn virtual_fallback_probability(h: u64, k: u64, b: u64) -> Option<BigRational> {
    if h + k == 0 || b == 0 {
        return None;
    }
    Some(BigRational::new(
        BigInt::from(k * (b - h)),
        BigInt::from((h + k) * b),
    ))
}

/// One coupled sample of the time-window construction: T rounds of Push on
/// the sequence against one Push on the union graph, built on the same
/// probability space. Returns (sequence informed set, union informed set,
/// containment).
pub fn coupled_push_window(
    snapshots: &[GraphSnapshot],
    informed: &NodeSet,
    rng: &mut ChaCha8Rng,
) -> Result<(NodeSet, NodeSet, bool)> {
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
    struct Coupled {
        union: NodeSet,
        delta_h: Option<u32>,
    }
    let mut coupled: Vec<(u32, Coupled)> = informed
        .iter()
        .map(|u| {
            (
                u,
                Coupled {
                    union: NodeSet::new(n),
                    delta_h: None,
                },
            )
        })
        .collect();
    let mut sequence_informed = informed.clone();
    for snapshot in snapshots {
        let adj = snapshot.adjacency();
        let mut pending: Vec<u32> = Vec::new();
        let mut coupled_iter = coupled.iter_mut().peekable();
        for u in sequence_informed.iter() {
            let is_tracked = coupled_iter.peek().is_some_and(|(cu, _)| *cu == u);
            let tracked = if is_tracked {
                Some(&mut coupled_iter.next().expect("peeked").1)
            } else {
                None
            };
            let neighbors = adj.neighbors(u);
            if neighbors.is_empty() {
                // d_t = 0: no choice, no coin, union unchanged.
                continue;
            }
            let delta = neighbors[rng.random_range(0..neighbors.len())];
            pending.push(delta);
            if let Some(state) = tracked {
                let d = neighbors.len();
                let mut h = state.union.len();
                for &v in neighbors {
                    if !state.union.contains(v) {
                        h += 1;
                    }
                }
                // C_t ~ Bernoulli(d_t / h_t); forced when h_t = d_t, which
                // also covers the first round the node has any neighbors.
                let coin = h == d || rng.random_range(0..h as u64) < d as u64;
                if coin && !state.union.contains(delta) {
                    state.delta_h = Some(delta);
                }
                for &v in neighbors {
                    state.union.insert(v);
                }
            }
        }
        for v in pending {
            sequence_informed.insert(v);
        }
    }
    let mut union_informed = informed.clone();
    for (_, state) in &coupled {
        if let Some(v) = state.delta_h {
            union_informed.insert(v);
        }
    }
    let containment = union_informed.is_subset_of(&sequence_informed);
    Ok((sequence_informed, union_informed, containment))
}

/// CDF dominance: true iff Pr[lo ≤ h] ≤ Pr[hi ≤ h] for every h, i.e. `lo`
/// stochastically dominates `hi`. Exact rational comparison.
pub fn check_dominance(lo: &OutcomeDistribution, hi: &OutcomeDistribution) -> Result<bool> {
    for (name, dist) in [("lo", lo), ("hi", hi)] {
        if !dist.is_normalized() {
            return Err(Error::InvalidDistribution(format!(
                "{name} distribution sums to {}",
                dist.total()
            )));
        }
    }
    let mut points: Vec<u32> = lo
        .support()
        .keys()
        .chain(hi.support().keys())
        .copied()
        .collect();
    points.sort_unstable();
    points.dedup();
    let (mut cum_lo, mut cum_hi) = (BigRational::zero(), BigRational::zero());
    for h in points {
        cum_lo += lo.probability(h);
        cum_hi += hi.probability(h);
        if cum_lo > cum_hi {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The expectation-to-probability bound: for X ∈ [0, m] with E[X] ≥ λm,
/// checks Pr[X ≥ λm/2] ≥ λ/2. Precondition violations are reported as
/// [`Error::NotApplicable`] so callers skip rather than fail.
pub fn reverse_markov_check(dist: &OutcomeDistribution, m: f64, lambda: f64) -> Result<bool> {
    if !dist.is_normalized() {
        return Err(Error::InvalidDistribution(format!(
            "distribution sums to {}",
            dist.total()
        )));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::NotApplicable(format!("λ = {lambda} not in [0, 1]")));
    }
    if m <= 0.0 {
        return Err(Error::NotApplicable(format!("m = {m} not positive")));
    }
    let m_rat = BigRational::from_float(m)
        .ok_or_else(|| Error::NotApplicable(format!("m = {m} not finite")))?;
    let lambda_rat = BigRational::from_float(lambda)
        .ok_or_else(|| Error::NotApplicable(format!("λ = {lambda} not finite")))?;
    if BigRational::from(BigInt::from(dist.max_value())) > m_rat {
        return Err(Error::NotApplicable("support exceeds [0, m]".into()));
    }
    if dist.mean() < lambda_rat.clone() * &m_rat {
        return Err(Error::NotApplicable("E[X] < λ·m".into()));
    }
    let threshold = lambda_rat.clone() * &m_rat / BigRational::from(BigInt::from(2));
    let half_lambda = lambda_rat / BigRational::from(BigInt::from(2));
    Ok(dist.tail_at_least(&threshold) >= half_lambda)
}
