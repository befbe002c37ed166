//! Random evolving-graph models and their closed-form quantities.
//!
//! A [`GraphSnapshot`] is one time step of an undirected graph over `n`
//! labeled nodes, stored as a sorted list of canonical pair indices. The
//! [`EvolvingModel`] variants generate snapshot sequences: the edge-Markov
//! chain (each absent pair is born with probability `p`, each present edge
//! dies with probability `q`, independently), a sequence of independent
//! `G(n,p)` samples, or a static graph.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Geometric};
use std::collections::HashSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Number of unordered pairs over `n` nodes.
pub fn pair_count(n: usize) -> u64 {
    let n = n as u64;
    n * n.saturating_sub(1) / 2
}

fn pair_offset(n: usize, u: u64) -> u64 {
    // Index of the first pair with smaller endpoint u, in lexicographic order.
    u * n as u64 - u * (u + 1) / 2
}

/// Canonical lexicographic index of the pair {u, v}, u < v.
///
/// k(u,v) = u·n − u(u+1)/2 + (v−u−1). Fixed across the codebase: sparse
/// sampling reproducibility depends on this one ordering.
pub fn pair_index(n: usize, u: u32, v: u32) -> u64 {
    debug_assert!(u < v && (v as usize) < n);
    pair_offset(n, u as u64) + (v - u - 1) as u64
}

/// Inverse of [`pair_index`].
pub fn pair_endpoints(n: usize, k: u64) -> (u32, u32) {
    debug_assert!(k < pair_count(n));
    // Solve u² − (2n−1)u + 2k = 0 for the largest u with offset(u) ≤ k,
    // then correct the float estimate exactly.
    let nn = n as f64;
    let disc = (2.0 * nn - 1.0) * (2.0 * nn - 1.0) - 8.0 * k as f64;
    let mut u = (((2.0 * nn - 1.0) - disc.max(0.0).sqrt()) / 2.0).floor().max(0.0) as u64;
    while u + 1 < n as u64 && pair_offset(n, u + 1) <= k {
        u += 1;
    }
    while pair_offset(n, u) > k {
        u -= 1;
    }
    let v = u + 1 + (k - pair_offset(n, u));
    (u as u32, v as u32)
}

/// One time step of an undirected graph over `n` labeled nodes.
///
/// No self-loops, each pair stored at most once, endpoints in `[0, n)`.
#[derive(Clone, PartialEq, Eq)]
pub struct GraphSnapshot {
    n: usize,
    /// Sorted canonical pair indices.
    edges: Vec<u64>,
}

impl GraphSnapshot {
    /// Build a snapshot from explicit endpoint pairs, validating shape.
    pub fn new(n: usize, pairs: impl IntoIterator<Item = (u32, u32)>) -> Result<Self> {
        let mut edges = Vec::new();
        for (a, b) in pairs {
            if a == b {
                return Err(Error::ShapeMismatch(format!("self-loop at node {a}")));
            }
            let (u, v) = if a < b { (a, b) } else { (b, a) };
            if v as usize >= n {
                return Err(Error::ShapeMismatch(format!(
                    "endpoint {v} out of range for n={n}"
                )));
            }
            edges.push(pair_index(n, u, v));
        }
        edges.sort_unstable();
        if edges.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::ShapeMismatch("duplicate edge".into()));
        }
        Ok(Self { n, edges })
    }

    pub fn empty(n: usize) -> Self {
        Self { n, edges: Vec::new() }
    }

    pub fn complete(n: usize) -> Self {
        Self {
            n,
            edges: (0..pair_count(n)).collect(),
        }
    }

    pub(crate) fn from_sorted_indices(n: usize, edges: Vec<u64>) -> Self {
        debug_assert!(edges.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(edges.last().is_none_or(|&k| k < pair_count(n)));
        Self { n, edges }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edge density relative to the n(n−1)/2 possible pairs.
    pub fn density(&self) -> f64 {
        let total = pair_count(self.n);
        if total == 0 {
            0.0
        } else {
            self.edges.len() as f64 / total as f64
        }
    }

    pub fn pair_indices(&self) -> &[u64] {
        &self.edges
    }

    pub fn has_edge(&self, u: u32, v: u32) -> bool {
        if u == v || u as usize >= self.n || v as usize >= self.n {
            return false;
        }
        let (u, v) = if u < v { (u, v) } else { (v, u) };
        self.edges.binary_search(&pair_index(self.n, u, v)).is_ok()
    }

    /// Edges as (u, v) with u < v, ascending by pair index.
    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.edges.iter().map(|&k| pair_endpoints(self.n, k))
    }

    /// Build the adjacency view (sorted neighbor lists).
    pub fn adjacency(&self) -> Adjacency {
        let mut degrees = vec![0usize; self.n];
        let pairs: Vec<(u32, u32)> = self.edges().collect();
        for &(u, v) in &pairs {
            degrees[u as usize] += 1;
            degrees[v as usize] += 1;
        }
        let mut offsets = vec![0usize; self.n + 1];
        for i in 0..self.n {
            offsets[i + 1] = offsets[i] + degrees[i];
        }
        let mut fill = offsets.clone();
        let mut neighbors = vec![0u32; 2 * pairs.len()];
        for &(u, v) in &pairs {
            neighbors[fill[u as usize]] = v;
            fill[u as usize] += 1;
            neighbors[fill[v as usize]] = u;
            fill[v as usize] += 1;
        }
        Adjacency { offsets, neighbors }
    }

    /// Serialize to the edge-list text format: first line `n m`, then one
    /// line `u v` per edge with u < v, sorted by pair index.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("{} {}\n", self.n, self.edges.len());
        for (u, v) in self.edges() {
            out.push_str(&format!("{u} {v}\n"));
        }
        out
    }

    /// Parse the edge-list text format produced by [`Self::to_edge_list`].
    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::Parse { line: 1, msg: "empty input".into() })?;
        let mut it = header.split_whitespace();
        let parse_usize = |s: Option<&str>, line: usize| -> Result<usize> {
            s.and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::Parse { line, msg: format!("bad header {header:?}") })
        };
        let n = parse_usize(it.next(), 1)?;
        let m = parse_usize(it.next(), 1)?;
        let mut pairs = Vec::with_capacity(m);
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let u: u32 = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::Parse { line: idx + 1, msg: format!("bad edge line {line:?}") })?;
            let v: u32 = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::Parse { line: idx + 1, msg: format!("bad edge line {line:?}") })?;
            pairs.push((u, v));
        }
        if pairs.len() != m {
            return Err(Error::Parse {
                line: 1,
                msg: format!("header declares {m} edges, found {}", pairs.len()),
            });
        }
        GraphSnapshot::new(n, pairs)
    }
}

impl fmt::Debug for GraphSnapshot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GraphSnapshot(n={}, m={})", self.n, self.edges.len())
    }
}

/// Sorted neighbor lists for one snapshot.
pub struct Adjacency {
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
}

impl Adjacency {
    pub fn degree(&self, u: u32) -> usize {
        self.offsets[u as usize + 1] - self.offsets[u as usize]
    }

    pub fn neighbors(&self, u: u32) -> &[u32] {
        &self.neighbors[self.offsets[u as usize]..self.offsets[u as usize + 1]]
    }
}

// Above this stationary density, per-pair updates beat rejection sampling.
const DENSE_THRESHOLD: f64 = 0.1;

fn check_probability(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("{name} = {p} not in [0, 1]")));
    }
    Ok(())
}

/// Sample an Erdős–Rényi `G(n,p)`: each pair present independently with
/// probability `p`.
pub fn sample_gnp(n: usize, p: f64, rng: &mut ChaCha8Rng) -> Result<GraphSnapshot> {
    check_probability("p", p)?;
    let total = pair_count(n);
    if p == 0.0 || total == 0 {
        return Ok(GraphSnapshot::empty(n));
    }
    if p >= 1.0 {
        return Ok(GraphSnapshot::complete(n));
    }
    let edges = if p > DENSE_THRESHOLD {
        (0..total).filter(|_| rng.random::<f64>() < p).collect()
    } else {
        // Geometric skipping over pair indices: visits only the present pairs.
        let dist = Geometric::new(p).expect("0 < p < 1");
        let mut edges = Vec::with_capacity((p * total as f64 * 1.2) as usize + 8);
        let mut k = 0u64;
        loop {
            let skip = dist.sample(rng);
            k = match k.checked_add(skip) {
                Some(x) if x < total => x,
                _ => break,
            };
            edges.push(k);
            k += 1;
        }
        edges
    };
    Ok(GraphSnapshot::from_sorted_indices(n, edges))
}

/// Advance one edge-Markov step: each absent pair becomes present with
/// probability `p`, each present edge survives with probability `1−q`,
/// independently.
pub fn evolve_step(
    current: &GraphSnapshot,
    p: f64,
    q: f64,
    rng: &mut ChaCha8Rng,
) -> Result<GraphSnapshot> {
    check_probability("p", p)?;
    check_probability("q", q)?;
    let n = current.n();
    let total = pair_count(n);
    if total == 0 || (p == 0.0 && q == 0.0) {
        return Ok(current.clone());
    }
    let stationary = if p + q > 0.0 { p / (p + q) } else { 0.0 };
    if stationary > DENSE_THRESHOLD || current.density() > 0.5 {
        return Ok(evolve_dense(current, p, q, rng));
    }
    Ok(evolve_sparse(current, p, q, rng))
}

/// Per-pair updates over a bit-packed presence vector.
pub(crate) fn evolve_dense(
    current: &GraphSnapshot,
    p: f64,
    q: f64,
    rng: &mut ChaCha8Rng,
) -> GraphSnapshot {
    let n = current.n();
    let total = pair_count(n);
    let mut present = vec![0u64; (total as usize).div_ceil(64)];
    for &k in current.pair_indices() {
        present[(k / 64) as usize] |= 1 << (k % 64);
    }
    let mut edges = Vec::with_capacity(current.edge_count());
    for k in 0..total {
        let is_present = present[(k / 64) as usize] & (1 << (k % 64)) != 0;
        let draw = rng.random::<f64>();
        let next = if is_present { draw >= q } else { draw < p };
        if next {
            edges.push(k);
        }
    }
    GraphSnapshot::from_sorted_indices(n, edges)
}

/// Sparse update: kill present edges one by one, then draw the birth count
/// from Binomial(#absent, p) and place births uniformly among absent pairs
/// by rejection against the present-edge set.
pub(crate) fn evolve_sparse(
    current: &GraphSnapshot,
    p: f64,
    q: f64,
    rng: &mut ChaCha8Rng,
) -> GraphSnapshot {
    let n = current.n();
    let total = pair_count(n);
    let mut edges: Vec<u64> = if q == 0.0 {
        current.pair_indices().to_vec()
    } else {
        current
            .pair_indices()
            .iter()
            .copied()
            .filter(|_| rng.random::<f64>() >= q)
            .collect()
    };
    let absent = total - current.edge_count() as u64;
    if p > 0.0 && absent > 0 {
        let births = Binomial::new(absent, p).expect("valid binomial").sample(rng);
        let mut chosen: HashSet<u64> = HashSet::with_capacity(births as usize);
        while (chosen.len() as u64) < births {
            let k = rng.random_range(0..total);
            if current.pair_indices().binary_search(&k).is_err() && !chosen.contains(&k) {
                chosen.insert(k);
            }
        }
        edges.extend(chosen);
        edges.sort_unstable();
    }
    GraphSnapshot::from_sorted_indices(n, edges)
}

/// Stationary per-edge presence probability p̃ = p/(p+q).
pub fn stationary_probability(p: f64, q: f64) -> Result<f64> {
    check_probability("p", p)?;
    check_probability("q", q)?;
    if p + q == 0.0 {
        return Err(Error::UndefinedStationary);
    }
    Ok(p / (p + q))
}

/// Closed-form presence probability after `t` steps of the two-state edge
/// chain started at presence probability `p0`:
/// p_t = p̃ + (p0 − p̃)(1−p−q)^t.
pub fn edge_presence_probability(p: f64, q: f64, p0: f64, t: u32) -> Result<f64> {
    check_probability("p0", p0)?;
    let stat = stationary_probability(p, q)?;
    Ok(stat + (p0 - stat) * (1.0 - p - q).powi(t as i32))
}

/// Exact minimum over both initial states of the probability that the edge
/// chain is present in at least one of the first two steps. Always ≥ p.
pub fn two_step_presence_lower_bound(p: f64, q: f64) -> Result<f64> {
    check_probability("p", p)?;
    check_probability("q", q)?;
    // From absent: born now, or born at the second step.
    let from_absent = p + (1.0 - p) * p;
    // From present: survives, or dies and is reborn.
    let from_present = (1.0 - q) + q * p;
    Ok(from_absent.min(from_present))
}

/// Union of the edge sets of a snapshot window.
pub fn union_window(snapshots: &[GraphSnapshot]) -> Result<GraphSnapshot> {
    let first = snapshots
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty snapshot sequence".into()))?;
    let n = first.n();
    if let Some(bad) = snapshots.iter().find(|s| s.n() != n) {
        return Err(Error::ShapeMismatch(format!(
            "window mixes n={} and n={}",
            n,
            bad.n()
        )));
    }
    let mut edges: Vec<u64> = snapshots
        .iter()
        .flat_map(|s| s.pair_indices().iter().copied())
        .collect();
    edges.sort_unstable();
    edges.dedup();
    Ok(GraphSnapshot::from_sorted_indices(n, edges))
}

/// Expected stationary node degree d̄ = (n−1)·p/(p+q).
pub fn expected_degree(n: usize, p: f64, q: f64) -> Result<f64> {
    let stat = stationary_probability(p, q)?;
    Ok((n.saturating_sub(1)) as f64 * stat)
}

/// Expected number of edges switching state per stationary step:
/// ν = n(n−1)·pq/(p+q) = n·q·d̄.
pub fn expected_switching_edges(n: usize, p: f64, q: f64) -> Result<f64> {
    stationary_probability(p, q)?;
    let n_f = n as f64;
    Ok(n_f * (n_f - 1.0) * p * q / (p + q))
}

/// Initial condition for an edge-Markov sequence.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    Empty,
    Complete,
    /// `G(n, p̃)`, the chain's stationary snapshot.
    Stationary,
    Gnp(f64),
    Explicit(GraphSnapshot),
}

impl fmt::Display for InitialCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Empty => write!(f, "empty"),
            Self::Complete => write!(f, "complete"),
            Self::Stationary => write!(f, "stationary"),
            Self::Gnp(p0) => write!(f, "gnp:{p0}"),
            Self::Explicit(g) => write!(f, "explicit:{}", g.edge_count()),
        }
    }
}

/// Parameters of the edge-Markov evolving graph.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeMarkovParams {
    pub n: usize,
    pub p: f64,
    pub q: f64,
    pub initial: InitialCondition,
}

impl EdgeMarkovParams {
    pub fn validate(&self) -> Result<()> {
        check_probability("p", self.p)?;
        check_probability("q", self.q)?;
        match &self.initial {
            InitialCondition::Stationary if self.p + self.q == 0.0 => {
                Err(Error::UndefinedStationary)
            }
            InitialCondition::Gnp(p0) => check_probability("initial p0", *p0),
            InitialCondition::Explicit(g) if g.n() != self.n => Err(Error::ShapeMismatch(
                format!("explicit initial has n={}, params say n={}", g.n(), self.n),
            )),
            _ => Ok(()),
        }
    }
}

/// Generator specification for a snapshot sequence.
#[derive(Debug, Clone, PartialEq)]
pub enum EvolvingModel {
    EdgeMarkov(EdgeMarkovParams),
    /// A fresh `G(n,p)` each step. Distributionally identical to
    /// EdgeMarkov(n, p, 1−p, Gnp(p)).
    IndependentGnp { n: usize, p: f64 },
    Static(GraphSnapshot),
}

impl EvolvingModel {
    pub fn edge_markov(n: usize, p: f64, q: f64, initial: InitialCondition) -> Self {
        Self::EdgeMarkov(EdgeMarkovParams { n, p, q, initial })
    }

    pub fn n(&self) -> usize {
        match self {
            Self::EdgeMarkov(params) => params.n,
            Self::IndependentGnp { n, .. } => *n,
            Self::Static(g) => g.n(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::EdgeMarkov(params) => params.validate(),
            Self::IndependentGnp { p, .. } => check_probability("p", *p),
            Self::Static(_) => Ok(()),
        }
    }

    /// Birth/death probabilities when the model is an edge-Markov chain.
    pub fn edge_markov_rates(&self) -> Option<(f64, f64)> {
        match self {
            Self::EdgeMarkov(params) => Some((params.p, params.q)),
            _ => None,
        }
    }

    pub fn descriptor(&self) -> String {
        match self {
            Self::EdgeMarkov(params) => format!(
                "edge-markov(n={}, p={}, q={}, initial={})",
                params.n, params.p, params.q, params.initial
            ),
            Self::IndependentGnp { n, p } => format!("independent-gnp(n={n}, p={p})"),
            Self::Static(g) => format!("static(n={}, m={})", g.n(), g.edge_count()),
        }
    }

    /// Start a snapshot sequence on a dedicated random stream.
    pub fn sequence(&self, stream: RngStream) -> Result<SnapshotSequence<'_>> {
        self.validate()?;
        let mut rng = stream.rng();
        let initial = match self {
            Self::EdgeMarkov(params) => match &params.initial {
                InitialCondition::Empty => GraphSnapshot::empty(params.n),
                InitialCondition::Complete => GraphSnapshot::complete(params.n),
                InitialCondition::Stationary => {
                    let stat = stationary_probability(params.p, params.q)?;
                    sample_gnp(params.n, stat, &mut rng)?
                }
                InitialCondition::Gnp(p0) => sample_gnp(params.n, *p0, &mut rng)?,
                InitialCondition::Explicit(g) => g.clone(),
            },
            Self::IndependentGnp { n, p } => sample_gnp(*n, *p, &mut rng)?,
            Self::Static(g) => g.clone(),
        };
        Ok(SnapshotSequence {
            model: self,
            rng,
            current: initial,
        })
    }
}

/// Stateful generator of `G_0, G_1, …` for one model. Inherently
/// sequential; distinct replicas use distinct [`RngStream`]s.
pub struct SnapshotSequence<'a> {
    model: &'a EvolvingModel,
    rng: ChaCha8Rng,
    current: GraphSnapshot,
}

impl SnapshotSequence<'_> {
    /// The current snapshot `G_t` (starts at `G_0`).
    pub fn current(&self) -> &GraphSnapshot {
        &self.current
    }

    /// Draw `G_{t+1}` and return it.
    pub fn advance(&mut self) -> Result<&GraphSnapshot> {
        match self.model {
            EvolvingModel::EdgeMarkov(params) => {
                self.current = evolve_step(&self.current, params.p, params.q, &mut self.rng)?;
            }
            EvolvingModel::IndependentGnp { n, p } => {
                self.current = sample_gnp(*n, *p, &mut self.rng)?;
            }
            EvolvingModel::Static(_) => {}
        }
        Ok(&self.current)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
        RngStream::new(seed, stream).rng()
    }

    /// Independent oracle for the presence probability: apply the 2×2
    /// transition matrix to (1−p0, p0) step by step.
    fn matrix_power_presence(p: f64, q: f64, p0: f64, t: u32) -> f64 {
        let mut absent = 1.0 - p0;
        let mut present = p0;
        for _ in 0..t {
            let next_present = absent * p + present * (1.0 - q);
            absent = absent * (1.0 - p) + present * q;
            present = next_present;
        }
        present
    }

    #[test]
    fn gnp_extremes() {
        let mut rng = rng_for(1, 0);
        let g = sample_gnp(5, 0.0, &mut rng).unwrap();
        assert_eq!(g.edge_count(), 0);
        let g = sample_gnp(5, 1.0, &mut rng).unwrap();
        assert_eq!(g.edge_count(), 10);
        assert_eq!(sample_gnp(0, 0.5, &mut rng).unwrap().edge_count(), 0);
        assert_eq!(sample_gnp(1, 0.5, &mut rng).unwrap().edge_count(), 0);
    }

    #[test]
    fn gnp_mean_edge_count_matches_binomial() {
        // n=200, p=0.1: 19900 pairs, mean 1990, per-sample σ = √(19900·0.1·0.9).
        let mut rng = rng_for(7, 1);
        let samples = 1000;
        let total: u64 = (0..samples)
            .map(|_| sample_gnp(200, 0.1, &mut rng).unwrap().edge_count() as u64)
            .sum();
        let mean = total as f64 / samples as f64;
        let sigma = (19900.0_f64 * 0.1 * 0.9).sqrt();
        let band = 4.0 * sigma / (samples as f64).sqrt();
        assert!(
            (mean - 1990.0).abs() < band,
            "mean {mean} outside 1990 ± {band}"
        );
    }

    #[test]
    fn evolve_extremes() {
        let mut rng = rng_for(2, 0);
        let g = sample_gnp(30, 0.3, &mut rng).unwrap();
        let dead = evolve_step(&g, 0.0, 1.0, &mut rng).unwrap();
        assert_eq!(dead.edge_count(), 0);
        let frozen = evolve_step(&g, 0.0, 0.0, &mut rng).unwrap();
        assert_eq!(frozen, g);
    }

    #[test]
    fn evolve_reaches_stationary_density() {
        // p=0.3, q=0.7: 1−p−q = 0, so the chain mixes in a single step and
        // the terminal per-edge marginal is exactly p̃ = 0.3.
        let (n, p, q, steps, replicas) = (100, 0.3, 0.7, 200, 500);
        let total_pairs = pair_count(n) as f64;
        let mut rng = rng_for(3, 0);
        let mut total_edges = 0u64;
        for _ in 0..replicas {
            let mut g = GraphSnapshot::empty(n);
            for _ in 0..steps {
                g = evolve_step(&g, p, q, &mut rng).unwrap();
            }
            total_edges += g.edge_count() as u64;
        }
        let density = total_edges as f64 / (replicas as f64 * total_pairs);
        let sigma = (0.3_f64 * 0.7 / (replicas as f64 * total_pairs)).sqrt();
        assert!(
            (density - 0.3).abs() < 4.0 * sigma,
            "terminal density {density} not within 4σ={:.2e} of 0.3",
            4.0 * sigma
        );
    }

    #[test]
    fn sparse_and_dense_evolve_agree_in_distribution() {
        // Same (p, q) on both code paths; compare edge-count histograms.
        let (p, q, samples) = (0.25, 0.55, 40_000);
        let start = GraphSnapshot::new(6, [(0, 1), (2, 3)]).unwrap();
        let mut rng = rng_for(11, 0);
        let mut counts = [[0u64; 16]; 2];
        for i in 0..2 * samples {
            let g = if i % 2 == 0 {
                evolve_sparse(&start, p, q, &mut rng)
            } else {
                evolve_dense(&start, p, q, &mut rng)
            };
            counts[i % 2][g.edge_count()] += 1;
        }
        let (stat, df) = crate::stats::two_sample_chi_square(&counts[0], &counts[1]);
        let crit = crate::stats::chi_square_critical(df.max(1), 0.001);
        assert!(stat < crit, "χ²={stat} ≥ {crit}");
    }

    #[test]
    fn stationary_probability_formula() {
        assert_eq!(stationary_probability(0.5, 0.5).unwrap(), 0.5);
        assert!((stationary_probability(0.1, 0.4).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(stationary_probability(0.0, 0.3).unwrap(), 0.0);
        assert!(matches!(
            stationary_probability(0.0, 0.0),
            Err(Error::UndefinedStationary)
        ));
    }

    #[test]
    fn presence_probability_closed_form() {
        for (p, q, p0) in [(0.3, 0.4, 0.9), (0.01, 0.99, 0.0), (0.5, 0.5, 1.0)] {
            assert_eq!(edge_presence_probability(p, q, p0, 0).unwrap(), p0);
        }
        assert!((edge_presence_probability(0.2, 0.3, 0.0, 2).unwrap() - 0.3).abs() < 1e-15);
        // Against the matrix-power oracle.
        for t in [0, 1, 2, 5, 17, 50] {
            let closed = edge_presence_probability(0.37, 0.11, 0.9, t).unwrap();
            let oracle = matrix_power_presence(0.37, 0.11, 0.9, t);
            assert!(
                (closed - oracle).abs() <= 1e-12,
                "t={t}: {closed} vs {oracle}"
            );
        }
    }

    #[test]
    fn presence_probability_converges_geometrically() {
        let cases = [(0.3, 0.4, 0.95), (0.05, 0.5, 0.0), (0.9, 0.05, 0.2)];
        for (p, q, p0) in cases {
            let stat = stationary_probability(p, q).unwrap();
            let rate = (1.0 - p - q).abs();
            for t in 0..60 {
                let pt = edge_presence_probability(p, q, p0, t).unwrap();
                let bound = (p0 - stat).abs() * rate.powi(t as i32);
                // One ulp of slack: p_t is evaluated through the closed form,
                // whose final addition rounds at the scale of p̃.
                assert!(
                    (pt - stat).abs() <= bound * (1.0 + 1e-12) + 1e-15,
                    "p={p} q={q} t={t}"
                );
            }
        }
    }

    #[test]
    fn two_step_bound_examples() {
        assert_eq!(two_step_presence_lower_bound(1.0, 0.3).unwrap(), 1.0);
        // p = 0 from the absent state gives 0, so the min is 0.
        assert_eq!(two_step_presence_lower_bound(0.0, 0.7).unwrap(), 0.0);
        let v = two_step_presence_lower_bound(0.3, 0.6).unwrap();
        assert!((v - 0.51).abs() < 1e-15, "expected min branch 0.51, got {v}");
        assert!(v >= 0.3);
    }

    #[test]
    fn union_window_examples() {
        let g = GraphSnapshot::new(3, [(0, 1)]).unwrap();
        assert_eq!(union_window(std::slice::from_ref(&g)).unwrap(), g);
        let empty = GraphSnapshot::empty(4);
        assert_eq!(
            union_window(&[empty.clone(), empty.clone()]).unwrap().edge_count(),
            0
        );
        let a = GraphSnapshot::new(3, [(0, 1)]).unwrap();
        let b = GraphSnapshot::new(3, [(1, 2)]).unwrap();
        let c = GraphSnapshot::new(3, [(0, 1), (0, 2)]).unwrap();
        let u = union_window(&[a, b, c]).unwrap();
        assert_eq!(u.edge_count(), 3);
        assert!(u.has_edge(0, 1) && u.has_edge(1, 2) && u.has_edge(0, 2));
        let mismatched = [GraphSnapshot::empty(3), GraphSnapshot::empty(4)];
        assert!(matches!(
            union_window(&mismatched),
            Err(Error::ShapeMismatch(_))
        ));
        assert!(union_window(&[]).is_err());
    }

    #[test]
    fn switching_edges_formula() {
        assert!((expected_switching_edges(2, 0.5, 0.5).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(expected_switching_edges(57, 0.3, 0.0).unwrap(), 0.0);
        assert!(matches!(
            expected_switching_edges(5, 0.0, 0.0),
            Err(Error::UndefinedStationary)
        ));
    }

    #[test]
    fn expected_degree_formula() {
        assert!((expected_degree(2, 0.25, 0.25).unwrap() - 0.5).abs() < 1e-15);
        assert!((expected_degree(101, 0.2, 0.3).unwrap() - 40.0).abs() < 1e-12);
    }

    #[test]
    fn expected_degree_monte_carlo() {
        let (n, p, q, samples) = (300, 0.05, 0.45, 500);
        let stat = stationary_probability(p, q).unwrap();
        let mut rng = rng_for(5, 0);
        let mut total_edges = 0u64;
        for _ in 0..samples {
            total_edges += sample_gnp(n, stat, &mut rng).unwrap().edge_count() as u64;
        }
        let mean_degree = 2.0 * total_edges as f64 / (samples as f64 * n as f64);
        let dbar = expected_degree(n, p, q).unwrap();
        let pairs = pair_count(n) as f64;
        let sigma_edges = (pairs * stat * (1.0 - stat)).sqrt();
        let band = 4.0 * 2.0 * sigma_edges / ((samples as f64).sqrt() * n as f64);
        assert!(
            (mean_degree - dbar).abs() < band,
            "mean degree {mean_degree} vs d̄ {dbar} band {band}"
        );
    }

    #[test]
    fn switching_edges_monte_carlo() {
        let (n, p, q, steps) = (1000, 0.01, 0.5, 10_000);
        let nu = expected_switching_edges(n, p, q).unwrap();
        let stat = stationary_probability(p, q).unwrap();
        let mut rng = rng_for(6, 0);
        let mut g = sample_gnp(n, stat, &mut rng).unwrap();
        let mut flips_total = 0u64;
        for _ in 0..steps {
            let next = evolve_step(&g, p, q, &mut rng).unwrap();
            flips_total += symmetric_difference(&g, &next);
            g = next;
        }
        let mean_flips = flips_total as f64 / steps as f64;
        // Per-step flip count is a sum of independent pair indicators with
        // variance ≤ ν; steps are dependent but the mean estimate over 10⁴
        // steps is far tighter than this conservative i.i.d. band.
        let band = 4.0 * nu.sqrt() / (steps as f64).sqrt() * 3.0;
        assert!(
            (mean_flips - nu).abs() < band.max(1.0),
            "mean flips {mean_flips} vs ν {nu}"
        );
    }

    fn symmetric_difference(a: &GraphSnapshot, b: &GraphSnapshot) -> u64 {
        let (mut i, mut j, mut diff) = (0, 0, 0u64);
        let (xa, xb) = (a.pair_indices(), b.pair_indices());
        while i < xa.len() && j < xb.len() {
            match xa[i].cmp(&xb[j]) {
                std::cmp::Ordering::Less => {
                    diff += 1;
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    diff += 1;
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    i += 1;
                    j += 1;
                }
            }
        }
        diff + (xa.len() - i) as u64 + (xb.len() - j) as u64
    }

    #[test]
    fn stationary_marginal_preserved_by_evolve() {
        // Exact: one step from p0 = p̃ stays at p̃.
        let (p, q) = (0.2, 0.6);
        let stat = stationary_probability(p, q).unwrap();
        let after = edge_presence_probability(p, q, stat, 1).unwrap();
        assert!((after - stat).abs() < 1e-15);

        // χ² on per-pair presence counts after one evolve from stationary.
        let (n, trials) = (6, 100_000);
        let mut rng = rng_for(8, 0);
        let mut counts = vec![0u64; pair_count(n) as usize];
        for _ in 0..trials {
            let g0 = sample_gnp(n, stat, &mut rng).unwrap();
            let g1 = evolve_step(&g0, p, q, &mut rng).unwrap();
            for &k in g1.pair_indices() {
                counts[k as usize] += 1;
            }
        }
        let expected = trials as f64 * stat;
        let var = trials as f64 * stat * (1.0 - stat);
        let stat_chi: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / var)
            .sum();
        let crit = crate::stats::chi_square_critical(counts.len(), 0.001);
        assert!(stat_chi < crit, "χ²={stat_chi} ≥ {crit}");
    }

    #[test]
    fn independent_gnp_equals_edge_markov_with_q_one_minus_p() {
        let (n, p, samples, t_probe) = (6, 0.3, 100_000usize, 3);
        // Exact marginal: with q = 1−p the closed form is constant p.
        for t in 0..10 {
            let pt = edge_presence_probability(p, 1.0 - p, p, t).unwrap();
            assert!((pt - p).abs() < 1e-14);
        }
        // Two-sample χ² on edge-count distributions.
        let markov = EvolvingModel::edge_markov(n, p, 1.0 - p, InitialCondition::Gnp(p));
        let mut hist_gnp = [0u64; 16];
        let mut hist_markov = [0u64; 16];
        let mut rng = rng_for(9, 0);
        for i in 0..samples {
            hist_gnp[sample_gnp(n, p, &mut rng).unwrap().edge_count()] += 1;
            let mut seq = markov.sequence(RngStream::new(10, i as u64)).unwrap();
            for _ in 0..t_probe {
                seq.advance().unwrap();
            }
            hist_markov[seq.current().edge_count()] += 1;
        }
        let (stat, df) = crate::stats::two_sample_chi_square(&hist_gnp, &hist_markov);
        let crit = crate::stats::chi_square_critical(df.max(1), 0.001);
        assert!(stat < crit, "χ²={stat} ≥ {crit}");
    }

    #[test]
    fn sequence_is_deterministic() {
        let model = EvolvingModel::edge_markov(40, 0.02, 0.4, InitialCondition::Stationary);
        let run = |stream: RngStream| -> Vec<Vec<u64>> {
            let mut seq = model.sequence(stream).unwrap();
            let mut out = vec![seq.current().pair_indices().to_vec()];
            for _ in 0..20 {
                out.push(seq.advance().unwrap().pair_indices().to_vec());
            }
            out
        };
        assert_eq!(run(RngStream::new(1, 2)), run(RngStream::new(1, 2)));
        assert_ne!(run(RngStream::new(1, 2)), run(RngStream::new(1, 3)));
    }

    #[test]
    fn edge_list_round_trip() {
        let g = GraphSnapshot::new(5, [(3, 4), (0, 1), (1, 3)]).unwrap();
        let text = g.to_edge_list();
        assert_eq!(text, "5 3\n0 1\n1 3\n3 4\n");
        assert_eq!(GraphSnapshot::parse_edge_list(&text).unwrap(), g);
        let bad = "5 2\n0 1\nx y\n";
        match GraphSnapshot::parse_edge_list(bad) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn snapshot_validation() {
        assert!(matches!(
            GraphSnapshot::new(4, [(1, 1)]),
            Err(Error::ShapeMismatch(_))
        ));
        assert!(matches!(
            GraphSnapshot::new(4, [(0, 4)]),
            Err(Error::ShapeMismatch(_))
        ));
        assert!(matches!(
            GraphSnapshot::new(4, [(0, 1), (1, 0)]),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn stationary_initial_rejected_when_frozen() {
        let model = EvolvingModel::edge_markov(5, 0.0, 0.0, InitialCondition::Stationary);
        assert!(matches!(
            model.sequence(RngStream::new(0, 0)),
            Err(Error::UndefinedStationary)
        ));
    }

    proptest! {
        #[test]
        fn pair_index_round_trips(n in 2usize..2000, seed in 0u64..1000) {
            let total = pair_count(n);
            let k = seed % total;
            let (u, v) = pair_endpoints(n, k);
            prop_assert!(u < v && (v as usize) < n);
            prop_assert_eq!(pair_index(n, u, v), k);
        }

        #[test]
        fn sampled_snapshots_are_well_formed(
            n in 0usize..60,
            p in 0.0f64..=1.0,
            seed in 0u64..100,
        ) {
            let mut rng = rng_for(seed, 99);
            let g = sample_gnp(n, p, &mut rng).unwrap();
            prop_assert!(g.edge_count() as u64 <= pair_count(n));
            let mut seen = std::collections::HashSet::new();
            for (u, v) in g.edges() {
                prop_assert!(u < v);
                prop_assert!((v as usize) < n);
                prop_assert!(seen.insert((u, v)));
            }
            // Evolved snapshots stay well-formed.
            let g2 = evolve_step(&g, p * 0.5, 0.3, &mut rng).unwrap();
            prop_assert!(g2.pair_indices().windows(2).all(|w| w[0] < w[1]));
        }

        #[test]
        fn switching_identity(n in 2usize..500, p in 0.0f64..=1.0, q in 0.0f64..=1.0) {
            prop_assume!(p + q > 0.0);
            let nu = expected_switching_edges(n, p, q).unwrap();
            let dbar = expected_degree(n, p, q).unwrap();
            let rhs = n as f64 * q * dbar;
            prop_assert!((nu - rhs).abs() <= 1e-12 * nu.abs().max(1.0));
        }
    }
}
