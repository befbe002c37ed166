//! Push and Flooding execution over snapshot sequences.
//!
//! One round: the next snapshot `G_t` is drawn (or evolved), then the
//! protocol acts on `G_t`. Nodes informed at round `t` first transmit at
//! round `t+1`. Informed nodes keep transmitting forever; a push to an
//! already-informed node is counted as a message but changes nothing; an
//! informed node with no neighbors skips its push.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dyngraph::{Adjacency, EvolvingModel, GraphSnapshot};
use crate::error::{Error, Result};
use crate::nodeset::NodeSet;
use crate::rng::RngStream;
use crate::stats::{bounded_degree_ratio, BoundedDegreeReport};

/// Which protocol acts each round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    Push,
    Flooding,
}

impl Protocol {
    pub fn name(&self) -> &'static str {
        match self {
            Protocol::Push => "push",
            Protocol::Flooding => "flooding",
        }
    }
}

/// Mutable execution state of one run.
#[derive(Debug, Clone)]
pub struct ProtocolState {
    pub round: u32,
    pub informed: NodeSet,
    /// `m_t = |I_t|` for every round so far; length = round + 1.
    pub trajectory: Vec<u32>,
    pub messages_total: u64,
}

impl ProtocolState {
    pub fn new(informed: NodeSet) -> Self {
        let m0 = informed.len() as u32;
        Self {
            round: 0,
            informed,
            trajectory: vec![m0],
            messages_total: 0,
        }
    }
}

/// Optional per-round measurements recorded into the [`RunRecord`].
#[derive(Debug, Clone, Default)]
pub struct Instruments {
    /// Evaluate the bounded-degree predicate on (G_t, I_t) each round
    /// (edge-Markov models with q > 0 only).
    pub bounded_degree: bool,
    /// Record the first round with `m_t ≥ γ·ln n`.
    pub bootstrap_gamma: Option<f64>,
    /// Count edges switching state between consecutive snapshots.
    pub switch_count: bool,
}

/// Per-round event tallies of the source-only spreading process.
///
/// `s1` counts rounds where the source informed a new node, `s2` rounds
/// where the edge count between the source and the informed set decreased,
/// `f` rounds where a new edge appeared between the source and a previously
/// informed node. `rounds_not_f` / `s1_or_s2_not_f` support the conditional
/// frequency of `S1 ∨ S2` given no `F` event.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceOnlyEvents {
    pub s1: u32,
    pub s2: u32,
    pub f: u32,
    pub rounds: u32,
    pub rounds_not_f: u32,
    pub s1_or_s2_not_f: u32,
}

/// Everything recorded about one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub model: String,
    pub protocol: String,
    pub source: u32,
    pub seed: RngStream,
    pub n: usize,
    /// Round at which all nodes were informed (for source-only runs, the
    /// round the informed target was reached); `None` on timeout.
    pub completion_round: Option<u32>,
    pub max_rounds: u32,
    pub trajectory: Vec<u32>,
    pub messages_total: u64,
    pub bootstrap_round: Option<u32>,
    pub bounded_degree: Option<BoundedDegreeReport>,
    pub switch_total: Option<u64>,
    pub source_events: Option<SourceOnlyEvents>,
}

impl RunRecord {
    pub fn timed_out(&self) -> bool {
        self.completion_round.is_none()
    }
}

/// Generous default timeout: 200·max(log₂ n, ln n / (n·p̂)) rounds.
pub fn default_max_rounds(n: usize, p: Option<f64>) -> u32 {
    let n_f = n.max(2) as f64;
    let log2_n = n_f.log2();
    let spread = match p {
        Some(p) if p > 0.0 => {
            let phat = crate::stats::phat(n, p);
            n_f.ln() / (n_f * phat)
        }
        _ => 0.0,
    };
    (200.0 * log2_n.max(spread)).ceil().max(1.0) as u32
}

/// One Push round on `snapshot`: every informed node with at least one
/// neighbor selects a neighbor uniformly at random; selected nodes join the
/// informed set. Returns the grown set and the number of messages sent.
pub fn push_step(
    snapshot: &GraphSnapshot,
    informed: &NodeSet,
    rng: &mut ChaCha8Rng,
) -> (NodeSet, u64) {
    push_step_adj(&snapshot.adjacency(), informed, rng)
}

pub(crate) fn push_step_adj(
    adj: &Adjacency,
    informed: &NodeSet,
    rng: &mut ChaCha8Rng,
) -> (NodeSet, u64) {
    let mut next = informed.clone();
    let mut messages = 0u64;
    for u in informed.iter() {
        let neighbors = adj.neighbors(u);
        if neighbors.is_empty() {
            continue;
        }
        let target = neighbors[rng.random_range(0..neighbors.len())];
        next.insert(target);
        messages += 1;
    }
    debug_assert!(next.len() <= 2 * informed.len());
    (next, messages)
}

/// One Flooding round: every neighbor of an informed node becomes informed.
/// Message count is the degree sum over informed nodes (every informed node
/// transmits on all incident edges).
pub fn flood_step(snapshot: &GraphSnapshot, informed: &NodeSet) -> (NodeSet, u64) {
    flood_step_adj(&snapshot.adjacency(), informed)
}

pub(crate) fn flood_step_adj(adj: &Adjacency, informed: &NodeSet) -> (NodeSet, u64) {
    let mut next = informed.clone();
    let mut messages = 0u64;
    for u in informed.iter() {
        let neighbors = adj.neighbors(u);
        messages += neighbors.len() as u64;
        for &v in neighbors {
            next.insert(v);
        }
    }
    (next, messages)
}

/// Run a protocol from a single informed source node.
pub fn run_protocol(
    model: &EvolvingModel,
    protocol: Protocol,
    source: u32,
    max_rounds: u32,
    stream: RngStream,
    instruments: &Instruments,
) -> Result<RunRecord> {
    let n = model.n();
    if source as usize >= n {
        return Err(Error::InvalidParameter(format!(
            "source {source} out of range for n={n}"
        )));
    }
    run_protocol_from(
        model,
        protocol,
        NodeSet::singleton(n, source),
        max_rounds,
        stream,
        instruments,
    )
}

/// Run a protocol from an arbitrary non-empty initial informed set.
pub fn run_protocol_from(
    model: &EvolvingModel,
    protocol: Protocol,
    initial_informed: NodeSet,
    max_rounds: u32,
    stream: RngStream,
    instruments: &Instruments,
) -> Result<RunRecord> {
    let n = model.n();
    if initial_informed.is_empty() || initial_informed.capacity() != n {
        return Err(Error::InvalidParameter(
            "initial informed set must be non-empty over [0, n)".into(),
        ));
    }
    if max_rounds < 1 {
        return Err(Error::InvalidParameter("max_rounds must be ≥ 1".into()));
    }
    let source = initial_informed.iter().next().expect("non-empty");
    let mut seq = model.sequence(stream)?;
    let mut state = ProtocolState::new(initial_informed);
    let rates = model.edge_markov_rates();
    let mut bd = BdTracker::new(instruments.bounded_degree, rates);
    let bootstrap_threshold = instruments
        .bootstrap_gamma
        .map(|gamma| gamma * (n.max(1) as f64).ln());
    let mut bootstrap_round =
        check_bootstrap(bootstrap_threshold, state.trajectory[0], 0, None);
    let mut switch_total = instruments.switch_count.then_some(0u64);
    let mut prev_indices = instruments
        .switch_count
        .then(|| seq.current().pair_indices().to_vec());

    let mut push_rng = stream.substream(1).rng();
    let mut completion_round = None;
    if state.informed.is_full() {
        completion_round = Some(0);
    } else {
        for t in 1..=max_rounds {
            let snapshot = seq.advance()?;
            if let (Some(total), Some(prev)) = (switch_total.as_mut(), prev_indices.as_mut()) {
                *total += symmetric_difference_size(prev, snapshot.pair_indices());
                prev.clear();
                prev.extend_from_slice(snapshot.pair_indices());
            }
            bd.observe(snapshot, &state.informed, t);
            let adj = snapshot.adjacency();
            let (next, messages) = match protocol {
                Protocol::Push => push_step_adj(&adj, &state.informed, &mut push_rng),
                Protocol::Flooding => flood_step_adj(&adj, &state.informed),
            };
            state.informed = next;
            state.messages_total += messages;
            state.round = t;
            state.trajectory.push(state.informed.len() as u32);
            bootstrap_round = check_bootstrap(
                bootstrap_threshold,
                state.informed.len() as u32,
                t,
                bootstrap_round,
            );
            if state.informed.is_full() {
                completion_round = Some(t);
                break;
            }
        }
    }

    Ok(RunRecord {
        model: model.descriptor(),
        protocol: protocol.name().to_string(),
        source,
        seed: stream,
        n,
        completion_round,
        max_rounds,
        trajectory: state.trajectory,
        messages_total: state.messages_total,
        bootstrap_round,
        bounded_degree: bd.finish(),
        switch_total,
        source_events: None,
    })
}

/// The source-only spreading process: every round only the source pushes;
/// nodes it informs stay silent. Stops when `target_informed` nodes are
/// informed (recorded as the completion round) or at `max_rounds`.
/// Tallies the bootstrap events S1, S2 and F between consecutive rounds.
pub fn source_only_run(
    model: &EvolvingModel,
    source: u32,
    target_informed: usize,
    max_rounds: u32,
    stream: RngStream,
) -> Result<RunRecord> {
    let n = model.n();
    if source as usize >= n {
        return Err(Error::InvalidParameter(format!(
            "source {source} out of range for n={n}"
        )));
    }
    if target_informed > n {
        return Err(Error::InvalidParameter(format!(
            "target {target_informed} exceeds n={n}"
        )));
    }
    if max_rounds < 1 {
        return Err(Error::InvalidParameter("max_rounds must be ≥ 1".into()));
    }
    let mut seq = model.sequence(stream)?;
    let mut push_rng = stream.substream(1).rng();
    let mut state = ProtocolState::new(NodeSet::singleton(n, source));
    let mut events = SourceOnlyEvents::default();
    let mut completion_round = None;
    // Neighborhood of the source in the previous snapshot, for F detection.
    let mut prev_nbrs = neighbor_set(seq.current(), source, n);
    let mut prev_deg_informed = count_informed_neighbors(&prev_nbrs, &state.informed, source);

    if state.informed.len() >= target_informed {
        completion_round = Some(0);
    } else {
        for t in 1..=max_rounds {
            let snapshot = seq.advance()?;
            let nbrs = neighbor_set(snapshot, source, n);
            // F_t: a fresh edge from the source to an already informed node.
            let f_event = state
                .informed
                .iter()
                .any(|v| v != source && nbrs.contains(v) && !prev_nbrs.contains(v));

            let nbr_list = nbrs.to_vec();
            let mut s1_event = false;
            if !nbr_list.is_empty() {
                let target = nbr_list[push_rng.random_range(0..nbr_list.len())];
                state.messages_total += 1;
                s1_event = state.informed.insert(target);
            }
            let deg_informed = count_informed_neighbors(&nbrs, &state.informed, source);
            let s2_event = deg_informed + 1 <= prev_deg_informed;

            events.rounds += 1;
            events.s1 += u32::from(s1_event);
            events.s2 += u32::from(s2_event);
            events.f += u32::from(f_event);
            if !f_event {
                events.rounds_not_f += 1;
                events.s1_or_s2_not_f += u32::from(s1_event || s2_event);
            }

            state.round = t;
            state.trajectory.push(state.informed.len() as u32);
            prev_nbrs = nbrs;
            prev_deg_informed = deg_informed;
            if state.informed.len() >= target_informed {
                completion_round = Some(t);
                break;
            }
        }
    }

    Ok(RunRecord {
        model: model.descriptor(),
        protocol: "source-only".to_string(),
        source,
        seed: stream,
        n,
        completion_round,
        max_rounds,
        trajectory: state.trajectory,
        messages_total: state.messages_total,
        bootstrap_round: completion_round,
        bounded_degree: None,
        switch_total: None,
        source_events: Some(events),
    })
}

fn neighbor_set(snapshot: &GraphSnapshot, node: u32, n: usize) -> NodeSet {
    let adj = snapshot.adjacency();
    NodeSet::from_iter(n, adj.neighbors(node).iter().copied())
}

fn count_informed_neighbors(nbrs: &NodeSet, informed: &NodeSet, source: u32) -> usize {
    nbrs.iter()
        .filter(|&v| v != source && informed.contains(v))
        .count()
}

fn check_bootstrap(
    threshold: Option<f64>,
    m: u32,
    round: u32,
    current: Option<u32>,
) -> Option<u32> {
    if current.is_some() {
        return current;
    }
    match threshold {
        Some(thr) if f64::from(m) >= thr => Some(round),
        _ => None,
    }
}

fn symmetric_difference_size(a: &[u64], b: &[u64]) -> u64 {
    let (mut i, mut j, mut diff) = (0usize, 0usize, 0u64);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
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
    diff + (a.len() - i) as u64 + (b.len() - j) as u64
}

/// Tracks the bounded-degree predicate across a run.
struct BdTracker {
    rates: Option<(f64, f64)>,
    report: Option<BoundedDegreeReport>,
}

impl BdTracker {
    fn new(enabled: bool, rates: Option<(f64, f64)>) -> Self {
        // The predicate needs q > 0; otherwise record nothing.
        let applicable = enabled && matches!(rates, Some((_, q)) if q > 0.0);
        Self {
            rates,
            report: applicable.then(BoundedDegreeReport::default),
        }
    }

    fn observe(&mut self, snapshot: &GraphSnapshot, informed: &NodeSet, round: u32) {
        let Some(report) = self.report.as_mut() else {
            return;
        };
        let (p, q) = self.rates.expect("rates exist when report does");
        let ratio = bounded_degree_ratio(snapshot, informed, p, q);
        report.rounds_checked += 1;
        if ratio > report.max_ratio {
            report.max_ratio = ratio;
        }
        if ratio > 1.0 {
            report.violations += 1;
            report.violation_rounds.push(round);
        }
    }

    fn finish(self) -> Option<BoundedDegreeReport> {
        self.report
    }
}
