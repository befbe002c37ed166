//! Executable verification suites.
//!
//! Each suite runs one family of checks and returns per-check verdicts.
//! Exact checks use the enumeration oracles with rational arithmetic;
//! Monte-Carlo checks use fixed seeds and the statistical machinery from
//! [`crate::stats`].

use rand::Rng;
use std::collections::BTreeMap;

use crate::coupling::{
    self, check_dominance, corpus::CorpusInstance, coupled_push_modified_detailed,
    coupled_push_window, enumerate_window_marginal, exact_modified_push_distribution,
    exact_push_distribution, reverse_markov_check, window_atom_marginals,
};
use crate::dyngraph::{
    edge_presence_probability, expected_degree, expected_switching_edges, sample_gnp,
    stationary_probability, two_step_presence_lower_bound, EvolvingModel, GraphSnapshot,
    InitialCondition,
};
use crate::error::Error;
use crate::nodeset::NodeSet;
use crate::protocol::{run_protocol_from, Instruments, Protocol};
use crate::rng::RngStream;
use crate::stats::{
    chi_square_critical, chi_square_goodness, empirical_dominance_test, two_sample_chi_square,
    DominanceVerdict,
};

/// Verdict of one named check.
#[derive(Debug, Clone)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckReport {
    fn pass(name: &str, detail: String) -> Self {
        Self { name: name.into(), passed: true, detail }
    }

    fn fail(name: &str, detail: String) -> Self {
        Self { name: name.into(), passed: false, detail }
    }

    fn of(name: &str, passed: bool, detail: String) -> Self {
        Self { name: name.into(), passed, detail }
    }
}

/// Independent oracle for the two-state edge chain: apply the transition
/// matrix to (1−p0, p0) one step at a time.
pub fn transition_matrix_presence(p: f64, q: f64, p0: f64, t: u32) -> f64 {
    let mut absent = 1.0 - p0;
    let mut present = p0;
    for _ in 0..t {
        let next = absent * p + present * (1.0 - q);
        absent = absent * (1.0 - p) + present * q;
        present = next;
    }
    present
}

/// Closed-form identities: ν = n·q·d̄ on a 100-point (p, q) grid, the
/// presence probability against the matrix-power oracle for t ≤ 100, and
/// the two-step presence bound.
pub fn closed_forms_suite() -> Vec<CheckReport> {
    let mut reports = Vec::new();

    let mut grid: Vec<(f64, f64)> = Vec::new();
    for i in 0..10 {
        for j in 0..10 {
            let p = i as f64 / 9.0;
            let q = j as f64 / 9.0;
            if p + q > 0.0 {
                grid.push((p, q));
            }
        }
    }
    grid.push((0.37, 0.11));
    assert_eq!(grid.len(), 100);

    let mut worst_nu = 0.0f64;
    for &(p, q) in &grid {
        for n in [2usize, 17, 100, 1000] {
            let nu = expected_switching_edges(n, p, q).unwrap();
            let rhs = n as f64 * q * expected_degree(n, p, q).unwrap();
            worst_nu = worst_nu.max((nu - rhs).abs() / nu.abs().max(1.0));
        }
    }
    reports.push(CheckReport::of(
        "nu-identity",
        worst_nu <= 1e-12,
        format!("max relative gap {worst_nu:.2e} over 100 grid points"),
    ));

    let mut worst_presence = 0.0f64;
    for &(p, q) in &grid {
        for p0 in [0.0, 0.3, 1.0] {
            for t in [0u32, 1, 2, 5, 13, 50, 100] {
                let closed = edge_presence_probability(p, q, p0, t).unwrap();
                let oracle = transition_matrix_presence(p, q, p0, t);
                worst_presence = worst_presence.max((closed - oracle).abs());
            }
        }
    }
    reports.push(CheckReport::of(
        "presence-vs-matrix-power",
        worst_presence <= 1e-12,
        format!("max abs gap {worst_presence:.2e} for t ≤ 100"),
    ));

    let two_step_ok = grid
        .iter()
        .all(|&(p, q)| two_step_presence_lower_bound(p, q).unwrap() >= p - 1e-15);
    reports.push(CheckReport::of(
        "two-step-presence-bound",
        two_step_ok,
        "min over start states ≥ p on the full grid".into(),
    ));

    let stationary_ok = grid.iter().all(|&(p, q)| {
        let s = stationary_probability(p, q).unwrap();
        (0.0..=1.0).contains(&s) && (s * (p + q) - p).abs() <= 1e-15
    });
    reports.push(CheckReport::of(
        "stationary-probability",
        stationary_ok,
        "p̃(p+q) = p on the full grid".into(),
    ));
    reports
}

/// Exact dominance of the virtual-nodes lemma over a corpus, plus sampled
/// containment and marginal-uniformity checks of the coupled sampler.
pub fn couplings_suite(
    instances: &[CorpusInstance],
    sample_trials: u64,
    seed: u64,
) -> Vec<CheckReport> {
    let mut reports = Vec::new();
    let mut failures: Vec<String> = Vec::new();
    let mut strict = 0usize;
    for instance in instances {
        let push = exact_push_distribution(&instance.graph, &instance.informed);
        let modified =
            exact_modified_push_distribution(&instance.graph, &instance.informed, instance.b);
        let verdict = match (push, modified) {
            (Ok(push), Ok(modified)) => {
                let (lo, hi) = if instance.reversed {
                    (&modified, &push)
                } else {
                    (&push, &modified)
                };
                match check_dominance(lo, hi) {
                    Ok(true) => {
                        if push != modified {
                            strict += 1;
                        }
                        true
                    }
                    Ok(false) => false,
                    Err(e) => {
                        failures.push(format!("{}: {e}", instance.name));
                        continue;
                    }
                }
            }
            (Err(Error::InstanceTooLarge(_)), _) | (_, Err(Error::InstanceTooLarge(_))) => continue,
            (Err(e), _) | (_, Err(e)) => {
                failures.push(format!("{}: {e}", instance.name));
                continue;
            }
        };
        if !verdict {
            failures.push(format!(
                "{}: dominance violated (I={:?}, b={})",
                instance.name,
                instance.informed.to_vec(),
                instance.b
            ));
        }
    }
    reports.push(if failures.is_empty() {
        CheckReport::pass(
            "virtual-nodes-dominance",
            format!(
                "{} instances, exact CDF dominance everywhere ({strict} strict)",
                instances.len()
            ),
        )
    } else {
        CheckReport::fail(
            "virtual-nodes-dominance",
            format!(
                "{} failures: {}",
                failures.len(),
                failures[..failures.len().min(5)].join("; ")
            ),
        )
    });

    reports.extend(sampled_coupling_checks(sample_trials, seed));
    reports
}

/// Random instances for the sampled coupling checks: 50 seeded graphs with
/// n ≤ 6, a non-empty informed set and a random b.
fn sampled_instances(seed: u64) -> Vec<(GraphSnapshot, NodeSet, usize)> {
    let mut rng = RngStream::new(seed, 1000).rng();
    let mut out = Vec::with_capacity(50);
    while out.len() < 50 {
        let n = 3 + out.len() % 4;
        let g = sample_gnp(n, 0.55, &mut rng).unwrap();
        let informed = NodeSet::from_iter(n, (0..n as u32).filter(|_| rng.random::<f64>() < 0.5));
        if informed.is_empty() {
            continue;
        }
        let b = 1 + out.len() % n;
        out.push((g, informed, b));
    }
    out
}

fn sampled_coupling_checks(total_trials: u64, seed: u64) -> Vec<CheckReport> {
    let instances = sampled_instances(seed);
    let per_instance = (total_trials / instances.len() as u64).max(1);
    let mut rng = RngStream::new(seed, 2000).rng();
    let mut containment_failures = 0u64;
    let mut trials_run = 0u64;
    let mut chi_failures: Vec<String> = Vec::new();
    for (idx, (graph, informed, b)) in instances.iter().enumerate() {
        let adj = graph.adjacency();
        let mut counts: BTreeMap<(u32, u32), u64> = BTreeMap::new();
        for _ in 0..per_instance {
            trials_run += 1;
            let sample = coupled_push_modified_detailed(graph, informed, *b, &mut rng)
                .expect("valid instance");
            if !sample.containment {
                containment_failures += 1;
            }
            for (u, choice) in sample.original_choices {
                if let Some(v) = choice {
                    *counts.entry((u, v)).or_insert(0) += 1;
                }
            }
        }
        for u in informed.iter() {
            let nbrs = adj.neighbors(u);
            if nbrs.len() < 2 {
                continue;
            }
            let observed: Vec<u64> = nbrs
                .iter()
                .map(|&v| counts.get(&(u, v)).copied().unwrap_or(0))
                .collect();
            let expected = vec![per_instance as f64 / nbrs.len() as f64; nbrs.len()];
            let stat = chi_square_goodness(&observed, &expected);
            let crit = chi_square_critical(nbrs.len() - 1, 0.001);
            if stat >= crit {
                chi_failures.push(format!("instance {idx} node {u}: χ²={stat:.2} ≥ {crit:.2}"));
            }
        }
    }
    vec![
        CheckReport::of(
            "coupling-containment",
            containment_failures == 0,
            format!("{containment_failures} containment failures in {trials_run} coupled trials"),
        ),
        if chi_failures.is_empty() {
            CheckReport::pass(
                "coupling-marginals",
                format!("δ_G uniform on every tested node (α=0.001, {trials_run} trials)"),
            )
        } else {
            CheckReport::fail("coupling-marginals", chi_failures.join("; "))
        },
    ]
}

/// Time-window lemma checks: exact joint enumeration at T=2, exact marginal
/// uniformity for T ≤ 3, and the sampled DKW dominance test at n=64, T=3.
pub fn dominance_mc_suite(seed: u64, pairs: u64) -> Vec<CheckReport> {
    let mut reports = Vec::new();

    // Exact joint enumeration on small fixed sequences.
    let mut joint_failures = Vec::new();
    let sequences = window_enumeration_corpus();
    for (name, snapshots, informed) in &sequences {
        match coupling::enumerate_window_joint(snapshots, informed) {
            Ok(atoms) => {
                let mass: num::BigRational = atoms.iter().map(|a| a.probability.clone()).sum();
                if !num::One::is_one(&mass) {
                    joint_failures.push(format!("{name}: atom mass {mass}"));
                    continue;
                }
                if let Some(bad) = atoms.iter().find(|a| !a.containment) {
                    joint_failures.push(format!(
                        "{name}: containment failed on an atom (X={}, Y={})",
                        bad.sequence_count, bad.union_count
                    ));
                    continue;
                }
                let (seq, uni) = window_atom_marginals(&atoms).expect("normalized");
                if !check_dominance(&seq, &uni).expect("normalized") {
                    joint_failures.push(format!("{name}: CDF dominance violated"));
                }
            }
            Err(e) => joint_failures.push(format!("{name}: {e}")),
        }
    }
    reports.push(if joint_failures.is_empty() {
        CheckReport::pass(
            "window-joint-enumeration",
            format!("{} sequences, exact dominance and containment", sequences.len()),
        )
    } else {
        CheckReport::fail("window-joint-enumeration", joint_failures.join("; "))
    });

    // Exact marginal uniformity for enumerated T ≤ 3 neighbor histories.
    let histories: Vec<Vec<Vec<u32>>> = vec![
        vec![vec![1], vec![1, 2]],
        vec![vec![1, 2], vec![3], vec![1, 4]],
        vec![vec![], vec![1, 2], vec![2, 3]],
        vec![vec![1, 2, 3], vec![2, 3], vec![4]],
    ];
    let mut marginal_failures = Vec::new();
    for history in &histories {
        let marginal = enumerate_window_marginal(history);
        let mut union: Vec<u32> = history.iter().flatten().copied().collect();
        union.sort_unstable();
        union.dedup();
        let uniform = num::BigRational::new(1.into(), (union.len() as i64).into());
        for v in union {
            if marginal.get(&Some(v)) != Some(&uniform) {
                marginal_failures.push(format!("{history:?}: Pr[δ_H={v}] ≠ 1/h_T"));
            }
        }
    }
    reports.push(if marginal_failures.is_empty() {
        CheckReport::pass(
            "window-marginal-uniformity",
            format!("{} histories, exact 1/h_t marginals", histories.len()),
        )
    } else {
        CheckReport::fail("window-marginal-uniformity", marginal_failures.join("; "))
    });

    // Sampled DKW dominance at n=64, T=3 on coupled pairs.
    let (n, t_window, p) = (64usize, 3usize, 0.05);
    let informed = NodeSet::from_iter(n, 0..8);
    let mut rng = RngStream::new(seed, 3000).rng();
    let mut lo = Vec::with_capacity(pairs as usize);
    let mut hi = Vec::with_capacity(pairs as usize);
    let mut containment_ok = true;
    for _ in 0..pairs {
        let snapshots: Vec<GraphSnapshot> = (0..t_window)
            .map(|_| sample_gnp(n, p, &mut rng).unwrap())
            .collect();
        let (seq, uni, contained) = coupled_push_window(&snapshots, &informed, &mut rng).unwrap();
        containment_ok &= contained;
        lo.push(seq.len() as f64);
        hi.push(uni.len() as f64);
    }
    let verdict = empirical_dominance_test(&lo, &hi, 0.0).unwrap();
    reports.push(CheckReport::of(
        "window-dominance-dkw",
        containment_ok && verdict == DominanceVerdict::Dominates,
        format!("{pairs} coupled pairs at n={n}, T={t_window}: {verdict:?}"),
    ));

    // Independent (uncoupled) samples must at least never show a violation.
    let mut rng_a = RngStream::new(seed, 3001).rng();
    let mut rng_b = RngStream::new(seed, 3002).rng();
    let independent = (pairs / 4).max(1);
    let mut lo = Vec::with_capacity(independent as usize);
    let mut hi = Vec::with_capacity(independent as usize);
    for _ in 0..independent {
        let snapshots: Vec<GraphSnapshot> = (0..t_window)
            .map(|_| sample_gnp(n, p, &mut rng_a).unwrap())
            .collect();
        let mut informed_seq = informed.clone();
        for g in &snapshots {
            informed_seq = crate::protocol::push_step(g, &informed_seq, &mut rng_a).0;
        }
        lo.push(informed_seq.len() as f64);

        let window: Vec<GraphSnapshot> = (0..t_window)
            .map(|_| sample_gnp(n, p, &mut rng_b).unwrap())
            .collect();
        let union = crate::dyngraph::union_window(&window).unwrap();
        let (after, _) = crate::protocol::push_step(&union, &informed, &mut rng_b);
        hi.push(after.len() as f64);
    }
    let verdict = empirical_dominance_test(&lo, &hi, 0.0).unwrap();
    reports.push(CheckReport::of(
        "window-dominance-independent",
        !matches!(verdict, DominanceVerdict::Violated { .. }),
        format!("{independent} independent pairs: {verdict:?}"),
    ));
    reports
}

fn window_enumeration_corpus() -> Vec<(String, Vec<GraphSnapshot>, NodeSet)> {
    let mut out = Vec::new();
    let pairs: Vec<(&str, GraphSnapshot, GraphSnapshot, Vec<u32>)> = vec![
        (
            "path3-grow",
            GraphSnapshot::new(3, [(0, 1)]).unwrap(),
            GraphSnapshot::new(3, [(0, 2), (1, 2)]).unwrap(),
            vec![0],
        ),
        (
            "k4-shrink",
            GraphSnapshot::complete(4),
            GraphSnapshot::new(4, [(0, 1), (2, 3)]).unwrap(),
            vec![0, 1],
        ),
        (
            "disjoint-rounds",
            GraphSnapshot::new(4, [(0, 1), (0, 2)]).unwrap(),
            GraphSnapshot::new(4, [(0, 3), (1, 2)]).unwrap(),
            vec![0],
        ),
        (
            "two-informed",
            GraphSnapshot::new(4, [(0, 2), (1, 2), (1, 3)]).unwrap(),
            GraphSnapshot::new(4, [(0, 3), (1, 2), (2, 3)]).unwrap(),
            vec![0, 1],
        ),
    ];
    for (name, g1, g2, informed) in pairs {
        let n = g1.n();
        out.push((
            name.to_string(),
            vec![g1, g2],
            NodeSet::from_iter(n, informed),
        ));
    }
    // Seeded random T=2 sequences at n=4.
    let mut rng = RngStream::new(0xd1ce, 0).rng();
    for i in 0..4 {
        let g1 = sample_gnp(4, 0.5, &mut rng).unwrap();
        let g2 = sample_gnp(4, 0.5, &mut rng).unwrap();
        let informed = NodeSet::from_iter(4, (0..4).filter(|_| rng.random::<f64>() < 0.5));
        if informed.is_empty() {
            continue;
        }
        out.push((format!("random4-{i}"), vec![g1, g2], informed));
    }
    out
}

/// Stationarity checks of the graph models.
pub fn stationarity_suite(seed: u64, samples: u64) -> Vec<CheckReport> {
    let mut reports = Vec::new();

    // Exact: one evolve step from p0 = p̃ stays at p̃.
    let mut exact_ok = true;
    for (p, q) in [(0.2, 0.6), (0.05, 0.5), (0.9, 0.1)] {
        let stat = stationary_probability(p, q).unwrap();
        exact_ok &= (edge_presence_probability(p, q, stat, 1).unwrap() - stat).abs() < 1e-15;
    }
    reports.push(CheckReport::of(
        "stationary-marginal-exact",
        exact_ok,
        "p_1 = p̃ when p_0 = p̃".into(),
    ));

    // χ² on per-pair presence after one evolve from a stationary sample.
    let (n, p, q) = (6usize, 0.2, 0.6);
    let stat_p = stationary_probability(p, q).unwrap();
    let mut rng = RngStream::new(seed, 4000).rng();
    let pairs = crate::dyngraph::pair_count(n) as usize;
    let mut counts = vec![0u64; pairs];
    for _ in 0..samples {
        let g0 = sample_gnp(n, stat_p, &mut rng).unwrap();
        let g1 = crate::dyngraph::evolve_step(&g0, p, q, &mut rng).unwrap();
        for &k in g1.pair_indices() {
            counts[k as usize] += 1;
        }
    }
    let expected = samples as f64 * stat_p;
    let variance = samples as f64 * stat_p * (1.0 - stat_p);
    let chi: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / variance).sum();
    let crit = chi_square_critical(pairs, 0.001);
    reports.push(CheckReport::of(
        "stationary-marginal-chisq",
        chi < crit,
        format!("χ²={chi:.2} < {crit:.2} over {pairs} pairs, {samples} samples"),
    ));

    // Independent G(n,p) vs edge-Markov(p, 1−p) edge-count homogeneity.
    let p_ind = 0.3;
    let markov = EvolvingModel::edge_markov(n, p_ind, 1.0 - p_ind, InitialCondition::Gnp(p_ind));
    let mut hist_gnp = vec![0u64; pairs + 1];
    let mut hist_markov = vec![0u64; pairs + 1];
    for i in 0..samples {
        hist_gnp[sample_gnp(n, p_ind, &mut rng).unwrap().edge_count()] += 1;
        let mut seq = markov.sequence(RngStream::new(seed, 5000 + i)).unwrap();
        for _ in 0..3 {
            seq.advance().unwrap();
        }
        hist_markov[seq.current().edge_count()] += 1;
    }
    let (stat, df) = two_sample_chi_square(&hist_gnp, &hist_markov);
    let crit = chi_square_critical(df.max(1), 0.001);
    reports.push(CheckReport::of(
        "independent-gnp-equivalence",
        stat < crit,
        format!("edge-count two-sample χ²={stat:.2} < {crit:.2} (df={df})"),
    ));
    reports
}

/// Bounded-degree lemma, Monte-Carlo instantiation.
pub fn bounded_degree_suite(seed: u64, replicas: u64) -> Vec<CheckReport> {
    let n = 512usize;
    let model = EvolvingModel::edge_markov(n, 4.0 / n as f64, 0.5, InitialCondition::Stationary);
    let target_size = (n as f64).ln().ceil() as usize;
    let instruments = Instruments {
        bounded_degree: true,
        ..Default::default()
    };
    let mut violations = 0u64;
    let mut checked = 0u64;
    let mut max_ratio = 0.0f64;
    for rep in 0..replicas {
        let mut pick = RngStream::new(seed, rep).substream(7).rng();
        let mut informed = NodeSet::new(n);
        while informed.len() < target_size {
            informed.insert(pick.random_range(0..n as u32));
        }
        let record = run_protocol_from(
            &model,
            Protocol::Push,
            informed,
            200,
            RngStream::new(seed, rep),
            &instruments,
        )
        .expect("valid model");
        let report = record.bounded_degree.expect("instrumented");
        violations += u64::from(report.violations_in_first(50));
        checked += u64::from(report.rounds_checked.min(50));
        max_ratio = max_ratio.max(report.max_ratio);
    }
    let fraction = violations as f64 / checked as f64;
    vec![CheckReport::of(
        "bounded-degree-states",
        fraction <= 0.01,
        format!(
            "violation fraction {fraction:.4} over first 50 rounds of {replicas} runs (max ratio {max_ratio:.3})"
        ),
    )]
}

/// The expectation-to-probability observation over enumerated push
/// distributions of the corpus.
pub fn reverse_markov_suite(instances: &[CorpusInstance]) -> Vec<CheckReport> {
    let mut checked = 0usize;
    let mut failures = Vec::new();
    for instance in instances {
        let n = instance.graph.n();
        let size = instance.informed.len();
        let m = size.min(n - size) as f64;
        if m == 0.0 {
            continue;
        }
        let Ok(dist) = exact_push_distribution(&instance.graph, &instance.informed) else {
            continue;
        };
        let lambda = (coupling::oracle::ratio_to_f64(&dist.mean()) / m).clamp(0.0, 1.0);
        match reverse_markov_check(&dist, m, lambda) {
            Ok(true) => checked += 1,
            Ok(false) => failures.push(instance.name.clone()),
            Err(Error::NotApplicable(_)) => {}
            Err(e) => failures.push(format!("{}: {e}", instance.name)),
        }
    }
    vec![if failures.is_empty() {
        CheckReport::pass(
            "reverse-markov-bound",
            format!("bound holds on {checked} enumerated push distributions"),
        )
    } else {
        CheckReport::fail(
            "reverse-markov-bound",
            format!("{} failures: {}", failures.len(), failures[..failures.len().min(5)].join("; ")),
        )
    }]
}
