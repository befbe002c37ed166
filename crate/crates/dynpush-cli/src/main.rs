//! Command-line front door: run single simulations, execute sweeps, verify
//! the coupling and closed-form checks, fit scaling laws, emit plots.

mod plot;

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};
use std::time::Instant;

use dynpush::checks::{self, CheckReport};
use dynpush::coupling::corpus::{self, CorpusInstance};
use dynpush::dyngraph::{EvolvingModel, InitialCondition};
use dynpush::harness;
use dynpush::protocol::{
    default_max_rounds, run_protocol, source_only_run, Instruments, Protocol, RunRecord,
};
use dynpush::rng::RngStream;
use dynpush::stats::{fit_scaling, phat, summarize_values};
use dynpush::{Error, Result};

#[derive(Parser)]
#[command(name = "dynpush", version, about = "Push rumor spreading on evolving graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one protocol execution and print the run record.
    Simulate(SimulateArgs),
    /// Execute a sweep described by a JSON config and persist CSV + JSON.
    Sweep(SweepArgs),
    /// Run a verification suite; exit 0 iff every check passes.
    Verify(VerifyArgs),
    /// Fit median completion times from a results CSV against a predictor.
    Fit(FitArgs),
    /// Emit an SVG plot (plus a .dat series file) from results.
    Plot(PlotArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProtocolArg {
    Push,
    Flooding,
    SourceOnly,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: f64,
    #[arg(long)]
    q: f64,
    #[arg(long, value_enum)]
    protocol: ProtocolArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    stream: u64,
    #[arg(long, default_value_t = 0)]
    source: u32,
    #[arg(long)]
    max_rounds: Option<u32>,
    /// empty | complete | stationary | gnp:<p0>  (default: stationary,
    /// or empty when p+q = 0).
    #[arg(long)]
    initial: Option<String>,
    /// Informed-count target for source-only runs (default ⌈10·ln n⌉).
    #[arg(long)]
    target_informed: Option<usize>,
    /// Print the m_t trajectory.
    #[arg(long)]
    trace: bool,
    /// Print the run record as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SweepArgs {
    /// Path to the experiment config (JSON).
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Worker count (default: DYNPUSH_THREADS or all cores).
    #[arg(long)]
    parallelism: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    Couplings,
    DominanceMc,
    Stationarity,
    ClosedForms,
    BoundedDegree,
    ReverseMarkov,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(value_enum)]
    suite: Suite,
    /// Corpus directory (default: the built-in corpus).
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Coupled-sampler trials for the couplings suite.
    #[arg(long, default_value_t = 1_000_000)]
    trials: u64,
    /// Sample pairs for the dominance-mc suite.
    #[arg(long, default_value_t = 100_000)]
    pairs: u64,
    /// Monte-Carlo samples for the stationarity suite.
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    /// Replicas for the bounded-degree suite.
    #[arg(long, default_value_t = 100)]
    replicas: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Predictor {
    LogN,
    LogNOverNphat,
}

#[derive(Args)]
struct FitArgs {
    /// Results CSV written by `dynpush sweep`.
    results: PathBuf,
    #[arg(long, value_enum)]
    predictor: Predictor,
    /// Write the fitted series as a .dat file.
    #[arg(long)]
    plot_out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    /// Results CSV, or a .dat series file produced by `fit --plot-out`.
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    };
    std::process::exit(code);
}

fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::InvalidConfig(_)
        | Error::InvalidParameter(_)
        | Error::InsufficientData(_)
        | Error::Json(_) => 2,
        _ => 1,
    }
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Simulate(args) => run_simulate(args),
        Command::Sweep(args) => run_sweep(args),
        Command::Verify(args) => run_verify(args),
        Command::Fit(args) => run_fit(args),
        Command::Plot(args) => run_plot(args),
    }
}

fn parse_initial(text: Option<&str>, p: f64, q: f64) -> Result<InitialCondition> {
    match text {
        None => Ok(if p + q > 0.0 {
            InitialCondition::Stationary
        } else {
            InitialCondition::Empty
        }),
        Some("empty") => Ok(InitialCondition::Empty),
        Some("complete") => Ok(InitialCondition::Complete),
        Some("stationary") => Ok(InitialCondition::Stationary),
        Some(other) => match other.strip_prefix("gnp:") {
            Some(p0) => p0
                .parse()
                .map(InitialCondition::Gnp)
                .map_err(|_| Error::InvalidParameter(format!("bad initial {other:?}"))),
            None => Err(Error::InvalidParameter(format!("bad initial {other:?}"))),
        },
    }
}

fn run_simulate(args: SimulateArgs) -> Result<i32> {
    let initial = parse_initial(args.initial.as_deref(), args.p, args.q)?;
    let model = EvolvingModel::edge_markov(args.n, args.p, args.q, initial);
    model.validate()?;
    let max_rounds = args
        .max_rounds
        .unwrap_or_else(|| default_max_rounds(args.n, Some(args.p)));
    let stream = RngStream::new(args.seed, args.stream);
    let record: RunRecord = match args.protocol {
        ProtocolArg::Push | ProtocolArg::Flooding => {
            let protocol = if args.protocol == ProtocolArg::Push {
                Protocol::Push
            } else {
                Protocol::Flooding
            };
            run_protocol(
                &model,
                protocol,
                args.source,
                max_rounds,
                stream,
                &Instruments::default(),
            )?
        }
        ProtocolArg::SourceOnly => {
            let target = args
                .target_informed
                .unwrap_or_else(|| (10.0 * (args.n.max(2) as f64).ln()).ceil() as usize)
                .min(args.n);
            source_only_run(&model, args.source, target.max(1), max_rounds, stream)?
        }
    };
    if args.json {
        println!("{}", serde_json::to_string(&record)?);
        return Ok(0);
    }
    println!("model: {}", record.model);
    println!("protocol: {}", record.protocol);
    println!("source: {}", record.source);
    println!("seed: {}  stream: {}", record.seed.seed, record.seed.stream);
    match record.completion_round {
        Some(round) => println!("completion_round: {round}"),
        None => println!("completion_round: -"),
    }
    println!("timed_out: {}", u8::from(record.timed_out()));
    println!("max_rounds: {}", record.max_rounds);
    println!("messages_total: {}", record.messages_total);
    if let Some(bootstrap) = record.bootstrap_round {
        println!("bootstrap_round: {bootstrap}");
    }
    if let Some(events) = &record.source_events {
        println!(
            "events: s1={} s2={} f={} rounds={} s1_or_s2_not_f={}/{}",
            events.s1, events.s2, events.f, events.rounds, events.s1_or_s2_not_f, events.rounds_not_f
        );
    }
    if args.trace {
        let m: Vec<String> = record.trajectory.iter().map(u32::to_string).collect();
        println!("trajectory: {}", m.join(" "));
    }
    Ok(0)
}

fn run_sweep(args: SweepArgs) -> Result<i32> {
    let text = std::fs::read_to_string(&args.config)?;
    let config = harness::ExperimentConfig::from_json(&text)?;
    let parallelism = args
        .parallelism
        .or_else(|| {
            std::env::var("DYNPUSH_THREADS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(usize::from)
                .unwrap_or(1)
        });
    let started = Instant::now();
    let result = harness::execute(&config, parallelism)?;
    harness::persist(&args.out, &result, started.elapsed().as_secs_f64())?;
    println!(
        "{}: {} rows ({} grid points x {} replicas) -> {}",
        config.experiment_id,
        result.rows.len(),
        config.grid.n.len(),
        config.replicas,
        args.out.display()
    );
    for summary in &result.summaries {
        println!(
            "  n={:<6} p={:<12} q={:<12} median={} q05={} q95={} timeouts={:.1}%",
            summary.n,
            summary.p,
            summary.q,
            summary.stats.median,
            summary.stats.q05,
            summary.stats.q95,
            100.0 * summary.stats.timeout_fraction
        );
    }
    Ok(0)
}

fn load_instances(path: Option<&Path>) -> Result<Vec<CorpusInstance>> {
    match path {
        Some(dir) => corpus::load_corpus_dir(dir),
        None => Ok(corpus::builtin()),
    }
}

fn run_verify(args: VerifyArgs) -> Result<i32> {
    let reports: Vec<CheckReport> = match args.suite {
        Suite::ClosedForms => checks::closed_forms_suite(),
        Suite::Couplings => {
            let instances = load_instances(args.corpus.as_deref())?;
            checks::couplings_suite(&instances, args.trials, args.seed)
        }
        Suite::DominanceMc => checks::dominance_mc_suite(args.seed, args.pairs),
        Suite::Stationarity => checks::stationarity_suite(args.seed, args.samples),
        Suite::BoundedDegree => checks::bounded_degree_suite(args.seed, args.replicas),
        Suite::ReverseMarkov => {
            let instances = load_instances(args.corpus.as_deref())?;
            checks::reverse_markov_suite(&instances)
        }
    };
    let mut all_passed = true;
    for report in &reports {
        let verdict = if report.passed { "PASS" } else { "FAIL" };
        println!("{verdict} {} - {}", report.name, report.detail);
        all_passed &= report.passed;
    }
    Ok(if all_passed { 0 } else { 1 })
}

/// Median completion per grid point: (n, p, median).
fn grid_medians(rows: &[harness::ResultRow]) -> Result<Vec<(usize, f64, f64)>> {
    let mut grid_indices: Vec<usize> = rows.iter().map(|r| r.grid_index).collect();
    grid_indices.sort_unstable();
    grid_indices.dedup();
    let mut points = Vec::new();
    for gi in grid_indices {
        let grid_rows: Vec<&harness::ResultRow> =
            rows.iter().filter(|r| r.grid_index == gi).collect();
        let completed: Vec<f64> = grid_rows
            .iter()
            .filter_map(|r| r.completion_round.map(f64::from))
            .collect();
        if completed.is_empty() {
            eprintln!("warning: grid point {gi} has no completed runs, skipping");
            continue;
        }
        let stats = summarize_values(&completed, grid_rows.len() - completed.len())?;
        points.push((grid_rows[0].n, grid_rows[0].p, stats.median));
    }
    Ok(points)
}

fn run_fit(args: FitArgs) -> Result<i32> {
    let rows = harness::read_rows_csv(&args.results)?;
    let medians = grid_medians(&rows)?;
    let points: Vec<(usize, f64)> = medians.iter().map(|&(n, _, med)| (n, med)).collect();
    let p_by_n: std::collections::BTreeMap<usize, f64> =
        medians.iter().map(|&(n, p, _)| (n, p)).collect();
    let (name, predictor): (&str, Box<dyn Fn(usize) -> f64>) = match args.predictor {
        Predictor::LogN => ("log_n", Box::new(|n: usize| (n as f64).ln())),
        Predictor::LogNOverNphat => (
            "log_n_over_nphat",
            Box::new(move |n: usize| {
                let p = p_by_n.get(&n).copied().unwrap_or(1.0 / n as f64);
                (n as f64).ln() / (n as f64 * phat(n, p))
            }),
        ),
    };
    let fit = fit_scaling(&points, predictor.as_ref(), name)?;
    println!("predictor: {}", fit.predictor_name);
    println!("slope: {}", fit.slope);
    println!("intercept: {}", fit.intercept);
    println!("r_squared: {}", fit.r_squared);
    println!("n        median    predictor    ratio");
    for (&(n, median), &(_, ratio)) in points.iter().zip(fit.ratios.iter()) {
        println!(
            "{n:<8} {median:<9} {:<12.4} {ratio:.4}",
            median / ratio
        );
    }
    println!("ratio max/min: {:.4}", fit.ratio_spread());
    if let Some(out) = args.plot_out {
        let series = plot::PlotSeries {
            label: format!("median completion vs n ({name})"),
            points: medians
                .iter()
                .map(|&(n, _, med)| plot::PlotPoint { x: n as f64, y: med, y_lo: med, y_hi: med })
                .collect(),
            log_x: true,
            log_y: true,
        };
        std::fs::write(&out, plot::to_dat(&series))?;
        println!("series written to {}", out.display());
    }
    Ok(0)
}

fn series_from_rows(rows: &[harness::ResultRow]) -> Result<plot::PlotSeries> {
    let label = rows
        .first()
        .map(|r| r.experiment_id.clone())
        .unwrap_or_else(|| "median completion".into());
    let mut grid_indices: Vec<usize> = rows.iter().map(|r| r.grid_index).collect();
    grid_indices.sort_unstable();
    grid_indices.dedup();
    let mut points = Vec::new();
    for gi in grid_indices {
        let grid_rows: Vec<&harness::ResultRow> =
            rows.iter().filter(|r| r.grid_index == gi).collect();
        let completed: Vec<f64> = grid_rows
            .iter()
            .filter_map(|r| r.completion_round.map(f64::from))
            .collect();
        if completed.is_empty() {
            continue;
        }
        let stats = summarize_values(&completed, grid_rows.len() - completed.len())?;
        points.push(plot::PlotPoint {
            x: grid_rows[0].n as f64,
            y: stats.median,
            y_lo: stats.median_ci.0,
            y_hi: stats.median_ci.1,
        });
    }
    Ok(plot::PlotSeries {
        label: format!("{label}: median completion vs n"),
        points,
        log_x: true,
        log_y: true,
    })
}

fn run_plot(args: PlotArgs) -> Result<i32> {
    let series = if args.input.extension().is_some_and(|e| e == "dat") {
        plot::parse_dat(&std::fs::read_to_string(&args.input)?)?
    } else {
        series_from_rows(&harness::read_rows_csv(&args.input)?)?
    };
    let svg = plot::render_svg(&series)?;
    std::fs::write(&args.out, svg)?;
    let dat_path = args.out.with_extension("dat");
    std::fs::write(&dat_path, plot::to_dat(&series))?;
    println!("wrote {} and {}", args.out.display(), dat_path.display());
    Ok(0)
}
