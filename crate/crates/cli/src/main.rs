//! `cba`: run, sweep and check the committee-coin agreement simulator.
//!
//! Exit status: 0 when everything requested passed, 1 when a check failed,
//! 2 on bad flags, bad config or I/O errors.

mod config;
mod error;
mod output;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use committee_ba::adversary::AdversarySpec;
use committee_ba::analysis::{reference_series, summarize};
use committee_ba::coin::{
    closed_form_moment, estimate_coin_guarantee, exact_moment, pz_bound, pz_bound_one_sided,
    sqrt_budget, AdversaryShift, CoinTrialSetup, Proportion, SumHistogram, MAX_ENUMERATED_CONTRIBUTORS,
    ONE_SIDED_FLOOR,
};
use committee_ba::engine::{run_batch, write_trace, InputPattern, TrialConfig};
use committee_ba::protocol::{
    committee_count, ProtocolParams, DEFAULT_ALPHA, DEFAULT_GAMMA, DEFAULT_LOG_BASE,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use config::FileConfig;
use error::CliError;
use output::{Echo, ResultWriter};

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Jsonl,
}

impl Format {
    fn name(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Jsonl => "jsonl",
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "cba", version, about = "Committee-coin Byzantine agreement simulator")]
struct Cli {
    /// TOML file supplying defaults for any flag (same names, underscores).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One batch of trials at a fixed (n, t).
    Run(RunArgs),
    /// Batches over every combination of n, t and adversary.
    Sweep(SweepArgs),
    /// Monte Carlo check of the common-coin floor.
    CoinTest(CoinArgs),
    /// Exact moment enumeration and Paley-Zygmund sanity checks.
    Verify(VerifyArgs),
    /// Reference round-complexity curves as CSV.
    Curves(CurveArgs),
}

#[derive(Args, Debug)]
struct ProtocolFlags {
    /// Committee-count constant (default 18).
    #[arg(long)]
    alpha: Option<f64>,
    /// Failure exponent (default 1).
    #[arg(long)]
    gamma: Option<f64>,
    /// Base of log n in the committee formula (default 2).
    #[arg(long)]
    log_base: Option<f64>,
    /// Keep cycling through committees until everyone finishes.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    las_vegas: Option<bool>,
    /// Phase cap (default 4c in Las Vegas mode, c otherwise).
    #[arg(long)]
    max_phases: Option<u32>,
}

#[derive(Args, Debug)]
struct BatchFlags {
    /// Initial inputs: ones, zeros, alternating, random, half or bits:0101...
    #[arg(long)]
    inputs: Option<String>,
    #[arg(long)]
    trials: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// Record every delivered message.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    record_trace: Option<bool>,
    /// Trace destination (default `<out>.trace.jsonl`).
    #[arg(long)]
    trace_out: Option<PathBuf>,
    /// Results destination (default stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Exit 1 if any trial misses agreement or records a violation.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    strict: Option<bool>,
    /// Run trials on one thread.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    serial: Option<bool>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    n: Option<u32>,
    /// Fault bound (default ⌊(n-1)/3⌋).
    #[arg(long)]
    t: Option<u32>,
    /// Strategy as name[:key=value,...], e.g. coinkiller:spend=2.
    #[arg(long)]
    adversary: Option<String>,
    #[command(flatten)]
    protocol: ProtocolFlags,
    #[command(flatten)]
    batch: BatchFlags,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Comma-separated node counts.
    #[arg(long, value_delimiter = ',')]
    n: Vec<u32>,
    /// Comma-separated fault bounds (default ⌊(n-1)/3⌋ per n).
    #[arg(long, value_delimiter = ',')]
    t: Vec<u32>,
    /// Repeat for several strategies.
    #[arg(long)]
    adversary: Vec<String>,
    #[command(flatten)]
    protocol: ProtocolFlags,
    #[command(flatten)]
    batch: BatchFlags,
}

#[derive(Args, Debug)]
struct CoinArgs {
    #[arg(long)]
    n: Option<u32>,
    /// Adversarial contributors (default ⌊√n/2⌋).
    #[arg(long)]
    f: Option<u32>,
    #[arg(long)]
    trials: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// `worst` or a fixed integer shift.
    #[arg(long)]
    shift: Option<String>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Largest contributor count to enumerate (default 16).
    #[arg(long)]
    max_g: Option<u32>,
    /// Committee sizes for the Paley-Zygmund check (default 64,100,256).
    #[arg(long, value_delimiter = ',')]
    n: Vec<u32>,
    #[arg(long)]
    trials: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct CurveArgs {
    #[arg(long)]
    n: Option<u32>,
    /// Largest fault count plotted (default just under n/3).
    #[arg(long)]
    x_max: Option<f64>,
    #[arg(long)]
    points: Option<u32>,
    #[arg(long)]
    log_base: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

/// `Ok(passed)`.
fn dispatch(cli: Cli) -> Result<bool, CliError> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Run(args) => run(args, &file),
        Command::Sweep(args) => sweep(args, &file),
        Command::CoinTest(args) => coin_test(args, &file),
        Command::Verify(args) => verify(args, &file),
        Command::Curves(args) => curves(args, &file),
    }
}

fn required<T>(name: &str, v: Option<T>) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Config(format!("`--{name}` is required (flag or config key)")))
}

/// Everything a batch needs, validated before the first trial.
struct Plan {
    jobs: Vec<TrialConfig>,
    trials: u32,
    format: Format,
    out: Option<PathBuf>,
    trace: Option<PathBuf>,
    strict: bool,
    parallel: bool,
    echo: Echo,
}

fn protocol_base(flags: &ProtocolFlags, file: &FileConfig) -> ProtocolParams {
    let mut p = ProtocolParams::new(0, 0);
    p.alpha = flags.alpha.or(file.alpha).unwrap_or(DEFAULT_ALPHA);
    p.gamma = flags.gamma.or(file.gamma).unwrap_or(DEFAULT_GAMMA);
    p.log_base = flags.log_base.or(file.log_base).unwrap_or(DEFAULT_LOG_BASE);
    p.las_vegas = flags.las_vegas.or(file.las_vegas).unwrap_or(false);
    p
}

fn plan(
    grid: Vec<(u32, Option<u32>)>,
    adversaries: Vec<String>,
    protocol: &ProtocolFlags,
    batch: BatchFlags,
    file: &FileConfig,
    mut echo: Echo,
) -> Result<Plan, CliError> {
    let base = protocol_base(protocol, file);
    let max_phases = protocol.max_phases.or(file.max_phases);
    let inputs: InputPattern = batch
        .inputs
        .or(file.inputs.clone())
        .map_or(Ok(InputPattern::Random), |s| s.parse())?;
    let trials = batch.trials.or(file.trials).unwrap_or(100);
    let seed = batch.seed.or(file.seed).unwrap_or(0);
    let record_trace = batch.record_trace.or(file.record_trace).unwrap_or(false);
    let out = batch.out.or(file.out.clone());
    let format = batch.format.or(file.format).unwrap_or_default();
    let trace = match (record_trace, batch.trace_out.or(file.trace_out.clone()), &out) {
        (false, _, _) => None,
        (true, Some(p), _) => Some(p),
        (true, None, Some(out)) => Some(output::default_trace_path(out)),
        (true, None, None) => {
            return Err(CliError::Config("--record-trace needs --trace-out or --out".into()))
        }
    };
    if trials == 0 {
        return Err(committee_ba::Error::NoTrials.into());
    }
    let specs = adversaries
        .iter()
        .map(|s| s.parse())
        .collect::<Result<Vec<AdversarySpec>, _>>()?;

    let mut jobs = Vec::new();
    for &(n, t) in &grid {
        let t = t.unwrap_or(n.saturating_sub(1) / 3);
        let params = ProtocolParams { n, t, ..base };
        let layout = committee_count(&params)?;
        for spec in &specs {
            let mut cfg = TrialConfig::new(params, spec.clone(), seed)
                .with_inputs(inputs.clone())
                .with_trace(record_trace);
            cfg.max_phases = max_phases;
            cfg.phase_cap(&layout)?;
            jobs.push(cfg);
        }
    }

    echo.push("alpha", base.alpha);
    echo.push("gamma", base.gamma);
    echo.push("log_base", base.log_base);
    echo.push("las_vegas", base.las_vegas);
    echo.push("max_phases", max_phases.map_or("default".into(), |m| m.to_string()));
    echo.push("inputs", &inputs);
    echo.push("trials", trials);
    echo.push("seed", seed);
    echo.push("record_trace", record_trace);
    echo.push("format", format.name());
    Ok(Plan {
        jobs,
        trials,
        format,
        out,
        trace,
        strict: batch.strict.or(file.strict).unwrap_or(false),
        parallel: !batch.serial.or(file.serial).unwrap_or(false),
        echo,
    })
}

fn execute(plan: Plan) -> Result<bool, CliError> {
    // Open everything before the first trial so bad paths fail fast.
    let sink = output::open(plan.out.as_deref())?;
    let mut trace_file = match &plan.trace {
        Some(p) => Some(BufWriter::new(File::create(p).map_err(|source| CliError::Io {
            path: p.clone(),
            source,
        })?)),
        None => None,
    };
    let mut writer = ResultWriter::new(sink, plan.format, &plan.echo)?;
    let mut passed = true;
    for job in &plan.jobs {
        let results = run_batch(job, plan.trials, plan.parallel)?;
        writer.write(&results)?;
        if let Some(tf) = trace_file.as_mut() {
            for r in &results {
                write_trace(r.trace.as_deref().unwrap_or_default(), &mut *tf)?;
            }
        }
        let summary = summarize(&results)?;
        let label = format!("n={} t={} adversary={}", job.params.n, job.params.t, job.adversary);
        eprintln!("{}", output::summary_line(&label, &summary));
        if summary.trials_with_violations > 0 || summary.agreement.hits < summary.trials {
            passed = false;
        }
    }
    writer.finish()?;
    if let Some(mut tf) = trace_file {
        tf.flush()?;
    }
    Ok(passed || !plan.strict)
}

fn run(args: RunArgs, file: &FileConfig) -> Result<bool, CliError> {
    let n = required("n", args.n.or(file.single_n()?))?;
    let t = args.t.or(file.single_t()?);
    let adversary = args
        .adversary
        .or(file.single_adversary()?)
        .unwrap_or_else(|| "null".into());
    let mut echo = Echo::default();
    echo.push("cba", env!("CARGO_PKG_VERSION"));
    echo.push("command", "run");
    let mut plan = plan(vec![(n, t)], vec![adversary], &args.protocol, args.batch, file, echo)?;
    let job = plan.jobs[0].clone();
    let layout = committee_count(&job.params)?;
    let mut head = Echo::default();
    head.push("cba", env!("CARGO_PKG_VERSION"));
    head.push("command", "run");
    head.push("n", job.params.n);
    head.push("t", job.params.t);
    head.push("c", layout.c);
    head.push("s", layout.s);
    head.push("adversary", &job.adversary);
    head.0.extend(plan.echo.0.drain(2..));
    let cap = job.phase_cap(&layout)?;
    for (k, v) in head.0.iter_mut() {
        if k == "max_phases" {
            *v = cap.to_string();
        }
    }
    plan.echo = head;
    execute(plan)
}

fn sweep(args: SweepArgs, file: &FileConfig) -> Result<bool, CliError> {
    let ns = if args.n.is_empty() {
        file.n.clone().map(|v| v.into_vec()).unwrap_or_default()
    } else {
        args.n
    };
    if ns.is_empty() {
        return Err(CliError::Config("`--n` is required (flag or config key)".into()));
    }
    let ts = if args.t.is_empty() {
        file.t.clone().map(|v| v.into_vec()).unwrap_or_default()
    } else {
        args.t
    };
    let mut adversaries = if args.adversary.is_empty() {
        file.adversary.clone().map(|v| v.into_vec()).unwrap_or_default()
    } else {
        args.adversary
    };
    if adversaries.is_empty() {
        adversaries.push("null".into());
    }
    let grid: Vec<(u32, Option<u32>)> = if ts.is_empty() {
        ns.iter().map(|&n| (n, None)).collect()
    } else {
        ns.iter().flat_map(|&n| ts.iter().map(move |&t| (n, Some(t)))).collect()
    };
    let list = |v: &[u32]| v.iter().map(u32::to_string).collect::<Vec<_>>().join(",");
    let mut echo = Echo::default();
    echo.push("cba", env!("CARGO_PKG_VERSION"));
    echo.push("command", "sweep");
    echo.push("n", list(&ns));
    echo.push("t", if ts.is_empty() { "max".into() } else { list(&ts) });
    echo.push("adversary", adversaries.join(" "));
    let plan = plan(grid, adversaries, &args.protocol, args.batch, file, echo)?;
    execute(plan)
}

fn coin_test(args: CoinArgs, file: &FileConfig) -> Result<bool, CliError> {
    let n = required("n", args.n.or(file.single_n()?))?;
    let f = args.f.or(file.f).unwrap_or_else(|| sqrt_budget(n));
    let trials = args.trials.or(file.trials).unwrap_or(100_000);
    let seed = args.seed.or(file.seed).unwrap_or(0);
    let shift = match args.shift.or(file.shift.clone()).as_deref() {
        None | Some("worst") => AdversaryShift::WorstCase,
        Some(s) => AdversaryShift::Fixed(
            s.parse()
                .map_err(|_| CliError::Config(format!("--shift: `{s}` is neither `worst` nor an integer")))?,
        ),
    };
    let setup = CoinTrialSetup::with_faulty(n, f)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let est = estimate_coin_guarantee(&setup, shift, trials as u64, &mut rng)?;
    println!(
        "coin-test n={n} f={f} g={} trials={trials} seed={seed} shift={shift:?}",
        setup.g
    );
    let mut passed = true;
    for (side, p) in [("Pr(X > f) ", est.above), ("Pr(X < -f)", est.below)] {
        let floor = ONE_SIDED_FLOOR - 3.0 * p.sigma();
        let ok = p.p() >= floor;
        passed &= ok;
        println!(
            "{side} = {:.4} (sigma {:.4}), floor 1/12 - 3 sigma = {floor:.4} {}",
            p.p(),
            p.sigma(),
            if ok { "OK" } else { "FAIL" }
        );
    }
    let (one, zero) = est.per_side();
    println!(
        "agreement {:.4}, per side 1: {one:.4} 0: {zero:.4}, analytic delta {:.4} epsilon {:.4}",
        est.empirical_delta, est.delta, est.epsilon
    );
    println!(
        "pz_bound {:.4} (one-sided {:.4})",
        pz_bound(&setup)?,
        pz_bound_one_sided(&setup)?
    );
    Ok(passed)
}

fn verify(args: VerifyArgs, file: &FileConfig) -> Result<bool, CliError> {
    let max_g = args.max_g.or(file.max_g).unwrap_or(16);
    if max_g == 0 || max_g > MAX_ENUMERATED_CONTRIBUTORS {
        return Err(CliError::Config(format!(
            "--max-g must be in 1..={MAX_ENUMERATED_CONTRIBUTORS}"
        )));
    }
    let sizes = if !args.n.is_empty() {
        args.n
    } else {
        file.n.clone().map_or(vec![64, 100, 256], |v| v.into_vec())
    };
    let trials = args.trials.or(file.trials).unwrap_or(100_000);
    let seed = args.seed.or(file.seed).unwrap_or(0);
    let mut checks = 0;
    let mut failures = 0;
    let mut report = |ok: bool, line: String| {
        checks += 1;
        if !ok {
            failures += 1;
        }
        println!("{line} {}", if ok { "OK" } else { "FAIL" });
    };
    for g in 1..=max_g {
        for power in [2, 4] {
            let enumerated = exact_moment(g, power)?;
            let closed = closed_form_moment(g, power)?;
            let ok = *enumerated.denom() == 1 && *enumerated.numer() == closed;
            report(ok, format!("E[X^{power}] g={g}: {enumerated} == {closed}"));
        }
    }
    for (i, &n) in sizes.iter().enumerate() {
        let setup = CoinTrialSetup::sqrt_faulty(n)?;
        let bound = pz_bound(&setup)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
        let hist = SumHistogram::sample(setup.g, trials as u64, &mut rng)?;
        let half_root = (n as f64).sqrt() / 2.0;
        let above = hist.tail_above(half_root);
        let outside = Proportion::new(
            hist.count_where(|x| (x as f64).abs() > half_root),
            trials as u64,
        );
        for (label, bound, tail) in [
            ("pz_bound", bound, outside),
            ("pz_bound_one_sided", pz_bound_one_sided(&setup)?, above),
        ] {
            let slack = 3.0 * tail.sigma();
            let event = if label == "pz_bound" { "|X|" } else { "X" };
            report(
                bound <= tail.p() + slack,
                format!(
                    "{label} n={n} g={}: {bound:.4} <= Pr({event} > sqrt(n)/2) {:.4} + {slack:.4}",
                    setup.g,
                    tail.p()
                ),
            );
        }
    }
    println!("verify: {} of {checks} checks passed", checks - failures);
    Ok(failures == 0)
}

fn curves(args: CurveArgs, file: &FileConfig) -> Result<bool, CliError> {
    let n = required("n", args.n.or(file.single_n()?))?;
    let x_max = args.x_max.or(file.x_max).unwrap_or(f64::INFINITY);
    let points = args.points.or(file.points).unwrap_or(50);
    let log_base = args.log_base.or(file.log_base).unwrap_or(DEFAULT_LOG_BASE);
    let out_path = args.out.or(file.out.clone());
    let series = reference_series(n, x_max, points, log_base)?;
    let out = output::open(out_path.as_deref().map(Path::new))?;
    let mut echo = Echo::default();
    echo.push("cba", env!("CARGO_PKG_VERSION"));
    echo.push("command", "curves");
    echo.push("n", n);
    echo.push("log_base", log_base);
    echo.push("crossover", committee_ba::analysis::crossover(n, log_base));
    output::write_curves(out, &echo, &series)?;
    Ok(true)
}
