use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use harmbound::ahe::{estimate, EstimateOptions, EstimateReport};
use harmbound::data::ObservationTable;
use harmbound::estimands::{ate_spec, build_spec, cvar_ite_bounds, EstimandKind};
use harmbound::exec::init_thread_pool;
use harmbound::nuisance::{EtaMode, Learner, LearnerConfig, PartitionCuts, PropensityModel};
use harmbound::oracle::{oracle_agreement, replicate, sample, DgpSpec, ReplicationPlan, DEFAULT_GRID};
use harmbound::policy::Policy;
use harmbound::spec::Interval;
use harmbound::Error;
use serde_json::json;

const THREADS_VAR: &str = "HARMBOUND_THREADS";

/// Sharp bounds on the fraction of individuals harmed by a treatment change.
#[derive(Parser, Debug)]
#[command(name = "harmbound", version)]
struct Cli {
    /// Seed for learners, fold shuffling, simulation and random instances.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Write the report or table here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Cross-fitted estimate of one bound, written as JSON.
    Estimate(EstimateArgs),
    /// Draw a synthetic dataset, written as CSV.
    Simulate(SimulateArgs),
    /// RMSE and coverage over repeated synthetic datasets, written as CSV.
    Replicate(ReplicateArgs),
    /// Compare closed-form bounds with a brute-force coupling search.
    OracleBounds(OracleArgs),
    /// Bounds on the CVaR of the individual effect, written as JSON.
    Cvar(CvarArgs),
}

#[derive(Args, Debug, Clone)]
struct LearnerArgs {
    /// Learner settings as TOML; the flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,

    /// known, constant, logistic, boosted-stumps, k-nearest-mean or partition.
    /// Defaults to known when the data has an `e` column, else logistic.
    #[arg(long)]
    propensity: Option<String>,

    /// constant, logistic, boosted-stumps, k-nearest-mean or partition.
    #[arg(long)]
    outcome: Option<String>,

    /// Learner for the CATE / CATS regressions (defaults to the outcome learner).
    #[arg(long)]
    effect: Option<String>,

    /// plugin or dr-pseudo-outcome.
    #[arg(long)]
    eta: Option<String>,

    /// quantile or zero.
    #[arg(long)]
    partition_cuts: Option<String>,
}

#[derive(Args, Debug, Clone)]
struct FitArgs {
    /// CSV with columns x1..xd, a, y and optionally e.
    #[arg(long)]
    data: PathBuf,

    #[arg(long, default_value_t = 5)]
    folds: usize,

    #[arg(long, default_value_t = 0.95)]
    ci: f64,

    /// Shuffle rows before assigning folds.
    #[arg(long)]
    shuffle: bool,

    #[command(flatten)]
    learners: LearnerArgs,
}

#[derive(Args, Debug, Clone)]
struct PolicyArgs {
    /// Baseline policy: constant0, constant1 or threshold:j[:cutoff] (j is 1-based).
    #[arg(long)]
    pi0: Option<String>,

    /// Proposed policy, same syntax as --pi0.
    #[arg(long)]
    pi1: Option<String>,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    /// fna-lower, fna-upper, fna-lower-policy, fna-upper-policy, fna-upper-optimal or cvar-ite.
    #[arg(long)]
    estimand: String,

    #[command(flatten)]
    policies: PolicyArgs,

    /// Tail mass for cvar-ite.
    #[arg(long)]
    alpha: Option<f64>,

    #[command(flatten)]
    fit: FitArgs,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    beta: f64,

    #[arg(long)]
    n: usize,
}

#[derive(Args, Debug)]
struct ReplicateArgs {
    #[arg(long, default_value_t = 3.0)]
    beta: f64,

    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',', default_value = "800,3200")]
    ns: Vec<usize>,

    #[arg(long, default_value_t = 100)]
    reps: usize,

    /// Comma-separated estimand names.
    #[arg(long, value_delimiter = ',', default_value = "fna-lower,fna-upper")]
    estimands: Vec<String>,

    #[command(flatten)]
    policies: PolicyArgs,

    #[arg(long, default_value_t = 5)]
    folds: usize,

    #[arg(long, default_value_t = 0.95)]
    ci: f64,

    /// Monte-Carlo draws for the true bounds.
    #[arg(long, default_value_t = 1_000_000)]
    mc_draws: usize,

    /// Learners default to the known propensity and sign-cell partitions.
    #[command(flatten)]
    learners: LearnerArgs,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[arg(long, default_value_t = 200)]
    instances: usize,

    /// Largest number of atoms per instance.
    #[arg(long, default_value_t = 5)]
    atoms: usize,

    /// Grid step for the coupling parameter.
    #[arg(long, default_value_t = DEFAULT_GRID)]
    grid: f64,
}

#[derive(Args, Debug)]
struct CvarArgs {
    #[arg(long)]
    alpha: f64,

    #[command(flatten)]
    fit: FitArgs,
}

/// Failures are split by exit code: bad usage or configuration is 1,
/// everything touching files or data is 2.
enum Failure {
    Usage(String),
    Data(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_) | Error::Unsupported(_) => Failure::Usage(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

type CliResult<T> = Result<T, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn parse_policy(spec: &str) -> CliResult<Policy> {
    let bad = || usage(format!("bad policy {spec:?}: expected constant0, constant1 or threshold:j[:cutoff]"));
    match spec {
        "constant0" => Ok(Policy::never()),
        "constant1" => Ok(Policy::always()),
        _ => {
            let rest = spec.strip_prefix("threshold:").ok_or_else(bad)?;
            let (col, cutoff) = match rest.split_once(':') {
                Some((c, t)) => (c, t.parse::<f64>().map_err(|_| bad())?),
                None => (rest, 0.0),
            };
            let col = col.trim_start_matches('x').parse::<usize>().map_err(|_| bad())?;
            if col == 0 || !cutoff.is_finite() {
                return Err(bad());
            }
            Ok(Policy::Threshold { column: col - 1, cutoff })
        }
    }
}

fn parse_policies(args: &PolicyArgs) -> CliResult<Option<(Policy, Policy)>> {
    match (&args.pi0, &args.pi1) {
        (Some(a), Some(b)) => Ok(Some((parse_policy(a)?, parse_policy(b)?))),
        (None, None) => Ok(None),
        _ => Err(usage("--pi0 and --pi1 must be given together")),
    }
}

fn parse_named<T>(value: &Option<String>, what: &str, parse: impl Fn(&str) -> Option<T>) -> CliResult<Option<T>> {
    value
        .as_deref()
        .map(|v| parse(v).ok_or_else(|| usage(format!("unknown {what} {v:?}"))))
        .transpose()
}

/// Config file (or `base`), then flags, then the seed.
fn learner_config(args: &LearnerArgs, base: LearnerConfig, seed: Option<u64>) -> CliResult<LearnerConfig> {
    let mut cfg = match &args.config {
        Some(path) => LearnerConfig::load(path)?,
        None => base,
    };
    if let Some(p) = parse_named(&args.propensity, "propensity model", PropensityModel::parse)? {
        cfg.propensity = p;
    }
    if let Some(l) = parse_named(&args.outcome, "outcome learner", Learner::parse)? {
        cfg.outcome = l;
    }
    if let Some(l) = parse_named(&args.effect, "effect learner", Learner::parse)? {
        cfg.effect = Some(l);
    }
    if let Some(m) = parse_named(&args.eta, "eta mode", EtaMode::parse)? {
        cfg.eta_mode = m;
    }
    let cuts = parse_named(&args.partition_cuts, "partition cuts", |s| match s {
        "quantile" => Some(PartitionCuts::Quantile),
        "zero" => Some(PartitionCuts::Zero),
        _ => None,
    })?;
    if let Some(c) = cuts {
        cfg.partition_cuts = c;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn fit_setup(fit: &FitArgs, seed: Option<u64>) -> CliResult<(ObservationTable, LearnerConfig, EstimateOptions)> {
    let data = ObservationTable::read_csv_path(&fit.data).map_err(|e| match e {
        Error::Io(io) => Failure::Data(format!("{}: {io}", fit.data.display())),
        other => Failure::Data(format!("{}: {other}", fit.data.display())),
    })?;
    let mut base = LearnerConfig::default();
    if fit.learners.config.is_none() && fit.learners.propensity.is_none() {
        base.propensity = if data.has_known_propensity() { PropensityModel::Known } else { PropensityModel::Logistic };
    }
    let cfg = learner_config(&fit.learners, base, seed)?;
    let opts = EstimateOptions { folds: fit.folds, ci_level: fit.ci, shuffle: fit.shuffle, ..EstimateOptions::default() };
    log::info!("loaded {} rows with {} covariates from {}", data.len(), data.dim(), fit.data.display());
    Ok((data, cfg, opts))
}

/// Writes `body` to `out` (or stdout) and the summary to the other stream.
fn emit(out: Option<&Path>, body: &[u8], summary: &str) -> CliResult<()> {
    match out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?);
            w.write_all(body)?;
            w.flush()?;
            println!("{summary}");
        }
        None => {
            io::stdout().lock().write_all(body)?;
            eprintln!("{summary}");
        }
    }
    Ok(())
}

fn json_body(value: serde_json::Result<serde_json::Value>) -> CliResult<Vec<u8>> {
    let to_failure = |e: serde_json::Error| Failure::Data(e.to_string());
    let mut body = serde_json::to_vec_pretty(&value.map_err(to_failure)?).map_err(to_failure)?;
    body.push(b'\n');
    Ok(body)
}

fn cmd_estimate(args: EstimateArgs, seed: Option<u64>, out: Option<&Path>) -> CliResult<()> {
    let kind = EstimandKind::from_cli_name(&args.estimand, parse_policies(&args.policies)?, args.alpha)?;
    if let EstimandKind::CvarIte { alpha } = kind {
        return run_cvar(&args.fit, alpha, seed, out);
    }
    let (data, cfg, opts) = fit_setup(&args.fit, seed)?;
    for p in kind.policies().iter().flat_map(|(a, b)| [a.clone(), b.clone()]) {
        if let Policy::Threshold { column, .. } = p {
            if column >= data.dim() {
                return Err(usage(format!("threshold column {} exceeds the {} covariates", column + 1, data.dim())));
            }
        }
    }
    let report = estimate(&data, &build_spec(&kind)?, &cfg, &opts)?;
    emit(out, &json_body(serde_json::to_value(&report))?, &report.summary())
}

fn cmd_cvar(args: CvarArgs, seed: Option<u64>, out: Option<&Path>) -> CliResult<()> {
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(usage(format!("alpha {} must lie in (0,1)", args.alpha)));
    }
    run_cvar(&args.fit, args.alpha, seed, out)
}

/// Pulls noisy `(fna.lo, fna.hi, ate)` estimates onto the region where the
/// CVaR map is defined. Returns whether anything moved.
fn project_feasible(lo: f64, hi: f64, ate: f64) -> (Interval, f64, bool) {
    let a = ate.clamp(-1.0, 1.0);
    let (lo_min, hi_max) = (0f64.max(-a), (1.0 - a) / 2.0);
    let (mut l, mut h) = (lo.clamp(lo_min, hi_max), hi.clamp(lo_min, hi_max));
    if l > h {
        let mid = 0.5 * (l + h);
        (l, h) = (mid, mid);
    }
    let moved = l != lo || h != hi || a != ate;
    (Interval { lo: l, hi: h }, a, moved)
}

fn run_cvar(fit: &FitArgs, alpha: f64, seed: Option<u64>, out: Option<&Path>) -> CliResult<()> {
    let (data, cfg, opts) = fit_setup(fit, seed)?;
    let run = |spec| -> CliResult<EstimateReport> { Ok(estimate(&data, &spec, &cfg, &opts)?) };
    let lower = run(build_spec(&EstimandKind::FnaLower)?)?;
    let upper = run(build_spec(&EstimandKind::FnaUpper)?)?;
    let ate = run(ate_spec())?;
    let (fna, ate_point, projected) = project_feasible(lower.point, upper.point, ate.point);
    if projected {
        log::warn!("estimates projected onto the feasible region: fna {fna}, ate {ate_point}");
    }
    let cvar = cvar_ite_bounds(fna, ate_point, alpha)?;
    let body = json!({
        "estimand": "cvar-ite",
        "alpha": alpha,
        "interval": [cvar.lo, cvar.hi],
        "fna": [fna.lo, fna.hi],
        "ate": ate_point,
        "projected": projected,
        "fna_lower": lower,
        "fna_upper": upper,
        "ate_estimate": ate,
    });
    let summary = format!("cvar-ite (alpha {alpha}): {cvar} from fna {fna} and ate {ate_point:.6} on n={}", data.len());
    emit(out, &json_body(Ok(body))?, &summary)
}

fn cmd_simulate(args: SimulateArgs, seed: Option<u64>, out: Option<&Path>) -> CliResult<()> {
    let dgp = DgpSpec::new(args.beta, seed.unwrap_or(0)).map_err(|e| usage(e.to_string()))?;
    if args.n == 0 {
        return Err(usage("--n must be at least 1"));
    }
    let table = sample(&dgp, args.n)?;
    let mut body = Vec::new();
    table.write_csv(&mut body)?;
    emit(out, &body, &format!("simulated {} rows at beta={} (seed {})", args.n, args.beta, dgp.seed))
}

fn cmd_replicate(args: ReplicateArgs, seed: Option<u64>, out: Option<&Path>) -> CliResult<()> {
    if args.ns.is_empty() || args.estimands.is_empty() || args.reps == 0 {
        return Err(usage("--ns, --estimands and --reps must be nonempty"));
    }
    let policies = parse_policies(&args.policies)?;
    let kinds = args
        .estimands
        .iter()
        .map(|name| EstimandKind::from_cli_name(name, policies.clone(), None))
        .collect::<Result<Vec<_>, _>>()?;
    let base = LearnerConfig {
        propensity: PropensityModel::Known,
        outcome: Learner::Partition,
        effect: Some(Learner::Partition),
        partition_cuts: PartitionCuts::Zero,
        ..LearnerConfig::default()
    };
    let cfg = learner_config(&args.learners, base, seed)?;
    let dgp = DgpSpec::new(args.beta, seed.unwrap_or(0)).map_err(|e| usage(e.to_string()))?;
    let mut plan = ReplicationPlan::new(dgp, kinds, args.ns, args.reps, cfg);
    plan.folds = args.folds;
    plan.ci_level = args.ci;
    plan.mc_draws = args.mc_draws;
    let table = replicate(&plan)?;
    let mut body = Vec::new();
    table.write_csv(&mut body)?;
    emit(out, &body, &format!("replicate: {} rows over {} reps", table.rows.len(), args.reps))
}

fn cmd_oracle_bounds(args: OracleArgs, seed: Option<u64>, out: Option<&Path>) -> CliResult<()> {
    let report = oracle_agreement(seed.unwrap_or(0), args.instances, args.atoms, args.grid)?;
    let mut body = Vec::new();
    report.write_csv(&mut body)?;
    let summary = format!(
        "oracle-bounds: max discrepancy {:.3e} over {} instances (grid {}), {} identifiability mismatches",
        report.max_discrepancy,
        report.rows.len(),
        report.h,
        report.identifiability_mismatches
    );
    emit(out, &body, &summary)
}

fn configure_threads() {
    let Ok(value) = std::env::var(THREADS_VAR) else { return };
    match value.parse::<usize>() {
        Ok(n) if n > 0 => {
            if !init_thread_pool(n) {
                log::warn!("{THREADS_VAR}={n} ignored: thread pool unavailable");
            }
        }
        _ => log::warn!("{THREADS_VAR}={value:?} is not a positive integer; ignored"),
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let out = cli.out.as_deref();
    match cli.command {
        Command::Estimate(a) => cmd_estimate(a, cli.seed, out),
        Command::Simulate(a) => cmd_simulate(a, cli.seed, out),
        Command::Replicate(a) => cmd_replicate(a, cli.seed, out),
        Command::OracleBounds(a) => cmd_oracle_bounds(a, cli.seed, out),
        Command::Cvar(a) => cmd_cvar(a, cli.seed, out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    configure_threads();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            ExitCode::from(1)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
