//! Command line driver.
//!
//! Subcommands wrap the library's simulation, sweep, and analysis entry
//! points. Every option can come from a flat `key = value` config file
//! (`--config`); a flag given on the command line wins over the file. All
//! stochastic subcommands take an explicit `--seed`; nothing is ever seeded
//! from the clock, so a run is fully reproducible from its command line,
//! config, and seed.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime or data error.

mod config;

use clap::{Args, Parser, Subcommand};
use config::Config;
use kmatch::dataio::{
    analyze_att_design, load_nsw, nsw_att_panel, summarize_covariates, NswSchema,
    NSW_COVARIATES,
};
use kmatch::dgp::{
    default_overlap_coeffs, synthetic_overlap_pool, CovariatePool, PsForm, ScenarioKind,
    ScenarioSpec,
};
use kmatch::estimators::Estimand;
use kmatch::kernels::{verify_moments, KernelFamily, KernelSpec};
use kmatch::mcharness::{
    default_bandwidth, run, standard_panel, sweep, ExperimentConfig, MethodKind, MethodSpec,
    MonteCarloReport, PsSource,
};
use kmatch::report::{
    analysis_csv, analysis_text, mc_report_csv, mc_report_text, moment_report_text,
    summary_csv, summary_text, sweep_csv,
};
use kmatch::resampling::CiMethod;
use std::ffi::OsStr;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// Relative `--out` paths are joined under this directory when it is set.
const OUT_DIR_ENV: &str = "KMATCH_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "kmatch",
    version,
    about = "Kernel matching treatment effect estimation: simulation studies, \
             bandwidth sweeps, and observational data analysis",
    after_help = "Any flag may instead be a `key = value` line in the --config file \
                  (flags win). Output goes to stdout unless --out is given; relative \
                  --out paths are placed under $KMATCH_OUT_DIR when that is set."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo study of one simulated scenario with a method panel
    Simulate(SimulateArgs),
    /// Kernel estimator bias/RMSE over an (N, bandwidth, kernel) grid
    Sweep(SweepArgs),
    /// Balance summary and bootstrap ATT panel for a delimited data file
    Analyze(AnalyzeArgs),
    /// Propensity misspecification study: linear vs interaction score fits
    Misspec(MisspecArgs),
    /// Overlap study on pool-resampled covariates at two index scales
    Overlap(OverlapArgs),
    /// Check kernel moment integrals numerically (deterministic)
    KernelCheck(KernelCheckArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario id: s1, s2, s3, s4, or s5
    #[arg(long)]
    scenario: Option<String>,
    /// Units per replication (default 1000)
    #[arg(long)]
    n: Option<usize>,
    /// Monte Carlo replications (default 1000)
    #[arg(long)]
    reps: Option<usize>,
    /// Bootstrap resamples per replication; 0 skips intervals (default 400)
    #[arg(long)]
    boot: Option<usize>,
    /// Bandwidth for kernel matching rows (default scales with N)
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Kernel family for kernel matching rows: gaussian or epanechnikov
    #[arg(long)]
    kernel: Option<String>,
    /// Target estimand: ate or att (default ate)
    #[arg(long)]
    estimand: Option<String>,
    /// RNG seed; required, runs are never clock-seeded
    #[arg(long)]
    seed: Option<u64>,
    /// Worker thread cap (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
    /// Output format: csv or text (default csv)
    #[arg(long)]
    format: Option<String>,
    #[command(flatten)]
    io: IoArgs,
}

#[derive(Args)]
struct SweepArgs {
    /// Scenario id: s1, s2, s3, s4, or s5
    #[arg(long)]
    scenario: Option<String>,
    /// Comma-separated sample sizes (default 200,500,1000)
    #[arg(long)]
    ns: Option<String>,
    /// Comma-separated bandwidths (default: the per-N defaults of --ns)
    #[arg(long)]
    bandwidths: Option<String>,
    /// Comma-separated kernel families (default gaussian)
    #[arg(long)]
    kernels: Option<String>,
    /// Target estimand: ate or att (default ate)
    #[arg(long)]
    estimand: Option<String>,
    /// Replications per grid cell (default 200)
    #[arg(long)]
    reps: Option<usize>,
    /// RNG seed; required, runs are never clock-seeded
    #[arg(long)]
    seed: Option<u64>,
    /// Worker thread cap (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
    #[command(flatten)]
    io: IoArgs,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Delimited data file with header (comma or whitespace separated)
    #[arg(long)]
    data: Option<PathBuf>,
    /// Kernel matching bandwidth (default 0.05)
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Bootstrap resamples; 0 emits point estimates only (default 400)
    #[arg(long)]
    boot: Option<usize>,
    /// Covariates entering the propensity fit, comma-separated canonical
    /// names (default: all ten)
    #[arg(long)]
    ps_columns: Option<String>,
    /// Also write the covariate balance table to this path
    #[arg(long)]
    summary_out: Option<PathBuf>,
    /// RNG seed; required unless --boot 0
    #[arg(long)]
    seed: Option<u64>,
    /// Worker thread cap (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
    /// Output format: csv or text (default csv)
    #[arg(long)]
    format: Option<String>,
    #[command(flatten)]
    io: IoArgs,
}

#[derive(Args)]
struct MisspecArgs {
    /// Units per replication (default 500)
    #[arg(long)]
    n: Option<usize>,
    /// Monte Carlo replications (default 1000)
    #[arg(long)]
    reps: Option<usize>,
    /// Comma-separated neighbor counts for the matching rows (default 1,4,16,64)
    #[arg(long)]
    ks: Option<String>,
    /// Score fit design: linear, interactions, or both (default both)
    #[arg(long)]
    ps_form: Option<String>,
    /// Bandwidth for the kernel matching row (default 0.04)
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Bootstrap resamples per replication; 0 skips intervals (default 0)
    #[arg(long)]
    boot: Option<usize>,
    /// Target estimand: ate or att (default att)
    #[arg(long)]
    estimand: Option<String>,
    /// RNG seed; required, runs are never clock-seeded
    #[arg(long)]
    seed: Option<u64>,
    /// Worker thread cap (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
    /// Output format: csv or text (default csv)
    #[arg(long)]
    format: Option<String>,
    #[command(flatten)]
    io: IoArgs,
}

#[derive(Args)]
struct OverlapArgs {
    /// Units per replication (default 400)
    #[arg(long)]
    n: Option<usize>,
    /// Monte Carlo replications (default 500)
    #[arg(long)]
    reps: Option<usize>,
    /// Comma-separated neighbor counts for the matching rows (default 1,4,16)
    #[arg(long)]
    ks: Option<String>,
    /// Comma-separated index scales, each 1 (bad overlap) or 0.2 (good)
    /// (default 1,0.2)
    #[arg(long)]
    scales: Option<String>,
    /// Bandwidth for the kernel matching row (default 0.05)
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Bootstrap resamples per replication; 0 skips intervals (default 0)
    #[arg(long)]
    boot: Option<usize>,
    /// Target estimand: ate or att (default att)
    #[arg(long)]
    estimand: Option<String>,
    /// Covariate pool file, one numeric row per line (default: synthetic pool)
    #[arg(long)]
    pool: Option<PathBuf>,
    /// Rows in the synthetic pool (default 2000)
    #[arg(long)]
    pool_rows: Option<usize>,
    /// RNG seed; required, runs are never clock-seeded
    #[arg(long)]
    seed: Option<u64>,
    /// Worker thread cap (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
    /// Output format: csv or text (default csv)
    #[arg(long)]
    format: Option<String>,
    #[command(flatten)]
    io: IoArgs,
}

#[derive(Args)]
struct KernelCheckArgs {
    /// Kernel family to check: gaussian, epanechnikov, or all (default all)
    #[arg(long)]
    kernel: Option<String>,
    #[command(flatten)]
    io: IoArgs,
}

#[derive(Args)]
struct IoArgs {
    /// Flat `key = value` config file; flags override its entries
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file (default stdout); $KMATCH_OUT_DIR prefixes relative paths
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(String),
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn runtime(msg: impl Display) -> Failure {
    Failure::Runtime(msg.to_string())
}

fn main() {
    std::process::exit(real_main());
}

fn real_main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    0
                }
                _ => {
                    let rendered = e.to_string();
                    let line = rendered
                        .lines()
                        .find(|l| !l.trim().is_empty())
                        .unwrap_or("error: bad usage");
                    eprintln!("{line} (see 'kmatch --help')");
                    1
                }
            };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Misspec(a) => cmd_misspec(a),
        Command::Overlap(a) => cmd_overlap(a),
        Command::KernelCheck(a) => cmd_kernel_check(a),
    }
}

// ---- option resolution -------------------------------------------------

fn load_config(path: &Option<PathBuf>) -> Result<Config, Failure> {
    match path {
        None => Ok(Config::empty()),
        Some(p) => Config::load(p).map_err(Failure::Usage),
    }
}

/// Flag value if given, else the config entry under `key`.
fn opt<T>(flag: Option<T>, cfg: &Config, key: &str) -> Result<Option<T>, Failure>
where
    T: FromStr,
    T::Err: Display,
{
    if flag.is_some() {
        return Ok(flag);
    }
    cfg.parsed(key).map_err(Failure::Usage)
}

fn opt_str(flag: Option<String>, cfg: &Config, key: &str) -> Option<String> {
    flag.or_else(|| cfg.get(key).map(String::from))
}

fn opt_path(flag: Option<PathBuf>, cfg: &Config, key: &str) -> Option<PathBuf> {
    flag.or_else(|| cfg.get(key).map(PathBuf::from))
}

fn need<T>(v: Option<T>, what: &str) -> Result<T, Failure> {
    v.ok_or_else(|| usage(format!("missing --{what} (flag or config key `{what}`)")))
}

fn need_seed(v: Option<u64>) -> Result<u64, Failure> {
    v.ok_or_else(|| {
        usage(
            "missing --seed: stochastic runs take an explicit seed (flag or config key \
             `seed`); nothing is ever seeded from the clock",
        )
    })
}

fn parse_as<T>(raw: &str, what: &str) -> Result<T, Failure>
where
    T: FromStr,
    T::Err: Display,
{
    raw.parse().map_err(|e| usage(format!("bad {what} {raw:?}: {e}")))
}

fn parse_list<T>(raw: &str, what: &str) -> Result<Vec<T>, Failure>
where
    T: FromStr,
    T::Err: Display,
{
    let items: Result<Vec<T>, Failure> = raw
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_as(s, what))
        .collect();
    let items = items?;
    if items.is_empty() {
        return Err(usage(format!("empty {what} list {raw:?}")));
    }
    Ok(items)
}

fn scenario_kind(id: &str) -> Result<ScenarioKind, Failure> {
    ScenarioKind::from_id(id)
        .ok_or_else(|| usage(format!("unknown scenario {id:?}; expected s1..s5")))
}

fn check_n(n: usize) -> Result<usize, Failure> {
    if n < 20 {
        return Err(usage(format!("--n must be at least 20, got {n}")));
    }
    Ok(n)
}

fn check_reps(reps: usize) -> Result<usize, Failure> {
    if reps == 0 {
        return Err(usage("--reps must be at least 1"));
    }
    Ok(reps)
}

fn check_bandwidth(h: f64) -> Result<f64, Failure> {
    if !(h.is_finite() && h > 0.0) {
        return Err(usage(format!("bandwidth must be a positive real, got {h}")));
    }
    Ok(h)
}

fn init_threads(threads: Option<usize>) -> Result<(), Failure> {
    match threads {
        None => Ok(()),
        Some(0) => Err(usage("--threads must be at least 1")),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| runtime(format!("thread pool: {e}"))),
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum OutputFormat {
    Csv,
    Text,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "text" => Ok(OutputFormat::Text),
            other => Err(format!("unknown format {other:?}, expected \"csv\" or \"text\"")),
        }
    }
}

fn resolve_format(flag: Option<String>, cfg: &Config) -> Result<OutputFormat, Failure> {
    match opt_str(flag, cfg, "format") {
        None => Ok(OutputFormat::Csv),
        Some(raw) => parse_as(&raw, "format"),
    }
}

// ---- output ------------------------------------------------------------

fn join_out_dir(dir: Option<&OsStr>, path: &Path) -> PathBuf {
    match dir {
        Some(d) if !d.is_empty() && path.is_relative() => Path::new(d).join(path),
        _ => path.to_path_buf(),
    }
}

fn deliver(content: &str, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        None => {
            print!("{content}");
            Ok(())
        }
        Some(p) => {
            let target = join_out_dir(std::env::var_os(OUT_DIR_ENV).as_deref(), p);
            if let Some(parent) = target.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent)
                        .map_err(|e| runtime(format!("create {}: {e}", parent.display())))?;
                }
            }
            std::fs::write(&target, content)
                .map_err(|e| runtime(format!("write {}: {e}", target.display())))?;
            eprintln!("wrote {}", target.display());
            Ok(())
        }
    }
}

/// One CSV with a single header; the scenario column tells the runs apart.
fn combined_csv(reports: &[MonteCarloReport]) -> String {
    let mut out = String::new();
    for (i, report) in reports.iter().enumerate() {
        let csv = mc_report_csv(report);
        if i == 0 {
            out.push_str(&csv);
        } else if let Some((_, rest)) = csv.split_once('\n') {
            out.push_str(rest);
        }
    }
    out
}

fn combined_text(reports: &[MonteCarloReport]) -> String {
    reports.iter().map(mc_report_text).collect::<Vec<_>>().join("\n")
}

fn emit_reports(
    reports: &[MonteCarloReport],
    format: OutputFormat,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let content = match format {
        OutputFormat::Csv => combined_csv(reports),
        OutputFormat::Text => combined_text(reports),
    };
    deliver(&content, out)
}

// ---- method panels -----------------------------------------------------

/// Build the panel described by `method.<i>.*` config keys. Defaults per
/// method: the subcommand's estimand, kernel, and bandwidth, estimated
/// scores, k = 1, percentile intervals.
fn parse_method_panel(
    cfg: &Config,
    estimand: Estimand,
    h: f64,
    family: KernelFamily,
) -> Result<Vec<MethodSpec>, Failure> {
    let ids = cfg.method_indices();
    let mut methods = Vec::with_capacity(ids.len());
    for i in ids {
        let key = |field: &str| format!("method.{i}.{field}");
        let kind_raw = cfg
            .get(&key("kind"))
            .ok_or_else(|| usage(format!("config key method.{i}.kind is required")))?;
        let est = match cfg.get(&key("estimand")) {
            None => estimand,
            Some(raw) => parse_as(raw, "estimand")?,
        };
        let ps = match cfg.get(&key("ps")) {
            None => PsSource::Estimated,
            Some(raw) => match raw.to_ascii_lowercase().as_str() {
                "true" => PsSource::True,
                "estimated" => PsSource::Estimated,
                other => {
                    return Err(usage(format!(
                        "method.{i}.ps = {other:?}: expected \"true\" or \"estimated\""
                    )))
                }
            },
        };
        let k: usize = cfg.parsed(&key("k")).map_err(Failure::Usage)?.unwrap_or(1);
        if k == 0 {
            return Err(usage(format!("method.{i}.k must be at least 1")));
        }
        let mh = check_bandwidth(cfg.parsed(&key("h")).map_err(Failure::Usage)?.unwrap_or(h))?;
        let fam = match cfg.get(&key("kernel")) {
            None => family,
            Some(raw) => parse_as(raw, "kernel")?,
        };
        let kind = match kind_raw.to_ascii_lowercase().as_str() {
            "kernel" | "kernel-match" => {
                MethodKind::KernelMatch { kernel: KernelSpec::new(fam, mh), ps }
            }
            "nn-covariates" | "covariates" => MethodKind::NnCovariates { k },
            "nn-pscore" | "nn-ps" | "pscore" => MethodKind::NnPscore { k, ps },
            "ipw" => MethodKind::Ipw { ps },
            "dr" | "doubly-robust" => MethodKind::DoublyRobust { ps },
            other => {
                return Err(usage(format!(
                    "method.{i}.kind = {other:?}: expected kernel, nn-covariates, \
                     nn-pscore, ipw, or dr"
                )))
            }
        };
        let ci = match cfg.get(&key("ci")) {
            None => CiMethod::Percentile,
            Some(raw) => match raw.to_ascii_lowercase().as_str() {
                "percentile" => CiMethod::Percentile,
                "normal" | "normal-approx" => CiMethod::NormalApprox,
                other => {
                    return Err(usage(format!(
                        "method.{i}.ci = {other:?}: expected \"percentile\" or \"normal\""
                    )))
                }
            },
        };
        let label = cfg
            .get(&key("label"))
            .map(String::from)
            .unwrap_or_else(|| default_label(&kind));
        methods.push(MethodSpec { label, estimand: est, kind, ci });
    }
    Ok(methods)
}

fn default_label(kind: &MethodKind) -> String {
    match kind {
        MethodKind::KernelMatch { .. } => "kernel".to_string(),
        MethodKind::NnCovariates { k } => format!("nn-covariates(k={k})"),
        MethodKind::NnPscore { k, .. } => format!("nn-pscore(k={k})"),
        MethodKind::Ipw { .. } => "ipw".to_string(),
        MethodKind::DoublyRobust { .. } => "dr".to_string(),
    }
}

// ---- subcommands -------------------------------------------------------

fn cmd_simulate(a: SimulateArgs) -> Result<(), Failure> {
    let cfg = load_config(&a.io.config)?;
    init_threads(opt(a.threads, &cfg, "threads")?)?;
    let kind = scenario_kind(&need(opt_str(a.scenario, &cfg, "scenario"), "scenario")?)?;
    let n = check_n(opt(a.n, &cfg, "n")?.unwrap_or(1000))?;
    let reps = check_reps(opt(a.reps, &cfg, "reps")?.unwrap_or(1000))?;
    let boot = opt(a.boot, &cfg, "boot")?.unwrap_or(400);
    let estimand: Estimand = match opt_str(a.estimand, &cfg, "estimand") {
        None => Estimand::Ate,
        Some(raw) => parse_as(&raw, "estimand")?,
    };
    let h = check_bandwidth(
        opt(a.bandwidth, &cfg, "bandwidth")?.unwrap_or_else(|| default_bandwidth(n)),
    )?;
    let family: KernelFamily = match opt_str(a.kernel, &cfg, "kernel") {
        None => KernelFamily::Gaussian,
        Some(raw) => parse_as(&raw, "kernel")?,
    };
    let format = resolve_format(a.format, &cfg)?;
    let seed = need_seed(opt(a.seed, &cfg, "seed")?)?;

    let methods = if cfg.method_indices().is_empty() {
        let mut panel = standard_panel(estimand, h);
        for spec in &mut panel {
            if let MethodKind::KernelMatch { kernel, .. } = &mut spec.kind {
                kernel.family = family;
            }
        }
        panel
    } else {
        parse_method_panel(&cfg, estimand, h, family)?
    };

    let report = run(&ExperimentConfig {
        scenario: ScenarioSpec::new(kind, n, seed),
        methods,
        reps,
        bootstrap_b: boot,
        master_seed: seed,
    });
    eprintln!(
        "ran {}: N={} R={} B={} ({} methods)",
        report.scenario,
        report.n,
        report.reps,
        report.bootstrap_b,
        report.methods.len()
    );
    emit_reports(std::slice::from_ref(&report), format, a.io.out.as_deref())
}

fn cmd_sweep(a: SweepArgs) -> Result<(), Failure> {
    let cfg = load_config(&a.io.config)?;
    init_threads(opt(a.threads, &cfg, "threads")?)?;
    let kind = scenario_kind(&need(opt_str(a.scenario, &cfg, "scenario"), "scenario")?)?;
    let ns: Vec<usize> = match opt_str(a.ns, &cfg, "ns") {
        None => vec![200, 500, 1000],
        Some(raw) => parse_list(&raw, "sample size")?,
    };
    for &n in &ns {
        check_n(n)?;
    }
    let hs: Vec<f64> = match opt_str(a.bandwidths, &cfg, "bandwidths") {
        Some(raw) => parse_list(&raw, "bandwidth")?,
        None => {
            let mut hs: Vec<f64> = ns.iter().map(|&n| default_bandwidth(n)).collect();
            hs.dedup();
            hs
        }
    };
    for &h in &hs {
        check_bandwidth(h)?;
    }
    let kernels: Vec<KernelFamily> = match opt_str(a.kernels, &cfg, "kernels") {
        None => vec![KernelFamily::Gaussian],
        Some(raw) => parse_list(&raw, "kernel")?,
    };
    let estimand: Estimand = match opt_str(a.estimand, &cfg, "estimand") {
        None => Estimand::Ate,
        Some(raw) => parse_as(&raw, "estimand")?,
    };
    let reps = check_reps(opt(a.reps, &cfg, "reps")?.unwrap_or(200))?;
    let seed = need_seed(opt(a.seed, &cfg, "seed")?)?;

    let template = ScenarioSpec::new(kind, ns[0], seed);
    let cells = sweep(&template, &ns, &hs, &kernels, estimand, reps, seed);
    eprintln!(
        "swept {}: {} cells x R={}",
        template.kind,
        cells.len(),
        reps
    );
    deliver(&sweep_csv(&cells), a.io.out.as_deref())
}

fn cmd_analyze(a: AnalyzeArgs) -> Result<(), Failure> {
    let cfg = load_config(&a.io.config)?;
    init_threads(opt(a.threads, &cfg, "threads")?)?;
    let data_path = need(opt_path(a.data, &cfg, "data"), "data")?;
    let h = check_bandwidth(opt(a.bandwidth, &cfg, "bandwidth")?.unwrap_or(0.05))?;
    let boot = opt(a.boot, &cfg, "boot")?.unwrap_or(400);
    let format = resolve_format(a.format, &cfg)?;
    let seed = if boot == 0 {
        opt(a.seed, &cfg, "seed")?.unwrap_or(0)
    } else {
        need_seed(opt(a.seed, &cfg, "seed")?)?
    };
    let ps_columns = match opt_str(a.ps_columns, &cfg, "ps.columns") {
        None => None,
        Some(raw) => Some(resolve_ps_columns(&raw)?),
    };

    let schema = schema_from(&cfg);
    let data = load_nsw(&data_path, &schema).map_err(runtime)?;
    eprintln!(
        "loaded {}: {} treated / {} control",
        data_path.display(),
        data.sample.n_treated(),
        data.sample.n_control()
    );
    if !data.indicator_violations.is_empty() {
        eprintln!(
            "note: {} rows have zero-earnings indicators contradicting earnings: rows {:?}",
            data.indicator_violations.len(),
            data.indicator_violations
        );
    }

    let methods = if cfg.method_indices().is_empty() {
        nsw_att_panel(h)
    } else {
        let panel = parse_method_panel(&cfg, Estimand::Att, h, KernelFamily::Gaussian)?;
        if panel.iter().any(|m| {
            matches!(
                m.kind,
                MethodKind::KernelMatch { ps: PsSource::True, .. }
                    | MethodKind::NnPscore { ps: PsSource::True, .. }
                    | MethodKind::Ipw { ps: PsSource::True }
                    | MethodKind::DoublyRobust { ps: PsSource::True }
            )
        }) {
            return Err(usage(
                "real data has no true propensity scores; method.<i>.ps must be \"estimated\"",
            ));
        }
        panel
    };

    let rows = analyze_att_design(&data.sample, &methods, boot, seed, ps_columns.as_deref())
        .map_err(runtime)?;
    if let Some(summary_path) = opt_path(a.summary_out, &cfg, "summary.out") {
        let summary = summarize_covariates(&data.sample);
        let content = match format {
            OutputFormat::Csv => summary_csv(&summary),
            OutputFormat::Text => summary_text(&summary),
        };
        deliver(&content, Some(&summary_path))?;
    }
    let content = match format {
        OutputFormat::Csv => analysis_csv(&rows),
        OutputFormat::Text => analysis_text(&rows),
    };
    deliver(&content, a.io.out.as_deref())
}

fn cmd_misspec(a: MisspecArgs) -> Result<(), Failure> {
    let cfg = load_config(&a.io.config)?;
    init_threads(opt(a.threads, &cfg, "threads")?)?;
    let n = check_n(opt(a.n, &cfg, "n")?.unwrap_or(500))?;
    let reps = check_reps(opt(a.reps, &cfg, "reps")?.unwrap_or(1000))?;
    let ks: Vec<usize> = match opt_str(a.ks, &cfg, "ks") {
        None => vec![1, 4, 16, 64],
        Some(raw) => parse_list(&raw, "neighbor count")?,
    };
    if ks.iter().any(|&k| k == 0) {
        return Err(usage("--ks entries must be at least 1"));
    }
    let forms: Vec<PsForm> = match opt_str(a.ps_form, &cfg, "ps-form") {
        None => vec![PsForm::Linear, PsForm::LinearPlusInteractions],
        Some(raw) if raw.eq_ignore_ascii_case("both") => {
            vec![PsForm::Linear, PsForm::LinearPlusInteractions]
        }
        Some(raw) => vec![parse_as(&raw, "ps form")?],
    };
    let h = check_bandwidth(opt(a.bandwidth, &cfg, "bandwidth")?.unwrap_or(0.04))?;
    let boot = opt(a.boot, &cfg, "boot")?.unwrap_or(0);
    let estimand: Estimand = match opt_str(a.estimand, &cfg, "estimand") {
        None => Estimand::Att,
        Some(raw) => parse_as(&raw, "estimand")?,
    };
    let format = resolve_format(a.format, &cfg)?;
    let seed = need_seed(opt(a.seed, &cfg, "seed")?)?;

    let methods = matching_study_panel(estimand, h, &ks);
    // The same seed for both forms replays identical draws: only the fitted
    // score design differs between the two reports.
    let reports: Vec<MonteCarloReport> = forms
        .iter()
        .map(|&ps_form| {
            let report = run(&ExperimentConfig {
                scenario: ScenarioSpec::new(ScenarioKind::Misspec { ps_form }, n, seed),
                methods: methods.clone(),
                reps,
                bootstrap_b: boot,
                master_seed: seed,
            });
            eprintln!("ran {}: N={} R={}", report.scenario, report.n, report.reps);
            report
        })
        .collect();
    emit_reports(&reports, format, a.io.out.as_deref())
}

fn cmd_overlap(a: OverlapArgs) -> Result<(), Failure> {
    let cfg = load_config(&a.io.config)?;
    init_threads(opt(a.threads, &cfg, "threads")?)?;
    let n = check_n(opt(a.n, &cfg, "n")?.unwrap_or(400))?;
    let reps = check_reps(opt(a.reps, &cfg, "reps")?.unwrap_or(500))?;
    let ks: Vec<usize> = match opt_str(a.ks, &cfg, "ks") {
        None => vec![1, 4, 16],
        Some(raw) => parse_list(&raw, "neighbor count")?,
    };
    if ks.iter().any(|&k| k == 0) {
        return Err(usage("--ks entries must be at least 1"));
    }
    let scales: Vec<f64> = match opt_str(a.scales, &cfg, "scales") {
        None => vec![1.0, 0.2],
        Some(raw) => parse_list(&raw, "scale")?,
    };
    if scales.iter().any(|&s| s != 1.0 && s != 0.2) {
        return Err(usage("--scales entries must be 1 (bad overlap) or 0.2 (good)"));
    }
    let h = check_bandwidth(opt(a.bandwidth, &cfg, "bandwidth")?.unwrap_or(0.05))?;
    let boot = opt(a.boot, &cfg, "boot")?.unwrap_or(0);
    let estimand: Estimand = match opt_str(a.estimand, &cfg, "estimand") {
        None => Estimand::Att,
        Some(raw) => parse_as(&raw, "estimand")?,
    };
    let format = resolve_format(a.format, &cfg)?;
    let seed = need_seed(opt(a.seed, &cfg, "seed")?)?;

    let pool = match opt_path(a.pool, &cfg, "pool") {
        Some(path) => load_pool(&path)?,
        None => {
            let rows = opt(a.pool_rows, &cfg, "pool-rows")?.unwrap_or(2000);
            if rows == 0 {
                return Err(usage("--pool-rows must be at least 1"));
            }
            synthetic_overlap_pool(rows, seed)
        }
    };
    let coeffs = overlap_coeffs(&cfg, pool.dim())?;

    let mut methods = matching_study_panel(estimand, h, &ks);
    methods.push(MethodSpec {
        label: "IPW".to_string(),
        estimand,
        kind: MethodKind::Ipw { ps: PsSource::Estimated },
        ci: CiMethod::Percentile,
    });
    methods.push(MethodSpec {
        label: "DR".to_string(),
        estimand,
        kind: MethodKind::DoublyRobust { ps: PsSource::Estimated },
        ci: CiMethod::Percentile,
    });

    // One pool and one seed serve every scale: the runs differ only in how
    // strongly the assignment index separates the arms.
    let reports: Vec<MonteCarloReport> = scales
        .iter()
        .map(|&scale| {
            let scenario = ScenarioKind::Overlap {
                coeffs: coeffs.clone(),
                pool: pool.clone(),
                scale,
            };
            let report = run(&ExperimentConfig {
                scenario: ScenarioSpec::new(scenario, n, seed),
                methods: methods.clone(),
                reps,
                bootstrap_b: boot,
                master_seed: seed,
            });
            eprintln!("ran {}: N={} R={}", report.scenario, report.n, report.reps);
            report
        })
        .collect();
    emit_reports(&reports, format, a.io.out.as_deref())
}

fn cmd_kernel_check(a: KernelCheckArgs) -> Result<(), Failure> {
    let cfg = load_config(&a.io.config)?;
    let which = opt_str(a.kernel, &cfg, "kernel").unwrap_or_else(|| "all".to_string());
    let families: Vec<KernelFamily> = if which.eq_ignore_ascii_case("all") {
        vec![KernelFamily::Gaussian, KernelFamily::Epanechnikov]
    } else {
        vec![parse_as(&which, "kernel")?]
    };
    let mut content = String::new();
    for (i, &family) in families.iter().enumerate() {
        if i > 0 {
            content.push('\n');
        }
        let report = verify_moments::<f64>(family);
        content.push_str(&moment_report_text(&family.to_string(), &report));
    }
    deliver(&content, a.io.out.as_deref())
}

/// Kernel matching plus the two nearest-neighbor baselines at each k: the
/// shared panel of the misspecification and overlap studies.
fn matching_study_panel(estimand: Estimand, h: f64, ks: &[usize]) -> Vec<MethodSpec> {
    let mut methods = vec![MethodSpec {
        label: "Proposed".to_string(),
        estimand,
        kind: MethodKind::KernelMatch {
            kernel: KernelSpec::gaussian(h),
            ps: PsSource::Estimated,
        },
        ci: CiMethod::Percentile,
    }];
    for &k in ks {
        methods.push(MethodSpec {
            label: format!("NN-Cov k={k}"),
            estimand,
            kind: MethodKind::NnCovariates { k },
            ci: CiMethod::Percentile,
        });
    }
    for &k in ks {
        methods.push(MethodSpec {
            label: format!("NN-PS k={k}"),
            estimand,
            kind: MethodKind::NnPscore { k, ps: PsSource::Estimated },
            ci: CiMethod::Percentile,
        });
    }
    methods
}

/// Canonical covariate names to column indices for the propensity design.
fn resolve_ps_columns(raw: &str) -> Result<Vec<usize>, Failure> {
    let mut cols = Vec::new();
    for name in raw.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let idx = NSW_COVARIATES
            .iter()
            .position(|c| c.eq_ignore_ascii_case(name))
            .ok_or_else(|| {
                usage(format!(
                    "unknown propensity column {name:?}; expected one of {}",
                    NSW_COVARIATES.join(", ")
                ))
            })?;
        if !cols.contains(&idx) {
            cols.push(idx);
        }
    }
    if cols.is_empty() {
        return Err(usage("propensity column list is empty"));
    }
    Ok(cols)
}

/// Default schema, with any `column.<field> = name` config overrides.
fn schema_from(cfg: &Config) -> NswSchema {
    let mut schema = NswSchema::default();
    let fields: [(&str, &mut String); 12] = [
        ("column.treat", &mut schema.treat),
        ("column.age", &mut schema.age),
        ("column.educ", &mut schema.educ),
        ("column.black", &mut schema.black),
        ("column.hispanic", &mut schema.hispanic),
        ("column.married", &mut schema.married),
        ("column.nodegr", &mut schema.nodegr),
        ("column.re74", &mut schema.re74),
        ("column.re75", &mut schema.re75),
        ("column.u74", &mut schema.u74),
        ("column.u75", &mut schema.u75),
        ("column.re78", &mut schema.re78),
    ];
    for (key, slot) in fields {
        if let Some(v) = cfg.get(key) {
            *slot = v.to_string();
        }
    }
    schema
}

/// Synthetic defaults overridden by `overlap.*` config keys.
fn overlap_coeffs(
    cfg: &Config,
    pool_dim: usize,
) -> Result<kmatch::dgp::OverlapCoeffs, Failure> {
    let mut coeffs = default_overlap_coeffs();
    if let Some(alpha) = cfg.parsed("overlap.alpha").map_err(Failure::Usage)? {
        coeffs.alpha = alpha;
    }
    if let Some(raw) = cfg.get("overlap.beta") {
        coeffs.beta = parse_list(raw, "overlap.beta entry")?;
    }
    if let Some(raw) = cfg.get("overlap.delta0") {
        coeffs.delta0 = parse_list(raw, "overlap.delta0 entry")?;
    }
    if let Some(raw) = cfg.get("overlap.delta1") {
        coeffs.delta1 = parse_list(raw, "overlap.delta1 entry")?;
    }
    if let Some(att) = cfg.parsed("overlap.att").map_err(Failure::Usage)? {
        coeffs.att_benchmark = att;
    }
    if coeffs.beta.len() != pool_dim {
        return Err(usage(format!(
            "overlap.beta has {} entries but the pool has {} columns",
            coeffs.beta.len(),
            pool_dim
        )));
    }
    for (name, delta) in [("delta0", &coeffs.delta0), ("delta1", &coeffs.delta1)] {
        if delta.len() != pool_dim + 1 {
            return Err(usage(format!(
                "overlap.{name} needs {} entries (intercept + one per pool column), got {}",
                pool_dim + 1,
                delta.len()
            )));
        }
    }
    Ok(coeffs)
}

/// Numeric matrix, one row per line, comma- or whitespace-delimited. A
/// single leading non-numeric line is treated as a header and skipped.
fn load_pool(path: &Path) -> Result<CovariatePool, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| runtime(format!("cannot read pool {}: {e}", path.display())))?;
    let mut values: Vec<f64> = Vec::new();
    let mut width = 0usize;
    let mut rows = 0usize;
    let mut first = true;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = if line.contains(',') {
            line.split(',').map(str::trim).collect()
        } else {
            line.split_whitespace().collect()
        };
        let parsed: Result<Vec<f64>, _> = cells.iter().map(|c| c.parse()).collect();
        let row = match parsed {
            Ok(row) => row,
            Err(_) if first => {
                first = false;
                continue;
            }
            Err(e) => {
                return Err(runtime(format!(
                    "pool {}: line {}: {e}",
                    path.display(),
                    lineno + 1
                )))
            }
        };
        first = false;
        if rows == 0 {
            width = row.len();
        } else if row.len() != width {
            return Err(runtime(format!(
                "pool {}: line {} has {} columns, expected {}",
                path.display(),
                lineno + 1,
                row.len(),
                width
            )));
        }
        values.extend(row);
        rows += 1;
    }
    if rows == 0 || width == 0 {
        return Err(runtime(format!("pool {} holds no numeric rows", path.display())));
    }
    Ok(CovariatePool::new(values, rows, width))
}
