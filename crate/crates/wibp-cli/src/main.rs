//! `wibp`: simulate weighted-buffet trajectories, estimate their growth
//! and prediction statistics, and run Monte Carlo verification suites.
//!
//! Output conventions: artifacts (JSON, CSV) go to `--out` files when a
//! stem is given, otherwise to stdout; human-readable progress and verdict
//! lines go to stderr, so stdout stays machine-clean.
//!
//! Exit codes:
//!
//! ```text
//!   0  every selected check passed (or was report-only)
//!   1  a suite failed its gate
//!   2  usage or configuration error
//!   3  a selected suite was inapplicable or could not reach a verdict
//!   4  resource error (I/O, thread pool, table overflow)
//! ```

mod config;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use config::{ConfigError, Draft, RunConfig, SuiteName};
use wibp::estimators::{estimate_report, EstimateReport};
use wibp::io::to_json_string;
use wibp::model::{run_trajectory, ModelError, RecordPlan};
use wibp::stats::Trajectory;
use wibp::montecarlo::{
    suite_cid_identity, suite_clt_kbar, suite_clt_ln, suite_finite_buffet, suite_poisson_oracle,
    suite_slln_ln, SuiteError, SuiteReport, Verdict,
};

/// Growth factor of the default geometric checkpoint grid.
const GEOMETRIC_GROWTH: f64 = 1.25;

#[derive(Parser)]
#[command(
    name = "wibp",
    version,
    about = "Weighted-buffet process simulator and Monte Carlo verification lab"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one trajectory; emit its CSV (and, with --out, JSON) artifact.
    Simulate(CommonArgs),
    /// Run one trajectory and report the estimators at the final horizon.
    Estimate(EstimateArgs),
    /// Run verification suites and emit one report per suite.
    Verify(VerifyArgs),
    /// Check the dish-count law against its exact Poisson form.
    Oracle(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Flat key=value config file, or a JSON artifact to rerun.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Mass parameter; must satisfy alpha > 0.
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    /// Discount parameter; must satisfy beta < 1.
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    /// Concentration parameter; must satisfy c > -beta.
    #[arg(long, allow_negative_numbers = true)]
    c: Option<f64>,
    /// Weight law: const:r | unif:lo,hi | twopoint:v1,v2,p.
    #[arg(long)]
    weights: Option<String>,
    /// Label subset: comma-separated lo-hi intervals, e.g. 0-0.5.
    #[arg(long)]
    subset: Option<String>,
    /// Horizon: customers per trajectory.
    #[arg(long)]
    n: Option<u64>,
    /// Monte Carlo replicates per suite.
    #[arg(long)]
    reps: Option<u64>,
    /// Base seed; replicate i advances RNG stream i.
    #[arg(long)]
    seed: Option<u64>,
    /// RNG stream id for single-trajectory commands.
    #[arg(long)]
    stream: Option<u64>,
    /// Worker threads (default: WIBP_PARALLELISM, then all cores).
    #[arg(long)]
    parallelism: Option<usize>,
    /// Recording checkpoints: comma-separated customer indices in [1, n].
    #[arg(long)]
    checkpoints: Option<String>,
    /// Proxy-horizon factor (>= 2) for interval-coverage checks.
    #[arg(long)]
    proxy_factor: Option<u64>,
    /// Output path stem; writes <out>.json (simulate also <out>.csv).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Confidence level in (0, 1) for the predictive interval.
    #[arg(long)]
    level: Option<f64>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Suite to run (repeatable): oracle|slln|clt-ln|clt-kbar|cid|finite.
    /// Without it, every suite applicable to the configuration runs.
    #[arg(long = "suite", value_name = "NAME")]
    suites: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Resource(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Resource(_) => 4,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn dispatch(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Cmd::Simulate(args) => {
            let (cfg, out) = resolve(&args, None, &[])?;
            cmd_simulate(&cfg, out.as_deref())
        }
        Cmd::Estimate(args) => {
            let (cfg, out) = resolve(&args.common, args.level, &[])?;
            cmd_estimate(&cfg, out.as_deref())
        }
        Cmd::Verify(args) => {
            let (cfg, out) = resolve(&args.common, None, &args.suites)?;
            cmd_verify(&cfg, out.as_deref())
        }
        Cmd::Oracle(args) => {
            let (mut cfg, out) = resolve(&args, None, &[])?;
            cfg.suites = vec![SuiteName::Oracle];
            cmd_verify(&cfg, out.as_deref())
        }
    }
}

/// Layers defaults, environment, config file, then flags into a validated
/// [`RunConfig`]. Flags go through the same entry parser as file keys so
/// both paths share one validation story.
fn resolve(
    args: &CommonArgs,
    level: Option<f64>,
    suites: &[String],
) -> Result<(RunConfig, Option<PathBuf>), CliError> {
    let mut draft = Draft::default();
    draft.apply_env()?;
    if let Some(path) = &args.config {
        draft.apply_file(path)?;
    }
    let floats: [(&str, Option<f64>); 4] = [
        ("alpha", args.alpha),
        ("beta", args.beta),
        ("c", args.c),
        ("level", level),
    ];
    for (key, value) in floats {
        if let Some(v) = value {
            draft.apply_entry(key, &v.to_string())?;
        }
    }
    let ints: [(&str, Option<u64>); 5] = [
        ("n", args.n),
        ("reps", args.reps),
        ("seed", args.seed),
        ("stream_id", args.stream),
        ("proxy_factor", args.proxy_factor),
    ];
    for (key, value) in ints {
        if let Some(v) = value {
            draft.apply_entry(key, &v.to_string())?;
        }
    }
    if let Some(v) = args.parallelism {
        draft.apply_entry("parallelism", &v.to_string())?;
    }
    let strings: [(&str, &Option<String>); 3] = [
        ("weights", &args.weights),
        ("subset", &args.subset),
        ("checkpoints", &args.checkpoints),
    ];
    for (key, value) in strings {
        if let Some(v) = value {
            draft.apply_entry(key, v)?;
        }
    }
    if !suites.is_empty() {
        draft.apply_entry("suites", &suites.join(","))?;
    }
    Ok((draft.finalize()?, args.out.clone()))
}

fn model_error(e: ModelError) -> CliError {
    match e {
        ModelError::DishTableOverflow { .. } => CliError::Resource(e.to_string()),
        other => CliError::Config(ConfigError(other.to_string())),
    }
}

fn write_artifact(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)
        .map_err(|e| CliError::Resource(format!("cannot write `{}`: {e}", path.display())))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn stem_with_ext(stem: &Path, ext: &str) -> PathBuf {
    PathBuf::from(format!("{}.{ext}", stem.display()))
}

fn render_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    to_json_string(value).map_err(|e| CliError::Resource(format!("cannot serialize: {e}")))
}

/// CSV artifact: `# key=value` provenance comments, then the fixed-schema
/// table.
fn render_csv(traj: &Trajectory) -> String {
    let mut csv = String::new();
    for (key, value) in &traj.config {
        csv.push_str(&format!("# {key}={value}\n"));
    }
    csv.push_str(&traj.to_csv());
    csv
}

fn cmd_simulate(cfg: &RunConfig, out: Option<&Path>) -> Result<u8, CliError> {
    let plan = match &cfg.checkpoints {
        Some(points) => RecordPlan::exact(points, cfg.n),
        None => RecordPlan::geometric(cfg.n, GEOMETRIC_GROWTH),
    };
    let traj = run_trajectory(&cfg.params, cfg.n, cfg.seed, cfg.stream_id, &plan)
        .map_err(model_error)?;
    let csv = render_csv(&traj);
    match out {
        Some(stem) => {
            write_artifact(&stem_with_ext(stem, "csv"), &csv)?;
            write_artifact(&stem_with_ext(stem, "json"), &render_json(&traj)?)?;
        }
        None => print!("{csv}"),
    }
    Ok(0)
}

#[derive(Serialize)]
struct EstimateArtifact {
    artifact: &'static str,
    config: BTreeMap<String, String>,
    report: EstimateReport,
}

fn cmd_estimate(cfg: &RunConfig, out: Option<&Path>) -> Result<u8, CliError> {
    let plan = RecordPlan::final_only(cfg.n);
    let traj = run_trajectory(&cfg.params, cfg.n, cfg.seed, cfg.stream_id, &plan)
        .map_err(model_error)?;
    let report = estimate_report(traj.last_row(), &cfg.params, cfg.level)
        .map_err(|e| CliError::Config(ConfigError(e.to_string())))?;
    eprintln!("{:<14} {}", "n", report.n);
    eprintln!("{:<14} {:.6}", "kbar", report.kbar);
    match report.beta_hat {
        Some(b) => eprintln!("{:<14} {:.6}", "beta_hat", b),
        None => eprintln!("{:<14} undefined (no dishes yet)", "beta_hat"),
    }
    if let Some(l) = report.lambda_hat {
        eprintln!("{:<14} {:.6}", "lambda_hat", l);
    }
    eprintln!("{:<14} {:.6}", "sigma_hat_sq", report.sigma_hat_sq);
    eprintln!("{:<14} {:.6}", "tau_hat_sq", report.tau_hat_sq);
    eprintln!(
        "{:<14} [{:.6}, {:.6}]",
        format!("ci({:.0}%)", report.ci_level * 100.0),
        report.ci_lo,
        report.ci_hi
    );
    let artifact = EstimateArtifact {
        artifact: "estimate",
        config: cfg.echo(&["n", "seed", "stream_id", "level"]),
        report,
    };
    let json = render_json(&artifact)?;
    match out {
        Some(stem) => write_artifact(&stem_with_ext(stem, "json"), &json)?,
        None => print!("{json}"),
    }
    Ok(0)
}

#[derive(Serialize)]
struct VerifyArtifact<'a> {
    artifact: &'static str,
    config: BTreeMap<String, String>,
    reports: &'a [SuiteReport],
}

fn cmd_verify(cfg: &RunConfig, out: Option<&Path>) -> Result<u8, CliError> {
    let explicit = !cfg.suites.is_empty();
    let list: Vec<SuiteName> = if explicit {
        cfg.suites.clone()
    } else {
        SuiteName::ALL.to_vec()
    };
    let mut reports: Vec<SuiteReport> = Vec::new();
    let mut failed = false;
    let mut no_verdict = false;
    for name in list {
        match run_suite(name, cfg) {
            Ok(report) => {
                eprintln!("{}: {}", report.suite, report.verdict);
                for note in &report.notes {
                    eprintln!("  note: {note}");
                }
                match report.verdict {
                    Verdict::Fail => failed = true,
                    Verdict::Underpowered => no_verdict = true,
                    Verdict::Pass | Verdict::ReportOnly => {}
                }
                reports.push(report);
            }
            Err(SuiteError::Inapplicable { suite, reason }) => {
                if explicit {
                    no_verdict = true;
                    eprintln!("{suite}: inapplicable ({reason})");
                } else {
                    eprintln!("{suite}: skipped ({reason})");
                }
            }
            Err(SuiteError::Gof(e)) => {
                no_verdict = true;
                eprintln!("{}: no verdict ({e})", name.as_str());
            }
            Err(e @ (SuiteError::Model(_) | SuiteError::Estimator(_))) => {
                return Err(CliError::Config(ConfigError(e.to_string())));
            }
            Err(SuiteError::ThreadPool(msg)) => return Err(CliError::Resource(msg)),
        }
    }
    let mut config = cfg.echo(&["n", "reps", "seed", "proxy_factor"]);
    config.insert(
        "suites".to_string(),
        reports
            .iter()
            .map(|r| r.suite)
            .collect::<Vec<_>>()
            .join(","),
    );
    let artifact = VerifyArtifact {
        artifact: "suite-reports",
        config,
        reports: &reports,
    };
    let json = render_json(&artifact)?;
    match out {
        Some(stem) => write_artifact(&stem_with_ext(stem, "json"), &json)?,
        None => print!("{json}"),
    }
    Ok(if failed {
        1
    } else if no_verdict {
        3
    } else {
        0
    })
}

fn run_suite(name: SuiteName, cfg: &RunConfig) -> Result<SuiteReport, SuiteError> {
    let threads = cfg.parallelism;
    match name {
        SuiteName::Oracle => suite_poisson_oracle(&cfg.params, cfg.n, cfg.reps, cfg.seed, threads),
        SuiteName::Slln => {
            let horizons = slln_horizons(cfg.n);
            suite_slln_ln(&cfg.params, &horizons, cfg.reps, cfg.seed, threads)
        }
        SuiteName::CltLn => suite_clt_ln(&cfg.params, cfg.n, cfg.reps, cfg.seed, threads),
        SuiteName::CltKbar => suite_clt_kbar(
            &cfg.params,
            cfg.n,
            cfg.reps,
            cfg.seed,
            cfg.proxy_factor,
            threads,
        ),
        SuiteName::Cid => suite_cid_identity(&cfg.params, cfg.n, cfg.seed, true),
        SuiteName::Finite => suite_finite_buffet(&cfg.params, cfg.n, cfg.reps, cfg.seed, threads),
    }
}

/// Horizon ladder for the growth-law suite: two decades below the horizon,
/// floored at 2 where the norming sequence becomes defined.
fn slln_horizons(n: u64) -> Vec<u64> {
    let mut horizons = vec![(n / 100).max(2), (n / 10).max(2), n.max(2)];
    horizons.sort_unstable();
    horizons.dedup();
    horizons
}
