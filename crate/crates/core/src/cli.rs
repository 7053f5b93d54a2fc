//! The `nhmdp` command line.
//!
//! Exit codes: 0 on success, 1 on usage errors (bad flags, unreadable
//! files), 2 when the input parses but violates a model invariant or a
//! solver assumption, or when `check` finds a failing property.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::analysis::checks::{battery_csv, run_battery, Status};
use crate::analysis::{finite_horizon_average, finite_horizon_risk, gain_curve, parse_gamma_grid, simulate, stability_trace};
use crate::coefficients::{Coefficients, TAIL_TOL};
use crate::error::{Error, Result};
use crate::model::{load_model, Model};
use crate::operators::PolicySchedule;
use crate::solver::{solve_average, solve_policy_average, solve_policy_risk, solve_risk, SolveOptions, Solution};

#[derive(Debug, Parser)]
#[command(name = "nhmdp", version, about = "Long-run control of nonhomogeneous Markov decision processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Span tolerance of the backward iteration.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Budget of stage applications.
    #[arg(long, global = true)]
    kmax: Option<usize>,
    /// Write the payload to this file instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Emit tabular outputs as CSV.
    #[arg(long, global = true)]
    csv: bool,
    /// Seed for Monte Carlo and randomized checks.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (falls back to NHMDP_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Per-stage coefficient table.
    Coeff {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        gamma: Option<f64>,
    },
    /// Solve the Bellman equation (risk-sensitive with --gamma).
    Solve {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        gamma: Option<f64>,
    },
    /// Evaluate a fixed policy over a finite horizon.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        policy: PathBuf,
        #[arg(long)]
        horizon: usize,
        #[arg(long, allow_hyphen_values = true)]
        gamma: Option<f64>,
        /// Also run a Monte Carlo cross-check with this many paths.
        #[arg(long, value_name = "PATHS")]
        simulate: Option<usize>,
        /// Start state label for the Monte Carlo run (default: the anchor).
        #[arg(long)]
        start: Option<String>,
    },
    /// Optimal gain over a grid of risk factors.
    Curve {
        #[arg(long)]
        model: PathBuf,
        /// `lo:hi:step` or a comma-separated list.
        #[arg(long, allow_hyphen_values = true)]
        gammas: String,
    },
    /// Gains of a policy sequence against its limit.
    Stability {
        #[arg(long)]
        model: PathBuf,
        /// Directory with `m_<m>.json` policy files and `limit.json`.
        #[arg(long)]
        policies: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        gamma: Option<f64>,
    },
    /// Run the property battery on a model.
    Check {
        #[arg(long)]
        model: PathBuf,
    },
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub command: Vec<String>,
    pub model_digest: String,
    pub version: String,
    pub wall_time_s: f64,
    pub outputs: Value,
    pub warnings: Vec<String>,
}

/// What a command produced before it is written out.
enum Payload {
    Report(Value),
    Table { csv: String, records: Value },
}

struct Run {
    payload: Payload,
    digest: String,
    warnings: Vec<String>,
    /// Exit code on success; `check` reports failed properties with 2.
    code: i32,
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } | Error::InvalidArgument(_) => 1,
        Error::AtGamma { source, .. } => exit_code(source),
        _ => 2,
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let command: Vec<String> = argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    let started = Instant::now();

    let threads = match thread_count(cli.threads) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let outcome = match threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| execute(&cli)),
            Err(e) => Err(Error::InvalidArgument(format!("cannot start {n} threads: {e}"))),
        },
        None => execute(&cli),
    };
    match outcome {
        Ok(run) => match emit(&cli, command, started, run) {
            Ok(code) => code,
            Err(e) => {
                eprintln!("error: {e}");
                exit_code(&e)
            }
        },
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Validation(all) = &e {
                for v in all.iter().skip(1) {
                    eprintln!("  also: {v}");
                }
            }
            exit_code(&e)
        }
    }
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>> {
    if let Some(n) = flag {
        return Ok(Some(n));
    }
    match std::env::var("NHMDP_THREADS") {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::InvalidArgument(format!("NHMDP_THREADS must be a thread count, got '{v}'"))),
        _ => Ok(None),
    }
}

fn emit(cli: &Cli, command: Vec<String>, started: Instant, run: Run) -> Result<i32> {
    let as_csv = cli.csv || cli.out.as_ref().is_some_and(|p| p.extension().is_some_and(|e| e == "csv"));
    let tabular_default = matches!(cli.command, Command::Coeff { .. } | Command::Check { .. });
    let mut warnings = run.warnings;
    let (body, outputs) = match run.payload {
        Payload::Table { csv, .. } if as_csv || tabular_default => (Some(csv), None),
        Payload::Table { records, .. } => (None, Some(records)),
        Payload::Report(v) => {
            if cli.csv {
                warnings.push("--csv has no effect on this command".into());
            }
            (None, Some(v))
        }
    };
    let report = |outputs: Value| RunReport {
        command: command.clone(),
        model_digest: run.digest.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_s: started.elapsed().as_secs_f64(),
        outputs,
        warnings: warnings.clone(),
    };
    let to_text = |r: &RunReport| serde_json::to_string_pretty(r).expect("report serializes") + "\n";
    match (body, &cli.out) {
        (Some(csv), None) => {
            for w in &warnings {
                eprintln!("warning: {w}");
            }
            print!("{csv}");
        }
        (Some(csv), Some(path)) => {
            write_file(path, &csv)?;
            print!("{}", to_text(&report(json!({ "file": path.display().to_string() }))));
        }
        (None, None) => print!("{}", to_text(&report(outputs.expect("report payload")))),
        (None, Some(path)) => write_file(path, &to_text(&report(outputs.expect("report payload"))))?,
    }
    Ok(run.code)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

/// Loads a model file and returns it with the SHA-256 of its bytes.
fn read_model(path: &Path) -> Result<(Model, String)> {
    let text = read_file(path)?;
    let digest = format!("sha256:{}", hex::encode(Sha256::digest(text.as_bytes())));
    Ok((load_model(&text)?, digest))
}

fn options(cli: &Cli) -> Result<SolveOptions> {
    let mut opts = SolveOptions::default();
    if let Some(tol) = cli.tol {
        if tol.is_nan() || tol <= 0.0 {
            return Err(Error::InvalidArgument(format!("--tol must be positive, got {tol}")));
        }
        opts.tol = tol;
    }
    if let Some(k) = cli.kmax {
        opts.kmax = k;
    }
    Ok(opts)
}

fn finite_gamma(gamma: Option<f64>) -> Result<Option<f64>> {
    match gamma {
        Some(g) if g == 0.0 || !g.is_finite() => {
            Err(Error::InvalidArgument(format!("--gamma must be finite and non-zero, got {g}")))
        }
        other => Ok(other),
    }
}

fn execute(cli: &Cli) -> Result<Run> {
    let opts = options(cli)?;
    match &cli.command {
        Command::Coeff { model, gamma } => {
            let (m, digest) = read_model(model)?;
            let c = Coefficients::compute(&m, finite_gamma(*gamma)?, TAIL_TOL);
            let records = serde_json::to_value(&c).expect("coefficients serialize");
            Ok(Run { payload: Payload::Table { csv: c.to_csv(), records }, digest, warnings: vec![], code: 0 })
        }
        Command::Solve { model, gamma } => {
            let (m, digest) = read_model(model)?;
            let gamma = finite_gamma(*gamma)?;
            let sol = match gamma {
                None => solve_average(&m, &opts)?,
                Some(g) => solve_risk(&m, g, &opts)?.solution,
            };
            let mut warnings = vec![];
            if !sol.apriori_bound.is_finite() {
                warnings.push("a priori bound unavailable: coupling bound does not contract".into());
            }
            let mut out = solution_json(&m, &sol);
            out["gamma"] = json!(gamma);
            Ok(Run { payload: Payload::Report(out), digest, warnings, code: 0 })
        }
        Command::Eval { model, policy, horizon, gamma, simulate: paths, start } => {
            let (m, digest) = read_model(model)?;
            let gamma = finite_gamma(*gamma)?;
            let u = PolicySchedule::from_json(&m, &read_file(policy)?)?;
            if *horizon == 0 {
                return Err(Error::InvalidArgument("--horizon must be at least 1".into()));
            }
            let mut warnings = vec![];
            let mut average = BTreeMap::new();
            let mut risk = BTreeMap::new();
            for (x, label) in m.states().iter().enumerate() {
                average.insert(label.clone(), finite_horizon_average(&m, &u, *horizon, x)?);
                if let Some(g) = gamma {
                    risk.insert(label.clone(), finite_horizon_risk(&m, &u, *horizon, x, g)?);
                }
            }
            let mut out = json!({ "horizon": horizon, "gamma": gamma, "finite_horizon_average": average });
            if gamma.is_some() {
                out["finite_horizon_risk"] = json!(risk);
            }
            let gain = match gamma {
                None => solve_policy_average(&m, &u, &opts),
                Some(g) => solve_policy_risk(&m, &u, g, &opts).map(|r| r.solution),
            };
            match gain {
                Ok(sol) => out["policy_gain"] = json!(sol.long_run_gain),
                Err(e) if e.is_assumption_failure() => warnings.push(format!("policy gain unavailable: {e}")),
                Err(e) => return Err(e),
            }
            if let Some(paths) = paths {
                let x = match start {
                    None => m.anchor_index(),
                    Some(label) => m
                        .state_index(label)
                        .ok_or_else(|| Error::InvalidArgument(format!("unknown start state '{label}'")))?,
                };
                let seed = cli.seed.unwrap_or(0);
                let r = simulate(&m, &u, *horizon, *paths, seed, gamma, x)?;
                if let Some(g) = gamma {
                    let spread = g.abs() * r.std_error * (*paths as f64).sqrt() * *horizon as f64;
                    if spread > 3.0 {
                        warnings.push(format!(
                            "Monte Carlo risk value is biased low when |gamma| * sd(S) is large (here {spread:.1})"
                        ));
                    }
                }
                out["simulation"] = json!({
                    "label": "Monte Carlo cross-check",
                    "start": m.states()[x],
                    "seed": seed,
                    "result": r,
                });
            } else if start.is_some() {
                warnings.push("--start only applies with --simulate".into());
            }
            Ok(Run { payload: Payload::Report(out), digest, warnings, code: 0 })
        }
        Command::Curve { model, gammas } => {
            let (m, digest) = read_model(model)?;
            let grid = parse_gamma_grid(gammas)?;
            let curve = gain_curve(&m, &grid, &opts)?;
            let records = serde_json::to_value(&curve).expect("curve serializes");
            Ok(Run { payload: Payload::Table { csv: curve.to_csv(), records }, digest, warnings: vec![], code: 0 })
        }
        Command::Stability { model, policies, gamma } => {
            let (m, digest) = read_model(model)?;
            let gamma = finite_gamma(*gamma)?;
            let (sequence, limit) = read_policy_dir(&m, policies)?;
            let trace = stability_trace(&m, &sequence, &limit, gamma, &opts)?;
            let records = serde_json::to_value(&trace).expect("trace serializes");
            Ok(Run { payload: Payload::Table { csv: trace.to_csv(), records }, digest, warnings: vec![], code: 0 })
        }
        Command::Check { model } => {
            let (m, digest) = read_model(model)?;
            let rows = run_battery(&m, cli.seed.unwrap_or(0), &opts);
            let code = if rows.iter().any(|r| r.status == Status::Fail) { 2 } else { 0 };
            let records = serde_json::to_value(&rows).expect("rows serialize");
            Ok(Run { payload: Payload::Table { csv: battery_csv(&rows), records }, digest, warnings: vec![], code })
        }
    }
}

fn solution_json(m: &Model, sol: &Solution) -> Value {
    let w: Vec<BTreeMap<&str, f64>> = sol
        .w
        .iter()
        .map(|v| m.states().iter().map(String::as_str).zip(v.values().iter().copied()).collect())
        .collect();
    json!({
        "lambda": sol.lambda,
        "w": w,
        "policy": sol.policy.to_value(m),
        "long_run_gain": sol.long_run_gain,
        "iterations_used": sol.iterations_used,
        "apriori_bound": sol.apriori_bound,
        "residuals": sol.residuals,
        "final_increment": sol.final_increment,
    })
}

/// Reads `m_<m>.json` files (sorted by `m`) and `limit.json` from `dir`.
fn read_policy_dir(m: &Model, dir: &Path) -> Result<(Vec<(usize, PolicySchedule)>, PolicySchedule)> {
    let io = |source| Error::Io { path: dir.display().to_string(), source };
    let mut sequence = Vec::new();
    for entry in fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else { continue };
        if let Some(index) = name.strip_prefix("m_").and_then(|n| n.strip_suffix(".json")) {
            let index: usize = index
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("policy file '{name}' is not m_<integer>.json")))?;
            let policy = PolicySchedule::from_json(m, &read_file(&path)?)
                .map_err(|e| Error::Policy(format!("{name}: {e}")))?;
            sequence.push((index, policy));
        }
    }
    if sequence.is_empty() {
        return Err(Error::InvalidArgument(format!("no m_<m>.json policy files in {}", dir.display())));
    }
    sequence.sort_by_key(|(k, _)| *k);
    let limit = PolicySchedule::from_json(m, &read_file(&dir.join("limit.json"))?)
        .map_err(|e| Error::Policy(format!("limit.json: {e}")))?;
    Ok((sequence, limit))
}
