//! Command implementations behind the `cyclekernel` binary.
//!
//! Each command reads one config file, writes JSON (and CSV where tabular)
//! into the output directory, and returns an exit code: 0 pass, 1 verdict
//! failure, 2 usage or config error. Reports carry the resolved config and no
//! timestamps, so reruns are byte-identical.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use cyclekernel::divergence::{check_pushforward_property, PushforwardReport};
use cyclekernel::kernel::{verify_free_transitive, FreeTransitiveReport};
use cyclekernel::perturbation::{bound_csv, check_bound, BoundReport};
use cyclekernel::trainer::{seed_sweep, train_toy, Checkpoint, RunRecord, SweepReport};
use cyclekernel::Error;
use serde::Serialize;

use config::{load, BoundConfig, KernelConfig, PushforwardConfig, TrainFileConfig};

pub const EXIT_PASS: u8 = 0;
pub const EXIT_FAIL: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug)]
pub enum CliError {
    /// Unreadable or invalid configuration.
    Config(String),
    /// A run that could not complete for reasons other than configuration.
    Run(String),
    Io(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Run(m) => write!(f, "run failed: {m}"),
            CliError::Io(m) => write!(f, "io error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::NotAutomorphism(_) | Error::DivergedLoss { .. } => CliError::Run(e.to_string()),
            e => CliError::Config(e.to_string()),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Run(_) => EXIT_FAIL,
            CliError::Config(_) | CliError::Io(_) => EXIT_USAGE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Kernel,
    Pushforward,
    Bound,
    Train,
}

#[derive(Debug, Clone)]
pub struct Invocation {
    pub command: Command,
    pub config: PathBuf,
    pub out: PathBuf,
    pub seed_override: Option<u64>,
}

/// Outcome of a command: whether the verdict passed and a one-line summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub pass: bool,
    pub summary: String,
}

impl Outcome {
    pub fn exit_code(&self) -> u8 {
        if self.pass {
            EXIT_PASS
        } else {
            EXIT_FAIL
        }
    }
}

pub fn run(inv: &Invocation) -> Result<Outcome, CliError> {
    fs::create_dir_all(&inv.out).map_err(|e| CliError::Io(format!("{}: {e}", inv.out.display())))?;
    match inv.command {
        Command::Kernel => cmd_kernel(&load(&inv.config, inv.seed_override)?, &inv.out),
        Command::Pushforward => cmd_pushforward(&load(&inv.config, inv.seed_override)?, &inv.out),
        Command::Bound => cmd_bound(&load(&inv.config, inv.seed_override)?, &inv.out),
        Command::Train => cmd_train(&load(&inv.config, inv.seed_override)?, &inv.out),
    }
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    write(path, &text)
}

/// Training records run to megabytes, so they are written without indentation.
fn write_json_compact<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string(value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    write(path, &text)
}

#[derive(Serialize)]
struct KernelOutput<'a> {
    config: &'a KernelConfig,
    verdict: bool,
    summary: String,
    report: FreeTransitiveReport,
}

pub fn cmd_kernel(config: &KernelConfig, out: &Path) -> Result<Outcome, CliError> {
    let x = config.x.build()?;
    let y = config.y.build()?;
    let report = verify_free_transitive(&x, &y, config.tol)?;
    let verdict = report.verdict();
    let summary = report.summary();
    write_json(
        &out.join("kernel_report.json"),
        &KernelOutput {
            config,
            verdict,
            summary: summary.clone(),
            report,
        },
    )?;
    Ok(Outcome { pass: verdict, summary })
}

#[derive(Serialize)]
struct PushforwardEntry {
    map: String,
    pair: String,
    #[serde(flatten)]
    report: PushforwardReport,
}

#[derive(Serialize)]
struct PushforwardOutput<'a> {
    config: &'a PushforwardConfig,
    verdict: bool,
    max_gap: f64,
    entries: &'a [PushforwardEntry],
}

pub fn cmd_pushforward(config: &PushforwardConfig, out: &Path) -> Result<Outcome, CliError> {
    if config.divergences.is_empty() || config.maps.is_empty() || config.pairs.is_empty() {
        return Err(CliError::Config("divergences, maps and pairs must be non-empty".into()));
    }
    if !(config.tol >= 0.0) {
        return Err(CliError::Config(format!("tol must be non-negative, got {}", config.tol)));
    }
    let mut entries = Vec::new();
    for pair in &config.pairs {
        let p = pair.p.build_grid(&format!("pair `{}` p", pair.name))?;
        let q = pair.q.build_grid(&format!("pair `{}` q", pair.name))?;
        for named in &config.maps {
            for &spec in &config.divergences {
                let report = check_pushforward_property(spec, &p, &q, &named.map, config.tol)
                    .map_err(|e| CliError::Config(format!("map `{}` on pair `{}`: {e}", named.name, pair.name)))?;
                entries.push(PushforwardEntry {
                    map: named.name.clone(),
                    pair: pair.name.clone(),
                    report,
                });
            }
        }
    }
    let verdict = entries.iter().all(|e| e.report.verdict);
    let max_gap = entries.iter().map(|e| e.report.gap).fold(0.0, f64::max);
    let mut csv = String::from("map,pair,spec,lhs,rhs,gap,verdict\n");
    for e in &entries {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            e.map, e.pair, e.report.spec, e.report.lhs, e.report.rhs, e.report.gap, e.report.verdict
        ));
    }
    write(&out.join("pushforward.csv"), &csv)?;
    write_json(
        &out.join("pushforward_report.json"),
        &PushforwardOutput {
            config,
            verdict,
            max_gap,
            entries: &entries,
        },
    )?;
    let failing = entries.iter().filter(|e| !e.report.verdict).count();
    Ok(Outcome {
        pass: verdict,
        summary: format!(
            "{} checks, {failing} above tol {:e}, max gap {max_gap:.3e}",
            entries.len(),
            config.tol
        ),
    })
}

#[derive(Serialize)]
struct BoundEntry {
    name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<BoundReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Serialize)]
struct BoundOutput<'a> {
    config: &'a BoundConfig,
    verdict: bool,
    cases: &'a [BoundEntry],
}

/// A case whose `phi` is not an automorphism of X is recorded by name and
/// fails the verdict; other errors abort with a config error.
pub fn cmd_bound(config: &BoundConfig, out: &Path) -> Result<Outcome, CliError> {
    if config.cases.is_empty() {
        return Err(CliError::Config("cases must be non-empty".into()));
    }
    config.loss.validate()?;
    let x = config.x.build()?;
    let y = config.y.build()?;
    let mut cases = Vec::new();
    for case in &config.cases {
        match check_bound(&case.g, &case.f, &case.phi, &x, &y, &config.loss) {
            Ok(report) => cases.push(BoundEntry {
                name: case.name.clone(),
                report: Some(report),
                error: None,
            }),
            Err(e @ Error::NotAutomorphism(_)) => cases.push(BoundEntry {
                name: case.name.clone(),
                report: None,
                error: Some(e.to_string()),
            }),
            Err(e) => return Err(CliError::Config(format!("case `{}`: {e}", case.name))),
        }
    }
    let reports: Vec<BoundReport> = cases.iter().filter_map(|c| c.report.clone()).collect();
    let verdict = cases.iter().all(|c| c.report.as_ref().is_some_and(|r| r.verdict));
    write(&out.join("bound.csv"), &bound_csv(&reports))?;
    write_json(
        &out.join("bound_report.json"),
        &BoundOutput {
            config,
            verdict,
            cases: &cases,
        },
    )?;
    let mut summary = format!(
        "{} cases, {} within bound",
        cases.len(),
        reports.iter().filter(|r| r.verdict).count()
    );
    for c in &cases {
        if let Some(e) = &c.error {
            summary.push_str(&format!("; case `{}`: {e}", c.name));
        } else if let Some(r) = c.report.as_ref().filter(|r| !r.verdict) {
            summary.push_str(&format!(
                "; case `{}` violates: slack {:.3e}, stderr {:.3e}",
                c.name, r.slack, r.mc_stderr
            ));
        }
    }
    Ok(Outcome { pass: verdict, summary })
}

#[derive(Serialize)]
struct RunOutput<'a> {
    config: &'a TrainFileConfig,
    record: &'a RunRecord,
}

#[derive(Serialize)]
struct SweepOutput<'a> {
    config: &'a TrainFileConfig,
    sweep: &'a SweepReport,
}

pub fn cmd_train(config: &TrainFileConfig, out: &Path) -> Result<Outcome, CliError> {
    config.trainer.validate()?;
    let task = config.task.build()?;
    if config.seeds.len() >= 2 {
        let sweep = seed_sweep(&task, &config.trainer, &config.seeds)?;
        write(&out.join("sweep.csv"), &sweep.csv())?;
        write_json_compact(&out.join("sweep.json"), &SweepOutput { config, sweep: &sweep })?;
        let hist: Vec<String> = sweep.histogram.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let gap = sweep
            .loss_equivalence_gap
            .map_or_else(|| "n/a".to_string(), |g| format!("{g:.4}"));
        return Ok(Outcome {
            pass: true,
            summary: format!(
                "{} seeds, {} converged, classes [{}], loss gap {gap}",
                sweep.records.len(),
                sweep.converged,
                hist.join(", ")
            ),
        });
    }
    let record = train_toy(&task, &config.trainer)?;
    let dir = out.join("checkpoints");
    fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    for c in &record.checkpoints {
        write_json(&dir.join(checkpoint_name(c)), c)?;
    }
    write_json_compact(&out.join("run.json"), &RunOutput { config, record: &record })?;
    Ok(Outcome {
        pass: true,
        summary: format!(
            "seed {}: class {} at distance {:.4}, total_pure {:.4}",
            record.seed, record.solution_class, record.class_distance, record.final_loss.total_pure
        ),
    })
}

fn checkpoint_name(c: &Checkpoint) -> String {
    format!("step_{:06}.json", c.step)
}
