//! Reproducible scenario runs.
//!
//! A [`Scenario`] names a command, a seed and its parameters. It is read
//! from TOML (top-level `name`, `command`, `seed`, `output`, plus a
//! `[params]` table) or from JSON with the same fields. [`run`] writes
//! `<name>.json` with the result record, optional CSV tables next to it,
//! and `<name>.timing.json` with the wall-clock time, so that the result
//! record itself is byte-identical across runs with the same scenario.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{CriticalSet, HeightConfig};
use crate::error::SandpileError;
use crate::exact::{
    check_reversibility, check_unique_toppling_bijection, detailed_balance_deviation, recurrent_set,
    stationary_distribution, transient_distribution, Distribution, StateSpace, MAX_DENSE_N,
};
use crate::series::{cost_estimate, radius, taylor_semigroup, LocalFunction, SeriesOptions};
use crate::sim::{
    discrete_time_fvsp, estimate_absorption, fvsp_state, hole_law, monte_carlo, order_violations, random_ordered_pair,
    sample_all, sample_rng, simulate_avalanche_chain, simulate_coupled, Accumulator, Coupling,
};
use crate::toppling::{stabilize, stabilize_bruteforce, GrainField};

pub const TOOL: &str = "sandpile1d";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Stabilize,
    Avalanche,
    Couple,
    Fvsp,
    Exact,
    Series,
    Theorem51,
    Prop51,
    Discrete,
}

impl Command {
    pub const ALL: [Command; 9] = [
        Command::Stabilize,
        Command::Avalanche,
        Command::Couple,
        Command::Fvsp,
        Command::Exact,
        Command::Series,
        Command::Theorem51,
        Command::Prop51,
        Command::Discrete,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Stabilize => "stabilize",
            Command::Avalanche => "avalanche",
            Command::Couple => "couple",
            Command::Fvsp => "fvsp",
            Command::Exact => "exact",
            Command::Series => "series",
            Command::Theorem51 => "theorem51",
            Command::Prop51 => "prop51",
            Command::Discrete => "discrete",
        }
    }
}

/// Command parameters; which ones are required depends on the command.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// Volume half-widths (a list for sweeps).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<Vec<u32>>,
    /// Number of jumps for `prop51`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Times (a list for sweeps).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    /// `exact` checks: `all`, `stationary`, `reversibility`, `bijection`, `transient`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check: Option<String>,
    /// Observable for `series`: `occ0`, `pair01` or `interval-len k`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<String>,
    /// Configuration in text form `lo hi tail h(lo) … h(hi)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<String>,
    /// Lower configuration for `couple`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<String>,
    /// Grain field in text form `lo hi c(lo) … c(hi)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grains: Option<String>,
    /// Initial critical set for `avalanche`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub set: Option<Vec<i64>>,
    /// `avalanche`, `n` or `n1n`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth_cap: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub command: Command,
    #[serde(default)]
    pub seed: u64,
    /// Output directory; the current directory when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub params: Params,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldIssue {
    pub field: String,
    pub message: String,
}

impl FieldIssue {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { field: field.into(), message: message.into() }
    }
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid scenario: {}", issues.iter().map(|i| format!("{}: {}", i.field, i.message)).collect::<Vec<_>>().join("; "))]
    Invalid { issues: Vec<FieldIssue> },

    #[error(transparent)]
    Sandpile(#[from] SandpileError),

    #[error("{context}: {source}")]
    Context { context: String, source: SandpileError },

    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl ExperimentError {
    fn invalid(field: &str, message: impl Into<String>) -> Self {
        Self::Invalid { issues: vec![FieldIssue::new(field, message)] }
    }

    /// Machine-readable error record.
    pub fn record(&self, scenario: Option<&Scenario>) -> Value {
        let (kind, issues) = match self {
            ExperimentError::Invalid { issues } => ("invalid_scenario", issues.clone()),
            ExperimentError::Sandpile(_) | ExperimentError::Context { .. } => ("model_error", Vec::new()),
            ExperimentError::Io { .. } => ("io_error", Vec::new()),
        };
        json!({
            "tool": TOOL,
            "version": VERSION,
            "scenario_hash": scenario.map(scenario_hash),
            "seed": scenario.map(|s| s.seed),
            "error": { "kind": kind, "message": self.to_string(), "issues": issues },
        })
    }
}

type Result<T> = std::result::Result<T, ExperimentError>;

impl Scenario {
    pub fn new(name: impl Into<String>, command: Command, seed: u64, params: Params) -> Self {
        Self { name: name.into(), command, seed, output: None, params }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let value: toml::Table = toml::from_str(text)
            .map_err(|e: toml::de::Error| ExperimentError::invalid("<toml>", e.message().to_string()))?;
        check_command_field(value.get("command").and_then(|c| c.as_str()))?;
        toml::Value::Table(value)
            .try_into()
            .map_err(|e: toml::de::Error| ExperimentError::invalid("<scenario>", e.message().to_string()))
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| ExperimentError::invalid("<json>", e.to_string()))?;
        check_command_field(value.get("command").and_then(|c| c.as_str()))?;
        serde_json::from_value(value).map_err(|e| ExperimentError::invalid("<scenario>", e.to_string()))
    }

    /// Reads a `.json` file as JSON and anything else as TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| ExperimentError::Io { path: path.into(), source })?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text)
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes to toml")
    }
}

fn check_command_field(command: Option<&str>) -> Result<()> {
    match command {
        None => Err(ExperimentError::invalid("command", "missing")),
        Some(c) if Command::ALL.iter().any(|k| k.name() == c) => Ok(()),
        Some(c) => {
            let known: Vec<&str> = Command::ALL.iter().map(|k| k.name()).collect();
            Err(ExperimentError::invalid(
                "command",
                format!("unknown command `{c}` (expected one of {})", known.join(", ")),
            ))
        }
    }
}

/// SHA-256 of the scenario's canonical JSON encoding.
pub fn scenario_hash(scenario: &Scenario) -> String {
    let canonical = serde_json::to_string(scenario).expect("scenario serializes to json");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
enum ExactCheck {
    All,
    Stationary,
    Reversibility,
    Bijection,
    Transient,
}

/// A scenario with its parameters resolved and checked.
enum Plan {
    Stabilize { n: u32, grains: GrainField },
    Avalanche { set: CriticalSet, horizon: f64, samples: usize },
    Couple { coupling: Coupling, horizon: f64, samples: usize, pair: Option<(HeightConfig, HeightConfig)> },
    Fvsp { n: u32, t: f64, samples: usize },
    Exact { ns: Vec<u32>, check: ExactCheck, samples: usize },
    Series { f: LocalFunction, eta: HeightConfig, ts: Vec<f64>, tol: f64, depth_cap: usize },
    Theorem51 { ns: Vec<u32>, t: f64, samples: usize },
    Prop51 { ns: Vec<u32>, k: usize, samples: usize },
    Discrete { n: u32, steps: u64, samples: usize },
}

struct Resolver<'a> {
    p: &'a Params,
    issues: Vec<FieldIssue>,
}

impl Resolver<'_> {
    fn missing(&mut self, field: &str) {
        self.issues.push(FieldIssue::new(format!("params.{field}"), "required for this command"));
    }

    fn ns(&mut self) -> Vec<u32> {
        match &self.p.n {
            Some(ns) if !ns.is_empty() => ns.clone(),
            Some(_) => {
                self.issues.push(FieldIssue::new("params.n", "empty list"));
                Vec::new()
            }
            None => {
                self.missing("n");
                Vec::new()
            }
        }
    }

    fn n(&mut self) -> u32 {
        let ns = self.ns();
        if ns.len() > 1 {
            self.issues.push(FieldIssue::new("params.n", "expects a single volume"));
        }
        ns.first().copied().unwrap_or(0)
    }

    fn ts(&mut self) -> Vec<f64> {
        match &self.p.t {
            Some(ts) if !ts.is_empty() => {
                if ts.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
                    self.issues.push(FieldIssue::new("params.t", "times must be finite and nonnegative"));
                }
                ts.clone()
            }
            _ => {
                self.missing("t");
                Vec::new()
            }
        }
    }

    fn t(&mut self) -> f64 {
        let ts = self.ts();
        if ts.len() > 1 {
            self.issues.push(FieldIssue::new("params.t", "expects a single time"));
        }
        ts.first().copied().unwrap_or(0.0)
    }

    fn samples(&mut self, default: usize) -> usize {
        match self.p.samples {
            Some(0) => {
                self.issues.push(FieldIssue::new("params.samples", "must be positive"));
                1
            }
            Some(s) => s,
            None => default,
        }
    }

    fn horizon(&mut self) -> f64 {
        match self.p.horizon {
            Some(h) if h >= 0.0 && h.is_finite() => h,
            Some(_) => {
                self.issues.push(FieldIssue::new("params.horizon", "must be finite and nonnegative"));
                0.0
            }
            None => {
                self.missing("horizon");
                0.0
            }
        }
    }

    fn config(&mut self, field: &str, text: Option<&String>) -> Option<HeightConfig> {
        match text.map(|s| s.parse::<HeightConfig>()) {
            Some(Ok(c)) => Some(c),
            Some(Err(e)) => {
                self.issues.push(FieldIssue::new(format!("params.{field}"), e.to_string()));
                None
            }
            None => None,
        }
    }

    fn cap(&mut self, field: &str, n: u32, cap: u32) {
        if n > cap {
            self.issues.push(FieldIssue::new(format!("params.{field}"), format!("volume {n} exceeds the cap {cap}")));
        }
    }
}

/// Series warnings: times at or beyond the estimated convergence radius.
fn series_warnings(plan: &Plan) -> Vec<FieldIssue> {
    let Plan::Series { eta, ts, .. } = plan else {
        return Vec::new();
    };
    let window = SeriesOptions::default().radius_window;
    match radius(eta, window) {
        Ok(r) => ts
            .iter()
            .filter(|&&t| t >= r)
            .map(|t| FieldIssue::new("params.t", format!("t = {t} is not below the radius {r:.6}; the run will fail")))
            .collect(),
        Err(e) => vec![FieldIssue::new("params.eta", format!("radius not computable: {e}"))],
    }
}

fn plan(s: &Scenario) -> Result<Plan> {
    let p = &s.params;
    let mut r = Resolver { p, issues: Vec::new() };
    if s.name.is_empty() || s.name.contains(['/', '\\']) {
        r.issues.push(FieldIssue::new("name", "must be a nonempty file stem"));
    }
    let plan = match s.command {
        Command::Stabilize => {
            let n = r.n();
            let grains = match p.grains.as_deref().map(str::parse::<GrainField>) {
                Some(Ok(g)) => Some(g),
                Some(Err(e)) => {
                    r.issues.push(FieldIssue::new("params.grains", e.to_string()));
                    None
                }
                None => {
                    r.missing("grains");
                    None
                }
            };
            grains.map(|grains| Plan::Stabilize { n, grains })
        }
        Command::Avalanche => {
            let set = p.set.clone().unwrap_or_else(|| vec![0]).into_iter().collect();
            Some(Plan::Avalanche { set, horizon: r.horizon(), samples: r.samples(1) })
        }
        Command::Couple => {
            let kind = p.coupling.clone().unwrap_or_else(|| "avalanche".into());
            let coupling = match kind.as_str() {
                "avalanche" => Some(Coupling::Avalanche),
                "n" => Some(Coupling::Birth { n: r.n() }),
                "n1n" => Some(Coupling::NestedBirth { n: r.n() }),
                other => {
                    r.issues.push(FieldIssue::new(
                        "params.coupling",
                        format!("unknown coupling `{other}` (avalanche, n, n1n)"),
                    ));
                    None
                }
            };
            let upper = r.config("eta", p.eta.as_ref());
            let lower = r.config("lower", p.lower.as_ref());
            let pair = match (upper, lower) {
                (Some(u), Some(l)) => Some((u, l)),
                (None, None) => None,
                _ => {
                    r.issues.push(FieldIssue::new("params.lower", "give both eta and lower, or neither"));
                    None
                }
            };
            let horizon = r.horizon();
            let samples = r.samples(1);
            coupling.map(|coupling| Plan::Couple { coupling, horizon, samples, pair })
        }
        Command::Fvsp => {
            let n = r.n();
            r.cap("n", n, MAX_DENSE_N);
            Some(Plan::Fvsp { n, t: r.t(), samples: r.samples(10_000) })
        }
        Command::Exact => {
            let ns = r.ns();
            for &n in &ns {
                r.cap("n", n, MAX_DENSE_N);
            }
            let check = match p.check.as_deref().unwrap_or("all") {
                "all" => Some(ExactCheck::All),
                "stationary" => Some(ExactCheck::Stationary),
                "reversibility" => Some(ExactCheck::Reversibility),
                "bijection" => Some(ExactCheck::Bijection),
                "transient" => Some(ExactCheck::Transient),
                other => {
                    r.issues.push(FieldIssue::new("params.check", format!("unknown check `{other}`")));
                    None
                }
            };
            let samples = r.samples(100);
            check.map(|check| Plan::Exact { ns, check, samples })
        }
        Command::Series => {
            let f = match p.f.as_deref().map(LocalFunction::builtin) {
                Some(Ok(f)) => Some(f),
                Some(Err(e)) => {
                    r.issues.push(FieldIssue::new("params.f", e.to_string()));
                    None
                }
                None => {
                    r.missing("f");
                    None
                }
            };
            let eta = r.config("eta", p.eta.as_ref());
            if p.eta.is_none() {
                r.missing("eta");
            }
            let ts = r.ts();
            let tol = p.tol.unwrap_or(1e-8);
            if tol.is_nan() || tol <= 0.0 {
                r.issues.push(FieldIssue::new("params.tol", "must be positive"));
            }
            let depth_cap = p.depth_cap.unwrap_or(SeriesOptions::default().depth_cap);
            match (f, eta) {
                (Some(f), Some(eta)) => Some(Plan::Series { f, eta, ts, tol, depth_cap }),
                _ => None,
            }
        }
        Command::Theorem51 => Some(Plan::Theorem51 { ns: r.ns(), t: r.t(), samples: r.samples(10_000) }),
        Command::Prop51 => {
            let k = p.k.unwrap_or_else(|| {
                r.missing("k");
                0
            });
            Some(Plan::Prop51 { ns: r.ns(), k, samples: r.samples(100_000) })
        }
        Command::Discrete => {
            let n = r.n();
            r.cap("n", n, MAX_DENSE_N);
            let steps = p.steps.unwrap_or_else(|| {
                r.missing("steps");
                0
            });
            Some(Plan::Discrete { n, steps, samples: r.samples(10_000) })
        }
    };
    match plan {
        Some(plan) if r.issues.is_empty() => Ok(plan),
        _ => Err(ExperimentError::Invalid { issues: r.issues }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub errors: Vec<FieldIssue>,
    pub warnings: Vec<FieldIssue>,
}

/// Checks a scenario without running it.
pub fn validate(scenario: &Scenario) -> ValidationReport {
    match plan(scenario) {
        Ok(plan) => ValidationReport { ok: true, errors: Vec::new(), warnings: series_warnings(&plan) },
        Err(ExperimentError::Invalid { issues }) => {
            ValidationReport { ok: false, errors: issues, warnings: Vec::new() }
        }
        Err(e) => ValidationReport {
            ok: false,
            errors: vec![FieldIssue::new("<scenario>", e.to_string())],
            warnings: Vec::new(),
        },
    }
}

/// Loads and validates a scenario file; parse failures become field errors.
pub fn validate_file(path: &Path) -> ValidationReport {
    match Scenario::load(path) {
        Ok(s) => validate(&s),
        Err(ExperimentError::Invalid { issues }) => {
            ValidationReport { ok: false, errors: issues, warnings: Vec::new() }
        }
        Err(e) => {
            ValidationReport { ok: false, errors: vec![FieldIssue::new("<file>", e.to_string())], warnings: Vec::new() }
        }
    }
}

/// Files written by [`run`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub record_path: PathBuf,
    pub timing_path: PathBuf,
    pub extra_paths: Vec<PathBuf>,
    pub record: Value,
}

struct Tables {
    files: Vec<(String, String)>,
}

impl Tables {
    fn add(&mut self, suffix: &str, contents: String) {
        self.files.push((suffix.to_string(), contents));
    }
}

fn sci(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| ExperimentError::Io { path: path.into(), source })
}

/// Runs a scenario, writing into `out_dir` (or the scenario's own output
/// directory when `out_dir` is `None`).
pub fn run(scenario: &Scenario, out_dir: Option<&Path>) -> Result<RunOutput> {
    let dir = out_dir.map(Path::to_path_buf).or_else(|| scenario.output.clone()).unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(|source| ExperimentError::Io { path: dir.clone(), source })?;
    let started = SystemTime::now();
    let clock = Instant::now();
    let outcome = plan(scenario).and_then(|plan| {
        let mut tables = Tables { files: Vec::new() };
        let result = execute(&plan, scenario.seed, &mut tables)?;
        Ok((result, tables))
    });
    let (result, tables) = match outcome {
        Ok(ok) => ok,
        Err(e) => {
            let path = dir.join(format!("{}.error.json", scenario.name));
            let text = serde_json::to_string_pretty(&e.record(Some(scenario))).expect("json");
            write_file(&path, &(text + "\n"))?;
            return Err(e);
        }
    };
    let record = json!({
        "tool": TOOL,
        "version": VERSION,
        "scenario_hash": scenario_hash(scenario),
        "seed": scenario.seed,
        "scenario": scenario,
        "result": result,
        "timing_file": format!("{}.timing.json", scenario.name),
    });
    let record_path = dir.join(format!("{}.json", scenario.name));
    write_file(&record_path, &(serde_json::to_string_pretty(&record).expect("json") + "\n"))?;
    let mut extra_paths = Vec::new();
    for (suffix, contents) in tables.files {
        let path = dir.join(format!("{}.{suffix}", scenario.name));
        write_file(&path, &contents)?;
        extra_paths.push(path);
    }
    let timing = json!({
        "scenario_hash": scenario_hash(scenario),
        "started_unix_seconds": started.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0),
        "wall_clock_seconds": clock.elapsed().as_secs_f64(),
    });
    let timing_path = dir.join(format!("{}.timing.json", scenario.name));
    write_file(&timing_path, &(serde_json::to_string_pretty(&timing).expect("json") + "\n"))?;
    Ok(RunOutput { record_path, timing_path, extra_paths, record })
}

fn execute(plan: &Plan, seed: u64, tables: &mut Tables) -> Result<Value> {
    Ok(match plan {
        Plan::Stabilize { n, grains } => {
            let fast = stabilize(*n, grains)?;
            let slow = stabilize_bruteforce(*n, grains, seed)?;
            let ones = fast.count_ones(-(*n as i64), *n as i64)?;
            json!({
                "n": n,
                "grains": grains.to_string(),
                "stable": fast.to_string(),
                "bruteforce_agrees": fast == slow,
                "recurrent": ones <= 1,
            })
        }
        Plan::Avalanche { set, horizon, samples } => {
            let first = simulate_avalanche_chain(set, *horizon, seed)?;
            tables.add("trajectory.jsonl", first.to_jsonl());
            let sizes = monte_carlo(*samples, seed, |rng| {
                let traj = simulate_avalanche_chain(set, *horizon, rng.random())?;
                Ok((set.len() + traj.events.len()) as f64)
            })?;
            json!({
                "initial_size": set.len(),
                "horizon": horizon,
                "events_in_first_sample": first.events.len(),
                "mean_final_size": sizes.mean(),
                "stderr": sizes.stderr(),
                "expected_final_size": set.len() as f64 * horizon.exp(),
                "samples": samples,
            })
        }
        Plan::Couple { coupling, horizon, samples, pair } => {
            let runs = sample_all(*samples, seed, |rng| {
                let (upper, lower) = match pair {
                    Some(p) => p.clone(),
                    None => random_ordered_pair(6, 0.5, rng),
                };
                let traj = simulate_coupled(*coupling, &upper, &lower, *horizon, rng.random())?;
                Ok((order_violations(&traj)?, traj.events.len() as f64))
            })?;
            let violations: usize = runs.iter().map(|r| r.0).sum();
            let events: Accumulator = runs.iter().map(|r| r.1).collect();
            json!({
                "coupling": coupling,
                "horizon": horizon,
                "samples": samples,
                "order_violations": violations,
                "mean_events": events.mean(),
            })
        }
        Plan::Fvsp { n, t, samples } => {
            let space = StateSpace::new(*n)?;
            let ones = HeightConfig::all_ones();
            let states = sample_all(*samples, seed, |rng| {
                let pile = fvsp_state(*n, &ones, *t, rng)?;
                space.index_of_config(&pile.to_config())
            })?;
            let empirical = Distribution::empirical(space, &states);
            let exact = transient_distribution(*n, 0, *t)?;
            let mut csv = String::from("state_index,heights,exact,empirical\n");
            for s in 0..space.len() {
                let h: String = space.heights(s).iter().map(|h| char::from(b'0' + h)).collect();
                writeln!(csv, "{s},{h},{},{}", sci(exact.weights[s]), sci(empirical.weights[s])).expect("string");
            }
            tables.add("law.csv", csv);
            json!({
                "n": n,
                "t": t,
                "samples": samples,
                "total_variation": empirical.total_variation(&exact),
            })
        }
        Plan::Exact { ns, check, samples } => {
            let mut out = Vec::new();
            for &n in ns {
                out.push(exact_report(n, *check, *samples, seed, tables)?);
            }
            json!({ "volumes": out })
        }
        Plan::Series { f, eta, ts, tol, depth_cap } => {
            let opts = SeriesOptions { depth_cap: *depth_cap, ..SeriesOptions::default() };
            let rows = ts
                .iter()
                .map(|&t| {
                    taylor_semigroup(f, eta, t, *tol, &opts)
                        .map_err(|source| ExperimentError::Context { context: format!("series at t = {t}"), source })
                })
                .collect::<Result<Vec<_>>>()?;
            json!({
                "observable": f.name(),
                "eta": eta.to_string(),
                "tol": tol,
                "depth_cap": depth_cap,
                "cost_estimate_at_cap": cost_estimate(f, eta, *depth_cap)?,
                "results": rows,
            })
        }
        Plan::Theorem51 { ns, t, samples } => {
            let mut csv = String::from("n,t,estimate,stderr,first_term\n");
            let mut rows = Vec::new();
            for &n in ns {
                let est = estimate_absorption(n, *t, *samples, seed)?;
                let first = 1.0 / (2 * n + 1) as f64;
                writeln!(csv, "{n},{},{},{},{}", sci(*t), sci(est.mean), sci(est.stderr), sci(first)).expect("string");
                rows.push(json!({ "n": n, "estimate": est.mean, "stderr": est.stderr, "first_term": first }));
            }
            tables.add("csv", csv);
            json!({ "t": t, "samples": samples, "rows": rows })
        }
        Plan::Prop51 { ns, k, samples } => {
            let mut csv = String::from("n,k,empirical,stderr,theory,exact\n");
            let mut laws = Vec::new();
            for &n in ns {
                let law = hole_law(n, *k, *samples, seed)?;
                for row in &law.rows {
                    writeln!(
                        csv,
                        "{n},{},{},{},{},{}",
                        row.k,
                        sci(row.empirical),
                        sci(row.stderr),
                        sci(row.theory),
                        sci(row.exact)
                    )
                    .expect("string");
                }
                laws.push(law);
            }
            tables.add("csv", csv);
            json!({ "laws": laws })
        }
        Plan::Discrete { n, steps, samples } => {
            let space = StateSpace::new(*n)?;
            let ones = HeightConfig::all_ones();
            let states = sample_all(*samples, seed, |rng| {
                let end = discrete_time_fvsp(*n, *steps, &ones, rng.random())?;
                space.index_of_config(&end)
            })?;
            let empirical = Distribution::empirical(space, &states);
            let mu = Distribution::uniform_recurrent(*n)?;
            tables.add("law.csv", empirical.to_csv());
            json!({
                "n": n,
                "steps": steps,
                "samples": samples,
                "total_variation_to_uniform_recurrent": empirical.total_variation(&mu),
            })
        }
    })
}

fn exact_report(n: u32, check: ExactCheck, samples: usize, seed: u64, tables: &mut Tables) -> Result<Value> {
    let wants = |c: ExactCheck| check == ExactCheck::All || check == c;
    let rec = recurrent_set(n)?;
    let mut report = json!({ "n": n, "recurrent_size": rec.len() });
    if wants(ExactCheck::Stationary) {
        let pi = stationary_distribution(n)?;
        let mu = Distribution::uniform_recurrent(n)?;
        report["stationary_max_deviation"] = json!(pi.max_abs_diff(&mu));
        tables.add(&format!("n{n}.distribution.csv"), pi.to_csv());
        tables.add(&format!("n{n}.generator.csv"), crate::exact::build_generator(n)?.to_csv());
    }
    if wants(ExactCheck::Reversibility) {
        let len = StateSpace::new(n)?.len();
        let mut rng = sample_rng(seed, n as u64);
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let f: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
            let g: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (lhs, rhs) = check_reversibility(n, &f, &g)?;
            worst = worst.max((lhs - rhs).abs());
        }
        report["reversibility_pairs"] = json!(samples);
        report["reversibility_max_deviation"] = json!(worst);
        report["detailed_balance_max_deviation"] = json!(detailed_balance_deviation(n)?);
    }
    if wants(ExactCheck::Bijection) {
        report["bijection"] = serde_json::to_value(check_unique_toppling_bijection(n)?).expect("json");
    }
    if wants(ExactCheck::Transient) {
        let space = StateSpace::new(n)?;
        let mu = Distribution::uniform_recurrent(n)?;
        let worst = (0..space.len())
            .map(|s| transient_distribution(n, s, 50.0).map(|p| p.max_abs_diff(&mu)))
            .collect::<std::result::Result<Vec<_>, _>>()?
            .into_iter()
            .fold(0.0, f64::max);
        report["transient_t50_max_deviation"] = json!(worst);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "name = \"tiny\"\ncommand = \"exact\"\nseed = 3\n\n[params]\nn = [1]\n";

    #[test]
    fn minimal_toml_is_valid() {
        let s = Scenario::from_toml_str(MINIMAL).unwrap();
        assert_eq!(s.command, Command::Exact);
        assert!(validate(&s).ok);
        let back = Scenario::from_toml_str(&s.to_toml_string()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn json_encoding_matches_toml() {
        let s = Scenario::from_toml_str(MINIMAL).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(Scenario::from_json_str(&json).unwrap(), s);
    }

    #[test]
    fn unknown_command_names_the_field() {
        let err = Scenario::from_toml_str("name = \"x\"\ncommand = \"launch\"\n").unwrap_err();
        let ExperimentError::Invalid { issues } = err else { panic!() };
        assert_eq!(issues[0].field, "command");
        assert!(issues[0].message.contains("launch"));
    }

    #[test]
    fn missing_params_are_reported() {
        let s = Scenario::new("p", Command::Prop51, 1, Params::default());
        let report = validate(&s);
        assert!(!report.ok);
        let fields: Vec<&str> = report.errors.iter().map(|i| i.field.as_str()).collect();
        assert_eq!(fields, vec!["params.k", "params.n"]);
    }

    #[test]
    fn series_beyond_radius_warns() {
        let params = Params {
            f: Some("occ0".into()),
            eta: Some("0 0 ones 1".into()),
            t: Some(vec![0.01, 0.2]),
            ..Params::default()
        };
        let report = validate(&Scenario::new("s", Command::Series, 0, params));
        assert!(report.ok);
        assert_eq!(report.warnings.len(), 1);
        assert!(report.warnings[0].message.contains("0.2"));
    }

    #[test]
    fn hash_depends_on_seed() {
        let a = Scenario::from_toml_str(MINIMAL).unwrap();
        let mut b = a.clone();
        b.seed = 4;
        assert_ne!(scenario_hash(&a), scenario_hash(&b));
        assert_eq!(scenario_hash(&a).len(), 64);
    }
}
