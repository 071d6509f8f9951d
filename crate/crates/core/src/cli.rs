//! Command-line front end.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 bad input (parse, config,
//! disconnected graph, empty sweep), 3 parameter or assumption violation
//! (including failed gain bounds under `--strict`), 4 numerical failure
//! (divergence, singular Hessian), 5 run finished but missed its settling
//! bound under `--strict`.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::costs::{Cost, MovingTarget, Quadratic, QuadraticTracking, SuiteA};
use crate::dynamics::Variant;
use crate::error::{Error, Result};
use crate::graph::{spectrum, SwitchingSchedule, Topology};
use crate::sim::{self, fmt17, RunOutput, Scenario, BUILTIN_SCENARIOS};

pub const OUTPUT_DIR_ENV: &str = "ZGS_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "zgs-out";

// Configuration.

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<Variant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        alias = "T_m",
        alias = "tm"
    )]
    pub t_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none", alias = "tol")]
    pub settle_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zgs_tol: Option<f64>,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        alias = "strict_mode"
    )]
    pub strict: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary_layer: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deadzone: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exp_clamp: Option<f64>,
}

/// Inline graph: a named generator or an explicit weighted edge list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSpec {
    Ring {
        n: usize,
    },
    Complete {
        n: usize,
    },
    Path {
        n: usize,
    },
    Star {
        n: usize,
    },
    RandomConnected {
        n: usize,
        p: f64,
        seed: u64,
    },
    Edges {
        n: usize,
        edges: Vec<(usize, usize, f64)>,
    },
}

impl GraphSpec {
    pub fn build(&self) -> Result<Topology> {
        match self {
            GraphSpec::Ring { n } => Topology::ring(*n),
            GraphSpec::Complete { n } => Topology::complete(*n),
            GraphSpec::Path { n } => Topology::path(*n),
            GraphSpec::Star { n } => Topology::star(*n),
            GraphSpec::RandomConnected { n, p, seed } => Topology::random_connected(*n, *p, *seed),
            GraphSpec::Edges { n, edges } => Topology::from_edges(*n, edges),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticSpec {
    /// Rows of the symmetric matrix `Q` in `½xᵀQx + bᵀx`.
    pub q: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

/// Inline cost set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CostsSpec {
    /// The six benchmark costs, each repeated `copies` times in order.
    #[serde(rename = "suiteA", alias = "suite_a")]
    SuiteA {
        #[serde(default = "one")]
        copies: usize,
    },
    Quadratic {
        terms: Vec<QuadraticSpec>,
    },
    /// `‖x - p*(t) - bias_i‖²` with `p*(t) = (2 sin t + 0.5 t, t)`.
    Tracking {
        biases: Vec<Vec<f64>>,
    },
}

fn one() -> usize {
    1
}

impl CostsSpec {
    pub fn build(&self) -> Result<Vec<Cost>> {
        match self {
            CostsSpec::SuiteA { copies } => {
                if *copies == 0 {
                    return Err(Error::Config("suiteA copies must be positive".into()));
                }
                Ok(SuiteA::ALL
                    .iter()
                    .flat_map(|f| std::iter::repeat_n(*f, *copies))
                    .map(|f| Arc::new(f) as Cost)
                    .collect())
            }
            CostsSpec::Quadratic { terms } => terms
                .iter()
                .map(|t| {
                    let n = t.b.len();
                    if t.q.len() != n || t.q.iter().any(|r| r.len() != n) {
                        return Err(Error::Config(format!(
                            "quadratic Q must be {n}x{n} to match b"
                        )));
                    }
                    let q = DMatrix::from_fn(n, n, |r, c| t.q[r][c]);
                    Ok(Arc::new(Quadratic::new(q, DVector::from_column_slice(&t.b))?) as Cost)
                })
                .collect(),
            CostsSpec::Tracking { biases } => {
                let target = MovingTarget::encirclement();
                biases
                    .iter()
                    .map(|b| {
                        if b.len() != 2 {
                            return Err(Error::Config("tracking biases must be 2-vectors".into()));
                        }
                        Ok(Arc::new(QuadraticTracking::new(
                            target.offset(&DVector::from_column_slice(b)),
                        )) as Cost)
                    })
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub overrides: Overrides,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<GraphSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub costs: Option<CostsSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<Vec<f64>>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scenario: "numerical_A".into(),
            output_dir: None,
            overrides: Overrides::default(),
            graph: None,
            costs: None,
            x0: None,
        }
    }
}

/// Parse a `key=value` override value as a TOML scalar or array, falling back to a string.
fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t
            .remove("v")
            .unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

const TOP_LEVEL_KEYS: [&str; 3] = ["scenario", "output_dir", "x0"];

fn set_path(table: &mut toml::Table, path: &[&str], value: toml::Value) -> Result<()> {
    let (last, parents) = path
        .split_last()
        .ok_or_else(|| Error::Config("empty override key".into()))?;
    let mut cur = table;
    for key in parents {
        let entry = cur
            .entry(key.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override path through non-table key '{key}'")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

impl RunConfig {
    /// Parse config text and apply `key=value` overrides. Bare keys other
    /// than `scenario`, `output_dir` and `x0` land under `overrides`; dotted
    /// keys address any table (`graph.kind=ring`).
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(format!("config parse error: {e}")))?;
        if !table.contains_key("scenario") {
            table.insert("scenario".into(), toml::Value::String("numerical_A".into()));
        }
        for item in overrides {
            let (key, raw) = item.split_once('=').ok_or_else(|| {
                Error::Config(format!("override '{item}' is not of the form key=value"))
            })?;
            let key = key.trim();
            let path: Vec<&str> = if key.contains('.') || TOP_LEVEL_KEYS.contains(&key) {
                key.split('.').collect()
            } else {
                vec!["overrides", key]
            };
            set_path(&mut table, &path, parse_value(raw.trim()))?;
        }
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("config error: {e}")))
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read config {}: {e}", p.display())))?,
            None => String::new(),
        };
        Self::parse(&text, overrides)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    pub fn strict(&self) -> bool {
        self.overrides.strict.unwrap_or(false)
    }

    /// Built-in scenario with the inline sections and overrides applied.
    pub fn build_scenario(&self) -> Result<Scenario> {
        let o = &self.overrides;
        let mut sc = sim::builtin(&self.scenario, o.seed.unwrap_or(1))?;
        if let Some(g) = &self.graph {
            sc.schedule = SwitchingSchedule::fixed(g.build()?)?;
            sc.notes.retain(|n| !n.starts_with("topology:"));
            sc.notes.push(format!("topology: {g:?}"));
        }
        if let Some(c) = &self.costs {
            sc.costs = c.build()?;
        }
        if let Some(x0) = &self.x0 {
            sc.x0 = x0.iter().map(|x| DVector::from_column_slice(x)).collect();
        }
        let p = &mut sc.params;
        if let Some(v) = o.variant {
            p.variant = v;
        }
        macro_rules! apply {
            ($($field:ident),*) => { $( if let Some(v) = o.$field { p.$field = v; } )* };
        }
        apply!(
            eta,
            p,
            t_m,
            c,
            mu,
            k,
            boundary_layer,
            epsilon0,
            deadzone,
            exp_clamp
        );
        if let Some(v) = o.t_end {
            sc.t_end = v;
        }
        if let Some(v) = o.settle_tol {
            sc.settle_tol = v;
        }
        if let Some(v) = o.zgs_tol {
            sc.zgs_tol = v;
        }
        if let Some(v) = o.seed {
            sc.seed = v;
        }
        if o.t_end.is_none() && sc.t_end < sc.params.t_m {
            sc.t_end = sc.params.t_m;
        }
        sc.params.check_ranges()?;
        sc.set_step(o.step.unwrap_or(sc.step))?;
        sc.check()?;
        Ok(sc)
    }

    pub fn resolve_output_dir(&self, flag: Option<&Path>) -> PathBuf {
        flag.map(Path::to_path_buf)
            .or_else(|| self.output_dir.clone())
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
    }
}

// Command line.

#[derive(Debug, Parser)]
#[command(
    name = "zgs",
    version,
    about = "Predefined-time distributed optimization simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML run configuration.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    /// Output directory (else the config's output_dir, then $ZGS_OUTPUT_DIR, then ./zgs-out).
    #[arg(short, long)]
    pub output_dir: Option<PathBuf>,
    /// Fail on violated gain bounds and missed settling bounds.
    #[arg(long)]
    pub strict: bool,
    /// Overrides such as `scenario=encirclement`, `c=6`, `graph.kind=complete`.
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate, simulate and write trajectory and summary files.
    Run(Common),
    /// One run per value of a parameter, merged into sweep.csv.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// One of T_m, c, p, eta.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
        /// Worker threads for the sub-runs (0 = all cores).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Print the curvature constants and every gain bound; no simulation.
    Validate(Common),
    /// Print the centralized optimum for a scenario.
    Oracle(Common),
    /// List built-in scenarios.
    List,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Validation(_) | Error::Connectivity(_) => 2,
        Error::Parameter(_)
        | Error::Assumption(_)
        | Error::Convexity(_)
        | Error::Derivative { .. } => 3,
        Error::Divergence { .. } | Error::SingularHessian { .. } | Error::Numerical(_) => 4,
        Error::Io(_) | Error::Csv(_) => 1,
    }
}

/// Failure with a process exit status.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: exit_code(&e),
            message: e.to_string(),
        }
    }
}

fn load(common: &Common) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(common.config.as_deref(), &common.overrides)?;
    if common.strict {
        cfg.overrides.strict = Some(true);
    }
    Ok(cfg)
}

/// Execute a parsed command, writing human-readable output to `out`.
pub fn execute(cli: Cli, out: &mut dyn Write) -> std::result::Result<(), Failure> {
    match cli.command {
        Command::Run(common) => cmd_run(&common, out),
        Command::Sweep {
            common,
            param,
            values,
            jobs,
        } => cmd_sweep(&common, &param, &values, jobs, out),
        Command::Validate(common) => cmd_validate(&common, out),
        Command::Oracle(common) => cmd_oracle(&common, out),
        Command::List => {
            for (name, desc) in BUILTIN_SCENARIOS {
                writeln!(out, "{name:<14} {desc}").map_err(Error::from)?;
            }
            Ok(())
        }
    }
}

/// Parse `args` (including the program name) and run; returns the exit status.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{e}");
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli, out) {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn write_outputs(dir: &Path, cfg: &RunConfig, output: &RunOutput) -> Result<()> {
    fs::create_dir_all(dir)?;
    output
        .trajectory
        .write_csv(BufWriter::new(fs::File::create(
            dir.join("trajectory.csv"),
        )?))?;
    fs::write(dir.join("summary.txt"), output.summary.to_text())?;
    let json = serde_json::to_string_pretty(&output.summary)
        .map_err(|e| Error::Config(format!("cannot serialize summary: {e}")))?;
    fs::write(dir.join("summary.json"), json + "\n")?;
    fs::write(dir.join("validation.txt"), output.report.to_text())?;
    fs::write(dir.join("config.toml"), cfg.to_toml()?)?;
    Ok(())
}

fn cmd_run(common: &Common, out: &mut dyn Write) -> std::result::Result<(), Failure> {
    let cfg = load(common)?;
    let sc = cfg.build_scenario()?;
    let dir = cfg.resolve_output_dir(common.output_dir.as_deref());
    let started = Instant::now();
    let output = sim::run(&sc, cfg.strict())?;
    let elapsed = started.elapsed().as_secs_f64();
    write_outputs(&dir, &cfg, &output)?;
    let io = |e: io::Error| Failure::from(Error::from(e));
    write!(out, "{}", output.report.to_text()).map_err(io)?;
    write!(out, "{}", output.summary.to_text()).map_err(io)?;
    writeln!(out, "wall_clock_s = {elapsed:.3}").map_err(io)?;
    writeln!(out, "output_dir = {}", dir.display()).map_err(io)?;
    if cfg.strict() && !output.summary.within_tm {
        return Err(Failure {
            code: 5,
            message: format!(
                "settle_time {:?} exceeds T_m = {} at tol {}",
                output.summary.settle_time, sc.params.t_m, sc.settle_tol
            ),
        });
    }
    Ok(())
}

/// Parameters the sweep accepts, in canonical spelling.
pub fn sweep_param(name: &str) -> Option<&'static str> {
    match name {
        "T_m" | "t_m" | "tm" => Some("t_m"),
        "c" => Some("c"),
        "p" => Some("p"),
        "eta" => Some("eta"),
        _ => None,
    }
}

/// Scenario for one sweep value. `T_m` changes rescale `t_end`, and shrink
/// the step so that `step / T_m` never exceeds the base ratio: the dynamics
/// are invariant under `t -> t·T_m'/T_m`, so this keeps Euler accuracy fixed.
pub fn sweep_scenario(cfg: &RunConfig, param: &str, value: f64) -> Result<Scenario> {
    let base = cfg.build_scenario()?;
    let mut cfg = cfg.clone();
    match param {
        "t_m" => {
            let ratio = value / base.params.t_m;
            cfg.overrides.t_m = Some(value);
            cfg.overrides.t_end = Some(base.t_end * ratio);
            cfg.overrides.step = Some(base.step * ratio.min(1.0));
        }
        "c" => cfg.overrides.c = Some(value),
        "p" => cfg.overrides.p = Some(value),
        "eta" => cfg.overrides.eta = Some(value),
        other => return Err(Error::Config(format!("cannot sweep '{other}'"))),
    }
    cfg.build_scenario()
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub settle_time: Option<f64>,
    pub zgs_time: Option<f64>,
    pub within_tm: bool,
    pub t_m: f64,
    pub max_step_diag: f64,
}

/// Run every sweep value (in parallel) and write per-run folders plus merged CSVs.
pub fn sweep(
    cfg: &RunConfig,
    param: &str,
    values: &[f64],
    jobs: usize,
    dir: &Path,
) -> std::result::Result<Vec<SweepRow>, Failure> {
    if values.is_empty() {
        return Err(Failure {
            code: 2,
            message: "sweep needs at least one value".into(),
        });
    }
    let param = sweep_param(param).ok_or_else(|| Failure {
        code: 2,
        message: format!("cannot sweep '{param}'; expected one of T_m, c, p, eta"),
    })?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Failure {
            code: 1,
            message: format!("cannot start workers: {e}"),
        })?;
    let results: Vec<std::result::Result<(Scenario, RunOutput), Failure>> = pool.install(|| {
        values
            .par_iter()
            .map(|&v| {
                let named = |e: Error| Failure {
                    code: exit_code(&e),
                    message: format!("{param} = {v}: {e}"),
                };
                let sc = sweep_scenario(cfg, param, v).map_err(named)?;
                let output = sim::run(&sc, cfg.strict()).map_err(named)?;
                Ok((sc, output))
            })
            .collect()
    });
    let runs = results
        .into_iter()
        .collect::<std::result::Result<Vec<_>, _>>()?;

    fs::create_dir_all(dir).map_err(Error::from)?;
    let mut series = csv::Writer::from_path(dir.join("sweep.csv")).map_err(Error::from)?;
    series
        .write_record(["param", "value", "t", "consensus_err", "dist_to_x_star"])
        .map_err(Error::from)?;
    let mut rows = Vec::new();
    for (&v, (sc, output)) in values.iter().zip(&runs) {
        let sub = dir.join(format!("{param}_{v}"));
        let mut sub_cfg = cfg.clone();
        sub_cfg.overrides.t_m = Some(sc.params.t_m);
        sub_cfg.overrides.c = Some(sc.params.c);
        sub_cfg.overrides.p = Some(sc.params.p);
        sub_cfg.overrides.eta = Some(sc.params.eta);
        sub_cfg.overrides.step = Some(sc.step);
        sub_cfg.overrides.t_end = Some(sc.t_end);
        write_outputs(&sub, &sub_cfg, output)?;
        let traj = &output.trajectory;
        let dist = sc
            .reference_fn()?
            .map(|r| traj.distance_series(r.as_ref()))
            .unwrap_or_else(|| vec![f64::NAN; traj.len()]);
        for ((&t, &err), &d) in traj.times.iter().zip(&traj.consensus_err).zip(&dist) {
            series
                .write_record([
                    param.to_string(),
                    v.to_string(),
                    fmt17(t),
                    fmt17(err),
                    fmt17(d),
                ])
                .map_err(Error::from)?;
        }
        rows.push(SweepRow {
            value: v,
            settle_time: output.summary.settle_time,
            zgs_time: output.summary.zgs_time,
            within_tm: output.summary.within_tm,
            t_m: sc.params.t_m,
            max_step_diag: output.summary.max_step_diag,
        });
    }
    series.flush().map_err(Error::from)?;
    let mut table = csv::Writer::from_path(dir.join("sweep_summary.csv")).map_err(Error::from)?;
    table
        .write_record([
            "param",
            "value",
            "t_m",
            "settle_time",
            "zgs_time",
            "within_tm",
            "max_step_diag",
        ])
        .map_err(Error::from)?;
    let opt = |v: Option<f64>| v.map_or(String::new(), fmt17);
    for r in &rows {
        table
            .write_record([
                param.to_string(),
                r.value.to_string(),
                fmt17(r.t_m),
                opt(r.settle_time),
                opt(r.zgs_time),
                r.within_tm.to_string(),
                fmt17(r.max_step_diag),
            ])
            .map_err(Error::from)?;
    }
    table.flush().map_err(Error::from)?;
    Ok(rows)
}

fn cmd_sweep(
    common: &Common,
    param: &str,
    values: &[f64],
    jobs: usize,
    out: &mut dyn Write,
) -> std::result::Result<(), Failure> {
    let cfg = load(common)?;
    let dir = cfg.resolve_output_dir(common.output_dir.as_deref());
    let rows = sweep(&cfg, param, values, jobs, &dir)?;
    let io = |e: io::Error| Failure::from(Error::from(e));
    writeln!(
        out,
        "{:>10} {:>8} {:>12} {:>12} {:>10}",
        "value", "T_m", "settle_time", "zgs_time", "within_Tm"
    )
    .map_err(io)?;
    for r in &rows {
        let opt = |v: Option<f64>| v.map_or("none".to_string(), |x| format!("{x:.4}"));
        writeln!(
            out,
            "{:>10} {:>8} {:>12} {:>12} {:>10}",
            r.value,
            r.t_m,
            opt(r.settle_time),
            opt(r.zgs_time),
            r.within_tm
        )
        .map_err(io)?;
    }
    writeln!(out, "output_dir = {}", dir.display()).map_err(io)?;
    if cfg.strict() {
        if let Some(r) = rows.iter().find(|r| !r.within_tm) {
            return Err(Failure {
                code: 5,
                message: format!(
                    "value {} missed its settling bound T_m = {}",
                    r.value, r.t_m
                ),
            });
        }
    }
    Ok(())
}

fn cmd_validate(common: &Common, out: &mut dyn Write) -> std::result::Result<(), Failure> {
    let cfg = load(common)?;
    let sc = cfg.build_scenario()?;
    let report = sc.validation_report()?;
    let io = |e: io::Error| Failure::from(Error::from(e));
    writeln!(out, "scenario = {}", sc.name).map_err(io)?;
    for seg in sc.schedule.segments() {
        let sp = spectrum(&seg.topology)?;
        writeln!(
            out,
            "segment t >= {}: lambda2 = {:.6}, lambdaN = {:.6}",
            seg.start, sp.lambda2, sp.lambda_n
        )
        .map_err(io)?;
    }
    writeln!(
        out,
        "domain = {:?} .. {:?}, grid = {}",
        sc.domain.lower, sc.domain.upper, sc.grid
    )
    .map_err(io)?;
    write!(out, "{}", report.to_text()).map_err(io)?;
    for c in &report.checks {
        writeln!(out, "minimal {} = {:.6}", c.name, c.required).map_err(io)?;
    }
    report.enforce(cfg.strict())?;
    Ok(())
}

fn cmd_oracle(common: &Common, out: &mut dyn Write) -> std::result::Result<(), Failure> {
    let cfg = load(common)?;
    let sc = cfg.build_scenario()?;
    let io = |e: io::Error| Failure::from(Error::from(e));
    writeln!(out, "scenario = {}", sc.name).map_err(io)?;
    if sc.time_varying() {
        let reference = sc.reference_fn()?;
        let mut t = 0.0;
        while t <= sc.t_end + 1e-12 {
            let x = match &reference {
                Some(r) => r(t),
                None => crate::oracle::centralized_minimize(&sc.costs, &sc.x0[0], t)?.point(),
            };
            writeln!(out, "x_star({t:.2}) = {:?}", x.as_slice()).map_err(io)?;
            t += 1.0;
        }
    } else {
        let sol = sc.oracle()?;
        writeln!(out, "x_star = {:?}", sol.x_star).map_err(io)?;
        writeln!(out, "residual = {:.3e}", sol.residual).map_err(io)?;
        writeln!(out, "iterations = {}", sol.iterations).map_err(io)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costs::CostFunction;

    #[test]
    fn bare_and_dotted_overrides() {
        let cfg = RunConfig::parse(
            "scenario = \"numerical_A\"\n[overrides]\nc = 4.0\n",
            &[
                "p=0.25".into(),
                "graph.kind=complete".into(),
                "graph.n=6".into(),
                "boundary_layer=true".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.overrides.c, Some(4.0));
        assert_eq!(cfg.overrides.p, Some(0.25));
        assert_eq!(cfg.overrides.boundary_layer, Some(true));
        assert_eq!(cfg.graph, Some(GraphSpec::Complete { n: 6 }));
    }

    #[test]
    fn round_trip() {
        let cfg = RunConfig {
            scenario: "scale_60".into(),
            output_dir: Some("out/x".into()),
            overrides: Overrides {
                variant: Some(Variant::ZgsStatic),
                eta: Some(0.4),
                t_m: Some(2.0),
                seed: Some(9),
                strict: Some(true),
                ..Default::default()
            },
            graph: Some(GraphSpec::Edges {
                n: 3,
                edges: vec![(0, 1, 1.0), (1, 2, 0.5)],
            }),
            costs: Some(CostsSpec::Quadratic {
                terms: vec![QuadraticSpec {
                    q: vec![vec![2.0, 0.0], vec![0.0, 1.0]],
                    b: vec![0.1, -0.2],
                }],
            }),
            x0: Some(vec![vec![1.0, 2.0]]),
        };
        let text = cfg.to_toml().unwrap();
        assert_eq!(RunConfig::parse(&text, &[]).unwrap(), cfg);
    }

    #[test]
    fn parse_errors_carry_a_location() {
        let err = RunConfig::parse("scenario = \n", &[]).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(err.to_string().contains("line 1"), "{err}");
    }

    #[test]
    fn unknown_override_is_rejected() {
        assert!(matches!(
            RunConfig::parse("", &["gamma=3".into()]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn aliases() {
        let cfg = RunConfig::parse("", &["T_m=4".into(), "strict_mode=true".into()]).unwrap();
        assert_eq!(cfg.overrides.t_m, Some(4.0));
        assert!(cfg.strict());
    }

    #[test]
    fn inline_graph_disconnected() {
        let cfg = RunConfig::parse(
            "[graph]\nkind = \"edges\"\nn = 6\nedges = [[0,1,1.0],[1,2,1.0],[2,0,1.0],[3,4,1.0],[4,5,1.0],[5,3,1.0]]\n",
            &[],
        )
        .unwrap();
        let err = cfg.build_scenario().unwrap_err();
        assert!(matches!(err, Error::Connectivity(_)));
        assert_eq!(exit_code(&err), 2);
    }

    #[test]
    fn sweep_t_m_rescales_the_clock() {
        let cfg = RunConfig::default();
        let sc = sweep_scenario(&cfg, "t_m", 1.0).unwrap();
        assert_eq!(sc.params.t_m, 1.0);
        assert!((sc.t_end - 1.25).abs() < 1e-12);
        assert!((sc.step - 5e-4).abs() < 1e-15);
        let sc = sweep_scenario(&cfg, "t_m", 4.0).unwrap();
        assert!((sc.t_end - 5.0).abs() < 1e-12);
        assert_eq!(sc.step, 1e-3);
    }

    #[test]
    fn suite_a_tiling() {
        let costs = CostsSpec::SuiteA { copies: 10 }.build().unwrap();
        assert_eq!(costs.len(), 60);
        assert_eq!(costs[15].name(), SuiteA::F2.name());
    }
}
