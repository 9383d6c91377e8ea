//! Command-line front end: `verify`, `sweep` and `graph` over a JSON
//! manifest.

pub mod manifest;

use std::ffi::OsString;
use std::fmt::{self, Write as _};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use num_rational::BigRational;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::engines::{Policy, ResultValue};
use crate::num;
use crate::worldmodel::{
    build_dependency_graph, compute_sccs, verify_with, Method, PolicyRecord, ResolvedParam, SccDiagnostic,
    VerifyOptions, WorldError, WorldModel,
};
pub use manifest::{parse_assignment, Manifest, QuerySpec, SweepAxis};

/// Environment variable capping sweep parallelism.
pub const THREADS_ENV: &str = "UMBRA_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {detail}")]
    Io { path: String, detail: String },
    #[error("invalid manifest {path}:\n  {}", errors.join("\n  "))]
    Manifest { path: String, errors: Vec<String> },
    #[error(transparent)]
    Verify(#[from] WorldError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Verify(_) => 2,
            _ => 1,
        }
    }
}

/// Settings shared by `verify` and `sweep`.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// `name=value` or `model.name=value` assignments.
    pub overrides: Vec<(String, BigRational)>,
    pub tolerance: Option<f64>,
    pub max_states: Option<usize>,
    pub method: Method,
}

impl RunOptions {
    pub fn verify_options(&self) -> VerifyOptions {
        let mut o = VerifyOptions { method: self.method, ..VerifyOptions::default() };
        if let Some(t) = self.tolerance {
            o = o.with_tolerance(t);
        }
        if let Some(n) = self.max_states {
            o.build.max_states = n;
        }
        o
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRecord {
    pub requested: Requested,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<ResultValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub policy: Option<Policy>,
    pub resolved: Vec<ResolvedParam>,
    pub sccs: Vec<SccDiagnostic>,
    pub policies: Vec<PolicyRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Requested {
    pub model: String,
    pub property: String,
}

impl ResultRecord {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("record serializes")
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

impl fmt::Display for ResultRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "model     {}", self.requested.model)?;
        writeln!(f, "property  {}", self.requested.property)?;
        match (&self.value, &self.error) {
            (Some(v), _) => writeln!(f, "value     {v}")?,
            (None, Some(e)) => writeln!(f, "error     {e}")?,
            (None, None) => {}
        }
        if let Some(p) = &self.policy {
            writeln!(f, "policy    {}", policy_text(p))?;
        }
        if !self.resolved.is_empty() {
            writeln!(f, "parameters")?;
            let width = self.resolved.iter().map(|r| r.model.len() + r.param.len() + 1).max().unwrap_or(0);
            for r in &self.resolved {
                let name = format!("{}.{}", r.model, r.param);
                let source = serde_json::to_value(r.source).expect("serializes");
                writeln!(f, "  {name:<width$}  {:<22}  {}", r.value, source.as_str().unwrap_or_default())?;
            }
        }
        for s in &self.sccs {
            let method = serde_json::to_value(s.method).expect("serializes");
            writeln!(
                f,
                "cycle     {{{}}} by {}: {} iterations, residual {:e}",
                s.models.join(", "),
                method.as_str().unwrap_or_default(),
                s.iterations,
                s.residual
            )?;
        }
        write!(f, "time      {:.3} s", self.duration_s)
    }
}

fn policy_text(p: &Policy) -> String {
    let map = match p {
        Policy::State(m) | Policy::Observation(m) => m,
    };
    map.iter().filter(|(_, v)| !v.is_empty()).map(|(k, v)| format!("{k} -> {v}")).collect::<Vec<_>>().join(", ")
}

/// Verifies `query` against an already validated world model. Verification
/// failures are reported inside the record.
pub fn verify_record(u: &WorldModel, query: &QuerySpec, options: &VerifyOptions) -> ResultRecord {
    let start = Instant::now();
    let requested = Requested { model: query.model.clone(), property: query.property.clone() };
    match verify_with(u, &query.model, &query.property, options) {
        Ok(r) => ResultRecord {
            requested,
            value: Some(r.result.value),
            policy: r.result.policy,
            resolved: r.resolved,
            sccs: r.sccs,
            policies: r.policies,
            error: None,
            duration_s: start.elapsed().as_secs_f64(),
        },
        Err(e) => ResultRecord {
            requested,
            value: None,
            policy: None,
            resolved: Vec::new(),
            sccs: Vec::new(),
            policies: Vec::new(),
            error: Some(e.to_string()),
            duration_s: start.elapsed().as_secs_f64(),
        },
    }
}

fn load(path: &Path, options: &RunOptions) -> Result<(Manifest, WorldModel), CliError> {
    let m = Manifest::load(path)?;
    let u = m.world_model()?;
    let u = if options.overrides.is_empty() { u } else { u.with_overrides(&options.overrides).map_err(usage)? };
    Ok((m, u))
}

fn usage(e: WorldError) -> CliError {
    match e {
        WorldError::Invalid(errors) => CliError::Usage(errors.join("\n")),
        other => CliError::Usage(other.to_string()),
    }
}

/// Runs the manifest's query, or `query` when given.
pub fn cmd_verify(path: &Path, query: Option<QuerySpec>, options: &RunOptions) -> Result<ResultRecord, CliError> {
    let (m, u) = load(path, options)?;
    let query = query
        .or(m.verify)
        .ok_or_else(|| CliError::Usage("no query: the manifest has no `verify` entry and none was given".into()))?;
    Ok(verify_record(&u, &query, &options.verify_options()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub point: Vec<BigRational>,
    pub value: Option<ResultValue>,
    pub duration_s: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    /// Swept targets, as `model.param` or bare names.
    pub columns: Vec<String>,
    /// One row per grid point, the last axis varying fastest.
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = self.columns.clone();
        header.extend(["result".to_string(), "duration_s".to_string(), "error".to_string()]);
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec: Vec<String> = row.point.iter().map(point_text).collect();
            rec.push(row.value.map(|v| v.to_string()).unwrap_or_default());
            rec.push(format!("{:.6}", row.duration_s));
            rec.push(row.error.clone().unwrap_or_default());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("utf-8")
    }

    pub fn values(&self) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r.value.and_then(ResultValue::as_f64)).collect()
    }
}

fn point_text(v: &BigRational) -> String {
    num::format_decimal(v).unwrap_or_else(|| num::canonical_text(v))
}

/// Cartesian product of the axes, last axis fastest.
pub fn grid(axes: &[Vec<BigRational>]) -> Vec<Vec<BigRational>> {
    axes.iter().fold(vec![Vec::new()], |acc, axis| {
        acc.iter()
            .flat_map(|prefix| {
                axis.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(v.clone());
                    p
                })
            })
            .collect()
    })
}

/// Parses `target=lo:step:hi` or `target=v1,v2,...`.
pub fn parse_axis(text: &str) -> Result<SweepAxis, String> {
    let (target, spec) = text.split_once('=').ok_or_else(|| format!("`{text}` is not target=values"))?;
    let (model, param) = match target.trim().split_once('.') {
        Some((m, p)) => (Some(m.to_string()), p.to_string()),
        None => (None, target.trim().to_string()),
    };
    let parse = |t: &str| num::parse_rational(t.trim()).ok_or_else(|| format!("`{t}` is not a number"));
    let parts: Vec<&str> = spec.split(':').collect();
    let values = match parts.as_slice() {
        [lo, step, hi] => manifest::range_points(&parse(lo)?, &parse(hi)?, &parse(step)?)?,
        [list] => list.split(',').map(parse).collect::<Result<_, _>>()?,
        _ => return Err(format!("`{spec}` is neither lo:step:hi nor a comma list")),
    };
    Ok(SweepAxis {
        model,
        param,
        values: Some(values.into_iter().map(manifest::Number).collect()),
        range: None,
        step: None,
    })
}

/// Verifies the query once per grid point. `axes` replaces the manifest's
/// sweeps when non-empty. Points run in parallel, capped by
/// [`THREADS_ENV`]; rows stay in grid order.
pub fn cmd_sweep(path: &Path, axes: &[SweepAxis], query: Option<QuerySpec>, options: &RunOptions) -> Result<SweepTable, CliError> {
    let (m, u) = load(path, options)?;
    let query = query.or(m.verify.clone()).ok_or_else(|| CliError::Usage("no query to sweep".into()))?;
    let axes: Vec<SweepAxis> = if axes.is_empty() { m.sweeps.clone() } else { axes.to_vec() };
    if axes.is_empty() {
        return Err(CliError::Usage("no sweep axes: give --grid or add `sweeps` to the manifest".into()));
    }
    let columns: Vec<String> = axes.iter().map(SweepAxis::target).collect();
    let values: Vec<Vec<BigRational>> = axes.iter().map(SweepAxis::points).collect::<Result<_, _>>().map_err(CliError::Usage)?;
    let points = grid(&values);
    let vopts = options.verify_options();
    let run = |point: &Vec<BigRational>| -> SweepRow {
        let start = Instant::now();
        let assignments: Vec<(String, BigRational)> = columns.iter().cloned().zip(point.iter().cloned()).collect();
        let outcome = u
            .with_overrides(&assignments)
            .map_err(|e| e.to_string())
            .and_then(|v| verify_with(&v, &query.model, &query.property, &vopts).map_err(|e| e.to_string()));
        let (value, error) = match outcome {
            Ok(r) => (Some(r.result.value), None),
            Err(e) => (None, Some(e)),
        };
        SweepRow { point: point.clone(), value, duration_s: start.elapsed().as_secs_f64(), error }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_cap())
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let rows = pool.install(|| points.par_iter().map(run).collect());
    Ok(SweepTable { columns, rows })
}

fn thread_cap() -> usize {
    std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse().ok()).filter(|&n| n > 0).unwrap_or(0)
}

/// Graphviz rendering of the dependency graph, one cluster per strongly
/// connected component.
pub fn dependency_dot(u: &WorldModel) -> String {
    let g = build_dependency_graph(u);
    let part = compute_sccs(&g);
    let mut out = String::from("digraph dependencies {\n  rankdir=LR;\n  node [shape=box];\n");
    for (c, members) in part.sccs.iter().enumerate() {
        let _ = writeln!(out, "  subgraph cluster_{c} {{");
        let _ = writeln!(out, "    label=\"level {}\";", part.level[members[0]]);
        for &v in members {
            let m = &u.models()[v];
            let _ = writeln!(out, "    \"{}\" [label=\"{}\\n{}\"];", m.id, m.id, m.kind());
        }
        out.push_str("  }\n");
    }
    for &(from, to) in &g.edges {
        let label = g.labels.get(&(from, to)).map(|l| l.join(", ")).unwrap_or_default();
        let _ = writeln!(out, "  \"{}\" -> \"{}\" [label=\"{label}\"];", g.vertices[from], g.vertices[to]);
    }
    out.push_str("}\n");
    out
}

pub fn cmd_graph(path: &Path) -> Result<String, CliError> {
    let (_, u) = load(path, &RunOptions::default())?;
    Ok(dependency_dot(&u))
}

#[derive(Debug, Parser)]
#[command(name = "umbra", version, about = "Verify interdependent stochastic models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Auto,
    Newton,
    Powell,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Auto => Method::Auto,
            MethodArg::Newton => Method::Newton,
            MethodArg::Powell => Method::Powell,
        }
    }
}

#[derive(Debug, clap::Args)]
struct Common {
    /// World-model manifest (JSON).
    manifest: PathBuf,
    /// Fix a constant: `name=value` or `model.name=value`. Repeatable.
    #[arg(long = "set", value_name = "NAME=VALUE", value_parser = parse_assignment)]
    set: Vec<(String, BigRational)>,
    /// Solver tolerance for cyclic dependencies.
    #[arg(long)]
    tol: Option<f64>,
    /// Largest state space built per model.
    #[arg(long = "max-states")]
    max_states: Option<usize>,
    /// Solver for cyclic dependencies.
    #[arg(long, value_enum, default_value = "auto")]
    method: MethodArg,
    /// Model to query instead of the manifest's `verify.model`.
    #[arg(long, requires = "property")]
    model: Option<String>,
    /// Property to check instead of the manifest's `verify.property`.
    #[arg(long, requires = "model")]
    property: Option<String>,
    /// Output file.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn options(&self) -> RunOptions {
        RunOptions { overrides: self.set.clone(), tolerance: self.tol, max_states: self.max_states, method: self.method.into() }
    }

    fn query(&self) -> Option<QuerySpec> {
        Some(QuerySpec { model: self.model.clone()?, property: self.property.clone()? })
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Verify the query; writes a JSON record to --out.
    Verify(Common),
    /// Verify the query over a parameter grid; writes CSV to --out or stdout.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Axis `target=lo:step:hi` or `target=v1,v2`. Repeatable; replaces
        /// the manifest's sweeps.
        #[arg(long = "grid", value_parser = parse_axis)]
        grid: Vec<SweepAxis>,
    },
    /// Print the dependency graph as DOT.
    Graph {
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Io { path: path.display().to_string(), detail: e.to_string() })
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code: 0 on success, 1 on usage errors, 2 when verification
/// fails.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(command: Command) -> Result<i32, CliError> {
    match command {
        Command::Verify(c) => {
            let record = cmd_verify(&c.manifest, c.query(), &c.options())?;
            println!("{record}");
            if let Some(out) = &c.out {
                write_file(out, &(record.to_json() + "\n"))?;
            }
            Ok(if record.is_ok() { 0 } else { 2 })
        }
        Command::Sweep { common, grid } => {
            let table = cmd_sweep(&common.manifest, &grid, common.query(), &common.options())?;
            let csv = table.to_csv();
            match &common.out {
                Some(out) => write_file(out, &csv)?,
                None => print!("{csv}"),
            }
            let failed = table.rows.iter().filter(|r| r.error.is_some()).count();
            if failed > 0 {
                eprintln!("{failed} of {} points failed", table.rows.len());
            }
            Ok(0)
        }
        Command::Graph { manifest, out } => {
            let dot = cmd_graph(&manifest)?;
            match out {
                Some(p) => write_file(&p, &dot)?,
                None => print!("{dot}"),
            }
            Ok(0)
        }
    }
}
