//! Configuration loading and the solve / simulate / sweep / compare
//! workflows behind the `tangle-pap` binary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::error::Error;
use crate::mechanism::{
    fixed_linear_scheme, AgentType, AgentTypeSet, Assignment, LinearScheme, MechanismConfig,
};
use crate::outer_search::{solve_mechanism, MechanismSolution, SearchMode};
use crate::tangle_sim::{arrival_means, run, ArrivalModel, SimConfig, SimMetrics};

/// Agent counts swept when a configuration names none.
pub const DEFAULT_SWEEP: [u64; 4] = [100, 1_000, 10_000, 100_000];
pub const DEFAULT_AGENTS: u64 = 100;
pub const DEFAULT_HORIZON: u64 = 2000;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_SEEDS: u64 = 20;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("config validation error: {0}")]
    Validation(Error),

    #[error(transparent)]
    Solve(Error),

    #[error("cannot write output: {0}")]
    Output(std::io::Error),
}

impl CliError {
    /// 2 for configuration problems, 3 when no feasible mechanism exists.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } | CliError::Parse { .. } | CliError::Validation(_) => 2,
            CliError::Solve(Error::NoFeasibleMechanism { .. }) => 3,
            CliError::Solve(Error::Invalid { .. }) => 2,
            CliError::Solve(_) | CliError::Output(_) => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TypeEntry {
    pub x: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(default = "default_horizon")]
    pub horizon: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub arrival_model: ArrivalModel,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            horizon: DEFAULT_HORIZON,
            seed: DEFAULT_SEED,
            arrival_model: ArrivalModel::Poisson,
        }
    }
}

fn default_horizon() -> u64 {
    DEFAULT_HORIZON
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_agents() -> u64 {
    DEFAULT_AGENTS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineSection {
    #[serde(default = "default_slope")]
    pub slope: f64,
    #[serde(default)]
    pub intercept: f64,
}

fn default_slope() -> f64 {
    1.0
}

/// The JSON configuration file, as written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub types: Vec<TypeEntry>,
    pub max_difficulty: u32,
    pub alpha: f64,
    pub beta: f64,
    pub u0: f64,
    #[serde(rename = "N", default = "default_agents")]
    pub agents: u64,
    #[serde(rename = "sweep_N", default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Vec<u64>>,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BaselineSection>,
}

/// A validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mechanism: MechanismConfig,
    pub sim: SimSection,
    pub sweep: Option<Vec<u64>>,
    pub baseline: LinearScheme,
    pub file: ConfigFile,
}

impl RunConfig {
    /// Agent counts for solve, sweep and compare.
    pub fn sweep_or_default(&self) -> Vec<u64> {
        self.sweep.clone().unwrap_or_else(|| DEFAULT_SWEEP.to_vec())
    }

    /// Agent counts for simulate: the explicit sweep, else `N` alone.
    pub fn simulation_agents(&self) -> Vec<u64> {
        self.sweep
            .clone()
            .unwrap_or_else(|| vec![self.mechanism.agents()])
    }

    pub fn echo(&self) -> Value {
        serde_json::to_value(&self.file).expect("config serializes")
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let file: ConfigFile = serde_json::from_str(text).map_err(|e| CliError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    validate(file).map_err(CliError::Validation)
}

fn validate(file: ConfigFile) -> Result<RunConfig, Error> {
    let types = AgentTypeSet::new(
        file.types
            .iter()
            .map(|t| AgentType {
                power: t.x,
                fraction: t.p,
            })
            .collect(),
    )?;
    let mechanism = MechanismConfig::new(
        types,
        file.max_difficulty,
        file.alpha,
        file.beta,
        file.u0,
        file.agents,
    )?;
    if file.sim.horizon < 1 {
        return Err(Error::Invalid {
            what: "SimConfig",
            reason: "horizon must be at least 1".into(),
        });
    }
    if let Some(sweep) = &file.sweep {
        if sweep.is_empty() || sweep.contains(&0) {
            return Err(Error::Invalid {
                what: "sweep_N",
                reason: "sweep values must be a nonempty list of positive integers".into(),
            });
        }
    }
    let baseline = match &file.baseline {
        Some(b) => LinearScheme::new(b.slope, b.intercept)?,
        None => LinearScheme::default(),
    };
    Ok(RunConfig {
        mechanism,
        sim: file.sim.clone(),
        sweep: file.sweep.clone(),
        baseline,
        file,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Real(f64),
    Text(String),
    Missing,
}

impl Cell {
    pub fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Real(v) => format_real(*v),
            Cell::Text(s) => s.clone(),
            Cell::Missing => String::new(),
        }
    }

    pub fn json(&self) -> Value {
        match self {
            Cell::Int(v) => json!(v),
            Cell::Real(v) => {
                let rounded = round_sig6(*v);
                if rounded.is_finite() {
                    json!(rounded)
                } else {
                    json!(format_real(*v))
                }
            }
            Cell::Text(s) => json!(s),
            Cell::Missing => Value::Null,
        }
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(i64::from(v))
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Missing, Cell::Real)
    }
}

fn round_sig6(v: f64) -> f64 {
    if !v.is_finite() {
        return v;
    }
    format!("{v:.5e}").parse().unwrap_or(v)
}

/// `v` rounded to 6 significant digits, printed as the shortest string that
/// round-trips the rounded value.
pub fn format_real(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let r = round_sig6(v);
    if r == 0.0 {
        return "0".into();
    }
    format!("{r}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    /// Header, rows and the configuration that produced them.
    pub fn to_json(&self, config: &RunConfig) -> Value {
        json!({
            "config": config.echo(),
            "columns": self.header,
            "rows": self
                .rows
                .iter()
                .map(|r| r.iter().map(Cell::json).collect::<Vec<_>>())
                .collect::<Vec<_>>(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Scheme {
    /// The optimal truthful mechanism.
    #[default]
    Mechanism,
    /// Weight linear in self-selected difficulty.
    Baseline,
}

pub fn render(table: &Table, config: &RunConfig, format: OutputFormat) -> String {
    match format {
        OutputFormat::Csv => table.to_csv(),
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(&table.to_json(config)).expect("json");
            s.push('\n');
            s
        }
    }
}

fn mode(exhaustive: bool) -> SearchMode {
    if exhaustive {
        SearchMode::Exhaustive
    } else {
        SearchMode::Pruned
    }
}

fn solve_at(
    config: &RunConfig,
    agents: u64,
    exhaustive: bool,
) -> Result<(MechanismConfig, MechanismSolution), CliError> {
    let mechanism = config
        .mechanism
        .with_agents(agents)
        .map_err(CliError::Validation)?;
    let solution = solve_mechanism(&mechanism, mode(exhaustive)).map_err(CliError::Solve)?;
    Ok((mechanism, solution))
}

/// One row per (N, type): the optimal difficulty and weight.
pub fn cmd_solve(config: &RunConfig, exhaustive: bool) -> Result<Table, CliError> {
    let mut table = Table::new(&[
        "N",
        "type_index",
        "x",
        "p",
        "d",
        "w",
        "per_type_rate",
        "objective_value",
    ]);
    for agents in config.sweep_or_default() {
        let (mechanism, solution) = solve_at(config, agents, exhaustive)?;
        let rates = arrival_means(&mechanism, &solution.assignment);
        for (i, t) in mechanism.types().iter().enumerate() {
            table.push(vec![
                agents.into(),
                (i + 1).into(),
                t.power.into(),
                t.fraction.into(),
                solution.difficulty().levels()[i].into(),
                solution.weights().values()[i].into(),
                rates[i].into(),
                solution.objective_value.into(),
            ]);
        }
    }
    Ok(table)
}

fn assignment_for(
    config: &RunConfig,
    mechanism: &MechanismConfig,
    scheme: Scheme,
) -> Result<Assignment, CliError> {
    match scheme {
        Scheme::Mechanism => solve_mechanism(mechanism, SearchMode::Pruned)
            .map(|s| s.assignment)
            .map_err(CliError::Solve),
        Scheme::Baseline => {
            fixed_linear_scheme(mechanism, config.baseline).map_err(CliError::Validation)
        }
    }
}

fn simulate_seeds(
    config: &RunConfig,
    mechanism: &MechanismConfig,
    assignment: &Assignment,
    seeds: u64,
) -> Result<Vec<(u64, SimMetrics)>, CliError> {
    (0..seeds)
        .map(|k| {
            let seed = config.sim.seed.wrapping_add(k);
            let sim = SimConfig::new(
                config.sim.horizon,
                seed,
                config.sim.arrival_model,
                assignment.clone(),
                mechanism.clone(),
            )
            .map_err(CliError::Validation)?;
            Ok((seed, run(&sim)))
        })
        .collect()
}

/// One row per (N, seed, type) of approval-time metrics. Seeds are
/// `seed, seed + 1, ..., seed + seeds - 1`.
pub fn cmd_simulate(config: &RunConfig, seeds: u64, scheme: Scheme) -> Result<Table, CliError> {
    let mut table = Table::new(&[
        "N",
        "seed",
        "type_index",
        "created",
        "approved",
        "unapproved",
        "mean_approval_time",
    ]);
    for agents in config.simulation_agents() {
        let mechanism = config
            .mechanism
            .with_agents(agents)
            .map_err(CliError::Validation)?;
        let assignment = assignment_for(config, &mechanism, scheme)?;
        for (seed, metrics) in simulate_seeds(config, &mechanism, &assignment, seeds)? {
            for (i, t) in metrics.per_type.iter().enumerate() {
                table.push(vec![
                    agents.into(),
                    seed.into(),
                    (i + 1).into(),
                    t.created.into(),
                    t.approved.into(),
                    t.unapproved.into(),
                    t.mean_approval_time.into(),
                ]);
            }
        }
    }
    Ok(table)
}

/// Solve and simulate at every N of the sweep; approval times are averaged
/// over the seeds in which the type had at least one approval.
pub fn cmd_sweep(config: &RunConfig, seeds: u64, exhaustive: bool) -> Result<Table, CliError> {
    let mut table = Table::new(&[
        "N",
        "type_index",
        "x",
        "d",
        "w",
        "per_type_rate",
        "mean_approval_time",
        "runs_with_approvals",
        "unapproved_total",
    ]);
    for agents in config.sweep_or_default() {
        let (mechanism, solution) = solve_at(config, agents, exhaustive)?;
        let rates = arrival_means(&mechanism, &solution.assignment);
        let runs = simulate_seeds(config, &mechanism, &solution.assignment, seeds)?;
        for (i, t) in mechanism.types().iter().enumerate() {
            let means: Vec<f64> = runs
                .iter()
                .filter_map(|(_, m)| m.per_type[i].mean_approval_time)
                .collect();
            let unapproved: u64 = runs.iter().map(|(_, m)| m.per_type[i].unapproved).sum();
            let mean = (!means.is_empty()).then(|| means.iter().sum::<f64>() / means.len() as f64);
            table.push(vec![
                agents.into(),
                (i + 1).into(),
                t.power.into(),
                solution.difficulty().levels()[i].into(),
                solution.weights().values()[i].into(),
                rates[i].into(),
                mean.into(),
                means.len().into(),
                unapproved.into(),
            ]);
        }
    }
    Ok(table)
}

/// Mechanism and fixed-linear baseline side by side for every (N, type),
/// with the mechanism's weight-per-difficulty slope between consecutive
/// types.
pub fn cmd_compare(config: &RunConfig, exhaustive: bool) -> Result<Table, CliError> {
    let mut table = Table::new(&[
        "N",
        "type_index",
        "x",
        "d_mechanism",
        "w_mechanism",
        "d_baseline",
        "w_baseline",
        "w_baseline_relative",
        "mechanism_slope",
    ]);
    for agents in config.sweep_or_default() {
        let (mechanism, solution) = solve_at(config, agents, exhaustive)?;
        let baseline =
            fixed_linear_scheme(&mechanism, config.baseline).map_err(CliError::Validation)?;
        let relative = baseline.normalized_weights();
        let slopes = solution.assignment.weight_slopes();
        for (i, t) in mechanism.types().iter().enumerate() {
            let slope = if i == 0 { None } else { slopes[i - 1] };
            table.push(vec![
                agents.into(),
                (i + 1).into(),
                t.power.into(),
                solution.difficulty().levels()[i].into(),
                solution.weights().values()[i].into(),
                baseline.difficulty().levels()[i].into(),
                baseline.weights().values()[i].into(),
                relative[i].into(),
                slope.into(),
            ]);
        }
    }
    Ok(table)
}
