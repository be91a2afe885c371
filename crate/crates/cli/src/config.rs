//! Run-configuration schema and resolution.
//!
//! A run is described by one JSON document. All times are microseconds, which
//! the field names spell out (`t_us`, `t_c_us`, `epsilon_us`). Exactly one of
//! `workload.t_us` (explicit per-operation list) and `workload.t_uniform_us`
//! (one duration shared by all n operations) must be given.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use lockmodel_core::{
    DataLayout, OperationProfile, PatternCase, SimOptions, SolverOptions, WorkloadSpec,
};

/// A configuration problem: unreadable file, schema violation, or
/// inconsistent field combination. Always maps to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_err<T>(message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(message.into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub workload: WorkloadConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadConfig {
    /// Concurrent threads.
    pub m: u32,
    /// Shared data items.
    pub d: usize,
    /// Lock-acquiring operations per transaction.
    pub n: usize,
    /// Per-operation residence times in microseconds (length n).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_us: Option<Vec<f64>>,
    /// One residence time shared by all n operations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_uniform_us: Option<f64>,
    /// Commit residence time in microseconds.
    pub t_c_us: f64,
    pub case: CaseTag,
    /// Threads walking the tables first-to-last (tables-mixed-order only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_forward: Option<u32>,
    /// Threads walking the tables last-to-first (tables-mixed-order only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_reverse: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CaseTag {
    TablesMixedOrder,
    TablesSameOrder,
    ItemsRandom,
    ItemsSorted,
}

impl CaseTag {
    pub fn label(&self) -> &'static str {
        match self {
            CaseTag::TablesMixedOrder => "tables-mixed-order",
            CaseTag::TablesSameOrder => "tables-same-order",
            CaseTag::ItemsRandom => "items-random",
            CaseTag::ItemsSorted => "items-sorted",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_epsilon")]
    pub epsilon_us: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: u32,
    #[serde(default = "default_damping")]
    pub damping: f64,
    #[serde(default = "default_clamp")]
    pub clamp: f64,
}

fn default_epsilon() -> f64 {
    1e-3
}

fn default_max_iterations() -> u32 {
    10_000
}

fn default_damping() -> f64 {
    1.0
}

fn default_clamp() -> f64 {
    1.0 - 1e-9
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon_us: default_epsilon(),
            max_iterations: default_max_iterations(),
            damping: default_damping(),
            clamp: default_clamp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_target_commits")]
    pub target_commits: u64,
    #[serde(default = "default_warmup_commits")]
    pub warmup_commits: u64,
    #[serde(default = "default_true")]
    pub redraw_on_restart: bool,
    /// Write a per-lock-event trace.csv alongside the other reports.
    #[serde(default)]
    pub trace: bool,
}

fn default_target_commits() -> u64 {
    100_000
}

fn default_warmup_commits() -> u64 {
    10_000
}

fn default_true() -> bool {
    true
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            target_commits: default_target_commits(),
            warmup_commits: default_warmup_commits(),
            redraw_on_restart: true,
            trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: SweepParameter,
    pub values: Vec<u64>,
    /// Cases to evaluate at every sweep point; defaults to the workload case.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cases: Option<Vec<CaseTag>>,
    /// Also simulate each point and fill the R_sim column.
    #[serde(default)]
    pub simulate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParameter {
    M,
    N,
    D,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Both,
}

impl Format {
    pub fn wants_csv(&self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }

    pub fn wants_json(&self) -> bool {
        matches!(self, Format::Json | Format::Both)
    }
}

/// Reads and parses a configuration file; parse errors name the failing field
/// path.
pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
    let mut de = serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(&mut de)
        .map_err(|e| ConfigError(format!("invalid config {}: {e}", path.display())))
}

/// Expands the workload section into a validated-shape model spec. Cross-field
/// invariants (divisibility, thread splits) are left to `validate_spec`.
pub fn build_spec(workload: &WorkloadConfig) -> Result<WorkloadSpec, ConfigError> {
    let residence = match (&workload.t_us, workload.t_uniform_us) {
        (Some(list), None) => {
            if list.len() != workload.n {
                return config_err(format!(
                    "workload.t_us has {} entries but workload.n is {}",
                    list.len(),
                    workload.n
                ));
            }
            list.clone()
        }
        (None, Some(each)) => vec![each; workload.n],
        (Some(_), Some(_)) => {
            return config_err("workload.t_us and workload.t_uniform_us are mutually exclusive")
        }
        (None, None) => {
            return config_err("one of workload.t_us or workload.t_uniform_us is required")
        }
    };

    let layout = DataLayout::new(workload.d, workload.n)
        .map_err(|e| ConfigError(format!("workload: {e}")))?;
    let profile = OperationProfile::new(residence, workload.t_c_us)
        .map_err(|e| ConfigError(format!("workload: {e}")))?;

    let pattern = match workload.case {
        CaseTag::TablesMixedOrder => {
            let forward = workload.m_forward.ok_or(ConfigError(
                "workload.m_forward is required for case tables-mixed-order".into(),
            ))?;
            let reverse = workload.m_reverse.ok_or(ConfigError(
                "workload.m_reverse is required for case tables-mixed-order".into(),
            ))?;
            PatternCase::TablesMixedOrder {
                forward_threads: forward,
                reverse_threads: reverse,
            }
        }
        // m_forward/m_reverse are ignored for the single-class cases so one
        // base config can sweep across mixed and unmixed cases.
        CaseTag::TablesSameOrder => PatternCase::TablesSameOrder,
        CaseTag::ItemsRandom => PatternCase::ItemsRandom,
        CaseTag::ItemsSorted => PatternCase::ItemsSorted,
    };

    Ok(WorkloadSpec::new(workload.m, layout, profile, pattern))
}

pub fn build_solver_options(solver: &SolverConfig) -> SolverOptions {
    SolverOptions {
        epsilon_us: solver.epsilon_us,
        max_iterations: solver.max_iterations,
        damping: solver.damping,
        clamp: solver.clamp,
    }
}

pub fn build_sim_options(sim: &SimConfig, seed_override: Option<u64>) -> SimOptions {
    SimOptions {
        seed: seed_override.unwrap_or(sim.seed),
        target_commits: sim.target_commits,
        warmup_commits: sim.warmup_commits,
        redraw_on_restart: sim.redraw_on_restart,
    }
}

impl RunConfig {
    /// Provenance copy embedded in every report: seed and output overrides
    /// applied, uniform residence expanded to the explicit list.
    pub fn resolved(&self, seed_override: Option<u64>, out_dir: &Path, format: Format) -> Self {
        let mut resolved = self.clone();
        if let (None, Some(each)) = (&resolved.workload.t_us, resolved.workload.t_uniform_us) {
            resolved.workload.t_us = Some(vec![each; resolved.workload.n]);
            resolved.workload.t_uniform_us = None;
        }
        if let Some(seed) = seed_override {
            resolved.sim.seed = seed;
        }
        resolved.output = Some(OutputConfig {
            dir: Some(out_dir.to_path_buf()),
            format: Some(format),
        });
        resolved
    }
}
