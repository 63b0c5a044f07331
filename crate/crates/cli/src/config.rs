//! Run configuration: one JSON document with every default filled in
//! before the run starts.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use vastop_core::mc::Scheme;
use vastop_core::model::presets;
use vastop_core::pde::PsorParams;
use vastop_core::region::RegionTolerance;
use vastop_core::surface::{Grid, RewardKind};
use vastop_core::{Scenario, VaError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config error at `{field}`: {message}")]
    Field { field: String, message: String },
}

impl ConfigError {
    fn field(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Field {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl From<VaError> for ConfigError {
    fn from(e: VaError) -> Self {
        match e {
            VaError::Config { field, message } => ConfigError::Field { field, message },
            other => ConfigError::field("", other.to_string()),
        }
    }
}

/// Tasks in the order they run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    #[serde(rename = "check-L")]
    CheckL,
    PriceLattice,
    PricePde,
    Regions,
    Boundary,
    Decompose,
    McVerify,
    PaperFig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "N", default = "default_n")]
    pub n_steps: usize,
    #[serde(rename = "M", default = "default_m")]
    pub m_nodes: usize,
    #[serde(default = "default_mult")]
    pub xmax_mult: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            n_steps: default_n(),
            m_nodes: default_m(),
            xmax_mult: default_mult(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    /// Step counts for the extrapolation; defaults to `[N/2, N, 2N]`.
    #[serde(default)]
    pub n_seq: Option<Vec<usize>>,
    #[serde(default)]
    pub reward: Option<RewardKind>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeConfig {
    #[serde(default)]
    pub theta: Option<f64>,
    #[serde(default)]
    pub rannacher_steps: Option<usize>,
    /// Defaults scale with `G`.
    #[serde(default)]
    pub psor: Option<PsorParams>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecomposeConfig {
    /// Residual flag level; defaults to `5e-3 G`.
    #[serde(default)]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_npaths")]
    pub npaths: usize,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            seed: default_seed(),
            npaths: default_npaths(),
            scheme: default_scheme(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub scenario: Scenario,
    pub tasks: Vec<Task>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub lattice: LatticeConfig,
    #[serde(default)]
    pub pde: PdeConfig,
    #[serde(default)]
    pub region: RegionTolerance,
    #[serde(default)]
    pub decompose: DecomposeConfig,
    #[serde(default)]
    pub mc: McConfig,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn default_n() -> usize {
    360
}

fn default_m() -> usize {
    401
}

fn default_mult() -> f64 {
    8.0
}

fn default_seed() -> u64 {
    20_240_601
}

fn default_npaths() -> usize {
    100_000
}

fn default_scheme() -> Scheme {
    Scheme::ExactLognormal
}

/// Command-line overrides applied before defaults are resolved.
#[derive(Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub n_steps: Option<usize>,
    pub m_nodes: Option<usize>,
}

/// Parses a config, reporting the path of the first offending field.
pub fn parse(text: &str) -> Result<Config, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let mut field = e.path().to_string();
        let inner = e.into_inner();
        let message = inner.to_string();
        // serde reports a missing field at its parent; name the field itself.
        if let Some(name) = message
            .strip_prefix("missing field `")
            .and_then(|rest| rest.split('`').next())
        {
            field = if field == "." { name.to_string() } else { format!("{field}.{name}") };
        }
        ConfigError::field(field, message)
    })
}

pub fn load(path: &Path, overrides: &Overrides) -> Result<Config, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut cfg = parse(&text)?;
    cfg.apply(overrides);
    cfg.resolve()?;
    Ok(cfg)
}

impl Config {
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(out) = &o.out {
            self.out = Some(out.clone());
        }
        if let Some(seed) = o.seed {
            self.mc.seed = seed;
        }
        if let Some(n) = o.n_steps {
            self.grid.n_steps = n;
        }
        if let Some(m) = o.m_nodes {
            self.grid.m_nodes = m;
        }
    }

    /// Fills every default, adds implied tasks and validates the result.
    pub fn resolve(&mut self) -> Result<(), ConfigError> {
        self.scenario.validate()?;
        if self.tasks.is_empty() {
            return Err(ConfigError::field("tasks", "need at least one task"));
        }
        let mut tasks = self.tasks.clone();
        let needs_surface = tasks
            .iter()
            .any(|t| matches!(t, Task::Regions | Task::Boundary | Task::Decompose | Task::McVerify));
        if needs_surface && !tasks.contains(&Task::PriceLattice) && !tasks.contains(&Task::PricePde) {
            tasks.push(Task::PricePde);
        }
        if tasks.iter().any(|t| matches!(t, Task::Decompose | Task::McVerify)) {
            tasks.push(Task::Boundary);
        }
        if tasks.contains(&Task::Boundary) {
            tasks.push(Task::Regions);
        }
        tasks.sort();
        tasks.dedup();
        self.tasks = tasks;

        let g = &self.grid;
        if g.n_steps < 2 {
            return Err(ConfigError::field("grid.N", "need at least two time steps"));
        }
        if g.m_nodes < 5 {
            return Err(ConfigError::field("grid.M", "need at least five state nodes"));
        }
        if !(g.xmax_mult.is_finite() && g.xmax_mult > 1.0) {
            return Err(ConfigError::field("grid.xmax_mult", "must exceed 1"));
        }
        let n = g.n_steps;
        let n_seq = self
            .lattice
            .n_seq
            .get_or_insert_with(|| if n.is_multiple_of(2) { vec![n / 2, n, 2 * n] } else { vec![n, 2 * n, 4 * n] });
        if n_seq.len() < 3 || n_seq.windows(2).any(|w| w[1] <= w[0]) || n_seq[0] < 2 {
            return Err(ConfigError::field(
                "lattice.n_seq",
                "need at least three strictly increasing step counts of at least 2",
            ));
        }
        self.lattice.reward.get_or_insert(RewardKind::Discontinuous);

        let guarantee = self.scenario.guarantee();
        self.pde.theta.get_or_insert(0.5);
        self.pde.rannacher_steps.get_or_insert(2);
        self.pde.psor.get_or_insert(PsorParams::for_guarantee(guarantee));
        let tol = *self.decompose.tolerance.get_or_insert(5e-3 * guarantee);
        if !(tol.is_finite() && tol > 0.0) {
            return Err(ConfigError::field("decompose.tolerance", "must be positive"));
        }
        if !(self.region.abs >= 0.0 && self.region.rel >= 0.0) {
            return Err(ConfigError::field("region", "tolerances must be non-negative"));
        }
        if self.mc.npaths < 2 {
            return Err(ConfigError::field("mc.npaths", "need at least two paths"));
        }
        if self.mc.scheme == Scheme::ExactLognormal && !self.scenario.fee.is_time_only() {
            return Err(ConfigError::field("mc.scheme", "exact-lognormal needs a time-only fee"));
        }
        self.out.get_or_insert_with(|| PathBuf::from("vastop-out"));

        // Grid checks that do not need a solve.
        let scn = &self.scenario;
        let mut breakpoints = scn.fee.breakpoints().to_vec();
        if self.tasks.contains(&Task::PaperFig) {
            breakpoints.extend(presets::fee_c1().breakpoints());
            breakpoints.extend(presets::fee_c2().breakpoints());
        }
        let seq: &[usize] = if self.tasks.contains(&Task::PriceLattice) { n_seq } else { &[] };
        for &steps in std::iter::once(&n).chain(seq) {
            let grid = Grid::log_uniform(scn.maturity(), steps, scn.contract.initial_account, g.m_nodes, g.xmax_mult)?;
            grid.check_breakpoints(&breakpoints)?;
        }
        self.pde_grid()?;
        Ok(())
    }

    pub fn pde_grid(&self) -> Result<vastop_core::pde::PdeGrid, VaError> {
        let g = &self.grid;
        let mut pg = vastop_core::pde::PdeGrid::new(&self.scenario, g.n_steps, g.m_nodes, g.xmax_mult)?;
        pg.theta = self.pde.theta.unwrap_or(pg.theta);
        pg.rannacher_steps = self.pde.rannacher_steps.unwrap_or(pg.rannacher_steps);
        pg.psor = self.pde.psor.unwrap_or(pg.psor);
        pg.validate(&self.scenario)?;
        Ok(pg)
    }

    pub fn out_dir(&self) -> &Path {
        self.out.as_deref().unwrap_or(Path::new("vastop-out"))
    }
}
