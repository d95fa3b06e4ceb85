//! TOML run configuration. Every key is optional; see `RunConfig::default`.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rcuc_core::data_gen::ScenarioConfig;
use rcuc_core::dnn_embed::DnnSearch;
use rcuc_core::freq_dynamics::DynamicsOptions;
use rcuc_core::grid_model::{load_case, parse_case, GridCase};
use rcuc_core::rocof_net::TrainConfig;
use rcuc_milp::{Backend, BuiltinBackend, ExternalBackend, SolutionFormat, SolveOptions, Solver};
use serde::{Deserialize, Serialize};

pub const BUNDLED_CASE: &str = include_str!("../../../data/ieee24.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// `highs`, `builtin` or `external`.
    pub backend: String,
    pub command: String,
    pub args: Vec<String>,
    pub solution_format: String,
    pub gap: f64,
    pub time_limit: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            backend: if cfg!(feature = "highs") { "highs" } else { "builtin" }.into(),
            command: String::new(),
            args: Vec::new(),
            solution_format: "name_value".into(),
            gap: rcuc_milp::DEFAULT_GAP,
            time_limit: None,
        }
    }
}

impl SolverConfig {
    pub fn build(&self) -> Result<Solver> {
        let backend: Box<dyn Backend> = match self.backend.as_str() {
            "builtin" => Box::new(BuiltinBackend::default()),
            #[cfg(feature = "highs")]
            "highs" => Box::new(rcuc_milp::HighsBackend::default()),
            "external" => {
                if self.command.is_empty() {
                    bail!("solver.command is required for the external backend");
                }
                let format = SolutionFormat::parse(&self.solution_format)
                    .with_context(|| format!("unknown solver.solution_format `{}`", self.solution_format))?;
                Box::new(ExternalBackend::new(&self.command, self.args.clone(), format))
            }
            other => bail!("unknown solver.backend `{other}`"),
        };
        if !(self.gap >= 0.0) {
            bail!("solver.gap must be non-negative");
        }
        let options = SolveOptions { gap: self.gap, time_limit: self.time_limit, ..SolveOptions::default() };
        Ok(Solver::new(backend).with_options(options))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsConfig {
    pub window: f64,
    pub step: f64,
    pub horizon: f64,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        let d = DynamicsOptions::default();
        Self { window: d.window, step: d.step, horizon: d.horizon }
    }
}

impl From<&DynamicsConfig> for DynamicsOptions {
    fn from(c: &DynamicsConfig) -> Self {
        DynamicsOptions { window: c.window, step: c.step, horizon: c.horizon }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatagenConfig {
    pub n_scenarios: usize,
    pub mean_shift_range: [f64; 2],
    pub relative_sigma: f64,
    pub train_fraction: f64,
}

impl Default for DatagenConfig {
    fn default() -> Self {
        let s = ScenarioConfig::default();
        Self {
            n_scenarios: s.n_scenarios,
            mean_shift_range: s.mean_shift_range,
            relative_sigma: s.relative_sigma,
            train_fraction: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub hidden: Vec<usize>,
    pub batch_size: usize,
    pub initial_lr: f64,
    pub lr_factor: f64,
    pub lr_patience: usize,
    pub max_epochs: usize,
    pub min_lr: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            hidden: t.hidden,
            batch_size: t.batch_size,
            initial_lr: t.initial_lr,
            lr_factor: t.lr_factor,
            lr_patience: t.lr_patience,
            max_epochs: t.max_epochs,
            min_lr: t.min_lr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    /// Merge the committed units of this bus into one machine for the
    /// verification simulation.
    pub aggregate_bus: Option<usize>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { aggregate_bus: None }
    }
}

/// How the DNN-RCUC model is bounded and searched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DnnConfig {
    /// Tighten neuron bounds with LP solves before building the model.
    pub tighten_bounds: bool,
    pub sweeps: usize,
    pub neighbourhood_time_limit: Option<f64>,
    pub time_limit: Option<f64>,
}

impl Default for DnnConfig {
    fn default() -> Self {
        let d = DnnSearch::default();
        Self {
            tighten_bounds: true,
            sweeps: d.sweeps,
            neighbourhood_time_limit: d.neighbourhood_time_limit,
            time_limit: d.time_limit,
        }
    }
}

impl DnnConfig {
    pub fn search(&self) -> DnnSearch {
        DnnSearch {
            sweeps: self.sweeps,
            neighbourhood_time_limit: self.neighbourhood_time_limit,
            time_limit: self.time_limit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Case file; the bundled IEEE 24-bus case when absent.
    pub case: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: u64,
    /// Hz/s; overrides the case value.
    pub rocof_limit: f64,
    pub datagen: DatagenConfig,
    pub train: TrainSection,
    pub dynamics: DynamicsConfig,
    pub solver: SolverConfig,
    pub verify: VerifyConfig,
    pub dnn: DnnConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            case: None,
            out_dir: PathBuf::from("out"),
            seed: ScenarioConfig::default().seed,
            rocof_limit: 0.5,
            datagen: DatagenConfig::default(),
            train: TrainSection::default(),
            dynamics: DynamicsConfig::default(),
            solver: SolverConfig::default(),
            verify: VerifyConfig::default(),
            dnn: DnnConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).context("malformed configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let mut cfg = Self::from_toml(&text).with_context(|| path.display().to_string())?;
        // Relative case paths are taken from the config file's directory.
        if let (Some(case), Some(dir)) = (&cfg.case, path.parent()) {
            if case.is_relative() {
                cfg.case = Some(dir.join(case));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rocof_limit > 0.0) {
            bail!("rocof_limit must be positive, got {}", self.rocof_limit);
        }
        if let Some(p) = &self.case {
            if !p.exists() {
                bail!("case file {} does not exist", p.display());
            }
        }
        if !(self.datagen.train_fraction > 0.0 && self.datagen.train_fraction < 1.0) {
            bail!("datagen.train_fraction must be in (0, 1)");
        }
        self.scenario_config().validate()?;
        Ok(())
    }

    pub fn load_case(&self) -> Result<GridCase> {
        let mut case = match &self.case {
            Some(p) => load_case(p).with_context(|| p.display().to_string())?,
            None => parse_case(BUNDLED_CASE).context("bundled case")?,
        };
        case.system.rocof_limit = self.rocof_limit;
        Ok(case)
    }

    pub fn scenario_config(&self) -> ScenarioConfig {
        ScenarioConfig {
            n_scenarios: self.datagen.n_scenarios,
            mean_shift_range: self.datagen.mean_shift_range,
            relative_sigma: self.datagen.relative_sigma,
            seed: self.seed,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            hidden: t.hidden.clone(),
            batch_size: t.batch_size,
            initial_lr: t.initial_lr,
            lr_factor: t.lr_factor,
            lr_patience: t.lr_patience,
            max_epochs: t.max_epochs,
            min_lr: t.min_lr,
            seed: self.seed,
        }
    }

    pub fn dynamics(&self) -> DynamicsOptions {
        (&self.dynamics).into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
        assert_eq!(RunConfig::from_toml("").unwrap(), cfg);
    }

    #[test]
    fn bad_values_rejected() {
        assert!(RunConfig::from_toml("rocof_limit = 0.0").is_err());
        assert!(RunConfig::from_toml("case = \"/nonexistent.json\"").is_err());
        assert!(RunConfig::from_toml("[solver]\nbackend = \"mystery\"").unwrap().solver.build().is_err());
        assert!(RunConfig::from_toml("typo = 1").is_err());
    }

    #[test]
    fn bundled_case_loads() {
        let case = RunConfig::default().load_case().unwrap();
        assert_eq!((case.n_buses(), case.n_gens(), case.branches.len()), (24, 33, 38));
    }
}
