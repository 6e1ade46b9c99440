//! Experiment configuration files (TOML).

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sysid_core::io::load_model;
use sysid_core::pipeline::oracle_constants;
use sysid_core::selection::DEFAULT_MAX_WINDOW;
use sysid_core::simulate::{
    fixture_example1, fixture_fir, fixture_lowerbound, fixture_random_stable, NoiseSpec,
};
use sysid_core::{SelectionConfig, StateSpaceModel};

use crate::ConfigError;

/// Where the true model comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSource {
    /// A JSON model file with keys `C`, `A`, `B`.
    File { path: PathBuf },
    /// Scalar `x' = a x + b u`, `y = c x`.
    Scalar {
        a: f64,
        #[serde(default = "one")]
        b: f64,
        #[serde(default = "one")]
        c: f64,
    },
    /// Shift-register FIR system with random weights.
    Fir {
        order: usize,
        rho: f64,
        weight_std: f64,
        seed: u64,
    },
    /// The `n`-state system (`which = 1`) or its two-state approximation
    /// (`which = 2`).
    Example1 { n: usize, a: f64, which: u8 },
    /// The rank-1 (`which = 0`) or full-rank (`which = 1`) three-state system.
    Lowerbound {
        zeta: f64,
        beta: f64,
        r: f64,
        which: u8,
    },
    RandomStable {
        n: usize,
        p: usize,
        m: usize,
        rho: f64,
        seed: u64,
    },
}

fn one() -> f64 {
    1.0
}

impl ModelSource {
    /// Builds the model; relative file paths resolve against `base`.
    pub fn build(&self, base: &Path) -> Result<StateSpaceModel> {
        let model = match self {
            Self::File { path } => {
                let full = base.join(path);
                load_model(&full).with_context(|| format!("reading model {}", full.display()))?
            }
            Self::Scalar { a, b, c } => StateSpaceModel::scalar(*c, *a, *b),
            Self::Fir {
                order,
                rho,
                weight_std,
                seed,
            } => fixture_fir(*order, *rho, *weight_std, *seed)?.model,
            Self::Example1 { n, a, which } => {
                let (m1, m2) = fixture_example1(*n, *a)?;
                match which {
                    1 => m1,
                    2 => m2,
                    w => bail!(ConfigError(format!("example1 `which` must be 1 or 2, got {w}"))),
                }
            }
            Self::Lowerbound {
                zeta,
                beta,
                r,
                which,
            } => {
                let (m0, m1) = fixture_lowerbound(*zeta, *beta, *r)?;
                match which {
                    0 => m0,
                    1 => m1,
                    w => bail!(ConfigError(format!("lowerbound `which` must be 0 or 1, got {w}"))),
                }
            }
            Self::RandomStable { n, p, m, rho, seed } => {
                fixture_random_stable(*n, *p, *m, *rho, *seed)?
            }
        };
        Ok(model)
    }
}

/// Selection constants; `beta` and `r` default to the true model's values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionSection {
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_univ: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_plus: Option<f64>,
    /// Zero removes the cap.
    #[serde(default = "default_max_window")]
    pub max_window: usize,
    #[serde(default)]
    pub ridge: f64,
}

fn default_delta() -> f64 {
    0.05
}

fn default_kappa() -> f64 {
    20.0
}

fn default_max_window() -> usize {
    DEFAULT_MAX_WINDOW
}

impl Default for SelectionSection {
    fn default() -> Self {
        Self {
            delta: default_delta(),
            kappa: default_kappa(),
            c_univ: None,
            beta: None,
            r: None,
            delta_plus: None,
            max_window: default_max_window(),
            ridge: 0.0,
        }
    }
}

impl SelectionSection {
    /// Resolves to a full configuration, filling `β` and `R` from `truth`
    /// when they are not set.
    pub fn resolve(&self, p: usize, m: usize, truth: Option<&StateSpaceModel>) -> Result<SelectionConfig> {
        let (beta, r) = match (self.beta, self.r, truth) {
            (Some(b), Some(r), _) => (b, r),
            (b, r, Some(model)) => {
                let oracle = oracle_constants(model).context("computing β and R of the true model")?;
                (b.unwrap_or(oracle.beta), r.unwrap_or(oracle.r))
            }
            _ => bail!(ConfigError(
                "selection.beta and selection.r are required without a model".into()
            )),
        };
        let cfg = SelectionConfig {
            delta: self.delta,
            kappa: self.kappa,
            c_univ: self.c_univ,
            beta,
            r,
            delta_plus: self.delta_plus,
            p,
            m,
            max_window: (self.max_window > 0).then_some(self.max_window),
            ridge: self.ridge,
        };
        cfg.validate().map_err(|e| ConfigError(e.to_string()))?;
        Ok(cfg)
    }
}

/// A full experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Regression columns per fit, ascending.
    pub t_values: Vec<usize>,
    /// Seed indices; each cell's seed is derived from `base_seed`, `T` and the index.
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub base_seed: u64,
    /// Horizon `D` for Hankel and impulse comparisons.
    #[serde(default = "default_horizon")]
    pub truth_horizon: usize,
    #[serde(default = "default_grid")]
    pub hinf_grid: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub model: ModelSource,
    #[serde(default)]
    pub selection: SelectionSection,
    #[serde(default)]
    pub noise: NoiseSpec,
}

fn default_horizon() -> usize {
    200
}

fn default_grid() -> usize {
    1024
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("reading {}: {e}", path.display())))?;
        Self::from_toml_str(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(ConfigError(msg.into()).into());
        if self.t_values.is_empty() {
            return bad("t_values must not be empty");
        }
        if self.t_values.contains(&0) {
            return bad("t_values must be positive");
        }
        if !self.t_values.windows(2).all(|w| w[0] < w[1]) {
            return bad("t_values must be strictly ascending");
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty");
        }
        if self.truth_horizon == 0 {
            return bad("truth_horizon must be positive");
        }
        self.noise.validate().map_err(|e| ConfigError(e.to_string()))?;
        Ok(())
    }
}
