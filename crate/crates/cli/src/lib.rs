//! Command implementations behind the `sysid` binary.

pub mod config;
pub mod sweep;
pub mod truth;

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sysid_core::io::{load_json, load_model, load_trajectory, save_json, save_trajectory};
use sysid_core::pipeline::score;
use sysid_core::realize::compare_models;
use sysid_core::selection::required_length;
use sysid_core::simulate::simulate;
use sysid_core::{
    identify, ModelDistance, RealizedModel, SelectionConfig, SelectionTrace, StateSpaceModel,
    SysIdError, Trajectory,
};

pub use config::{ExperimentConfig, ModelSource, SelectionSection};

/// A malformed or inconsistent configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "configuration error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Maps an error to the process exit code: bad input is a configuration
/// error, everything else a numerical failure.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.downcast_ref::<ConfigError>().is_some() {
            return EXIT_CONFIG;
        }
        if let Some(e) = cause.downcast_ref::<SysIdError>() {
            return match e {
                SysIdError::InvalidArgument(_)
                | SysIdError::Parse(_)
                | SysIdError::Io(_)
                | SysIdError::Json(_)
                | SysIdError::Csv(_)
                | SysIdError::Dimension(_) => EXIT_CONFIG,
                _ => EXIT_NUMERICAL,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return EXIT_CONFIG;
        }
    }
    EXIT_NUMERICAL
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub delta: Option<f64>,
    pub kappa: Option<f64>,
    pub delta_plus: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) -> Result<()> {
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.base_seed = seed;
        }
        if let Some(v) = self.delta {
            cfg.selection.delta = v;
        }
        if let Some(v) = self.kappa {
            cfg.selection.kappa = v;
        }
        if let Some(v) = self.delta_plus {
            cfg.selection.delta_plus = Some(v);
        }
        cfg.validate()
    }
}

/// A loaded experiment: the config, its true model and resolved selection
/// constants.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub truth: StateSpaceModel,
    pub selection: SelectionConfig,
}

impl Experiment {
    /// Builds the model named in `config`; relative paths resolve against `base`.
    pub fn prepare(config: ExperimentConfig, base: &Path) -> Result<Self> {
        let truth = config.model.build(base).context("building the true model")?;
        let selection = config
            .selection
            .resolve(truth.p(), truth.m(), Some(&truth))?;
        Ok(Self {
            config,
            truth,
            selection,
        })
    }

    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let mut config = ExperimentConfig::load(path)?;
        overrides.apply(&mut config)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::prepare(config, base)
    }

    /// Trajectory length needed for `t` regression columns.
    pub fn length(&self, t: usize) -> usize {
        required_length(&self.selection, t)
    }

    pub fn simulate_cell(&self, t: usize, seed_index: u64) -> Result<Trajectory> {
        let seed = cell_seed(self.config.base_seed, t, seed_index);
        Ok(simulate(&self.truth, self.length(t), self.config.noise, seed)?)
    }

    /// Runs one `(T, seed index)` cell end to end.
    pub fn run_cell(&self, t: usize, seed_index: u64) -> Result<CellResult> {
        let start = Instant::now();
        let traj = self.simulate_cell(t, seed_index)?;
        let mut result = self.identify_trajectory(&traj)?;
        result.t = t;
        result.seed_index = Some(seed_index);
        result.seed = Some(cell_seed(self.config.base_seed, t, seed_index));
        result.runtime_ms = start.elapsed().as_millis() as u64;
        Ok(result)
    }

    /// Identifies from a given trajectory and scores against the true model.
    pub fn identify_trajectory(&self, traj: &Trajectory) -> Result<CellResult> {
        let start = Instant::now();
        let id = identify(traj, &self.selection).context("identification")?;
        let sc = score(
            &id,
            &self.truth,
            self.config.truth_horizon,
            self.config.hinf_grid,
        )
        .context("scoring against the true model")?;
        Ok(CellResult {
            t: id.t,
            seed_index: None,
            seed: None,
            length: traj.len(),
            d_hat: id.d_hat,
            k: id.k,
            identified: id.identified(),
            status: if id.identified() {
                None
            } else {
                Some(NO_ORDER.to_string())
            },
            hankel_err: sc.map(|s| s.hankel_err),
            hinf_err: sc.map(|s| s.hinf_err),
            impulse_err: sc.map(|s| s.impulse_err),
            param_err: sc.and_then(|s| s.param_err),
            runtime_ms: start.elapsed().as_millis() as u64,
            trace: id.trace,
            realized: id.realized,
        })
    }
}

pub const NO_ORDER: &str = "no identifiable order";

/// Outcome of one identification, written by `identify` and summarized per
/// row by `sweep`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    #[serde(rename = "T")]
    pub t: usize,
    pub seed_index: Option<u64>,
    pub seed: Option<u64>,
    pub length: usize,
    pub d_hat: usize,
    pub k: usize,
    pub identified: bool,
    pub status: Option<String>,
    pub hankel_err: Option<f64>,
    pub hinf_err: Option<f64>,
    pub impulse_err: Option<f64>,
    pub param_err: Option<f64>,
    pub runtime_ms: u64,
    pub trace: SelectionTrace,
    pub realized: Option<RealizedModel>,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of the `(T, seed index)` cell. Depends on nothing else, so adding
/// cells leaves existing ones unchanged.
pub fn cell_seed(base_seed: u64, t: usize, seed_index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(base_seed) ^ t as u64) ^ seed_index)
}

/// `identify`: from `data` if given, else from the first `(T, seed)` cell.
pub fn run_identify(exp: &Experiment, data: Option<&Path>) -> Result<CellResult> {
    match data {
        Some(path) => {
            let traj = load_trajectory(path)
                .with_context(|| format!("reading trajectory {}", path.display()))?;
            exp.identify_trajectory(&traj)
        }
        None => exp.run_cell(exp.config.t_values[0], exp.config.seeds[0]),
    }
}

/// `simulate`: the trajectory of the first `(T, seed)` cell.
pub fn run_simulate(exp: &Experiment, path: &Path) -> Result<Trajectory> {
    let traj = exp.simulate_cell(exp.config.t_values[0], exp.config.seeds[0])?;
    save_trajectory(&traj, path)?;
    Ok(traj)
}

/// Reads a plain model JSON, a realized-model JSON, or the realized model of
/// an `identify` result.
pub fn load_any_model(path: &Path) -> Result<StateSpaceModel> {
    let plain = match load_model(path) {
        Ok(m) => return Ok(m),
        Err(e) => e,
    };
    if let Ok(r) = load_json::<RealizedModel>(path) {
        return Ok(r.model);
    }
    if let Ok(c) = load_json::<CellResult>(path) {
        return match c.realized {
            Some(r) => Ok(r.model),
            None => Err(ConfigError(format!("{} holds no identified model", path.display())).into()),
        };
    }
    Err(plain).with_context(|| format!("reading model {}", path.display()))
}

/// `compare`: distances between two model files.
pub fn run_compare(a: &Path, b: &Path, horizon: usize, grid: usize) -> Result<ModelDistance> {
    let ma = load_any_model(a)?;
    let mb = load_any_model(b)?;
    Ok(compare_models(&ma, &mb, horizon, grid)?)
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    save_json(value, path)?;
    Ok(())
}
