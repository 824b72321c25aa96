//! JSON run configuration.
//!
//! ```json
//! {
//!   "model": { "alpha": 1.0, "beta": 1.0, "d": 1.0,
//!              "v_circ": 0.9, "x_circ": 1.0, "y_circ": 0.0 },
//!   "run":   { "mode": "sweep", "epsilons": [0.0, 0.05], "horizons": [10.0] }
//! }
//! ```
//!
//! `run` is optional; missing fields take the defaults below. Command-line
//! flags override file values.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sovm_core::ModelParams;

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<RunBlock>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum RunBlock {
    Deterministic(DeterministicRun),
    Sde(SdeRun),
    Sweep(SweepRun),
    Barrier(BarrierRun),
    Validate(ValidateRun),
}

impl RunBlock {
    pub fn mode(&self) -> &'static str {
        match self {
            RunBlock::Deterministic(_) => "deterministic",
            RunBlock::Sde(_) => "sde",
            RunBlock::Sweep(_) => "sweep",
            RunBlock::Barrier(_) => "barrier",
            RunBlock::Validate(_) => "validate",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeterministicRun {
    pub horizon: f64,
    /// Starting point; the model's `(x_circ, y_circ)` when absent.
    pub z0: Option<[f64; 2]>,
    pub rtol: f64,
    pub atol: f64,
    pub collision_threshold: f64,
    pub convergence_tol: f64,
    pub convergence_hold: f64,
}

impl Default for DeterministicRun {
    fn default() -> Self {
        DeterministicRun {
            horizon: 200.0,
            z0: None,
            rtol: 1e-9,
            atol: 1e-11,
            collision_threshold: 1e-6,
            convergence_tol: 1e-8,
            convergence_hold: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SdeRun {
    pub epsilon: f64,
    /// Regularization scale; the collision-study working value when absent.
    pub delta: Option<f64>,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    /// Number of independent paths, one CSV each.
    pub paths: u32,
    pub stride: usize,
    pub z0: Option<[f64; 2]>,
}

impl Default for SdeRun {
    fn default() -> Self {
        SdeRun {
            epsilon: 0.05,
            delta: None,
            dt: 1e-3,
            horizon: 10.0,
            seed: 0,
            paths: 5,
            stride: 10,
            z0: None,
        }
    }
}

/// Absent grid fields fall back to [`SweepSpec::default_grid`].
///
/// [`SweepSpec::default_grid`]: sovm_core::mc::SweepSpec::default_grid
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepRun {
    pub epsilons: Option<Vec<f64>>,
    pub horizons: Option<Vec<f64>>,
    pub trials_per_cell: Option<u32>,
    pub dt: Option<f64>,
    pub seed: u64,
    pub z0: Option<[f64; 2]>,
    pub grid_resolution: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BarrierRun {
    pub grid_resolution: usize,
    /// Samples of `V` and `P` written alongside the table.
    pub curve_points: usize,
}

impl Default for BarrierRun {
    fn default() -> Self {
        BarrierRun {
            grid_resolution: 10_000,
            curve_points: 400,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateRun {
    pub grid_resolution: usize,
    /// Points per axis of the drift-sign grid.
    pub drift_sign_grid: usize,
    /// Seeds used for the consistency check.
    pub consistency_seeds: u64,
    pub seed: u64,
}

impl Default for ValidateRun {
    fn default() -> Self {
        ValidateRun {
            grid_resolution: 10_000,
            drift_sign_grid: 2000,
            consistency_seeds: 20,
            seed: 0,
        }
    }
}

pub fn load(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// The run block for `mode`, defaulted when the file has none.
pub fn run_block(cfg: &RunConfig, mode: &str) -> Result<RunBlock, CliError> {
    match &cfg.run {
        Some(block) if block.mode() == mode => Ok(block.clone()),
        Some(block) => Err(CliError::Config(format!(
            "config run block is for `{}`, not `{mode}`",
            block.mode()
        ))),
        None => Ok(match mode {
            "deterministic" => RunBlock::Deterministic(Default::default()),
            "sde" => RunBlock::Sde(Default::default()),
            "sweep" => RunBlock::Sweep(Default::default()),
            "barrier" => RunBlock::Barrier(Default::default()),
            _ => RunBlock::Validate(Default::default()),
        }),
    }
}
