//! Browser bindings for the demo page in `www/`.
//!
//! Curves are returned as flat `[x0, y0, x1, y1, ...]` arrays. Separate
//! paths in one array are split by a `NaN, NaN` pair.

use sovm_core::barrier::{build_barrier, BarrierTable};
use sovm_core::ode::{integrate_deterministic, DeterministicOptions};
use sovm_core::sde::{simulate_path, working_delta, SdePathConfig};
use sovm_core::{ModelParams, PhysicalParams, State};
use wasm_bindgen::prelude::*;

/// Table resolution used by the page; coarser than the CLI default.
const TABLE_RESOLUTION: usize = 2000;
const SDE_DT: f64 = 1e-3;
const SDE_STRIDE: usize = 20;

/// Model state shared by the page controls.
#[wasm_bindgen]
pub struct Demo {
    params: ModelParams,
    table: BarrierTable,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(alpha: f64, beta: f64, d: f64, v_circ: f64, x_circ: f64, y_circ: f64) -> Result<Demo, JsError> {
        let physical = PhysicalParams {
            alpha,
            beta,
            d,
            v_circ,
            x_circ,
            y_circ,
        };
        Demo::from_physical(physical).map_err(|e| JsError::new(&e.to_string()))
    }

    pub fn x_inf(&self) -> f64 {
        self.params.derived().x_inf
    }

    pub fn y_bar(&self) -> f64 {
        self.table.y_bar
    }

    pub fn phi_lower(&self) -> f64 {
        self.table.phi_lower
    }

    /// Deterministic orbit from `(x0, y0)`.
    pub fn trajectory(&self, x0: f64, y0: f64, horizon: f64) -> Result<Vec<f64>, JsError> {
        self.trajectory_points(x0, y0, horizon)
            .map_err(|e| JsError::new(&e.to_string()))
    }

    /// Barrier curve `x = φ(y)` on `[-ȳ, ȳ]`, as `(y, φ)` pairs.
    pub fn barrier(&self, samples: usize) -> Vec<f64> {
        self.barrier_points(samples)
    }

    /// `paths` noisy trajectories from the configured initial state.
    pub fn noisy_paths(&self, epsilon: f64, paths: u32, horizon: f64, seed: u64) -> Result<Vec<f64>, JsError> {
        self.noisy_points(epsilon, paths, horizon, seed)
            .map_err(|e| JsError::new(&e.to_string()))
    }
}

impl Demo {
    pub fn from_physical(physical: PhysicalParams) -> sovm_core::Result<Demo> {
        let params = ModelParams::new(physical)?;
        let table = build_barrier(&params, TABLE_RESOLUTION)?;
        Ok(Demo { params, table })
    }

    pub fn trajectory_points(&self, x0: f64, y0: f64, horizon: f64) -> sovm_core::Result<Vec<f64>> {
        let tr = integrate_deterministic(State::new(x0, y0), &self.params, horizon, &DeterministicOptions::default())?;
        Ok(tr.states.iter().flat_map(|s| [s.x, s.y]).collect())
    }

    pub fn barrier_points(&self, samples: usize) -> Vec<f64> {
        let n = samples.max(2);
        let y_bar = self.table.y_bar;
        (0..n)
            .flat_map(|i| {
                let y = -y_bar + 2.0 * y_bar * i as f64 / (n - 1) as f64;
                [y, self.table.phi(y).unwrap_or(f64::NAN)]
            })
            .collect()
    }

    pub fn noisy_points(&self, epsilon: f64, paths: u32, horizon: f64, seed: u64) -> sovm_core::Result<Vec<f64>> {
        let z0 = self.params.initial_state();
        let mut out = Vec::new();
        for i in 0..paths {
            let cfg = SdePathConfig {
                epsilon,
                delta: working_delta(&self.params),
                dt: SDE_DT,
                horizon,
                seed,
                trial_index: u64::from(i),
                stride: SDE_STRIDE,
            };
            cfg.validate(&self.params)?;
            let (path, _) = simulate_path(z0, &cfg, &self.params, &self.table)?;
            if i > 0 {
                out.extend([f64::NAN, f64::NAN]);
            }
            out.extend(path.states.iter().flat_map(|s| [s.x, s.y]));
        }
        Ok(out)
    }
}
