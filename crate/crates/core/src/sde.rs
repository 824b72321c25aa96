//! Euler–Maruyama simulation of the regularized SDE
//! `dZ = B^(δ)(Z) dt + ε e dW`, `e = (0, 1)`, with the stopping times used
//! by the collision analysis.
//!
//! Each coarse step of length `dt` draws one Gaussian increment. Where the
//! retained stiffness `β/(x² ∨ δ²)` is large the step is split dyadically,
//! filling in the Brownian path by bridge sampling, until every sub-step
//! satisfies `h β/(x² ∨ δ²) <= 0.1`. Events are checked after every
//! (sub-)step and stamped with the end time of the coarse step.

use serde::{Deserialize, Serialize};

use crate::barrier::BarrierTable;
use crate::error::{require, Error, Result};
use crate::model::{drift_regularized, ModelParams, State};
use crate::rng::PathRng;

/// Largest admissible coarse step.
pub const MAX_DT: f64 = 1e-3;
/// Sub-steps keep `h β / (x² ∨ δ²)` at or below this ratio.
pub const STIFFNESS_RATIO: f64 = 0.1;
/// Deepest dyadic refinement of a coarse step.
pub const MAX_REFINE_DEPTH: u32 = 24;

/// Settings for one simulated path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdePathConfig {
    pub epsilon: f64,
    pub delta: f64,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    /// Selects the random stream; see [`crate::rng::stream_id`].
    pub trial_index: u64,
    /// Keep every `stride`-th state in the returned path.
    pub stride: usize,
}

impl SdePathConfig {
    pub fn validate(&self, p: &ModelParams) -> Result<()> {
        require(
            self.epsilon >= 0.0 && self.epsilon.is_finite(),
            "epsilon",
            self.epsilon,
            "epsilon >= 0",
        )?;
        require(
            self.delta > 0.0 && self.delta.is_finite(),
            "delta",
            self.delta,
            "delta > 0",
        )?;
        require(
            self.dt > 0.0 && self.dt <= MAX_DT,
            "dt",
            self.dt,
            "0 < dt <= 1e-3",
        )?;
        // the finest sub-step must resolve β/δ²
        let finest = self.dt / f64::from(1u32 << MAX_REFINE_DEPTH);
        require(
            finest * p.beta() <= STIFFNESS_RATIO * self.delta * self.delta,
            "dt",
            self.dt,
            "dt / 2^24 <= delta^2 / (10 beta)",
        )?;
        require(
            self.horizon > 0.0 && self.horizon.is_finite(),
            "horizon",
            self.horizon,
            "horizon > 0",
        )?;
        require(
            self.horizon / self.dt <= 1e10,
            "horizon",
            self.horizon,
            "horizon / dt <= 1e10",
        )?;
        require(self.stride >= 1, "stride", self.stride as f64, "stride >= 1")?;
        Ok(())
    }

    fn steps(&self) -> u64 {
        (self.horizon / self.dt - 1e-9).ceil().max(1.0) as u64
    }
}

/// How a path ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TerminalStatus {
    HorizonReached,
    /// Left `a_δ` through the velocity edge `|y| > 1/(2δ)`.
    ExitedRegularizationSet,
    /// Reached the horizon after `H` exceeded `h_circ + 1`.
    EnergyEscape,
    /// Reached the horizon after the gap dropped below `φ̲/2`.
    DangerZone,
    /// Left `a_δ` through the gap edge `x < 2δ`.
    CollisionProxy,
}

/// Stopping times of one path; `None` means the event did not occur.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoppingRecord {
    /// First exit of `a_δ = [2δ, ∞) × [-1/(2δ), 1/(2δ)]`.
    pub tau_eps_delta: Option<f64>,
    /// First time `H > h_circ + 1`.
    #[serde(rename = "tau_H")]
    pub tau_h: Option<f64>,
    /// First time `x < φ̲/2`.
    #[serde(rename = "tau_D")]
    pub tau_d: Option<f64>,
    /// First time `x < 2δ`.
    pub collision_proxy: Option<f64>,
    pub terminal_status: TerminalStatus,
    pub terminal_state: [f64; 2],
    pub seed: u64,
    pub trial_index: u64,
}

/// States kept every `stride` steps, plus the last one.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SdePath {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    /// `H` along the path; NaN where `x <= 0`.
    pub h_values: Vec<f64>,
}

impl SdePath {
    fn push(&mut self, t: f64, z: State, p: &ModelParams) {
        self.times.push(t);
        self.states.push(z);
        self.h_values.push(if z.x > 0.0 {
            p.hamiltonian_unchecked(z)
        } else {
            f64::NAN
        });
    }
}

struct Stepper<'a> {
    p: &'a ModelParams,
    delta: f64,
    epsilon: f64,
    x_edge: f64,
    y_edge: f64,
    h_level: f64,
    d_level: f64,
    hit_h: bool,
    hit_d: bool,
    bridge_at: Option<u64>,
}

impl Stepper<'_> {
    fn outside(&self, z: State) -> bool {
        z.x < self.x_edge || z.y.abs() > self.y_edge
    }

    fn mark_events(&mut self, z: State) {
        if !self.hit_h && self.p.hamiltonian_unchecked(z) > self.h_level {
            self.hit_h = true;
        }
        if !self.hit_d && z.x < self.d_level {
            self.hit_d = true;
        }
    }

    /// Advances `z` over `h` with Brownian increment `dw`; true once `z`
    /// leaves `a_δ`.
    fn advance(
        &mut self,
        z: &mut State,
        h: f64,
        dw: f64,
        depth: u32,
        step: u64,
        rng: &mut PathRng,
    ) -> Result<bool> {
        let stiffness = h * self.p.beta() / (z.x * z.x).max(self.delta * self.delta);
        if stiffness > STIFFNESS_RATIO && depth < MAX_REFINE_DEPTH {
            let mid = if self.epsilon > 0.0 {
                if self.bridge_at != Some(step) {
                    rng.start_bridge(step);
                    self.bridge_at = Some(step);
                }
                0.5 * dw + 0.5 * h.sqrt() * rng.bridge_normal()
            } else {
                0.0
            };
            if self.advance(z, 0.5 * h, mid, depth + 1, step, rng)? {
                return Ok(true);
            }
            return self.advance(z, 0.5 * h, dw - mid, depth + 1, step, rng);
        }
        let b = drift_regularized(*z, self.delta, self.p);
        z.x += b.dx * h;
        z.y += b.dy * h + self.epsilon * dw;
        if !z.is_finite() {
            return Err(Error::NonFinite { t: f64::NAN });
        }
        if self.outside(*z) {
            return Ok(true);
        }
        self.mark_events(*z);
        Ok(false)
    }
}

fn run(
    z0: State,
    cfg: &SdePathConfig,
    p: &ModelParams,
    d_level: f64,
    mut path: Option<&mut SdePath>,
) -> Result<StoppingRecord> {
    cfg.validate(p)?;
    if !(z0.x > 0.0) || !z0.y.is_finite() {
        return Err(Error::Domain {
            op: "simulate_path",
            value: z0.x,
            domain: "x > 0",
        });
    }
    let mut st = Stepper {
        p,
        delta: cfg.delta,
        epsilon: cfg.epsilon,
        x_edge: 2.0 * cfg.delta,
        y_edge: 0.5 / cfg.delta,
        h_level: p.derived().h_circ + 1.0,
        d_level,
        hit_h: false,
        hit_d: false,
        bridge_at: None,
    };
    let mut rec = StoppingRecord {
        tau_eps_delta: None,
        tau_h: None,
        tau_d: None,
        collision_proxy: None,
        terminal_status: TerminalStatus::HorizonReached,
        terminal_state: [z0.x, z0.y],
        seed: cfg.seed,
        trial_index: cfg.trial_index,
    };
    let mut z = z0;
    if let Some(path) = path.as_deref_mut() {
        path.push(0.0, z, p);
    }
    let finish = |rec: &mut StoppingRecord, st: &Stepper, z: State, t: f64, exited: bool| {
        if st.hit_h && rec.tau_h.is_none() {
            rec.tau_h = Some(t);
        }
        if st.hit_d && rec.tau_d.is_none() {
            rec.tau_d = Some(t);
        }
        if exited {
            rec.tau_eps_delta = Some(t);
            if z.x < st.x_edge {
                rec.collision_proxy = Some(t);
                // the proxy edge lies below φ̲/2
                if rec.tau_d.is_none() && z.x < st.d_level {
                    rec.tau_d = Some(t);
                }
            }
        }
    };

    let exited0 = st.outside(z);
    if !exited0 {
        st.mark_events(z);
    }
    finish(&mut rec, &st, z, 0.0, exited0);

    let n = cfg.steps();
    let sqrt_dt = cfg.dt.sqrt();
    let mut rng = PathRng::new(cfg.seed, cfg.trial_index);
    let mut exited = exited0;
    let mut k = 0u64;
    while !exited && k < n {
        let dw = if cfg.epsilon > 0.0 {
            sqrt_dt * rng.normal()
        } else {
            0.0
        };
        let step_t = (k + 1) as f64 * cfg.dt;
        exited = st
            .advance(&mut z, cfg.dt, dw, 0, k, &mut rng)
            .map_err(|_| Error::NonFinite { t: step_t })?;
        k += 1;
        finish(&mut rec, &st, z, step_t, exited);
        if let Some(path) = path.as_deref_mut() {
            if exited || k == n || k.is_multiple_of(cfg.stride as u64) {
                path.push(step_t, z, p);
            }
        }
    }

    rec.terminal_state = [z.x, z.y];
    rec.terminal_status = if rec.collision_proxy.is_some() {
        TerminalStatus::CollisionProxy
    } else if rec.tau_eps_delta.is_some() {
        TerminalStatus::ExitedRegularizationSet
    } else if rec.tau_d.is_some() {
        TerminalStatus::DangerZone
    } else if rec.tau_h.is_some() {
        TerminalStatus::EnergyEscape
    } else {
        TerminalStatus::HorizonReached
    };
    Ok(rec)
}

fn check_table(p: &ModelParams, table: &BarrierTable) -> Result<()> {
    if table.y_bar == p.derived().y_bar && table.phi_lower == p.derived().phi_lower {
        Ok(())
    } else {
        Err(Error::Config(
            "barrier table was built for different model parameters".into(),
        ))
    }
}

/// Simulates one path from `z0`, stopping at the first exit of `a_δ` or at
/// the horizon.
pub fn simulate_path(
    z0: State,
    cfg: &SdePathConfig,
    p: &ModelParams,
    table: &BarrierTable,
) -> Result<(SdePath, StoppingRecord)> {
    check_table(p, table)?;
    let mut path = SdePath::default();
    let rec = run(z0, cfg, p, 0.5 * table.phi_lower, Some(&mut path))?;
    Ok((path, rec))
}

/// [`simulate_path`] without storing states.
pub fn simulate_stopping(
    z0: State,
    cfg: &SdePathConfig,
    p: &ModelParams,
    table: &BarrierTable,
) -> Result<StoppingRecord> {
    check_table(p, table)?;
    run(z0, cfg, p, 0.5 * table.phi_lower, None)
}

/// Settings shared by the two paths of [`check_consistency`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsistencyOptions {
    pub dt: f64,
    pub horizon: f64,
    pub trial_index: u64,
}

impl Default for ConsistencyOptions {
    fn default() -> Self {
        ConsistencyOptions {
            dt: 2.5e-4,
            horizon: 20.0,
            trial_index: 0,
        }
    }
}

/// Outcome of running the same noise at two regularization scales.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    /// `sup ‖Z⁺ - Z⁻‖` over the common time grid up to `τ⁺`.
    pub max_divergence: f64,
    pub tau_plus: Option<f64>,
    pub tau_minus: Option<f64>,
    /// `τ⁺ < τ⁻`, when both exits were observed.
    pub ordered: Option<bool>,
}

/// Runs the `δ₊` and `δ₋` paths on shared increments and compares them up
/// to the exit of `a_{δ₊}`.
pub fn check_consistency(
    z0: State,
    epsilon: f64,
    delta_minus: f64,
    delta_plus: f64,
    shared_seed: u64,
    p: &ModelParams,
    opts: &ConsistencyOptions,
) -> Result<ConsistencyReport> {
    if !(delta_minus > 0.0 && delta_minus < delta_plus) {
        return Err(Error::InvalidParameter {
            name: "delta_minus",
            value: delta_minus,
            constraint: "0 < delta_minus < delta_plus",
        });
    }
    let cfg = |delta| SdePathConfig {
        epsilon,
        delta,
        dt: opts.dt,
        horizon: opts.horizon,
        seed: shared_seed,
        trial_index: opts.trial_index,
        stride: 1,
    };
    let d_level = 0.5 * p.derived().phi_lower;
    let mut plus = SdePath::default();
    let mut minus = SdePath::default();
    let rp = run(z0, &cfg(delta_plus), p, d_level, Some(&mut plus))?;
    let rm = run(z0, &cfg(delta_minus), p, d_level, Some(&mut minus))?;
    let max_divergence = plus
        .states
        .iter()
        .zip(&minus.states)
        .map(|(a, b)| a.distance(b))
        .fold(0.0, f64::max);
    let ordered = match (rp.tau_eps_delta, rm.tau_eps_delta) {
        (Some(a), Some(b)) => Some(a < b),
        _ => None,
    };
    Ok(ConsistencyReport {
        max_divergence,
        tau_plus: rp.tau_eps_delta,
        tau_minus: rm.tau_eps_delta,
        ordered,
    })
}

/// Regularization scale for collision runs: `min(δ̄/4, 1e-3)`.
pub fn working_delta(p: &ModelParams) -> f64 {
    (0.25 * p.derived().delta_bar).min(1e-3)
}

/// One trial of a collision study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveRun {
    pub epsilon: f64,
    pub horizon: f64,
    pub dt: f64,
    pub seed: u64,
    pub trial_index: u64,
}

/// Runs a path at [`working_delta`]; a `CollisionProxy` status is the
/// collision event.
pub fn effective_collision_run(
    z0: State,
    run_cfg: &EffectiveRun,
    p: &ModelParams,
    table: &BarrierTable,
) -> Result<StoppingRecord> {
    let delta = working_delta(p);
    if !(delta < p.derived().delta_bar) {
        return Err(Error::InvalidParameter {
            name: "delta",
            value: delta,
            constraint: "working delta < delta_bar",
        });
    }
    let cfg = SdePathConfig {
        epsilon: run_cfg.epsilon,
        delta,
        dt: run_cfg.dt,
        horizon: run_cfg.horizon,
        seed: run_cfg.seed,
        trial_index: run_cfg.trial_index,
        stride: 1,
    };
    simulate_stopping(z0, &cfg, p, table)
}
