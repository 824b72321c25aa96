//! Deterministic dynamics: adaptive integration of `ż = B(z)`, boundary-strip
//! region labels and the velocity-parametrized description of trajectories
//! that approach the collision boundary.

use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{self, StepControl};
use crate::model::{drift_unchecked, ModelParams, State};

/// Why an integration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrajectoryStatus {
    Running,
    ConvergedToEquilibrium,
    CollisionDetected,
    HorizonReached,
}

/// Time-stamped states with the energy along them.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    pub h_values: Vec<f64>,
    pub status: TrajectoryStatus,
    /// Set when the integrator gave up; the trajectory is truncated there.
    pub fault: Option<String>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_state(&self) -> State {
        *self.states.last().expect("trajectory always holds its initial state")
    }

    /// Largest `H(t_{k+1}) - H(t_k)` over consecutive samples.
    pub fn max_energy_increase(&self) -> f64 {
        self.h_values
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_gap(&self) -> f64 {
        self.states.iter().map(|s| s.x).fold(f64::INFINITY, f64::min)
    }
}

/// Thresholds and step control for [`integrate_deterministic`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeterministicOptions {
    pub step: StepControl,
    /// Gaps below this count as a collision.
    pub collision_threshold: f64,
    /// Distance to `(x_inf, 0)` treated as converged...
    pub convergence_tol: f64,
    /// ...once it has held for this long.
    pub convergence_hold: f64,
}

impl Default for DeterministicOptions {
    fn default() -> Self {
        DeterministicOptions {
            step: StepControl::default(),
            collision_threshold: 1e-6,
            convergence_tol: 1e-8,
            convergence_hold: 1.0,
        }
    }
}

/// Integrates the deterministic model from `z0` up to `horizon`.
///
/// Stops early on sustained convergence to the equilibrium or when the gap
/// drops below the collision threshold. Integrator faults truncate the
/// trajectory and are recorded in [`Trajectory::fault`].
pub fn integrate_deterministic(
    z0: State,
    p: &ModelParams,
    horizon: f64,
    opts: &DeterministicOptions,
) -> Result<Trajectory> {
    if !(z0.x > 0.0) || !z0.y.is_finite() {
        return Err(Error::Domain {
            op: "integrate_deterministic",
            value: z0.x,
            domain: "x > 0",
        });
    }
    if !(horizon > 0.0) {
        return Err(Error::InvalidParameter {
            name: "horizon",
            value: horizon,
            constraint: "horizon > 0",
        });
    }
    let eq = p.equilibrium();
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![z0],
        h_values: vec![p.hamiltonian_unchecked(z0)],
        status: TrajectoryStatus::Running,
        fault: None,
    };
    let mut near_since: Option<f64> = (z0.distance(&eq) < opts.convergence_tol).then_some(0.0);

    let outcome = integrator::integrate(
        |_, y: &[f64; 2]| {
            let b = drift_unchecked(State::new(y[0], y[1]), p);
            [b.dx, b.dy]
        },
        0.0,
        [z0.x, z0.y],
        horizon,
        &opts.step,
        |t, y| {
            let z = State::new(y[0], y[1]);
            traj.times.push(t);
            traj.states.push(z);
            if z.x < opts.collision_threshold {
                traj.h_values.push(f64::NAN);
                traj.status = TrajectoryStatus::CollisionDetected;
                return ControlFlow::Break(());
            }
            traj.h_values.push(p.hamiltonian_unchecked(z));
            if z.distance(&eq) < opts.convergence_tol {
                let since = *near_since.get_or_insert(t);
                if t - since >= opts.convergence_hold {
                    traj.status = TrajectoryStatus::ConvergedToEquilibrium;
                    return ControlFlow::Break(());
                }
            } else {
                near_since = None;
            }
            ControlFlow::Continue(())
        },
    );
    match outcome {
        Ok(out) if !out.stopped => traj.status = TrajectoryStatus::HorizonReached,
        Ok(_) => {}
        Err(e) => traj.fault = Some(e.to_string()),
    }
    Ok(traj)
}

/// Membership in the boundary strip `(0, x_minus/2) × ℝ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegionLabel {
    /// Strip with `y < 0`: closing in on the lead vehicle.
    Lower,
    /// Strip with `y >= 0`.
    Upper,
    Outside,
}

pub fn classify_region(z: State, p: &ModelParams) -> RegionLabel {
    let half = 0.5 * p.derived().x_minus;
    if !(z.x > 0.0 && z.x < half) {
        RegionLabel::Outside
    } else if z.y < 0.0 {
        RegionLabel::Lower
    } else {
        RegionLabel::Upper
    }
}

#[inline]
fn parametrization_rhs_unchecked(y: f64, phi: f64, p: &ModelParams) -> f64 {
    -y / (p.potential_derivative(phi) + (p.alpha() + p.beta() / (phi * phi)) * y)
}

/// Slope `dx/dy` of a trajectory in the lower strip, written as a graph
/// `x = φ(y)`: `-y / (P'(φ) + (α + β/φ²) y)`.
pub fn parametrization_rhs(y: f64, phi_val: f64, p: &ModelParams) -> Result<f64> {
    if !(y < 0.0) {
        return Err(Error::Domain {
            op: "parametrization_rhs",
            value: y,
            domain: "y < 0",
        });
    }
    if !(phi_val > 0.0 && phi_val < p.derived().x_minus) {
        return Err(Error::Domain {
            op: "parametrization_rhs",
            value: phi_val,
            domain: "0 < phi < x_minus",
        });
    }
    Ok(parametrization_rhs_unchecked(y, phi_val, p))
}

/// Lower reference curve `{1/x_start + (y - y_start)/β}⁻¹` for `y >= y_start`.
pub fn reference_curve(y: f64, y_start: f64, x_start: f64, p: &ModelParams) -> f64 {
    1.0 / (1.0 / x_start + (y - y_start) / p.beta())
}

/// Solves the graph ODE `φ' = f(y, φ)`, `φ(y_start) = x_start`, and returns
/// `φ` at each of `y_targets`.
///
/// Targets must be sorted ascending, lie in `[y_start, 0)`, and the anchor
/// must be in the lower strip domain `y_start < 0`, `0 < x_start < x_minus`.
pub fn solve_parametrization(
    y_start: f64,
    x_start: f64,
    y_targets: &[f64],
    p: &ModelParams,
) -> Result<Vec<f64>> {
    parametrization_rhs(y_start, x_start, p)?;
    let control = StepControl {
        rtol: 1e-12,
        atol: 1e-14,
        h_init: 1e-4,
        h_max: 0.05,
        ..StepControl::default()
    };
    let mut out = Vec::with_capacity(y_targets.len());
    let mut y = y_start;
    let mut phi = x_start;
    for &target in y_targets {
        if !(target >= y && target < 0.0) {
            return Err(Error::Domain {
                op: "solve_parametrization",
                value: target,
                domain: "sorted targets in [y_start, 0)",
            });
        }
        let seg = integrator::integrate(
            |yy, f: &[f64; 1]| [parametrization_rhs_unchecked(yy, f[0], p)],
            y,
            [phi],
            target,
            &control,
            |_, _| ControlFlow::Continue(()),
        )?;
        y = target;
        phi = seg.y[0];
        if !(phi > 0.0 && phi < p.derived().x_minus) {
            return Err(Error::Domain {
                op: "solve_parametrization",
                value: phi,
                domain: "0 < phi < x_minus",
            });
        }
        out.push(phi);
    }
    Ok(out)
}
