//! Invariant checks run by `sovm validate`.

use std::fmt;

use serde::Serialize;
use sovm_core::barrier::{build_barrier, drift_sign_grid_max, BarrierTable};
use sovm_core::model::{drift, max_velocity};
use sovm_core::ode::{integrate_deterministic, DeterministicOptions, TrajectoryStatus};
use sovm_core::sde::{check_consistency, ConsistencyOptions};
use sovm_core::{ModelParams, State};

use crate::commands::{prepare, Echo};
use crate::config::RunBlock;
use crate::{CliError, CommonArgs, Verdict};

const DERIVATIVE_LAW_TOL: f64 = 1e-7;
const FLAT_TOL: f64 = 1e-12;
const ENERGY_STEP_TOL: f64 = 1e-8;
const CONVERGENCE_TOL: f64 = 1e-6;
const EQUILIBRIUM_TOL: f64 = 1e-12;
const DRIFT_SIGN_TOL: f64 = 1e-9;
const DIVERGENCE_DT_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

/// One named invariant with its measured value.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    pub relation: Relation,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: &str, measured: f64, bound: f64) -> Self {
        Check {
            name: name.into(),
            measured,
            bound,
            relation: Relation::AtMost,
            pass: measured <= bound,
        }
    }

    pub fn at_least(name: &str, measured: f64, bound: f64) -> Self {
        Check {
            name: name.into(),
            measured,
            bound,
            relation: Relation::AtLeast,
            pass: measured >= bound,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rel = match self.relation {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
        };
        write!(
            f,
            "{} {}: {:.6e} {rel} {:.6e}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.bound
        )
    }
}

/// Shape and derivative checks on a built barrier table.
pub fn barrier_checks(p: &ModelParams, table: &BarrierTable) -> Result<Vec<Check>, CliError> {
    let rise = table
        .phi_vals
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    let min_phi = table.phi_vals.iter().copied().fold(f64::INFINITY, f64::min);
    let (mut law, mut flat, mut measured) = (0.0f64, 0.0f64, 0.0f64);
    for (i, &y) in table.y_grid.iter().enumerate() {
        let phi = table.phi_vals[i];
        if y <= 0.0 {
            law = law.max((table.dphi_vals[i] + 1.0 / (p.alpha() + p.beta() / (phi * phi))).abs());
        }
        if y >= table.varpi {
            flat = flat.max(table.dphi_vals[i].abs());
        }
        measured = measured.max(table.dphi_vals[i].abs()).max(table.d2phi_vals[i].abs());
    }
    Ok(vec![
        Check::at_most("barrier.max_rise", rise, 0.0),
        Check::at_least("barrier.min_phi", min_phi, table.phi_lower),
        Check::at_most("barrier.derivative_law_residual", law, DERIVATIVE_LAW_TOL),
        Check::at_most("barrier.flat_slope_above_varpi", flat, FLAT_TOL),
        Check::at_most("barrier.derivative_max", measured, table.analytic_bound),
    ])
}

/// Starting points on a 5 × 10 grid of `(0.05, 3] × [-2, 2]`.
fn initial_grid() -> Vec<State> {
    let mut out = Vec::new();
    for i in 0..5 {
        for j in 0..10 {
            let x = 0.05 + 2.95 * (i as f64 + 0.5) / 5.0;
            let y = -2.0 + 4.0 * j as f64 / 9.0;
            out.push(State::new(x, y));
        }
    }
    out
}

fn model_checks(p: &ModelParams) -> Result<Vec<Check>, CliError> {
    let b = drift(p.equilibrium(), p)?;
    Ok(vec![
        Check::at_most("model.v_circ", p.v_circ(), max_velocity()),
        Check::at_most("model.equilibrium_residual", b.dx.hypot(b.dy), EQUILIBRIUM_TOL),
    ])
}

fn ode_checks(p: &ModelParams) -> Result<Vec<Check>, CliError> {
    let opts = DeterministicOptions::default();
    let eq = p.equilibrium();
    let (mut step, mut dist, mut gap, mut settled) = (f64::NEG_INFINITY, 0.0f64, f64::INFINITY, 0usize);
    let grid = initial_grid();
    for &z0 in &grid {
        let tr = integrate_deterministic(z0, p, 200.0, &opts)?;
        step = step.max(tr.max_energy_increase());
        dist = dist.max(tr.last_state().distance(&eq));
        gap = gap.min(tr.min_gap());
        settled += (tr.status == TrajectoryStatus::ConvergedToEquilibrium && tr.fault.is_none()) as usize;
    }
    Ok(vec![
        Check::at_most("ode.max_energy_increase", step, ENERGY_STEP_TOL),
        Check::at_most("ode.final_distance_to_equilibrium", dist, CONVERGENCE_TOL),
        Check::at_least("ode.min_gap", gap, opts.collision_threshold),
        Check::at_least("ode.converged_fraction", settled as f64 / grid.len() as f64, 1.0),
    ])
}

fn sde_checks(p: &ModelParams, seed: u64, seeds: u64) -> Result<Vec<Check>, CliError> {
    let opts = ConsistencyOptions::default();
    let z0 = State::new(0.3, -4.0);
    let (mut worst, mut both, mut ordered) = (0.0f64, 0u64, 0u64);
    for s in seed..seed + seeds {
        let rep = check_consistency(z0, 4.0, 0.05, 0.1, s, p, &opts)?;
        worst = worst.max(rep.max_divergence);
        if let Some(o) = rep.ordered {
            both += 1;
            ordered += u64::from(o);
        }
    }
    let frac = if both == 0 { 0.0 } else { ordered as f64 / both as f64 };
    Ok(vec![
        Check::at_most("sde.consistency_divergence", worst, DIVERGENCE_DT_FACTOR * opts.dt),
        Check::at_least("sde.consistency_ordered_fraction", frac, 1.0),
    ])
}

pub fn run(args: &CommonArgs) -> Result<Verdict, CliError> {
    let (cfg, block, out) = prepare(args, "validate")?;
    let RunBlock::Validate(mut run) = block else {
        unreachable!("run_block returns the requested mode")
    };
    let p = &cfg.model;
    if let Some(seed) = args.seed {
        run.seed = seed;
    }
    if run.drift_sign_grid < 2 {
        return Err(CliError::Config("drift_sign_grid must be at least 2".into()));
    }

    let mut checks = model_checks(p)?;
    checks.extend(ode_checks(p)?);
    let table = build_barrier(p, run.grid_resolution)?;
    checks.extend(barrier_checks(p, &table)?);
    let n = run.drift_sign_grid;
    let worst = drift_sign_grid_max(&table, p, n, n).map_or(f64::NEG_INFINITY, |(f, _)| f);
    checks.push(Check::at_most("barrier.drift_sign_grid_max", worst, DRIFT_SIGN_TOL));
    checks.extend(sde_checks(p, run.seed, run.consistency_seeds)?);

    #[derive(Serialize)]
    struct Report<'a> {
        config: Echo<'a>,
        checks: &'a [Check],
        pass: bool,
    }
    let pass = checks.iter().all(|c| c.pass);
    for c in &checks {
        println!("{c}");
    }
    let path = out.write_json(
        "validate.json",
        &Report {
            config: Echo {
                model: p,
                run: RunBlock::Validate(run),
            },
            checks: &checks,
            pass,
        },
    )?;
    println!("wrote {}", path.display());
    Ok(if pass { Verdict::Pass } else { Verdict::Fail })
}
