use std::time::Instant;

use serde::Serialize;
use sovm_core::barrier::{build_barrier, DEFAULT_RESOLUTION};
use sovm_core::integrator::StepControl;
use sovm_core::mc::{run_sweep, summarize, SweepSpec};
use sovm_core::model::{cutoff, optimal_velocity, potential};
use sovm_core::ode::{integrate_deterministic, DeterministicOptions, TrajectoryStatus};
use sovm_core::sde::{simulate_path, working_delta, SdePathConfig};
use sovm_core::{DerivedConstants, ModelParams, State};

use crate::config::{self, RunBlock, RunConfig};
use crate::output::{float_row, OutDir};
use crate::validate::{barrier_checks, Check};
use crate::{CliError, CommonArgs, Verdict};

/// The configuration a run actually used, echoed into every output file.
#[derive(Debug, Serialize)]
pub struct Echo<'a> {
    pub model: &'a ModelParams,
    pub run: RunBlock,
}

pub fn prepare(args: &CommonArgs, mode: &str) -> Result<(RunConfig, RunBlock, OutDir), CliError> {
    let out = OutDir::open(&args.out)?;
    let cfg = config::load(&args.config)?;
    let block = config::run_block(&cfg, mode)?;
    Ok((cfg, block, out))
}

fn start_state(z0: &mut Option<[f64; 2]>, p: &ModelParams) -> State {
    let z = p.initial_state();
    let [x, y] = *z0.get_or_insert([z.x, z.y]);
    State::new(x, y)
}

pub fn deterministic(args: &CommonArgs) -> Result<Verdict, CliError> {
    let (cfg, block, out) = prepare(args, "deterministic")?;
    let RunBlock::Deterministic(mut run) = block else {
        unreachable!("run_block returns the requested mode")
    };
    let p = &cfg.model;
    let z0 = start_state(&mut run.z0, p);
    let opts = DeterministicOptions {
        step: StepControl {
            rtol: run.rtol,
            atol: run.atol,
            ..StepControl::default()
        },
        collision_threshold: run.collision_threshold,
        convergence_tol: run.convergence_tol,
        convergence_hold: run.convergence_hold,
    };
    let tr = integrate_deterministic(z0, p, run.horizon, &opts)?;
    let echo = Echo {
        model: p,
        run: RunBlock::Deterministic(run),
    };
    let rows = (0..tr.len()).map(|i| {
        let s = tr.states[i];
        float_row(&[tr.times[i], s.x, s.y, tr.h_values[i]])
    });
    let path = out.write_csv("trajectory.csv", &echo, &["t", "x", "y", "H"], rows)?;

    let last = tr.last_state();
    println!("status: {:?}", tr.status);
    println!("final state: t = {:.16e}, x = {:.16e}, y = {:.16e}", tr.times[tr.len() - 1], last.x, last.y);
    println!("wrote {}", path.display());
    if let Some(fault) = &tr.fault {
        eprintln!("integrator fault: {fault}");
        return Ok(Verdict::Fail);
    }
    Ok(if tr.status == TrajectoryStatus::CollisionDetected {
        Verdict::Fail
    } else {
        Verdict::Pass
    })
}

pub fn sde(args: &CommonArgs) -> Result<Verdict, CliError> {
    let (cfg, block, out) = prepare(args, "sde")?;
    let RunBlock::Sde(mut run) = block else {
        unreachable!("run_block returns the requested mode")
    };
    let p = &cfg.model;
    if let Some(seed) = args.seed {
        run.seed = seed;
    }
    let delta = *run.delta.get_or_insert(working_delta(p));
    let z0 = start_state(&mut run.z0, p);
    if !(z0.x > 0.0 && z0.y.is_finite()) {
        return Err(CliError::Config(format!("z0 = ({}, {}) must have x > 0", z0.x, z0.y)));
    }
    let table = build_barrier(p, DEFAULT_RESOLUTION)?;
    let path_cfg = |i: u32| SdePathConfig {
        epsilon: run.epsilon,
        delta,
        dt: run.dt,
        horizon: run.horizon,
        seed: run.seed,
        trial_index: u64::from(i),
        stride: run.stride,
    };
    path_cfg(0).validate(p)?;

    let echo = Echo {
        model: p,
        run: RunBlock::Sde(run.clone()),
    };
    let mut records = Vec::new();
    for i in 0..run.paths {
        let (path, rec) = simulate_path(z0, &path_cfg(i), p, &table)?;
        let rows = (0..path.times.len()).map(|k| {
            let s = path.states[k];
            float_row(&[path.times[k], s.x, s.y, path.h_values[k]])
        });
        out.write_csv(&format!("sde_path_{i}.csv"), &echo, &["t", "x", "y", "H"], rows)?;
        println!("path {i}: {:?} at t = {:.6}", rec.terminal_status, path.times.last().copied().unwrap_or(0.0));
        records.push(rec);
    }
    #[derive(Serialize)]
    struct Records<'a> {
        config: &'a Echo<'a>,
        records: Vec<sovm_core::sde::StoppingRecord>,
    }
    let path = out.write_json(
        "sde_records.json",
        &Records {
            config: &echo,
            records,
        },
    )?;
    println!("wrote {}", path.display());
    Ok(Verdict::Pass)
}

pub fn sweep(args: &CommonArgs) -> Result<Verdict, CliError> {
    let (cfg, block, out) = prepare(args, "sweep")?;
    let RunBlock::Sweep(mut run) = block else {
        unreachable!("run_block returns the requested mode")
    };
    let p = &cfg.model;
    if let Some(seed) = args.seed {
        run.seed = seed;
    }
    let grid = SweepSpec::default_grid(*p, run.seed);
    let spec = SweepSpec {
        epsilons: run.epsilons.get_or_insert(grid.epsilons).clone(),
        horizons: run.horizons.get_or_insert(grid.horizons).clone(),
        trials_per_cell: *run.trials_per_cell.get_or_insert(grid.trials_per_cell),
        base_seed: run.seed,
        dt: *run.dt.get_or_insert(grid.dt),
        z0: start_state(&mut run.z0, p),
        params: *p,
    };
    let resolution = *run.grid_resolution.get_or_insert(DEFAULT_RESOLUTION);
    spec.validate()?;
    let table = build_barrier(p, resolution)?;
    let threads = args.threads();

    let start = Instant::now();
    let result = run_sweep(&spec, &table, threads)?;
    let wall_time_s = start.elapsed().as_secs_f64();
    let summary = summarize(&result)?;

    let echo = Echo {
        model: p,
        run: RunBlock::Sweep(run),
    };
    let header = [
        "epsilon",
        "L",
        "eps_sqrtL",
        "n_trials",
        "n_tauH",
        "n_collision",
        "n_danger",
        "n_exited_velocity",
        "freq_tauH",
        "freq_collision",
        "ci_halfwidth_95",
        "ci_halfwidth_collision",
        "paper_bound",
        "n_faults",
        "valid",
    ];
    let rows = result.cells.iter().map(|c| {
        let mut row = float_row(&[c.epsilon, c.horizon, c.eps_sqrt_l]);
        row.extend(
            [c.n_trials, c.n_tau_h, c.n_collision, c.n_danger, c.n_exited_velocity].map(|n| n.to_string()),
        );
        row.extend(float_row(&[
            c.freq_tau_h,
            c.freq_collision,
            c.ci_halfwidth_95,
            c.ci_halfwidth_collision,
            c.escape_bound,
        ]));
        row.push(c.n_faults.to_string());
        row.push(c.valid.to_string());
        row
    });
    out.write_csv("sweep.csv", &echo, &header, rows)?;

    #[derive(Serialize)]
    struct SweepFile<'a> {
        config: &'a Echo<'a>,
        code_version: &'static str,
        wall_time_s: f64,
        threads: usize,
        result: &'a sovm_core::mc::SweepResult,
        summary: &'a sovm_core::mc::SweepSummary,
    }
    let path = out.write_json(
        "sweep.json",
        &SweepFile {
            config: &echo,
            code_version: env!("CARGO_PKG_VERSION"),
            wall_time_s,
            threads,
            result: &result,
            summary: &summary,
        },
    )?;

    for &i in &summary.failures {
        let r = &summary.rows[i];
        println!(
            "FAILURE eps = {}, L = {}: freq_tauH {:.4e} > bound {:.4e} + ci {:.4e}",
            r.epsilon, r.horizon, r.freq_tau_h, r.escape_bound, r.ci_halfwidth_95
        );
    }
    for &i in &summary.invalid {
        let r = &summary.rows[i];
        println!("INVALID eps = {}, L = {}: {} faulted trials", r.epsilon, r.horizon, r.n_faults);
    }
    for &(i, j) in &summary.scaling_violations {
        let (a, b) = (&summary.rows[i], &summary.rows[j]);
        println!(
            "note: collision frequency at eps_sqrtL = {:.4} exceeds the one at {:.4}",
            a.eps_sqrt_l, b.eps_sqrt_l
        );
    }
    println!(
        "{} cells, {} failures, {} invalid, {:.1} s on {threads} threads; wrote {}",
        result.cells.len(),
        summary.failures.len(),
        summary.invalid.len(),
        wall_time_s,
        path.display()
    );
    Ok(if summary.is_clean() { Verdict::Pass } else { Verdict::Fail })
}

pub fn barrier(args: &CommonArgs) -> Result<Verdict, CliError> {
    let (cfg, block, out) = prepare(args, "barrier")?;
    let RunBlock::Barrier(run) = block else {
        unreachable!("run_block returns the requested mode")
    };
    let p = &cfg.model;
    if run.curve_points < 2 {
        return Err(CliError::Config("curve_points must be at least 2".into()));
    }
    let table = build_barrier(p, run.grid_resolution)?;
    let checks = barrier_checks(p, &table)?;
    let echo = Echo {
        model: p,
        run: RunBlock::Barrier(run.clone()),
    };

    let rows = (0..table.len()).map(|i| {
        float_row(&[table.y_grid[i], table.phi_vals[i], table.dphi_vals[i], table.d2phi_vals[i]])
    });
    out.write_csv("barrier.csv", &echo, &["y", "phi", "dphi", "d2phi"], rows)?;

    let dc = p.derived();
    let (x_lo, x_hi) = (0.5 * dc.phi_lower, 2.0 * dc.x_bar.max(dc.x_inf));
    let n = run.curve_points;
    let mut curves = Vec::with_capacity(n);
    for i in 0..n {
        let x = x_lo + (x_hi - x_lo) * i as f64 / (n - 1) as f64;
        curves.push(float_row(&[x, optimal_velocity(x / p.d()), potential(x, p)?]));
    }
    out.write_csv("model_curves.csv", &echo, &["x", "V", "P"], curves)?;

    let delta = working_delta(p);
    let edge = 2.0 / delta;
    let cut = (0..n).map(|i| {
        let y = -edge + 2.0 * edge * i as f64 / (n - 1) as f64;
        float_row(&[y, cutoff(y, delta)])
    });
    out.write_csv("cutoff.csv", &echo, &["y", "c"], cut)?;

    #[derive(Serialize)]
    struct TableSummary {
        nodes: usize,
        phi_lower: f64,
        deriv_bound: f64,
        analytic_bound: f64,
        y_bar: f64,
        varpi: f64,
        x_dagger: f64,
        working_delta: f64,
    }
    #[derive(Serialize)]
    struct BarrierFile<'a> {
        config: &'a Echo<'a>,
        constants: &'a DerivedConstants,
        table: TableSummary,
        checks: &'a [Check],
        pass: bool,
    }
    let pass = checks.iter().all(|c| c.pass);
    let path = out.write_json(
        "barrier.json",
        &BarrierFile {
            config: &echo,
            constants: dc,
            table: TableSummary {
                nodes: table.len(),
                phi_lower: table.phi_lower,
                deriv_bound: table.deriv_bound,
                analytic_bound: table.analytic_bound,
                y_bar: table.y_bar,
                varpi: table.varpi,
                x_dagger: table.x_dagger,
                working_delta: delta,
            },
            checks: &checks,
            pass,
        },
    )?;
    for c in &checks {
        println!("{c}");
    }
    println!("wrote {}", path.display());
    Ok(if pass { Verdict::Pass } else { Verdict::Fail })
}
