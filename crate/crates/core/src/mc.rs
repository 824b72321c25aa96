//! Monte Carlo sweeps over `(ε, L)` grids of collision runs.

use serde::{Deserialize, Serialize};

use crate::barrier::BarrierTable;
use crate::error::{Error, Result};
use crate::model::{ModelParams, State};
use crate::rng::stream_id;
use crate::sde::{effective_collision_run, working_delta, EffectiveRun, MAX_DT};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Grid and trial budget of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub epsilons: Vec<f64>,
    pub horizons: Vec<f64>,
    pub trials_per_cell: u32,
    pub base_seed: u64,
    pub dt: f64,
    pub params: ModelParams,
    pub z0: State,
}

impl SweepSpec {
    /// ε ∈ {0, 0.01, 0.02, 0.05, 0.1, 0.2}, L ∈ {5, 10, 20, 40}, 10⁴
    /// trials per cell, dt = 1e-3, started from the configured initial state.
    pub fn default_grid(params: ModelParams, base_seed: u64) -> Self {
        SweepSpec {
            epsilons: vec![0.0, 0.01, 0.02, 0.05, 0.1, 0.2],
            horizons: vec![5.0, 10.0, 20.0, 40.0],
            trials_per_cell: 10_000,
            base_seed,
            dt: 1e-3,
            z0: params.initial_state(),
            params,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.epsilons.is_empty() || self.horizons.is_empty() {
            return fail("sweep needs at least one epsilon and one horizon".into());
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(**e >= 0.0 && e.is_finite())) {
            return fail(format!("epsilon {e} must be finite and >= 0"));
        }
        if let Some(l) = self.horizons.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return fail(format!("horizon {l} must be finite and > 0"));
        }
        if self.trials_per_cell < 100 {
            return fail(format!(
                "trials_per_cell = {} must be at least 100",
                self.trials_per_cell
            ));
        }
        if !(self.dt > 0.0 && self.dt <= MAX_DT) {
            return fail(format!("dt = {} must lie in (0, {MAX_DT}]", self.dt));
        }
        if !(self.z0.x > 0.0 && self.z0.y.is_finite()) {
            return fail(format!("z0 = ({}, {}) must have x > 0", self.z0.x, self.z0.y));
        }
        if self.cells().len() > u32::MAX as usize {
            return fail("too many cells".into());
        }
        Ok(())
    }

    /// `(ε, L)` pairs in cell order: ε-major, then L.
    pub fn cells(&self) -> Vec<(f64, f64)> {
        self.epsilons
            .iter()
            .flat_map(|&e| self.horizons.iter().map(move |&l| (e, l)))
            .collect()
    }
}

/// Aggregated outcome of one `(ε, L)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub epsilon: f64,
    #[serde(rename = "L")]
    pub horizon: f64,
    #[serde(rename = "eps_sqrtL")]
    pub eps_sqrt_l: f64,
    /// Trials that completed without a fault.
    pub n_trials: u32,
    #[serde(rename = "n_tauH")]
    pub n_tau_h: u32,
    pub n_collision: u32,
    /// Trials with `τ_D < L`.
    pub n_danger: u32,
    /// Trials that left the regularization set through `|y|`.
    pub n_exited_velocity: u32,
    #[serde(rename = "freq_tauH")]
    pub freq_tau_h: f64,
    pub freq_collision: f64,
    /// Wilson half-width for `freq_tauH`.
    pub ci_halfwidth_95: f64,
    /// Wilson half-width for `freq_collision`.
    pub ci_halfwidth_collision: f64,
    /// `min(1, 4ε²ȳ²L)`.
    #[serde(rename = "paper_bound")]
    pub escape_bound: f64,
    pub n_faults: u32,
    /// False when more than 1% of the trials faulted.
    pub valid: bool,
}

/// Per-cell records in cell order, with the constants they were run at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub cells: Vec<CellResult>,
    pub working_delta: f64,
    pub y_bar: f64,
    pub trials_per_cell: u32,
}

/// Wilson score interval `(lower, upper)` for `k` successes in `n` trials.
pub fn wilson_interval(k: u32, n: u32, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = f64::from(n);
    let p = f64::from(k) / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let lo = if k == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if p == 1.0 { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// Half-width of [`wilson_interval`].
pub fn wilson_halfwidth(k: u32, n: u32, z: f64) -> f64 {
    let (lo, hi) = wilson_interval(k, n, z);
    0.5 * (hi - lo)
}

/// `min(1, 4ε²ȳ²L)`.
pub fn escape_bound(epsilon: f64, y_bar: f64, horizon: f64) -> f64 {
    (4.0 * epsilon * epsilon * y_bar * y_bar * horizon).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Trial {
    Done {
        tau_h: bool,
        collision: bool,
        danger: bool,
        exited_velocity: bool,
    },
    Fault,
}

fn run_trial(
    spec: &SweepSpec,
    table: &BarrierTable,
    cells: &[(f64, f64)],
    cell: usize,
    trial: u32,
) -> Trial {
    let (epsilon, horizon) = cells[cell];
    let run = EffectiveRun {
        epsilon,
        horizon,
        dt: spec.dt,
        seed: spec.base_seed,
        trial_index: stream_id(cell as u32, trial),
    };
    match effective_collision_run(spec.z0, &run, &spec.params, table) {
        Ok(rec) => {
            let before = |t: Option<f64>| t.is_some_and(|t| t < horizon);
            Trial::Done {
                tau_h: before(rec.tau_h),
                collision: before(rec.collision_proxy),
                danger: before(rec.tau_d),
                exited_velocity: rec.collision_proxy.is_none() && before(rec.tau_eps_delta),
            }
        }
        Err(_) => Trial::Fault,
    }
}

#[cfg(feature = "parallel")]
fn run_all(
    spec: &SweepSpec,
    table: &BarrierTable,
    cells: &[(f64, f64)],
    threads: usize,
) -> Result<Vec<Trial>> {
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let n = spec.trials_per_cell;
    Ok(pool.install(|| {
        (0..cells.len() as u64 * u64::from(n))
            .into_par_iter()
            .map(|i| run_trial(spec, table, cells, (i / u64::from(n)) as usize, (i % u64::from(n)) as u32))
            .collect()
    }))
}

#[cfg(not(feature = "parallel"))]
fn run_all(
    spec: &SweepSpec,
    table: &BarrierTable,
    cells: &[(f64, f64)],
    _threads: usize,
) -> Result<Vec<Trial>> {
    let n = spec.trials_per_cell;
    Ok((0..cells.len())
        .flat_map(|c| (0..n).map(move |t| (c, t)))
        .map(|(c, t)| run_trial(spec, table, cells, c, t))
        .collect())
}

/// Runs every cell of `spec` on `threads` workers. The result does not
/// depend on `threads`.
pub fn run_sweep(spec: &SweepSpec, table: &BarrierTable, threads: usize) -> Result<SweepResult> {
    spec.validate()?;
    let dc = spec.params.derived();
    if table.y_bar != dc.y_bar || table.phi_lower != dc.phi_lower {
        return Err(Error::Config(
            "barrier table was built for different model parameters".into(),
        ));
    }
    let cells = spec.cells();
    let trials = run_all(spec, table, &cells, threads)?;
    let per = spec.trials_per_cell as usize;
    let results = cells
        .iter()
        .zip(trials.chunks(per))
        .map(|(&(epsilon, horizon), chunk)| {
            let mut c = CellResult {
                epsilon,
                horizon,
                eps_sqrt_l: epsilon * horizon.sqrt(),
                n_trials: 0,
                n_tau_h: 0,
                n_collision: 0,
                n_danger: 0,
                n_exited_velocity: 0,
                freq_tau_h: 0.0,
                freq_collision: 0.0,
                ci_halfwidth_95: 0.0,
                ci_halfwidth_collision: 0.0,
                escape_bound: escape_bound(epsilon, dc.y_bar, horizon),
                n_faults: 0,
                valid: true,
            };
            for t in chunk {
                match *t {
                    Trial::Done {
                        tau_h,
                        collision,
                        danger,
                        exited_velocity,
                    } => {
                        c.n_trials += 1;
                        c.n_tau_h += tau_h as u32;
                        c.n_collision += collision as u32;
                        c.n_danger += danger as u32;
                        c.n_exited_velocity += exited_velocity as u32;
                    }
                    Trial::Fault => c.n_faults += 1,
                }
            }
            if c.n_trials > 0 {
                c.freq_tau_h = f64::from(c.n_tau_h) / f64::from(c.n_trials);
                c.freq_collision = f64::from(c.n_collision) / f64::from(c.n_trials);
            }
            c.ci_halfwidth_95 = wilson_halfwidth(c.n_tau_h, c.n_trials, Z95);
            c.ci_halfwidth_collision = wilson_halfwidth(c.n_collision, c.n_trials, Z95);
            c.valid = f64::from(c.n_faults) <= 0.01 * f64::from(spec.trials_per_cell);
            c
        })
        .collect();
    Ok(SweepResult {
        cells: results,
        working_delta: working_delta(&spec.params),
        y_bar: dc.y_bar,
        trials_per_cell: spec.trials_per_cell,
    })
}

/// Cells sorted by `ε√L` with the checks applied to them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub rows: Vec<CellResult>,
    /// Rows (indices into `rows`) where `freq_tauH > escape_bound + ci`.
    pub failures: Vec<usize>,
    /// Rows with too many faulted trials.
    pub invalid: Vec<usize>,
    /// Row pairs `(i, j)` at equal `L` with `ε_i√L < ε_j√L / 2` but
    /// `freq_collision_i > freq_collision_j + 2 ci`.
    pub scaling_violations: Vec<(usize, usize)>,
}

impl SweepSummary {
    pub fn is_clean(&self) -> bool {
        self.failures.is_empty() && self.invalid.is_empty()
    }
}

pub fn summarize(result: &SweepResult) -> Result<SweepSummary> {
    if result.cells.is_empty() {
        return Err(Error::Config("cannot summarize an empty sweep".into()));
    }
    let mut rows = result.cells.clone();
    rows.sort_by(|a, b| {
        a.eps_sqrt_l
            .total_cmp(&b.eps_sqrt_l)
            .then(a.horizon.total_cmp(&b.horizon))
    });
    let failures = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.freq_tau_h > r.escape_bound + r.ci_halfwidth_95)
        .map(|(i, _)| i)
        .collect();
    let invalid = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| !r.valid)
        .map(|(i, _)| i)
        .collect();
    let mut scaling_violations = Vec::new();
    for (i, a) in rows.iter().enumerate() {
        for (j, b) in rows.iter().enumerate() {
            if a.horizon == b.horizon && a.eps_sqrt_l < 0.5 * b.eps_sqrt_l {
                let ci = a.ci_halfwidth_collision.max(b.ci_halfwidth_collision);
                if a.freq_collision > b.freq_collision + 2.0 * ci {
                    scaling_violations.push((i, j));
                }
            }
        }
    }
    Ok(SweepSummary {
        rows,
        failures,
        invalid,
        scaling_violations,
    })
}
