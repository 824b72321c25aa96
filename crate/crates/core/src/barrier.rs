//! The collision barrier: the curve `φ†` solving `φ' = -φ²/(αφ² + β)`,
//! `φ(-ȳ) = x†`, its mollified flattening `φ` to the right of zero, the
//! danger functions `D = φ(y) - x` and `Δ = (D⁺)²`, and the drift term `ϝ`
//! of the Itô expansion of `Δ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::Hermite;
use crate::model::{optimal_velocity, ModelParams, State, Tangent};

/// Default number of table nodes on `[-ȳ, ȳ]`.
pub const DEFAULT_RESOLUTION: usize = 10_000;

/// Closed-form solution of the barrier ODE through `(y0, x0)`.
///
/// The ODE separates as `dy = -(α + β/φ²) dφ`, so along solutions
/// `αφ - β/φ = αx0 - β/x0 - (y - y0)`; the positive root of that quadratic
/// is returned.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierDagger {
    alpha: f64,
    beta: f64,
    y0: f64,
    x0: f64,
}

impl BarrierDagger {
    pub fn new(y0: f64, x0: f64, alpha: f64, beta: f64) -> Self {
        BarrierDagger {
            alpha,
            beta,
            y0,
            x0,
        }
    }

    pub fn anchor(&self) -> (f64, f64) {
        (self.y0, self.x0)
    }

    #[inline]
    pub fn value(&self, y: f64) -> f64 {
        let (a, b) = (self.alpha, self.beta);
        let c = a * self.x0 - b / self.x0 - (y - self.y0);
        let r = (c * c + 4.0 * a * b).sqrt();
        // pick the cancellation-free form of the positive root
        if c >= 0.0 {
            (c + r) / (2.0 * a)
        } else {
            2.0 * b / (r - c)
        }
    }

    /// `f(φ) = -φ²/(αφ² + β)`.
    #[inline]
    pub fn slope_at(&self, phi: f64) -> f64 {
        let s = phi * phi;
        -s / (self.alpha * s + self.beta)
    }

    /// `φ†'' = f'(φ†) φ†'` with `f'(u) = -2βu/(αu² + β)²`.
    #[inline]
    pub fn curvature_at(&self, phi: f64) -> f64 {
        let q = self.alpha * phi * phi + self.beta;
        -2.0 * self.beta * phi / (q * q) * self.slope_at(phi)
    }

    /// `(φ†, φ†', φ†'')` at `y`.
    #[inline]
    pub fn eval(&self, y: f64) -> (f64, f64, f64) {
        let phi = self.value(y);
        (phi, self.slope_at(phi), self.curvature_at(phi))
    }
}

/// The unflattened barrier `φ†` anchored at `(-ȳ, x†)`.
///
/// Defined on all of ℝ; `y_span` only has to cover `[-ȳ, ȳ]`.
pub fn solve_barrier_dagger(p: &ModelParams, y_span: (f64, f64)) -> Result<BarrierDagger> {
    let dc = p.derived();
    if !(y_span.0 <= -dc.y_bar && y_span.1 >= dc.y_bar) {
        return Err(Error::Config(format!(
            "barrier span [{}, {}] must contain [-{y}, {y}]",
            y_span.0,
            y_span.1,
            y = dc.y_bar
        )));
    }
    Ok(BarrierDagger::new(-dc.y_bar, dc.x_dagger, p.alpha(), p.beta()))
}

#[inline]
fn bump(u: f64) -> f64 {
    if u > 0.0 {
        (-1.0 / u).exp()
    } else {
        0.0
    }
}

/// `(g, g', g'')` for `g(u) = exp(-1/u)`, zero for `u <= 0`.
#[inline]
fn bump3(u: f64) -> (f64, f64, f64) {
    let g = bump(u);
    if g == 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let r = 1.0 / u;
    let r2 = r * r;
    (g, g * r2, g * (r2 * r2 - 2.0 * r2 * r))
}

/// Smooth step `ϱ(u) = g(1-u) / (g(1-u) + g(u))`: 1 on `u <= 0`, 0 on
/// `u >= 1`, nonincreasing and C∞.
#[inline]
pub fn mollifier(u: f64) -> f64 {
    mollifier_derivs(u).0
}

/// `(ϱ, ϱ', ϱ'')` at `u`.
pub fn mollifier_derivs(u: f64) -> (f64, f64, f64) {
    if u <= 0.0 {
        return (1.0, 0.0, 0.0);
    }
    if u >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let (ga, ga1, ga2) = bump3(1.0 - u);
    let (a, da, dda) = (ga, -ga1, ga2);
    let (b, db, ddb) = bump3(u);
    let s = a + b;
    let ds = da + db;
    let n = da * b - a * db;
    let dn = dda * b - a * ddb;
    (a / s, n / (s * s), dn / (s * s) - 2.0 * n * ds / (s * s * s))
}

/// Sampled maxima of `|ϱ'|` and `|ϱ''|` on `[0, 1]`, inflated by a small
/// outward factor.
pub fn mollifier_derivative_maxima() -> (f64, f64) {
    const N: usize = 200_000;
    let (mut m1, mut m2) = (0.0f64, 0.0f64);
    for i in 1..N {
        let (_, d1, d2) = mollifier_derivs(i as f64 / N as f64);
        m1 = m1.max(d1.abs());
        m2 = m2.max(d2.abs());
    }
    (m1 * (1.0 + 1e-6), m2 * (1.0 + 1e-6))
}

/// Analytic bound on `|φ'|` and `|φ''|` assembled from `|φ†'| <= 1/α`,
/// `|f'| <= 1/√(αβ) + (α/8)√(27/(α³β))` and the mollifier maxima.
pub fn analytic_derivative_bound(p: &ModelParams) -> f64 {
    let (a, b) = (p.alpha(), p.beta());
    let w = p.derived().varpi_dagger;
    let (r1, r2) = mollifier_derivative_maxima();
    let kfp = 1.0 / (a * b).sqrt() + a / 8.0 * (27.0 / (a * a * a * b)).sqrt();
    let k1 = 1.0 / a + r1 / a;
    let k2 = kfp / a + 2.0 * r1 / (w * a) + r2 / (w * a);
    k1.max(k2)
}

/// `(φ, φ', φ'')` of the flattened barrier, evaluated exactly.
pub fn barrier_exact(y: f64, dagger: &BarrierDagger, varpi: f64) -> (f64, f64, f64) {
    let top = dagger.value(varpi);
    if y >= varpi {
        return (top, 0.0, 0.0);
    }
    let (f, f1, f2) = dagger.eval(y);
    if y <= 0.0 {
        return (f, f1, f2);
    }
    let (r, r1, r2) = mollifier_derivs(y / varpi);
    let gap = f - top;
    (
        r * gap + top,
        r * f1 + r1 / varpi * gap,
        r * f2 + 2.0 * r1 / varpi * f1 + r2 / (varpi * varpi) * gap,
    )
}

/// Tabulated barrier `φ` with derivative data on `[-ȳ, ȳ]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "TableData")]
pub struct BarrierTable {
    pub y_grid: Vec<f64>,
    pub phi_vals: Vec<f64>,
    pub dphi_vals: Vec<f64>,
    pub d2phi_vals: Vec<f64>,
    /// `(1/x† + 2ȳ/β)⁻¹`.
    pub phi_lower: f64,
    /// Sampled `max(|φ'|, |φ''|)` with outward tolerance.
    pub deriv_bound: f64,
    /// Bound assembled from the analytic estimates, for comparison.
    pub analytic_bound: f64,
    pub y_bar: f64,
    pub varpi: f64,
    pub x_dagger: f64,
    #[serde(skip)]
    phi_interp: Option<Hermite>,
    #[serde(skip)]
    dphi_interp: Option<Hermite>,
}

#[derive(Deserialize)]
struct TableData {
    y_grid: Vec<f64>,
    phi_vals: Vec<f64>,
    dphi_vals: Vec<f64>,
    d2phi_vals: Vec<f64>,
    phi_lower: f64,
    deriv_bound: f64,
    analytic_bound: f64,
    y_bar: f64,
    varpi: f64,
    x_dagger: f64,
}

impl TryFrom<TableData> for BarrierTable {
    type Error = Error;

    fn try_from(d: TableData) -> Result<Self> {
        let n = d.y_grid.len();
        if n < 2
            || d.phi_vals.len() != n
            || d.dphi_vals.len() != n
            || d.d2phi_vals.len() != n
            || !d.y_grid.windows(2).all(|w| w[1] > w[0])
        {
            return Err(Error::Config(
                "barrier table needs equal-length columns on a strictly increasing grid".into(),
            ));
        }
        let mut t = BarrierTable {
            y_grid: d.y_grid,
            phi_vals: d.phi_vals,
            dphi_vals: d.dphi_vals,
            d2phi_vals: d.d2phi_vals,
            phi_lower: d.phi_lower,
            deriv_bound: d.deriv_bound,
            analytic_bound: d.analytic_bound,
            y_bar: d.y_bar,
            varpi: d.varpi,
            x_dagger: d.x_dagger,
            phi_interp: None,
            dphi_interp: None,
        };
        t.rebuild_interpolants();
        Ok(t)
    }
}

impl PartialEq for BarrierTable {
    fn eq(&self, other: &Self) -> bool {
        self.y_grid == other.y_grid
            && self.phi_vals == other.phi_vals
            && self.dphi_vals == other.dphi_vals
            && self.d2phi_vals == other.d2phi_vals
            && self.phi_lower == other.phi_lower
            && self.deriv_bound == other.deriv_bound
    }
}

/// Three uniform segments `[-ȳ, 0]`, `[0, ϖ]`, `[ϖ, ȳ]`; the narrow
/// transition gets a quarter of the nodes since `φ''` scales like `1/ϖ`
/// there.
fn barrier_grid(y_bar: f64, varpi: f64, n: usize) -> Vec<f64> {
    let n_mid = n / 4;
    let n_left = (n - n_mid) / 2;
    let n_right = n - n_mid - n_left;
    let mut grid = Vec::with_capacity(n + 1);
    let mut push_segment = |a: f64, b: f64, m: usize, include_end: bool| {
        for i in 0..m {
            grid.push(a + (b - a) * i as f64 / m as f64);
        }
        if include_end {
            grid.push(b);
        }
    };
    push_segment(-y_bar, 0.0, n_left, false);
    push_segment(0.0, varpi, n_mid, false);
    push_segment(varpi, y_bar, n_right, true);
    grid
}

/// Tabulates `φ`, `φ'`, `φ''` on `[-ȳ, ȳ]` with `grid_resolution` intervals.
pub fn build_barrier(p: &ModelParams, grid_resolution: usize) -> Result<BarrierTable> {
    if grid_resolution < 1000 {
        return Err(Error::InvalidParameter {
            name: "grid_resolution",
            value: grid_resolution as f64,
            constraint: "grid_resolution >= 1000",
        });
    }
    let dc = p.derived();
    let dagger = solve_barrier_dagger(p, (-dc.y_bar, dc.y_bar))?;
    let varpi = dc.varpi_dagger;
    if !(varpi < dc.y_bar) {
        return Err(Error::Config(format!(
            "flattening width {varpi} must lie below y_bar = {}",
            dc.y_bar
        )));
    }
    let y_grid = barrier_grid(dc.y_bar, varpi, grid_resolution);
    let n = y_grid.len();
    let (mut phi, mut dphi, mut d2phi) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for (i, &y) in y_grid.iter().enumerate() {
        let (f, f1, f2) = barrier_exact(y, &dagger, varpi);
        if !(f.is_finite() && f1.is_finite() && f2.is_finite()) {
            return Err(Error::NonFinite { t: y });
        }
        phi[i] = f;
        dphi[i] = f1;
        d2phi[i] = f2;
    }
    let m1 = dphi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let m2 = d2phi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut table = BarrierTable {
        y_grid,
        phi_vals: phi,
        dphi_vals: dphi,
        d2phi_vals: d2phi,
        phi_lower: dc.phi_lower,
        deriv_bound: m1.max(m2) * (1.0 + 1e-6),
        analytic_bound: analytic_derivative_bound(p),
        y_bar: dc.y_bar,
        varpi,
        x_dagger: dc.x_dagger,
        phi_interp: None,
        dphi_interp: None,
    };
    table.rebuild_interpolants();
    Ok(table)
}

impl BarrierTable {
    fn rebuild_interpolants(&mut self) {
        self.phi_interp = Some(Hermite::new(
            self.y_grid.clone(),
            self.phi_vals.clone(),
            self.dphi_vals.clone(),
            true,
        ));
        self.dphi_interp = Some(Hermite::new(
            self.y_grid.clone(),
            self.dphi_vals.clone(),
            self.d2phi_vals.clone(),
            false,
        ));
    }

    fn check_y(&self, op: &'static str, y: f64) -> Result<()> {
        if y.abs() <= self.y_bar {
            Ok(())
        } else {
            Err(Error::Domain {
                op,
                value: y,
                domain: "|y| <= y_bar",
            })
        }
    }

    #[inline]
    fn phi_unchecked(&self, y: f64) -> f64 {
        self.phi_interp
            .as_ref()
            .expect("interpolants are built with the table")
            .eval(y)
    }

    #[inline]
    fn dphi_unchecked(&self, y: f64) -> f64 {
        self.dphi_interp
            .as_ref()
            .expect("interpolants are built with the table")
            .eval(y)
    }

    /// Interpolated `φ(y)`.
    pub fn phi(&self, y: f64) -> Result<f64> {
        self.check_y("phi", y)?;
        Ok(self.phi_unchecked(y))
    }

    /// Interpolated `φ'(y)`.
    pub fn dphi(&self, y: f64) -> Result<f64> {
        self.check_y("dphi", y)?;
        Ok(self.dphi_unchecked(y))
    }

    pub fn len(&self) -> usize {
        self.y_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y_grid.is_empty()
    }
}

/// `D(x, y) = φ(y) - x`, positive to the left of the barrier.
pub fn danger(z: State, table: &BarrierTable) -> Result<f64> {
    table.check_y("danger", z.y)?;
    Ok(table.phi_unchecked(z.y) - z.x)
}

/// `Δ = (max{D, 0})²`.
pub fn danger_squared(z: State, table: &BarrierTable) -> Result<f64> {
    let d = danger(z, table)?.max(0.0);
    Ok(d * d)
}

/// `∇Δ = 2 D⁺ (-1, φ'(y))`.
pub fn danger_squared_gradient(z: State, table: &BarrierTable) -> Result<Tangent> {
    let d = danger(z, table)?.max(0.0);
    Ok(Tangent {
        dx: -2.0 * d,
        dy: 2.0 * d * table.dphi_unchecked(z.y),
    })
}

/// `ϝ(x, y) = -φ'(y){α(V(x/d) - v_circ) + (α + β/x²) y} - y`.
pub fn drift_sign_functional(z: State, table: &BarrierTable, p: &ModelParams) -> Result<f64> {
    if !(z.x > 0.0) {
        return Err(Error::Domain {
            op: "drift_sign_functional",
            value: z.x,
            domain: "x > 0",
        });
    }
    table.check_y("drift_sign_functional", z.y)?;
    let dphi = table.dphi_unchecked(z.y);
    let a = p.alpha();
    let mismatch = a * (optimal_velocity(z.x / p.d()) - p.v_circ());
    Ok(-dphi * (mismatch + (a + p.beta() / (z.x * z.x)) * z.y) - z.y)
}

/// Largest `ϝ` over an `nx × ny` grid of `[φ̲/2, x†] × [-ȳ, ȳ]` restricted
/// to `D >= 0`, with the maximizing point. `None` when no grid point has
/// `D >= 0`.
pub fn drift_sign_grid_max(
    table: &BarrierTable,
    p: &ModelParams,
    nx: usize,
    ny: usize,
) -> Option<(f64, State)> {
    let x_lo = 0.5 * table.phi_lower;
    let x_hi = table.x_dagger;
    let mut best: Option<(f64, State)> = None;
    for j in 0..ny {
        let y = -table.y_bar + 2.0 * table.y_bar * j as f64 / (ny - 1) as f64;
        let phi = table.phi_unchecked(y);
        for i in 0..nx {
            let x = x_lo + (x_hi - x_lo) * i as f64 / (nx - 1) as f64;
            if phi - x < 0.0 {
                break;
            }
            let z = State::new(x, y);
            let f = drift_sign_functional(z, table, p).expect("grid lies in the domain");
            if best.is_none_or(|(b, _)| f > b) {
                best = Some((f, z));
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::canonical;

    fn rk4_dagger(y0: f64, x0: f64, y1: f64, dy: f64, p: &ModelParams) -> f64 {
        let f = |phi: f64| -phi * phi / (p.alpha() * phi * phi + p.beta());
        let n = ((y1 - y0) / dy).round() as usize;
        let h = (y1 - y0) / n as f64;
        let mut phi = x0;
        for _ in 0..n {
            let k1 = f(phi);
            let k2 = f(phi + 0.5 * h * k1);
            let k3 = f(phi + 0.5 * h * k2);
            let k4 = f(phi + h * k3);
            phi += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        phi
    }

    #[test]
    fn dagger_matches_rk4() {
        let p = canonical();
        let dc = *p.derived();
        let dagger = solve_barrier_dagger(&p, (-dc.y_bar, dc.y_bar)).unwrap();
        assert!((dagger.value(-dc.y_bar) - dc.x_dagger).abs() < 1e-14);
        for y in [-1.0, 0.0, dc.varpi_dagger, 1.0, dc.y_bar] {
            let oracle = rk4_dagger(-dc.y_bar, dc.x_dagger, y, 1e-6, &p);
            assert!((dagger.value(y) - oracle).abs() < 1e-11, "y = {y}");
        }
        let top = rk4_dagger(-dc.y_bar, dc.x_dagger, dc.y_bar, 1e-6, &p);
        assert!(top >= 1.0 / (1.0 / dc.x_dagger + 2.0 * dc.y_bar / p.beta()));
    }

    #[test]
    fn dagger_slope_and_lower_bound() {
        let p = canonical();
        let dc = *p.derived();
        let dagger = solve_barrier_dagger(&p, (-3.0, 3.0)).unwrap();
        let mut prev = f64::INFINITY;
        for i in 0..=2000 {
            let y = -dc.y_bar + 2.0 * dc.y_bar * i as f64 / 2000.0;
            let (phi, d1, _) = dagger.eval(y);
            assert!(phi < prev);
            prev = phi;
            assert!(d1.abs() <= 1.0 / p.alpha());
            if i > 0 {
                assert!(phi > 1.0 / (1.0 / dc.x_dagger + (y + dc.y_bar) / p.beta()));
            }
            // derivatives against centered differences
            let h = 1e-5;
            let fd1 = (dagger.value(y + h) - dagger.value(y - h)) / (2.0 * h);
            let fd2 = (dagger.eval(y + h).1 - dagger.eval(y - h).1) / (2.0 * h);
            assert!((fd1 - d1).abs() < 1e-8);
            assert!((fd2 - dagger.eval(y).2).abs() < 1e-8);
        }
        assert!(solve_barrier_dagger(&p, (-1.0, 1.0)).is_err());
    }

    #[test]
    fn mollifier_plateaus_and_flatness() {
        assert_eq!(mollifier(-1.0), 1.0);
        assert_eq!(mollifier(0.0), 1.0);
        assert_eq!(mollifier(1.0), 0.0);
        assert_eq!(mollifier(2.0), 0.0);
        assert!((mollifier(0.5) - 0.5).abs() < 1e-15);
        let h = 1e-3;
        for u in [0.0, 1.0] {
            let d1 = (mollifier(u + h) - mollifier(u - h)) / (2.0 * h);
            let d2 = (mollifier(u + h) - 2.0 * mollifier(u) + mollifier(u - h)) / (h * h);
            assert!(d1.abs() < 1e-6 && d2.abs() < 1e-6, "u = {u}");
        }
        let mut prev = 1.0;
        for i in 0..=10_000 {
            let v = mollifier(i as f64 / 10_000.0);
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn mollifier_derivatives_match_differences() {
        let h = 1e-6;
        for i in 1..200 {
            let u = i as f64 / 200.0;
            let (_, d1, d2) = mollifier_derivs(u);
            let fd1 = (mollifier(u + h) - mollifier(u - h)) / (2.0 * h);
            let fd2 = (mollifier_derivs(u + h).1 - mollifier_derivs(u - h).1) / (2.0 * h);
            assert!((fd1 - d1).abs() < 1e-7 * (1.0 + d1.abs()), "u = {u}");
            assert!((fd2 - d2).abs() < 1e-5 * (1.0 + d2.abs()), "u = {u}");
        }
        // ϱ'(1/2) = -2: a = b = e⁻², a' = -b' = -4e⁻²
        assert!((mollifier_derivs(0.5).1 + 2.0).abs() < 1e-12);
        let (m1, _) = mollifier_derivative_maxima();
        assert!((m1 - 2.0).abs() < 1e-5);
    }

    #[test]
    fn table_invariants() {
        let p = canonical();
        let t = build_barrier(&p, DEFAULT_RESOLUTION).unwrap();
        let dc = *p.derived();
        assert_eq!(t.y_grid[0], -dc.y_bar);
        assert_eq!(*t.y_grid.last().unwrap(), dc.y_bar);
        assert!(t.phi_vals.windows(2).all(|w| w[1] <= w[0]));
        assert!(t.phi_vals.iter().all(|&v| v >= t.phi_lower));
        for (i, &y) in t.y_grid.iter().enumerate() {
            let phi = t.phi_vals[i];
            if y <= 0.0 {
                let law = -1.0 / (p.alpha() + p.beta() / (phi * phi));
                assert!((t.dphi_vals[i] - law).abs() <= 1e-7);
            }
            if y >= dc.varpi_dagger {
                assert!(t.dphi_vals[i].abs() <= 1e-12);
            }
        }
        assert!(t.deriv_bound <= 10.0 * t.analytic_bound);
        assert!(build_barrier(&p, 999).is_err());
    }

    #[test]
    fn table_plateaus_are_exact() {
        let p = canonical();
        let dc = *p.derived();
        let t = build_barrier(&p, 4000).unwrap();
        let dagger = solve_barrier_dagger(&p, (-dc.y_bar, dc.y_bar)).unwrap();
        for (i, &y) in t.y_grid.iter().enumerate() {
            if y <= 0.0 {
                assert_eq!(t.phi_vals[i], dagger.value(y));
            } else if y >= dc.varpi_dagger {
                assert_eq!(t.phi_vals[i], dagger.value(dc.varpi_dagger));
            }
        }
    }

    #[test]
    fn flattened_derivatives_match_differences() {
        let p = canonical();
        let dc = *p.derived();
        let dagger = solve_barrier_dagger(&p, (-dc.y_bar, dc.y_bar)).unwrap();
        let w = dc.varpi_dagger;
        let h = 1e-9;
        for i in 1..50 {
            let y = w * i as f64 / 50.0;
            let (_, d1, d2) = barrier_exact(y, &dagger, w);
            let fd1 = (barrier_exact(y + h, &dagger, w).0 - barrier_exact(y - h, &dagger, w).0)
                / (2.0 * h);
            let fd2 = (barrier_exact(y + h, &dagger, w).1 - barrier_exact(y - h, &dagger, w).1)
                / (2.0 * h);
            assert!((fd1 - d1).abs() < 1e-6 * (1.0 + d1.abs()));
            assert!((fd2 - d2).abs() < 1e-4 * (1.0 + d2.abs()));
        }
    }

    #[test]
    fn self_convergence_under_doubling() {
        let p = canonical();
        let coarse = build_barrier(&p, DEFAULT_RESOLUTION).unwrap();
        let fine = build_barrier(&p, 2 * DEFAULT_RESOLUTION).unwrap();
        let y_bar = p.derived().y_bar;
        let mut worst = 0.0f64;
        for i in 0..=100_000 {
            let y = -y_bar + 2.0 * y_bar * i as f64 / 100_000.0;
            worst = worst.max((coarse.phi(y).unwrap() - fine.phi(y).unwrap()).abs());
        }
        assert!(worst < 1e-9, "worst = {worst:e}");
    }

    #[test]
    fn danger_examples() {
        let p = canonical();
        let dc = *p.derived();
        let t = build_barrier(&p, 4000).unwrap();
        assert!((danger(State::new(0.0, -dc.y_bar), &t).unwrap() - dc.x_dagger).abs() < 1e-14);
        for y in [-1.2, -0.3, 0.001, 0.9] {
            let phi = t.phi(y).unwrap();
            assert!(danger(State::new(phi, y), &t).unwrap().abs() < 1e-15);
        }
        for i in 0..=40 {
            let y = -dc.y_bar + 2.0 * dc.y_bar * i as f64 / 40.0;
            let z = State::new(0.5 * dc.phi_lower, y);
            assert!(danger(z, &t).unwrap() >= 0.5 * dc.phi_lower);
        }
        assert!(danger(State::new(1.0, dc.y_bar + 0.1), &t).is_err());
        assert_eq!(danger_squared(State::new(5.0, 0.0), &t).unwrap(), 0.0);
        let phi0 = t.phi(0.0).unwrap();
        let z = State::new(phi0 - 0.25, 0.0);
        assert!((danger_squared(z, &t).unwrap() - 0.0625).abs() < 1e-14);
    }

    #[test]
    fn danger_squared_gradient_is_continuous() {
        let p = canonical();
        let t = build_barrier(&p, DEFAULT_RESOLUTION).unwrap();
        let h = 1e-6;
        for y in [-1.5, -0.7, -0.01, 0.002, 0.5, 1.5] {
            let phi = t.phi(y).unwrap();
            for dx in [-1e-3, -1e-7, 0.0, 1e-7, 1e-3] {
                let z = State::new(phi + dx, y);
                let g = danger_squared_gradient(z, &t).unwrap();
                let f = |x: f64, y: f64| danger_squared(State::new(x, y), &t).unwrap();
                let gx = (f(z.x + h, y) - f(z.x - h, y)) / (2.0 * h);
                let gy = (f(z.x, y + h) - f(z.x, y - h)) / (2.0 * h);
                assert!((g.dx - gx).abs() < 1e-6, "y = {y}, dx = {dx}");
                assert!((g.dy - gy).abs() < 1e-6, "y = {y}, dx = {dx}");
            }
        }
    }

    #[test]
    fn drift_sign_examples() {
        let p = canonical();
        let dc = *p.derived();
        let t = build_barrier(&p, DEFAULT_RESOLUTION).unwrap();
        for y in [dc.varpi_dagger, 0.5, dc.y_bar] {
            let f = drift_sign_functional(State::new(0.3, y), &t, &p).unwrap();
            assert!((f + y).abs() < 1e-12);
        }
        let eq = drift_sign_functional(State::new(dc.x_inf, 0.0), &t, &p).unwrap();
        assert!(eq.is_finite() && eq.abs() < 1e-12);
        assert!(danger(State::new(dc.x_inf, 0.0), &t).unwrap() < 0.0);
        let (worst, _) = drift_sign_grid_max(&t, &p, 300, 300).unwrap();
        assert!(worst <= 1e-9, "worst = {worst:e}");
    }

    #[test]
    fn serde_round_trip_rebuilds() {
        let p = canonical();
        let t = build_barrier(&p, 2000).unwrap();
        let json = serde_json::to_string(&t).unwrap();
        let back: BarrierTable = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.phi(0.1).unwrap(), t.phi(0.1).unwrap());
        let bad = json.replacen("\"y_grid\":[", "\"y_grid\":[5.0,", 1);
        assert!(serde_json::from_str::<BarrierTable>(&bad).is_err());
    }
}
