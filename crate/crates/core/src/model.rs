//! Model constants, the optimal-velocity law, the potential/Hamiltonian pair
//! and the raw and regularized drift fields of the reduced (gap, relative
//! velocity) system.
//!
//! Coordinates are those of the lead vehicle's frame: `x` is the following
//! distance and `y` the relative velocity `v_circ - (follower speed)`, so
//! `dx/dt = y` and a collision is `x = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{require, Error, Result};

/// Supremum of the optimal-velocity function, `1 + tanh(2)`.
pub fn max_velocity() -> f64 {
    1.0 + 2f64.tanh()
}

/// `V(x) = tanh(x - 2) - tanh(-2)`.
#[inline]
pub fn optimal_velocity(x: f64) -> f64 {
    (x - 2.0).tanh() + 2f64.tanh()
}

/// Closed-form inverse of [`optimal_velocity`] on `(0, 1 + tanh 2)`.
pub fn optimal_velocity_inverse(v: f64) -> Result<f64> {
    if !(v > 0.0 && v < max_velocity()) {
        return Err(Error::Domain {
            op: "optimal_velocity_inverse",
            value: v,
            domain: "(0, 1 + tanh 2)",
        });
    }
    Ok(2.0 + (v - 2f64.tanh()).atanh())
}

/// Numerically stable `ln cosh(u)`.
#[inline]
fn ln_cosh(u: f64) -> f64 {
    let a = u.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// Physical constants as they appear in configuration files.
///
/// Units: `alpha` 1/time, `beta` length²/time, `d` length, `v_circ`
/// length/time, `x_circ` length, `y_circ` length/time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalParams {
    pub alpha: f64,
    pub beta: f64,
    pub d: f64,
    pub v_circ: f64,
    pub x_circ: f64,
    pub y_circ: f64,
}

/// Quantities derived once from [`PhysicalParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    /// Equilibrium gap, `d V⁻¹(v_circ)`.
    pub x_inf: f64,
    /// Initial energy `H(x_circ, y_circ)`.
    pub h_circ: f64,
    /// Right edge of the `H <= h_circ + 1` box.
    pub x_bar: f64,
    /// Velocity bound of the `H <= h_circ + 1` box, `sqrt(2(h_circ + 1))`.
    pub y_bar: f64,
    /// `min(x_circ, x_inf)`; the boundary strip is `(0, x_minus / 2)`.
    pub x_minus: f64,
    /// Barrier anchor `min(x_circ, d V⁻¹(v_circ / 2))`.
    pub x_dagger: f64,
    /// Barrier floor `(1/x_dagger + 2 y_bar / beta)⁻¹`.
    pub phi_lower: f64,
    /// Width of the barrier's flattening region.
    pub varpi_dagger: f64,
    /// Largest regularization scale for which the agreement set contains
    /// `[phi_lower / 2, ∞) × [-y_bar, y_bar]`.
    pub delta_bar: f64,
}

/// Validated model parameters with their derived constants.
///
/// Immutable after construction; construct with [`ModelParams::new`] or by
/// deserializing a [`PhysicalParams`] block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PhysicalParams", into = "PhysicalParams")]
pub struct ModelParams {
    physical: PhysicalParams,
    derived: DerivedConstants,
}

impl TryFrom<PhysicalParams> for ModelParams {
    type Error = Error;

    fn try_from(p: PhysicalParams) -> Result<Self> {
        ModelParams::new(p)
    }
}

impl From<ModelParams> for PhysicalParams {
    fn from(p: ModelParams) -> Self {
        p.physical
    }
}

impl ModelParams {
    pub fn new(physical: PhysicalParams) -> Result<Self> {
        let PhysicalParams {
            alpha,
            beta,
            d,
            v_circ,
            x_circ,
            y_circ,
        } = physical;
        require(alpha > 0.0 && alpha.is_finite(), "alpha", alpha, "alpha > 0")?;
        require(beta > 0.0 && beta.is_finite(), "beta", beta, "beta > 0")?;
        require(d > 0.0 && d.is_finite(), "d", d, "d > 0")?;
        require(
            v_circ > 0.0 && v_circ < max_velocity(),
            "v_circ",
            v_circ,
            "0 < v_circ < 1 + tanh(2)",
        )?;
        require(
            x_circ > 0.0 && x_circ.is_finite(),
            "x_circ",
            x_circ,
            "x_circ > 0",
        )?;
        require(y_circ.is_finite(), "y_circ", y_circ, "finite")?;

        let x_inf = d * optimal_velocity_inverse(v_circ)?;
        let mut params = ModelParams {
            physical,
            derived: DerivedConstants {
                x_inf,
                h_circ: f64::NAN,
                x_bar: f64::NAN,
                y_bar: f64::NAN,
                x_minus: x_circ.min(x_inf),
                x_dagger: f64::NAN,
                phi_lower: f64::NAN,
                varpi_dagger: f64::NAN,
                delta_bar: f64::NAN,
            },
        };
        let h_circ = 0.5 * y_circ * y_circ + params.potential_unchecked(x_circ);
        let y_bar = (2.0 * (h_circ + 1.0)).sqrt();
        let x_bar = params.invert_potential_right(h_circ + 1.0);
        let x_dagger = x_circ.min(d * optimal_velocity_inverse(0.5 * v_circ)?);
        let phi_lower = 1.0 / (1.0 / x_dagger + 2.0 * y_bar / beta);
        let varpi_dagger = (0.5 * alpha * v_circ) / (alpha + 4.0 * beta / (phi_lower * phi_lower));
        let delta_bar = (0.5 / y_bar).min(0.25 * phi_lower);

        params.derived = DerivedConstants {
            h_circ,
            x_bar,
            y_bar,
            x_dagger,
            phi_lower,
            varpi_dagger,
            delta_bar,
            ..params.derived
        };
        Ok(params)
    }

    /// Same physical constants with a different initial state.
    pub fn with_initial_state(&self, x_circ: f64, y_circ: f64) -> Result<Self> {
        ModelParams::new(PhysicalParams {
            x_circ,
            y_circ,
            ..self.physical
        })
    }

    pub fn physical(&self) -> &PhysicalParams {
        &self.physical
    }

    pub fn derived(&self) -> &DerivedConstants {
        &self.derived
    }

    pub fn alpha(&self) -> f64 {
        self.physical.alpha
    }

    pub fn beta(&self) -> f64 {
        self.physical.beta
    }

    pub fn d(&self) -> f64 {
        self.physical.d
    }

    pub fn v_circ(&self) -> f64 {
        self.physical.v_circ
    }

    pub fn initial_state(&self) -> State {
        State::new(self.physical.x_circ, self.physical.y_circ)
    }

    pub fn equilibrium(&self) -> State {
        State::new(self.derived.x_inf, 0.0)
    }

    /// `P'(x) = α (V(x/d) - v_circ)`.
    #[inline]
    pub fn potential_derivative(&self, x: f64) -> f64 {
        self.physical.alpha * (optimal_velocity(x / self.physical.d) - self.physical.v_circ)
    }

    #[inline]
    pub(crate) fn potential_unchecked(&self, x: f64) -> f64 {
        let PhysicalParams {
            alpha, d, v_circ, ..
        } = self.physical;
        let x_inf = self.derived.x_inf;
        alpha * d * (ln_cosh(2.0 - x / d) - ln_cosh(2.0 - x_inf / d))
            + alpha * (2f64.tanh() - v_circ) * (x - x_inf)
    }

    #[inline]
    pub(crate) fn hamiltonian_unchecked(&self, z: State) -> f64 {
        0.5 * z.y * z.y + self.potential_unchecked(z.x)
    }

    /// Solves `P(x) = level` on `(x_inf, ∞)`: geometric bracket expansion
    /// from `x_inf`, then bisection to 1e-10.
    fn invert_potential_right(&self, level: f64) -> f64 {
        let x_inf = self.derived.x_inf;
        let mut lo = x_inf;
        let mut width = self.physical.d.max(x_inf) * 0.5;
        let mut hi = x_inf + width;
        while self.potential_unchecked(hi) < level {
            lo = hi;
            width *= 2.0;
            hi = x_inf + width;
        }
        while hi - lo > 1e-10 {
            let mid = 0.5 * (lo + hi);
            if self.potential_unchecked(mid) < level {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// A point `(x, y)` in phase space: gap and relative velocity.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct State {
    pub x: f64,
    pub y: f64,
}

impl State {
    pub const fn new(x: f64, y: f64) -> Self {
        State { x, y }
    }

    pub fn distance(&self, other: &State) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Rate of change of a [`State`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Tangent {
    pub dx: f64,
    pub dy: f64,
}

fn check_gap(op: &'static str, x: f64) -> Result<()> {
    if x > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            op,
            value: x,
            domain: "x > 0",
        })
    }
}

/// Potential `P(x) = α ∫_{x_inf}^x (V(s/d) - v_circ) ds`, in closed form.
pub fn potential(x: f64, p: &ModelParams) -> Result<f64> {
    check_gap("potential", x)?;
    Ok(p.potential_unchecked(x))
}

/// `H(x, y) = y²/2 + P(x)`.
pub fn hamiltonian(z: State, p: &ModelParams) -> Result<f64> {
    check_gap("hamiltonian", z.x)?;
    Ok(p.hamiltonian_unchecked(z))
}

/// Gradient of `H`: `(P'(x), y)`.
pub fn hamiltonian_gradient(z: State, p: &ModelParams) -> Result<Tangent> {
    check_gap("hamiltonian_gradient", z.x)?;
    Ok(Tangent {
        dx: p.potential_derivative(z.x),
        dy: z.y,
    })
}

#[inline]
pub(crate) fn drift_unchecked(z: State, p: &ModelParams) -> Tangent {
    let PhysicalParams {
        alpha,
        beta,
        d,
        v_circ,
        ..
    } = p.physical;
    Tangent {
        dx: z.y,
        dy: -alpha * (optimal_velocity(z.x / d) - v_circ + z.y) - beta * z.y / (z.x * z.x),
    }
}

/// Deterministic drift `B(z)` on `x > 0`.
pub fn drift(z: State, p: &ModelParams) -> Result<Tangent> {
    check_gap("drift", z.x)?;
    Ok(drift_unchecked(z, p))
}

/// Clamp `y` to `[-1/δ, 1/δ]`.
#[inline]
pub fn cutoff(y: f64, delta: f64) -> f64 {
    let bound = 1.0 / delta;
    y.clamp(-bound, bound)
}

/// Regularized drift `B^(δ)`, defined on the whole plane.
///
/// Agrees with [`drift`] on `[δ, ∞) × [-1/δ, 1/δ]`.
#[inline]
pub fn drift_regularized(z: State, delta: f64, p: &ModelParams) -> Tangent {
    let PhysicalParams {
        alpha,
        beta,
        d,
        v_circ,
        ..
    } = p.physical;
    let denom = (z.x * z.x).max(delta * delta);
    Tangent {
        dx: z.y,
        dy: -alpha * (optimal_velocity(z.x / d) - v_circ + z.y) - beta * cutoff(z.y, delta) / denom,
    }
}

/// Energy dissipation rate `-(α + β/x²) y²` along the deterministic flow.
pub fn dissipation(z: State, p: &ModelParams) -> Result<f64> {
    check_gap("dissipation", z.x)?;
    Ok(-(p.alpha() + p.beta() / (z.x * z.x)) * z.y * z.y)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn canonical() -> ModelParams {
        crate::testing::canonical()
    }

    fn bisect_inverse(v: f64) -> f64 {
        let (mut lo, mut hi) = (-10.0f64, 40.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if optimal_velocity(mid) < v {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn velocity_at_two_is_tanh_two() {
        assert_eq!(optimal_velocity(2.0), 2f64.tanh());
        // tanh(2) = (e^4 - 1)/(e^4 + 1), evaluated independently
        let e4 = 4f64.exp();
        assert!((optimal_velocity(2.0) - (e4 - 1.0) / (e4 + 1.0)).abs() < 1e-15);
        assert!((optimal_velocity(2.0) - 0.964_027_580_075_817).abs() < 1e-12);
    }

    #[test]
    fn velocity_supremum() {
        assert!((max_velocity() - 1.964_027_580_075_817).abs() < 1e-12);
        assert!(optimal_velocity(40.0) <= max_velocity());
        assert!((optimal_velocity(40.0) - max_velocity()).abs() < 1e-15);
        assert!(optimal_velocity(0.0).abs() < 1e-15);
    }

    #[test]
    fn velocity_strictly_increasing() {
        let xs: Vec<f64> = (0..4000).map(|i| -4.0 + i as f64 * 0.0025).collect();
        for w in xs.windows(2) {
            assert!(optimal_velocity(w[1]) > optimal_velocity(w[0]), "at {}", w[0]);
        }
    }

    #[test]
    fn inverse_matches_bisection() {
        assert!((optimal_velocity_inverse(2f64.tanh()).unwrap() - 2.0).abs() < 1e-15);
        let x_inf = optimal_velocity_inverse(0.9).unwrap();
        assert!((x_inf - bisect_inverse(0.9)).abs() < 1e-11);
        assert!((x_inf - 1.935_884_709_730_483).abs() < 1e-11);
        for i in 1..200 {
            let v = max_velocity() * i as f64 / 200.0;
            let w = optimal_velocity_inverse(v).unwrap();
            assert!((optimal_velocity(w) - v).abs() < 1e-12, "v = {v}");
            assert!((w - bisect_inverse(v)).abs() < 1e-9, "v = {v}");
        }
    }

    #[test]
    fn inverse_rejects_out_of_range() {
        assert!(optimal_velocity_inverse(0.0).is_err());
        assert!(optimal_velocity_inverse(-0.3).is_err());
        assert!(optimal_velocity_inverse(1.97).is_err());
        assert!(optimal_velocity_inverse(f64::NAN).is_err());
    }

    #[test]
    fn params_reject_invalid() {
        let good = *canonical().physical();
        for bad in [
            PhysicalParams { alpha: 0.0, ..good },
            PhysicalParams { beta: -1.0, ..good },
            PhysicalParams { d: 0.0, ..good },
            PhysicalParams { v_circ: 1.97, ..good },
            PhysicalParams { v_circ: 0.0, ..good },
            PhysicalParams { x_circ: 0.0, ..good },
            PhysicalParams { y_circ: f64::NAN, ..good },
        ] {
            assert!(ModelParams::new(bad).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn potential_vanishes_at_equilibrium() {
        let p = canonical();
        let x_inf = p.derived().x_inf;
        assert_eq!(potential(x_inf, &p).unwrap(), 0.0);
        assert!(potential(2.0 * x_inf, &p).unwrap() > 0.0);
        assert!(potential(0.0, &p).is_err());
    }

    #[test]
    fn potential_derivative_finite_difference() {
        let p = canonical();
        let h = 1e-5;
        for x in [1.0, 3.0] {
            let fd = (potential(x + h, &p).unwrap() - potential(x - h, &p).unwrap()) / (2.0 * h);
            let exact = p.alpha() * (optimal_velocity(x / p.d()) - p.v_circ());
            assert!((fd - exact).abs() < 1e-6, "x = {x}: {fd} vs {exact}");
        }
    }

    #[test]
    fn potential_matches_quadrature() {
        // composite Simpson on the defining integral
        let p = canonical();
        let x_inf = p.derived().x_inf;
        for x in [0.2, 1.0, 2.5, 5.0] {
            let n = 2000;
            let h = (x - x_inf) / n as f64;
            let f = |s: f64| p.alpha() * (optimal_velocity(s / p.d()) - p.v_circ());
            let mut acc = f(x_inf) + f(x);
            for i in 1..n {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                acc += w * f(x_inf + i as f64 * h);
            }
            let simpson = acc * h / 3.0;
            assert!((potential(x, &p).unwrap() - simpson).abs() < 1e-10, "x = {x}");
        }
    }

    #[test]
    fn potential_minimum_on_grid() {
        let p = canonical();
        let h = 1e-3;
        let (argmin, _) = (1..6000)
            .map(|i| i as f64 * h)
            .map(|x| (x, potential(x, &p).unwrap()))
            .fold((0.0, f64::INFINITY), |acc, v| if v.1 < acc.1 { v } else { acc });
        assert!((argmin - p.derived().x_inf).abs() <= h);
    }

    #[test]
    fn hamiltonian_examples() {
        let p = canonical();
        let x_inf = p.derived().x_inf;
        assert_eq!(hamiltonian(State::new(x_inf, 0.0), &p).unwrap(), 0.0);
        assert_eq!(hamiltonian(State::new(x_inf, 2.0), &p).unwrap(), 2.0);
        for x in [0.3, 1.0, 4.0] {
            assert_eq!(
                hamiltonian(State::new(x, 0.0), &p).unwrap(),
                potential(x, &p).unwrap()
            );
        }
        assert!(hamiltonian(State::new(-1.0, 0.0), &p).is_err());
    }

    #[test]
    fn derived_constants_canonical() {
        let p = canonical();
        let c = p.derived();
        assert!((optimal_velocity(c.x_inf / p.d()) - p.v_circ()).abs() < 1e-14);
        assert!((c.y_bar - (2.0 * (c.h_circ + 1.0)).sqrt()).abs() < 1e-15);
        assert!(c.x_bar > c.x_inf);
        assert!((potential(c.x_bar, &p).unwrap() - (c.h_circ + 1.0)).abs() < 1e-9);
        // independent quadrature values for α = β = d = 1, v = 0.9, z0 = (1, 0)
        assert!((c.h_circ - 0.371_804_418_726_903).abs() < 1e-10);
        assert!((c.y_bar - 1.656_384_266_241_927).abs() < 1e-10);
        assert!((c.x_bar - 3.918_729_422_071_126).abs() < 1e-8);
        assert_eq!(c.x_dagger, 1.0);
        assert!((c.phi_lower - 0.231_869_619_820_304).abs() < 1e-12);
        assert!((c.varpi_dagger - 0.005_968_178_495_146).abs() < 1e-12);
        assert!((c.delta_bar - 0.057_967_404_955_076).abs() < 1e-12);
        assert_eq!(c.x_minus, 1.0);
    }

    #[test]
    fn equilibrium_is_stationary() {
        let p = canonical();
        let b = drift(p.equilibrium(), &p).unwrap();
        assert!(b.dx.hypot(b.dy) <= 1e-12);
    }

    #[test]
    fn drift_examples() {
        let p = canonical();
        let x_inf = p.derived().x_inf;
        let b = drift(State::new(x_inf, 1.0), &p).unwrap();
        assert_eq!(b.dx, 1.0);
        assert!((b.dy - (-p.alpha() - p.beta() / (x_inf * x_inf))).abs() < 1e-14);
        assert!(drift(State::new(0.0, 1.0), &p).is_err());
    }

    #[test]
    fn cutoff_examples() {
        assert_eq!(cutoff(0.7, 0.5), 0.7);
        assert_eq!(cutoff(3.0, 0.5), 2.0);
        assert_eq!(cutoff(-5.0, 0.5), -2.0);
    }

    #[test]
    fn regularized_agrees_on_agreement_set() {
        let p = canonical();
        let delta = 0.05;
        for i in 0..60 {
            for j in 0..61 {
                let x = delta + i as f64 * 0.1;
                let y = -1.0 / delta + j as f64 * (2.0 / delta) / 60.0;
                let z = State::new(x, y);
                let a = drift(z, &p).unwrap();
                let b = drift_regularized(z, delta, &p);
                assert_eq!(a.dx, b.dx);
                assert!((a.dy - b.dy).abs() <= 1e-15 * a.dy.abs().max(1.0));
            }
        }
    }

    #[test]
    fn regularized_uses_delta_floor() {
        let p = canonical();
        let delta = 0.1;
        for y in [-3.0, 0.5, 20.0] {
            let b = drift_regularized(State::new(0.0, y), delta, &p);
            let expect = -p.alpha() * (optimal_velocity(0.0) - p.v_circ() + y)
                - p.beta() * cutoff(y, delta) / (delta * delta);
            assert_eq!(b.dy, expect);
        }
    }

    #[test]
    fn regularized_lipschitz_smoke() {
        // finite-difference directional derivatives stay below the bound
        // assembled from the clamped factors
        let p = canonical();
        let delta = 0.2;
        let bound_x = p.alpha() / p.d() + 2.0 * p.beta() / (delta * delta * delta * delta);
        let bound_y = 1.0 + p.alpha() + p.beta() / (delta * delta);
        let h = 1e-6;
        for i in 0..80 {
            for j in 0..80 {
                let z = State::new(-2.0 + i as f64 * 0.1, -8.0 + j as f64 * 0.2);
                let b0 = drift_regularized(z, delta, &p);
                let bx = drift_regularized(State::new(z.x + h, z.y), delta, &p);
                let by = drift_regularized(State::new(z.x, z.y + h), delta, &p);
                let gx = ((bx.dx - b0.dx).hypot(bx.dy - b0.dy)) / h;
                let gy = ((by.dx - b0.dx).hypot(by.dy - b0.dy)) / h;
                assert!(gx <= bound_x * (1.0 + 1e-3), "{z:?}: {gx}");
                assert!(gy <= bound_y * (1.0 + 1e-3), "{z:?}: {gy}");
            }
        }
    }

    #[test]
    fn energy_identity() {
        let p = canonical();
        for i in 1..200 {
            for j in 0..50 {
                let z = State::new(i as f64 * 0.02, -3.0 + j as f64 * 0.12);
                let g = hamiltonian_gradient(z, &p).unwrap();
                let b = drift(z, &p).unwrap();
                let lhs = g.dx * b.dx + g.dy * b.dy;
                let rhs = dissipation(z, &p).unwrap();
                assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1.0), "{z:?}");
            }
        }
    }

    #[test]
    fn level_set_box() {
        let p = canonical();
        let c = *p.derived();
        let level = c.h_circ + 1.0;
        for i in 1..400 {
            for j in 0..400 {
                let z = State::new(i as f64 * 0.02, -4.0 + j as f64 * 0.02);
                if hamiltonian(z, &p).unwrap() <= level {
                    assert!(z.x <= c.x_bar && z.y.abs() <= c.y_bar, "{z:?}");
                }
            }
        }
    }

    #[test]
    fn params_serde_round_trip_revalidates() {
        let p = canonical();
        let json = serde_json::to_string(&p).unwrap();
        let back: ModelParams = serde_json::from_str(&json).unwrap();
        assert_eq!(p, back);
        let bad = json.replace("0.9", "1.97");
        assert!(serde_json::from_str::<ModelParams>(&bad).is_err());
    }
}
