//! Cubic Hermite interpolation on a sorted grid, with an optional
//! Fritsch–Carlson limiter that keeps monotone data monotone.

#[derive(Debug, Clone, PartialEq)]
pub struct Hermite {
    knots: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl Hermite {
    /// Builds the interpolant from node values and node derivatives.
    ///
    /// With `monotone` set, derivatives are adjusted interval by interval so
    /// the interpolant is monotone wherever the node values are.
    ///
    /// Panics if the knots are not strictly increasing or the lengths differ.
    pub fn new(knots: Vec<f64>, values: Vec<f64>, mut slopes: Vec<f64>, monotone: bool) -> Self {
        assert!(knots.len() >= 2, "need at least two knots");
        assert!(knots.len() == values.len() && knots.len() == slopes.len());
        assert!(
            knots.windows(2).all(|w| w[1] > w[0]),
            "knots must be strictly increasing"
        );
        if monotone {
            limit_slopes(&knots, &values, &mut slopes);
        }
        Hermite {
            knots,
            values,
            slopes,
        }
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots[0], *self.knots.last().unwrap())
    }

    #[inline]
    fn locate(&self, x: f64) -> usize {
        let i = self.knots.partition_point(|&k| k <= x);
        i.clamp(1, self.knots.len() - 1) - 1
    }

    /// Value and first derivative at `x`; clamps to the end intervals
    /// (extrapolating the end cubic) outside the domain.
    #[inline]
    pub fn eval_with_slope(&self, x: f64) -> (f64, f64) {
        let i = self.locate(x);
        let (x0, x1) = (self.knots[i], self.knots[i + 1]);
        let h = x1 - x0;
        let t = (x - x0) / h;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.slopes[i] * h, self.slopes[i + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        // difference form reproduces constant data exactly
        let dy = y1 - y0;
        let value = y0 + (3.0 * t2 - 2.0 * t3) * dy + (t3 - 2.0 * t2 + t) * m0 + (t3 - t2) * m1;
        let dvalue = ((6.0 * t - 6.0 * t2) * dy + (3.0 * t2 - 4.0 * t + 1.0) * m0 + (3.0 * t2 - 2.0 * t) * m1) / h;
        (value, dvalue)
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.eval_with_slope(x).0
    }
}

fn limit_slopes(knots: &[f64], values: &[f64], slopes: &mut [f64]) {
    for k in 0..knots.len() - 1 {
        let secant = (values[k + 1] - values[k]) / (knots[k + 1] - knots[k]);
        if secant == 0.0 {
            slopes[k] = 0.0;
            slopes[k + 1] = 0.0;
            continue;
        }
        if slopes[k] * secant < 0.0 {
            slopes[k] = 0.0;
        }
        if slopes[k + 1] * secant < 0.0 {
            slopes[k + 1] = 0.0;
        }
        let a = slopes[k] / secant;
        let b = slopes[k + 1] / secant;
        let r2 = a * a + b * b;
        if r2 > 9.0 {
            let tau = 3.0 / r2.sqrt();
            slopes[k] = tau * a * secant;
            slopes[k + 1] = tau * b * secant;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reproduces_cubics_exactly() {
        let f = |x: f64| 1.0 - 2.0 * x + 0.5 * x * x - 0.1 * x * x * x;
        let df = |x: f64| -2.0 + x - 0.3 * x * x;
        let knots: Vec<f64> = (0..11).map(|i| i as f64 * 0.3).collect();
        let h = Hermite::new(
            knots.clone(),
            knots.iter().map(|&x| f(x)).collect(),
            knots.iter().map(|&x| df(x)).collect(),
            false,
        );
        for i in 0..100 {
            let x = i as f64 * 0.03;
            let (v, d) = h.eval_with_slope(x);
            assert!((v - f(x)).abs() < 1e-13);
            assert!((d - df(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn hits_nodes() {
        let knots = vec![0.0, 1.0, 3.0];
        let h = Hermite::new(knots, vec![2.0, 1.0, 0.5], vec![0.0, -1.0, 0.0], true);
        assert_eq!(h.eval(0.0), 2.0);
        assert_eq!(h.eval(1.0), 1.0);
        assert_eq!(h.eval(3.0), 0.5);
    }

    #[test]
    fn constant_pieces_are_exact() {
        let knots: Vec<f64> = (0..50).map(|i| 0.1 * i as f64).collect();
        let values: Vec<f64> = knots.iter().map(|&x| if x < 2.0 { 1.0 - x } else { 0.469_152_164_090_372_9 }).collect();
        let slopes: Vec<f64> = knots.iter().map(|&x| if x < 2.0 { -1.0 } else { 0.0 }).collect();
        let h = Hermite::new(knots, values, slopes, true);
        for i in 0..10_000 {
            let x = 2.1 + 2.7 * i as f64 / 10_000.0;
            assert_eq!(h.eval_with_slope(x), (0.469_152_164_090_372_9, 0.0));
        }
    }

    proptest! {
        #[test]
        fn limiter_preserves_monotonicity(
            steps in proptest::collection::vec(0.0f64..1.0, 3..20),
            raw in proptest::collection::vec(-50.0f64..5.0, 20),
        ) {
            let n = steps.len() + 1;
            let knots: Vec<f64> = (0..n).map(|i| i as f64).collect();
            let mut values = vec![0.0];
            for s in &steps {
                values.push(values.last().unwrap() - s);
            }
            let slopes = raw[..n].to_vec();
            let h = Hermite::new(knots, values, slopes, true);
            let mut prev = h.eval(0.0);
            for i in 1..(200 * (n - 1)) {
                let v = h.eval(i as f64 / 200.0);
                prop_assert!(v <= prev + 1e-12);
                prev = v;
            }
        }
    }
}
