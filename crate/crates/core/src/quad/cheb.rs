//! Chebyshev series on an interval: adaptive fitting, Clenshaw evaluation,
//! antidifferentiation, and definite integrals.
//!
//! Used for the nested integrals in the second-order displacement
//! computation: a smooth integrand is fitted once per zone, after which its
//! running integral is available in closed form with spectral accuracy.
//! This route is independent of the Gauss-Kronrod path used for the kernel
//! basis, which makes the two usable as cross-checks.

use crate::error::{Error, Result};

/// Truncated Chebyshev expansion `f(x) = c[0]/2 + sum_{k>=1} c[k] T_k(t)`
/// with `t = (x - mid) / half` mapping `[a, b]` onto `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct ChebSeries {
    a: f64,
    b: f64,
    coeffs: Vec<f64>,
}

/// Fraction of trailing coefficients inspected for convergence.
const TAIL_FRACTION: usize = 8;
const N_MIN: usize = 16;
const N_MAX: usize = 2048;

impl ChebSeries {
    /// Fit `f` on `[a, b]`, doubling the node count until the coefficient
    /// tail drops below `tol` relative to the largest coefficient.
    pub fn fit<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<Self> {
        assert!(b > a, "fit interval must have positive length");
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let mut n = N_MIN;
        loop {
            let values: Vec<f64> = (0..=n)
                .map(|j| f(mid + half * (std::f64::consts::PI * j as f64 / n as f64).cos()))
                .collect();
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::SeriesDivergence {
                    what: "chebyshev fit".into(),
                    detail: format!("non-finite sample on [{a}, {b}]"),
                });
            }
            let coeffs = dct_coefficients(&values);
            let max_c = coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
            let tail = coeffs.len() / TAIL_FRACTION;
            let tail_max = coeffs[coeffs.len() - tail.max(2)..]
                .iter()
                .fold(0.0_f64, |m, c| m.max(c.abs()));
            if max_c == 0.0 || tail_max <= tol * max_c {
                let mut coeffs = coeffs;
                truncate_tail(&mut coeffs, tol * max_c);
                return Ok(Self { a, b, coeffs });
            }
            if n >= N_MAX {
                return Err(Error::SeriesDivergence {
                    what: "chebyshev fit".into(),
                    detail: format!(
                        "tail {tail_max:.3e} above {:.3e} at {} nodes on [{a}, {b}]",
                        tol * max_c,
                        n + 1
                    ),
                });
            }
            n *= 2;
        }
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Clenshaw evaluation at `x` (valid on `[a, b]`).
    pub fn eval(&self, x: f64) -> f64 {
        let t = (2.0 * x - self.a - self.b) / (self.b - self.a);
        let mut b1 = 0.0;
        let mut b2 = 0.0;
        for &c in self.coeffs.iter().skip(1).rev() {
            let next = 2.0 * t * b1 - b2 + c;
            b2 = b1;
            b1 = next;
        }
        t * b1 - b2 + 0.5 * self.coeffs[0]
    }

    /// Series of `F(x) = int_a^x f`, on the same interval.
    pub fn antiderivative(&self) -> Self {
        let n = self.coeffs.len();
        let half = 0.5 * (self.b - self.a);
        let mut out = vec![0.0; n + 1];
        for k in 1..=n {
            let prev = self.coeffs[k - 1];
            let next = if k + 1 < n { self.coeffs[k + 1] } else { 0.0 };
            out[k] = half * (prev - next) / (2 * k) as f64;
        }
        // pin F(a) = 0: T_k(-1) = (-1)^k
        let mut at_left = 0.0;
        for (k, &c) in out.iter().enumerate().skip(1) {
            at_left += if k % 2 == 0 { c } else { -c };
        }
        out[0] = -2.0 * at_left;
        Self {
            a: self.a,
            b: self.b,
            coeffs: out,
        }
    }

    /// `int_a^b f` directly from the coefficients.
    pub fn integral(&self) -> f64 {
        let half = 0.5 * (self.b - self.a);
        let mut sum = self.coeffs[0];
        for k in (2..self.coeffs.len()).step_by(2) {
            sum += 2.0 * self.coeffs[k] / (1 - (k * k) as i64) as f64;
        }
        half * sum
    }
}

/// Type-I DCT producing coefficients in the halved-`c[0]` convention.
fn dct_coefficients(values: &[f64]) -> Vec<f64> {
    let n = values.len() - 1;
    let mut coeffs = vec![0.0; n + 1];
    for (k, ck) in coeffs.iter_mut().enumerate() {
        let mut acc = 0.5 * values[0];
        for (j, &v) in values.iter().enumerate().take(n).skip(1) {
            acc += v * (std::f64::consts::PI * (j * k) as f64 / n as f64).cos();
        }
        acc += 0.5 * values[n] * if k % 2 == 0 { 1.0 } else { -1.0 };
        *ck = 2.0 * acc / n as f64;
    }
    coeffs
}

fn truncate_tail(coeffs: &mut Vec<f64>, floor: f64) {
    let keep = coeffs
        .iter()
        .rposition(|c| c.abs() > floor)
        .map_or(1, |i| i + 1);
    coeffs.truncate(keep.max(2));
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn fit_and_eval_smooth() {
        let f = |x: f64| (3.0 * x).sin() * (-x).exp();
        let s = ChebSeries::fit(&f, 0.0, 2.0, 1e-14).unwrap();
        for i in 0..100 {
            let x = 2.0 * i as f64 / 99.0;
            assert_relative_eq!(s.eval(x), f(x), epsilon = 1e-12);
        }
    }

    #[test]
    fn antiderivative_matches_closed_form() {
        let f = |x: f64| (2.0 * x).cos();
        let s = ChebSeries::fit(&f, 0.5, 3.0, 1e-14).unwrap();
        let anti = s.antiderivative();
        for i in 0..60 {
            let x = 0.5 + 2.5 * i as f64 / 59.0;
            let exact = ((2.0 * x).sin() - 1.0_f64.sin()) / 2.0;
            assert_relative_eq!(anti.eval(x), exact, epsilon = 1e-12);
        }
        assert!(anti.eval(0.5).abs() < 1e-13);
    }

    #[test]
    fn integral_matches_quadrature() {
        let f = |x: f64| x.powi(3) - x + 0.25 / (1.0 + x * x);
        let s = ChebSeries::fit(&f, -1.0, 2.0, 1e-14).unwrap();
        let exact = (2.0_f64.powi(4) - 1.0) / 4.0 - (4.0 - 1.0) / 2.0
            + 0.25 * (2.0_f64.atan() + 1.0_f64.atan());
        assert_relative_eq!(s.integral(), exact, epsilon = 1e-12);
    }

    #[test]
    fn fractional_power_fits_off_singularity() {
        // |1 + rho - cos|^(3/2) on the positive branch is analytic
        let rho = 0.4;
        let f = |t: f64| (1.0 + rho - t.cos()).powf(1.5);
        let s = ChebSeries::fit(&f, 0.0, PI, 1e-13).unwrap();
        for i in 0..50 {
            let t = PI * i as f64 / 49.0;
            assert_relative_eq!(s.eval(t), f(t), epsilon = 1e-11, max_relative = 1e-11);
        }
    }

    #[test]
    fn divergent_fit_is_reported() {
        // a step cannot be resolved by any polynomial degree
        let f = |x: f64| if x < 0.5 { 0.0 } else { 1.0 };
        assert!(matches!(
            ChebSeries::fit(&f, 0.0, 1.0, 1e-12),
            Err(Error::SeriesDivergence { .. })
        ));
    }
}
