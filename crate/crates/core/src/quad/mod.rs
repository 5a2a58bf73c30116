//! Kernel integrals of the displacement expansion and their calculus.
//!
//! The first- and second-order displacement coefficients are linear
//! combinations of the parametric integrals
//!
//! ```text
//! C_k^E(rho, beta) = int_E cos(k theta) |1 + rho - cos theta|^beta dtheta,
//! S_k^E(rho, beta) = int_E sin(k theta) |...|^beta dtheta,
//! D_k^E(rho, beta) = int_E theta sin(k theta) |...|^beta dtheta,
//! ```
//!
//! over subintervals `E` of `[0, 2 pi]`, plus the pure powers `|rho|^beta`,
//! `|rho + 2|^beta` and constants. This module evaluates single kernels and
//! whole combinations, differentiates them in `rho` to any order up to
//! [`MAX_DRHO_ORDER`], and checks the reflection identities that reduce
//! every kernel to the three canonical intervals used by the closed forms.

pub mod cheb;
pub mod gk;
pub(crate) mod series;

pub use cheb::ChebSeries;
pub use gk::{integrate, qk21, QuadConfig};

use crate::equation::{PI, TWO_PI};
use crate::error::{Error, Result};
use std::fmt;

/// Largest supported `rho`-derivative order.
pub const MAX_DRHO_ORDER: usize = 12;

/// Margin below which a kernel evaluation is flagged as too close to the
/// branch boundary for full accuracy.
pub const BOUNDARY_MARGIN: f64 = 1e-6;

/// The kernel shapes a displacement combination can contain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    /// `cos(k theta)` under the integral
    Cos,
    /// `sin(k theta)` under the integral
    Sin,
    /// `theta sin(k theta)` under the integral
    ThetaSin,
    /// `|rho|^beta`, no integral
    PowRho,
    /// `|rho + 2|^beta`, no integral
    PowRhoPlus2,
    /// the constant 1
    Const,
}

impl KernelKind {
    pub fn is_integral(self) -> bool {
        matches!(self, KernelKind::Cos | KernelKind::Sin | KernelKind::ThetaSin)
    }
}

/// One kernel: kind, harmonic index, exponent, integration interval.
///
/// For the non-integral kinds `k` and the interval are unused and fixed to
/// zero. `Sin`/`ThetaSin` with `k = 0` are legal and evaluate to zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisTerm {
    pub kind: KernelKind,
    pub k: usize,
    pub beta: f64,
    pub a: f64,
    pub b: f64,
}

impl BasisTerm {
    pub fn cos(k: usize, beta: f64, interval: (f64, f64)) -> Self {
        Self { kind: KernelKind::Cos, k, beta, a: interval.0, b: interval.1 }
    }

    pub fn sin(k: usize, beta: f64, interval: (f64, f64)) -> Self {
        Self { kind: KernelKind::Sin, k, beta, a: interval.0, b: interval.1 }
    }

    pub fn theta_sin(k: usize, beta: f64, interval: (f64, f64)) -> Self {
        Self { kind: KernelKind::ThetaSin, k, beta, a: interval.0, b: interval.1 }
    }

    pub fn pow_rho(beta: f64) -> Self {
        Self { kind: KernelKind::PowRho, k: 0, beta, a: 0.0, b: 0.0 }
    }

    pub fn pow_rho_plus2(beta: f64) -> Self {
        Self { kind: KernelKind::PowRhoPlus2, k: 0, beta, a: 0.0, b: 0.0 }
    }

    pub fn constant() -> Self {
        Self { kind: KernelKind::Const, k: 0, beta: 0.0, a: 0.0, b: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.beta.is_finite() {
            return Err(Error::Invalid(format!("non-finite beta in {self}")));
        }
        if self.kind.is_integral() {
            let eps = 1e-12;
            if !(self.a >= -eps && self.b <= TWO_PI + eps && self.a <= self.b + eps) {
                return Err(Error::Invalid(format!(
                    "interval [{}, {}] not inside [0, 2 pi]",
                    self.a, self.b
                )));
            }
        }
        Ok(())
    }

    fn trig_factor(&self, theta: f64) -> f64 {
        let kt = self.k as f64 * theta;
        match self.kind {
            KernelKind::Cos => kt.cos(),
            KernelKind::Sin => kt.sin(),
            KernelKind::ThetaSin => theta * kt.sin(),
            _ => unreachable!("trig factor queried on non-integral kernel"),
        }
    }
}

impl fmt::Display for BasisTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            KernelKind::Cos => write!(f, "C{}[{:.4},{:.4}]^{}", self.k, self.a, self.b, self.beta),
            KernelKind::Sin => write!(f, "S{}[{:.4},{:.4}]^{}", self.k, self.a, self.b, self.beta),
            KernelKind::ThetaSin => {
                write!(f, "D{}[{:.4},{:.4}]^{}", self.k, self.a, self.b, self.beta)
            }
            KernelKind::PowRho => write!(f, "|rho|^{}", self.beta),
            KernelKind::PowRhoPlus2 => write!(f, "|rho+2|^{}", self.beta),
            KernelKind::Const => write!(f, "1"),
        }
    }
}

/// Minimum and maximum of the signed base `1 + rho - cos(theta)` over an
/// interval (checking endpoints and the interior critical angles).
pub fn base_extrema(rho: f64, a: f64, b: f64) -> (f64, f64) {
    let base = |t: f64| 1.0 + rho - t.cos();
    let mut lo = base(a).min(base(b));
    let mut hi = base(a).max(base(b));
    for crit in [0.0, PI, TWO_PI] {
        if a < crit && crit < b {
            let v = base(crit);
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    (lo, hi)
}

/// Smallest `|1 + rho - cos(theta)|` over the interval (0 if the base
/// changes sign inside it).
pub fn min_abs_base(rho: f64, a: f64, b: f64) -> f64 {
    let (lo, hi) = base_extrema(rho, a, b);
    if lo <= 0.0 && hi >= 0.0 {
        0.0
    } else {
        lo.abs().min(hi.abs())
    }
}

/// Sign of the base on the admissible branch containing `rho`:
/// `+1` on `(0, inf)`, `-1` on `(-inf, -2)`.
pub fn branch_sign(rho: f64) -> Result<f64> {
    if rho > 0.0 {
        Ok(1.0)
    } else if rho < -2.0 {
        Ok(-1.0)
    } else {
        Err(Error::RhoOutsideDomain {
            rho,
            domain: "(-inf, -2) or (0, inf)".into(),
        })
    }
}

/// Whether evaluating near this `rho` sits within [`BOUNDARY_MARGIN`] of a
/// vanishing base somewhere in the term's interval.
pub fn near_boundary(term: &BasisTerm, rho: f64) -> bool {
    term.kind.is_integral() && min_abs_base(rho, term.a, term.b) < BOUNDARY_MARGIN
}

/// Kernel value together with its error estimate and proximity flag.
#[derive(Debug, Clone, Copy)]
pub struct BasisValue {
    pub value: f64,
    pub err: f64,
    pub near_boundary: bool,
}

/// Evaluate one kernel at `rho` with the default quadrature settings.
pub fn eval_basis(term: &BasisTerm, rho: f64) -> Result<f64> {
    eval_basis_with(term, rho, &QuadConfig::default()).map(|v| v.value)
}

/// Evaluate one kernel at `rho`.
///
/// Integral kinds whose base changes sign inside the interval are rejected
/// for negative `beta` (the integrand is non-integrable there); for positive
/// `beta` the kink is integrated through.
pub fn eval_basis_with(term: &BasisTerm, rho: f64, cfg: &QuadConfig) -> Result<BasisValue> {
    term.validate()?;
    match term.kind {
        KernelKind::Const => Ok(BasisValue { value: 1.0, err: 0.0, near_boundary: false }),
        KernelKind::PowRho => Ok(BasisValue {
            value: rho.abs().powf(term.beta),
            err: 0.0,
            near_boundary: rho.abs() < BOUNDARY_MARGIN,
        }),
        KernelKind::PowRhoPlus2 => Ok(BasisValue {
            value: (rho + 2.0).abs().powf(term.beta),
            err: 0.0,
            near_boundary: (rho + 2.0).abs() < BOUNDARY_MARGIN,
        }),
        _ => {
            if term.b - term.a <= 0.0 {
                return Ok(BasisValue { value: 0.0, err: 0.0, near_boundary: false });
            }
            if term.k == 0 && term.kind != KernelKind::Cos {
                // sin(0) factor: identically zero
                return Ok(BasisValue { value: 0.0, err: 0.0, near_boundary: false });
            }
            let (lo, hi) = base_extrema(rho, term.a, term.b);
            if lo < 0.0 && hi > 0.0 && term.beta < 0.0 {
                return Err(Error::SignChange { a: term.a, b: term.b, rho });
            }
            let beta = term.beta;
            let f = |t: f64| term.trig_factor(t) * (1.0 + rho - t.cos()).abs().powf(beta);
            let (value, err) = integrate(&f, term.a, term.b, cfg)?;
            Ok(BasisValue { value, err, near_boundary: near_boundary(term, rho) })
        }
    }
}

/// `d^order/drho^order` of a kernel at `rho`.
///
/// On a fixed branch the base keeps one sign `s`, so each derivative lowers
/// the exponent by one and multiplies by `s * beta`:
/// `d/drho |u|^beta = s beta |u|^(beta-1)` with `u` the signed base. The
/// same falling-factorial shape covers the pure-power kinds with `s` the
/// sign of `rho` (resp. `rho + 2`).
pub fn eval_basis_drho(term: &BasisTerm, rho: f64, order: usize) -> Result<f64> {
    eval_basis_drho_with(term, rho, order, &QuadConfig::default())
}

pub fn eval_basis_drho_with(
    term: &BasisTerm,
    rho: f64,
    order: usize,
    cfg: &QuadConfig,
) -> Result<f64> {
    if order > MAX_DRHO_ORDER {
        return Err(Error::DerivativeOrder { order, max: MAX_DRHO_ORDER });
    }
    if order == 0 {
        return eval_basis_with(term, rho, cfg).map(|v| v.value);
    }
    let sign = match term.kind {
        KernelKind::Const => return Ok(0.0),
        KernelKind::PowRho => {
            if rho == 0.0 {
                return Err(Error::RhoOutsideDomain { rho, domain: "rho != 0".into() });
            }
            rho.signum()
        }
        KernelKind::PowRhoPlus2 => {
            if rho == -2.0 {
                return Err(Error::RhoOutsideDomain { rho, domain: "rho != -2".into() });
            }
            (rho + 2.0).signum()
        }
        _ => branch_sign(rho)?,
    };
    let mut factor = 1.0;
    for i in 0..order {
        factor *= sign * (term.beta - i as f64);
    }
    let lowered = BasisTerm { beta: term.beta - order as f64, ..*term };
    let value = eval_basis_with(&lowered, rho, cfg)?.value;
    Ok(factor * value)
}

/// A finite combination `sum_i coeff_i * kernel_i` with the `rho` windows
/// on which it is meant to be evaluated.
#[derive(Debug, Clone)]
pub struct LinearCombination {
    pub terms: Vec<(f64, BasisTerm)>,
    /// Admissible `rho` windows (open intervals).
    pub domain: Vec<(f64, f64)>,
}

impl LinearCombination {
    pub fn new(terms: Vec<(f64, BasisTerm)>, domain: Vec<(f64, f64)>) -> Self {
        Self { terms, domain }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn contains_rho(&self, rho: f64) -> bool {
        self.domain.iter().any(|&(a, b)| rho > a && rho < b)
    }

    /// Coefficient of the first term matching `kind`, `k`, and (for integral
    /// kinds) the interval, if present.
    pub fn coefficient_of(&self, kind: KernelKind, k: usize, interval: (f64, f64)) -> Option<f64> {
        self.terms.iter().find_map(|(c, t)| {
            let same_interval = !kind.is_integral()
                || ((t.a - interval.0).abs() < 1e-12 && (t.b - interval.1).abs() < 1e-12);
            (t.kind == kind && t.k == k && same_interval).then_some(*c)
        })
    }

    pub fn eval(&self, rho: f64) -> Result<f64> {
        self.eval_with(rho, &QuadConfig::default())
    }

    /// Evaluate the combination at `rho`.
    ///
    /// Integral terms sharing an interval and exponent are merged into one
    /// adaptive quadrature of their combined trigonometric factor, so a
    /// combination costs about as much as a single kernel per distinct
    /// `(interval, beta)` pair.
    pub fn eval_with(&self, rho: f64, cfg: &QuadConfig) -> Result<f64> {
        let mut total = 0.0;
        let mut groups: Vec<((f64, f64, f64), Vec<(f64, BasisTerm)>)> = Vec::new();
        for &(coef, term) in &self.terms {
            if coef == 0.0 {
                continue;
            }
            if term.kind.is_integral() {
                let key = (term.a, term.b, term.beta);
                match groups.iter_mut().find(|(k, _)| *k == key) {
                    Some((_, list)) => list.push((coef, term)),
                    None => groups.push((key, vec![(coef, term)])),
                }
            } else {
                total += coef * eval_basis_with(&term, rho, cfg)?.value;
            }
        }
        for ((a, b, beta), list) in groups {
            if b - a <= 0.0 {
                continue;
            }
            let (lo, hi) = base_extrema(rho, a, b);
            if lo < 0.0 && hi > 0.0 && beta < 0.0 {
                return Err(Error::SignChange { a, b, rho });
            }
            let f = |t: f64| {
                let trig: f64 = list.iter().map(|(c, term)| c * term.trig_factor(t)).sum();
                trig * (1.0 + rho - t.cos()).abs().powf(beta)
            };
            let (value, _) = integrate(&f, a, b, cfg)?;
            total += value;
        }
        Ok(total)
    }

    pub fn eval_drho(&self, rho: f64, order: usize) -> Result<f64> {
        self.eval_drho_with(rho, order, &QuadConfig::default())
    }

    pub fn eval_drho_with(&self, rho: f64, order: usize, cfg: &QuadConfig) -> Result<f64> {
        if order == 0 {
            return self.eval_with(rho, cfg);
        }
        if order > MAX_DRHO_ORDER {
            return Err(Error::DerivativeOrder { order, max: MAX_DRHO_ORDER });
        }
        // lowering beta by `order` preserves the grouping structure
        let sign_needed = self
            .terms
            .iter()
            .any(|(c, t)| *c != 0.0 && t.kind.is_integral());
        if sign_needed {
            branch_sign(rho)?;
        }
        let mut lowered_terms = Vec::with_capacity(self.terms.len());
        for &(coef, term) in &self.terms {
            if coef == 0.0 {
                continue;
            }
            let sign = match term.kind {
                KernelKind::Const => continue,
                KernelKind::PowRho => rho.signum(),
                KernelKind::PowRhoPlus2 => (rho + 2.0).signum(),
                _ => branch_sign(rho)?,
            };
            let mut factor = 1.0;
            for i in 0..order {
                factor *= sign * (term.beta - i as f64);
            }
            let lowered = BasisTerm { beta: term.beta - order as f64, ..term };
            lowered_terms.push((coef * factor, lowered));
        }
        LinearCombination::new(lowered_terms, self.domain.clone()).eval_with(rho, cfg)
    }
}

/// One reflection-identity residual.
#[derive(Debug, Clone)]
pub struct IdentityResidual {
    pub label: String,
    pub residual: f64,
}

/// Check the reflection identities tying kernels over `[theta1, 2 pi]` and
/// `[0, theta1]` to the canonical intervals, at one `(k, beta, rho)`.
///
/// With `E* = [0, theta1]`, `F = [theta1, pi]` for `theta1 <= pi`, and
/// `E' = [0, 2 pi - theta1]`, `F' = [2 pi - theta1, pi]` for `theta1 > pi`,
/// the full-period reflection `theta -> 2 pi - theta` gives three residual
/// rows in the first case and six in the second; all must vanish. Intervals
/// of zero length contribute zero automatically.
pub fn verify_interval_identities(
    theta1: f64,
    k: usize,
    beta: f64,
    rho: f64,
    cfg: &QuadConfig,
) -> Result<Vec<IdentityResidual>> {
    let c = |kk: usize, iv: (f64, f64)| BasisTerm::cos(kk, beta, iv);
    let s = |kk: usize, iv: (f64, f64)| BasisTerm::sin(kk, beta, iv);
    let d = |kk: usize, iv: (f64, f64)| BasisTerm::theta_sin(kk, beta, iv);
    let ev = |rows: Vec<(f64, BasisTerm)>| -> Result<f64> {
        LinearCombination::new(rows, vec![(f64::NEG_INFINITY, f64::INFINITY)]).eval_with(rho, cfg)
    };
    let tag = |name: &str| format!("{name} k={k} beta={beta} rho={rho} theta1={theta1:.6}");

    let mut out = Vec::new();
    if theta1 <= PI {
        let e = (0.0, theta1);
        let tail = (theta1, TWO_PI);
        let f_iv = (theta1, PI);
        out.push(IdentityResidual {
            label: tag("S-flip"),
            residual: ev(vec![(1.0, s(k, tail)), (1.0, s(k, e))])?,
        });
        out.push(IdentityResidual {
            label: tag("C-extend"),
            residual: ev(vec![(1.0, c(k, tail)), (-1.0, c(k, e)), (-2.0, c(k, f_iv))])?,
        });
        out.push(IdentityResidual {
            label: tag("D-extend"),
            residual: ev(vec![
                (1.0, d(k, tail)),
                (-1.0, d(k, e)),
                (-2.0, d(k, f_iv)),
                (TWO_PI, s(k, e)),
                (TWO_PI, s(k, f_iv)),
            ])?,
        });
    } else {
        let refl = TWO_PI - theta1;
        let head = (0.0, theta1);
        let tail = (theta1, TWO_PI);
        let e = (0.0, refl);
        let f_iv = (refl, PI);
        out.push(IdentityResidual {
            label: tag("S-head"),
            residual: ev(vec![(1.0, s(k, head)), (-1.0, s(k, e))])?,
        });
        out.push(IdentityResidual {
            label: tag("S-flip"),
            residual: ev(vec![(1.0, s(k, head)), (1.0, s(k, tail))])?,
        });
        out.push(IdentityResidual {
            label: tag("C-head"),
            residual: ev(vec![(1.0, c(k, head)), (-1.0, c(k, e)), (-2.0, c(k, f_iv))])?,
        });
        out.push(IdentityResidual {
            label: tag("C-tail"),
            residual: ev(vec![(1.0, c(k, tail)), (-1.0, c(k, e))])?,
        });
        out.push(IdentityResidual {
            label: tag("D-tail"),
            residual: ev(vec![(1.0, d(k, tail)), (-1.0, d(k, e)), (TWO_PI, s(k, e))])?,
        });
        out.push(IdentityResidual {
            label: tag("D-head"),
            residual: ev(vec![
                (1.0, d(k, head)),
                (-1.0, d(k, e)),
                (-2.0, d(k, f_iv)),
                (TWO_PI, s(k, f_iv)),
            ])?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Midpoint-rule oracle, split nowhere (integrands here are smooth).
    fn riemann(term: &BasisTerm, rho: f64, n: usize) -> f64 {
        let h = (term.b - term.a) / n as f64;
        (0..n)
            .map(|i| {
                let t = term.a + (i as f64 + 0.5) * h;
                term.trig_factor(t) * (1.0 + rho - t.cos()).abs().powf(term.beta) * h
            })
            .sum()
    }

    #[test]
    fn matches_riemann_oracle() {
        let cases = [
            (BasisTerm::cos(2, 1.5, (0.0, PI)), 0.7),
            (BasisTerm::cos(0, -0.5, (0.3, 2.0)), 1.3),
            (BasisTerm::sin(3, -1.5, (0.0, TWO_PI)), -3.2),
            (BasisTerm::theta_sin(1, 0.5, (1.0, 5.0)), 2.0),
            (BasisTerm::theta_sin(4, -2.5, (0.0, PI)), -2.7),
        ];
        for (term, rho) in cases {
            let got = eval_basis(&term, rho).unwrap();
            let want = riemann(&term, rho, 4_000_000);
            assert_relative_eq!(got, want, epsilon = 1e-8, max_relative = 1e-8);
        }
    }

    #[test]
    fn closed_form_full_period_inverse() {
        // int_0^{2pi} dtheta / |1 + rho - cos| = 2 pi / sqrt((1+rho)^2 - 1)
        for &rho in &[0.5f64, 1.0, 3.0, -2.5, -4.0] {
            let u = 1.0 + rho;
            let exact = TWO_PI / (u * u - 1.0).sqrt();
            let term = BasisTerm::cos(0, -1.0, (0.0, TWO_PI));
            let got = eval_basis(&term, rho).unwrap();
            assert_relative_eq!(got, exact, max_relative = 1e-10);
        }
    }

    #[test]
    fn closed_form_full_period_inverse_square() {
        // int_0^{2pi} dtheta / (1 + rho - cos)^2 = 2 pi |1+rho| ((1+rho)^2 - 1)^{-3/2}
        for &rho in &[0.5f64, 1.0, 3.0, -2.5] {
            let u = (1.0 + rho).abs();
            let exact = TWO_PI * u * (u * u - 1.0).powf(-1.5);
            let term = BasisTerm::cos(0, -2.0, (0.0, TWO_PI));
            let got = eval_basis(&term, rho).unwrap();
            assert_relative_eq!(got, exact, max_relative = 1e-10);
        }
    }

    #[test]
    fn sin_zero_index_and_empty_interval() {
        let z = BasisTerm::sin(0, 0.5, (0.0, PI));
        assert_eq!(eval_basis(&z, 1.0).unwrap(), 0.0);
        let e = BasisTerm::cos(2, 0.5, (1.0, 1.0));
        assert_eq!(eval_basis(&e, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn sign_change_rejected_for_negative_beta() {
        let term = BasisTerm::cos(1, -0.5, (0.0, TWO_PI));
        assert!(matches!(
            eval_basis(&term, -1.0),
            Err(Error::SignChange { .. })
        ));
        // positive beta integrates through the kink
        let term = BasisTerm::cos(1, 0.5, (0.0, TWO_PI));
        assert!(eval_basis(&term, -1.0).is_ok());
    }

    #[test]
    fn drho_matches_finite_differences() {
        let cfg = QuadConfig::default();
        let cases = [
            (BasisTerm::cos(2, 1.5, (0.0, PI)), 0.9),
            (BasisTerm::sin(1, -0.5, (0.5, 2.5)), 2.2),
            (BasisTerm::cos(0, -1.5, (0.0, TWO_PI)), -3.1),
            (BasisTerm::pow_rho(1.5), 1.7),
            (BasisTerm::pow_rho_plus2(-0.5), -4.0),
        ];
        for (term, rho) in cases {
            for order in 1..=3usize {
                let h = 1e-4 * (order as f64);
                // central difference of the (order-1)-th derivative
                let up = eval_basis_drho_with(&term, rho + h, order - 1, &cfg).unwrap();
                let dn = eval_basis_drho_with(&term, rho - h, order - 1, &cfg).unwrap();
                let fd = (up - dn) / (2.0 * h);
                let got = eval_basis_drho_with(&term, rho, order, &cfg).unwrap();
                assert_relative_eq!(got, fd, epsilon = 1e-5, max_relative = 1e-5);
            }
        }
    }

    #[test]
    fn drho_order_cap() {
        let term = BasisTerm::cos(1, 0.5, (0.0, PI));
        assert!(matches!(
            eval_basis_drho(&term, 1.0, MAX_DRHO_ORDER + 1),
            Err(Error::DerivativeOrder { .. })
        ));
    }

    #[test]
    fn combination_grouping_matches_termwise() {
        let terms = vec![
            (0.7, BasisTerm::cos(1, -0.5, (0.0, 2.0))),
            (-0.3, BasisTerm::sin(2, -0.5, (0.0, 2.0))),
            (1.1, BasisTerm::cos(3, 1.5, (0.0, 2.0))),
            (0.4, BasisTerm::pow_rho(0.5)),
            (2.0, BasisTerm::constant()),
        ];
        let comb = LinearCombination::new(terms.clone(), vec![(0.0, f64::INFINITY)]);
        let rho = 1.4;
        let direct: f64 = terms
            .iter()
            .map(|(c, t)| c * eval_basis(t, rho).unwrap())
            .sum();
        assert_relative_eq!(comb.eval(rho).unwrap(), direct, max_relative = 1e-12);
    }

    #[test]
    fn identities_hold_spot_check() {
        let cfg = QuadConfig::default();
        for &theta1 in &[2.0, PI, 4.5, TWO_PI] {
            let rows = verify_interval_identities(theta1, 3, -0.5, 0.8, &cfg).unwrap();
            for row in rows {
                assert!(
                    row.residual.abs() < 1e-9,
                    "{}: {:.3e}",
                    row.label,
                    row.residual
                );
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        /// Full-period sine kernels vanish by the reflection symmetry.
        #[test]
        fn full_period_sine_vanishes(
            k in 1usize..5,
            beta in prop_oneof![Just(-1.5), Just(-0.5), Just(0.5), Just(1.5)],
            rho in prop_oneof![0.2f64..4.0, -6.0f64..-2.2],
        ) {
            let term = BasisTerm::sin(k, beta, (0.0, TWO_PI));
            let v = eval_basis(&term, rho).unwrap();
            prop_assert!(v.abs() < 1e-9, "S{k}(beta={beta}, rho={rho}) = {v:.3e}");
        }

        /// Random interval identities hold across both switch cases.
        #[test]
        fn identities_hold_random(
            theta1 in 0.3f64..6.0,
            k in 0usize..4,
            rho in prop_oneof![0.3f64..3.0, -5.0f64..-2.3],
            beta in prop_oneof![Just(-0.5), Just(1.5)],
        ) {
            let rows = verify_interval_identities(theta1, k, beta, rho, &QuadConfig::default()).unwrap();
            for row in rows {
                prop_assert!(row.residual.abs() < 1e-9, "{}: {:.3e}", row.label, row.residual);
            }
        }
    }
}
