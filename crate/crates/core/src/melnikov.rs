//! First- and second-order displacement coefficients of the return map.
//!
//! Writing the period-advance of the reduced equation as
//! `y(2 pi, rho) - rho = eps M1(rho) + eps^2 M2(rho) + O(eps^3)`, this
//! module computes
//!
//! * `M1` as an explicit kernel combination ([`m1_combination`]), obtained
//!   by splitting the perturbation into reflection-symmetric pieces — the
//!   result uses only the canonical intervals and exponent `alpha`;
//! * `M2` by direct nested quadrature ([`m2_direct`]), valid for any
//!   equation, using zone-wise Chebyshev fits for the inner cumulative
//!   integral;
//! * `M2` as a kernel combination fitted in the structured basis that the
//!   second-order analysis predicts ([`m2_structured`]), available when
//!   `M1` vanishes identically;
//! * the explicit second-order integrand `m2(theta)` whose kernel-weighted
//!   integral reproduces `M2` under those conditions ([`m2_integrand`]).
//!
//! Throughout, powers of the unperturbed orbit are evaluated with the
//! positive base `v = |1 + rho - cos theta|`; the branch sign of `rho`
//! enters the nested second-order term once, as the derivative of `v^alpha`
//! along the branch.

use crate::equation::{center_conditions, AbelEquation, ThetaCase, Zone, PI, TWO_PI};
use crate::error::{Error, Result};
use crate::quad::{branch_sign, BasisTerm, ChebSeries, LinearCombination, QuadConfig};
use nalgebra::{DMatrix, DVector};

/// Tolerance below which a closed-form coefficient is dropped from a
/// combination.
const DROP_TOL: f64 = 0.0;

/// Relative tail tolerance for the zone-wise Chebyshev fits.
const CHEB_TOL: f64 = 1e-13;

/// Acceptance threshold for the structured least-squares fit.
pub const STRUCTURED_FIT_TOL: f64 = 1e-7;

/// Number of fit nodes beyond the basis size.
const EXTRA_NODES: usize = 5;

/// The first-order displacement coefficient as a kernel combination.
///
/// The combination contains a constant (`int P1`), cosine kernels over the
/// canonical intervals determined by the switch position, and sine kernels
/// over the first canonical interval, all at exponent `alpha`. Exact-zero
/// coefficients are omitted.
pub fn m1_combination(eq: &AbelEquation) -> Result<LinearCombination> {
    let alpha = eq.alpha();
    let theta1 = eq.theta1();
    let m = eq.m();
    let mut terms: Vec<(f64, BasisTerm)> = Vec::new();
    let mut push = |coef: f64, term: BasisTerm| {
        if coef.abs() > DROP_TOL {
            terms.push((coef, term));
        }
    };
    push(eq.p10(), BasisTerm::constant());
    match eq.theta_case() {
        ThetaCase::BelowPi => {
            let e1 = (0.0, theta1);
            let e2 = (theta1, PI);
            for k in 0..=m {
                push(
                    eq.d1t(Zone::Plus, k) + eq.d1t(Zone::Minus, k),
                    BasisTerm::cos(k, alpha, e1),
                );
                push(2.0 * eq.d1t(Zone::Minus, k), BasisTerm::cos(k, alpha, e2));
                if k >= 1 {
                    push(
                        eq.c1t(Zone::Plus, k) - eq.c1t(Zone::Minus, k),
                        BasisTerm::sin(k, alpha, e1),
                    );
                }
            }
        }
        ThetaCase::AbovePi => {
            let e1 = (0.0, TWO_PI - theta1);
            let e2 = (TWO_PI - theta1, PI);
            for k in 0..=m {
                push(
                    eq.d1t(Zone::Plus, k) + eq.d1t(Zone::Minus, k),
                    BasisTerm::cos(k, alpha, e1),
                );
                push(2.0 * eq.d1t(Zone::Plus, k), BasisTerm::cos(k, alpha, e2));
                if k >= 1 {
                    push(
                        eq.c1t(Zone::Plus, k) - eq.c1t(Zone::Minus, k),
                        BasisTerm::sin(k, alpha, e1),
                    );
                }
            }
        }
        ThetaCase::Pi => {
            let e = (0.0, PI);
            for k in 0..=m {
                push(
                    eq.d1t(Zone::Plus, k) + eq.d1t(Zone::Minus, k),
                    BasisTerm::cos(k, alpha, e),
                );
                if k >= 1 {
                    push(
                        eq.c1t(Zone::Plus, k) - eq.c1t(Zone::Minus, k),
                        BasisTerm::sin(k, alpha, e),
                    );
                }
            }
        }
        ThetaCase::TwoPi => {
            let e = (0.0, PI);
            for k in 0..=m {
                push(2.0 * eq.d1t(Zone::Plus, k), BasisTerm::cos(k, alpha, e));
            }
        }
    }
    Ok(LinearCombination::new(terms, eq.rho_domain()))
}

/// Zone-wise spectral model of one orbit's nested integrals.
struct OrbitFits {
    zones: Vec<(f64, f64)>,
    /// cumulative `int_0^theta Q1~ v^alpha`, one antiderivative per zone
    inner: Vec<ChebSeries>,
    /// value of the cumulative at each zone's left endpoint
    offsets: Vec<f64>,
}

impl OrbitFits {
    fn build(eq: &AbelEquation, rho: f64) -> Result<Self> {
        let alpha = eq.alpha();
        let zones = zone_list(eq.theta1());
        let mut inner = Vec::with_capacity(zones.len());
        let mut offsets = Vec::with_capacity(zones.len());
        let mut acc = 0.0;
        for (i, &(a, b)) in zones.iter().enumerate() {
            let zone = if i == 0 { Zone::Plus } else { Zone::Minus };
            let zone = if zones.len() == 1 { Zone::Minus } else { zone };
            let g = |t: f64| {
                eq.scale() * eq.q1().value_in(zone, t) * pow_base(rho, t, alpha)
            };
            let fit = ChebSeries::fit(&g, a, b, CHEB_TOL)?;
            offsets.push(acc);
            let anti = fit.antiderivative();
            acc += anti.eval(b);
            inner.push(anti);
        }
        Ok(Self { zones, inner, offsets })
    }

    /// `int_0^theta Q1~ v^alpha`.
    fn cumulative(&self, theta: f64) -> f64 {
        let i = self
            .zones
            .iter()
            .position(|&(_, b)| theta <= b)
            .unwrap_or(self.zones.len() - 1);
        self.offsets[i] + self.inner[i].eval(theta)
    }
}

fn zone_list(theta1: f64) -> Vec<(f64, f64)> {
    if crate::equation::theta_case(theta1) == ThetaCase::TwoPi {
        vec![(0.0, TWO_PI)]
    } else {
        vec![(0.0, theta1), (theta1, TWO_PI)]
    }
}

fn pow_base(rho: f64, theta: f64, beta: f64) -> f64 {
    (1.0 + rho - theta.cos()).abs().powf(beta)
}

/// The first-variation integral `S1(theta) = int_0^theta (P1 + Q1~ v^alpha)`.
pub fn s1_hat(eq: &AbelEquation, rho: f64, theta: f64) -> Result<f64> {
    branch_sign(rho)?;
    let fits = OrbitFits::build(eq, rho)?;
    Ok(eq.p1().cumulative(theta) + fits.cumulative(theta))
}

/// Second-order displacement coefficient by direct nested quadrature.
///
/// `M2 = int P2 + int Q2~ v^alpha + s * alpha * int Q1~ v^(alpha-1) S1`,
/// with `s` the branch sign of `rho` (the sign of `d(v^alpha)/drho`). Both
/// integrals are evaluated from zone-wise Chebyshev fits, a route fully
/// independent of the Gauss-Kronrod kernel path.
pub fn m2_direct(eq: &AbelEquation, rho: f64) -> Result<f64> {
    let sigma = branch_sign(rho)?;
    if !eq.rho_in_domain(rho) {
        return Err(Error::RhoOutsideDomain {
            rho,
            domain: format!("{:?}", eq.rho_domain()),
        });
    }
    let alpha = eq.alpha();
    let fits = OrbitFits::build(eq, rho)?;
    let mut total = eq.p20();
    for (i, &(a, b)) in fits.zones.iter().enumerate() {
        let zone = if fits.zones.len() == 1 || i > 0 { Zone::Minus } else { Zone::Plus };
        let outer = |t: f64| {
            let s1 = eq.p1().cumulative(t) + fits.cumulative(t);
            eq.scale() * eq.q2().value_in(zone, t) * pow_base(rho, t, alpha)
                + sigma
                    * alpha
                    * eq.scale()
                    * eq.q1().value_in(zone, t)
                    * pow_base(rho, t, alpha - 1.0)
                    * s1
        };
        total += ChebSeries::fit(&outer, a, b, CHEB_TOL)?.integral();
    }
    Ok(total)
}

/// The nested self-interaction `int_0^{2 pi} Q1~ v^(alpha-1) G`, with
/// `G(theta) = int_0^theta Q1~ v^alpha`.
///
/// When the first-order coefficient vanishes identically, `Q1~ v^alpha` is
/// odd about `theta = pi` and `G` even, so this integral cancels exactly;
/// it is exposed as a checkable invariant.
pub fn nested_q1_integral(eq: &AbelEquation, rho: f64) -> Result<f64> {
    branch_sign(rho)?;
    let alpha = eq.alpha();
    let fits = OrbitFits::build(eq, rho)?;
    let mut total = 0.0;
    for (i, &(a, b)) in fits.zones.iter().enumerate() {
        let zone = if fits.zones.len() == 1 || i > 0 { Zone::Minus } else { Zone::Plus };
        let f = |t: f64| {
            eq.scale()
                * eq.q1().value_in(zone, t)
                * pow_base(rho, t, alpha - 1.0)
                * fits.cumulative(t)
        };
        total += ChebSeries::fit(&f, a, b, CHEB_TOL)?.integral();
    }
    Ok(total)
}

/// Data for the pointwise second-order integrand.
struct IntegrandData {
    /// cosine expansion of `W = Q1~ / sin`, `W = w[0] + sum w[i] cos(i t)`
    w: Vec<f64>,
}

impl IntegrandData {
    fn build(eq: &AbelEquation) -> Result<Self> {
        let check = center_conditions(eq);
        if !check.holds {
            return Err(Error::CenterRequired {
                what: "second-order integrand requires a vanishing first-order coefficient".into(),
                violations: check.violations,
            });
        }
        if eq.theta_case() == ThetaCase::Pi {
            return Err(Error::Invalid(
                "the pointwise second-order integrand is not defined for a switch at pi \
                 (boundary terms survive there); use the structured fit"
                    .into(),
            ));
        }
        // under the vanishing conditions Q1~ is one global sine polynomial,
        // so W = Q1~/sin expands in second-kind polynomials of cos:
        // sin(k t)/sin(t) = [k odd] + 2 sum_{i>=1, i = k-1 mod 2, i <= k-1} cos(i t)
        let m = eq.m();
        let mut w = vec![0.0; m.max(1)];
        for k in 1..=m {
            let c = eq.c1t(Zone::Plus, k);
            if k % 2 == 1 {
                w[0] += c;
            }
            let mut i = k - 1;
            while i >= 1 {
                w[i] += 2.0 * c;
                if i < 2 {
                    break;
                }
                i -= 2;
            }
        }
        Ok(Self { w })
    }

    fn value(&self, theta: f64) -> f64 {
        self.w
            .iter()
            .enumerate()
            .map(|(i, &wi)| wi * (i as f64 * theta).cos())
            .sum()
    }

    fn derivative(&self, theta: f64) -> f64 {
        self.w
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, &wi)| -(i as f64) * wi * (i as f64 * theta).sin())
            .sum()
    }
}

/// Pointwise second-order integrand `m2(theta)` with
/// `M2 = int P2 + int_0^{2 pi} m2(theta) v^alpha dtheta`.
///
/// Defined when the first-order coefficient vanishes identically and the
/// switch is not at `pi`: integrating the nested term by parts moves the
/// derivative onto `W F1` (`W = Q1~/sin`, `F1 = int_0^theta P1`), giving
/// `m2 = Q2~ - W' F1 - W P1` with no boundary contribution.
pub fn m2_integrand(eq: &AbelEquation, theta: f64) -> Result<f64> {
    let data = IntegrandData::build(eq)?;
    Ok(m2_integrand_value(eq, &data, theta))
}

fn m2_integrand_value(eq: &AbelEquation, data: &IntegrandData, theta: f64) -> f64 {
    let f1 = eq.p1().cumulative(theta);
    let p1 = eq.p1().value(theta);
    eq.q2_tilde(theta) - data.derivative(theta) * f1 - data.value(theta) * p1
}

/// Result of fitting `M2` in its structured kernel basis.
#[derive(Debug, Clone)]
pub struct StructuredM2 {
    pub combination: LinearCombination,
    /// max-norm fit residual, scaled by `max(1, max |M2 sample|)`
    pub residual: f64,
    pub case: ThetaCase,
    /// `(rho, M2(rho))` samples used for the fit
    pub nodes: Vec<(f64, f64)>,
}

/// Kernel basis predicted for the second-order coefficient.
fn structured_basis(eq: &AbelEquation) -> Vec<BasisTerm> {
    let alpha = eq.alpha();
    let m = eq.m();
    let theta1 = eq.theta1();
    let mut basis = vec![BasisTerm::constant()];
    match eq.theta_case() {
        ThetaCase::BelowPi | ThetaCase::AbovePi => {
            let e1 = if theta1 <= PI { (0.0, theta1) } else { (0.0, TWO_PI - theta1) };
            let e2 = (e1.1, PI);
            for k in 1..m {
                basis.push(BasisTerm::theta_sin(k, alpha, e1));
                basis.push(BasisTerm::theta_sin(k, alpha, e2));
            }
            for k in 1..=(2 * m - 1) {
                basis.push(BasisTerm::sin(k, alpha, e1));
            }
            for k in 1..m {
                basis.push(BasisTerm::sin(k, alpha, e2));
            }
            for k in 0..=(2 * m - 1) {
                basis.push(BasisTerm::cos(k, alpha, e1));
                basis.push(BasisTerm::cos(k, alpha, e2));
            }
        }
        ThetaCase::Pi => {
            basis.push(BasisTerm::pow_rho(alpha));
            basis.push(BasisTerm::pow_rho_plus2(alpha));
            let e = (0.0, PI);
            for k in 1..=(2 * m - 1) {
                basis.push(BasisTerm::sin(k, alpha, e));
            }
            for k in 0..=(2 * m - 1) {
                basis.push(BasisTerm::cos(k, alpha, e));
            }
        }
        ThetaCase::TwoPi => {
            let e = (0.0, PI);
            for k in 0..=(2 * m - 1) {
                basis.push(BasisTerm::cos(k, alpha, e));
            }
        }
    }
    basis
}

/// Fit window on the first admissible branch: `[0.2, 8]` on the positive
/// branch, `[-10, -2.2]` on the negative one.
fn fit_window(eq: &AbelEquation) -> (f64, f64) {
    if eq.rho_domain().iter().any(|&(_, b)| b > 0.0) {
        (0.2, 8.0)
    } else {
        (-10.0, -2.2)
    }
}

/// Fit the second-order coefficient in its structured basis.
///
/// Preconditions: the first-order coefficient vanishes identically, the
/// leading sine coefficient of `Q1~` is nonzero, and for a switch at `pi`
/// the sine rows of `P1` agree across zones (otherwise extra kernel shapes
/// appear that the basis does not span). Samples of [`m2_direct`] at
/// Chebyshev nodes of the fit window are matched in least squares; a scaled
/// residual above [`STRUCTURED_FIT_TOL`] is an error.
pub fn m2_structured(eq: &AbelEquation) -> Result<StructuredM2> {
    let check = center_conditions(eq);
    if !check.holds {
        return Err(Error::CenterRequired {
            what: "structured second-order fit requires a vanishing first-order coefficient"
                .into(),
            violations: check.violations,
        });
    }
    let m = eq.m();
    let leading = eq
        .c1t(Zone::Plus, m)
        .abs()
        .max(eq.c1t(Zone::Minus, m).abs());
    if leading <= 1e-12 {
        return Err(Error::CenterRequired {
            what: "structured second-order fit requires a nonzero leading sine coefficient in Q1"
                .into(),
            violations: vec![format!("|c1[{m}]| = {leading:.3e}")],
        });
    }
    if eq.theta_case() == ThetaCase::Pi {
        let mut bad = Vec::new();
        for k in 1..=m {
            let ap = eq.p1().sin_coeff(Zone::Plus, k);
            let am = eq.p1().sin_coeff(Zone::Minus, k);
            if (ap - am).abs() > 1e-12 {
                bad.push(format!("a1[{k}]+ - a1[{k}]- = {:.3e}", ap - am));
            }
        }
        if !bad.is_empty() {
            return Err(Error::CenterRequired {
                what: "structured fit at a switch of pi requires equal sine rows of P1 \
                       across zones"
                    .into(),
                violations: bad,
            });
        }
    }

    let basis = structured_basis(eq);
    let (lo, hi) = fit_window(eq);
    let n_nodes = basis.len() + EXTRA_NODES;
    let cfg = QuadConfig::default();

    let mut nodes = Vec::with_capacity(n_nodes);
    for j in 0..n_nodes {
        // Chebyshev nodes of the window
        let t = (PI * (2 * j + 1) as f64 / (2 * n_nodes) as f64).cos();
        let rho = 0.5 * (lo + hi) + 0.5 * (hi - lo) * t;
        nodes.push((rho, m2_direct(eq, rho)?));
    }

    let mut a = DMatrix::zeros(n_nodes, basis.len());
    let mut y = DVector::zeros(n_nodes);
    for (i, &(rho, value)) in nodes.iter().enumerate() {
        for (j, term) in basis.iter().enumerate() {
            a[(i, j)] = crate::quad::eval_basis_with(term, rho, &cfg)?.value;
        }
        y[i] = value;
    }
    let svd = a.clone().svd(true, true);
    let coeffs = svd
        .solve(&y, 1e-13)
        .map_err(|e| Error::IllConditioned { detail: e.to_string() })?;
    let fitted = &a * &coeffs;
    let scale = nodes
        .iter()
        .fold(1.0_f64, |s, &(_, v)| s.max(v.abs()));
    let residual = (&fitted - &y).amax() / scale;
    if residual > STRUCTURED_FIT_TOL {
        return Err(Error::StructuredFit {
            residual,
            tol: STRUCTURED_FIT_TOL,
        });
    }
    let terms = basis
        .into_iter()
        .enumerate()
        .map(|(j, t)| (coeffs[j], t))
        .collect();
    Ok(StructuredM2 {
        combination: LinearCombination::new(terms, eq.rho_domain()),
        residual,
        case: eq.theta_case(),
        nodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equation::{CoeffTable, ExponentPair, PiecewiseTrigPoly};
    use crate::quad::integrate;
    use approx::assert_relative_eq;

    fn build_eq(
        (p, q): (i64, i64),
        theta1: f64,
        p1: (CoeffTable, CoeffTable),
        p2: (CoeffTable, CoeffTable),
        q1: (CoeffTable, CoeffTable),
        q2: (CoeffTable, CoeffTable),
    ) -> AbelEquation {
        let m = p1.0.len() - 1;
        AbelEquation::new(
            ExponentPair::new(p, q).unwrap(),
            PiecewiseTrigPoly::new(m, theta1, p1.0, p1.1).unwrap(),
            PiecewiseTrigPoly::new(m, theta1, p2.0, p2.1).unwrap(),
            PiecewiseTrigPoly::new(m, theta1, q1.0, q1.1).unwrap(),
            PiecewiseTrigPoly::new(m, theta1, q2.0, q2.1).unwrap(),
        )
        .unwrap()
    }

    /// A degree-1 equation with a genuine switch and no special structure.
    fn generic_eq(theta1: f64, exps: (i64, i64)) -> AbelEquation {
        build_eq(
            exps,
            theta1,
            (vec![(0.0, 0.2), (0.5, -0.1)], vec![(0.0, -0.3), (0.1, 0.4)]),
            (vec![(0.0, 0.1), (-0.2, 0.3)], vec![(0.0, 0.0), (0.4, -0.1)]),
            (vec![(0.0, 0.3), (0.7, -0.4)], vec![(0.0, -0.2), (0.5, 0.1)]),
            (vec![(0.0, -0.1), (0.3, 0.2)], vec![(0.0, 0.2), (-0.1, 0.3)]),
        )
    }

    /// Center equation (vanishing first order) for a generic switch.
    fn center_eq(theta1: f64, exps: (i64, i64)) -> AbelEquation {
        // Q1: pure sine, equal across zones; P1's minus-zone constant row
        // absorbs the rest of the full-period integral so int P1 = 0.
        let p1_plus: CoeffTable = vec![(0.0, 0.2), (0.5, -0.1)];
        let mut p1_minus: CoeffTable = vec![(0.0, 0.0), (0.1, 0.4)];
        let probe =
            PiecewiseTrigPoly::new(1, theta1, p1_plus.clone(), p1_minus.clone()).unwrap();
        p1_minus[0].1 = -probe.full_integral() / (TWO_PI - theta1);
        build_eq(
            exps,
            theta1,
            (p1_plus, p1_minus),
            (vec![(0.0, 0.1), (-0.2, 0.3)], vec![(0.0, 0.0), (0.4, -0.1)]),
            (vec![(0.0, 0.0), (0.7, 0.0)], vec![(0.0, 0.0), (0.7, 0.0)]),
            (vec![(0.0, -0.1), (0.3, 0.2)], vec![(0.0, 0.2), (-0.1, 0.3)]),
        )
    }

    #[test]
    fn m1_matches_direct_quadrature() {
        let cfg = QuadConfig::default();
        for &theta1 in &[2.0, PI, 4.5, TWO_PI] {
            for &(exps, rho) in &[((-1i64, 2i64), 0.8), ((3, 2), -2.6)] {
                let eq = if theta1 == TWO_PI {
                    // smooth case needs equal tables
                    build_eq(
                        exps,
                        theta1,
                        (vec![(0.0, 0.2), (0.5, -0.1)], vec![(0.0, 0.2), (0.5, -0.1)]),
                        (vec![(0.0, 0.0), (0.0, 0.0)], vec![(0.0, 0.0), (0.0, 0.0)]),
                        (vec![(0.0, 0.3), (0.7, -0.4)], vec![(0.0, 0.3), (0.7, -0.4)]),
                        (vec![(0.0, 0.0), (0.0, 0.0)], vec![(0.0, 0.0), (0.0, 0.0)]),
                    )
                } else {
                    generic_eq(theta1, exps)
                };
                let comb = m1_combination(&eq).unwrap();
                let alpha = eq.alpha();
                let f = |t: f64| eq.q1_tilde(t) * pow_base(rho, t, alpha);
                let split = if theta1 < TWO_PI { theta1 } else { PI };
                let (i1, _) = integrate(&f, 0.0, split, &cfg).unwrap();
                let (i2, _) = integrate(&f, split, TWO_PI, &cfg).unwrap();
                let direct = eq.p10() + i1 + i2;
                assert_relative_eq!(
                    comb.eval(rho).unwrap(),
                    direct,
                    epsilon = 1e-9,
                    max_relative = 1e-9
                );
            }
        }
    }

    #[test]
    fn s1_hat_endpoint_is_m1_when_centered() {
        // at theta = 2 pi the first variation equals the first-order
        // coefficient

        let eq = generic_eq(2.0, (-1, 2));
        let m1 = m1_combination(&eq).unwrap().eval(0.7).unwrap();
        let s1 = s1_hat(&eq, 0.7, TWO_PI).unwrap();
        assert_relative_eq!(s1, m1, epsilon = 1e-9);
    }

    #[test]
    fn nested_q1_cancels_for_center_equations() {
        for &theta1 in &[2.0, PI, 4.5] {
            let eq = center_eq(theta1, (-1, 2));
            for &rho in &[0.4, 1.5, 6.0] {
                let v = nested_q1_integral(&eq, rho).unwrap();
                assert!(v.abs() < 1e-9, "theta1={theta1}, rho={rho}: {v:.3e}");
            }
        }
        // negative branch
        let eq = center_eq(2.0, (3, 2));
        let v = nested_q1_integral(&eq, -3.0).unwrap();
        assert!(v.abs() < 1e-9);
    }

    #[test]
    fn integrand_duality_reproduces_direct_value() {
        let cfg = QuadConfig::default();
        for &theta1 in &[2.0, 4.5] {
            for &(exps, rho) in &[((-1i64, 2i64), 0.9), ((3, 2), -2.8)] {
                let eq = center_eq(theta1, exps);
                let alpha = eq.alpha();
                let direct = m2_direct(&eq, rho).unwrap();
                let f = |t: f64| m2_integrand(&eq, t).unwrap() * pow_base(rho, t, alpha);
                let (i1, _) = integrate(&f, 0.0, theta1, &cfg).unwrap();
                let (i2, _) = integrate(&f, theta1, TWO_PI, &cfg).unwrap();
                let dual = eq.p20() + i1 + i2;
                assert_relative_eq!(direct, dual, epsilon = 1e-6, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn integrand_rejects_non_center() {
        let eq = generic_eq(2.0, (-1, 2));
        assert!(matches!(
            m2_integrand(&eq, 1.0),
            Err(Error::CenterRequired { .. })
        ));
        let eq = center_eq(PI, (-1, 2));
        assert!(matches!(m2_integrand(&eq, 1.0), Err(Error::Invalid(_))));
    }

    #[test]
    fn structured_fit_generic_switch() {
        let eq = center_eq(2.0, (-1, 2));
        let fit = m2_structured(&eq).unwrap();
        assert!(fit.residual < STRUCTURED_FIT_TOL);
        // cross-check the combination against the direct value off the fit
        // nodes
        for &rho in &[0.55, 2.3, 7.1] {
            let direct = m2_direct(&eq, rho).unwrap();
            let fitted = fit.combination.eval(rho).unwrap();
            assert_relative_eq!(direct, fitted, epsilon = 1e-6, max_relative = 1e-6);
        }
    }

    #[test]
    fn structured_fit_switch_at_pi() {
        // equal sine rows of P1 across zones, opposite cosine rows of Q1
        let eq = build_eq(
            (-1, 2),
            PI,
            (vec![(0.0, 0.2), (0.5, -0.1)], vec![(0.0, -0.2), (0.5, 0.4)]),
            (vec![(0.0, 0.1), (-0.2, 0.3)], vec![(0.0, 0.0), (0.4, -0.1)]),
            (vec![(0.0, 0.3), (0.7, 0.2)], vec![(0.0, -0.3), (0.7, -0.2)]),
            (vec![(0.0, -0.1), (0.3, 0.2)], vec![(0.0, 0.2), (-0.1, 0.3)]),
        );
        assert!(center_conditions(&eq).holds);
        let fit = m2_structured(&eq).unwrap();
        assert!(fit.residual < STRUCTURED_FIT_TOL);
        for &rho in &[0.9, 4.2] {
            let direct = m2_direct(&eq, rho).unwrap();
            let fitted = fit.combination.eval(rho).unwrap();
            assert_relative_eq!(direct, fitted, epsilon = 1e-6, max_relative = 1e-6);
        }
        // the axis kernels must genuinely participate at this switch
        assert!(fit
            .combination
            .coefficient_of(crate::quad::KernelKind::PowRho, 0, (0.0, 0.0))
            .is_some());
    }

    #[test]
    fn structured_fit_smooth_case() {
        // theta1 = 2 pi with a pure-sine Q1
        let eq = build_eq(
            (-1, 2),
            TWO_PI,
            (vec![(0.0, 0.0), (0.5, -0.1)], vec![(0.0, 0.0), (0.5, -0.1)]),
            (vec![(0.0, 0.1), (-0.2, 0.3)], vec![(0.0, 0.1), (-0.2, 0.3)]),
            (vec![(0.0, 0.0), (0.7, 0.0)], vec![(0.0, 0.0), (0.7, 0.0)]),
            (vec![(0.0, -0.1), (0.3, 0.2)], vec![(0.0, -0.1), (0.3, 0.2)]),
        );
        let fit = m2_structured(&eq).unwrap();
        assert!(fit.residual < STRUCTURED_FIT_TOL);
        assert_eq!(fit.combination.len(), 2 * eq.m() + 1); // constant + cosines
    }

    #[test]
    fn structured_fit_rejects_bad_preconditions() {
        // non-center
        assert!(matches!(
            m2_structured(&generic_eq(2.0, (-1, 2))),
            Err(Error::CenterRequired { .. })
        ));
        // vanishing leading sine coefficient
        let eq = build_eq(
            (-1, 2),
            2.0,
            (vec![(0.0, 0.0), (0.5, -0.1)], vec![(0.0, 0.0), (0.1, 0.4)]),
            (vec![(0.0, 0.0), (0.0, 0.0)], vec![(0.0, 0.0), (0.0, 0.0)]),
            (vec![(0.0, 0.0), (0.0, 0.0)], vec![(0.0, 0.0), (0.0, 0.0)]),
            (vec![(0.0, 0.0), (0.0, 0.0)], vec![(0.0, 0.0), (0.0, 0.0)]),
        );
        assert!(matches!(
            m2_structured(&eq),
            Err(Error::CenterRequired { .. })
        ));
    }

    #[test]
    fn m2_direct_checks_domain() {
        let eq = generic_eq(2.0, (3, 2)); // negative branch only
        assert!(m2_direct(&eq, -3.0).is_ok());
        assert!(matches!(
            m2_direct(&eq, 1.0),
            Err(Error::RhoOutsideDomain { .. })
        ));
    }
}
