//! Quadrature-free kernel evaluation through the cosine expansion of the
//! weight, carried in double-double precision.
//!
//! On the positive branch the weight expands as
//!
//! ```text
//! (1 + rho - cos theta)^beta = (I_0 + 2 sum_k I_k cos(k theta)) / pi,
//! I_k = int_0^pi cos(k theta) (1 + rho - cos theta)^beta dtheta,
//! ```
//!
//! and integration by parts gives the three-term recurrence
//!
//! ```text
//! (k + beta + 1) I_{k+1} = 2 k (1 + rho) I_k - (k - beta - 1) I_{k-1},
//! ```
//!
//! whose decaying solution is recovered stably by backward recurrence,
//! normalized against the closed-form value `rho^beta` of the weight at
//! `theta = 0`. Every trigonometric kernel over a subinterval of `[0, pi]`
//! is then a geometrically convergent sum of elementary trigonometric
//! integrals, which depend only on the interval — so an evaluator over a
//! `rho` window precomputes them once and each evaluation reduces to dot
//! products against the expansion table. The payoff over adaptive
//! quadrature is precision: combinations whose coefficients are many
//! orders larger than the combination itself stay evaluable, because
//! nothing here rounds at f64.

use crate::dd::{self, Dd};
use crate::quad::{BasisTerm, KernelKind};

/// `Some(t)` with `beta = t / 2` when `beta` is a half-odd-integer, the
/// exponent family the expansion's recurrence never divides by zero for.
pub(crate) fn half_odd_exponent(beta: f64) -> Option<i32> {
    let twice = 2.0 * beta;
    if twice.fract() == 0.0 && twice.abs() < 64.0 && (twice as i64) % 2 != 0 {
        Some(twice as i32)
    } else {
        None
    }
}

/// Whether the expansion path can evaluate this family: uniform
/// half-odd-integer exponent across all weighted kernels, every
/// integration interval inside `[0, pi]`.
pub(crate) fn eligible(terms: &[BasisTerm]) -> Option<i32> {
    let eps = 1e-9;
    let mut shared: Option<i32> = None;
    for term in terms {
        if term.kind == KernelKind::Const {
            continue;
        }
        let t = half_odd_exponent(term.beta)?;
        if *shared.get_or_insert(t) != t {
            return None;
        }
        if term.kind.is_integral()
            && !(term.a >= -eps && term.b <= crate::equation::PI + eps && term.a < term.b)
        {
            return None;
        }
    }
    shared
}

/// Expansion coefficients long enough that the truncated tail sits below
/// the double-double noise floor of the leading coefficient.
fn coeff_len(rho: f64) -> usize {
    let r = 1.0 + rho;
    let zeta = r - (r * r - 1.0).sqrt();
    (-34.0 * std::f64::consts::LN_10 / zeta.ln()).ceil() as usize + 3
}

/// The expansion coefficients `I_0 .. I_{len-1}` of the weight at one
/// `rho > 0`, by backward recurrence from a padded start index.
fn expansion(rho: f64, t: i32, len: usize) -> Vec<Dd> {
    debug_assert!(rho > 0.0, "expansion requires the positive branch");
    let beta = t as f64 / 2.0;
    let r_f = 1.0 + rho;
    let zeta = r_f - (r_f * r_f - 1.0).sqrt();
    // padding measured in this rho's own decay length, so seed
    // contamination has died off by the time the kept range is reached
    let pad = (-17.0 * std::f64::consts::LN_10 / zeta.ln()).ceil() as usize + 16;
    let start = len + pad;

    let r = Dd::from_f64(rho).add(Dd::from_f64(1.0));
    let mut hat = vec![Dd::from_f64(0.0); start + 2];
    hat[start] = Dd::from_f64(1e-280);
    let mut sum = hat[start];
    for k in (1..=start).rev() {
        let kf = k as f64;
        let next = Dd::from_f64(2.0 * kf)
            .mul(r)
            .mul(hat[k])
            .sub(Dd::from_f64(kf + beta + 1.0).mul(hat[k + 1]))
            .div(Dd::from_f64(kf - beta - 1.0));
        hat[k - 1] = next;
        sum = sum.add(next);
        if next.hi.abs() > 1e260 {
            for h in hat[k - 1..].iter_mut() {
                *h = h.scale_exp2(-1800);
            }
            sum = sum.scale_exp2(-1800);
        }
    }
    // weight at theta = 0: rho^beta = (I_0 + 2 sum_{k>=1} I_k) / pi
    let total = sum.scale_exp2(1).sub(hat[0]);
    let lambda = dd::PI.mul(Dd::from_f64(rho).pow_half(t)).div(total);
    hat.truncate(len);
    for h in &mut hat {
        *h = h.mul(lambda);
    }
    hat
}

/// Sine and cosine of `n x` for all `n` up to a table length, built from
/// one double-double `sin_cos` by the addition recurrence.
struct TrigTable {
    x: Dd,
    sin: Vec<Dd>,
    cos: Vec<Dd>,
}

impl TrigTable {
    fn new(x: f64, len: usize) -> Self {
        let x = Dd::from_f64(x);
        let (s1, c1) = x.sin_cos();
        let mut sin = Vec::with_capacity(len);
        let mut cos = Vec::with_capacity(len);
        sin.push(Dd::from_f64(0.0));
        cos.push(Dd::from_f64(1.0));
        for n in 1..len {
            let s = sin[n - 1].mul(c1).add(cos[n - 1].mul(s1));
            let c = cos[n - 1].mul(c1).sub(sin[n - 1].mul(s1));
            sin.push(s);
            cos.push(c);
        }
        TrigTable { x, sin, cos }
    }

    /// `int cos(n theta)` antiderivative at the table point; even in `n`.
    fn anti_cos(&self, n: i64) -> Dd {
        let m = n.unsigned_abs() as usize;
        if m == 0 {
            return self.x;
        }
        self.sin[m].div(Dd::from_f64(m as f64))
    }

    /// `int sin(n theta)` antiderivative at the table point; odd in `n`.
    fn anti_sin(&self, n: i64) -> Dd {
        let m = n.unsigned_abs() as usize;
        if m == 0 {
            return Dd::from_f64(0.0);
        }
        let v = self.cos[m].div(Dd::from_f64(m as f64)).neg();
        if n < 0 { v.neg() } else { v }
    }

    /// `int theta sin(n theta)` antiderivative at the table point; odd.
    fn anti_theta_sin(&self, n: i64) -> Dd {
        let m = n.unsigned_abs() as usize;
        if m == 0 {
            return Dd::from_f64(0.0);
        }
        let mf = Dd::from_f64(m as f64);
        let v = self.sin[m].div(mf.mul(mf)).sub(self.x.mul(self.cos[m]).div(mf));
        if n < 0 { v.neg() } else { v }
    }
}

/// `int_a^b trig(theta) cos(i theta) dtheta` for the trig factor of one
/// kernel kind, as a difference of elementary antiderivatives.
fn projected(kind: KernelKind, i: i64, k: i64, ta: &TrigTable, tb: &TrigTable) -> Dd {
    let half = |v: Dd| v.scale_exp2(-1);
    match kind {
        KernelKind::Cos => {
            // cos(i t) cos(k t) = [cos((i-k)t) + cos((i+k)t)] / 2
            let hi = tb.anti_cos(i - k).sub(ta.anti_cos(i - k));
            let lo = tb.anti_cos(i + k).sub(ta.anti_cos(i + k));
            half(hi.add(lo))
        }
        KernelKind::Sin => {
            // cos(i t) sin(k t) = [sin((k-i)t) + sin((k+i)t)] / 2
            let hi = tb.anti_sin(k - i).sub(ta.anti_sin(k - i));
            let lo = tb.anti_sin(k + i).sub(ta.anti_sin(k + i));
            half(hi.add(lo))
        }
        KernelKind::ThetaSin => {
            let hi = tb.anti_theta_sin(k - i).sub(ta.anti_theta_sin(k - i));
            let lo = tb.anti_theta_sin(k + i).sub(ta.anti_theta_sin(k + i));
            half(hi.add(lo))
        }
        _ => unreachable!("projection queried on non-integral kernel"),
    }
}

/// One family member, reduced to what an evaluation needs.
enum MemberSeries {
    /// integral kernel: value is `(proj[0] I_0 + 2 sum proj[i] I_i) / pi`
    Projected(Vec<Dd>),
    PowRho,
    PowRhoPlus2,
    Const,
}

/// Family evaluator over a `rho` range, with all interval-dependent work
/// hoisted out of the per-point evaluation.
pub(crate) struct SeriesEvaluator {
    t: i32,
    len: usize,
    members: Vec<MemberSeries>,
}

impl SeriesEvaluator {
    /// Prepare `terms` (uniform exponent `t / 2`) for evaluation at any
    /// `rho >= rho_min`; the expansion length is sized for the slowest
    /// decay, which `rho_min` attains.
    pub(crate) fn new(terms: &[BasisTerm], t: i32, rho_min: f64) -> Self {
        let len = coeff_len(rho_min);
        let max_k = terms.iter().map(|term| term.k).max().unwrap_or(0);
        let table_len = len + max_k + 1;

        let mut endpoints: Vec<f64> = Vec::new();
        for term in terms {
            if term.kind.is_integral() {
                for x in [term.a, term.b] {
                    if !endpoints.contains(&x) {
                        endpoints.push(x);
                    }
                }
            }
        }
        let tables: Vec<TrigTable> =
            endpoints.iter().map(|&x| TrigTable::new(x, table_len)).collect();
        let table_of =
            |x: f64| &tables[endpoints.iter().position(|&e| e == x).expect("endpoint table")];

        let members = terms
            .iter()
            .map(|term| match term.kind {
                KernelKind::Const => MemberSeries::Const,
                KernelKind::PowRho => MemberSeries::PowRho,
                KernelKind::PowRhoPlus2 => MemberSeries::PowRhoPlus2,
                kind => {
                    let ta = table_of(term.a);
                    let tb = table_of(term.b);
                    let proj = (0..len as i64)
                        .map(|i| projected(kind, i, term.k as i64, ta, tb))
                        .collect();
                    MemberSeries::Projected(proj)
                }
            })
            .collect();
        SeriesEvaluator { t, len, members }
    }

    /// Every member's value at `rho`, in double-double.
    pub(crate) fn eval_members(&self, rho: f64) -> Vec<Dd> {
        let coeffs = expansion(rho, self.t, self.len);
        let rho_dd = Dd::from_f64(rho);
        self.members
            .iter()
            .map(|member| match member {
                MemberSeries::Const => Dd::from_f64(1.0),
                MemberSeries::PowRho => rho_dd.pow_half(self.t),
                MemberSeries::PowRhoPlus2 => rho_dd.add(Dd::from_f64(2.0)).pow_half(self.t),
                MemberSeries::Projected(proj) => {
                    let mut sum = coeffs[0].mul(proj[0]);
                    for (coeff, p) in coeffs.iter().zip(proj).skip(1) {
                        sum = sum.add(coeff.mul(*p).scale_exp2(1));
                    }
                    sum.div(dd::PI)
                }
            })
            .collect()
    }

    /// `sum weights[j] * member_j(rho)`, in double-double.
    pub(crate) fn eval_combination(&self, weights: &[Dd], rho: f64) -> Dd {
        debug_assert_eq!(weights.len(), self.members.len());
        let mut acc = Dd::from_f64(0.0);
        for (&w, value) in weights.iter().zip(self.eval_members(rho)) {
            acc = acc.add(w.mul(value));
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equation::PI;
    use crate::quad::{eval_basis_with, QuadConfig};

    fn tight() -> QuadConfig {
        QuadConfig { abs_tol: 1e-13, rel_tol: 1e-13, ..QuadConfig::default() }
    }

    #[test]
    fn exponent_classification() {
        assert_eq!(half_odd_exponent(-0.5), Some(-1));
        assert_eq!(half_odd_exponent(1.5), Some(3));
        assert_eq!(half_odd_exponent(2.0), None);
        assert_eq!(half_odd_exponent(0.31), None);
    }

    #[test]
    fn single_kernels_match_quadrature() {
        let cfg = tight();
        let cases = [
            BasisTerm::cos(3, -0.5, (0.0, PI)),
            BasisTerm::cos(0, -0.5, (0.4, 2.0)),
            BasisTerm::cos(3, -0.5, (0.4, 2.0)),
            BasisTerm::sin(2, -0.5, (0.0, 1.1)),
            BasisTerm::theta_sin(1, -0.5, (0.5, PI)),
            BasisTerm::cos(4, 1.5, (0.0, PI)),
            BasisTerm::sin(5, 1.5, (1.0, 2.5)),
            BasisTerm::theta_sin(2, 1.5, (0.0, 0.9)),
        ];
        for rho in [0.05, 0.3, 2.0, 6.0] {
            for term in &cases {
                let t = half_odd_exponent(term.beta).unwrap();
                let ev = SeriesEvaluator::new(std::slice::from_ref(term), t, rho);
                let series = ev.eval_members(rho)[0].to_f64();
                let quad = eval_basis_with(term, rho, &cfg).unwrap().value;
                let scale = quad.abs().max(1e-12);
                assert!(
                    (series - quad).abs() / scale < 1e-9,
                    "{term} at rho={rho}: series {series:+.15e} quad {quad:+.15e}"
                );
            }
        }
    }

    #[test]
    fn evaluator_reuse_across_the_window() {
        // sized once at the window floor, evaluated well above it
        let term = BasisTerm::cos(2, -0.5, (0.3, 2.9));
        let ev = SeriesEvaluator::new(std::slice::from_ref(&term), -1, 0.05);
        let cfg = tight();
        for rho in [0.05, 0.8, 4.0, 12.0] {
            let series = ev.eval_members(rho)[0].to_f64();
            let quad = eval_basis_with(&term, rho, &cfg).unwrap().value;
            assert!((series - quad).abs() / quad.abs().max(1e-12) < 1e-9, "rho={rho}");
        }
    }

    #[test]
    fn pure_powers_and_constant() {
        let terms = [
            BasisTerm::constant(),
            BasisTerm::pow_rho(-0.5),
            BasisTerm::pow_rho_plus2(-0.5),
        ];
        let w = [Dd::from_f64(1.0), Dd::from_f64(2.0), Dd::from_f64(-1.0)];
        let rho = 0.7;
        let ev = SeriesEvaluator::new(&terms, -1, rho);
        let got = ev.eval_combination(&w, rho).to_f64();
        let want = 1.0 + 2.0 / rho.sqrt() - 1.0 / (rho + 2.0).sqrt();
        assert!((got - want).abs() < 1e-14);
    }

    #[test]
    fn combination_survives_catastrophic_cancellation() {
        // two large opposing weights on nearby kernels: the f64 route loses
        // most digits, the expansion keeps the difference
        let terms = [
            BasisTerm::cos(2, -0.5, (0.0, PI)),
            BasisTerm::cos(2, -0.5, (1e-9, PI)),
        ];
        let w = [Dd::from_f64(1e12), Dd::from_f64(-1e12)];
        let ev = SeriesEvaluator::new(&terms, -1, 0.5);
        let got = ev.eval_combination(&w, 0.5).to_f64();
        // int_0^{1e-9} cos(2 t) (1.5 - cos t)^{-1/2} ~ 1e-9 / sqrt(0.5)
        let want = 1e12 * 1e-9 / 0.5_f64.sqrt();
        assert!((got - want).abs() / want < 1e-6, "got {got:+.6e} want {want:+.6e}");
    }

    #[test]
    fn eligibility_guards() {
        let ok = [BasisTerm::cos(1, -0.5, (0.0, PI)), BasisTerm::constant()];
        assert_eq!(eligible(&ok), Some(-1));
        let beyond_pi = [BasisTerm::cos(1, -0.5, (0.0, 4.0))];
        assert_eq!(eligible(&beyond_pi), None);
        let mixed = [
            BasisTerm::cos(1, -0.5, (0.0, 1.0)),
            BasisTerm::cos(1, 1.5, (0.0, 1.0)),
        ];
        assert_eq!(eligible(&mixed), None);
        let integer = [BasisTerm::cos(1, 2.0, (0.0, 1.0))];
        assert_eq!(eligible(&integer), None);
    }
}
