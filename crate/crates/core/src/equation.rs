//! Problem data for the periodically forced scalar equation
//!
//! ```text
//! dx/dtheta = A(theta) x^p + B(theta) x^q,
//! A = sin(theta) + eps a1(theta) + eps^2 a2(theta),
//! B = eps b1(theta) + eps^2 b2(theta),
//! ```
//!
//! where the perturbation coefficients are trigonometric polynomials of
//! degree `m` with one switching angle `theta1`: one coefficient table on
//! `[0, theta1)` and another on `[theta1, 2*pi]`.
//!
//! The substitution `y = x^(1-p) / (1-p)` turns the equation into
//!
//! ```text
//! dy/dtheta = sin(theta) + eps P1 + eps^2 P2 + (eps Q1~ + eps^2 Q2~) y^alpha,
//! alpha = (q - p) / (1 - p),
//! ```
//!
//! whose unperturbed orbits are `y0(theta, rho) = rho + 1 - cos(theta)`.
//! Everything downstream (kernel integrals, displacement expansions, the
//! return map) works with that reduced form. To keep all arithmetic real on
//! both admissible `rho` branches, powers of `y0` are evaluated with the
//! positive base `|1 + rho - cos(theta)|` and the factor `(1-p)^alpha` is
//! replaced by `|1-p|^alpha`; see [`real_normalized_scale`].

use crate::error::{Error, Result};
use num_rational::Rational64;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

pub const TWO_PI: f64 = std::f64::consts::TAU;
pub const PI: f64 = std::f64::consts::PI;

/// Absolute tolerance used when classifying `theta1` against `pi` / `2*pi`
/// and when testing coefficients against exact-zero constraints.
pub const COEFF_TOL: f64 = 1e-12;

/// Exponent pair `(p, q)` together with the exact reduced exponent
/// `alpha = (q - p) / (1 - p)` in lowest terms.
///
/// Admissible pairs have `p, q` outside `{0, 1}` and `alpha` not a
/// non-negative integer (equivalently `(q-1)/(p-1)` is not an integer `<= 1`),
/// so `y^alpha` is a genuinely non-polynomial nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExponentPair {
    p: i64,
    q: i64,
    alpha: Rational64,
}

impl ExponentPair {
    pub fn new(p: i64, q: i64) -> Result<Self> {
        let alpha = alpha_of(p, q)?;
        Ok(Self { p, q, alpha })
    }

    pub fn p(&self) -> i64 {
        self.p
    }

    pub fn q(&self) -> i64 {
        self.q
    }

    pub fn alpha(&self) -> Rational64 {
        self.alpha
    }

    pub fn alpha_f64(&self) -> f64 {
        self.alpha.to_f64().expect("alpha fits in f64")
    }

    /// `|1 - p|^alpha`, the real scale applied to the `Q` coefficients.
    pub fn scale(&self) -> f64 {
        real_normalized_scale(self.p, self.alpha_f64())
    }

    /// Sign of the admissible `rho` branch for odd `p` (`+1` branch
    /// `(0, inf)` for `p < 1`, `-1` branch `(-inf, -2)` for `p > 1`);
    /// even `p` admits both.
    pub fn p_is_even(&self) -> bool {
        self.p % 2 == 0
    }
}

/// Exact `alpha = (q - p) / (1 - p)` in lowest terms.
///
/// Rejects `p, q` in `{0, 1}` and any pair whose `alpha` is a non-negative
/// integer (those make `y^alpha` polynomial and the reduction degenerate).
pub fn alpha_of(p: i64, q: i64) -> Result<Rational64> {
    let bad = |reason: &str| Error::InvalidExponents {
        p,
        q,
        reason: reason.to_string(),
    };
    if p == 0 || p == 1 {
        return Err(bad("p must not be 0 or 1"));
    }
    if q == 0 || q == 1 {
        return Err(bad("q must not be 0 or 1"));
    }
    let alpha = Rational64::new(q - p, 1 - p);
    if alpha.is_integer() && alpha >= Rational64::from_integer(0) {
        return Err(bad(
            "alpha = (q-p)/(1-p) must not be a non-negative integer",
        ));
    }
    Ok(alpha)
}

/// `|1 - p|^alpha`: the positive constant that replaces `(1-p)^alpha` when
/// the reduced equation is evaluated with positive bases only.
pub fn real_normalized_scale(p: i64, alpha: f64) -> f64 {
    ((1 - p) as f64).abs().powf(alpha)
}

/// Zone selector relative to the switching angle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Zone {
    /// `[0, theta1)`
    Plus,
    /// `[theta1, 2*pi]`
    Minus,
}

/// Coefficient rows `(a_k, b_k)` for `a_k sin(k theta) + b_k cos(k theta)`,
/// `k = 0..=m`. Row 0's sine entry multiplies `sin(0) = 0` and is inert.
pub type CoeffTable = Vec<(f64, f64)>;

fn eval_table(coeffs: &CoeffTable, theta: f64) -> f64 {
    let mut acc = 0.0;
    for (k, &(a, b)) in coeffs.iter().enumerate() {
        let kt = k as f64 * theta;
        acc += a * kt.sin() + b * kt.cos();
    }
    acc
}

/// Antiderivative of a coefficient table evaluated from `from` to `theta`.
fn table_cumulative(coeffs: &CoeffTable, from: f64, theta: f64) -> f64 {
    let anti = |t: f64| {
        let mut acc = coeffs[0].1 * t;
        for (k, &(a, b)) in coeffs.iter().enumerate().skip(1) {
            let kf = k as f64;
            acc += (-a * (kf * t).cos() + b * (kf * t).sin()) / kf;
        }
        acc
    };
    anti(theta) - anti(from)
}

/// A trigonometric polynomial of degree `m` with two coefficient zones split
/// at `theta1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseTrigPoly {
    m: usize,
    theta1: f64,
    plus: CoeffTable,
    minus: CoeffTable,
}

impl PiecewiseTrigPoly {
    pub fn new(m: usize, theta1: f64, plus: CoeffTable, minus: CoeffTable) -> Result<Self> {
        check_theta1(theta1)?;
        if plus.len() != m + 1 {
            return Err(Error::CoefficientShape {
                name: "plus zone".into(),
                got: plus.len(),
                expected: m + 1,
            });
        }
        if minus.len() != m + 1 {
            return Err(Error::CoefficientShape {
                name: "minus zone".into(),
                got: minus.len(),
                expected: m + 1,
            });
        }
        if theta_case(theta1) == ThetaCase::TwoPi && plus != minus {
            return Err(Error::SmoothnessMismatch {
                what: "plus/minus coefficient tables differ".into(),
            });
        }
        Ok(Self {
            m,
            theta1,
            plus,
            minus,
        })
    }

    /// All-zero polynomial of degree `m`.
    pub fn zero(m: usize, theta1: f64) -> Self {
        Self::new(m, theta1, vec![(0.0, 0.0); m + 1], vec![(0.0, 0.0); m + 1])
            .expect("zero tables are always valid")
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn theta1(&self) -> f64 {
        self.theta1
    }

    pub fn zone(&self, theta: f64) -> Zone {
        if theta < self.theta1 {
            Zone::Plus
        } else {
            Zone::Minus
        }
    }

    pub fn table(&self, zone: Zone) -> &CoeffTable {
        match zone {
            Zone::Plus => &self.plus,
            Zone::Minus => &self.minus,
        }
    }

    pub fn sin_coeff(&self, zone: Zone, k: usize) -> f64 {
        self.table(zone)[k].0
    }

    pub fn cos_coeff(&self, zone: Zone, k: usize) -> f64 {
        self.table(zone)[k].1
    }

    pub fn value(&self, theta: f64) -> f64 {
        eval_table(self.table(self.zone(theta)), theta)
    }

    /// Evaluate the named zone's polynomial regardless of where `theta`
    /// lies. Zone-wise fits use this at shared endpoints, where [`value`]
    /// would switch tables.
    ///
    /// [`value`]: Self::value
    pub fn value_in(&self, zone: Zone, theta: f64) -> f64 {
        eval_table(self.table(zone), theta)
    }

    /// `int_0^theta` of the polynomial, crossing the switch if needed.
    pub fn cumulative(&self, theta: f64) -> f64 {
        if theta <= self.theta1 {
            table_cumulative(&self.plus, 0.0, theta)
        } else {
            table_cumulative(&self.plus, 0.0, self.theta1)
                + table_cumulative(&self.minus, self.theta1, theta)
        }
    }

    /// `int_0^{2 pi}` of the polynomial.
    pub fn full_integral(&self) -> f64 {
        self.cumulative(TWO_PI)
    }

    pub fn is_zero(&self) -> bool {
        let flat = |t: &CoeffTable| t.iter().all(|&(a, b)| a == 0.0 && b == 0.0);
        flat(&self.plus) && flat(&self.minus)
    }
}

/// Position of the switching angle relative to the half and full period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ThetaCase {
    /// `theta1` in `(0, pi)`
    BelowPi,
    /// `theta1` in `(pi, 2*pi)`
    AbovePi,
    /// `theta1 = pi`
    Pi,
    /// `theta1 = 2*pi` (no switch: the equation is smooth)
    TwoPi,
}

pub fn theta_case(theta1: f64) -> ThetaCase {
    if (theta1 - PI).abs() <= COEFF_TOL {
        ThetaCase::Pi
    } else if (theta1 - TWO_PI).abs() <= COEFF_TOL {
        ThetaCase::TwoPi
    } else if theta1 < PI {
        ThetaCase::BelowPi
    } else {
        ThetaCase::AbovePi
    }
}

pub(crate) fn check_theta1(theta1: f64) -> Result<()> {
    if !(theta1 > 0.0 && theta1 <= TWO_PI + COEFF_TOL) || !theta1.is_finite() {
        return Err(Error::ThetaOutOfRange { theta1 });
    }
    Ok(())
}

/// The full perturbed equation in reduced form.
///
/// `p1`, `p2` enter additively; `q1`, `q2` multiply `y^alpha` and are used
/// through their scaled ("tilde") coefficients `|1-p|^alpha * (a, b)`.
/// The full-period integrals `p10 = int P1`, `p20 = int P2` are cached in
/// closed form at construction.
#[derive(Debug, Clone)]
pub struct AbelEquation {
    exps: ExponentPair,
    m: usize,
    theta1: f64,
    p1: PiecewiseTrigPoly,
    p2: PiecewiseTrigPoly,
    q1: PiecewiseTrigPoly,
    q2: PiecewiseTrigPoly,
    scale: f64,
    p10: f64,
    p20: f64,
}

impl AbelEquation {
    pub fn new(
        exps: ExponentPair,
        p1: PiecewiseTrigPoly,
        p2: PiecewiseTrigPoly,
        q1: PiecewiseTrigPoly,
        q2: PiecewiseTrigPoly,
    ) -> Result<Self> {
        let m = q1.m();
        let theta1 = q1.theta1();
        for (name, poly) in [("P1", &p1), ("P2", &p2), ("Q1", &q1), ("Q2", &q2)] {
            if poly.m() != m {
                return Err(Error::CoefficientShape {
                    name: name.into(),
                    got: poly.m() + 1,
                    expected: m + 1,
                });
            }
            if poly.theta1() != theta1 {
                return Err(Error::Invalid(format!(
                    "{name} uses switching angle {}, expected {theta1}",
                    poly.theta1()
                )));
            }
        }
        let scale = exps.scale();
        let p10 = p1.full_integral();
        let p20 = p2.full_integral();
        Ok(Self {
            exps,
            m,
            theta1,
            p1,
            p2,
            q1,
            q2,
            scale,
            p10,
            p20,
        })
    }

    pub fn exponents(&self) -> ExponentPair {
        self.exps
    }

    pub fn alpha(&self) -> f64 {
        self.exps.alpha_f64()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn theta1(&self) -> f64 {
        self.theta1
    }

    pub fn theta_case(&self) -> ThetaCase {
        theta_case(self.theta1)
    }

    pub fn p1(&self) -> &PiecewiseTrigPoly {
        &self.p1
    }

    pub fn p2(&self) -> &PiecewiseTrigPoly {
        &self.p2
    }

    pub fn q1(&self) -> &PiecewiseTrigPoly {
        &self.q1
    }

    pub fn q2(&self) -> &PiecewiseTrigPoly {
        &self.q2
    }

    /// `|1-p|^alpha`, the factor carried by the tilde coefficients.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn p10(&self) -> f64 {
        self.p10
    }

    pub fn p20(&self) -> f64 {
        self.p20
    }

    /// Scaled coefficient accessors: `c` rows are sine, `d` rows cosine.
    pub fn c1t(&self, zone: Zone, k: usize) -> f64 {
        self.scale * self.q1.sin_coeff(zone, k)
    }

    pub fn d1t(&self, zone: Zone, k: usize) -> f64 {
        self.scale * self.q1.cos_coeff(zone, k)
    }

    pub fn c2t(&self, zone: Zone, k: usize) -> f64 {
        self.scale * self.q2.sin_coeff(zone, k)
    }

    pub fn d2t(&self, zone: Zone, k: usize) -> f64 {
        self.scale * self.q2.cos_coeff(zone, k)
    }

    pub fn q1_tilde(&self, theta: f64) -> f64 {
        self.scale * self.q1.value(theta)
    }

    pub fn q2_tilde(&self, theta: f64) -> f64 {
        self.scale * self.q2.value(theta)
    }

    /// Admissible `rho` intervals for this equation's exponents.
    pub fn rho_domain(&self) -> Vec<(f64, f64)> {
        annulus_of(self.exps.p())
            .expect("exponents already validated")
            .y_intervals
    }

    pub fn rho_in_domain(&self, rho: f64) -> bool {
        self.rho_domain().iter().any(|&(a, b)| rho > a && rho < b)
    }
}

/// Admissible initial-value annuli, in the original variable `x` and in the
/// reduced variable.
///
/// `hp` is the real value of `(2p-2)^(1/(1-p))` when that root exists
/// (`p > 1`, or `p < 1` even so the index `1-p` is odd).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnulusDomain {
    pub x_intervals: Vec<(f64, f64)>,
    pub y_intervals: Vec<(f64, f64)>,
    pub hp: Option<f64>,
}

pub fn annulus_of(p: i64) -> Result<AnnulusDomain> {
    if p == 0 || p == 1 {
        return Err(Error::InvalidExponents {
            p,
            q: p,
            reason: "p must not be 0 or 1".into(),
        });
    }
    let inf = f64::INFINITY;
    let hp = h_of(p);
    let even = p % 2 == 0;
    let (x_intervals, y_intervals) = if p > 1 {
        let h = hp.expect("p > 1 always has a real h");
        let x = if even {
            vec![(-inf, 0.0), (0.0, h)]
        } else {
            vec![(-h, 0.0), (0.0, h)]
        };
        let y = if even {
            vec![(-inf, -2.0), (0.0, inf)]
        } else {
            vec![(-inf, -2.0)]
        };
        (x, y)
    } else {
        let x = if even {
            let h = hp.expect("p < 1 even has a real (negative) h");
            vec![(-inf, h), (0.0, inf)]
        } else {
            vec![(-inf, 0.0), (0.0, inf)]
        };
        let y = if even {
            vec![(-inf, -2.0), (0.0, inf)]
        } else {
            vec![(0.0, inf)]
        };
        (x, y)
    };
    Ok(AnnulusDomain {
        x_intervals,
        y_intervals,
        hp,
    })
}

/// Real `(2p - 2)^(1/(1-p))` when it exists.
fn h_of(p: i64) -> Option<f64> {
    let base = (2 * p - 2) as f64;
    let index = 1 - p;
    if base > 0.0 {
        Some(base.powf(1.0 / index as f64))
    } else if index % 2 != 0 {
        // odd real root of a negative number
        Some(-((-base).powf(1.0 / index as f64)))
    } else {
        None
    }
}

/// Outcome of testing the first-order vanishing conditions.
#[derive(Debug, Clone, Serialize)]
pub struct CenterCheck {
    pub holds: bool,
    pub violations: Vec<String>,
}

/// Conditions under which the first-order displacement coefficient vanishes
/// identically: `p10 = 0` and, in scaled coefficients,
///
/// * `theta1 != pi`: all cosine rows of `Q1` vanish and the sine rows agree
///   across zones (`Q1~` is one global sine polynomial);
/// * `theta1 = pi`: cosine rows are opposite (`d+ = -d-`) and sine rows agree.
pub fn center_conditions(eq: &AbelEquation) -> CenterCheck {
    let mut violations = Vec::new();
    if eq.p10().abs() > COEFF_TOL {
        violations.push(format!("p10 = {:.3e} != 0", eq.p10()));
    }
    let pi_case = eq.theta_case() == ThetaCase::Pi;
    for k in 0..=eq.m() {
        let dp = eq.d1t(Zone::Plus, k);
        let dm = eq.d1t(Zone::Minus, k);
        let cp = eq.c1t(Zone::Plus, k);
        let cm = eq.c1t(Zone::Minus, k);
        if pi_case {
            if (dp + dm).abs() > COEFF_TOL {
                violations.push(format!("d1[{k}]+ + d1[{k}]- = {:.3e} != 0", dp + dm));
            }
        } else {
            if dp.abs() > COEFF_TOL {
                violations.push(format!("d1[{k}]+ = {dp:.3e} != 0"));
            }
            if dm.abs() > COEFF_TOL {
                violations.push(format!("d1[{k}]- = {dm:.3e} != 0"));
            }
        }
        if k >= 1 && (cp - cm).abs() > COEFF_TOL {
            violations.push(format!("c1[{k}]+ - c1[{k}]- = {:.3e} != 0", cp - cm));
        }
    }
    CenterCheck {
        holds: violations.is_empty(),
        violations,
    }
}

// ---------------------------------------------------------------------------
// JSON schema
// ---------------------------------------------------------------------------

/// Parse an angle literal: a plain number in radians, or the forms
/// `"pi"`, `"2pi"`, `"pi/4"`, `"5pi/4"`, `"0.5pi"`.
pub fn parse_angle(text: &str) -> Result<f64> {
    let s = text.trim().replace(' ', "");
    if let Ok(v) = s.parse::<f64>() {
        return Ok(v);
    }
    let lower = s.to_ascii_lowercase();
    if let Some(pos) = lower.find("pi") {
        let (coef_str, rest) = (&lower[..pos], &lower[pos + 2..]);
        let coef = if coef_str.is_empty() {
            1.0
        } else {
            coef_str.parse::<f64>().map_err(|_| {
                Error::Invalid(format!("cannot parse angle literal {text:?}"))
            })?
        };
        let denom = if rest.is_empty() {
            1.0
        } else if let Some(d) = rest.strip_prefix('/') {
            d.parse::<f64>()
                .map_err(|_| Error::Invalid(format!("cannot parse angle literal {text:?}")))?
        } else {
            return Err(Error::Invalid(format!("cannot parse angle literal {text:?}")));
        };
        if denom == 0.0 {
            return Err(Error::Invalid(format!("zero denominator in angle {text:?}")));
        }
        return Ok(coef * PI / denom);
    }
    Err(Error::Invalid(format!("cannot parse angle literal {text:?}")))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum AngleSpec {
    Number(f64),
    Literal(String),
}

impl AngleSpec {
    fn value(&self) -> Result<f64> {
        match self {
            AngleSpec::Number(v) => Ok(*v),
            AngleSpec::Literal(s) => parse_angle(s),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PolyFile {
    plus: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    minus: Option<Vec<[f64; 2]>>,
}

/// On-disk equation description.
///
/// ```json
/// {
///   "p": -1, "q": 2, "m": 1, "theta1": "pi/2",
///   "P1": {"plus": [[0.0, 0.1], [0.2, -0.3]], "minus": [[0.0, 0.0], [0.1, 0.4]]},
///   "P2": {...}, "Q1": {...}, "Q2": {...}
/// }
/// ```
///
/// Each coefficient row is `[a_k, b_k]` for `a_k sin(k theta) + b_k cos(k
/// theta)`, rows `k = 0..=m`. `theta1` accepts radians or pi-literals
/// (`"pi"`, `"2pi"`, `"pi/2"`, ...). The `minus` tables may be omitted only
/// when `theta1 = 2*pi`, in which case they default to `plus`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquationFile {
    pub p: i64,
    pub q: i64,
    pub m: usize,
    theta1: AngleSpec,
    #[serde(rename = "P1")]
    p1: PolyFile,
    #[serde(rename = "P2")]
    p2: PolyFile,
    #[serde(rename = "Q1")]
    q1: PolyFile,
    #[serde(rename = "Q2")]
    q2: PolyFile,
}

fn poly_from_file(name: &str, f: &PolyFile, m: usize, theta1: f64) -> Result<PiecewiseTrigPoly> {
    let to_table = |rows: &Vec<[f64; 2]>| rows.iter().map(|r| (r[0], r[1])).collect::<CoeffTable>();
    let plus = to_table(&f.plus);
    let minus = match &f.minus {
        Some(rows) => to_table(rows),
        None => {
            if theta_case(theta1) != ThetaCase::TwoPi {
                return Err(Error::Invalid(format!(
                    "{name}: the minus table may be omitted only when theta1 = 2*pi"
                )));
            }
            plus.clone()
        }
    };
    if plus.len() != m + 1 {
        return Err(Error::CoefficientShape {
            name: format!("{name}.plus"),
            got: plus.len(),
            expected: m + 1,
        });
    }
    if minus.len() != m + 1 {
        return Err(Error::CoefficientShape {
            name: format!("{name}.minus"),
            got: minus.len(),
            expected: m + 1,
        });
    }
    PiecewiseTrigPoly::new(m, theta1, plus, minus)
}

/// Parse an equation from JSON text. Syntax errors carry line/column.
pub fn equation_from_json(text: &str) -> Result<AbelEquation> {
    let file: EquationFile = serde_json::from_str(text).map_err(|e| Error::Json {
        line: e.line(),
        column: e.column(),
        msg: e.to_string(),
    })?;
    equation_from_file(&file)
}

pub fn equation_from_file(file: &EquationFile) -> Result<AbelEquation> {
    let theta1 = file.theta1.value()?;
    check_theta1(theta1)?;
    let exps = ExponentPair::new(file.p, file.q)?;
    let p1 = poly_from_file("P1", &file.p1, file.m, theta1)?;
    let p2 = poly_from_file("P2", &file.p2, file.m, theta1)?;
    let q1 = poly_from_file("Q1", &file.q1, file.m, theta1)?;
    let q2 = poly_from_file("Q2", &file.q2, file.m, theta1)?;
    AbelEquation::new(exps, p1, p2, q1, q2)
}

fn poly_to_file(poly: &PiecewiseTrigPoly, smooth: bool) -> PolyFile {
    let to_rows = |t: &CoeffTable| t.iter().map(|&(a, b)| [a, b]).collect::<Vec<_>>();
    PolyFile {
        plus: to_rows(poly.table(Zone::Plus)),
        minus: if smooth {
            None
        } else {
            Some(to_rows(poly.table(Zone::Minus)))
        },
    }
}

pub fn equation_to_file(eq: &AbelEquation) -> EquationFile {
    let smooth = eq.theta_case() == ThetaCase::TwoPi;
    EquationFile {
        p: eq.exponents().p(),
        q: eq.exponents().q(),
        m: eq.m(),
        theta1: AngleSpec::Number(eq.theta1()),
        p1: poly_to_file(eq.p1(), smooth),
        p2: poly_to_file(eq.p2(), smooth),
        q1: poly_to_file(eq.q1(), smooth),
        q2: poly_to_file(eq.q2(), smooth),
    }
}

pub fn equation_to_json(eq: &AbelEquation) -> String {
    serde_json::to_string_pretty(&equation_to_file(eq)).expect("equation serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn alpha_examples() {
        assert_eq!(alpha_of(-1, 2).unwrap(), Rational64::new(3, 2));
        assert_eq!(alpha_of(3, 2).unwrap(), Rational64::new(1, 2));
        assert_eq!(alpha_of(2, 3).unwrap(), Rational64::from_integer(-1));
        assert!(alpha_of(0, 2).is_err());
        assert!(alpha_of(2, 1).is_err());
        // alpha = (5-3)/(1-3) = -1 is fine; alpha = (3-(-1))/2 = 2 is not
        assert!(alpha_of(3, 5).is_ok());
        assert!(alpha_of(-1, 3).is_err());
        // p = q gives alpha = 0, rejected
        assert!(alpha_of(3, 3).is_err());
    }

    #[test]
    fn scale_examples() {
        assert_relative_eq!(real_normalized_scale(-1, 1.5), 2.0_f64.powf(1.5));
        assert_relative_eq!(real_normalized_scale(3, 0.5), 2.0_f64.sqrt());
    }

    #[test]
    fn annulus_examples() {
        let a = annulus_of(3).unwrap();
        assert_eq!(a.hp, Some(0.5));
        assert_eq!(a.x_intervals, vec![(-0.5, 0.0), (0.0, 0.5)]);
        assert_eq!(a.y_intervals, vec![(f64::NEG_INFINITY, -2.0)]);

        let b = annulus_of(-1).unwrap();
        assert_eq!(b.hp, None);
        assert_eq!(b.y_intervals, vec![(0.0, f64::INFINITY)]);

        let c = annulus_of(2).unwrap();
        assert_eq!(c.hp, Some(0.5));
        assert_eq!(
            c.y_intervals,
            vec![(f64::NEG_INFINITY, -2.0), (0.0, f64::INFINITY)]
        );

        let d = annulus_of(-2).unwrap();
        let h = d.hp.unwrap();
        assert_relative_eq!(h, -(6.0_f64.powf(1.0 / 3.0)), epsilon = 1e-14);
    }

    #[test]
    fn base_sign_constant_on_branches() {
        // 1 + rho - cos(theta) keeps one sign over the whole period on each
        // admissible branch.
        for &rho in &[0.05, 0.5, 2.0, 10.0] {
            for i in 0..500 {
                let theta = TWO_PI * i as f64 / 499.0;
                assert!(1.0 + rho - theta.cos() > 0.0);
            }
        }
        for &rho in &[-2.05, -3.0, -10.0] {
            for i in 0..500 {
                let theta = TWO_PI * i as f64 / 499.0;
                assert!(1.0 + rho - theta.cos() < 0.0);
            }
        }
    }

    #[test]
    fn piecewise_eval_and_zone() {
        let p = PiecewiseTrigPoly::new(
            1,
            PI / 2.0,
            vec![(0.0, 1.0), (2.0, 0.0)],
            vec![(0.0, 0.0), (0.0, 3.0)],
        )
        .unwrap();
        // plus zone: 1 + 2 sin(theta)
        assert_relative_eq!(p.value(0.3), 1.0 + 2.0 * 0.3_f64.sin());
        // minus zone: 3 cos(theta)
        assert_relative_eq!(p.value(2.0), 3.0 * 2.0_f64.cos());
        assert_eq!(p.zone(0.3), Zone::Plus);
        assert_eq!(p.zone(PI / 2.0), Zone::Minus);
    }

    #[test]
    fn cumulative_matches_midpoint_sum() {
        let p = PiecewiseTrigPoly::new(
            2,
            2.0,
            vec![(0.0, 0.3), (1.0, -0.5), (0.2, 0.7)],
            vec![(0.0, -0.4), (0.6, 0.1), (-0.3, 0.2)],
        )
        .unwrap();
        // midpoint sums taken per zone so no cell straddles the switch
        let midpoint = |a: f64, b: f64, n: usize| -> f64 {
            let h = (b - a) / n as f64;
            (0..n).map(|i| p.value(a + (i as f64 + 0.5) * h) * h).sum()
        };
        for &theta in &[0.7, 2.0, 3.9, TWO_PI] {
            let sum = if theta <= 2.0 {
                midpoint(0.0, theta, 200_000)
            } else {
                midpoint(0.0, 2.0, 200_000) + midpoint(2.0, theta, 200_000)
            };
            assert_relative_eq!(p.cumulative(theta), sum, epsilon = 1e-8, max_relative = 1e-8);
        }
    }

    #[test]
    fn smooth_case_requires_equal_tables() {
        let err = PiecewiseTrigPoly::new(
            0,
            TWO_PI,
            vec![(0.0, 1.0)],
            vec![(0.0, 2.0)],
        );
        assert!(matches!(err, Err(Error::SmoothnessMismatch { .. })));
    }

    #[test]
    fn theta_cases() {
        assert_eq!(theta_case(1.0), ThetaCase::BelowPi);
        assert_eq!(theta_case(PI), ThetaCase::Pi);
        assert_eq!(theta_case(4.0), ThetaCase::AbovePi);
        assert_eq!(theta_case(TWO_PI), ThetaCase::TwoPi);
    }

    fn sample_eq(theta1: f64, q1_plus: CoeffTable, q1_minus: CoeffTable) -> AbelEquation {
        let m = q1_plus.len() - 1;
        let exps = ExponentPair::new(-1, 2).unwrap();
        AbelEquation::new(
            exps,
            PiecewiseTrigPoly::zero(m, theta1),
            PiecewiseTrigPoly::zero(m, theta1),
            PiecewiseTrigPoly::new(m, theta1, q1_plus, q1_minus).unwrap(),
            PiecewiseTrigPoly::zero(m, theta1),
        )
        .unwrap()
    }

    #[test]
    fn center_conditions_detects_violations() {
        // pure sine with equal zones: holds
        let eq = sample_eq(
            2.0,
            vec![(0.0, 0.0), (0.7, 0.0)],
            vec![(0.0, 0.0), (0.7, 0.0)],
        );
        assert!(center_conditions(&eq).holds);

        // cosine present: fails with a named violation
        let eq = sample_eq(
            2.0,
            vec![(0.0, 0.0), (0.7, 0.5)],
            vec![(0.0, 0.0), (0.7, 0.0)],
        );
        let check = center_conditions(&eq);
        assert!(!check.holds);
        assert!(check.violations.iter().any(|v| v.contains("d1[1]+")));

        // theta1 = pi allows opposite cosine rows
        let eq = sample_eq(
            PI,
            vec![(0.0, 0.4), (0.7, 0.5)],
            vec![(0.0, -0.4), (0.7, -0.5)],
        );
        assert!(center_conditions(&eq).holds);
    }

    #[test]
    fn p10_cache_matches_quadrature() {
        let p1 = PiecewiseTrigPoly::new(
            1,
            2.5,
            vec![(0.0, 0.3), (0.8, -0.2)],
            vec![(0.0, -0.1), (0.4, 0.9)],
        )
        .unwrap();
        let eq = AbelEquation::new(
            ExponentPair::new(-1, 2).unwrap(),
            p1.clone(),
            PiecewiseTrigPoly::zero(1, 2.5),
            PiecewiseTrigPoly::zero(1, 2.5),
            PiecewiseTrigPoly::zero(1, 2.5),
        )
        .unwrap();
        let midpoint = |a: f64, b: f64, n: usize| -> f64 {
            let h = (b - a) / n as f64;
            (0..n).map(|i| p1.value(a + (i as f64 + 0.5) * h) * h).sum::<f64>()
        };
        let sum = midpoint(0.0, 2.5, 1_000_000) + midpoint(2.5, TWO_PI, 1_000_000);
        assert!((eq.p10() - sum).abs() < 1e-10);
    }

    #[test]
    fn angle_literals() {
        assert_relative_eq!(parse_angle("pi").unwrap(), PI);
        assert_relative_eq!(parse_angle("2pi").unwrap(), TWO_PI);
        assert_relative_eq!(parse_angle("pi/2").unwrap(), PI / 2.0);
        assert_relative_eq!(parse_angle("5pi/4").unwrap(), 5.0 * PI / 4.0);
        assert_relative_eq!(parse_angle("1.25").unwrap(), 1.25);
        assert!(parse_angle("tau").is_err());
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{
            "p": -1, "q": 2, "m": 1, "theta1": "pi/2",
            "P1": {"plus": [[0.0, 0.1], [0.2, -0.3]], "minus": [[0.0, 0.0], [0.1, 0.4]]},
            "P2": {"plus": [[0.0, 0.0], [0.0, 0.0]], "minus": [[0.0, 0.0], [0.0, 0.0]]},
            "Q1": {"plus": [[0.0, 0.0], [0.9, 0.0]], "minus": [[0.0, 0.0], [0.9, 0.0]]},
            "Q2": {"plus": [[0.0, 0.0], [0.0, 0.5]], "minus": [[0.0, 0.0], [0.0, 0.5]]}
        }"#;
        let eq = equation_from_json(text).unwrap();
        assert_eq!(eq.m(), 1);
        assert_relative_eq!(eq.theta1(), PI / 2.0);
        let back = equation_from_json(&equation_to_json(&eq)).unwrap();
        assert_eq!(eq.q1(), back.q1());
        assert_eq!(eq.p1(), back.p1());
    }

    #[test]
    fn json_errors_carry_position() {
        let err = equation_from_json("{\n  \"p\": -1,\n  broken").unwrap_err();
        match err {
            Error::Json { line, .. } => assert_eq!(line, 3),
            other => panic!("expected Json error, got {other:?}"),
        }
        // minus omitted with a genuine switch is rejected
        let text = r#"{
            "p": -1, "q": 2, "m": 0, "theta1": 1.0,
            "P1": {"plus": [[0.0, 0.1]]},
            "P2": {"plus": [[0.0, 0.0]]},
            "Q1": {"plus": [[0.0, 0.0]]},
            "Q2": {"plus": [[0.0, 0.0]]}
        }"#;
        assert!(equation_from_json(text).is_err());
        // smooth case accepts omitted minus
        let text = r#"{
            "p": -1, "q": 2, "m": 0, "theta1": "2pi",
            "P1": {"plus": [[0.0, 0.1]]},
            "P2": {"plus": [[0.0, 0.0]]},
            "Q1": {"plus": [[0.0, 0.0]]},
            "Q2": {"plus": [[0.0, 0.0]]}
        }"#;
        assert!(equation_from_json(text).is_ok());
    }

    #[test]
    fn exponent_validation_errors() {
        assert!(ExponentPair::new(1, 2).is_err());
        assert!(ExponentPair::new(-1, 0).is_err());
        let e = ExponentPair::new(-1, 2).unwrap();
        assert_eq!(e.alpha_f64(), 1.5);
        assert!(!e.p_is_even());
        assert!(ExponentPair::new(2, 3).unwrap().p_is_even());
    }
}
