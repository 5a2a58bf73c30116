//! Return map of the perturbed flow and everything built on it: single
//! displacement samples, small-parameter estimates of the first two
//! displacement coefficients, a certified limit-cycle scan over a `rho`
//! window, and the closed-form cycle-count table.
//!
//! Integration runs in `w = x^(1 - p)`, which is positive and real along
//! every admissible orbit regardless of the exponent signs; results are
//! reported in the reduced variable `rho = w / (1 - p)`, the argument of
//! the displacement coefficients produced by [`crate::melnikov`].

mod rk;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chebyshev::ZeroReport;
use crate::equation::{AbelEquation, Zone, TWO_PI};
use crate::synthesis::TableColumn;
use crate::{Error, Result};

/// Step sizes for the small-parameter ladder: coarse enough that the
/// displacement is far above integrator noise, fine enough that the
/// two-term expansion dominates.
pub const DEFAULT_EPS_LADDER: [f64; 4] = [1e-2, 5e-3, 2.5e-3, 1.25e-3];

/// Displacements below this magnitude count as "no crossing" during the
/// cycle scan; it sits above the integrator's round-trip error (checked by
/// the zero-perturbation tests) and far below any resolvable crossing.
pub const DISPLACEMENT_FLOOR: f64 = 1e-10;

/// Crossing slopes below this fraction of the scan's own displacement
/// scale (max magnitude over width) are flagged as possibly degenerate.
const SLOPE_FLOOR: f64 = 1e-8;

/// Tolerances and guards for the return-map integration.
#[derive(Debug, Clone)]
pub struct FlowConfig {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// `w` beyond this counts as escaped to infinity.
    pub blow_up: f64,
    /// Displacements below this magnitude count as "no crossing" during a
    /// cycle scan. Lower it together with `rtol`/`atol` when hunting
    /// crossings fainter than the default floor.
    pub displacement_floor: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-12,
            atol: 1e-14,
            max_steps: 200_000,
            blow_up: 1e6,
            displacement_floor: DISPLACEMENT_FLOOR,
        }
    }
}

/// How a return-map integration ended.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FlowStatus {
    /// The orbit reached the full period.
    Completed,
    /// The orbit left the admissible `w` range at the given angle.
    Escaped { theta: f64 },
    /// The integrator could not advance past the given angle.
    StepFailure { theta: f64 },
}

impl FlowStatus {
    pub fn label(&self) -> &'static str {
        match self {
            FlowStatus::Completed => "completed",
            FlowStatus::Escaped { .. } => "escaped",
            FlowStatus::StepFailure { .. } => "step-failure",
        }
    }
}

/// One evaluation of the return map, in the reduced variable.
#[derive(Debug, Clone, Serialize)]
pub struct ReturnMapSample {
    pub epsilon: f64,
    /// initial reduced value `rho = w0 / (1 - p)`
    pub rho0: f64,
    /// reduced value after a full period, when the orbit completed
    pub rho_end: Option<f64>,
    /// `rho_end - rho0`, when the orbit completed
    pub displacement: Option<f64>,
    pub status: FlowStatus,
}

impl ReturnMapSample {
    pub fn completed(&self) -> bool {
        self.status == FlowStatus::Completed
    }
}

/// Smallest `w0` whose unperturbed orbit stays positive for the whole
/// period: the orbit descends by `2 (p - 1)` from its starting value when
/// `p > 1` and ascends otherwise.
fn w_floor(p: i64) -> f64 {
    if p > 1 {
        2.0 * (p - 1) as f64
    } else {
        0.0
    }
}

/// Advance `w` from angle `0` to `theta_end`, switching coefficient
/// tables at the equation's switch angle. Each leg pins its zone, so the
/// switch lands exactly on a step boundary and never inside one.
fn integrate_w(
    eq: &AbelEquation,
    epsilon: f64,
    w0: f64,
    theta_end: f64,
    cfg: &FlowConfig,
) -> std::result::Result<f64, rk::StepFail> {
    let one_minus_p = 1.0 - eq.exponents().p() as f64;
    let alpha = eq.alpha();
    let blow_up = cfg.blow_up;
    let admissible = move |w: f64| w.is_finite() && w > 0.0 && w < blow_up;
    let rhs = |zone: Zone| {
        move |theta: f64, w: f64| {
            let drive = theta.sin()
                + epsilon * (eq.p1().value_in(zone, theta) + epsilon * eq.p2().value_in(zone, theta));
            let gain = epsilon * (eq.q1().value_in(zone, theta) + epsilon * eq.q2().value_in(zone, theta));
            one_minus_p * (drive + gain * w.powf(alpha))
        }
    };
    let split = eq.theta1().min(theta_end);
    let mid = rk::integrate(
        &rhs(Zone::Plus),
        &admissible,
        (0.0, split),
        w0,
        cfg.rtol,
        cfg.atol,
        cfg.max_steps,
    )?;
    if theta_end <= eq.theta1() {
        return Ok(mid);
    }
    rk::integrate(
        &rhs(Zone::Minus),
        &admissible,
        (eq.theta1(), theta_end),
        mid,
        cfg.rtol,
        cfg.atol,
        cfg.max_steps,
    )
}

/// Return-map sample for the orbit starting at `w0`, with default tolerances.
pub fn flow_map(eq: &AbelEquation, epsilon: f64, w0: f64) -> Result<ReturnMapSample> {
    flow_map_with(eq, epsilon, w0, &FlowConfig::default())
}

/// Return-map sample for the orbit starting at `w0 = x(0)^(1 - p)`.
///
/// `w0` must start inside the period annulus (`w0` above [`w_floor`]);
/// a perturbed orbit that later leaves the positive range comes back as a
/// sample with status [`FlowStatus::Escaped`], not as an error.
pub fn flow_map_with(
    eq: &AbelEquation,
    epsilon: f64,
    w0: f64,
    cfg: &FlowConfig,
) -> Result<ReturnMapSample> {
    if !epsilon.is_finite() || epsilon < 0.0 {
        return Err(Error::Invalid(format!(
            "epsilon must be finite and non-negative, got {epsilon}"
        )));
    }
    let p = eq.exponents().p();
    let one_minus_p = 1.0 - p as f64;
    let rho0 = w0 / one_minus_p;
    if !w0.is_finite() || w0 <= w_floor(p) {
        return Err(Error::RhoOutsideDomain {
            rho: rho0,
            domain: format!("{:?}", eq.rho_domain()),
        });
    }
    if w0 >= cfg.blow_up {
        return Ok(ReturnMapSample {
            epsilon,
            rho0,
            rho_end: None,
            displacement: None,
            status: FlowStatus::Escaped { theta: 0.0 },
        });
    }
    let sample = match integrate_w(eq, epsilon, w0, TWO_PI, cfg) {
        Ok(w_end) => {
            let rho_end = w_end / one_minus_p;
            ReturnMapSample {
                epsilon,
                rho0,
                rho_end: Some(rho_end),
                displacement: Some(rho_end - rho0),
                status: FlowStatus::Completed,
            }
        }
        Err(rk::StepFail::Inadmissible { theta, .. }) => ReturnMapSample {
            epsilon,
            rho0,
            rho_end: None,
            displacement: None,
            status: FlowStatus::Escaped { theta },
        },
        Err(rk::StepFail::Stalled { theta }) => ReturnMapSample {
            epsilon,
            rho0,
            rho_end: None,
            displacement: None,
            status: FlowStatus::StepFailure { theta },
        },
    };
    Ok(sample)
}

/// First two displacement coefficients recovered from a ladder of
/// return-map samples at one `rho`.
#[derive(Debug, Clone, Serialize)]
pub struct MelnikovEstimate {
    pub rho: f64,
    /// extrapolated first coefficient
    pub m1: f64,
    /// second coefficient: residual extrapolation against the supplied
    /// closed first coefficient when one is given, otherwise the
    /// quadratic term of a two-term least-squares fit
    pub m2: f64,
    /// least-squares decay order of the first-coefficient residuals;
    /// `None` when they sit at the integrator noise floor
    pub residual_order: Option<f64>,
    /// residuals decayed like the first power (or were at noise)
    pub converged: bool,
    pub samples: Vec<ReturnMapSample>,
}

/// Neville extrapolation of `(x_i, y_i)` to `x = 0`.
fn neville_at_zero(xs: &[f64], ys: &[f64]) -> f64 {
    let mut t = ys.to_vec();
    let n = t.len();
    for level in 1..n {
        for i in 0..n - level {
            let (xi, xj) = (xs[i], xs[i + level]);
            t[i] = (xi * t[i + 1] - xj * t[i]) / (xi - xj);
        }
    }
    t[0]
}

fn lsq_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Estimate the first two displacement coefficients at `rho` from the
/// return map, with default tolerances.
pub fn melnikov_estimate(
    eq: &AbelEquation,
    rho: f64,
    eps_list: &[f64],
    m1_closed: Option<f64>,
) -> Result<MelnikovEstimate> {
    melnikov_estimate_with(eq, rho, eps_list, m1_closed, &FlowConfig::default())
}

/// Estimate the first two displacement coefficients at `rho`.
///
/// `eps_list` must hold at least three strictly decreasing positive
/// steps. Each displacement is divided by its step and the quotients are
/// extrapolated to step zero; the residual decay order is fitted as a
/// convergence diagnostic (first-order decay is the expected signature).
/// Passing the closed first coefficient sharpens the second one from a
/// quadratic fit to a direct extrapolation of the exact residual.
pub fn melnikov_estimate_with(
    eq: &AbelEquation,
    rho: f64,
    eps_list: &[f64],
    m1_closed: Option<f64>,
    cfg: &FlowConfig,
) -> Result<MelnikovEstimate> {
    if eps_list.len() < 3 {
        return Err(Error::Invalid(format!(
            "the step ladder needs at least three entries, got {}",
            eps_list.len()
        )));
    }
    if eps_list.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
        return Err(Error::Invalid("step ladder entries must be positive".into()));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Invalid("step ladder must be strictly decreasing".into()));
    }
    let one_minus_p = 1.0 - eq.exponents().p() as f64;
    let w0 = one_minus_p * rho;
    let samples: Vec<ReturnMapSample> = eps_list
        .iter()
        .map(|&e| flow_map_with(eq, e, w0, cfg))
        .collect::<Result<_>>()?;
    if let Some(bad) = samples.iter().find(|s| !s.completed()) {
        return Err(Error::NoConvergence {
            detail: format!(
                "orbit at epsilon = {:.3e} ended {} instead of completing",
                bad.epsilon,
                bad.status.label()
            ),
        });
    }

    let ratios: Vec<f64> = samples
        .iter()
        .map(|s| s.displacement.expect("completed sample") / s.epsilon)
        .collect();
    let m1 = neville_at_zero(eps_list, &ratios);
    let m1_ref = m1_closed.unwrap_or(m1);

    // Residual decay order. Residuals at the integrator noise floor carry
    // no order information and are dropped; an empty fit means the first
    // coefficient is already exact to noise.
    let noise = 1e-9 * m1_ref.abs().max(1.0);
    let pts: Vec<(f64, f64)> = eps_list
        .iter()
        .zip(&ratios)
        .filter(|(_, &r)| (r - m1_ref).abs() > noise)
        .map(|(&e, &r)| (e.ln(), (r - m1_ref).abs().ln()))
        .collect();
    let residual_order = (pts.len() >= 2).then(|| lsq_slope(&pts));
    let converged = residual_order.is_none_or(|s| s >= 0.5);

    let m2 = match m1_closed {
        Some(c) => {
            let second: Vec<f64> = samples
                .iter()
                .map(|s| {
                    let d = s.displacement.expect("completed sample");
                    (d - s.epsilon * c) / (s.epsilon * s.epsilon)
                })
                .collect();
            neville_at_zero(eps_list, &second)
        }
        None => {
            // least-squares `d ~ a e + b e^2`; report `b`
            let (mut s2, mut s3, mut s4, mut t1, mut t2) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for s in &samples {
                let e = s.epsilon;
                let d = s.displacement.expect("completed sample");
                s2 += e * e;
                s3 += e * e * e;
                s4 += e * e * e * e;
                t1 += e * d;
                t2 += e * e * d;
            }
            (s2 * t2 - s3 * t1) / (s2 * s4 - s3 * s3)
        }
    };

    Ok(MelnikovEstimate {
        rho,
        m1,
        m2,
        residual_order,
        converged,
        samples,
    })
}

/// Outcome of a limit-cycle scan: certified sign changes of the
/// displacement, plus the sub-windows excluded because orbits there did
/// not complete.
#[derive(Debug, Clone, Serialize)]
pub struct CycleScan {
    pub report: ZeroReport,
    /// merged `rho` ranges whose orbits escaped or stalled
    pub escaped: Vec<(f64, f64)>,
}

/// Count fixed points of the return map inside a `rho` window, with
/// default tolerances.
pub fn count_limit_cycles(
    eq: &AbelEquation,
    epsilon: f64,
    window: (f64, f64),
    grid: usize,
) -> Result<CycleScan> {
    count_limit_cycles_with(eq, epsilon, window, grid, &FlowConfig::default())
}

/// Count fixed points of the return map inside a `rho` window.
///
/// The displacement is sampled on a uniform grid which is doubled twice;
/// the count is certified when all three levels agree. Sign changes are
/// refined by bisection on the finest grid. Grid points whose orbits do
/// not complete break sign chains, and their merged ranges come back in
/// [`CycleScan::escaped`] rather than silently vanishing.
pub fn count_limit_cycles_with(
    eq: &AbelEquation,
    epsilon: f64,
    window: (f64, f64),
    grid: usize,
    cfg: &FlowConfig,
) -> Result<CycleScan> {
    let (a, b) = window;
    if !a.is_finite() || !b.is_finite() || a >= b {
        return Err(Error::Invalid(format!("window must be a finite increasing pair, got {a}..{b}")));
    }
    if grid < 2 {
        return Err(Error::Invalid(format!("scan grid needs at least 2 points, got {grid}")));
    }
    let p = eq.exponents().p();
    let one_minus_p = 1.0 - p as f64;
    for rho in [a, b] {
        if one_minus_p * rho <= w_floor(p) {
            return Err(Error::RhoOutsideDomain {
                rho,
                domain: format!("{:?}", eq.rho_domain()),
            });
        }
    }

    let disp = |rho: f64| -> Option<f64> {
        flow_map_with(eq, epsilon, one_minus_p * rho, cfg)
            .ok()
            .and_then(|s| s.displacement)
    };
    let eval_grid = |n: usize| -> Vec<(f64, Option<f64>)> {
        (0..n)
            .into_par_iter()
            .map(|i| {
                let rho = a + (b - a) * i as f64 / (n - 1) as f64;
                (rho, disp(rho))
            })
            .collect()
    };
    let sign = |d: f64| -> i32 {
        if d.abs() <= cfg.displacement_floor {
            0
        } else if d > 0.0 {
            1
        } else {
            -1
        }
    };
    // Sign changes between resolvable displacements with no escape gap in
    // between; floor-level points inside a bracket are fine.
    let brackets_of = |pts: &[(f64, Option<f64>)]| -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        let mut last: Option<(f64, i32)> = None;
        for (x, d) in pts {
            match d {
                None => last = None,
                Some(v) => {
                    let s = sign(*v);
                    if s != 0 {
                        if let Some((xl, sl)) = last {
                            if sl != s {
                                out.push((xl, *x));
                            }
                        }
                        last = Some((*x, s));
                    }
                }
            }
        }
        out
    };

    let mut counts = [0usize; 3];
    let mut finest = Vec::new();
    for (lvl, slot) in counts.iter_mut().enumerate() {
        let pts = eval_grid(grid << lvl);
        *slot = brackets_of(&pts).len();
        if lvl == 2 {
            finest = pts;
        }
    }
    let certified = counts[0] == counts[1] && counts[1] == counts[2];
    let brackets = brackets_of(&finest);

    let escape_err = |rho: f64| Error::NoConvergence {
        detail: format!("orbit at rho = {rho:.6} failed mid-refinement"),
    };
    let mut zeros = Vec::with_capacity(brackets.len());
    for &(blo, bhi) in &brackets {
        let (mut lo, mut hi) = (blo, bhi);
        let mut dlo = disp(lo).ok_or_else(|| escape_err(lo))?;
        let mut root = 0.5 * (lo + hi);
        for _ in 0..80 {
            root = 0.5 * (lo + hi);
            if hi - lo <= 1e-10 * (1.0 + root.abs()) {
                break;
            }
            let dm = disp(root).ok_or_else(|| escape_err(root))?;
            if dm == 0.0 {
                break;
            }
            if (dm > 0.0) == (dlo > 0.0) {
                lo = root;
                dlo = dm;
            } else {
                hi = root;
            }
        }
        zeros.push(root);
    }

    let mut flagged = Vec::new();
    let amp = finest
        .iter()
        .filter_map(|(_, d)| d.as_ref())
        .fold(0.0_f64, |m, d| m.max(d.abs()));
    let slope_scale = (amp / (b - a)).max(f64::MIN_POSITIVE);
    let h = 1e-5 * (b - a);
    for (i, &z) in zeros.iter().enumerate() {
        let (zm, zp) = ((z - h).max(a), (z + h).min(b));
        match (disp(zm), disp(zp)) {
            (Some(dm), Some(dp)) if ((dp - dm) / (zp - zm)).abs() >= SLOPE_FLOOR * slope_scale => {}
            _ => flagged.push(i),
        }
    }

    // Merged ranges of consecutive non-completing grid points, extended to
    // the nearest completing neighbors.
    let mut escaped: Vec<(f64, f64)> = Vec::new();
    let mut run: Option<(usize, usize)> = None;
    let n = finest.len();
    let close_run = |r: Option<(usize, usize)>, escaped: &mut Vec<(f64, f64)>| {
        if let Some((s, e)) = r {
            let lo = if s == 0 { a } else { finest[s - 1].0 };
            let hi = if e + 1 >= n { b } else { finest[e + 1].0 };
            escaped.push((lo, hi));
        }
    };
    for (i, (_, d)) in finest.iter().enumerate() {
        if d.is_none() {
            run = Some(match run {
                None => (i, i),
                Some((s, _)) => (s, i),
            });
        } else {
            close_run(run.take(), &mut escaped);
        }
    }
    close_run(run, &mut escaped);

    Ok(CycleScan {
        report: ZeroReport {
            interval: window,
            count: zeros.len(),
            zeros,
            flagged,
            certified,
            grid_used: grid << 2,
        },
        escaped,
    })
}

/// Sign class of the lower exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
}

/// One entry of the cycle-count table.
#[derive(Debug, Clone, Serialize)]
pub struct HilbertBound {
    pub m: usize,
    pub column: TableColumn,
    pub parity: Parity,
    /// cycles realizable from simple zeros of the second displacement
    /// coefficient
    pub count: usize,
    /// the count plus the isolated `x = 0` cycle, present when both
    /// exponents are positive
    pub with_zero_cycle: Option<usize>,
    pub note: String,
}

/// Largest number of limit cycles realizable at second order for
/// perturbations of degree `m`, by switch-angle column and exponent
/// parity.
///
/// For odd lower exponents the positive variable `w = x^(1 - p)`
/// identifies `x` with `-x`, so each cycle found in `w` corresponds to a
/// mirrored pair of cycles of the original system and the even-parity
/// count doubles. When both exponents are positive, `x = 0` solves the
/// system and is itself an isolated cycle, one more than the tabulated
/// count.
pub fn hilbert_table(
    m: usize,
    column: TableColumn,
    parity: Parity,
    positive_exponents: bool,
) -> Result<HilbertBound> {
    if m == 0 {
        return Err(Error::Invalid("the cycle-count table starts at m = 1".into()));
    }
    let base = match column {
        TableColumn::Generic => 7 * m - 3,
        TableColumn::Pi => 4 * m + 1,
        TableColumn::TwoPi => 2 * m - 1,
    };
    let (count, note) = match parity {
        Parity::Even => (
            base,
            "even lower exponent: each zero of the reduced displacement is one cycle".to_string(),
        ),
        Parity::Odd => (
            2 * base,
            "odd lower exponent: x and -x carry the same positive variable, so each reduced \
             cycle lifts to a mirrored pair"
                .to_string(),
        ),
    };
    Ok(HilbertBound {
        m,
        column,
        parity,
        count,
        with_zero_cycle: positive_exponents.then(|| count + 1),
        note,
    })
}
