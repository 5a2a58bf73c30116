//! Coefficient synthesis: interpolate kernel combinations that attain the
//! tabulated zero counts, invert first-order coefficient vectors back to
//! equation data, and sample random equations with a vanishing first-order
//! coefficient.
//!
//! The interpolation route places a combination's zeros by construction:
//! with an extended Chebyshev basis of size `N`, forcing zeros at `N - 1`
//! chosen nodes pins the combination up to scale, and the Chebyshev bound
//! forbids any further zero. [`realize_table1`] packages this for the
//! first- and second-order bases of each switch-angle column and checks
//! the achieved counts against the expected table.

use crate::chebyshev::{
    count_zeros, kernel_axis_family, kernel_split_family, FunctionFamily, Member, SplitVariant,
    ZeroReport, ZeroSearchOptions,
};
use crate::equation::{
    check_theta1, theta_case, AbelEquation, CoeffTable, ExponentPair, PiecewiseTrigPoly,
    ThetaCase, PI, TWO_PI,
};
use crate::dd::{self, Dd};
use crate::error::{Error, Result};
use crate::quad::{series, BasisTerm, LinearCombination, QuadConfig};
use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Residual ceiling for the interpolation solve.
const SOLVE_RESIDUAL_TOL: f64 = 1e-8;

/// How closely realized zeros must sit on the requested nodes.
const NODE_MATCH_TOL: f64 = 1e-8;

/// The three switch-angle columns of the zero-count table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TableColumn {
    /// switch angle in `(0, pi) ∪ (pi, 2pi)`
    Generic,
    /// switch angle exactly `pi`
    Pi,
    /// no switch (full period)
    TwoPi,
}

/// What to realize: a basis, the wanted zero locations, and which
/// coefficient is pinned to 1 to fix the scale.
#[derive(Debug, Clone)]
pub struct RealizationTarget {
    pub basis: FunctionFamily,
    /// `N - 1` distinct points strictly inside the basis window
    pub nodes: Vec<f64>,
    /// index of the coefficient pinned to 1
    pub normalization: usize,
}

/// Quadrature targets tight enough that node placement is not limited by
/// kernel evaluation noise; the adaptive driver's own roundoff floor is the
/// effective bound when combinations carry large cancelling coefficients.
fn interpolation_quad() -> QuadConfig {
    QuadConfig {
        abs_tol: 1e-13,
        rel_tol: 1e-13,
        ..QuadConfig::default()
    }
}

/// Evaluate `sum coeffs[i] * basis[i]` with kernel terms grouped into
/// shared quadratures when the whole family is kernel-valued.
fn family_closure<'a>(
    basis: &'a FunctionFamily,
    coeffs: &'a [f64],
    cfg: QuadConfig,
) -> impl Fn(f64) -> Result<f64> + Sync + 'a {
    let grouped: Option<LinearCombination> = basis
        .members
        .iter()
        .zip(coeffs)
        .map(|(mem, &c)| match mem {
            Member::Kernel(term) => Some((c, term.clone())),
            Member::Trig { sin: false, k: 0, secular: false } => {
                Some((c, BasisTerm::constant()))
            }
            _ => None,
        })
        .collect::<Option<Vec<_>>>()
        .map(|terms| LinearCombination::new(terms, vec![basis.window]));
    move |x: f64| match &grouped {
        Some(lc) => lc.eval_with(x, &cfg),
        None => {
            let mut sum = 0.0;
            for (mem, &c) in basis.members.iter().zip(coeffs) {
                if c != 0.0 {
                    sum += c * mem.value(x, &cfg)?;
                }
            }
            Ok(sum)
        }
    }
}

/// Reject targets the solve would silently mangle: wrong node count, a
/// normalization index outside the basis, nodes outside the open window
/// or coinciding.
fn validate_target(target: &RealizationTarget) -> Result<()> {
    let n = target.basis.len();
    let (a, b) = target.basis.window;
    if target.nodes.len() != n - 1 {
        return Err(Error::CoefficientShape {
            name: "nodes".into(),
            got: target.nodes.len(),
            expected: n - 1,
        });
    }
    if target.normalization >= n {
        return Err(Error::Invalid(format!(
            "normalization index {} outside basis of {n}",
            target.normalization
        )));
    }
    for &x in &target.nodes {
        if !(a < x && x < b) {
            return Err(Error::Invalid(format!("node {x} outside the open window ({a}, {b})")));
        }
    }
    let mut sorted = target.nodes.clone();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Invalid("interpolation nodes must be pairwise distinct".into()));
    }
    Ok(())
}

/// The family as plain kernel terms, when every member is one.
fn kernel_terms(basis: &FunctionFamily) -> Option<Vec<BasisTerm>> {
    basis
        .members
        .iter()
        .map(|mem| match mem {
            Member::Kernel(term) => Some(term.clone()),
            Member::Trig { sin: false, k: 0, secular: false } => Some(BasisTerm::constant()),
            _ => None,
        })
        .collect()
}

/// Expansion-series route for kernel families with a half-odd-integer
/// exponent over subintervals of `[0, pi]` on a positive window. Immune to
/// the cancellation that limits the quadrature route when interpolation
/// coefficients grow large, so it is preferred whenever it applies;
/// anything else falls back to adaptive quadrature.
fn exact_evaluator(basis: &FunctionFamily) -> Option<series::SeriesEvaluator> {
    let (a, _) = basis.window;
    if a <= 0.0 {
        return None;
    }
    let terms = kernel_terms(basis)?;
    let t = series::eligible(&terms)?;
    // sized to half the window floor: slope probes and bisection stay
    // inside, and the expansion only shortens as rho grows
    Some(series::SeriesEvaluator::new(&terms, t, a / 2.0))
}

/// Interpolation solve in double-double through the expansion evaluator.
fn solve_target_dd(ev: &series::SeriesEvaluator, target: &RealizationTarget) -> Result<Vec<Dd>> {
    let n = target.basis.len();
    let zero = Dd::from_f64(0.0);
    let one = Dd::from_f64(1.0);
    let mut mat: Vec<Vec<Dd>> = Vec::with_capacity(n);
    for &x in &target.nodes {
        mat.push(ev.eval_members(x));
    }
    let mut norm_row = vec![zero; n];
    norm_row[target.normalization] = one;
    mat.push(norm_row);
    let mut rhs = vec![zero; n];
    rhs[n - 1] = one;
    let weights = dd::solve(mat.clone(), rhs.clone()).ok_or_else(|| Error::IllConditioned {
        detail: "interpolation system is singular; move or separate the nodes".into(),
    })?;
    let mut residual = 0.0_f64;
    for (row, want) in mat.iter().zip(&rhs) {
        let mut acc = want.neg();
        for (entry, w) in row.iter().zip(&weights) {
            acc = acc.add(entry.mul(*w));
        }
        residual = residual.max(acc.to_f64().abs());
    }
    if residual > SOLVE_RESIDUAL_TOL {
        return Err(Error::IllConditioned {
            detail: format!("interpolation residual {residual:.3e} exceeds {SOLVE_RESIDUAL_TOL:.0e}"),
        });
    }
    Ok(weights)
}

/// Solve the interpolation system alone: one vanishing row per node plus
/// the normalization row pinning one coefficient to 1.
fn solve_target(target: &RealizationTarget, cfg: &QuadConfig) -> Result<Vec<f64>> {
    let n = target.basis.len();
    let mut mat = DMatrix::zeros(n, n);
    for (j, &x) in target.nodes.iter().enumerate() {
        for (i, mem) in target.basis.members.iter().enumerate() {
            mat[(j, i)] = mem.value(x, cfg)?;
        }
    }
    mat[(n - 1, target.normalization)] = 1.0;
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;
    let sol = mat
        .clone()
        .full_piv_lu()
        .solve(&rhs)
        .ok_or_else(|| Error::IllConditioned {
            detail: "interpolation system is singular; move or separate the nodes".into(),
        })?;
    let residual = (&mat * &sol - &rhs).amax();
    if residual > SOLVE_RESIDUAL_TOL {
        return Err(Error::IllConditioned {
            detail: format!("interpolation residual {residual:.3e} exceeds {SOLVE_RESIDUAL_TOL:.0e}"),
        });
    }
    Ok(sol.iter().copied().collect())
}

/// Solve for the combination vanishing at the target's nodes.
///
/// The linear system consists of one vanishing condition per node plus the
/// normalization row; the result is verified by an independent zero search
/// over the window, returned alongside the coefficients.
pub fn interpolate_coefficients(
    target: &RealizationTarget,
    zero_opts: &ZeroSearchOptions,
) -> Result<(Vec<f64>, ZeroReport)> {
    validate_target(target)?;
    if let Some(ev) = exact_evaluator(&target.basis) {
        let weights = solve_target_dd(&ev, target)?;
        let f = |x: f64| Ok(ev.eval_combination(&weights, x).to_f64());
        let report = count_zeros(&f, target.basis.window, zero_opts)?;
        let coeffs = weights.iter().map(|w| w.to_f64()).collect();
        return Ok((coeffs, report));
    }
    let cfg = interpolation_quad();
    let coeffs = solve_target(target, &cfg)?;
    let report = {
        let f = family_closure(&target.basis, &coeffs, cfg);
        count_zeros(&f, target.basis.window, zero_opts)?
    };
    Ok((coeffs, report))
}

/// Options for [`realize_table1`]: which equation family supplies the
/// exponent, where the generic switch sits, and the node window.
#[derive(Debug, Clone)]
pub struct RealizeOptions {
    /// switch angle used for the generic column
    pub theta1: f64,
    pub p: i64,
    pub q: i64,
    /// open interval the zeros are placed in
    pub window: (f64, f64),
    pub zero_opts: ZeroSearchOptions,
}

impl Default for RealizeOptions {
    fn default() -> Self {
        Self {
            theta1: PI / 2.0,
            p: -1,
            q: 2,
            // a moderate window keeps the kernel family well separated, so
            // interpolants keep visible lobes between adjacent nodes
            window: (0.5, 4.0),
            zero_opts: ZeroSearchOptions::default(),
        }
    }
}

/// Outcome of one realization, serializable for the CLI.
#[derive(Debug, Clone, Serialize)]
pub struct RealizationRecord {
    pub m: usize,
    pub column: TableColumn,
    pub order: u8,
    pub basis: Vec<String>,
    pub window: (f64, f64),
    pub nodes: Vec<f64>,
    pub coefficients: Vec<f64>,
    pub expected: usize,
    pub achieved: usize,
    pub zeros: Vec<f64>,
    pub certified: bool,
}

/// Expected zero count per table cell.
fn expected_count(m: usize, column: TableColumn, order: u8) -> usize {
    match (order, column) {
        (1, TableColumn::Generic) => 3 * m + 2,
        (1, TableColumn::Pi) => 2 * m + 1,
        (1, TableColumn::TwoPi) => m + 1,
        (2, TableColumn::Generic) => 7 * m - 3,
        (2, TableColumn::Pi) => 4 * m + 1,
        (2, TableColumn::TwoPi) => 2 * m - 1,
        _ => unreachable!("order checked by caller"),
    }
}

fn order1_generic_basis(
    m: usize,
    theta1: f64,
    beta: f64,
    window: (f64, f64),
) -> Result<FunctionFamily> {
    let e1_end = match theta_case(theta1) {
        ThetaCase::BelowPi => theta1,
        ThetaCase::AbovePi => TWO_PI - theta1,
        _ => {
            return Err(Error::Invalid(format!(
                "generic column needs a switch angle away from pi and 2pi, got {theta1}"
            )))
        }
    };
    let e1 = (0.0, e1_end);
    let e2 = (e1_end, PI);
    let mut members = vec![Member::constant()];
    for k in 0..=m {
        members.push(Member::Kernel(BasisTerm::cos(k, beta, e1)));
    }
    for k in (1..=m).rev() {
        members.push(Member::Kernel(BasisTerm::sin(k, beta, e1)));
    }
    for k in 0..=m {
        members.push(Member::Kernel(BasisTerm::cos(k, beta, e2)));
    }
    Ok(FunctionFamily {
        label: format!("order1-generic(m={m},split={e1_end:.4})"),
        members,
        window,
    })
}

fn order1_single_basis(m: usize, beta: f64, window: (f64, f64)) -> FunctionFamily {
    // shared by the pi column (with sines) and the full-period column
    let e = (0.0, PI);
    let mut members = vec![Member::constant()];
    for k in 0..=m {
        members.push(Member::Kernel(BasisTerm::cos(k, beta, e)));
    }
    FunctionFamily {
        label: format!("order1-single(m={m})"),
        members,
        window,
    }
}

/// Chebyshev points of the open window, ascending.
fn chebyshev_nodes(window: (f64, f64), count: usize) -> Vec<f64> {
    let (a, b) = window;
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    (0..count)
        .map(|j| mid - half * (PI * (2.0 * j as f64 + 1.0) / (2.0 * count as f64)).cos())
        .collect()
}

/// Realize the tabulated zero count for `(m, column, order)` with default
/// options.
pub fn realize_table1(m: usize, column: TableColumn, order: u8) -> Result<RealizationRecord> {
    realize_table1_with(m, column, order, &RealizeOptions::default())
}

/// Kernel basis for one cell of the zero-count table.
fn table1_basis(
    m: usize,
    column: TableColumn,
    order: u8,
    opts: &RealizeOptions,
) -> Result<FunctionFamily> {
    if !(1..=3).contains(&m) {
        return Err(Error::Invalid(format!("realizations cover m in 1..=3, got {m}")));
    }
    if !(order == 1 || order == 2) {
        return Err(Error::Invalid(format!("order must be 1 or 2, got {order}")));
    }
    let exps = ExponentPair::new(opts.p, opts.q)?;
    let beta = exps.alpha_f64();
    if beta.fract() == 0.0 {
        return Err(Error::IntegerBeta { beta });
    }
    Ok(match (order, column) {
        (1, TableColumn::Generic) => order1_generic_basis(m, opts.theta1, beta, opts.window)?,
        (1, TableColumn::Pi) => {
            let mut fam = order1_single_basis(m, beta, opts.window);
            for k in (1..=m).rev() {
                fam.members
                    .push(Member::Kernel(BasisTerm::sin(k, beta, (0.0, PI))));
            }
            fam.label = format!("order1-pi(m={m})");
            fam
        }
        (1, TableColumn::TwoPi) => order1_single_basis(m, beta, opts.window),
        (2, TableColumn::Generic) => {
            kernel_split_family(SplitVariant::DFirst, m, 2 * m - 1, beta, opts.theta1, opts.window)?
        }
        (2, TableColumn::Pi) => kernel_axis_family(m, beta, opts.window)?,
        (2, TableColumn::TwoPi) => {
            let e = (0.0, PI);
            let members = (0..=(2 * m - 1))
                .map(|k| Member::Kernel(BasisTerm::cos(k, beta, e)))
                .collect();
            FunctionFamily {
                label: format!("order2-full-period(m={m})"),
                members,
                window: opts.window,
            }
        }
        _ => unreachable!(),
    })
}

/// Build the appropriate kernel basis, interpolate a combination vanishing
/// at Chebyshev points of the window, and check that exactly the expected
/// number of certified simple zeros results.
pub fn realize_table1_with(
    m: usize,
    column: TableColumn,
    order: u8,
    opts: &RealizeOptions,
) -> Result<RealizationRecord> {
    let basis = table1_basis(m, column, order, opts)?;
    let n = basis.len();
    let expected = expected_count(m, column, order);
    debug_assert_eq!(expected, n - 1, "basis size must exceed the count by one");

    let nodes = chebyshev_nodes(opts.window, n - 1);
    let target = RealizationTarget {
        basis,
        nodes: nodes.clone(),
        normalization: n - 1,
    };
    validate_target(&target)?;

    // Between solving and counting, normalize to unit amplitude over the
    // window so the simplicity check compares slopes against a scale-free
    // floor. The zero set is unchanged; only the overall factor is.
    let (a, b) = opts.window;
    let probe_points: Vec<f64> = (0..256)
        .map(|i| a + (b - a) * (i as f64 + 0.5) / 256.0)
        .collect();
    let check_amp = |amp: f64| -> Result<f64> {
        if amp.is_finite() && amp > 0.0 {
            Ok(amp)
        } else {
            Err(Error::IllConditioned {
                detail: format!("interpolant amplitude {amp:.3e} over {:?}", opts.window),
            })
        }
    };

    let (coefficients, report) = match exact_evaluator(&target.basis) {
        Some(ev) => {
            let mut weights = solve_target_dd(&ev, &target)?;
            let mut amp = 0.0_f64;
            for &x in &probe_points {
                amp = amp.max(ev.eval_combination(&weights, x).to_f64().abs());
            }
            let amp = Dd::from_f64(check_amp(amp)?);
            for w in &mut weights {
                *w = w.div(amp);
            }
            let f = |x: f64| Ok(ev.eval_combination(&weights, x).to_f64());
            let report = count_zeros(&f, opts.window, &opts.zero_opts)?;
            (weights.iter().map(|w| w.to_f64()).collect::<Vec<_>>(), report)
        }
        None => {
            let cfg = interpolation_quad();
            let mut coefficients = solve_target(&target, &cfg)?;
            let mut amp = 0.0_f64;
            {
                let f = family_closure(&target.basis, &coefficients, cfg);
                for &x in &probe_points {
                    amp = amp.max(f(x)?.abs());
                }
            }
            let amp = check_amp(amp)?;
            for c in &mut coefficients {
                *c /= amp;
            }
            let report = {
                let f = family_closure(&target.basis, &coefficients, cfg);
                count_zeros(&f, opts.window, &opts.zero_opts)?
            };
            (coefficients, report)
        }
    };
    if !report.certified {
        return Err(Error::NoConvergence {
            detail: format!(
                "zero count over {:?} did not certify (count {}, grid {})",
                opts.window, report.count, report.grid_used
            ),
        });
    }
    if report.count != expected {
        return Err(Error::RealizationCount { got: report.count, expected });
    }
    if !report.flagged.is_empty() {
        return Err(Error::NoConvergence {
            detail: format!(
                "{} of {} zeros look non-simple at indices {:?}",
                report.flagged.len(),
                report.count,
                report.flagged
            ),
        });
    }
    let mut sorted_zeros = report.zeros.clone();
    sorted_zeros.sort_by(f64::total_cmp);
    let drift = sorted_zeros
        .iter()
        .zip(&nodes)
        .map(|(z, x)| (z - x).abs())
        .fold(0.0_f64, f64::max);
    if drift > NODE_MATCH_TOL {
        return Err(Error::NoConvergence {
            detail: format!(
                "realized zeros drift {drift:.3e} from the requested nodes (tolerance {NODE_MATCH_TOL:.0e})"
            ),
        });
    }
    Ok(RealizationRecord {
        m,
        column,
        order,
        basis: target.basis.members.iter().map(|mem| mem.to_string()).collect(),
        window: opts.window,
        nodes,
        coefficients,
        expected,
        achieved: report.count,
        zeros: report.zeros,
        certified: report.certified,
    })
}

/// Like [`realize_table1_with`], but instead of pinning the zeros at preset
/// nodes, a leveling iteration moves them until every lobe between
/// consecutive zeros peaks at the same amplitude.
///
/// Interpolating at preset nodes can leave lobes orders of magnitude apart
/// and coefficients far larger than the combination's values — harmless
/// for counting zeros, but hopeless as first-order data for an actual
/// flow, where second-order effects grow with the squared coefficients.
/// The leveled combination is the best-conditioned maximal-zero element
/// the basis admits, so its coefficient vector is the one to hand to
/// [`m1_to_equation`] when the realized shape is meant to be flowed.
///
/// Only bases eligible for the series evaluation path are supported; the
/// record's `nodes` are the leveled zero positions the iteration settled
/// on rather than an input.
pub fn realize_balanced(
    m: usize,
    column: TableColumn,
    order: u8,
    opts: &RealizeOptions,
) -> Result<RealizationRecord> {
    let k = expected_count(m, column, order);
    realize_profiled(m, column, order, opts, &vec![0.0; k + 1])
}

/// Like [`realize_balanced`], but levels the lobes toward a prescribed
/// amplitude profile instead of a flat one: lobe `i` (left to right,
/// `count + 1` of them) is steered to `exp(log_profile[i])` relative to
/// the largest, which is normalized to one.
///
/// A rising profile concentrates amplitude where a flowed realization
/// needs the most signal and starves the region whose zeros are already
/// easy to resolve, which is the knob that matters when the combination
/// is meant to survive an actual integration rather than a plain count.
pub fn realize_profiled(
    m: usize,
    column: TableColumn,
    order: u8,
    opts: &RealizeOptions,
    log_profile: &[f64],
) -> Result<RealizationRecord> {
    let basis = table1_basis(m, column, order, opts)?;
    let n = basis.len();
    let expected = expected_count(m, column, order);
    if log_profile.len() != expected + 1 {
        return Err(Error::CoefficientShape {
            name: "log_profile".into(),
            got: log_profile.len(),
            expected: expected + 1,
        });
    }
    if log_profile.iter().any(|t| !t.is_finite()) {
        return Err(Error::Invalid("log_profile entries must be finite".into()));
    }
    let ev = exact_evaluator(&basis).ok_or_else(|| {
        Error::Invalid(format!(
            "lobe leveling needs the series evaluation path, which `{}` does not admit",
            basis.label
        ))
    })?;
    let (a, b) = opts.window;

    let solve_at = |zs: &[f64]| -> Result<Vec<Dd>> {
        let target = RealizationTarget {
            basis: basis.clone(),
            nodes: zs.to_vec(),
            normalization: n - 1,
        };
        validate_target(&target)?;
        solve_target_dd(&ev, &target)
    };
    // max |f| over one closed sub-interval: coarse grid, then ternary
    // refinement around the best grid point
    let lobe_max = |weights: &[Dd], lo: f64, hi: f64| -> f64 {
        let g = 48;
        let mut best = (lo, 0.0_f64);
        for i in 0..=g {
            let x = lo + (hi - lo) * i as f64 / g as f64;
            let v = ev.eval_combination(weights, x).to_f64().abs();
            if v > best.1 {
                best = (x, v);
            }
        }
        let h = (hi - lo) / g as f64;
        let (mut l, mut r) = ((best.0 - h).max(lo), (best.0 + h).min(hi));
        for _ in 0..40 {
            let m1 = l + (r - l) / 3.0;
            let m2 = r - (r - l) / 3.0;
            let v1 = ev.eval_combination(weights, m1).to_f64().abs();
            let v2 = ev.eval_combination(weights, m2).to_f64().abs();
            if v1 < v2 {
                l = m1;
            } else {
                r = m2;
            }
        }
        let refined = ev.eval_combination(weights, 0.5 * (l + r)).to_f64().abs();
        best.1.max(refined)
    };
    let lobes_with = |weights: &[Dd], zs: &[f64]| -> Vec<f64> {
        let mut bounds = Vec::with_capacity(zs.len() + 2);
        bounds.push(a);
        bounds.extend_from_slice(zs);
        bounds.push(b);
        bounds.windows(2).map(|s| lobe_max(weights, s[0], s[1])).collect()
    };
    let lobes_of = |zs: &[f64]| -> Result<Vec<f64>> { Ok(lobes_with(&solve_at(zs)?, zs)) };
    // level exactly when every log ratio of adjacent lobes matches the
    // profile's
    let gaps_of = |lobes: &[f64]| -> Vec<f64> {
        lobes
            .windows(2)
            .zip(log_profile.windows(2))
            .map(|(l, t)| (l[1] / l[0]).ln() - (t[1] - t[0]))
            .collect()
    };
    let imbalance = |gaps: &[f64]| gaps.iter().fold(0.0_f64, |mx, g| mx.max(g.abs()));

    let k = expected;
    let mut zs = chebyshev_nodes(opts.window, k);
    let mut gaps = gaps_of(&lobes_of(&zs)?);
    for _ in 0..40 {
        if imbalance(&gaps) < 1e-3 {
            break;
        }
        let h = 1e-6 * (b - a);
        let mut jac = DMatrix::zeros(k, k);
        for j in 0..k {
            let mut zp = zs.clone();
            zp[j] += h;
            let gp = gaps_of(&lobes_of(&zp)?);
            for i in 0..k {
                jac[(i, j)] = (gp[i] - gaps[i]) / h;
            }
        }
        let rhs = DVector::from_iterator(k, gaps.iter().map(|g| -g));
        let step = jac.full_piv_lu().solve(&rhs).ok_or_else(|| Error::IllConditioned {
            detail: "lobe-leveling Jacobian is singular".into(),
        })?;
        // damp until the zeros stay ordered inside the window and the
        // imbalance actually drops
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..8 {
            let trial: Vec<f64> =
                zs.iter().zip(step.iter()).map(|(z, s)| z + lambda * s).collect();
            let ordered = trial.windows(2).all(|w| w[0] < w[1])
                && trial.first().is_some_and(|&z| z > a)
                && trial.last().is_some_and(|&z| z < b);
            if ordered {
                if let Ok(lobes) = lobes_of(&trial) {
                    let trial_gaps = gaps_of(&lobes);
                    if imbalance(&trial_gaps) < imbalance(&gaps) {
                        zs = trial;
                        gaps = trial_gaps;
                        accepted = true;
                        break;
                    }
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if imbalance(&gaps) >= 1e-3 {
        return Err(Error::NoConvergence {
            detail: format!("lobe leveling stalled with imbalance {:.3e}", imbalance(&gaps)),
        });
    }

    let mut weights = solve_at(&zs)?;
    let amp = lobes_with(&weights, &zs).into_iter().fold(0.0_f64, f64::max);
    if !amp.is_finite() || amp <= 0.0 {
        return Err(Error::IllConditioned {
            detail: format!("leveled amplitude {amp:.3e} over {:?}", opts.window),
        });
    }
    let amp_dd = Dd::from_f64(amp);
    for w in &mut weights {
        *w = w.div(amp_dd);
    }
    let f = |x: f64| Ok(ev.eval_combination(&weights, x).to_f64());
    let report = count_zeros(&f, opts.window, &opts.zero_opts)?;
    if !report.certified {
        return Err(Error::NoConvergence {
            detail: format!(
                "zero count over {:?} did not certify (count {}, grid {})",
                opts.window, report.count, report.grid_used
            ),
        });
    }
    if report.count != expected {
        return Err(Error::RealizationCount { got: report.count, expected });
    }
    if !report.flagged.is_empty() {
        return Err(Error::NoConvergence {
            detail: format!(
                "{} of {} zeros look non-simple at indices {:?}",
                report.flagged.len(),
                report.count,
                report.flagged
            ),
        });
    }
    let mut sorted_zeros = report.zeros.clone();
    sorted_zeros.sort_by(f64::total_cmp);
    let drift = sorted_zeros
        .iter()
        .zip(&zs)
        .map(|(z, x)| (z - x).abs())
        .fold(0.0_f64, f64::max);
    if drift > NODE_MATCH_TOL {
        return Err(Error::NoConvergence {
            detail: format!(
                "leveled zeros drift {drift:.3e} from their solved positions (tolerance {NODE_MATCH_TOL:.0e})"
            ),
        });
    }
    Ok(RealizationRecord {
        m,
        column,
        order,
        basis: basis.members.iter().map(|mem| mem.to_string()).collect(),
        window: opts.window,
        nodes: zs,
        coefficients: weights.iter().map(|w| w.to_f64()).collect(),
        expected,
        achieved: report.count,
        zeros: report.zeros,
        certified: report.certified,
    })
}

/// Invert a first-order coefficient vector to equation data.
///
/// The vector is indexed against the first-order realization basis for the
/// switch case of `theta1`: constant, cosines on the first canonical
/// interval, descending sines, then (for a proper switch inside the
/// period) cosines on the complementary interval. The canonical gauge
/// puts all minus-zone sine coefficients to zero, splits each cosine pair
/// through the complementary-interval coefficient, and realizes the
/// constant through equal constant terms in the additive part. The result
/// has only `P1` and `Q1` populated and round-trips through
/// [`m1_combination`](crate::melnikov::m1_combination) exactly.
pub fn m1_to_equation(coeffs: &[f64], theta1: f64, p: i64, q: i64) -> Result<AbelEquation> {
    check_theta1(theta1)?;
    let exps = ExponentPair::new(p, q)?;
    let scale = exps.scale();
    let case = theta_case(theta1);
    let len = coeffs.len();
    let m = match case {
        ThetaCase::BelowPi | ThetaCase::AbovePi => {
            if len < 6 || len % 3 != 0 {
                return Err(Error::CoefficientShape {
                    name: "m1 coefficients (split case)".into(),
                    got: len,
                    expected: if len < 6 { 6 } else { 3 * (len / 3) },
                });
            }
            len / 3 - 1
        }
        ThetaCase::Pi => {
            if len < 4 || len % 2 != 0 {
                return Err(Error::CoefficientShape {
                    name: "m1 coefficients (half-period case)".into(),
                    got: len,
                    expected: if len < 4 { 4 } else { 2 * (len / 2) },
                });
            }
            len / 2 - 1
        }
        ThetaCase::TwoPi => {
            if len < 3 {
                return Err(Error::CoefficientShape {
                    name: "m1 coefficients (full-period case)".into(),
                    got: len,
                    expected: 3,
                });
            }
            len - 2
        }
    };

    let mut q1_plus: CoeffTable = vec![(0.0, 0.0); m + 1];
    let mut q1_minus: CoeffTable = vec![(0.0, 0.0); m + 1];
    match case {
        ThetaCase::BelowPi => {
            for k in 0..=m {
                let mu1 = coeffs[1 + k];
                let mu2 = coeffs[2 * m + 2 + k];
                let d_minus = mu2 / 2.0;
                q1_minus[k].1 = d_minus / scale;
                q1_plus[k].1 = (mu1 - d_minus) / scale;
            }
            for k in 1..=m {
                q1_plus[k].0 = coeffs[2 * m + 2 - k] / scale;
            }
        }
        ThetaCase::AbovePi => {
            for k in 0..=m {
                let mu1 = coeffs[1 + k];
                let mu2 = coeffs[2 * m + 2 + k];
                let d_plus = mu2 / 2.0;
                q1_plus[k].1 = d_plus / scale;
                q1_minus[k].1 = (mu1 - d_plus) / scale;
            }
            for k in 1..=m {
                q1_plus[k].0 = coeffs[2 * m + 2 - k] / scale;
            }
        }
        ThetaCase::Pi => {
            for k in 0..=m {
                q1_plus[k].1 = coeffs[1 + k] / scale;
            }
            for k in 1..=m {
                q1_plus[k].0 = coeffs[2 * m + 2 - k] / scale;
            }
        }
        ThetaCase::TwoPi => {
            for k in 0..=m {
                q1_plus[k].1 = coeffs[1 + k] / 2.0 / scale;
            }
            q1_minus = q1_plus.clone();
        }
    }

    let b10 = coeffs[0] / TWO_PI;
    let mut p1_table: CoeffTable = vec![(0.0, 0.0); m + 1];
    p1_table[0].1 = b10;
    let p1 = PiecewiseTrigPoly::new(m, theta1, p1_table.clone(), p1_table)?;
    let q1 = PiecewiseTrigPoly::new(m, theta1, q1_plus, q1_minus)?;
    let p2 = PiecewiseTrigPoly::zero(m, theta1);
    let q2 = PiecewiseTrigPoly::zero(m, theta1);
    AbelEquation::new(exps, p1, p2, q1, q2)
}

/// Draw a pseudo-random equation whose first-order displacement
/// coefficient vanishes identically.
///
/// All free coefficients are uniform on `(-1, 1)`; the multiplicative
/// first-order part is then projected onto the vanishing set (cosine rows
/// zeroed, or negated across the switch at the half-period case; sine rows
/// matched across zones), its top sine row is pushed away from zero, and
/// the additive constant terms absorb the full-period integral. At the
/// half-period switch the additive sine rows are also matched across
/// zones, which the second-order structured basis requires.
pub fn sample_center_equation(
    m: usize,
    theta1: f64,
    p: i64,
    q: i64,
    seed: u64,
) -> Result<AbelEquation> {
    check_theta1(theta1)?;
    if m < 1 {
        return Err(Error::Invalid("sampling needs m >= 1".into()));
    }
    let exps = ExponentPair::new(p, q)?;
    let case = theta_case(theta1);
    let single_zone = case == ThetaCase::TwoPi;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| -> CoeffTable {
        (0..=m)
            .map(|k| {
                let a = if k == 0 { 0.0 } else { rng.random_range(-1.0..1.0) };
                (a, rng.random_range(-1.0..1.0))
            })
            .collect()
    };

    let mut p1_plus = draw(&mut rng);
    let mut p1_minus = if single_zone { p1_plus.clone() } else { draw(&mut rng) };
    let p2_plus = draw(&mut rng);
    let p2_minus = if single_zone { p2_plus.clone() } else { draw(&mut rng) };
    let q2_plus = draw(&mut rng);
    let q2_minus = if single_zone { q2_plus.clone() } else { draw(&mut rng) };
    let mut q1_plus = draw(&mut rng);
    let mut q1_minus = if single_zone { q1_plus.clone() } else { draw(&mut rng) };

    match case {
        ThetaCase::Pi => {
            for k in 0..=m {
                q1_minus[k].1 = -q1_plus[k].1;
                if k >= 1 {
                    q1_minus[k].0 = q1_plus[k].0;
                    p1_minus[k].0 = p1_plus[k].0;
                }
            }
        }
        _ => {
            for k in 0..=m {
                q1_plus[k].1 = 0.0;
                q1_minus[k].1 = 0.0;
                if k >= 1 {
                    q1_minus[k].0 = q1_plus[k].0;
                }
            }
        }
    }
    // keep the top sine row decisively nonzero
    if q1_plus[m].0.abs() < 0.3 {
        let forced = if q1_plus[m].0 == 0.0 { 0.3 } else { 0.3_f64.copysign(q1_plus[m].0) };
        q1_plus[m].0 = forced;
        q1_minus[m].0 = forced;
    }
    if single_zone {
        q1_minus = q1_plus.clone();
    }

    // cancel the full-period integral of the additive part
    let probe = PiecewiseTrigPoly::new(m, theta1, p1_plus.clone(), p1_minus.clone())?;
    let total = probe.full_integral();
    if single_zone {
        p1_plus[0].1 -= total / TWO_PI;
        p1_minus = p1_plus.clone();
    } else {
        p1_minus[0].1 -= total / (TWO_PI - theta1);
    }

    let p1 = PiecewiseTrigPoly::new(m, theta1, p1_plus, p1_minus)?;
    let p2 = PiecewiseTrigPoly::new(m, theta1, p2_plus, p2_minus)?;
    let q1 = PiecewiseTrigPoly::new(m, theta1, q1_plus, q1_minus)?;
    let q2 = PiecewiseTrigPoly::new(m, theta1, q2_plus, q2_minus)?;
    AbelEquation::new(exps, p1, p2, q1, q2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equation::{center_conditions, Zone};
    use crate::melnikov::m1_combination;
    use crate::quad::KernelKind;
    use approx::assert_relative_eq;

    #[test]
    fn trivial_interpolation_constant_and_cosine() {
        let basis = FunctionFamily {
            label: "demo".into(),
            members: vec![Member::constant(), Member::cos(1)],
            window: (0.0, PI),
        };
        let target = RealizationTarget {
            basis,
            nodes: vec![PI / 2.0],
            normalization: 1,
        };
        let (coeffs, report) =
            interpolate_coefficients(&target, &ZeroSearchOptions::default()).unwrap();
        assert_relative_eq!(coeffs[0], 0.0, epsilon = 1e-14);
        assert_relative_eq!(coeffs[1], 1.0);
        assert_eq!(report.count, 1);
        assert!(report.certified);
        assert_relative_eq!(report.zeros[0], PI / 2.0, epsilon = 1e-9);
    }

    #[test]
    fn interpolation_rejects_bad_targets() {
        let basis = FunctionFamily {
            label: "demo".into(),
            members: vec![Member::constant(), Member::cos(1)],
            window: (0.0, PI),
        };
        let wrong_count = RealizationTarget {
            basis: basis.clone(),
            nodes: vec![1.0, 2.0],
            normalization: 0,
        };
        assert!(matches!(
            interpolate_coefficients(&wrong_count, &ZeroSearchOptions::default()),
            Err(Error::CoefficientShape { .. })
        ));
        let outside = RealizationTarget {
            basis,
            nodes: vec![4.0],
            normalization: 0,
        };
        assert!(interpolate_coefficients(&outside, &ZeroSearchOptions::default()).is_err());
    }

    fn assert_zeros_on_nodes(record: &RealizationRecord) {
        let mut zeros = record.zeros.clone();
        zeros.sort_by(f64::total_cmp);
        for (z, node) in zeros.iter().zip(&record.nodes) {
            assert_relative_eq!(z, node, epsilon = 1e-8);
        }
    }

    #[test]
    fn order1_realizations_attain_counts() {
        for (m, column, expected) in [
            (1, TableColumn::Generic, 5),
            (1, TableColumn::Pi, 3),
            (1, TableColumn::TwoPi, 2),
            (2, TableColumn::Generic, 8),
            (2, TableColumn::Pi, 5),
            (2, TableColumn::TwoPi, 3),
        ] {
            let record = realize_table1(m, column, 1).unwrap();
            assert_eq!(record.achieved, expected, "m={m} {column:?}");
            assert!(record.certified);
            assert_zeros_on_nodes(&record);
        }
    }

    #[test]
    fn order2_realizations_attain_counts() {
        for (m, column, expected) in [
            (1, TableColumn::Generic, 4),
            (1, TableColumn::Pi, 5),
            (1, TableColumn::TwoPi, 1),
            (2, TableColumn::Generic, 11),
            (2, TableColumn::Pi, 9),
            (2, TableColumn::TwoPi, 3),
        ] {
            let record = realize_table1(m, column, 2).unwrap();
            assert_eq!(record.achieved, expected, "m={m} {column:?}");
            assert!(record.certified);
            assert_zeros_on_nodes(&record);
        }
    }

    #[test]
    fn realization_record_serializes() {
        let record = realize_table1(1, TableColumn::TwoPi, 1).unwrap();
        let text = serde_json::to_string(&record).unwrap();
        assert!(text.contains("\"achieved\":2"));
    }

    fn combination_vector(eq: &AbelEquation, len: usize) -> Vec<f64> {
        let lc = m1_combination(eq).unwrap();
        let theta1 = eq.theta1();
        let case = eq.theta_case();
        let m = eq.m();
        let get = |kind: KernelKind, k: usize, iv: (f64, f64)| {
            lc.coefficient_of(kind, k, iv).unwrap_or(0.0)
        };
        let mut v = vec![get(KernelKind::Const, 0, (0.0, 0.0))];
        match case {
            ThetaCase::BelowPi | ThetaCase::AbovePi => {
                let e1_end = if case == ThetaCase::BelowPi { theta1 } else { TWO_PI - theta1 };
                let e1 = (0.0, e1_end);
                let e2 = (e1_end, PI);
                for k in 0..=m {
                    v.push(get(KernelKind::Cos, k, e1));
                }
                for k in (1..=m).rev() {
                    v.push(get(KernelKind::Sin, k, e1));
                }
                for k in 0..=m {
                    v.push(get(KernelKind::Cos, k, e2));
                }
            }
            ThetaCase::Pi | ThetaCase::TwoPi => {
                let e = (0.0, PI);
                for k in 0..=m {
                    v.push(get(KernelKind::Cos, k, e));
                }
                if case == ThetaCase::Pi {
                    for k in (1..=m).rev() {
                        v.push(get(KernelKind::Sin, k, e));
                    }
                }
            }
        }
        assert_eq!(v.len(), len);
        v
    }

    #[test]
    fn gauge_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let cases: [(f64, usize); 8] = [
            (PI / 2.0, 1),
            (PI / 2.0, 2),
            (5.0 * PI / 4.0, 1),
            (5.0 * PI / 4.0, 2),
            (PI, 1),
            (PI, 2),
            (TWO_PI, 1),
            (TWO_PI, 2),
        ];
        for (theta1, m) in cases {
            let len = match theta_case(theta1) {
                ThetaCase::BelowPi | ThetaCase::AbovePi => 3 * m + 3,
                ThetaCase::Pi => 2 * m + 2,
                ThetaCase::TwoPi => m + 2,
            };
            for _ in 0..13 {
                let v: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
                let eq = m1_to_equation(&v, theta1, -1, 2).unwrap();
                let back = combination_vector(&eq, len);
                for (orig, rec) in v.iter().zip(&back) {
                    assert_relative_eq!(orig, rec, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn inversion_examples() {
        // zero vector -> zero equation
        let eq = m1_to_equation(&[0.0; 3], TWO_PI, -1, 2).unwrap();
        assert!(eq.q1().is_zero());
        assert_eq!(eq.p10(), 0.0);

        // full-period case: a lone doubled top-cosine coefficient inverts
        // to a unit cosine row
        let scale = ExponentPair::new(-1, 2).unwrap().scale();
        let eq = m1_to_equation(&[0.0, 0.0, 2.0 * scale], TWO_PI, -1, 2).unwrap();
        assert_relative_eq!(eq.q1().cos_coeff(Zone::Plus, 1), 1.0);
        assert_relative_eq!(eq.q1().cos_coeff(Zone::Plus, 0), 0.0);
    }

    #[test]
    fn realization_vector_round_trips_through_equation() {
        let record = realize_table1(1, TableColumn::Generic, 1).unwrap();
        let eq = m1_to_equation(&record.coefficients, PI / 2.0, -1, 2).unwrap();
        let back = combination_vector(&eq, record.coefficients.len());
        for (orig, rec) in record.coefficients.iter().zip(&back) {
            assert_relative_eq!(orig, rec, epsilon = 1e-12);
        }
    }

    #[test]
    fn sampled_equations_are_centers() {
        for (theta1, seed) in [
            (PI / 2.0, 0_u64),
            (PI / 2.0, 1),
            (5.0 * PI / 4.0, 2),
            (PI, 3),
            (TWO_PI, 4),
        ] {
            let eq = sample_center_equation(2, theta1, -1, 2, seed).unwrap();
            let check = center_conditions(&eq);
            assert!(check.holds, "theta1={theta1}, seed={seed}: {:?}", check.violations);
            let lc = m1_combination(&eq).unwrap();
            for rho in [0.4, 1.1, 2.7, 5.0] {
                assert!(lc.eval(rho).unwrap().abs() < 1e-10);
            }
            // top sine row forced away from zero
            assert!(eq.q1().sin_coeff(Zone::Plus, 2).abs() >= 0.3);
        }
    }

    #[test]
    fn half_period_sample_matches_additive_sine_rows() {
        let eq = sample_center_equation(2, PI, 3, 2, 9).unwrap();
        for k in 1..=2 {
            assert_eq!(
                eq.p1().sin_coeff(Zone::Plus, k),
                eq.p1().sin_coeff(Zone::Minus, k)
            );
        }
        assert!(center_conditions(&eq).holds);
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_center_equation(1, PI / 2.0, -1, 2, 7).unwrap();
        let b = sample_center_equation(1, PI / 2.0, -1, 2, 7).unwrap();
        assert_eq!(a.q1().table(Zone::Plus), b.q1().table(Zone::Plus));
        assert_eq!(a.p1().table(Zone::Minus), b.p1().table(Zone::Minus));
    }
}
