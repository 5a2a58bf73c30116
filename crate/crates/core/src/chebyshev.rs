//! Extended-Chebyshev verification for the function families that carry
//! the displacement coefficients, plus certified zero counting.
//!
//! A family `(f_1, ..., f_N)` on a window is an extended Chebyshev system
//! when every nontrivial combination has at most `N - 1` zeros there. The
//! practical certificates used here are
//!
//! * continuous Wronskians of all prefixes, which must not vanish on the
//!   window (checked on a fine grid, up to the derivative-order cap of the
//!   kernel members);
//! * discrete alternants `det [f_i(x_j)]` at ordered point tuples, which
//!   must keep one sign (checked on sliding windows and random tuples);
//! * a randomized bound check: sign changes of random unit combinations on
//!   a grid never exceed `N - 1`.
//!
//! The same module provides the zero counter used to certify realized
//! combinations: adaptive grid refinement, bisection, and a slope test
//! that flags possibly-multiple zeros.

use crate::dd::Dd;
use crate::equation::PI;
use crate::error::{Error, Result};
use crate::quad::{eval_basis_drho_with, BasisTerm, QuadConfig, MAX_DRHO_ORDER};
use nalgebra::DMatrix;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::fmt;

/// One family member: either a trigonometric monomial in the angle or a
/// kernel integral in `rho`.
#[derive(Debug, Clone, PartialEq)]
pub enum Member {
    /// `theta^s * cos(k theta)` (`sin = false`) or `theta^s * sin(k theta)`
    /// (`sin = true`), with `s = 1` when `secular` is set, else `0`.
    Trig { sin: bool, k: usize, secular: bool },
    /// A kernel integral or pure power, as a function of `rho`.
    Kernel(BasisTerm),
}

impl Member {
    pub fn constant() -> Self {
        Member::Trig { sin: false, k: 0, secular: false }
    }

    pub fn cos(k: usize) -> Self {
        Member::Trig { sin: false, k, secular: false }
    }

    pub fn sin(k: usize) -> Self {
        Member::Trig { sin: true, k, secular: false }
    }

    pub fn theta_sin(k: usize) -> Self {
        Member::Trig { sin: true, k, secular: true }
    }

    pub fn value(&self, x: f64, cfg: &QuadConfig) -> Result<f64> {
        self.derivative(x, 0, cfg)
    }

    /// `d^order/dx^order` of the member at `x`.
    ///
    /// Trig members differentiate in closed form (`k^n` phase shifts plus
    /// one product-rule term for the secular factor); kernel members lower
    /// their exponent once per order, up to [`MAX_DRHO_ORDER`].
    pub fn derivative(&self, x: f64, order: usize, cfg: &QuadConfig) -> Result<f64> {
        match self {
            Member::Trig { sin, k, secular } => {
                let kf = *k as f64;
                // d^n of cos(k x) = k^n cos(k x + n pi/2); same shift for sin
                let phase = |n: usize| {
                    let arg = kf * x + n as f64 * PI / 2.0;
                    let amp = kf.powi(n as i32);
                    if *sin { amp * arg.sin() } else { amp * arg.cos() }
                };
                if !*secular {
                    // constant member: k = 0, cos branch
                    if *k == 0 {
                        return Ok(if order == 0 { if *sin { 0.0 } else { 1.0 } } else { 0.0 });
                    }
                    Ok(phase(order))
                } else {
                    // (x f)^{(n)} = x f^{(n)} + n f^{(n-1)}
                    let main = x * phase(order);
                    let extra = if order >= 1 {
                        order as f64 * phase(order - 1)
                    } else {
                        0.0
                    };
                    Ok(main + extra)
                }
            }
            Member::Kernel(term) => eval_basis_drho_with(term, x, order, cfg),
        }
    }

    /// Highest derivative order this member supports.
    pub fn max_order(&self) -> usize {
        match self {
            Member::Trig { .. } => usize::MAX,
            Member::Kernel(_) => MAX_DRHO_ORDER,
        }
    }
}

impl fmt::Display for Member {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Member::Trig { sin, k, secular } => {
                let head = if *secular { "t*" } else { "" };
                if *k == 0 && !*sin && !*secular {
                    write!(f, "1")
                } else if *sin {
                    write!(f, "{head}sin({k}t)")
                } else {
                    write!(f, "{head}cos({k}t)")
                }
            }
            Member::Kernel(term) => write!(f, "{term}"),
        }
    }
}

/// An ordered family on a window.
#[derive(Debug, Clone)]
pub struct FunctionFamily {
    pub label: String,
    pub members: Vec<Member>,
    pub window: (f64, f64),
}

impl FunctionFamily {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// `(1, cos t, sin t, t sin t, ..., cos nt, sin nt, t sin nt)` on `(0, pi)`.
pub fn trig_family(n: usize) -> FunctionFamily {
    let mut members = vec![Member::constant()];
    for k in 1..=n {
        members.push(Member::cos(k));
        members.push(Member::sin(k));
        members.push(Member::theta_sin(k));
    }
    FunctionFamily {
        label: format!("trig(n={n})"),
        members,
        window: (0.0, PI),
    }
}

/// Full triples up to `n0`, then bare cosines up to `k0`, then bare sines
/// descending from `k0` towards `l0 + 1` (stopping above `n0` so no sine
/// repeats), on `(0, pi)`. Requires `k0 > n0 >= 1` and `k0 > l0`.
pub fn trig_tail_family(n0: usize, k0: usize, l0: usize) -> Result<FunctionFamily> {
    if n0 < 1 || k0 <= n0 || k0 <= l0 {
        return Err(Error::Invalid(format!(
            "tail family requires k0 > n0 >= 1 and k0 > l0, got (n0, k0, l0) = ({n0}, {k0}, {l0})"
        )));
    }
    let mut members = vec![Member::constant()];
    for k in 1..=n0 {
        members.push(Member::cos(k));
        members.push(Member::sin(k));
        members.push(Member::theta_sin(k));
    }
    for k in (n0 + 1)..=k0 {
        members.push(Member::cos(k));
    }
    for k in ((l0.max(n0) + 1)..=k0).rev() {
        members.push(Member::sin(k));
    }
    Ok(FunctionFamily {
        label: format!("trig-tail(n0={n0},k0={k0},l0={l0})"),
        members,
        window: (0.0, PI),
    })
}

/// `(1, cos t, ..., cos nt, sin nt, ..., sin t)` on `(0, pi)`.
pub fn cos_sin_family(n: usize) -> FunctionFamily {
    let mut members = vec![Member::constant()];
    for k in 1..=n {
        members.push(Member::cos(k));
    }
    for k in (1..=n).rev() {
        members.push(Member::sin(k));
    }
    FunctionFamily {
        label: format!("cos-sin(n={n})"),
        members,
        window: (0.0, PI),
    }
}

/// Layout of a two-interval kernel family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitVariant {
    /// cosines and sines on the first interval, cosines on the second
    Plain,
    /// secular kernels on the first interval only
    DFirst,
    /// secular kernels on both intervals
    DBoth,
}

fn require_non_integer(beta: f64) -> Result<()> {
    if beta.fract() == 0.0 {
        return Err(Error::IntegerBeta { beta });
    }
    Ok(())
}

/// Kernel family over the split `[0, split] | [split, pi]`, as functions of
/// `rho` on `window`.
///
/// Block layout per variant, writing `J1 = [0, split]`, `J2 = [split, pi]`:
///
/// * `Plain`: `C_0..C_n | S_n..S_1` on `J1`, then `C_0..C_n` on `J2`;
/// * `DFirst`: `C_0, (C_k, S_k, D_k)_{k<m}, C_m..C_n, S_n..S_m` on `J1`,
///   then `C_0..C_n` on `J2`;
/// * `DBoth`: the same `J1` block, then the `J1` block without its trailing
///   sine run on `J2`.
///
/// A split at `0` or `pi` drops the empty interval's block. The exponent
/// must not be an integer.
pub fn kernel_split_family(
    variant: SplitVariant,
    m: usize,
    n: usize,
    beta: f64,
    split: f64,
    window: (f64, f64),
) -> Result<FunctionFamily> {
    require_non_integer(beta)?;
    if m < 1 || n < m {
        return Err(Error::Invalid(format!(
            "split family requires n >= m >= 1, got (m, n) = ({m}, {n})"
        )));
    }
    if !(0.0..=PI + 1e-12).contains(&split) {
        return Err(Error::Invalid(format!("split {split} outside [0, pi]")));
    }
    let j1 = (0.0, split);
    let j2 = (split, PI);
    let tol = 1e-12;
    let j1_empty = split <= tol;
    let j2_empty = split >= PI - tol;

    let full_block = |iv: (f64, f64), members: &mut Vec<Member>| match variant {
        SplitVariant::Plain => {
            for k in 0..=n {
                members.push(Member::Kernel(BasisTerm::cos(k, beta, iv)));
            }
            for k in (1..=n).rev() {
                members.push(Member::Kernel(BasisTerm::sin(k, beta, iv)));
            }
        }
        SplitVariant::DFirst | SplitVariant::DBoth => {
            members.push(Member::Kernel(BasisTerm::cos(0, beta, iv)));
            for k in 1..m {
                members.push(Member::Kernel(BasisTerm::cos(k, beta, iv)));
                members.push(Member::Kernel(BasisTerm::sin(k, beta, iv)));
                members.push(Member::Kernel(BasisTerm::theta_sin(k, beta, iv)));
            }
            for k in m..=n {
                members.push(Member::Kernel(BasisTerm::cos(k, beta, iv)));
            }
            for k in (m..=n).rev() {
                members.push(Member::Kernel(BasisTerm::sin(k, beta, iv)));
            }
        }
    };
    let second_block = |iv: (f64, f64), members: &mut Vec<Member>| match variant {
        SplitVariant::Plain | SplitVariant::DFirst => {
            for k in 0..=n {
                members.push(Member::Kernel(BasisTerm::cos(k, beta, iv)));
            }
        }
        SplitVariant::DBoth => {
            members.push(Member::Kernel(BasisTerm::cos(0, beta, iv)));
            for k in 1..m {
                members.push(Member::Kernel(BasisTerm::cos(k, beta, iv)));
                members.push(Member::Kernel(BasisTerm::sin(k, beta, iv)));
                members.push(Member::Kernel(BasisTerm::theta_sin(k, beta, iv)));
            }
            for k in m..=n {
                members.push(Member::Kernel(BasisTerm::cos(k, beta, iv)));
            }
        }
    };

    let mut members = Vec::new();
    if !j1_empty {
        full_block(j1, &mut members);
    }
    if !j2_empty {
        if j1_empty {
            // the second interval inherits the full block when it is alone
            full_block(j2, &mut members);
        } else {
            second_block(j2, &mut members);
        }
    }
    Ok(FunctionFamily {
        label: format!("kernel-split-{variant:?}(m={m},n={n},beta={beta},split={split:.4})"),
        members,
        window,
    })
}

/// `(1, |rho|^beta, |rho+2|^beta, C_0..C_{2m-1}, S_{2m-1}..S_1)` over
/// `[0, pi]`, as functions of `rho` on `window`. The exponent must not be
/// an integer.
pub fn kernel_axis_family(m: usize, beta: f64, window: (f64, f64)) -> Result<FunctionFamily> {
    require_non_integer(beta)?;
    if m < 1 {
        return Err(Error::Invalid("axis family requires m >= 1".into()));
    }
    let e = (0.0, PI);
    let mut members = vec![
        Member::constant(),
        Member::Kernel(BasisTerm::pow_rho(beta)),
        Member::Kernel(BasisTerm::pow_rho_plus2(beta)),
    ];
    for k in 0..=(2 * m - 1) {
        members.push(Member::Kernel(BasisTerm::cos(k, beta, e)));
    }
    for k in (1..=(2 * m - 1)).rev() {
        members.push(Member::Kernel(BasisTerm::sin(k, beta, e)));
    }
    Ok(FunctionFamily {
        label: format!("kernel-axis(m={m},beta={beta})"),
        members,
        window,
    })
}

// ---------------------------------------------------------------------------
// determinants
// ---------------------------------------------------------------------------

/// Size above which elimination switches to double-double arithmetic.
const DD_THRESHOLD: usize = 10;

/// Determinant by partial-pivoted elimination with exact power-of-two row
/// scaling; double-double arithmetic above [`DD_THRESHOLD`].
pub fn determinant(mat: &DMatrix<f64>) -> f64 {
    let n = mat.nrows();
    assert_eq!(n, mat.ncols(), "determinant needs a square matrix");
    if n == 0 {
        return 1.0;
    }
    if n <= DD_THRESHOLD {
        det_f64(mat)
    } else {
        det_dd(mat)
    }
}

fn det_f64(mat: &DMatrix<f64>) -> f64 {
    let n = mat.nrows();
    let mut a = mat.clone();
    let mut exp_sum: i32 = 0;
    for i in 0..n {
        let row_max = (0..n).map(|j| a[(i, j)].abs()).fold(0.0, f64::max);
        if row_max == 0.0 {
            return 0.0;
        }
        let e = row_max.log2().floor() as i32;
        let s = (-e as f64).exp2();
        for j in 0..n {
            a[(i, j)] *= s;
        }
        exp_sum += e;
    }
    let mut sign = 1.0;
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r1, &r2| a[(r1, col)].abs().total_cmp(&a[(r2, col)].abs()))
            .unwrap();
        if a[(pivot_row, col)] == 0.0 {
            return 0.0;
        }
        if pivot_row != col {
            a.swap_rows(pivot_row, col);
            sign = -sign;
        }
        let pivot = a[(col, col)];
        for r in (col + 1)..n {
            let factor = a[(r, col)] / pivot;
            for c in col..n {
                a[(r, c)] -= factor * a[(col, c)];
            }
        }
    }
    let mut det = sign;
    for i in 0..n {
        det *= a[(i, i)];
    }
    det * (exp_sum as f64).exp2()
}

fn det_dd(mat: &DMatrix<f64>) -> f64 {
    let n = mat.nrows();
    let mut a: Vec<Vec<Dd>> = (0..n)
        .map(|i| (0..n).map(|j| Dd::from_f64(mat[(i, j)])).collect())
        .collect();
    let mut exp_sum: i32 = 0;
    for row in a.iter_mut() {
        let row_max = row.iter().map(|v| v.hi.abs()).fold(0.0, f64::max);
        if row_max == 0.0 {
            return 0.0;
        }
        let e = row_max.log2().floor() as i32;
        for v in row.iter_mut() {
            *v = v.scale_exp2(-e);
        }
        exp_sum += e;
    }
    let mut sign = 1.0;
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r1, &r2| a[r1][col].abs().hi.total_cmp(&a[r2][col].abs().hi))
            .unwrap();
        if a[pivot_row][col].hi == 0.0 && a[pivot_row][col].lo == 0.0 {
            return 0.0;
        }
        if pivot_row != col {
            a.swap(pivot_row, col);
            sign = -sign;
        }
        let pivot = a[col][col];
        for r in (col + 1)..n {
            let factor = a[r][col].div(pivot);
            for c in col..n {
                let delta = factor.mul(a[col][c]);
                a[r][c] = a[r][c].sub(delta);
            }
        }
    }
    let mut det = Dd::from_f64(sign);
    for (i, row) in a.iter().enumerate() {
        det = det.mul(row[i]);
    }
    det.to_f64() * (exp_sum as f64).exp2()
}

// ---------------------------------------------------------------------------
// Wronskian verification
// ---------------------------------------------------------------------------

/// Summary of one determinant family (one prefix size).
#[derive(Debug, Clone)]
pub struct WronskianStat {
    pub size: usize,
    pub min_abs: f64,
    pub max_abs: f64,
    /// sign flips along the sample sequence (must be 0 for a Chebyshev
    /// system)
    pub sign_changes: usize,
    pub samples: usize,
}

fn stat_from(size: usize, dets: &[f64]) -> WronskianStat {
    let mut min_abs = f64::INFINITY;
    let mut max_abs = 0.0_f64;
    let mut sign_changes = 0;
    let mut last_sign = 0.0;
    for &d in dets {
        min_abs = min_abs.min(d.abs());
        max_abs = max_abs.max(d.abs());
        let s = if d > 0.0 {
            1.0
        } else if d < 0.0 {
            -1.0
        } else {
            0.0
        };
        if s == 0.0 || (last_sign != 0.0 && s != last_sign) {
            sign_changes += 1;
        }
        if s != 0.0 {
            last_sign = s;
        }
    }
    WronskianStat {
        size,
        min_abs,
        max_abs,
        sign_changes,
        samples: dets.len(),
    }
}

/// Verification settings.
#[derive(Debug, Clone)]
pub struct EctOptions {
    /// grid resolution inside the window
    pub grid: usize,
    /// random ordered tuples per prefix size (on top of sliding windows)
    pub tuples_per_size: usize,
    pub seed: u64,
}

impl Default for EctOptions {
    fn default() -> Self {
        Self { grid: 400, tuples_per_size: 32, seed: 7 }
    }
}

/// Full verification record for one family.
#[derive(Debug, Clone)]
pub struct WronskianReport {
    pub label: String,
    pub size: usize,
    pub continuous: Vec<WronskianStat>,
    /// prefix sizes whose continuous Wronskian exceeds the derivative cap
    pub continuous_skipped: Vec<usize>,
    pub discrete: Vec<WronskianStat>,
    pub ect_confirmed: bool,
}

/// Check the extended-Chebyshev certificates for `family`.
///
/// Continuous Wronskians are evaluated for every prefix whose order demand
/// stays within the members' derivative cap; discrete alternants cover all
/// prefix sizes. The report's `ect_confirmed` is true when no determinant
/// vanished or changed sign anywhere.
pub fn verify_ect(family: &FunctionFamily, opts: &EctOptions) -> Result<WronskianReport> {
    let n = family.members.len();
    let (a, b) = family.window;
    assert!(b > a, "window must have positive length");
    if opts.grid < n {
        return Err(Error::Invalid(format!(
            "grid of {} cannot seat alternants for a family of {n}",
            opts.grid
        )));
    }
    let cfg = QuadConfig::default();
    let xs: Vec<f64> = (0..opts.grid)
        .map(|i| a + (i as f64 + 0.5) * (b - a) / opts.grid as f64)
        .collect();

    // continuous prefix cap: a size-j Wronskian needs orders up to j-1
    let mut cont_sizes = Vec::new();
    let mut continuous_skipped = Vec::new();
    let mut min_order_cap = usize::MAX;
    for (i, mem) in family.members.iter().enumerate() {
        min_order_cap = min_order_cap.min(mem.max_order());
        let j = i + 1;
        if j <= min_order_cap.saturating_add(1) {
            cont_sizes.push(j);
        } else {
            continuous_skipped.push(j);
        }
    }
    let j_cont = cont_sizes.len();

    // per-point derivative tables and leading-minor determinants
    let per_point: Result<Vec<Vec<f64>>> = xs
        .par_iter()
        .map(|&x| {
            let mut table = DMatrix::zeros(j_cont, j_cont);
            for i in 0..j_cont {
                for l in 0..j_cont {
                    table[(i, l)] = family.members[i].derivative(x, l, &cfg)?;
                }
            }
            let mut dets = Vec::with_capacity(j_cont);
            for j in 1..=j_cont {
                dets.push(determinant(&table.view((0, 0), (j, j)).into_owned()));
            }
            Ok(dets)
        })
        .collect();
    let per_point = per_point?;
    let continuous: Vec<WronskianStat> = (0..j_cont)
        .map(|jm1| {
            let series: Vec<f64> = per_point.iter().map(|d| d[jm1]).collect();
            stat_from(jm1 + 1, &series)
        })
        .collect();

    // discrete alternants on member value tables, rows normalized
    let values: Result<Vec<Vec<f64>>> = family
        .members
        .par_iter()
        .map(|mem| xs.iter().map(|&x| mem.value(x, &cfg)).collect())
        .collect();
    let values = values?;
    let scales: Vec<f64> = values
        .iter()
        .map(|row| row.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-300))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut discrete = Vec::with_capacity(n);
    for j in 1..=n {
        let mut tuples: Vec<Vec<usize>> = Vec::new();
        // sliding windows of j consecutive grid points
        let starts = opts.grid.saturating_sub(j);
        let stride = (starts / 48).max(1);
        let mut start = 0;
        while start + j <= opts.grid {
            tuples.push((start..start + j).collect());
            start += stride;
        }
        // random ordered tuples
        for _ in 0..opts.tuples_per_size {
            let mut idx = rand::seq::index::sample(&mut rng, opts.grid, j).into_vec();
            idx.sort_unstable();
            tuples.push(idx);
        }
        let dets: Vec<f64> = tuples
            .par_iter()
            .map(|idx| {
                let mat =
                    DMatrix::from_fn(j, j, |r, c| values[r][idx[c]] / scales[r]);
                determinant(&mat)
            })
            .collect();
        discrete.push(stat_from(j, &dets));
    }

    let clean = |stats: &[WronskianStat]| {
        stats
            .iter()
            .all(|s| s.sign_changes == 0 && s.min_abs > 0.0)
    };
    let ect_confirmed = clean(&continuous) && clean(&discrete);
    Ok(WronskianReport {
        label: family.label.clone(),
        size: n,
        continuous,
        continuous_skipped,
        discrete,
        ect_confirmed,
    })
}

// ---------------------------------------------------------------------------
// zero counting
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct ZeroSearchOptions {
    pub initial_grid: usize,
    pub max_grid: usize,
    /// bisection width at which a zero is accepted
    pub bisect_tol: f64,
    /// slope magnitude below which a zero is flagged possibly multiple
    pub slope_floor: f64,
}

impl Default for ZeroSearchOptions {
    fn default() -> Self {
        Self {
            initial_grid: 2048,
            max_grid: 1 << 16,
            bisect_tol: 1e-10,
            slope_floor: 1e-8,
        }
    }
}

/// Result of a zero search over one interval.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ZeroReport {
    pub interval: (f64, f64),
    pub count: usize,
    pub zeros: Vec<f64>,
    /// indices into `zeros` whose local slope fell below the floor —
    /// possibly multiple rather than simple crossings
    pub flagged: Vec<usize>,
    /// true when the bracket count was stable under grid doubling
    pub certified: bool,
    pub grid_used: usize,
}

impl ZeroReport {
    /// Zeros that crossed with a clear slope.
    pub fn simple_count(&self) -> usize {
        self.count - self.flagged.len()
    }
}

/// Count and locate the sign-change zeros of `f` on `interval`.
///
/// The bracket count is computed on midpoint grids of doubling resolution
/// until it repeats twice (or the grid cap is reached); each bracket is
/// then bisected to [`ZeroSearchOptions::bisect_tol`]. The report is
/// certified when the count stabilized; zeros whose local slope falls
/// below the floor are listed in `flagged` as possibly multiple.
pub fn count_zeros<F>(f: &F, interval: (f64, f64), opts: &ZeroSearchOptions) -> Result<ZeroReport>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let (a, b) = interval;
    assert!(b > a, "zero search interval must have positive length");
    let mut grid = opts.initial_grid;
    let mut counts: Vec<usize> = Vec::new();
    let mut brackets: Vec<(f64, f64)> = Vec::new();
    let mut stable = false;
    loop {
        let xs: Vec<f64> = (0..grid)
            .map(|i| a + (i as f64 + 0.5) * (b - a) / grid as f64)
            .collect();
        let vals: Result<Vec<f64>> = xs.par_iter().map(|&x| f(x)).collect();
        let vals = vals?;
        brackets.clear();
        for i in 0..grid - 1 {
            if vals[i] == 0.0 {
                brackets.push((xs[i], xs[i]));
            } else if vals[i] * vals[i + 1] < 0.0 {
                brackets.push((xs[i], xs[i + 1]));
            }
        }
        if vals[grid - 1] == 0.0 {
            brackets.push((xs[grid - 1], xs[grid - 1]));
        }
        counts.push(brackets.len());
        let l = counts.len();
        if l >= 3 && counts[l - 1] == counts[l - 2] && counts[l - 2] == counts[l - 3] {
            stable = true;
            break;
        }
        if grid >= opts.max_grid {
            break;
        }
        grid *= 2;
    }

    let zeros: Result<Vec<f64>> = brackets
        .par_iter()
        .map(|&(mut lo, mut hi)| {
            if lo == hi {
                return Ok(lo);
            }
            let mut flo = f(lo)?;
            for _ in 0..200 {
                if hi - lo <= opts.bisect_tol {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                let fm = f(mid)?;
                if fm == 0.0 {
                    return Ok(mid);
                }
                if flo * fm < 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    flo = fm;
                }
            }
            Ok(0.5 * (lo + hi))
        })
        .collect();
    let zeros = zeros?;

    // slope check: central difference wide enough to beat evaluation noise
    let h = 1e-6 * (b - a).max(1.0);
    let mut flagged = Vec::new();
    for (i, &z) in zeros.iter().enumerate() {
        let up = f((z + h).min(b))?;
        let dn = f((z - h).max(a))?;
        let slope = (up - dn) / ((z + h).min(b) - (z - h).max(a));
        if slope.abs() < opts.slope_floor {
            flagged.push(i);
        }
    }
    Ok(ZeroReport {
        interval,
        count: zeros.len(),
        zeros,
        flagged,
        certified: stable,
        grid_used: grid,
    })
}

// ---------------------------------------------------------------------------
// randomized bound check
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct BoundCheckOptions {
    pub grid: usize,
    pub trials: usize,
    pub seed: u64,
}

impl Default for BoundCheckOptions {
    fn default() -> Self {
        Self { grid: 400, trials: 1000, seed: 11 }
    }
}

#[derive(Debug, Clone)]
pub struct BoundCheckReport {
    pub label: String,
    pub family_size: usize,
    pub trials: usize,
    /// the Chebyshev bound `size - 1`
    pub bound: usize,
    pub max_zeros_observed: usize,
    pub ok: bool,
}

/// Draw random unit-norm combinations of the family and count their grid
/// sign changes — a lower bound for their zero count, which must never
/// exceed `size - 1`.
pub fn cheb_bound_check(
    family: &FunctionFamily,
    opts: &BoundCheckOptions,
) -> Result<BoundCheckReport> {
    let n = family.members.len();
    let (a, b) = family.window;
    let cfg = QuadConfig::default();
    let xs: Vec<f64> = (0..opts.grid)
        .map(|i| a + (i as f64 + 0.5) * (b - a) / opts.grid as f64)
        .collect();
    let values: Result<Vec<Vec<f64>>> = family
        .members
        .par_iter()
        .map(|mem| xs.iter().map(|&x| mem.value(x, &cfg)).collect())
        .collect();
    let values = values?;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut max_observed = 0usize;
    for _ in 0..opts.trials {
        let mut coeffs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        for c in coeffs.iter_mut() {
            *c /= norm;
        }
        let mut changes = 0usize;
        let mut last = 0.0_f64;
        for g in 0..opts.grid {
            let v: f64 = (0..n).map(|i| coeffs[i] * values[i][g]).sum();
            if last != 0.0 && v != 0.0 && v.signum() != last.signum() {
                changes += 1;
            }
            if v != 0.0 {
                last = v;
            }
        }
        max_observed = max_observed.max(changes);
    }
    Ok(BoundCheckReport {
        label: family.label.clone(),
        family_size: n,
        trials: opts.trials,
        bound: n.saturating_sub(1),
        max_zeros_observed: max_observed,
        ok: max_observed <= n.saturating_sub(1),
    })
}
