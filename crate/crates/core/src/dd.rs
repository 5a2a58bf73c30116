//! Double-double arithmetic: unevaluated sums `hi + lo` of two doubles,
//! giving roughly 31 significant digits.
//!
//! Used where plain f64 loses the answer to cancellation: Wronskian
//! determinants of large families, and kernel combinations whose
//! interpolation coefficients dwarf the combination itself.

/// An unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

/// Pi to double-double precision.
pub const PI: Dd = Dd { hi: std::f64::consts::PI, lo: 1.224_646_799_147_353_2e-16 };

/// Error-free sum: `a + b = s + e` exactly (Knuth).
#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

/// Error-free product via fused multiply-add: `a * b = p + e` exactly.
#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let e = a.mul_add(b, -p);
    (p, e)
}

impl Dd {
    #[inline]
    pub fn from_f64(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    #[inline]
    pub fn abs(self) -> Self {
        if self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0) {
            self.neg()
        } else {
            self
        }
    }

    #[inline]
    pub fn neg(self) -> Self {
        Dd { hi: -self.hi, lo: -self.lo }
    }

    #[inline]
    pub fn add(self, other: Dd) -> Self {
        let (s, e) = two_sum(self.hi, other.hi);
        let e = e + self.lo + other.lo;
        let (hi, lo) = two_sum(s, e);
        Dd { hi, lo }
    }

    #[inline]
    pub fn sub(self, other: Dd) -> Self {
        self.add(other.neg())
    }

    #[inline]
    pub fn mul(self, other: Dd) -> Self {
        let (p, e) = two_prod(self.hi, other.hi);
        let e = e + self.hi * other.lo + self.lo * other.hi;
        let (hi, lo) = two_sum(p, e);
        Dd { hi, lo }
    }

    /// Quotient accurate to double-double precision (one Newton step on the
    /// f64 estimate).
    #[inline]
    pub fn div(self, other: Dd) -> Self {
        let q1 = self.hi / other.hi;
        let r = self.sub(other.mul(Dd::from_f64(q1)));
        let q2 = r.to_f64() / other.hi;
        let (hi, lo) = two_sum(q1, q2);
        Dd { hi, lo }
    }

    /// Scale by a power of two (exact).
    #[inline]
    pub fn scale_exp2(self, e: i32) -> Self {
        let f = (e as f64).exp2();
        Dd { hi: self.hi * f, lo: self.lo * f }
    }

    /// Square root of a non-negative value (one Newton step in dd doubles
    /// the f64 seed's correct digits past double-double precision).
    pub fn sqrt(self) -> Self {
        if self.hi == 0.0 && self.lo == 0.0 {
            return Dd::from_f64(0.0);
        }
        let y = Dd::from_f64(self.hi.sqrt());
        y.add(self.div(y)).scale_exp2(-1)
    }

    /// Integer power by repeated squaring.
    pub fn powi(self, e: i32) -> Self {
        if e < 0 {
            return Dd::from_f64(1.0).div(self.powi(-e));
        }
        let mut acc = Dd::from_f64(1.0);
        let mut base = self;
        let mut e = e as u32;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(base);
            }
            base = base.mul(base);
            e >>= 1;
        }
        acc
    }

    /// `x^(t/2)` for positive `x`: the only exponents the kernel weights
    /// use are half-integers and integers.
    pub fn pow_half(self, t: i32) -> Self {
        if t % 2 == 0 {
            self.powi(t / 2)
        } else {
            self.powi(t).sqrt()
        }
    }

    /// Simultaneous sine and cosine via quarter-period reduction and a
    /// Taylor tail; adequate over the few periods the kernels span.
    pub fn sin_cos(self) -> (Dd, Dd) {
        let half_pi = PI.scale_exp2(-1);
        let n = (self.to_f64() / half_pi.to_f64()).round();
        let y = self.sub(half_pi.mul(Dd::from_f64(n)));
        let (s, c) = taylor_sin_cos(y);
        match (n as i64).rem_euclid(4) {
            0 => (s, c),
            1 => (c, s.neg()),
            2 => (s.neg(), c.neg()),
            _ => (c.neg(), s),
        }
    }
}

/// Taylor series on `|y| <= pi/4`, where a dozen terms reach 1e-35.
fn taylor_sin_cos(y: Dd) -> (Dd, Dd) {
    let y2 = y.mul(y).neg();
    let mut sin = y;
    let mut term = y;
    let mut k = 1.0_f64;
    loop {
        term = term.mul(y2).div(Dd::from_f64((k + 1.0) * (k + 2.0)));
        sin = sin.add(term);
        k += 2.0;
        if term.hi.abs() < 1e-35 {
            break;
        }
    }
    let mut cos = Dd::from_f64(1.0);
    let mut term = Dd::from_f64(1.0);
    let mut k = 0.0_f64;
    loop {
        term = term.mul(y2).div(Dd::from_f64((k + 1.0) * (k + 2.0)));
        cos = cos.add(term);
        k += 2.0;
        if term.hi.abs() < 1e-35 {
            break;
        }
    }
    (sin, cos)
}

/// Solve `A x = b` by Gaussian elimination with partial pivoting, entirely
/// in double-double. Returns `None` for a pivot collapsing to zero.
pub fn solve(mut a: Vec<Vec<Dd>>, mut b: Vec<Dd>) -> Option<Vec<Dd>> {
    let n = b.len();
    debug_assert!(a.len() == n && a.iter().all(|row| row.len() == n));
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            a[i][col].abs().hi.total_cmp(&a[j][col].abs().hi)
        })?;
        if a[pivot][col].hi == 0.0 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col].div(a[col][col]);
            for k in col..n {
                a[row][k] = a[row][k].sub(factor.mul(a[col][k]));
            }
            b[row] = b[row].sub(factor.mul(b[col]));
        }
    }
    let mut x = vec![Dd::from_f64(0.0); n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc = acc.sub(a[row][k].mul(x[k]));
        }
        x[row] = acc.div(a[row][row]);
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_cancelled_bits() {
        // (1 + 2^-40)^2 - 1 - 2^-39 = 2^-80 exactly; f64 alone loses it
        let x = Dd::from_f64(1.0).add(Dd::from_f64((-40.0f64).exp2()));
        let sq = x.mul(x);
        let r = sq
            .sub(Dd::from_f64(1.0))
            .sub(Dd::from_f64((-39.0f64).exp2()));
        assert_eq!(r.to_f64(), (-80.0f64).exp2());
    }

    #[test]
    fn division_round_trip() {
        let a = Dd::from_f64(std::f64::consts::PI);
        let b = Dd::from_f64(std::f64::consts::E);
        let q = a.div(b);
        let back = q.mul(b);
        let err = back.sub(a).to_f64().abs();
        assert!(err < 1e-30);
    }

    #[test]
    fn exact_scaling() {
        let a = Dd { hi: 3.0, lo: 1e-20 };
        let s = a.scale_exp2(-4);
        assert_eq!(s.hi, 3.0 / 16.0);
        assert_eq!(s.lo, 1e-20 / 16.0);
    }

    #[test]
    fn sqrt_squares_back() {
        let x = Dd::from_f64(2.0);
        let err = x.sqrt().mul(x.sqrt()).sub(x).to_f64().abs();
        assert!(err < 1e-31);
    }

    #[test]
    fn half_integer_powers() {
        let x = Dd::from_f64(0.3);
        let direct = x.pow_half(-1); // 0.3^(-1/2)
        let check = Dd::from_f64(1.0).div(x.sqrt());
        assert!(direct.sub(check).to_f64().abs() < 1e-31);
        let cube = x.pow_half(3); // 0.3^(3/2)
        assert!(cube.sub(x.mul(x.sqrt())).to_f64().abs() < 1e-31);
    }

    #[test]
    fn sin_cos_identity_along_a_period() {
        for i in 0..32 {
            let x = Dd::from_f64(i as f64 * 0.2);
            let (s, c) = x.sin_cos();
            let unit = s.mul(s).add(c.mul(c)).sub(Dd::from_f64(1.0));
            assert!(unit.to_f64().abs() < 1e-30);
            assert!((s.to_f64() - (i as f64 * 0.2).sin()).abs() < 1e-15);
            assert!((c.to_f64() - (i as f64 * 0.2).cos()).abs() < 1e-15);
        }
        let (s_pi, c_pi) = PI.sin_cos();
        assert!(s_pi.to_f64().abs() < 1e-30);
        assert!(c_pi.add(Dd::from_f64(1.0)).to_f64().abs() < 1e-30);
    }

    #[test]
    fn linear_solve_recovers_exact_solution() {
        // integer system with known inverse
        let a = vec![
            vec![Dd::from_f64(2.0), Dd::from_f64(1.0), Dd::from_f64(0.0)],
            vec![Dd::from_f64(1.0), Dd::from_f64(3.0), Dd::from_f64(1.0)],
            vec![Dd::from_f64(0.0), Dd::from_f64(1.0), Dd::from_f64(4.0)],
        ];
        let b = vec![Dd::from_f64(3.0), Dd::from_f64(5.0), Dd::from_f64(5.0)];
        let x = solve(a, b).unwrap();
        for (got, want) in x.iter().zip([1.0, 1.0, 1.0]) {
            assert!(got.sub(Dd::from_f64(want)).to_f64().abs() < 1e-30);
        }
    }
}
