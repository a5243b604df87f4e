//! Double-double (about 106 bits) and quad-double (about 212 bits)
//! arithmetic.
//!
//! Only the operations needed by the Faddeev recursion are provided:
//! addition, subtraction, and multiplication by an `f64`. The algorithms are
//! the error-free transformations of Hida, Li and Bailey's QD library.

use std::ops::{Add, Neg, Sub};

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let e = b - (s - a);
    (s, e)
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let e = a.mul_add(b, -p);
    (p, e)
}

#[inline]
fn three_sum(a: f64, b: f64, c: f64) -> (f64, f64, f64) {
    let (t1, t2) = two_sum(a, b);
    let (a, t3) = two_sum(c, t1);
    let (b, c) = two_sum(t2, t3);
    (a, b, c)
}

#[inline]
fn three_sum2(a: f64, b: f64, c: f64) -> (f64, f64) {
    let (t1, t2) = two_sum(a, b);
    let (a, t3) = two_sum(c, t1);
    (a, t2 + t3)
}

/// Accumulates `c` into the running pair `(a, b)`; returns a finished limb
/// when one becomes available.
#[inline]
fn quick_three_accum(a: &mut f64, b: &mut f64, c: f64) -> f64 {
    let (s, bb) = two_sum(*b, c);
    let (s, aa) = two_sum(*a, s);
    let za = aa != 0.0;
    let zb = bb != 0.0;
    if za && zb {
        *a = aa;
        *b = bb;
        return s;
    }
    if !zb {
        *b = aa;
        *a = s;
    } else {
        *a = s;
        *b = bb;
    }
    0.0
}

fn renorm4(c0: f64, c1: f64, c2: f64, c3: f64) -> [f64; 4] {
    let (s0, c3) = quick_two_sum(c2, c3);
    let (s0, c2) = quick_two_sum(c1, s0);
    let (c0, c1) = quick_two_sum(c0, s0);

    let (mut s0, mut s1) = (c0, c1);
    let (mut s2, mut s3) = (0.0, 0.0);
    if s1 != 0.0 {
        let (a, b) = quick_two_sum(s1, c2);
        s1 = a;
        s2 = b;
        if s2 != 0.0 {
            let (a, b) = quick_two_sum(s2, c3);
            s2 = a;
            s3 = b;
        } else {
            let (a, b) = quick_two_sum(s1, c3);
            s1 = a;
            s2 = b;
        }
    } else {
        let (a, b) = quick_two_sum(s0, c2);
        s0 = a;
        s1 = b;
        if s1 != 0.0 {
            let (a, b) = quick_two_sum(s1, c3);
            s1 = a;
            s2 = b;
        } else {
            let (a, b) = quick_two_sum(s0, c3);
            s0 = a;
            s1 = b;
        }
    }
    [s0, s1, s2, s3]
}

fn renorm5(c0: f64, c1: f64, c2: f64, c3: f64, c4: f64) -> [f64; 4] {
    let (s0, c4) = quick_two_sum(c3, c4);
    let (s0, c3) = quick_two_sum(c2, s0);
    let (s0, c2) = quick_two_sum(c1, s0);
    let (c0, c1) = quick_two_sum(c0, s0);

    let (mut s0, mut s1) = (c0, c1);
    let (mut s2, mut s3) = (0.0, 0.0);
    if s1 != 0.0 {
        let (a, b) = quick_two_sum(s1, c2);
        s1 = a;
        s2 = b;
        if s2 != 0.0 {
            let (a, b) = quick_two_sum(s2, c3);
            s2 = a;
            s3 = b;
            if s3 != 0.0 {
                s3 += c4;
            } else {
                let (a, b) = quick_two_sum(s2, c4);
                s2 = a;
                s3 = b;
            }
        } else {
            let (a, b) = quick_two_sum(s1, c3);
            s1 = a;
            s2 = b;
            if s2 != 0.0 {
                let (a, b) = quick_two_sum(s2, c4);
                s2 = a;
                s3 = b;
            } else {
                let (a, b) = quick_two_sum(s1, c4);
                s1 = a;
                s2 = b;
            }
        }
    } else {
        let (a, b) = quick_two_sum(s0, c2);
        s0 = a;
        s1 = b;
        if s1 != 0.0 {
            let (a, b) = quick_two_sum(s1, c3);
            s1 = a;
            s2 = b;
            if s2 != 0.0 {
                let (a, b) = quick_two_sum(s2, c4);
                s2 = a;
                s3 = b;
            } else {
                let (a, b) = quick_two_sum(s1, c4);
                s1 = a;
                s2 = b;
            }
        } else {
            let (a, b) = quick_two_sum(s0, c3);
            s0 = a;
            s1 = b;
            if s1 != 0.0 {
                let (a, b) = quick_two_sum(s1, c4);
                s1 = a;
                s2 = b;
            } else {
                let (a, b) = quick_two_sum(s0, c4);
                s0 = a;
                s1 = b;
            }
        }
    }
    [s0, s1, s2, s3]
}

/// A double-double number `hi + lo` with `|lo| <= ulp(hi) / 2`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
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
    pub fn add_dd(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }

    #[inline]
    pub fn mul_f64(self, b: f64) -> Dd {
        let (p, e) = two_prod(self.hi, b);
        let (hi, lo) = quick_two_sum(p, self.lo.mul_add(b, e));
        Dd { hi, lo }
    }
}

/// A quad-double number: the unevaluated sum of four `f64` limbs of
/// decreasing magnitude.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Qd(pub [f64; 4]);

impl Qd {
    pub const ZERO: Qd = Qd([0.0; 4]);

    #[inline]
    pub fn from_f64(x: f64) -> Self {
        Qd([x, 0.0, 0.0, 0.0])
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        // Limbs are non-overlapping, so summing from the tail is exact enough.
        self.0[0] + (self.0[1] + (self.0[2] + self.0[3]))
    }

    /// Exact-in-the-limbs product with a double, rounded back to four limbs.
    #[inline]
    pub fn mul_f64(self, b: f64) -> Self {
        let a = self.0;
        let (p0, q0) = two_prod(a[0], b);
        let (p1, q1) = two_prod(a[1], b);
        let (p2, q2) = two_prod(a[2], b);
        let p3 = a[3] * b;

        let s0 = p0;
        let (s1, s2) = two_sum(q0, p1);
        let (s2, q1, p2) = three_sum(s2, q1, p2);
        let (q1, q2) = three_sum2(q1, q2, p3);
        let s3 = q1;
        let s4 = q2 + p2;
        Qd(renorm5(s0, s1, s2, s3, s4))
    }

    /// Product of two expansions, accurate to roughly quad-double.
    pub fn mul_qd(self, other: Qd) -> Qd {
        other.0.iter().fold(Qd::ZERO, |acc, &b| acc.add_qd(self.mul_f64(b)))
    }

    /// IEEE-style addition: merges both expansions by magnitude so that the
    /// error is bounded relative to the result even under cancellation.
    pub fn add_qd(self, other: Qd) -> Qd {
        let a = self.0;
        let b = other.0;
        let mut x = [0.0f64; 4];
        let (mut i, mut j, mut k) = (0usize, 0usize, 0usize);

        let take = |i: &mut usize, j: &mut usize| -> f64 {
            if *i >= 4 {
                *j += 1;
                b[*j - 1]
            } else if *j >= 4 {
                *i += 1;
                a[*i - 1]
            } else if a[*i].abs() > b[*j].abs() {
                *i += 1;
                a[*i - 1]
            } else {
                *j += 1;
                b[*j - 1]
            }
        };

        let u0 = take(&mut i, &mut j);
        let v0 = take(&mut i, &mut j);
        let (mut u, mut v) = quick_two_sum(u0, v0);

        while k < 4 {
            if i >= 4 && j >= 4 {
                x[k] = u;
                if k < 3 {
                    k += 1;
                    x[k] = v;
                }
                break;
            }
            let t = take(&mut i, &mut j);
            let s = quick_three_accum(&mut u, &mut v, t);
            if s != 0.0 {
                x[k] = s;
                k += 1;
            }
        }
        for &ak in a.iter().skip(i) {
            x[3] += ak;
        }
        for &bk in b.iter().skip(j) {
            x[3] += bk;
        }
        Qd(renorm4(x[0], x[1], x[2], x[3]))
    }
}

impl Add for Qd {
    type Output = Qd;
    #[inline]
    fn add(self, rhs: Qd) -> Qd {
        self.add_qd(rhs)
    }
}

impl Neg for Qd {
    type Output = Qd;
    #[inline]
    fn neg(self) -> Qd {
        Qd([-self.0[0], -self.0[1], -self.0[2], -self.0[3]])
    }
}

impl Sub for Qd {
    type Output = Qd;
    #[inline]
    fn sub(self, rhs: Qd) -> Qd {
        self.add_qd(-rhs)
    }
}

/// Scalar type used by the series recursion: plain `f64` or [`Qd`].
pub trait Real: Copy + Send + Sync + Default + std::fmt::Debug + 'static {
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    fn add(self, o: Self) -> Self;
    fn sub(self, o: Self) -> Self;
    fn mul_f64(self, b: f64) -> Self;
    fn to_qd(self) -> Qd;
}

impl Real for f64 {
    #[inline]
    fn from_f64(x: f64) -> Self {
        x
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
    #[inline]
    fn add(self, o: Self) -> Self {
        self + o
    }
    #[inline]
    fn sub(self, o: Self) -> Self {
        self - o
    }
    #[inline]
    fn mul_f64(self, b: f64) -> Self {
        self * b
    }
    fn to_qd(self) -> Qd {
        Qd::from_f64(self)
    }
}

impl Real for Dd {
    #[inline]
    fn from_f64(x: f64) -> Self {
        Dd::from_f64(x)
    }
    #[inline]
    fn to_f64(self) -> f64 {
        Dd::to_f64(self)
    }
    #[inline]
    fn add(self, o: Self) -> Self {
        self.add_dd(o)
    }
    #[inline]
    fn sub(self, o: Self) -> Self {
        self.add_dd(Dd { hi: -o.hi, lo: -o.lo })
    }
    #[inline]
    fn mul_f64(self, b: f64) -> Self {
        Dd::mul_f64(self, b)
    }
    fn to_qd(self) -> Qd {
        Qd([self.hi, self.lo, 0.0, 0.0])
    }
}

impl Real for Qd {
    #[inline]
    fn from_f64(x: f64) -> Self {
        Qd::from_f64(x)
    }
    #[inline]
    fn to_f64(self) -> f64 {
        Qd::to_f64(self)
    }
    #[inline]
    fn add(self, o: Self) -> Self {
        self.add_qd(o)
    }
    #[inline]
    fn sub(self, o: Self) -> Self {
        self.add_qd(-o)
    }
    #[inline]
    fn mul_f64(self, b: f64) -> Self {
        Qd::mul_f64(self, b)
    }
    fn to_qd(self) -> Qd {
        self
    }
}

/// Complex number over a [`Real`] scalar. Multiplication is only defined
/// against `Complex64`, which is all the recursion needs.
#[derive(Debug, Clone, Copy, Default)]
pub struct Cx<R: Real> {
    pub re: R,
    pub im: R,
}

impl<R: Real> Cx<R> {
    #[inline]
    pub fn zero() -> Self {
        Self::default()
    }

    #[inline]
    pub fn from_c64(z: num_complex::Complex64) -> Self {
        Self { re: R::from_f64(z.re), im: R::from_f64(z.im) }
    }

    #[inline]
    pub fn to_c64(self) -> num_complex::Complex64 {
        num_complex::Complex64::new(self.re.to_f64(), self.im.to_f64())
    }

    #[inline]
    pub fn add(self, o: Self) -> Self {
        Self { re: self.re.add(o.re), im: self.im.add(o.im) }
    }

    #[inline]
    pub fn sub(self, o: Self) -> Self {
        Self { re: self.re.sub(o.re), im: self.im.sub(o.im) }
    }

    #[inline]
    pub fn scale(self, s: f64) -> Self {
        Self { re: self.re.mul_f64(s), im: self.im.mul_f64(s) }
    }

    #[inline]
    pub fn mul_c64(self, w: num_complex::Complex64) -> Self {
        Self {
            re: self.re.mul_f64(w.re).sub(self.im.mul_f64(w.im)),
            im: self.re.mul_f64(w.im).add(self.im.mul_f64(w.re)),
        }
    }

    /// Multiplies by `i`.
    #[inline]
    pub fn mul_i(self) -> Self {
        Self { re: R::default().sub(self.im), im: self.re }
    }

    #[inline]
    pub fn conj(self) -> Self {
        Self { re: self.re, im: R::default().sub(self.im) }
    }

    #[inline]
    pub fn to_qd(self) -> Cx<Qd> {
        Cx { re: self.re.to_qd(), im: self.im.to_qd() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn double_double_keeps_small_addend() {
        let a = Dd::from_f64(1.0).add_dd(Dd::from_f64(1e-20));
        let b = a.add_dd(Dd::from_f64(-1.0));
        assert_eq!(b.to_f64(), 1e-20);
        let c = Dd::from_f64(1.0 / 3.0).mul_f64(3.0).add_dd(Dd::from_f64(-1.0));
        // fl(1/3) * 3 = 1 - 2^-54 exactly.
        assert_eq!(c.to_f64(), -(2f64.powi(-54)));
    }

    #[test]
    fn small_integers_are_exact() {
        let a = Qd::from_f64(3.0);
        let b = Qd::from_f64(-5.0);
        assert_eq!((a + b).to_f64(), -2.0);
        assert_eq!(a.mul_f64(7.0).to_f64(), 21.0);
    }

    #[test]
    fn recovers_bits_lost_in_double() {
        // (1 + 2^-80) - 1 is zero in f64 but exact here.
        let tiny = 2f64.powi(-80);
        let s = Qd::from_f64(1.0) + Qd::from_f64(tiny);
        let d = s - Qd::from_f64(1.0);
        assert_eq!(d.to_f64(), tiny);
    }

    #[test]
    fn cancellation_keeps_low_limbs() {
        let third = Qd::from_f64(1.0).mul_f64(1.0 / 3.0);
        let big = Qd::from_f64(1e30) + third;
        let back = big - Qd::from_f64(1e30);
        assert!((back.to_f64() - 1.0 / 3.0).abs() < 1e-16);
    }
}
