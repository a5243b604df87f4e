//! The Dirac potential `a(x) = sqrt(F(r(x))) / r(x)` and the Liouville
//! variable `X = int_{-inf}^x a`.
//!
//! In the sigmoid variable `t` of [`crate::geometry`] the Liouville density
//! has the closed form `dX/dt = 1 / (2 cosh(t/2) g(r))`, with
//! `g(r) = sqrt((Lambda/3)(r - r_n)(r - r_c))`, which is smooth and decays
//! like `e^{-|t|/2}`. All integrals over the line are done in `t`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{BlackHoleParams, RadialPoint, RwMap};
use crate::quadrature;

/// Half-width of the core window in `t`; the tails beyond it carry a
/// relative share `e^{-T/2}` of `A`, below `1e-17`.
pub const T_WINDOW: f64 = 80.0;

#[derive(Debug, Clone)]
pub struct PotentialModel {
    pub map: RwMap,
    pub a_minus: f64,
    pub a_plus: f64,
    pub c_minus: f64,
    pub c_plus: f64,
    pub a_total: f64,
    g_minus: f64,
    g_plus: f64,
    knots_left: Vec<f64>,
    knots_right: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailAmplitudes {
    pub a_minus: f64,
    pub a_plus: f64,
    pub c_minus: f64,
    pub c_plus: f64,
}

impl PotentialModel {
    pub fn new(params: BlackHoleParams, c: f64) -> Result<Self> {
        Self::from_map(RwMap::new(params, c)?)
    }

    pub fn from_map(map: RwMap) -> Result<Self> {
        let h = map.horizons;
        let third = map.params.lambda / 3.0;
        let g_minus = (third * (h.r_minus - h.r_n) * (h.r_minus - h.r_c)).sqrt();
        let g_plus = (third * (h.r_plus - h.r_n) * (h.r_plus - h.r_c)).sqrt();
        let c_minus = map.c_minus();
        let c_plus = map.c_plus();
        let a_minus = (2.0 * h.kappa_minus).sqrt() / h.r_minus * (-h.kappa_minus * c_minus).exp();
        let a_plus = (-2.0 * h.kappa_plus).sqrt() / h.r_plus * (-h.kappa_plus * c_plus).exp();
        let mut model = Self {
            map,
            a_minus,
            a_plus,
            c_minus,
            c_plus,
            a_total: 0.0,
            g_minus,
            g_plus,
            knots_left: Vec::new(),
            knots_right: Vec::new(),
        };
        model.build_tables()?;
        Ok(model)
    }

    /// Same geometry, integration constant `c` replaced.
    pub fn with_c(&self, c: f64) -> Result<Self> {
        Self::from_map(self.map.with_c(c))
    }

    pub fn params(&self) -> BlackHoleParams {
        self.map.params
    }

    pub fn kappa_minus(&self) -> f64 {
        self.map.horizons.kappa_minus
    }

    pub fn kappa_plus(&self) -> f64 {
        self.map.horizons.kappa_plus
    }

    fn knot_count() -> usize {
        2 * T_WINDOW as usize + 1
    }

    fn knot(k: usize) -> f64 {
        -T_WINDOW + k as f64
    }

    fn build_tables(&mut self) -> Result<()> {
        let n = Self::knot_count();
        let seg: Vec<f64> = (0..n - 1)
            .map(|k| {
                quadrature::integrate(
                    |t| self.dbig_x_dt(t),
                    Self::knot(k),
                    Self::knot(k + 1),
                    1e-18,
                    1e-15,
                    64,
                )
            })
            .collect::<Result<_>>()?;
        let mut left = vec![self.tail_left(-T_WINDOW); n];
        for k in 1..n {
            left[k] = left[k - 1] + seg[k - 1];
        }
        let mut right = vec![self.tail_right(T_WINDOW); n];
        for k in (0..n - 1).rev() {
            right[k] = right[k + 1] + seg[k];
        }
        self.a_total = 0.5 * (left[n - 1] + self.tail_right(T_WINDOW) + right[0] + self.tail_left(-T_WINDOW));
        self.knots_left = left;
        self.knots_right = right;
        Ok(())
    }

    fn tail_left(&self, t: f64) -> f64 {
        2.0 * (0.5 * t).exp() / self.g_minus
    }

    fn tail_right(&self, t: f64) -> f64 {
        2.0 * (-0.5 * t).exp() / self.g_plus
    }

    /// `dX/dt` in closed form.
    pub fn dbig_x_dt(&self, t: f64) -> f64 {
        let p = self.map.point_of_t(t);
        let h = &self.map.horizons;
        let g = (self.map.params.lambda / 3.0 * (p.r - h.r_n) * (p.r - h.r_c)).sqrt();
        0.5 / ((0.5 * t).cosh() * g)
    }

    pub fn a_at(&self, p: &RadialPoint) -> f64 {
        self.map.metric_at(p).sqrt() / p.r
    }

    /// `a'(x) = a (F'(r)/2 - F(r)/r)`, the chain rule through `dr/dx = F`.
    pub fn a_prime_at(&self, p: &RadialPoint) -> f64 {
        let f = self.map.metric_at(p);
        let fp = self.map.metric_prime_at(p);
        self.a_at(p) * (0.5 * fp - f / p.r)
    }

    pub fn a_of_x(&self, x: f64) -> Result<f64> {
        Ok(self.a_at(&self.map.point_of_x(x)?))
    }

    pub fn a_prime_of_x(&self, x: f64) -> Result<f64> {
        Ok(self.a_prime_at(&self.map.point_of_x(x)?))
    }

    pub fn tail_amplitudes(&self) -> TailAmplitudes {
        TailAmplitudes {
            a_minus: self.a_minus,
            a_plus: self.a_plus,
            c_minus: self.c_minus,
            c_plus: self.c_plus,
        }
    }

    pub fn total_a(&self) -> f64 {
        self.a_total
    }

    fn segment(&self, t0: f64, t1: f64) -> f64 {
        if t0 == t1 {
            return 0.0;
        }
        quadrature::integrate(|s| self.dbig_x_dt(s), t0, t1, 1e-18, 1e-15, 64)
            .unwrap_or_else(|_| quadrature::gk15(&|s| self.dbig_x_dt(s), t0, t1).0)
    }

    /// `X(t)`.
    pub fn big_x_of_t(&self, t: f64) -> f64 {
        if t <= -T_WINDOW {
            return self.tail_left(t);
        }
        if t >= 0.0 {
            return self.a_total - self.big_x_complement_of_t(t);
        }
        let k = ((t + T_WINDOW).floor() as usize).min(Self::knot_count() - 2);
        self.knots_left[k] + self.segment(Self::knot(k), t)
    }

    /// `A - X(t)`, accurate when `X` is close to `A`.
    pub fn big_x_complement_of_t(&self, t: f64) -> f64 {
        if t >= T_WINDOW {
            return self.tail_right(t);
        }
        if t < 0.0 {
            return self.a_total - self.big_x_of_t(t);
        }
        let k = ((t + T_WINDOW).ceil() as usize).min(Self::knot_count() - 1);
        self.knots_right[k] + self.segment(t, Self::knot(k))
    }

    /// Liouville variable `X(x)`.
    pub fn liouville_x(&self, x: f64) -> Result<f64> {
        Ok(self.big_x_of_t(self.map.t_of_x(x)?))
    }

    /// Solves `X(t) = big_x`.
    pub fn t_of_liouville(&self, big_x: f64) -> Result<f64> {
        let a = self.a_total;
        if !(big_x > 0.0 && big_x < a) {
            return Err(Error::Domain(format!("X = {big_x} outside (0, {a})")));
        }
        let right = big_x > 0.5 * a;
        let target = if right { a - big_x } else { big_x };
        // Residual with a sign making it increasing in t.
        let resid = |t: f64| {
            if right {
                target - self.big_x_complement_of_t(t)
            } else {
                self.big_x_of_t(t) - target
            }
        };
        let mut t = if right {
            -2.0 * (0.5 * target * self.g_plus).ln()
        } else {
            2.0 * (0.5 * target * self.g_minus).ln()
        };
        if t.abs() < T_WINDOW {
            // Bracket from the knot tables.
            let table = if right { &self.knots_right } else { &self.knots_left };
            let k = if right {
                table.iter().position(|&v| v < target).unwrap_or(table.len() - 1)
            } else {
                table.iter().position(|&v| v > target).unwrap_or(table.len() - 1)
            };
            t = Self::knot(k) - 0.5;
        }
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for _ in 0..100 {
            let f = resid(t);
            if f.abs() <= 1e-16 * target.max(1e-300) {
                return Ok(t);
            }
            if f < 0.0 {
                lo = lo.max(t);
            } else {
                hi = hi.min(t);
            }
            let mut next = t - f / self.dbig_x_dt(t);
            if !(next > lo && next < hi) || !next.is_finite() {
                next = if lo.is_finite() && hi.is_finite() {
                    0.5 * (lo + hi)
                } else if lo.is_finite() {
                    lo + 1.0
                } else {
                    hi - 1.0
                };
            }
            if (next - t).abs() <= 4.0 * f64::EPSILON * t.abs().max(1.0) {
                return Ok(next);
            }
            t = next;
        }
        if resid(t).abs() <= 1e-12 * target {
            Ok(t)
        } else {
            Err(Error::ConvergenceFailure(format!("h(X) did not converge at X = {big_x}")))
        }
    }

    /// `h(X) = g^{-1}(X)`, the inverse Liouville map.
    pub fn liouville_h(&self, big_x: f64) -> Result<f64> {
        Ok(self.map.x_of_t(self.t_of_liouville(big_x)?))
    }

    /// `q(X) = lambda^2 / a^2 + i lambda a' / a^3` at `x = h(X)`.
    pub fn sturm_potential(&self, lambda: f64, big_x: f64) -> Result<Complex64> {
        let t = self.t_of_liouville(big_x)?;
        let p = self.map.point_of_t(t);
        let a = self.a_at(&p);
        let ap = self.a_prime_at(&p);
        Ok(Complex64::new(lambda * lambda / (a * a), lambda * ap / (a * a * a)))
    }

    /// Paired samples of `(x, X)` on a uniform `t` grid.
    pub fn liouville_samples(&self, n: usize) -> LiouvilleMap {
        let n = n.max(2);
        let mut xs = Vec::with_capacity(n);
        let mut big = Vec::with_capacity(n);
        for k in 0..n {
            let t = -T_WINDOW + 2.0 * T_WINDOW * k as f64 / (n - 1) as f64;
            xs.push(self.map.x_of_t(t));
            big.push(self.big_x_of_t(t));
        }
        LiouvilleMap { x: xs, big_x: big, a_total: self.a_total }
    }
}

/// Monotone sample table of the Liouville map.
#[derive(Debug, Clone, Serialize)]
pub struct LiouvilleMap {
    pub x: Vec<f64>,
    pub big_x: Vec<f64>,
    pub a_total: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> PotentialModel {
        PotentialModel::new(BlackHoleParams::new(1.0, 0.5, 0.05).unwrap(), 0.0).unwrap()
    }

    #[test]
    fn total_a_default() {
        let m = model();
        assert!((m.total_a() - 3.641_618_459_541_411).abs() < 1e-9, "{}", m.total_a());
    }

    #[test]
    fn tail_amplitudes_default() {
        let m = model();
        assert!((m.a_minus - 0.382_357_637_367_062_3).abs() < 1e-9);
        assert!((m.a_plus - 0.186_562_507_270_548_85).abs() < 1e-9);
    }

    #[test]
    fn both_tables_agree() {
        let m = model();
        for &t in &[-10.0, -0.3, 0.0, 0.4, 12.0] {
            let s = m.big_x_of_t(t) + m.big_x_complement_of_t(t);
            assert!((s - m.total_a()).abs() < 1e-13);
        }
    }

    #[test]
    fn derivative_matches_difference_quotient() {
        let m = model();
        let x = 1.3;
        let h = 1e-4;
        let fd = (m.a_of_x(x + h).unwrap() - m.a_of_x(x - h).unwrap()) / (2.0 * h);
        assert!((fd - m.a_prime_of_x(x).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn inverse_liouville_round_trip() {
        let m = model();
        for &x in &[-40.0, -3.0, 0.0, 5.0, 60.0] {
            let big = m.liouville_x(x).unwrap();
            assert!((m.liouville_h(big).unwrap() - x).abs() < 1e-9);
        }
    }

    #[test]
    fn sturm_potential_zero_energy() {
        let m = model();
        assert_eq!(m.sturm_potential(0.0, 1.0).unwrap(), Complex64::new(0.0, 0.0));
        assert!(m.sturm_potential(1.0, 0.0).is_err());
    }
}
