//! Horizon structure of the de Sitter-Reissner-Nordstrom exterior and the
//! Regge-Wheeler coordinate.
//!
//! The exterior `(r_-, r_+)` is parametrized internally by a sigmoid variable
//! `t`, with `r = r_- + D s(t)`, `D = r_+ - r_-`, `s = 1/(1 + e^{-t})`. Both
//! horizon distances `r - r_-` and `r_+ - r` are then available to full
//! relative precision, which the potential tails and the inverse map need.

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The triple `(M, Q, Lambda)` defining `F(r) = 1 - 2M/r + Q^2/r^2 - Lambda r^2 / 3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlackHoleParams {
    pub mass: f64,
    pub charge: f64,
    pub lambda: f64,
}

impl BlackHoleParams {
    pub fn new(mass: f64, charge: f64, lambda: f64) -> Result<Self> {
        if !(mass.is_finite() && charge.is_finite() && lambda.is_finite()) {
            return Err(Error::InvalidInput("black-hole parameters must be finite".into()));
        }
        if mass <= 0.0 {
            return Err(Error::InvalidInput(format!("mass must be positive, got {mass}")));
        }
        if lambda <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "cosmological constant must be positive, got {lambda}"
            )));
        }
        Ok(Self { mass, charge, lambda })
    }

    /// Builds from `Q^2` directly; the sign of `Q` never matters.
    pub fn from_q2(mass: f64, q2: f64, lambda: f64) -> Result<Self> {
        if !(q2 >= 0.0) {
            return Err(Error::InvalidInput(format!("Q^2 must be non-negative, got {q2}")));
        }
        Self::new(mass, q2.sqrt(), lambda)
    }

    pub fn q2(&self) -> f64 {
        self.charge * self.charge
    }

    /// Coefficients `[c0, c1, c2, c3, c4]` of `P(r) = r^2 F(r)`.
    pub fn poly_coeffs(&self) -> [f64; 5] {
        [self.q2(), -2.0 * self.mass, 1.0, 0.0, -self.lambda / 3.0]
    }

    pub fn poly(&self, r: f64) -> f64 {
        let c = self.poly_coeffs();
        (((c[4] * r + c[3]) * r + c[2]) * r + c[1]) * r + c[0]
    }

    pub fn poly_prime(&self, r: f64) -> f64 {
        let c = self.poly_coeffs();
        ((4.0 * c[4] * r + 3.0 * c[3]) * r + 2.0 * c[2]) * r + c[1]
    }

    fn f_unchecked(&self, r: f64) -> f64 {
        1.0 - 2.0 * self.mass / r + self.q2() / (r * r) - self.lambda * r * r / 3.0
    }

    fn f_prime_unchecked(&self, r: f64) -> f64 {
        2.0 * self.mass / (r * r) - 2.0 * self.q2() / (r * r * r) - 2.0 * self.lambda * r / 3.0
    }
}

/// `F(r)`; errors at `r = 0`.
pub fn metric_f(params: &BlackHoleParams, r: f64) -> Result<f64> {
    if r == 0.0 || !r.is_finite() {
        return Err(Error::Domain(format!("F(r) undefined at r = {r}")));
    }
    Ok(params.f_unchecked(r))
}

/// `F'(r) = 2M/r^2 - 2Q^2/r^3 - 2 Lambda r / 3`; errors at `r = 0`.
pub fn metric_f_prime(params: &BlackHoleParams, r: f64) -> Result<f64> {
    if r == 0.0 || !r.is_finite() {
        return Err(Error::Domain(format!("F'(r) undefined at r = {r}")));
    }
    Ok(params.f_prime_unchecked(r))
}

/// The four simple roots of `P(r)` and their surface gravities `F'(r_j)/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizonData {
    pub r_n: f64,
    pub r_c: f64,
    pub r_minus: f64,
    pub r_plus: f64,
    pub kappa_n: f64,
    pub kappa_c: f64,
    pub kappa_minus: f64,
    pub kappa_plus: f64,
}

impl HorizonData {
    pub fn roots(&self) -> [f64; 4] {
        [self.r_n, self.r_c, self.r_minus, self.r_plus]
    }

    pub fn kappas(&self) -> [f64; 4] {
        [self.kappa_n, self.kappa_c, self.kappa_minus, self.kappa_plus]
    }
}

fn newton_polish(params: &BlackHoleParams, mut r: f64) -> f64 {
    for _ in 0..50 {
        let p = params.poly(r);
        let dp = params.poly_prime(r);
        if dp == 0.0 {
            break;
        }
        let step = p / dp;
        let next = r - step;
        if !next.is_finite() {
            break;
        }
        let done = step.abs() <= 4.0 * f64::EPSILON * r.abs().max(1e-300);
        r = next;
        if done {
            break;
        }
    }
    r
}

/// Roots of `r^2 F(r)` ordered `r_n < 0 < r_c < r_- < r_+`.
///
/// Companion-matrix eigenvalues seed a Newton polish. Complex, repeated or
/// wrongly signed roots all yield `DegenerateHorizons`.
pub fn horizon_roots(params: &BlackHoleParams) -> Result<HorizonData> {
    let c = params.poly_coeffs();
    let lead = c[4];
    let b: Vec<f64> = c[..4].iter().map(|ck| ck / lead).collect();
    #[rustfmt::skip]
    let companion = Matrix4::new(
        0.0, 1.0, 0.0, 0.0,
        0.0, 0.0, 1.0, 0.0,
        0.0, 0.0, 0.0, 1.0,
        -b[0], -b[1], -b[2], -b[3],
    );
    let eig = companion.complex_eigenvalues();
    let scale = eig.iter().map(|e| e.norm()).fold(1.0f64, f64::max);
    let mut roots = Vec::with_capacity(4);
    for e in eig.iter() {
        if !(e.re.is_finite() && e.im.is_finite()) {
            return Err(Error::DegenerateHorizons("non-finite eigenvalue".into()));
        }
        if e.im.abs() > 1e-12 * scale {
            return Err(Error::DegenerateHorizons(format!(
                "P(r) has complex roots ({:.6} {:+.6}i): no static exterior",
                e.re, e.im
            )));
        }
        roots.push(newton_polish(params, e.re));
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let [r_n, r_c, r_minus, r_plus] = [roots[0], roots[1], roots[2], roots[3]];

    let coeff_scale = c.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    for &r in &roots {
        let magnitude: f64 = c
            .iter()
            .enumerate()
            .map(|(k, ck)| ck.abs() * r.abs().powi(k as i32))
            .sum();
        if params.poly(r).abs() > 1e-12 * coeff_scale.max(magnitude) {
            return Err(Error::DegenerateHorizons(format!(
                "root polish failed at r = {r:.6e} (residual {:.3e})",
                params.poly(r)
            )));
        }
        let dp_scale = coeff_scale * r.abs().max(1.0).powi(3);
        if params.poly_prime(r).abs() <= 1e-8 * dp_scale {
            return Err(Error::DegenerateHorizons(format!("repeated root near r = {r:.6e}")));
        }
    }
    let gap_tol = 1e-8 * r_plus.abs().max(f64::MIN_POSITIVE);
    for w in roots.windows(2) {
        if w[1] - w[0] <= gap_tol {
            return Err(Error::DegenerateHorizons(format!(
                "roots {:.6e} and {:.6e} coincide to 1e-8 relative",
                w[0], w[1]
            )));
        }
    }
    if !(r_n < 0.0 && r_c > gap_tol && r_minus > r_c && r_plus > r_minus) {
        return Err(Error::DegenerateHorizons(format!(
            "need r_n < 0 < r_c < r_- < r_+, got [{r_n:.6e}, {r_c:.6e}, {r_minus:.6e}, {r_plus:.6e}]"
        )));
    }

    // kappa_j = P'(r_j) / (2 r_j^2) in product form, so that the partial
    // fractions of 1/F match the factored F used everywhere else.
    let kappa = |j: usize| -> f64 {
        let rj = roots[j];
        let prod: f64 = (0..4).filter(|&k| k != j).map(|k| rj - roots[k]).product();
        -(params.lambda / 3.0) * prod / (2.0 * rj * rj)
    };
    let h = HorizonData {
        r_n,
        r_c,
        r_minus,
        r_plus,
        kappa_n: kappa(0),
        kappa_c: kappa(1),
        kappa_minus: kappa(2),
        kappa_plus: kappa(3),
    };
    if !(h.kappa_minus > 0.0 && h.kappa_plus < 0.0) {
        return Err(Error::DegenerateHorizons("surface gravity signs are wrong".into()));
    }
    Ok(h)
}

/// `ln(1 + e^t)` without overflow.
#[inline]
pub(crate) fn log1p_exp(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// A radius in the exterior together with its distances to both horizons,
/// each carried to full relative precision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialPoint {
    pub t: f64,
    pub r: f64,
    pub to_minus: f64,
    pub to_plus: f64,
}

/// The Regge-Wheeler map `r -> x` with integration constant `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RwMap {
    pub params: BlackHoleParams,
    pub horizons: HorizonData,
    pub c: f64,
}

impl RwMap {
    pub fn new(params: BlackHoleParams, c: f64) -> Result<Self> {
        if !c.is_finite() {
            return Err(Error::InvalidInput("gauge constant c must be finite".into()));
        }
        let horizons = horizon_roots(&params)?;
        Ok(Self { params, horizons, c })
    }

    pub fn with_c(&self, c: f64) -> Self {
        Self { c, ..*self }
    }

    pub fn width(&self) -> f64 {
        self.horizons.r_plus - self.horizons.r_minus
    }

    /// Tail offset `C_-`: `x - C_- ~ ln(r - r_-) / (2 kappa_-)` near `r_-`.
    pub fn c_minus(&self) -> f64 {
        let h = &self.horizons;
        (h.r_minus - h.r_n).ln() / (2.0 * h.kappa_n)
            + (h.r_minus - h.r_c).ln() / (2.0 * h.kappa_c)
            + self.width().ln() / (2.0 * h.kappa_plus)
            + self.c
    }

    /// Tail offset `C_+`: `x - C_+ ~ ln(r_+ - r) / (2 kappa_+)` near `r_+`.
    pub fn c_plus(&self) -> f64 {
        let h = &self.horizons;
        (h.r_plus - h.r_n).ln() / (2.0 * h.kappa_n)
            + (h.r_plus - h.r_c).ln() / (2.0 * h.kappa_c)
            + self.width().ln() / (2.0 * h.kappa_minus)
            + self.c
    }

    /// `x(r)` in closed form.
    pub fn rw_x(&self, r: f64) -> Result<f64> {
        let h = &self.horizons;
        if !(r > h.r_minus && r < h.r_plus) {
            return Err(Error::Domain(format!(
                "r = {r} outside the exterior ({}, {})",
                h.r_minus, h.r_plus
            )));
        }
        Ok(self.x_from_parts(r, r - h.r_minus, h.r_plus - r))
    }

    /// `x` at a point, using its stored horizon distances. Unlike
    /// [`RwMap::rw_x`] this stays exact where `r` rounds onto a horizon.
    pub fn x_of_point(&self, p: &RadialPoint) -> f64 {
        self.x_from_parts(p.r, p.to_minus, p.to_plus)
    }

    fn x_from_parts(&self, r: f64, to_minus: f64, to_plus: f64) -> f64 {
        let h = &self.horizons;
        (r - h.r_n).ln() / (2.0 * h.kappa_n)
            + (r - h.r_c).ln() / (2.0 * h.kappa_c)
            + to_minus.ln() / (2.0 * h.kappa_minus)
            + to_plus.ln() / (2.0 * h.kappa_plus)
            + self.c
    }

    pub fn point_of_t(&self, t: f64) -> RadialPoint {
        let h = &self.horizons;
        let d = self.width();
        let ln_s = -log1p_exp(-t);
        let ln_1ms = -log1p_exp(t);
        let to_minus = d * ln_s.exp();
        let to_plus = d * ln_1ms.exp();
        let r = if t <= 0.0 { h.r_minus + to_minus } else { h.r_plus - to_plus };
        RadialPoint { t, r, to_minus, to_plus }
    }

    /// `x(t)`, computed from logarithms so it stays exact deep in the tails.
    pub fn x_of_t(&self, t: f64) -> f64 {
        let h = &self.horizons;
        let ln_d = self.width().ln();
        let ln_s = -log1p_exp(-t);
        let ln_1ms = -log1p_exp(t);
        let p = self.point_of_t(t);
        (p.r - h.r_n).ln() / (2.0 * h.kappa_n)
            + (p.r - h.r_c).ln() / (2.0 * h.kappa_c)
            + (ln_d + ln_s) / (2.0 * h.kappa_minus)
            + (ln_d + ln_1ms) / (2.0 * h.kappa_plus)
            + self.c
    }

    /// `dx/dt = r^2 / ((Lambda/3)(r - r_n)(r - r_c) D)`; smooth and positive.
    pub fn dx_dt(&self, p: &RadialPoint) -> f64 {
        let h = &self.horizons;
        p.r * p.r / (self.params.lambda / 3.0 * (p.r - h.r_n) * (p.r - h.r_c) * self.width())
    }

    /// `F(r)` in factored form, accurate next to either horizon.
    pub fn metric_at(&self, p: &RadialPoint) -> f64 {
        let h = &self.horizons;
        self.params.lambda / 3.0 * (p.r - h.r_n) * (p.r - h.r_c) * p.to_minus * p.to_plus
            / (p.r * p.r)
    }

    pub fn metric_prime_at(&self, p: &RadialPoint) -> f64 {
        self.params.f_prime_unchecked(p.r)
    }

    /// Seed for `t(x)` from the asymptotic inversion in the tails.
    fn t_seed(&self, x: f64) -> f64 {
        let h = &self.horizons;
        let ln_d = self.width().ln();
        let (cm, cp) = (self.c_minus(), self.c_plus());
        if x - cm < -20.0 / h.kappa_minus {
            2.0 * h.kappa_minus * (x - cm) - ln_d
        } else if x - cp > 20.0 / h.kappa_plus.abs() {
            ln_d - 2.0 * h.kappa_plus * (x - cp)
        } else {
            // x(t) is close to piecewise linear with these two slopes.
            let x0 = self.x_of_t(0.0);
            if x < x0 {
                2.0 * h.kappa_minus * (x - x0)
            } else {
                -2.0 * h.kappa_plus * (x - x0)
            }
        }
    }

    /// Solves `x(t) = x` by safeguarded Newton.
    pub fn t_of_x(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::Domain(format!("x = {x} is not finite")));
        }
        let tol = 1e-15 * (1.0 + x.abs());
        let mut t = self.t_seed(x);
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for _ in 0..200 {
            let fx = self.x_of_t(t) - x;
            if fx.abs() <= tol {
                return Ok(t);
            }
            if fx < 0.0 {
                lo = lo.max(t);
            } else {
                hi = hi.min(t);
            }
            let slope = self.dx_dt(&self.point_of_t(t));
            let mut next = t - fx / slope;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = if lo.is_finite() && hi.is_finite() {
                    0.5 * (lo + hi)
                } else if lo.is_finite() {
                    lo + 2.0 * (t - lo).abs().max(1.0)
                } else {
                    hi - 2.0 * (hi - t).abs().max(1.0)
                };
            }
            if (next - t).abs() <= 1e-16 * t.abs().max(1.0) {
                let resid = self.x_of_t(next) - x;
                if resid.abs() <= 1e-12 * (1.0 + x.abs()) {
                    return Ok(next);
                }
            }
            t = next;
        }
        let resid = self.x_of_t(t) - x;
        if resid.abs() <= 1e-12 * (1.0 + x.abs()) {
            return Ok(t);
        }
        Err(Error::ConvergenceFailure(format!(
            "r_of_x did not converge at x = {x} (residual {resid:.3e})"
        )))
    }

    pub fn point_of_x(&self, x: f64) -> Result<RadialPoint> {
        Ok(self.point_of_t(self.t_of_x(x)?))
    }

    /// Inverse of `rw_x`.
    pub fn r_of_x(&self, x: f64) -> Result<f64> {
        Ok(self.point_of_x(x)?.r)
    }
}
