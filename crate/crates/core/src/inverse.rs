//! Inverse problems: surface gravities from reflection ratios, `(M, Q^2,
//! Lambda)` from the squared potential through `B = (1/a^2) d/dx`, and the
//! full parameter set from finite scattering data by least squares.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::{horizon_roots, BlackHoleParams, RwMap};
use crate::jost::Method;
use crate::par;
use crate::potential::PotentialModel;
use crate::qd::Qd;
use crate::scattering::s_matrix_sweep;

/// Which scattering coefficient a dataset samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Coefficient {
    #[serde(alias = "t")]
    T,
    #[serde(alias = "r")]
    R,
    #[serde(alias = "l")]
    L,
}

impl std::str::FromStr for Coefficient {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "T" | "t" => Ok(Coefficient::T),
            "R" | "r" => Ok(Coefficient::R),
            "L" | "l" => Ok(Coefficient::L),
            other => Err(Error::InvalidInput(format!("unknown coefficient '{other}'"))),
        }
    }
}

/// Samples `(n, value)` of one coefficient at one energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflectionDataset {
    pub lambda: f64,
    pub side: Coefficient,
    pub entries: Vec<(f64, Complex64)>,
}

impl ReflectionDataset {
    pub fn new(lambda: f64, side: Coefficient, entries: Vec<(f64, Complex64)>) -> Result<Self> {
        if !lambda.is_finite() {
            return Err(Error::InvalidInput("lambda must be finite".into()));
        }
        for w in entries.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::InvalidInput(format!(
                    "n values must be strictly increasing ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        for &(n, v) in &entries {
            if !(n > 0.0) || !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::InvalidInput(format!("bad sample at n = {n}")));
            }
            if v.norm() > 1.0 + 1e-9 {
                return Err(Error::InvalidInput(format!("|value| = {} > 1 at n = {n}", v.norm())));
            }
        }
        Ok(Self { lambda, side, entries })
    }

    /// Forward-generates a dataset from a model.
    pub fn generate(model: &PotentialModel, lambda: f64, side: Coefficient, ns: &[f64]) -> Result<Self> {
        let zs: Vec<Complex64> = ns.iter().map(|&n| Complex64::new(n, 0.0)).collect();
        let triples = s_matrix_sweep(model, lambda, &zs, Method::Auto)?;
        let entries = ns.iter().zip(&triples).map(|(&n, s)| (n, pick(side, s))).collect();
        Self::new(lambda, side, entries)
    }

    pub fn ns(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.0).collect()
    }
}

fn pick(side: Coefficient, s: &crate::scattering::ScatteringTriple) -> Complex64 {
    match side {
        Coefficient::T => s.t,
        Coefficient::R => s.r,
        Coefficient::L => s.l,
    }
}

/// Per-start summary of a multi-start fit.
#[derive(Debug, Clone, Serialize)]
pub struct StartSummary {
    pub initial: [f64; 3],
    pub final_params: [f64; 3],
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RecoveredParams {
    pub mass: f64,
    pub q_squared: f64,
    pub lambda: f64,
    /// Gauge constant, reduced modulo `c_modulus` into `[-m/2, m/2)` when
    /// that is set.
    pub c_offset: f64,
    /// `pi / lambda` for scattering fits, where `c` is only known modulo it.
    pub c_modulus: Option<f64>,
    pub kappa_minus_est: f64,
    pub kappa_plus_est: f64,
    pub residual: f64,
    /// Ratio of extreme singular values of the fit Jacobian (1 if unused).
    pub conditioning: f64,
    pub starts: Vec<StartSummary>,
}

impl RecoveredParams {
    fn from_params(p: BlackHoleParams, c_offset: f64, c_modulus: Option<f64>, residual: f64) -> Result<Self> {
        let h = horizon_roots(&p)?;
        Ok(Self {
            mass: p.mass,
            q_squared: p.q2(),
            lambda: p.lambda,
            c_offset,
            c_modulus,
            kappa_minus_est: h.kappa_minus,
            kappa_plus_est: h.kappa_plus,
            residual,
            conditioning: 1.0,
            starts: Vec::new(),
        })
    }
}

// ---------------------------------------------------------------------------
// Surface gravities from ratios

#[derive(Debug, Clone, Serialize)]
pub struct KappaEstimate {
    /// `kappa_-` for L data, `kappa_+ < 0` for R data.
    pub kappa: f64,
    pub std_err: f64,
    /// `(n, kappa_hat(n))` for every pair used.
    pub pairs: Vec<(f64, f64)>,
    /// Smallest `n` reached by the phase continuation.
    pub unwrapped_from: f64,
}

fn principal(z: Complex64) -> f64 {
    z.arg()
}

/// Surface gravity from `L(pn)/L(n) -> e^{-(2i lambda/kappa_-) ln p}`, or
/// from `R(pn)/R(n) -> e^{(2i lambda/kappa_+) ln p}`.
pub fn kappa_from_ratios(data: &ReflectionDataset, p: u32) -> Result<KappaEstimate> {
    let lambda = data.lambda;
    if lambda == 0.0 {
        return Err(Error::ZeroEnergy);
    }
    if p < 2 {
        return Err(Error::InvalidInput(format!("ratio base p must be >= 2, got {p}")));
    }
    // Phase law: theta(n) ~ const + sigma (2 lambda / kappa) ln n.
    let sigma = match data.side {
        Coefficient::L => -1.0,
        Coefficient::R => 1.0,
        Coefficient::T => {
            return Err(Error::InvalidInput("surface gravities need L or R data".into()))
        }
    };
    let e = &data.entries;
    let m = e.len();
    if m < 2 {
        return Err(Error::InvalidInput("need at least two samples".into()));
    }
    let kappa_of = |dtheta: f64, ln_ratio: f64| sigma * 2.0 * lambda * ln_ratio / dtheta;

    // Continue the phase from the largest n down, where steps are smallest.
    let mut theta = vec![f64::NAN; m];
    theta[m - 1] = principal(e[m - 1].1);
    let top = principal(e[m - 1].1 / e[m - 2].1);
    if top == 0.0 {
        return Err(Error::PhaseWrapAmbiguity("no phase change between the two largest n".into()));
    }
    let mut kappa = kappa_of(top, (e[m - 1].0 / e[m - 2].0).ln());
    let mut lowest = m - 1;
    for k in (0..m - 1).rev() {
        let ln_ratio = (e[k + 1].0 / e[k].0).ln();
        let predicted = sigma * 2.0 * lambda / kappa * ln_ratio;
        if predicted.abs() > PI / 2.0 {
            break;
        }
        let d = principal(e[k + 1].1 / e[k].1);
        let d = d + 2.0 * PI * ((predicted - d) / (2.0 * PI)).round();
        theta[k] = theta[k + 1] - d;
        lowest = k;
        // Refresh kappa from the longest baseline unwrapped so far.
        let span = theta[m - 1] - theta[k];
        if span != 0.0 {
            kappa = kappa_of(span, (e[m - 1].0 / e[k].0).ln());
        }
    }

    let ln_p = (p as f64).ln();
    let mut pairs = Vec::new();
    for k in lowest..m {
        let target = e[k].0 * p as f64;
        if let Some(j) = (k + 1..m).find(|&j| (e[j].0 - target).abs() <= 1e-9 * target) {
            let dtheta = theta[j] - theta[k];
            if dtheta == 0.0 {
                return Err(Error::PhaseWrapAmbiguity(format!("zero phase change at n = {}", e[k].0)));
            }
            pairs.push((e[k].0, kappa_of(dtheta, ln_p)));
        }
    }
    if pairs.len() < 3 {
        return Err(Error::PhaseWrapAmbiguity(format!(
            "only {} (n, {p}n) pairs lie in the unwrappable range n >= {}",
            pairs.len(),
            e[lowest].0
        )));
    }
    if pairs.iter().any(|(_, k)| k.signum() != pairs[0].1.signum()) {
        return Err(Error::PhaseWrapAmbiguity("pair estimates change sign".into()));
    }
    let (kappa, std_err) = extrapolate(&pairs);
    Ok(KappaEstimate { kappa, std_err, pairs, unwrapped_from: e[lowest].0 })
}

/// Fits `kappa + beta/n (+ gamma/n^2)` and returns the intercept with its
/// standard error.
fn extrapolate(pairs: &[(f64, f64)]) -> (f64, f64) {
    let m = pairs.len();
    let cols = if m >= 6 { 3 } else { 2 };
    let x = DMatrix::from_fn(m, cols, |i, j| pairs[i].0.powi(-(j as i32)));
    let y = DVector::from_iterator(m, pairs.iter().map(|p| p.1));
    let svd = x.clone().svd(true, true);
    let coef = svd.solve(&y, 1e-14).expect("SVD solve with both factors");
    let resid = &y - &x * &coef;
    let dof = m.saturating_sub(cols);
    let s2 = if dof > 0 { resid.norm_squared() / dof as f64 } else { 0.0 };
    let xtx = x.transpose() * &x;
    let var0 = xtx.try_inverse().map(|inv| inv[(0, 0)] * s2).unwrap_or(f64::INFINITY);
    (coef[0], var0.max(0.0).sqrt())
}

// ---------------------------------------------------------------------------
// B-operator recovery

/// A squared potential `x -> a^2(x)`, optionally with exact derivatives.
pub trait SquaredPotential {
    fn a2(&self, x: f64) -> Result<f64>;

    /// `[a^2, (a^2)', .., (a^2)'''']` at `x` if known in closed form.
    fn derivatives(&self, _x: f64) -> Option<[f64; 5]> {
        None
    }
}

/// Wraps a plain function; derivatives are taken numerically.
pub struct SampledPotential<F: Fn(f64) -> f64>(pub F);

impl<F: Fn(f64) -> f64> SquaredPotential for SampledPotential<F> {
    fn a2(&self, x: f64) -> Result<f64> {
        Ok((self.0)(x))
    }
}

/// Finite Laurent polynomial in `r` with quad-double coefficients; the
/// high x-derivatives of `a^2` cancel heavily between terms.
#[derive(Debug, Clone, Default)]
struct Laurent(BTreeMap<i32, Qd>);

impl Laurent {
    fn from_terms(terms: &[(i32, f64)]) -> Self {
        let mut l = Laurent::default();
        for &(k, c) in terms {
            let e = l.0.entry(k).or_insert(Qd::ZERO);
            *e = e.add_qd(Qd::from_f64(c));
        }
        l
    }

    fn deriv(&self) -> Self {
        Laurent(self.0.iter().filter(|(&k, _)| k != 0).map(|(&k, c)| (k - 1, c.mul_f64(k as f64))).collect())
    }

    fn mul(&self, o: &Laurent) -> Self {
        let mut out = Laurent::default();
        for (&i, a) in &self.0 {
            for (&j, b) in &o.0 {
                let e = out.0.entry(i + j).or_insert(Qd::ZERO);
                *e = e.add_qd(a.mul_qd(*b));
            }
        }
        out
    }

    /// Horner on `r^K * self`, then one division by `r^K`.
    fn eval(&self, r: f64) -> f64 {
        let (Some((&lo, _)), Some((&hi, _))) = (self.0.first_key_value(), self.0.last_key_value()) else {
            return 0.0;
        };
        let mut acc = Qd::ZERO;
        for k in (lo..=hi).rev() {
            acc = acc.mul_f64(r).add_qd(self.0.get(&k).copied().unwrap_or(Qd::ZERO));
        }
        acc.to_f64() * r.powi(lo)
    }
}

/// Exact x-derivatives of `a^2 = P(r)/r^4`, using `d/dx = (P/r^2) d/dr`.
fn closed_form_derivatives(p: &BlackHoleParams, r: f64) -> [f64; 5] {
    let (m, q2, l3) = (p.mass, p.q2(), p.lambda / 3.0);
    let f = Laurent::from_terms(&[(2, -l3), (0, 1.0), (-1, -2.0 * m), (-2, q2)]);
    let mut g = Laurent::from_terms(&[(0, -l3), (-2, 1.0), (-3, -2.0 * m), (-4, q2)]);
    let mut out = [0.0; 5];
    for slot in out.iter_mut() {
        *slot = g.eval(r);
        g = f.mul(&g.deriv());
    }
    out
}

impl SquaredPotential for PotentialModel {
    fn a2(&self, x: f64) -> Result<f64> {
        Ok(self.a_of_x(x)?.powi(2))
    }

    fn derivatives(&self, x: f64) -> Option<[f64; 5]> {
        let r = self.map.r_of_x(x).ok()?;
        Some(closed_form_derivatives(&self.params(), r))
    }
}

/// A model that hides its closed-form derivatives, forcing differences.
pub struct NumericOnly<'a>(pub &'a PotentialModel);

impl SquaredPotential for NumericOnly<'_> {
    fn a2(&self, x: f64) -> Result<f64> {
        self.0.a2(x)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BOptions {
    /// Coarsest step of the difference table.
    pub fd_step: f64,
    /// Agreement required between the last two Richardson levels.
    pub fd_tol: f64,
    /// Relative tolerance on the first-iterate consistency check.
    pub consistency_tol: f64,
}

impl Default for BOptions {
    fn default() -> Self {
        Self { fd_step: 0.4, fd_tol: 1e-6, consistency_tol: 1e-6 }
    }
}

fn central_differences<S: SquaredPotential + ?Sized>(src: &S, x: f64, h: f64) -> Result<[f64; 5]> {
    let f = |k: f64| src.a2(x + k * h);
    let (fm2, fm1, f0, f1, f2) = (f(-2.0)?, f(-1.0)?, f(0.0)?, f(1.0)?, f(2.0)?);
    Ok([
        f0,
        (f1 - fm1) / (2.0 * h),
        (f1 - 2.0 * f0 + fm1) / (h * h),
        (f2 - 2.0 * f1 + 2.0 * fm1 - fm2) / (2.0 * h.powi(3)),
        (f2 - 4.0 * f1 + 6.0 * f0 - 4.0 * fm1 + fm2) / h.powi(4),
    ])
}

/// Derivatives of orders 0..4 by two levels of Richardson extrapolation
/// over steps `h, h/2, h/4`. The coarsest step is halved until two levels agree.
fn richardson_derivatives<S: SquaredPotential + ?Sized>(src: &S, x: f64, opts: &BOptions) -> Result<[f64; 5]> {
    let mut last = None;
    for k in 0..6 {
        match richardson_at(src, x, opts.fd_step / 2f64.powi(k), opts.fd_tol) {
            Ok(d) => return Ok(d),
            Err(e @ Error::NumericalDifferentiationFailure(_)) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

fn richardson_at<S: SquaredPotential + ?Sized>(src: &S, x: f64, h: f64, tol: f64) -> Result<[f64; 5]> {
    let d0 = central_differences(src, x, h)?;
    let d1 = central_differences(src, x, h / 2.0)?;
    let d2 = central_differences(src, x, h / 4.0)?;
    let mut out = [d0[0], 0.0, 0.0, 0.0, 0.0];
    for k in 1..5 {
        let r1 = (4.0 * d1[k] - d0[k]) / 3.0;
        let r1b = (4.0 * d2[k] - d1[k]) / 3.0;
        let r2 = (16.0 * r1b - r1) / 15.0;
        let floor = 1e-9 * d0[0].abs() / (h / 4.0).powi(k as i32);
        if (r2 - r1b).abs() > tol * r2.abs() + floor {
            return Err(Error::NumericalDifferentiationFailure(format!(
                "order {k} derivative at x = {x}: Richardson levels {r1b:.6e} and {r2:.6e} disagree"
            )));
        }
        out[k] = r2;
    }
    Ok(out)
}

/// Truncated Taylor series helpers for the B iteration.
fn taylor_from_derivatives(d: &[f64; 5]) -> Vec<f64> {
    let mut fact = 1.0;
    d.iter()
        .enumerate()
        .map(|(k, v)| {
            if k > 0 {
                fact *= k as f64;
            }
            v / fact
        })
        .collect()
}

fn series_deriv(c: &[f64]) -> Vec<f64> {
    (1..c.len()).map(|k| k as f64 * c[k]).collect()
}

fn series_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len().min(b.len());
    (0..n).map(|k| (0..=k).map(|j| a[j] * b[k - j]).sum()).collect()
}

fn series_recip(a: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len()];
    out[0] = 1.0 / a[0];
    for k in 1..a.len() {
        let s: f64 = (1..=k).map(|j| a[j] * out[k - j]).sum();
        out[k] = -s / a[0];
    }
    out
}

/// `[B^1, B^2, B^3, B^4](a^2)` at the expansion point.
fn b_iterates(d: &[f64; 5]) -> [f64; 4] {
    let g = taylor_from_derivatives(d);
    let inv = series_recip(&g);
    let mut u = g.clone();
    let mut out = [0.0; 4];
    for slot in out.iter_mut() {
        u = series_mul(&inv, &series_deriv(&u));
        *slot = u[0];
    }
    out
}

/// Recovers `(M, Q^2, Lambda)` and the gauge constant from `a^2` near `x0`.
pub fn b_operator_recovery<S: SquaredPotential + ?Sized>(src: &S, x0: f64) -> Result<RecoveredParams> {
    b_operator_recovery_with(src, x0, &BOptions::default())
}

pub fn b_operator_recovery_with<S: SquaredPotential + ?Sized>(
    src: &S,
    x0: f64,
    opts: &BOptions,
) -> Result<RecoveredParams> {
    let (d, tol) = match src.derivatives(x0) {
        Some(d) => (d, opts.consistency_tol),
        None => (richardson_derivatives(src, x0, opts)?, opts.consistency_tol.max(1e-4)),
    };
    let a2 = d[0];
    if !(a2 > 0.0) {
        return Err(Error::InconsistentPotential(format!("a^2 = {a2} is not positive at x0 = {x0}")));
    }
    let [b1, b2, b3, b4] = b_iterates(&d);
    let q2 = b4 / 24.0;
    let q2_floor = 1e3 * tol * b3.abs().max(1.0) * 1e-3;
    if q2 < -q2_floor {
        return Err(Error::InconsistentPotential(format!("B^4(a^2)/24 = {q2:.3e} is negative")));
    }
    let q2 = q2.max(0.0);

    // 12 Q^2 s^2 + B^3 s + (B^2 - 2) = 0 with s = 1/r.
    let mut candidates = Vec::new();
    if q2 > 0.0 {
        let (qa, qb, qc) = (12.0 * q2, b3, b2 - 2.0);
        let disc = qb * qb - 4.0 * qa * qc;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            // Stable pair of roots.
            let t = -0.5 * (qb + qb.signum() * sq);
            if t != 0.0 {
                candidates.push(t / qa);
                candidates.push(qc / t);
            }
        }
    } else if b3 != 0.0 {
        candidates.push((2.0 - b2) / b3);
    }
    let mut best: Option<(f64, f64, f64, f64)> = None;
    for s in candidates.into_iter().filter(|s| *s > 0.0 && s.is_finite()) {
        let m = (b3 + 24.0 * q2 * s) / 12.0;
        let pred_b1 = -2.0 * s + 6.0 * m * s * s - 4.0 * q2 * s.powi(3);
        let miss = (pred_b1 - b1).abs() / (b1.abs() + 2.0 * s);
        if best.map_or(true, |b| miss < b.3) {
            best = Some((s, m, pred_b1, miss));
        }
    }
    let (s, m, _, miss) = best.ok_or_else(|| {
        Error::InconsistentPotential(format!(
            "no positive 1/r solves the B^2, B^3 relations (B = [{b1:.4e}, {b2:.4e}, {b3:.4e}, {b4:.4e}])"
        ))
    })?;
    if miss > tol {
        return Err(Error::InconsistentPotential(format!(
            "first B iterate misses the dS-RN relation by {miss:.3e} (relative)"
        )));
    }
    let lambda = 3.0 * (s * s - 2.0 * m * s.powi(3) + q2 * s.powi(4) - a2);
    if !(m > 0.0 && lambda > 0.0) {
        return Err(Error::InconsistentPotential(format!(
            "recovered M = {m:.4e}, Lambda = {lambda:.4e} are not both positive"
        )));
    }
    let params = BlackHoleParams::from_q2(m, q2, lambda)?;
    let map = RwMap::new(params, 0.0)?;
    let c = x0 - map.rw_x(1.0 / s)?;
    RecoveredParams::from_params(params, c, None, miss)
}

// ---------------------------------------------------------------------------
// Least-squares fit

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub starts: usize,
    pub max_iterations: usize,
    /// Stop once the residual norm drops below this.
    pub residual_tol: f64,
    /// Remaining starts are skipped once one reaches this residual relative
    /// to the data norm.
    pub accept_residual: f64,
    /// Singular-value ratio below which the fit is declared ill-posed.
    pub rank_tol: f64,
    /// Lower and upper bounds on `(M, Q^2, Lambda)` for the start grid.
    pub bounds: [(f64, f64); 3],
    /// Forward backend. The ODE sweep is the fastest path at the accuracy a
    /// fit needs.
    pub method: Method,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            starts: 6,
            max_iterations: 80,
            residual_tol: 1e-12,
            accept_residual: 1e-8,
            rank_tol: 1e-12,
            bounds: [(0.3, 3.0), (0.0, 2.0), (1e-3, 0.3)],
            method: Method::Ode,
        }
    }
}

struct Problem<'a> {
    data: &'a ReflectionDataset,
    zs: Vec<Complex64>,
    method: Method,
}

struct Eval {
    resid: Vec<f64>,
    c: f64,
}

fn params_of(u: &[f64; 3]) -> Result<BlackHoleParams> {
    BlackHoleParams::from_q2(u[0].exp(), u[1], u[2].exp())
}

impl Problem<'_> {
    fn model_values(&self, u: &[f64; 3]) -> Result<Vec<Complex64>> {
        let model = PotentialModel::new(params_of(u)?, 0.0)?;
        let s = s_matrix_sweep(&model, self.data.lambda, &self.zs, self.method)?;
        Ok(s.iter().map(|t| pick(self.data.side, t)).collect())
    }

    /// Residual with the gauge phase profiled out in closed form.
    fn eval(&self, u: &[f64; 3]) -> Option<Eval> {
        let m0 = self.model_values(u).ok()?;
        let lam = self.data.lambda;
        let dot: Complex64 = self.data.entries.iter().zip(&m0).map(|((_, d), m)| d * m.conj()).sum();
        let phi = match self.data.side {
            Coefficient::T => 0.0,
            _ => dot.arg(),
        };
        let c = match self.data.side {
            Coefficient::T => 0.0,
            Coefficient::L => phi / (2.0 * lam),
            Coefficient::R => -phi / (2.0 * lam),
        };
        let rot = Complex64::from_polar(1.0, phi);
        let mut resid = Vec::with_capacity(2 * m0.len());
        for ((_, d), m) in self.data.entries.iter().zip(&m0) {
            let r = d - rot * m;
            resid.push(r.re);
            resid.push(r.im);
        }
        Some(Eval { resid, c })
    }

    fn cost(&self, u: &[f64; 3]) -> f64 {
        self.eval(u).map_or(f64::INFINITY, |e| e.resid.iter().map(|r| r * r).sum())
    }

    fn jacobian(&self, u: &[f64; 3]) -> Option<DMatrix<f64>> {
        // Forward values carry ~1e-11 noise from adaptive stepping; this
        // step keeps it below the O(h^2) truncation error.
        let h = 1e-4;
        let mut cols = Vec::with_capacity(3);
        for j in 0..3 {
            let mut up = *u;
            let mut dn = *u;
            up[j] += h;
            dn[j] -= h;
            let (fp, fm) = (self.eval(&up)?, self.eval(&dn)?);
            cols.push(fp.resid.iter().zip(&fm.resid).map(|(a, b)| (a - b) / (2.0 * h)).collect::<Vec<_>>());
        }
        let rows = cols[0].len();
        Some(DMatrix::from_fn(rows, 3, |i, j| cols[j][i]))
    }
}

/// Largest accepted `2 |a| / |v|` between the acceleration and velocity
/// parts of a geodesic step.
const GEODESIC_RATIO: f64 = 0.75;

fn levenberg_marquardt(pb: &Problem, u0: [f64; 3], opts: &FitOptions) -> StartSummary {
    let mut u = u0;
    let mut cost = pb.cost(&u);
    let mut mu: f64 = 1e-3;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations && cost.is_finite() {
        iterations += 1;
        if cost.sqrt() <= opts.residual_tol {
            converged = true;
            break;
        }
        let Some(j) = pb.jacobian(&u) else { break };
        let Some(e) = pb.eval(&u) else { break };
        log::trace!("lm {iterations}: cost {cost:.6e} mu {mu:.1e} u {u:?}");
        let r = DVector::from_vec(e.resid);
        let jtj = j.transpose() * &j;
        let g = j.transpose() * &r;
        let mut improved = false;
        // Levenberg-Marquardt with geodesic acceleration: the second-order
        // correction lets steps follow the curved, nearly flat valleys of
        // this fit instead of crawling along them.
        for _ in 0..16 {
            let mut a = jtj.clone();
            for k in 0..3 {
                a[(k, k)] += mu * jtj[(k, k)].max(1e-12);
            }
            let Some(lu) = Some(a.lu()) else { break };
            let Some(v) = lu.solve(&(-&g)) else {
                mu *= 10.0;
                continue;
            };
            let hstep = 0.1;
            let probe = [u[0] + hstep * v[0], u[1] + hstep * v[1], u[2] + hstep * v[2]];
            let Some(e1) = pb.eval(&probe) else {
                mu *= 4.0;
                continue;
            };
            let jv = &j * &v;
            let rvv = DVector::from_iterator(
                r.len(),
                (0..r.len()).map(|i| 2.0 / hstep * ((e1.resid[i] - r[i]) / hstep - jv[i])),
            );
            let acc = lu.solve(&(-(j.transpose() * rvv))).unwrap_or_else(|| DVector::zeros(3));
            if 2.0 * acc.norm() > GEODESIC_RATIO * v.norm() {
                mu *= 4.0;
                continue;
            }
            let trial = [
                u[0] + v[0] + 0.5 * acc[0],
                u[1] + v[1] + 0.5 * acc[1],
                u[2] + v[2] + 0.5 * acc[2],
            ];
            let tc = pb.cost(&trial);
            if tc < cost {
                let step = (&v + 0.5 * &acc).norm();
                let small = step <= 1e-12 * (1.0 + u.iter().map(|x| x.abs()).sum::<f64>());
                let stalled = cost - tc <= 1e-14 * cost;
                u = trial;
                cost = tc;
                mu = (mu / 3.0).max(1e-12);
                improved = true;
                converged = small || stalled;
                break;
            }
            mu *= 4.0;
        }
        if !improved || converged {
            converged = converged || !improved && cost.sqrt() <= 1e3 * opts.residual_tol;
            break;
        }
    }
    let final_params = [u[0].exp(), u[1], u[2].exp()];
    StartSummary {
        initial: [u0[0].exp(), u0[1], u0[2].exp()],
        final_params,
        residual: cost.sqrt(),
        iterations,
        converged,
    }
}

fn null_direction(j: &DMatrix<f64>) -> (f64, Vec<f64>) {
    let svd = j.clone().svd(false, true);
    let sv = &svd.singular_values;
    let vt = svd.v_t.expect("requested V^T");
    let (mut imax, mut imin) = (0, 0);
    for k in 0..sv.len() {
        if sv[k] > sv[imax] {
            imax = k;
        }
        if sv[k] < sv[imin] {
            imin = k;
        }
    }
    // Fewer rows than parameters leaves a whole null space.
    if j.nrows() < j.ncols() {
        let full = j.clone().resize(j.ncols(), j.ncols(), 0.0).svd(false, true);
        let v = full.v_t.expect("requested V^T");
        let k = (0..full.singular_values.len())
            .min_by(|&a, &b| full.singular_values[a].total_cmp(&full.singular_values[b]))
            .unwrap();
        return (0.0, v.row(k).iter().copied().collect());
    }
    (sv[imin] / sv[imax].max(f64::MIN_POSITIVE), vt.row(imin).iter().copied().collect())
}

fn start_grid(opts: &FitOptions) -> Vec<[f64; 3]> {
    let geo = |lo: f64, hi: f64, n: usize, k: usize| lo * (hi / lo).powf(k as f64 / (n - 1) as f64);
    let [(m_lo, m_hi), (q_lo, q_hi), (l_lo, l_hi)] = opts.bounds;
    let mut out = Vec::new();
    for i in 0..8 {
        let m = geo(m_lo, m_hi, 8, i);
        for k in 0..7 {
            let l = geo(l_lo, l_hi, 7, k);
            for &qf in &[0.0, 0.1, 0.25, 0.5, 0.75] {
                let q2 = q_lo + qf * m * m;
                if q2 > q_hi {
                    continue;
                }
                if let Ok(p) = BlackHoleParams::from_q2(m, q2, l) {
                    if horizon_roots(&p).is_ok() {
                        out.push([m.ln(), q2, l.ln()]);
                    }
                }
            }
        }
    }
    out
}

/// Least-squares recovery of `(M, Q^2, Lambda, c)` from scattering samples.
pub fn fit_parameters(data: &ReflectionDataset, opts: &FitOptions) -> Result<RecoveredParams> {
    let lambda = data.lambda;
    if lambda == 0.0 && data.side != Coefficient::T {
        return Err(Error::ZeroEnergy);
    }
    let pb = Problem {
        data,
        zs: data.entries.iter().map(|&(n, _)| Complex64::new(n, 0.0)).collect(),
        method: opts.method,
    };
    let needed = if data.side == Coefficient::T { 3 } else { 4 };

    let mut grid = start_grid(opts);
    if grid.is_empty() {
        return Err(Error::InvalidInput("bounds admit no valid geometry".into()));
    }
    // Rank the grid by agreement with the data's own kappa estimate.
    let kappa_hint = match data.side {
        Coefficient::L | Coefficient::R => kappa_from_ratios(data, 2).ok().map(|k| k.kappa),
        Coefficient::T => None,
    };
    if let Some(kh) = kappa_hint {
        let kap = |u: &[f64; 3]| {
            let h = horizon_roots(&params_of(u).expect("grid is valid")).expect("grid is valid");
            match data.side {
                Coefficient::R => h.kappa_plus,
                _ => h.kappa_minus,
            }
        };
        grid.sort_by(|a, b| ((kap(a) - kh).abs()).total_cmp(&(kap(b) - kh).abs()));
        log::debug!("kappa hint {kh:.6} from ratios");
    }
    let screen: Vec<[f64; 3]> = if kappa_hint.is_some() {
        grid.iter().take(24).copied().collect()
    } else {
        let step = (grid.len() / 24).max(1);
        grid.iter().step_by(step).copied().collect()
    };

    if data.entries.len() < needed {
        let j = pb.jacobian(&screen[0]).ok_or_else(|| {
            Error::IllPosed { reason: "too few data points".into(), null_direction: Vec::new() }
        })?;
        let (_, dir) = null_direction(&j);
        return Err(Error::IllPosed {
            reason: format!(
                "{} data point(s) cannot fix 3 parameters{}",
                data.entries.len(),
                if needed == 4 { " and the gauge phase" } else { "" }
            ),
            null_direction: dir,
        });
    }

    let costs = par::map(&screen, |u| pb.cost(u));
    let mut order: Vec<usize> = (0..screen.len()).filter(|&k| costs[k].is_finite()).collect();
    order.sort_by(|&a, &b| costs[a].total_cmp(&costs[b]));
    let starts: Vec<[f64; 3]> = order.iter().take(opts.starts.max(5)).map(|&k| screen[k]).collect();
    if starts.is_empty() {
        return Err(Error::NoConvergence("no start produced a finite residual".into()));
    }
    let data_norm = data.entries.iter().map(|(_, d)| d.norm_sqr()).sum::<f64>().sqrt();
    let mut runs = Vec::with_capacity(starts.len());
    for batch in starts.chunks(par::workers().max(1)) {
        runs.extend(par::map(batch, |u0| levenberg_marquardt(&pb, *u0, opts)));
        if runs.iter().any(|r| r.residual <= opts.accept_residual * data_norm) {
            break;
        }
    }
    let best = runs
        .iter()
        .min_by(|a, b| a.residual.total_cmp(&b.residual))
        .expect("at least one start");
    if !best.residual.is_finite() {
        return Err(Error::NoConvergence("every start diverged".into()));
    }
    let u = [best.final_params[0].ln(), best.final_params[1], best.final_params[2].ln()];
    let eval = pb.eval(&u).ok_or_else(|| Error::NoConvergence("optimum is not evaluable".into()))?;
    let jac = pb.jacobian(&u).ok_or_else(|| Error::NoConvergence("Jacobian failed at optimum".into()))?;
    let (ratio, dir) = null_direction(&jac);
    if ratio < opts.rank_tol {
        return Err(Error::IllPosed {
            reason: format!("Jacobian singular-value ratio {ratio:.3e} at the optimum"),
            null_direction: dir,
        });
    }
    if !best.converged {
        log::warn!("best start stopped without meeting the convergence test");
    }
    let modulus = if data.side == Coefficient::T { None } else { Some(PI / lambda.abs()) };
    let c = match modulus {
        Some(p) => (eval.c + 0.5 * p).rem_euclid(p) - 0.5 * p,
        None => 0.0,
    };
    let mut out = RecoveredParams::from_params(params_of(&u)?, c, modulus, best.residual)?;
    out.conditioning = 1.0 / ratio;
    out.starts = runs;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_params() -> BlackHoleParams {
        BlackHoleParams::new(1.0, 0.5, 0.05).unwrap()
    }

    #[test]
    fn exact_law_is_exact() {
        let kappa = 0.183;
        let lam = 1.0;
        let gamma = Complex64::from_polar(1.0, 0.4);
        let entries: Vec<(f64, Complex64)> = (1..=64)
            .map(|n| {
                let n = n as f64;
                (n, gamma * Complex64::from_polar(1.0, -2.0 * lam / kappa * n.ln()))
            })
            .collect();
        let data = ReflectionDataset::new(lam, Coefficient::L, entries).unwrap();
        let est = kappa_from_ratios(&data, 2).unwrap();
        assert!((est.kappa - kappa).abs() < 1e-12 * kappa, "{}", est.kappa);
    }

    #[test]
    fn right_side_sign() {
        let kappa = -0.085;
        let entries: Vec<(f64, Complex64)> = (1..=80)
            .map(|n| (n as f64, Complex64::from_polar(1.0, 2.0 * 0.5 / kappa * (n as f64).ln())))
            .collect();
        let data = ReflectionDataset::new(0.5, Coefficient::R, entries).unwrap();
        let est = kappa_from_ratios(&data, 2).unwrap();
        assert!((est.kappa - kappa).abs() < 1e-12);
    }

    #[test]
    fn zero_energy_is_rejected() {
        let data = ReflectionDataset::new(0.0, Coefficient::L, vec![(1.0, Complex64::new(0.5, 0.0))]).unwrap();
        assert_eq!(kappa_from_ratios(&data, 2).unwrap_err(), Error::ZeroEnergy);
    }

    #[test]
    fn laurent_derivatives_match_b_identities() {
        let p = default_params();
        let r: f64 = 3.1;
        let d = closed_form_derivatives(&p, r);
        let [b1, b2, b3, b4] = b_iterates(&d);
        let (m, q2, s) = (p.mass, p.q2(), 1.0 / r);
        assert!((b4 - 24.0 * q2).abs() < 1e-10);
        assert!((b3 - (12.0 * m - 24.0 * q2 * s)).abs() < 1e-10);
        assert!((b2 - (2.0 - 12.0 * m * s + 12.0 * q2 * s * s)).abs() < 1e-10);
        assert!((b1 - (-2.0 * s + 6.0 * m * s * s - 4.0 * q2 * s.powi(3))).abs() < 1e-12);
    }

    #[test]
    fn b_recovery_analytic() {
        let model = PotentialModel::new(default_params(), 0.3).unwrap();
        for &x0 in &[-3.0, 1.0, 6.0] {
            let rec = b_operator_recovery(&model, x0).unwrap();
            assert!((rec.mass - 1.0).abs() < 1e-10);
            assert!((rec.q_squared - 0.25).abs() < 1e-10);
            assert!((rec.lambda - 0.05).abs() < 1e-10 * 0.05 * 100.0);
            assert!((rec.c_offset - 0.3).abs() < 1e-8);
        }
    }

    #[test]
    fn b_recovery_numeric() {
        let model = PotentialModel::new(default_params(), 0.0).unwrap();
        let rec = b_operator_recovery(&NumericOnly(&model), 0.5).unwrap();
        assert!((rec.mass - 1.0).abs() < 1e-4);
        assert!((rec.q_squared - 0.25).abs() < 1e-4);
        assert!((rec.lambda / 0.05 - 1.0).abs() < 1e-4);
    }

    #[test]
    fn exponential_is_inconsistent() {
        let src = SampledPotential(|x: f64| (2.0 * x).exp());
        assert!(matches!(
            b_operator_recovery(&src, 0.0),
            Err(Error::InconsistentPotential(_))
        ));
    }

    #[test]
    fn too_small_dataset_is_rejected() {
        let mut entries = vec![(1.0, Complex64::new(1.0, 0.0))];
        assert!(ReflectionDataset::new(1.0, Coefficient::L, entries.clone()).is_ok());
        entries.push((1.0, Complex64::new(0.0, 0.0)));
        assert!(ReflectionDataset::new(1.0, Coefficient::L, entries).is_err());
    }
}
