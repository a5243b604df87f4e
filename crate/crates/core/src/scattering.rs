//! Scattering coefficients `T = 1/a_L1`, `R = -a_L2/a_L1`, `L = a_L3/a_L1`,
//! the closed-form large-`z` oracles, and the analyticity invariant report.

use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::jost::{transfer_matrix, transfer_sweep, Method, TransferMatrix};
use crate::potential::PotentialModel;
use crate::specialfn::ln_gamma;

/// `(T, R, L)` at one `(lambda, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScatteringTriple {
    pub lambda: f64,
    pub z: Complex64,
    pub t: Complex64,
    pub r: Complex64,
    pub l: Complex64,
    pub method: Method,
}

impl ScatteringTriple {
    pub fn from_transfer(m: &TransferMatrix) -> Result<Self> {
        let e = &m.entries;
        // |a_L1| < 1e-12 only matters when the matrix is unscaled.
        if m.ln_scale <= 0.0 && e[0].norm() * m.ln_scale.exp() < 1e-12 {
            return Err(Error::PoleOfT(m.z.norm()));
        }
        Ok(Self {
            lambda: m.lambda,
            z: m.z,
            t: (-m.ln_scale).exp() / e[0],
            r: -e[1] / e[0],
            l: e[2] / e[0],
            method: m.method,
        })
    }

    /// Largest defect in `|T|^2 + |R|^2 = 1`, `|T|^2 + |L|^2 = 1` and
    /// `T conj(R) + L conj(T) = 0`. Meaningful for real `z` only.
    pub fn unitarity_defect(&self) -> f64 {
        let t2 = self.t.norm_sqr();
        let d1 = (t2 + self.r.norm_sqr() - 1.0).abs();
        let d2 = (t2 + self.l.norm_sqr() - 1.0).abs();
        let d3 = (self.t * self.r.conj() + self.l * self.t.conj()).norm();
        d1.max(d2).max(d3)
    }
}

/// `(T, R, L)` from the selected backend.
pub fn s_matrix(model: &PotentialModel, lambda: f64, z: Complex64, method: Method) -> Result<ScatteringTriple> {
    ScatteringTriple::from_transfer(&transfer_matrix(model, lambda, z, method)?)
}

/// `s_matrix` over many `z` at one energy, computed in parallel.
pub fn s_matrix_sweep(
    model: &PotentialModel,
    lambda: f64,
    zs: &[Complex64],
    method: Method,
) -> Result<Vec<ScatteringTriple>> {
    transfer_sweep(model, lambda, zs, method)?.iter().map(ScatteringTriple::from_transfer).collect()
}

/// Moves a triple to the gauge whose Regge-Wheeler constant is larger by
/// `c`: `T` is fixed, `R -> e^{-2i lambda c} R`, `L -> e^{2i lambda c} L`.
pub fn translate_gauge(triple: &ScatteringTriple, c: f64) -> ScatteringTriple {
    let ph = Complex64::from_polar(1.0, 2.0 * triple.lambda * c);
    ScatteringTriple { r: triple.r * ph.conj(), l: triple.l * ph, ..*triple }
}

struct AsymptoticLogs {
    /// `ln` of the `z`-independent prefactors of `a_L1 .. a_L4`.
    pre: [Complex64; 4],
    /// Exponents `e_j` in `(z/2)^{i lambda e_j}`.
    expo: [f64; 4],
}

fn asymptotic_logs(model: &PotentialModel, lambda: f64) -> AsymptoticLogs {
    let km = model.kappa_minus();
    let kp = model.kappa_plus();
    let lb_m = (km / model.a_minus).ln();
    let lb_p = (-kp / model.a_plus).ln();
    assert!(lb_m.is_finite() && lb_p.is_finite(), "horizon bases must be positive");
    let i = Complex64::i();
    let half = Complex64::new(0.5, 0.0);
    let um = i * (lambda / km);
    let up = i * (lambda / kp);
    // Orders have real part 1/2, so ln_gamma never meets a pole.
    let lg = |w: Complex64| ln_gamma(w).expect("Re = 1/2 is pole free");
    let (g_mm, g_mp) = (lg(half - um), lg(half + um));
    let (g_pm, g_pp) = (lg(half - up), lg(half + up));
    let ln2pi = (2.0 * PI).ln();
    let i_half_pi = i * (PI / 2.0);
    let pre = [
        -ln2pi + up * lb_p - um * lb_m + g_mm + g_pp,
        -ln2pi - i_half_pi - up * lb_p - um * lb_m + g_mm + g_pm,
        -ln2pi + i_half_pi + up * lb_p + um * lb_m + g_mp + g_pp,
        -ln2pi - up * lb_p + um * lb_m + g_mp + g_pm,
    ];
    let expo = [
        1.0 / km - 1.0 / kp,
        1.0 / kp + 1.0 / km,
        -(1.0 / kp + 1.0 / km),
        1.0 / kp - 1.0 / km,
    ];
    AsymptoticLogs { pre, expo }
}

/// Leading large-`z` behaviour of `A_L(lambda, z)` for real `z > 0`, with
/// `e^{zA}` carried in `ln_scale`.
pub fn asymptotic_transfer_oracle(model: &PotentialModel, lambda: f64, z: f64) -> TransferMatrix {
    let logs = asymptotic_logs(model, lambda);
    let lz = (z / 2.0).ln();
    let mut entries = [Complex64::new(0.0, 0.0); 4];
    for j in 0..4 {
        entries[j] = (logs.pre[j] + Complex64::new(0.0, lambda * logs.expo[j] * lz)).exp();
    }
    let mut m = TransferMatrix::new(lambda, Complex64::new(z, 0.0), entries, Method::Asymptotic);
    m.ln_scale = z * model.total_a();
    m
}

/// Leading large-`z` behaviour of `(T, R, L)`. `|R| = |L| = 1` exactly.
pub fn asymptotic_scattering_oracle(model: &PotentialModel, lambda: f64, z: f64) -> ScatteringTriple {
    let m = asymptotic_transfer_oracle(model, lambda, z);
    ScatteringTriple::from_transfer(&m).expect("oracle a_L1 never vanishes")
}

/// Largest defects of the analyticity invariants over a grid. Entry
/// defects are measured against the natural scale `e^{A |Re z|}`.
#[derive(Debug, Clone, Default, Serialize)]
pub struct InvariantReport {
    pub points: usize,
    /// `|a_L1(-z) - a_L1(z)|`, `|a_L3(-z) + a_L3(z)|` and companions.
    pub parity: f64,
    /// `|a_L1(z) - conj a_L4(conj z)|`, `|a_L2(z) - conj a_L3(conj z)|`.
    pub conjugate_symmetry: f64,
    /// `|det A_L - 1|` over `max(1, |a_L1 a_L4| + |a_L2 a_L3|)`; the
    /// cancellation floor grows like `e^{2A|Re z|}`.
    pub det: f64,
    /// Excess of `|a_Lj(iy)|` over 1.
    pub imaginary_axis_excess: f64,
    /// Excess of `|a_Lj(z)| / e^{A |Re z|}` over 1.
    pub growth_bound_excess: f64,
    /// Unitarity defect of `(T, R, L)` at real `z`.
    pub unitarity: f64,
    /// Whether `|T|` decreased along each sorted run of real `z > 0`.
    /// Observed behaviour only, not a theorem.
    pub transmission_monotone: bool,
}

impl InvariantReport {
    pub fn worst(&self) -> f64 {
        [
            self.parity,
            self.conjugate_symmetry,
            self.det,
            self.imaginary_axis_excess,
            self.growth_bound_excess,
            self.unitarity,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

fn rescaled(m: &TransferMatrix, ln_ref: f64) -> [Complex64; 4] {
    let f = (m.ln_scale - ln_ref).exp();
    m.entries.map(|e| e * f)
}

/// Evaluates every analyticity invariant on `lambdas x zs` with `method`.
pub fn invariant_suite(
    model: &PotentialModel,
    lambdas: &[f64],
    zs: &[Complex64],
    method: Method,
) -> Result<InvariantReport> {
    let a = model.total_a();
    let mut rep = InvariantReport { transmission_monotone: true, ..Default::default() };
    let n = zs.len();
    let mut all = Vec::with_capacity(3 * n);
    all.extend_from_slice(zs);
    all.extend(zs.iter().map(|z| -z));
    all.extend(zs.iter().map(|z| z.conj()));
    for &lambda in lambdas {
        let mats = transfer_sweep(model, lambda, &all, method)?;
        for k in 0..n {
            let z = zs[k];
            let ln_ref = a * z.re.abs();
            let p = rescaled(&mats[k], ln_ref);
            let q = rescaled(&mats[n + k], ln_ref);
            let c = rescaled(&mats[2 * n + k], ln_ref);
            rep.parity = rep
                .parity
                .max((p[0] - q[0]).norm())
                .max((p[1] + q[1]).norm())
                .max((p[2] + q[2]).norm())
                .max((p[3] - q[3]).norm());
            rep.conjugate_symmetry = rep
                .conjugate_symmetry
                .max((p[0] - c[3].conj()).norm())
                .max((p[1] - c[2].conj()).norm());
            rep.det = rep.det.max(det_defect(&mats[k]));
            for e in &p {
                rep.growth_bound_excess = rep.growth_bound_excess.max(e.norm() - 1.0);
            }
            if z.re == 0.0 {
                for e in &p {
                    rep.imaginary_axis_excess = rep.imaginary_axis_excess.max(e.norm() - 1.0);
                }
            }
            if z.im == 0.0 {
                let s = ScatteringTriple::from_transfer(&mats[k])?;
                rep.unitarity = rep.unitarity.max(s.unitarity_defect());
            }
            rep.points += 1;
        }
        let mut real: Vec<(f64, f64)> = zs
            .iter()
            .zip(&mats[..n])
            .filter(|(z, _)| z.im == 0.0 && z.re > 0.0)
            .map(|(z, m)| (z.re, -m.ln_a_l1().re))
            .collect();
        real.sort_by(|x, y| x.0.total_cmp(&y.0));
        if real.windows(2).any(|w| w[1].1 >= w[0].1) {
            rep.transmission_monotone = false;
        }
    }
    rep.growth_bound_excess = rep.growth_bound_excess.max(0.0);
    rep.imaginary_axis_excess = rep.imaginary_axis_excess.max(0.0);
    Ok(rep)
}

fn det_defect(m: &TransferMatrix) -> f64 {
    let e = &m.entries;
    let products = (e[0] * e[3]).norm() + (e[1] * e[2]).norm();
    let scale = (products.ln() + 2.0 * m.ln_scale).exp().max(1.0);
    (m.det() - 1.0).norm() / scale
}
