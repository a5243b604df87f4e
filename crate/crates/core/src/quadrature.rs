//! Adaptive Gauss-Kronrod quadrature and piecewise Chebyshev panels with
//! spectral cumulative integration.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::qd::{Cx, Real};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One 15-point Kronrod rule with its embedded 7-point Gauss estimate.
pub fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for k in 0..7 {
        let d = h * XGK[k];
        let s = f(c - d) + f(c + d);
        kron += WGK[k] * s;
        if k % 2 == 1 {
            gauss += WG[k / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

#[derive(PartialEq)]
struct Segment {
    a: f64,
    b: f64,
    val: f64,
    err: f64,
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.partial_cmp(&other.err).unwrap_or(Ordering::Equal)
    }
}

/// Globally adaptive G7-K15 on `[a, b]`; bisects the worst segment until
/// the summed error estimate meets `max(abs_tol, rel_tol |I|)`.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_segments: usize,
) -> Result<f64> {
    let (val, err) = gk15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, val, err });
    let mut total = val;
    let mut total_err = err;
    while total_err > abs_tol.max(rel_tol * total.abs()) {
        if heap.len() >= max_segments {
            return Err(Error::QuadratureFailure(format!(
                "{max_segments} segments on [{a}, {b}], error estimate {total_err:.3e}"
            )));
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        let (v1, e1) = gk15(&f, worst.a, mid);
        let (v2, e2) = gk15(&f, mid, worst.b);
        total += v1 + v2 - worst.val;
        total_err += e1 + e2 - worst.err;
        heap.push(Segment { a: worst.a, b: mid, val: v1, err: e1 });
        heap.push(Segment { a: mid, b: worst.b, val: v2, err: e2 });
        if !total.is_finite() {
            return Err(Error::QuadratureFailure("integrand is not finite".into()));
        }
    }
    // Resum to shed drift from the running updates.
    Ok(heap.iter().map(|s| s.val).sum())
}

/// Chebyshev-Lobatto nodes on `[-1, 1]`, increasing.
pub fn lobatto_nodes(p: usize) -> Vec<f64> {
    let m = (p - 1) as f64;
    (0..p).map(|j| -(std::f64::consts::PI * j as f64 / m).cos()).collect()
}

/// `S[i][j]` with `sum_j S[i][j] f(xi_j) = int_{-1}^{xi_i} f` for polynomials
/// of degree below `p`, row-major.
pub fn integration_matrix(p: usize) -> Vec<f64> {
    let n = p - 1;
    let nf = n as f64;
    let pi = std::f64::consts::PI;
    let nodes = lobatto_nodes(p);
    let mut s = vec![0.0; p * p];
    for j in 0..p {
        // Chebyshev coefficients of the j-th Lagrange basis function.
        let cj = if j == 0 || j == n { 0.5 } else { 1.0 };
        let mut a = vec![0.0; p + 2];
        for (k, ak) in a.iter_mut().enumerate().take(p) {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            *ak = 2.0 / nf * cj * sign * (k as f64 * pi * j as f64 / nf).cos();
        }
        a[0] *= 0.5;
        a[n] *= 0.5;
        // Antiderivative coefficients.
        let mut b = vec![0.0; p + 1];
        b[1] = a[0] - 0.5 * a[2];
        for k in 2..=p {
            b[k] = (a[k - 1] - a[k + 1]) / (2.0 * k as f64);
        }
        let mut at_minus_one = 0.0;
        for (k, bk) in b.iter().enumerate().skip(1) {
            at_minus_one += if k % 2 == 0 { *bk } else { -*bk };
        }
        b[0] = -at_minus_one;
        for (i, &xi) in nodes.iter().enumerate() {
            let th = xi.clamp(-1.0, 1.0).acos();
            let v: f64 = b.iter().enumerate().map(|(k, bk)| bk * (k as f64 * th).cos()).sum();
            s[i * p + j] = v;
        }
    }
    s
}

/// Uniform panels of Chebyshev-Lobatto points covering `[lo, hi]`.
///
/// Panel boundaries are shared, so boundary nodes appear twice; values at
/// duplicated nodes always coincide.
#[derive(Debug, Clone)]
pub struct PanelGrid {
    pub lo: f64,
    pub hi: f64,
    pub p: usize,
    pub panels: usize,
    pub width: f64,
    pub nodes: Vec<f64>,
    s_left: Vec<f64>,
    s_right: Vec<f64>,
    weights: Vec<f64>,
}

impl PanelGrid {
    pub fn new(lo: f64, hi: f64, max_width: f64, p: usize) -> Self {
        assert!(hi > lo && max_width > 0.0 && p >= 3);
        let panels = ((hi - lo) / max_width).ceil().max(1.0) as usize;
        let width = (hi - lo) / panels as f64;
        let base = lobatto_nodes(p);
        let mut nodes = Vec::with_capacity(panels * p);
        for k in 0..panels {
            let mid = lo + (k as f64 + 0.5) * width;
            for &xi in &base {
                nodes.push(mid + 0.5 * width * xi);
            }
            // Pin panel ends exactly.
            nodes[k * p] = lo + k as f64 * width;
            nodes[k * p + p - 1] = if k + 1 == panels { hi } else { lo + (k + 1) as f64 * width };
        }
        let s_left = integration_matrix(p);
        let weights: Vec<f64> = s_left[(p - 1) * p..].to_vec();
        let mut s_right = vec![0.0; p * p];
        for i in 0..p {
            for j in 0..p {
                s_right[i * p + j] = weights[j] - s_left[i * p + j];
            }
        }
        Self { lo, hi, p, panels, width, nodes, s_left, s_right, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Clenshaw-Curtis integral over the whole grid.
    pub fn integrate_f64(&self, v: &[f64]) -> f64 {
        let h = 0.5 * self.width;
        v.chunks(self.p)
            .map(|c| c.iter().zip(&self.weights).map(|(a, w)| a * w).sum::<f64>() * h)
            .sum()
    }

    /// `out[i] = int_{nodes[i]}^{hi} v`.
    pub fn cumulative_right<R: Real>(&self, v: &[Cx<R>], out: &mut [Cx<R>]) {
        self.cumulative(v, out, true)
    }

    /// `out[i] = int_{lo}^{nodes[i]} v`.
    pub fn cumulative_left<R: Real>(&self, v: &[Cx<R>], out: &mut [Cx<R>]) {
        self.cumulative(v, out, false)
    }

    fn cumulative<R: Real>(&self, v: &[Cx<R>], out: &mut [Cx<R>], from_right: bool) {
        let p = self.p;
        let h = 0.5 * self.width;
        let mat = if from_right { &self.s_right } else { &self.s_left };
        let mut carry = Cx::<R>::zero();
        let order: Box<dyn Iterator<Item = usize>> = if from_right {
            Box::new((0..self.panels).rev())
        } else {
            Box::new(0..self.panels)
        };
        for k in order {
            let vk = &v[k * p..(k + 1) * p];
            let ok = &mut out[k * p..(k + 1) * p];
            for i in 0..p {
                let row = &mat[i * p..(i + 1) * p];
                let mut acc = Cx::<R>::zero();
                for j in 0..p {
                    acc = acc.add(vk[j].scale(row[j]));
                }
                ok[i] = carry.add(acc.scale(h));
            }
            let mut tot = Cx::<R>::zero();
            for j in 0..p {
                tot = tot.add(vk[j].scale(self.weights[j]));
            }
            carry = carry.add(tot.scale(h));
        }
    }

    /// Barycentric interpolation of panel data at an arbitrary point.
    pub fn interpolate(&self, v: &[f64], t: f64) -> f64 {
        let k = (((t - self.lo) / self.width).floor().max(0.0) as usize).min(self.panels - 1);
        let p = self.p;
        let nodes = &self.nodes[k * p..(k + 1) * p];
        let vals = &v[k * p..(k + 1) * p];
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 0..p {
            let d = t - nodes[j];
            if d == 0.0 {
                return vals[j];
            }
            let mut w = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == p - 1 {
                w *= 0.5;
            }
            num += w / d * vals[j];
            den += w / d;
        }
        num / den
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn gk_integrates_smooth_function() {
        let v = integrate(|x: f64| x.cos(), 0.0, 3.0, 1e-15, 1e-14, 100).unwrap();
        assert!((v - 3.0f64.sin()).abs() < 1e-14);
    }

    #[test]
    fn gk_budget_is_reported() {
        let r = integrate(|x: f64| x.powf(-0.9), 0.0, 1.0, 1e-15, 0.0, 4);
        assert!(matches!(r, Err(Error::QuadratureFailure(_))));
    }

    #[test]
    fn matrix_integrates_polynomials() {
        let p = 12;
        let s = integration_matrix(p);
        let x = lobatto_nodes(p);
        for i in 0..p {
            let num: f64 = (0..p).map(|j| s[i * p + j] * x[j].powi(5)).sum();
            let exact = (x[i].powi(6) - 1.0) / 6.0;
            assert!((num - exact).abs() < 1e-14);
        }
    }

    #[test]
    fn cumulative_both_directions() {
        let g = PanelGrid::new(-2.0, 3.0, 0.7, 16);
        let v: Vec<Cx<f64>> =
            g.nodes.iter().map(|&t| Cx::from_c64(Complex64::new(t.exp(), t.sin()))).collect();
        let mut r = vec![Cx::zero(); g.len()];
        let mut l = vec![Cx::zero(); g.len()];
        g.cumulative_right(&v, &mut r);
        g.cumulative_left(&v, &mut l);
        for (i, &t) in g.nodes.iter().enumerate() {
            let er = Complex64::new(3f64.exp() - t.exp(), t.cos() - 3f64.cos());
            let el = Complex64::new(t.exp() - (-2f64).exp(), (-2f64).cos() - t.cos());
            assert!((r[i].to_c64() - er).norm() < 1e-13);
            assert!((l[i].to_c64() - el).norm() < 1e-13);
        }
    }

    #[test]
    fn interpolation_is_spectral() {
        let g = PanelGrid::new(0.0, 2.0, 0.5, 16);
        let v: Vec<f64> = g.nodes.iter().map(|t| (3.0 * t).sin()).collect();
        for &t in &[0.01, 0.77, 1.5, 1.999] {
            assert!((g.interpolate(&v, t) - (3.0 * t).sin()).abs() < 1e-13);
        }
    }
}
