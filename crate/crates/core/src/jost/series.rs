//! Faddeev power series in `z` for the Jost solutions.
//!
//! With `m1 = sum z^{2n} m1^n` and `m3 = sum z^{2n+1} m3^n` (left side):
//!
//! ```text
//! m3^n(x)     =  i e^{-2i lambda x} int_x^inf e^{2i lambda y} a m1^n dy
//! m1^{n+1}(x) = -i int_x^inf a m3^n dy
//! ```
//!
//! and `m4^n = conj(m1^n)`, `m2^n = conj(m3^n)`. The right side runs the
//! same recursion from `-inf` with the signs of `i` flipped. Coefficients
//! are stored multiplied by `s^{2n}` (resp. `s^{2n+1}`), `s` a power of two
//! near `z_max`, so that evaluation at `w = z / s` is exact in `w`.
//!
//! The alternating sums lose `~|z|A / ln 10` digits for imaginary `z`, and
//! more for real `z` at nonzero energy, so the recursion can run in
//! quad-double.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::potential::{PotentialModel, T_WINDOW};
use crate::qd::{Cx, Dd, Qd, Real};
use crate::quadrature::PanelGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Precision {
    Auto,
    Double,
    DoubleDouble,
    Quad,
}

#[derive(Debug, Clone)]
pub struct SeriesOptions {
    pub panel_nodes: usize,
    pub max_panel_width: f64,
    /// Largest number of terms before `TruncationBudgetExceeded`.
    pub term_cap: usize,
    /// Absolute bound on the dropped tail of every entry.
    pub tail_tol: f64,
    pub precision: Precision,
    /// Only real `z` will be evaluated (lets `lambda = 0` use doubles).
    pub real_axis_only: bool,
    /// Keep `f64` tables of every coefficient at every node.
    pub keep_tables: bool,
    /// Liouville values `X` at which coefficients are kept in full precision.
    pub probes: Vec<f64>,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        Self {
            panel_nodes: 24,
            max_panel_width: 1.0,
            term_cap: 600,
            tail_tol: TAIL_TOL,
            precision: Precision::Auto,
            real_axis_only: false,
            keep_tables: false,
            probes: Vec::new(),
        }
    }
}

/// Largest `|z| A` the series accepts.
pub const SERIES_ZA_CAP: f64 = 300.0;

/// Largest estimated cancellation (decimal digits) accepted in double-double.
const DD_DIGITS_LOST: f64 = 24.0;

/// Default for [`SeriesOptions::tail_tol`].
pub const TAIL_TOL: f64 = 1e-18;

/// Number of terms `N` with `sum_{n > N} (zA)^{2n} / (2n)! < tol`.
///
/// The bound is absolute: entries of size one (imaginary `z`) or far below
/// `cosh(zA)` (real `z` at nonzero energy) need it.
pub fn truncation_terms(za: f64, tol: f64) -> usize {
    let za = za.max(1e-3);
    let target = tol.ln();
    let mut ln_term = 0.0f64; // n = 0
    let mut n = 0usize;
    loop {
        n += 1;
        let k = 2.0 * n as f64;
        ln_term += 2.0 * za.ln() - (k * (k - 1.0)).ln();
        let ratio = za * za / ((k + 1.0) * (k + 2.0));
        if ratio < 0.5 && ln_term - (1.0 - ratio).ln() < target {
            return n;
        }
    }
}

/// Sample grid in the sigmoid variable with the data the recursion needs.
#[derive(Debug, Clone)]
pub struct SeriesGrid {
    pub panels: PanelGrid,
    pub x: Vec<f64>,
    /// `dX/dt` at the nodes.
    pub weight: Vec<f64>,
    /// `e^{2i lambda x}` at the nodes.
    pub phase: Vec<Complex64>,
    /// Liouville variable at the nodes, and its complement `A - X`.
    pub big_x: Vec<f64>,
    pub big_x_comp: Vec<f64>,
}

impl SeriesGrid {
    pub fn new(model: &PotentialModel, lambda: f64, z_max: f64, opts: &SeriesOptions) -> Self {
        let h = model.map.horizons;
        let max_dx = 0.5 / h.kappa_minus.min(-h.kappa_plus);
        let max_dbig_x = (0..=64)
            .map(|k| model.dbig_x_dt(-8.0 + 0.25 * k as f64))
            .fold(0.0, f64::max);
        let omega = 2.0 * lambda.abs() * max_dx + z_max * max_dbig_x;
        let width = opts.max_panel_width.min(6.0 / omega.max(1e-12));
        let panels = PanelGrid::new(-T_WINDOW, T_WINDOW, width, opts.panel_nodes);
        let mut x = Vec::with_capacity(panels.len());
        let mut weight = Vec::with_capacity(panels.len());
        let mut phase = Vec::with_capacity(panels.len());
        for &t in &panels.nodes {
            let p = model.map.point_of_t(t);
            let xi = model.map.x_of_t(t);
            x.push(xi);
            weight.push(model.a_at(&p) * model.map.dx_dt(&p));
            phase.push(Complex64::from_polar(1.0, 2.0 * lambda * xi));
        }
        let w_cx: Vec<Cx<f64>> = weight.iter().map(|&w| Cx { re: w, im: 0.0 }).collect();
        let mut cum = vec![Cx::<f64>::zero(); w_cx.len()];
        panels.cumulative_left(&w_cx, &mut cum);
        let left_tail = model.big_x_of_t(-T_WINDOW);
        let big_x: Vec<f64> = cum.iter().map(|c| c.re + left_tail).collect();
        panels.cumulative_right(&w_cx, &mut cum);
        let right_tail = model.big_x_complement_of_t(T_WINDOW);
        let big_x_comp: Vec<f64> = cum.iter().map(|c| c.re + right_tail).collect();
        Self { panels, x, weight, phase, big_x, big_x_comp }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Node whose Liouville value is closest to `big_x`.
    pub fn nearest_node(&self, big_x: f64) -> usize {
        let mut best = 0;
        let mut dist = f64::INFINITY;
        for (i, &v) in self.big_x.iter().enumerate() {
            let d = (v - big_x).abs();
            if d < dist {
                dist = d;
                best = i;
            }
        }
        best
    }
}

/// Coefficient sequences of one probe node.
#[derive(Debug, Clone)]
pub struct Probe {
    pub node: usize,
    pub x: f64,
    pub big_x: f64,
    pub m1: Vec<Cx<Qd>>,
    pub m3: Vec<Cx<Qd>>,
}

/// Values of the four Faddeev entries at a probe for one `z`.
#[derive(Debug, Clone, Copy)]
pub struct FaddeevValues {
    pub m1: Complex64,
    pub m2: Complex64,
    pub m3: Complex64,
    pub m4: Complex64,
}

#[derive(Debug, Clone)]
pub struct FaddeevSeries {
    pub side: Side,
    pub lambda: f64,
    pub z_max: f64,
    pub scale: f64,
    pub terms: usize,
    pub precision: Precision,
    pub grid: SeriesGrid,
    /// `s * int a m3^n`, scaled.
    pub alpha: Vec<Cx<Qd>>,
    /// `s * int e^{2i lambda x} a m1^n`, scaled.
    pub beta: Vec<Cx<Qd>>,
    pub probes: Vec<Probe>,
    /// Scaled `m1^n` and `m3^n` at every node, if requested.
    pub tables: Option<(Vec<Vec<Complex64>>, Vec<Vec<Complex64>>)>,
}

struct Raw {
    alpha: Vec<Cx<Qd>>,
    beta: Vec<Cx<Qd>>,
    probes: Vec<(Vec<Cx<Qd>>, Vec<Cx<Qd>>)>,
    tables: Option<(Vec<Vec<Complex64>>, Vec<Vec<Complex64>>)>,
}

fn recurse<R: Real>(
    grid: &SeriesGrid,
    side: Side,
    s: f64,
    terms: usize,
    probe_nodes: &[usize],
    keep: bool,
) -> Raw {
    let len = grid.len();
    let i = Complex64::i();
    // Left: m3 =  i conj(phi) int_x^inf,  m1' = -i int_x^inf.
    // Right: n3 = -i conj(phi) int_-inf^x, n1' =  i int_-inf^x.
    let (sign, end) = match side {
        Side::Left => (1.0, 0usize),
        Side::Right => (-1.0, len - 1),
    };
    let m3_mul: Vec<Complex64> = grid.phase.iter().map(|p| sign * s * i * p.conj()).collect();
    let g_mul: Vec<Complex64> =
        grid.phase.iter().zip(&grid.weight).map(|(p, &w)| p * w).collect();
    let m1_mul = -sign * s * i;

    let mut m1: Vec<Cx<R>> = vec![Cx::from_c64(Complex64::new(1.0, 0.0)); len];
    let mut m3: Vec<Cx<R>> = vec![Cx::zero(); len];
    let mut g: Vec<Cx<R>> = vec![Cx::zero(); len];
    let mut cum: Vec<Cx<R>> = vec![Cx::zero(); len];
    let mut alpha = Vec::with_capacity(terms + 1);
    let mut beta = Vec::with_capacity(terms + 1);
    let mut probes: Vec<(Vec<Cx<Qd>>, Vec<Cx<Qd>>)> =
        probe_nodes.iter().map(|_| (Vec::new(), Vec::new())).collect();
    let mut tables = keep.then(|| (Vec::new(), Vec::new()));

    let cumulate = |v: &[Cx<R>], out: &mut [Cx<R>]| match side {
        Side::Left => grid.panels.cumulative_right(v, out),
        Side::Right => grid.panels.cumulative_left(v, out),
    };

    for _n in 0..=terms {
        for k in 0..len {
            g[k] = m1[k].mul_c64(g_mul[k]);
        }
        cumulate(&g, &mut cum);
        beta.push(cum[end].scale(s).to_qd());
        for k in 0..len {
            m3[k] = cum[k].mul_c64(m3_mul[k]);
        }
        for (slot, &node) in probes.iter_mut().zip(probe_nodes) {
            slot.0.push(m1[node].to_qd());
            slot.1.push(m3[node].to_qd());
        }
        if let Some((t1, t3)) = tables.as_mut() {
            t1.push(m1.iter().map(|c| c.to_c64()).collect());
            t3.push(m3.iter().map(|c| c.to_c64()).collect());
        }
        for k in 0..len {
            g[k] = m3[k].scale(grid.weight[k]);
        }
        cumulate(&g, &mut cum);
        alpha.push(cum[end].scale(s).to_qd());
        for k in 0..len {
            m1[k] = cum[k].mul_c64(m1_mul);
        }
    }
    Raw { alpha, beta, probes, tables }
}

/// `sum_k c_k w^k` by Horner in quad-double.
fn horner(coeffs: &[Cx<Qd>], w: Complex64) -> Cx<Qd> {
    let mut acc = Cx::<Qd>::zero();
    for c in coeffs.iter().rev() {
        acc = acc.mul_c64(w).add(*c);
    }
    acc
}

fn even_odd(coeffs: &[Cx<Qd>], odd: bool, offset: usize) -> Vec<Cx<Qd>> {
    // Places coeffs[n] at power 2n + offset (+1 if odd).
    let shift = offset + usize::from(odd);
    let mut out = vec![Cx::<Qd>::zero(); 2 * coeffs.len() + shift];
    for (n, c) in coeffs.iter().enumerate() {
        out[2 * n + shift] = *c;
    }
    out
}

impl FaddeevSeries {
    pub fn build(
        model: &PotentialModel,
        side: Side,
        lambda: f64,
        z_max: f64,
        opts: &SeriesOptions,
    ) -> Result<Self> {
        let a = model.total_a();
        let za = z_max * a;
        if !(z_max >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidInput(format!("bad series request z_max = {z_max}, lambda = {lambda}")));
        }
        let terms = truncation_terms(za, opts.tail_tol);
        if za > SERIES_ZA_CAP || terms > opts.term_cap {
            return Err(Error::TruncationBudgetExceeded { cap: opts.term_cap, za });
        }
        let precision = match opts.precision {
            Precision::Auto => {
                // Off the real axis interior values grow like cosh(|z|A)
                // while the limits stay O(1), so about |z|A / ln 10 digits
                // cancel. On the real axis the partial sums stay within a few
                // digits of the result and double-double suffices.
                let lost = za / std::f64::consts::LN_10;
                if (lambda == 0.0 && opts.real_axis_only) || lost <= 2.0 {
                    Precision::Double
                } else if opts.real_axis_only || lost <= DD_DIGITS_LOST {
                    Precision::DoubleDouble
                } else {
                    Precision::Quad
                }
            }
            p => p,
        };
        let scale = if z_max > 0.0 { 2f64.powi(z_max.log2().floor() as i32) } else { 1.0 };
        let grid = SeriesGrid::new(model, lambda, z_max, opts);
        let probe_nodes: Vec<usize> = opts.probes.iter().map(|&bx| grid.nearest_node(bx)).collect();
        let raw = match precision {
            Precision::Quad => recurse::<Qd>(&grid, side, scale, terms, &probe_nodes, opts.keep_tables),
            Precision::DoubleDouble => recurse::<Dd>(&grid, side, scale, terms, &probe_nodes, opts.keep_tables),
            _ => recurse::<f64>(&grid, side, scale, terms, &probe_nodes, opts.keep_tables),
        };
        let probes = probe_nodes
            .iter()
            .zip(raw.probes)
            .map(|(&node, (m1, m3))| Probe {
                node,
                x: grid.x[node],
                big_x: grid.big_x[node],
                m1,
                m3,
            })
            .collect();
        Ok(Self {
            side,
            lambda,
            z_max,
            scale,
            terms,
            precision,
            grid,
            alpha: raw.alpha,
            beta: raw.beta,
            probes,
            tables: raw.tables,
        })
    }

    fn check_z(&self, z: Complex64) -> Result<Complex64> {
        if z.norm() > self.z_max * (1.0 + 1e-12) {
            return Err(Error::InvalidInput(format!(
                "|z| = {} exceeds the series radius {}",
                z.norm(),
                self.z_max
            )));
        }
        Ok(z / self.scale)
    }

    /// Entries `[a_1, a_2, a_3, a_4]` of the limit matrix of this side.
    ///
    /// For the left side this is `A_L(lambda, z)`.
    pub fn limit_matrix(&self, z: Complex64) -> Result<[Complex64; 4]> {
        let w = self.check_z(z)?;
        let i = Complex64::i();
        let sign = match self.side {
            Side::Left => 1.0,
            Side::Right => -1.0,
        };
        let scale_all = |v: &[Cx<Qd>], m: Complex64, conj: bool| -> Vec<Cx<Qd>> {
            v.iter().map(|c| if conj { c.conj() } else { *c }.mul_c64(m)).collect()
        };
        // a1 = 1 + sum (-i sign alpha_n) w^{2n+2}; a4 = conj coefficients with +i sign.
        let a1 = horner(&even_odd(&scale_all(&self.alpha, -sign * i, false), false, 2), w);
        let a4 = horner(&even_odd(&scale_all(&self.alpha, sign * i, true), false, 2), w);
        let a3 = horner(&even_odd(&scale_all(&self.beta, sign * i, false), true, 0), w);
        let a2 = horner(&even_odd(&scale_all(&self.beta, -sign * i, true), true, 0), w);
        let one = Complex64::new(1.0, 0.0);
        Ok([
            a1.to_c64() + one,
            a2.to_c64(),
            a3.to_c64(),
            a4.to_c64() + one,
        ])
    }

    /// Faddeev entries at probe `k` for one `z`.
    pub fn probe_values(&self, k: usize, z: Complex64) -> Result<FaddeevValues> {
        let w = self.check_z(z)?;
        let p = &self.probes[k];
        let conj = |v: &[Cx<Qd>]| -> Vec<Cx<Qd>> { v.iter().map(|c| c.conj()).collect() };
        let m1 = horner(&even_odd(&p.m1, false, 0), w).to_c64();
        let m3 = horner(&even_odd(&p.m3, true, 0), w).to_c64();
        let m4 = horner(&even_odd(&conj(&p.m1), false, 0), w).to_c64();
        let m2 = horner(&even_odd(&conj(&p.m3), true, 0), w).to_c64();
        Ok(FaddeevValues { m1, m2, m3, m4 })
    }

    /// Unscaled `m1^n` and `m3^n` at node `i` from the kept tables.
    pub fn table_coefficients(&self, node: usize, n: usize) -> Option<(Complex64, Complex64)> {
        let (t1, t3) = self.tables.as_ref()?;
        let s2n = self.scale.powi(2 * n as i32);
        Some((t1[n][node] / s2n, t3[n][node] / (s2n * self.scale)))
    }
}
