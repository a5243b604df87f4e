//! Adaptive Gragg-Bulirsch-Stoer integration of linear complex systems.
//!
//! Solutions of the Dirac system grow like `e^{|Re z| X}`; the state is
//! renormalized by powers of two when it gets large, and the accumulated
//! exponent is returned alongside it.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::qd::{Cx, Real};

const SEQ: [usize; 8] = [2, 4, 6, 8, 10, 12, 14, 16];
const RESCALE_ABOVE: f64 = 1.157_920_892_373_162e77; // 2^256

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub initial_step: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { rtol: 1e-12, initial_step: 0.05, max_steps: 200_000 }
    }
}

#[derive(Debug, Clone)]
pub struct OdeSolution<const N: usize> {
    /// State at the end point, to be multiplied by `2^log2_scale`.
    pub y: [Complex64; N],
    pub log2_scale: i64,
    pub steps: usize,
    pub rejected: usize,
}

fn max_norm<R: Real, const N: usize>(y: &[Cx<R>; N]) -> f64 {
    y.iter().map(|c| c.re.to_f64().abs().max(c.im.to_f64().abs())).fold(0.0, f64::max)
}

/// Modified midpoint rule returning the increment over `big_h` rather than
/// the new state, so rounding scales with the increment and not with `y`.
fn midpoint<R: Real, const N: usize, F>(f: &F, t: f64, y: &[Cx<R>; N], big_h: f64, n: usize) -> [Cx<R>; N]
where
    F: Fn(f64, &[Cx<R>; N], &mut [Cx<R>; N]),
{
    let h = big_h / n as f64;
    let mut dy = [Cx::<R>::zero(); N];
    let mut arg = [Cx::<R>::zero(); N];
    f(t, y, &mut dy);
    let mut d0 = [Cx::<R>::zero(); N];
    let mut d1 = [Cx::<R>::zero(); N];
    for i in 0..N {
        d1[i] = dy[i].scale(h);
    }
    for m in 1..n {
        for i in 0..N {
            arg[i] = y[i].add(d1[i]);
        }
        f(t + m as f64 * h, &arg, &mut dy);
        for i in 0..N {
            let d2 = d0[i].add(dy[i].scale(2.0 * h));
            d0[i] = d1[i];
            d1[i] = d2;
        }
    }
    for i in 0..N {
        arg[i] = y[i].add(d1[i]);
    }
    f(t + big_h, &arg, &mut dy);
    let mut out = [Cx::<R>::zero(); N];
    for i in 0..N {
        out[i] = d0[i].add(d1[i]).add(dy[i].scale(h)).scale(0.5);
    }
    out
}

/// Integrates `y' = f(t, y)` from `t0` to `t1` (either direction).
///
/// `observer` sees every accepted state with its running `log2` scale.
pub fn integrate<const N: usize, F>(
    f: F,
    t0: f64,
    t1: f64,
    y0: [Complex64; N],
    opts: &OdeOptions,
    observer: Option<&mut dyn FnMut(f64, &[Complex64; N], i64)>,
) -> Result<OdeSolution<N>>
where
    F: Fn(f64, &[Complex64; N], &mut [Complex64; N]),
{
    let g = |t: f64, y: &[Cx<f64>; N], dy: &mut [Cx<f64>; N]| {
        let yc = y.map(|c| c.to_c64());
        let mut out = [Complex64::default(); N];
        f(t, &yc, &mut out);
        for i in 0..N {
            dy[i] = Cx::from_c64(out[i]);
        }
    };
    let sol = match observer {
        Some(obs) => {
            let mut wrapped = |t: f64, y: &[Cx<f64>; N], l2: i64| obs(t, &y.map(|c| c.to_c64()), l2);
            integrate_in(g, t0, t1, y0.map(Cx::from_c64), opts, Some(&mut wrapped))?
        }
        None => integrate_in(g, t0, t1, y0.map(Cx::from_c64), opts, None)?,
    };
    Ok(OdeSolution { y: sol.y.map(|c| c.to_c64()), log2_scale: sol.log2_scale, steps: sol.steps, rejected: sol.rejected })
}

/// Solution of [`integrate_in`], in the working scalar type.
#[derive(Debug, Clone)]
pub struct ExtSolution<R: Real, const N: usize> {
    pub y: [Cx<R>; N],
    pub log2_scale: i64,
    pub steps: usize,
    pub rejected: usize,
}

/// [`integrate`] with the state carried in any [`Real`] scalar, e.g.
/// double-double when the answer is a small remnant of large interior
/// values.
pub fn integrate_in<R: Real, const N: usize, F>(
    f: F,
    t0: f64,
    t1: f64,
    y0: [Cx<R>; N],
    opts: &OdeOptions,
    mut observer: Option<&mut dyn FnMut(f64, &[Cx<R>; N], i64)>,
) -> Result<ExtSolution<R, N>>
where
    F: Fn(f64, &[Cx<R>; N], &mut [Cx<R>; N]),
{
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let mut t = t0;
    let mut y = y0;
    let mut log2_scale: i64 = 0;
    let mut h = opts.initial_step.abs() * dir;
    let (mut steps, mut rejected) = (0usize, 0usize);
    let mut prev: Vec<[Cx<R>; N]> = Vec::with_capacity(SEQ.len());

    while (t1 - t) * dir > 0.0 {
        if steps + rejected > opts.max_steps {
            return Err(Error::StepSizeUnderflow { x: t, step: h });
        }
        if (t + h - t1) * dir > 0.0 {
            h = t1 - t;
        }
        let scale = max_norm(&y).max(f64::MIN_POSITIVE);
        prev.clear();
        let mut accepted = None;
        for (j, &n) in SEQ.iter().enumerate() {
            let mut cur: Vec<[Cx<R>; N]> = Vec::with_capacity(j + 1);
            cur.push(midpoint(&f, t, &y, h, n));
            // Aitken-Neville extrapolation in h^2.
            for k in 1..=j {
                let ratio = (SEQ[j] as f64 / SEQ[j - k] as f64).powi(2);
                let w = 1.0 / (ratio - 1.0);
                let mut next = [Cx::<R>::zero(); N];
                for i in 0..N {
                    next[i] = cur[k - 1][i].add(cur[k - 1][i].sub(prev[k - 1][i]).scale(w));
                }
                cur.push(next);
            }
            if j >= 2 {
                let best = &cur[j];
                let mut e = 0.0f64;
                for i in 0..N {
                    e = e.max(best[i].sub(cur[j - 1][i]).to_c64().norm());
                }
                let err = e / (opts.rtol * scale);
                if err <= 1.0 {
                    accepted = Some((*best, err, j));
                    break;
                }
            }
            std::mem::swap(&mut prev, &mut cur);
        }
        match accepted {
            Some((dy, err, j)) => {
                t += h;
                for i in 0..N {
                    y[i] = y[i].add(dy[i]);
                }
                steps += 1;
                let m = max_norm(&y);
                if !m.is_finite() {
                    return Err(Error::StepSizeUnderflow { x: t, step: h });
                }
                if m > RESCALE_ABOVE {
                    let e = m.log2().floor() as i32;
                    let s = 2f64.powi(-e);
                    for c in y.iter_mut() {
                        *c = c.scale(s);
                    }
                    log2_scale += e as i64;
                }
                if let Some(obs) = observer.as_deref_mut() {
                    obs(t, &y, log2_scale);
                }
                let order = (2 * j + 1) as f64;
                let fac = (0.94 * (0.65 / err.max(1e-10)).powf(1.0 / order)).clamp(0.2, 4.0);
                let fac = if j <= 3 { fac.max(1.5) } else { fac };
                h *= fac;
            }
            None => {
                rejected += 1;
                h *= 0.3;
                if h.abs() < 1e-12 * t.abs().max(1.0) {
                    return Err(Error::StepSizeUnderflow { x: t, step: h });
                }
            }
        }
    }
    Ok(ExtSolution { y, log2_scale, steps, rejected })
}
