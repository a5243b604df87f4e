//! Jost solutions and the transfer matrix `A_L(lambda, z)` of the reduced
//! Dirac system `psi' = i Gamma^1 (lambda + z a(x) Gamma^2) psi`.
//!
//! Three independent backends: the Faddeev series in `z` ([`series`]),
//! direct integration ([`ode`]), and Wronskians of left and right Jost
//! solutions at an interior point ([`wronskian`]).

pub mod ode;
pub mod series;
pub mod wronskian;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::potential::PotentialModel;

pub use ode::{jost_ode_oracle, transfer_matrix_ode, OdeTransfer};
pub use series::{FaddeevSeries, Precision, SeriesOptions, Side};
pub use wronskian::{series_and_wronskian, wronskian_transfer, wronskian_transfer_at, WronskianReport};

/// `|z| A` above which [`Method::Auto`] switches from the series to the ODE.
pub const AUTO_SERIES_LIMIT: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Auto,
    Series,
    Ode,
    Wronskian,
    Asymptotic,
}

impl Method {
    pub fn tag(&self) -> &'static str {
        match self {
            Method::Auto => "auto",
            Method::Series => "series",
            Method::Ode => "ode",
            Method::Wronskian => "wronskian",
            Method::Asymptotic => "asymptotic",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "auto" => Ok(Method::Auto),
            "series" => Ok(Method::Series),
            "ode" => Ok(Method::Ode),
            "wronskian" => Ok(Method::Wronskian),
            "asymptotic" => Ok(Method::Asymptotic),
            other => Err(Error::InvalidInput(format!("unknown method '{other}'"))),
        }
    }
}

/// `A_L(lambda, z)`. The true entries are `entries[j] * e^{ln_scale}`; the
/// scale is zero unless the values would overflow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransferMatrix {
    pub lambda: f64,
    pub z: Complex64,
    pub entries: [Complex64; 4],
    pub ln_scale: f64,
    pub method: Method,
}

impl TransferMatrix {
    pub fn new(lambda: f64, z: Complex64, entries: [Complex64; 4], method: Method) -> Self {
        Self { lambda, z, entries, ln_scale: 0.0, method }
    }

    pub fn identity(lambda: f64, method: Method) -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        Self::new(lambda, zero, [one, zero, zero, one], method)
    }

    fn entry(&self, j: usize) -> Complex64 {
        self.entries[j] * self.ln_scale.exp()
    }

    pub fn a_l1(&self) -> Complex64 {
        self.entry(0)
    }

    pub fn a_l2(&self) -> Complex64 {
        self.entry(1)
    }

    pub fn a_l3(&self) -> Complex64 {
        self.entry(2)
    }

    pub fn a_l4(&self) -> Complex64 {
        self.entry(3)
    }

    /// `ln a_L1`, finite even when `a_L1` itself overflows.
    pub fn ln_a_l1(&self) -> Complex64 {
        self.entries[0].ln() + self.ln_scale
    }

    /// Determinant of the unscaled matrix.
    pub fn det(&self) -> Complex64 {
        let e = &self.entries;
        (e[0] * e[3] - e[1] * e[2]) * (2.0 * self.ln_scale).exp()
    }

    /// Largest relative entrywise difference to `other`, measured against
    /// the largest entry of either matrix.
    pub fn max_rel_diff(&self, other: &TransferMatrix) -> f64 {
        let shift = self.ln_scale.max(other.ln_scale);
        let a: Vec<Complex64> =
            self.entries.iter().map(|e| e * (self.ln_scale - shift).exp()).collect();
        let b: Vec<Complex64> =
            other.entries.iter().map(|e| e * (other.ln_scale - shift).exp()).collect();
        let mut worst = 0.0f64;
        for j in 0..4 {
            let d = (a[j] - b[j]).norm();
            let m = a[j].norm().max(b[j].norm());
            if m > 0.0 {
                worst = worst.max(d / m);
            }
        }
        worst
    }
}

fn check_inputs(lambda: f64, z: Complex64) -> Result<()> {
    if !lambda.is_finite() || !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::InvalidInput(format!("non-finite input lambda = {lambda}, z = {z}")));
    }
    Ok(())
}

/// `A_L(lambda, z)` from the Faddeev series. `|z| A <= 300`.
pub fn transfer_matrix_series(model: &PotentialModel, lambda: f64, z: Complex64) -> Result<TransferMatrix> {
    check_inputs(lambda, z)?;
    if z.norm() == 0.0 {
        return Ok(TransferMatrix::identity(lambda, Method::Series));
    }
    let opts = SeriesOptions { real_axis_only: z.im == 0.0, ..Default::default() };
    let s = FaddeevSeries::build(model, Side::Left, lambda, z.norm(), &opts)?;
    Ok(TransferMatrix::new(lambda, z, s.limit_matrix(z)?, Method::Series))
}

/// Picks the backend for one `(lambda, z)`.
pub fn resolve_method(model: &PotentialModel, z: Complex64, method: Method) -> Method {
    match method {
        Method::Auto => {
            if z.norm() * model.total_a() <= AUTO_SERIES_LIMIT {
                Method::Series
            } else {
                Method::Ode
            }
        }
        m => m,
    }
}

/// `A_L(lambda, z)` by the requested backend.
pub fn transfer_matrix(model: &PotentialModel, lambda: f64, z: Complex64, method: Method) -> Result<TransferMatrix> {
    match resolve_method(model, z, method) {
        Method::Series => transfer_matrix_series(model, lambda, z),
        Method::Ode => transfer_matrix_ode(model, lambda, z, &Default::default()).map(|o| o.matrix),
        Method::Wronskian => wronskian_transfer(model, lambda, z),
        Method::Asymptotic => {
            if z.im != 0.0 || z.re <= 0.0 {
                return Err(Error::InvalidInput("asymptotic oracle needs real z > 0".into()));
            }
            Ok(crate::scattering::asymptotic_transfer_oracle(model, lambda, z.re))
        }
        Method::Auto => unreachable!("resolved above"),
    }
}

/// `A_L` at one energy for many `z`, sharing one series across all points
/// the series handles and running the rest in parallel.
pub fn transfer_sweep(
    model: &PotentialModel,
    lambda: f64,
    zs: &[Complex64],
    method: Method,
) -> Result<Vec<TransferMatrix>> {
    let resolved: Vec<Method> = zs.iter().map(|&z| resolve_method(model, z, method)).collect();
    let series_radius = zs
        .iter()
        .zip(&resolved)
        .filter(|(_, m)| **m == Method::Series)
        .map(|(z, _)| z.norm())
        .fold(0.0, f64::max);
    let series = if series_radius > 0.0 {
        let real = zs.iter().zip(&resolved).all(|(z, m)| *m != Method::Series || z.im == 0.0);
        let opts = SeriesOptions { real_axis_only: real, ..Default::default() };
        Some(FaddeevSeries::build(model, Side::Left, lambda, series_radius, &opts)?)
    } else {
        None
    };
    let jobs: Vec<(Complex64, Method)> = zs.iter().copied().zip(resolved).collect();
    par::map(&jobs, |&(z, m)| -> Result<TransferMatrix> {
        check_inputs(lambda, z)?;
        match m {
            Method::Series => {
                if z.norm() == 0.0 {
                    return Ok(TransferMatrix::identity(lambda, Method::Series));
                }
                let s = series.as_ref().expect("built for series points");
                Ok(TransferMatrix::new(lambda, z, s.limit_matrix(z)?, Method::Series))
            }
            other => transfer_matrix(model, lambda, z, other),
        }
    })
    .into_iter()
    .collect()
}
