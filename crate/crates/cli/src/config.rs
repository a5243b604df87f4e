//! Run configuration, read from a TOML file and validated before any
//! computation starts.
//!
//! ```toml
//! [geometry]
//! mass = 1.0
//! charge = 0.5              # or q_squared = 0.25
//! cosmological_constant = 0.05
//! c = 0.0
//!
//! [scattering]
//! energies = [0.5, 1.0]
//! n = [1, 2, 3]             # or n_range = [1, 30]
//! method = "auto"           # auto | series | ode | wronskian
//!
//! [scattering.z_grid]       # verify only
//! re = [0.0, 1.0, 2.0]
//! im = [0.5, 1.5]
//!
//! [inverse]
//! data = "forward.csv"      # relative to the config file
//! side = "L"                # T | R | L
//! energy = 1.0              # picks rows when the data holds several
//! kappa_p = 2
//!
//! [tolerances]
//! unitarity = 1e-8
//! invariants = 1e-8
//! cross_oracle = 1e-6
//! ```

use std::path::{Path, PathBuf};

use dsrn_core::geometry::horizon_roots;
use dsrn_core::inverse::{Coefficient, FitOptions};
use dsrn_core::{BlackHoleParams, Complex64, Method};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub scattering: ScatteringConfig,
    #[serde(default)]
    pub inverse: InverseConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub mass: f64,
    pub charge: Option<f64>,
    pub q_squared: Option<f64>,
    pub cosmological_constant: f64,
    #[serde(default)]
    pub c: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZGrid {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl Default for ZGrid {
    fn default() -> Self {
        Self { re: vec![0.0, 1.0, 2.0, 3.0], im: vec![0.5, 1.5, 3.0] }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatteringConfig {
    #[serde(default = "default_energies")]
    pub energies: Vec<f64>,
    #[serde(default)]
    pub n: Vec<f64>,
    pub n_range: Option<[u32; 2]>,
    #[serde(default)]
    pub z_grid: ZGrid,
    #[serde(default = "default_method")]
    pub method: String,
}

fn default_energies() -> Vec<f64> {
    vec![1.0]
}

fn default_method() -> String {
    "auto".into()
}

impl Default for ScatteringConfig {
    fn default() -> Self {
        Self {
            energies: default_energies(),
            n: Vec::new(),
            n_range: None,
            z_grid: ZGrid::default(),
            method: default_method(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InverseConfig {
    pub data: Option<PathBuf>,
    #[serde(default = "default_side")]
    pub side: String,
    pub energy: Option<f64>,
    #[serde(default = "default_p")]
    pub kappa_p: u32,
    #[serde(default = "default_starts")]
    pub starts: usize,
    #[serde(default = "default_iterations")]
    pub max_iterations: usize,
    /// Stop early once a start reaches this residual relative to the data.
    #[serde(default = "default_accept")]
    pub accept_residual: f64,
    #[serde(default = "default_method_fit")]
    pub method: String,
}

fn default_side() -> String {
    "L".into()
}

fn default_p() -> u32 {
    2
}

fn default_starts() -> usize {
    FitOptions::default().starts
}

fn default_iterations() -> usize {
    FitOptions::default().max_iterations
}

fn default_accept() -> f64 {
    FitOptions::default().accept_residual
}

fn default_method_fit() -> String {
    FitOptions::default().method.tag().into()
}

impl Default for InverseConfig {
    fn default() -> Self {
        Self {
            data: None,
            side: default_side(),
            energy: None,
            kappa_p: default_p(),
            starts: default_starts(),
            max_iterations: default_iterations(),
            accept_residual: default_accept(),
            method: default_method_fit(),
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, serde::Serialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "tol_unitarity")]
    pub unitarity: f64,
    #[serde(default = "tol_invariants")]
    pub invariants: f64,
    /// Series against ODE, relative to the matrix scale.
    #[serde(default = "tol_cross")]
    pub cross_oracle: f64,
}

fn tol_unitarity() -> f64 {
    1e-8
}

fn tol_invariants() -> f64 {
    1e-8
}

fn tol_cross() -> f64 {
    1e-6
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { unitarity: tol_unitarity(), invariants: tol_invariants(), cross_oracle: tol_cross() }
    }
}

/// A parsed and validated configuration with its provenance.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: RunConfig,
    pub params: BlackHoleParams,
    pub ns: Vec<f64>,
    pub method: Method,
    pub digest: String,
    pub base_dir: PathBuf,
}

impl Loaded {
    pub fn side(&self) -> Result<Coefficient, CliError> {
        match self.config.inverse.side.to_ascii_uppercase().as_str() {
            "T" => Ok(Coefficient::T),
            "R" => Ok(Coefficient::R),
            "L" => Ok(Coefficient::L),
            other => Err(CliError::Usage(format!("inverse.side must be T, R or L, got '{other}'"))),
        }
    }

    pub fn data_path(&self) -> Result<PathBuf, CliError> {
        let p = self
            .config
            .inverse
            .data
            .as_ref()
            .ok_or_else(|| CliError::Usage("inverse.data is not set".into()))?;
        Ok(if p.is_absolute() { p.clone() } else { self.base_dir.join(p) })
    }

    pub fn fit_options(&self) -> Result<FitOptions, CliError> {
        let inv = &self.config.inverse;
        Ok(FitOptions {
            starts: inv.starts,
            max_iterations: inv.max_iterations,
            accept_residual: inv.accept_residual,
            method: parse_method(&inv.method)?,
            ..FitOptions::default()
        })
    }

    pub fn z_grid(&self) -> Vec<Complex64> {
        let g = &self.config.scattering.z_grid;
        let mut out = Vec::with_capacity(g.re.len() * g.im.len());
        for &re in &g.re {
            for &im in &g.im {
                out.push(Complex64::new(re, im));
            }
        }
        out
    }
}

fn parse_method(s: &str) -> Result<Method, CliError> {
    let m: Method = s.parse().map_err(|e| CliError::Usage(format!("{e}")))?;
    if m == Method::Asymptotic {
        return Err(CliError::Usage("the asymptotic oracle is not a solver backend".into()));
    }
    Ok(m)
}

fn finite(name: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{name} must be finite, got {v}")))
    }
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{name} must be positive, got {v}")))
    }
}

pub fn load(path: &Path) -> Result<Loaded, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|e| CliError::Usage(format!("config {} is not UTF-8: {e}", path.display())))?;
    let config: RunConfig = toml::from_str(text)
        .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
    let digest = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    validate(config, digest, base_dir)
}

pub fn validate(config: RunConfig, digest: String, base_dir: PathBuf) -> Result<Loaded, CliError> {
    let g = &config.geometry;
    finite("geometry.mass", g.mass)?;
    finite("geometry.cosmological_constant", g.cosmological_constant)?;
    finite("geometry.c", g.c)?;
    let params = match (g.charge, g.q_squared) {
        (Some(_), Some(_)) => {
            return Err(CliError::Usage("set geometry.charge or geometry.q_squared, not both".into()))
        }
        (Some(q), None) => {
            finite("geometry.charge", q)?;
            BlackHoleParams::new(g.mass, q, g.cosmological_constant)
        }
        (None, q2) => {
            let q2 = q2.unwrap_or(0.0);
            finite("geometry.q_squared", q2)?;
            BlackHoleParams::from_q2(g.mass, q2, g.cosmological_constant)
        }
    }
    .map_err(|e| CliError::core("geometry::BlackHoleParams::new", e))?;
    horizon_roots(&params).map_err(|e| CliError::core("geometry::horizon_roots", e))?;

    let s = &config.scattering;
    for &e in &s.energies {
        finite("scattering.energies", e)?;
    }
    let mut ns = s.n.clone();
    if let Some([lo, hi]) = s.n_range {
        if !s.n.is_empty() {
            return Err(CliError::Usage("set scattering.n or scattering.n_range, not both".into()));
        }
        ns = (lo..=hi).map(f64::from).collect();
    }
    for &n in &ns {
        positive("scattering.n", n)?;
    }
    for &v in s.z_grid.re.iter().chain(&s.z_grid.im) {
        finite("scattering.z_grid", v)?;
    }
    let method = parse_method(&s.method)?;

    let inv = &config.inverse;
    if inv.kappa_p < 2 {
        return Err(CliError::Usage(format!("inverse.kappa_p must be >= 2, got {}", inv.kappa_p)));
    }
    if let Some(e) = inv.energy {
        finite("inverse.energy", e)?;
    }
    positive("inverse.accept_residual", inv.accept_residual)?;
    parse_method(&inv.method)?;

    let t = &config.tolerances;
    positive("tolerances.unitarity", t.unitarity)?;
    positive("tolerances.invariants", t.invariants)?;
    positive("tolerances.cross_oracle", t.cross_oracle)?;

    let loaded = Loaded { config, params, ns, method, digest, base_dir };
    loaded.side()?;
    Ok(loaded)
}
