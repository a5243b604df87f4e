use std::path::PathBuf;

use serde_json::{json, Value};

use dsrn_core::inverse::{fit_parameters, kappa_from_ratios, Coefficient};
use dsrn_core::jost::transfer_matrix;
use dsrn_core::scattering::{invariant_suite, s_matrix_sweep};
use dsrn_core::{Complex64, Method, PotentialModel, TransferMatrix};

use crate::config::Loaded;
use crate::data::read_dataset;
use crate::output::{render_report, render_table, Cell, Format, Provenance, Table};
use crate::CliError;

/// Everything a subcommand needs besides its own config section.
pub struct Run {
    pub loaded: Loaded,
    pub format: Format,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl Run {
    fn provenance(&self, command: &'static str) -> Provenance {
        Provenance { command, config_sha256: self.loaded.digest.clone(), seed: self.seed }
    }

    fn model(&self) -> Result<PotentialModel, CliError> {
        PotentialModel::new(self.loaded.params, self.loaded.config.geometry.c)
            .map_err(|e| CliError::core("potential::PotentialModel::new", e))
    }
}

/// One row per `(lambda, n)`: `T`, `R`, `L`, the unitarity defect and the
/// backend that produced it.
pub fn run_forward(run: &Run) -> Result<Vec<u8>, CliError> {
    let model = run.model()?;
    let zs: Vec<Complex64> = run.loaded.ns.iter().map(|&n| Complex64::new(n, 0.0)).collect();
    let mut rows = Vec::new();
    for &lambda in &run.loaded.config.scattering.energies {
        let triples = s_matrix_sweep(&model, lambda, &zs, run.loaded.method)
            .map_err(|e| CliError::core("scattering::s_matrix", e))?;
        for s in triples {
            rows.push(vec![
                Cell::Num(lambda),
                Cell::Num(s.z.re),
                Cell::Num(s.t.re),
                Cell::Num(s.t.im),
                Cell::Num(s.r.re),
                Cell::Num(s.r.im),
                Cell::Num(s.l.re),
                Cell::Num(s.l.im),
                Cell::Num(s.unitarity_defect()),
                Cell::Text(s.method.tag().into()),
            ]);
        }
    }
    let table = Table {
        columns: vec!["lambda", "n", "t_re", "t_im", "r_re", "r_im", "l_re", "l_im", "unitarity_defect", "method"],
        pairs: vec!["t", "r", "l"],
        rows,
    };
    render_table(&table, run.format, &run.provenance("forward"))
}

fn to_value<T: serde::Serialize>(v: &T) -> Result<Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Io(format!("serializing report: {e}")))
}

/// Recovers `(M, Q^2, Lambda, c)` from a data file.
pub fn run_invert(run: &Run) -> Result<Vec<u8>, CliError> {
    let side = run.loaded.side()?;
    let data = read_dataset(&run.loaded.data_path()?, side, run.loaded.config.inverse.energy)?;
    let opts = run.loaded.fit_options()?;
    let rec = fit_parameters(&data, &opts).map_err(|e| CliError::inversion("inverse::fit_parameters", e))?;
    let kappa = match side {
        Coefficient::T => Value::Null,
        _ => match kappa_from_ratios(&data, run.loaded.config.inverse.kappa_p) {
            Ok(k) => to_value(&k)?,
            Err(e) => {
                log::warn!("inverse::kappa_from_ratios: {e}");
                json!({ "error": e.to_string() })
            }
        },
    };
    let report = json!({
        "energy": data.lambda,
        "side": format!("{side:?}"),
        "points": data.entries.len(),
        "recovered": to_value(&rec)?,
        "charge_sign": "unidentifiable; only Q^2 is determined",
        "kappa_from_ratios": kappa,
    });
    render_report(report, run.format, &run.provenance("invert"))
}

/// Surface gravity from ratios `L(pn)/L(n)` or `R(pn)/R(n)`.
pub fn run_reconstruct_kappa(run: &Run) -> Result<Vec<u8>, CliError> {
    let side = run.loaded.side()?;
    let data = read_dataset(&run.loaded.data_path()?, side, run.loaded.config.inverse.energy)?;
    let p = run.loaded.config.inverse.kappa_p;
    let est = kappa_from_ratios(&data, p).map_err(|e| CliError::inversion("inverse::kappa_from_ratios", e))?;
    let report = json!({
        "energy": data.lambda,
        "side": format!("{side:?}"),
        "p": p,
        "estimate": to_value(&est)?,
    });
    render_report(report, run.format, &run.provenance("reconstruct-kappa"))
}

/// Largest entry difference over the largest entry of either matrix.
fn normwise_gap(a: &TransferMatrix, b: &TransferMatrix) -> f64 {
    let shift = a.ln_scale.max(b.ln_scale);
    let ea = a.entries.map(|e| e * (a.ln_scale - shift).exp());
    let eb = b.entries.map(|e| e * (b.ln_scale - shift).exp());
    let scale = ea.iter().chain(&eb).map(|e| e.norm()).fold(0.0, f64::max);
    let gap = ea.iter().zip(&eb).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    if scale > 0.0 {
        gap / scale
    } else {
        gap
    }
}

/// Outcome of `verify`: the rendered report and whether every check held.
pub struct Verified {
    pub bytes: Vec<u8>,
    pub failures: Vec<String>,
}

/// Invariant suite on the z-grid, unitarity on the n list, and series
/// against ODE on the n list.
pub fn run_verify(run: &Run) -> Result<Verified, CliError> {
    let model = run.model()?;
    let cfg = &run.loaded.config;
    let tol = cfg.tolerances;
    let energies = &cfg.scattering.energies;
    let ns: Vec<f64> = if run.loaded.ns.is_empty() { (1..=5).map(f64::from).collect() } else { run.loaded.ns.clone() };
    let real: Vec<Complex64> = ns.iter().map(|&n| Complex64::new(n, 0.0)).collect();

    let inv = invariant_suite(&model, energies, &run.loaded.z_grid(), run.loaded.method)
        .map_err(|e| CliError::core("scattering::invariant_suite", e))?;

    let mut unitarity = 0.0f64;
    let mut cross = 0.0f64;
    let mut cross_rows = Vec::new();
    for &lambda in energies {
        for s in s_matrix_sweep(&model, lambda, &real, run.loaded.method)
            .map_err(|e| CliError::core("scattering::s_matrix", e))?
        {
            unitarity = unitarity.max(s.unitarity_defect());
        }
        let pairs: Vec<(TransferMatrix, TransferMatrix)> = dsrn_core::par::map(&real, |&z| {
            let s = transfer_matrix(&model, lambda, z, Method::Series)?;
            let o = transfer_matrix(&model, lambda, z, Method::Ode)?;
            Ok((s, o))
        })
        .into_iter()
        .collect::<dsrn_core::Result<_>>()
        .map_err(|e| CliError::core("jost::transfer_matrix", e))?;
        for (z, (s, o)) in real.iter().zip(&pairs) {
            let g = normwise_gap(s, o);
            cross = cross.max(g);
            cross_rows.push(json!({ "lambda": lambda, "n": z.re, "series_vs_ode": g }));
        }
    }

    let mut failures = Vec::new();
    if inv.worst() > tol.invariants {
        failures.push(format!("invariants {:.3e} > {:.3e}", inv.worst(), tol.invariants));
    }
    if unitarity > tol.unitarity {
        failures.push(format!("unitarity {unitarity:.3e} > {:.3e}", tol.unitarity));
    }
    if cross > tol.cross_oracle {
        failures.push(format!("cross-oracle {cross:.3e} > {:.3e}", tol.cross_oracle));
    }
    let report = json!({
        "pass": failures.is_empty(),
        "failures": failures,
        "tolerances": to_value(&tol)?,
        "invariants": to_value(&inv)?,
        "transmission_monotone_note": "observed behaviour, not a theorem",
        "unitarity": unitarity,
        "cross_oracle": { "max": cross, "points": cross_rows },
    });
    let bytes = render_report(report, run.format, &run.provenance("verify"))?;
    Ok(Verified { bytes, failures })
}
