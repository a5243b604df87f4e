//! Scattering data files: the CSV that `forward` writes, or any CSV with
//! an `n` column and `<side>_re`, `<side>_im` (or plain `re`, `im`)
//! columns. Lines starting with `#` are comments. An optional `lambda`
//! column selects rows by energy.

use std::path::Path;

use dsrn_core::inverse::{Coefficient, ReflectionDataset};
use dsrn_core::Complex64;

use crate::CliError;

fn stem(side: Coefficient) -> &'static str {
    match side {
        Coefficient::T => "t",
        Coefficient::R => "r",
        Coefficient::L => "l",
    }
}

fn column(headers: &csv::StringRecord, names: &[&str]) -> Option<usize> {
    headers.iter().position(|h| names.iter().any(|n| h.trim().eq_ignore_ascii_case(n)))
}

fn parse_at(rec: &csv::StringRecord, idx: usize, name: &str, path: &Path) -> Result<f64, CliError> {
    let line = rec.position().map_or(0, |p| p.line());
    let raw = rec.get(idx).ok_or_else(|| {
        CliError::Usage(format!("{}:{line}: missing field '{name}'", path.display()))
    })?;
    raw.trim()
        .parse::<f64>()
        .map_err(|e| CliError::Usage(format!("{}:{line}: field '{name}' = '{raw}': {e}", path.display())))
}

/// Reads `(lambda, entries)` for one side. `energy` picks rows when the
/// file holds several energies; it is required when there is no `lambda`
/// column.
pub fn read_dataset(path: &Path, side: Coefficient, energy: Option<f64>) -> Result<ReflectionDataset, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let headers = rdr
        .headers()
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        .clone();
    let s = stem(side);
    let (re_name, im_name) = (format!("{s}_re"), format!("{s}_im"));
    let n_col = column(&headers, &["n"])
        .ok_or_else(|| CliError::Usage(format!("{}: no 'n' column", path.display())))?;
    let re_col = column(&headers, &[&re_name, "re"])
        .ok_or_else(|| CliError::Usage(format!("{}: no '{re_name}' column", path.display())))?;
    let im_col = column(&headers, &[&im_name, "im"])
        .ok_or_else(|| CliError::Usage(format!("{}: no '{im_name}' column", path.display())))?;
    let lam_col = column(&headers, &["lambda"]);

    let mut rows: Vec<(f64, f64, Complex64)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            CliError::Usage(format!("{}:{line}: {e}", path.display()))
        })?;
        let lam = match lam_col {
            Some(c) => parse_at(&rec, c, "lambda", path)?,
            None => f64::NAN,
        };
        let n = parse_at(&rec, n_col, "n", path)?;
        let re = parse_at(&rec, re_col, &re_name, path)?;
        let im = parse_at(&rec, im_col, &im_name, path)?;
        rows.push((lam, n, Complex64::new(re, im)));
    }

    let lambda = match (lam_col, energy) {
        (None, Some(e)) => e,
        (None, None) => {
            return Err(CliError::Usage(format!(
                "{}: no 'lambda' column, so inverse.energy must be set",
                path.display()
            )))
        }
        (Some(_), Some(e)) => e,
        (Some(_), None) => {
            let first = rows.first().map_or(f64::NAN, |r| r.0);
            if rows.iter().any(|r| r.0 != first) {
                return Err(CliError::Usage(format!(
                    "{}: several energies present; set inverse.energy",
                    path.display()
                )));
            }
            first
        }
    };
    let entries: Vec<(f64, Complex64)> = rows
        .into_iter()
        .filter(|r| lam_col.is_none() || r.0 == lambda)
        .map(|r| (r.1, r.2))
        .collect();
    if entries.is_empty() {
        return Err(CliError::Usage(format!("{}: no rows at lambda = {lambda}", path.display())));
    }
    ReflectionDataset::new(lambda, side, entries)
        .map_err(|e| CliError::Usage(format!("{}: inverse::ReflectionDataset::new: {e}", path.display())))
}
