//! `A_L` from Wronskians of the left and right Jost solutions at an
//! interior node. Both Faddeev series are evaluated at the same node, so
//! this path shares no summation with the limit-matrix path.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::jost::series::{FaddeevSeries, SeriesOptions, Side};
use crate::jost::{Method, TransferMatrix};
use crate::par;
use crate::potential::PotentialModel;

#[derive(Debug, Clone, Copy)]
pub struct WronskianReport {
    /// Node actually used.
    pub x: f64,
    pub big_x: f64,
    /// Largest ratio of a Wronskian product to the entry it produces.
    pub cancellation: f64,
    /// `|W(f_1, f_2)/(iz) - 1|` for the left and right Jost pairs, i.e.
    /// the determinant defect of each Faddeev matrix at the node.
    pub left_det_defect: f64,
    pub right_det_defect: f64,
}

/// `A_L(lambda, z)` from Wronskians at the node nearest `X = A / 2`.
pub fn wronskian_transfer(model: &PotentialModel, lambda: f64, z: Complex64) -> Result<TransferMatrix> {
    wronskian_transfer_at(model, lambda, z, 0.5 * model.total_a()).map(|(m, _)| m)
}

pub fn wronskian_transfer_at(
    model: &PotentialModel,
    lambda: f64,
    z: Complex64,
    big_x: f64,
) -> Result<(TransferMatrix, WronskianReport)> {
    let (left, right) = build_pair(model, lambda, z, big_x)?;
    wronskian_from(&left, &right, lambda, z)
}

/// The limit-matrix and Wronskian results from one pair of series builds.
/// The left series serves both, so this costs two builds instead of three.
pub fn series_and_wronskian(
    model: &PotentialModel,
    lambda: f64,
    z: Complex64,
) -> Result<(TransferMatrix, TransferMatrix, WronskianReport)> {
    let (left, right) = build_pair(model, lambda, z, 0.5 * model.total_a())?;
    let limit = TransferMatrix::new(lambda, z, left.limit_matrix(z)?, Method::Series);
    let (w, report) = wronskian_from(&left, &right, lambda, z)?;
    Ok((limit, w, report))
}

fn build_pair(
    model: &PotentialModel,
    lambda: f64,
    z: Complex64,
    big_x: f64,
) -> Result<(FaddeevSeries, FaddeevSeries)> {
    if z.norm() == 0.0 {
        return Err(Error::ZeroCoupling);
    }
    let opts = SeriesOptions {
        real_axis_only: z.im == 0.0,
        probes: vec![big_x],
        ..Default::default()
    };
    let (left, right) = par::join(
        || FaddeevSeries::build(model, Side::Left, lambda, z.norm(), &opts),
        || FaddeevSeries::build(model, Side::Right, lambda, z.norm(), &opts),
    );
    Ok((left?, right?))
}

fn wronskian_from(
    left: &FaddeevSeries,
    right: &FaddeevSeries,
    lambda: f64,
    z: Complex64,
) -> Result<(TransferMatrix, WronskianReport)> {
    let m = left.probe_values(0, z)?;
    let n = right.probe_values(0, z)?;
    let x = left.probes[0].x;
    let e2 = Complex64::from_polar(1.0, 2.0 * lambda * x);

    let pairs = [
        (m.m1 * n.m4, m.m3 * n.m2),
        (m.m2 * n.m4, m.m4 * n.m2),
        (m.m1 * n.m3, m.m3 * n.m1),
        (m.m2 * n.m3, m.m4 * n.m1),
    ];
    let d: Vec<Complex64> = pairs.iter().map(|(p, q)| p - q).collect();
    let entries = [d[0], e2.conj() * d[1], -e2 * d[2], -d[3]];
    let cancellation = pairs
        .iter()
        .zip(&d)
        .map(|((p, q), r)| p.norm().max(q.norm()) / r.norm().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    let report = WronskianReport {
        x,
        big_x: left.probes[0].big_x,
        cancellation,
        left_det_defect: (m.m1 * m.m4 - m.m2 * m.m3 - 1.0).norm(),
        right_det_defect: (n.m1 * n.m4 - n.m2 * n.m3 - 1.0).norm(),
    };
    Ok((TransferMatrix::new(lambda, z, entries, Method::Wronskian), report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BlackHoleParams;
    use crate::jost::transfer_matrix_series;

    fn model() -> PotentialModel {
        PotentialModel::new(BlackHoleParams::new(1.0, 0.5, 0.05).unwrap(), 0.0).unwrap()
    }

    #[test]
    fn agrees_with_limit_matrix() {
        let m = model();
        for &z in &[Complex64::new(2.0, 0.0), Complex64::new(0.5, 1.5)] {
            let a = transfer_matrix_series(&m, 0.8, z).unwrap();
            let (b, rep) = wronskian_transfer_at(&m, 0.8, z, 1.2).unwrap();
            assert!(a.max_rel_diff(&b) < 1e-10, "z = {z}: {}", a.max_rel_diff(&b));
            assert!(rep.left_det_defect < 1e-10 && rep.right_det_defect < 1e-10);
        }
    }

    #[test]
    fn independent_of_node() {
        let m = model();
        let z = Complex64::new(3.0, 0.5);
        let (a, _) = wronskian_transfer_at(&m, 1.0, z, 0.8).unwrap();
        let (b, _) = wronskian_transfer_at(&m, 1.0, z, 2.6).unwrap();
        assert!(a.max_rel_diff(&b) < 1e-9);
    }

    #[test]
    fn shared_build_matches_separate_paths() {
        let m = model();
        let z = Complex64::new(1.5, 0.7);
        let (s, w, _) = series_and_wronskian(&m, 0.6, z).unwrap();
        assert!(s.max_rel_diff(&transfer_matrix_series(&m, 0.6, z).unwrap()) < 1e-14);
        assert!(w.max_rel_diff(&wronskian_transfer(&m, 0.6, z).unwrap()) < 1e-14);
    }

    #[test]
    fn zero_coupling_is_rejected() {
        let m = model();
        assert_eq!(
            wronskian_transfer(&m, 1.0, Complex64::new(0.0, 0.0)).unwrap_err(),
            Error::ZeroCoupling
        );
    }
}
