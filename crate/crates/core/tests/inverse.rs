use dsrn_core::inverse::{
    b_operator_recovery, fit_parameters, kappa_from_ratios, Coefficient, FitOptions, NumericOnly,
    ReflectionDataset, SampledPotential,
};
use dsrn_core::{BlackHoleParams, Complex64, Error, PotentialModel};

fn model() -> PotentialModel {
    PotentialModel::new(BlackHoleParams::new(1.0, 0.5, 0.05).unwrap(), 0.0).unwrap()
}

fn ns(n: usize) -> Vec<f64> {
    (1..=n).map(|k| k as f64).collect()
}

#[test]
fn kappa_plus_from_forward_right_reflection() {
    let m = model();
    let data = ReflectionDataset::generate(&m, 1.0, Coefficient::R, &ns(200)).unwrap();
    let est = kappa_from_ratios(&data, 2).unwrap();
    assert!(est.kappa < 0.0);
    assert!((est.kappa / m.kappa_plus() - 1.0).abs() < 0.02, "{} vs {}", est.kappa, m.kappa_plus());
}

#[test]
fn kappa_minus_from_forward_left_reflection() {
    let m = model();
    let data = ReflectionDataset::generate(&m, 1.0, Coefficient::L, &ns(200)).unwrap();
    let est = kappa_from_ratios(&data, 2).unwrap();
    assert!((est.kappa / m.kappa_minus() - 1.0).abs() < 0.01);
    assert!(est.std_err.is_finite() && est.pairs.len() >= 3);
}

#[test]
fn transmission_data_has_no_kappa() {
    let data = ReflectionDataset::new(1.0, Coefficient::T, vec![(1.0, Complex64::new(0.5, 0.0))]).unwrap();
    assert!(kappa_from_ratios(&data, 2).is_err());
}

#[test]
fn unitarity_bound_is_enforced() {
    let bad = vec![(1.0, Complex64::new(1.5, 0.0))];
    assert!(ReflectionDataset::new(1.0, Coefficient::L, bad).is_err());
}

#[test]
fn b_recovery_from_differences() {
    let m = model();
    let rec = b_operator_recovery(&NumericOnly(&m), -1.0).unwrap();
    assert!((rec.mass - 1.0).abs() < 1e-3);
    assert!((rec.q_squared - 0.25).abs() < 1e-3);
    assert!((rec.lambda / 0.05 - 1.0).abs() < 1e-3);
}

#[test]
fn non_ds_rn_potential_is_inconsistent() {
    let src = SampledPotential(|x: f64| (2.0 * x).exp());
    assert!(matches!(b_operator_recovery(&src, 0.3), Err(Error::InconsistentPotential(_))));
}

#[test]
fn single_point_is_ill_posed() {
    let m = model();
    let data = ReflectionDataset::generate(&m, 1.0, Coefficient::L, &[3.0]).unwrap();
    assert!(matches!(fit_parameters(&data, &FitOptions::default()), Err(Error::IllPosed { .. })));
}

#[test]
fn zero_energy_fit_is_rejected() {
    let data = ReflectionDataset::new(0.0, Coefficient::L, vec![(1.0, Complex64::new(0.0, 0.9))]).unwrap();
    assert_eq!(fit_parameters(&data, &FitOptions::default()).unwrap_err(), Error::ZeroEnergy);
}
