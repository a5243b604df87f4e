//! Fixed-energy scattering for massless Dirac fields outside de
//! Sitter-Reissner-Nordstrom black holes.
//!
//! The forward side computes the transfer matrix `A_L(lambda, z)` and the
//! scattering triple `(T, R, L)` at real or complex angular momentum `z`,
//! by a Faddeev power series in `z` and by direct ODE integration. The
//! inverse side recovers surface gravities and `(M, Q^2, Lambda)`.

pub mod error;
pub mod geometry;
pub mod inverse;
pub mod jost;
pub mod ode;
pub mod par;
pub mod potential;
pub mod qd;
pub mod quadrature;
pub mod scattering;
pub mod specialfn;

pub use error::{Error, Result};
pub use geometry::{horizon_roots, metric_f, metric_f_prime, BlackHoleParams, HorizonData, RwMap};
pub use jost::{
    jost_ode_oracle, transfer_matrix, transfer_matrix_series, wronskian_transfer, Method,
    TransferMatrix,
};
pub use potential::PotentialModel;
pub use scattering::{s_matrix, translate_gauge, ScatteringTriple};

pub use num_complex::Complex64;
