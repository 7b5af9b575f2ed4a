//! Truncated spectra and density-of-states measures for one-dimensional
//! ergodic Schrödinger operators (almost-Mathieu, Anderson) and for
//! incommensurate coupled chains (full two-layer and reduced single-layer).
//!
//! The crate is organised bottom-up:
//!
//! * [`kernels`]: matrix-element functions of the four operator families.
//! * [`truncation`]: Dirichlet windows, dense assembly, eigenvalues and the
//!   truncation trace defect.
//! * [`ergodic`]: circle rotations, covariance residuals, Birkhoff averages
//!   and Weyl sums.
//! * [`dos`]: empirical and local DOS measures, smoothing, KS distance and
//!   limiting-DOS estimators obtained by averaging over the ergodic parameter.
//! * [`csv`]: plain-text serialisation shared by the experiment runner.

// `!(x > 0.0)` style guards are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod csv;
pub mod dos;
pub mod ergodic;
pub mod kernels;
pub mod truncation;

mod error;

pub use error::{Error, Result};

pub use dos::{
    empirical_dos, integrate, ks_distance, ks_distance_with_slack, ks_to_cdf, layer_weights,
    limiting_dos_coupled, limiting_dos_reduced, local_dos, resolvent_trace_avg, smooth, DosCurve,
    EmpiricalDos, Kernel, LimitingDosEstimate,
};
pub use ergodic::{
    birkhoff_average, birkhoff_mode_bound, covariance_residual, orbit_fill, rotate, weyl_sum,
    CircleRotation, Covariance, Direction,
};
pub use kernels::{
    hopping_eval, matrix_element, potential_am, reduced_coupling, DisorderKind, DisorderLaw,
    HoppingParams, Layer, ModelKind, OperatorModel, SiteIndex, DEFAULT_TAIL_TOL,
};
pub use truncation::{
    assemble, build_interval, build_window, eigenvalues, truncation_trace_defect,
    EigenDecomposition, LatticeWindow, TruncatedOperator,
};
