use thiserror::Error;

use crate::kernels::{ModelKind, SiteIndex};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("site {site:?} is not valid for a {kind:?} model")]
    LayerMismatch { kind: ModelKind, site: SiteIndex },

    #[error("window of size L = {size} was built for a different model ({reason})")]
    WindowMismatch { size: f64, reason: &'static str },

    #[error("window of size L = {size} is too small: {reason}")]
    WindowTooSmall { size: f64, reason: &'static str },

    #[error("shift by {shift} leaves no interior pairs inside the window of size L = {size}")]
    ShiftOutsideWindow { shift: i64, size: f64 },

    #[error("site {0:?} lies outside the window")]
    SiteOutsideWindow(SiteIndex),

    #[error("outer pad {pad} is insufficient, need at least {required}")]
    InsufficientPad { pad: f64, required: f64 },

    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("expected {expected} values, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error(
        "|1 - exp(-2 pi i m alpha)| = {gap:e} for m = {m}, alpha = {alpha}: too close to resonance"
    )]
    Resonance { m: i64, alpha: f64, gap: f64 },

    #[error("spectral parameter must have a nonzero imaginary part")]
    RealSpectralParameter,

    #[error("measure is not normalized: total weight {0}")]
    Unnormalized(f64),

    #[error("energy grid must be nonempty and strictly ascending")]
    BadGrid,

    #[error("covariance law {law} does not apply to a {kind:?} model")]
    CovarianceLaw { law: &'static str, kind: ModelKind },
}
