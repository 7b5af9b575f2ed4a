//! Matrix elements of the four operator families on lattice sites.
//!
//! Sign conventions are kept literal per family: the almost-Mathieu and
//! Anderson operators are built on `-Δ` (nearest-neighbour element `-1`),
//! while both chain models carry bare `+ψ_{n±1}` hopping (element `+1`).
//! The two conventions produce spectra reflected through zero, so they are
//! not interchangeable.
//!
//! Floats make every frequency and mismatch rational. Incommensurability
//! only needs to hold up to the window sizes used, which is the case for
//! quadratic irrationals such as the golden mean and `1/√2`.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default truncation tolerance for the reduced-model coupling sum.
pub const DEFAULT_TAIL_TOL: f64 = 1e-12;

/// Golden-mean frequency `(√5 − 1)/2`.
pub const GOLDEN: f64 = 0.618_033_988_749_894_8;

/// Interlayer hopping `h(η) = A·exp(−B·√(η² + Lz²))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoppingParams {
    pub amplitude: f64,
    pub decay: f64,
    pub interchain_distance: f64,
}

impl HoppingParams {
    pub fn new(amplitude: f64, decay: f64, interchain_distance: f64) -> Result<Self> {
        let h = Self {
            amplitude,
            decay,
            interchain_distance,
        };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(invalid(
                "amplitude",
                self.amplitude,
                "must be finite and >= 0",
            ));
        }
        if !(self.decay > 0.0 && self.decay.is_finite()) {
            return Err(invalid("decay", self.decay, "must be finite and > 0"));
        }
        if !(self.interchain_distance > 0.0 && self.interchain_distance.is_finite()) {
            return Err(invalid(
                "interchain_distance",
                self.interchain_distance,
                "must be finite and > 0",
            ));
        }
        Ok(())
    }

    #[inline]
    pub fn eval(&self, eta: f64) -> f64 {
        let lz = self.interchain_distance;
        self.amplitude * (-self.decay * (eta * eta + lz * lz).sqrt()).exp()
    }

    /// Upper bound `A·exp(−B·Lz)`, attained at `η = 0`.
    pub fn peak(&self) -> f64 {
        self.eval(0.0)
    }
}

impl Default for HoppingParams {
    fn default() -> Self {
        Self {
            amplitude: 1.0,
            decay: 2.0,
            interchain_distance: 1.0,
        }
    }
}

pub fn hopping_eval(h: &HoppingParams, eta: f64) -> f64 {
    h.eval(eta)
}

/// Almost-Mathieu on-site potential `λ·cos(2παn + phase)`.
#[inline]
pub fn potential_am(alpha: f64, lambda: f64, phase: f64, n: i64) -> f64 {
    lambda * (TAU * alpha * n as f64 + phase).cos()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DisorderKind {
    Uniform { low: f64, high: f64 },
    Gaussian { mean: f64, std_dev: f64 },
}

/// I.i.d. on-site disorder keyed on `(seed, site)`.
///
/// Each site draws from its own ChaCha stream, so the value at `n` never
/// depends on which other sites were queried. The `offset` realises the
/// ergodic shift `(T_x ω)_n = ω_{n−x}` by re-keying.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisorderLaw {
    pub kind: DisorderKind,
    pub seed: u64,
    #[serde(default)]
    pub offset: i64,
}

impl DisorderLaw {
    pub fn uniform(low: f64, high: f64, seed: u64) -> Result<Self> {
        let law = Self {
            kind: DisorderKind::Uniform { low, high },
            seed,
            offset: 0,
        };
        law.validate()?;
        Ok(law)
    }

    pub fn gaussian(mean: f64, std_dev: f64, seed: u64) -> Result<Self> {
        let law = Self {
            kind: DisorderKind::Gaussian { mean, std_dev },
            seed,
            offset: 0,
        };
        law.validate()?;
        Ok(law)
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            DisorderKind::Uniform { low, high } => {
                if !low.is_finite() || !high.is_finite() {
                    return Err(invalid("disorder_low", low, "interval must be finite"));
                }
                if low > high {
                    return Err(invalid("disorder_high", high, "must be >= disorder_low"));
                }
            }
            DisorderKind::Gaussian { mean, std_dev } => {
                if !mean.is_finite() {
                    return Err(invalid("disorder_mean", mean, "must be finite"));
                }
                if !(std_dev > 0.0 && std_dev.is_finite()) {
                    return Err(invalid("disorder_std", std_dev, "must be finite and > 0"));
                }
            }
        }
        Ok(())
    }

    /// The law seen after a lattice shift by `x`: `(T_x ω)_n = ω_{n−x}`.
    pub fn shifted(&self, x: i64) -> Self {
        Self {
            offset: self.offset + x,
            ..*self
        }
    }

    pub fn value(&self, n: i64) -> f64 {
        let key = n - self.offset;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(key as u64);
        match self.kind {
            DisorderKind::Uniform { low, high } => {
                if low == high {
                    return low;
                }
                let u: f64 = rng.random();
                (low + (high - low) * u).clamp(low, high)
            }
            DisorderKind::Gaussian { mean, std_dev } => Normal::new(mean, std_dev)
                .expect("validated gaussian parameters")
                .sample(&mut rng),
        }
    }
}

impl Default for DisorderLaw {
    fn default() -> Self {
        Self {
            kind: DisorderKind::Uniform {
                low: -1.0,
                high: 1.0,
            },
            seed: 42,
            offset: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Layer {
    First,
    Second,
}

/// A lattice site `(layer, n)`. Ordering is by layer first, then index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SiteIndex {
    pub layer: Layer,
    pub n: i64,
}

impl SiteIndex {
    pub const fn first(n: i64) -> Self {
        Self {
            layer: Layer::First,
            n,
        }
    }

    pub const fn second(n: i64) -> Self {
        Self {
            layer: Layer::Second,
            n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    AlmostMathieu,
    Anderson,
    CoupledChain,
    ReducedChain,
}

impl ModelKind {
    pub fn id(&self) -> &'static str {
        match self {
            ModelKind::AlmostMathieu => "almost-mathieu",
            ModelKind::Anderson => "anderson",
            ModelKind::CoupledChain => "coupled",
            ModelKind::ReducedChain => "reduced",
        }
    }

    pub fn is_single_chain(&self) -> bool {
        !matches!(self, ModelKind::CoupledChain)
    }
}

/// The four operator families.
///
/// For the chain models the second lattice has spacing `1 − mismatch`, and
/// `shift` is the interlayer offset `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum OperatorModel {
    AlmostMathieu {
        alpha: f64,
        lambda: f64,
        phase: f64,
    },
    Anderson {
        law: DisorderLaw,
    },
    CoupledChain {
        mismatch: f64,
        shift: f64,
        hopping: HoppingParams,
    },
    ReducedChain {
        mismatch: f64,
        shift: f64,
        hopping: HoppingParams,
    },
}

impl OperatorModel {
    pub fn almost_mathieu(alpha: f64, lambda: f64, phase: f64) -> Result<Self> {
        let m = OperatorModel::AlmostMathieu {
            alpha,
            lambda,
            phase,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn anderson(law: DisorderLaw) -> Result<Self> {
        let m = OperatorModel::Anderson { law };
        m.validate()?;
        Ok(m)
    }

    pub fn coupled_chain(mismatch: f64, shift: f64, hopping: HoppingParams) -> Result<Self> {
        let m = OperatorModel::CoupledChain {
            mismatch,
            shift,
            hopping,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn reduced_chain(mismatch: f64, shift: f64, hopping: HoppingParams) -> Result<Self> {
        let m = OperatorModel::ReducedChain {
            mismatch,
            shift,
            hopping,
        };
        m.validate()?;
        Ok(m)
    }

    /// Golden-mean frequency, `λ = 2`, zero phase.
    pub fn default_almost_mathieu() -> Self {
        OperatorModel::AlmostMathieu {
            alpha: GOLDEN,
            lambda: 2.0,
            phase: 0.0,
        }
    }

    pub fn default_anderson() -> Self {
        OperatorModel::Anderson {
            law: DisorderLaw::default(),
        }
    }

    pub fn default_coupled_chain(shift: f64) -> Self {
        OperatorModel::CoupledChain {
            mismatch: default_mismatch(),
            shift,
            hopping: HoppingParams::default(),
        }
    }

    pub fn default_reduced_chain(shift: f64) -> Self {
        OperatorModel::ReducedChain {
            mismatch: default_mismatch(),
            shift,
            hopping: HoppingParams::default(),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            OperatorModel::AlmostMathieu { .. } => ModelKind::AlmostMathieu,
            OperatorModel::Anderson { .. } => ModelKind::Anderson,
            OperatorModel::CoupledChain { .. } => ModelKind::CoupledChain,
            OperatorModel::ReducedChain { .. } => ModelKind::ReducedChain,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            OperatorModel::AlmostMathieu {
                alpha,
                lambda,
                phase,
            } => {
                open_unit("alpha", alpha)?;
                if !(lambda >= 0.0 && lambda.is_finite()) {
                    return Err(invalid("lambda", lambda, "must be finite and >= 0"));
                }
                if !phase.is_finite() {
                    return Err(invalid("phase", phase, "must be finite"));
                }
                Ok(())
            }
            OperatorModel::Anderson { law } => law.validate(),
            OperatorModel::CoupledChain {
                mismatch,
                shift,
                hopping,
            }
            | OperatorModel::ReducedChain {
                mismatch,
                shift,
                hopping,
            } => {
                open_unit("theta", mismatch)?;
                if !shift.is_finite() {
                    return Err(invalid("b", shift, "must be finite"));
                }
                hopping.validate()
            }
        }
    }

    /// The ergodic parameter: phase, interlayer shift, or disorder seed.
    pub fn ergodic_parameter(&self) -> f64 {
        match *self {
            OperatorModel::AlmostMathieu { phase, .. } => phase,
            OperatorModel::Anderson { law } => law.seed as f64,
            OperatorModel::CoupledChain { shift, .. }
            | OperatorModel::ReducedChain { shift, .. } => shift,
        }
    }

    /// Same model with the chain shift replaced. No-op for other families.
    pub fn with_shift(&self, b: f64) -> Self {
        match *self {
            OperatorModel::CoupledChain {
                mismatch, hopping, ..
            } => OperatorModel::CoupledChain {
                mismatch,
                shift: b,
                hopping,
            },
            OperatorModel::ReducedChain {
                mismatch, hopping, ..
            } => OperatorModel::ReducedChain {
                mismatch,
                shift: b,
                hopping,
            },
            other => other,
        }
    }

    /// Physical x-coordinate of a site: `n` in layer one,
    /// `(1 − mismatch)·n + b` in layer two.
    pub fn position(&self, site: SiteIndex) -> f64 {
        match (site.layer, self) {
            (
                Layer::Second,
                OperatorModel::CoupledChain {
                    mismatch, shift, ..
                },
            ) => (1.0 - mismatch) * site.n as f64 + shift,
            _ => site.n as f64,
        }
    }

    fn check_site(&self, site: SiteIndex) -> Result<()> {
        if site.layer == Layer::Second && self.kind().is_single_chain() {
            return Err(Error::LayerMismatch {
                kind: self.kind(),
                site,
            });
        }
        Ok(())
    }
}

/// `1 − 1/√2`, so the second lattice constant is `1/√2`.
pub fn default_mismatch() -> f64 {
    1.0 - std::f64::consts::FRAC_1_SQRT_2
}

/// Effective coupling of the reduced chain,
/// `Σ_{n'} h(n − (1−θ)n' − b)·h(n2 − (1−θ)n' − b)`.
///
/// Terms are bounded by `A²·exp(−B(|η₁| + |η₂|))`. With `d = |n − n2|` the
/// whole sum is at most `A²e^{−Bd}(d/s + 1 + 2/(1 − e^{−2Bs}))`, `s = 1 − θ`;
/// when that is below `tail_tol` the element is returned as zero. Otherwise
/// the sum runs over every `n'` whose position lies within `D` of
/// `[min(n,n2), max(n,n2)]`, where `D` is chosen so each geometric tail
/// contributes at most `tail_tol/2`. Terms are accumulated in ascending `n'`
/// with the factor for the smaller index first, so the result is bitwise
/// symmetric in `(n, n2)`.
pub fn reduced_coupling(
    hopping: &HoppingParams,
    mismatch: f64,
    shift: f64,
    n: i64,
    n2: i64,
    tail_tol: f64,
) -> Result<f64> {
    if !(tail_tol > 0.0) {
        return Err(invalid("tail_tol", tail_tol, "must be > 0"));
    }
    let a = hopping.amplitude;
    if a == 0.0 {
        return Ok(0.0);
    }
    let b = hopping.decay;
    let s = 1.0 - mismatch;
    let (lo, hi) = if n <= n2 { (n, n2) } else { (n2, n) };
    let (lo_x, hi_x) = (lo as f64, hi as f64);
    let d = hi_x - lo_x;

    let q = (-2.0 * b * s).exp();
    let prefactor = a * a * (-b * d).exp();
    let whole = prefactor * (d / s + 1.0 + 2.0 / (1.0 - q));
    if whole <= tail_tol {
        return Ok(0.0);
    }

    let reach = ((prefactor / (0.5 * tail_tol * (1.0 - q))).ln() / (2.0 * b)).max(0.0);
    let first = ((lo_x - reach - shift) / s).floor() as i64;
    let last = ((hi_x + reach - shift) / s).ceil() as i64;

    let mut sum = 0.0;
    for k in first..=last {
        let p = s * k as f64 + shift;
        sum += hopping.eval(lo_x - p) * hopping.eval(hi_x - p);
    }
    Ok(sum)
}

/// Matrix element `⟨δ_i, H δ_j⟩`.
///
/// The pair is put into canonical `(min, max)` order before evaluation so
/// `matrix_element(i, j) == matrix_element(j, i)` bit for bit.
pub fn matrix_element(
    model: &OperatorModel,
    i: SiteIndex,
    j: SiteIndex,
    tail_tol: f64,
) -> Result<f64> {
    model.check_site(i)?;
    model.check_site(j)?;
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    let gap = (i.n - j.n).abs();

    let value = match *model {
        OperatorModel::AlmostMathieu {
            alpha,
            lambda,
            phase,
        } => match gap {
            0 => potential_am(alpha, lambda, phase, i.n),
            1 => -1.0,
            _ => 0.0,
        },
        OperatorModel::Anderson { law } => match gap {
            0 => law.value(i.n),
            1 => -1.0,
            _ => 0.0,
        },
        OperatorModel::CoupledChain {
            mismatch,
            shift,
            hopping,
        } => {
            if i.layer == j.layer {
                if gap == 1 {
                    1.0
                } else {
                    0.0
                }
            } else {
                // canonical order puts the layer-one site first
                hopping.eval(i.n as f64 - (1.0 - mismatch) * j.n as f64 - shift)
            }
        }
        OperatorModel::ReducedChain {
            mismatch,
            shift,
            hopping,
        } => {
            let hop = if gap == 1 { 1.0 } else { 0.0 };
            hop + reduced_coupling(&hopping, mismatch, shift, i.n, j.n, tail_tol)?
        }
    };
    Ok(value)
}

fn open_unit(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(invalid(name, value, "must lie strictly inside (0, 1)"))
    }
}

pub(crate) fn invalid(name: &'static str, value: f64, reason: &'static str) -> Error {
    Error::InvalidParameter {
        name,
        value,
        reason,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(a: f64, b: f64, lz: f64) -> HoppingParams {
        HoppingParams::new(a, b, lz).unwrap()
    }

    #[test]
    fn hopping_at_origin() {
        assert_eq!(h(1.0, 1.0, 1.0).eval(0.0), (-1.0f64).exp());
        assert_eq!(h(2.0, 1.0, 1.0).eval(0.0), 2.0 * (-1.0f64).exp());
    }

    #[test]
    fn hopping_rejects_bad_params() {
        assert!(HoppingParams::new(-1.0, 1.0, 1.0).is_err());
        assert!(HoppingParams::new(1.0, 0.0, 1.0).is_err());
        assert!(HoppingParams::new(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn potential_trivial_cases() {
        assert_eq!(potential_am(0.3, 0.0, 1.2, 17), 0.0);
        assert!(potential_am(0.25, 1.0, 0.0, 1).abs() < 1e-15);
    }

    #[test]
    fn disorder_degenerate_and_deterministic() {
        let flat = DisorderLaw::uniform(0.0, 0.0, 9).unwrap();
        assert_eq!(flat.value(-4), 0.0);
        let law = DisorderLaw::uniform(-1.0, 3.0, 42).unwrap();
        assert_eq!(law.value(7), law.value(7));
        for n in -50..50 {
            let v = law.value(n);
            assert!((-1.0..=3.0).contains(&v));
        }
    }

    #[test]
    fn disorder_is_order_independent() {
        let law = DisorderLaw::gaussian(0.0, 1.0, 5).unwrap();
        let forward: Vec<f64> = (0..20).map(|n| law.value(n)).collect();
        let backward: Vec<f64> = (0..20).rev().map(|n| law.value(n)).collect();
        let reversed: Vec<f64> = backward.into_iter().rev().collect();
        assert_eq!(forward, reversed);
    }

    #[test]
    fn disorder_shift_reindexes() {
        let law = DisorderLaw::default();
        let moved = law.shifted(3);
        for n in -10..10 {
            assert_eq!(moved.value(n), law.value(n - 3));
        }
    }

    #[test]
    fn disorder_rejects_bad_laws() {
        assert!(DisorderLaw::uniform(1.0, 0.0, 0).is_err());
        assert!(DisorderLaw::gaussian(0.0, 0.0, 0).is_err());
    }

    #[test]
    fn reduced_coupling_zero_amplitude() {
        let hop = h(0.0, 2.0, 1.0);
        for (n, m) in [(0, 0), (3, -2), (10, 11)] {
            assert_eq!(reduced_coupling(&hop, 0.3, 0.1, n, m, 1e-12).unwrap(), 0.0);
        }
    }

    #[test]
    fn reduced_coupling_rejects_tolerance() {
        let hop = HoppingParams::default();
        assert!(reduced_coupling(&hop, 0.3, 0.1, 0, 0, 0.0).is_err());
        assert!(reduced_coupling(&hop, 0.3, 0.1, 0, 0, -1.0).is_err());
    }

    #[test]
    fn reduced_coupling_far_pairs_vanish() {
        let hop = HoppingParams::default();
        assert_eq!(reduced_coupling(&hop, 0.3, 0.1, 0, 40, 1e-12).unwrap(), 0.0);
    }

    #[test]
    fn element_layer_errors() {
        let am = OperatorModel::default_almost_mathieu();
        let err = matrix_element(&am, SiteIndex::second(0), SiteIndex::first(0), 1e-12);
        assert!(matches!(err, Err(Error::LayerMismatch { .. })));
        let red = OperatorModel::default_reduced_chain(0.1);
        assert!(matrix_element(&red, SiteIndex::first(0), SiteIndex::second(0), 1e-12).is_err());
    }

    #[test]
    fn element_trivial_cases() {
        let am = OperatorModel::default_almost_mathieu();
        assert_eq!(
            matrix_element(&am, SiteIndex::first(3), SiteIndex::first(5), 1e-12).unwrap(),
            0.0
        );
        assert_eq!(
            matrix_element(&am, SiteIndex::first(3), SiteIndex::first(4), 1e-12).unwrap(),
            -1.0
        );
        let hop = h(1.3, 2.0, 0.7);
        let cc = OperatorModel::coupled_chain(0.4, 0.0, hop).unwrap();
        assert_eq!(
            matrix_element(&cc, SiteIndex::first(0), SiteIndex::second(0), 1e-12).unwrap(),
            hop.peak()
        );
        assert_eq!(
            matrix_element(&cc, SiteIndex::second(4), SiteIndex::second(5), 1e-12).unwrap(),
            1.0
        );
        assert_eq!(
            matrix_element(&cc, SiteIndex::first(4), SiteIndex::first(4), 1e-12).unwrap(),
            0.0
        );
    }

    #[test]
    fn model_validation() {
        assert!(OperatorModel::almost_mathieu(1.0, 2.0, 0.0).is_err());
        assert!(OperatorModel::almost_mathieu(0.5, -1.0, 0.0).is_err());
        assert!(OperatorModel::coupled_chain(0.0, 0.0, HoppingParams::default()).is_err());
        assert!(OperatorModel::reduced_chain(0.3, f64::NAN, HoppingParams::default()).is_err());
        assert!(OperatorModel::default_coupled_chain(0.2).validate().is_ok());
    }

    #[test]
    fn positions() {
        let cc = OperatorModel::coupled_chain(0.25, 0.5, HoppingParams::default()).unwrap();
        assert_eq!(cc.position(SiteIndex::first(3)), 3.0);
        assert_eq!(cc.position(SiteIndex::second(2)), 2.0);
    }
}
