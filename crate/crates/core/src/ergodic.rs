//! Measure-preserving circle rotations, the unitary covariance identities
//! of each model at matrix-element level, symmetric Birkhoff averages and
//! Weyl sums.

use std::f64::consts::TAU;
use std::ops::{Add, Mul};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::kernels::{invalid, matrix_element, Layer, ModelKind, OperatorModel, SiteIndex};
use crate::truncation::LatticeWindow;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }
}

/// Rotation `x ↦ x ± k·step (mod modulus)` on `[0, modulus)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleRotation {
    pub modulus: f64,
    pub step: f64,
    pub direction: Direction,
}

impl CircleRotation {
    pub fn new(modulus: f64, step: f64, direction: Direction) -> Result<Self> {
        if !(modulus > 0.0 && modulus.is_finite()) {
            return Err(invalid("modulus", modulus, "must be finite and > 0"));
        }
        if !step.is_finite() {
            return Err(invalid("step", step, "must be finite"));
        }
        Ok(Self {
            modulus,
            step,
            direction,
        })
    }

    /// `ω ↦ ω − αx mod 1` on the unit circle.
    pub fn unit(alpha: f64) -> Self {
        Self {
            modulus: 1.0,
            step: alpha,
            direction: Direction::Backward,
        }
    }

    /// Almost-Mathieu phase map `θ ↦ θ − 2παx mod 2π`.
    pub fn almost_mathieu(alpha: f64) -> Self {
        Self {
            modulus: TAU,
            step: TAU * alpha,
            direction: Direction::Backward,
        }
    }

    /// Reduced-chain shift map `b ↦ b − x mod (1 − θ)`.
    pub fn reduced_chain(mismatch: f64) -> Self {
        Self {
            modulus: 1.0 - mismatch,
            step: 1.0,
            direction: Direction::Backward,
        }
    }

    /// Layer-one shift restricted to the layer-two cell, `b ↦ b + x mod (1 − θ)`.
    pub fn layer_one(mismatch: f64) -> Self {
        Self {
            modulus: 1.0 - mismatch,
            step: 1.0,
            direction: Direction::Forward,
        }
    }

    /// Layer-two shift restricted to the layer-one cell, `b ↦ b − (1 − θ)x mod 1`.
    pub fn layer_two(mismatch: f64) -> Self {
        Self {
            modulus: 1.0,
            step: 1.0 - mismatch,
            direction: Direction::Backward,
        }
    }

    /// Reduces any real into `[0, modulus)`.
    pub fn wrap(&self, x: f64) -> f64 {
        let r = x.rem_euclid(self.modulus);
        if r >= self.modulus {
            0.0
        } else {
            r
        }
    }

    fn apply(&self, x: f64, k: i64) -> f64 {
        self.wrap(x + self.direction.sign() * k as f64 * self.step)
    }
}

pub fn rotate(rot: &CircleRotation, x: f64, k: i64) -> Result<f64> {
    if !(x >= 0.0 && x < rot.modulus) {
        return Err(invalid("x", x, "must lie in [0, modulus)"));
    }
    Ok(rot.apply(x, k))
}

/// Which unitary shift a covariance check uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Covariance {
    /// Lattice translation of a single-chain model.
    Lattice,
    /// Coupled chain, shift layer one only (`b ↦ b + x`).
    LayerOne,
    /// Coupled chain, shift layer two only (`b ↦ b − (1 − θ)x`).
    LayerTwo,
}

impl Covariance {
    pub fn id(&self) -> &'static str {
        match self {
            Covariance::Lattice => "lattice",
            Covariance::LayerOne => "layer-one",
            Covariance::LayerTwo => "layer-two",
        }
    }
}

/// Transformed model plus the site map that realises the covariance law.
fn covariance_pair(
    model: &OperatorModel,
    law: Covariance,
    x: i64,
) -> Result<(OperatorModel, impl Fn(SiteIndex) -> SiteIndex)> {
    let kind = model.kind();
    let bad = || Error::CovarianceLaw {
        law: law.id(),
        kind,
    };
    let layer_shift = move |layer: Option<Layer>, by: i64| {
        move |s: SiteIndex| match layer {
            Some(l) if s.layer != l => s,
            _ => SiteIndex { n: s.n + by, ..s },
        }
    };
    let pair = match (*model, law) {
        (
            OperatorModel::AlmostMathieu {
                alpha,
                lambda,
                phase,
            },
            Covariance::Lattice,
        ) => {
            let rot = CircleRotation::almost_mathieu(alpha);
            let phase = rot.apply(rot.wrap(phase), x);
            (
                OperatorModel::AlmostMathieu {
                    alpha,
                    lambda,
                    phase,
                },
                layer_shift(None, -x),
            )
        }
        (OperatorModel::Anderson { law }, Covariance::Lattice) => (
            OperatorModel::Anderson {
                law: law.shifted(x),
            },
            layer_shift(None, -x),
        ),
        (
            OperatorModel::ReducedChain {
                mismatch, shift, ..
            },
            Covariance::Lattice,
        ) => {
            // H_r(T_x b) = U_x† H_r(b) U_x: compare against sites n + x
            let rot = CircleRotation::reduced_chain(mismatch);
            let b = rot.apply(rot.wrap(shift), x);
            (model.with_shift(b), layer_shift(None, x))
        }
        (OperatorModel::CoupledChain { shift, .. }, Covariance::LayerOne) => (
            model.with_shift(shift + x as f64),
            layer_shift(Some(Layer::First), -x),
        ),
        (
            OperatorModel::CoupledChain {
                mismatch, shift, ..
            },
            Covariance::LayerTwo,
        ) => (
            model.with_shift(shift - (1.0 - mismatch) * x as f64),
            layer_shift(Some(Layer::Second), -x),
        ),
        _ => return Err(bad()),
    };
    Ok(pair)
}

/// Max over interior window pairs of
/// `|⟨δ_i, H(T_x ω) δ_j⟩ − ⟨δ_σ(i), H(ω) δ_σ(j)⟩|`, where `σ` is the site
/// map of the chosen covariance law and "interior" means `σ` keeps the site
/// inside the window. At least half of the window's half-width must remain
/// after the shift.
pub fn covariance_residual(
    model: &OperatorModel,
    law: Covariance,
    x: i64,
    window: &LatticeWindow,
    tail_tol: f64,
) -> Result<f64> {
    if window.kind != model.kind() {
        return Err(Error::WindowMismatch {
            size: window.size,
            reason: "model family differs",
        });
    }
    if (x.unsigned_abs() as f64) > 0.5 * window.size.floor() {
        return Err(Error::ShiftOutsideWindow {
            shift: x,
            size: window.size,
        });
    }
    if x == 0 {
        return Ok(0.0);
    }
    let (shifted, sigma) = covariance_pair(model, law, x)?;
    let pairs: Vec<(SiteIndex, SiteIndex)> = window
        .sites()
        .filter(|&s| window.contains(sigma(s)))
        .map(|s| (s, sigma(s)))
        .collect();
    if pairs.is_empty() {
        return Err(Error::ShiftOutsideWindow {
            shift: x,
            size: window.size,
        });
    }

    let mut worst: f64 = 0.0;
    for (a, &(i, si)) in pairs.iter().enumerate() {
        for &(j, sj) in &pairs[a..] {
            let lhs = matrix_element(&shifted, i, j, tail_tol)?;
            let rhs = matrix_element(model, si, sj, tail_tol)?;
            worst = worst.max((lhs - rhs).abs());
        }
    }
    Ok(worst)
}

/// Symmetric Birkhoff average `(2N+1)⁻¹ Σ_{n=−N}^{N} f(T_n x0)`, with
/// `T_n` the `n`-fold rotation. Summed in ascending `n`.
pub fn birkhoff_average<T, F>(f: F, x0: f64, rot: &CircleRotation, n: u64) -> Result<T>
where
    F: Fn(f64) -> T,
    T: Default + Add<Output = T> + Mul<f64, Output = T>,
{
    if !(x0 >= 0.0 && x0 < rot.modulus) {
        return Err(invalid("x0", x0, "must lie in [0, modulus)"));
    }
    let n = n as i64;
    let mut acc = T::default();
    for k in -n..=n {
        acc = acc + f(rot.apply(x0, k));
    }
    Ok(acc * (1.0 / (2 * n + 1) as f64))
}

/// `|1 − e^{−2πimα}|`.
fn resonance_gap(m: i64, alpha: f64) -> f64 {
    (Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, -TAU * frac(m as f64 * alpha))).norm()
}

fn frac(x: f64) -> f64 {
    x - x.floor()
}

const RESONANCE_GUARD: f64 = 1e-12;

/// Uniform-in-N constant `4/|1 − e^{−2πimα}|` bounding `(2N+1)·|average|`
/// for the Fourier mode `e^{2πimx/modulus}` under rotation by `α·modulus`.
pub fn birkhoff_mode_bound(m: i64, alpha: f64) -> Result<f64> {
    let gap = resonance_gap(m, alpha);
    if m == 0 || gap <= RESONANCE_GUARD {
        return Err(Error::Resonance { m, alpha, gap });
    }
    Ok(4.0 / gap)
}

/// `frac(m·α·k)` with `m·α` and the product by `k` carried as exact
/// two-term expansions, so the phase stays accurate for large `k`.
fn phase_frac(m: i64, alpha: f64, k: f64) -> f64 {
    let mf = m as f64;
    let hi = mf * alpha;
    let lo = mf.mul_add(alpha, -hi);
    let p = hi * k;
    let e = hi.mul_add(k, -p);
    frac(frac(p) + lo.mul_add(k, e))
}

/// `Σ_{n=−N}^{N} e^{−2πimαn}` by the geometric-series closed form
/// `(e^{2πimαN} − e^{−2πimα(N+1)}) / (1 − e^{−2πimα})`.
pub fn weyl_sum(m: i64, alpha: f64, n: u64) -> Result<Complex64> {
    let gap = resonance_gap(m, alpha);
    if m == 0 || gap <= RESONANCE_GUARD {
        return Err(Error::Resonance { m, alpha, gap });
    }
    let nf = n as f64;
    let upper = Complex64::from_polar(1.0, TAU * phase_frac(m, alpha, nf));
    let lower = Complex64::from_polar(1.0, -TAU * phase_frac(m, alpha, nf + 1.0));
    let denom =
        Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, -TAU * phase_frac(m, alpha, 1.0));
    Ok((upper - lower) / denom)
}

/// Smallest fraction of the orbit `{T_n x0}_{n<N}` landing in any of
/// `bins` equal-width bins of the circle.
pub fn orbit_fill(x0: f64, rot: &CircleRotation, n: u64, bins: usize) -> Result<f64> {
    if bins == 0 {
        return Err(invalid("bins", 0.0, "must be >= 1"));
    }
    if n < bins as u64 {
        return Err(invalid("N", n as f64, "must be >= bins"));
    }
    if !(x0 >= 0.0 && x0 < rot.modulus) {
        return Err(invalid("x0", x0, "must lie in [0, modulus)"));
    }
    let mut counts = vec![0u64; bins];
    for k in 0..n as i64 {
        let y = rot.apply(x0, k);
        let b = ((y / rot.modulus * bins as f64) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let min = counts.into_iter().min().unwrap_or(0);
    Ok(min as f64 / n as f64)
}

/// Convenience used by the audit: the covariance laws that apply to a model.
pub fn covariance_laws(kind: ModelKind) -> &'static [Covariance] {
    match kind {
        ModelKind::CoupledChain => &[Covariance::LayerOne, Covariance::LayerTwo],
        _ => &[Covariance::Lattice],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::GOLDEN;
    use crate::truncation::build_window;

    #[test]
    fn rotation_identity_and_inverse() {
        let rot = CircleRotation::almost_mathieu(std::f64::consts::FRAC_1_SQRT_2);
        let x = 1.234;
        assert_eq!(rotate(&rot, x, 0).unwrap(), x);
        let there = rotate(&rot, x, 5).unwrap();
        let back = rotate(&rot, there, -5).unwrap();
        assert!((back - x).abs() < 1e-14);
    }

    #[test]
    fn rotation_domain_check() {
        let rot = CircleRotation::unit(0.3);
        assert!(rotate(&rot, 1.0, 1).is_err());
        assert!(rotate(&rot, -0.1, 1).is_err());
        assert!(CircleRotation::new(0.0, 1.0, Direction::Forward).is_err());
    }

    #[test]
    fn rotation_group_law() {
        let rot = CircleRotation::layer_two(0.3);
        for (j, k) in [(3, 4), (-7, 2), (11, -11)] {
            let a = rotate(&rot, rotate(&rot, 0.37, j).unwrap(), k).unwrap();
            let b = rotate(&rot, 0.37, j + k).unwrap();
            let d = (a - b).abs();
            assert!(d < 1e-14 || (1.0 - d) < 1e-14, "{a} {b}");
        }
    }

    #[test]
    fn covariance_identity_shift() {
        let model = OperatorModel::default_almost_mathieu();
        let w = build_window(&model, 10.0).unwrap();
        assert_eq!(
            covariance_residual(&model, Covariance::Lattice, 0, &w, 1e-12).unwrap(),
            0.0
        );
    }

    #[test]
    fn covariance_anderson_is_exact() {
        let model = OperatorModel::default_anderson();
        let w = build_window(&model, 20.0).unwrap();
        for x in -5..=5 {
            assert_eq!(
                covariance_residual(&model, Covariance::Lattice, x, &w, 1e-12).unwrap(),
                0.0
            );
        }
    }

    #[test]
    fn covariance_rejects_large_shift_and_wrong_law() {
        let model = OperatorModel::default_reduced_chain(0.1);
        let w = build_window(&model, 10.0).unwrap();
        assert!(matches!(
            covariance_residual(&model, Covariance::Lattice, 6, &w, 1e-12),
            Err(Error::ShiftOutsideWindow { .. })
        ));
        assert!(matches!(
            covariance_residual(&model, Covariance::LayerOne, 1, &w, 1e-12),
            Err(Error::CovarianceLaw { .. })
        ));
    }

    #[test]
    fn birkhoff_constant() {
        let rot = CircleRotation::unit(GOLDEN);
        for n in [0, 1, 17, 500] {
            let avg: f64 = birkhoff_average(|_| 3.25, 0.1, &rot, n).unwrap();
            assert_eq!(avg, 3.25);
        }
    }

    #[test]
    fn weyl_single_term() {
        let w = weyl_sum(3, std::f64::consts::FRAC_1_SQRT_2, 0).unwrap();
        assert!((w - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn weyl_resonance_guard() {
        assert!(matches!(weyl_sum(2, 0.5, 10), Err(Error::Resonance { .. })));
        assert!(weyl_sum(0, 0.3, 10).is_err());
        assert!(birkhoff_mode_bound(4, 0.25).is_err());
    }

    #[test]
    fn orbit_fill_trivial() {
        let rot = CircleRotation::unit(GOLDEN);
        assert_eq!(orbit_fill(0.2, &rot, 10, 1).unwrap(), 1.0);
        let half = CircleRotation::new(2.0, 1.0, Direction::Forward).unwrap();
        assert_eq!(orbit_fill(0.1, &half, 100, 4).unwrap(), 0.0);
        assert!(orbit_fill(0.1, &rot, 3, 4).is_err());
        assert!(orbit_fill(0.1, &rot, 3, 0).is_err());
    }
}
