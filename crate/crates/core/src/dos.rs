//! Density-of-states measures.
//!
//! A finite truncation's DOS is the atomic measure `|Λ_L|⁻¹ Σ_j δ_{E_j}`.
//! The limiting DOS is estimated by averaging over the ergodic parameter:
//! the interlayer shift `b` on the cell `[0, 1 − θ)` for the reduced chain,
//! and on both layer cells for the coupled chain, where the local spectral
//! measure at each layer origin is weighted by `(1−θ)/(2−θ)` and `1/(2−θ)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::kernels::{invalid, HoppingParams, Layer, OperatorModel, SiteIndex};
use crate::truncation::{assemble, build_window, EigenDecomposition, TruncatedOperator};
use crate::{Error, Result};

const NORMALIZATION_TOL: f64 = 1e-9;

/// Atomic measure with atoms sorted by energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDos {
    atoms: Vec<(f64, f64)>,
}

impl EmpiricalDos {
    /// Sorts atoms by energy (stable) and drops zero weights.
    pub fn from_atoms(mut atoms: Vec<(f64, f64)>) -> Result<Self> {
        for &(e, w) in &atoms {
            if !e.is_finite() {
                return Err(invalid("energy", e, "must be finite"));
            }
            if !(w >= 0.0 && w.is_finite()) {
                return Err(invalid("weight", w, "must be finite and >= 0"));
            }
        }
        atoms.retain(|&(_, w)| w > 0.0);
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self { atoms })
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    pub fn energies(&self) -> impl Iterator<Item = f64> + '_ {
        self.atoms.iter().map(|a| a.0)
    }

    /// Image under `E ↦ −E`.
    pub fn reflected(&self) -> Self {
        Self {
            atoms: self.atoms.iter().rev().map(|&(e, w)| (-e, w)).collect(),
        }
    }

    /// Atoms at bitwise-equal energies merged into one.
    pub fn merged(&self) -> Self {
        let mut atoms: Vec<(f64, f64)> = Vec::with_capacity(self.atoms.len());
        for &(e, w) in &self.atoms {
            match atoms.last_mut() {
                Some(last) if last.0 == e => last.1 += w,
                _ => atoms.push((e, w)),
            }
        }
        Self { atoms }
    }

    /// Weighted union `Σ_k c_k μ_k`, in input order before sorting.
    pub fn mixture<'a, I>(parts: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, &'a EmpiricalDos)>,
    {
        let mut atoms = Vec::new();
        for (c, dos) in parts {
            if !(c >= 0.0 && c.is_finite()) {
                return Err(invalid("mixture weight", c, "must be finite and >= 0"));
            }
            atoms.extend(dos.atoms.iter().map(|&(e, w)| (e, c * w)));
        }
        Self::from_atoms(atoms)
    }

    /// Right-continuous CDF at `energy`.
    pub fn cdf(&self, energy: f64) -> f64 {
        let k = self.atoms.partition_point(|a| a.0 <= energy);
        self.atoms[..k].iter().map(|a| a.1).sum()
    }

    fn check_normalized(&self) -> Result<()> {
        let total = self.total_weight();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::Unnormalized(total));
        }
        Ok(())
    }
}

/// `|Λ|⁻¹ Σ_j δ_{E_j}`.
pub fn empirical_dos(eigs: &[f64], cardinality: usize) -> Result<EmpiricalDos> {
    if eigs.len() != cardinality || cardinality == 0 {
        return Err(Error::LengthMismatch {
            expected: cardinality,
            found: eigs.len(),
        });
    }
    let w = 1.0 / cardinality as f64;
    EmpiricalDos::from_atoms(eigs.iter().map(|&e| (e, w)).collect())
}

/// `∫ g dμ = Σ_j w_j g(E_j)`.
pub fn integrate<F: Fn(f64) -> f64>(dos: &EmpiricalDos, g: F) -> f64 {
    dos.atoms.iter().map(|&(e, w)| w * g(e)).sum()
}

/// `|Λ|⁻¹ tr (H_L − z)⁻¹ = |Λ|⁻¹ Σ_j (E_j − z)⁻¹`.
pub fn resolvent_trace_avg(op: &TruncatedOperator, z: Complex64) -> Result<Complex64> {
    if z.im == 0.0 || !z.im.is_finite() || !z.re.is_finite() {
        return Err(Error::RealSpectralParameter);
    }
    let eigs = op.eigenvalues()?;
    let n = eigs.len() as f64;
    let sum: Complex64 = eigs
        .iter()
        .map(|&e| (Complex64::new(e, 0.0) - z).inv())
        .sum();
    Ok(sum / n)
}

/// Spectral measure of the truncation at one site: atoms `(E_j, |v_j(site)|²)`.
pub fn local_dos(op: &TruncatedOperator, site: SiteIndex) -> Result<EmpiricalDos> {
    let row = op.window.row(site).ok_or(Error::SiteOutsideWindow(site))?;
    let eig = op.eigen_decomposition()?;
    local_dos_from(&eig, row)
}

pub fn local_dos_from(eig: &EigenDecomposition, row: usize) -> Result<EmpiricalDos> {
    let weights = eig.weights_at(row);
    EmpiricalDos::from_atoms(eig.values.iter().copied().zip(weights).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kernel {
    Gaussian,
    Lorentzian,
}

impl Kernel {
    pub fn eval(&self, x: f64, width: f64) -> f64 {
        match self {
            Kernel::Gaussian => {
                let t = x / width;
                (-0.5 * t * t).exp() / (width * (2.0 * PI).sqrt())
            }
            Kernel::Lorentzian => width / (PI * (x * x + width * width)),
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            Kernel::Gaussian => "gaussian",
            Kernel::Lorentzian => "lorentzian",
        }
    }
}

/// Smoothed density on an energy grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DosCurve {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub kernel: Kernel,
    pub bandwidth: f64,
}

impl DosCurve {
    /// Trapezoid integral over the grid.
    pub fn mass(&self) -> f64 {
        self.grid
            .windows(2)
            .zip(self.density.windows(2))
            .map(|(e, d)| 0.5 * (e[1] - e[0]) * (d[0] + d[1]))
            .sum()
    }
}

pub fn smooth(
    dos: &EmpiricalDos,
    kernel: Kernel,
    bandwidth: f64,
    grid: &[f64],
) -> Result<DosCurve> {
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(invalid("bandwidth", bandwidth, "must be finite and > 0"));
    }
    if grid.is_empty() || grid.windows(2).any(|p| !(p[0] < p[1])) {
        return Err(Error::BadGrid);
    }
    let density = grid
        .iter()
        .map(|&e| {
            dos.atoms
                .iter()
                .map(|&(ej, w)| w * kernel.eval(e - ej, bandwidth))
                .sum()
        })
        .collect();
    Ok(DosCurve {
        grid: grid.to_vec(),
        density,
        kernel,
        bandwidth,
    })
}

/// Evenly spaced grid of `points` energies on `[lo, hi]`.
pub fn uniform_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => {
            let step = (hi - lo) / (points - 1) as f64;
            (0..points).map(|k| lo + step * k as f64).collect()
        }
    }
}

/// Sup-distance between the two CDFs.
pub fn ks_distance(a: &EmpiricalDos, b: &EmpiricalDos) -> Result<f64> {
    a.check_normalized()?;
    b.check_normalized()?;
    let (xs, ys) = (&a.atoms, &b.atoms);
    let (mut i, mut j) = (0, 0);
    let (mut fa, mut fb) = (0.0, 0.0);
    let mut sup: f64 = 0.0;
    while i < xs.len() || j < ys.len() {
        let e = match (xs.get(i), ys.get(j)) {
            (Some(x), Some(y)) => x.0.min(y.0),
            (Some(x), None) => x.0,
            (None, Some(y)) => y.0,
            (None, None) => unreachable!(),
        };
        while i < xs.len() && xs[i].0 == e {
            fa += xs[i].1;
            i += 1;
        }
        while j < ys.len() && ys[j].0 == e {
            fb += ys[j].1;
            j += 1;
        }
        sup = sup.max((fa - fb).abs());
    }
    Ok(sup.clamp(0.0, 1.0))
}

/// KS distance with horizontal slack `δ`:
/// `sup_x max(F_a(x) − F_b(x + δ), F_b(x) − F_a(x + δ), 0)`.
///
/// Atoms displaced by less than `δ` no longer count, which makes the value
/// stable under roundoff when measures are compared that agree exactly in
/// exact arithmetic. `δ = 0` gives [`ks_distance`].
pub fn ks_distance_with_slack(a: &EmpiricalDos, b: &EmpiricalDos, delta: f64) -> Result<f64> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(invalid("delta", delta, "must be finite and >= 0"));
    }
    a.check_normalized()?;
    b.check_normalized()?;
    let one_side = |p: &EmpiricalDos, q: &EmpiricalDos| {
        let prefix: Vec<f64> = q
            .atoms
            .iter()
            .scan(0.0, |acc, a| {
                *acc += a.1;
                Some(*acc)
            })
            .collect();
        let mut fp = 0.0;
        let mut sup: f64 = 0.0;
        for &(e, w) in &p.atoms {
            fp += w;
            let k = q.atoms.partition_point(|a| a.0 <= e + delta);
            let fq = if k == 0 { 0.0 } else { prefix[k - 1] };
            sup = sup.max(fp - fq);
        }
        sup
    };
    Ok(one_side(a, b).max(one_side(b, a)).clamp(0.0, 1.0))
}

/// Sup-distance between the empirical CDF and a continuous CDF, checked on
/// both sides of every jump.
pub fn ks_to_cdf<F: Fn(f64) -> f64>(a: &EmpiricalDos, cdf: F) -> Result<f64> {
    a.check_normalized()?;
    let merged = a.merged();
    let mut below = 0.0;
    let mut sup: f64 = 0.0;
    for &(e, w) in &merged.atoms {
        let f = cdf(e);
        let above = below + w;
        sup = sup.max((below - f).abs()).max((above - f).abs());
        below = above;
    }
    Ok(sup.clamp(0.0, 1.0))
}

/// CDF of the free chain DOS on `[−2, 2]` (arcsine law).
pub fn free_chain_cdf(energy: f64) -> f64 {
    if energy <= -2.0 {
        0.0
    } else if energy >= 2.0 {
        1.0
    } else {
        0.5 + (energy / 2.0).asin() / PI
    }
}

/// `(w1, w2) = ((1−θ)/(2−θ), 1/(2−θ))`; `w1` is computed as `1 − w2` so the
/// pair sums to one exactly.
pub fn layer_weights(mismatch: f64) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&mismatch) {
        return Err(invalid("theta", mismatch, "must lie in [0, 1)"));
    }
    let w2 = 1.0 / (2.0 - mismatch);
    Ok((1.0 - w2, w2))
}

/// One quadrature node of a limiting-DOS estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftNode {
    pub shift: f64,
    /// Weight of this node's measure in the mixture.
    pub weight: f64,
    /// Origin site whose local measure was used, `None` for the full DOS.
    pub origin: Option<Layer>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitingDosEstimate {
    pub mixture: EmpiricalDos,
    pub nodes: Vec<ShiftNode>,
    pub layer_weights: Option<(f64, f64)>,
}

/// Midpoints `(k + ½)·cell/M`, `k = 0..M`.
pub fn midpoint_nodes(cell: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|k| (k as f64 + 0.5) * cell / count as f64)
        .collect()
}

/// Reduced-chain limiting DOS: equal-weight mixture of the empirical DOS
/// at `M` midpoint shifts in `[0, 1 − θ)`.
pub fn limiting_dos_reduced(
    mismatch: f64,
    hopping: HoppingParams,
    size: f64,
    nodes: usize,
    tail_tol: f64,
) -> Result<LimitingDosEstimate> {
    if nodes == 0 {
        return Err(invalid("M", 0.0, "need at least one node"));
    }
    let shifts = midpoint_nodes(1.0 - mismatch, nodes);
    let parts: Vec<EmpiricalDos> = shifts
        .par_iter()
        .map(|&b| {
            let model = OperatorModel::reduced_chain(mismatch, b, hopping)?;
            let window = build_window(&model, size)?;
            let op = assemble(&model, &window, tail_tol)?;
            empirical_dos(&op.eigenvalues()?, window.total())
        })
        .collect::<Result<_>>()?;
    let c = 1.0 / nodes as f64;
    let mixture = EmpiricalDos::mixture(parts.iter().map(|d| (c, d)))?;
    Ok(LimitingDosEstimate {
        mixture,
        nodes: shifts
            .into_iter()
            .map(|shift| ShiftNode {
                shift,
                weight: c,
                origin: None,
            })
            .collect(),
        layer_weights: None,
    })
}

/// Coupled-chain limiting DOS: `w2` times the average over `b₁ ∈ [0, 1)`
/// (`layer_two_nodes` midpoints) of the local measure at the layer-two
/// origin, plus `w1` times the average over `b₂ ∈ [0, 1 − θ)`
/// (`layer_one_nodes` midpoints) of the local measure at the layer-one
/// origin.
pub fn limiting_dos_coupled(
    mismatch: f64,
    hopping: HoppingParams,
    size: f64,
    layer_two_nodes: usize,
    layer_one_nodes: usize,
    tail_tol: f64,
) -> Result<LimitingDosEstimate> {
    if layer_two_nodes == 0 || layer_one_nodes == 0 {
        return Err(invalid("M", 0.0, "need at least one node per layer"));
    }
    if !(size > 1.0) {
        return Err(invalid(
            "L",
            size,
            "must exceed every sampled shift (L > 1)",
        ));
    }
    let (w1, w2) = layer_weights(mismatch)?;
    let mut nodes: Vec<ShiftNode> = midpoint_nodes(1.0, layer_two_nodes)
        .into_iter()
        .map(|shift| ShiftNode {
            shift,
            weight: w2 / layer_two_nodes as f64,
            origin: Some(Layer::Second),
        })
        .collect();
    nodes.extend(
        midpoint_nodes(1.0 - mismatch, layer_one_nodes)
            .into_iter()
            .map(|shift| ShiftNode {
                shift,
                weight: w1 / layer_one_nodes as f64,
                origin: Some(Layer::First),
            }),
    );

    let parts: Vec<EmpiricalDos> = nodes
        .par_iter()
        .map(|node| {
            let model = OperatorModel::coupled_chain(mismatch, node.shift, hopping)?;
            let window = build_window(&model, size)?;
            let op = assemble(&model, &window, tail_tol)?;
            let origin = match node.origin {
                Some(Layer::Second) => SiteIndex::second(0),
                _ => SiteIndex::first(0),
            };
            local_dos(&op, origin)
        })
        .collect::<Result<_>>()?;
    let mixture = EmpiricalDos::mixture(nodes.iter().zip(&parts).map(|(n, d)| (n.weight, d)))?;
    Ok(LimitingDosEstimate {
        mixture,
        nodes,
        layer_weights: Some((w1, w2)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn atoms(pairs: &[(f64, f64)]) -> EmpiricalDos {
        EmpiricalDos::from_atoms(pairs.to_vec()).unwrap()
    }

    #[test]
    fn slack_absorbs_roundoff() {
        let a = atoms(&[(-1.0, 0.5), (1.0, 0.5)]);
        let b = atoms(&[(-1.0, 0.5), (1.0 + 1e-15, 0.5)]);
        assert_eq!(ks_distance(&a, &b).unwrap(), 0.5);
        assert_eq!(ks_distance_with_slack(&a, &b, 1e-12).unwrap(), 0.0);
        let far = atoms(&[(-1.0, 0.5), (1.5, 0.5)]);
        assert_eq!(ks_distance_with_slack(&a, &far, 1e-12).unwrap(), 0.5);
        assert_eq!(
            ks_distance_with_slack(&a, &far, 0.0).unwrap(),
            ks_distance(&a, &far).unwrap()
        );
    }

    #[test]
    fn single_eigenvalue() {
        let d = empirical_dos(&[0.0], 1).unwrap();
        assert_eq!(d.atoms(), &[(0.0, 1.0)]);
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(
            empirical_dos(&[0.0, 1.0], 3),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn integrate_constant_is_total_weight() {
        let d = atoms(&[(0.0, 0.25), (1.0, 0.5), (2.0, 0.125)]);
        assert_eq!(integrate(&d, |_| 1.0), d.total_weight());
    }

    #[test]
    fn ks_examples() {
        let a = atoms(&[(0.0, 0.5), (1.0, 0.5)]);
        assert_eq!(ks_distance(&a, &a).unwrap(), 0.0);
        let p = atoms(&[(0.0, 1.0)]);
        let q = atoms(&[(1.0, 1.0)]);
        assert_eq!(ks_distance(&p, &q).unwrap(), 1.0);
        let third = 1.0 / 3.0;
        let b = atoms(&[(0.0, third), (1.0, third), (2.0, third)]);
        assert!((ks_distance(&a, &b).unwrap() - third).abs() < 1e-15);
        // the sup is attained on [1, 2)
        assert!((a.cdf(1.5) - b.cdf(1.5) - third).abs() < 1e-15);
    }

    #[test]
    fn ks_rejects_unnormalized() {
        let a = atoms(&[(0.0, 0.5)]);
        assert!(matches!(ks_distance(&a, &a), Err(Error::Unnormalized(_))));
    }

    #[test]
    fn ks_to_cdf_point_mass() {
        let a = atoms(&[(0.0, 1.0)]);
        let d = ks_to_cdf(&a, free_chain_cdf).unwrap();
        assert!((d - 0.5).abs() < 1e-15);
    }

    #[test]
    fn smoothing_single_atom() {
        let d = atoms(&[(0.0, 1.0)]);
        let eta = 0.2;
        let curve = smooth(&d, Kernel::Gaussian, eta, &[0.0]).unwrap();
        assert!((curve.density[0] - 1.0 / (eta * (2.0 * PI).sqrt())).abs() < 1e-14);
    }

    #[test]
    fn smoothing_preserves_mass() {
        let d = atoms(&[(-0.5, 0.5), (0.7, 0.5)]);
        let grid = uniform_grid(-3.0, 3.0, 2001);
        for kernel in [Kernel::Gaussian, Kernel::Lorentzian] {
            let eta = 0.05;
            let m = smooth(&d, kernel, eta, &grid).unwrap().mass();
            assert!((m - 1.0).abs() <= 5.0 * eta, "{kernel:?} {m}");
        }
    }

    #[test]
    fn smoothing_symmetric_pair() {
        let d = atoms(&[(-1.0, 0.5), (1.0, 0.5)]);
        let grid = uniform_grid(-2.0, 2.0, 401);
        let curve = smooth(&d, Kernel::Gaussian, 0.1, &grid).unwrap();
        for k in 0..grid.len() {
            let mirror = curve.density[grid.len() - 1 - k];
            assert!((curve.density[k] - mirror).abs() < 1e-12);
        }
    }

    #[test]
    fn smoothing_errors() {
        let d = atoms(&[(0.0, 1.0)]);
        assert!(smooth(&d, Kernel::Gaussian, 0.0, &[0.0]).is_err());
        assert!(matches!(
            smooth(&d, Kernel::Gaussian, 0.1, &[1.0, 0.0]),
            Err(Error::BadGrid)
        ));
    }

    #[test]
    fn resolvent_scalar() {
        let model = OperatorModel::almost_mathieu(0.3, 0.0, 0.0).unwrap();
        let w = build_window(&model, 0.5).unwrap();
        let op = TruncatedOperator {
            window: w,
            matrix: DMatrix::zeros(1, 1),
        };
        let r = resolvent_trace_avg(&op, Complex64::new(0.0, 1.0)).unwrap();
        assert!((r - Complex64::new(0.0, 1.0)).norm() < 1e-15);
        assert!(matches!(
            resolvent_trace_avg(&op, Complex64::new(1.0, 0.0)),
            Err(Error::RealSpectralParameter)
        ));
    }

    #[test]
    fn local_dos_scalar_and_outside() {
        let model = OperatorModel::almost_mathieu(0.3, 0.0, 0.0).unwrap();
        let w = build_window(&model, 0.5).unwrap();
        let op = assemble(&model, &w, 1e-12).unwrap();
        let l = local_dos(&op, SiteIndex::first(0)).unwrap();
        assert_eq!(l.atoms(), &[(0.0, 1.0)]);
        assert!(matches!(
            local_dos(&op, SiteIndex::first(1)),
            Err(Error::SiteOutsideWindow(_))
        ));
    }

    #[test]
    fn layer_weight_algebra() {
        let (w1, w2) = layer_weights(crate::kernels::default_mismatch()).unwrap();
        assert_eq!(w1 + w2, 1.0);
        assert!((w1 / w2 - (1.0 - crate::kernels::default_mismatch())).abs() < 1e-15);
        assert_eq!(layer_weights(0.0).unwrap(), (0.5, 0.5));
        assert!(layer_weights(1.0).is_err());
    }

    #[test]
    fn reflection_and_merge() {
        let d = atoms(&[(-1.0, 0.25), (0.5, 0.25), (0.5, 0.5)]);
        let r = d.reflected();
        assert_eq!(r.atoms(), &[(-0.5, 0.5), (-0.5, 0.25), (1.0, 0.25)]);
        assert_eq!(d.merged().atoms(), &[(-1.0, 0.25), (0.5, 0.75)]);
    }

    #[test]
    fn midpoints() {
        assert_eq!(midpoint_nodes(1.0, 4), vec![0.125, 0.375, 0.625, 0.875]);
    }
}
