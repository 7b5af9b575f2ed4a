//! Dirichlet windows `Λ_L`, the dense truncation `H_L = 1_Λ H 1_Λ`, its
//! spectrum, and the trace norm of the discarded boundary coupling.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::kernels::{invalid, matrix_element, Layer, ModelKind, OperatorModel, SiteIndex};
use crate::{Error, Result};

/// Index set of a truncation, laid out as contiguous index ranges per layer.
///
/// Rows `0..card1` hold layer-one sites in ascending `n`, followed by the
/// layer-two sites (coupled chain only).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeWindow {
    pub kind: ModelKind,
    pub size: f64,
    first: (i64, i64),
    second: Option<(i64, i64)>,
    /// Interlayer shift and mismatch the layer-two range was built for.
    geometry: Option<(f64, f64)>,
}

impl LatticeWindow {
    pub fn card1(&self) -> usize {
        (self.first.1 - self.first.0 + 1) as usize
    }

    pub fn card2(&self) -> usize {
        self.second.map_or(0, |(lo, hi)| (hi - lo + 1) as usize)
    }

    pub fn total(&self) -> usize {
        self.card1() + self.card2()
    }

    /// Inclusive index range of a layer, if present.
    pub fn range(&self, layer: Layer) -> Option<(i64, i64)> {
        match layer {
            Layer::First => Some(self.first),
            Layer::Second => self.second,
        }
    }

    pub fn contains(&self, site: SiteIndex) -> bool {
        self.row(site).is_some()
    }

    /// Row of `site` in the assembled matrix.
    pub fn row(&self, site: SiteIndex) -> Option<usize> {
        let (lo, hi) = self.range(site.layer)?;
        if site.n < lo || site.n > hi {
            return None;
        }
        let offset = match site.layer {
            Layer::First => 0,
            Layer::Second => self.card1(),
        };
        Some(offset + (site.n - lo) as usize)
    }

    pub fn site(&self, row: usize) -> SiteIndex {
        let card1 = self.card1();
        if row < card1 {
            SiteIndex::first(self.first.0 + row as i64)
        } else {
            let (lo, _) = self
                .second
                .expect("row beyond layer one in a single-chain window");
            SiteIndex::second(lo + (row - card1) as i64)
        }
    }

    pub fn sites(&self) -> impl Iterator<Item = SiteIndex> + '_ {
        (0..self.total()).map(move |r| self.site(r))
    }

    fn check_model(&self, model: &OperatorModel) -> Result<()> {
        if self.kind != model.kind() {
            return Err(Error::WindowMismatch {
                size: self.size,
                reason: "model family differs",
            });
        }
        if let OperatorModel::CoupledChain {
            mismatch, shift, ..
        } = *model
        {
            if self.geometry != Some((shift, mismatch)) {
                return Err(Error::WindowMismatch {
                    size: self.size,
                    reason: "interlayer shift or mismatch differs",
                });
            }
        }
        Ok(())
    }
}

/// Builds `Λ_L`. Single chains use `[−⌊L⌋, ⌊L⌋]`; the coupled chain adds
/// layer-two sites `n ∈ [−(L+b)/(1−θ), (L−b)/(1−θ)]`, which requires `L > |b|`.
pub fn build_window(model: &OperatorModel, size: f64) -> Result<LatticeWindow> {
    model.validate()?;
    if !(size > 0.0 && size.is_finite()) {
        return Err(invalid("L", size, "must be finite and > 0"));
    }
    let half = size.floor() as i64;
    let mut window = LatticeWindow {
        kind: model.kind(),
        size,
        first: (-half, half),
        second: None,
        geometry: None,
    };
    if let OperatorModel::CoupledChain {
        mismatch, shift, ..
    } = *model
    {
        if size <= shift.abs() {
            return Err(Error::WindowTooSmall {
                size,
                reason: "coupled-chain windows need L > |b|",
            });
        }
        let s = 1.0 - mismatch;
        let lo = -((size + shift) / s).floor() as i64;
        let hi = ((size - shift) / s).floor() as i64;
        window.second = Some((lo, hi));
        window.geometry = Some((shift, mismatch));
    }
    Ok(window)
}

/// Single-chain window on the explicit interval `[lo, hi]`; `size` records
/// the half-width `(hi − lo)/2`.
pub fn build_interval(model: &OperatorModel, lo: i64, hi: i64) -> Result<LatticeWindow> {
    model.validate()?;
    if !model.kind().is_single_chain() {
        return Err(Error::WindowMismatch {
            size: (hi - lo) as f64 / 2.0,
            reason: "explicit intervals are for single-chain models",
        });
    }
    if hi < lo {
        return Err(Error::WindowTooSmall {
            size: (hi - lo) as f64 / 2.0,
            reason: "interval is empty",
        });
    }
    Ok(LatticeWindow {
        kind: model.kind(),
        size: (hi - lo) as f64 / 2.0,
        first: (lo, hi),
        second: None,
        geometry: None,
    })
}

/// Dense real symmetric truncation of a model to a window.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedOperator {
    pub window: LatticeWindow,
    pub matrix: DMatrix<f64>,
}

/// Eigenvalues in ascending order with matching unit eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl EigenDecomposition {
    /// Squared eigenvector amplitudes `|v_j(row)|²` for every `j`.
    pub fn weights_at(&self, row: usize) -> Vec<f64> {
        (0..self.values.len())
            .map(|j| {
                let v = self.vectors[(row, j)];
                v * v
            })
            .collect()
    }
}

impl TruncatedOperator {
    pub fn dim(&self) -> usize {
        self.window.total()
    }

    fn check_finite(&self) -> Result<()> {
        for c in 0..self.matrix.ncols() {
            for r in 0..self.matrix.nrows() {
                if !self.matrix[(r, c)].is_finite() {
                    return Err(Error::NonFinite { row: r, col: c });
                }
            }
        }
        Ok(())
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        self.check_finite()?;
        let mut values: Vec<f64> = self
            .matrix
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect();
        values.sort_by(f64::total_cmp);
        Ok(values)
    }

    pub fn eigen_decomposition(&self) -> Result<EigenDecomposition> {
        self.check_finite()?;
        let eig = SymmetricEigen::new(self.matrix.clone());
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&j| eig.eigenvalues[j]).collect();
        let vectors = eig.eigenvectors.select_columns(order.iter());
        Ok(EigenDecomposition { values, vectors })
    }

    /// Largest absolute row sum, an upper bound on the spectral radius.
    pub fn row_sum_bound(&self) -> f64 {
        self.matrix
            .row_iter()
            .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Fills `1_Λ H 1_Λ` from [`matrix_element`]. The upper triangle is
/// evaluated and mirrored, so the result is exactly symmetric.
pub fn assemble(
    model: &OperatorModel,
    window: &LatticeWindow,
    tail_tol: f64,
) -> Result<TruncatedOperator> {
    window.check_model(model)?;
    let n = window.total();
    let sites: Vec<SiteIndex> = window.sites().collect();
    let mut matrix = DMatrix::zeros(n, n);
    for c in 0..n {
        for r in 0..=c {
            let v = matrix_element(model, sites[r], sites[c], tail_tol)?;
            matrix[(r, c)] = v;
            matrix[(c, r)] = v;
        }
    }
    Ok(TruncatedOperator {
        window: window.clone(),
        matrix,
    })
}

pub fn eigenvalues(op: &TruncatedOperator) -> Result<Vec<f64>> {
    op.eigenvalues()
}

/// Norm bound for the model restricted to a window: `2 + λ` for
/// almost-Mathieu, `2 + max|ω_n|` for Anderson, and the largest row sum of
/// the truncated matrix for the chain models.
pub fn spectral_bound(model: &OperatorModel, op: &TruncatedOperator) -> f64 {
    match *model {
        OperatorModel::AlmostMathieu { lambda, .. } => 2.0 + lambda,
        OperatorModel::Anderson { law } => {
            let (lo, hi) = op.window.first;
            2.0 + (lo..=hi).map(|n| law.value(n).abs()).fold(0.0, f64::max)
        }
        OperatorModel::CoupledChain { .. } | OperatorModel::ReducedChain { .. } => {
            op.row_sum_bound()
        }
    }
}

/// Bound on the sum of `|H_{xy}|` over window sites `x` and sites `y`
/// further than `pad` outside the window. Zero for nearest-neighbour models
/// once `pad ≥ 1`.
pub fn exterior_tail_bound(model: &OperatorModel, pad: f64) -> f64 {
    match *model {
        OperatorModel::AlmostMathieu { .. } | OperatorModel::Anderson { .. } => 0.0,
        OperatorModel::CoupledChain {
            mismatch, hopping, ..
        } => {
            let b = hopping.decay;
            let s = 1.0 - mismatch;
            // two sides, two interlayer orientations
            4.0 * hopping.amplitude * (-b * pad).exp()
                / ((1.0 - (-b).exp()) * (1.0 - (-b * s).exp()))
        }
        OperatorModel::ReducedChain {
            mismatch, hopping, ..
        } => {
            let a2 = hopping.amplitude * hopping.amplitude;
            if a2 == 0.0 {
                return 0.0;
            }
            let b = hopping.decay;
            let s = 1.0 - mismatch;
            let c = 1.0 + 2.0 / (1.0 - (-2.0 * b * s).exp());
            let start = pad.floor() as i64 + 1;
            // pairs (window depth j ≥ 0, exterior depth k ≥ start) with j + k = t
            let mut total = 0.0;
            let mut t = start;
            loop {
                let mult = (t - start + 1) as f64;
                let tf = t as f64;
                let term = mult * a2 * (-b * tf).exp() * (tf / s + c);
                total += term;
                if term < total * 1e-18 || term == 0.0 {
                    break;
                }
                t += 1;
            }
            2.0 * total
        }
    }
}

/// Smallest integer pad with `exterior_tail_bound ≤ tail_tol·total`.
pub fn minimal_pad(model: &OperatorModel, tail_tol: f64, total: usize) -> f64 {
    let budget = tail_tol * total as f64;
    let mut pad = 1.0;
    while exterior_tail_bound(model, pad) > budget && pad < 1e4 {
        pad += 1.0;
    }
    pad
}

/// Trace norm of the coupling block between the window and the exterior
/// sites within `outer_pad` of it. Up to `tail_tol·|Λ_L|` this is
/// `tr|H_L − 1_Λ H|`; dividing by `|Λ_L|` gives the empirical `ε(L)`.
pub fn truncation_trace_defect(
    model: &OperatorModel,
    window: &LatticeWindow,
    outer_pad: f64,
    tail_tol: f64,
) -> Result<f64> {
    window.check_model(model)?;
    if !(tail_tol > 0.0) {
        return Err(invalid("tail_tol", tail_tol, "must be > 0"));
    }
    let budget = tail_tol * window.total() as f64;
    if !(outer_pad >= 1.0) || exterior_tail_bound(model, outer_pad) > budget {
        return Err(Error::InsufficientPad {
            pad: outer_pad,
            required: minimal_pad(model, tail_tol, window.total()),
        });
    }

    let exterior = exterior_sites(model, window, outer_pad);
    let interior: Vec<SiteIndex> = window.sites().collect();
    let mut block = DMatrix::zeros(interior.len(), exterior.len());
    for (c, &y) in exterior.iter().enumerate() {
        for (r, &x) in interior.iter().enumerate() {
            block[(r, c)] = matrix_element(model, x, y, tail_tol)?;
        }
    }
    Ok(block.singular_values().iter().sum())
}

/// Sites outside the window whose physical position is within `pad` of it.
fn exterior_sites(model: &OperatorModel, window: &LatticeWindow, pad: f64) -> Vec<SiteIndex> {
    let mut out = Vec::new();
    let (lo, hi) = window.first;
    let reach = pad.ceil() as i64;
    out.extend((lo - reach..lo).map(SiteIndex::first));
    out.extend((hi + 1..=hi + reach).map(SiteIndex::first));
    if let (
        OperatorModel::CoupledChain {
            mismatch, shift, ..
        },
        Some((lo2, hi2)),
    ) = (*model, window.second)
    {
        let s = 1.0 - mismatch;
        let outer_lo = -((window.size + pad + shift) / s).floor() as i64;
        let outer_hi = ((window.size + pad - shift) / s).floor() as i64;
        out.extend((outer_lo..lo2).map(SiteIndex::second));
        out.extend((hi2 + 1..=outer_hi).map(SiteIndex::second));
    }
    out
}
