//! Dense nonnegative matrix and tensor types for the CNMF model.
//!
//! Conventions: the data matrix `X` is `N x T` (features by timebins), the
//! motif tensor `W` is `L x N x K` (lag-major, so each lag slice `W_l` is a
//! contiguous `N x K` matrix), and the activation matrix `H` is `K x T`.

use ndarray::{Array2, Array3, ArrayView2, Axis};

use crate::error::{CnmfError, Result};

fn check_nonneg_2d(values: &Array2<f64>) -> Result<()> {
    for ((i, j), &v) in values.indexed_iter() {
        if v < 0.0 || !v.is_finite() {
            return Err(CnmfError::NegativeEntry { row: i, col: j, value: v });
        }
    }
    Ok(())
}

/// Nonnegative `N x T` observation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: Array2<f64>,
}

impl DataMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let (n, t) = values.dim();
        if n == 0 || t == 0 {
            return Err(CnmfError::InvalidDims(format!("data matrix is {n} x {t}")));
        }
        check_nonneg_2d(&values)?;
        Ok(Self { values })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn num_features(&self) -> usize {
        self.values.nrows()
    }

    pub fn num_timebins(&self) -> usize {
        self.values.ncols()
    }

    /// Root sum-of-squares norm.
    pub fn norm(&self) -> f64 {
        frob_norm(&self.values.view())
    }
}

/// Nonnegative `L x N x K` motif tensor. Slice `W_l` (fixing the lag) is
/// `N x K`; slice `W_::k` (fixing the component) is `L x N`, a single motif
/// of duration `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct MotifTensor {
    values: Array3<f64>,
}

impl MotifTensor {
    pub fn new(values: Array3<f64>) -> Result<Self> {
        let (l, n, k) = values.dim();
        if l == 0 || n == 0 || k == 0 {
            return Err(CnmfError::InvalidDims(format!("motif tensor is {l} x {n} x {k}")));
        }
        for ((a, b, _), &v) in values.indexed_iter() {
            if v < 0.0 || !v.is_finite() {
                return Err(CnmfError::NegativeEntry { row: a, col: b, value: v });
            }
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &Array3<f64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array3<f64> {
        &mut self.values
    }

    pub fn num_lags(&self) -> usize {
        self.values.dim().0
    }

    pub fn num_features(&self) -> usize {
        self.values.dim().1
    }

    pub fn num_components(&self) -> usize {
        self.values.dim().2
    }

    /// The `N x K` lag slice `W_l` (zero-based `l`).
    pub fn lag_slice(&self, l: usize) -> ArrayView2<'_, f64> {
        self.values.index_axis(Axis(0), l)
    }

    /// The `L x N` motif slice `W_::k` (zero-based `k`).
    pub fn motif_slice(&self, k: usize) -> ArrayView2<'_, f64> {
        self.values.index_axis(Axis(2), k)
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Nonnegative `K x T` activation matrix; row `k` gives the event times and
/// amplitudes of motif `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationMatrix {
    values: Array2<f64>,
}

impl ActivationMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let (k, t) = values.dim();
        if k == 0 || t == 0 {
            return Err(CnmfError::InvalidDims(format!("activation matrix is {k} x {t}")));
        }
        check_nonneg_2d(&values)?;
        Ok(Self { values })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array2<f64> {
        &mut self.values
    }

    pub fn num_components(&self) -> usize {
        self.values.nrows()
    }

    pub fn num_timebins(&self) -> usize {
        self.values.ncols()
    }
}

/// A paired (W, H) factorization state.
#[derive(Debug, Clone, PartialEq)]
pub struct CnmfModel {
    pub motifs: MotifTensor,
    pub activations: ActivationMatrix,
}

impl CnmfModel {
    pub fn new(motifs: MotifTensor, activations: ActivationMatrix) -> Result<Self> {
        if motifs.num_components() != activations.num_components() {
            return Err(CnmfError::ShapeMismatch(format!(
                "motif tensor has K={} but activation matrix has K={}",
                motifs.num_components(),
                activations.num_components()
            )));
        }
        if motifs.num_lags() > activations.num_timebins() {
            return Err(CnmfError::ShapeMismatch(format!(
                "motif duration L={} exceeds T={}",
                motifs.num_lags(),
                activations.num_timebins()
            )));
        }
        Ok(Self { motifs, activations })
    }

    /// (N, T, K, L)
    pub fn dims(&self) -> (usize, usize, usize, usize) {
        (
            self.motifs.num_features(),
            self.activations.num_timebins(),
            self.motifs.num_components(),
            self.motifs.num_lags(),
        )
    }

    pub fn check_against(&self, x: &DataMatrix) -> Result<()> {
        if self.motifs.num_features() != x.num_features()
            || self.activations.num_timebins() != x.num_timebins()
        {
            return Err(CnmfError::ShapeMismatch(format!(
                "model dims {:?} do not match data {} x {}",
                self.dims(),
                x.num_features(),
                x.num_timebins()
            )));
        }
        Ok(())
    }
}

pub(crate) fn frob_norm(a: &ArrayView2<'_, f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}
