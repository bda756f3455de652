//! Multiplicative updates for CNMF.

use crate::conv::{reconstruct, shift_columns, shift_columns_left};
use crate::solvers::SolverConfig;
use crate::types::{CnmfModel, DataMatrix};

/// One MU outer iteration: every lag slice `W_l` is updated by
/// `W_l <- W_l . [X (H S_{l-1})^T] / [Xhat (H S_{l-1})^T + eps]`
/// with `Xhat` computed once before the sweep, then `H` is updated by
/// `H <- H . [sum_l W_l^T X S_{-(l-1)}] / [sum_l W_l^T Xhat S_{-(l-1)} + eps]`
/// with `Xhat` recomputed after the W sweep.
///
/// The lag slice `W_l` is paired with the shift `S_{l-1}`, matching the
/// classical reconstruction form.
pub fn mu_step(x: &DataMatrix, model: &mut CnmfModel, cfg: &SolverConfig) {
    let (_, _, k, l_max) = model.dims();
    let eps = cfg.eps;

    // W sweep against the pre-sweep reconstruction.
    let xhat = reconstruct(&model.motifs, &model.activations);
    for l in 0..l_max {
        let hs = shift_columns(model.activations.values().view(), l);
        let num = x.values().dot(&hs.t());
        let den = xhat.dot(&hs.t());
        let mut wl = model.motifs.values_mut().index_axis_mut(ndarray::Axis(0), l);
        for ((i, j), w) in wl.indexed_iter_mut() {
            *w *= num[[i, j]] / (den[[i, j]] + eps);
        }
    }

    // H sweep against the refreshed reconstruction.
    let xhat = reconstruct(&model.motifs, &model.activations);
    let t = x.num_timebins();
    let mut num = ndarray::Array2::zeros((k, t));
    let mut den = ndarray::Array2::zeros((k, t));
    for l in 0..l_max {
        let wl = model.motifs.lag_slice(l);
        num += &wl.t().dot(&shift_columns_left(x.values().view(), l));
        den += &wl.t().dot(&shift_columns_left(xhat.view(), l));
    }
    for ((i, j), h) in model.activations.values_mut().indexed_iter_mut() {
        *h *= num[[i, j]] / (den[[i, j]] + eps);
    }
}
