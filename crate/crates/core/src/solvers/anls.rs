//! ANLS updates for CNMF: an exact block NNLS solve for `Wtilde` (one K*L
//! system shared across all N rows of X) and a single coordinate-descent
//! pass over the columns of `H` (one K-variable NNLS per column).

use ndarray::{Array1, Array2};

use crate::conv::{shift_columns, Residual};
use crate::error::Result;
use crate::nnls::{nnls_bpp, nnls_projgrad, NormalEquations, DEFAULT_KKT_TOL};
use crate::types::{CnmfModel, DataMatrix};

const PROJGRAD_FALLBACK_ITERS: usize = 10_000;

/// Solves `min_{Wtilde >= 0} ||X - Wtilde Htilde||^2` row by row of X. The
/// KL x KL gram `Htilde Htilde^T` is computed once and shared across rows.
/// Returns true if any row fell back to projected gradient or missed the
/// KKT tolerance.
pub fn anls_update_w(x: &DataMatrix, model: &mut CnmfModel) -> Result<bool> {
    let (n, t, k_max, l_max) = model.dims();
    let kl = k_max * l_max;

    // Htilde stacks H S_0 .. H S_{L-1}; row p = l*K + k.
    let mut htilde = Array2::zeros((kl, t));
    for l in 0..l_max {
        let shifted = shift_columns(model.activations.values().view(), l);
        for k in 0..k_max {
            htilde.row_mut(l * k_max + k).assign(&shifted.row(k));
        }
    }
    let gram = htilde.dot(&htilde.t());
    let rhs_all = htilde.dot(&x.values().t()); // KL x N

    let mut warned = false;
    for feat in 0..n {
        let ne = NormalEquations::new(gram.clone(), rhs_all.column(feat).to_owned())?;
        let mut warm = Array1::zeros(kl);
        for l in 0..l_max {
            for k in 0..k_max {
                warm[l * k_max + k] = model.motifs.values()[[l, feat, k]];
            }
        }
        let sol = match nnls_bpp(&ne, Some(warm.view())) {
            Ok(sol) => sol,
            Err(_) => {
                warned = true;
                nnls_projgrad(&ne, Some(warm.view()), PROJGRAD_FALLBACK_ITERS, DEFAULT_KKT_TOL)
            }
        };
        warned |= !sol.converged;
        for l in 0..l_max {
            for k in 0..k_max {
                model.motifs.values_mut()[[l, feat, k]] = sol.x[l * k_max + k];
            }
        }
    }
    Ok(warned)
}

/// One coordinate-descent pass over the columns of `H` (each column updated
/// exactly once, ascending t). Column t is a K-variable NNLS whose gram is
/// `G_kk' = <clipped W_::k, clipped W_::k'>`; the right-hand side comes from
/// the running residual with column t's own contribution added back. The
/// residual is patched after each column solve.
pub fn anls_update_h(x: &DataMatrix, model: &mut CnmfModel) -> Result<bool> {
    let (n, t, k_max, l_max) = model.dims();
    let mut r = Residual::full(x, &model.motifs, &model.activations);

    // grams_by_width[m] (K x K) accumulates the first m lag slices.
    let mut grams_by_width: Vec<Array2<f64>> = Vec::with_capacity(l_max + 1);
    grams_by_width.push(Array2::zeros((k_max, k_max)));
    for lag in 0..l_max {
        let wl = model.motifs.lag_slice(lag);
        let g = grams_by_width[lag].clone() + wl.t().dot(&wl);
        grams_by_width.push(g);
    }

    let mut warned = false;
    for tt in 0..t {
        let width = l_max.min(t - tt);
        let gram = &grams_by_width[width];

        let col_old: Array1<f64> = model.activations.values().column(tt).to_owned();
        let mut rhs = gram.dot(&col_old);
        for k in 0..k_max {
            let mut ip = 0.0;
            for lag in 0..width {
                for feat in 0..n {
                    ip += model.motifs.values()[[lag, feat, k]] * r.values()[[feat, tt + lag]];
                }
            }
            rhs[k] += ip;
        }

        let ne = NormalEquations::new(gram.clone(), rhs)?;
        let sol = match nnls_bpp(&ne, Some(col_old.view())) {
            Ok(sol) => sol,
            Err(_) => {
                warned = true;
                nnls_projgrad(&ne, Some(col_old.view()), PROJGRAD_FALLBACK_ITERS, DEFAULT_KKT_TOL)
            }
        };
        warned |= !sol.converged;
        for k in 0..k_max {
            let old = col_old[k];
            let new = sol.x[k];
            if new != old {
                model.activations.values_mut()[[k, tt]] = new;
                r.patch(model.motifs.motif_slice(k), tt, old, new);
            }
        }
    }
    Ok(warned)
}
