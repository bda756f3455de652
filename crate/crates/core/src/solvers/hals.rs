//! HALS updates for CNMF: column updates on the block view
//! `Wtilde = [W_1 ... W_L]` and pure coordinate descent on single entries
//! of `H`, both with incremental residual maintenance.

use ndarray::Array1;

use crate::conv::Residual;
use crate::solvers::SolverConfig;
use crate::types::CnmfModel;

/// Sweep over the K*L columns of `Wtilde`. Column p = (l, k) is updated by
/// `w_p <- max(0, ([R + w_p h_p^T] h_p - l1_w) / (||h_p||^2 + l2_w))`
/// where `h_p` is row k of `H S_l`; the residual is patched after each
/// column. Columns with `||h_p||^2 = 0` are left unchanged.
pub fn hals_update_w(model: &mut CnmfModel, r: &mut Residual, cfg: &SolverConfig) {
    let (n, t, k_max, l_max) = model.dims();
    for l in 0..l_max {
        for k in 0..k_max {
            // h_p[tau] = H[k, tau - l]; its squared norm drops the last l entries.
            let h_row: Vec<f64> =
                model.activations.values().row(k).iter().take(t - l).copied().collect();
            let norm2: f64 = h_row.iter().map(|v| v * v).sum();
            if norm2 == 0.0 {
                continue;
            }
            // correlation = (R + w_old h_p^T) h_p, accumulated along the
            // contiguous residual rows
            let rv = r.values().as_slice().expect("residual is standard layout");
            let mut corr = Array1::<f64>::zeros(n);
            for feat in 0..n {
                let row = &rv[feat * t + l..(feat + 1) * t];
                corr[feat] = h_row.iter().zip(row).map(|(a, b)| a * b).sum();
            }
            let denom = norm2 + cfg.l2_w;
            for feat in 0..n {
                let old = model.motifs.values()[[l, feat, k]];
                let new = ((corr[feat] + old * norm2 - cfg.l1_w) / denom).max(0.0);
                if new != old {
                    model.motifs.values_mut()[[l, feat, k]] = new;
                    let delta = new - old;
                    let rvm = r.values_mut().as_slice_mut().expect("standard layout");
                    let row = &mut rvm[feat * t + l..(feat + 1) * t];
                    for (res, &amp) in row.iter_mut().zip(&h_row) {
                        *res -= delta * amp;
                    }
                }
            }
        }
    }
}

/// Pure coordinate descent on `H`: for each k (outer) and t (inner,
/// ascending), the entry update is
/// `H_kt <- max(0, (<[W_::k^T]_t, R> + H_kt ||W_::k||^2 - l1_h) / (||W_::k||^2 + l2_h))`
/// with the motif clipped at the right boundary and norms taken over the
/// clipped columns only. The residual is patched after each entry.
pub fn hals_update_h(model: &mut CnmfModel, r: &mut Residual, cfg: &SolverConfig) {
    let (n, t, k_max, l_max) = model.dims();
    for k in 0..k_max {
        // contiguous per-feature copy of W_::k (feature-major, lag-minor) so
        // the inner products below run along cache lines
        let mut wk = vec![0.0f64; n * l_max];
        for lag in 0..l_max {
            for feat in 0..n {
                wk[feat * l_max + lag] = model.motifs.values()[[lag, feat, k]];
            }
        }
        // norm_by_width[m] = squared norm of the first m lag rows of W_::k
        let mut norm_by_width = vec![0.0f64; l_max + 1];
        for lag in 0..l_max {
            let mut s = 0.0;
            for feat in 0..n {
                let v = wk[feat * l_max + lag];
                s += v * v;
            }
            norm_by_width[lag + 1] = norm_by_width[lag] + s;
        }
        for tt in 0..t {
            let width = l_max.min(t - tt);
            let norm2 = norm_by_width[width];
            if norm2 == 0.0 {
                continue;
            }
            let rv = r.values().as_slice().expect("residual is standard layout");
            let mut ip = 0.0;
            for feat in 0..n {
                let w_row = &wk[feat * l_max..feat * l_max + width];
                let r_row = &rv[feat * t + tt..feat * t + tt + width];
                ip += w_row.iter().zip(r_row).map(|(a, b)| a * b).sum::<f64>();
            }
            let old = model.activations.values()[[k, tt]];
            let new = ((ip + old * norm2 - cfg.l1_h) / (norm2 + cfg.l2_h)).max(0.0);
            if new != old {
                model.activations.values_mut()[[k, tt]] = new;
                // inline residual patch: E += (old - new) * [W_::k^T]_tt
                let delta = old - new;
                let rvm = r.values_mut().as_slice_mut().expect("standard layout");
                for feat in 0..n {
                    let w_row = &wk[feat * l_max..feat * l_max + width];
                    let r_row = &mut rvm[feat * t + tt..feat * t + tt + width];
                    for (res, &wv) in r_row.iter_mut().zip(w_row) {
                        *res += delta * wv;
                    }
                }
            }
        }
    }
}
