//! Nonnegative least squares on normal equations: block-principal pivoting,
//! a projected-gradient fallback, and an exhaustive active-set oracle for
//! small instances.
//!
//! All solvers take the problem in normal-equation form (gram = A^T A,
//! rhs = A^T b) because callers reuse one gram across many right-hand sides.

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{CnmfError, Result};

pub const DEFAULT_KKT_TOL: f64 = 1e-8;
pub const ORACLE_MAX_VARS: usize = 12;

#[derive(Debug, Clone)]
pub struct NormalEquations {
    pub gram: Array2<f64>,
    pub rhs: Array1<f64>,
}

impl NormalEquations {
    pub fn new(gram: Array2<f64>, rhs: Array1<f64>) -> Result<Self> {
        let (m, m2) = gram.dim();
        if m != m2 || m != rhs.len() || m == 0 {
            return Err(CnmfError::ShapeMismatch(format!(
                "gram is {m} x {m2}, rhs has length {}",
                rhs.len()
            )));
        }
        for i in 0..m {
            for j in (i + 1)..m {
                if (gram[[i, j]] - gram[[j, i]]).abs() > 1e-12 * (1.0 + gram[[i, i]].abs()) {
                    return Err(CnmfError::ShapeMismatch(format!(
                        "gram not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { gram, rhs })
    }

    pub fn num_vars(&self) -> usize {
        self.rhs.len()
    }

    /// 0.5 x^T G x - rhs^T x
    pub fn objective(&self, x: ArrayView1<'_, f64>) -> f64 {
        0.5 * x.dot(&self.gram.dot(&x)) - self.rhs.dot(&x)
    }

    /// max_i |min(x_i, (G x - rhs)_i)|
    pub fn kkt_residual(&self, x: ArrayView1<'_, f64>) -> f64 {
        let grad = self.gram.dot(&x) - &self.rhs;
        x.iter()
            .zip(grad.iter())
            .map(|(&xi, &gi)| xi.min(gi).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct NnlsSolution {
    pub x: Array1<f64>,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Cholesky solve of a symmetric system restricted to `support`, with ridge
/// jitter retries for (numerically) singular systems.
fn solve_on_support(gram: &Array2<f64>, rhs: &Array1<f64>, support: &[usize]) -> Option<Array1<f64>> {
    let m = support.len();
    if m == 0 {
        return Some(Array1::zeros(0));
    }
    let mut sub = Array2::zeros((m, m));
    let mut b = Array1::zeros(m);
    for (i, &si) in support.iter().enumerate() {
        b[i] = rhs[si];
        for (j, &sj) in support.iter().enumerate() {
            sub[[i, j]] = gram[[si, sj]];
        }
    }
    let trace: f64 = (0..m).map(|i| sub[[i, i]]).sum();
    let mut jitter = 0.0;
    for attempt in 0..8 {
        if attempt == 1 {
            jitter = 1e-12 * trace.abs().max(1.0) / m as f64;
        } else if attempt > 1 {
            jitter *= 100.0;
        }
        let mut a = sub.clone();
        for i in 0..m {
            a[[i, i]] += jitter;
        }
        if let Some(x) = cholesky_solve(&a, &b) {
            return Some(x);
        }
    }
    None
}

fn cholesky_solve(a: &Array2<f64>, b: &Array1<f64>) -> Option<Array1<f64>> {
    let m = b.len();
    let mut l = Array2::<f64>::zeros((m, m));
    for i in 0..m {
        for j in 0..=i {
            let mut s = a[[i, j]];
            for p in 0..j {
                s -= l[[i, p]] * l[[j, p]];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l[[i, i]] = s.sqrt();
            } else {
                l[[i, j]] = s / l[[j, j]];
            }
        }
    }
    // forward then backward substitution
    let mut y = Array1::zeros(m);
    for i in 0..m {
        let mut s = b[i];
        for p in 0..i {
            s -= l[[i, p]] * y[p];
        }
        y[i] = s / l[[i, i]];
    }
    let mut x = Array1::zeros(m);
    for i in (0..m).rev() {
        let mut s = y[i];
        for p in (i + 1)..m {
            s -= l[[p, i]] * x[p];
        }
        x[i] = s / l[[i, i]];
    }
    Some(x)
}

fn clamp_nonneg(x: &mut Array1<f64>) {
    for v in x.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Block-principal pivoting NNLS. Exchanges all infeasible variables between
/// the passive and active sets while the infeasibility count decreases; after
/// 3 consecutive non-decreasing counts it backs off to exchanging only the
/// largest-index infeasible variable, which guarantees finite termination.
pub fn nnls_bpp(ne: &NormalEquations, x0: Option<ArrayView1<'_, f64>>) -> Result<NnlsSolution> {
    let m = ne.num_vars();
    let max_pivots = 5 * m + 10;
    let feas_tol = 1e-12;

    // passive[i]: variable i is free; active variables are pinned at zero.
    let mut passive = vec![false; m];
    if let Some(x0) = x0 {
        for i in 0..m {
            passive[i] = x0[i] > 0.0;
        }
    }

    let mut best_infeas = usize::MAX;
    let mut backoff_budget = 3usize;
    let mut iterations = 0usize;

    loop {
        let support: Vec<usize> = (0..m).filter(|&i| passive[i]).collect();
        let xs = solve_on_support(&ne.gram, &ne.rhs, &support).ok_or(
            CnmfError::NnlsNonConvergence { iterations, kkt_residual: f64::INFINITY },
        )?;
        let mut x = Array1::zeros(m);
        for (i, &si) in support.iter().enumerate() {
            x[si] = xs[i];
        }
        let grad = ne.gram.dot(&x) - &ne.rhs;

        let mut infeasible: Vec<usize> = Vec::new();
        for i in 0..m {
            if passive[i] {
                if x[i] < -feas_tol {
                    infeasible.push(i);
                }
            } else if grad[i] < -feas_tol {
                infeasible.push(i);
            }
        }

        if infeasible.is_empty() {
            clamp_nonneg(&mut x);
            let kkt = ne.kkt_residual(x.view());
            return Ok(NnlsSolution { x, kkt_residual: kkt, iterations, converged: true });
        }

        iterations += 1;
        if iterations > max_pivots {
            clamp_nonneg(&mut x);
            let kkt = ne.kkt_residual(x.view());
            return Err(CnmfError::NnlsNonConvergence { iterations, kkt_residual: kkt });
        }

        if infeasible.len() < best_infeas {
            best_infeas = infeasible.len();
            backoff_budget = 3;
            for &i in &infeasible {
                passive[i] = !passive[i];
            }
        } else if backoff_budget > 0 {
            backoff_budget -= 1;
            for &i in &infeasible {
                passive[i] = !passive[i];
            }
        } else {
            let i = *infeasible.last().unwrap();
            passive[i] = !passive[i];
        }
    }
}

/// Largest-eigenvalue estimate for the projected-gradient step size.
fn lambda_max_upper(gram: &Array2<f64>) -> f64 {
    let m = gram.nrows();
    let mut v = Array1::from_elem(m, 1.0 / (m as f64).sqrt());
    let mut lam = 0.0;
    for _ in 0..50 {
        let gv = gram.dot(&v);
        let norm = gv.dot(&gv).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        lam = v.dot(&gv);
        v = gv / norm;
    }
    // safety factor so the estimate is a usable upper bound
    lam.abs() * 1.01 + 1e-300
}

/// Projected gradient with fixed step 1/lambda_max. Fallback path when BPP
/// signals non-convergence.
pub fn nnls_projgrad(
    ne: &NormalEquations,
    x0: Option<ArrayView1<'_, f64>>,
    max_iter: usize,
    tol: f64,
) -> NnlsSolution {
    let m = ne.num_vars();
    let mut x = match x0 {
        Some(x0) => {
            let mut x = x0.to_owned();
            clamp_nonneg(&mut x);
            x
        }
        None => Array1::zeros(m),
    };
    if ne.kkt_residual(x.view()) <= tol {
        let kkt = ne.kkt_residual(x.view());
        return NnlsSolution { x, kkt_residual: kkt, iterations: 0, converged: true };
    }
    let lam = lambda_max_upper(&ne.gram);
    if lam == 0.0 {
        // zero gram: minimizer of -rhs^T x over the orthant is 0 unless rhs
        // has positive entries, in which case the problem is unbounded; the
        // clamped zero vector is the KKT point whenever rhs <= 0.
        let x = Array1::zeros(m);
        let kkt = ne.kkt_residual(x.view());
        return NnlsSolution { x, kkt_residual: kkt, iterations: 0, converged: kkt <= tol };
    }
    let step = 1.0 / lam;
    for it in 1..=max_iter {
        let grad = ne.gram.dot(&x) - &ne.rhs;
        x = &x - &(grad * step);
        clamp_nonneg(&mut x);
        let kkt = ne.kkt_residual(x.view());
        if kkt <= tol {
            return NnlsSolution { x, kkt_residual: kkt, iterations: it, converged: true };
        }
    }
    let kkt = ne.kkt_residual(x.view());
    NnlsSolution { x, kkt_residual: kkt, iterations: max_iter, converged: false }
}

/// Brute-force oracle: enumerates all 2^M active-set patterns and returns the
/// feasible KKT point with least objective. Test oracle only.
pub fn nnls_oracle_enumerate(ne: &NormalEquations) -> Result<NnlsSolution> {
    let m = ne.num_vars();
    if m > ORACLE_MAX_VARS {
        return Err(CnmfError::InvalidParam(format!(
            "oracle enumeration limited to {ORACLE_MAX_VARS} variables, got {m}"
        )));
    }
    let tol = 1e-9;
    let mut best: Option<(f64, Array1<f64>)> = None;
    for mask in 0..(1u32 << m) {
        let support: Vec<usize> = (0..m).filter(|&i| mask & (1 << i) != 0).collect();
        let Some(xs) = solve_on_support(&ne.gram, &ne.rhs, &support) else {
            continue;
        };
        let mut x = Array1::zeros(m);
        let mut feasible = true;
        for (i, &si) in support.iter().enumerate() {
            if xs[i] < -tol {
                feasible = false;
                break;
            }
            x[si] = xs[i].max(0.0);
        }
        if !feasible {
            continue;
        }
        let grad = ne.gram.dot(&x) - &ne.rhs;
        if (0..m).any(|i| !support.contains(&i) && grad[i] < -tol) {
            continue;
        }
        let obj = ne.objective(x.view());
        if best.as_ref().is_none_or(|(b, _)| obj < *b) {
            best = Some((obj, x));
        }
    }
    let (_, x) = best.ok_or(CnmfError::NnlsNonConvergence {
        iterations: 1 << m,
        kkt_residual: f64::INFINITY,
    })?;
    let kkt = ne.kkt_residual(x.view());
    Ok(NnlsSolution { x, kkt_residual: kkt, iterations: 1 << m, converged: true })
}
