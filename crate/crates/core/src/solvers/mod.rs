//! The three CNMF fitting algorithms behind a common fit driver.

mod anls;
mod hals;
mod mu;

pub use anls::{anls_update_h, anls_update_w};
pub use hals::{hals_update_h, hals_update_w};
pub use mu::mu_step;

use std::time::Instant;

use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::conv::{normalized_loss, reconstruct, Residual};
use crate::error::{CnmfError, Result};
use crate::types::{ActivationMatrix, CnmfModel, DataMatrix, MotifTensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Mu,
    Hals,
    Anls,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Mu => "mu",
            Algorithm::Hals => "hals",
            Algorithm::Anls => "anls",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "mu" => Ok(Algorithm::Mu),
            "hals" => Ok(Algorithm::Hals),
            "anls" => Ok(Algorithm::Anls),
            other => Err(format!("unknown algorithm '{other}' (expected mu, hals, or anls)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    pub max_iters: usize,
    pub time_limit_s: f64,
    /// Stop when the relative loss change over a 5-iteration window falls
    /// below this. Zero disables the criterion.
    pub rel_tol: f64,
    pub l1_w: f64,
    pub l1_h: f64,
    pub l2_w: f64,
    pub l2_h: f64,
    pub seed: u64,
    /// Denominator guard for the multiplicative updates.
    pub eps: f64,
    /// HALS recomputes the full residual every this many outer iterations.
    pub full_residual_refresh_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Hals,
            max_iters: 200,
            time_limit_s: 3600.0,
            rel_tol: 0.0,
            l1_w: 0.0,
            l1_h: 0.0,
            l2_w: 0.0,
            l2_h: 0.0,
            seed: 0,
            eps: 1e-12,
            full_residual_refresh_every: 1,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(CnmfError::InvalidParam("max_iters must be >= 1".into()));
        }
        if !(self.time_limit_s > 0.0) {
            return Err(CnmfError::InvalidParam("time_limit_s must be > 0".into()));
        }
        if self.rel_tol < 0.0 {
            return Err(CnmfError::InvalidParam("rel_tol must be >= 0".into()));
        }
        if !(self.eps > 0.0) {
            return Err(CnmfError::InvalidParam("eps must be > 0".into()));
        }
        if self.full_residual_refresh_every < 1 {
            return Err(CnmfError::InvalidParam(
                "full_residual_refresh_every must be >= 1".into(),
            ));
        }
        for (name, v) in [
            ("l1_w", self.l1_w),
            ("l1_h", self.l1_h),
            ("l2_w", self.l2_w),
            ("l2_h", self.l2_h),
        ] {
            if v < 0.0 {
                return Err(CnmfError::InvalidParam(format!("{name} must be >= 0")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub elapsed_s: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, Default)]
pub struct FitTrace {
    pub records: Vec<TraceRecord>,
}

impl FitTrace {
    pub fn final_loss(&self) -> Option<f64> {
        self.records.last().map(|r| r.loss)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxIters,
    TimeLimit,
    Converged,
}

impl StopReason {
    pub fn name(&self) -> &'static str {
        match self {
            StopReason::MaxIters => "max_iters",
            StopReason::TimeLimit => "time_limit",
            StopReason::Converged => "converged",
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub model: CnmfModel,
    pub trace: FitTrace,
    pub stop_reason: StopReason,
    /// Set when an NNLS sub-solve fell back to projected gradient or failed
    /// to reach tolerance. Never fatal.
    pub nnls_warning: bool,
}

/// Random initialization: W and H i.i.d. uniform on [0, 1), then both scaled
/// by c = (||X|| / ||reconstruct(W, H)||)^(1/2) so the initial reconstruction
/// magnitude matches the data. PRNG is ChaCha8 seeded from `seed`; W is
/// filled before H, both in row-major order.
pub fn init_random(
    n: usize,
    t: usize,
    k: usize,
    l: usize,
    seed: u64,
    x: &DataMatrix,
) -> Result<CnmfModel> {
    if n != x.num_features() || t != x.num_timebins() {
        return Err(CnmfError::ShapeMismatch(format!(
            "requested {n} x {t} but data is {} x {}",
            x.num_features(),
            x.num_timebins()
        )));
    }
    if k < 1 || l < 1 || l > t {
        return Err(CnmfError::InvalidDims(format!("K={k}, L={l}, T={t}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = Array3::from_shape_fn((l, n, k), |_| rng.random::<f64>());
    let h = Array2::from_shape_fn((k, t), |_| rng.random::<f64>());
    let w = MotifTensor::new(w)?;
    let h = ActivationMatrix::new(h)?;
    let recon_norm = crate::types::frob_norm(&reconstruct(&w, &h).view());
    let model = if recon_norm > 0.0 {
        let c = (x.norm() / recon_norm).sqrt();
        let w = MotifTensor::new(w.values() * c)?;
        let h = ActivationMatrix::new(h.values() * c)?;
        CnmfModel::new(w, h)?
    } else {
        CnmfModel::new(w, h)?
    };
    Ok(model)
}

/// Fit from a fresh random initialization.
pub fn fit(x: &DataMatrix, k: usize, l: usize, cfg: &SolverConfig) -> Result<FitResult> {
    cfg.validate()?;
    let model = init_random(x.num_features(), x.num_timebins(), k, l, cfg.seed, x)?;
    fit_with_init(x, model, cfg)
}

/// Fit from a caller-supplied initialization (the bench harness uses this to
/// share one initialization across algorithms).
pub fn fit_with_init(x: &DataMatrix, mut model: CnmfModel, cfg: &SolverConfig) -> Result<FitResult> {
    cfg.validate()?;
    model.check_against(x)?;

    let start = Instant::now();
    let mut loss_eval_time = 0.0f64;
    let mut trace = FitTrace::default();
    let mut nnls_warning = false;

    let record = |trace: &mut FitTrace,
                      loss_eval_time: &mut f64,
                      iteration: usize,
                      model: &CnmfModel|
     -> Result<()> {
        let eval_start = Instant::now();
        let loss = normalized_loss(x, &model.motifs, &model.activations)?;
        *loss_eval_time += eval_start.elapsed().as_secs_f64();
        let mut elapsed_s = start.elapsed().as_secs_f64();
        if let Some(last) = trace.records.last() {
            if elapsed_s <= last.elapsed_s {
                elapsed_s = last.elapsed_s + f64::MIN_POSITIVE;
            }
        }
        trace.records.push(TraceRecord { iteration, elapsed_s, loss });
        Ok(())
    };

    record(&mut trace, &mut loss_eval_time, 0, &model)?;

    let mut residual = match cfg.algorithm {
        Algorithm::Hals => Some(Residual::full(x, &model.motifs, &model.activations)),
        _ => None,
    };

    let mut stop_reason = StopReason::MaxIters;
    for iter in 1..=cfg.max_iters {
        match cfg.algorithm {
            Algorithm::Mu => mu_step(x, &mut model, cfg),
            Algorithm::Hals => {
                let r = residual.as_mut().unwrap();
                if (iter - 1) % cfg.full_residual_refresh_every == 0 {
                    *r = Residual::full(x, &model.motifs, &model.activations);
                }
                hals_update_w(&mut model, r, cfg);
                hals_update_h(&mut model, r, cfg);
            }
            Algorithm::Anls => {
                nnls_warning |= anls_update_w(x, &mut model)?;
                nnls_warning |= anls_update_h(x, &mut model)?;
            }
        }
        debug_assert!(model.motifs.values().iter().all(|&v| v >= 0.0));
        debug_assert!(model.activations.values().iter().all(|&v| v >= 0.0));

        record(&mut trace, &mut loss_eval_time, iter, &model)?;

        if cfg.rel_tol > 0.0 && trace.records.len() > 5 {
            let cur = trace.records.last().unwrap().loss;
            let prev = trace.records[trace.records.len() - 6].loss;
            if (prev - cur).abs() / prev.abs().max(f64::MIN_POSITIVE) < cfg.rel_tol {
                stop_reason = StopReason::Converged;
                break;
            }
        }
        let work_time = start.elapsed().as_secs_f64() - loss_eval_time;
        if work_time >= cfg.time_limit_s {
            stop_reason = StopReason::TimeLimit;
            break;
        }
    }

    Ok(FitResult { model, trace, stop_reason, nnls_warning })
}
