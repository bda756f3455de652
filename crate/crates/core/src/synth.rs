//! Synthetic CNMF dataset generator: Gaussian-bump motifs with Dirichlet
//! amplitudes, sparse exponential activations, and truncated Gaussian noise.

use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma, Normal};

use crate::conv::reconstruct;
use crate::error::{CnmfError, Result};
use crate::types::{ActivationMatrix, DataMatrix, MotifTensor};

#[derive(Debug, Clone)]
pub struct SynthParams {
    pub n: usize,
    pub t: usize,
    pub k: usize,
    pub l: usize,
    /// Gaussian bump width.
    pub sigma: f64,
    pub dirichlet_alpha: f64,
    /// Probability that an activation entry is zero.
    pub zero_prob: f64,
    /// Rate of the exponential amplitude distribution.
    pub exp_rate: f64,
    /// Standard deviation of the truncated Gaussian noise; zero for
    /// noiseless data.
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            n: 250,
            t: 500,
            k: 5,
            l: 20,
            sigma: 0.2,
            dirichlet_alpha: 0.1,
            zero_prob: 0.1,
            exp_rate: 1.0,
            noise_std: 1.0,
            seed: 0,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        if self.n < 1 || self.t < 1 || self.k < 1 || self.l < 1 || self.l > self.t {
            return Err(CnmfError::InvalidDims(format!(
                "N={}, T={}, K={}, L={}",
                self.n, self.t, self.k, self.l
            )));
        }
        if !(self.sigma > 0.0) {
            return Err(CnmfError::InvalidParam("sigma must be > 0".into()));
        }
        if !(self.dirichlet_alpha > 0.0) {
            return Err(CnmfError::InvalidParam("dirichlet_alpha must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.zero_prob) {
            return Err(CnmfError::InvalidParam("zero_prob must be in [0, 1]".into()));
        }
        if !(self.exp_rate > 0.0) {
            return Err(CnmfError::InvalidParam("exp_rate must be > 0".into()));
        }
        if self.noise_std < 0.0 || !self.noise_std.is_finite() {
            return Err(CnmfError::InvalidParam("noise_std must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub x: DataMatrix,
    pub w_true: MotifTensor,
    pub h_true: ActivationMatrix,
    pub x_clean: DataMatrix,
}

fn gaussian_pdf(x: f64, mu: f64, sigma: f64) -> f64 {
    let z = (x - mu) / sigma;
    (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

/// Independent PRNG substreams (ChaCha streams under one master seed) for
/// bump centers, Dirichlet amplitudes, the activation mask, activation
/// values, and noise, so datasets stay reproducible when only the noise
/// level changes.
fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn synth_generate(p: &SynthParams) -> Result<SynthDataset> {
    p.validate()?;
    let (n, t, k, l) = (p.n, p.t, p.k, p.l);

    // Bump centers mu_nk ~ Uniform(-1, 1)
    let mut mu_rng = substream(p.seed, 1);
    let mu = Array2::from_shape_fn((n, k), |_| mu_rng.random_range(-1.0..1.0));

    // Amplitudes: per-feature symmetric Dirichlet via normalized Gamma draws
    let mut alpha_rng = substream(p.seed, 2);
    let gamma = Gamma::new(p.dirichlet_alpha, 1.0)
        .map_err(|e| CnmfError::InvalidParam(format!("dirichlet_alpha: {e}")))?;
    let mut alpha = Array2::zeros((n, k));
    for feat in 0..n {
        let mut total = 0.0;
        for comp in 0..k {
            let g: f64 = gamma.sample(&mut alpha_rng);
            alpha[[feat, comp]] = g;
            total += g;
        }
        if total == 0.0 {
            // all-zero Gamma draws (possible underflow at tiny alpha)
            alpha[[feat, 0]] = 1.0;
            total = 1.0;
        }
        for comp in 0..k {
            alpha[[feat, comp]] /= total;
        }
    }

    // W_{lnk} = alpha_nk * f(2(l+1)/L - 1; mu_nk, sigma), lag grid over l=1..L
    let w = Array3::from_shape_fn((l, n, k), |(lag, feat, comp)| {
        let grid = 2.0 * (lag + 1) as f64 / l as f64 - 1.0;
        alpha[[feat, comp]] * gaussian_pdf(grid, mu[[feat, comp]], p.sigma)
    });
    let w_true = MotifTensor::new(w)?;

    // H: zero with probability zero_prob, otherwise Exponential(exp_rate)
    let mut mask_rng = substream(p.seed, 3);
    let mut value_rng = substream(p.seed, 4);
    let exp = Exp::new(p.exp_rate)
        .map_err(|e| CnmfError::InvalidParam(format!("exp_rate: {e}")))?;
    let h = Array2::from_shape_fn((k, t), |_| {
        let zero = mask_rng.random::<f64>() < p.zero_prob;
        let value: f64 = exp.sample(&mut value_rng);
        if zero {
            0.0
        } else {
            value
        }
    });
    let h_true = ActivationMatrix::new(h)?;

    let clean = reconstruct(&w_true, &h_true);
    let x_clean = DataMatrix::new(clean.clone())?;

    let x = if p.noise_std > 0.0 {
        let mut noise_rng = substream(p.seed, 5);
        let normal = Normal::new(0.0, p.noise_std)
            .map_err(|e| CnmfError::InvalidParam(format!("noise_std: {e}")))?;
        DataMatrix::new(clean.mapv(|v| (v + normal.sample(&mut noise_rng)).max(0.0)))?
    } else {
        x_clean.clone()
    };

    Ok(SynthDataset { x, w_true, h_true, x_clean })
}
