//! Randomized equivalence suite over the four reconstruction forms and the
//! Kronecker adjoint identity.

use cnmf_core::conv::{unvec_cm, vec_cm};
use cnmf_core::{
    reconstruct, reconstruct_kron_matvec, reconstruct_kron_rmatvec, reconstruct_outer,
    reconstruct_toeplitz, ActivationMatrix, MotifTensor,
};
use ndarray::{Array1, Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CliError, Result};

pub const FORM_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy)]
pub struct CheckReport {
    pub trials: usize,
    pub max_deviation: f64,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.max_deviation <= FORM_TOLERANCE
    }
}

pub fn check_forms(
    n: usize,
    t: usize,
    k: usize,
    l: usize,
    trials: usize,
    seed: u64,
) -> Result<CheckReport> {
    if trials == 0 {
        return Err(CliError::InvalidInput("trials must be >= 1".into()));
    }
    if n * t > cnmf_core::conv::TOEPLITZ_ORACLE_CAP {
        return Err(CliError::InvalidInput(format!(
            "dims too large for the Toeplitz oracle (N*T = {} > {})",
            n * t,
            cnmf_core::conv::TOEPLITZ_ORACLE_CAP
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_dev = 0.0f64;
    for _ in 0..trials {
        let w = MotifTensor::new(Array3::from_shape_fn((l, n, k), |_| rng.random::<f64>()))?;
        let h = ActivationMatrix::new(Array2::from_shape_fn((k, t), |_| rng.random::<f64>()))?;

        let classical = reconstruct(&w, &h);
        let outer = reconstruct_outer(&w, &h);
        let kron =
            unvec_cm(reconstruct_kron_matvec(&w, vec_cm(h.values().view()).view()).view(), n, t);
        let toeplitz = reconstruct_toeplitz(&w, &h, cnmf_core::conv::TOEPLITZ_ORACLE_CAP)?;

        for other in [&outer, &kron, &toeplitz] {
            let dev = classical
                .iter()
                .zip(other.iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            max_dev = max_dev.max(dev);
        }

        // adjoint identity <Vz, y> = <z, V^T y>
        let z = Array1::from_shape_fn(k * t, |_| rng.random::<f64>());
        let y = Array1::from_shape_fn(n * t, |_| rng.random::<f64>());
        let lhs = reconstruct_kron_matvec(&w, z.view()).dot(&y);
        let rhs = z.dot(&reconstruct_kron_rmatvec(&w, y.view()));
        max_dev = max_dev.max((lhs - rhs).abs() / lhs.abs().max(1.0));

        // L=1 trial includes the plain NMF product check
        if l == 1 {
            let nmf = w.lag_slice(0).dot(h.values());
            let dev = classical
                .iter()
                .zip(nmf.iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            max_dev = max_dev.max(dev);
        }
    }
    Ok(CheckReport { trials, max_deviation: max_dev })
}
