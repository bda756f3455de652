//! Shift operators, the convolution operator, the four equivalent CNMF
//! reconstruction forms, and residual maintenance.
//!
//! The shift matrix `S_l` (ones on the l-th upper diagonal) is never
//! materialized; right-multiplication by `S_l` is plain index arithmetic.
//! vec(.) is column-major throughout.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{CnmfError, Result};
use crate::types::{frob_norm, ActivationMatrix, DataMatrix, MotifTensor};

/// Default cap on N*T for the Toeplitz oracle.
pub const TOEPLITZ_ORACLE_CAP: usize = 10_000;

/// `A * S_l`: columns shifted right by `l`, left-filled with zeros.
/// `l >= T` yields the zero matrix.
pub fn shift_columns(a: ArrayView2<'_, f64>, l: usize) -> Array2<f64> {
    let (p, t) = a.dim();
    let mut out = Array2::zeros((p, t));
    if l < t {
        out.slice_mut(s![.., l..]).assign(&a.slice(s![.., ..t - l]));
    }
    out
}

/// `A * S_{-l}`: columns shifted left by `l`, right-filled with zeros.
pub fn shift_columns_left(a: ArrayView2<'_, f64>, l: usize) -> Array2<f64> {
    let (p, t) = a.dim();
    let mut out = Array2::zeros((p, t));
    if l < t {
        out.slice_mut(s![.., ..t - l]).assign(&a.slice(s![.., l..]));
    }
    out
}

/// Convolution of one motif with one activation row:
/// `W_::k^T * h_k^T = sum_tau H_{k,tau} [W_::k^T]_tau`, with the motif
/// clipped at the right boundary.
///
/// `motif` is `L x N` (lag by feature); the result is `N x T`.
pub fn conv_motif(motif: ArrayView2<'_, f64>, h: ArrayView1<'_, f64>) -> Array2<f64> {
    let (l, n) = motif.dim();
    let t = h.len();
    let mut out = Array2::zeros((n, t));
    for tau in 0..t {
        let amp = h[tau];
        if amp == 0.0 {
            continue;
        }
        let width = l.min(t - tau);
        for lag in 0..width {
            for feat in 0..n {
                out[[feat, tau + lag]] += amp * motif[[lag, feat]];
            }
        }
    }
    out
}

/// Classical-form reconstruction `sum_l W_l H S_{l-1}`.
pub fn reconstruct(w: &MotifTensor, h: &ActivationMatrix) -> Array2<f64> {
    let n = w.num_features();
    let t = h.num_timebins();
    let mut out = Array2::zeros((n, t));
    for l in 0..w.num_lags() {
        let shifted = shift_columns(h.values().view(), l);
        out += &w.lag_slice(l).dot(&shifted);
    }
    out
}

/// Outer-product-form reconstruction `sum_k W_::k^T * h_k^T`.
/// Kept independent of [`reconstruct`] so the two forms cross-check.
pub fn reconstruct_outer(w: &MotifTensor, h: &ActivationMatrix) -> Array2<f64> {
    let n = w.num_features();
    let t = h.num_timebins();
    let mut out = Array2::zeros((n, t));
    for k in 0..w.num_components() {
        out += &conv_motif(w.motif_slice(k), h.values().row(k));
    }
    out
}

/// Column-major vectorization.
pub fn vec_cm(a: ArrayView2<'_, f64>) -> Array1<f64> {
    let (rows, cols) = a.dim();
    let mut out = Array1::zeros(rows * cols);
    for c in 0..cols {
        for r in 0..rows {
            out[c * rows + r] = a[[r, c]];
        }
    }
    out
}

/// Inverse of [`vec_cm`].
pub fn unvec_cm(v: ArrayView1<'_, f64>, rows: usize, cols: usize) -> Array2<f64> {
    assert_eq!(v.len(), rows * cols);
    let mut out = Array2::zeros((rows, cols));
    for c in 0..cols {
        for r in 0..rows {
            out[[r, c]] = v[c * rows + r];
        }
    }
    out
}

/// Matrix-free product `V z` where `V = sum_l (S_{l-1}^T (x) W_l)`.
/// With `z = vec(H)` this is `vec(reconstruct(W, H))`.
pub fn reconstruct_kron_matvec(w: &MotifTensor, z: ArrayView1<'_, f64>) -> Array1<f64> {
    let k = w.num_components();
    assert_eq!(z.len() % k, 0, "z length must be K*T");
    let t = z.len() / k;
    let h = unvec_cm(z, k, t);
    let n = w.num_features();
    let mut out = Array2::zeros((n, t));
    for l in 0..w.num_lags() {
        let shifted = shift_columns(h.view(), l);
        out += &w.lag_slice(l).dot(&shifted);
    }
    vec_cm(out.view())
}

/// Matrix-free adjoint product `V^T y`. With `Y = unvec(y)` this is
/// `vec(sum_l W_l^T Y S_{1-l})`.
pub fn reconstruct_kron_rmatvec(w: &MotifTensor, y: ArrayView1<'_, f64>) -> Array1<f64> {
    let n = w.num_features();
    assert_eq!(y.len() % n, 0, "y length must be N*T");
    let t = y.len() / n;
    let k = w.num_components();
    let ymat = unvec_cm(y, n, t);
    let mut out = Array2::zeros((k, t));
    for l in 0..w.num_lags() {
        let shifted = shift_columns_left(ymat.view(), l);
        out += &w.lag_slice(l).t().dot(&shifted);
    }
    vec_cm(out.view())
}

/// Toeplitz-form reconstruction: applies the block matrix of Toeplitz blocks
/// `T(w_:nk)` to `vec(H^T)` and unstacks `vec(Xhat^T)`. Verification oracle
/// only; rejects instances with `N*T > cap`.
pub fn reconstruct_toeplitz(
    w: &MotifTensor,
    h: &ActivationMatrix,
    cap: usize,
) -> Result<Array2<f64>> {
    let n = w.num_features();
    let t = h.num_timebins();
    let l = w.num_lags();
    if n * t > cap {
        return Err(CnmfError::OracleTooLarge { actual: n * t, cap });
    }
    let mut out = Array2::zeros((n, t));
    for feat in 0..n {
        for k in 0..w.num_components() {
            // T(v): the l-th subdiagonal equals v_{l+1}.
            let mut toep = Array2::zeros((t, t));
            for col in 0..t {
                for lag in 0..l.min(t - col) {
                    toep[[col + lag, col]] = w.values()[[lag, feat, k]];
                }
            }
            let prod = toep.dot(&h.values().row(k));
            for tt in 0..t {
                out[[feat, tt]] += prod[tt];
            }
        }
    }
    Ok(out)
}

/// `||X - reconstruct(W, H)|| / ||X||` with the root sum-of-squares norm.
pub fn normalized_loss(x: &DataMatrix, w: &MotifTensor, h: &ActivationMatrix) -> Result<f64> {
    let x_norm = x.norm();
    if x_norm == 0.0 {
        return Err(CnmfError::ZeroDataNorm);
    }
    let diff = x.values() - &reconstruct(w, h);
    Ok(frob_norm(&diff.view()) / x_norm)
}

/// The residual `E = X - reconstruct(W, H)`; may contain negative entries.
/// Supports O(N*L) patching after a single-entry change in `H`.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    values: Array2<f64>,
}

impl Residual {
    /// Full recompute `X - reconstruct(W, H)`.
    pub fn full(x: &DataMatrix, w: &MotifTensor, h: &ActivationMatrix) -> Self {
        Self { values: x.values() - &reconstruct(w, h) }
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array2<f64> {
        &mut self.values
    }

    /// Incremental update after `H_kt` changes from `old` to `new`: adds
    /// `(old - new) * [W_::k^T]_t` to columns `t..min(t+L, T)`.
    pub fn patch(&mut self, motif: ArrayView2<'_, f64>, t: usize, old: f64, new: f64) {
        let delta = old - new;
        if delta == 0.0 {
            return;
        }
        let (l, n) = motif.dim();
        let cols = self.values.ncols();
        let width = l.min(cols - t);
        for lag in 0..width {
            for feat in 0..n {
                self.values[[feat, t + lag]] += delta * motif[[lag, feat]];
            }
        }
    }

    pub fn norm(&self) -> f64 {
        frob_norm(&self.values.view())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{arr1, arr2, Array3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_wh(
        l: usize,
        n: usize,
        k: usize,
        t: usize,
        seed: u64,
    ) -> (MotifTensor, ActivationMatrix) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = Array3::from_shape_fn((l, n, k), |_| rng.random::<f64>());
        let h = Array2::from_shape_fn((k, t), |_| rng.random::<f64>());
        (MotifTensor::new(w).unwrap(), ActivationMatrix::new(h).unwrap())
    }

    #[test]
    fn shift_right_matches_display() {
        let a = arr2(&[[1.0, 2.0, 3.0, 4.0], [5.0, 6.0, 7.0, 8.0]]);
        assert_eq!(
            shift_columns(a.view(), 1),
            arr2(&[[0.0, 1.0, 2.0, 3.0], [0.0, 5.0, 6.0, 7.0]])
        );
        assert_eq!(
            shift_columns(a.view(), 2),
            arr2(&[[0.0, 0.0, 1.0, 2.0], [0.0, 0.0, 5.0, 6.0]])
        );
        assert_eq!(shift_columns(a.view(), 0), a);
        assert_eq!(shift_columns(a.view(), 4), Array2::zeros((2, 4)));
        assert_eq!(shift_columns(a.view(), 9), Array2::zeros((2, 4)));
    }

    #[test]
    fn shift_left_basics() {
        let a = arr2(&[[0.0, 1.0, 2.0, 3.0]]);
        assert_eq!(shift_columns_left(a.view(), 1), arr2(&[[1.0, 2.0, 3.0, 0.0]]));
        let b = arr2(&[[1.0, 2.0, 3.0, 4.0]]);
        assert_eq!(shift_columns_left(b.view(), 0), b);
    }

    #[test]
    fn shift_adjointness() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = Array2::from_shape_fn((3, 5), |_| rng.random::<f64>());
        let b = Array2::from_shape_fn((3, 5), |_| rng.random::<f64>());
        for l in 0..=5 {
            let lhs: f64 = (&shift_columns(a.view(), l) * &b).sum();
            let rhs: f64 = (&a * &shift_columns_left(b.view(), l)).sum();
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12);
        }
    }

    #[test]
    fn conv_motif_outer_product_at_l1() {
        let motif = arr2(&[[2.0, 3.0]]); // L=1, N=2
        let h = arr1(&[1.0, 0.0, 4.0]);
        let out = conv_motif(motif.view(), h.view());
        assert_eq!(out, arr2(&[[2.0, 0.0, 8.0], [3.0, 0.0, 12.0]]));
    }

    #[test]
    fn conv_motif_truncates_at_right_edge() {
        // N=1, L=2, motif=[1,2], h=[1,0,1]: classical form gives [[1,2,1]]
        let motif = arr2(&[[1.0], [2.0]]);
        let h = arr1(&[1.0, 0.0, 1.0]);
        assert_eq!(conv_motif(motif.view(), h.view()), arr2(&[[1.0, 2.0, 1.0]]));
    }

    #[test]
    fn conv_motif_zero_activation() {
        let motif = arr2(&[[1.0, 2.0], [3.0, 4.0]]);
        let h = arr1(&[0.0, 0.0, 0.0, 0.0]);
        assert_eq!(conv_motif(motif.view(), h.view()), Array2::zeros((2, 4)));
    }

    #[test]
    fn classical_equals_outer() {
        let (w, h) = random_wh(3, 4, 2, 10, 1);
        let a = reconstruct(&w, &h);
        let b = reconstruct_outer(&w, &h);
        for (x, y) in a.iter().zip(b.iter()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn reconstruct_linearity() {
        let (w, h1) = random_wh(3, 4, 2, 10, 2);
        let (_, h2) = random_wh(3, 4, 2, 10, 3);
        let sum = ActivationMatrix::new(h1.values() + h2.values()).unwrap();
        let lhs = reconstruct(&w, &sum);
        let rhs = reconstruct(&w, &h1) + reconstruct(&w, &h2);
        for (x, y) in lhs.iter().zip(rhs.iter()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn l1_reduction_is_plain_product() {
        let (w, h) = random_wh(1, 3, 2, 6, 4);
        let lhs = reconstruct(&w, &h);
        let rhs = w.lag_slice(0).dot(h.values());
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn kron_matvec_matches_reconstruct() {
        let (w, h) = random_wh(2, 2, 2, 5, 5);
        let z = vec_cm(h.values().view());
        let lhs = reconstruct_kron_matvec(&w, z.view());
        let rhs = vec_cm(reconstruct(&w, &h).view());
        for (x, y) in lhs.iter().zip(rhs.iter()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn kron_matvec_zero() {
        let (w, _) = random_wh(2, 2, 2, 5, 6);
        let z = Array1::zeros(10);
        assert_eq!(reconstruct_kron_matvec(&w, z.view()), Array1::zeros(10));
        let y = Array1::zeros(10);
        assert_eq!(reconstruct_kron_rmatvec(&w, y.view()), Array1::zeros(10));
    }

    #[test]
    fn kron_adjoint_identity_against_explicit_v() {
        // Assemble V = sum_l (S_{l-1}^T (x) W_l) explicitly at L=2,N=2,K=2,T=5.
        let (w, _) = random_wh(2, 2, 2, 5, 8);
        let (n, k, t) = (2, 2, 5);
        let mut v = Array2::zeros((n * t, k * t));
        for l in 0..2usize {
            // S_{l-1} has ones at (i, i+l); S^T at (i+l, i).
            let wl = w.lag_slice(l);
            for i in 0..t - l {
                // Kronecker block (row block i+l of S^T row index... ):
                // (S_l^T (x) W_l)[(a*n + r), (b*k + c)] = S_l^T[a,b] * W_l[r,c]
                // S_l^T[a,b] = 1 iff a = b + l.
                let (a, b) = (i + l, i);
                for r in 0..n {
                    for c in 0..k {
                        v[[a * n + r, b * k + c]] += wl[[r, c]];
                    }
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let z = Array1::from_shape_fn(k * t, |_| rng.random::<f64>());
        let y = Array1::from_shape_fn(n * t, |_| rng.random::<f64>());
        // matvec against explicit V
        let vz = v.dot(&z);
        let vz2 = reconstruct_kron_matvec(&w, z.view());
        for (x, yv) in vz.iter().zip(vz2.iter()) {
            assert_abs_diff_eq!(x, yv, epsilon = 1e-12);
        }
        // adjoint identity <Vz, y> = <z, V^T y>
        let vty = reconstruct_kron_rmatvec(&w, y.view());
        let lhs = vz2.dot(&y);
        let rhs = z.dot(&vty);
        assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-10);
        let vty_explicit = v.t().dot(&y);
        for (x, yv) in vty_explicit.iter().zip(vty.iter()) {
            assert_abs_diff_eq!(x, yv, epsilon = 1e-12);
        }
    }

    #[test]
    fn toeplitz_matches_classical() {
        let (w, h) = random_wh(3, 2, 2, 8, 10);
        let a = reconstruct(&w, &h);
        let b = reconstruct_toeplitz(&w, &h, TOEPLITZ_ORACLE_CAP).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn toeplitz_l1_is_nmf_product() {
        let (w, h) = random_wh(1, 2, 2, 6, 11);
        let b = reconstruct_toeplitz(&w, &h, TOEPLITZ_ORACLE_CAP).unwrap();
        let rhs = w.lag_slice(0).dot(h.values());
        for (x, y) in b.iter().zip(rhs.iter()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn toeplitz_zero_h_and_size_cap() {
        let (w, _) = random_wh(2, 2, 2, 6, 12);
        let h = ActivationMatrix::new(Array2::zeros((2, 6))).unwrap();
        assert_eq!(
            reconstruct_toeplitz(&w, &h, TOEPLITZ_ORACLE_CAP).unwrap(),
            Array2::zeros((2, 6))
        );
        assert!(matches!(
            reconstruct_toeplitz(&w, &h, 5),
            Err(CnmfError::OracleTooLarge { .. })
        ));
    }

    #[test]
    fn normalized_loss_cases() {
        let x = DataMatrix::new(arr2(&[[3.0, 4.0]])).unwrap();
        let w = MotifTensor::new(Array3::zeros((1, 1, 1))).unwrap();
        let h = ActivationMatrix::new(Array2::zeros((1, 2))).unwrap();
        // W = 0 -> loss 1
        assert_abs_diff_eq!(normalized_loss(&x, &w, &h).unwrap(), 1.0, epsilon = 1e-15);
        // Xhat = [[3,0]] -> 4/5
        let w = MotifTensor::new(Array3::from_elem((1, 1, 1), 3.0)).unwrap();
        let h = ActivationMatrix::new(arr2(&[[1.0, 0.0]])).unwrap();
        assert_abs_diff_eq!(normalized_loss(&x, &w, &h).unwrap(), 0.8, epsilon = 1e-15);
        // exact reconstruction -> 0
        let h = ActivationMatrix::new(arr2(&[[1.0, 4.0 / 3.0]])).unwrap();
        assert_abs_diff_eq!(normalized_loss(&x, &w, &h).unwrap(), 0.0, epsilon = 1e-15);
        // zero data rejected
        let xz = DataMatrix::new(arr2(&[[0.0, 0.0]])).unwrap();
        assert!(matches!(normalized_loss(&xz, &w, &h), Err(CnmfError::ZeroDataNorm)));
    }

    #[test]
    fn residual_full_and_patch() {
        let (w, mut h) = random_wh(3, 4, 2, 10, 13);
        let x = DataMatrix::new(reconstruct(&w, &h) + 0.5).unwrap();
        let mut r = Residual::full(&x, &w, &h);

        // old == new leaves R unchanged
        let before = r.clone();
        r.patch(w.motif_slice(0), 2, 0.7, 0.7);
        assert_eq!(r, before);

        // patch equals full recompute after an H edit
        let old = h.values()[[1, 4]];
        let new = old + 1.3;
        h.values_mut()[[1, 4]] = new;
        r.patch(w.motif_slice(1), 4, old, new);
        let full = Residual::full(&x, &w, &h);
        for (a, b) in r.values().iter().zip(full.values().iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }

        // boundary clipping: t = T-1 with L = 3 only touches the last column
        let mut r2 = full.clone();
        let old = h.values()[[0, 9]];
        r2.patch(w.motif_slice(0), 9, old, old + 1.0);
        for col in 0..9 {
            for row in 0..4 {
                assert_eq!(r2.values()[[row, col]], full.values()[[row, col]]);
            }
        }
        for row in 0..4 {
            assert!(r2.values()[[row, 9]] != full.values()[[row, 9]]);
        }
    }

    #[test]
    fn patch_sequence_tracks_full_recompute() {
        let (w, mut h) = random_wh(4, 3, 2, 12, 14);
        let x = DataMatrix::new(reconstruct(&w, &h) + 0.1).unwrap();
        let mut r = Residual::full(&x, &w, &h);
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..200 {
            let k = rng.random_range(0..2);
            let t = rng.random_range(0..12);
            let old = h.values()[[k, t]];
            let new = rng.random::<f64>();
            h.values_mut()[[k, t]] = new;
            r.patch(w.motif_slice(k), t, old, new);
        }
        let full = Residual::full(&x, &w, &h);
        let scale = full.norm().max(1.0);
        for (a, b) in r.values().iter().zip(full.values().iter()) {
            assert!((a - b).abs() / scale < 1e-9);
        }
    }
}
