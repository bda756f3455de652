//! Solver-level properties: monotonicity, the L=1 reduction to NMF-HALS,
//! KKT stationarity and gradient consistency at convergence, and the fit
//! driver contract.

use cnmf_core::conv::vec_cm;
use cnmf_core::nnls::{nnls_bpp, NormalEquations};
use cnmf_core::solvers::{anls_update_h, hals_update_h, hals_update_w};
use cnmf_core::*;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_data(n: usize, t: usize, seed: u64) -> DataMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DataMatrix::new(Array2::from_shape_fn((n, t), |_| rng.random::<f64>())).unwrap()
}

fn cfg(algorithm: Algorithm, max_iters: usize, seed: u64) -> SolverConfig {
    SolverConfig { algorithm, max_iters, seed, ..Default::default() }
}

#[test]
fn loss_non_increasing_for_all_algorithms() {
    let x = random_data(10, 60, 300);
    for algorithm in [Algorithm::Mu, Algorithm::Hals, Algorithm::Anls] {
        for seed in 0..3u64 {
            let result = fit(&x, 3, 4, &cfg(algorithm, 40, seed)).unwrap();
            let records = &result.trace.records;
            for pair in records.windows(2) {
                assert!(
                    pair[1].loss <= pair[0].loss + 1e-10,
                    "{} seed {seed}: iter {} loss {} -> iter {} loss {}",
                    algorithm.name(),
                    pair[0].iteration,
                    pair[0].loss,
                    pair[1].iteration,
                    pair[1].loss
                );
            }
        }
    }
}

/// Independent NMF-HALS reference: sequential column updates
/// `w_k <- max(0, E h_k / ||h_k||^2)` and the symmetric row rule for H.
fn nmf_hals_iteration(x: &Array2<f64>, w: &mut Array2<f64>, h: &mut Array2<f64>) {
    let k_max = w.ncols();
    for k in 0..k_max {
        let hk = h.row(k).to_owned();
        let norm2 = hk.dot(&hk);
        if norm2 == 0.0 {
            continue;
        }
        let mut e = x.clone();
        for j in 0..k_max {
            if j != k {
                let wj = w.column(j).to_owned();
                let hj = h.row(j).to_owned();
                for (r, &wv) in wj.iter().enumerate() {
                    for (c, &hv) in hj.iter().enumerate() {
                        e[[r, c]] -= wv * hv;
                    }
                }
            }
        }
        let new = e.dot(&hk).mapv(|v| (v / norm2).max(0.0));
        w.column_mut(k).assign(&new);
    }
    for k in 0..k_max {
        let wk = w.column(k).to_owned();
        let norm2 = wk.dot(&wk);
        if norm2 == 0.0 {
            continue;
        }
        let mut e = x.clone();
        for j in 0..k_max {
            if j != k {
                let wj = w.column(j).to_owned();
                let hj = h.row(j).to_owned();
                for (r, &wv) in wj.iter().enumerate() {
                    for (c, &hv) in hj.iter().enumerate() {
                        e[[r, c]] -= wv * hv;
                    }
                }
            }
        }
        let new = wk.dot(&e).mapv(|v| (v / norm2).max(0.0));
        h.row_mut(k).assign(&new);
    }
}

#[test]
fn l1_hals_iteration_matches_nmf_hals_reference() {
    for trial in 0..20u64 {
        let x = random_data(5, 12, 400 + trial);
        let model0 = init_random(5, 12, 3, 1, 500 + trial, &x).unwrap();

        let mut model = model0.clone();
        let c = cfg(Algorithm::Hals, 1, 0);
        let mut r = Residual::full(&x, &model.motifs, &model.activations);
        hals_update_w(&mut model, &mut r, &c);
        hals_update_h(&mut model, &mut r, &c);

        let mut w_ref = model0.motifs.lag_slice(0).to_owned();
        let mut h_ref = model0.activations.values().clone();
        nmf_hals_iteration(x.values(), &mut w_ref, &mut h_ref);

        for (a, b) in model.motifs.lag_slice(0).iter().zip(w_ref.iter()) {
            assert!((a - b).abs() <= 1e-12, "trial {trial}: W {a} vs {b}");
        }
        for (a, b) in model.activations.values().iter().zip(h_ref.iter()) {
            assert!((a - b).abs() <= 1e-12, "trial {trial}: H {a} vs {b}");
        }
    }
}

/// Squared-loss gradient with respect to H via the Kronecker-form adjoint.
fn grad_h(x: &DataMatrix, model: &CnmfModel) -> Array2<f64> {
    let (_, t, k, _) = model.dims();
    let diff = reconstruct(&model.motifs, &model.activations) - x.values();
    let g = reconstruct_kron_rmatvec(&model.motifs, vec_cm(diff.view()).view());
    cnmf_core::conv::unvec_cm(g.view(), k, t).mapv(|v| 2.0 * v)
}

/// Squared-loss gradient with respect to W: `grad W_l = 2 (Xhat - X)(H S_{l-1})^T`.
fn grad_w(x: &DataMatrix, model: &CnmfModel) -> Vec<Array2<f64>> {
    let diff = reconstruct(&model.motifs, &model.activations) - x.values();
    (0..model.motifs.num_lags())
        .map(|l| {
            let hs = shift_columns(model.activations.values().view(), l);
            diff.dot(&hs.t()).mapv(|v| 2.0 * v)
        })
        .collect()
}

fn squared_loss(x: &DataMatrix, model: &CnmfModel) -> f64 {
    let diff = reconstruct(&model.motifs, &model.activations) - x.values();
    diff.iter().map(|v| v * v).sum()
}

#[test]
fn adjoint_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(600);
    for trial in 0..5u64 {
        let x = random_data(4, 15, 610 + trial);
        let model = init_random(4, 15, 2, 3, 620 + trial, &x).unwrap();
        let g = grad_h(&x, &model);
        let step = 1e-6;
        for _ in 0..20 {
            let k = rng.random_range(0..2);
            let t = rng.random_range(0..15);
            let mut plus = model.clone();
            plus.activations.values_mut()[[k, t]] += step;
            let mut minus = model.clone();
            minus.activations.values_mut()[[k, t]] -= step;
            let fd = (squared_loss(&x, &plus) - squared_loss(&x, &minus)) / (2.0 * step);
            let scale = g[[k, t]].abs().max(1.0);
            assert!(
                (fd - g[[k, t]]).abs() / scale <= 1e-4,
                "trial {trial} ({k},{t}): adjoint {} vs fd {fd}",
                g[[k, t]]
            );
        }
    }
}

#[test]
fn kkt_stationarity_at_convergence() {
    let x = random_data(5, 25, 700);
    for algorithm in [Algorithm::Hals, Algorithm::Anls] {
        let c = SolverConfig {
            algorithm,
            max_iters: 20_000,
            rel_tol: 1e-14,
            seed: 3,
            ..Default::default()
        };
        let result = fit(&x, 2, 3, &c).unwrap();
        let model = &result.model;

        let gh = grad_h(&x, model);
        let mut worst_h = 0.0f64;
        for (h, g) in model.activations.values().iter().zip(gh.iter()) {
            worst_h = worst_h.max(h.min(*g).abs());
        }
        assert!(worst_h <= 1e-4, "{}: H KKT residual {worst_h}", algorithm.name());

        let gw = grad_w(&x, model);
        let mut worst_w = 0.0f64;
        for (l, gl) in gw.iter().enumerate() {
            for ((i, j), g) in gl.indexed_iter() {
                let w = model.motifs.values()[[l, i, j]];
                worst_w = worst_w.max(w.min(*g).abs());
            }
        }
        assert!(worst_w <= 1e-4, "{}: W KKT residual {worst_w}", algorithm.name());
    }
}

#[test]
fn anls_column_passes_reach_global_h_optimum() {
    // Tiny instance: iterate the column pass until it matches the global
    // solution of the full vectorized NNLS problem, solved through the
    // explicit Kronecker-form design matrix.
    let (n, t, k, l) = (3, 8, 2, 2);
    let x = random_data(n, t, 800);
    let mut model = init_random(n, t, k, l, 801, &x).unwrap();
    for _ in 0..200 {
        anls_update_h(&x, &mut model).unwrap();
    }

    // Explicit V: columns indexed (t, k) column-major over vec(H).
    let mut v = Array2::zeros((n * t, k * t));
    for comp in 0..k {
        for tt in 0..t {
            let mut h = Array2::zeros((k, t));
            h[[comp, tt]] = 1.0;
            let hm = ActivationMatrix::new(h).unwrap();
            let col = vec_cm(reconstruct(&model.motifs, &hm).view());
            for row in 0..n * t {
                v[[row, tt * k + comp]] = col[row];
            }
        }
    }
    let xv = vec_cm(x.values().view());
    let ne = NormalEquations::new(v.t().dot(&v), v.t().dot(&xv)).unwrap();
    let global = nnls_bpp(&ne, None).unwrap();

    let ours = vec_cm(model.activations.values().view());
    let gap = ne.objective(ours.view()) - ne.objective(global.x.view());
    assert!(gap.abs() <= 1e-8, "objective gap to global optimum: {gap}");
}

#[test]
fn fit_driver_contract() {
    let x = random_data(4, 12, 900);

    // max_iters = 0 rejected
    let bad = SolverConfig { max_iters: 0, ..Default::default() };
    assert!(fit(&x, 2, 2, &bad).is_err());

    // max_iters = 1 yields initial record plus one iteration
    let one = SolverConfig { max_iters: 1, ..Default::default() };
    let r = fit(&x, 2, 2, &one).unwrap();
    assert_eq!(r.trace.records.len(), 2);
    assert_eq!(r.trace.records[0].iteration, 0);
    assert_eq!(r.trace.records[1].iteration, 1);
    assert_eq!(r.stop_reason, StopReason::MaxIters);

    // identical seed and cfg: bit-identical losses for MU and HALS
    for algorithm in [Algorithm::Mu, Algorithm::Hals] {
        let c = cfg(algorithm, 10, 4);
        let a = fit(&x, 2, 2, &c).unwrap();
        let b = fit(&x, 2, 2, &c).unwrap();
        let la: Vec<f64> = a.trace.records.iter().map(|r| r.loss).collect();
        let lb: Vec<f64> = b.trace.records.iter().map(|r| r.loss).collect();
        assert_eq!(la, lb, "{} traces differ", algorithm.name());
    }

    // elapsed strictly increasing
    let r = fit(&x, 2, 2, &cfg(Algorithm::Hals, 20, 5)).unwrap();
    for pair in r.trace.records.windows(2) {
        assert!(pair[1].elapsed_s > pair[0].elapsed_s);
    }
}

#[test]
fn init_random_properties() {
    let x = random_data(6, 20, 1000);
    let a = init_random(6, 20, 3, 4, 11, &x).unwrap();
    let b = init_random(6, 20, 3, 4, 11, &x).unwrap();
    assert_eq!(a, b);
    let c = init_random(6, 20, 3, 4, 12, &x).unwrap();
    assert_ne!(a, c);

    let recon = reconstruct(&a.motifs, &a.activations);
    let ratio = recon.iter().map(|v| v * v).sum::<f64>().sqrt() / x.norm();
    assert!((ratio - 1.0).abs() <= 1e-9, "scaling ratio {ratio}");

    assert!(init_random(6, 20, 3, 21, 0, &x).is_err()); // L > T
    assert!(init_random(6, 20, 0, 4, 0, &x).is_err()); // K = 0
    assert!(init_random(5, 20, 3, 4, 0, &x).is_err()); // wrong N
}

#[test]
fn regularization_does_not_grow_h() {
    // Repeated H updates on a frozen W: converged ||H||_1 at l1 weight 0.1
    // must not exceed the unregularized one.
    let x = random_data(5, 30, 1100);
    let norm1 = |l1_h: f64| {
        let mut model = init_random(5, 30, 2, 3, 1101, &x).unwrap();
        let c = SolverConfig { l1_h, ..Default::default() };
        for _ in 0..500 {
            let mut r = Residual::full(&x, &model.motifs, &model.activations);
            hals_update_h(&mut model, &mut r, &c);
        }
        model.activations.values().sum()
    };
    let base = norm1(0.0);
    let reg = norm1(0.1);
    assert!(reg <= base + 1e-12, "||H||_1 grew under l1: {base} -> {reg}");
}
