use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use mcfw_core::linalg::{
    sample_lowrank_entries, sample_product, top_singular_triplet, PowerOptions, SparseMatrix, SymmetricSmall, ThinSvd,
};
use mcfw_core::par::Execution;

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn random_sparse(rng: &mut ChaCha8Rng, m: usize, n: usize, density: f64) -> SparseMatrix {
    let mut t = Vec::new();
    for i in 0..m {
        for j in 0..n {
            if rng.gen::<f64>() < density {
                t.push((i, j, gauss(rng)));
            }
        }
    }
    t.push((m - 1, n - 1, 1.0));
    t.dedup_by_key(|e| (e.0, e.1));
    SparseMatrix::from_triplets(m, n, t).unwrap()
}

fn orthonormal(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| gauss(rng)).qr().q()
}

fn random_thin(rng: &mut ChaCha8Rng, m: usize, n: usize, r: usize) -> ThinSvd {
    let sigma: Vec<f64> = (0..r).map(|_| rng.gen_range(0.2..2.0)).collect();
    ThinSvd::from_parts(orthonormal(rng, m, r), sigma, orthonormal(rng, n, r)).unwrap()
}

fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

#[test]
fn power_method_matches_dense_svd() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (m, n, d) in [(90, 120, 0.1), (150, 80, 0.05), (40, 30, 0.3), (200, 210, 0.02)] {
        let a = random_sparse(&mut rng, m, n, d);
        let svd = a.to_dense().svd(true, true);
        let k = svd.singular_values.imax();
        let s = svd.singular_values[k];
        let t = top_singular_triplet(&a, &PowerOptions { tol: 1e-10, ..PowerOptions::default() }).unwrap();
        assert!((t.sigma - s).abs() <= 1e-8 * s, "{m}x{n}: {} vs {s}", t.sigma);
        let u = svd.u.as_ref().unwrap().column(k).into_owned();
        assert!((t.u.dot(&u).abs() - 1.0).abs() < 1e-6);
        assert!((t.u.norm() - 1.0).abs() < 1e-12 && (t.v.norm() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn rank_one_update_matches_dense_recompute() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for case in 0..40 {
        let (m, n) = (rng.gen_range(3..40), rng.gen_range(3..40));
        let r = rng.gen_range(1..m.min(n));
        let base = random_thin(&mut rng, m, n, r);
        let c = rng.gen_range(0.0..1.0);
        let a = DVector::from_fn(m, |_, _| gauss(&mut rng));
        let b = DVector::from_fn(n, |_, _| gauss(&mut rng));
        let next = base.scale_plus_rank1(c, &a, &b);
        let dense = base.materialize() * c + &a * b.transpose();
        assert!(rel(&next.materialize(), &dense) <= 1e-9, "case {case}");
        assert!(next.rank() <= r + 1);
        assert!(next.orthonormality_drift() <= 1e-10);
    }
}

#[test]
fn inface_update_matches_dense_recompute() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..40 {
        let (m, n) = (rng.gen_range(4..50), rng.gen_range(4..50));
        let r = rng.gen_range(1..m.min(n).min(8));
        let base = random_thin(&mut rng, m, n, r);
        let mut step = DMatrix::from_fn(r, r, |_, _| 0.1 * gauss(&mut rng));
        step = (&step + step.transpose()) * 0.5;
        let d = DMatrix::from_diagonal(&DVector::from_column_slice(base.sigma()));
        let next = base.inface_update(&SymmetricSmall::from_dense(&step), 0.0).unwrap();
        let dense = base.u() * (&d + &step) * base.v().transpose();
        let min_eig = (&d + &step).symmetric_eigenvalues().min();
        if min_eig > 1e-8 {
            assert!(rel(&next.materialize(), &dense) <= 1e-9, "case {case}");
            assert!(next.rank() <= r);
            assert!(next.orthonormality_drift() <= 1e-10);
        }
    }
}

#[test]
fn sampling_agrees_with_materialization() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let z = random_thin(&mut rng, 30, 45, 4);
    let pattern = random_sparse(&mut rng, 30, 45, 0.2);
    let dense = z.materialize();
    let on_pattern = z.sample_pattern(pattern.pattern());
    for (k, (i, j)) in pattern.pattern().coords().enumerate() {
        assert!((on_pattern[k] - dense[(i, j)]).abs() <= 1e-12 * dense.amax());
    }
    let coords: Vec<_> = pattern.pattern().coords().collect();
    assert_eq!(sample_lowrank_entries(&z, &coords), on_pattern);
    let left = z.u() * DMatrix::from_diagonal(&DVector::from_column_slice(z.sigma()));
    let seq = sample_product(Execution::Sequential, &left, z.v(), pattern.pattern());
    let par = sample_product(Execution::Parallel, &left, z.v(), pattern.pattern());
    assert_eq!(seq, par);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sparse_products_match_dense(seed in 0u64..10_000, m in 1usize..30, n in 1usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_sparse(&mut rng, m, n, 0.3);
        let dense = a.to_dense();
        let x: Vec<f64> = (0..n).map(|_| gauss(&mut rng)).collect();
        let y: Vec<f64> = (0..m).map(|_| gauss(&mut rng)).collect();
        let ax = &dense * DVector::from_column_slice(&x);
        let aty = dense.transpose() * DVector::from_column_slice(&y);
        let seq = a.mul_vec_with(Execution::Sequential, &x);
        prop_assert_eq!(&seq, &a.mul_vec_with(Execution::Parallel, &x));
        for i in 0..m {
            prop_assert!((seq[i] - ax[i]).abs() <= 1e-12 * (1.0 + ax.amax()));
        }
        let t = a.tr_mul_vec_with(Execution::Sequential, &y);
        prop_assert_eq!(&t, &a.tr_mul_vec_with(Execution::Parallel, &y));
        for j in 0..n {
            prop_assert!((t[j] - aty[j]).abs() <= 1e-12 * (1.0 + aty.amax()));
        }
    }

    #[test]
    fn nuclear_norm_is_sum_of_dense_singular_values(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = random_thin(&mut rng, 12, 9, 3);
        let s: f64 = z.materialize().singular_values().iter().sum();
        prop_assert!((z.nuclear_norm() - s).abs() <= 1e-10 * s);
    }
}
