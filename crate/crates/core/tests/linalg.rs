mod common;

use common::{gaussian_matrix, gaussian_vector, random_spd, rng};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use proptest::prelude::*;
use trp::linalg::{
    block_diag, inverse_spd, kernel_project, l1_quadratic_cd, power_iteration, pseudo_det_log,
    relative_frobenius, soft_threshold, solve_spd, BlockCholesky, RowSpace, StructuredPrecision,
};
use trp::TrpError;

fn random_blocks(seed: u64, dims: &[usize]) -> Vec<DMatrix<f64>> {
    let mut r = rng(seed);
    dims.iter().map(|&d| random_spd(&mut r, d, 0.5)).collect()
}

/// The linear map behind `StructuredFactor::sample`, column by column.
fn sampling_map(sp: &StructuredPrecision) -> DMatrix<f64> {
    let f = sp.factor().unwrap();
    let (r, n) = (sp.rank(), sp.dim());
    let mut m = DMatrix::zeros(n, r + n);
    for j in 0..r + n {
        let mut xi1 = DVector::zeros(r);
        let mut xi2 = DVector::zeros(n);
        if j < r {
            xi1[j] = 1.0;
        } else {
            xi2[j - r] = 1.0;
        }
        m.set_column(j, &f.sample(&xi1, &xi2).unwrap());
    }
    m
}

fn structured(seed: u64, dims: &[usize], r: usize, neg: f64) -> StructuredPrecision {
    let blocks = random_blocks(seed, dims);
    let base = BlockCholesky::new(&blocks).unwrap();
    let mut g = rng(seed + 1000);
    let n = base.dim();
    let c = gaussian_matrix(&mut g, r, n) * (0.5 / (n as f64).sqrt());
    let q = gaussian_matrix(&mut g, r, r).qr().q();
    let d = DVector::from_fn(r, |i, _| if i % 2 == 0 { 1.0 } else { -neg });
    let core = &q * DMatrix::from_diagonal(&d) * q.transpose();
    StructuredPrecision::new(base, c, core).unwrap()
}

#[test]
fn block_cholesky_matches_dense() {
    let blocks = random_blocks(1, &[3, 1, 4]);
    let bc = BlockCholesky::new(&blocks).unwrap();
    assert_eq!(bc.dim(), 8);
    assert_eq!(bc.block_dims(), vec![3, 1, 4]);
    assert!(relative_frobenius(&bc.dense_matrix(), &block_diag(&blocks)) < 1e-13);
    let l = bc.dense_factor();
    assert!(relative_frobenius(&(&l * l.transpose()), &bc.dense_matrix()) < 1e-13);
    let x = gaussian_vector(&mut rng(2), 8);
    assert!((bc.solve_lower(&bc.mul_lower(&x)) - &x).amax() < 1e-12);
    assert!((bc.solve_upper(&bc.mul_upper(&x)) - &x).amax() < 1e-12);
    assert!((&l * bc.solve_lower(&x) - &x).amax() < 1e-12);
}

#[test]
fn block_cholesky_rejects_indefinite_block() {
    let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
    let err = BlockCholesky::new(&[DMatrix::identity(2, 2), bad]).unwrap_err();
    assert!(matches!(err, TrpError::NotPositiveDefinite(_)), "{err}");
}

#[test]
fn from_grams_adds_shift() {
    let grams = random_blocks(3, &[2, 2]);
    let bc = BlockCholesky::from_grams(grams.iter(), 0.7).unwrap();
    let expect = block_diag(&grams) + DMatrix::identity(4, 4) * 0.7;
    assert!(relative_frobenius(&bc.dense_matrix(), &expect) < 1e-13);
}

#[test]
fn structured_sampling_map_has_inverse_covariance() {
    for (seed, neg) in [(10, 0.0), (11, 0.3), (12, 0.6)] {
        let sp = structured(seed, &[4, 3, 5], 4, neg);
        let m = sampling_map(&sp);
        let cov = inverse_spd(&sp.to_dense(), "test").unwrap();
        assert!(
            relative_frobenius(&(&m * m.transpose()), &cov) < 1e-9,
            "seed {seed}"
        );
    }
}

#[test]
fn structured_solve_matches_dense() {
    let sp = structured(20, &[2, 6], 3, 0.4);
    let b = gaussian_vector(&mut rng(21), 8);
    let x = sp.factor().unwrap().solve(&b);
    assert!((sp.to_dense() * x - b).amax() < 1e-10);
}

#[test]
fn structured_rejects_non_pd_update() {
    let base = BlockCholesky::new(&[DMatrix::identity(3, 3)]).unwrap();
    let c = DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]);
    let core = DMatrix::from_element(1, 1, -2.0);
    let sp = StructuredPrecision::new(base, c, core).unwrap();
    assert!(matches!(sp.factor(), Err(TrpError::NotPositiveDefinite(_))));
}

#[test]
fn structured_checks_noise_lengths() {
    let sp = structured(30, &[2, 2], 2, 0.0);
    let f = sp.factor().unwrap();
    let err = f
        .sample(&DVector::zeros(2), &DVector::zeros(3))
        .unwrap_err();
    assert!(matches!(err, TrpError::Dimension(_)));
}

#[test]
fn pseudo_det_hand_value() {
    let b = DMatrix::from_row_slice(1, 2, &[1.0, -0.5]);
    let v = pseudo_det_log(&b, &DVector::from_element(1, 2.0)).unwrap();
    assert!((v - 2.5_f64.ln()).abs() < 1e-14);
}

#[test]
fn pseudo_det_matches_eigen_oracle() {
    let mut g = rng(40);
    let b = gaussian_matrix(&mut g, 3, 9);
    let w = DVector::from_fn(3, |i, _| 0.5 + i as f64);
    let dense = b.transpose() * DMatrix::from_diagonal(&w) * &b;
    let eig = SymmetricEigen::new(dense).eigenvalues;
    let top = eig.amax();
    let oracle: f64 = eig
        .iter()
        .filter(|&&e| e > 1e-10 * top)
        .map(|e| e.ln())
        .sum();
    assert!((pseudo_det_log(&b, &w).unwrap() - oracle).abs() < 1e-9);
    let rs = RowSpace::new(&b).unwrap();
    let unit = rs.pseudo_det_log(&DVector::from_element(3, 1.0)).unwrap();
    assert!((unit - 2.0 * rs.log_singular_product()).abs() < 1e-10);
}

#[test]
fn kernel_projection_is_orthogonal() {
    let mut g = rng(50);
    let b = gaussian_matrix(&mut g, 2, 6);
    let v = gaussian_vector(&mut g, 6);
    let pv = kernel_project(&b, &v).unwrap();
    assert!((&b * &pv).amax() < 1e-12);
    assert!((kernel_project(&b, &pv).unwrap() - &pv).amax() < 1e-12);
    assert!(((&v - &pv).dot(&pv)).abs() < 1e-12);
}

#[test]
fn row_space_rejects_rank_deficiency() {
    let b = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
    assert!(matches!(
        RowSpace::new(&b),
        Err(TrpError::RankDeficient { .. })
    ));
    assert!(matches!(
        RowSpace::new(&b.transpose()),
        Err(TrpError::Dimension(_))
    ));
}

#[test]
fn solve_spd_rejects_rank_deficiency() {
    let a = gaussian_matrix(&mut rng(60), 4, 2);
    let m = &a * a.transpose();
    let rhs = &m * gaussian_matrix(&mut rng(61), 4, 1);
    let err = solve_spd(&m, &rhs, "rank two").unwrap_err();
    assert!(
        matches!(&err, TrpError::Singular(msg) if msg.starts_with("rank two")),
        "{err}"
    );
    let full = m + DMatrix::identity(4, 4) * 1e-3;
    let x = solve_spd(&full, &rhs, "full").unwrap();
    assert!((&full * x - &rhs).amax() < 1e-9);
}

#[test]
fn power_iteration_finds_top_eigenvalue() {
    let m = random_spd(&mut rng(70), 6, 0.1);
    let top = SymmetricEigen::new(m.clone()).eigenvalues.max();
    assert!((power_iteration(&m, 10_000, 1e-13) - top).abs() < 1e-8 * top);
}

#[test]
fn l1_cd_zero_penalty_is_linear_solve() {
    let h = random_spd(&mut rng(80), 5, 0.3);
    let c = gaussian_vector(&mut rng(81), 5);
    let out = l1_quadratic_cd(&h, &c, 0.0, &DVector::zeros(5), 1e-12, 100_000, "t").unwrap();
    assert!((&h * &out.x - &c).amax() < 1e-9);
}

#[test]
fn l1_cd_reports_nonconvergence() {
    let h = random_spd(&mut rng(82), 5, 0.01);
    let c = gaussian_vector(&mut rng(83), 5);
    let err = l1_quadratic_cd(&h, &c, 0.01, &DVector::zeros(5), 1e-300, 2, "tiny").unwrap_err();
    assert!(matches!(
        err,
        TrpError::NonConvergence { iterations: 2, .. }
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn soft_threshold_shrinks(v in -10.0..10.0f64, t in 0.0..5.0f64) {
        let s = soft_threshold(v, t);
        prop_assert!(s.abs() <= v.abs());
        prop_assert!(s == 0.0 || s.signum() == v.signum());
        prop_assert!((v - s).abs() <= t + 1e-15);
        prop_assert_eq!(soft_threshold(v, 0.0), v);
    }

    #[test]
    fn l1_cd_satisfies_kkt(seed in 0u64..1000, lambda in 0.0..2.0f64) {
        let mut g = rng(seed);
        let h = random_spd(&mut g, 4, 0.2);
        let c = gaussian_vector(&mut g, 4) * 2.0;
        let x = l1_quadratic_cd(&h, &c, lambda, &DVector::zeros(4), 1e-12, 100_000, "kkt").unwrap().x;
        let grad = &c - &h * &x;
        for j in 0..4 {
            if x[j] != 0.0 {
                prop_assert!((grad[j] - lambda * x[j].signum()).abs() < 1e-8);
            } else {
                prop_assert!(grad[j].abs() <= lambda + 1e-8);
            }
        }
    }

    #[test]
    fn structured_map_is_exact(seed in 0u64..10_000, r in 1usize..5, neg in 0.0..0.5f64) {
        let sp = structured(seed, &[3, 4], r, neg);
        prop_assume!(sp.factor().is_ok());
        let m = sampling_map(&sp);
        let cov = inverse_spd(&sp.to_dense(), "prop").unwrap();
        prop_assert!(relative_frobenius(&(&m * m.transpose()), &cov) < 1e-8);
    }

    #[test]
    fn pseudo_det_scales_with_omega(seed in 0u64..1000, c in 0.1..10.0f64) {
        let b = gaussian_matrix(&mut rng(seed), 3, 7);
        let w = DVector::from_element(3, 1.0);
        let base = pseudo_det_log(&b, &w).unwrap();
        let scaled = pseudo_det_log(&b, &(w * c)).unwrap();
        prop_assert!((scaled - base - 3.0 * c.ln()).abs() < 1e-9);
    }
}
