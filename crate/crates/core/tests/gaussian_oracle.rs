mod common;

use common::*;
use halludetect_core::gaussian::{fit_gaussian_matrix, MahalanobisConfig, ResidualMode};
use halludetect_core::nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

fn to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
}

fn exact(k: usize) -> MahalanobisConfig {
    // floor collapses to the 1e-12 absolute minimum
    MahalanobisConfig {
        k,
        epsilon_rel: 1e-300,
        residual_mode: ResidualMode::Ignore,
    }
}

#[test]
fn full_rank_distance_matches_dense_inverse() {
    let mut r = rng(2024);
    for _ in 0..20 {
        let rows = random_rows(&mut r, 50, 16);
        let g = fit_gaussian_matrix(to_matrix(&rows), &exact(16)).unwrap();
        assert_eq!(g.epsilon(), 1e-12);
        let z: Vec<f64> = (0..16).map(|_| r.random_range(-2.0..2.0)).collect();
        let got = g.mahalanobis(&z).unwrap();
        let want = dense_mahalanobis(&rows, &z);
        assert!(((got - want) / want).abs() < 1e-6, "{got} vs {want}");
    }
}

#[test]
fn covariance_reconstruction_matches_dense_product() {
    let mut r = rng(7);
    for _ in 0..10 {
        let rows = random_rows(&mut r, 50, 16);
        let g = fit_gaussian_matrix(to_matrix(&rows), &exact(16)).unwrap();
        let dense = dense_covariance(&rows);
        let rebuilt = g.covariance();
        for a in 0..16 {
            for b in 0..16 {
                assert!((dense[a][b] - rebuilt[(a, b)]).abs() < 1e-8);
            }
        }
    }
}

#[test]
fn wide_matrix_covariance_restricted_to_row_space() {
    // N < d: rank is N-1, and the rank-(N-1) model still reproduces C
    let mut r = rng(11);
    let rows = random_rows(&mut r, 8, 20);
    let g = fit_gaussian_matrix(to_matrix(&rows), &exact(20)).unwrap();
    assert_eq!(g.k(), 7);
    let dense = dense_covariance(&rows);
    let rebuilt = g.covariance();
    for a in 0..20 {
        for b in 0..20 {
            assert!((dense[a][b] - rebuilt[(a, b)]).abs() < 1e-10);
        }
    }
}

#[test]
fn eigenvalues_are_top_variances() {
    let mut r = rng(3);
    let rows = random_rows(&mut r, 60, 6);
    let g = fit_gaussian_matrix(to_matrix(&rows), &exact(6)).unwrap();
    // trace is preserved at full rank
    let dense = dense_covariance(&rows);
    let trace: f64 = (0..6).map(|i| dense[i][i]).sum();
    let sum: f64 = g.eigenvalues().iter().sum();
    assert!((trace - sum).abs() < 1e-12);
    // Rayleigh quotient of each column equals its eigenvalue
    for (col, lambda) in g.basis_columns().zip(g.eigenvalues()) {
        let cv = apply(&dense, col);
        let q: f64 = cv.iter().zip(col).map(|(a, b)| a * b).sum();
        assert!((q - lambda).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn rotation_leaves_distance_unchanged(seed in any::<u64>()) {
        let mut r = rng(seed);
        let rows = random_rows(&mut r, 30, 6);
        let z: Vec<f64> = (0..6).map(|_| r.random_range(-2.0..2.0)).collect();
        let q = random_orthogonal(&mut r, 6);
        let rotated: Vec<Vec<f64>> = rows.iter().map(|v| apply(&q, v)).collect();
        let a = fit_gaussian_matrix(to_matrix(&rows), &exact(6)).unwrap().mahalanobis(&z).unwrap();
        let b = fit_gaussian_matrix(to_matrix(&rotated), &exact(6)).unwrap()
            .mahalanobis(&apply(&q, &z)).unwrap();
        prop_assert!((a - b).abs() < 1e-8, "{} vs {}", a, b);
    }

    #[test]
    fn translation_leaves_distance_unchanged(seed in any::<u64>(), k in 1usize..=6) {
        let mut r = rng(seed);
        let rows = random_rows(&mut r, 30, 6);
        let z: Vec<f64> = (0..6).map(|_| r.random_range(-2.0..2.0)).collect();
        let shift: Vec<f64> = (0..6).map(|_| r.random_range(-50.0..50.0)).collect();
        let moved: Vec<Vec<f64>> = rows.iter()
            .map(|v| v.iter().zip(&shift).map(|(a, s)| a + s).collect()).collect();
        let zs: Vec<f64> = z.iter().zip(&shift).map(|(a, s)| a + s).collect();
        let a = fit_gaussian_matrix(to_matrix(&rows), &exact(k)).unwrap().mahalanobis(&z).unwrap();
        let b = fit_gaussian_matrix(to_matrix(&moved), &exact(k)).unwrap().mahalanobis(&zs).unwrap();
        prop_assert!((a - b).abs() < 1e-8, "{} vs {}", a, b);
    }

    #[test]
    fn distance_grows_along_a_ray(seed in any::<u64>(), k in 1usize..=5, floor in any::<bool>()) {
        let mut r = rng(seed);
        let rows = random_rows(&mut r, 25, 5);
        let cfg = MahalanobisConfig {
            k,
            residual_mode: if floor { ResidualMode::Floor } else { ResidualMode::Ignore },
            ..MahalanobisConfig::default()
        };
        let g = fit_gaussian_matrix(to_matrix(&rows), &cfg).unwrap();
        let v: Vec<f64> = (0..5).map(|_| r.random_range(-1.0..1.0)).collect();
        let mut last = 0.0;
        for step in 0..20 {
            let t = step as f64 * 0.25;
            let z: Vec<f64> = g.mean().iter().zip(&v).map(|(m, x)| m + t * x).collect();
            let d = g.mahalanobis(&z).unwrap();
            prop_assert!(d >= last - 1e-12);
            last = d;
        }
    }

    #[test]
    fn fitted_basis_is_orthonormal(seed in any::<u64>(), n in 3usize..40, d in 1usize..12, k in 1usize..12) {
        let mut r = rng(seed);
        let rows = random_rows(&mut r, n, d);
        let g = fit_gaussian_matrix(to_matrix(&rows), &MahalanobisConfig::with_k(k)).unwrap();
        prop_assert_eq!(g.k(), k.min(n - 1).min(d));
        for i in 0..g.k() {
            for j in 0..g.k() {
                let dot: f64 = g.basis_column(i).iter().zip(g.basis_column(j)).map(|(a, b)| a * b).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                prop_assert!((dot - target).abs() < 1e-10);
            }
        }
    }
}
