mod common;

use common::{cca_correlations, cca_correlations_2d, pca_variances};
use nalgebra::DMatrix;
use polysrl::embeddings::{fit_cca, EmbeddingTable, Pca, DEFAULT_CCA_RIDGE};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(n: usize, d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(n, d, |_, _| rng.gen_range(-1.0..1.0))
}

fn rotation(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    random(d, d, rng).qr().q()
}

#[test]
fn identical_and_rotated_views_are_perfectly_correlated() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10 {
        let x = random(40, 5, &mut rng);
        let r = rotation(5, &mut rng);
        for y in [x.clone(), &x * r] {
            let cca = fit_cca(&x, &y, 5, 0.0).unwrap();
            for c in &cca.correlations {
                assert!((c - 1.0).abs() < 1e-6, "{}", c);
            }
        }
    }
}

#[test]
fn correlations_match_generalized_eigenproblem() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for case in 0..50 {
        let x = random(6, 2, &mut rng);
        let y = &x * random(2, 2, &mut rng) * 0.5 + random(6, 2, &mut rng);
        for ridge in [0.0, DEFAULT_CCA_RIDGE] {
            let got = fit_cca(&x, &y, 2, ridge).unwrap().correlations;
            let want = cca_correlations_2d(&x, &y, ridge);
            for (g, w) in got.iter().zip(want) {
                assert!((g - w).abs() < 1e-5, "case {} ridge {}: {} vs {}", case, ridge, g, w);
            }
        }
    }
    for case in 0..20 {
        let x = random(30, 4, &mut rng);
        let y = random(30, 3, &mut rng) + x.columns(0, 3) * 0.7;
        let got = fit_cca(&x, &y, 3, DEFAULT_CCA_RIDGE).unwrap().correlations;
        let want = cca_correlations(&x, &y, DEFAULT_CCA_RIDGE);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-9, "case {}: {} vs {}", case, g, w);
        }
    }
}

#[test]
fn pca_variances_match_eigensolver() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let scales: Vec<f64> = (0..8).map(|j| 0.2 + j as f64).collect();
        let x = DMatrix::from_fn(60, 8, |_, j| rng.gen_range(-1.0..1.0) * scales[j]) * rotation(8, &mut rng);
        let table = EmbeddingTable::from_entries(
            (0..x.nrows()).map(|i| (format!("w{}", i), x.row(i).iter().cloned().collect::<Vec<_>>())),
        )
        .unwrap();
        let pca = Pca::fit(&table, 8).unwrap();
        let want = pca_variances(&x);
        for (g, w) in pca.variances.iter().zip(&want) {
            assert!(((g - w) / w).abs() < 1e-8, "{} vs {}", g, w);
        }
    }
}
