#[path = "common/oracle.rs"]
mod oracle;

use plume::losses::{bce, contrastive_full, contrastive_mean, cosine_similarity};
use plume::metrics::roc_auc_from;
use plume::perturbator::{kl_divergence, noise_constraint_loss, perturb_linear};
use plume::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn vector(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-scale..scale)).collect()
}

fn rows(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| vector(rng, d, 2.0)).collect()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

#[test]
fn rank1_matches_explicit_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let x = vector(&mut rng, 8, 3.0);
        let a = vector(&mut rng, 8, 1.5);
        let b = vector(&mut rng, 8, 1.5);
        let fast = perturb_linear(&x, &a, &b);
        let slow = oracle::explicit_rank1(&x, &a, &b);
        for (f, s) in fast.iter().zip(&slow) {
            assert!((f - s).abs() <= 1e-12, "{fast:?} vs {slow:?}");
        }
    }
}

#[test]
fn scalar_losses_match_direct_formulas() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..100 {
        let p = rng.random_range(1e-3..1.0 - 1e-3);
        let y = if rng.random_bool(0.5) { 1.0 } else { 0.0 };
        assert!(close(bce(p, y), oracle::bce(p, y), 1e-10));

        let d = rng.random_range(1..12);
        let mu = vector(&mut rng, d, 2.0);
        let lv = vector(&mut rng, d, 2.0);
        assert!(close(kl_divergence(&mu, &lv), oracle::kl(&mu, &lv), 1e-10));
        assert!(close(noise_constraint_loss(&mu, &lv), oracle::noise_constraint(&mu, &lv), 1e-10));

        let tau = rng.random_range(0.1..2.0);
        let v1 = vector(&mut rng, d, 2.0);
        let v2 = vector(&mut rng, d, 2.0);
        assert!(close(cosine_similarity(&v1, &v2, tau).unwrap(), oracle::cosine(&v1, &v2, tau), 1e-10));
    }
}

#[test]
fn contrastive_losses_match_direct_formulas() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..100 {
        let n = rng.random_range(2..7);
        let d = rng.random_range(2..6);
        let tau = rng.random_range(0.2..2.0);
        let z = rows(&mut rng, n, d);
        let zt = rows(&mut rng, n, d);
        let (mz, mzt) = (Matrix::from_rows(&z), Matrix::from_rows(&zt));
        let full = contrastive_full(&mz, &mzt, tau).unwrap().loss;
        assert!(close(full, oracle::contrastive_full(&z, &zt, tau), 1e-10));
        let mean = contrastive_mean(&mz, &mzt, tau).unwrap().loss;
        assert!(close(mean, oracle::contrastive_mean(&z, &zt, tau), 1e-10));
    }
}

#[test]
fn contrastive_two_by_two_toy() {
    let z = vec![vec![1.0, 0.0], vec![0.6, 0.8]];
    let zt = vec![vec![0.0, 1.0], vec![-1.0, 0.5]];
    let got = contrastive_full(&Matrix::from_rows(&z), &Matrix::from_rows(&zt), 1.0).unwrap().loss;
    assert!((got - oracle::contrastive_full(&z, &zt, 1.0)).abs() < 1e-12);
}

#[test]
fn contrastive_collapse_case() {
    for n in [2usize, 4, 32] {
        for tau in [0.1, 0.5, 1.0] {
            let z = Matrix::filled(n, 5, 0.3);
            let got = contrastive_full(&z, &z, tau).unwrap().loss;
            // one exp(s) per log term against a (2N−1)-term denominator
            assert!((got - ((2 * n - 1) as f64).ln()).abs() < 1e-10);
            let rows = vec![vec![0.3; 5]; n];
            assert!((got - oracle::contrastive_full(&rows, &rows, tau)).abs() < 1e-10);
        }
    }
}

fn auc_instance(rng: &mut ChaCha8Rng, n: usize, levels: Option<u32>) -> (Vec<f64>, Vec<bool>) {
    loop {
        let scores: Vec<f64> = (0..n)
            .map(|_| match levels {
                Some(k) => rng.random_range(0..k) as f64 / 4.0,
                None => rng.random::<f64>(),
            })
            .collect();
        let labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
        if labels.iter().any(|&l| l) && labels.iter().any(|&l| !l) {
            return (scores, labels);
        }
    }
}

#[test]
fn auc_matches_pairwise_count_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for case in 0..200 {
        let n = rng.random_range(2..=1000);
        let levels = match case % 4 {
            0 => None,
            1 => Some(2),
            2 => Some(5),
            _ => Some(40),
        };
        let (scores, labels) = auc_instance(&mut rng, n, levels);
        assert_eq!(roc_auc_from(&scores, &labels).unwrap(), oracle::pairwise_auc(&scores, &labels));
    }
}
