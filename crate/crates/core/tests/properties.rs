use plume::losses::{contrastive_full, Guidance};
use plume::metrics::roc_auc_from;
use plume::perturbator::{
    apply_adaptive, kl_divergence, noise_constraint_loss, perturb_gaussian, perturb_linear, PerturbationOutput,
    StrategyKind,
};
use plume::Matrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn vec_of(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, d)
}

fn scored() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (2usize..60)
        .prop_flat_map(|n| (prop::collection::vec(-3.0f64..3.0, n), prop::collection::vec(any::<bool>(), n)))
        .prop_filter("both classes", |(_, l)| l.iter().any(|&b| b) && l.iter().any(|&b| !b))
}

proptest! {
    #[test]
    fn kl_is_nonnegative(mu in vec_of(6), lv in vec_of(6)) {
        prop_assert!(kl_divergence(&mu, &lv) >= 0.0);
    }

    #[test]
    fn noise_constraint_is_nonnegative(a in vec_of(6), b in vec_of(6)) {
        prop_assert!(noise_constraint_loss(&a, &b) >= 0.0);
    }

    #[test]
    fn rank1_vanishes_with_either_vector(x in vec_of(8), v in vec_of(8)) {
        let zero = vec![0.0; 8];
        prop_assert_eq!(perturb_linear(&x, &zero, &v), x.clone());
        prop_assert_eq!(perturb_linear(&x, &v, &zero), x);
    }

    #[test]
    fn auc_is_invariant_to_monotone_maps((s, l) in scored()) {
        let base = roc_auc_from(&s, &l).unwrap();
        let mapped: Vec<f64> = s.iter().map(|v| (2.0 * v).exp() + 7.0).collect();
        prop_assert_eq!(roc_auc_from(&mapped, &l).unwrap(), base);
        prop_assert!((0.0..=1.0).contains(&base));
    }

    #[test]
    fn auc_flips_with_scores_or_labels((s, l) in scored()) {
        let base = roc_auc_from(&s, &l).unwrap();
        let neg: Vec<f64> = s.iter().map(|v| -v).collect();
        let flipped: Vec<bool> = l.iter().map(|b| !b).collect();
        prop_assert!((roc_auc_from(&neg, &l).unwrap() - (1.0 - base)).abs() < 1e-12);
        prop_assert!((roc_auc_from(&s, &flipped).unwrap() - (1.0 - base)).abs() < 1e-12);
    }

    #[test]
    fn contrastive_full_is_finite_and_positive(z in prop::collection::vec(vec_of(4), 3), zt in prop::collection::vec(vec_of(4), 3)) {
        prop_assume!(z.iter().chain(&zt).all(|r| r.iter().any(|v| v.abs() > 1e-3)));
        let out = contrastive_full(&Matrix::from_rows(&z), &Matrix::from_rows(&zt), 0.5).unwrap();
        prop_assert!(out.loss.is_finite() && out.loss > 0.0);
    }
}

#[test]
fn identity_at_optimum_for_every_strategy() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = plume::perturbator::draw_standard_normal(16, 8, &mut rng);
    let identity = PerturbationOutput::identity(16, 8);
    assert_eq!(identity.noise_loss(), 0.0);
    for kind in StrategyKind::ALL {
        let out = if kind.is_adaptive() {
            apply_adaptive(kind, &x, &identity).unwrap()
        } else {
            let rows: Vec<Vec<f64>> = (0..16).map(|i| perturb_gaussian(x.row(i), 0.0, &mut rng)).collect();
            Matrix::from_rows(&rows)
        };
        assert_eq!(out, x, "{kind}");
    }
}

fn loss_with(normal: &[[f64; 2]], pseudo: &[[f64; 2]]) -> f64 {
    contrastive_full(&Matrix::from_rows(normal), &Matrix::from_rows(pseudo), 0.5)
        .unwrap()
        .loss
}

#[test]
fn contrastive_full_responds_to_similarities() {
    let normal = [[1.0, 0.1], [1.0, -0.3], [0.8, 0.5]];
    let pseudo = [[-1.0, 0.2], [0.1, -1.0], [-0.5, -0.5]];
    let base = loss_with(&normal, &pseudo);
    // pull the normals together
    let tighter = [[1.0, 0.05], [1.0, -0.15], [0.8, 0.25]];
    assert!(loss_with(&tighter, &pseudo) < base);
    // move one pseudo-anomaly toward the normals
    let closer = [[0.9, 0.1], [0.1, -1.0], [-0.5, -0.5]];
    assert!(loss_with(&normal, &closer) > base);
}

#[test]
fn guidance_labels_match_table_vocabulary() {
    let labels: Vec<&str> = [Guidance::None, Guidance::Mean, Guidance::Full].iter().map(|g| g.table_label()).collect();
    assert_eq!(labels, ["-", "✓ (Mean)", "✓"]);
    let names: Vec<&str> = StrategyKind::ALL.iter().map(|k| k.name()).collect();
    assert_eq!(names, ["Gaussian", "AddMult", "Add", "Mult", "LinearMap"]);
}
