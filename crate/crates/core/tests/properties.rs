use phase_est_lab::estimation::{fidelity, mle, sample_outcomes};
use phase_est_lab::fisher::{outcome_distribution, qcrb_gap};
use phase_est_lab::measurement::{default_recipe_matrix, recipe_povm, Povm};
use phase_est_lab::model::Model;
use phase_est_lab::operator::{hermitian_eig, unitary_exp, Operator, C64};
use phase_est_lab::qfi::{max_qfi_trace, qfi, qfi_covariance_form};
use phase_est_lab::states::{random_bipartite, random_pure, InputState};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn hermitian(dim: usize, vals: &[f64]) -> Operator {
    let mut k = 0;
    let mut next = || {
        k += 1;
        vals[(k - 1) % vals.len()]
    };
    let mut raw = vec![C64::new(0.0, 0.0); dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            raw[i * dim + j] = C64::new(next(), next());
        }
    }
    let a = Operator::from_row_major(dim, &raw).unwrap();
    (&a + &a.adjoint()).scale_real(0.5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exponential_of_hermitian_is_unitary(dim in 2usize..6, vals in prop::collection::vec(-3.0f64..3.0, 8..50)) {
        let h = hermitian(dim, &vals);
        let u = unitary_exp(&h).unwrap();
        prop_assert!(u.is_unitary(1e-10));
        let eig = hermitian_eig(&h).unwrap();
        let phase: C64 = eig.eigenvalues.iter().map(|&l| C64::new(0.0, l)).sum::<C64>().exp();
        let det = u.matrix().determinant();
        prop_assert!((det - phase).norm() < 1e-9);
    }

    #[test]
    fn qfi_is_bounded_and_theta_independent(d in 2usize..6, seed in any::<u64>(), entangled in any::<bool>()) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let model = if entangled {
            Model::mpee(random_bipartite(d, &mut rng).unwrap()).unwrap()
        } else {
            Model::mpeu(random_pure(d, &mut rng).unwrap()).unwrap()
        };
        let theta: Vec<f64> = (0..d - 1).map(|k| 0.37 * k as f64 - 0.5).collect();
        let h = qfi(&model, &theta).unwrap();
        prop_assert!(h.is_psd(1e-10));
        prop_assert!(h.trace() <= max_qfi_trace(d) + 1e-10);
        prop_assert!(h.max_abs_diff(&qfi_covariance_form(&model).unwrap()) < 1e-10);
    }

    #[test]
    fn probabilities_are_normalized_and_qcrb_holds(d in 2usize..5, seed in any::<u64>(), t in -1.5f64..1.5) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let model = Model::mpee(random_bipartite(d, &mut rng).unwrap()).unwrap();
        let povm = recipe_povm(&model, &vec![0.0; d - 1], &default_recipe_matrix(d, None)).unwrap();
        let theta = vec![t; d - 1];
        let dist = outcome_distribution(&model, &theta, &povm).unwrap();
        prop_assert!(dist.probabilities.iter().all(|&p| p >= 0.0));
        prop_assert!((dist.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        if let Ok(gap) = qcrb_gap(&model, &theta, &povm) {
            prop_assert!(gap >= -1e-8);
        }
    }

    #[test]
    fn sampled_counts_sum_to_n(n in 0u64..100_000, seed in any::<u64>()) {
        let povm = Povm::trivial(2);
        let model = Model::mpeu(random_pure(2, &mut ChaCha20Rng::seed_from_u64(seed)).unwrap()).unwrap();
        let mut dist = outcome_distribution(&model, &[0.0], &povm).unwrap();
        dist.probabilities = vec![0.3, 0.7];
        dist.labels = vec!["a".into(), "b".into()];
        dist.gradients = nalgebra::DMatrix::zeros(1, 2);
        let counts = sample_outcomes(&dist, n, &mut ChaCha20Rng::seed_from_u64(seed));
        prop_assert_eq!(counts.iter().sum::<u64>(), n);
    }

    #[test]
    fn fidelity_is_a_probability(d in 2usize..6, seed in any::<u64>()) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let a = InputState::Bipartite(random_bipartite(d, &mut rng).unwrap());
        let b = InputState::Bipartite(random_bipartite(d, &mut rng).unwrap());
        let f = fidelity(&a, &b).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&f));
        prop_assert!((fidelity(&a, &b).unwrap() - fidelity(&b, &a).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn mle_of_expected_counts_is_truth(seed in any::<u64>(), t in -0.5f64..0.5) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let model = Model::mpeu(random_pure(3, &mut rng).unwrap()).unwrap();
        let truth = [t, -0.5 * t];
        let povm = recipe_povm(&model, &truth, &default_recipe_matrix(3, None)).unwrap();
        let probs = outcome_distribution(&model, &truth, &povm).unwrap().probabilities;
        let counts: Vec<u64> = probs.iter().map(|p| (p * 1e12).round() as u64).collect();
        let est = mle(&counts, &model, &povm, &truth).unwrap();
        for (e, x) in est.iter().zip(truth) {
            prop_assert!((e - x).abs() < 1e-6);
        }
    }
}
