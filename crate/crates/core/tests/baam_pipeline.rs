use lqt_core::infinite_lqt::{policy_iteration, simulate_with_gain};
use lqt_core::metrics::{gain_error, steady_state_margin};
use lqt_core::qlearning::{
    generate_training_data, learn_kernel, model_kernel, stabilizing_gain, KernelMatrix, ProbingNoiseConfig,
    QLearningConfig, RidgeSolver, StopReason,
};
use lqt_core::state_space::{augment, baam_model, baam_reference};
use lqt_core::{LqtError, Matrix, Vector};

fn setup() -> (lqt_core::state_space::AugmentedSystem, Matrix) {
    let aug = augment(&baam_model(), &baam_reference(), &Matrix::identity(6, 6)).unwrap();
    (aug, Matrix::identity(7, 7))
}

fn learned_gain(seed: u64, config: &QLearningConfig) -> Matrix {
    let (aug, r) = setup();
    let data = generate_training_data(
        &baam_model(),
        &baam_reference(),
        &stabilizing_gain(),
        &Vector::from_element(6, 50.0),
        2000,
        seed,
        &ProbingNoiseConfig::default(),
    )
    .unwrap();
    let learned = learn_kernel(&data, aug.weight(), &r, &KernelMatrix::identity(12, 7), config).unwrap();
    assert_eq!(learned.iterations, learned.history.len());
    if learned.stop == StopReason::IterationLimit {
        assert_eq!(learned.iterations, config.max_iter);
    }
    learned.gain().unwrap()
}

#[test]
fn learned_gain_is_close_to_model_based_gain() {
    let (aug, r) = setup();
    let k_star = policy_iteration(&aug, &r, 0.99, &Matrix::zeros(7, 12), 1e-10, 200).unwrap().k;
    let config = QLearningConfig::default();
    for seed in 1..=3 {
        let k_hat = learned_gain(seed, &config);
        let err = gain_error(&k_star, &k_hat).unwrap();
        assert!(err.frobenius <= 1.5, "seed {seed}: {err:?}");
        assert!(err.mean_abs <= 0.16, "seed {seed}: {err:?}");
        // the plant-state columns are fully excited by the probing noise
        let x_part = (k_hat.columns(0, 6) - k_star.columns(0, 6)).amax();
        assert!(x_part < 1e-2, "seed {seed}: {x_part}");

        let traj = simulate_with_gain(&baam_model(), &baam_reference(), &k_hat, &Vector::from_element(6, 50.0), 1000).unwrap();
        assert!(steady_state_margin(&traj) < 0.05);
    }
}

#[test]
fn model_kernel_gain_matches_policy_iteration() {
    let (aug, r) = setup();
    let sol = policy_iteration(&aug, &r, 0.99, &Matrix::zeros(7, 12), 1e-10, 200).unwrap();
    let h = model_kernel(&aug, &r, 0.99, &sol.p).unwrap();
    assert!((h.gain().unwrap() - &sol.k).amax() < 1e-9);
}

#[test]
fn unregularised_fit_on_constant_reference_is_rank_deficient() {
    let (aug, r) = setup();
    let data = generate_training_data(
        &baam_model(),
        &baam_reference(),
        &stabilizing_gain(),
        &Vector::from_element(6, 50.0),
        400,
        1,
        &ProbingNoiseConfig::default(),
    )
    .unwrap();
    let config = QLearningConfig {
        mu: 0.0,
        ..Default::default()
    };
    match learn_kernel(&data, aug.weight(), &r, &KernelMatrix::identity(12, 7), &config) {
        Err(LqtError::RankDeficient { rank, unknowns }) => {
            assert_eq!(unknowns, 190);
            assert!(rank < 190);
        }
        other => panic!("expected rank deficiency, got {other:?}"),
    }
}

#[test]
fn normal_equations_route_runs() {
    // squaring the condition number loses the unexcited directions, but the
    // fit still completes and keeps the excited plant-state columns
    let config = QLearningConfig {
        solver: RidgeSolver::NormalEquations,
        ..Default::default()
    };
    let k_hat = learned_gain(1, &config);
    assert!(k_hat.iter().all(|v| v.is_finite()));
}
