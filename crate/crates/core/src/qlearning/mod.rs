//! Model-free tracking: Q-function value iteration on data collected from
//! the plant under a stabilizing behaviour policy with probing noise.

mod dataset;
mod kernel;
mod learning;
mod noise;

pub use dataset::{
    generate_training_data, generate_with_basis, identifiability_floor, Transition, TransitionDataset,
    OVERFLOW_GUARD,
};
pub use kernel::{gain_from_kernel, kron_row, model_kernel, KernelMatrix};
pub use learning::{
    learn_kernel, value_iteration_step, LearnedKernel, QLearningConfig, RidgeSolver, StopReason,
    DIVERGENCE_LIMIT,
};
pub use noise::{draw_noise_basis, probing_noise, NoiseBasis, ProbingNoiseConfig};

use crate::linalg::Matrix;

#[rustfmt::skip]
const STABILIZING_K: [f64; 42] = [
     0.7395, -0.0076, -0.0003, -0.0264,  0.0194, -0.0170,
    -0.0076,  0.7430,  0.0031, -0.0093,  0.0068, -0.0060,
    -0.0003, -0.0033,  0.7599,  0.0021,  0.0002, -0.0002,
    -0.0126, -0.0042,  0.0016,  1.0971,  0.0092, -0.0079,
     0.0171,  0.0058,  0.0002,  0.0170,  0.8179,  0.0108,
    -0.0198, -0.0067, -0.0002, -0.0193,  0.0143,  0.6823,
    -0.1525, -0.0519, -0.0018, -0.1412,  0.1091, -0.0977,
];

/// Behaviour-policy gain (7×6) for data collection on the extruder model.
pub fn stabilizing_gain() -> Matrix {
    Matrix::from_row_slice(7, 6, &STABILIZING_K)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::spectral_radius;
    use crate::state_space::baam_model;

    #[test]
    fn behaviour_gain_stabilizes_plant() {
        let sys = baam_model();
        let rho = spectral_radius(&(sys.a() - sys.b() * stabilizing_gain()));
        assert!(rho < 1.0);
        assert!((rho - 0.462).abs() < 0.01, "{rho}");
    }
}
