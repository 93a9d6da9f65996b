//! Sinusoidal probing noise used to excite the plant while collecting data.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{LqtError, Result};
use crate::linalg::Vector;

#[derive(Debug, Clone, PartialEq)]
pub struct ProbingNoiseConfig {
    /// Variance parameter of the offset vector; its entries are drawn with
    /// standard deviation `sqrt(sigma)`.
    pub sigma: f64,
    /// Coefficient of the k-th harmonic, k = 1, 2, ...
    pub amplitudes: Vec<f64>,
    pub base_frequency: f64,
}

impl Default for ProbingNoiseConfig {
    fn default() -> Self {
        Self {
            sigma: 0.5,
            amplitudes: vec![10.0, 8.0, 7.0, 6.0, 4.0, 3.0, 0.5],
            base_frequency: PI / 5.0,
        }
    }
}

impl ProbingNoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(LqtError::InvalidParameter {
                name: "sigma",
                reason: format!("{} must be finite and >= 0", self.sigma),
            });
        }
        if !self.base_frequency.is_finite() || self.amplitudes.iter().any(|a| !a.is_finite()) {
            return Err(LqtError::InvalidParameter {
                name: "probing noise",
                reason: "amplitudes and base frequency must be finite".into(),
            });
        }
        Ok(())
    }
}

/// Random vectors `ω1` (offset) and `ω2..` (one frequency vector per
/// harmonic), drawn once per dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseBasis {
    pub offset: Vector,
    pub frequencies: Vec<Vector>,
}

impl NoiseBasis {
    /// Draws the offset first, then each frequency vector in harmonic order.
    pub fn draw<R: Rng + ?Sized>(rng: &mut R, dim: usize, config: &ProbingNoiseConfig) -> Result<Self> {
        config.validate()?;
        let offset_dist = Normal::new(0.0, config.sigma.sqrt()).map_err(|e| LqtError::InvalidParameter {
            name: "sigma",
            reason: e.to_string(),
        })?;
        let offset = Vector::from_iterator(dim, (0..dim).map(|_| offset_dist.sample(rng)));
        let frequencies = (0..config.amplitudes.len())
            .map(|_| Vector::from_iterator(dim, (0..dim).map(|_| StandardNormal.sample(rng))))
            .collect();
        Ok(Self { offset, frequencies })
    }

    pub fn zeros(dim: usize, harmonics: usize) -> Self {
        Self {
            offset: Vector::zeros(dim),
            frequencies: vec![Vector::zeros(dim); harmonics],
        }
    }

    pub fn dim(&self) -> usize {
        self.offset.len()
    }
}

/// Draws a basis from a ChaCha20 stream seeded with `seed`.
pub fn draw_noise_basis(seed: u64, dim: usize, config: &ProbingNoiseConfig) -> Result<NoiseBasis> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    NoiseBasis::draw(&mut rng, dim, config)
}

/// `ω1 + Σ_k a_k sin(k ω_{k+1} f t)`, elementwise.
pub fn probing_noise(basis: &NoiseBasis, t: i64, config: &ProbingNoiseConfig) -> Vector {
    let mut out = basis.offset.clone();
    let phase = config.base_frequency * t as f64;
    for (k, (amp, freq)) in config.amplitudes.iter().zip(&basis.frequencies).enumerate() {
        let harmonic = (k + 1) as f64;
        for (o, w) in out.iter_mut().zip(freq.iter()) {
            *o += amp * (harmonic * w * phase).sin();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_basis_repeats() {
        let c = ProbingNoiseConfig::default();
        assert_eq!(draw_noise_basis(42, 7, &c).unwrap(), draw_noise_basis(42, 7, &c).unwrap());
        assert_ne!(draw_noise_basis(42, 7, &c).unwrap(), draw_noise_basis(43, 7, &c).unwrap());
    }

    #[test]
    fn zero_variance_offset_vanishes() {
        let c = ProbingNoiseConfig { sigma: 0.0, ..Default::default() };
        let basis = draw_noise_basis(5, 7, &c).unwrap();
        assert_eq!(basis.offset, Vector::zeros(7));
        assert_eq!(basis.frequencies.len(), 7);
    }

    #[test]
    fn frequency_draws_have_unit_variance() {
        let c = ProbingNoiseConfig::default();
        let mut rng = ChaCha20Rng::seed_from_u64(2024);
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let mut count = 0.0;
        while count < 100_000.0 {
            let basis = NoiseBasis::draw(&mut rng, 7, &c).unwrap();
            for w in &basis.frequencies {
                for v in w.iter() {
                    sum += v;
                    sum_sq += v * v;
                    count += 1.0;
                }
            }
        }
        let mean = sum / count;
        let var = sum_sq / count - mean * mean;
        assert!((0.98..=1.02).contains(&var), "sample variance {var}");
    }

    #[test]
    fn offset_has_sqrt_sigma_spread() {
        let c = ProbingNoiseConfig::default();
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let mut sum_sq = 0.0;
        let draws = 20_000;
        for _ in 0..draws {
            sum_sq += NoiseBasis::draw(&mut rng, 1, &c).unwrap().offset[0].powi(2);
        }
        let var = sum_sq / draws as f64;
        assert!((var - 0.5).abs() < 0.02, "offset variance {var}");
    }

    #[test]
    fn silent_basis_gives_zero_noise() {
        let c = ProbingNoiseConfig::default();
        let basis = NoiseBasis::zeros(7, 7);
        for t in [0, 1, 17, 1999] {
            assert_eq!(probing_noise(&basis, t, &c), Vector::zeros(7));
        }
    }

    #[test]
    fn time_zero_returns_offset() {
        let c = ProbingNoiseConfig::default();
        let basis = draw_noise_basis(9, 7, &c).unwrap();
        assert_eq!(probing_noise(&basis, 0, &c), basis.offset);
    }

    #[test]
    fn single_harmonic_direct_evaluation() {
        let c = ProbingNoiseConfig::default();
        let mut basis = NoiseBasis::zeros(7, 7);
        basis.frequencies[0][0] = 1.0;
        // 10 sin(π t / 5): zero at t = 5, peak 10 sin(π/2) at t = 2.5 is not
        // an integer, so check t = 5 and t = 1
        let at5 = probing_noise(&basis, 5, &c);
        assert!(at5[0].abs() < 1e-12);
        let at1 = probing_noise(&basis, 1, &c);
        assert!((at1[0] - 10.0 * (PI / 5.0).sin()).abs() < 1e-12);
        assert!(at1.rows(1, 6).iter().all(|&v| v == 0.0));

        basis.frequencies[2][3] = 0.5;
        let at2 = probing_noise(&basis, 2, &c);
        assert!((at2[3] - 7.0 * (3.0 * 0.5 * PI * 2.0 / 5.0).sin()).abs() < 1e-12);
    }
}
