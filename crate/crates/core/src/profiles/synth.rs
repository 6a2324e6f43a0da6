//! Seeded synthetic batches: profiles from three parametric families plus
//! feature vectors that are a fixed linear embedding of the profile
//! parameters, so a small network can learn the mapping back.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::BudgetGrid;
use crate::profiles::types::{DifficultyLabel, EarlyStopProfile, FeatureRecord, QueryRecord};

/// Parameters of a synthetic batch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthSpec {
    pub count: usize,
    /// Class proportions (easy, medium, hard); nonnegative, summing to 1.
    pub proportions: [f64; 3],
    /// Standard deviation of the Gaussian jitter added to both profile
    /// entries (clamped back to [0, 1]) and feature vectors.
    pub noise: f64,
    pub grid: BudgetGrid,
    /// Dimension of the emitted feature vectors. Values >= 6 keep the
    /// parameter embedding injective.
    pub feature_dim: usize,
    /// Layer index assigned to the informative feature vectors.
    pub informative_layer: u32,
    /// Optional extra layer of pure-noise features with the same dimension.
    pub noise_layer: Option<u32>,
}

impl SynthSpec {
    pub fn new(count: usize, proportions: [f64; 3], noise: f64, grid: BudgetGrid) -> Self {
        Self {
            count,
            proportions,
            noise,
            grid,
            feature_dim: 32,
            informative_layer: 1,
            noise_layer: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.proportions.iter().any(|&p| p < 0.0 || !p.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "proportions must be nonnegative, got {:?}",
                self.proportions
            )));
        }
        let sum: f64 = self.proportions.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!("proportions must sum to 1, got {sum}")));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(Error::InvalidConfig(format!("noise must be >= 0, got {}", self.noise)));
        }
        if self.feature_dim == 0 {
            return Err(Error::InvalidConfig("feature_dim must be >= 1".to_string()));
        }
        if self.informative_layer == 0 {
            return Err(Error::InvalidConfig("informative_layer must be >= 1".to_string()));
        }
        if self.noise_layer == Some(self.informative_layer) {
            return Err(Error::InvalidConfig(
                "noise_layer must differ from informative_layer".to_string(),
            ));
        }
        Ok(())
    }
}

/// A generated batch: labeled query records and their feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthBatch {
    pub records: Vec<QueryRecord>,
    pub features: Vec<FeatureRecord>,
}

const PARAM_DIM: usize = 6; // class one-hot (3) + three shape uniforms

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Noise-free profile of one class at shape uniforms (u1, u2, u3).
///
/// easy: fast-saturating exponential with a high plateau;
/// medium: sigmoid ramp centered mid-grid;
/// hard: near zero with a small quadratic tail rise.
fn family_profile(label: DifficultyLabel, u: [f64; 3], k: usize) -> Vec<f64> {
    let kf = k as f64;
    match label {
        DifficultyLabel::Easy => {
            let rate = 0.7 + 0.6 * u[0];
            let plateau = 0.88 + 0.10 * u[1];
            (1..=k).map(|j| plateau * (1.0 - (-rate * j as f64).exp())).collect()
        }
        DifficultyLabel::Medium => {
            let center = kf * (0.42 + 0.20 * u[0]);
            let steep = (12.0 / kf) * (0.8 + 0.6 * u[1]);
            let plateau = 0.55 + 0.30 * u[2];
            (1..=k).map(|j| plateau * sigmoid(steep * (j as f64 - center))).collect()
        }
        DifficultyLabel::Hard => {
            let start = kf * (0.60 + 0.25 * u[0]);
            let tail_max = 0.02 + 0.16 * u[1];
            (1..=k)
                .map(|j| {
                    let t = ((j as f64 - start) / (kf - start).max(1e-9)).clamp(0.0, 1.0);
                    tail_max * t * t
                })
                .collect()
        }
    }
}

/// Generates a labeled batch plus features, deterministically for a fixed
/// seed. Class membership is drawn per record from the proportions.
pub fn generate_synthetic_batch(spec: &SynthSpec, seed: u64) -> Result<SynthBatch> {
    spec.validate()?;
    let k = spec.grid.num_windows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");

    // Fixed embedding of the 6 profile parameters into feature space.
    let scale = 1.0 / (PARAM_DIM as f64).sqrt();
    let embedding: Vec<f64> =
        (0..spec.feature_dim * PARAM_DIM).map(|_| normal.sample(&mut rng) * scale).collect();

    let cumulative = [
        spec.proportions[0],
        spec.proportions[0] + spec.proportions[1],
        spec.proportions[0] + spec.proportions[1] + spec.proportions[2],
    ];

    let mut records = Vec::with_capacity(spec.count);
    let mut informative = Vec::with_capacity(spec.count);
    let mut noise_features = Vec::new();
    let width = spec.count.max(2).to_string().len().max(4);

    for i in 0..spec.count {
        let draw: f64 = rng.gen();
        let label = if draw < cumulative[0] {
            DifficultyLabel::Easy
        } else if draw < cumulative[1] {
            DifficultyLabel::Medium
        } else {
            DifficultyLabel::Hard
        };
        let u = [rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()];

        let mut probs = family_profile(label, u, k);
        if spec.noise > 0.0 {
            for p in probs.iter_mut() {
                *p = (*p + spec.noise * normal.sample(&mut rng)).clamp(0.0, 1.0);
            }
        }
        let id = format!("q{i:0width$}");
        let profile = EarlyStopProfile::new(probs, &spec.grid)?;
        records.push(QueryRecord::new(id.clone()).with_profile(profile).with_difficulty(label));

        let mut theta = [0.0; PARAM_DIM];
        theta[label.class_index()] = 1.0;
        theta[3..].copy_from_slice(&u);
        let mut vec: Vec<f64> = (0..spec.feature_dim)
            .map(|r| {
                (0..PARAM_DIM).map(|c| embedding[r * PARAM_DIM + c] * theta[c]).sum::<f64>()
            })
            .collect();
        if spec.noise > 0.0 {
            for v in vec.iter_mut() {
                *v += spec.noise * normal.sample(&mut rng);
            }
        }
        informative.push(FeatureRecord { id: id.clone(), layer: spec.informative_layer, vec });

        if let Some(layer) = spec.noise_layer {
            let vec = (0..spec.feature_dim).map(|_| normal.sample(&mut rng)).collect();
            noise_features.push(FeatureRecord { id, layer, vec });
        }
    }

    let mut features = informative;
    features.append(&mut noise_features);
    Ok(SynthBatch { records, features })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_spec() -> SynthSpec {
        SynthSpec::new(50, [0.2, 0.6, 0.2], 0.0, BudgetGrid::default())
    }

    #[test]
    fn degenerate_mixture_labels_everything_easy() {
        let spec = SynthSpec { proportions: [1.0, 0.0, 0.0], ..base_spec() };
        let batch = generate_synthetic_batch(&spec, 3).unwrap();
        assert!(batch.records.iter().all(|r| r.difficulty == Some(DifficultyLabel::Easy)));
    }

    #[test]
    fn same_seed_is_byte_identical() {
        let spec = SynthSpec { noise: 0.05, ..base_spec() };
        let a = generate_synthetic_batch(&spec, 11).unwrap();
        let b = generate_synthetic_batch(&spec, 11).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic_batch(&spec, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn class_counts_track_proportions() {
        let spec = SynthSpec { count: 500, ..base_spec() };
        let batch = generate_synthetic_batch(&spec, 0).unwrap();
        let mut counts = [0usize; 3];
        for r in &batch.records {
            counts[r.difficulty.unwrap().class_index()] += 1;
        }
        // Multinomial draw: within +/- 3% of n around (100, 300, 100).
        assert!((counts[0] as i64 - 100).abs() <= 15, "easy count {}", counts[0]);
        assert!((counts[1] as i64 - 300).abs() <= 15, "medium count {}", counts[1]);
        assert!((counts[2] as i64 - 100).abs() <= 15, "hard count {}", counts[2]);
    }

    #[test]
    fn invalid_proportions_rejected() {
        let bad_sum = SynthSpec { proportions: [0.2, 0.6, 0.1], ..base_spec() };
        assert!(generate_synthetic_batch(&bad_sum, 0).is_err());
        let negative = SynthSpec { proportions: [-0.2, 1.0, 0.2], ..base_spec() };
        assert!(generate_synthetic_batch(&negative, 0).is_err());
    }

    #[test]
    fn profiles_valid_and_families_shaped_as_documented() {
        let spec = SynthSpec { count: 200, ..base_spec() };
        let batch = generate_synthetic_batch(&spec, 7).unwrap();
        for r in &batch.records {
            let p = r.profile().unwrap();
            assert!(p.probs().iter().all(|&v| (0.0..=1.0).contains(&v)));
            match r.difficulty.unwrap() {
                // easy saturates high and early
                DifficultyLabel::Easy => {
                    assert!(p.final_prob() > 0.85);
                    assert!(p.prob_at(3) > 0.8 * p.final_prob());
                }
                // medium starts near zero and ends mid-to-high
                DifficultyLabel::Medium => {
                    assert!(p.prob_at(0) < 0.1);
                    assert!(p.final_prob() > 0.5);
                }
                // hard stays low everywhere
                DifficultyLabel::Hard => {
                    assert!(p.final_prob() <= 0.18 + 1e-12);
                    assert!(p.prob_at(7) < 0.05);
                }
            }
        }
    }

    #[test]
    fn noise_layer_emits_second_feature_set() {
        let spec = SynthSpec { noise_layer: Some(9), count: 10, ..base_spec() };
        let batch = generate_synthetic_batch(&spec, 5).unwrap();
        let informative = batch.features.iter().filter(|f| f.layer == 1).count();
        let noise = batch.features.iter().filter(|f| f.layer == 9).count();
        assert_eq!((informative, noise), (10, 10));
    }
}
