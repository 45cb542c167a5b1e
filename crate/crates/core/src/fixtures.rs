//! Seeded synthetic corpora for tests, benches and demos.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dataio::EmbeddingRecord;
use crate::energy::Label;

/// Two isotropic Gaussian clusters.
#[derive(Debug, Clone)]
pub struct TwoClusters {
    pub samples: usize,
    pub dim: usize,
    /// Label 0 is centred at `+offset * u`, label 1 at `-offset * u`, for a
    /// random unit vector `u`.
    pub offset: f64,
    pub sigma: f64,
    pub seed: u64,
    pub domain: String,
}

impl TwoClusters {
    pub fn new(samples: usize, dim: usize, seed: u64) -> Self {
        TwoClusters {
            samples,
            dim,
            offset: 0.5,
            sigma: 0.1,
            seed,
            domain: "synthetic".into(),
        }
    }

    pub fn domain(mut self, domain: impl Into<String>) -> Self {
        self.domain = domain.into();
        self
    }

    /// The unit direction separating the clusters.
    pub fn direction(&self) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        unit_vector(&mut rng, self.dim)
    }

    /// Alternating labels, starting with label 0.
    pub fn generate(&self) -> Vec<EmbeddingRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let u = unit_vector(&mut rng, self.dim);
        (0..self.samples)
            .map(|i| {
                let label = if i % 2 == 0 {
                    Label::Generated
                } else {
                    Label::Human
                };
                let sign = if label == Label::Generated { 1.0 } else { -1.0 };
                let embedding = u
                    .iter()
                    .map(|&c| {
                        let noise: f64 = rng.sample(StandardNormal);
                        sign * self.offset * c + self.sigma * noise
                    })
                    .collect();
                EmbeddingRecord {
                    id: format!("{}-{i:05}", self.domain),
                    label,
                    domain: self.domain.clone(),
                    embedding,
                }
            })
            .collect()
    }
}

fn unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    raw.into_iter().map(|v| v / norm).collect()
}
