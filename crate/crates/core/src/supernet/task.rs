//! Seeded Gaussian-cluster classification data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::derive_seed;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskConfig {
    pub input_dim: usize,
    pub num_classes: usize,
    /// More than one cluster per class makes the task nonlinear.
    pub clusters_per_class: usize,
    /// Standard deviation of cluster centers around the origin.
    pub center_scale: f64,
    /// Standard deviation of samples around their center.
    pub spread: f64,
    pub train_size: usize,
    pub val_size: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self {
            input_dim: 8,
            num_classes: 3,
            clusters_per_class: 6,
            center_scale: 1.0,
            spread: 0.5,
            train_size: 960,
            val_size: 480,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl TaskConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("task: {m}")));
        if self.input_dim == 0 || self.num_classes < 2 || self.clusters_per_class == 0 {
            return bad("input_dim, num_classes (>= 2) and clusters_per_class must be positive");
        }
        if self.train_size == 0 || self.val_size == 0 || self.batch_size == 0 {
            return bad("train_size, val_size and batch_size must be positive");
        }
        if !(self.spread >= 0.0 && self.center_scale >= 0.0) {
            return bad("spread and center_scale must be non-negative");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Batch<T> {
    pub inputs: Vec<Vec<T>>,
    pub labels: Vec<usize>,
}

impl<T> Batch<T> {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Train and validation batches drawn from the same cluster mixture with
/// independent generator streams.
#[derive(Clone, Debug, PartialEq)]
pub struct ToyTask<T> {
    config: TaskConfig,
    train: Vec<Batch<T>>,
    val: Vec<Batch<T>>,
}

impl<T: Scalar> ToyTask<T> {
    pub fn generate(config: &TaskConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 0));
        let centers: Vec<Vec<Vec<f64>>> = (0..config.num_classes)
            .map(|_| {
                (0..config.clusters_per_class)
                    .map(|_| {
                        (0..config.input_dim)
                            .map(|_| config.center_scale * normal(&mut rng))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let split = |stream: u64, size: usize| -> Vec<Batch<T>> {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, stream));
            let mut inputs = Vec::with_capacity(size);
            let mut labels = Vec::with_capacity(size);
            for i in 0..size {
                // round-robin keeps classes balanced
                let class = i % config.num_classes;
                let center = &centers[class][rng.gen_range(0..config.clusters_per_class)];
                inputs.push(
                    center
                        .iter()
                        .map(|&c| T::of(c + config.spread * normal(&mut rng)))
                        .collect(),
                );
                labels.push(class);
            }
            // shuffle sample order so batches mix classes unevenly
            for i in (1..size).rev() {
                let j = rng.gen_range(0..=i);
                inputs.swap(i, j);
                labels.swap(i, j);
            }
            inputs
                .chunks(config.batch_size)
                .zip(labels.chunks(config.batch_size))
                .map(|(x, y)| Batch {
                    inputs: x.to_vec(),
                    labels: y.to_vec(),
                })
                .collect()
        };
        let train = split(1, config.train_size);
        let val = split(2, config.val_size);
        Ok(Self {
            config: *config,
            train,
            val,
        })
    }

    pub fn config(&self) -> &TaskConfig {
        &self.config
    }

    pub fn train(&self) -> &[Batch<T>] {
        &self.train
    }

    pub fn val(&self) -> &[Batch<T>] {
        &self.val
    }
}

/// Standard normal via Box–Muller.
pub(crate) fn normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_balanced() {
        let cfg = TaskConfig {
            seed: 4,
            ..Default::default()
        };
        let a = ToyTask::<f64>::generate(&cfg).unwrap();
        let b = ToyTask::<f64>::generate(&cfg).unwrap();
        assert_eq!(a, b);
        let n: usize = a.train().iter().map(Batch::len).sum();
        assert_eq!(n, cfg.train_size);
        let mut per_class = vec![0; cfg.num_classes];
        for batch in a.val() {
            for &y in &batch.labels {
                per_class[y] += 1;
            }
        }
        assert_eq!(per_class, vec![160; 3]);
    }

    #[test]
    fn train_and_val_do_not_share_samples() {
        let t = ToyTask::<f64>::generate(&TaskConfig::default()).unwrap();
        let train: Vec<&Vec<f64>> = t.train().iter().flat_map(|b| &b.inputs).collect();
        for v in t.val().iter().flat_map(|b| &b.inputs) {
            assert!(!train.contains(&v));
        }
    }

    #[test]
    fn invalid_configs() {
        assert!(TaskConfig {
            num_classes: 1,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(TaskConfig {
            batch_size: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}
