#![allow(dead_code)]

use hardy_lab::{MetricMeasureSpace, SpectralOperator};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Uniform `[-1, 1)` samples from a seeded generator.
pub fn signal(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn model(name: &str) -> (MetricMeasureSpace, SpectralOperator) {
    hardy_lab::fixtures::by_name(name).expect("bundled model").build().expect("valid model")
}

pub fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
