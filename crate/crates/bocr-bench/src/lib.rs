//! Shared fixtures for the criterion benchmarks in `benches/`.

use bocr::blstm::{blstm_init, BlstmModel};
use bocr::rng::Rng;

/// Production-size model: 48 input features, 128 units, 166 classes.
pub fn full_size_model() -> BlstmModel {
    blstm_init(48, 128, 166, 7).expect("valid sizes")
}

/// Desk-scale model: 32 units over a 21-class alphabet.
pub fn desk_model() -> BlstmModel {
    blstm_init(48, 32, 21, 7).expect("valid sizes")
}

/// A random feature sequence shaped like a normalized text line.
pub fn random_features(frames: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = Rng::new(seed);
    (0..frames)
        .map(|_| (0..48).map(|_| rng.uniform(0.0, 1.0)).collect())
        .collect()
}

/// Random per-frame logits for decoder benchmarks.
pub fn random_logits(frames: usize, classes: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = Rng::new(seed);
    (0..frames)
        .map(|_| (0..classes).map(|_| rng.uniform(-4.0, 4.0)).collect())
        .collect()
}
