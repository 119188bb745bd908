//! Deterministic inputs shared by the benchmarks.

use kws_core::harness::synth::{synth_clip, SAMPLE_RATE};
use kws_core::tm::{LabeledLiterals, LiteralSet};
use kws_core::AudioClip;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One second of synthetic speech-like audio at 16 kHz.
pub fn clip(seed: u64) -> AudioClip {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = synth_clip(seed as usize % 4, &mut rng);
    samples.resize(SAMPLE_RATE as usize, 0.0);
    AudioClip::new(samples, SAMPLE_RATE)
}

pub fn frame(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// `rows` random Boolean inputs of width `features` with labels below `classes`.
pub fn literal_data(rows: usize, features: usize, classes: usize, seed: u64) -> LabeledLiterals {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inputs = Vec::with_capacity(rows);
    let mut labels = Vec::with_capacity(rows);
    for _ in 0..rows {
        let x: Vec<u8> = (0..features).map(|_| rng.random_range(0..=1)).collect();
        inputs.push(LiteralSet::from_features(&x.into()));
        labels.push(rng.random_range(0..classes));
    }
    LabeledLiterals::new(inputs, labels)
}
