//! Synthetic speech-commands style corpus for demos, tests and benchmarks.
//!
//! Each keyword is a pair of gliding tones at class-specific frequencies,
//! windowed into a burst at a random onset, with per-clip pitch jitter,
//! additive noise and ragged clip lengths.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::audio::write_wav;
use crate::error::{KwsError, Result};

pub const SAMPLE_RATE: u32 = 16000;

/// One synthetic utterance of keyword number `class`.
pub fn synth_clip<R: Rng + ?Sized>(class: usize, rng: &mut R) -> Vec<f64> {
    let sr = SAMPLE_RATE as f64;
    let len = rng.random_range(15000..16800);
    let jitter = 1.0 + rng.random_range(-0.04..0.04);
    let f1 = (300.0 + 170.0 * class as f64) * jitter;
    let f2 = (1200.0 + 380.0 * class as f64) * jitter;
    let glide = if class.is_multiple_of(2) { 0.25 } else { -0.2 };
    let onset = rng.random_range(0.05..0.3) * sr;
    let dur = rng.random_range(0.35..0.55) * sr;
    let gain = rng.random_range(0.3..0.7);
    let noise = rng.random_range(0.01..0.04);

    let mut phase1 = 0.0;
    let mut phase2 = 0.0;
    (0..len)
        .map(|n| {
            let t = n as f64;
            let pos = (t - onset) / dur;
            let env = if (0.0..1.0).contains(&pos) {
                0.5 - 0.5 * (2.0 * PI * pos).cos()
            } else {
                0.0
            };
            let sweep = 1.0 + glide * pos.clamp(0.0, 1.0);
            phase1 += 2.0 * PI * f1 * sweep / sr;
            phase2 += 2.0 * PI * f2 / sweep / sr;
            let voiced = 0.7 * phase1.sin() + 0.3 * phase2.sin();
            let hiss = noise * rng.random_range(-1.0..1.0);
            (gain * env * voiced + hiss).clamp(-1.0, 1.0)
        })
        .collect()
}

/// Writes `<root>/<keyword>/<id>_nohash_<n>.wav` for each keyword.
pub fn write_synthetic_corpus(root: impl AsRef<Path>, keywords: &[String], per_class: usize, seed: u64) -> Result<()> {
    let root = root.as_ref();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (class, kw) in keywords.iter().enumerate() {
        let dir = root.join(kw);
        fs::create_dir_all(&dir).map_err(|e| KwsError::io(&dir, e))?;
        for n in 0..per_class {
            let speaker: u32 = rng.random();
            let samples = synth_clip(class, &mut rng);
            write_wav(dir.join(format!("{speaker:08x}_nohash_{n}.wav")), &samples, SAMPLE_RATE)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clips_are_bounded_and_ragged() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = synth_clip(0, &mut rng);
        let b = synth_clip(3, &mut rng);
        assert!(a.iter().chain(&b).all(|x| (-1.0..=1.0).contains(x)));
        assert!((15000..16800).contains(&a.len()));
        assert_ne!(a.len(), b.len());
    }
}
