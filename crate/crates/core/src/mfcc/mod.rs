//! MFCC extraction: pre-emphasis, Hamming-windowed framing, power spectrum,
//! mel filterbank, log and orthonormal DCT-II.

mod fft;
pub mod io;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

pub use fft::{power_spectrum, Radix2Fft};

use crate::audio::AudioClip;
use crate::error::{KwsError, Result};

/// Floor applied to filterbank energies before the logarithm.
pub const LOG_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MfccConfig {
    pub window_length_s: f64,
    pub window_step_s: f64,
    pub pre_emphasis: f64,
    pub n_filters: usize,
    pub n_ceps: usize,
    pub fft_size: usize,
    pub sample_rate: u32,
}

impl Default for MfccConfig {
    /// 25 ms windows every 10 ms at 16 kHz, 26 filters, 13 coefficients.
    fn default() -> Self {
        MfccConfig {
            window_length_s: 0.025,
            window_step_s: 0.010,
            pre_emphasis: 0.97,
            n_filters: 26,
            n_ceps: 13,
            fft_size: 512,
            sample_rate: 16000,
        }
    }
}

impl MfccConfig {
    /// Window length in samples.
    pub fn frame_len(&self) -> usize {
        (self.window_length_s * self.sample_rate as f64).round() as usize
    }

    /// Window step (hop) in samples.
    pub fn frame_step(&self) -> usize {
        (self.window_step_s * self.sample_rate as f64).round() as usize
    }

    /// Same config with `fft_size` raised to the next power of two that holds one window.
    pub fn with_fitting_fft(mut self) -> Self {
        let needed = self.frame_len().max(1).next_power_of_two();
        if self.fft_size < needed || !self.fft_size.is_power_of_two() {
            self.fft_size = needed.max(self.fft_size.next_power_of_two());
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(KwsError::InvalidConfig(msg));
        if self.sample_rate == 0 {
            return bad("sample_rate must be positive".into());
        }
        if self.window_length_s.is_nan()
            || self.window_length_s <= 0.0
            || self.window_step_s.is_nan()
            || self.window_step_s <= 0.0
        {
            return bad("window length and step must be positive".into());
        }
        if self.frame_len() == 0 || self.frame_step() == 0 {
            return bad("window length and step must span at least one sample".into());
        }
        if !(0.0..1.0).contains(&self.pre_emphasis) {
            return bad(format!("pre_emphasis {} outside [0, 1)", self.pre_emphasis));
        }
        if !self.fft_size.is_power_of_two() {
            return bad(format!("fft_size {} is not a power of two", self.fft_size));
        }
        if self.fft_size < self.frame_len() {
            return bad(format!(
                "fft_size {} shorter than the {}-sample window",
                self.fft_size,
                self.frame_len()
            ));
        }
        if self.n_ceps == 0 || self.n_ceps > self.n_filters {
            return bad(format!("n_ceps {} must lie in 1..={}", self.n_ceps, self.n_filters));
        }
        Ok(())
    }
}

/// Cepstral coefficients stored row-major, one row per frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfccMatrix {
    pub frames: usize,
    pub coeffs_per_frame: usize,
    pub values: Vec<f64>,
    pub config: MfccConfig,
}

impl MfccMatrix {
    pub fn row(&self, frame: usize) -> &[f64] {
        let c = self.coeffs_per_frame;
        &self.values[frame * c..(frame + 1) * c]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.coeffs_per_frame.max(1))
    }
}

/// `1 + floor((n - len) / step)` full frames, or one padded frame when the signal is shorter than a window.
pub fn frame_count(n_samples: usize, frame_len: usize, frame_step: usize) -> usize {
    if n_samples < frame_len {
        1
    } else {
        1 + (n_samples - frame_len) / frame_step
    }
}

/// `y[0] = x[0]`, `y[n] = x[n] - alpha * x[n-1]`.
pub fn pre_emphasize(samples: &[f64], alpha: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(samples.len());
    if let Some(&first) = samples.first() {
        out.push(first);
    }
    out.extend(samples.windows(2).map(|w| w[1] - alpha * w[0]));
    out
}

/// Hamming window `0.54 - 0.46 cos(2πn / (L-1))`.
pub fn hamming(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    let denom = (len - 1) as f64;
    (0..len)
        .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / denom).cos())
        .collect()
}

/// Splits `samples` into Hamming-weighted frames of `config.frame_len()` samples.
pub fn frame_and_window(samples: &[f64], config: &MfccConfig) -> Vec<Vec<f64>> {
    let len = config.frame_len();
    let step = config.frame_step();
    let window = hamming(len);
    (0..frame_count(samples.len(), len, step))
        .map(|i| {
            let start = (i * step).min(samples.len());
            let end = (start + len).min(samples.len());
            let mut frame = vec![0.0; len];
            frame[..end - start].copy_from_slice(&samples[start..end]);
            for (x, w) in frame.iter_mut().zip(&window) {
                *x *= w;
            }
            frame
        })
        .collect()
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters with peaks equally spaced on the mel scale from 0 Hz to Nyquist.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    n_bins: usize,
    /// `n_filters × n_bins`, row-major.
    weights: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(n_filters: usize, sample_rate: u32, fft_size: usize) -> Self {
        let n_bins = fft_size / 2 + 1;
        let nyquist = sample_rate as f64 / 2.0;
        let top = hz_to_mel(nyquist);
        let edges: Vec<f64> = (0..n_filters + 2)
            .map(|i| mel_to_hz(top * i as f64 / (n_filters + 1) as f64))
            .collect();
        let bin_hz = sample_rate as f64 / fft_size as f64;

        let mut weights = vec![0.0; n_filters * n_bins];
        for j in 0..n_filters {
            let (lo, mid, hi) = (edges[j], edges[j + 1], edges[j + 2]);
            let row = &mut weights[j * n_bins..(j + 1) * n_bins];
            for (k, w) in row.iter_mut().enumerate() {
                let f = k as f64 * bin_hz;
                *w = if f > lo && f <= mid {
                    (f - lo) / (mid - lo)
                } else if f > mid && f < hi {
                    (hi - f) / (hi - mid)
                } else {
                    0.0
                };
            }
            // a filter narrower than one bin would otherwise be silent
            if row.iter().all(|&w| w == 0.0) {
                let k = ((mid / bin_hz).round() as usize).min(n_bins - 1);
                row[k] = 1.0;
            }
        }
        MelFilterbank { n_bins, weights }
    }

    pub fn n_filters(&self) -> usize {
        self.weights.len() / self.n_bins
    }

    pub fn filter(&self, j: usize) -> &[f64] {
        &self.weights[j * self.n_bins..(j + 1) * self.n_bins]
    }

    pub fn apply(&self, power: &[f64]) -> Vec<f64> {
        assert_eq!(power.len(), self.n_bins, "spectrum length mismatch");
        self.weights
            .chunks_exact(self.n_bins)
            .map(|f| f.iter().zip(power).map(|(w, p)| w * p).sum())
            .collect()
    }
}

pub fn mel_filterbank(power: &[f64], n_filters: usize, sample_rate: u32, fft_size: usize) -> Vec<f64> {
    MelFilterbank::new(n_filters, sample_rate, fft_size).apply(power)
}

/// Orthonormal DCT-II.
pub fn dct2(input: &[f64]) -> Vec<f64> {
    let n = input.len();
    let nf = n as f64;
    (0..n)
        .map(|k| {
            let scale = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
            let sum: f64 = input
                .iter()
                .enumerate()
                .map(|(i, &x)| x * (PI * k as f64 * (2 * i + 1) as f64 / (2.0 * nf)).cos())
                .sum();
            scale * sum
        })
        .collect()
}

/// Inverse of [`dct2`] (orthonormal DCT-III).
pub fn idct2(coeffs: &[f64]) -> Vec<f64> {
    let n = coeffs.len();
    let nf = n as f64;
    (0..n)
        .map(|i| {
            coeffs
                .iter()
                .enumerate()
                .map(|(k, &c)| {
                    let scale = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
                    scale * c * (PI * k as f64 * (2 * i + 1) as f64 / (2.0 * nf)).cos()
                })
                .sum()
        })
        .collect()
}

/// Natural log with a floor of [`LOG_FLOOR`], then DCT-II, truncated to `n_ceps`.
pub fn log_dct(energies: &[f64], n_ceps: usize) -> Vec<f64> {
    let logged: Vec<f64> = energies.iter().map(|&e| e.max(LOG_FLOOR).ln()).collect();
    let mut c = dct2(&logged);
    c.truncate(n_ceps);
    c
}

/// Reusable extractor holding the FFT plan, window and filterbank for one config.
#[derive(Debug, Clone)]
pub struct MfccExtractor {
    config: MfccConfig,
    fft: Radix2Fft,
    filterbank: MelFilterbank,
}

impl MfccExtractor {
    pub fn new(config: MfccConfig) -> Result<Self> {
        config.validate()?;
        Ok(MfccExtractor {
            fft: Radix2Fft::new(config.fft_size),
            filterbank: MelFilterbank::new(config.n_filters, config.sample_rate, config.fft_size),
            config,
        })
    }

    pub fn config(&self) -> &MfccConfig {
        &self.config
    }

    pub fn extract(&self, clip: &AudioClip) -> Result<MfccMatrix> {
        if clip.sample_rate != self.config.sample_rate {
            return Err(KwsError::InvalidConfig(format!(
                "clip `{}` is {} Hz but the MFCC config expects {} Hz",
                clip.source_id, clip.sample_rate, self.config.sample_rate
            )));
        }
        let emphasized = pre_emphasize(&clip.samples, self.config.pre_emphasis);
        let frames = frame_and_window(&emphasized, &self.config);
        let mut values = Vec::with_capacity(frames.len() * self.config.n_ceps);
        for frame in &frames {
            let power = self.fft.power_spectrum(frame);
            let energies = self.filterbank.apply(&power);
            values.extend(log_dct(&energies, self.config.n_ceps));
        }
        Ok(MfccMatrix {
            frames: frames.len(),
            coeffs_per_frame: self.config.n_ceps,
            values,
            config: self.config,
        })
    }
}

pub fn extract_mfcc(clip: &AudioClip, config: &MfccConfig) -> Result<MfccMatrix> {
    MfccExtractor::new(*config)?.extract(clip)
}
