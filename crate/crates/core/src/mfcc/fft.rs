//! Iterative radix-2 Cooley-Tukey FFT.

use std::f64::consts::PI;

use num_complex::Complex64;

/// Precomputed bit-reversal table and twiddles for one power-of-two size.
#[derive(Debug, Clone)]
pub struct Radix2Fft {
    size: usize,
    reversed: Vec<usize>,
    twiddles: Vec<Complex64>,
}

impl Radix2Fft {
    /// # Panics
    /// If `size` is not a power of two.
    pub fn new(size: usize) -> Self {
        assert!(size.is_power_of_two(), "FFT size {size} is not a power of two");
        let bits = size.trailing_zeros();
        let reversed = (0..size)
            .map(|i| {
                if bits == 0 {
                    0
                } else {
                    i.reverse_bits() >> (usize::BITS - bits)
                }
            })
            .collect();
        let twiddles = (0..size / 2)
            .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / size as f64))
            .collect();
        Radix2Fft {
            size,
            reversed,
            twiddles,
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Forward transform, `X[k] = Σ x[n]·e^{-2πikn/N}`, in place.
    pub fn process(&self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.size);
        for i in 0..self.size {
            let j = self.reversed[i];
            if i < j {
                buf.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= self.size {
            let half = len / 2;
            let stride = self.size / len;
            for start in (0..self.size).step_by(len) {
                for k in 0..half {
                    let t = self.twiddles[k * stride] * buf[start + k + half];
                    let u = buf[start + k];
                    buf[start + k] = u + t;
                    buf[start + k + half] = u - t;
                }
            }
            len <<= 1;
        }
    }

    /// Zero-pads `frame` to the transform size and returns `|X[k]|² / N` for `k = 0..=N/2`.
    pub fn power_spectrum(&self, frame: &[f64]) -> Vec<f64> {
        assert!(
            frame.len() <= self.size,
            "frame of {} samples exceeds FFT size {}",
            frame.len(),
            self.size
        );
        let mut buf = vec![Complex64::new(0.0, 0.0); self.size];
        for (b, &x) in buf.iter_mut().zip(frame) {
            b.re = x;
        }
        self.process(&mut buf);
        let n = self.size as f64;
        buf[..=self.size / 2].iter().map(|c| c.norm_sqr() / n).collect()
    }
}

/// One-shot power spectrum. Builds a fresh plan, so prefer [`Radix2Fft`] in loops.
pub fn power_spectrum(frame: &[f64], fft_size: usize) -> Vec<f64> {
    Radix2Fft::new(fft_size).power_spectrum(frame)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn impulse_has_flat_spectrum() {
        assert_eq!(power_spectrum(&[1.0, 0.0, 0.0, 0.0], 4), vec![0.25, 0.25, 0.25]);
    }

    #[test]
    fn zeros_give_zero_spectrum() {
        assert!(power_spectrum(&[0.0; 10], 16).iter().all(|&p| p == 0.0));
    }

    #[test]
    fn size_one_is_identity() {
        let fft = Radix2Fft::new(1);
        let mut buf = [Complex64::new(3.0, -1.0)];
        fft.process(&mut buf);
        assert_eq!(buf[0], Complex64::new(3.0, -1.0));
    }

    #[test]
    fn dc_signal_lands_in_bin_zero() {
        let p = power_spectrum(&[1.0; 8], 8);
        assert!((p[0] - 8.0).abs() < 1e-12);
        assert!(p[1..].iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    #[should_panic]
    fn rejects_non_power_of_two() {
        Radix2Fft::new(12);
    }
}
