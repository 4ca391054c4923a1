use rustfft::{num_complex::Complex64, FftPlanner};

use crate::error::{Error, Result};

/// Analysis FFT size used for harmonic measurements at 48 kHz (~11.7 Hz bins).
pub const DEFAULT_FFT_SIZE: usize = 4096;

/// Magnitudes sampled on a strictly increasing frequency axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    magnitudes: Vec<f64>,
    frequencies: Vec<f64>,
}

impl Spectrum {
    pub fn new(magnitudes: Vec<f64>, frequencies: Vec<f64>) -> Result<Self> {
        if magnitudes.len() != frequencies.len() {
            return Err(Error::InvalidInput(format!(
                "{} magnitudes for {} frequencies",
                magnitudes.len(),
                frequencies.len()
            )));
        }
        if frequencies.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput(
                "frequencies must be strictly increasing".into(),
            ));
        }
        if magnitudes.iter().any(|m| !(*m >= 0.0) || !m.is_finite()) {
            return Err(Error::InvalidInput(
                "magnitudes must be finite and non-negative".into(),
            ));
        }
        Ok(Self {
            magnitudes,
            frequencies,
        })
    }

    pub fn magnitudes(&self) -> &[f64] {
        &self.magnitudes
    }

    /// Bin frequencies. Units are whatever the producer used: Hz for FFT
    /// spectra, radians per sample for responses on a [`crate::FrequencyGrid`].
    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn len(&self) -> usize {
        self.magnitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.magnitudes.is_empty()
    }

    /// Scales every magnitude by `gain`.
    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            magnitudes: self.magnitudes.iter().map(|m| m * gain).collect(),
            frequencies: self.frequencies.clone(),
        }
    }
}

/// One-sided FFT magnitude spectrum of `frame`, zero-padded to `fft_size`.
///
/// Returns `fft_size / 2 + 1` bins from DC to Nyquist. No window is applied.
pub fn magnitude_spectrum(frame: &[f64], sample_rate: f64, fft_size: usize) -> Result<Spectrum> {
    if !fft_size.is_power_of_two() || fft_size < frame.len() {
        return Err(Error::InvalidInput(format!(
            "fft size {fft_size} must be a power of two no shorter than the frame ({})",
            frame.len()
        )));
    }
    let mut buf: Vec<Complex64> = frame
        .iter()
        .map(|&x| Complex64::new(x, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(fft_size)
        .collect();
    FftPlanner::new()
        .plan_fft_forward(fft_size)
        .process(&mut buf);
    let bins = fft_size / 2 + 1;
    let df = sample_rate / fft_size as f64;
    Spectrum::new(
        buf[..bins].iter().map(|c| c.norm()).collect(),
        (0..bins).map(|k| k as f64 * df).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn cosine_on_bin_is_one_dominant_bin() {
        let n = 256;
        let x: Vec<f64> = (0..n)
            .map(|i| (2.0 * PI * 10.0 * i as f64 / n as f64).cos())
            .collect();
        let s = magnitude_spectrum(&x, 48000.0, n).unwrap();
        let (imax, &max) = s
            .magnitudes()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        assert_eq!(imax, 10);
        assert!(s
            .magnitudes()
            .iter()
            .enumerate()
            .all(|(i, &m)| i == 10 || m < 1e-9 * max));
    }

    #[test]
    fn zero_frame_is_zero() {
        let s = magnitude_spectrum(&[0.0; 100], 48000.0, 128).unwrap();
        assert!(s.magnitudes().iter().all(|&m| m == 0.0));
        assert_eq!(s.len(), 65);
        assert_eq!(*s.frequencies().last().unwrap(), 24000.0);
    }

    #[test]
    fn parseval() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let x: Vec<f64> = (0..300).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = 512;
        let s = magnitude_spectrum(&x, 1.0, n).unwrap();
        let m = s.magnitudes();
        // interior bins stand for two conjugate bins of the full spectrum
        let spectral: f64 =
            m[0].powi(2) + m[n / 2].powi(2) + 2.0 * m[1..n / 2].iter().map(|v| v * v).sum::<f64>();
        let temporal: f64 = x.iter().map(|v| v * v).sum();
        assert!((spectral / n as f64 - temporal).abs() <= 1e-6 * temporal);
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(magnitude_spectrum(&[0.0; 10], 1.0, 12).is_err());
        assert!(magnitude_spectrum(&[0.0; 10], 1.0, 8).is_err());
    }
}
