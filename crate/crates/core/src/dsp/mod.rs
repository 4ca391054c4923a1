//! Signal-processing primitives shared by the analysis and synthesis stages.

mod filter;
mod fir;
mod lpc;
mod mel;
mod smoothing;
mod spectrum;

pub use filter::{filter_magnitude, inverse_filter, AllPoleFilter, MAGNITUDE_FLOOR};
pub use fir::{lowpass, lowpass_taps, resample, RESAMPLE_HALF_ZEROS};
pub use lpc::{autocorrelation, levinson_durbin, lpc};
pub use mel::{mel_mse, mel_spectrogram, MelConfig, MelSpectrogram};
pub use smoothing::{savitzky_golay, SmoothStatus, Smoothed};
pub use spectrum::{magnitude_spectrum, Spectrum, DEFAULT_FFT_SIZE};

use crate::error::{Error, Result};

/// Mono audio with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    sample_rate: f64,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: f64) -> Result<Self> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite sample at index {i}"
            )));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn silence(len: usize, sample_rate: f64) -> Self {
        Self::new(vec![0.0; len], sample_rate).expect("valid sample rate")
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [f64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Scales so that the absolute peak equals `target`. Silent buffers are left alone.
    pub fn normalize_peak(&mut self, target: f64) {
        let peak = self.peak();
        if peak > 0.0 {
            let g = target / peak;
            self.samples.iter_mut().for_each(|x| *x *= g);
        }
    }

    /// Copies `len` samples starting at `start`, zero-padding past the end.
    pub fn segment(&self, start: usize, len: usize) -> Vec<f64> {
        (start..start + len)
            .map(|i| self.samples.get(i).copied().unwrap_or(0.0))
            .collect()
    }
}

/// Symmetric Hann window of length `n`.
pub fn hann(n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![1.0; n];
    }
    let denom = (n - 1) as f64;
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / denom).cos())
        .collect()
}

/// Elementwise product with a Hann window of the same length.
pub fn apply_hann(frame: &[f64]) -> Vec<f64> {
    frame
        .iter()
        .zip(hann(frame.len()))
        .map(|(x, w)| x * w)
        .collect()
}

pub fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}
