use rustfft::{num_complex::Complex64, FftPlanner};

use super::{hann, AudioBuffer};

/// Log-mel front end used as the black-box fitness feature.
#[derive(Debug, Clone, PartialEq)]
pub struct MelConfig {
    pub bands: usize,
    pub fft_size: usize,
    pub hop: usize,
    pub log_floor: f64,
    pub f_min: f64,
    /// Upper band edge; `None` means Nyquist.
    pub f_max: Option<f64>,
}

impl Default for MelConfig {
    fn default() -> Self {
        Self {
            bands: 64,
            fft_size: 1024,
            hop: 256,
            log_floor: 1e-10,
            f_min: 0.0,
            f_max: None,
        }
    }
}

/// Frames x bands matrix of natural-log mel energies.
pub type MelSpectrogram = Vec<Vec<f64>>;

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular filters over the `fft_size / 2 + 1` power bins.
fn filterbank(config: &MelConfig, sample_rate: f64) -> Vec<Vec<f64>> {
    let bins = config.fft_size / 2 + 1;
    let f_max = config.f_max.unwrap_or(sample_rate / 2.0);
    let (m_lo, m_hi) = (hz_to_mel(config.f_min), hz_to_mel(f_max));
    let edges: Vec<f64> = (0..config.bands + 2)
        .map(|i| mel_to_hz(m_lo + (m_hi - m_lo) * i as f64 / (config.bands + 1) as f64))
        .collect();
    let bin_hz = sample_rate / config.fft_size as f64;
    (0..config.bands)
        .map(|b| {
            let (lo, mid, hi) = (edges[b], edges[b + 1], edges[b + 2]);
            (0..bins)
                .map(|k| {
                    let f = k as f64 * bin_hz;
                    if f <= lo || f >= hi {
                        0.0
                    } else if f <= mid {
                        (f - lo) / (mid - lo)
                    } else {
                        (hi - f) / (hi - mid)
                    }
                })
                .collect()
        })
        .collect()
}

/// Hann-windowed STFT power mapped through a mel filterbank, log-compressed.
///
/// Frames start at multiples of `hop` and are zero-padded past the end of the
/// signal; a signal shorter than one FFT yields a single frame.
pub fn mel_spectrogram(signal: &AudioBuffer, config: &MelConfig) -> MelSpectrogram {
    let n = config.fft_size;
    let fb = filterbank(config, signal.sample_rate());
    let window = hann(n);
    let fft = FftPlanner::new().plan_fft_forward(n);
    let frames = if signal.len() <= n {
        1
    } else {
        1 + (signal.len() - n).div_ceil(config.hop)
    };
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    (0..frames)
        .map(|f| {
            let seg = signal.segment(f * config.hop, n);
            for ((b, x), w) in buf.iter_mut().zip(&seg).zip(&window) {
                *b = Complex64::new(x * w, 0.0);
            }
            fft.process(&mut buf);
            let power: Vec<f64> = buf[..n / 2 + 1].iter().map(|c| c.norm_sqr()).collect();
            fb.iter()
                .map(|filt| {
                    let e: f64 = filt.iter().zip(&power).map(|(w, p)| w * p).sum();
                    e.max(config.log_floor).ln()
                })
                .collect()
        })
        .collect()
}

/// Mean squared difference over the frames both spectrograms share.
pub fn mel_mse(a: &MelSpectrogram, b: &MelSpectrogram) -> f64 {
    let frames = a.len().min(b.len());
    let mut sum = 0.0;
    let mut count = 0usize;
    for (fa, fb) in a.iter().zip(b).take(frames) {
        for (x, y) in fa.iter().zip(fb) {
            sum += (x - y).powi(2);
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn noise(len: usize, seed: u64) -> AudioBuffer {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        AudioBuffer::new(
            (0..len).map(|_| rng.random_range(-1.0..1.0)).collect(),
            48000.0,
        )
        .unwrap()
    }

    #[test]
    fn identical_signals_have_zero_distance() {
        let x = noise(4000, 1);
        let cfg = MelConfig::default();
        let (a, b) = (mel_spectrogram(&x, &cfg), mel_spectrogram(&x, &cfg));
        assert_eq!(mel_mse(&a, &b), 0.0);
    }

    #[test]
    fn silence_differs_from_noise() {
        let cfg = MelConfig::default();
        let a = mel_spectrogram(&noise(4000, 2), &cfg);
        let b = mel_spectrogram(&AudioBuffer::silence(4000, 48000.0), &cfg);
        assert!(mel_mse(&a, &b) > 0.0);
    }

    #[test]
    fn doubling_amplitude_adds_log_four() {
        let x = noise(3000, 4);
        let doubled =
            AudioBuffer::new(x.samples().iter().map(|v| 2.0 * v).collect(), 48000.0).unwrap();
        let cfg = MelConfig::default();
        let (a, b) = (mel_spectrogram(&x, &cfg), mel_spectrogram(&doubled, &cfg));
        let offset = 2.0 * 2f64.ln();
        for (fa, fb) in a.iter().zip(&b) {
            for (ea, eb) in fa.iter().zip(fb) {
                if *ea > cfg.log_floor.ln() + 1.0 {
                    assert!((eb - ea - offset).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn frame_count() {
        let cfg = MelConfig::default();
        assert_eq!(mel_spectrogram(&noise(100, 5), &cfg).len(), 1);
        assert_eq!(mel_spectrogram(&noise(1024 + 256, 5), &cfg).len(), 2);
        assert_eq!(mel_spectrogram(&noise(1024 + 257, 5), &cfg)[0].len(), 64);
    }
}
