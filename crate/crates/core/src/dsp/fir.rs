use std::f64::consts::PI;

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

fn blackman(t: f64) -> f64 {
    // t in [-1, 1]
    0.42 + 0.5 * (PI * t).cos() + 0.08 * (2.0 * PI * t).cos()
}

/// Blackman-windowed sinc lowpass with `2 * half_width + 1` taps and unit DC
/// gain. `cutoff` is in cycles per sample, below 0.5.
pub fn lowpass_taps(cutoff: f64, half_width: usize) -> Vec<f64> {
    let h = half_width as f64;
    let mut taps: Vec<f64> = (0..=2 * half_width)
        .map(|i| {
            let n = i as f64 - h;
            let w = if half_width == 0 {
                1.0
            } else {
                blackman(n / (h + 1.0))
            };
            2.0 * cutoff * sinc(2.0 * cutoff * n) * w
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

/// Zero-phase lowpass: the symmetric kernel is centred on each output sample
/// and the signal is treated as zero outside its bounds.
pub fn lowpass(x: &[f64], cutoff_hz: f64, sample_rate: f64, half_width: usize) -> Vec<f64> {
    let taps = lowpass_taps((cutoff_hz / sample_rate).min(0.5), half_width);
    let n = x.len() as isize;
    let hw = half_width as isize;
    (0..n)
        .map(|i| {
            taps.iter()
                .enumerate()
                .filter_map(|(j, t)| {
                    let k = i + j as isize - hw;
                    (0..n).contains(&k).then(|| t * x[k as usize])
                })
                .sum()
        })
        .collect()
}

/// Zeros on each side of the resampling kernel, at the narrower of the two
/// rates.
pub const RESAMPLE_HALF_ZEROS: usize = 32;

/// Band-limited resampling by direct windowed-sinc interpolation.
///
/// Output sample `n` sits at input time `n * from / to`; the kernel cutoff is
/// the lower Nyquist of the two rates. Output length is
/// `round(len * to / from)`.
pub fn resample(x: &[f64], from_hz: f64, to_hz: f64) -> Vec<f64> {
    if from_hz == to_hz || x.is_empty() {
        return x.to_vec();
    }
    let ratio = to_hz / from_hz;
    let out_len = (x.len() as f64 * ratio).round() as usize;
    // kernel stretched when decimating so it also acts as the anti-alias filter
    let scale = ratio.min(1.0);
    let half = RESAMPLE_HALF_ZEROS as f64 / scale;
    (0..out_len)
        .map(|n| {
            let t = n as f64 / ratio;
            let lo = (t - half).ceil().max(0.0) as usize;
            let hi = ((t + half).floor() as usize).min(x.len() - 1);
            (lo..=hi)
                .map(|k| {
                    let d = t - k as f64;
                    x[k] * scale * sinc(scale * d) * blackman(d / (half + 1.0))
                })
                .sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(hz: f64, len: usize) -> Vec<f64> {
        (0..len)
            .map(|i| (2.0 * PI * hz * i as f64 / 48000.0).sin())
            .collect()
    }

    fn rms(x: &[f64]) -> f64 {
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }

    #[test]
    fn taps_are_symmetric_with_unit_dc_gain() {
        let t = lowpass_taps(0.05, 32);
        assert_eq!(t.len(), 65);
        for i in 0..t.len() {
            assert!((t[i] - t[t.len() - 1 - i]).abs() < 1e-15);
        }
        assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn passes_low_and_stops_high_tones() {
        let low = tone(200.0, 4800);
        let high = tone(4000.0, 4800);
        let core = 200..4600;
        let yl = lowpass(&low, 1000.0, 48000.0, 128);
        let yh = lowpass(&high, 1000.0, 48000.0, 128);
        assert!((rms(&yl[core.clone()]) / rms(&low[core.clone()]) - 1.0).abs() < 0.01);
        assert!(rms(&yh[core.clone()]) / rms(&high[core]) < 1e-3);
        // zero phase: the passband tone is not delayed
        for i in 1000..1010 {
            assert!((yl[i] - low[i]).abs() < 0.01);
        }
    }

    fn tone_at(hz: f64, fs: f64, len: usize) -> Vec<f64> {
        (0..len)
            .map(|i| (2.0 * PI * hz * i as f64 / fs).sin())
            .collect()
    }

    #[test]
    fn resampling_keeps_duration_and_tones() {
        for (from, to) in [(44100.0, 48000.0), (16000.0, 48000.0), (96000.0, 48000.0)] {
            let len = from as usize / 10;
            let y = resample(&tone_at(440.0, from, len), from, to);
            let expected = len as f64 * to / from;
            assert!((y.len() as f64 - expected).abs() <= 1.0);
            let reference = tone_at(440.0, to, y.len());
            let core = 200..y.len() - 200;
            let err = y[core.clone()]
                .iter()
                .zip(&reference[core])
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-3, "{from}->{to}: {err}");
        }
    }

    #[test]
    fn decimation_removes_content_above_the_new_nyquist() {
        let y = resample(&tone_at(30000.0, 96000.0, 9600), 96000.0, 48000.0);
        assert!(rms(&y[200..4600]) < 1e-3);
    }

    #[test]
    fn same_rate_is_identity() {
        let x = vec![0.1, -0.2, 0.3];
        assert_eq!(resample(&x, 48000.0, 48000.0), x);
    }
}
