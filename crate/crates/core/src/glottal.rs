//! Glottal source: LF-model flow derivative with aspiration noise, plus the
//! inverse direction (YIN F0 and H1-H2 tenseness estimation).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::dsp::{apply_hann, magnitude_spectrum, AudioBuffer, DEFAULT_FFT_SIZE};
use crate::error::{Error, Result};

/// Rd limits implied by clamping tenseness to `[0, 1]` (with a small positive floor).
pub const RD_MIN: f64 = 0.01;
pub const RD_MAX: f64 = 3.0;

/// Rd range over which the LF regression yields a valid pulse. Synthesis clamps into it.
pub const RD_MODEL_MIN: f64 = 0.25;
pub const RD_MODEL_MAX: f64 = 3.0;

pub const F0_MIN: f64 = 60.0;
pub const F0_MAX: f64 = 500.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlottalParams {
    f0: f64,
    tenseness: f64,
}

impl GlottalParams {
    /// Tenseness is clamped into `[0, 1]`; F0 must be positive.
    pub fn new(f0: f64, tenseness: f64) -> Result<Self> {
        if !(f0 > 0.0 && f0.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "f0 must be positive, got {f0}"
            )));
        }
        if !tenseness.is_finite() {
            return Err(Error::InvalidInput("tenseness must be finite".into()));
        }
        Ok(Self {
            f0,
            tenseness: tenseness.clamp(0.0, 1.0),
        })
    }

    pub fn f0(&self) -> f64 {
        self.f0
    }

    pub fn tenseness(&self) -> f64 {
        self.tenseness
    }

    pub fn rd(&self) -> f64 {
        rd_from_tenseness(self.tenseness)
    }
}

pub fn rd_from_tenseness(t: f64) -> f64 {
    3.0 * (1.0 - t)
}

pub fn tenseness_from_rd(rd: f64) -> f64 {
    (1.0 - rd / 3.0).clamp(0.0, 1.0)
}

/// Inverts the H1-H2 regression `H1 - H2 = -7.6 + 11.1 Rd` (dB), clamped to `[RD_MIN, RD_MAX]`.
pub fn rd_from_h1h2(h1h2_db: f64) -> f64 {
    ((h1h2_db + 7.6) / 11.1).clamp(RD_MIN, RD_MAX)
}

/// Aspiration scaling `1 - sqrt(T)`.
pub fn noise_factor(tenseness: f64) -> f64 {
    1.0 - tenseness.clamp(0.0, 1.0).sqrt()
}

/// One LF period on normalized time `[0, 1)`, with negative peak `-1` at `te`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LfShape {
    pub rd: f64,
    /// Instant of maximum flow.
    pub tp: f64,
    /// Glottal closure instant (main negative excursion).
    pub te: f64,
    /// Effective duration of the return phase.
    pub ta: f64,
    alpha: f64,
    epsilon: f64,
    omega: f64,
    e0: f64,
    shift: f64,
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 * (1.0 + mid.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Derives LF timing from Rd via the Ra/Rk/Rg regressions, then solves the
/// return-phase constant and the zero-net-flow growth rate by bisection.
pub fn lf_shape(rd: f64) -> Result<LfShape> {
    if !(RD_MIN..=RD_MAX).contains(&rd) {
        return Err(Error::RdOutOfRange(rd));
    }
    let ra = -0.01 + 0.048 * rd;
    let rk = 0.224 + 0.118 * rd;
    let rg_den = 0.11 * rd - ra * (0.5 + 1.2 * rk);
    if ra <= 0.0 || rg_den <= 0.0 {
        return Err(Error::RdOutOfRange(rd));
    }
    let rg = (rk / 4.0) * (0.5 + 1.2 * rk) / rg_den;
    let tp = 1.0 / (2.0 * rg);
    let te = tp * (1.0 + rk);
    let ta = ra;
    let tc = 1.0 - te;
    if !(te < 1.0 && ta < tc && rk < 1.0) {
        return Err(Error::RdOutOfRange(rd));
    }

    // epsilon * ta = 1 - exp(-epsilon * (1 - te))
    let g = |e: f64| e * ta - 1.0 + (-e * tc).exp();
    let epsilon = bisect(1e-9 / ta, 1.0 / ta, g);
    let shift = (-epsilon * tc).exp();
    let return_area = -((1.0 - shift) / epsilon - tc * shift) / (epsilon * ta);

    let omega = PI / tp;
    let s = (omega * te).sin();
    let c = (omega * te).cos();
    let open_area = |alpha: f64| {
        -((alpha * s - omega * c) + omega * (-alpha * te).exp())
            / ((alpha * alpha + omega * omega) * s)
    };
    let balance = |alpha: f64| open_area(alpha) + return_area;
    let (mut lo, mut hi) = (-10.0, 10.0);
    while balance(lo) <= 0.0 {
        lo *= 2.0;
        if lo < -1e4 {
            return Err(Error::RdOutOfRange(rd));
        }
    }
    while balance(hi) >= 0.0 {
        hi *= 2.0;
        if hi > 1e4 {
            return Err(Error::RdOutOfRange(rd));
        }
    }
    let alpha = bisect(lo, hi, balance);
    let e0 = -1.0 / (s * (alpha * te).exp());
    Ok(LfShape {
        rd,
        tp,
        te,
        ta,
        alpha,
        epsilon,
        omega,
        e0,
        shift,
    })
}

impl LfShape {
    /// Flow derivative at normalized time `t` in `[0, 1)`.
    pub fn value(&self, t: f64) -> f64 {
        if t <= self.te {
            self.e0 * (self.alpha * t).exp() * (self.omega * t).sin()
        } else {
            -((-self.epsilon * (t - self.te)).exp() - self.shift) / (self.epsilon * self.ta)
        }
    }

    /// `n` samples of one period.
    pub fn period(&self, n: usize) -> Vec<f64> {
        (0..n).map(|i| self.value(i as f64 / n as f64)).collect()
    }
}

/// Aspiration noise shaping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    /// Noise amplitude relative to the LF negative peak at `T = 0`.
    pub base_gain: f64,
    pub highpass_hz: f64,
    pub lowpass_hz: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            base_gain: 0.2,
            highpass_hz: 500.0,
            lowpass_hz: 8000.0,
        }
    }
}

/// Running LF source. The pulse shape is refreshed at each period boundary so
/// that F0 and tenseness may vary sample to sample.
pub struct GlottalSource {
    sample_rate: f64,
    noise: NoiseConfig,
    rng: ChaCha8Rng,
    phase: f64,
    shape: Option<(f64, LfShape)>,
    hp_a: f64,
    lp_a: f64,
    hp_prev_x: f64,
    hp_y: f64,
    lp_y: f64,
}

impl GlottalSource {
    pub fn new(sample_rate: f64, noise: NoiseConfig, seed: u64) -> Self {
        Self {
            sample_rate,
            noise,
            rng: ChaCha8Rng::seed_from_u64(seed),
            phase: 0.0,
            shape: None,
            hp_a: (-2.0 * PI * noise.highpass_hz / sample_rate).exp(),
            lp_a: 1.0 - (-2.0 * PI * noise.lowpass_hz / sample_rate).exp(),
            hp_prev_x: 0.0,
            hp_y: 0.0,
            lp_y: 0.0,
        }
    }

    fn shape_for(&mut self, tenseness: f64) -> LfShape {
        let rd = rd_from_tenseness(tenseness).clamp(RD_MODEL_MIN, RD_MODEL_MAX);
        match self.shape {
            Some((cached, shape)) if cached == rd => shape,
            _ => {
                let shape = lf_shape(rd).expect("rd clamped into the model range");
                self.shape = Some((rd, shape));
                shape
            }
        }
    }

    fn noise_sample(&mut self) -> f64 {
        let x: f64 = self.rng.random_range(-1.0..1.0);
        self.hp_y = self.hp_a * (self.hp_y + x - self.hp_prev_x);
        self.hp_prev_x = x;
        self.lp_y += self.lp_a * (self.hp_y - self.lp_y);
        self.lp_y
    }

    pub fn next_sample(&mut self, f0: f64, tenseness: f64) -> f64 {
        let shape = match self.shape {
            Some((_, s)) => s,
            None => self.shape_for(tenseness),
        };
        let pulse = shape.value(self.phase);
        let noise = self.noise_sample();
        self.phase += f0 / self.sample_rate;
        if self.phase >= 1.0 {
            self.phase -= self.phase.floor();
            self.shape_for(tenseness);
        }
        pulse + self.noise.base_gain * noise_factor(tenseness) * noise
    }
}

/// LF pulse train at constant F0 plus `(1 - sqrt(T))`-scaled aspiration noise.
pub fn synthesize_gfd(
    params: GlottalParams,
    duration_samples: usize,
    sample_rate: f64,
    noise_seed: u64,
) -> AudioBuffer {
    synthesize_gfd_with(
        params,
        duration_samples,
        sample_rate,
        noise_seed,
        NoiseConfig::default(),
    )
}

pub fn synthesize_gfd_with(
    params: GlottalParams,
    duration_samples: usize,
    sample_rate: f64,
    noise_seed: u64,
    noise: NoiseConfig,
) -> AudioBuffer {
    let mut src = GlottalSource::new(sample_rate, noise, noise_seed);
    let samples = (0..duration_samples)
        .map(|_| src.next_sample(params.f0, params.tenseness))
        .collect();
    AudioBuffer::new(samples, sample_rate).expect("finite synthesis")
}

/// YIN settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YinConfig {
    pub threshold: f64,
    /// When no dip falls below `threshold`, the global minimum is used if it
    /// lies below this ceiling; otherwise the frame is unvoiced.
    pub voicing_ceiling: f64,
    pub window_s: f64,
    pub f0_min: f64,
    pub f0_max: f64,
}

impl Default for YinConfig {
    fn default() -> Self {
        Self {
            threshold: 0.1,
            voicing_ceiling: 0.35,
            window_s: 0.025,
            f0_min: F0_MIN,
            f0_max: F0_MAX,
        }
    }
}

pub fn estimate_f0(signal: &AudioBuffer) -> Result<f64> {
    estimate_f0_with(signal, &YinConfig::default())
}

/// YIN: difference function, cumulative-mean normalization, absolute
/// threshold with a global-minimum fallback, then parabolic refinement on the raw difference function.
pub fn estimate_f0_with(signal: &AudioBuffer, cfg: &YinConfig) -> Result<f64> {
    let fs = signal.sample_rate();
    let x = signal.samples();
    let min_lag = (fs / cfg.f0_max).floor().max(2.0) as usize;
    let max_lag = (fs / cfg.f0_min).ceil() as usize;
    if x.len() < 2 * max_lag {
        return Err(Error::InvalidInput(format!(
            "{} samples cannot cover two periods at {} Hz",
            x.len(),
            cfg.f0_min
        )));
    }
    let window = ((cfg.window_s * fs) as usize).min(x.len() - max_lag - 1);

    let diff: Vec<f64> = (0..=max_lag + 1)
        .map(|tau| {
            x[..window]
                .iter()
                .zip(&x[tau..tau + window])
                .map(|(a, b)| (a - b).powi(2))
                .sum()
        })
        .collect();
    let mut cmnd = vec![1.0; diff.len()];
    let mut running = 0.0;
    for tau in 1..diff.len() {
        running += diff[tau];
        cmnd[tau] = if running > 0.0 {
            diff[tau] * tau as f64 / running
        } else {
            1.0
        };
    }

    let mut tau = match (min_lag..=max_lag).find(|&t| cmnd[t] < cfg.threshold) {
        Some(t) => t,
        None => {
            let t = (min_lag..=max_lag)
                .min_by(|a, b| cmnd[*a].total_cmp(&cmnd[*b]))
                .expect("non-empty lag range");
            if cmnd[t] >= cfg.voicing_ceiling {
                return Err(Error::Unvoiced);
            }
            t
        }
    };
    while tau < max_lag && cmnd[tau + 1] < cmnd[tau] {
        tau += 1;
    }

    let (a, b, c) = (diff[tau - 1], diff[tau], diff[tau + 1]);
    let denom = a - 2.0 * b + c;
    let shift = if denom > 0.0 {
        (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    Ok(fs / (tau as f64 + shift))
}

/// Parabolic peak refinement on dB values; returns the interpolated peak level.
fn interpolated_peak_db(db: &[f64], k: usize) -> f64 {
    if k == 0 || k + 1 >= db.len() {
        return db[k];
    }
    let (a, b, c) = (db[k - 1], db[k], db[k + 1]);
    let denom = a - 2.0 * b + c;
    if denom >= 0.0 {
        return b;
    }
    let p = 0.5 * (a - c) / denom;
    b - 0.25 * (a - c) * p
}

/// H1-H2 in dB of a voiced signal with known F0.
///
/// The whole buffer is Hann-windowed and zero-padded; each harmonic level is
/// the strongest local spectral maximum within `±f0/4` of the harmonic.
pub fn measure_h1h2(gfd: &AudioBuffer, f0: f64) -> Result<f64> {
    let fs = gfd.sample_rate();
    let fft_size = (4 * gfd.len()).next_power_of_two().max(DEFAULT_FFT_SIZE);
    let spec = magnitude_spectrum(&apply_hann(gfd.samples()), fs, fft_size)?;
    let db: Vec<f64> = spec
        .magnitudes()
        .iter()
        .map(|m| 20.0 * m.max(1e-300).log10())
        .collect();
    let df = fs / fft_size as f64;
    let peak = |centre: f64| -> Result<f64> {
        let lo = ((centre - f0 / 4.0) / df).ceil().max(1.0) as usize;
        let hi = (((centre + f0 / 4.0) / df).floor() as usize).min(db.len() - 2);
        (lo..=hi)
            .filter(|&k| db[k] > db[k - 1] && db[k] >= db[k + 1])
            .max_by(|&i, &j| db[i].total_cmp(&db[j]))
            .map(|k| interpolated_peak_db(&db, k))
            .ok_or(Error::HarmonicsNotFound)
    };
    Ok(peak(f0)? - peak(2.0 * f0)?)
}

/// Tenseness from H1-H2 via the Rd regression, clamped to `[0, 1]`.
pub fn estimate_tenseness(gfd: &AudioBuffer, f0: f64) -> Result<f64> {
    let h1h2 = measure_h1h2(gfd, f0)?;
    Ok(tenseness_from_rd(rd_from_h1h2(h1h2)))
}

/// Tenseness from a signal that still passes through a filter whose level at
/// `f0` exceeds its level at `2 f0` by `tilt_db`. The tilt is removed from
/// H1-H2 before mapping, which avoids inverse filtering the signal.
pub fn estimate_tenseness_through(signal: &AudioBuffer, f0: f64, tilt_db: f64) -> Result<f64> {
    let h1h2 = measure_h1h2(signal, f0)? - tilt_db;
    Ok(tenseness_from_rd(rd_from_h1h2(h1h2)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const FS: f64 = 48_000.0;

    #[test]
    fn tenseness_rd_mapping() {
        assert_eq!(rd_from_tenseness(1.0), 0.0);
        assert_eq!(rd_from_tenseness(0.0), 3.0);
        assert_abs_diff_eq!(rd_from_tenseness(2.0 / 3.0), 1.0, epsilon = 1e-15);
        for i in 0..=20 {
            let t = i as f64 / 20.0;
            assert_abs_diff_eq!(tenseness_from_rd(rd_from_tenseness(t)), t, epsilon = 1e-12);
        }
    }

    #[test]
    fn h1h2_regression() {
        assert_abs_diff_eq!(rd_from_h1h2(3.5), 1.0, epsilon = 1e-12);
        assert_eq!(rd_from_h1h2(-7.6), 0.01);
        assert_abs_diff_eq!(rd_from_h1h2(25.7), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn params_clamp_tenseness() {
        assert_eq!(GlottalParams::new(100.0, 1.4).unwrap().tenseness(), 1.0);
        assert_eq!(GlottalParams::new(100.0, -0.2).unwrap().tenseness(), 0.0);
        assert!(GlottalParams::new(0.0, 0.5).is_err());
    }

    #[test]
    fn lf_periods_integrate_to_zero() {
        for rd in [0.25, 0.5, 1.0, 1.5, 2.0, 2.7, 3.0] {
            let shape = lf_shape(rd).unwrap();
            assert!(shape.tp < shape.te && shape.te < 1.0 && shape.ta > 0.0);
            let n = 200_000;
            let p = shape.period(n);
            let integral: f64 = p.iter().sum::<f64>() / n as f64;
            let peak = p.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(integral.abs() < 1e-3 * peak, "rd {rd}: {integral}");
            assert_abs_diff_eq!(shape.value(shape.te), -1.0, epsilon = 1e-9);
            // the closure instant sits at or just after the deepest point
            let min = p.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!((-1.05..=-0.999).contains(&min), "rd {rd}: min {min}");
        }
    }

    #[test]
    fn lf_rejects_out_of_range() {
        assert!(matches!(lf_shape(0.01), Err(Error::RdOutOfRange(_))));
        assert!(matches!(lf_shape(3.5), Err(Error::RdOutOfRange(_))));
    }

    #[test]
    fn tense_source_has_no_noise() {
        let p = GlottalParams::new(120.0, 1.0).unwrap();
        let a = synthesize_gfd(p, 4000, FS, 1);
        let b = synthesize_gfd(p, 4000, FS, 2);
        assert_eq!(a, b);
        assert_eq!(noise_factor(0.25), 0.5);
        assert_eq!(noise_factor(1.0), 0.0);
    }

    #[test]
    fn periodic_at_f0() {
        let p = GlottalParams::new(120.0, 1.0).unwrap();
        let x = synthesize_gfd(p, 4800, FS, 0);
        let s = x.samples();
        let r = |lag: usize| (0..3000).map(|i| s[i] * s[i + lag]).sum::<f64>();
        assert!(r(400) >= 0.99 * r(0));
        assert!((330..470).filter(|&l| l != 400).all(|l| r(l) < r(400)));
    }

    #[test]
    fn yin_on_clean_source() {
        let p = GlottalParams::new(120.0, 1.0).unwrap();
        let f = estimate_f0(&synthesize_gfd(p, 9600, FS, 0)).unwrap();
        assert_abs_diff_eq!(f, 120.0, epsilon = 0.5);
    }

    #[test]
    fn yin_on_breathy_source() {
        let p = GlottalParams::new(200.0, 0.3).unwrap();
        let f = estimate_f0(&synthesize_gfd(p, 9600, FS, 5)).unwrap();
        assert_abs_diff_eq!(f, 200.0, epsilon = 2.0);
    }

    #[test]
    fn yin_rejects_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x: Vec<f64> = (0..9600).map(|_| rng.random_range(-1.0..1.0)).collect();
        let sig = AudioBuffer::new(x, FS).unwrap();
        assert!(matches!(estimate_f0(&sig), Err(Error::Unvoiced)));
    }

    #[test]
    fn tenseness_round_trip() {
        let p = GlottalParams::new(120.0, 0.6).unwrap();
        let gfd = synthesize_gfd(p, 9600, FS, 3);
        let t = estimate_tenseness(&gfd, 120.0).unwrap();
        assert_abs_diff_eq!(t, 0.6, epsilon = 0.05);
    }

    #[test]
    fn fully_tense_round_trip() {
        let p = GlottalParams::new(120.0, 1.0).unwrap();
        let gfd = synthesize_gfd(p, 9600, FS, 3);
        let t = estimate_tenseness(&gfd, 120.0).unwrap();
        assert!((0.9..=1.0).contains(&t), "{t}");
    }

    #[test]
    fn missing_harmonics() {
        let sig = AudioBuffer::silence(4800, FS);
        assert!(matches!(
            estimate_tenseness(&sig, 120.0),
            Err(Error::HarmonicsNotFound)
        ));
    }
}
