//! Glottal-flow-model iterative adaptive inverse filtering.
//!
//! A frame `s = G V L` is split into a third-order glottal model `G`, a tract
//! filter `V` and the glottal flow derivative. Lip radiation `L` is undone by
//! a leaky integrator before any fitting.

use crate::dsp::{
    apply_hann, autocorrelation, levinson_durbin, AllPoleFilter, AudioBuffer, Spectrum,
    MAGNITUDE_FLOOR,
};
use crate::error::{Error, Result};
use crate::transfer::FrequencyGrid;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const DEFAULT_TRACT_ORDER: usize = 50;
pub const GLOTTAL_ORDER: usize = 3;
/// Pole of the leaky integrator that cancels lip radiation.
pub const LEAK: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IaifConfig {
    pub tract_order: usize,
    /// Bandwidth in Hz of a Gaussian lag window on every autocorrelation;
    /// zero disables it. The window widens each pole so the high-order tract
    /// fit cannot lock onto single low harmonics.
    pub lag_window_hz: f64,
}

impl Default for IaifConfig {
    fn default() -> Self {
        Self {
            tract_order: DEFAULT_TRACT_ORDER,
            lag_window_hz: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IaifResult {
    pub tract_filter: AllPoleFilter,
    pub glottal_filter: AllPoleFilter,
    /// Source estimate: the unwindowed frame inverse-filtered by `tract_filter`.
    pub gfd: AudioBuffer,
}

fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Fits `order` LPC to the Hann-windowed part of `x` that follows the
/// pre-frame.
fn fit_lpc(x: &[f64], skip: usize, order: usize, lag_bw: f64, fs: f64) -> Result<AllPoleFilter> {
    let w = apply_hann(&x[skip..]);
    let mut r = autocorrelation(&w, order);
    if r[0] <= 0.0 {
        return Err(Error::SilentFrame);
    }
    if lag_bw > 0.0 {
        for (i, v) in r.iter_mut().enumerate() {
            let a = 2.0 * PI * lag_bw * i as f64 / fs;
            *v *= (-0.5 * a * a).exp();
        }
    }
    let (a, _) = levinson_durbin(&r, order)?;
    AllPoleFilter::new(a)
}

pub fn gfm_iaif(frame: &AudioBuffer, tract_order: usize) -> Result<IaifResult> {
    gfm_iaif_with(
        frame,
        &IaifConfig {
            tract_order,
            ..IaifConfig::default()
        },
    )
}

pub fn gfm_iaif_with(frame: &AudioBuffer, cfg: &IaifConfig) -> Result<IaifResult> {
    let tract_order = cfg.tract_order;
    let s = frame.samples();
    if tract_order == 0 || s.len() < 4 * tract_order {
        return Err(Error::InvalidInput(format!(
            "frame of {} samples too short for tract order {tract_order}",
            s.len()
        )));
    }
    if s.iter().all(|x| *x == 0.0) {
        return Err(Error::SilentFrame);
    }

    // a ramp ahead of the frame keeps the filters from starting on a step
    let pre = tract_order + 1;
    let mut x: Vec<f64> = (0..pre)
        .map(|i| -s[0] + 2.0 * s[0] * i as f64 / (pre - 1) as f64)
        .collect();
    x.extend_from_slice(s);
    let x_gv = AllPoleFilter::new(vec![1.0, -LEAK])?.apply(&x);
    let fit =
        |x: &[f64], order: usize| fit_lpc(x, pre, order, cfg.lag_window_hz, frame.sample_rate());

    let mut gross_glottis = fit(&x_gv, 1)?;
    for _ in 1..GLOTTAL_ORDER {
        let residual = gross_glottis.inverse(&x_gv);
        let next = fit(&residual, 1)?;
        gross_glottis =
            AllPoleFilter::new(convolve(gross_glottis.coefficients(), next.coefficients()))?;
    }
    let gross_tract = fit(&gross_glottis.inverse(&x_gv), tract_order)?;
    let glottal_filter = fit(&gross_tract.inverse(&x_gv), GLOTTAL_ORDER)?;
    let tract = fit(&glottal_filter.inverse(&x_gv), tract_order)?;
    let tract_filter = if tract.is_minimum_phase() {
        tract
    } else {
        tract.stabilized()
    };
    let gfd = AudioBuffer::new(tract_filter.inverse(s), frame.sample_rate())?;
    Ok(IaifResult {
        tract_filter,
        glottal_filter,
        gfd,
    })
}

/// `|V|` sampled on a grid of `num_freqs` points.
pub fn tract_response_from_iaif(result: &IaifResult, num_freqs: usize) -> Result<Spectrum> {
    let grid = FrequencyGrid::new(num_freqs)?;
    tract_response_on(&result.tract_filter, &grid)
}

/// Target for fitting the tube model: `|V|` times the magnitude of the
/// `1 + z^-1` factor the tube response carries from summing sample pairs. The
/// glottal model absorbs that factor as spectral tilt, so `V` alone lacks it.
pub fn kl_target_from_iaif(result: &IaifResult, grid: &FrequencyGrid) -> Result<Spectrum> {
    let v = tract_response_on(&result.tract_filter, grid)?;
    let factor = SUMMING_FACTOR_POWER;
    Spectrum::new(
        v.magnitudes()
            .iter()
            .zip(grid.omegas())
            .map(|(m, w)| (m * (2.0 * (w / 2.0).cos()).powf(factor)).max(MAGNITUDE_FLOOR))
            .collect(),
        grid.omegas().to_vec(),
    )
}

const SUMMING_FACTOR_POWER: f64 = 1.0;

pub fn tract_response_on(filter: &AllPoleFilter, grid: &FrequencyGrid) -> Result<Spectrum> {
    Spectrum::new(
        grid.omegas().iter().map(|w| filter.magnitude(*w)).collect(),
        grid.omegas().to_vec(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::filter_magnitude;
    use crate::estimation::gd::{fit_controls_gd_multistart, GdSettings};
    use crate::glottal::{synthesize_gfd, GlottalParams};
    use crate::tract::{kl_synthesize, SimulationConfig, TractControls};
    use crate::transfer::{controls_response, response_mae_db, LossConfig};

    fn vowel(controls: &TractControls, f0: f64, tense: f64) -> (AudioBuffer, AudioBuffer) {
        let gfd = synthesize_gfd(GlottalParams::new(f0, tense).unwrap(), 9600, 48000.0, 1);
        let cfg = SimulationConfig::default();
        let speech = kl_synthesize(&gfd, std::slice::from_ref(controls), 9600, &cfg).unwrap();
        (gfd, speech)
    }

    fn centre_frame(x: &AudioBuffer) -> AudioBuffer {
        AudioBuffer::new(x.segment(x.len() / 2, 1920), x.sample_rate()).unwrap()
    }

    #[test]
    fn identity_and_one_pole_responses() {
        let flat = IaifResult {
            tract_filter: AllPoleFilter::identity(),
            glottal_filter: AllPoleFilter::identity(),
            gfd: AudioBuffer::silence(4, 48000.0),
        };
        let s = tract_response_from_iaif(&flat, 8).unwrap();
        assert!(s.magnitudes().iter().all(|m| *m == 1.0));
        let s = tract_response_from_iaif(&flat, 4).unwrap();
        assert_eq!(s.len(), 4);
        let one_pole = AllPoleFilter::new(vec![1.0, -0.9]).unwrap();
        let r = IaifResult {
            tract_filter: one_pole.clone(),
            ..flat
        };
        let s = tract_response_from_iaif(&r, 16).unwrap();
        for (m, w) in s.magnitudes().iter().zip(s.frequencies()) {
            assert_eq!(*m, filter_magnitude(&one_pole, *w));
        }
    }

    #[test]
    fn recovers_a_synthetic_tract() {
        let controls = TractControls::new(16.0, 2.6, vec![]).unwrap();
        let (_, speech) = vowel(&controls, 120.0, 0.7);
        let res = gfm_iaif(&centre_frame(&speech), DEFAULT_TRACT_ORDER).unwrap();
        assert_eq!(res.glottal_filter.order(), GLOTTAL_ORDER);
        assert!(res.tract_filter.is_minimum_phase());

        // the recovered response is judged through the tube fitted to it,
        // which is how it enters every downstream comparison
        let loss = LossConfig {
            gain_invariant: true,
            ..LossConfig::default()
        };
        let target = kl_target_from_iaif(&res, &loss.grid).unwrap();
        let fit = fit_controls_gd_multistart(&target, &GdSettings::default(), None, &loss).unwrap();
        let sim = SimulationConfig::default();
        let truth = controls_response(&controls, &loss.grid, &sim);
        let fitted = controls_response(&fit.controls, &loss.grid, &sim);
        let err = response_mae_db(&truth, &fitted);
        assert!(err <= 3.0, "mean |dB error| {err}");
    }

    #[test]
    fn target_keeps_the_shape_of_the_tract_filter() {
        let controls = TractControls::new(22.0, 3.1, vec![]).unwrap();
        let (_, speech) = vowel(&controls, 150.0, 0.5);
        let res = gfm_iaif(&centre_frame(&speech), DEFAULT_TRACT_ORDER).unwrap();
        let grid = FrequencyGrid::new(64).unwrap();
        let v = tract_response_on(&res.tract_filter, &grid).unwrap();
        let t = kl_target_from_iaif(&res, &grid).unwrap();
        for ((a, b), w) in t.magnitudes().iter().zip(v.magnitudes()).zip(grid.omegas()) {
            let expected = (b * 2.0 * (w / 2.0).cos()).max(MAGNITUDE_FLOOR);
            assert!((a - expected).abs() <= 1e-12 * expected.max(1.0));
        }
    }

    #[test]
    fn refiltering_the_source_restores_the_frame() {
        let controls = TractControls::new(22.0, 3.1, vec![]).unwrap();
        let (_, speech) = vowel(&controls, 150.0, 0.5);
        let frame = centre_frame(&speech);
        let res = gfm_iaif(&frame, DEFAULT_TRACT_ORDER).unwrap();
        let back = res.tract_filter.apply(res.gfd.samples());
        let err: f64 = back
            .iter()
            .zip(frame.samples())
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        let energy: f64 = frame.samples().iter().map(|v| v * v).sum();
        assert!(err / energy < 1e-6);
    }

    #[test]
    fn deterministic_and_error_paths() {
        let controls = TractControls::midpoint(0);
        let (_, speech) = vowel(&controls, 100.0, 0.6);
        let frame = centre_frame(&speech);
        assert_eq!(gfm_iaif(&frame, 50).unwrap(), gfm_iaif(&frame, 50).unwrap());
        assert!(matches!(
            gfm_iaif(&AudioBuffer::silence(1920, 48000.0), 50),
            Err(Error::SilentFrame)
        ));
        let short = AudioBuffer::new(frame.samples()[..100].to_vec(), 48000.0).unwrap();
        assert!(gfm_iaif(&short, 50).is_err());
    }
}
