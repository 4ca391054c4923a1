use super::area::AreaFunction;
use super::controls::TractControls;
use super::waveguide::{kl_synthesize_areas, SimulationConfig};
use crate::dsp::AudioBuffer;
use crate::error::{Error, Result};
use crate::glottal::{GlottalParams, GlottalSource, NoiseConfig};

pub const OUTPUT_PEAK: f64 = 0.9;

/// Glottal source track driven through the tube, without output scaling.
///
/// Both tracks hold one entry per frame; the signal spans `frames * hop`
/// samples and glottal parameters are interpolated linearly per sample.
pub fn synthesize_voice_raw(
    glottal: &[GlottalParams],
    controls: &[TractControls],
    hop: usize,
    config: &SimulationConfig,
    noise: NoiseConfig,
    seed: u64,
) -> Result<AudioBuffer> {
    synthesize(glottal, controls, None, hop, config, noise, seed)
}

fn synthesize(
    glottal: &[GlottalParams],
    controls: &[TractControls],
    gains: Option<&[f64]>,
    hop: usize,
    config: &SimulationConfig,
    noise: NoiseConfig,
    seed: u64,
) -> Result<AudioBuffer> {
    if let Some(g) = gains {
        if g.len() != glottal.len() {
            return Err(Error::InvalidInput(format!(
                "{} gains for {} frames",
                g.len(),
                glottal.len()
            )));
        }
    }
    if glottal.is_empty() || glottal.len() != controls.len() {
        return Err(Error::InvalidInput(format!(
            "track lengths differ or are empty: {} glottal, {} tract",
            glottal.len(),
            controls.len()
        )));
    }
    if hop == 0 {
        return Err(Error::InvalidInput("hop must be positive".into()));
    }
    let mut src = GlottalSource::new(config.sample_rate, noise, seed);
    let len = glottal.len() * hop;
    let last = glottal.len() - 1;
    let samples: Vec<f64> = (0..len)
        .map(|i| {
            let f = i / hop;
            let (a, b) = (glottal[f], glottal[(f + 1).min(last)]);
            let t = (i % hop) as f64 / hop as f64;
            let f0 = a.f0() + (b.f0() - a.f0()) * t;
            let tense = a.tenseness() + (b.tenseness() - a.tenseness()) * t;
            let gain = gains.map_or(1.0, |g| g[f] + (g[(f + 1).min(last)] - g[f]) * t);
            gain * src.next_sample(f0, tense)
        })
        .collect();
    let source = AudioBuffer::new(samples, config.sample_rate)?;
    let frames: Vec<AreaFunction> = controls.iter().map(AreaFunction::from_controls).collect();
    kl_synthesize_areas(&source, &frames, hop, config)
}

/// [`synthesize_voice_raw`] with default noise, scaled to a 0.9 peak.
pub fn synthesize_voice(
    glottal: &[GlottalParams],
    controls: &[TractControls],
    hop: usize,
    config: &SimulationConfig,
    seed: u64,
) -> Result<AudioBuffer> {
    let mut out =
        synthesize_voice_raw(glottal, controls, hop, config, NoiseConfig::default(), seed)?;
    out.normalize_peak(OUTPUT_PEAK);
    Ok(out)
}

/// [`synthesize_voice`] with a per-frame excitation gain, interpolated like
/// the other tracks. A zero gain silences the source for that frame.
pub fn synthesize_voice_gated(
    glottal: &[GlottalParams],
    controls: &[TractControls],
    gains: &[f64],
    hop: usize,
    config: &SimulationConfig,
    seed: u64,
) -> Result<AudioBuffer> {
    let mut out = synthesize(
        glottal,
        controls,
        Some(gains),
        hop,
        config,
        NoiseConfig::default(),
        seed,
    )?;
    out.normalize_peak(OUTPUT_PEAK);
    Ok(out)
}
