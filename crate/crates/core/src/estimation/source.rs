//! F0 and tenseness of the voice behind a speech frame.

use crate::dsp::{lowpass, AudioBuffer};
use crate::error::Result;
use crate::glottal::{estimate_f0_with, estimate_tenseness_through, YinConfig};
use crate::tract::{SimulationConfig, TractControls};
use crate::transfer::harmonic_tilt_db;

/// The inverse-filtered source carries whitened aspiration noise; YIN runs on
/// its band below this cutoff, which still holds the first harmonics.
pub const SOURCE_F0_CUTOFF_HZ: f64 = 500.0;
const SOURCE_LOWPASS_HALF_WIDTH: usize = 256;

/// F0 search range for the adult voice the tube models. An inverse filter
/// that absorbs the first harmonic otherwise invites octave-up picks.
pub const VOICE_F0_RANGE: (f64, f64) = (60.0, 300.0);

pub fn voice_yin() -> YinConfig {
    YinConfig {
        f0_min: VOICE_F0_RANGE.0,
        f0_max: VOICE_F0_RANGE.1,
        ..YinConfig::default()
    }
}

/// YIN on the lowpassed inverse-filtered source.
pub fn source_f0(source: &AudioBuffer, yin: &YinConfig) -> Result<f64> {
    let smooth = lowpass(
        source.samples(),
        SOURCE_F0_CUTOFF_HZ,
        source.sample_rate(),
        SOURCE_LOWPASS_HALF_WIDTH,
    );
    estimate_f0_with(&AudioBuffer::new(smooth, source.sample_rate())?, yin)
}

/// Tenseness read from the speech with the fitted tube's level difference
/// between the first two harmonics removed. The all-pole tract filter of
/// inverse filtering partly models the first harmonic, which flattens H1-H2
/// on the inverse-filtered source itself.
pub fn speech_tenseness(
    speech: &AudioBuffer,
    f0: f64,
    tract: &TractControls,
    sim: &SimulationConfig,
) -> Result<f64> {
    estimate_tenseness_through(speech, f0, harmonic_tilt_db(tract, f0, sim))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glottal::{synthesize_gfd, GlottalParams};
    use crate::tract::kl_synthesize;

    #[test]
    fn recovers_source_of_a_synthetic_vowel() {
        let sim = SimulationConfig::default();
        let tract = TractControls::new(21.0, 2.8, vec![]).unwrap();
        let truth = GlottalParams::new(135.0, 0.55).unwrap();
        let gfd = synthesize_gfd(truth, 7200, 48000.0, 2);
        let speech = kl_synthesize(&gfd, std::slice::from_ref(&tract), 7200, &sim).unwrap();
        let f0 = source_f0(&gfd, &voice_yin()).unwrap();
        assert!((f0 - 135.0).abs() < 0.5, "{f0}");
        let t = speech_tenseness(&speech, f0, &tract, &sim).unwrap();
        assert!((t - 0.55).abs() < 0.05, "{t}");
    }

    #[test]
    fn range_excludes_the_octave_above_a_low_voice() {
        let y = voice_yin();
        assert!(y.f0_max < 2.0 * crate::estimation::experiment::F0_RANGE.1);
        assert!(y.f0_min <= crate::estimation::experiment::F0_RANGE.0);
    }
}
