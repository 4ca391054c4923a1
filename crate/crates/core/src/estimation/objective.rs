//! Mel-spectrogram fitness shared by the black-box baselines.

use rayon::prelude::*;

use crate::dsp::{mel_spectrogram, AudioBuffer, MelConfig, MelSpectrogram};
use crate::error::{Error, Result};
use crate::glottal::{synthesize_gfd, GlottalParams};
use crate::tract::{kl_synthesize, SimulationConfig, TractControls};

/// Samples synthesized ahead of the compared span so the tube is past its
/// start-up transient.
pub const PREROLL_SAMPLES: usize = 480;

/// Fixed seed for the candidate excitation's aspiration noise, so fitness is
/// a deterministic function of the controls.
pub const CANDIDATE_NOISE_SEED: u64 = 0x5eed;

/// Scores tract controls by how closely their synthesized audio matches a
/// target in log-mel space. Both spectrograms have their mean removed, which
/// makes the score independent of overall gain.
#[derive(Debug, Clone)]
pub struct MelObjective {
    target: MelSpectrogram,
    source: AudioBuffer,
    len: usize,
    mel: MelConfig,
    simulation: SimulationConfig,
    num_constrictions: usize,
}

fn centred(mut m: MelSpectrogram) -> MelSpectrogram {
    let count: usize = m.iter().map(Vec::len).sum();
    let mean = m.iter().flatten().sum::<f64>() / count.max(1) as f64;
    m.iter_mut().flatten().for_each(|v| *v -= mean);
    m
}

impl MelObjective {
    /// `glottal` drives every candidate; it is usually the source estimated
    /// from the target itself.
    pub fn new(
        target: &AudioBuffer,
        glottal: GlottalParams,
        num_constrictions: usize,
        mel: MelConfig,
        simulation: SimulationConfig,
    ) -> Result<Self> {
        if target.is_empty() || target.samples().iter().all(|x| *x == 0.0) {
            return Err(Error::SilentFrame);
        }
        if target.sample_rate() != simulation.sample_rate {
            return Err(Error::InvalidInput(format!(
                "target at {} Hz, simulation at {} Hz",
                target.sample_rate(),
                simulation.sample_rate
            )));
        }
        let len = target.len();
        let source = synthesize_gfd(
            glottal,
            len + PREROLL_SAMPLES,
            simulation.sample_rate,
            CANDIDATE_NOISE_SEED,
        );
        Ok(Self {
            target: centred(mel_spectrogram(target, &mel)),
            source,
            len,
            mel,
            simulation,
            num_constrictions,
        })
    }

    /// Length of a normalized parameter vector.
    pub fn dim(&self) -> usize {
        2 + 2 * self.num_constrictions
    }

    pub fn synthesize(&self, controls: &TractControls) -> Result<AudioBuffer> {
        let full = kl_synthesize(
            &self.source,
            std::slice::from_ref(controls),
            self.source.len(),
            &self.simulation,
        )?;
        AudioBuffer::new(full.segment(PREROLL_SAMPLES, self.len), full.sample_rate())
    }

    pub fn fitness(&self, controls: &TractControls) -> Result<f64> {
        let audio = self.synthesize(controls)?;
        if audio.samples().iter().all(|x| *x == 0.0) {
            return Ok(f64::INFINITY);
        }
        let cand = centred(mel_spectrogram(&audio, &self.mel));
        Ok(crate::dsp::mel_mse(&self.target, &cand))
    }

    /// Fitness of a point in the unit box.
    pub fn fitness_normalized(&self, u: &[f64]) -> Result<f64> {
        self.fitness(&TractControls::from_normalized(u))
    }

    /// Scores every point; the order of the output matches the input.
    pub fn fitness_all(&self, points: &[Vec<f64>]) -> Result<Vec<f64>> {
        points
            .par_iter()
            .map(|u| self.fitness_normalized(u))
            .collect()
    }
}
