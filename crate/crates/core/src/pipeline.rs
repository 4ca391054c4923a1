//! Frame-by-frame sound matching: speech in, a parameter track out, and
//! resynthesis from a track.

use serde::{Deserialize, Serialize};

use crate::dsp::{savitzky_golay, AudioBuffer, MelConfig, SmoothStatus};
use crate::error::{Error, Result};
use crate::estimation::source::{source_f0, speech_tenseness, voice_yin};
use crate::estimation::{
    fit_controls_ga, fit_controls_gd_multistart, fit_controls_pso, GaSettings, GdSettings,
    MelObjective, PsoSettings,
};
use crate::glottal::{GlottalParams, YinConfig, F0_MAX, F0_MIN};
use crate::iaif::{gfm_iaif_with, kl_target_from_iaif, IaifConfig};
use crate::tract::{synthesize_voice_gated, Constriction, SimulationConfig, TractControls};
use crate::transfer::LossConfig;

pub const TRACK_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackHeader {
    pub schema_version: u32,
    pub sample_rate: f64,
    pub hop_s: f64,
    pub model_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame_index: usize,
    pub time_s: f64,
    pub f0_hz: f64,
    pub tenseness: f64,
    pub tongue_position: f64,
    pub tongue_diameter: f64,
    pub constrictions: Vec<Constriction>,
    /// Fit loss of the frame: spectral loss for gradient descent, mel fitness
    /// for the baselines; `None` on unvoiced frames.
    pub loss: Option<f64>,
    pub voiced: bool,
}

impl FrameRecord {
    pub fn controls(&self) -> TractControls {
        TractControls {
            tongue_position: self.tongue_position,
            tongue_diameter: self.tongue_diameter,
            constrictions: self.constrictions.clone(),
        }
    }

    pub fn glottal(&self) -> Result<GlottalParams> {
        GlottalParams::new(self.f0_hz, self.tenseness)
    }

    fn set_parameters(&mut self, glottal: GlottalParams, controls: &TractControls) {
        self.f0_hz = glottal.f0();
        self.tenseness = glottal.tenseness();
        self.tongue_position = controls.tongue_position;
        self.tongue_diameter = controls.tongue_diameter;
        self.constrictions = controls.constrictions.clone();
    }
}

/// Per-frame source and tract parameters with the rate they were taken at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterTrack {
    pub header: TrackHeader,
    pub frames: Vec<FrameRecord>,
}

fn schema(field: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::Schema {
        field: field.into(),
        reason: reason.into(),
    }
}

impl ParameterTrack {
    /// Samples between frames at the header's rate.
    pub fn hop_samples(&self) -> usize {
        (self.header.hop_s * self.header.sample_rate).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let h = &self.header;
        if h.schema_version != TRACK_SCHEMA_VERSION {
            return Err(schema(
                "header.schema_version",
                format!(
                    "expected {TRACK_SCHEMA_VERSION}, found {}",
                    h.schema_version
                ),
            ));
        }
        if !(h.sample_rate > 0.0 && h.sample_rate.is_finite()) {
            return Err(schema("header.sample_rate", "must be positive"));
        }
        if !(h.hop_s > 0.0 && h.hop_s.is_finite()) || self.hop_samples() == 0 {
            return Err(schema("header.hop_s", "must span at least one sample"));
        }
        if self.frames.is_empty() {
            return Err(schema("frames", "track has no frames"));
        }
        let n = self.frames[0].constrictions.len();
        for (i, f) in self.frames.iter().enumerate() {
            let field = |name: &str| format!("frames[{i}].{name}");
            if f.frame_index != i {
                return Err(schema(
                    field("frame_index"),
                    format!("expected {i}, found {}", f.frame_index),
                ));
            }
            if !f.time_s.is_finite() || (i > 0 && f.time_s <= self.frames[i - 1].time_s) {
                return Err(schema(
                    field("time_s"),
                    "frames must be strictly ordered in time",
                ));
            }
            if !(F0_MIN..=F0_MAX).contains(&f.f0_hz) {
                return Err(schema(
                    field("f0_hz"),
                    format!("{} outside [{F0_MIN}, {F0_MAX}]", f.f0_hz),
                ));
            }
            if !(0.0..=1.0).contains(&f.tenseness) {
                return Err(schema(
                    field("tenseness"),
                    format!("{} outside [0, 1]", f.tenseness),
                ));
            }
            if f.constrictions.len() != n {
                return Err(schema(
                    field("constrictions"),
                    format!("expected {n} entries like frame 0"),
                ));
            }
            let controls = f.controls();
            for (name, value, range) in controls
                .to_vec()
                .into_iter()
                .zip(controls.ranges())
                .enumerate()
                .map(|(k, (v, r))| (control_name(k), v, r))
            {
                if !range.contains(value) {
                    return Err(schema(
                        field(&name),
                        format!("{value} outside [{}, {}]", range.lo, range.hi),
                    ));
                }
            }
            if let Some(l) = f.loss {
                if !l.is_finite() {
                    return Err(schema(field("loss"), "must be finite or null"));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses and validates a track document.
    pub fn from_json(text: &str) -> Result<Self> {
        let track: Self = serde_json::from_str(text)?;
        track.validate()?;
        Ok(track)
    }

    pub fn voiced_count(&self) -> usize {
        self.frames.iter().filter(|f| f.voiced).count()
    }
}

fn control_name(k: usize) -> String {
    match k {
        0 => "tongue_position".into(),
        1 => "tongue_diameter".into(),
        k => {
            let c = (k - 2) / 2;
            let part = if k % 2 == 0 { "position" } else { "diameter" };
            format!("constrictions[{c}].{part}")
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Gd,
    Ga,
    Pso,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmoothingSettings {
    pub window: usize,
    pub order: usize,
}

/// Baselines are smoothed over time by default; gradient descent relies on
/// warm starts instead.
pub const BASELINE_SMOOTHING: SmoothingSettings = SmoothingSettings {
    window: 7,
    order: 2,
};

#[derive(Debug, Clone, PartialEq)]
pub struct MatchSettings {
    pub frames_per_second: f64,
    pub window_s: f64,
    pub optimizer: Optimizer,
    pub gd: GdSettings,
    pub ga: GaSettings,
    pub pso: PsoSettings,
    pub smoothing: Option<SmoothingSettings>,
    pub loss: LossConfig,
    pub iaif: IaifConfig,
    pub yin: YinConfig,
    pub mel: MelConfig,
    /// Frames this far below the loudest frame are treated as silence.
    pub silence_db: f64,
    /// Start gradient descent from the previous voiced frame's fit as well as
    /// from the usual start points.
    pub warm_start: bool,
    /// Baseline seeds are `seed + frame_index`.
    pub seed: u64,
}

impl Default for MatchSettings {
    fn default() -> Self {
        Self::for_optimizer(Optimizer::Gd)
    }
}

impl MatchSettings {
    pub fn for_optimizer(optimizer: Optimizer) -> Self {
        Self {
            frames_per_second: 100.0,
            window_s: 0.04,
            optimizer,
            gd: GdSettings::default(),
            ga: GaSettings::default(),
            pso: PsoSettings::default(),
            smoothing: match optimizer {
                Optimizer::Gd => None,
                Optimizer::Ga | Optimizer::Pso => Some(BASELINE_SMOOTHING),
            },
            loss: LossConfig {
                gain_invariant: true,
                ..LossConfig::default()
            },
            iaif: IaifConfig::default(),
            yin: voice_yin(),
            mel: MelConfig::default(),
            silence_db: -50.0,
            warm_start: true,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.frames_per_second > 0.0 && self.frames_per_second.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "frames per second {} must be positive",
                self.frames_per_second
            )));
        }
        if !(self.window_s > 0.0 && self.window_s.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "window {} s must be positive",
                self.window_s
            )));
        }
        if let Some(s) = self.smoothing {
            if s.window % 2 == 0 || s.order >= s.window {
                return Err(Error::InvalidInput(format!(
                    "smoothing window {} must be odd and above order {}",
                    s.window, s.order
                )));
            }
        }
        self.gd.validate()?;
        self.ga.validate()?;
        self.pso.validate()
    }

    fn hop(&self, fs: f64) -> usize {
        ((fs / self.frames_per_second).round() as usize).max(1)
    }
}

/// Analysis frame of `len` samples centred on `centre`, zero outside the
/// signal.
fn frame_at(x: &[f64], centre: usize, len: usize) -> Vec<f64> {
    let start = centre as isize - (len / 2) as isize;
    (0..len as isize)
        .map(|i| {
            let k = start + i;
            if k >= 0 && (k as usize) < x.len() {
                x[k as usize]
            } else {
                0.0
            }
        })
        .collect()
}

struct FrameFit {
    glottal: GlottalParams,
    controls: TractControls,
    loss: f64,
}

fn analyse_frame(
    frame: &AudioBuffer,
    warm: Option<&TractControls>,
    index: usize,
    settings: &MatchSettings,
) -> Result<FrameFit> {
    let res = gfm_iaif_with(frame, &settings.iaif)?;
    let f0 = source_f0(&res.gfd, &settings.yin)?;
    let target = kl_target_from_iaif(&res, &settings.loss.grid)?;
    let gd = fit_controls_gd_multistart(&target, &settings.gd, warm, &settings.loss)?;
    let sim = &settings.loss.simulation;
    let tenseness = speech_tenseness(frame, f0, &gd.controls, sim)?.clamp(0.0, 1.0);
    let glottal = GlottalParams::new(f0, tenseness)?;
    let (controls, loss) = match settings.optimizer {
        Optimizer::Gd => (gd.controls, gd.loss),
        Optimizer::Ga | Optimizer::Pso => {
            let objective = MelObjective::new(
                frame,
                glottal,
                settings.gd.num_free_constrictions,
                settings.mel.clone(),
                *sim,
            )?;
            let seed = settings.seed.wrapping_add(index as u64);
            let fit = if settings.optimizer == Optimizer::Ga {
                fit_controls_ga(&objective, &settings.ga, seed)?
            } else {
                fit_controls_pso(&objective, &settings.pso, seed)?
            };
            (fit.controls, fit.fitness)
        }
    };
    Ok(FrameFit {
        glottal,
        controls,
        loss,
    })
}

/// Estimates source and tract parameters for every frame of `audio`.
///
/// Frame `i` is centred on sample `i * hop`. Silent frames and frames where
/// no pitch is found are unvoiced; they carry the previous voiced frame's
/// parameters (leading ones take the first voiced frame's). Gradient descent
/// warm-starts from the previous voiced frame.
pub fn match_audio(audio: &AudioBuffer, settings: &MatchSettings) -> Result<ParameterTrack> {
    settings.validate()?;
    let fs = audio.sample_rate();
    if fs != settings.loss.simulation.sample_rate {
        return Err(Error::InvalidInput(format!(
            "audio at {fs} Hz, model at {} Hz",
            settings.loss.simulation.sample_rate
        )));
    }
    let hop = settings.hop(fs);
    let win = (settings.window_s * fs).round() as usize;
    let n_frames = audio.len().div_ceil(hop).max(1);
    let x = audio.samples();
    let frames: Vec<Vec<f64>> = (0..n_frames).map(|i| frame_at(x, i * hop, win)).collect();
    let energies: Vec<f64> = frames.iter().map(|f| crate::dsp::energy(f)).collect();
    let loudest = energies.iter().cloned().fold(0.0, f64::max);
    let floor = loudest * 10f64.powf(settings.silence_db / 10.0);

    let mut fits: Vec<Option<FrameFit>> = Vec::with_capacity(n_frames);
    let mut warm: Option<TractControls> = None;
    for (i, (samples, e)) in frames.into_iter().zip(&energies).enumerate() {
        if loudest == 0.0 || *e <= floor {
            fits.push(None);
            continue;
        }
        let frame = AudioBuffer::new(samples, fs)?;
        match analyse_frame(&frame, warm.as_ref(), i, settings) {
            Ok(fit) => {
                if settings.warm_start {
                    warm = Some(fit.controls.clone());
                }
                fits.push(Some(fit));
            }
            Err(Error::Unvoiced) | Err(Error::SilentFrame) | Err(Error::HarmonicsNotFound) => {
                fits.push(None)
            }
            Err(e) => return Err(e),
        }
    }

    let first = fits.iter().flatten().next().ok_or(Error::NoVoicedFrames)?;
    let mut carry = (first.glottal, first.controls.clone());
    let records = fits
        .iter()
        .enumerate()
        .map(|(i, fit)| {
            let mut r = FrameRecord {
                frame_index: i,
                time_s: (i * hop) as f64 / fs,
                f0_hz: 0.0,
                tenseness: 0.0,
                tongue_position: 0.0,
                tongue_diameter: 0.0,
                constrictions: Vec::new(),
                loss: fit.as_ref().map(|f| f.loss),
                voiced: fit.is_some(),
            };
            if let Some(f) = fit {
                carry = (f.glottal, f.controls.clone());
            }
            r.set_parameters(carry.0, &carry.1);
            r
        })
        .collect();
    let track = ParameterTrack {
        header: TrackHeader {
            schema_version: TRACK_SCHEMA_VERSION,
            sample_rate: fs,
            hop_s: hop as f64 / fs,
            model_version: crate::MODEL_VERSION.to_string(),
        },
        frames: records,
    };
    match settings.smoothing {
        Some(s) => Ok(smooth_track(&track, s.window, s.order)?.0),
        None => Ok(track),
    }
}

/// Savitzky-Golay smoothing of every continuous parameter series, then
/// clipping back into range. Voiced flags and losses are untouched.
pub fn smooth_track(
    track: &ParameterTrack,
    window: usize,
    order: usize,
) -> Result<(ParameterTrack, SmoothStatus)> {
    let mut out = track.clone();
    let mut status = SmoothStatus::Applied;
    let mut smooth = |get: &dyn Fn(&FrameRecord) -> f64| -> Result<Vec<f64>> {
        let series: Vec<f64> = track.frames.iter().map(get).collect();
        let s = savitzky_golay(&series, window, order)?;
        if s.status != SmoothStatus::Applied {
            status = s.status;
        }
        Ok(s.values)
    };
    let f0 = smooth(&|f| f.f0_hz)?;
    let tense = smooth(&|f| f.tenseness)?;
    let dim = track.frames.first().map_or(2, |f| f.controls().dim());
    let controls: Vec<Vec<f64>> = (0..dim)
        .map(|k| smooth(&|f| f.controls().to_vec()[k]))
        .collect::<Result<_>>()?;
    for (i, r) in out.frames.iter_mut().enumerate() {
        let v: Vec<f64> = controls.iter().map(|c| c[i]).collect();
        let c = TractControls::from_vec(&v).clamped();
        let g = GlottalParams::new(f0[i].clamp(F0_MIN, F0_MAX), tense[i])?;
        r.set_parameters(g, &c);
    }
    Ok((out, status))
}

/// Drives the voice model with the track, interpolating every parameter
/// linearly between frames. Unvoiced frames have their excitation gated off.
pub fn resynthesize(
    track: &ParameterTrack,
    sim: &SimulationConfig,
    seed: u64,
) -> Result<AudioBuffer> {
    track.validate()?;
    if track.header.sample_rate != sim.sample_rate {
        return Err(Error::InvalidInput(format!(
            "track at {} Hz, model at {} Hz",
            track.header.sample_rate, sim.sample_rate
        )));
    }
    let glottal: Vec<GlottalParams> = track
        .frames
        .iter()
        .map(|f| f.glottal())
        .collect::<Result<_>>()?;
    let controls: Vec<TractControls> = track.frames.iter().map(|f| f.controls()).collect();
    let gains: Vec<f64> = track
        .frames
        .iter()
        .map(|f| if f.voiced { 1.0 } else { 0.0 })
        .collect();
    synthesize_voice_gated(&glottal, &controls, &gains, track.hop_samples(), sim, seed)
}
