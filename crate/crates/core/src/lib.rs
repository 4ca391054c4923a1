//! Articulatory control estimation for vowel recordings.
//!
//! A recording is split into a glottal flow derivative and an all-pole vocal
//! tract filter by iterative adaptive inverse filtering (GFM-IAIF). Glottal
//! controls (F0, tenseness) are read off the source waveform, and tract controls (tongue and constrictions) are fitted by
//! gradient descent on the analytic transfer function of a 44-segment
//! Kelly-Lochbaum waveguide. The same waveguide resynthesizes the result.
//!
//! Module map:
//!
//! * [`dsp`]: framing, spectra, linear prediction, mel features, smoothing
//! * [`glottal`]: LF source synthesis, YIN F0 and H1-H2 tenseness estimation
//! * [`iaif`]: iterative adaptive inverse filtering (GFM-IAIF) source-filter separation
//! * [`tract`]: control model, area function, waveguide synthesis
//! * [`transfer`]: analytic transfer function, spectral loss and its gradient
//! * [`estimation`]: gradient descent, GA and PSO fitting, in-domain experiment
//! * [`pipeline`]: frame-by-frame matching, resynthesis, parameter tracks
//! * [`io`]: WAV and JSON files

// `!(x < y)` is used throughout to reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dsp;
pub mod error;
pub mod estimation;
pub mod glottal;
pub mod iaif;
pub mod io;
pub mod pipeline;
pub mod tract;
pub mod transfer;

pub use dsp::{AllPoleFilter, AudioBuffer, Spectrum};
pub use error::{Error, Result};
pub use estimation::experiment::ExperimentReport;
pub use estimation::GdSettings;
pub use glottal::GlottalParams;
pub use pipeline::{MatchSettings, ParameterTrack};
pub use tract::{AreaFunction, Constriction, SimulationConfig, TractControls};
pub use transfer::FrequencyGrid;

/// Default audio and simulation rate.
pub const SAMPLE_RATE: f64 = 48_000.0;
pub const MODEL_VERSION: &str = concat!("tractfit-", env!("CARGO_PKG_VERSION"));
