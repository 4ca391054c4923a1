//! Fitting tract controls: gradient descent on the analytic response, two
//! black-box baselines on synthesized audio, and the recovery experiment.

pub mod experiment;
pub mod ga;
pub mod gd;
pub mod objective;
pub mod pso;
pub mod source;

use crate::tract::TractControls;

pub use ga::{fit_controls_ga, GaSettings};
pub use gd::{fit_controls_gd, fit_controls_gd_multistart, GdFit, GdSettings};
pub use objective::MelObjective;
pub use pso::{fit_controls_pso, PsoSettings};

/// Result of a population-based search.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionFit {
    pub controls: TractControls,
    pub fitness: f64,
    /// Best fitness so far after each generation, starting with the initial
    /// population.
    pub history: Vec<f64>,
}
