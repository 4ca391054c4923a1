use serde::{Deserialize, Serialize};

use crate::dsp::Spectrum;
use crate::error::{Error, Result};
use crate::tract::{Constriction, TractControls, DEFAULT_MAX_CONSTRICTIONS};
use crate::transfer::{loss_gradient, LossConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GdSettings {
    pub steps: usize,
    pub step_size: f64,
    pub momentum: f64,
    pub num_free_constrictions: usize,
    /// Also descend from a few fixed layouts with engaged constrictions and
    /// keep the best result.
    pub multi_start: bool,
}

impl Default for GdSettings {
    fn default() -> Self {
        Self {
            steps: 100,
            step_size: 0.05,
            momentum: 0.9,
            num_free_constrictions: DEFAULT_MAX_CONSTRICTIONS,
            multi_start: true,
        }
    }
}

impl GdSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "step size {} must be positive",
                self.step_size
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidInput(format!(
                "momentum {} outside [0, 1)",
                self.momentum
            )));
        }
        Ok(())
    }

    /// Midpoint tongue with every free constriction fully open.
    pub fn initial_controls(&self) -> TractControls {
        TractControls::midpoint(self.num_free_constrictions)
    }

    /// Starting points for [`fit_controls_gd_multistart`]: `first` (or the
    /// midpoint init), then, when enabled, the midpoint init if `first` was
    /// given and layouts whose constrictions already touch the profile. An
    /// open constriction has zero gradient and would otherwise never engage.
    pub fn start_points(&self, first: Option<&TractControls>) -> Vec<TractControls> {
        let mid = self.initial_controls();
        let mut starts = vec![first.cloned().unwrap_or_else(|| mid.clone())];
        if !self.multi_start {
            return starts;
        }
        if starts[0] != mid {
            starts.push(mid.clone());
        }
        if self.num_free_constrictions == 0 {
            return starts;
        }
        for (positions, diameter) in ENGAGED_LAYOUTS {
            let mut c = mid.clone();
            for (i, slot) in c.constrictions.iter_mut().enumerate() {
                *slot = Constriction {
                    position: positions[i % positions.len()],
                    diameter,
                };
            }
            starts.push(c);
        }
        starts
    }
}

const ENGAGED_LAYOUTS: [([f64; 2], f64); 4] = [
    ([14.3, 28.7], 1.15),
    ([7.0, 36.0], 1.15),
    ([21.5, 40.0], 0.8),
    ([3.0, 21.5], 0.8),
];

#[derive(Debug, Clone, PartialEq)]
pub struct GdFit {
    pub controls: TractControls,
    pub loss: f64,
    /// Loss at every visited iterate, starting with `init`.
    pub trace: Vec<f64>,
}

impl GdFit {
    /// Running minimum of the trace.
    pub fn best_so_far(&self) -> Vec<f64> {
        self.trace
            .iter()
            .scan(f64::INFINITY, |best, l| {
                *best = best.min(*l);
                Some(*best)
            })
            .collect()
    }
}

/// Heavy-ball descent in normalized parameter space with projection onto the
/// unit box; returns the lowest-loss iterate.
pub fn fit_controls_gd(
    target: &Spectrum,
    settings: &GdSettings,
    init: &TractControls,
    config: &LossConfig,
) -> Result<GdFit> {
    settings.validate()?;
    let mut u: Vec<f64> = init.clamped().to_normalized();
    let mut v = vec![0.0; u.len()];
    let mut current = TractControls::from_normalized(&u);
    let mut eval = loss_gradient(&current, target, config)?;
    if !eval.loss.is_finite() {
        return Err(Error::InvalidTarget(format!(
            "loss at init is {}",
            eval.loss
        )));
    }
    let mut best = (current.clone(), eval.loss);
    let mut trace = Vec::with_capacity(settings.steps + 1);
    trace.push(eval.loss);
    for _ in 0..settings.steps {
        for ((x, vel), g) in u.iter_mut().zip(v.iter_mut()).zip(&eval.gradient) {
            *vel = settings.momentum * *vel - settings.step_size * g;
            *x = (*x + *vel).clamp(0.0, 1.0);
        }
        current = TractControls::from_normalized(&u);
        eval = loss_gradient(&current, target, config)?;
        trace.push(eval.loss);
        if eval.loss < best.1 {
            best = (current.clone(), eval.loss);
        }
    }
    Ok(GdFit {
        controls: best.0,
        loss: best.1,
        trace,
    })
}

/// Runs [`fit_controls_gd`] from every start in [`GdSettings::start_points`]
/// and keeps the lowest loss; ties go to the earlier start.
pub fn fit_controls_gd_multistart(
    target: &Spectrum,
    settings: &GdSettings,
    first: Option<&TractControls>,
    config: &LossConfig,
) -> Result<GdFit> {
    let mut best: Option<GdFit> = None;
    for start in settings.start_points(first) {
        let fit = fit_controls_gd(target, settings, &start, config)?;
        if best.as_ref().is_none_or(|b| fit.loss < b.loss) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one start point"))
}
