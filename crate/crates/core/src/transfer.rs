//! Closed-form response of the tube model and the log-spectral loss with its
//! exact gradient.
//!
//! The response is `(1 + z^-1) z^-(M+1)/2 prod(1 + k_m) / D(z)` with
//! `D = a^T K b`, `a = (1, -R0 z^-1)`, `b = (1, RL)` and `K` the ordered
//! product of the junction matrices `[[1, k z^-1], [k, z^-1]]`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{LN_10, PI};

use crate::dsp::{Spectrum, MAGNITUDE_FLOOR};
use crate::error::{Error, Result};
use crate::tract::{
    area_from_diameter, diameters_with_jacobian, reflection_coefficients, AreaFunction,
    ReflectionModel, SimulationConfig, TractControls,
};

pub const DEFAULT_GRID_SIZE: usize = 512;

/// `F` points `w_f = f pi / F`, `f = 0..F`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    omegas: Vec<f64>,
}

impl FrequencyGrid {
    pub fn new(count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidInput(
                "frequency grid needs at least one point".into(),
            ));
        }
        Ok(Self {
            omegas: (0..count).map(|f| f as f64 * PI / count as f64).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    /// Grid frequencies in Hz for a given audio rate.
    pub fn hz(&self, sample_rate: f64) -> Vec<f64> {
        self.omegas
            .iter()
            .map(|w| w * sample_rate / (2.0 * PI))
            .collect()
    }
}

impl Default for FrequencyGrid {
    fn default() -> Self {
        Self::new(DEFAULT_GRID_SIZE).expect("non-empty default grid")
    }
}

/// Everything the loss needs besides the controls and the target.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LossConfig {
    pub grid: FrequencyGrid,
    pub simulation: SimulationConfig,
    /// Subtract the mean log-ratio before squaring, making the loss blind to
    /// an overall gain difference between model and target.
    pub gain_invariant: bool,
}

impl LossConfig {
    pub fn with_grid(grid: FrequencyGrid) -> Self {
        Self {
            grid,
            ..Self::default()
        }
    }
}

fn row_times(l: [Complex64; 2], k: f64, w: Complex64) -> [Complex64; 2] {
    [l[0] + l[1] * k, (l[0] * k + l[1]) * w]
}

fn times_col(k: f64, w: Complex64, r: [Complex64; 2]) -> [Complex64; 2] {
    [r[0] + r[1] * k * w, r[0] * k + r[1] * w]
}

/// Denominator `D(e^{iw})` of the response.
fn denominator(model: &ReflectionModel, w: Complex64) -> Complex64 {
    let mut l = [Complex64::new(1.0, 0.0), -w * model.glottal];
    for &k in &model.k {
        l = row_times(l, k, w);
    }
    l[0] + l[1] * model.lip
}

/// Complex response at angular frequency `omega` (radians per audio sample).
/// The denominator magnitude is floored at [`MAGNITUDE_FLOOR`].
pub fn evaluate_hkl(model: &ReflectionModel, omega: f64) -> Complex64 {
    let w = Complex64::from_polar(1.0, -omega);
    let m = model.k.len();
    let gain: f64 = model.k.iter().map(|k| 1.0 + k).product();
    let num = (1.0 + w) * Complex64::from_polar(1.0, -omega * (m + 1) as f64 / 2.0) * gain;
    let mut den = denominator(model, w);
    let mag = den.norm();
    if mag < MAGNITUDE_FLOOR {
        den = if mag == 0.0 {
            Complex64::new(MAGNITUDE_FLOOR, 0.0)
        } else {
            den * (MAGNITUDE_FLOOR / mag)
        };
    }
    num / den
}

pub fn hkl_magnitudes(model: &ReflectionModel, grid: &FrequencyGrid) -> Vec<f64> {
    grid.omegas()
        .iter()
        .map(|w| evaluate_hkl(model, *w).norm().max(MAGNITUDE_FLOOR))
        .collect()
}

/// `|H_KL|` of an area function on `grid`, as a spectrum over radians per sample.
pub fn area_response(
    area: &AreaFunction,
    grid: &FrequencyGrid,
    sim: &SimulationConfig,
) -> Spectrum {
    let model = reflection_coefficients(area, sim);
    Spectrum::new(hkl_magnitudes(&model, grid), grid.omegas().to_vec())
        .expect("floored magnitudes on an increasing grid")
}

pub fn controls_response(
    controls: &TractControls,
    grid: &FrequencyGrid,
    sim: &SimulationConfig,
) -> Spectrum {
    area_response(&AreaFunction::from_controls(controls), grid, sim)
}

/// Level of the tube response at `f0` minus its level at `2 f0`, in dB.
pub fn harmonic_tilt_db(controls: &TractControls, f0: f64, sim: &SimulationConfig) -> f64 {
    let model = reflection_coefficients(&AreaFunction::from_controls(controls), sim);
    let db = |hz: f64| {
        20.0 * evaluate_hkl(&model, 2.0 * PI * hz / sim.sample_rate)
            .norm()
            .log10()
    };
    db(f0) - db(2.0 * f0)
}

fn check_target(target: &Spectrum, grid: &FrequencyGrid) -> Result<()> {
    if target.len() != grid.len() {
        return Err(Error::InvalidTarget(format!(
            "target has {} points, grid has {}",
            target.len(),
            grid.len()
        )));
    }
    Ok(())
}

fn log_target(target: &Spectrum) -> Vec<f64> {
    target
        .magnitudes()
        .iter()
        .map(|m| m.max(MAGNITUDE_FLOOR).log10())
        .collect()
}

fn mean_square(residual: &mut [f64], gain_invariant: bool) -> f64 {
    if gain_invariant {
        let mean = residual.iter().sum::<f64>() / residual.len() as f64;
        residual.iter_mut().for_each(|r| *r -= mean);
    }
    residual.iter().map(|r| r * r).sum::<f64>() / residual.len() as f64
}

/// Mean squared difference of `log10` magnitudes between model and target.
pub fn spectral_loss(
    controls: &TractControls,
    target: &Spectrum,
    config: &LossConfig,
) -> Result<f64> {
    check_target(target, &config.grid)?;
    let model = controls_response(controls, &config.grid, &config.simulation);
    let mut residual: Vec<f64> = model
        .magnitudes()
        .iter()
        .zip(log_target(target))
        .map(|(m, t)| m.log10() - t)
        .collect();
    Ok(mean_square(&mut residual, config.gain_invariant))
}

/// Loss value and its gradient with respect to the normalized controls,
/// ordered as [`TractControls::to_vec`].
#[derive(Debug, Clone, PartialEq)]
pub struct LossGradient {
    pub loss: f64,
    pub gradient: Vec<f64>,
}

impl LossGradient {
    pub fn tongue_position(&self) -> f64 {
        self.gradient[0]
    }

    pub fn tongue_diameter(&self) -> f64 {
        self.gradient[1]
    }

    /// `(d/dposition, d/ddiameter)` for constriction `i`.
    pub fn constriction(&self, i: usize) -> (f64, f64) {
        (self.gradient[2 + 2 * i], self.gradient[3 + 2 * i])
    }

    pub fn norm(&self) -> f64 {
        self.gradient.iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

/// Per-frequency `log10|H|` and its partials in each reflection coefficient.
fn log_response_and_partials(model: &ReflectionModel, omega: f64, dk: &mut [f64]) -> f64 {
    let m = model.k.len();
    let w = Complex64::from_polar(1.0, -omega);
    let one = Complex64::new(1.0, 0.0);

    // suffix columns: suffix[j] = P_{j+1} ... P_M b, suffix[m] = b
    let mut suffix = vec![[one, one]; m + 1];
    suffix[m] = [one, Complex64::new(model.lip, 0.0)];
    for j in (0..m).rev() {
        suffix[j] = times_col(model.k[j], w, suffix[j + 1]);
    }
    let head = [one, -w * model.glottal];
    let den = head[0] * suffix[0][0] + head[1] * suffix[0][1];
    let den_mag2 = den.norm_sqr();
    let floored = den_mag2.sqrt() < MAGNITUDE_FLOOR;

    let mut l = head;
    for j in 0..m {
        let r = suffix[j + 1];
        let dden = l[0] * w * r[1] + l[1] * r[0];
        let dlog_den = if floored {
            0.0
        } else {
            (den.conj() * dden).re / den_mag2
        };
        dk[j] = (1.0 / (1.0 + model.k[j]) - dlog_den) / LN_10;
        l = row_times(l, model.k[j], w);
    }

    let gain: f64 = model.k.iter().map(|k| (1.0 + k).ln()).sum();
    let ln_mag = (1.0 + w).norm().ln() + gain - den_mag2.sqrt().max(MAGNITUDE_FLOOR).ln();
    (ln_mag / LN_10).max(MAGNITUDE_FLOOR.log10())
}

/// Exact gradient of [`spectral_loss`], chained through reflection
/// coefficients, areas, diameters and the control model.
pub fn loss_gradient(
    controls: &TractControls,
    target: &Spectrum,
    config: &LossConfig,
) -> Result<LossGradient> {
    check_target(target, &config.grid)?;
    let (diameters, jac) = diameters_with_jacobian(controls);
    let area = AreaFunction::new(diameters.clone())?;
    let model = reflection_coefficients(&area, &config.simulation);
    let m = model.k.len();
    let f_count = config.grid.len();

    let mut per_freq = vec![0.0; m * f_count];
    let mut residual = Vec::with_capacity(f_count);
    for ((omega, t), dk) in config
        .grid
        .omegas()
        .iter()
        .zip(log_target(target))
        .zip(per_freq.chunks_mut(m))
    {
        residual.push(log_response_and_partials(&model, *omega, dk) - t);
    }
    let loss = mean_square(&mut residual, config.gain_invariant);

    // dL/dk_m; the centring term drops out because centred residuals sum to zero
    let mut dl_dk = vec![0.0; m];
    for (r, dk) in residual.iter().zip(per_freq.chunks(m)) {
        for (acc, d) in dl_dk.iter_mut().zip(dk) {
            *acc += 2.0 * r * d / f_count as f64;
        }
    }

    let areas: Vec<f64> = diameters.iter().map(|d| area_from_diameter(*d)).collect();
    let mut dl_da = vec![0.0; areas.len()];
    for (j, g) in dl_dk.iter().enumerate() {
        let (lo, hi) = (areas[j], areas[j + 1]);
        let s2 = (hi + lo).powi(2);
        dl_da[j + 1] += g * 2.0 * lo / s2;
        dl_da[j] -= g * 2.0 * hi / s2;
    }

    let ranges = controls.ranges();
    let mut gradient = vec![0.0; controls.dim()];
    for ((row, ga), d) in jac.iter().zip(&dl_da).zip(&diameters) {
        let dl_dd = ga * PI * d / 2.0;
        for (g, j) in gradient.iter_mut().zip(row) {
            *g += dl_dd * j;
        }
    }
    for (g, r) in gradient.iter_mut().zip(&ranges) {
        *g *= r.span();
    }
    Ok(LossGradient { loss, gradient })
}

/// Mean absolute difference of two magnitude responses in dB.
pub fn response_mae_db(a: &Spectrum, b: &Spectrum) -> f64 {
    let n = a.len().min(b.len());
    a.magnitudes()
        .iter()
        .zip(b.magnitudes())
        .map(|(x, y)| {
            20.0 * (x.max(MAGNITUDE_FLOOR).log10() - y.max(MAGNITUDE_FLOOR).log10()).abs()
        })
        .sum::<f64>()
        / n.max(1) as f64
}
