//! Control model: base diameter, tongue shaping, constrictions.
//!
//! Every map here is continuous in its controls and piecewise smooth, so the
//! Jacobian returned by [`diameters_with_jacobian`] is exact away from the
//! measure-zero set where a constriction starts or stops touching the profile.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::controls::{Constriction, TractControls};
use crate::error::{Error, Result};

pub const SEGMENTS: usize = 44;
/// Diameters never go below this in the open-vowel regime (cm).
pub const OPEN_TRACT_FLOOR: f64 = 0.3;

const BLADE_START: usize = 10;
const TIP_START: usize = 32;
const LIP_START: usize = 39;
/// Diameter the tongue model oscillates around.
const NEUTRAL: f64 = 1.5;
const GRID_OFFSET: f64 = 1.7;

/// Segment diameters from glottis (0) to lips (43), in cm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaFunction {
    diameters: Vec<f64>,
}

impl AreaFunction {
    pub fn new(diameters: Vec<f64>) -> Result<Self> {
        if diameters.len() != SEGMENTS {
            return Err(Error::InvalidInput(format!(
                "area function needs {SEGMENTS} segments, got {}",
                diameters.len()
            )));
        }
        if let Some(d) = diameters
            .iter()
            .find(|d| !(**d >= OPEN_TRACT_FLOOR - 1e-12) || !d.is_finite())
        {
            return Err(Error::InvalidInput(format!(
                "diameter {d} below the open-tract floor {OPEN_TRACT_FLOOR}"
            )));
        }
        Ok(Self { diameters })
    }

    pub fn from_areas(areas: &[f64]) -> Result<Self> {
        Self::new(areas.iter().map(|a| diameter_from_area(*a)).collect())
    }

    pub fn diameters(&self) -> &[f64] {
        &self.diameters
    }

    pub fn areas(&self) -> Vec<f64> {
        self.diameters
            .iter()
            .map(|d| area_from_diameter(*d))
            .collect()
    }

    /// Pointwise linear blend `(1 - t) * self + t * other` of the areas.
    pub fn lerp_areas(&self, other: &Self, t: f64) -> Vec<f64> {
        self.areas()
            .iter()
            .zip(other.areas())
            .map(|(a, b)| a + (b - a) * t)
            .collect()
    }

    pub fn from_controls(controls: &TractControls) -> Self {
        apply_constrictions(
            &rest_diameter(controls.tongue_position, controls.tongue_diameter),
            &controls.constrictions,
        )
    }
}

pub fn area_from_diameter(d: f64) -> f64 {
    PI * (d / 2.0).powi(2)
}

pub fn diameter_from_area(a: f64) -> f64 {
    2.0 * (a / PI).sqrt()
}

/// Neutral tract before the tongue is applied.
pub fn base_diameter() -> Vec<f64> {
    (0..SEGMENTS)
        .map(|i| match i {
            0..=6 => 0.6,
            7..=11 => 1.1,
            _ => NEUTRAL,
        })
        .collect()
}

fn tongue_taper(i: usize) -> f64 {
    if i == BLADE_START - 2 || i == LIP_START - 1 {
        0.8
    } else if i == BLADE_START || i == LIP_START - 2 {
        0.94
    } else {
        1.0
    }
}

/// Returns the tongue-region diameter at segment `i` and its partials
/// with respect to tongue position and tongue diameter.
fn tongue_segment(i: usize, tp: f64, td: f64) -> (f64, f64, f64) {
    let rate = 1.1 * PI / (TIP_START - BLADE_START) as f64;
    let phase = rate * (tp - i as f64);
    let fixed = 2.0 + (td - 2.0) / 1.5;
    let amp = (NEUTRAL - fixed + GRID_OFFSET) * tongue_taper(i);
    let d = NEUTRAL - amp * phase.cos();
    let d_tp = amp * phase.sin() * rate;
    let d_td = tongue_taper(i) * phase.cos() / 1.5;
    (d, d_tp, d_td)
}

/// Base diameter reshaped by the tongue: a cosine-shaped narrowing centred at
/// `tongue_position` across the blade-to-lip region, narrowest for small
/// `tongue_diameter`.
pub fn rest_diameter(tongue_position: f64, tongue_diameter: f64) -> AreaFunction {
    let mut d = base_diameter();
    for (i, v) in d.iter_mut().enumerate().take(LIP_START).skip(BLADE_START) {
        *v = tongue_segment(i, tongue_position, tongue_diameter).0;
    }
    AreaFunction { diameters: d }
}

/// Half-width of the raised-cosine dip, in segments.
fn constriction_width(position: f64) -> (f64, f64) {
    let (lo, hi) = (25.0, TIP_START as f64);
    if position < lo {
        (10.0, 0.0)
    } else if position >= hi {
        (5.0, 0.0)
    } else {
        let slope = -5.0 / (hi - lo);
        (10.0 + slope * (position - lo), slope)
    }
}

/// Blend weight toward the current profile (0 = fully constricted, 1 = untouched)
/// for segment `j`, with its partial derivative in the constriction position.
fn shrink(j: usize, position: f64) -> (f64, f64) {
    let (width, dwidth) = constriction_width(position);
    let offset = j as f64 - position;
    let rel = offset.abs() - 0.5;
    if rel <= 0.0 {
        (0.0, 0.0)
    } else if rel >= width {
        (1.0, 0.0)
    } else {
        let x = PI * rel / width;
        let s = 0.5 * (1.0 - x.cos());
        let drel_dpos = -offset.signum();
        // d/dpos of pi * rel / width
        let dx = PI * (drel_dpos * width - rel * dwidth) / (width * width);
        (s, 0.5 * x.sin() * dx)
    }
}

/// Narrows the rest profile with each constriction in turn. A constriction
/// only acts where it is narrower than the profile it meets; the result is
/// floored at [`OPEN_TRACT_FLOOR`].
pub fn apply_constrictions(rest: &AreaFunction, constrictions: &[Constriction]) -> AreaFunction {
    let mut d = rest.diameters.clone();
    for c in constrictions {
        for (j, v) in d.iter_mut().enumerate() {
            if c.diameter < *v {
                let (s, _) = shrink(j, c.position);
                *v = c.diameter + (*v - c.diameter) * s;
            }
        }
    }
    for v in &mut d {
        *v = v.max(OPEN_TRACT_FLOOR);
    }
    AreaFunction { diameters: d }
}

/// Diameters for `controls` together with the Jacobian `J[segment][param]`
/// in physical units, parameters ordered as [`TractControls::to_vec`].
pub fn diameters_with_jacobian(controls: &TractControls) -> (Vec<f64>, Vec<Vec<f64>>) {
    let p = controls.dim();
    let mut d = base_diameter();
    let mut jac = vec![vec![0.0; p]; SEGMENTS];
    for i in BLADE_START..LIP_START {
        let (v, d_tp, d_td) = tongue_segment(i, controls.tongue_position, controls.tongue_diameter);
        d[i] = v;
        jac[i][0] = d_tp;
        jac[i][1] = d_td;
    }
    for (ci, c) in controls.constrictions.iter().enumerate() {
        let (ip, id) = (2 + 2 * ci, 3 + 2 * ci);
        for j in 0..SEGMENTS {
            if c.diameter < d[j] {
                let (s, ds) = shrink(j, c.position);
                let gap = d[j] - c.diameter;
                d[j] = c.diameter + gap * s;
                for g in jac[j].iter_mut() {
                    *g *= s;
                }
                jac[j][id] += 1.0 - s;
                jac[j][ip] += gap * ds;
            }
        }
    }
    for j in 0..SEGMENTS {
        if d[j] < OPEN_TRACT_FLOOR {
            d[j] = OPEN_TRACT_FLOOR;
            jac[j].iter_mut().for_each(|g| *g = 0.0);
        }
    }
    (d, jac)
}
