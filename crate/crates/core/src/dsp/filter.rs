use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::AudioBuffer;
use crate::error::{Error, Result};

/// Floor applied to denominator and response magnitudes before division or log.
pub const MAGNITUDE_FLOOR: f64 = 1e-12;

/// Denominator of `1 / sum_i a_i z^-i`, normalized so that `a_0 = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllPoleFilter {
    coefficients: Vec<f64>,
}

impl AllPoleFilter {
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        let a0 = *coefficients
            .first()
            .ok_or_else(|| Error::InvalidInput("empty filter".into()))?;
        if a0 == 0.0 || coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "filter coefficients must be finite with a_0 != 0: {coefficients:?}"
            )));
        }
        Ok(Self {
            coefficients: coefficients.iter().map(|c| c / a0).collect(),
        })
    }

    pub fn identity() -> Self {
        Self {
            coefficients: vec![1.0],
        }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn order(&self) -> usize {
        self.coefficients.len() - 1
    }

    /// `A(e^{iw}) = sum_i a_i e^{-iwi}`, evaluated by Horner's rule in `e^{-iw}`.
    pub fn denominator(&self, omega: f64) -> Complex64 {
        let zinv = Complex64::from_polar(1.0, -omega);
        self.coefficients
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &a| acc * zinv + a)
    }

    pub fn magnitude(&self, omega: f64) -> f64 {
        1.0 / self.denominator(omega).norm().max(MAGNITUDE_FLOOR)
    }

    /// Runs `x` through `1/A(z)` with zero initial state.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let a = &self.coefficients;
        let mut y = vec![0.0; x.len()];
        for n in 0..x.len() {
            let mut acc = x[n];
            for i in 1..a.len().min(n + 1) {
                acc -= a[i] * y[n - i];
            }
            y[n] = acc;
        }
        y
    }

    /// Runs `x` through the FIR filter `A(z)` with zero initial state.
    pub fn inverse(&self, x: &[f64]) -> Vec<f64> {
        let a = &self.coefficients;
        (0..x.len())
            .map(|n| {
                a.iter()
                    .take(n + 1)
                    .enumerate()
                    .map(|(i, &ai)| ai * x[n - i])
                    .sum()
            })
            .collect()
    }

    /// Reflection coefficients by the step-down recursion, or `None` when a
    /// coefficient reaches the unit circle.
    pub fn reflection_coefficients(&self) -> Option<Vec<f64>> {
        let mut a = self.coefficients.clone();
        let p = self.order();
        let mut ks = vec![0.0; p];
        for m in (1..=p).rev() {
            let k = a[m];
            if !(k.abs() < 1.0) {
                return None;
            }
            ks[m - 1] = k;
            let denom = 1.0 - k * k;
            let prev: Vec<f64> = (0..m).map(|i| (a[i] - k * a[m - i]) / denom).collect();
            a.truncate(m);
            a.copy_from_slice(&prev);
        }
        Some(ks)
    }

    /// True when every pole lies strictly inside the unit circle.
    pub fn is_minimum_phase(&self) -> bool {
        self.reflection_coefficients().is_some()
    }

    /// Roots of `z^p A(z)`, i.e. the filter poles.
    pub fn poles(&self) -> Vec<Complex64> {
        let p = self.order();
        if p == 0 {
            return Vec::new();
        }
        // companion matrix of z^p + a_1 z^{p-1} + ... + a_p
        let mut c = DMatrix::<f64>::zeros(p, p);
        for j in 0..p {
            c[(0, j)] = -self.coefficients[j + 1];
        }
        for i in 1..p {
            c[(i, i - 1)] = 1.0;
        }
        c.complex_eigenvalues().iter().copied().collect()
    }

    /// Reflects poles outside the unit circle to `1/conj(p)`. Minimum-phase
    /// filters are returned unchanged.
    pub fn stabilized(&self) -> Self {
        if self.is_minimum_phase() {
            return self.clone();
        }
        let poles: Vec<Complex64> = self
            .poles()
            .into_iter()
            .map(|p| {
                let r = p.norm();
                if r >= 1.0 {
                    // keep the reflected pole a hair inside so the result is strictly stable
                    Complex64::from_polar((1.0 / r).min(1.0 - 1e-9), p.arg())
                } else {
                    p
                }
            })
            .collect();
        let mut poly = vec![Complex64::new(1.0, 0.0)];
        for p in poles {
            let mut next = vec![Complex64::new(0.0, 0.0); poly.len() + 1];
            for (i, c) in poly.iter().enumerate() {
                next[i] += c;
                next[i + 1] -= c * p;
            }
            poly = next;
        }
        Self {
            coefficients: poly.iter().map(|c| c.re).collect(),
        }
    }
}

/// `|1 / A(e^{iw})|` with the denominator floored at [`MAGNITUDE_FLOOR`].
pub fn filter_magnitude(filter: &AllPoleFilter, omega: f64) -> f64 {
    filter.magnitude(omega)
}

/// FIR filtering by the filter's denominator: `y[n] = sum_i a_i x[n-i]`.
pub fn inverse_filter(signal: &AudioBuffer, filter: &AllPoleFilter) -> AudioBuffer {
    AudioBuffer::new(filter.inverse(signal.samples()), signal.sample_rate())
        .expect("FIR output of finite input is finite")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn identity_filter_is_flat() {
        let f = AllPoleFilter::identity();
        for w in [0.0, 0.3, 1.0, 3.0] {
            assert_eq!(filter_magnitude(&f, w), 1.0);
        }
    }

    #[test]
    fn one_pole_magnitudes() {
        let f = AllPoleFilter::new(vec![1.0, -0.5]).unwrap();
        assert_relative_eq!(filter_magnitude(&f, 0.0), 2.0, epsilon = 1e-15);
        assert_relative_eq!(filter_magnitude(&f, PI), 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn magnitude_floor_applies() {
        // zero of A on the unit circle at DC
        let f = AllPoleFilter::new(vec![1.0, -1.0]).unwrap();
        assert_eq!(filter_magnitude(&f, 0.0), 1.0 / MAGNITUDE_FLOOR);
    }

    #[test]
    fn normalizes_leading_coefficient() {
        let f = AllPoleFilter::new(vec![2.0, -1.0]).unwrap();
        assert_eq!(f.coefficients(), &[1.0, -0.5]);
        assert!(AllPoleFilter::new(vec![]).is_err());
        assert!(AllPoleFilter::new(vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn inverse_of_difference_filter() {
        let f = AllPoleFilter::new(vec![1.0, -1.0]).unwrap();
        let mut x = vec![0.0; 5];
        x[0] = 1.0;
        let sig = AudioBuffer::new(x.clone(), 48000.0).unwrap();
        assert_eq!(
            inverse_filter(&sig, &f).samples(),
            &[1.0, -1.0, 0.0, 0.0, 0.0]
        );
        let id = AllPoleFilter::identity();
        assert_eq!(inverse_filter(&sig, &id).samples(), &x[..]);
    }

    #[test]
    fn stabilization_reflects_outside_poles() {
        // pole at 2
        let f = AllPoleFilter::new(vec![1.0, -2.0]).unwrap();
        assert!(!f.is_minimum_phase());
        let s = f.stabilized();
        assert!(s.is_minimum_phase());
        assert_relative_eq!(s.coefficients()[1], -0.5, epsilon = 1e-9);
    }

    #[test]
    fn poles_of_resonator() {
        let r: f64 = 0.9;
        let th: f64 = 0.7;
        let f = AllPoleFilter::new(vec![1.0, -2.0 * r * th.cos(), r * r]).unwrap();
        for p in f.poles() {
            assert_relative_eq!(p.norm(), r, epsilon = 1e-12);
            assert_relative_eq!(p.arg().abs(), th, epsilon = 1e-12);
        }
    }
}
