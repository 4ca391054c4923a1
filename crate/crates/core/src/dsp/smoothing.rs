use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmoothStatus {
    Applied,
    /// Window did not fit inside the series; values were passed through.
    WindowTooLong,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Smoothed {
    pub values: Vec<f64>,
    pub status: SmoothStatus,
}

/// Least-squares weights that evaluate a degree-`order` polynomial fit of the
/// samples at offsets `lo..=hi` at offset 0.
fn fit_weights(lo: isize, hi: isize, order: usize) -> Vec<f64> {
    let n = (hi - lo + 1) as usize;
    let order = order.min(n - 1);
    let v = DMatrix::from_fn(n, order + 1, |i, j| {
        ((lo + i as isize) as f64).powi(j as i32)
    });
    // row 0 of pinv(V) maps samples to the constant coefficient
    let pinv = v
        .svd(true, true)
        .pseudo_inverse(1e-12)
        .expect("svd with both factors");
    pinv.row(0).iter().copied().collect()
}

/// Savitzky-Golay smoothing with a centred odd `window` and polynomial `order`.
///
/// Near the edges the window is truncated to the available samples and the
/// polynomial is refitted on what remains (its degree capped by the sample count).
pub fn savitzky_golay(series: &[f64], window: usize, order: usize) -> Result<Smoothed> {
    if window.is_multiple_of(2) {
        return Err(Error::InvalidInput(format!("window {window} must be odd")));
    }
    if order >= window {
        return Err(Error::InvalidInput(format!(
            "polynomial order {order} must be below window {window}"
        )));
    }
    if window >= series.len() {
        log::warn!(
            "Savitzky-Golay window {window} not shorter than series ({}); leaving unsmoothed",
            series.len()
        );
        return Ok(Smoothed {
            values: series.to_vec(),
            status: SmoothStatus::WindowTooLong,
        });
    }
    let half = (window / 2) as isize;
    let n = series.len() as isize;
    let interior = fit_weights(-half, half, order);
    let values = (0..n)
        .map(|i| {
            let lo = (-half).max(-i);
            let hi = half.min(n - 1 - i);
            let w = if lo == -half && hi == half {
                interior.clone()
            } else {
                fit_weights(lo, hi, order)
            };
            let seg = DVector::from_fn((hi - lo + 1) as usize, |k, _| {
                series[(i + lo + k as isize) as usize]
            });
            w.iter().zip(seg.iter()).map(|(a, b)| a * b).sum()
        })
        .collect();
    Ok(Smoothed {
        values,
        status: SmoothStatus::Applied,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Independent route: polyfit each window by the normal equations and
    /// evaluate the fitted polynomial at the centre sample.
    fn brute_force(series: &[f64], window: usize, order: usize) -> Vec<f64> {
        let half = window / 2;
        let n = series.len();
        (0..n)
            .map(|i| {
                let lo = i.saturating_sub(half);
                let hi = (i + half).min(n - 1);
                let m = hi - lo + 1;
                let deg = order.min(m - 1);
                let xs: Vec<f64> = (lo..=hi).map(|j| j as f64 - i as f64).collect();
                let a = DMatrix::from_fn(m, deg + 1, |r, c| xs[r].powi(c as i32));
                let b = DVector::from_fn(m, |r, _| series[lo + r]);
                let coef = (a.transpose() * &a)
                    .lu()
                    .solve(&(a.transpose() * b))
                    .unwrap();
                coef[0]
            })
            .collect()
    }

    #[test]
    fn reproduces_constants_and_ramps() {
        let c = vec![3.25; 30];
        assert_eq!(savitzky_golay(&c, 9, 3).unwrap().values.len(), 30);
        for v in savitzky_golay(&c, 9, 3).unwrap().values {
            assert_abs_diff_eq!(v, 3.25, epsilon = 1e-9);
        }
        let ramp: Vec<f64> = (0..40).map(|i| 0.5 * i as f64 - 2.0).collect();
        for (a, b) in savitzky_golay(&ramp, 9, 1)
            .unwrap()
            .values
            .iter()
            .zip(&ramp)
        {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn reproduces_cubics() {
        let cubic: Vec<f64> = (0..25)
            .map(|i| {
                let x = i as f64 * 0.1;
                1.0 - 2.0 * x + 0.3 * x * x - 0.7 * x * x * x
            })
            .collect();
        for (a, b) in savitzky_golay(&cubic, 7, 3)
            .unwrap()
            .values
            .iter()
            .zip(&cubic)
        {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn matches_per_window_least_squares_and_denoises() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let clean: Vec<f64> = (0..120).map(|i| (i as f64 * 0.08).sin()).collect();
        let noisy: Vec<f64> = clean
            .iter()
            .map(|c| c + rng.random_range(-0.3..0.3))
            .collect();
        let out = savitzky_golay(&noisy, 9, 3).unwrap().values;
        for (a, b) in out.iter().zip(brute_force(&noisy, 9, 3)) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-9);
        }
        let resid = |x: &[f64]| {
            x.iter()
                .zip(&clean)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
        };
        assert!(resid(&out) < resid(&noisy));
    }

    #[test]
    fn short_series_passes_through() {
        let s = vec![1.0, 2.0, 5.0];
        let out = savitzky_golay(&s, 9, 3).unwrap();
        assert_eq!(out.status, SmoothStatus::WindowTooLong);
        assert_eq!(out.values, s);
    }

    #[test]
    fn rejects_invalid_shapes() {
        assert!(savitzky_golay(&[0.0; 20], 8, 3).is_err());
        assert!(savitzky_golay(&[0.0; 20], 5, 5).is_err());
    }
}
