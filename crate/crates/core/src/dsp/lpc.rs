use super::AllPoleFilter;
use crate::error::{Error, Result};

/// Biased autocorrelation `r[k] = sum_n x[n] x[n+k]` for `k = 0..=max_lag`.
pub fn autocorrelation(x: &[f64], max_lag: usize) -> Vec<f64> {
    (0..=max_lag)
        .map(|k| {
            if k >= x.len() {
                0.0
            } else {
                x[k..].iter().zip(x).map(|(a, b)| a * b).sum()
            }
        })
        .collect()
}

/// Solves the Yule-Walker system by Levinson-Durbin recursion.
///
/// Returns the prediction polynomial `a_0..a_p` (with `a_0 = 1`) and the final
/// prediction error. Fails with [`Error::UnstableLpc`] as soon as the error
/// stops being positive.
pub fn levinson_durbin(r: &[f64], order: usize) -> Result<(Vec<f64>, f64)> {
    assert!(r.len() > order, "need order + 1 autocorrelation lags");
    let mut a = vec![0.0; order + 1];
    a[0] = 1.0;
    let mut err = r[0];
    if !(err > 0.0) {
        return Err(Error::UnstableLpc);
    }
    let mut prev = a.clone();
    for m in 1..=order {
        let acc: f64 = (0..m).map(|i| a[i] * r[m - i]).sum();
        let k = -acc / err;
        if !(k.abs() < 1.0) {
            return Err(Error::UnstableLpc);
        }
        prev[..m].copy_from_slice(&a[..m]);
        for i in 1..m {
            a[i] = prev[i] + k * prev[m - i];
        }
        a[m] = k;
        err *= 1.0 - k * k;
        if !(err > 0.0) || !err.is_finite() {
            return Err(Error::UnstableLpc);
        }
    }
    Ok((a, err))
}

/// Autocorrelation-method linear prediction of the given (already windowed) frame.
pub fn lpc(frame: &[f64], order: usize) -> Result<AllPoleFilter> {
    if frame.len() <= order {
        return Err(Error::InvalidInput(format!(
            "frame of {} samples is too short for order {order}",
            frame.len()
        )));
    }
    if frame.iter().all(|&x| x == 0.0) {
        return Err(Error::SilentFrame);
    }
    let r = autocorrelation(frame, order);
    let (a, _) = levinson_durbin(&r, order)?;
    AllPoleFilter::new(a)
}
