use crate::error::{Error, Result};

/// Classical fourth-order Runge–Kutta step for `y' = rhs(y)`.
///
/// Errors from the first stage are those of the current state and pass
/// through unchanged. Failures at later stages, or a non-finite result, mean
/// the step itself went bad and are reported as blowup.
pub(crate) fn rk4<F>(y: &[f64], t: f64, dt: f64, mut rhs: F) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let blowup = |_| Error::NumericalBlowup { t };
    let stage = |buf: &mut Vec<f64>, k: &[f64], a: f64| {
        for ((b, yi), ki) in buf.iter_mut().zip(y).zip(k) {
            *b = yi + a * dt * ki;
        }
    };
    let mut buf = vec![0.0; y.len()];
    let k1 = rhs(y)?;
    stage(&mut buf, &k1, 0.5);
    let k2 = rhs(&buf).map_err(blowup)?;
    stage(&mut buf, &k2, 0.5);
    let k3 = rhs(&buf).map_err(blowup)?;
    stage(&mut buf, &k3, 1.0);
    let k4 = rhs(&buf).map_err(blowup)?;
    let out: Vec<f64> = (0..y.len())
        .map(|i| y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalBlowup { t });
    }
    Ok(out)
}
