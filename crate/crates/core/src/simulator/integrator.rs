use nalgebra::SVector;

use crate::error::{Error, Result};

/// Classical fourth-order Runge–Kutta step. Anything exogenous the
/// derivative closes over (control, disturbance) is held for the whole step.
pub fn rk4_step<const N: usize, F>(mut f: F, x: &SVector<f64, N>, t: f64, dt: f64) -> Result<SVector<f64, N>>
where
    F: FnMut(&SVector<f64, N>, f64) -> SVector<f64, N>,
{
    let mut eval = |x: &SVector<f64, N>, t: f64| {
        let d = f(x, t);
        if d.iter().all(|v| v.is_finite()) {
            Ok(d)
        } else {
            Err(Error::NonFiniteDerivative { t })
        }
    };
    let half = 0.5 * dt;
    let k1 = eval(x, t)?;
    let k2 = eval(&(x + k1 * half), t + half)?;
    let k3 = eval(&(x + k2 * half), t + half)?;
    let k4 = eval(&(x + k3 * dt), t + dt)?;
    Ok(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0))
}
