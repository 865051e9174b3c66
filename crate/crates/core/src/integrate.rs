//! Adaptive Dormand–Prince 5(4) integration of matrix-valued linear ODEs.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub atol: f64,
    pub rtol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            atol: 1e-12,
            rtol: 1e-10,
        }
    }
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;

const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;

// 5th minus 4th order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy(
    y: &DMatrix<Complex64>,
    terms: &[(f64, &DMatrix<Complex64>)],
    h: f64,
) -> DMatrix<Complex64> {
    let mut out = y.clone();
    for &(w, k) in terms {
        out.zip_apply(k, |o, kv| *o += kv * (w * h));
    }
    out
}

/// Integrates `dy/dt = rhs(y)` from `0` to `duration`.
pub fn integrate<F>(
    y0: &DMatrix<Complex64>,
    duration: f64,
    tol: Tolerances,
    rhs: F,
) -> Result<DMatrix<Complex64>>
where
    F: Fn(&DMatrix<Complex64>) -> DMatrix<Complex64>,
{
    if !(duration >= 0.0) || !duration.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "duration must be finite and non-negative, got {duration}"
        )));
    }
    if duration == 0.0 {
        return Ok(y0.clone());
    }

    let mut t = 0.0;
    let mut y = y0.clone();
    let mut k1 = rhs(&y);

    // initial step from the derivative scale
    let ynorm = y.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let dnorm = k1.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut h = if dnorm > 0.0 {
        (0.01 * (ynorm.max(tol.atol)) / dnorm).min(duration)
    } else {
        duration
    };

    while t < duration {
        if t + h > duration {
            h = duration - t;
        }
        if h < 1e-13 * duration.max(1.0) && t + h < duration {
            return Err(Error::IntegratorFailure { t, step: h });
        }

        let k2 = rhs(&axpy(&y, &[(A21, &k1)], h));
        let k3 = rhs(&axpy(&y, &[(A31, &k1), (A32, &k2)], h));
        let k4 = rhs(&axpy(&y, &[(A41, &k1), (A42, &k2), (A43, &k3)], h));
        let k5 = rhs(&axpy(
            &y,
            &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)],
            h,
        ));
        let k6 = rhs(&axpy(
            &y,
            &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
            h,
        ));
        let y_new = axpy(
            &y,
            &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
            h,
        );
        let k7 = rhs(&y_new);

        let mut err = 0.0_f64;
        for idx in 0..y.len() {
            let e = (k1[idx] * E1
                + k3[idx] * E3
                + k4[idx] * E4
                + k5[idx] * E5
                + k6[idx] * E6
                + k7[idx] * E7)
                * h;
            let scale = tol.atol + tol.rtol * y[idx].norm().max(y_new[idx].norm());
            err = err.max(e.norm() / scale);
        }
        if !err.is_finite() {
            return Err(Error::IntegratorFailure { t, step: h });
        }

        if err <= 1.0 {
            t += h;
            y = y_new;
            k1 = k7;
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h *= factor;
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
        }
    }
    Ok(y)
}
