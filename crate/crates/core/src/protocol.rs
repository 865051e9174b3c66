//! Regular global measurements of the channel and success bookkeeping.
//!
//! A measurement succeeds when the channel is found empty, i.e. on the
//! projector onto {vac, 1, N}. After each success the state is renormalized
//! and evolution continues; any failure ends the protocol.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::build_generator;
use crate::error::{Error, Result};
use crate::fidelity::{
    find_first_peak, run_conditioned, FidelityTrace, PeakResult, TrajectoryDiagnostics,
};
use crate::state::{ChainConfig, DensityMatrix};

/// Success probabilities below this end the run with [`Error::ZeroProbability`].
pub const ZERO_PROBABILITY: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSchedule {
    pub tau: f64,
    pub t_max: f64,
    /// Also measure at `t_max` when it is not a multiple of `tau`.
    pub measure_at_end: bool,
}

impl MeasurementSchedule {
    pub fn new(tau: f64, t_max: f64) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "measurement interval must be positive, got {tau}"
            )));
        }
        if !(t_max.is_finite() && t_max >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "protocol horizon must be non-negative, got {t_max}"
            )));
        }
        Ok(MeasurementSchedule {
            tau,
            t_max,
            measure_at_end: false,
        })
    }

    pub fn with_final_measurement(mut self) -> Self {
        self.measure_at_end = true;
        self
    }

    /// k·τ for k = 1..=⌊t_max/τ⌋, plus `t_max` if requested.
    pub fn measurement_times(&self) -> Vec<f64> {
        let count = (self.t_max / self.tau * (1.0 + 1e-12)).floor() as usize;
        let mut times: Vec<f64> = (1..=count).map(|k| k as f64 * self.tau).collect();
        if self.measure_at_end {
            let last = times.last().copied().unwrap_or(0.0);
            if self.t_max - last > 1e-9 * self.t_max.max(1.0) {
                times.push(self.t_max);
            }
        }
        times
    }

    /// Grid on [0, t_max] containing every measurement time, with spacing
    /// at most `max_spacing` and equal steps inside each interval.
    pub fn grid(&self, max_spacing: f64) -> Vec<f64> {
        let mut breaks = self.measurement_times();
        if breaks.last().is_none_or(|&b| b < self.t_max) {
            breaks.push(self.t_max);
        }
        segmented_grid(&breaks, max_spacing)
    }
}

/// Uniform subdivision of [0, b₀], [b₀, b₁], … with steps ≤ `max_spacing`.
pub fn segmented_grid(breaks: &[f64], max_spacing: f64) -> Vec<f64> {
    let mut out = vec![0.0];
    let mut start = 0.0;
    for &end in breaks {
        let len = end - start;
        if len <= 0.0 {
            continue;
        }
        let steps = (len / max_spacing).ceil().max(1.0) as usize;
        let h = len / steps as f64;
        out.extend((1..steps).map(|j| start + j as f64 * h));
        out.push(end);
        start = end;
    }
    out
}

/// Zeroes every row and column touching a channel site (2..=N−1).
pub(crate) fn project_channel(op: &mut DMatrix<Complex64>, n_total: usize) {
    let zero = Complex64::new(0.0, 0.0);
    for k in 2..n_total {
        op.row_mut(k).fill(zero);
        op.column_mut(k).fill(zero);
    }
}

/// Projects `rho` on the empty channel. Returns the renormalized state and
/// the success probability.
pub fn channel_projector_apply(
    rho: &DensityMatrix,
    config: &ChainConfig,
) -> Result<(DensityMatrix, f64)> {
    if rho.dim() != config.dim() {
        return Err(Error::DimensionMismatch {
            expected: config.dim(),
            found: rho.dim(),
        });
    }
    let mut m = rho.entries().clone();
    project_channel(&mut m, config.n_total);
    let p = m.trace().re;
    if !(p >= ZERO_PROBABILITY) {
        return Err(Error::ZeroProbability { k: 1, p });
    }
    m /= Complex64::new(p, 0.0);
    Ok((DensityMatrix::from_matrix(m)?, p.min(1.0)))
}

#[derive(Debug, Clone)]
pub struct ProtocolResult {
    /// Success-conditioned fidelities, with pre/post samples at measurements.
    pub trace: FidelityTrace,
    /// Success probability of every measurement performed in the run.
    pub p_k: Vec<f64>,
    pub peak: Option<PeakResult>,
    /// Product of p_k over measurements at k·τ ≤ t_m.
    pub p_suc: Option<f64>,
    pub n_measurements: Option<usize>,
    pub diagnostics: TrajectoryDiagnostics,
}

impl ProtocolResult {
    pub fn t_m(&self) -> Option<f64> {
        self.peak.map(|p| p.t_m)
    }

    pub fn f_av_m(&self) -> Option<f64> {
        self.peak.map(|p| p.f_m)
    }

    pub fn require_peak(&self) -> Result<PeakResult> {
        self.peak.ok_or(Error::NoPeak)
    }
}

/// Number of measurement times k·τ with k·τ ≤ t_m.
pub fn measurements_before(schedule: &MeasurementSchedule, t_m: f64) -> usize {
    schedule
        .measurement_times()
        .iter()
        .filter(|&&t| t <= t_m * (1.0 + 1e-12))
        .count()
}

/// Runs the measured protocol on `time_grid`, which must start at 0 and
/// contain every measurement time of `schedule`.
pub fn run_protocol(
    config: &ChainConfig,
    schedule: &MeasurementSchedule,
    time_grid: &[f64],
) -> Result<ProtocolResult> {
    let run = run_conditioned(config, time_grid, Some(schedule))?;
    let peak = match find_first_peak(&run.trace) {
        Ok(p) => Some(p),
        Err(Error::NoPeak) => None,
        Err(e) => return Err(e),
    };
    let (p_suc, n_measurements) = match peak {
        Some(p) => {
            let j = measurements_before(schedule, p.t_m).min(run.p_k.len());
            (Some(run.p_k[..j].iter().product()), Some(j))
        }
        None => (None, None),
    };
    Ok(ProtocolResult {
        trace: run.trace,
        p_k: run.p_k,
        peak,
        p_suc,
        n_measurements,
        diagnostics: run.diagnostics,
    })
}

/// p^(1) … p^(k_max) for the excitation input under repeated conditioning.
pub fn success_probability_trace(config: &ChainConfig, tau: f64, k_max: usize) -> Result<Vec<f64>> {
    if k_max == 0 {
        return Err(Error::InvalidArgument("k_max must be at least 1".into()));
    }
    let prop = build_generator(config)?.propagator(tau)?;
    let d = config.dim();
    let mut rho = DMatrix::<Complex64>::zeros(d, d);
    rho[(1, 1)] = Complex64::new(1.0, 0.0);
    let mut out = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        rho = prop.apply(&rho);
        project_channel(&mut rho, config.n_total);
        let p = rho.trace().re;
        if !(p >= ZERO_PROBABILITY) {
            return Err(Error::ZeroProbability { k, p });
        }
        rho /= Complex64::new(p, 0.0);
        out.push(p.min(1.0));
    }
    Ok(out)
}
