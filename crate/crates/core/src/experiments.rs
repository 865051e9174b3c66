//! Parameter sweeps and figure presets.
//!
//! Every sweep point is an independent protocol run. Points are sorted by
//! the swept value before they are dispatched, and results come back in that
//! order whatever the number of workers.

use serde::{Deserialize, Serialize};

use crate::analytics::effective_model;
use crate::error::{Error, Result};
use crate::exec::{map_ordered, Execution};
use crate::fidelity::{find_first_peak, transfer_fidelities, FidelityTrace};
use crate::protocol::{run_protocol, segmented_grid, MeasurementSchedule};
use crate::state::ChainConfig;

/// Horizon in units of the effective transfer time.
pub const DEFAULT_HORIZON_FACTOR: f64 = 2.5;
/// Grid points per effective transfer time.
pub const DEFAULT_POINTS_PER_TRANSFER: f64 = 400.0;
/// Largest chain the presets and sweeps accept.
pub const MAX_CHAIN_LENGTH: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordStatus {
    Ok,
    NoPeak,
    ZeroProbability,
}

impl RecordStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RecordStatus::Ok => "ok",
            RecordStatus::NoPeak => "no_peak",
            RecordStatus::ZeroProbability => "zero_probability",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweptParameter {
    Tau,
    Gamma,
    N,
}

impl SweptParameter {
    pub fn as_str(self) -> &'static str {
        match self {
            SweptParameter::Tau => "tau",
            SweptParameter::Gamma => "gamma",
            SweptParameter::N => "n",
        }
    }
}

/// One row of a sweep. Peak quantities are `None` unless `status` is `Ok`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub swept_name: SweptParameter,
    pub swept_value: f64,
    pub n: usize,
    pub j_boundary: f64,
    pub gamma: f64,
    /// 0 when no measurements are made.
    pub tau: f64,
    pub f_exc_m: Option<f64>,
    pub f_coh_m: Option<f64>,
    pub f_av_m: Option<f64>,
    pub t_m: Option<f64>,
    pub p_suc: Option<f64>,
    pub n_measurements: Option<usize>,
    pub status: RecordStatus,
}

/// Default protocol horizon for `config`.
pub fn default_t_max(config: &ChainConfig) -> Result<f64> {
    Ok(DEFAULT_HORIZON_FACTOR * effective_model(config)?.t_m_eff)
}

/// Default maximal grid spacing for peak searches.
pub fn default_spacing(config: &ChainConfig) -> Result<f64> {
    Ok(effective_model(config)?.t_m_eff / DEFAULT_POINTS_PER_TRANSFER)
}

fn schedule_for(tau: Option<f64>, t_max: f64) -> Result<Option<MeasurementSchedule>> {
    match tau {
        None => Ok(None),
        Some(tau) => Ok(Some(MeasurementSchedule::new(tau, t_max)?)),
    }
}

/// `n_points` uniform samples on [0, t_max], augmented with every
/// measurement time of the optional schedule.
pub fn trace_grid(
    t_max: f64,
    n_points: usize,
    schedule: Option<&MeasurementSchedule>,
) -> Result<Vec<f64>> {
    if n_points < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 points, got {n_points}"
        )));
    }
    if !(t_max.is_finite() && t_max > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "t_max must be positive, got {t_max}"
        )));
    }
    let uniform = (0..n_points).map(|i| t_max * i as f64 / (n_points - 1) as f64);
    let mut grid: Vec<f64> = match schedule {
        None => return Ok(uniform.collect()),
        Some(s) => uniform.chain(s.measurement_times()).collect(),
    };
    grid.sort_by(f64::total_cmp);
    // measurement times win over uniform samples that nearly coincide
    let tol = 1e-9 * t_max;
    let marks = schedule.map(|s| s.measurement_times()).unwrap_or_default();
    let is_mark = |t: f64| marks.iter().any(|&m| (m - t).abs() <= tol);
    let mut out: Vec<f64> = Vec::with_capacity(grid.len());
    for t in grid {
        match out.last_mut() {
            Some(last) if t - *last <= tol => {
                if is_mark(t) {
                    *last = t;
                }
            }
            _ => out.push(t),
        }
    }
    out[0] = 0.0;
    Ok(out)
}

/// Fidelity trace for plotting. `tau` of `None` disables measurements.
pub fn trace_experiment(
    config: &ChainConfig,
    tau: Option<f64>,
    t_max: f64,
    n_points: usize,
) -> Result<FidelityTrace> {
    if n_points < 100 {
        return Err(Error::InvalidArgument(format!(
            "trace needs at least 100 points, got {n_points}"
        )));
    }
    let schedule = schedule_for(tau, t_max)?;
    let grid = trace_grid(t_max, n_points, schedule.as_ref())?;
    transfer_fidelities(config, &grid, schedule.as_ref())
}

/// Horizon and grid resolution shared by all points of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SweepOptions {
    /// Defaults to [`default_t_max`] of each point.
    pub t_max: Option<f64>,
    pub exec: Execution,
}

/// Runs one sweep point and folds the recoverable physics outcomes into
/// the record status.
pub fn run_point(
    config: &ChainConfig,
    tau: Option<f64>,
    t_max: Option<f64>,
    swept: SweptParameter,
) -> Result<SweepRecord> {
    let t_max = match t_max {
        Some(t) => t,
        None => default_t_max(config)?,
    };
    let spacing = default_spacing(config)?;
    let swept_value = match swept {
        SweptParameter::Tau => tau.unwrap_or(0.0),
        SweptParameter::Gamma => config.gamma,
        SweptParameter::N => config.n_total as f64,
    };
    let mut record = SweepRecord {
        swept_name: swept,
        swept_value,
        n: config.n_total,
        j_boundary: config.j_boundary,
        gamma: config.gamma,
        tau: tau.unwrap_or(0.0),
        f_exc_m: None,
        f_coh_m: None,
        f_av_m: None,
        t_m: None,
        p_suc: None,
        n_measurements: None,
        status: RecordStatus::Ok,
    };
    let outcome = match schedule_for(tau, t_max)? {
        None => {
            let grid = segmented_grid(&[t_max], spacing);
            transfer_fidelities(config, &grid, None)
                .and_then(|trace| find_first_peak(&trace).map(|peak| (trace, peak, 1.0, 0)))
        }
        Some(schedule) => {
            let grid = schedule.grid(spacing);
            run_protocol(config, &schedule, &grid).and_then(|res| {
                let peak = res.require_peak()?;
                Ok((
                    res.trace,
                    peak,
                    res.p_suc.unwrap_or(1.0),
                    res.n_measurements.unwrap_or(0),
                ))
            })
        }
    };
    match outcome {
        Ok((trace, peak, p_suc, n_measurements)) => {
            record.f_exc_m = Some(trace.f_exc[peak.index]);
            record.f_coh_m = Some(trace.f_coh[peak.index]);
            record.f_av_m = Some(peak.f_m);
            record.t_m = Some(peak.t_m);
            record.p_suc = Some(p_suc);
            record.n_measurements = Some(n_measurements);
        }
        Err(Error::NoPeak) => record.status = RecordStatus::NoPeak,
        Err(Error::ZeroProbability { .. }) => record.status = RecordStatus::ZeroProbability,
        Err(e) => return Err(e),
    }
    Ok(record)
}

fn sorted(values: &[f64], what: &str) -> Result<Vec<f64>> {
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "{what} value {v} is not finite"
        )));
    }
    let mut out = values.to_vec();
    out.sort_by(f64::total_cmp);
    Ok(out)
}

/// One protocol run per τ. A τ of 0 gives the unmeasured reference point.
pub fn sweep_tau(
    config: &ChainConfig,
    taus: &[f64],
    opts: SweepOptions,
) -> Result<Vec<SweepRecord>> {
    config.validate()?;
    let taus = sorted(taus, "tau")?;
    if let Some(t) = taus.iter().find(|&&t| t < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tau must be non-negative, got {t}"
        )));
    }
    map_ordered(&taus, opts.exec, |&tau| {
        let tau = (tau > 0.0).then_some(tau);
        run_point(config, tau, opts.t_max, SweptParameter::Tau)
    })
    .into_iter()
    .collect()
}

pub fn sweep_gamma(
    config: &ChainConfig,
    gammas: &[f64],
    tau: Option<f64>,
    opts: SweepOptions,
) -> Result<Vec<SweepRecord>> {
    let gammas = sorted(gammas, "gamma")?;
    let configs = gammas
        .iter()
        .map(|&g| config.with_gamma(g))
        .collect::<Result<Vec<_>>>()?;
    map_ordered(&configs, opts.exec, |cfg| {
        run_point(cfg, tau, opts.t_max, SweptParameter::Gamma)
    })
    .into_iter()
    .collect()
}

/// Fixed couplings and γ over several chain lengths, each dephased on its
/// whole channel.
pub fn sweep_length(
    lengths: &[usize],
    j_boundary: f64,
    gamma: f64,
    tau: Option<f64>,
    opts: SweepOptions,
) -> Result<Vec<SweepRecord>> {
    let mut lengths = lengths.to_vec();
    lengths.sort_unstable();
    if let Some(&n) = lengths.iter().find(|&&n| n > MAX_CHAIN_LENGTH) {
        return Err(Error::InvalidArgument(format!(
            "chain length {n} exceeds the limit of {MAX_CHAIN_LENGTH}"
        )));
    }
    let configs = lengths
        .iter()
        .map(|&n| ChainConfig::new(n, j_boundary, gamma))
        .collect::<Result<Vec<_>>>()?;
    map_ordered(&configs, opts.exec, |cfg| {
        run_point(cfg, tau, opts.t_max, SweptParameter::N)
    })
    .into_iter()
    .collect()
}

/// `start, start + step, …` up to and including `stop` (within rounding).
pub fn linspace_step(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let count = ((stop - start) / step + 1e-9).floor() as usize;
    (0..=count).map(|k| start + k as f64 * step).collect()
}

pub fn default_tau_grid() -> Vec<f64> {
    linspace_step(2.0, 160.0, 2.0)
}

pub fn default_gamma_grid() -> Vec<f64> {
    linspace_step(0.0, 0.1, 0.005)
}

pub fn default_length_grid() -> Vec<usize> {
    vec![6, 8, 10, 12]
}

/// Ordinary least-squares line with its coefficient of determination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(Error::InvalidArgument(
            "linear fit needs at least 3 paired points".into(),
        ));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument(
            "linear fit needs distinct abscissae".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Fit of ln F^av_m against γ over the records with a peak.
pub fn log_fidelity_fit(records: &[SweepRecord]) -> Result<LinearFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = records
        .iter()
        .filter_map(|r| r.f_av_m.map(|f| (r.gamma, f.ln())))
        .unzip();
    linear_fit(&xs, &ys)
}

#[derive(Debug, Clone)]
pub enum DatasetData {
    Trace(FidelityTrace),
    Sweep(Vec<SweepRecord>),
}

/// Named output of a preset; the name is used as the file stem.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub data: DatasetData,
}

pub const FIGURE_IDS: [u8; 7] = [2, 3, 4, 5, 6, 7, 8];

enum Job {
    Trace {
        name: String,
        config: ChainConfig,
        tau: Option<f64>,
    },
    TauSweep {
        name: String,
        config: ChainConfig,
        taus: Vec<f64>,
    },
    GammaSweep {
        name: String,
        config: ChainConfig,
        gammas: Vec<f64>,
        tau: Option<f64>,
    },
    LengthSweep {
        name: String,
        lengths: Vec<usize>,
        gamma: f64,
        tau: f64,
    },
}

const PRESET_J_BOUNDARY: f64 = 0.05;
const PRESET_TRACE_POINTS: usize = 2000;
const MEASURED_TAU: f64 = 150.0;

fn chain(n: usize, gamma: f64) -> Result<ChainConfig> {
    ChainConfig::new(n, PRESET_J_BOUNDARY, gamma)
}

fn jobs_for(figure: u8) -> Result<Vec<Job>> {
    let jobs = match figure {
        2 => {
            let mut jobs = [0.0, 0.01, 0.02, 0.04]
                .iter()
                .map(|&g| {
                    Ok(Job::Trace {
                        name: format!("fig2_trace_gamma{g}"),
                        config: chain(12, g)?,
                        tau: None,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            jobs.push(Job::GammaSweep {
                name: "fig2_gamma_sweep".into(),
                config: chain(12, 0.0)?,
                gammas: default_gamma_grid(),
                tau: None,
            });
            jobs
        }
        3 => [6.0, 7.0, 10.0, 20.0]
            .iter()
            .map(|&tau| {
                Ok(Job::Trace {
                    name: format!("fig3_trace_tau{tau}"),
                    config: chain(12, 0.0)?,
                    tau: Some(tau),
                })
            })
            .collect::<Result<Vec<_>>>()?,
        4 => vec![Job::TauSweep {
            name: "fig4_tau_sweep".into(),
            config: chain(12, 0.0)?,
            taus: linspace_step(1.0, 160.0, 1.0),
        }],
        5 => {
            let mut jobs = Vec::new();
            for g in [0.02, 0.04] {
                for tau in [None, Some(20.0), Some(MEASURED_TAU)] {
                    let label = tau.map_or("none".to_string(), |t| t.to_string());
                    jobs.push(Job::Trace {
                        name: format!("fig5_trace_gamma{g}_tau{label}"),
                        config: chain(12, g)?,
                        tau,
                    });
                }
            }
            jobs
        }
        6 => [0.02, 0.04]
            .iter()
            .map(|&g| {
                Ok(Job::TauSweep {
                    name: format!("fig6_tau_sweep_gamma{g}"),
                    config: chain(12, g)?,
                    taus: default_tau_grid(),
                })
            })
            .collect::<Result<Vec<_>>>()?,
        7 => [6, 12]
            .iter()
            .map(|&n| {
                Ok(Job::GammaSweep {
                    name: format!("fig7_gamma_sweep_n{n}"),
                    config: chain(n, 0.0)?,
                    gammas: default_gamma_grid(),
                    tau: Some(MEASURED_TAU),
                })
            })
            .collect::<Result<Vec<_>>>()?,
        8 => [0.02, 0.04]
            .iter()
            .map(|&g| Job::LengthSweep {
                name: format!("fig8_length_sweep_gamma{g}"),
                lengths: (6..=MAX_CHAIN_LENGTH).step_by(2).collect(),
                gamma: g,
                tau: MEASURED_TAU,
            })
            .collect(),
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown figure {other}; expected one of 2 to 8"
            )))
        }
    };
    Ok(jobs)
}

/// Data behind one figure preset. Every dataset uses J′ = 0.05 and the
/// default horizon and resolution.
pub fn figure_datasets(figure: u8, exec: Execution) -> Result<Vec<Dataset>> {
    let jobs = jobs_for(figure)?;
    let opts = SweepOptions { t_max: None, exec };
    // sweeps parallelize internally, traces across jobs
    let traces: Vec<Result<Option<Dataset>>> = map_ordered(&jobs, exec, |job| match job {
        Job::Trace { name, config, tau } => {
            let t_max = default_t_max(config)?;
            let trace = trace_experiment(config, *tau, t_max, PRESET_TRACE_POINTS)?;
            Ok(Some(Dataset {
                name: name.clone(),
                data: DatasetData::Trace(trace),
            }))
        }
        _ => Ok(None),
    });
    let mut out = Vec::with_capacity(jobs.len());
    for (job, trace) in jobs.iter().zip(traces) {
        if let Some(ds) = trace? {
            out.push(ds);
            continue;
        }
        let (name, records) = match job {
            Job::Trace { .. } => unreachable!("traces are handled above"),
            Job::TauSweep { name, config, taus } => (name, sweep_tau(config, taus, opts)?),
            Job::GammaSweep {
                name,
                config,
                gammas,
                tau,
            } => (name, sweep_gamma(config, gammas, *tau, opts)?),
            Job::LengthSweep {
                name,
                lengths,
                gamma,
                tau,
            } => (
                name,
                sweep_length(lengths, PRESET_J_BOUNDARY, *gamma, Some(*tau), opts)?,
            ),
        };
        out.push(Dataset {
            name: name.clone(),
            data: DatasetData::Sweep(records),
        });
    }
    Ok(out)
}
