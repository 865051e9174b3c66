//! Excitation, coherence and Haar-averaged transfer fidelities.
//!
//! The channel map ξ_t is linear, so two evolutions are enough: the
//! excitation input |1⟩⟨1| gives F^exc as its receiver population, and the
//! operator |vac⟩⟨1| gives F^coh as the modulus of its (vac, N) element. The
//! average over the Bloch sphere is then 1/2 + F^exc/6 + F^coh/3.
//!
//! Under a measurement schedule both operators are projected on the empty
//! channel at every measurement time. The excitation branch is renormalized
//! by its own success probability p; the vacuum branch always survives, so
//! the coherence is renormalized by √(1 · p).

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analytics::effective_model;
use crate::dynamics::{build_generator, Generator, Propagator};
use crate::error::{Error, Result};
use crate::exec::{map_range, Execution};
use crate::protocol::{project_channel, MeasurementSchedule, ZERO_PROBABILITY};
use crate::state::{
    hermiticity_deviation, initial_state, min_hermitian_eigenvalue, reduce_to_receiver,
    ChainConfig, SenderState, HERMITICITY_TOL, PSD_TOL, TRACE_TOL,
};

/// Minimum rise above the starting value for a local maximum to count as a peak.
pub const PEAK_EPSILON: f64 = 1e-4;

/// Where a sample sits relative to the measurements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleKind {
    Evolved,
    /// Just before a measurement; followed by a `PostMeasurement` sample at
    /// the same time.
    PreMeasurement,
    PostMeasurement,
}

impl SampleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SampleKind::Evolved => "evolved",
            SampleKind::PreMeasurement => "pre",
            SampleKind::PostMeasurement => "post",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FidelityTrace {
    pub times: Vec<f64>,
    pub f_exc: Vec<f64>,
    pub f_coh: Vec<f64>,
    pub f_av: Vec<f64>,
    pub kinds: Vec<SampleKind>,
    pub config: ChainConfig,
    pub schedule: Option<MeasurementSchedule>,
}

pub fn average_fidelity(f_exc: f64, f_coh: f64) -> f64 {
    0.5 + f_exc / 6.0 + f_coh / 3.0
}

impl FidelityTrace {
    /// Checks lengths, time ordering and the F^av identity.
    pub fn new(
        times: Vec<f64>,
        f_exc: Vec<f64>,
        f_coh: Vec<f64>,
        f_av: Vec<f64>,
        kinds: Vec<SampleKind>,
        config: ChainConfig,
        schedule: Option<MeasurementSchedule>,
    ) -> Result<Self> {
        let n = times.len();
        if [f_exc.len(), f_coh.len(), f_av.len(), kinds.len()]
            .iter()
            .any(|&l| l != n)
        {
            return Err(Error::InvalidArgument(
                "trace columns differ in length".into(),
            ));
        }
        for i in 1..n {
            let ok = times[i] > times[i - 1]
                || (times[i] == times[i - 1]
                    && kinds[i - 1] == SampleKind::PreMeasurement
                    && kinds[i] == SampleKind::PostMeasurement);
            if !ok {
                return Err(Error::InvalidArgument(format!(
                    "trace times not increasing at index {i}"
                )));
            }
        }
        for i in 0..n {
            if (average_fidelity(f_exc[i], f_coh[i]) - f_av[i]).abs() > 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "average fidelity inconsistent at index {i}"
                )));
            }
        }
        Ok(FidelityTrace {
            times,
            f_exc,
            f_coh,
            f_av,
            kinds,
            config,
            schedule,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakResult {
    pub t_m: f64,
    pub f_m: f64,
    pub index: usize,
}

/// Peak-search parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakOptions {
    /// Minimum rise above the initial value.
    pub epsilon: f64,
    /// Half-width of the time window over which a maximum must dominate.
    pub window: f64,
}

impl PeakOptions {
    /// Window of a quarter of the effective transfer time, which is longer
    /// than every channel-frequency ripple and shorter than the rise to the
    /// first transfer peak.
    pub fn for_config(config: &ChainConfig) -> Self {
        let window = effective_model(config)
            .map(|m| 0.25 * m.t_m_eff)
            .unwrap_or(0.0);
        PeakOptions {
            epsilon: PEAK_EPSILON,
            window,
        }
    }
}

/// First maximum of F^av that rises at least `epsilon` above the initial
/// value and is not exceeded anywhere within `window` on either side.
///
/// The dominance window discards the ripples at channel frequencies that
/// ride on the slow transfer envelope. A candidate closer than `window` to
/// the end of the trace is unconfirmed and not reported.
///
/// Pre-measurement samples are skipped: the state at a measurement time is
/// the conditioned one. `t_m` is refined by a parabola through the three
/// bracketing samples when they lie on one measurement-free segment; `f_m`
/// is always the sampled value.
pub fn find_first_peak(trace: &FidelityTrace) -> Result<PeakResult> {
    find_first_peak_with(trace, PeakOptions::for_config(&trace.config))
}

pub fn find_first_peak_with(trace: &FidelityTrace, opts: PeakOptions) -> Result<PeakResult> {
    let idx: Vec<usize> = (0..trace.len())
        .filter(|&i| trace.kinds[i] != SampleKind::PreMeasurement)
        .collect();
    if idx.len() < 3 {
        return Err(Error::InvalidArgument(
            "peak search needs at least 3 samples".into(),
        ));
    }
    let f = &trace.f_av;
    let t = &trace.times;
    let floor = f[idx[0]] + opts.epsilon;
    let t_end = t[*idx.last().unwrap()];
    for pos in 1..idx.len() - 1 {
        let (a, b, c) = (idx[pos - 1], idx[pos], idx[pos + 1]);
        if !(f[a] <= f[b] && f[b] >= f[c] && f[b] > floor) {
            continue;
        }
        if t[b] + opts.window > t_end {
            break;
        }
        let dominated = idx
            .iter()
            .filter(|&&j| (t[j] - t[b]).abs() <= opts.window)
            .any(|&j| f[j] > f[b]);
        if dominated {
            continue;
        }
        let smooth = trace.kinds[b] != SampleKind::PostMeasurement
            && trace.kinds[c] != SampleKind::PostMeasurement;
        let t_m = if smooth {
            parabolic_vertex((t[a], f[a]), (t[b], f[b]), (t[c], f[c]))
        } else {
            t[b]
        };
        return Ok(PeakResult {
            t_m,
            f_m: f[b],
            index: b,
        });
    }
    Err(Error::NoPeak)
}

fn parabolic_vertex(p0: (f64, f64), p1: (f64, f64), p2: (f64, f64)) -> f64 {
    let (x0, y0) = p0;
    let (x1, y1) = p1;
    let (x2, y2) = p2;
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let curvature = (d12 - d01) / (x2 - x0);
    if !(curvature < 0.0) {
        return x1;
    }
    // vertex of the interpolating parabola
    let x = 0.5 * (x0 + x1) - d01 / (2.0 * curvature);
    x.clamp(x0, x2)
}

/// Worst invariant deviations seen along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrajectoryDiagnostics {
    pub max_trace_deviation: f64,
    pub max_hermiticity_deviation: f64,
    pub min_eigenvalue: f64,
    pub states_checked: usize,
}

impl TrajectoryDiagnostics {
    fn new() -> Self {
        TrajectoryDiagnostics {
            min_eigenvalue: f64::INFINITY,
            ..Default::default()
        }
    }

    fn check(&mut self, state: &DMatrix<Complex64>) -> Result<()> {
        let tr = (state.trace() - Complex64::new(1.0, 0.0)).norm();
        let herm = hermiticity_deviation(state);
        let eig = min_hermitian_eigenvalue(state);
        self.max_trace_deviation = self.max_trace_deviation.max(tr);
        self.max_hermiticity_deviation = self.max_hermiticity_deviation.max(herm);
        self.min_eigenvalue = self.min_eigenvalue.min(eig);
        self.states_checked += 1;
        if tr > TRACE_TOL {
            return Err(Error::InvariantViolation {
                what: "trace deviation",
                value: tr,
            });
        }
        if herm > HERMITICITY_TOL {
            return Err(Error::InvariantViolation {
                what: "hermiticity deviation",
                value: herm,
            });
        }
        if eig < -PSD_TOL {
            return Err(Error::InvariantViolation {
                what: "minimum eigenvalue",
                value: eig,
            });
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &TrajectoryDiagnostics) {
        self.max_trace_deviation = self.max_trace_deviation.max(other.max_trace_deviation);
        self.max_hermiticity_deviation = self
            .max_hermiticity_deviation
            .max(other.max_hermiticity_deviation);
        self.min_eigenvalue = self.min_eigenvalue.min(other.min_eigenvalue);
        self.states_checked += other.states_checked;
    }
}

/// Propagators for the distinct step lengths of a time grid.
pub(crate) struct PropagatorCache<'a> {
    generator: &'a Generator,
    entries: Vec<Propagator>,
}

impl<'a> PropagatorCache<'a> {
    pub(crate) fn new(generator: &'a Generator) -> Self {
        PropagatorCache {
            generator,
            entries: Vec::new(),
        }
    }

    pub(crate) fn get(&mut self, dt: f64) -> Result<&Propagator> {
        // grids built from sums of equal steps differ in the last few ulps
        let pos = self
            .entries
            .iter()
            .position(|p| (p.duration() - dt).abs() <= 1e-11 * dt.max(1.0));
        let pos = match pos {
            Some(p) => p,
            None => {
                self.entries.push(self.generator.propagator(dt)?);
                self.entries.len() - 1
            }
        };
        Ok(&self.entries[pos])
    }
}

/// Output of a (possibly measured) transfer run.
#[derive(Debug, Clone)]
pub(crate) struct ConditionedRun {
    pub trace: FidelityTrace,
    pub p_k: Vec<f64>,
    pub diagnostics: TrajectoryDiagnostics,
}

fn unit(dim: usize, row: usize, col: usize) -> DMatrix<Complex64> {
    let mut m = DMatrix::zeros(dim, dim);
    m[(row, col)] = Complex64::new(1.0, 0.0);
    m
}

pub(crate) fn validate_grid(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::InvalidArgument("time grid is empty".into()));
    }
    if times[0] != 0.0 {
        return Err(Error::InvalidArgument("time grid must start at 0".into()));
    }
    if let Some(i) = (1..times.len()).find(|&i| !(times[i] > times[i - 1]) || !times[i].is_finite())
    {
        return Err(Error::InvalidArgument(format!(
            "time grid not strictly increasing at index {i}"
        )));
    }
    Ok(())
}

pub(crate) fn run_conditioned(
    config: &ChainConfig,
    times: &[f64],
    schedule: Option<&MeasurementSchedule>,
) -> Result<ConditionedRun> {
    config.validate()?;
    validate_grid(times)?;
    let measurements = match schedule {
        Some(s) => s.measurement_times(),
        None => Vec::new(),
    };
    // map each measurement onto its grid index
    let mut measure_at = vec![false; times.len()];
    for &tm in &measurements {
        let tol = 1e-9 * tm.max(1.0);
        match times.iter().position(|&t| (t - tm).abs() <= tol) {
            Some(i) => measure_at[i] = true,
            None if tm > *times.last().unwrap() => {}
            None => {
                return Err(Error::InvalidArgument(format!(
                    "measurement time {tm} missing from the time grid"
                )))
            }
        }
    }

    let generator = build_generator(config)?;
    let mut cache = PropagatorCache::new(&generator);
    let n = config.n_total;
    let d = config.dim();
    let vacuum = unit(d, 0, 0);
    let mut exc = unit(d, 1, 1);
    let mut coh = unit(d, 0, 1);

    let cap = times.len() + measurements.len();
    let mut out_t = Vec::with_capacity(cap);
    let mut out_exc = Vec::with_capacity(cap);
    let mut out_coh = Vec::with_capacity(cap);
    let mut out_av = Vec::with_capacity(cap);
    let mut kinds = Vec::with_capacity(cap);
    let mut p_k = Vec::new();
    let mut diagnostics = TrajectoryDiagnostics::new();

    let mut record = |t: f64,
                      exc: &DMatrix<Complex64>,
                      coh: &DMatrix<Complex64>,
                      kind: SampleKind,
                      diag: &mut TrajectoryDiagnostics|
     -> Result<()> {
        diag.check(exc)?;
        // equal-weight superposition input: ½(V + E + C + C†)
        let plus = (&vacuum + exc + coh + coh.adjoint()) * Complex64::new(0.5, 0.0);
        diag.check(&plus)?;
        let fe = exc[(n, n)].re;
        let fc = coh[(0, n)].norm();
        out_t.push(t);
        out_exc.push(fe);
        out_coh.push(fc);
        out_av.push(average_fidelity(fe, fc));
        kinds.push(kind);
        Ok(())
    };

    record(0.0, &exc, &coh, SampleKind::Evolved, &mut diagnostics)?;
    for i in 1..times.len() {
        let prop = cache.get(times[i] - times[i - 1])?;
        exc = prop.apply(&exc);
        coh = prop.apply(&coh);
        if measure_at[i] {
            record(
                times[i],
                &exc,
                &coh,
                SampleKind::PreMeasurement,
                &mut diagnostics,
            )?;
            project_channel(&mut exc, n);
            project_channel(&mut coh, n);
            let p = exc.trace().re;
            if !(p >= ZERO_PROBABILITY) {
                return Err(Error::ZeroProbability {
                    k: p_k.len() + 1,
                    p,
                });
            }
            p_k.push(p.min(1.0));
            exc /= Complex64::new(p, 0.0);
            coh /= Complex64::new(p.sqrt(), 0.0);
            record(
                times[i],
                &exc,
                &coh,
                SampleKind::PostMeasurement,
                &mut diagnostics,
            )?;
        } else {
            record(times[i], &exc, &coh, SampleKind::Evolved, &mut diagnostics)?;
        }
    }

    let trace = FidelityTrace::new(
        out_t,
        out_exc,
        out_coh,
        out_av,
        kinds,
        config.clone(),
        schedule.cloned(),
    )?;
    Ok(ConditionedRun {
        trace,
        p_k,
        diagnostics,
    })
}

/// F^exc, F^coh and F^av on `times`, conditioned on successful channel
/// measurements when a schedule is given.
pub fn transfer_fidelities(
    config: &ChainConfig,
    times: &[f64],
    schedule: Option<&MeasurementSchedule>,
) -> Result<FidelityTrace> {
    Ok(run_conditioned(config, times, schedule)?.trace)
}

/// Mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

/// Haar-uniform sender angles for sample `index`; independent of how
/// samples are scheduled across workers.
pub fn haar_sample(seed: u64, index: u64) -> SenderState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let cos_theta: f64 = 2.0 * rng.random::<f64>() - 1.0;
    let phi = 2.0 * std::f64::consts::PI * rng.random::<f64>();
    SenderState::new(cos_theta.clamp(-1.0, 1.0).acos(), phi)
}

/// Monte Carlo average of ⟨ψ_s|ρ_N(t)|ψ_s⟩ over Haar-random sender states,
/// evolving each full initial state without the F^exc/F^coh decomposition.
///
/// The receiver undoes the channel's fixed coherence phase with a local
/// σᶻ rotation before the overlap is taken. The phase is read off the
/// evolved equal-superposition input.
pub fn haar_average_mc(
    config: &ChainConfig,
    t: f64,
    n_samples: usize,
    seed: u64,
) -> Result<Estimate> {
    haar_average_mc_with(config, t, n_samples, seed, Execution::default())
}

pub fn haar_average_mc_with(
    config: &ChainConfig,
    t: f64,
    n_samples: usize,
    seed: u64,
    exec: Execution,
) -> Result<Estimate> {
    if n_samples < 100 {
        return Err(Error::InvalidArgument(format!(
            "at least 100 samples required, got {n_samples}"
        )));
    }
    let prop = build_generator(config)?.propagator(t)?;
    let n = config.n_total;
    let receiver = |sender: SenderState| -> Result<nalgebra::Matrix2<Complex64>> {
        let rho = prop.apply(initial_state(config, sender)?.entries());
        reduce_to_receiver(&rho, n)
    };
    let reference = receiver(SenderState::new(std::f64::consts::FRAC_PI_2, 0.0))?;
    let coherence = reference[(0, 1)];
    let correction = if coherence.norm() > 0.0 {
        coherence.conj() / coherence.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    let samples: Vec<Result<f64>> = map_range(n_samples, exec, |i| {
        let sender = haar_sample(seed, i as u64);
        let mut r = receiver(sender)?;
        r[(0, 1)] *= correction;
        r[(1, 0)] *= correction.conj();
        let (a0, a1) = sender.amplitudes();
        let f = a0.conj() * r[(0, 0)] * a0
            + a0.conj() * r[(0, 1)] * a1
            + a1.conj() * r[(1, 0)] * a0
            + a1.conj() * r[(1, 1)] * a1;
        Ok(f.re)
    });
    let values: Vec<f64> = samples.into_iter().collect::<Result<_>>()?;
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0);
    Ok(Estimate {
        mean,
        stderr: (var / m).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::{effective_average_fidelity, effective_model};

    fn grid(t_max: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| t_max * i as f64 / (n - 1) as f64).collect()
    }

    fn trace_from(f_av: Vec<f64>) -> FidelityTrace {
        // f_coh carries the deviation so that the identity holds exactly
        let n = f_av.len();
        let f_coh: Vec<f64> = f_av.iter().map(|f| 3.0 * (f - 0.5)).collect();
        let f_av = f_coh.iter().map(|&c| average_fidelity(0.0, c)).collect();
        FidelityTrace::new(
            grid(n as f64 - 1.0, n),
            vec![0.0; n],
            f_coh,
            f_av,
            vec![SampleKind::Evolved; n],
            ChainConfig::new(4, 0.05, 0.0).unwrap(),
            None,
        )
        .unwrap()
    }

    #[test]
    fn t0_values() {
        let cfg = ChainConfig::new(6, 0.05, 0.02).unwrap();
        let tr = transfer_fidelities(&cfg, &[0.0, 1.0], None).unwrap();
        assert_eq!(tr.f_exc[0], 0.0);
        assert_eq!(tr.f_coh[0], 0.0);
        assert_eq!(tr.f_av[0], 0.5);
    }

    #[test]
    fn trace_rejects_inconsistent_columns() {
        let cfg = ChainConfig::new(4, 0.05, 0.0).unwrap();
        let k = vec![SampleKind::Evolved; 2];
        assert!(FidelityTrace::new(
            vec![0.0, 1.0],
            vec![0.0; 2],
            vec![0.0; 2],
            vec![0.5, 0.6],
            k.clone(),
            cfg.clone(),
            None
        )
        .is_err());
        assert!(FidelityTrace::new(
            vec![0.0, 0.0],
            vec![0.0; 2],
            vec![0.0; 2],
            vec![0.5; 2],
            k,
            cfg,
            None
        )
        .is_err());
    }

    #[test]
    fn grid_validation() {
        let cfg = ChainConfig::new(4, 0.05, 0.0).unwrap();
        assert!(transfer_fidelities(&cfg, &[], None).is_err());
        assert!(transfer_fidelities(&cfg, &[1.0, 2.0], None).is_err());
        assert!(transfer_fidelities(&cfg, &[0.0, 2.0, 1.0], None).is_err());
    }

    #[test]
    fn peak_on_analytic_trace() {
        let j_eff = 0.0025;
        let t_m = std::f64::consts::PI / (2.0 * j_eff);
        let dt = t_m / 400.0;
        let times: Vec<f64> = (0..1200).map(|i| i as f64 * dt * 1.0003).collect();
        let f_coh: Vec<f64> = times.iter().map(|t| (j_eff * t).sin().abs()).collect();
        let f_exc: Vec<f64> = f_coh.iter().map(|s| s * s).collect();
        let f_av: Vec<f64> = f_exc
            .iter()
            .zip(&f_coh)
            .map(|(&e, &c)| average_fidelity(e, c))
            .collect();
        for (t, f) in times.iter().zip(&f_av) {
            assert!((f - effective_average_fidelity(j_eff, *t)).abs() < 1e-12);
        }
        let tr = FidelityTrace::new(
            times,
            f_exc,
            f_coh,
            f_av,
            vec![SampleKind::Evolved; 1200],
            ChainConfig::new(12, 0.05, 0.0).unwrap(),
            None,
        )
        .unwrap();
        let peak = find_first_peak(&tr).unwrap();
        assert!((peak.t_m - 200.0 * std::f64::consts::PI).abs() < dt);
        assert_eq!(peak.f_m, tr.f_av[peak.index]);
    }

    #[test]
    fn monotone_trace_has_no_peak() {
        let tr = trace_from((0..50).map(|i| 0.5 + 0.001 * i as f64).collect());
        assert_eq!(find_first_peak(&tr), Err(Error::NoPeak));
    }

    #[test]
    fn plateau_below_epsilon_is_ignored() {
        let mut f: Vec<f64> = vec![0.5; 10];
        f[3] = 0.5 + 0.5 * PEAK_EPSILON;
        f.extend((0..10).map(|i| 0.6 + 0.01 * i as f64));
        f.extend([0.65, 0.6]);
        let tr = trace_from(f);
        let opts = PeakOptions {
            epsilon: PEAK_EPSILON,
            window: 0.5,
        };
        let p = find_first_peak_with(&tr, opts).unwrap();
        assert_eq!(p.index, 19);
    }

    #[test]
    fn fidelity_bounds_and_effective_shape() {
        // The effective model misses ripples and dressing of order J′N/(πJ);
        // the bounds scale with that ratio.
        for n in [6, 12] {
            let cfg = ChainConfig::new(n, 0.05, 0.0).unwrap();
            let eff = effective_model(&cfg).unwrap();
            let times = grid(2.0 * eff.t_m_eff, 801);
            let tr = transfer_fidelities(&cfg, &times, None).unwrap();
            for i in 0..tr.len() {
                assert!(tr.f_av[i] >= 0.5 - 1e-12 && tr.f_av[i] <= 1.0 + 1e-12);
                assert!(tr.f_exc[i] >= -1e-12 && tr.f_exc[i] <= 1.0 + 1e-12);
                assert!(tr.f_coh[i] <= 1.0 + 1e-12);
                // unitary single-excitation transfer: F^coh is the receiver amplitude
                assert!((tr.f_exc[i] - tr.f_coh[i].powi(2)).abs() < 1e-9);
                let t = tr.times[i];
                let s = (eff.j_eff * t).sin().abs();
                let dc = (tr.f_coh[i] - s).abs();
                assert!(
                    dc < 0.3 * eff.validity_ratio,
                    "N={n} t={t} coh={} s={s}",
                    tr.f_coh[i]
                );
                let da = (tr.f_av[i] - effective_average_fidelity(eff.j_eff, t)).abs();
                assert!(da < 0.1 * eff.validity_ratio, "N={n} t={t} dev={da}");
            }
        }
    }

    #[test]
    fn haar_mc_at_t0() {
        let cfg = ChainConfig::new(4, 0.05, 0.0).unwrap();
        let est = haar_average_mc(&cfg, 0.0, 4000, 7).unwrap();
        assert!((est.mean - 0.5).abs() < 3.0 * est.stderr);
        assert!(haar_average_mc(&cfg, 0.0, 10, 7).is_err());
    }

    #[test]
    fn haar_mc_is_worker_independent() {
        let cfg = ChainConfig::new(6, 0.05, 0.03).unwrap();
        let a = haar_average_mc_with(&cfg, 5.0, 500, 11, Execution::Sequential).unwrap();
        let b = haar_average_mc_with(&cfg, 5.0, 500, 11, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn haar_mc_matches_closed_form_at_transfer_time() {
        // the coherence is nearly imaginary here, so the phase correction matters
        let cfg = ChainConfig::new(6, 0.05, 0.02).unwrap();
        let t = effective_model(&cfg).unwrap().t_m_eff;
        let tr = transfer_fidelities(&cfg, &[0.0, t], None).unwrap();
        let est = haar_average_mc(&cfg, t, 4000, 5).unwrap();
        assert!(
            (est.mean - tr.f_av[1]).abs() <= 3.0 * est.stderr,
            "{est:?} vs {}",
            tr.f_av[1]
        );
    }

    #[test]
    fn haar_mc_matches_closed_form_small_chain() {
        let cfg = ChainConfig::new(4, 0.05, 0.0).unwrap();
        let tr = transfer_fidelities(&cfg, &[0.0, 1.0], None).unwrap();
        let est = haar_average_mc(&cfg, 1.0, 10_000, 3).unwrap();
        assert!((est.mean - tr.f_av[1]).abs() <= 3.0 * est.stderr);
    }
}
