//! Acceptance criteria A1–A11. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use spinrelay::analytics::four_spin_oscillation_frequency;
use spinrelay::checks::{self, CheckSettings};
use spinrelay::exec::Execution;
use spinrelay::experiments::{
    default_t_max, default_tau_grid, linear_fit, linspace_step, run_point, sweep_gamma,
    sweep_length, sweep_tau, trace_grid, RecordStatus, SweepOptions, SweepRecord, SweptParameter,
};
use spinrelay::fidelity::TrajectoryDiagnostics;
use spinrelay::protocol::{run_protocol, MeasurementSchedule};
use spinrelay::state::{HERMITICITY_TOL, PSD_TOL, TRACE_TOL};
use spinrelay::{ChainConfig, Result};

const J_BOUNDARY: f64 = 0.05;

const A1_TIME_REL_TOL: f64 = 0.02;
const A1_MIN_FIDELITY: f64 = 0.99;
const A1_MAX_SECONDS: f64 = 1.0;
const A2_REL_TOL: f64 = 0.02;
const A3_F_002: (f64, f64) = (0.84, 0.02);
const A3_F_004: (f64, f64) = (0.75, 0.03);
const A3_MIN_R2: f64 = 0.98;
const A3_GAMMA_RANGE: (f64, f64, f64) = (0.01, 0.1, 0.005);
const A4_NON_ZENO_TAU: f64 = 20.0;
const A4_MAX_002: f64 = 0.995;
const A4_MIN_002: f64 = 0.97;
const A4_MAX_004: f64 = 0.99;
const A4_PSUC_004: (f64, f64) = (0.1, 0.4);
const A5_TAU: f64 = 150.0;
const A5_GAMMA: f64 = 0.1;
const A5_MEASURED: (f64, f64) = (0.86, 0.04);
const A5_UNMEASURED: (f64, f64) = (0.60, 0.04);
const A5_MEASUREMENTS: usize = 4;
const A6_ZENO_TAU: f64 = 6.0;
const A6_TIME_REL_TOL: f64 = 0.10;
const A6_CROSSOVER_FACTOR: f64 = 3.0;
const A7_MIN_PSUC: f64 = 0.99;
const A7_PERIOD_REL_TOL: f64 = 0.10;
const A8_P1_TOL: f64 = 1e-8;
const A8_LIMIT_GAP: f64 = 1e-3;
const A9_ORACLE_TOL: f64 = 1e-7;
const A10_STDERRS: f64 = 3.0;
const A10_SAMPLES: usize = 10_000;
const A10_SEED: u64 = 42;
const A11_LENGTHS: [usize; 4] = [6, 8, 10, 12];
const A11_MAX_DROP: f64 = 0.1;

struct Verdict {
    id: &'static str,
    passed: bool,
    detail: String,
}

fn verdict(id: &'static str, passed: bool, detail: String) -> Verdict {
    Verdict { id, passed, detail }
}

fn within(value: f64, (centre, tol): (f64, f64)) -> bool {
    (value - centre).abs() <= tol
}

fn rel_err(value: f64, reference: f64) -> f64 {
    (value - reference).abs() / reference.abs()
}

fn opts() -> SweepOptions {
    SweepOptions {
        t_max: None,
        exec: Execution::Parallel,
    }
}

fn config(n: usize, gamma: f64) -> ChainConfig {
    ChainConfig::new(n, J_BOUNDARY, gamma).expect("valid configuration")
}

fn ok_records(records: &[SweepRecord]) -> impl Iterator<Item = &SweepRecord> {
    records.iter().filter(|r| r.status == RecordStatus::Ok)
}

fn nearest(records: &[SweepRecord], gamma: f64) -> &SweepRecord {
    records
        .iter()
        .min_by(|a, b| (a.gamma - gamma).abs().total_cmp(&(b.gamma - gamma).abs()))
        .expect("non-empty sweep")
}

fn a1_a2() -> Result<(Verdict, Verdict)> {
    let t_eff = 200.0 * PI;
    let start = Instant::now();
    let r12 = run_point(&config(12, 0.0), None, None, SweptParameter::Tau)?;
    let seconds = start.elapsed().as_secs_f64();
    let r6 = run_point(&config(6, 0.0), None, None, SweptParameter::Tau)?;

    let a1 = match (r12.t_m, r12.f_av_m) {
        (Some(t), Some(f)) => verdict(
            "A1",
            rel_err(t, t_eff) <= A1_TIME_REL_TOL && f >= A1_MIN_FIDELITY && seconds < A1_MAX_SECONDS,
            format!(
                "t_m = {t:.3} (200π = {t_eff:.3}, rel err {:.4} ≤ {A1_TIME_REL_TOL}), F = {f:.5} ≥ {A1_MIN_FIDELITY}, {seconds:.2} s < {A1_MAX_SECONDS} s",
                rel_err(t, t_eff)
            ),
        ),
        _ => verdict("A1", false, format!("no peak ({})", r12.status.as_str())),
    };
    let a2 = match (r6.t_m, r12.t_m) {
        (Some(t6), Some(t12)) => verdict(
            "A2",
            rel_err(t6, t12) <= A2_REL_TOL,
            format!(
                "t_m(6) = {t6:.3}, t_m(12) = {t12:.3}, rel diff {:.4} ≤ {A2_REL_TOL}",
                rel_err(t6, t12)
            ),
        ),
        _ => verdict("A2", false, "missing peak".into()),
    };
    Ok((a1, a2))
}

fn a3(unmeasured: &[SweepRecord]) -> Result<Verdict> {
    let f2 = nearest(unmeasured, 0.02).f_av_m.unwrap_or(f64::NAN);
    let f4 = nearest(unmeasured, 0.04).f_av_m.unwrap_or(f64::NAN);
    let (xs, ys): (Vec<f64>, Vec<f64>) = ok_records(unmeasured)
        .filter_map(|r| r.f_av_m.map(|f| (r.gamma, f.ln())))
        .unzip();
    let all_ok = xs.len() == unmeasured.len();
    let fit = linear_fit(&xs, &ys)?;
    Ok(verdict(
        "A3",
        within(f2, A3_F_002) && within(f4, A3_F_004) && fit.r_squared >= A3_MIN_R2 && all_ok,
        format!(
            "F(0.02) = {f2:.4} (0.84 ± 0.02), F(0.04) = {f4:.4} (0.75 ± 0.03), ln F vs γ R² = {:.4} ≥ {A3_MIN_R2} over {} points",
            fit.r_squared,
            xs.len()
        ),
    ))
}

fn best(records: &[SweepRecord]) -> Option<&SweepRecord> {
    ok_records(records).max_by(|a, b| a.f_av_m.unwrap().total_cmp(&b.f_av_m.unwrap()))
}

fn a4(non_zeno: &[f64]) -> Result<Verdict> {
    let s2 = sweep_tau(&config(12, 0.02), non_zeno, opts())?;
    let s4 = sweep_tau(&config(12, 0.04), non_zeno, opts())?;
    let missing = s2
        .iter()
        .chain(&s4)
        .filter(|r| r.status != RecordStatus::Ok)
        .count();
    let max2 = best(&s2).map(|r| (r.tau, r.f_av_m.unwrap()));
    let min2 = ok_records(&s2)
        .map(|r| r.f_av_m.unwrap())
        .fold(f64::INFINITY, f64::min);
    let best4 = best(&s4).map(|r| (r.tau, r.f_av_m.unwrap(), r.p_suc.unwrap()));
    let passed = match (max2, best4) {
        (Some((_, fmax2)), Some((_, fmax4, p4))) => {
            missing == 0
                && fmax2 > A4_MAX_002
                && min2 >= A4_MIN_002
                && fmax4 > A4_MAX_004
                && (A4_PSUC_004.0..=A4_PSUC_004.1).contains(&p4)
        }
        _ => false,
    };
    Ok(verdict(
        "A4",
        passed,
        format!(
            "γ=0.02: max {:?} > {A4_MAX_002}, min {min2:.4} ≥ {A4_MIN_002}; γ=0.04: (τ, max, p_suc) {:?}, need max > {A4_MAX_004}, p_suc in {:?}; {missing} points without a peak",
            max2, best4, A4_PSUC_004
        ),
    ))
}

fn a5(unmeasured: &[SweepRecord]) -> Result<Verdict> {
    let measured = run_point(
        &config(12, A5_GAMMA),
        Some(A5_TAU),
        None,
        SweptParameter::Tau,
    )?;
    let reference = nearest(unmeasured, A5_GAMMA);
    let f = measured.f_av_m.unwrap_or(f64::NAN);
    let f0 = reference.f_av_m.unwrap_or(f64::NAN);
    let count = measured.n_measurements;
    Ok(verdict(
        "A5",
        within(f, A5_MEASURED) && within(f0, A5_UNMEASURED) && count == Some(A5_MEASUREMENTS),
        format!(
            "measured F = {f:.4} (0.86 ± 0.04) at t_m = {:.1}, unmeasured F = {f0:.4} (0.60 ± 0.04), measurements before t_m = {count:?} (need {A5_MEASUREMENTS})",
            measured.t_m.unwrap_or(f64::NAN)
        ),
    ))
}

fn a6(zero_gamma: &[SweepRecord]) -> Verdict {
    let t_eff = 200.0 * PI;
    let zeno_peaks: Vec<f64> = zero_gamma
        .iter()
        .filter(|r| r.tau <= A6_ZENO_TAU && r.status == RecordStatus::Ok)
        .map(|r| r.tau)
        .collect();
    let mut worst = (0.0, 0.0);
    let mut missing = Vec::new();
    for r in zero_gamma.iter().filter(|r| r.tau >= A4_NON_ZENO_TAU) {
        match r.t_m {
            Some(t) if rel_err(t, t_eff) > worst.1 => worst = (r.tau, rel_err(t, t_eff)),
            Some(_) => {}
            None => missing.push(r.tau),
        }
    }
    let crossover = zero_gamma
        .iter()
        .find(|r| r.status == RecordStatus::Ok)
        .map(|r| r.tau);
    let reference = 1.0 / J_BOUNDARY;
    let crossover_ok = crossover.is_some_and(|c| {
        c >= reference / A6_CROSSOVER_FACTOR && c <= reference * A6_CROSSOVER_FACTOR
    });
    verdict(
        "A6",
        zeno_peaks.is_empty() && missing.is_empty() && worst.1 <= A6_TIME_REL_TOL && crossover_ok,
        format!(
            "peaks at τ ≤ {A6_ZENO_TAU}: {zeno_peaks:?}; worst t_m rel err for τ ≥ {A4_NON_ZENO_TAU}: {:.4} at τ = {} (≤ {A6_TIME_REL_TOL}); no peak at {missing:?}; crossover τ = {crossover:?} (within ×{A6_CROSSOVER_FACTOR} of {reference})",
            worst.1, worst.0
        ),
    )
}

/// Period of the strongest component of the mean-removed samples, scanned
/// on a fine frequency grid up to the Nyquist frequency.
fn dominant_period(xs: &[f64], ys: &[f64]) -> f64 {
    let step = xs[1] - xs[0];
    let span = xs[xs.len() - 1] - xs[0];
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let f_min = 1.0 / span;
    let f_max = 0.5 / step;
    let count = 20_000;
    let mut best = (0.0, f_min);
    for k in 0..=count {
        let f = f_min + (f_max - f_min) * k as f64 / count as f64;
        let (mut re, mut im) = (0.0, 0.0);
        for (x, y) in xs.iter().zip(ys) {
            let phase = 2.0 * PI * f * x;
            re += (y - mean) * phase.cos();
            im += (y - mean) * phase.sin();
        }
        let power = re * re + im * im;
        if power > best.0 {
            best = (power, f);
        }
    }
    1.0 / best.1
}

fn a7(zero_gamma: &[SweepRecord]) -> Verdict {
    let max = ok_records(zero_gamma)
        .map(|r| (r.tau, r.p_suc.unwrap()))
        .max_by(|a, b| a.1.total_cmp(&b.1));
    let (xs, ys): (Vec<f64>, Vec<f64>) = ok_records(zero_gamma)
        .filter(|r| r.tau >= A4_NON_ZENO_TAU)
        .map(|r| (r.tau, r.p_suc.unwrap()))
        .unzip();
    let four_spin = config(4, 0.0);
    let reference = 2.0 * PI / four_spin_oscillation_frequency(&four_spin);
    let period = dominant_period(&xs, &ys);
    let max_ok = max.is_some_and(|(_, p)| p >= A7_MIN_PSUC);
    verdict(
        "A7",
        max_ok && rel_err(period, reference) <= A7_PERIOD_REL_TOL,
        format!(
            "max p_suc {max:?} ≥ {A7_MIN_PSUC}; dominant period {period:.3} vs 2π/|J−2αJ′| = {reference:.3} (rel err {:.3} ≤ {A7_PERIOD_REL_TOL})",
            rel_err(period, reference)
        ),
    )
}

fn a8() -> Result<Verdict> {
    let p1 = checks::four_spin_success_probability(&[0.05, 0.1, 0.3])?;
    let gap = checks::four_spin_limit_gap()?;
    Ok(verdict(
        "A8",
        p1.max_deviation <= A8_P1_TOL && gap.max_deviation <= A8_LIMIT_GAP,
        format!(
            "single-measurement p max dev {:.2e} ≤ {A8_P1_TOL:.0e}; exact vs weak-coupling gap {:.2e} ≤ {A8_LIMIT_GAP:.0e}",
            p1.max_deviation, gap.max_deviation
        ),
    ))
}

/// Invariant deviations along representative measured and unmeasured
/// trajectories. Every run of the suite already aborts on a violation.
fn trajectory_diagnostics() -> Result<TrajectoryDiagnostics> {
    let mut diag = TrajectoryDiagnostics {
        min_eigenvalue: f64::INFINITY,
        ..Default::default()
    };
    for (gamma, tau) in [(0.0, 1e9), (0.02, 150.0), (0.1, 150.0), (0.0, 4.0)] {
        let cfg = config(12, gamma);
        let t_max = default_t_max(&cfg)?;
        let schedule = MeasurementSchedule::new(tau, t_max)?;
        let grid = trace_grid(t_max, 1000, Some(&schedule))?;
        diag.merge(&run_protocol(&cfg, &schedule, &grid)?.diagnostics);
    }
    Ok(diag)
}

fn a9(settings: &CheckSettings) -> Result<Verdict> {
    let oracle = checks::sector_vs_full(&[4, 6], &[0.0, 0.02, 0.05], 3.0, settings)?;
    let d = trajectory_diagnostics()?;
    let invariants = d.max_trace_deviation <= TRACE_TOL
        && d.max_hermiticity_deviation <= HERMITICITY_TOL
        && d.min_eigenvalue >= -PSD_TOL;
    Ok(verdict(
        "A9",
        invariants && oracle.max_deviation <= A9_ORACLE_TOL,
        format!(
            "{} states: trace dev {:.1e} ≤ {TRACE_TOL:.0e}, hermiticity dev {:.1e} ≤ {HERMITICITY_TOL:.0e}, min eigenvalue {:.1e} ≥ -{PSD_TOL:.0e}; sector vs full max dev {:.1e} ≤ {A9_ORACLE_TOL:.0e}",
            d.states_checked, d.max_trace_deviation, d.max_hermiticity_deviation, d.min_eigenvalue, oracle.max_deviation
        ),
    ))
}

fn a10() -> Result<Verdict> {
    let settings = CheckSettings {
        mc_samples: A10_SAMPLES,
        seed: A10_SEED,
        ..Default::default()
    };
    let outcome = checks::haar_closed_form(&settings)?;
    Ok(verdict(
        "A10",
        outcome.max_deviation <= A10_STDERRS,
        format!(
            "worst |MC − closed form| = {:.2} standard errors ≤ {A10_STDERRS} over 10 points, {A10_SAMPLES} samples, seed {A10_SEED}",
            outcome.max_deviation
        ),
    ))
}

fn a11() -> Result<Verdict> {
    let records = sweep_length(&A11_LENGTHS, J_BOUNDARY, 0.02, Some(150.0), opts())?;
    let f: Vec<f64> = records
        .iter()
        .map(|r| r.f_av_m.unwrap_or(f64::NAN))
        .collect();
    let p: Vec<f64> = records
        .iter()
        .map(|r| r.p_suc.unwrap_or(f64::NAN))
        .collect();
    let non_increasing = |v: &[f64]| v.windows(2).all(|w| w[1] <= w[0]);
    let drop = f[0] - f[f.len() - 1];
    Ok(verdict(
        "A11",
        non_increasing(&f) && non_increasing(&p) && drop <= A11_MAX_DROP,
        format!("F {f:.4?} non-increasing, drop {drop:.4} ≤ {A11_MAX_DROP}; p_suc {p:.4?} non-increasing"),
    ))
}

fn run() -> Result<Vec<Verdict>> {
    let mut verdicts = Vec::new();
    let (v1, v2) = a1_a2()?;
    verdicts.extend([v1, v2]);

    let (lo, hi, step) = A3_GAMMA_RANGE;
    let unmeasured = sweep_gamma(&config(12, 0.0), &linspace_step(lo, hi, step), None, opts())?;
    verdicts.push(a3(&unmeasured)?);

    let taus = default_tau_grid();
    let non_zeno: Vec<f64> = taus
        .iter()
        .copied()
        .filter(|&t| t >= A4_NON_ZENO_TAU)
        .collect();
    verdicts.push(a4(&non_zeno)?);
    verdicts.push(a5(&unmeasured)?);

    let zero_gamma = sweep_tau(&config(12, 0.0), &taus, opts())?;
    verdicts.push(a6(&zero_gamma));
    verdicts.push(a7(&zero_gamma));
    verdicts.push(a8()?);
    verdicts.push(a9(&CheckSettings::default())?);
    verdicts.push(a10()?);
    verdicts.push(a11()?);
    Ok(verdicts)
}

fn main() -> ExitCode {
    let start = Instant::now();
    let verdicts = match run() {
        Ok(v) => v,
        Err(e) => {
            println!("acceptance suite aborted: {e}");
            return ExitCode::FAILURE;
        }
    };
    for v in &verdicts {
        println!(
            "{:<4} {}  {}",
            v.id,
            if v.passed { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    let failed: Vec<&str> = verdicts
        .iter()
        .filter(|v| !v.passed)
        .map(|v| v.id)
        .collect();
    println!(
        "{} of {} criteria passed in {:.1} s",
        verdicts.len() - failed.len(),
        verdicts.len(),
        start.elapsed().as_secs_f64()
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed: {}", failed.join(", "));
        ExitCode::FAILURE
    }
}
