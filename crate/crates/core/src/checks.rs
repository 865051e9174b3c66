//! Cross-checks of the sector simulation against independent routes: the
//! unrestricted 2^N evolution, the closed-form four-spin solution, the
//! adaptive integrator and Monte Carlo sampling of the Haar average.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analytics::{effective_model, four_spin_p1, four_spin_p1_limit, four_spin_solution};
use crate::dynamics::{build_generator, build_hamiltonian, evolve};
use crate::error::Result;
use crate::exec::Execution;
use crate::fidelity::{haar_average_mc_with, transfer_fidelities};
use crate::integrate::Tolerances;
use crate::oracle::{
    embed_sector, full_receiver_partial_trace, oracle_evolve_full, oracle_evolve_full_with,
    out_of_sector_mass, project_to_sector, SigmaZConvention,
};
use crate::protocol::channel_projector_apply;
use crate::state::{
    initial_state, receiver_reduced_state, ChainConfig, DensityMatrix, SenderState,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    /// Largest deviation seen, in the units of `tolerance`.
    pub max_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckOutcome {
    fn new(name: &str, max_deviation: f64, tolerance: f64) -> Self {
        CheckOutcome {
            name: name.to_string(),
            max_deviation,
            tolerance,
            passed: max_deviation <= tolerance,
        }
    }
}

/// Random full-rank density matrix of dimension `dim`.
pub fn random_density_matrix<R: Rng>(dim: usize, rng: &mut R) -> DensityMatrix {
    let g = DMatrix::from_fn(dim, dim, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    let m = &g * g.adjoint();
    let tr = m.trace();
    DensityMatrix::from_matrix(m / tr).expect("G G† is a valid state after normalization")
}

/// Sizes of the randomized checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckSettings {
    pub random_states: usize,
    pub mc_samples: usize,
    pub seed: u64,
    pub exec: Execution,
}

impl Default for CheckSettings {
    fn default() -> Self {
        CheckSettings {
            random_states: 20,
            mc_samples: 10_000,
            seed: 42,
            exec: Execution::default(),
        }
    }
}

pub const SECTOR_ORACLE_TOL: f64 = 1e-7;
pub const PARTIAL_TRACE_TOL: f64 = 1e-12;
pub const FOUR_SPIN_P1_TOL: f64 = 1e-8;
pub const FOUR_SPIN_LIMIT_GAP: f64 = 1e-3;
pub const DIAGONALIZATION_TOL: f64 = 1e-10;
pub const PROPAGATOR_TOL: f64 = 1e-9;
pub const MC_STDERRS: f64 = 3.0;

/// Sector evolution vs. the projected 2^N evolution, together with the
/// mass the full evolution leaks out of the sector.
pub fn sector_vs_full(
    lengths: &[usize],
    gammas: &[f64],
    duration: f64,
    settings: &CheckSettings,
) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut worst: f64 = 0.0;
    for &n in lengths {
        for &g in gammas {
            let cfg = ChainConfig::new(n, 0.05, g)?;
            for _ in 0..settings.random_states {
                let rho = random_density_matrix(cfg.dim(), &mut rng);
                let sector = evolve(&rho, duration, &cfg)?;
                let full = oracle_evolve_full(&cfg, &embed_sector(&cfg, rho.entries())?, duration)?;
                let dev = (project_to_sector(&cfg, &full) - sector.entries()).camax();
                worst = worst.max(dev).max(out_of_sector_mass(&full));
            }
        }
    }
    Ok(CheckOutcome::new(
        "sector evolution vs full Hilbert space",
        worst,
        SECTOR_ORACLE_TOL,
    ))
}

pub fn receiver_partial_trace(settings: &CheckSettings) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed ^ 0x5eed);
    let mut worst: f64 = 0.0;
    for n in [4, 6] {
        let cfg = ChainConfig::new(n, 0.05, 0.0)?;
        for _ in 0..settings.random_states.max(1) * 5 {
            let rho = random_density_matrix(cfg.dim(), &mut rng);
            let reduced = receiver_reduced_state(&rho, n)?;
            let brute = full_receiver_partial_trace(&cfg, &embed_sector(&cfg, rho.entries())?)?;
            worst = worst.max((reduced - brute).camax());
        }
    }
    Ok(CheckOutcome::new(
        "receiver state vs brute-force partial trace",
        worst,
        PARTIAL_TRACE_TOL,
    ))
}

/// Full evolution with both σᶻ sign conventions.
pub fn sigma_z_convention(settings: &CheckSettings) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed ^ 0x51);
    let cfg = ChainConfig::new(4, 0.05, 0.05)?;
    let rho = random_density_matrix(cfg.dim(), &mut rng);
    let full = embed_sector(&cfg, rho.entries())?;
    let a = oracle_evolve_full_with(&cfg, &full, 3.0, SigmaZConvention::ExcitationNegative)?;
    let b = oracle_evolve_full_with(&cfg, &full, 3.0, SigmaZConvention::ExcitationPositive)?;
    Ok(CheckOutcome::new(
        "sigma-z sign convention independence",
        (a - b).camax(),
        1e-10,
    ))
}

/// Simulated first-measurement success probability vs. the exact formula,
/// 50 times in [0, 20] for each boundary coupling.
pub fn four_spin_success_probability(couplings: &[f64]) -> Result<CheckOutcome> {
    let mut worst: f64 = 0.0;
    for &jb in couplings {
        let cfg = ChainConfig::new(4, jb, 0.0)?;
        let start = initial_state(&cfg, SenderState::excited())?;
        for k in 0..50 {
            let t = 20.0 * k as f64 / 49.0;
            let rho = evolve(&start, t, &cfg)?;
            let (_, p) = channel_projector_apply(&rho, &cfg)?;
            worst = worst.max((p - four_spin_p1(&cfg, t)?).abs());
        }
    }
    Ok(CheckOutcome::new(
        "four-spin success probability",
        worst,
        FOUR_SPIN_P1_TOL,
    ))
}

pub fn four_spin_limit_gap() -> Result<CheckOutcome> {
    let cfg = ChainConfig::new(4, 0.05, 0.0)?;
    let mut worst: f64 = 0.0;
    for k in 0..=2000 {
        let t = 20.0 * k as f64 / 2000.0;
        worst = worst.max((four_spin_p1(&cfg, t)? - four_spin_p1_limit(&cfg, t)?).abs());
    }
    Ok(CheckOutcome::new(
        "four-spin weak-coupling limit",
        worst,
        FOUR_SPIN_LIMIT_GAP,
    ))
}

/// Analytic four-spin eigenpairs vs. numerical diagonalization.
pub fn four_spin_diagonalization() -> Result<CheckOutcome> {
    let mut worst: f64 = 0.0;
    for jb in [0.05, 0.1, 0.3, 1.0] {
        let cfg = ChainConfig::new(4, jb, 0.0)?;
        let sol = four_spin_solution(&cfg)?;
        let h = build_hamiltonian(&cfg).site_block();
        let mut numeric: Vec<f64> = h
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect();
        let mut analytic = sol.eigenvalues.to_vec();
        numeric.sort_by(f64::total_cmp);
        analytic.sort_by(f64::total_cmp);
        for (a, b) in analytic.iter().zip(&numeric) {
            worst = worst.max((a - b).abs());
        }
        for e in 0..4 {
            let v = sol.eigenvectors.column(e);
            worst = worst.max((&h * v - v * sol.eigenvalues[e]).amax());
        }
        let gram = sol.eigenvectors.transpose() * &sol.eigenvectors;
        worst = worst.max((gram - DMatrix::identity(4, 4)).amax());
    }
    Ok(CheckOutcome::new(
        "four-spin eigenpairs vs diagonalization",
        worst,
        DIAGONALIZATION_TOL,
    ))
}

/// Site populations from the eigen-expansion vs. sector evolution and the
/// full-space oracle.
pub fn four_spin_populations() -> Result<CheckOutcome> {
    let cfg = ChainConfig::new(4, 0.05, 0.0)?;
    let sol = four_spin_solution(&cfg)?;
    let start = initial_state(&cfg, SenderState::excited())?;
    let full0 = embed_sector(&cfg, start.entries())?;
    let mut worst: f64 = 0.0;
    for &t in &[0.7, 3.0, 11.0, 40.0] {
        let amps = sol.amplitudes_from_sender(t);
        let sector = evolve(&start, t, &cfg)?;
        let full = project_to_sector(&cfg, &oracle_evolve_full(&cfg, &full0, t)?);
        for (k, a) in amps.iter().enumerate() {
            let expected = a.norm_sqr();
            worst = worst
                .max((sector.get(k + 1, k + 1).re - expected).abs())
                .max((full[(k + 1, k + 1)].re - expected).abs());
        }
    }
    Ok(CheckOutcome::new(
        "four-spin populations vs eigen-expansion",
        worst,
        FOUR_SPIN_P1_TOL,
    ))
}

/// Matrix-exponential propagator vs. adaptive integration, including
/// the semigroup property.
pub fn propagator_vs_adaptive(settings: &CheckSettings) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed ^ 0xe4);
    let cfg = ChainConfig::new(8, 0.05, 0.03)?;
    let generator = build_generator(&cfg)?;
    let step = 7.5;
    let prop = generator.propagator(step)?;
    let twice = generator.propagator(2.0 * step)?;
    let mut worst = (prop.compose(&prop).matrix() - twice.matrix()).camax();
    let rho = random_density_matrix(cfg.dim(), &mut rng);
    let mut stepped = rho.entries().clone();
    for _ in 0..8 {
        stepped = prop.apply(&stepped);
    }
    let adaptive = generator.evolve_operator(rho.entries(), 8.0 * step, Tolerances::default())?;
    worst = worst.max((stepped - adaptive).camax());
    Ok(CheckOutcome::new(
        "propagator vs adaptive integration",
        worst,
        PROPAGATOR_TOL,
    ))
}

/// Haar Monte Carlo estimate vs. the closed form on a fixed set of
/// (N, t, γ) points. Deviations are in units of the standard error.
pub fn haar_closed_form(settings: &CheckSettings) -> Result<CheckOutcome> {
    let t_m = effective_model(&ChainConfig::new(12, 0.05, 0.0)?)?.t_m_eff;
    let points: [(usize, f64, f64); 10] = [
        (12, t_m, 0.0),
        (12, t_m, 0.02),
        (12, 100.0, 0.04),
        (12, 300.0, 0.1),
        (12, 1000.0, 0.01),
        (6, 1.0, 0.0),
        (6, 10.0, 0.05),
        (6, t_m, 0.02),
        (6, 200.0, 0.0),
        (6, 50.0, 0.1),
    ];
    let mut worst: f64 = 0.0;
    for (i, &(n, t, g)) in points.iter().enumerate() {
        let cfg = ChainConfig::new(n, 0.05, g)?;
        let closed = transfer_fidelities(&cfg, &[0.0, t], None)?.f_av[1];
        let est = haar_average_mc_with(
            &cfg,
            t,
            settings.mc_samples,
            settings.seed + i as u64,
            settings.exec,
        )?;
        worst = worst.max((est.mean - closed).abs() / est.stderr);
    }
    Ok(CheckOutcome::new(
        "Haar average: Monte Carlo vs closed form",
        worst,
        MC_STDERRS,
    ))
}

/// Every cross-check, in a fixed order.
pub fn run_all(settings: &CheckSettings) -> Result<Vec<CheckOutcome>> {
    Ok(vec![
        sector_vs_full(&[4, 6], &[0.0, 0.02, 0.05], 3.0, settings)?,
        sector_vs_full(
            &[6],
            &[0.02],
            10.0,
            &CheckSettings {
                random_states: 2,
                ..*settings
            },
        )?,
        receiver_partial_trace(settings)?,
        sigma_z_convention(settings)?,
        four_spin_success_probability(&[0.05, 0.1, 0.3])?,
        four_spin_limit_gap()?,
        four_spin_diagonalization()?,
        four_spin_populations()?,
        propagator_vs_adaptive(settings)?,
        haar_closed_form(settings)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> CheckSettings {
        CheckSettings {
            random_states: 2,
            mc_samples: 2000,
            ..Default::default()
        }
    }

    #[test]
    fn random_states_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for d in [5, 7, 13] {
            let rho = random_density_matrix(d, &mut rng);
            rho.validate().unwrap();
            assert!(rho.purity() < 1.0);
        }
    }

    #[test]
    fn quick_suite_passes() {
        for outcome in run_all(&quick()).unwrap() {
            assert!(outcome.passed, "{outcome:?}");
        }
    }
}
