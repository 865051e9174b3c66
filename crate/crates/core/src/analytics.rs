//! Closed-form results: the effective sender–receiver model and the exact
//! four-spin solution.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::state::ChainConfig;

/// The model is flagged as weak once J′N/(πJ) reaches this ratio.
pub const WEAK_VALIDITY_RATIO: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveModel {
    /// Signed effective coupling (−1)^{N/2} J′²/J.
    pub j_eff: f64,
    /// First time of perfect transfer, π/(2|J_e|).
    pub t_m_eff: f64,
    pub validity_ratio: f64,
}

impl EffectiveModel {
    pub fn is_weak(&self) -> bool {
        self.validity_ratio >= WEAK_VALIDITY_RATIO
    }
}

pub fn effective_model(config: &ChainConfig) -> Result<EffectiveModel> {
    config.validate()?;
    let n = config.n_total;
    let sign = if (n / 2).is_multiple_of(2) { 1.0 } else { -1.0 };
    let j_eff = sign * config.j_boundary * config.j_boundary / config.j_channel;
    Ok(EffectiveModel {
        j_eff,
        t_m_eff: std::f64::consts::FRAC_PI_2 / j_eff.abs(),
        validity_ratio: config.j_boundary * n as f64 / (std::f64::consts::PI * config.j_channel),
    })
}

/// Average fidelity of the effective two-qubit model without dephasing.
pub fn effective_average_fidelity(j_eff: f64, t: f64) -> f64 {
    let s = (j_eff * t).sin().abs();
    1.0 / 3.0 + (1.0 + s) * (1.0 + s) / 6.0
}

/// Eigenpairs of the N = 4 site block, ordered as E₁ = −αJ′, E₂ = J − αJ′,
/// E₃ = −(J − αJ′), E₄ = αJ′.
#[derive(Debug, Clone, PartialEq)]
pub struct FourSpinSolution {
    pub alpha: f64,
    pub eigenvalues: [f64; 4],
    /// Columns are eigenvectors in the site basis |1⟩…|4⟩.
    pub eigenvectors: DMatrix<f64>,
}

impl FourSpinSolution {
    /// Amplitudes ⟨k|e^{−iHt}|1⟩ for k = 1..4.
    pub fn amplitudes_from_sender(&self, t: f64) -> [num_complex::Complex64; 4] {
        let mut out = [num_complex::Complex64::new(0.0, 0.0); 4];
        for (k, amp) in out.iter_mut().enumerate() {
            for e in 0..4 {
                let phase = num_complex::Complex64::from_polar(1.0, -self.eigenvalues[e] * t);
                *amp += phase * self.eigenvectors[(k, e)] * self.eigenvectors[(0, e)];
            }
        }
        out
    }
}

fn require_four(config: &ChainConfig) -> Result<()> {
    config.validate()?;
    if config.n_total != 4 {
        return Err(Error::InvalidArgument(format!(
            "four-spin solution requires N = 4, got {}",
            config.n_total
        )));
    }
    Ok(())
}

pub fn alpha(config: &ChainConfig) -> f64 {
    let (j, jb) = (config.j_channel, config.j_boundary);
    (j + (j * j + 4.0 * jb * jb).sqrt()) / (2.0 * jb)
}

pub fn four_spin_solution(config: &ChainConfig) -> Result<FourSpinSolution> {
    require_four(config)?;
    let a = alpha(config);
    let (j, jb) = (config.j_channel, config.j_boundary);
    let norm = (2.0 * (a * a + 1.0)).sqrt();
    let columns = [
        [1.0, -a, a, -1.0],
        [a, -1.0, -1.0, a],
        [a, 1.0, -1.0, -a],
        [1.0, a, a, 1.0],
    ];
    let vecs: Vec<DVector<f64>> = columns
        .iter()
        .map(|c| DVector::from_column_slice(c) / norm)
        .collect();
    Ok(FourSpinSolution {
        alpha: a,
        eigenvalues: [-a * jb, j - a * jb, -(j - a * jb), a * jb],
        eigenvectors: DMatrix::from_columns(&vecs),
    })
}

/// Exact single-measurement success probability for the excitation input.
pub fn four_spin_p1(config: &ChainConfig, t: f64) -> Result<f64> {
    require_four(config)?;
    let a = alpha(config);
    let a2 = a * a;
    let freq = config.j_channel - 2.0 * a * config.j_boundary;
    Ok((1.0 + a2 * a2 + 2.0 * a2 * (freq * t).cos()) / ((a2 + 1.0) * (a2 + 1.0)))
}

/// Leading order of [`four_spin_p1`] for J′ ≪ J.
pub fn four_spin_p1_limit(config: &ChainConfig, t: f64) -> Result<f64> {
    require_four(config)?;
    let r = config.j_boundary / config.j_channel;
    let s = (0.5 * config.j_channel * t).sin();
    Ok(1.0 - 4.0 * r * r * s * s)
}

/// Angular frequency |J − 2αJ′| of the four-spin success-probability oscillation.
pub fn four_spin_oscillation_frequency(config: &ChainConfig) -> f64 {
    (config.j_channel - 2.0 * alpha(config) * config.j_boundary).abs()
}
