//! Physical configuration and the single-excitation sector representation.
//!
//! Both the exchange Hamiltonian and σᶻ dephasing conserve total
//! magnetization, so a sender prepared in a superposition of |0⟩ and |1⟩
//! with the rest of the chain in the all-down state never leaves the span of
//! {|vac⟩, |1⟩, …, |N⟩}. Every state in this crate lives in that
//! (N+1)-dimensional space, ordered `[vac, 1, 2, …, N]`.

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HERMITICITY_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-9;
pub const PSD_TOL: f64 = 1e-9;

/// Chain of `n_total` spins: sender at site 1, receiver at site N, uniform
/// channel on sites 2..=N-1. Energies in units of the channel coupling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub n_total: usize,
    pub j_channel: f64,
    pub j_boundary: f64,
    pub gamma: f64,
    /// Sorted, 1-based site indices subject to dephasing.
    pub dephasing_sites: Vec<usize>,
}

impl ChainConfig {
    /// `J = 1`, dephasing on every channel site.
    pub fn new(n_total: usize, j_boundary: f64, gamma: f64) -> Result<Self> {
        let cfg = ChainConfig {
            n_total,
            j_channel: 1.0,
            j_boundary,
            gamma,
            dephasing_sites: (2..n_total.max(2)).collect(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Dephasing on sites `2..=upper`. `upper` is `N-1` (all channel qubits)
    /// or `N-2` (the literal range of the dephasing sum).
    pub fn with_dephasing_upper(mut self, upper: usize) -> Result<Self> {
        self.dephasing_sites = (2..=upper).collect();
        self.validate()?;
        Ok(self)
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        let cfg = ChainConfig {
            gamma,
            ..self.clone()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_channel_coupling(mut self, j_channel: f64) -> Result<Self> {
        self.j_channel = j_channel;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_total;
        if n < 4 || !n.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "chain length must be even and at least 4, got {n}"
            )));
        }
        if !(self.j_channel.is_finite() && self.j_channel > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "channel coupling must be positive, got {}",
                self.j_channel
            )));
        }
        if !(self.j_boundary.is_finite() && self.j_boundary > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "boundary coupling must be positive, got {}",
                self.j_boundary
            )));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "dephasing rate must be non-negative, got {}",
                self.gamma
            )));
        }
        if self.dephasing_sites.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(
                "dephasing sites must be strictly increasing".into(),
            ));
        }
        if let Some(&bad) = self.dephasing_sites.iter().find(|&&k| k < 2 || k > n - 1) {
            return Err(Error::InvalidConfig(format!(
                "dephasing site {bad} outside the channel 2..={}",
                n - 1
            )));
        }
        Ok(())
    }

    /// Sector dimension N+1.
    pub fn dim(&self) -> usize {
        self.n_total + 1
    }

    pub fn is_dephased(&self, site: usize) -> bool {
        self.dephasing_sites.binary_search(&site).is_ok()
    }
}

/// Index map for the sector basis `[vac, 1, …, N]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExcitationBasis {
    n_total: usize,
}

impl ExcitationBasis {
    pub const VACUUM: usize = 0;

    pub fn new(n_total: usize) -> Self {
        ExcitationBasis { n_total }
    }

    pub fn dim(&self) -> usize {
        self.n_total + 1
    }

    /// Basis index of an excitation at 1-based `site`.
    pub fn site(&self, site: usize) -> usize {
        debug_assert!(site >= 1 && site <= self.n_total);
        site
    }

    pub fn sender(&self) -> usize {
        1
    }

    pub fn receiver(&self) -> usize {
        self.n_total
    }

    pub fn is_channel(&self, index: usize) -> bool {
        index >= 2 && index < self.n_total
    }

    pub fn labels(&self) -> Vec<String> {
        std::iter::once("vac".to_string())
            .chain((1..=self.n_total).map(|m| m.to_string()))
            .collect()
    }
}

/// Sender qubit state cos(θ/2)|0⟩ + e^{iφ} sin(θ/2)|1⟩.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SenderState {
    pub theta: f64,
    pub phi: f64,
}

impl SenderState {
    pub fn new(theta: f64, phi: f64) -> Self {
        SenderState { theta, phi }
    }

    pub fn ground() -> Self {
        SenderState::new(0.0, 0.0)
    }

    pub fn excited() -> Self {
        SenderState::new(std::f64::consts::PI, 0.0)
    }

    /// Amplitudes on (|0⟩, |1⟩).
    pub fn amplitudes(&self) -> (Complex64, Complex64) {
        let half = 0.5 * self.theta;
        (
            Complex64::new(half.cos(), 0.0),
            Complex64::from_polar(half.sin(), self.phi),
        )
    }
}

/// Density matrix over the sector basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    entries: DMatrix<Complex64>,
}

impl DensityMatrix {
    /// Wraps `entries` after checking trace, hermiticity and positivity.
    pub fn from_matrix(entries: DMatrix<Complex64>) -> Result<Self> {
        let rho = DensityMatrix::from_matrix_unchecked(entries);
        rho.validate()?;
        Ok(rho)
    }

    pub(crate) fn from_matrix_unchecked(entries: DMatrix<Complex64>) -> Self {
        assert!(entries.is_square(), "density matrix must be square");
        DensityMatrix { entries }
    }

    /// Pure state |ψ⟩⟨ψ| from a (not necessarily normalized) sector vector.
    pub fn from_pure(amplitudes: &[Complex64]) -> Result<Self> {
        let norm2: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if norm2 <= 0.0 {
            return Err(Error::InvalidArgument("zero state vector".into()));
        }
        let d = amplitudes.len();
        let m = DMatrix::from_fn(d, d, |i, j| amplitudes[i] * amplitudes[j].conj() / norm2);
        Ok(DensityMatrix::from_matrix_unchecked(m))
    }

    /// All weight on a single basis element.
    pub fn basis_state(dim: usize, index: usize) -> Self {
        let mut m = DMatrix::zeros(dim, dim);
        m[(index, index)] = Complex64::new(1.0, 0.0);
        DensityMatrix::from_matrix_unchecked(m)
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn into_inner(self) -> DMatrix<Complex64> {
        self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[(row, col)]
    }

    pub fn trace(&self) -> Complex64 {
        self.entries.trace()
    }

    pub fn purity(&self) -> f64 {
        // tr(ρ²) = Σ |ρ_ij|² for Hermitian ρ
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        hermiticity_deviation(&self.entries)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_hermitian_eigenvalue(&self.entries)
    }

    pub fn validate(&self) -> Result<()> {
        let herm = self.hermiticity_deviation();
        if herm > HERMITICITY_TOL {
            return Err(Error::InvariantViolation {
                what: "hermiticity deviation",
                value: herm,
            });
        }
        let tr = (self.trace() - Complex64::new(1.0, 0.0)).norm();
        if tr > TRACE_TOL {
            return Err(Error::InvariantViolation {
                what: "trace deviation",
                value: tr,
            });
        }
        let min_eig = self.min_eigenvalue();
        if min_eig < -PSD_TOL {
            return Err(Error::InvariantViolation {
                what: "minimum eigenvalue",
                value: min_eig,
            });
        }
        Ok(())
    }
}

pub(crate) fn hermiticity_deviation(m: &DMatrix<Complex64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Smallest eigenvalue of the Hermitian part of `m`.
pub(crate) fn min_hermitian_eigenvalue(m: &DMatrix<Complex64>) -> f64 {
    let herm = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    herm.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// ρ(0) with the sender in `sender` and every other spin down.
pub fn initial_state(config: &ChainConfig, sender: SenderState) -> Result<DensityMatrix> {
    config.validate()?;
    let basis = ExcitationBasis::new(config.n_total);
    let (a0, a1) = sender.amplitudes();
    let mut psi = vec![Complex64::new(0.0, 0.0); basis.dim()];
    psi[ExcitationBasis::VACUUM] = a0;
    psi[basis.sender()] = a1;
    let m = DMatrix::from_fn(basis.dim(), basis.dim(), |i, j| psi[i] * psi[j].conj());
    Ok(DensityMatrix::from_matrix_unchecked(m))
}

/// Reduced state of the receiver qubit in the {|0⟩, |1⟩} basis.
///
/// Within the sector the partial trace keeps only three numbers: the
/// receiver population ρ_{NN}, the coherence ρ_{vac,N}, and the remainder.
pub fn receiver_reduced_state(rho: &DensityMatrix, n_total: usize) -> Result<Matrix2<Complex64>> {
    reduce_to_receiver(rho.entries(), n_total)
}

pub(crate) fn reduce_to_receiver(
    m: &DMatrix<Complex64>,
    n_total: usize,
) -> Result<Matrix2<Complex64>> {
    let dim = n_total + 1;
    if m.nrows() != dim || m.ncols() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: m.nrows(),
        });
    }
    let one = m[(n_total, n_total)];
    let coh = m[(0, n_total)];
    let zero = m.trace() - one;
    Ok(Matrix2::new(zero, coh, coh.conj(), one))
}
