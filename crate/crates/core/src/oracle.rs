//! Unrestricted 2^N Hilbert-space evolution used to cross-check the sector
//! representation. Nothing here assumes magnetization conservation.
//!
//! Site k (1-based) is bit k−1 of the computational-basis index; a set bit
//! is an excitation |1⟩.

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::integrate::{integrate, Tolerances};
use crate::state::ChainConfig;

pub const MAX_ORACLE_SITES: usize = 8;

/// Eigenvalue convention for σᶻ on |1⟩; the physics must not depend on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigmaZConvention {
    /// σᶻ|0⟩ = +|0⟩, σᶻ|1⟩ = −|1⟩
    ExcitationNegative,
    /// σᶻ|0⟩ = −|0⟩, σᶻ|1⟩ = +|1⟩
    ExcitationPositive,
}

fn check_size(config: &ChainConfig) -> Result<usize> {
    config.validate()?;
    if config.n_total > MAX_ORACLE_SITES {
        return Err(Error::OracleTooLarge(config.n_total));
    }
    Ok(1 << config.n_total)
}

/// Σ_bonds J_b (σ⁺_k σ⁻_{k+1} + h.c.) on the full space.
pub fn full_hamiltonian(config: &ChainConfig) -> Result<DMatrix<Complex64>> {
    let dim = check_size(config)?;
    let n = config.n_total;
    let mut h = DMatrix::zeros(dim, dim);
    for k in 1..n {
        let coupling = if k == 1 || k == n - 1 {
            config.j_boundary
        } else {
            config.j_channel
        };
        let (bk, bk1) = (1usize << (k - 1), 1usize << k);
        for s in 0..dim {
            // σ⁺_k σ⁻_{k+1}: moves an excitation from k+1 to k
            if s & bk == 0 && s & bk1 != 0 {
                let t = (s | bk) & !bk1;
                h[(t, s)] += Complex64::new(coupling, 0.0);
                h[(s, t)] += Complex64::new(coupling, 0.0);
            }
        }
    }
    Ok(h)
}

fn sigma_z_diagonal(config: &ChainConfig, site: usize, conv: SigmaZConvention) -> Vec<f64> {
    let dim = 1usize << config.n_total;
    let bit = 1usize << (site - 1);
    let excited = match conv {
        SigmaZConvention::ExcitationNegative => -1.0,
        SigmaZConvention::ExcitationPositive => 1.0,
    };
    (0..dim)
        .map(|s| if s & bit != 0 { excited } else { -excited })
        .collect()
}

/// Lindblad evolution of a full 2^N density matrix.
pub fn oracle_evolve_full(
    config: &ChainConfig,
    rho_full: &DMatrix<Complex64>,
    duration: f64,
) -> Result<DMatrix<Complex64>> {
    oracle_evolve_full_with(
        config,
        rho_full,
        duration,
        SigmaZConvention::ExcitationNegative,
    )
}

pub fn oracle_evolve_full_with(
    config: &ChainConfig,
    rho_full: &DMatrix<Complex64>,
    duration: f64,
    conv: SigmaZConvention,
) -> Result<DMatrix<Complex64>> {
    let dim = check_size(config)?;
    if rho_full.nrows() != dim || rho_full.ncols() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: rho_full.nrows(),
        });
    }
    let h = full_hamiltonian(config)?;
    let mut hops = Vec::new();
    for c in 0..dim {
        for a in 0..dim {
            if h[(a, c)] != Complex64::new(0.0, 0.0) {
                hops.push((a, c, h[(a, c)]));
            }
        }
    }
    // Σ_k γ (z_k[a] z_k[b] − 1), the dissipator on element (a, b) for diagonal σᶻ_k
    let zs: Vec<Vec<f64>> = config
        .dephasing_sites
        .iter()
        .map(|&k| sigma_z_diagonal(config, k, conv))
        .collect();
    let dephasing = DMatrix::from_fn(dim, dim, |a, b| {
        zs.iter()
            .map(|z| config.gamma * (z[a] * z[b] - 1.0))
            .sum::<f64>()
    });
    let minus_i = Complex64::new(0.0, -1.0);
    let rhs = |rho: &DMatrix<Complex64>| {
        // −i(Hρ − ρH) with H real symmetric and sparse
        let mut comm = DMatrix::<Complex64>::zeros(dim, dim);
        for &(a, c, hac) in &hops {
            for b in 0..dim {
                comm[(a, b)] += hac * rho[(c, b)];
                comm[(b, c)] -= rho[(b, a)] * hac;
            }
        }
        let mut out = comm * minus_i;
        for (o, (r, d)) in out.iter_mut().zip(rho.iter().zip(dephasing.iter())) {
            *o += r * *d;
        }
        out
    };
    let tol = Tolerances {
        atol: 1e-13,
        rtol: 1e-11,
    };
    integrate(rho_full, duration, tol, rhs)
}

/// Computational-basis index of sector element `m` (0 = vacuum).
pub fn sector_to_full_index(m: usize) -> usize {
    if m == 0 {
        0
    } else {
        1 << (m - 1)
    }
}

pub fn embed_sector(
    config: &ChainConfig,
    sector: &DMatrix<Complex64>,
) -> Result<DMatrix<Complex64>> {
    let dim = check_size(config)?;
    let d = config.dim();
    if sector.nrows() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: sector.nrows(),
        });
    }
    let mut full = DMatrix::zeros(dim, dim);
    for a in 0..d {
        for b in 0..d {
            full[(sector_to_full_index(a), sector_to_full_index(b))] = sector[(a, b)];
        }
    }
    Ok(full)
}

pub fn project_to_sector(config: &ChainConfig, full: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let d = config.dim();
    DMatrix::from_fn(d, d, |a, b| {
        full[(sector_to_full_index(a), sector_to_full_index(b))]
    })
}

/// Total |element| mass outside the ≤1-excitation block.
pub fn out_of_sector_mass(full: &DMatrix<Complex64>) -> f64 {
    let in_sector = |s: usize| s.count_ones() <= 1;
    let mut total = 0.0;
    for b in 0..full.ncols() {
        for a in 0..full.nrows() {
            if !(in_sector(a) && in_sector(b)) {
                total += full[(a, b)].norm();
            }
        }
    }
    total
}

/// Brute-force partial trace over every site except the receiver.
pub fn full_receiver_partial_trace(
    config: &ChainConfig,
    full: &DMatrix<Complex64>,
) -> Result<Matrix2<Complex64>> {
    let dim = check_size(config)?;
    let rbit = 1usize << (config.n_total - 1);
    let mut out = Matrix2::zeros();
    for rest in 0..dim {
        if rest & rbit != 0 {
            continue;
        }
        for i in 0..2 {
            for j in 0..2 {
                let a = rest | if i == 1 { rbit } else { 0 };
                let b = rest | if j == 1 { rbit } else { 0 };
                out[(i, j)] += full[(a, b)];
            }
        }
    }
    Ok(out)
}
