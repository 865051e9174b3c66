//! Sector-restricted Hamiltonian, dephasing Lindbladian and time propagation.
//!
//! Dephasing σᶻ_k ρ σᶻ_k − ρ is diagonal in the sector basis: with
//! z_k(a) = −1 if basis state `a` has its excitation on site k and +1
//! otherwise, element (a, b) picks up γ Σ_k [z_k(a) z_k(b) − 1]. The product
//! is −1 exactly when one of the two states carries the excitation on k, so
//!
//! * (vac, m): rate 2γ if m is dephased,
//! * (m, n), m ≠ n: rate 2γ · |{m, n} ∩ S|,
//! * populations and (vac, vac): untouched.
//!
//! The sign convention of σᶻ drops out because only products z(a)z(b) enter.
//! [`crate::oracle`] checks all of this against the unrestricted 2^N space.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::integrate::{integrate, Tolerances};
use crate::state::{ChainConfig, DensityMatrix};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Real symmetric exchange Hamiltonian on the sector basis.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianMatrix(pub DMatrix<f64>);

impl HamiltonianMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    /// Site block (rows/columns 1..=N), dropping the decoupled vacuum.
    pub fn site_block(&self) -> DMatrix<f64> {
        let d = self.0.nrows();
        self.0.view((1, 1), (d - 1, d - 1)).into_owned()
    }

    pub fn to_complex(&self) -> DMatrix<Complex64> {
        self.0.map(|x| Complex64::new(x, 0.0))
    }
}

pub fn build_hamiltonian(config: &ChainConfig) -> HamiltonianMatrix {
    let n = config.n_total;
    let mut h = DMatrix::zeros(n + 1, n + 1);
    for m in 1..n {
        let coupling = if m == 1 || m == n - 1 {
            config.j_boundary
        } else {
            config.j_channel
        };
        h[(m, m + 1)] = coupling;
        h[(m + 1, m)] = coupling;
    }
    HamiltonianMatrix(h)
}

/// Elementwise dephasing rates Γ_ab, so that the dissipator is −Γ ∘ ρ.
pub fn dephasing_rates(config: &ChainConfig) -> DMatrix<f64> {
    let d = config.dim();
    let hit = |idx: usize| idx != 0 && config.is_dephased(idx);
    DMatrix::from_fn(d, d, |a, b| {
        if a == b {
            0.0
        } else {
            2.0 * config.gamma * (hit(a) as u8 + hit(b) as u8) as f64
        }
    })
}

/// The Lindblad generator ρ ↦ −i[H, ρ] − Γ ∘ ρ on the sector.
#[derive(Debug, Clone)]
pub struct Generator {
    dim: usize,
    hamiltonian: DMatrix<Complex64>,
    rates: DMatrix<f64>,
}

pub fn build_generator(config: &ChainConfig) -> Result<Generator> {
    config.validate()?;
    Ok(Generator {
        dim: config.dim(),
        hamiltonian: build_hamiltonian(config).to_complex(),
        rates: dephasing_rates(config),
    })
}

impl Generator {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rates(&self) -> &DMatrix<f64> {
        &self.rates
    }

    /// Applies the generator to any operator on the sector, Hermitian or not.
    pub fn apply(&self, op: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let h = &self.hamiltonian;
        let mut out = (h * op - op * h) * (-I);
        for (o, (x, r)) in out.iter_mut().zip(op.iter().zip(self.rates.iter())) {
            *o -= x * *r;
        }
        out
    }

    /// Dense (N+1)² × (N+1)² matrix acting on column-stacked vec(ρ).
    pub fn superoperator(&self) -> DMatrix<Complex64> {
        let d = self.dim;
        let d2 = d * d;
        let h = &self.hamiltonian;
        let mut l = DMatrix::<Complex64>::zeros(d2, d2);
        // vec(Hρ) = (I ⊗ H) vec ρ, vec(ρH) = (Hᵀ ⊗ I) vec ρ; column-major index a + d·b
        for b in 0..d {
            for a in 0..d {
                let row = a + d * b;
                for c in 0..d {
                    let hac = h[(a, c)];
                    if hac != Complex64::new(0.0, 0.0) {
                        l[(row, c + d * b)] += -I * hac;
                    }
                    let hcb = h[(c, b)];
                    if hcb != Complex64::new(0.0, 0.0) {
                        l[(row, a + d * c)] += I * hcb;
                    }
                }
                l[(row, row)] -= Complex64::new(self.rates[(a, b)], 0.0);
            }
        }
        l
    }
}

/// Fixed-duration linear map exp(𝓛 · duration) on vectorized operators.
#[derive(Debug, Clone)]
pub struct Propagator {
    duration: f64,
    dim: usize,
    map: DMatrix<Complex64>,
}

impl Propagator {
    pub fn identity(dim: usize) -> Self {
        Propagator {
            duration: 0.0,
            dim,
            map: DMatrix::identity(dim * dim, dim * dim),
        }
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.map
    }

    pub fn apply(&self, op: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let d = self.dim;
        assert_eq!(
            op.nrows(),
            d,
            "operator dimension does not match propagator"
        );
        let v = nalgebra::DVector::from_column_slice(op.as_slice());
        let out = &self.map * v;
        DMatrix::from_column_slice(d, d, out.as_slice())
    }

    pub fn apply_state(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: rho.dim(),
            });
        }
        Ok(DensityMatrix::from_matrix_unchecked(
            self.apply(rho.entries()),
        ))
    }

    /// `self` after `first`.
    pub fn compose(&self, first: &Propagator) -> Propagator {
        assert_eq!(self.dim, first.dim);
        Propagator {
            duration: self.duration + first.duration,
            dim: self.dim,
            map: &self.map * &first.map,
        }
    }
}

impl Generator {
    pub fn propagator(&self, duration: f64) -> Result<Propagator> {
        if !(duration >= 0.0) || !duration.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "propagator step must be finite and non-negative, got {duration}"
            )));
        }
        if duration == 0.0 {
            return Ok(Propagator::identity(self.dim));
        }
        let scaled = self.superoperator() * Complex64::new(duration, 0.0);
        Ok(Propagator {
            duration,
            dim: self.dim,
            map: scaled.exp(),
        })
    }

    /// Adaptive integration of an arbitrary operator over `duration`.
    pub fn evolve_operator(
        &self,
        op: &DMatrix<Complex64>,
        duration: f64,
        tol: Tolerances,
    ) -> Result<DMatrix<Complex64>> {
        if op.nrows() != self.dim || op.ncols() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: op.nrows(),
            });
        }
        integrate(op, duration, tol, |x| self.apply(x))
    }
}

pub fn make_propagator(config: &ChainConfig, step: f64) -> Result<Propagator> {
    build_generator(config)?.propagator(step)
}

/// ρ(t + duration) by adaptive Dormand–Prince integration.
///
/// The result is checked against the density-matrix invariants; a violation
/// is returned as an error rather than patched up.
pub fn evolve(rho: &DensityMatrix, duration: f64, config: &ChainConfig) -> Result<DensityMatrix> {
    let generator = build_generator(config)?;
    let out = generator.evolve_operator(rho.entries(), duration, Tolerances::default())?;
    DensityMatrix::from_matrix(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{initial_state, SenderState};

    fn cfg(n: usize, gamma: f64) -> ChainConfig {
        ChainConfig::new(n, 0.05, gamma).unwrap()
    }

    #[test]
    fn hamiltonian_n4_block() {
        let h = build_hamiltonian(&cfg(4, 0.0));
        let expected = DMatrix::from_row_slice(
            4,
            4,
            &[
                0.0, 0.05, 0.0, 0.0, 0.05, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.05, 0.0, 0.0, 0.05, 0.0,
            ],
        );
        assert_eq!(h.site_block(), expected);
        assert!(h.matrix().row(0).iter().all(|&x| x == 0.0));
        assert!(h.matrix().column(0).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn hamiltonian_n6_superdiagonal() {
        let h = build_hamiltonian(&cfg(6, 0.0));
        let sup: Vec<f64> = (1..6).map(|m| h.matrix()[(m, m + 1)]).collect();
        assert_eq!(sup, vec![0.05, 1.0, 1.0, 1.0, 0.05]);
        let nonzero_upper = (0..7)
            .flat_map(|i| (i + 1..7).map(move |j| (i, j)))
            .filter(|&(i, j)| h.matrix()[(i, j)] != 0.0)
            .count();
        assert_eq!(nonzero_upper, 5);
        assert!((0..7).all(|i| h.matrix()[(i, i)] == 0.0));
    }

    #[test]
    fn dephasing_rate_structure() {
        let c = cfg(4, 0.1);
        let r = dephasing_rates(&c);
        assert!((r[(0, 2)] - 0.2).abs() < 1e-15);
        assert!((r[(3, 0)] - 0.2).abs() < 1e-15);
        assert_eq!(r[(0, 1)], 0.0);
        assert_eq!(r[(0, 4)], 0.0);
        assert!((r[(2, 3)] - 0.4).abs() < 1e-15);
        assert!((r[(1, 2)] - 0.2).abs() < 1e-15);
        assert_eq!(r[(1, 4)], 0.0);
        assert!((0..5).all(|i| r[(i, i)] == 0.0));
    }

    #[test]
    fn superoperator_matches_structured_apply() {
        let g = build_generator(&cfg(6, 0.03)).unwrap();
        let l = g.superoperator();
        let d = g.dim();
        let op = DMatrix::from_fn(d, d, |i, j| {
            Complex64::new((i * 7 + j) as f64 * 0.1, (i as f64) - (j as f64) * 0.3)
        });
        let direct = g.apply(&op);
        let v = nalgebra::DVector::from_column_slice(op.as_slice());
        let via = DMatrix::from_column_slice(d, d, (&l * v).as_slice());
        assert!((direct - via).camax() < 1e-13);
    }

    #[test]
    fn generator_is_trace_and_hermiticity_preserving() {
        let g = build_generator(&cfg(6, 0.05)).unwrap();
        let d = g.dim();
        let a = DMatrix::from_fn(d, d, |i, j| {
            Complex64::new(((i + 2 * j) % 5) as f64, ((3 * i + j) % 4) as f64 - 1.5)
        });
        let herm = &a + a.adjoint();
        let out = g.apply(&herm);
        assert!(out.trace().norm() < 1e-12);
        assert!((g.apply(&a).adjoint() - g.apply(&a.adjoint())).camax() < 1e-12);
    }

    #[test]
    fn vacuum_is_stationary() {
        let c = cfg(6, 0.05);
        let vac = DensityMatrix::basis_state(7, 0);
        let out = evolve(&vac, 12.0, &c).unwrap();
        assert!((out.entries() - vac.entries()).camax() < 1e-12);
        let p = make_propagator(&c, 40.0)
            .unwrap()
            .apply_state(&vac)
            .unwrap();
        assert!((p.entries() - vac.entries()).camax() < 1e-12);
    }

    #[test]
    fn unitary_when_gamma_zero() {
        let c = cfg(6, 0.0);
        let rho = initial_state(&c, SenderState::new(1.1, 0.4)).unwrap();
        let out = evolve(&rho, 30.0, &c).unwrap();
        assert!((out.purity() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_step_propagator_is_identity() {
        let p = make_propagator(&cfg(4, 0.05), 0.0).unwrap();
        assert_eq!(p.matrix(), &DMatrix::identity(25, 25));
        assert!(make_propagator(&cfg(4, 0.05), -1.0).is_err());
    }

    #[test]
    fn semigroup_and_trace_row() {
        let c = cfg(6, 0.04);
        let g = build_generator(&c).unwrap();
        let p1 = g.propagator(7.5).unwrap();
        let p2 = g.propagator(15.0).unwrap();
        assert!((p1.compose(&p1).matrix() - p2.matrix()).camax() < 1e-9);
        // vec(I)ᴴ P = vec(I)ᴴ: trace functional is a left eigenvector
        let d = c.dim();
        let m = p1.matrix();
        for col in 0..d * d {
            let s: Complex64 = (0..d).map(|a| m[(a + d * a, col)]).sum();
            let expected = if col % d == col / d { 1.0 } else { 0.0 };
            assert!((s - Complex64::new(expected, 0.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn propagator_matches_adaptive_evolution() {
        let c = cfg(6, 0.02);
        let rho = initial_state(&c, SenderState::new(2.0, 1.0)).unwrap();
        let p = make_propagator(&c, 0.5).unwrap();
        let mut stepped = rho.entries().clone();
        for _ in 0..20 {
            stepped = p.apply(&stepped);
        }
        let direct = evolve(&rho, 10.0, &c).unwrap();
        assert!((stepped - direct.entries()).camax() < 1e-9);
    }

    #[test]
    fn pure_dephasing_decays_exponentially() {
        // H = 0 by zeroing the couplings through a dedicated generator
        let c = cfg(6, 0.05);
        let g = Generator {
            dim: c.dim(),
            hamiltonian: DMatrix::zeros(c.dim(), c.dim()),
            rates: dephasing_rates(&c),
        };
        let d = c.dim();
        let op = DMatrix::from_element(d, d, Complex64::new(1.0 / d as f64, 0.0));
        let mut prev = op.clone();
        for step in 1..=5 {
            let t = step as f64 * 2.0;
            let out = g.evolve_operator(&op, t, Tolerances::default()).unwrap();
            for a in 0..d {
                for b in 0..d {
                    let expected = op[(a, b)].re * (-g.rates[(a, b)] * t).exp();
                    assert!((out[(a, b)].re - expected).abs() < 1e-9);
                    assert!(out[(a, b)].norm() <= prev[(a, b)].norm() + 1e-12);
                }
            }
            prev = out;
        }
    }

    #[test]
    fn linearity_on_non_hermitian_operator() {
        let c = cfg(4, 0.05);
        let g = build_generator(&c).unwrap();
        let d = c.dim();
        let unit = |i: usize, j: usize| {
            let mut m = DMatrix::<Complex64>::zeros(d, d);
            m[(i, j)] = Complex64::new(1.0, 0.0);
            m
        };
        let target = unit(0, 1);
        // |0⟩⟨1| = ½(X) − ½ i(Y) with X = |0⟩⟨1| + |1⟩⟨0|, Y = i(|0⟩⟨1| − |1⟩⟨0|)
        let x = unit(0, 1) + unit(1, 0);
        let y = (unit(0, 1) - unit(1, 0)) * I;
        let tol = Tolerances {
            atol: 1e-13,
            rtol: 1e-11,
        };
        let ev = |m: &DMatrix<Complex64>| g.evolve_operator(m, 3.0, tol).unwrap();
        let direct = ev(&target);
        let combo = (ev(&x) - ev(&y) * I) * Complex64::new(0.5, 0.0);
        assert!((direct - combo).camax() < 1e-10);
    }
}
