//! Exact `exp(-i H t)` on a particle-number sector.
//!
//! Small sectors use a full eigendecomposition; large ones a Lanczos
//! (Krylov) exponential with adaptive sub-stepping.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::eigen::{dense_spectrum, dot, norm, SolverConfig};
use crate::error::{Error, Result};
use crate::lattice::SparseMatrix;

/// Hermiticity tolerance for accepted Hamiltonians.
const HERMITIAN_TOL: f64 = 1e-10;
/// Krylov subspace dimension per sub-step.
const KRYLOV_DIM: usize = 40;
/// Target truncation error per sub-step.
const KRYLOV_TOL: f64 = 1e-13;

#[derive(Debug, Clone)]
pub enum Propagator {
    Spectral {
        energies: Vec<f64>,
        vectors: DMatrix<C64>,
    },
    Krylov {
        h: SparseMatrix,
    },
}

impl Propagator {
    pub fn new(h: &SparseMatrix) -> Result<Self> {
        Self::with_config(h, &SolverConfig::default())
    }

    pub fn with_config(h: &SparseMatrix, cfg: &SolverConfig) -> Result<Self> {
        let defect = h.hermiticity_defect();
        if defect > HERMITIAN_TOL {
            return Err(Error::NotHermitian(defect));
        }
        if h.dim() <= cfg.dense_threshold {
            let (energies, vectors) = dense_spectrum(&h.to_dense());
            Ok(Self::Spectral { energies, vectors })
        } else {
            Ok(Self::Krylov { h: h.clone() })
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Spectral { energies, .. } => energies.len(),
            Self::Krylov { h } => h.dim(),
        }
    }

    fn check(&self, state: &[C64]) -> Result<()> {
        if state.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: state.len(),
            });
        }
        Ok(())
    }

    /// `exp(-i H t) state`.
    pub fn evolve(&self, state: &[C64], t: f64) -> Result<Vec<C64>> {
        self.check(state)?;
        match self {
            Self::Spectral { energies, vectors } => {
                let c = vectors.adjoint() * DVector::from_column_slice(state);
                let phased = DVector::from_iterator(
                    c.len(),
                    c.iter().zip(energies).map(|(a, e)| a * C64::from_polar(1.0, -e * t)),
                );
                Ok((vectors * phased).iter().copied().collect())
            }
            Self::Krylov { h } => krylov_expm(h, state, t),
        }
    }

    /// `exp(-i H n dt) state` for `n = 0..=steps`.
    pub fn trajectory(&self, state: &[C64], dt: f64, steps: usize) -> Result<Vec<Vec<C64>>> {
        self.check(state)?;
        let mut out = Vec::with_capacity(steps + 1);
        match self {
            Self::Spectral { energies, vectors } => {
                let c = vectors.adjoint() * DVector::from_column_slice(state);
                for n in 0..=steps {
                    let t = n as f64 * dt;
                    let phased = DVector::from_iterator(
                        c.len(),
                        c.iter().zip(energies).map(|(a, e)| a * C64::from_polar(1.0, -e * t)),
                    );
                    out.push((vectors * phased).iter().copied().collect());
                }
            }
            Self::Krylov { h } => {
                let mut cur = state.to_vec();
                out.push(cur.clone());
                for _ in 0..steps {
                    cur = krylov_expm(h, &cur, dt)?;
                    out.push(cur.clone());
                }
            }
        }
        Ok(out)
    }

    /// `<a| exp(-i H n dt) |a>` for `n = 0..=steps`.
    pub fn return_amplitudes(&self, state: &[C64], dt: f64, steps: usize) -> Result<Vec<C64>> {
        self.check(state)?;
        match self {
            Self::Spectral { energies, vectors } => {
                let c = vectors.adjoint() * DVector::from_column_slice(state);
                let w: Vec<f64> = c.iter().map(|a| a.norm_sqr()).collect();
                Ok((0..=steps)
                    .map(|n| {
                        let t = n as f64 * dt;
                        w.iter()
                            .zip(energies)
                            .map(|(p, e)| C64::from_polar(*p, -e * t))
                            .sum()
                    })
                    .collect())
            }
            Self::Krylov { .. } => Ok(self
                .trajectory(state, dt, steps)?
                .iter()
                .map(|v| dot(state, v))
                .collect()),
        }
    }
}

/// One-shot exact evolution of a sector vector.
pub fn exact_evolve(h: &SparseMatrix, state: &[C64], t: f64) -> Result<Vec<C64>> {
    Propagator::new(h)?.evolve(state, t)
}

fn krylov_expm(h: &SparseMatrix, state: &[C64], t: f64) -> Result<Vec<C64>> {
    let mut cur = state.to_vec();
    let mut remaining = t;
    let mut tau = t;
    let mut guard = 0;
    while remaining.abs() > 0.0 {
        guard += 1;
        if guard > 100_000 {
            return Err(Error::NoConvergence {
                iterations: guard,
                residual: f64::NAN,
            });
        }
        if tau.abs() > remaining.abs() {
            tau = remaining;
        }
        match krylov_step(h, &cur, tau) {
            Some(next) => {
                cur = next;
                remaining -= tau;
                if (remaining / t).abs() < 1e-15 {
                    break;
                }
            }
            None => tau /= 2.0,
        }
    }
    Ok(cur)
}

/// Lanczos approximation of `exp(-i H tau) v`; `None` if the error estimate
/// exceeds tolerance.
fn krylov_step(h: &SparseMatrix, v: &[C64], tau: f64) -> Option<Vec<C64>> {
    let beta0 = norm(v);
    if beta0 == 0.0 {
        return Some(v.to_vec());
    }
    let m_max = KRYLOV_DIM.min(h.dim());
    let mut basis: Vec<Vec<C64>> = vec![v.iter().map(|x| x / beta0).collect()];
    let mut alpha = Vec::new();
    let mut beta = Vec::new();
    let mut exhausted = false;
    for j in 0..m_max {
        let mut w = h.matvec(&basis[j]);
        let a = dot(&basis[j], &w).re;
        alpha.push(a);
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &w);
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi -= c * bi;
                }
            }
        }
        let bnorm = norm(&w);
        if bnorm < 1e-12 * (1.0 + a.abs()) {
            exhausted = true;
            break;
        }
        beta.push(bnorm);
        if j + 1 < m_max {
            basis.push(w.iter().map(|x| x / bnorm).collect());
        }
    }
    let m = alpha.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = nalgebra::SymmetricEigen::new(t);
    // exp(-i tau T) e_1
    let coeffs: Vec<C64> = (0..m)
        .map(|r| {
            (0..m)
                .map(|k| {
                    let q = eig.eigenvectors[(r, k)] * eig.eigenvectors[(0, k)];
                    C64::from_polar(q, -eig.eigenvalues[k] * tau)
                })
                .sum()
        })
        .collect();
    if !exhausted && m == beta.len() {
        let err = beta[m - 1] * coeffs[m - 1].norm();
        if err > KRYLOV_TOL {
            return None;
        }
    }
    let mut out = vec![C64::new(0.0, 0.0); v.len()];
    for (c, b) in coeffs.iter().zip(&basis) {
        for (o, x) in out.iter_mut().zip(b) {
            *o += c * beta0 * x;
        }
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::ground_state;
    use crate::lattice::{build_thirring, to_sector_sparse, ModelParams, SectorBasis};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model(n: usize) -> (SparseMatrix, SectorBasis) {
        let p = ModelParams::new(n, 0.8, 0.3).unwrap();
        let basis = SectorBasis::new(n, n / 2).unwrap();
        let h = to_sector_sparse(&build_thirring(&p).unwrap(), &basis).unwrap();
        (h, basis)
    }

    fn random_state(dim: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
        let v: Vec<C64> = (0..dim)
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let n = norm(&v);
        v.into_iter().map(|a| a / n).collect()
    }

    fn dist(a: &[C64], b: &[C64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
    }

    #[test]
    fn zero_time_is_identity() {
        let (h, b) = model(6);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let psi = random_state(b.dim(), &mut rng);
        assert!(dist(&exact_evolve(&h, &psi, 0.0).unwrap(), &psi) < 1e-13);
    }

    #[test]
    fn eigenstate_picks_up_phase() {
        let (h, b) = model(6);
        let gs = ground_state(&h, &b).unwrap();
        let out = exact_evolve(&h, &gs.amplitudes, 2.5).unwrap();
        let ph = C64::from_polar(1.0, -gs.energy * 2.5);
        let want: Vec<C64> = gs.amplitudes.iter().map(|a| a * ph).collect();
        assert!(dist(&out, &want) < 1e-10);
    }

    #[test]
    fn composition_and_energy_conservation() {
        let (h, b) = model(8);
        let prop = Propagator::new(&h).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..5 {
            let psi = random_state(b.dim(), &mut rng);
            let (t1, t2) = (rng.random_range(0.0..3.0), rng.random_range(0.0..3.0));
            let a = prop.evolve(&prop.evolve(&psi, t1).unwrap(), t2).unwrap();
            let c = prop.evolve(&psi, t1 + t2).unwrap();
            assert!(dist(&a, &c) < 1e-10);
            let e0 = h.expectation(&psi, &psi).re;
            let e1 = h.expectation(&c, &c).re;
            assert!((e0 - e1).abs() < 1e-10);
        }
    }

    #[test]
    fn krylov_matches_spectral() {
        let (h, b) = model(8);
        let dense = Propagator::new(&h).unwrap();
        let cfg = SolverConfig {
            dense_threshold: 10,
            ..SolverConfig::default()
        };
        let kry = Propagator::with_config(&h, &cfg).unwrap();
        assert!(matches!(kry, Propagator::Krylov { .. }));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let psi = random_state(b.dim(), &mut rng);
        for t in [0.1, 1.0, 7.3] {
            let a = dense.evolve(&psi, t).unwrap();
            let k = kry.evolve(&psi, t).unwrap();
            assert!(dist(&a, &k) < 1e-10, "t={t}");
        }
        let ra = dense.return_amplitudes(&psi, 0.1, 30).unwrap();
        let rk = kry.return_amplitudes(&psi, 0.1, 30).unwrap();
        assert!(dist(&ra, &rk) < 1e-10);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let (h, _) = model(4);
        assert!(matches!(
            exact_evolve(&h, &[C64::new(1.0, 0.0)], 1.0),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
