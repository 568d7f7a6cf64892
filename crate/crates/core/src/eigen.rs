//! Sector eigenstates, truncation to the dominant bitstrings, and the
//! truncation error bound.
//!
//! Small sectors are diagonalized densely. Above
//! [`SolverConfig::dense_threshold`] a Lanczos iteration with full
//! reorthogonalization is used instead; it never materializes the matrix.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Bitstring, ModelParams, SectorBasis, SparseMatrix};

/// Eigen-residual every returned pair must meet.
pub const RESIDUAL_TOL: f64 = 1e-10;
/// Level spacing below which a level is reported as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub dense_threshold: usize,
    pub max_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dense_threshold: 4000,
            max_iterations: 3000,
        }
    }
}

/// Normalized eigenvector over a sector basis.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub energy: f64,
    pub amplitudes: Vec<C64>,
    /// Particle count of the sector.
    pub sector: usize,
    /// Spacing to the next level above within the searched space.
    pub gap: f64,
    /// `gap < DEGENERACY_TOL`: the vector is then basis dependent.
    pub degenerate: bool,
    /// `||H v - E v||`.
    pub residual: f64,
}

impl EigenPair {
    pub fn overlap(&self, other: &[C64]) -> C64 {
        dot(&self.amplitudes, other)
    }
}

pub(crate) fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub(crate) fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn axpy(y: &mut [C64], a: C64, x: &[C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn scale(v: &mut [C64], s: f64) {
    for x in v {
        *x *= s;
    }
}

fn project_out(v: &mut [C64], against: &[Vec<C64>]) {
    for u in against {
        let c = dot(u, v);
        axpy(v, -c, u);
    }
}

/// Rotate so the largest-magnitude entry is real and positive. Ties within
/// a relative 1e-12 go to the lowest index (lexicographically first string).
pub fn fix_phase(v: &mut [C64]) {
    let max = v.iter().map(|x| x.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return;
    }
    let k = v
        .iter()
        .position(|x| x.norm() >= max * (1.0 - 1e-12))
        .expect("max exists");
    let ph = v[k].conj() / v[k].norm();
    for x in v.iter_mut() {
        *x *= ph;
    }
    v[k].im = 0.0;
}

fn residual(h: &SparseMatrix, v: &[C64], e: f64) -> f64 {
    let hv = h.matvec(v);
    hv.iter()
        .zip(v)
        .map(|(a, b)| (a - b * e).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Full spectrum of a Hermitian matrix, ascending, with column eigenvectors.
pub fn dense_spectrum(h: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let n = h.nrows();
    let real = h.iter().all(|c| c.im == 0.0);
    let (vals, vecs) = if real {
        let r = h.map(|c| c.re);
        let eig = SymmetricEigen::new(r);
        (eig.eigenvalues.as_slice().to_vec(), eig.eigenvectors.map(|x| C64::new(x, 0.0)))
    } else {
        let eig = SymmetricEigen::new(h.clone());
        (eig.eigenvalues.as_slice().to_vec(), eig.eigenvectors)
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    let sorted_vals = order.iter().map(|&i| vals[i]).collect();
    let sorted_vecs = DMatrix::from_fn(n, n, |r, c| vecs[(r, order[c])]);
    (sorted_vals, sorted_vecs)
}

/// Spectral norm `||O||_2` of a Hermitian matrix.
pub fn hermitian_norm(o: &DMatrix<C64>) -> f64 {
    let (vals, _) = dense_spectrum(o);
    vals.iter().map(|v| v.abs()).fold(0.0, f64::max)
}

/// Lowest `k` eigenpairs of `h` restricted to the orthogonal complement of
/// `deflate` (orthonormal vectors).
fn lowest_pairs(
    h: &SparseMatrix,
    k: usize,
    deflate: &[Vec<C64>],
    cfg: &SolverConfig,
) -> Result<Vec<(f64, Vec<C64>)>> {
    let available = h.dim() - deflate.len();
    let k = k.min(available);
    if k == 0 {
        return Ok(Vec::new());
    }
    if h.dim() <= cfg.dense_threshold {
        dense_lowest(h, k, deflate)
    } else {
        lanczos_lowest(h, k, deflate, cfg)
    }
}

fn dense_lowest(h: &SparseMatrix, k: usize, deflate: &[Vec<C64>]) -> Result<Vec<(f64, Vec<C64>)>> {
    let n = h.dim();
    let mut m = h.to_dense();
    if !deflate.is_empty() {
        // Pi H Pi + shift * (1 - Pi) pushes the deflated directions above the
        // whole spectrum, leaving the complement's levels in place.
        let mut p = DMatrix::<C64>::identity(n, n);
        for u in deflate {
            let col = DMatrix::from_column_slice(n, 1, u);
            p -= &col * col.adjoint();
        }
        let shift = 2.0 * h.gershgorin_bound() + 1.0;
        let q = DMatrix::<C64>::identity(n, n) - &p;
        m = &p * m * &p + q * C64::new(shift, 0.0);
        // Symmetrize away rounding so the real fast path applies when it can.
        m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        for c in m.iter_mut() {
            if c.im.abs() < 1e-16 {
                c.im = 0.0;
            }
        }
    }
    let (vals, vecs) = dense_spectrum(&m);
    Ok((0..k)
        .map(|c| {
            let mut v: Vec<C64> = vecs.column(c).iter().copied().collect();
            project_out(&mut v, deflate);
            let nv = norm(&v);
            scale(&mut v, 1.0 / nv);
            (vals[c], v)
        })
        .collect())
}

fn start_vector(dim: usize, deflate: &[Vec<C64>]) -> Vec<C64> {
    // Deterministic, generic start: no accidental symmetry with the lattice.
    let mut v: Vec<C64> = (0..dim)
        .map(|i| {
            let t = i as f64 + 1.0;
            C64::new(1.0 + 0.5 * (0.7 * t).sin(), 0.25 * (1.3 * t).cos())
        })
        .collect();
    project_out(&mut v, deflate);
    project_out(&mut v, deflate);
    let nv = norm(&v);
    scale(&mut v, 1.0 / nv);
    v
}

fn lanczos_lowest(
    h: &SparseMatrix,
    k: usize,
    deflate: &[Vec<C64>],
    cfg: &SolverConfig,
) -> Result<Vec<(f64, Vec<C64>)>> {
    let dim = h.dim();
    let max_iter = cfg.max_iterations.min(dim - deflate.len());
    let mut basis: Vec<Vec<C64>> = vec![start_vector(dim, deflate)];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut last_res = f64::INFINITY;

    loop {
        let j = basis.len() - 1;
        let mut w = h.matvec(&basis[j]);
        project_out(&mut w, deflate);
        let a = dot(&basis[j], &w).re;
        alphas.push(a);
        // Full reorthogonalization, applied twice.
        for _ in 0..2 {
            project_out(&mut w, &basis);
            project_out(&mut w, deflate);
        }
        let b = norm(&w);
        let exhausted = b < 1e-12 || basis.len() >= max_iter;
        let check = exhausted || (basis.len() >= k + 2 && basis.len().is_multiple_of(8));

        if check {
            let m = alphas.len();
            let t = DMatrix::from_fn(m, m, |r, c| {
                if r == c {
                    alphas[r]
                } else if r + 1 == c {
                    betas[r]
                } else if c + 1 == r {
                    betas[c]
                } else {
                    0.0
                }
            });
            let eig = SymmetricEigen::new(t);
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
            let want = k.min(m);
            let est = order[..want]
                .iter()
                .map(|&i| (b * eig.eigenvectors[(m - 1, i)]).abs())
                .fold(0.0, f64::max);
            if est < 1e-12 || exhausted {
                let pairs: Vec<(f64, Vec<C64>)> = order[..want]
                    .iter()
                    .map(|&i| {
                        let mut v = vec![C64::new(0.0, 0.0); dim];
                        for (r, q) in basis.iter().enumerate() {
                            axpy(&mut v, C64::new(eig.eigenvectors[(r, i)], 0.0), q);
                        }
                        let nv = norm(&v);
                        scale(&mut v, 1.0 / nv);
                        (eig.eigenvalues[i], v)
                    })
                    .collect();
                let worst = pairs
                    .iter()
                    .map(|(e, v)| residual(h, v, *e))
                    .fold(0.0, f64::max);
                last_res = worst;
                if worst <= RESIDUAL_TOL || b < 1e-12 {
                    return Ok(pairs);
                }
                if basis.len() >= max_iter {
                    return Err(Error::NoConvergence {
                        iterations: basis.len(),
                        residual: last_res,
                    });
                }
            }
        }
        if exhausted {
            return Err(Error::NoConvergence {
                iterations: basis.len(),
                residual: last_res,
            });
        }
        betas.push(b);
        scale(&mut w, 1.0 / b);
        basis.push(w);
    }
}

fn finish_pair(
    h: &SparseMatrix,
    pairs: Vec<(f64, Vec<C64>)>,
    sector: usize,
) -> Result<EigenPair> {
    let mut it = pairs.into_iter();
    let (energy, mut v) = it.next().ok_or_else(|| {
        Error::InvalidArgument("no eigenpair available in the requested space".into())
    })?;
    let gap = it.next().map(|(e, _)| e - energy).unwrap_or(f64::INFINITY);
    fix_phase(&mut v);
    let res = residual(h, &v, energy);
    if res > RESIDUAL_TOL {
        return Err(Error::NoConvergence {
            iterations: 0,
            residual: res,
        });
    }
    Ok(EigenPair {
        energy,
        amplitudes: v,
        sector,
        gap,
        degenerate: gap < DEGENERACY_TOL,
        residual: res,
    })
}

fn check_hermitian(h: &SparseMatrix) -> Result<()> {
    let d = h.hermiticity_defect();
    if d > 1e-12 {
        return Err(Error::NotHermitian(d));
    }
    Ok(())
}

/// Lowest eigenpair of the sector Hamiltonian.
pub fn ground_state(h: &SparseMatrix, basis: &SectorBasis) -> Result<EigenPair> {
    ground_state_with(h, basis, &SolverConfig::default())
}

pub fn ground_state_with(
    h: &SparseMatrix,
    basis: &SectorBasis,
    cfg: &SolverConfig,
) -> Result<EigenPair> {
    if h.dim() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            got: h.dim(),
        });
    }
    check_hermitian(h)?;
    let pairs = lowest_pairs(h, 2, &[], cfg)?;
    finish_pair(h, pairs, basis.particles())
}

/// Lowest eigenpair of `Pi H Pi` on the complement of the ground state,
/// `Pi = 1 - |gs><gs|`.
pub fn excited_state(h: &SparseMatrix, ground: &EigenPair) -> Result<EigenPair> {
    excited_state_with(h, ground, &SolverConfig::default())
}

pub fn excited_state_with(
    h: &SparseMatrix,
    ground: &EigenPair,
    cfg: &SolverConfig,
) -> Result<EigenPair> {
    if ground.amplitudes.len() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            got: ground.amplitudes.len(),
        });
    }
    if ground.residual > RESIDUAL_TOL {
        return Err(Error::InvalidArgument(format!(
            "ground state residual {:.3e} above {RESIDUAL_TOL:e}",
            ground.residual
        )));
    }
    check_hermitian(h)?;
    let pairs = lowest_pairs(h, 2, std::slice::from_ref(&ground.amplitudes), cfg)?;
    finish_pair(h, pairs, ground.sector)
}

/// State obtained from an imperfect ground-state projector.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedState {
    pub amplitudes: Vec<C64>,
    /// Rayleigh quotient `<v|H|v>`.
    pub energy: f64,
}

/// Lowest eigenvector of `Pi' H Pi'` with `Pi' = 1 - |g'><g'|` built from an
/// approximate ground state `g'` (normalized internally). The result keeps a
/// ground-state admixture no larger than `sqrt(1 - |<g'|gs>|^2)`.
pub fn excited_from_approximate_ground(
    h: &SparseMatrix,
    approx_ground: &[C64],
) -> Result<ProjectedState> {
    if approx_ground.len() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            got: approx_ground.len(),
        });
    }
    let n = norm(approx_ground);
    if n == 0.0 {
        return Err(Error::InvalidArgument("zero approximate ground state".into()));
    }
    let g: Vec<C64> = approx_ground.iter().map(|x| x / n).collect();
    let pairs = lowest_pairs(h, 1, &[g], &SolverConfig::default())?;
    let (_, mut v) = pairs.into_iter().next().expect("one pair");
    fix_phase(&mut v);
    let energy = h.expectation(&v, &v).re;
    Ok(ProjectedState {
        amplitudes: v,
        energy,
    })
}

/// One retained basis component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncEntry {
    pub bitstring: Bitstring,
    pub amplitude: f64,
}

/// Provenance attached to a truncated state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateSource {
    pub params: ModelParams,
    pub sector: usize,
    pub energy: f64,
}

/// The `M` dominant components of a state, unrenormalized.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedState {
    entries: Vec<TruncEntry>,
    kept_norm: f64,
    /// Requested `M` when it exceeded the available dimension.
    pub clamped_from: Option<usize>,
    pub source: Option<StateSource>,
}

fn magnitude_key(a: f64) -> i64 {
    // Magnitudes equal to 12 digits count as tied; ties fall back to the
    // bitstring order so the ranking is platform independent.
    (a.abs() * 1e12).round() as i64
}

impl TruncatedState {
    /// Validate and rank entries by |amplitude| descending, ties broken by
    /// lexicographic bitstring order.
    pub fn from_entries(mut entries: Vec<TruncEntry>) -> Result<Self> {
        let first = entries
            .first()
            .ok_or_else(|| Error::InvalidTruncation("no entries".into()))?;
        let len = first.bitstring.len();
        for e in &entries {
            if e.bitstring.len() != len {
                return Err(Error::LengthMismatch {
                    bitstring: e.bitstring.to_string(),
                    expected: len,
                    got: e.bitstring.len(),
                });
            }
            if !e.amplitude.is_finite() {
                return Err(Error::InvalidTruncation(format!(
                    "non-finite amplitude on {}",
                    e.bitstring
                )));
            }
        }
        entries.sort_by(|a, b| {
            magnitude_key(b.amplitude)
                .cmp(&magnitude_key(a.amplitude))
                .then(a.bitstring.cmp(&b.bitstring))
        });
        let mut seen = std::collections::HashSet::new();
        for e in &entries {
            if !seen.insert(e.bitstring) {
                return Err(Error::DuplicateBitstring(e.bitstring.to_string()));
            }
        }
        let kept_norm: f64 = entries.iter().map(|e| e.amplitude * e.amplitude).sum();
        if kept_norm <= 0.0 {
            return Err(Error::InvalidTruncation("retained amplitudes are all zero".into()));
        }
        if kept_norm > 1.0 + 1e-10 {
            return Err(Error::InvalidTruncation(format!(
                "retained norm {kept_norm} exceeds one"
            )));
        }
        Ok(Self {
            entries,
            kept_norm: kept_norm.min(1.0),
            clamped_from: None,
            source: None,
        })
    }

    pub fn entries(&self) -> &[TruncEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn sites(&self) -> usize {
        self.entries[0].bitstring.len()
    }

    /// `sum alpha_m^2`.
    pub fn kept_norm(&self) -> f64 {
        self.kept_norm
    }

    /// `alpha = sqrt(kept_norm)`.
    pub fn overlap(&self) -> f64 {
        self.kept_norm.sqrt()
    }

    /// `epsilon = sqrt(max(0, 1 - kept_norm))`.
    pub fn defect(&self) -> f64 {
        (1.0 - self.kept_norm).max(0.0).sqrt()
    }

    /// One-norm `lambda = sum |alpha_m|`.
    pub fn one_norm(&self) -> f64 {
        self.entries.iter().map(|e| e.amplitude.abs()).sum()
    }

    pub fn amplitudes(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.amplitude).collect()
    }

    /// Normalized `|phi>` as a sector vector.
    pub fn normalized_vector(&self, basis: &SectorBasis) -> Result<Vec<C64>> {
        let mut v = vec![C64::new(0.0, 0.0); basis.dim()];
        let s = 1.0 / self.overlap();
        for e in &self.entries {
            let i = basis.index_of(&e.bitstring).ok_or_else(|| Error::OutOfSector {
                bitstring: e.bitstring.to_string(),
                particles: basis.particles(),
            })?;
            v[i] = C64::new(e.amplitude * s, 0.0);
        }
        Ok(v)
    }

    /// Normalized `|phi>` on the full `2^sites` register.
    pub fn normalized_full_vector(&self) -> Vec<C64> {
        let mut v = vec![C64::new(0.0, 0.0); 1usize << self.sites()];
        let s = 1.0 / self.overlap();
        for e in &self.entries {
            v[e.bitstring.index() as usize] = C64::new(e.amplitude * s, 0.0);
        }
        v
    }
}

/// Keep the `m` largest-magnitude amplitudes of `state` as stored (no
/// renormalization). Requests above the sector dimension are clamped and
/// recorded in `clamped_from`.
pub fn truncate(state: &EigenPair, basis: &SectorBasis, m: usize) -> Result<TruncatedState> {
    if m == 0 {
        return Err(Error::InvalidTruncation("M must be at least 1".into()));
    }
    if state.amplitudes.len() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            got: state.amplitudes.len(),
        });
    }
    truncate_vector(&state.amplitudes, basis, m)
}

/// [`truncate`] for an arbitrary (phase-fixed, real) sector vector.
pub fn truncate_vector(v: &[C64], basis: &SectorBasis, m: usize) -> Result<TruncatedState> {
    let max_im = v.iter().map(|a| a.im.abs()).fold(0.0, f64::max);
    if max_im > 1e-10 {
        return Err(Error::ComplexAmplitudes(max_im));
    }
    let keep = m.min(v.len());
    let mut order: Vec<usize> = (0..v.len()).collect();
    // Basis is lexicographic, so index order is the documented tie-break.
    order.sort_by(|&a, &b| {
        magnitude_key(v[b].re)
            .cmp(&magnitude_key(v[a].re))
            .then(a.cmp(&b))
    });
    let entries = order[..keep]
        .iter()
        .map(|&i| TruncEntry {
            bitstring: basis.state(i),
            amplitude: v[i].re,
        })
        .collect();
    let mut t = TruncatedState::from_entries(entries)?;
    if keep < m {
        t.clamped_from = Some(m);
    }
    Ok(t)
}

/// Upper bound `(eps^2 + 2 eps alpha) ||O||_2` on the change of an
/// expectation value caused by truncation.
pub fn systematic_bound(defect: f64, overlap: f64, op_norm: f64) -> Result<f64> {
    let in_unit = |x: f64| (-1e-12..=1.0 + 1e-12).contains(&x);
    if !in_unit(defect) || !in_unit(overlap) || (defect * defect + overlap * overlap - 1.0).abs() > 1e-9
    {
        return Err(Error::InconsistentTruncation {
            alpha: overlap,
            epsilon: defect,
        });
    }
    if !(op_norm >= 0.0) {
        return Err(Error::InvalidArgument(format!("operator norm {op_norm} is negative")));
    }
    let (e, a) = (defect.clamp(0.0, 1.0), overlap.clamp(0.0, 1.0));
    Ok((e * e + 2.0 * e * a) * op_norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_thirring, to_sector_sparse};

    fn system(n: usize, m0: f64, g: f64) -> (SectorBasis, SparseMatrix) {
        let p = ModelParams::new(n, m0, g).unwrap();
        let h = build_thirring(&p).unwrap();
        let basis = SectorBasis::new(n, n / 2).unwrap();
        let m = to_sector_sparse(&h, &basis).unwrap();
        (basis, m)
    }

    #[test]
    fn phase_fix_makes_largest_entry_positive() {
        let mut v = vec![C64::new(0.1, 0.0), C64::new(-0.9, 0.0), C64::new(0.0, 0.3)];
        fix_phase(&mut v);
        assert!(v[1].re > 0.0 && v[1].im == 0.0);
        assert!((v[0].re + 0.1).abs() < 1e-15);
    }

    #[test]
    fn large_mass_limit_is_staggered() {
        for n in [2, 4, 6, 8] {
            let (basis, h) = system(n, 10.0, 0.0);
            let gs = ground_state(&h, &basis).unwrap();
            let stag: String = (0..n).map(|x| if x % 2 == 1 { '1' } else { '0' }).collect();
            let i = basis.index_of(&stag.parse().unwrap()).unwrap();
            assert!(gs.amplitudes[i].re > 0.99, "n={n}: {}", gs.amplitudes[i]);
        }
    }

    #[test]
    fn lanczos_agrees_with_dense() {
        let (basis, h) = system(10, 0.5, 0.3);
        let dense = ground_state(&h, &basis).unwrap();
        let cfg = SolverConfig {
            dense_threshold: 10,
            ..Default::default()
        };
        let lz = ground_state_with(&h, &basis, &cfg).unwrap();
        assert!((dense.energy - lz.energy).abs() < 1e-10);
        assert!((dense.overlap(&lz.amplitudes).norm() - 1.0).abs() < 1e-9);
        assert!((dense.gap - lz.gap).abs() < 1e-8);
        let ex_d = excited_state(&h, &dense).unwrap();
        let ex_l = excited_state_with(&h, &lz, &cfg).unwrap();
        assert!((ex_d.energy - ex_l.energy).abs() < 1e-10);
        assert!(ex_l.overlap(&lz.amplitudes).norm() < 1e-10);
    }

    #[test]
    fn excited_state_is_orthogonal() {
        let (basis, h) = system(6, 0.8, 0.2);
        let gs = ground_state(&h, &basis).unwrap();
        let ex = excited_state(&h, &gs).unwrap();
        assert!(ex.overlap(&gs.amplitudes).norm() < 1e-10);
        assert!(ex.energy > gs.energy);
        assert!(ex.residual <= RESIDUAL_TOL);
    }

    #[test]
    fn degenerate_ground_is_flagged() {
        // Two decoupled sites with zero mass and a single particle on two
        // disconnected copies: use the identity, whose spectrum is flat.
        let basis = SectorBasis::new(4, 2).unwrap();
        let id = to_sector_sparse(&crate::pauli::PauliTermSum::identity(4), &basis).unwrap();
        let gs = ground_state(&id, &basis).unwrap();
        assert!(gs.degenerate);
    }

    #[test]
    fn truncation_keeps_largest_and_clamps() {
        let (basis, h) = system(4, 1.0, 0.1);
        let gs = ground_state(&h, &basis).unwrap();
        let t = truncate(&gs, &basis, 4).unwrap();
        let names: Vec<String> = t.entries().iter().map(|e| e.bitstring.to_string()).collect();
        assert_eq!(names, ["0101", "0110", "1001", "0011"]);
        let all = truncate(&gs, &basis, 100).unwrap();
        assert_eq!(all.len(), 6);
        assert_eq!(all.clamped_from, Some(100));
        assert!(all.defect() < 1e-7);
        assert!(truncate(&gs, &basis, 0).is_err());
    }

    #[test]
    fn truncated_state_rejects_duplicates_and_mixed_lengths() {
        let e = |s: &str, a: f64| TruncEntry {
            bitstring: s.parse().unwrap(),
            amplitude: a,
        };
        assert!(matches!(
            TruncatedState::from_entries(vec![e("01", 0.5), e("01", 0.5)]),
            Err(Error::DuplicateBitstring(_))
        ));
        assert!(matches!(
            TruncatedState::from_entries(vec![e("01", 0.5), e("011", 0.5)]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(TruncatedState::from_entries(vec![e("01", 0.0)]).is_err());
    }

    #[test]
    fn bound_edge_values() {
        assert_eq!(systematic_bound(0.0, 1.0, 3.0).unwrap(), 0.0);
        assert_eq!(systematic_bound(1.0, 0.0, 2.5).unwrap(), 2.5);
        assert!(systematic_bound(0.5, 0.5, 1.0).is_err());
        assert!(systematic_bound(0.6, 0.8, -1.0).is_err());
    }
}
