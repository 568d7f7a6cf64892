//! Staggered lattice Thirring chain as qubit operators.
//!
//! Fermion operators are mapped with the Jordan-Wigner string running from
//! site 0 upward, `a_x = Z_0 ... Z_{x-1} (X_x + i Y_x)/2`, so an occupied
//! site is `|1>` and `n_x = (1 - Z_x)/2`. Site 0 is the leftmost character of
//! every bitstring. Boundaries are open.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{Layer, Pauli, PauliString, PauliTermSum, MAX_QUBITS};

const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Couplings of the staggered chain. The lattice spacing is fixed to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub sites: usize,
    pub bare_mass: f64,
    pub coupling: f64,
}

impl ModelParams {
    pub const LATTICE_SPACING: f64 = 1.0;

    pub fn new(sites: usize, bare_mass: f64, coupling: f64) -> Result<Self> {
        let p = Self {
            sites,
            bare_mass,
            coupling,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sites < 2 {
            return Err(Error::InvalidParams(format!(
                "need at least 2 sites, got {}",
                self.sites
            )));
        }
        if !self.sites.is_multiple_of(2) {
            return Err(Error::InvalidParams(format!(
                "site count must be even, got {}",
                self.sites
            )));
        }
        if self.sites > MAX_QUBITS {
            return Err(Error::InvalidParams(format!(
                "site count {} exceeds {MAX_QUBITS}",
                self.sites
            )));
        }
        if !self.bare_mass.is_finite() || !self.coupling.is_finite() {
            return Err(Error::InvalidParams("non-finite coupling".into()));
        }
        Ok(())
    }

    pub fn half_filling(&self) -> usize {
        self.sites / 2
    }
}

/// Occupation pattern of a chain; site 0 is the leftmost character.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bitstring {
    len: usize,
    bits: u64,
}

impl Bitstring {
    /// `bits` uses the basis-index convention: site `x` is bit `len - 1 - x`.
    pub fn new(len: usize, bits: u64) -> Self {
        assert!(len <= MAX_QUBITS);
        debug_assert!(len == 64 || bits >> len == 0);
        Self { len, bits }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Basis index of this pattern in a `2^len` register.
    pub fn index(&self) -> u64 {
        self.bits
    }

    pub fn bit(&self, site: usize) -> bool {
        self.bits & (1u64 << (self.len - 1 - site)) != 0
    }

    pub fn ones(&self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn occupied(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(|&x| self.bit(x))
    }
}

impl fmt::Display for Bitstring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for x in 0..self.len {
            f.write_str(if self.bit(x) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl std::str::FromStr for Bitstring {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || s.len() > MAX_QUBITS {
            return Err(Error::Parse(format!("bad bitstring {s:?}")));
        }
        let mut bits = 0u64;
        for c in s.chars() {
            bits <<= 1;
            match c {
                '0' => {}
                '1' => bits |= 1,
                _ => return Err(Error::Parse(format!("bad bitstring {s:?}"))),
            }
        }
        Ok(Self::new(s.len(), bits))
    }
}

impl Serialize for Bitstring {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Bitstring {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// All `sites`-bit strings with exactly `particles` ones, lexicographically
/// ascending (equivalently, ascending basis index).
#[derive(Debug, Clone)]
pub struct SectorBasis {
    sites: usize,
    particles: usize,
    states: Vec<u64>,
    index: HashMap<u64, usize>,
}

impl SectorBasis {
    pub fn new(sites: usize, particles: usize) -> Result<Self> {
        if sites == 0 || sites > MAX_QUBITS {
            return Err(Error::InvalidArgument(format!("bad site count {sites}")));
        }
        if particles > sites {
            return Err(Error::InvalidArgument(format!(
                "{particles} particles on {sites} sites"
            )));
        }
        let mut states = Vec::new();
        // Gosper's hack walks k-subsets in ascending numeric order.
        if particles == 0 {
            states.push(0);
        } else {
            let limit = 1u128 << sites;
            let mut v: u64 = (1u64 << particles) - 1;
            while (v as u128) < limit {
                states.push(v);
                let c = v & v.wrapping_neg();
                let r = v + c;
                if r == 0 {
                    break;
                }
                v = (((r ^ v) >> 2) / c) | r;
            }
        }
        let index = states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        Ok(Self {
            sites,
            particles,
            states,
            index,
        })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn state(&self, i: usize) -> Bitstring {
        Bitstring::new(self.sites, self.states[i])
    }

    pub fn states(&self) -> impl Iterator<Item = Bitstring> + '_ {
        self.states.iter().map(|&b| Bitstring::new(self.sites, b))
    }

    pub fn index_of(&self, b: &Bitstring) -> Option<usize> {
        if b.len() != self.sites {
            return None;
        }
        self.index.get(&b.index()).copied()
    }

    pub fn index_of_raw(&self, bits: u64) -> Option<usize> {
        self.index.get(&bits).copied()
    }

    /// Embed a sector vector into the full `2^sites` register.
    pub fn embed(&self, v: &[C64]) -> Result<Vec<C64>> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: v.len(),
            });
        }
        let mut out = vec![C64::new(0.0, 0.0); 1usize << self.sites];
        for (a, &b) in v.iter().zip(&self.states) {
            out[b as usize] = *a;
        }
        Ok(out)
    }

    /// Restrict a full-register vector to the sector components.
    pub fn restrict(&self, full: &[C64]) -> Result<Vec<C64>> {
        let n = 1usize << self.sites;
        if full.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: full.len(),
            });
        }
        Ok(self.states.iter().map(|&b| full[b as usize]).collect())
    }
}

/// Jordan-Wigner image of `a_x`.
pub fn annihilation(sites: usize, x: usize) -> Result<PauliTermSum> {
    ladder(sites, x, 1.0)
}

/// Jordan-Wigner image of `a_x^dagger`.
pub fn creation(sites: usize, x: usize) -> Result<PauliTermSum> {
    ladder(sites, x, -1.0)
}

fn ladder(sites: usize, x: usize, y_sign: f64) -> Result<PauliTermSum> {
    if x >= sites {
        return Err(Error::SiteOutOfRange { index: x, sites });
    }
    let mut string: Vec<(usize, Pauli)> = (0..x).map(|q| (q, Pauli::Z)).collect();
    string.push((x, Pauli::X));
    let px = PauliString::from_letters(sites, &string)?;
    string.pop();
    string.push((x, Pauli::Y));
    let py = PauliString::from_letters(sites, &string)?;
    PauliTermSum::from_terms(
        sites,
        vec![(C64::new(0.5, 0.0), px), (C64::new(0.0, 0.5 * y_sign), py)],
    )
}

/// Number operator `a_x^dagger a_x`.
pub fn number(sites: usize, x: usize) -> Result<PauliTermSum> {
    Ok(creation(sites, x)?.product(&annihilation(sites, x)?))
}

fn hopping(sites: usize, x: usize) -> Result<PauliTermSum> {
    let fwd = creation(sites, x)?.product(&annihilation(sites, x + 1)?);
    Ok(fwd.plus(&fwd.adjoint()).simplified())
}

/// Staggered Thirring Hamiltonian
/// `-1/2 sum_x (a+_x a_{x+1} + h.c.) + m0 sum_x (-1)^x n_x + 2g sum_x n_{2x} n_{2x+1}`
/// with the interaction running over the `sites/2` in-range pairs.
///
/// Terms are grouped into four commuting layers, in this order: even-bond
/// hopping, odd-bond hopping, mass, interaction.
pub fn build_thirring(params: &ModelParams) -> Result<PauliTermSum> {
    params.validate()?;
    let n = params.sites;
    let mut even = PauliTermSum::zero(n);
    let mut odd = PauliTermSum::zero(n);
    for x in 0..n - 1 {
        let h = hopping(n, x)?.scaled(C64::new(-0.5, 0.0));
        if x % 2 == 0 {
            even = even.plus(&h);
        } else {
            odd = odd.plus(&h);
        }
    }
    let mut mass = PauliTermSum::zero(n);
    for x in 0..n {
        let sign = if x % 2 == 0 { 1.0 } else { -1.0 };
        mass = mass.plus(&number(n, x)?.scaled(C64::new(sign * params.bare_mass, 0.0)));
    }
    let mut inter = PauliTermSum::zero(n);
    for x in 0..n / 2 {
        let pair = number(n, 2 * x)?.product(&number(n, 2 * x + 1)?);
        inter = inter.plus(&pair.scaled(C64::new(2.0 * params.coupling, 0.0)));
    }

    let families = [
        ("even-hopping", even.simplified()),
        ("odd-hopping", odd.simplified()),
        ("mass", mass.simplified()),
        ("interaction", inter.simplified()),
    ];
    let mut h = PauliTermSum::zero(n);
    let mut layers = Vec::with_capacity(families.len());
    for (name, fam) in families {
        let start = h.len();
        for (c, p) in fam.terms() {
            h.push(*c, *p);
        }
        layers.push(Layer {
            name: name.to_string(),
            terms: (start..h.len()).collect(),
        });
    }
    h.set_layers(layers)?;
    h.add_note(format!(
        "thirring sites={} m0={} g={}",
        params.sites, params.bare_mass, params.coupling
    ));
    Ok(h)
}

/// Total particle number `sum_x n_x`.
pub fn total_number(sites: usize) -> Result<PauliTermSum> {
    let mut s = PauliTermSum::zero(sites);
    for x in 0..sites {
        s = s.plus(&number(sites, x)?);
    }
    Ok(s.simplified())
}

/// Vector current component `mu` at site `x`.
///
/// `J^0(x) = n_x`; `J^1(x) = i(-1)^x/4 (a+_x (a_{x+1} + a_{x-1}) - h.c.)`.
/// At the chain ends the out-of-range leg is dropped and a note is attached.
pub fn build_current(mu: usize, x: usize, params: &ModelParams) -> Result<PauliTermSum> {
    params.validate()?;
    let n = params.sites;
    if x >= n {
        return Err(Error::SiteOutOfRange { index: x, sites: n });
    }
    match mu {
        0 => {
            let mut j = number(n, x)?;
            j.add_note(format!("J0({x})"));
            Ok(j)
        }
        1 => {
            let mut legs = PauliTermSum::zero(n);
            let mut dropped = Vec::new();
            for nb in [x as isize + 1, x as isize - 1] {
                if nb < 0 || nb as usize >= n {
                    dropped.push(nb);
                    continue;
                }
                legs = legs.plus(&annihilation(n, nb as usize)?);
            }
            let a = creation(n, x)?.product(&legs);
            let sign = if x.is_multiple_of(2) { 1.0 } else { -1.0 };
            let mut j = a
                .plus(&a.adjoint().scaled(-ONE))
                .scaled(C64::new(0.0, sign / 4.0))
                .simplified();
            j.add_note(format!("J1({x})"));
            for nb in dropped {
                j.add_note(format!("dropped out-of-range hopping leg to site {nb}"));
            }
            Ok(j)
        }
        _ => Err(Error::InvalidArgument(format!("current index mu={mu} not in {{0,1}}"))),
    }
}

/// Compressed-row sparse matrix over a sector basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl SparseMatrix {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.row(i)
            .find(|&(c, _)| c == j)
            .map(|(_, v)| v)
            .unwrap_or_default()
    }

    /// `y = A x`, parallel over rows with a fixed per-row summation order.
    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.dim);
        (0..self.dim)
            .into_par_iter()
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
            }
        }
        m
    }

    /// Largest |Im| over stored entries.
    pub fn max_imag(&self) -> f64 {
        self.vals.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    /// Gershgorin bound on the spectral radius.
    pub fn gershgorin_bound(&self) -> f64 {
        (0..self.dim)
            .map(|i| self.row(i).map(|(_, v)| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `<u|A|v>`.
    pub fn expectation(&self, u: &[C64], v: &[C64]) -> C64 {
        let av = self.matvec(v);
        u.iter().zip(&av).map(|(a, b)| a.conj() * b).sum()
    }
}

/// Sparse matrix of `op` in the sector basis, `M_ij = <b_i|op|b_j>`.
///
/// Each row is assembled from `op^dagger |b_i>` in term order, so the result
/// does not depend on the thread count.
pub fn to_sector_sparse(op: &PauliTermSum, basis: &SectorBasis) -> Result<SparseMatrix> {
    if op.qubit_count() != basis.sites() {
        return Err(Error::DimensionMismatch {
            expected: basis.sites(),
            got: op.qubit_count(),
        });
    }
    let adj = op.adjoint();
    let rows: Vec<Vec<(usize, C64)>> = (0..basis.dim())
        .into_par_iter()
        .map(|i| {
            let b = basis.states[i];
            // Accumulate per target first: individual strings (XX, YY) leave
            // the sector even when their sum does not.
            let mut acc: BTreeMap<u64, C64> = BTreeMap::new();
            for (amp, t) in adj.apply_to_basis(b) {
                *acc.entry(t).or_default() += amp.conj();
            }
            let mut row = Vec::with_capacity(acc.len());
            for (t, v) in acc {
                if v.norm() <= 1e-15 {
                    continue;
                }
                let j = basis.index_of_raw(t).ok_or_else(|| Error::OutOfSector {
                    bitstring: Bitstring::new(basis.sites(), b).to_string(),
                    particles: basis.particles(),
                })?;
                row.push((j, v));
            }
            row.sort_by_key(|&(j, _)| j);
            Ok(row)
        })
        .collect::<Result<_>>()?;

    let mut row_ptr = Vec::with_capacity(basis.dim() + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    row_ptr.push(0);
    for row in rows {
        for (j, v) in row {
            cols.push(j);
            vals.push(v);
        }
        row_ptr.push(cols.len());
    }
    Ok(SparseMatrix {
        dim: basis.dim(),
        row_ptr,
        cols,
        vals,
    })
}

/// Dense sector matrix; errors if `op` leaves the sector or is not Hermitian.
pub fn to_sector_matrix(op: &PauliTermSum, basis: &SectorBasis) -> Result<DMatrix<C64>> {
    let sparse = to_sector_sparse(op, basis)?;
    let defect = sparse.hermiticity_defect();
    if defect > 1e-12 {
        return Err(Error::NotHermitian(defect));
    }
    Ok(sparse.to_dense())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bs(s: &str) -> Bitstring {
        s.parse().unwrap()
    }

    #[test]
    fn rejects_bad_site_counts() {
        assert!(ModelParams::new(3, 1.0, 0.1).is_err());
        assert!(ModelParams::new(0, 1.0, 0.1).is_err());
        assert!(ModelParams::new(1, 1.0, 0.1).is_err());
        assert!(ModelParams::new(2, 1.0, 0.1).is_ok());
    }

    #[test]
    fn two_site_free_hopping() {
        let h = build_thirring(&ModelParams::new(2, 0.0, 0.0).unwrap()).unwrap();
        let terms: Vec<(C64, String)> = h.terms().iter().map(|(c, p)| (*c, p.to_string())).collect();
        assert_eq!(terms.len(), 2);
        assert!(terms.contains(&(C64::new(-0.25, 0.0), "XX".to_string())));
        assert!(terms.contains(&(C64::new(-0.25, 0.0), "YY".to_string())));
    }

    #[test]
    fn diagonal_element_of_staggered_state() {
        let p = ModelParams::new(4, 1.0, 0.1).unwrap();
        let h = build_thirring(&p).unwrap();
        let b = bs("0101");
        let diag: C64 = h
            .apply_to_basis(b.index())
            .filter(|&(_, t)| t == b.index())
            .map(|(a, _)| a)
            .sum();
        assert!((diag - C64::new(-2.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn number_operator_is_occupation() {
        let n = number(4, 2).unwrap();
        for b in 0..16u64 {
            let bit = Bitstring::new(4, b).bit(2);
            let out: Vec<_> = n.apply_to_basis(b).collect();
            let val: C64 = out.iter().filter(|(_, t)| *t == b).map(|(a, _)| *a).sum();
            assert!((val.re - if bit { 1.0 } else { 0.0 }).abs() < 1e-15);
        }
    }

    #[test]
    fn thirring_conserves_number_and_is_hermitian() {
        for &(n, m0, g) in &[(2, 0.3, 0.0), (4, 1.0, 0.1), (6, -0.4, 0.9), (8, 0.6, 0.4)] {
            let h = build_thirring(&ModelParams::new(n, m0, g).unwrap()).unwrap();
            assert!(h.is_hermitian(1e-14));
            assert!(h.commutator(&total_number(n).unwrap()).max_coeff() < 1e-14);
            h.check_layers().unwrap();
        }
    }

    #[test]
    fn current_support_and_hermiticity() {
        let p = ModelParams::new(4, 1.0, 0.1).unwrap();
        let j = build_current(1, 1, &p).unwrap();
        assert_eq!(j.support(), vec![0, 1, 2]);
        assert!(j.hermiticity_defect() < 1e-14);
        let edge = build_current(1, 0, &p).unwrap();
        assert!(edge.notes().iter().any(|s| s.contains("dropped")));
        assert_eq!(edge.support(), vec![0, 1]);
        assert!(build_current(1, 4, &p).is_err());
        assert!(build_current(2, 0, &p).is_err());
    }

    #[test]
    fn current_conserves_number() {
        let p = ModelParams::new(6, 1.0, 0.1).unwrap();
        let nt = total_number(6).unwrap();
        for x in 0..6 {
            for mu in 0..2 {
                let j = build_current(mu, x, &p).unwrap();
                assert!(j.commutator(&nt).max_coeff() < 1e-14);
            }
        }
    }

    #[test]
    fn sector_basis_order_and_size() {
        let b = SectorBasis::new(4, 2).unwrap();
        let names: Vec<String> = b.states().map(|s| s.to_string()).collect();
        assert_eq!(names, ["0011", "0101", "0110", "1001", "1010", "1100"]);
        assert_eq!(SectorBasis::new(16, 8).unwrap().dim(), 12870);
        assert_eq!(SectorBasis::new(6, 0).unwrap().dim(), 1);
        assert_eq!(SectorBasis::new(6, 6).unwrap().dim(), 1);
        assert_eq!(b.index_of(&bs("1001")), Some(3));
        assert_eq!(b.index_of(&bs("1000")), None);
    }

    #[test]
    fn identity_sector_matrix() {
        let basis = SectorBasis::new(6, 3).unwrap();
        let m = to_sector_matrix(&PauliTermSum::identity(6), &basis).unwrap();
        assert_eq!(m, DMatrix::identity(20, 20));
    }

    #[test]
    fn sector_matrix_rejects_non_conserving_operator() {
        let basis = SectorBasis::new(4, 2).unwrap();
        let x0 = PauliTermSum::from_terms(4, vec![(ONE, "XIII".parse().unwrap())]).unwrap();
        assert!(matches!(
            to_sector_sparse(&x0, &basis),
            Err(Error::OutOfSector { .. })
        ));
    }

    #[test]
    fn sector_matrix_matches_full_matrix_block() {
        let p = ModelParams::new(6, 0.7, 0.3).unwrap();
        let h = build_thirring(&p).unwrap();
        let full = h.to_dense();
        let basis = SectorBasis::new(6, 3).unwrap();
        let m = to_sector_matrix(&h, &basis).unwrap();
        for i in 0..basis.dim() {
            for j in 0..basis.dim() {
                let fi = basis.state(i).index() as usize;
                let fj = basis.state(j).index() as usize;
                assert!((m[(i, j)] - full[fi][fj]).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn current_sector_matrix_is_hermitian() {
        let p = ModelParams::new(6, 0.7, 0.3).unwrap();
        let basis = SectorBasis::new(6, 3).unwrap();
        let j = build_current(1, 2, &p).unwrap();
        let m = to_sector_matrix(&j, &basis).unwrap();
        assert!((m.adjoint() - &m).norm() < 1e-12);
    }
}
