//! Pauli strings and weighted sums of them.
//!
//! A string on `n` qubits is stored as a pair of bit masks `(x, z)` so that
//! the operator is `i^{|x & z|} X^x Z^z`; a qubit with both bits set is a `Y`.
//! Qubit `q` lives at bit `n - 1 - q` of the masks, the same position it has
//! in a computational-basis index, so the leftmost letter of the printed
//! string is qubit 0.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest register handled by the bit-mask representation.
pub const MAX_QUBITS: usize = 63;

const COEFF_TOL: f64 = 1e-15;

#[inline]
pub(crate) fn qubit_bit(n: usize, q: usize) -> u64 {
    1u64 << (n - 1 - q)
}

#[inline]
fn i_pow(k: u32) -> C64 {
    match k % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, 1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, -1.0),
    }
}

/// Single-qubit Pauli letter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn from_char(c: char) -> Option<Self> {
        match c {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }
}

/// Tensor product of single-qubit Paulis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString {
    n: usize,
    x: u64,
    z: u64,
}

impl PauliString {
    pub fn identity(n: usize) -> Self {
        assert!(n <= MAX_QUBITS, "too many qubits");
        Self { n, x: 0, z: 0 }
    }

    /// Build from a list of `(qubit, letter)` pairs; unlisted qubits are `I`.
    pub fn from_letters(n: usize, letters: &[(usize, Pauli)]) -> Result<Self> {
        let mut s = Self::identity(n);
        for &(q, p) in letters {
            if q >= n {
                return Err(Error::QubitOutOfRange { index: q, qubits: n });
            }
            let b = qubit_bit(n, q);
            if (s.x | s.z) & b != 0 {
                return Err(Error::OverlappingQubits(q));
            }
            match p {
                Pauli::I => {}
                Pauli::X => s.x |= b,
                Pauli::Z => s.z |= b,
                Pauli::Y => {
                    s.x |= b;
                    s.z |= b;
                }
            }
        }
        Ok(s)
    }

    pub fn single(n: usize, q: usize, p: Pauli) -> Result<Self> {
        Self::from_letters(n, &[(q, p)])
    }

    pub fn qubit_count(&self) -> usize {
        self.n
    }

    pub fn x_mask(&self) -> u64 {
        self.x
    }

    pub fn z_mask(&self) -> u64 {
        self.z
    }

    pub fn letter(&self, q: usize) -> Pauli {
        let b = qubit_bit(self.n, q);
        match (self.x & b != 0, self.z & b != 0) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    pub fn is_diagonal(&self) -> bool {
        self.x == 0
    }

    /// Qubits on which the string acts non-trivially, ascending.
    pub fn support(&self) -> Vec<usize> {
        (0..self.n)
            .filter(|&q| (self.x | self.z) & qubit_bit(self.n, q) != 0)
            .collect()
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()).is_multiple_of(2)
    }

    /// Product `self * other = phase * result`.
    pub fn mul(&self, other: &PauliString) -> (C64, PauliString) {
        debug_assert_eq!(self.n, other.n);
        let x = self.x ^ other.x;
        let z = self.z ^ other.z;
        let e = (self.x & self.z).count_ones()
            + (other.x & other.z).count_ones()
            + 2 * (self.z & other.x).count_ones()
            + 4 * self.n as u32
            - (x & z).count_ones();
        (i_pow(e), PauliString { n: self.n, x, z })
    }

    /// Action on a computational basis state: `P|b> = phase |b'>`.
    #[inline]
    pub fn apply_to_basis(&self, b: u64) -> (C64, u64) {
        let k = (self.x & self.z).count_ones() + 2 * (self.z & b).count_ones();
        (i_pow(k), b ^ self.x)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in 0..self.n {
            let c = match self.letter(q) {
                Pauli::I => 'I',
                Pauli::X => 'X',
                Pauli::Y => 'Y',
                Pauli::Z => 'Z',
            };
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl std::str::FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let n = s.chars().count();
        if n == 0 || n > MAX_QUBITS {
            return Err(Error::Parse(format!("bad Pauli string length {n}")));
        }
        let mut letters = Vec::with_capacity(n);
        for (q, c) in s.chars().enumerate() {
            let p = Pauli::from_char(c)
                .ok_or_else(|| Error::Parse(format!("bad Pauli letter {c:?} in {s:?}")))?;
            letters.push((q, p));
        }
        Self::from_letters(n, &letters)
    }
}

/// A named group of term indices whose strings pairwise commute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub name: String,
    pub terms: Vec<usize>,
}

/// Weighted sum of Pauli strings on a fixed register.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliTermSum {
    qubit_count: usize,
    terms: Vec<(C64, PauliString)>,
    layers: Option<Vec<Layer>>,
    notes: Vec<String>,
}

/// One serialized term: `{coeff_re, coeff_im, pauli_string}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermRecord {
    pub coeff_re: f64,
    pub coeff_im: f64,
    pub pauli_string: String,
}

impl PauliTermSum {
    pub fn zero(qubit_count: usize) -> Self {
        assert!(qubit_count <= MAX_QUBITS, "too many qubits");
        Self {
            qubit_count,
            terms: Vec::new(),
            layers: None,
            notes: Vec::new(),
        }
    }

    pub fn identity(qubit_count: usize) -> Self {
        let mut s = Self::zero(qubit_count);
        s.push(C64::new(1.0, 0.0), PauliString::identity(qubit_count));
        s
    }

    pub fn from_terms(qubit_count: usize, terms: Vec<(C64, PauliString)>) -> Result<Self> {
        for (c, p) in &terms {
            if p.n != qubit_count {
                return Err(Error::DimensionMismatch {
                    expected: qubit_count,
                    got: p.n,
                });
            }
            if !(c.re.is_finite() && c.im.is_finite()) {
                return Err(Error::InvalidArgument(format!("non-finite coefficient on {p}")));
            }
        }
        Ok(Self {
            qubit_count,
            terms,
            layers: None,
            notes: Vec::new(),
        })
    }

    pub fn qubit_count(&self) -> usize {
        self.qubit_count
    }

    pub fn terms(&self) -> &[(C64, PauliString)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn layers(&self) -> Option<&[Layer]> {
        self.layers.as_deref()
    }

    pub fn notes(&self) -> &[String] {
        &self.notes
    }

    pub(crate) fn add_note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    pub fn push(&mut self, coeff: C64, string: PauliString) {
        debug_assert_eq!(string.n, self.qubit_count);
        self.terms.push((coeff, string));
    }

    /// Install a layer partition. Every term index must appear exactly once.
    pub fn set_layers(&mut self, layers: Vec<Layer>) -> Result<()> {
        let mut seen = vec![false; self.terms.len()];
        for layer in &layers {
            for &t in &layer.terms {
                if t >= seen.len() || seen[t] {
                    return Err(Error::InvalidArgument(format!(
                        "layer {} references term {t} twice or out of range",
                        layer.name
                    )));
                }
                seen[t] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidArgument("layers do not cover every term".into()));
        }
        self.layers = Some(layers);
        Ok(())
    }

    /// Symbolic check that every layer consists of pairwise-commuting strings.
    pub fn check_layers(&self) -> Result<()> {
        let layers = self.layers.as_ref().ok_or(Error::MissingLayers)?;
        for layer in layers {
            for (i, &a) in layer.terms.iter().enumerate() {
                for &b in &layer.terms[i + 1..] {
                    let (pa, pb) = (&self.terms[a].1, &self.terms[b].1);
                    if !pa.commutes_with(pb) {
                        return Err(Error::NonCommutingLayer {
                            layer: layer.name.clone(),
                            a: pa.to_string(),
                            b: pb.to_string(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Combine equal strings and drop vanishing coefficients. Layers are
    /// discarded since term indices change.
    pub fn simplified(&self) -> Self {
        let mut acc: BTreeMap<PauliString, C64> = BTreeMap::new();
        for (c, p) in &self.terms {
            *acc.entry(*p).or_default() += c;
        }
        let terms = acc
            .into_iter()
            .filter(|(_, c)| c.norm() > COEFF_TOL)
            .map(|(p, c)| (c, p))
            .collect();
        Self {
            qubit_count: self.qubit_count,
            terms,
            layers: None,
            notes: self.notes.clone(),
        }
    }

    pub fn adjoint(&self) -> Self {
        let mut out = self.clone();
        for (c, _) in &mut out.terms {
            *c = c.conj();
        }
        out
    }

    pub fn scaled(&self, s: C64) -> Self {
        let mut out = self.clone();
        for (c, _) in &mut out.terms {
            *c *= s;
        }
        out.layers = None;
        out
    }

    pub fn plus(&self, other: &Self) -> Self {
        assert_eq!(self.qubit_count, other.qubit_count);
        let mut out = self.clone();
        out.terms.extend_from_slice(&other.terms);
        out.layers = None;
        out
    }

    pub fn product(&self, other: &Self) -> Self {
        assert_eq!(self.qubit_count, other.qubit_count);
        let mut out = Self::zero(self.qubit_count);
        for (ca, pa) in &self.terms {
            for (cb, pb) in &other.terms {
                let (ph, p) = pa.mul(pb);
                out.terms.push((ca * cb * ph, p));
            }
        }
        out.simplified()
    }

    pub fn commutator(&self, other: &Self) -> Self {
        let ab = self.product(other);
        let ba = other.product(self);
        ab.plus(&ba.scaled(C64::new(-1.0, 0.0))).simplified()
    }

    /// Largest coefficient magnitude left after simplification.
    pub fn max_coeff(&self) -> f64 {
        self.simplified()
            .terms
            .iter()
            .map(|(c, _)| c.norm())
            .fold(0.0, f64::max)
    }

    /// Largest deviation between the operator and its adjoint, measured on
    /// simplified coefficients.
    pub fn hermiticity_defect(&self) -> f64 {
        self.plus(&self.adjoint().scaled(C64::new(-1.0, 0.0)))
            .max_coeff()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    /// Union of supports of all non-identity terms after simplification.
    pub fn support(&self) -> Vec<usize> {
        let mut mask = 0u64;
        for (_, p) in &self.simplified().terms {
            mask |= p.x | p.z;
        }
        (0..self.qubit_count)
            .filter(|&q| mask & qubit_bit(self.qubit_count, q) != 0)
            .collect()
    }

    /// `O|b>` as a list of `(amplitude, basis state)`; repeated targets are
    /// not merged.
    pub fn apply_to_basis(&self, b: u64) -> impl Iterator<Item = (C64, u64)> + '_ {
        self.terms.iter().map(move |(c, p)| {
            let (ph, t) = p.apply_to_basis(b);
            (c * ph, t)
        })
    }

    /// Dense action on a full `2^n` amplitude vector.
    pub fn apply(&self, amps: &[C64]) -> Result<Vec<C64>> {
        let dim = 1usize << self.qubit_count;
        if amps.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: amps.len(),
            });
        }
        let mut out = vec![C64::new(0.0, 0.0); dim];
        for (c, p) in &self.terms {
            for (b, a) in amps.iter().enumerate() {
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let (ph, t) = p.apply_to_basis(b as u64);
                out[t as usize] += c * ph * a;
            }
        }
        Ok(out)
    }

    /// `<u|O|v>` over the full register.
    pub fn matrix_element(&self, u: &[C64], v: &[C64]) -> Result<C64> {
        let ov = self.apply(v)?;
        Ok(u.iter().zip(&ov).map(|(a, b)| a.conj() * b).sum())
    }

    /// Dense `2^n x 2^n` matrix, row-major; only sensible for small `n`.
    pub fn to_dense(&self) -> Vec<Vec<C64>> {
        let dim = 1usize << self.qubit_count;
        let mut m = vec![vec![C64::new(0.0, 0.0); dim]; dim];
        for b in 0..dim {
            for (amp, t) in self.apply_to_basis(b as u64) {
                m[t as usize][b] += amp;
            }
        }
        m
    }

    pub fn to_records(&self) -> Vec<TermRecord> {
        self.terms
            .iter()
            .map(|(c, p)| TermRecord {
                coeff_re: c.re,
                coeff_im: c.im,
                pauli_string: p.to_string(),
            })
            .collect()
    }

    pub fn from_records(records: &[TermRecord]) -> Result<Self> {
        let first = records
            .first()
            .ok_or_else(|| Error::Parse("empty term list".into()))?;
        let n = first.pauli_string.chars().count();
        let terms = records
            .iter()
            .map(|r| {
                let p: PauliString = r.pauli_string.parse()?;
                Ok((C64::new(r.coeff_re, r.coeff_im), p))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_terms(n, terms)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_records()).expect("term records serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let records: Vec<TermRecord> = serde_json::from_str(s)?;
        Self::from_records(&records)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    #[test]
    fn letters_round_trip() {
        let s = p("IXYZ");
        assert_eq!(s.to_string(), "IXYZ");
        assert_eq!(s.letter(2), Pauli::Y);
        assert_eq!(s.support(), vec![1, 2, 3]);
    }

    #[test]
    fn single_qubit_products() {
        let (ph, r) = p("X").mul(&p("Y"));
        assert_eq!(r, p("Z"));
        assert_eq!(ph, C64::new(0.0, 1.0));
        let (ph, r) = p("Y").mul(&p("X"));
        assert_eq!(r, p("Z"));
        assert_eq!(ph, C64::new(0.0, -1.0));
        let (ph, r) = p("Z").mul(&p("Y"));
        assert_eq!(r, p("X"));
        assert_eq!(ph, C64::new(0.0, -1.0));
        let (ph, r) = p("Y").mul(&p("Y"));
        assert!(r.is_identity());
        assert_eq!(ph, C64::new(1.0, 0.0));
    }

    #[test]
    fn basis_action_matches_matrices() {
        // Y|0> = i|1>, Y|1> = -i|0>
        assert_eq!(p("Y").apply_to_basis(0), (C64::new(0.0, 1.0), 1));
        assert_eq!(p("Y").apply_to_basis(1), (C64::new(0.0, -1.0), 0));
        // Z on qubit 0 (the high bit) of |10>
        assert_eq!(p("ZI").apply_to_basis(0b10), (C64::new(-1.0, 0.0), 0b10));
        assert_eq!(p("XI").apply_to_basis(0b00), (C64::new(1.0, 0.0), 0b10));
    }

    #[test]
    fn commutation() {
        assert!(p("XX").commutes_with(&p("YY")));
        assert!(!p("XI").commutes_with(&p("ZI")));
        assert!(p("XZ").commutes_with(&p("ZX")));
    }

    #[test]
    fn hermiticity_of_sum() {
        let mut s = PauliTermSum::zero(2);
        s.push(C64::new(0.5, 0.0), p("XY"));
        assert!(s.is_hermitian(1e-14));
        s.push(C64::new(0.0, 0.5), p("ZZ"));
        assert!(!s.is_hermitian(1e-14));
    }

    #[test]
    fn commutator_of_xx_yy_vanishes() {
        let mut a = PauliTermSum::zero(2);
        a.push(C64::new(1.0, 0.0), p("XX"));
        let mut b = PauliTermSum::zero(2);
        b.push(C64::new(1.0, 0.0), p("YY"));
        assert!(a.commutator(&b).is_empty());
        let mut c = PauliTermSum::zero(2);
        c.push(C64::new(1.0, 0.0), p("ZI"));
        assert!(!a.commutator(&c).is_empty());
    }

    #[test]
    fn layer_check_detects_noncommuting_terms() {
        let mut s = PauliTermSum::zero(2);
        s.push(C64::new(1.0, 0.0), p("XI"));
        s.push(C64::new(1.0, 0.0), p("ZI"));
        assert_eq!(s.check_layers(), Err(Error::MissingLayers));
        s.set_layers(vec![Layer {
            name: "bad".into(),
            terms: vec![0, 1],
        }])
        .unwrap();
        assert!(matches!(s.check_layers(), Err(Error::NonCommutingLayer { .. })));
    }

    #[test]
    fn json_round_trip() {
        let mut s = PauliTermSum::zero(3);
        s.push(C64::new(-0.25, 0.0), p("XXI"));
        s.push(C64::new(0.0, 0.125), p("IYZ"));
        let back = PauliTermSum::from_json(&s.to_json()).unwrap();
        assert_eq!(back.terms(), s.terms());
    }

    #[test]
    fn dense_matches_apply() {
        let mut s = PauliTermSum::zero(2);
        s.push(C64::new(0.3, 0.0), p("XY"));
        s.push(C64::new(-0.7, 0.0), p("ZI"));
        let m = s.to_dense();
        let v = vec![
            C64::new(0.1, 0.2),
            C64::new(-0.3, 0.0),
            C64::new(0.5, -0.1),
            C64::new(0.0, 0.4),
        ];
        let out = s.apply(&v).unwrap();
        for i in 0..4 {
            let r: C64 = (0..4).map(|j| m[i][j] * v[j]).sum();
            assert!((r - out[i]).norm() < 1e-15);
        }
    }
}
