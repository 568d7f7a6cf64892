//! Dense statevector simulator.
//!
//! Qubit `q` of an `n`-qubit register is bit `n - 1 - q` of the amplitude
//! index, so printing an index in binary lists qubit 0 first.

use std::io::{Read, Write};

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::circuit::{Circuit, Control, Gate, GateKind};
use crate::pauli::PauliString;
use crate::error::{Error, Result};

/// Registers at or above this size apply gates in parallel.
const PAR_THRESHOLD: usize = 1 << 14;
/// Largest register the simulator will allocate.
pub const MAX_SIM_QUBITS: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: Vec<C64>,
}

fn gate_matrix(g: &Gate) -> [[C64; 2]; 2] {
    let zero = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    match g.kind {
        GateKind::RY => {
            let t = g.angle.unwrap_or(0.0) / 2.0;
            let (s, c) = t.sin_cos();
            [[C64::new(c, 0.0), C64::new(-s, 0.0)], [C64::new(s, 0.0), C64::new(c, 0.0)]]
        }
        GateKind::RZ => {
            let t = g.angle.unwrap_or(0.0) / 2.0;
            [[C64::from_polar(1.0, -t), zero], [zero, C64::from_polar(1.0, t)]]
        }
        GateKind::X | GateKind::CX | GateKind::MCX => [[zero, one], [one, zero]],
        GateKind::H => {
            let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
            [[h, h], [h, -h]]
        }
        GateKind::Z | GateKind::MCZ => [[one, zero], [zero, -one]],
        GateKind::CPhase => [[one, zero], [zero, C64::from_polar(1.0, g.angle.unwrap_or(0.0))]],
        GateKind::GPhase | GateKind::CuMarker => [[one, zero], [zero, one]],
    }
}

#[inline]
fn apply_pair(m: &[[C64; 2]; 2], a: &mut C64, b: &mut C64) {
    let (x, y) = (*a, *b);
    *a = m[0][0] * x + m[0][1] * y;
    *b = m[1][0] * x + m[1][1] * y;
}

impl StateVector {
    /// `|0...0>` on `n` qubits.
    pub fn zero(n: usize) -> Result<Self> {
        Self::basis(n, 0)
    }

    pub fn basis(n: usize, index: usize) -> Result<Self> {
        if n > MAX_SIM_QUBITS {
            return Err(Error::InvalidArgument(format!(
                "{n} qubits exceeds the simulator limit of {MAX_SIM_QUBITS}"
            )));
        }
        let dim = 1usize << n;
        if index >= dim {
            return Err(Error::InvalidArgument(format!("basis index {index} >= {dim}")));
        }
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        amps[index] = C64::new(1.0, 0.0);
        Ok(Self { n, amps })
    }

    /// Wrap amplitudes, normalizing them. The length must be a power of two.
    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        let dim = amps.len();
        if dim == 0 || !dim.is_power_of_two() {
            return Err(Error::InvalidArgument(format!("length {dim} is not a power of two")));
        }
        let n = dim.trailing_zeros() as usize;
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidArgument("cannot normalize a zero vector".into()));
        }
        Ok(Self {
            n,
            amps: amps.into_iter().map(|a| a / norm).collect(),
        })
    }

    pub fn qubit_count(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// `|<self|other>|^2`.
    pub fn fidelity(&self, other: &StateVector) -> f64 {
        self.inner(other).norm_sqr()
    }

    fn bit(&self, q: usize) -> usize {
        1usize << (self.n - 1 - q)
    }

    pub fn apply_gate(&mut self, g: &Gate) -> Result<()> {
        g.validate(self.n)?;
        let mut cmask = 0usize;
        let mut cval = 0usize;
        for c in &g.controls {
            let b = self.bit(c.qubit);
            cmask |= b;
            if c.on {
                cval |= b;
            }
        }
        match g.kind {
            GateKind::CuMarker => return Ok(()),
            GateKind::GPhase => {
                let ph = C64::from_polar(1.0, g.angle.unwrap_or(0.0));
                let f = |(i, a): (usize, &mut C64)| {
                    if i & cmask == cval {
                        *a *= ph;
                    }
                };
                if self.dim() >= PAR_THRESHOLD {
                    self.amps.par_iter_mut().enumerate().for_each(f);
                } else {
                    self.amps.iter_mut().enumerate().for_each(f);
                }
                return Ok(());
            }
            _ => {}
        }
        let m = gate_matrix(g);
        let tb = self.bit(g.targets[0]);
        let block = 2 * tb;
        let work = |(k, chunk): (usize, &mut [C64])| {
            let base = k * block;
            let (lo, hi) = chunk.split_at_mut(tb);
            for (j, (a, b)) in lo.iter_mut().zip(hi.iter_mut()).enumerate() {
                if (base + j) & cmask == cval {
                    apply_pair(&m, a, b);
                }
            }
        };
        if self.dim() >= PAR_THRESHOLD && block < self.dim() {
            self.amps.par_chunks_mut(block).enumerate().for_each(work);
        } else if self.dim() >= PAR_THRESHOLD {
            let (lo, hi) = self.amps.split_at_mut(tb);
            lo.par_iter_mut()
                .zip(hi.par_iter_mut())
                .enumerate()
                .for_each(|(j, (a, b))| {
                    if j & cmask == cval {
                        apply_pair(&m, a, b);
                    }
                });
        } else {
            self.amps.chunks_mut(block).enumerate().for_each(work);
        }
        Ok(())
    }

    /// Run every gate of `circuit`; the circuit may use a prefix of the register.
    pub fn apply_circuit(&mut self, circuit: &Circuit) -> Result<()> {
        if circuit.qubit_count() > self.n {
            return Err(Error::QubitOutOfRange {
                index: circuit.qubit_count() - 1,
                qubits: self.n,
            });
        }
        for g in circuit.gates() {
            self.apply_gate(g)?;
        }
        Ok(())
    }

    /// `exp(-i theta P)` with `P` placed on qubits `offset..offset + P.len`,
    /// optionally conditioned on `control`. Applied directly on amplitude
    /// pairs rather than through a gate decomposition.
    pub fn apply_pauli_rotation(
        &mut self,
        p: &PauliString,
        offset: usize,
        theta: f64,
        control: Option<Control>,
    ) -> Result<()> {
        let pn = p.qubit_count();
        if offset + pn > self.n {
            return Err(Error::QubitOutOfRange {
                index: offset + pn - 1,
                qubits: self.n,
            });
        }
        let (cmask, cval) = match control {
            Some(c) => {
                if c.qubit >= self.n {
                    return Err(Error::QubitOutOfRange {
                        index: c.qubit,
                        qubits: self.n,
                    });
                }
                if (offset..offset + pn).contains(&c.qubit) {
                    return Err(Error::OverlappingQubits(c.qubit));
                }
                let b = self.bit(c.qubit);
                (b, if c.on { b } else { 0 })
            }
            None => (0, 0),
        };
        let shift = self.n - offset - pn;
        let x = (p.x_mask() as usize) << shift;
        let z = (p.z_mask() as usize) << shift;
        let base = (x & z).count_ones() as usize;
        let (s, c) = theta.sin_cos();
        // P|j> = i^(base + 2 |z & j|) |j ^ x>
        let phase = |j: usize| -> C64 {
            match (base + 2 * (z & j).count_ones() as usize) % 4 {
                0 => C64::new(1.0, 0.0),
                1 => C64::new(0.0, 1.0),
                2 => C64::new(-1.0, 0.0),
                _ => C64::new(0.0, -1.0),
            }
        };
        let mis = C64::new(0.0, -s);
        if x == 0 {
            for (i, a) in self.amps.iter_mut().enumerate() {
                if i & cmask == cval {
                    *a *= c + mis * phase(i);
                }
            }
            return Ok(());
        }
        let low = x & x.wrapping_neg();
        for i in 0..self.amps.len() {
            if i & low != 0 || i & cmask != cval {
                continue;
            }
            let j = i ^ x;
            let (ai, aj) = (self.amps[i], self.amps[j]);
            self.amps[i] = c * ai + mis * phase(j) * aj;
            self.amps[j] = c * aj + mis * phase(i) * ai;
        }
        Ok(())
    }

    /// Probability that `qubit` reads `value`.
    pub fn probability(&self, qubit: usize, value: bool) -> Result<f64> {
        if qubit >= self.n {
            return Err(Error::QubitOutOfRange {
                index: qubit,
                qubits: self.n,
            });
        }
        let b = self.bit(qubit);
        Ok(self
            .amps
            .iter()
            .enumerate()
            .filter(|(i, _)| (i & b != 0) == value)
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    /// Project `register` onto `value`, returning the renormalized state on
    /// the remaining qubits (original order) and the selection probability.
    pub fn post_select(&self, register: &[usize], value: &[bool]) -> Result<(StateVector, f64)> {
        if register.len() != value.len() {
            return Err(Error::DimensionMismatch {
                expected: register.len(),
                got: value.len(),
            });
        }
        let mut mask = 0usize;
        let mut want = 0usize;
        for (&q, &v) in register.iter().zip(value) {
            if q >= self.n {
                return Err(Error::QubitOutOfRange {
                    index: q,
                    qubits: self.n,
                });
            }
            let b = self.bit(q);
            if mask & b != 0 {
                return Err(Error::OverlappingQubits(q));
            }
            mask |= b;
            if v {
                want |= b;
            }
        }
        let kept: Vec<usize> = (0..self.n).filter(|&q| mask & self.bit(q) == 0).collect();
        let m = kept.len();
        let mut out = vec![C64::new(0.0, 0.0); 1usize << m];
        let mut prob = 0.0;
        for (i, a) in self.amps.iter().enumerate() {
            if i & mask != want {
                continue;
            }
            prob += a.norm_sqr();
            let mut r = 0usize;
            for (k, &q) in kept.iter().enumerate() {
                if i & self.bit(q) != 0 {
                    r |= 1 << (m - 1 - k);
                }
            }
            out[r] = *a;
        }
        if prob < 1e-14 {
            return Err(Error::SelectionImpossible(prob));
        }
        let s = 1.0 / prob.sqrt();
        for a in &mut out {
            *a *= s;
        }
        Ok((StateVector { n: m, amps: out }, prob))
    }

    /// Length-prefixed little-endian dump: `u64` count, then `(re, im)` pairs.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.amps.len() as u64).to_le_bytes())?;
        for a in &self.amps {
            w.write_all(&a.re.to_le_bytes())?;
            w.write_all(&a.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut buf = [0u8; 8];
        r.read_exact(&mut buf)?;
        let len = u64::from_le_bytes(buf) as usize;
        if len == 0 || !len.is_power_of_two() || len > 1usize << MAX_SIM_QUBITS {
            return Err(Error::Parse(format!("bad statevector length {len}")));
        }
        let mut amps = Vec::with_capacity(len);
        for _ in 0..len {
            r.read_exact(&mut buf)?;
            let re = f64::from_le_bytes(buf);
            r.read_exact(&mut buf)?;
            let im = f64::from_le_bytes(buf);
            amps.push(C64::new(re, im));
        }
        Ok(Self {
            n: len.trailing_zeros() as usize,
            amps,
        })
    }
}
