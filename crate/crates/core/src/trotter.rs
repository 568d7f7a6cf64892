//! Product-formula time evolution.
//!
//! Each layer of a layered [`PauliTermSum`] contains commuting strings, so its
//! exponential factors exactly into single-string rotations
//! `exp(-i c dt P)`. Layers are applied in their stored order (for the lattice
//! Hamiltonian: even hopping, odd hopping, mass, interaction). Order 2 uses
//! the symmetric splitting `L1(dt/2) .. L_{k-1}(dt/2) L_k(dt) L_{k-1}(dt/2) .. L1(dt/2)`.

use std::str::FromStr;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Control, Gate, RegisterLayout};
use crate::error::{Error, Result};
use crate::pauli::{Pauli, PauliString, PauliTermSum};
use crate::statevector::StateVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum TrotterOrder {
    #[serde(rename = "1")]
    First,
    #[default]
    #[serde(rename = "2")]
    Second,
}

impl TrotterOrder {
    pub fn from_int(k: u32) -> Result<Self> {
        match k {
            1 => Ok(Self::First),
            2 => Ok(Self::Second),
            _ => Err(Error::InvalidArgument(format!("Trotter order {k} not in {{1, 2}}"))),
        }
    }

    pub fn as_int(self) -> u32 {
        match self {
            Self::First => 1,
            Self::Second => 2,
        }
    }
}

impl FromStr for TrotterOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let k = s
            .trim()
            .parse::<u32>()
            .map_err(|_| Error::Parse(format!("bad Trotter order {s:?}")))?;
        Self::from_int(k)
    }
}

/// One rotation `exp(-i angle P)`; an identity string is a global phase.
#[derive(Debug, Clone, PartialEq)]
pub struct Rotation {
    pub string: PauliString,
    pub angle: f64,
}

/// The ordered rotations making up one product-formula step.
#[derive(Debug, Clone, PartialEq)]
pub struct TrotterStep {
    qubit_count: usize,
    dt: f64,
    order: TrotterOrder,
    rotations: Vec<Rotation>,
}

impl TrotterStep {
    pub fn new(h: &PauliTermSum, dt: f64, order: TrotterOrder) -> Result<Self> {
        if !dt.is_finite() {
            return Err(Error::InvalidArgument(format!("dt = {dt}")));
        }
        h.check_layers()?;
        let layers = h.layers().ok_or(Error::MissingLayers)?;
        for (c, _) in h.terms() {
            if c.im.abs() > 1e-12 {
                return Err(Error::NotHermitian(c.im.abs()));
            }
        }
        let layer_rotations = |k: usize, tau: f64| -> Vec<Rotation> {
            layers[k]
                .terms
                .iter()
                .map(|&t| {
                    let (c, p) = &h.terms()[t];
                    Rotation {
                        string: *p,
                        angle: c.re * tau,
                    }
                })
                .collect()
        };
        let nonempty: Vec<usize> = (0..layers.len())
            .filter(|&k| !layers[k].terms.is_empty())
            .collect();
        let mut rotations = Vec::new();
        match (order, nonempty.split_last()) {
            (_, None) => {}
            (TrotterOrder::First, _) => {
                for &k in &nonempty {
                    rotations.extend(layer_rotations(k, dt));
                }
            }
            (TrotterOrder::Second, Some((&last, rest))) => {
                for &k in rest {
                    rotations.extend(layer_rotations(k, dt / 2.0));
                }
                rotations.extend(layer_rotations(last, dt));
                for &k in rest.iter().rev() {
                    rotations.extend(layer_rotations(k, dt / 2.0));
                }
            }
        }
        Ok(Self {
            qubit_count: h.qubit_count(),
            dt,
            order,
            rotations,
        })
    }

    pub fn qubit_count(&self) -> usize {
        self.qubit_count
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn order(&self) -> TrotterOrder {
        self.order
    }

    pub fn rotations(&self) -> &[Rotation] {
        &self.rotations
    }

    /// Apply one step to qubits `offset..offset + n` of `state`.
    pub fn apply(&self, state: &mut StateVector, offset: usize, control: Option<Control>) -> Result<()> {
        for r in &self.rotations {
            state.apply_pauli_rotation(&r.string, offset, r.angle, control)?;
        }
        Ok(())
    }

    /// Gate-level circuit for this step on a work-only layout.
    pub fn to_circuit(&self) -> Result<Circuit> {
        let mut c = Circuit::new(RegisterLayout::new(0, self.qubit_count));
        for r in &self.rotations {
            push_pauli_rotation(&mut c, &r.string, r.angle)?;
        }
        Ok(c)
    }
}

/// Append `exp(-i theta P)`: basis change to `Z` on the support, a `CX`
/// parity ladder, `RZ(2 theta)` on the last support qubit, then undo.
/// `X` maps with `H`; `Y` with `RZ(-pi/2)` followed by `H`.
pub fn push_pauli_rotation(c: &mut Circuit, p: &PauliString, theta: f64) -> Result<()> {
    let support = p.support();
    if support.is_empty() {
        return c.push(Gate::gphase(-theta));
    }
    let half_pi = std::f64::consts::FRAC_PI_2;
    for &q in &support {
        match p.letter(q) {
            Pauli::X => c.push(Gate::h(q))?,
            Pauli::Y => {
                c.push(Gate::rz(q, -half_pi))?;
                c.push(Gate::h(q))?;
            }
            _ => {}
        }
    }
    for w in support.windows(2) {
        c.push(Gate::cx(w[0], w[1]))?;
    }
    c.push(Gate::rz(*support.last().unwrap(), 2.0 * theta))?;
    for w in support.windows(2).rev() {
        c.push(Gate::cx(w[0], w[1]))?;
    }
    for &q in support.iter().rev() {
        match p.letter(q) {
            Pauli::X => c.push(Gate::h(q))?,
            Pauli::Y => {
                c.push(Gate::h(q))?;
                c.push(Gate::rz(q, half_pi))?;
            }
            _ => {}
        }
    }
    Ok(())
}

/// One product-formula step as a gate circuit on a work-only layout.
pub fn trotter_step_circuit(h: &PauliTermSum, dt: f64, order: TrotterOrder) -> Result<Circuit> {
    TrotterStep::new(h, dt, order)?.to_circuit()
}

/// Apply `steps` product-formula steps to a full-register vector.
pub fn trotter_evolve(step: &TrotterStep, state: &[C64], steps: usize) -> Result<Vec<C64>> {
    let mut s = StateVector::from_amplitudes(state.to_vec())?;
    if s.qubit_count() != step.qubit_count() {
        return Err(Error::DimensionMismatch {
            expected: 1 << step.qubit_count(),
            got: state.len(),
        });
    }
    for _ in 0..steps {
        step.apply(&mut s, 0, None)?;
    }
    Ok(s.into_amplitudes())
}
