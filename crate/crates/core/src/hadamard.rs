//! Hadamard-test estimation of `<psi|U|psi>` with simulated shot noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Control, Gate, RegisterLayout};
use crate::error::{Error, Result};
use crate::statevector::StateVector;

/// Counter-based randomness: estimate `k` of a run with seed `s` always
/// draws from ChaCha stream `k` of key `s`, whatever thread evaluates it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomStream {
    pub seed: u64,
    pub counter: u64,
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        Self { seed, counter: 0 }
    }

    pub fn at(seed: u64, counter: u64) -> Self {
        Self { seed, counter }
    }

    /// Generator for the current counter; advances the counter.
    pub fn next_rng(&mut self) -> ChaCha8Rng {
        let rng = Self::rng_for(self.seed, self.counter);
        self.counter += 1;
        rng
    }

    pub fn rng_for(seed: u64, counter: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(counter);
        rng
    }

    /// Number of `shots` Bernoulli draws with success probability `p`,
    /// consuming one counter.
    pub fn count_successes(&mut self, p: f64, shots: u64) -> u64 {
        let mut rng = self.next_rng();
        (0..shots).filter(|_| rng.random::<f64>() < p).count() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Part {
    Re,
    Im,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub estimate: f64,
    pub stderr: f64,
    /// Infinite-shot value `2 P(0) - 1` from the test-qubit bias.
    pub exact: f64,
}

/// Sample the test qubit: `P(0) = (1 + v) / 2`.
pub fn sample_bias(v: f64, shots: u64, rng: &mut RandomStream) -> Result<Estimate> {
    if shots < 1 {
        return Err(Error::InvalidArgument("shots must be at least 1".into()));
    }
    let p0 = ((1.0 + v) / 2.0).clamp(0.0, 1.0);
    let k = rng.count_successes(p0, shots);
    let est = 2.0 * k as f64 / shots as f64 - 1.0;
    Ok(Estimate {
        estimate: est,
        stderr: ((1.0 - est * est).max(0.0) / shots as f64).sqrt(),
        exact: v,
    })
}

/// Read `2 P(0) - 1` off the last qubit after the closing `H` (and the
/// `S^dagger` that turns the real part into the imaginary one).
pub fn test_qubit_bias(state: &StateVector, part: Part) -> Result<f64> {
    let t = state.qubit_count() - 1;
    let mut s = state.clone();
    if part == Part::Im {
        s.apply_gate(&Gate::rz(t, -std::f64::consts::FRAC_PI_2))?;
    }
    s.apply_gate(&Gate::h(t))?;
    Ok(2.0 * s.probability(t, false)? - 1.0)
}

/// Estimate `Re` or `Im` of `<psi|U|psi>` with `|psi> = state_prep |0>`.
/// The test qubit is appended after the work register.
pub fn hadamard_test(
    state_prep: &Circuit,
    u: &Circuit,
    part: Part,
    shots: u64,
    rng: &mut RandomStream,
) -> Result<Estimate> {
    if shots < 1 {
        return Err(Error::InvalidArgument("shots must be at least 1".into()));
    }
    let n = state_prep.qubit_count().max(u.qubit_count());
    let mut layout = RegisterLayout::new(0, n);
    layout.test = true;
    let mut s = StateVector::zero(n + 1)?;
    s.apply_circuit(state_prep)?;
    s.apply_gate(&Gate::h(n))?;
    let cu = u.widened(RegisterLayout::new(u.layout().ancilla, n - u.layout().ancilla))?;
    s.apply_circuit(&cu.controlled_by(Control::one(n), layout)?)?;
    let v = test_qubit_bias(&s, part)?;
    sample_bias(v, shots, rng)
}
