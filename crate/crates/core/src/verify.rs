//! Invariant suite: every check returns a named pass/fail record and the
//! suite serializes to a JSON report.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Control, Gate, RegisterLayout};
use crate::eigen::{self, dot, hermitian_norm, norm, systematic_bound};
use crate::error::Result;
use crate::hadamard::{hadamard_test, Part, RandomStream};
use crate::lattice::{build_thirring, total_number, ModelParams};
use crate::lcu::{run_and_select, success_probability, LcuCircuits, PrepConvention};
use crate::observables::{loschmidt_echo, offdiag_identity_check, EchoConfig, Method, Model};
use crate::pauli::{Pauli, PauliString, PauliTermSum};
use crate::statevector::StateVector;
use crate::trotter::TrotterOrder;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

impl CheckResult {
    fn at_most(name: &str, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed: value <= threshold,
            value,
            threshold,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub seed: u64,
    pub trials: usize,
    pub shots: u64,
    /// Fault injection: flip the sign of the leading retained amplitude
    /// before the truncation-bound check.
    pub corrupt_amplitudes: bool,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            seed: 2024,
            trials: 100,
            shots: 10_000,
            corrupt_amplitudes: false,
        }
    }
}

pub fn run_all(cfg: &VerifyConfig) -> Result<VerifyReport> {
    let checks = vec![
        check_unitarity(cfg.seed)?,
        check_hamiltonian()?,
        check_lcu_pipeline()?,
        check_offdiag_identity(cfg.seed, cfg.trials)?,
        check_truncation_bound(cfg.seed, cfg.trials, cfg.corrupt_amplitudes)?,
        check_admixture_bound()?,
        check_trotter_order()?,
        check_shot_coverage(cfg.seed, cfg.trials, cfg.shots)?,
        check_shot_variance(cfg.seed, cfg.trials, cfg.shots)?,
    ];
    Ok(VerifyReport {
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}

fn random_vector(dim: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
    let v: Vec<C64> = (0..dim)
        .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let n = norm(&v);
    v.into_iter().map(|a| a / n).collect()
}

/// Two random orthonormal vectors (Gram-Schmidt).
pub fn random_orthonormal_pair(dim: usize, rng: &mut ChaCha8Rng) -> (Vec<C64>, Vec<C64>) {
    let a = random_vector(dim, rng);
    let mut b = random_vector(dim, rng);
    let c = dot(&a, &b);
    for (bi, ai) in b.iter_mut().zip(&a) {
        *bi -= c * ai;
    }
    let n = norm(&b);
    (a, b.into_iter().map(|x| x / n).collect())
}

/// Random Hermitian operator: `terms` random strings with real weights.
pub fn random_hermitian_pauli(n: usize, terms: usize, rng: &mut ChaCha8Rng) -> PauliTermSum {
    let letters = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
    let mut op = PauliTermSum::zero(n);
    for _ in 0..terms {
        let l: Vec<(usize, Pauli)> = (0..n).map(|q| (q, letters[rng.random_range(0..4)])).collect();
        let p = PauliString::from_letters(n, &l).expect("valid letters");
        op.push(C64::new(rng.random_range(-1.0..1.0), 0.0), p);
    }
    op
}

fn random_circuit(n: usize, len: usize, rng: &mut ChaCha8Rng) -> Circuit {
    let mut c = Circuit::new(RegisterLayout::new(0, n));
    for _ in 0..len {
        let q = rng.random_range(0..n);
        let g = match rng.random_range(0..6) {
            0 => Gate::h(q),
            1 => Gate::ry(q, rng.random_range(-3.0..3.0)),
            2 => Gate::rz(q, rng.random_range(-3.0..3.0)),
            3 => Gate::x(q),
            _ => {
                let t = (q + 1 + rng.random_range(0..n - 1)) % n;
                Gate::mcx(vec![Control { qubit: q, on: rng.random() }], t)
            }
        };
        c.push(g).expect("valid gate");
    }
    c
}

/// Norm drift of random 50-gate circuits and exact inversion.
pub fn check_unitarity(seed: u64) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for n in [3usize, 6, 10, 15] {
        let c = random_circuit(n, 50, &mut rng);
        let psi = random_vector(1 << n, &mut rng);
        let start = StateVector::from_amplitudes(psi)?;
        let mut s = start.clone();
        s.apply_circuit(&c)?;
        worst = worst.max((s.norm() - 1.0).abs());
        s.apply_circuit(&c.inverse())?;
        worst = worst.max((1.0 - start.fidelity(&s)).abs());
    }
    Ok(CheckResult::at_most(
        "unitarity",
        worst,
        1e-12,
        "norm drift and inverse round trip of random 50-gate circuits",
    ))
}

/// Hermiticity and particle-number conservation of the lattice Hamiltonian.
pub fn check_hamiltonian() -> Result<CheckResult> {
    let mut worst: f64 = 0.0;
    for (n, m0, g) in [(4usize, 1.0, 0.1), (6, 0.6, 0.4), (8, 0.3, 0.8)] {
        let h = build_thirring(&ModelParams::new(n, m0, g)?)?;
        worst = worst.max(h.hermiticity_defect());
        let c = h.commutator(&total_number(n)?).simplified();
        worst = worst.max(c.max_coeff());
    }
    Ok(CheckResult::at_most(
        "hamiltonian",
        worst,
        1e-12,
        "hermiticity defect and |[H, N]| coefficients",
    ))
}

/// Deterministic loading fidelity and post-selection probabilities on the
/// four-site instance.
pub fn check_lcu_pipeline() -> Result<CheckResult> {
    let model = Model::new(ModelParams::new(4, 1.0, 0.1)?)?;
    let gs = model.ground()?;
    let t = eigen::truncate(&gs, &model.basis, 4)?;
    let target = StateVector::from_amplitudes(t.normalized_full_vector())?;
    let direct = LcuCircuits::new(&t, PrepConvention::Direct)?;
    let (work, _) = run_and_select(&direct.deterministic()?)?;
    let mut worst = 1.0 - work.fidelity(&target);
    for conv in [PrepConvention::Direct, PrepConvention::Sqrt] {
        let lcu = LcuCircuits::new(&t, conv)?;
        let (_, p) = run_and_select(&lcu.block_encoding()?)?;
        worst = worst.max((p - success_probability(&lcu.spec)?).abs());
    }
    Ok(CheckResult::at_most(
        "lcu_pipeline",
        worst,
        1e-10,
        "1 - fidelity of Prep/Select/uncompute and post-selection vs formula",
    ))
}

/// Off-diagonal elements from two diagonal expectations, on random
/// Hermitian operators and orthonormal pairs.
pub fn check_offdiag_identity(seed: u64, trials: usize) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0ff);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let n = rng.random_range(1..=5);
        let o = random_hermitian_pauli(n, 6, &mut rng);
        let (a, b) = random_orthonormal_pair(1 << n, &mut rng);
        worst = worst.max(offdiag_identity_check(&o, &a, &b)?.residual);
    }
    Ok(CheckResult::at_most(
        "offdiag_identity",
        worst,
        1e-12,
        format!("max residual over {trials} random operator/pair trials"),
    ))
}

fn random_hermitian_dense(dim: usize, rng: &mut ChaCha8Rng) -> DMatrix<C64> {
    let a = DMatrix::from_fn(dim, dim, |_, _| {
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    (&a + a.adjoint()) * C64::new(0.5, 0.0)
}

fn expectation(o: &DMatrix<C64>, v: &[C64]) -> C64 {
    let x = DVector::from_column_slice(v);
    (x.adjoint() * o * &x)[(0, 0)]
}

/// `|<Psi|O|Psi> - alpha^2 <phi|O|phi>| <= (eps^2 + 2 eps alpha) ||O||_2` for
/// random truncations, random Hermitian `O` and the projector on `Psi`.
/// Returns the largest ratio of deviation to bound.
pub fn check_truncation_bound(seed: u64, trials: usize, corrupt: bool) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xb0);
    let mut worst: f64 = 0.0;
    let mut violations = 0;
    for _ in 0..trials {
        let n = [2usize, 4, 6][rng.random_range(0..3)];
        let params = ModelParams::new(n, rng.random_range(0.1..2.0), rng.random_range(0.0..1.0))?;
        let model = Model::new(params)?;
        let gs = model.ground()?;
        let m = rng.random_range(1..=model.basis.dim());
        let t = eigen::truncate(&gs, &model.basis, m)?;
        let (alpha, eps) = (t.overlap(), t.defect());
        let mut phi = t.normalized_vector(&model.basis)?;
        if corrupt {
            let lead = model
                .basis
                .index_of(&t.entries()[0].bitstring)
                .expect("retained bitstring in sector");
            phi[lead] = -phi[lead];
        }
        let psi = &gs.amplitudes;
        let dim = psi.len();
        let x = DVector::from_column_slice(psi);
        let ops = [random_hermitian_dense(dim, &mut rng), &x * x.adjoint()];
        for o in &ops {
            let bound = systematic_bound(eps, alpha, hermitian_norm(o))?;
            let dev = (expectation(o, psi) - alpha * alpha * expectation(o, &phi)).norm();
            let tol = 1e-12 * (1.0 + bound);
            if dev > bound + tol {
                violations += 1;
            }
            if bound > 0.0 {
                worst = worst.max(dev / bound);
            } else if dev > tol {
                worst = f64::INFINITY;
            }
        }
    }
    Ok(CheckResult {
        name: "truncation_bound".into(),
        passed: violations == 0,
        value: worst,
        threshold: 1.0,
        detail: format!(
            "{violations} violations in {} operator checks over {trials} instances; value is max deviation/bound",
            2 * trials
        ),
    })
}

/// The projector-built excited state keeps a ground admixture no larger
/// than `sqrt(1 - |<g'|gs>|^2)`.
pub fn check_admixture_bound() -> Result<CheckResult> {
    let model = Model::new(ModelParams::new(8, 1.0, 0.4)?)?;
    let gs = model.ground()?;
    let mut worst: f64 = f64::NEG_INFINITY;
    for m in [1usize, 3, 6, 10, 20, 70] {
        let t = eigen::truncate(&gs, &model.basis, m)?;
        let approx = t.normalized_vector(&model.basis)?;
        let ex = eigen::excited_from_approximate_ground(&model.matrix, &approx)?;
        let admix = dot(&ex.amplitudes, &gs.amplitudes).norm();
        let bound = (1.0 - dot(&approx, &gs.amplitudes).norm_sqr()).max(0.0).sqrt();
        worst = worst.max(admix - bound);
    }
    Ok(CheckResult::at_most(
        "admixture_bound",
        worst,
        1e-10,
        "max of |<e'|gs>| - sqrt(1 - |<g'|gs>|^2) over truncated projectors",
    ))
}

/// Max echo error over `t <= t_max` of the order-2 product formula against
/// exact evolution, for one `dt`.
pub fn trotter_echo_error(model: &Model, state: &[C64], dt: f64, t_max: f64) -> Result<f64> {
    let steps = (t_max / dt).round() as usize;
    let base = EchoConfig {
        dt,
        steps,
        method: Method::Exact,
        order: TrotterOrder::Second,
        ..EchoConfig::default()
    };
    let ex = loschmidt_echo(model, state, &base)?;
    let tr = loschmidt_echo(
        model,
        state,
        &EchoConfig {
            method: Method::Trotter,
            ..base
        },
    )?;
    Ok(ex
        .values
        .iter()
        .zip(&tr.values)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max))
}

/// Error ratio when `dt` halves from 0.1 to 0.05 over `t <= 5` on four sites.
pub fn check_trotter_order() -> Result<CheckResult> {
    let model = Model::new(ModelParams::new(4, 1.0, 0.1)?)?;
    let gs = model.ground()?;
    let e1 = trotter_echo_error(&model, &gs.amplitudes, 0.1, 5.0)?;
    let e2 = trotter_echo_error(&model, &gs.amplitudes, 0.05, 5.0)?;
    let ratio = e1 / e2;
    Ok(CheckResult {
        name: "trotter_order".into(),
        passed: (3.3..=4.7).contains(&ratio),
        value: ratio,
        threshold: 4.0,
        detail: format!("echo error {e1:.3e} at dt=0.1, {e2:.3e} at dt=0.05; accepted ratio range [3.3, 4.7]"),
    })
}

/// One random Hadamard-test instance per `(seed, slot)`.
fn shot_instance(seed: u64, slot: u64) -> (Circuit, Circuit) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9).wrapping_add(slot));
    (random_circuit(3, 20, &mut rng), random_circuit(3, 20, &mut rng))
}

/// Fraction of seeds whose real-part estimate lies within three standard
/// errors of the exact value.
pub fn check_shot_coverage(base_seed: u64, seeds: usize, shots: u64) -> Result<CheckResult> {
    let mut inside = 0;
    for s in 0..seeds as u64 {
        let (prep, u) = shot_instance(base_seed + s, 0);
        let e = hadamard_test(&prep, &u, Part::Re, shots, &mut RandomStream::at(base_seed + s, 0))?;
        if (e.estimate - e.exact).abs() <= 3.0 * e.stderr {
            inside += 1;
        }
    }
    let needed = (0.99 * seeds as f64).ceil() as usize;
    Ok(CheckResult {
        name: "shot_coverage".into(),
        passed: inside >= needed,
        value: inside as f64,
        threshold: needed as f64,
        detail: format!("{inside} of {seeds} seeds within 3 stderr at {shots} shots"),
    })
}

/// Pooled variance calibration: mean of `(estimate - exact)^2 / ((1 - v^2)/shots)`
/// over seeds and four estimates per seed (real and imaginary parts of two
/// instances) must lie within 20% of one.
pub fn check_shot_variance(base_seed: u64, seeds: usize, shots: u64) -> Result<CheckResult> {
    let mut acc = 0.0;
    let mut count = 0usize;
    for s in 0..seeds as u64 {
        let mut rng = RandomStream::at(base_seed + s, 1000);
        for slot in 1..=2 {
            let (prep, u) = shot_instance(base_seed + s, slot);
            for part in [Part::Re, Part::Im] {
                let e = hadamard_test(&prep, &u, part, shots, &mut rng)?;
                let var = (1.0 - e.exact * e.exact) / shots as f64;
                if var > 0.0 {
                    acc += (e.estimate - e.exact).powi(2) / var;
                    count += 1;
                }
            }
        }
    }
    let ratio = acc / count.max(1) as f64;
    Ok(CheckResult {
        name: "shot_variance".into(),
        passed: (ratio - 1.0).abs() <= 0.2,
        value: ratio,
        threshold: 0.2,
        detail: format!("empirical/predicted variance over {count} estimates; accepted within 20% of 1"),
    })
}
