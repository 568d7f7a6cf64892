//! Time-dependent observables: Loschmidt echoes and their spectra,
//! truncation error metrics, minimal-`M` sweeps and current correlators.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::circuit::Control;
use crate::eigen::{self, dot, norm, EigenPair, SolverConfig, TruncatedState};
use crate::error::{Error, Result};
use crate::evolve::Propagator;
use crate::hadamard::{sample_bias, test_qubit_bias, Part, RandomStream};
use crate::lattice::{build_current, build_thirring, to_sector_sparse, ModelParams, SectorBasis, SparseMatrix};
use crate::pauli::PauliTermSum;
use crate::statevector::StateVector;
use crate::trotter::{TrotterOrder, TrotterStep};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    Exact,
    Trotter,
    #[serde(alias = "shots")]
    HadamardShots,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Self::Exact),
            "trotter" => Ok(Self::Trotter),
            "hadamard-shots" | "shots" => Ok(Self::HadamardShots),
            _ => Err(Error::Parse(format!("unknown method {s:?}"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Exact => "exact",
            Self::Trotter => "trotter",
            Self::HadamardShots => "hadamard-shots",
        })
    }
}

/// Samples `v_n` of an observable at `t = n dt`, `n = 0..=N_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub dt: f64,
    pub values: Vec<C64>,
    /// `(stderr_re, stderr_im)` per sample for shot estimates.
    pub stderr: Option<Vec<(f64, f64)>>,
    pub label: String,
    pub method: Method,
}

impl TimeSeries {
    pub fn new(dt: f64, values: Vec<C64>, label: impl Into<String>, method: Method) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt = {dt} must be positive")));
        }
        Ok(Self {
            dt,
            values,
            stderr: None,
            label: label.into(),
            method,
        })
    }

    /// Number of steps `N_t`.
    pub fn steps(&self) -> usize {
        self.values.len().saturating_sub(1)
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |n| n as f64 * self.dt)
    }

    /// `|v_n| <= 1 + 5 stderr_n`, the bound an echo must satisfy.
    pub fn echo_bound_violation(&self) -> Option<usize> {
        self.values.iter().enumerate().position(|(n, v)| {
            let s = self
                .stderr
                .as_ref()
                .map(|e| e[n].0.hypot(e[n].1))
                .unwrap_or(0.0);
            v.norm() > 1.0 + 5.0 * s + 1e-12
        })
    }
}

/// The lattice Hamiltonian on one particle-number sector together with its
/// exact propagator.
#[derive(Debug, Clone)]
pub struct Model {
    pub params: ModelParams,
    pub basis: SectorBasis,
    pub hamiltonian: PauliTermSum,
    pub matrix: SparseMatrix,
    pub propagator: Propagator,
    pub solver: SolverConfig,
}

impl Model {
    pub fn new(params: ModelParams) -> Result<Self> {
        Self::with_sector(params, params.half_filling(), SolverConfig::default())
    }

    pub fn with_sector(params: ModelParams, particles: usize, solver: SolverConfig) -> Result<Self> {
        params.validate()?;
        let basis = SectorBasis::new(params.sites, particles)?;
        let hamiltonian = build_thirring(&params)?;
        let matrix = to_sector_sparse(&hamiltonian, &basis)?;
        let propagator = Propagator::with_config(&matrix, &solver)?;
        Ok(Self {
            params,
            basis,
            hamiltonian,
            matrix,
            propagator,
            solver,
        })
    }

    pub fn ground(&self) -> Result<EigenPair> {
        eigen::ground_state_with(&self.matrix, &self.basis, &self.solver)
    }

    pub fn excited(&self, ground: &EigenPair) -> Result<EigenPair> {
        eigen::excited_state_with(&self.matrix, ground, &self.solver)
    }

    /// Current `J^mu(x)` restricted to the sector.
    pub fn current(&self, mu: usize, x: usize) -> Result<SparseMatrix> {
        to_sector_sparse(&build_current(mu, x, &self.params)?, &self.basis)
    }

    fn check_state(&self, state: &[C64]) -> Result<()> {
        if state.len() != self.basis.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.basis.dim(),
                got: state.len(),
            });
        }
        let n = norm(state);
        if (n - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidArgument(format!("state norm {n} is not 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EchoConfig {
    pub dt: f64,
    pub steps: usize,
    pub method: Method,
    pub order: TrotterOrder,
    pub shots: u64,
    pub seed: u64,
}

impl Default for EchoConfig {
    fn default() -> Self {
        Self {
            dt: 0.1,
            steps: 512,
            method: Method::Exact,
            order: TrotterOrder::Second,
            shots: 10_000,
            seed: 0,
        }
    }
}

/// `R(n dt) = <Psi| exp(-i n dt H) |Psi>` for a normalized sector vector.
///
/// The shot method runs the Hadamard test with a controlled product-formula
/// step: the register `(|0>|Psi> + |1> U^n |Psi>) / sqrt 2` is advanced one
/// controlled step at a time and the test qubit is read for every `n`.
/// Estimate `k` draws from counter `k` of the seed (`2n` for the real part,
/// `2n + 1` for the imaginary part).
pub fn loschmidt_echo(model: &Model, state: &[C64], cfg: &EchoConfig) -> Result<TimeSeries> {
    model.check_state(state)?;
    if !(cfg.dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt = {} must be positive", cfg.dt)));
    }
    match cfg.method {
        Method::Exact => {
            let v = model.propagator.return_amplitudes(state, cfg.dt, cfg.steps)?;
            TimeSeries::new(cfg.dt, v, "loschmidt_echo", Method::Exact)
        }
        Method::Trotter => {
            let step = TrotterStep::new(&model.hamiltonian, cfg.dt, cfg.order)?;
            let full = model.basis.embed(state)?;
            let psi0 = StateVector::from_amplitudes(full)?;
            let mut s = psi0.clone();
            let mut v = vec![C64::new(1.0, 0.0)];
            for _ in 0..cfg.steps {
                step.apply(&mut s, 0, None)?;
                v.push(psi0.inner(&s));
            }
            TimeSeries::new(cfg.dt, v, "loschmidt_echo", Method::Trotter)
        }
        Method::HadamardShots => {
            if cfg.shots < 1 {
                return Err(Error::InvalidArgument("shots must be at least 1".into()));
            }
            let step = TrotterStep::new(&model.hamiltonian, cfg.dt, cfg.order)?;
            let full = model.basis.embed(state)?;
            let n = model.params.sites;
            let h = std::f64::consts::FRAC_1_SQRT_2;
            let mut amps = vec![C64::new(0.0, 0.0); full.len() * 2];
            for (b, a) in full.iter().enumerate() {
                amps[2 * b] = a * h;
                amps[2 * b + 1] = a * h;
            }
            let mut reg = StateVector::from_amplitudes(amps)?;
            let mut biases = Vec::with_capacity(cfg.steps + 1);
            for k in 0..=cfg.steps {
                if k > 0 {
                    step.apply(&mut reg, 0, Some(Control::one(n)))?;
                }
                biases.push((test_qubit_bias(&reg, Part::Re)?, test_qubit_bias(&reg, Part::Im)?));
            }
            let est: Vec<(f64, f64, f64, f64)> = biases
                .par_iter()
                .enumerate()
                .map(|(k, (re, im))| {
                    let k = k as u64;
                    let r = sample_bias(*re, cfg.shots, &mut RandomStream::at(cfg.seed, 2 * k))?;
                    let i = sample_bias(*im, cfg.shots, &mut RandomStream::at(cfg.seed, 2 * k + 1))?;
                    Ok((r.estimate, i.estimate, r.stderr, i.stderr))
                })
                .collect::<Result<_>>()?;
            let mut ts = TimeSeries::new(
                cfg.dt,
                est.iter().map(|e| C64::new(e.0, e.1)).collect(),
                "loschmidt_echo",
                Method::HadamardShots,
            )?;
            ts.stderr = Some(est.iter().map(|e| (e.2, e.3)).collect());
            Ok(ts)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[default]
    None,
    Hann,
}

impl std::str::FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "hann" => Ok(Self::Hann),
            _ => Err(Error::Parse(format!("unknown window {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    /// Ascending, covering `[-pi/dt, pi/dt)`.
    pub frequencies: Vec<f64>,
    pub magnitudes: Vec<f64>,
    /// `2 pi / (N_t dt)`.
    pub resolution: f64,
}

impl SpectrumResult {
    /// `(frequency, magnitude)` of the largest bin.
    pub fn dominant_peak(&self) -> (f64, f64) {
        let (i, m) = self
            .magnitudes
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |acc, (i, &m)| if m > acc.1 { (i, m) } else { acc });
        (self.frequencies[i], m)
    }

    /// Magnitude of the bin nearest `freq`.
    pub fn magnitude_at(&self, freq: f64) -> f64 {
        let i = self
            .frequencies
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - freq).abs().total_cmp(&(b.1 - freq).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        self.magnitudes[i]
    }
}

/// DFT of the first `N_t` samples, `S(w) = (1/N_t) |sum_n w_n v_n e^{i w n dt}|`
/// on `w_k = 2 pi k / (N_t dt)`. The sign convention puts the peak of
/// `exp(-i E t)` at `w = E`.
pub fn fourier_spectrum(series: &TimeSeries, window: Window) -> Result<SpectrumResult> {
    let n = series.steps();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need N_t >= 2, got {n}")));
    }
    let mut buf: Vec<C64> = series.values[..n]
        .iter()
        .enumerate()
        .map(|(k, v)| match window {
            Window::None => *v,
            Window::Hann => v * (0.5 - 0.5 * (2.0 * PI * k as f64 / n as f64).cos()),
        })
        .collect();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let resolution = 2.0 * PI / (n as f64 * series.dt);
    let half = n / 2;
    let mut frequencies = Vec::with_capacity(n);
    let mut magnitudes = Vec::with_capacity(n);
    for j in 0..n {
        let k = j as i64 - half as i64;
        let idx = k.rem_euclid(n as i64) as usize;
        frequencies.push(k as f64 * resolution);
        magnitudes.push(buf[idx].norm() / n as f64);
    }
    Ok(SpectrumResult {
        frequencies,
        magnitudes,
        resolution,
    })
}

fn check_pair(exact: &TimeSeries, approx: &TimeSeries) -> Result<()> {
    if exact.values.len() != approx.values.len() {
        return Err(Error::DimensionMismatch {
            expected: exact.values.len(),
            got: approx.values.len(),
        });
    }
    if (exact.dt - approx.dt).abs() > 1e-12 * exact.dt.abs().max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "time steps differ: {} vs {}",
            exact.dt, approx.dt
        )));
    }
    if exact.steps() < 1 {
        return Err(Error::InvalidArgument("series need at least one step".into()));
    }
    Ok(())
}

/// `(1/N_t) sum_{n=1}^{N_t} |Re(exact_n - approx_n)|`.
pub fn integrated_error(exact: &TimeSeries, approx: &TimeSeries) -> Result<f64> {
    check_pair(exact, approx)?;
    let n = exact.steps();
    Ok(exact.values[1..]
        .iter()
        .zip(&approx.values[1..])
        .map(|(a, b)| (a - b).re.abs())
        .sum::<f64>()
        / n as f64)
}

/// Running mean of the complex-modulus deviation:
/// entry `k - 1` is `(1/k) sum_{n=1}^{k} |exact_n - approx_n|`.
pub fn cumulative_error(exact: &TimeSeries, approx: &TimeSeries) -> Result<Vec<f64>> {
    check_pair(exact, approx)?;
    let mut acc = 0.0;
    Ok(exact.values[1..]
        .iter()
        .zip(&approx.values[1..])
        .enumerate()
        .map(|(k, (a, b))| {
            acc += (a - b).norm();
            acc / (k + 1) as f64
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    pub integrated_error: f64,
    pub cumulative_error: Vec<f64>,
}

impl ErrorMetrics {
    pub fn compute(exact: &TimeSeries, approx: &TimeSeries) -> Result<Self> {
        Ok(Self {
            integrated_error: integrated_error(exact, approx)?,
            cumulative_error: cumulative_error(exact, approx)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub coupling: f64,
    pub bare_mass: f64,
    /// `None` when no grid value met the target.
    pub m_min: Option<usize>,
    /// Error at `m_min`, or at the largest grid value when not found.
    pub epsilon_achieved: f64,
    pub curve: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub epsilon_target: f64,
    pub m_grid: Vec<usize>,
    pub dt: f64,
    pub steps: usize,
    pub entries: Vec<SweepEntry>,
}

/// Integrated echo error of the `M`-truncated `state` against the full
/// state, both evolved exactly, for every `M` in `grid`.
pub fn error_curve(model: &Model, state: &[C64], grid: &[usize], dt: f64, steps: usize) -> Result<Vec<(usize, f64)>> {
    let reference = echo_exact(model, state, dt, steps)?;
    grid.iter()
        .map(|&m| {
            let t = eigen::truncate_vector(state, &model.basis, m)?;
            let approx = echo_exact(model, &t.normalized_vector(&model.basis)?, dt, steps)?;
            Ok((m, integrated_error(&reference, &approx)?))
        })
        .collect()
}

fn echo_exact(model: &Model, state: &[C64], dt: f64, steps: usize) -> Result<TimeSeries> {
    let cfg = EchoConfig {
        dt,
        steps,
        method: Method::Exact,
        ..EchoConfig::default()
    };
    loschmidt_echo(model, state, &cfg)
}

fn check_grid(grid: &[usize]) -> Result<()> {
    if grid.is_empty() || grid.contains(&0) || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(format!(
            "M grid must be non-empty, positive and ascending: {grid:?}"
        )));
    }
    Ok(())
}

/// Smallest grid `M` whose truncated-state echo has integrated error below
/// `epsilon_target` relative to the full state.
pub fn min_states_for_error(
    model: &Model,
    state: &[C64],
    epsilon_target: f64,
    grid: &[usize],
    dt: f64,
    steps: usize,
) -> Result<SweepEntry> {
    check_grid(grid)?;
    let reference = echo_exact(model, state, dt, steps)?;
    let mut curve = Vec::new();
    let mut found = None;
    for &m in grid {
        let t = eigen::truncate_vector(state, &model.basis, m)?;
        let approx = echo_exact(model, &t.normalized_vector(&model.basis)?, dt, steps)?;
        let e = integrated_error(&reference, &approx)?;
        curve.push((m, e));
        if e < epsilon_target {
            found = Some(m);
            break;
        }
    }
    Ok(SweepEntry {
        coupling: model.params.coupling,
        bare_mass: model.params.bare_mass,
        m_min: found,
        epsilon_achieved: curve.last().map(|c| c.1).unwrap_or(f64::NAN),
        curve,
    })
}

/// Which eigenstate a sweep targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    #[default]
    Ground,
    Excited,
}

/// Minimal-`M` sweep over `(g, m0)` points, evaluated in parallel and
/// reported in input order.
pub fn sweep(
    sites: usize,
    points: &[(f64, f64)],
    target: Target,
    epsilon_target: f64,
    grid: &[usize],
    dt: f64,
    steps: usize,
) -> Result<SweepResult> {
    check_grid(grid)?;
    let entries = points
        .par_iter()
        .map(|&(g, m0)| {
            let model = Model::new(ModelParams::new(sites, m0, g)?)?;
            let gs = model.ground()?;
            let state = match target {
                Target::Ground => gs,
                Target::Excited => model.excited(&gs)?,
            };
            min_states_for_error(&model, &state.amplitudes, epsilon_target, grid, dt, steps)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        epsilon_target,
        m_grid: grid.to_vec(),
        dt,
        steps,
        entries,
    })
}

/// Least-squares fit of `M = a x + b` with `x = log(1/g) log(1/m) / (m g)`.
/// `None` when fewer than two found points have distinct `x` (for example
/// at `m = 1`, where `log(1/m) = 0`).
pub fn fit_scaling_law(entries: &[SweepEntry]) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = entries
        .iter()
        .filter_map(|e| {
            let (g, m) = (e.coupling, e.bare_mass);
            let x = (1.0 / g).ln() * (1.0 / m).ln() / (m * g);
            e.m_min.filter(|_| x.is_finite()).map(|mm| (x, mm as f64))
        })
        .collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return None;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx < 1e-12 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let a = sxy / sxx;
    Some((a, my - a * mx))
}

/// `C^{mu nu}(x, t) = <Psi| e^{iHt} J^mu(x) e^{-iHt} J^nu(0) |Psi>`, evaluated as
/// `<phi_2| J^mu(x) |phi_1>` with `phi_1 = e^{-iHt} J^nu(0) Psi` and
/// `phi_2 = e^{-iHt} Psi`, using exact or product-formula evolution.
#[allow(clippy::too_many_arguments)]
pub fn two_point_correlator(
    model: &Model,
    state: &[C64],
    mu: usize,
    nu: usize,
    x: usize,
    dt: f64,
    steps: usize,
    method: Method,
    order: TrotterOrder,
) -> Result<TimeSeries> {
    model.check_state(state)?;
    let jx = model.current(mu, x)?;
    let j0 = model.current(nu, 0)?;
    let label = format!("C{mu}{nu}(x={x})");
    let phi1_0 = j0.matvec(state);
    match method {
        Method::Exact => {
            let p1 = model.propagator.trajectory(&phi1_0, dt, steps)?;
            let p2 = model.propagator.trajectory(state, dt, steps)?;
            let v = p1.iter().zip(&p2).map(|(a, b)| jx.expectation(b, a)).collect();
            TimeSeries::new(dt, v, label, Method::Exact)
        }
        Method::Trotter => {
            let step = TrotterStep::new(&model.hamiltonian, dt, order)?;
            let scale = norm(&phi1_0);
            let mut v = vec![jx.expectation(state, &phi1_0)];
            if scale == 0.0 {
                v.resize(steps + 1, C64::new(0.0, 0.0));
                return TimeSeries::new(dt, v, label, Method::Trotter);
            }
            let mut s1 = StateVector::from_amplitudes(model.basis.embed(&phi1_0)?)?;
            let mut s2 = StateVector::from_amplitudes(model.basis.embed(state)?)?;
            for _ in 0..steps {
                step.apply(&mut s1, 0, None)?;
                step.apply(&mut s2, 0, None)?;
                let a = model.basis.restrict(s1.amplitudes())?;
                let b = model.basis.restrict(s2.amplitudes())?;
                v.push(jx.expectation(&b, &a) * scale);
            }
            TimeSeries::new(dt, v, label, Method::Trotter)
        }
        Method::HadamardShots => Err(Error::InvalidArgument(
            "correlators support the exact and trotter methods".into(),
        )),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffDiagCheck {
    /// `<u|O|u> - <v|O|v>` with `u, v = (psi_m +- psi_n) / sqrt 2`.
    pub lhs: C64,
    /// `<psi_m|O|psi_n> + <psi_n|O|psi_m>`.
    pub rhs: C64,
    pub residual: f64,
}

/// Check that off-diagonal elements follow from two diagonal expectations.
pub fn offdiag_identity_check(o: &PauliTermSum, psi_m: &[C64], psi_n: &[C64]) -> Result<OffDiagCheck> {
    let dim = 1usize << o.qubit_count();
    for v in [psi_m, psi_n] {
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: v.len(),
            });
        }
        if (norm(v) - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidArgument("states must be normalized".into()));
        }
    }
    let ov = dot(psi_m, psi_n).norm();
    if ov > 1e-10 {
        return Err(Error::NotOrthogonal(ov));
    }
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let u: Vec<C64> = psi_m.iter().zip(psi_n).map(|(a, b)| (a + b) * h).collect();
    let v: Vec<C64> = psi_m.iter().zip(psi_n).map(|(a, b)| (a - b) * h).collect();
    let lhs = o.matrix_element(&u, &u)? - o.matrix_element(&v, &v)?;
    let rhs = o.matrix_element(psi_m, psi_n)? + o.matrix_element(psi_n, psi_m)?;
    Ok(OffDiagCheck {
        lhs,
        rhs,
        residual: (lhs - rhs).norm(),
    })
}

/// Echo of a truncated state, evolved exactly on the model sector.
pub fn truncated_echo(model: &Model, state: &TruncatedState, cfg: &EchoConfig) -> Result<TimeSeries> {
    loschmidt_echo(model, &state.normalized_vector(&model.basis)?, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::PauliString;

    fn series(v: Vec<C64>) -> TimeSeries {
        TimeSeries::new(0.1, v, "t", Method::Exact).unwrap()
    }

    #[test]
    fn pure_tone_peak() {
        let e = 1.0;
        let v = (0..=512).map(|n| C64::from_polar(1.0, -e * n as f64 * 0.1)).collect();
        let s = fourier_spectrum(&series(v), Window::None).unwrap();
        let (f, _) = s.dominant_peak();
        assert!((f - e).abs() <= s.resolution);
        assert!((s.frequencies[0] + PI / 0.1).abs() < 1e-12);
        assert!(*s.frequencies.last().unwrap() < PI / 0.1);
        let h = fourier_spectrum(&series(s.frequencies.iter().map(|_| C64::new(1.0, 0.0)).collect()), Window::Hann).unwrap();
        assert!(h.magnitudes.iter().all(|m| *m >= 0.0));
    }

    #[test]
    fn two_tone_ratio_on_bins() {
        let (n, dt) = (512usize, 0.1);
        let res = 2.0 * PI / (n as f64 * dt);
        let (e1, e2) = (10.0 * res, -23.0 * res);
        let (p1, p2) = (0.7, 0.3);
        let v: Vec<C64> = (0..=n)
            .map(|k| {
                let t = k as f64 * dt;
                C64::from_polar(p1, -e1 * t) + C64::from_polar(p2, -e2 * t)
            })
            .collect();
        let s = fourier_spectrum(&series(v), Window::None).unwrap();
        let r = s.magnitude_at(e1) / s.magnitude_at(e2);
        assert!((r / (p1 / p2) - 1.0).abs() < 0.05);
    }

    #[test]
    fn error_metrics_basics() {
        let a = series((0..10).map(|k| C64::new(k as f64, 0.3)).collect());
        assert_eq!(integrated_error(&a, &a).unwrap(), 0.0);
        assert!(cumulative_error(&a, &a).unwrap().iter().all(|x| *x == 0.0));
        let b = series(a.values.iter().map(|v| v + 0.25).collect());
        assert!((integrated_error(&a, &b).unwrap() - 0.25).abs() < 1e-15);
        let c = series(a.values.iter().map(|v| v + C64::from_polar(0.4, 1.1)).collect());
        for x in cumulative_error(&a, &c).unwrap() {
            assert!((x - 0.4).abs() < 1e-14);
        }
        let short = series(a.values[..5].to_vec());
        assert!(integrated_error(&a, &short).is_err());
    }

    #[test]
    fn monotone_gap_gives_monotone_running_mean() {
        let a = series(vec![C64::new(0.0, 0.0); 20]);
        let b = series((0..20).map(|k| C64::new(0.0, k as f64 * 0.1)).collect());
        let c = cumulative_error(&a, &b).unwrap();
        assert!(c.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn offdiag_pauli_x_example() {
        let x = PauliTermSum::from_terms(1, vec![(C64::new(1.0, 0.0), "X".parse::<PauliString>().unwrap())]).unwrap();
        let zero = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        let one = [C64::new(0.0, 0.0), C64::new(1.0, 0.0)];
        let r = offdiag_identity_check(&x, &zero, &one).unwrap();
        assert!((r.lhs - C64::new(2.0, 0.0)).norm() < 1e-15);
        assert!((r.rhs - C64::new(2.0, 0.0)).norm() < 1e-15);
        assert!(matches!(
            offdiag_identity_check(&x, &zero, &zero),
            Err(Error::NotOrthogonal(_))
        ));
    }

    #[test]
    fn offdiag_diagonal_operator_vanishes() {
        let z = PauliTermSum::from_terms(2, vec![(C64::new(0.7, 0.0), "ZZ".parse::<PauliString>().unwrap())]).unwrap();
        let mut a = vec![C64::new(0.0, 0.0); 4];
        let mut b = a.clone();
        a[1] = C64::new(1.0, 0.0);
        b[2] = C64::new(1.0, 0.0);
        let r = offdiag_identity_check(&z, &a, &b).unwrap();
        assert!(r.lhs.norm() < 1e-15 && r.rhs.norm() < 1e-15);
    }

    #[test]
    fn echo_methods_agree_and_start_at_one() {
        let model = Model::new(ModelParams::new(4, 1.0, 0.1).unwrap()).unwrap();
        let gs = model.ground().unwrap();
        let cfg = EchoConfig {
            steps: 20,
            ..EchoConfig::default()
        };
        let ex = loschmidt_echo(&model, &gs.amplitudes, &cfg).unwrap();
        assert_eq!(ex.values[0], C64::new(1.0, 0.0));
        for (n, v) in ex.values.iter().enumerate() {
            let want = C64::from_polar(1.0, -gs.energy * n as f64 * 0.1);
            assert!((v - want).norm() < 1e-10);
        }
        let tr = loschmidt_echo(&model, &gs.amplitudes, &EchoConfig { method: Method::Trotter, ..cfg }).unwrap();
        assert!(integrated_error(&ex, &tr).unwrap() < 1e-2);
        let sh = loschmidt_echo(
            &model,
            &gs.amplitudes,
            &EchoConfig {
                method: Method::HadamardShots,
                shots: 2000,
                seed: 3,
                ..cfg
            },
        )
        .unwrap();
        assert!(sh.echo_bound_violation().is_none());
        let se = sh.stderr.as_ref().unwrap();
        assert!((sh.values[0].re - 1.0).abs() <= 3.0 * se[0].0 + 1e-12);
        for (n, (a, b)) in sh.values.iter().zip(&tr.values).enumerate() {
            assert!((a.re - b.re).abs() < 6.0 * se[n].0 + 0.05);
        }
    }

    #[test]
    fn min_states_trivial_cases() {
        let model = Model::new(ModelParams::new(6, 1.0, 0.4).unwrap()).unwrap();
        let gs = model.ground().unwrap();
        let e = min_states_for_error(&model, &gs.amplitudes, f64::INFINITY, &[3, 5], 0.1, 50).unwrap();
        assert_eq!(e.m_min, Some(3));
        let dim = model.basis.dim();
        let e = min_states_for_error(&model, &gs.amplitudes, 1e-12, &[dim], 0.1, 50).unwrap();
        assert_eq!(e.m_min, Some(dim));
        assert!(e.epsilon_achieved < 1e-12);
        let e = min_states_for_error(&model, &gs.amplitudes, 0.0, &[1, 2], 0.1, 50).unwrap();
        assert_eq!(e.m_min, None);
        assert!(min_states_for_error(&model, &gs.amplitudes, 0.1, &[3, 2], 0.1, 5).is_err());
    }

    #[test]
    fn correlator_at_zero_time() {
        let model = Model::new(ModelParams::new(4, 1.0, 0.1).unwrap()).unwrap();
        // site 0 occupied
        let mut s = vec![C64::new(0.0, 0.0); model.basis.dim()];
        let i = model.basis.index_of(&"1001".parse().unwrap()).unwrap();
        s[i] = C64::new(1.0, 0.0);
        let c = two_point_correlator(&model, &s, 0, 0, 0, 0.1, 0, Method::Exact, TrotterOrder::Second).unwrap();
        assert!((c.values[0] - C64::new(1.0, 0.0)).norm() < 1e-14);
        let gs = model.ground().unwrap();
        let c = two_point_correlator(&model, &gs.amplitudes, 0, 0, 3, 0.1, 0, Method::Exact, TrotterOrder::Second).unwrap();
        let want: f64 = model
            .basis
            .states()
            .zip(&gs.amplitudes)
            .map(|(b, a)| if b.bit(0) && b.bit(3) { a.norm_sqr() } else { 0.0 })
            .sum();
        assert!((c.values[0].re - want).abs() < 1e-12);
    }

    #[test]
    fn trotter_correlator_tracks_exact() {
        let model = Model::new(ModelParams::new(4, 0.6, 0.4).unwrap()).unwrap();
        let gs = model.ground().unwrap();
        let ex = two_point_correlator(&model, &gs.amplitudes, 1, 1, 2, 0.05, 40, Method::Exact, TrotterOrder::Second).unwrap();
        let tr = two_point_correlator(&model, &gs.amplitudes, 1, 1, 2, 0.05, 40, Method::Trotter, TrotterOrder::Second).unwrap();
        let c = cumulative_error(&ex, &tr).unwrap();
        assert!(*c.last().unwrap() < 1e-2);
    }

    #[test]
    fn scaling_fit_degenerate_at_unit_mass() {
        let e = |g: f64, m: f64, mm: usize| SweepEntry {
            coupling: g,
            bare_mass: m,
            m_min: Some(mm),
            epsilon_achieved: 0.0,
            curve: vec![],
        };
        assert!(fit_scaling_law(&[e(0.1, 1.0, 10), e(0.2, 1.0, 8)]).is_none());
        let (a, _) = fit_scaling_law(&[e(0.1, 0.5, 30), e(0.2, 0.5, 14), e(0.4, 0.5, 6)]).unwrap();
        assert!(a > 0.0);
    }
}
