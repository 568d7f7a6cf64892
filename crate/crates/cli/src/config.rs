//! Run configuration: command defaults, a TOML file with top-level keys and
//! one optional section per command, then command-line overrides.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use lcuprep::lcu::PrepConvention;
use lcuprep::observables::{Method, Target, Window};
use lcuprep::pauli::MAX_QUBITS;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Prepare,
    Echo,
    Sweep,
    Excited,
    Correlator,
    Verify,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Self::Prepare,
        Self::Echo,
        Self::Sweep,
        Self::Excited,
        Self::Correlator,
        Self::Verify,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Prepare => "prepare",
            Self::Echo => "echo",
            Self::Sweep => "sweep",
            Self::Excited => "excited",
            Self::Correlator => "correlator",
            Self::Verify => "verify",
        }
    }
}

/// Every knob of every command. Keys a command does not read are ignored by
/// it but still validated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub sites: usize,
    pub bare_mass: f64,
    pub coupling: f64,
    /// Particle number; half filling when unset.
    pub sector: Option<usize>,
    /// Kept bitstrings for `prepare`; clamped to the sector dimension.
    pub m: usize,
    /// Truncation sizes for echo, excited, correlator and sweep. Empty means
    /// every `M` from 1 to the sector dimension.
    pub m_grid: Vec<usize>,
    pub dt: f64,
    pub steps: usize,
    pub shots: u64,
    pub seed: u64,
    pub method: Method,
    pub order: u32,
    pub convention: PrepConvention,
    pub oaa: bool,
    pub uncompute: bool,
    pub window: Window,
    #[serde(with = "float_or_inf")]
    pub epsilon_target: f64,
    pub couplings: Vec<f64>,
    pub masses: Vec<f64>,
    pub target: Target,
    pub mu: usize,
    pub nu: usize,
    pub x: usize,
    /// Pre-computed amplitudes (truncated-state CSV or JSON) for `prepare`.
    pub amplitudes: Option<PathBuf>,
    pub trials: usize,
    pub inject_corruption: bool,
    /// Worker threads; 0 picks one per core. `LCUPREP_WORKERS` overrides.
    pub workers: usize,
    /// Largest register the dense simulator may allocate.
    pub max_qubits: usize,
    pub max_sector_dim: usize,
    pub dry_run: bool,
    pub output: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            sites: 8,
            bare_mass: 1.0,
            coupling: 0.1,
            sector: None,
            m: 4,
            m_grid: vec![5, 20, 70],
            dt: 0.1,
            steps: 512,
            shots: 10_000,
            seed: 0,
            method: Method::Exact,
            order: 2,
            convention: PrepConvention::Sqrt,
            oaa: false,
            uncompute: false,
            window: Window::None,
            epsilon_target: 1e-2,
            couplings: vec![0.8, 0.4, 0.2, 0.1],
            masses: vec![1.0],
            target: Target::Ground,
            mu: 0,
            nu: 0,
            x: 3,
            amplitudes: None,
            trials: 100,
            inject_corruption: false,
            workers: 0,
            max_qubits: 22,
            max_sector_dim: 200_000,
            dry_run: false,
            output: PathBuf::from("out"),
        }
    }
}

mod float_or_inf {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Int(i64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Int(v) => Ok(v as f64),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

fn command_defaults(cmd: Command) -> toml::Table {
    let text = match cmd {
        Command::Prepare => "sites = 4\nbare_mass = 1.0\ncoupling = 0.1\nm = 4\noutput = \"out/prepare\"",
        Command::Echo => "output = \"out/echo\"",
        Command::Sweep => "m_grid = []\noutput = \"out/sweep\"",
        Command::Excited => "m_grid = [5, 10, 20, 40, 70]\noutput = \"out/excited\"",
        Command::Correlator => {
            "bare_mass = 0.6\ncoupling = 0.4\nm_grid = [5, 10, 20, 40, 70]\nx = 3\noutput = \"out/correlator\""
        }
        Command::Verify => "seed = 2024\noutput = \"out/verify\"",
    };
    text.parse().expect("built-in defaults parse")
}

/// Command-line overrides; unset flags leave the lower layers alone.
#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct Overrides {
    /// Number of lattice sites (even)
    #[arg(long, short = 'n')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sites: Option<usize>,
    /// Bare mass m0
    #[arg(long, alias = "m0", allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bare_mass: Option<f64>,
    /// Four-fermion coupling g
    #[arg(long, short = 'g', allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coupling: Option<f64>,
    /// Particle-number sector (default: half filling)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sector: Option<usize>,
    /// Number of kept bitstrings (prepare)
    #[arg(long, short = 'm')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    /// Comma-separated truncation sizes
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_grid: Option<Vec<usize>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Number of time steps N_t
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shots: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// exact, trotter or shots
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
    /// Product-formula order (1 or 2)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<u32>,
    /// Prep convention: direct or sqrt
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convention: Option<PrepConvention>,
    /// One round of amplitude amplification (sqrt convention)
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oaa: Option<bool>,
    /// Uncompute the ancilla instead of post-selecting (direct convention)
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub uncompute: Option<bool>,
    /// Spectrum window: none or hann
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<Window>,
    /// Integrated-error target (accepts inf)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon_target: Option<f64>,
    /// Comma-separated couplings for sweep
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub couplings: Option<Vec<f64>>,
    /// Comma-separated bare masses for sweep
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub masses: Option<Vec<f64>>,
    /// Sweep target: ground or excited
    #[arg(long, value_parser = parse_target)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<Target>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<usize>,
    /// Current insertion site
    #[arg(long, short = 'x')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<usize>,
    /// Truncated-state CSV or JSON to load instead of diagonalizing
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitudes: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    /// Test hook: corrupt the amplitudes fed to the bound check
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inject_corruption: Option<bool>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_qubits: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_sector_dim: Option<usize>,
    /// Validate and write the run plan without computing
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dry_run: Option<bool>,
    /// Output directory
    #[arg(long, short = 'o')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn parse_target(s: &str) -> Result<Target, String> {
    match s {
        "ground" => Ok(Target::Ground),
        "excited" => Ok(Target::Excited),
        _ => Err(format!("unknown target {s:?} (ground or excited)")),
    }
}

fn merge(into: &mut toml::Table, from: toml::Table) {
    for (k, v) in from {
        into.insert(k, v);
    }
}

/// Read a config file. TOML files may carry one section per command; a JSON
/// file is taken to be a run manifest and its resolved `config` is reused.
fn read_layers(path: &Path, cmd: Command) -> CliResult<toml::Table> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
    if path.extension().is_some_and(|e| e == "json") {
        let mut v: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        if let Some(c) = v.get_mut("config") {
            v = c.take();
        }
        if let Some(obj) = v.as_object_mut() {
            obj.retain(|_, x| !x.is_null());
        }
        return toml::Table::try_from(v)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())));
    }
    let doc: toml::Table = text
        .parse()
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    let mut out = toml::Table::new();
    let mut section = None;
    for (k, v) in doc {
        match v {
            toml::Value::Table(t) => {
                if !Command::ALL.iter().any(|c| c.name() == k) {
                    return Err(CliError::Validation(format!(
                        "{}: unknown section [{k}]; sections are named after commands",
                        path.display()
                    )));
                }
                if k == cmd.name() {
                    section = Some(t);
                }
            }
            v => {
                out.insert(k, v);
            }
        }
    }
    if let Some(s) = section {
        merge(&mut out, s);
    }
    Ok(out)
}

/// Resolve the configuration for `cmd`: built-in defaults, then command
/// defaults, file top level, file section, and command-line flags.
pub fn resolve(cmd: Command, file: Option<&Path>, overrides: &Overrides) -> CliResult<RunConfig> {
    let mut table = toml::Table::try_from(RunConfig::default()).expect("defaults serialize");
    merge(&mut table, command_defaults(cmd));
    if let Some(path) = file {
        merge(&mut table, read_layers(path, cmd)?);
    }
    let cli = toml::Table::try_from(overrides)
        .map_err(|e| CliError::Validation(format!("bad command-line value: {e}")))?;
    merge(&mut table, cli);
    let cfg: RunConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Validation(format!("config: {}", e.message())))?;
    cfg.validate(cmd)?;
    Ok(cfg)
}

/// `n choose k`, saturating.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    r
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

impl RunConfig {
    pub fn particles(&self) -> usize {
        self.sector.unwrap_or(self.sites / 2)
    }

    pub fn sector_dim(&self) -> u128 {
        binomial(self.sites, self.particles())
    }

    pub fn validate(&self, cmd: Command) -> CliResult<()> {
        if self.sites < 2 || !self.sites.is_multiple_of(2) {
            return Err(bad(format!("sites = {}: need an even number of at least 2", self.sites)));
        }
        if self.sites > MAX_QUBITS {
            return Err(CliError::Resource(format!("sites = {} exceeds {MAX_QUBITS}", self.sites)));
        }
        if !self.bare_mass.is_finite() || !self.coupling.is_finite() {
            return Err(bad("bare_mass and coupling must be finite"));
        }
        if let Some(k) = self.sector {
            if k > self.sites {
                return Err(bad(format!("sector = {k} exceeds sites = {}", self.sites)));
            }
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(bad(format!("dt = {} must be positive", self.dt)));
        }
        if self.steps < 1 {
            return Err(bad("steps must be at least 1"));
        }
        if self.shots < 1 {
            return Err(bad("shots must be at least 1"));
        }
        if self.m < 1 {
            return Err(bad("m must be at least 1"));
        }
        if self.m_grid.contains(&0) {
            return Err(bad("m_grid entries must be positive"));
        }
        if !(self.order == 1 || self.order == 2) {
            return Err(bad(format!("order = {}: use 1 or 2", self.order)));
        }
        if self.epsilon_target.is_nan() || self.epsilon_target <= 0.0 {
            return Err(bad("epsilon_target must be positive (inf allowed)"));
        }
        if self.oaa && self.convention != PrepConvention::Sqrt {
            return Err(bad("oaa needs convention = \"sqrt\""));
        }
        if self.uncompute && self.convention != PrepConvention::Direct {
            return Err(bad("uncompute needs convention = \"direct\""));
        }
        if self.oaa && self.uncompute {
            return Err(bad("oaa and uncompute are exclusive"));
        }
        if self.mu > 1 || self.nu > 1 {
            return Err(bad("mu and nu must be 0 or 1"));
        }
        if self.x >= self.sites {
            return Err(bad(format!("x = {} must be below sites = {}", self.x, self.sites)));
        }
        if self.trials < 1 {
            return Err(bad("trials must be at least 1"));
        }
        if self.output.as_os_str().is_empty() {
            return Err(bad("output directory must be set"));
        }
        if self.output.is_file() {
            return Err(bad(format!("output {} is a file", self.output.display())));
        }
        match cmd {
            Command::Sweep => {
                if self.couplings.is_empty() || self.masses.is_empty() {
                    return Err(bad("sweep needs non-empty couplings and masses"));
                }
                if self.couplings.iter().chain(&self.masses).any(|v| !v.is_finite()) {
                    return Err(bad("couplings and masses must be finite"));
                }
            }
            Command::Correlator if self.method == Method::HadamardShots => {
                return Err(bad("correlator supports method = exact or trotter"));
            }
            Command::Echo | Command::Excited if self.method == Method::HadamardShots
                && self.sites + 1 > self.max_qubits => {
                    return Err(CliError::Resource(format!(
                        "shot simulation needs {} qubits, max_qubits = {}",
                        self.sites + 1,
                        self.max_qubits
                    )));
                }
            _ => {}
        }
        let needs_model = cmd != Command::Verify && !(cmd == Command::Prepare && self.amplitudes.is_some());
        if needs_model && self.sector_dim() > self.max_sector_dim as u128 {
            return Err(CliError::Resource(format!(
                "sector dimension {} exceeds max_sector_dim = {}",
                self.sector_dim(),
                self.max_sector_dim
            )));
        }
        if let Some(p) = &self.amplitudes {
            if !p.is_file() {
                return Err(bad(format!("amplitude file {} not found", p.display())));
            }
        }
        Ok(())
    }

    /// Truncation sizes clamped to the sector dimension, ascending and
    /// without repeats.
    pub fn grid(&self, dim: usize) -> Vec<usize> {
        if self.m_grid.is_empty() {
            return (1..=dim).collect();
        }
        let mut g: Vec<usize> = self.m_grid.iter().map(|&m| m.min(dim)).collect();
        g.sort_unstable();
        g.dedup();
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(".toml").tempfile().unwrap();
        std::io::Write::write_all(&mut f, text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn precedence() {
        let f = write("dt = 0.2\nsteps = 10\n[echo]\nsteps = 20\nseed = 5\n[sweep]\nsteps = 99\n");
        let cli = Overrides {
            seed: Some(9),
            ..Default::default()
        };
        let c = resolve(Command::Echo, Some(f.path()), &cli).unwrap();
        assert_eq!((c.dt, c.steps, c.seed), (0.2, 20, 9));
        let c = resolve(Command::Prepare, Some(f.path()), &Overrides::default()).unwrap();
        assert_eq!((c.sites, c.steps, c.seed), (4, 10, 0));
    }

    #[test]
    fn unknown_keys_and_sections_rejected() {
        let f = write("stepz = 3\n");
        assert!(matches!(resolve(Command::Echo, Some(f.path()), &Overrides::default()), Err(CliError::Validation(_))));
        let f = write("[plot]\nx = 1\n");
        assert!(resolve(Command::Echo, Some(f.path()), &Overrides::default()).is_err());
    }

    #[test]
    fn infinite_target_round_trips() {
        let f = write("epsilon_target = inf\n");
        let c = resolve(Command::Sweep, Some(f.path()), &Overrides::default()).unwrap();
        assert!(c.epsilon_target.is_infinite());
        let j = serde_json::to_value(&c).unwrap();
        assert_eq!(j["epsilon_target"], "inf");
        let back: RunConfig = serde_json::from_value(j).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn validation_classes() {
        let v = |o: Overrides| resolve(Command::Echo, None, &o).map(|_| ()).map_err(|e| e.exit_code());
        assert_eq!(v(Overrides { sites: Some(5), ..Default::default() }), Err(1));
        assert_eq!(v(Overrides { dt: Some(-1.0), ..Default::default() }), Err(1));
        assert_eq!(v(Overrides { sites: Some(24), ..Default::default() }), Err(3));
        assert_eq!(
            v(Overrides { method: Some(Method::HadamardShots), sites: Some(22), max_sector_dim: Some(1 << 30), ..Default::default() }),
            Err(3)
        );
        assert_eq!(v(Overrides { oaa: Some(true), convention: Some(PrepConvention::Direct), ..Default::default() }), Err(1));
        assert_eq!(v(Overrides::default()), Ok(()));
    }

    #[test]
    fn grid_clamps() {
        let c = RunConfig {
            m_grid: vec![20, 5, 100, 90],
            ..Default::default()
        };
        assert_eq!(c.grid(70), vec![5, 20, 70]);
        assert_eq!(RunConfig { m_grid: vec![], ..Default::default() }.grid(3), vec![1, 2, 3]);
        assert_eq!(binomial(16, 8), 12870);
    }
}
