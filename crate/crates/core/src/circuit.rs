//! Gate lists over a partitioned register.
//!
//! Qubits are numbered ancilla first, then work, then the optional test
//! qubit. Every gate kind accepts an arbitrary list of controls, each firing
//! on `|0>` or `|1>`; the simulator executes multi-controlled gates natively.
//!
//! The text form has one gate per line, `KIND angle targets controls`, with
//! `-` for an empty field:
//!
//! ```text
//! # layout ancilla=2 work=4 test=0
//! RY 0.5708124313918748 0 -
//! MCX - 3 0:0,1:1
//! ```

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GateKind {
    RY,
    RZ,
    X,
    H,
    Z,
    CX,
    MCX,
    MCZ,
    /// `diag(1, e^{i angle})` on the target.
    CPhase,
    /// Global phase `e^{i angle}`; with controls it becomes a conditional phase.
    GPhase,
    /// No-op annotation delimiting a controlled-unitary block.
    CuMarker,
}

impl GateKind {
    pub fn name(self) -> &'static str {
        match self {
            GateKind::RY => "RY",
            GateKind::RZ => "RZ",
            GateKind::X => "X",
            GateKind::H => "H",
            GateKind::Z => "Z",
            GateKind::CX => "CX",
            GateKind::MCX => "MCX",
            GateKind::MCZ => "MCZ",
            GateKind::CPhase => "CPHASE",
            GateKind::GPhase => "GPHASE",
            GateKind::CuMarker => "CU",
        }
    }

    pub fn has_angle(self) -> bool {
        matches!(
            self,
            GateKind::RY | GateKind::RZ | GateKind::CPhase | GateKind::GPhase
        )
    }

    pub fn target_count(self) -> usize {
        match self {
            GateKind::GPhase | GateKind::CuMarker => 0,
            _ => 1,
        }
    }

    pub fn is_rotation(self) -> bool {
        matches!(self, GateKind::RY | GateKind::RZ)
    }
}

impl FromStr for GateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "RY" => GateKind::RY,
            "RZ" => GateKind::RZ,
            "X" => GateKind::X,
            "H" => GateKind::H,
            "Z" => GateKind::Z,
            "CX" => GateKind::CX,
            "MCX" => GateKind::MCX,
            "MCZ" => GateKind::MCZ,
            "CPHASE" => GateKind::CPhase,
            "GPHASE" => GateKind::GPhase,
            "CU" => GateKind::CuMarker,
            _ => return Err(Error::Parse(format!("unknown gate kind {s:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Control {
    pub qubit: usize,
    /// Fire on `|1>` when true, on `|0>` when false.
    pub on: bool,
}

impl Control {
    pub fn one(qubit: usize) -> Self {
        Self { qubit, on: true }
    }

    pub fn zero(qubit: usize) -> Self {
        Self { qubit, on: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub kind: GateKind,
    pub angle: Option<f64>,
    pub targets: Vec<usize>,
    pub controls: Vec<Control>,
}

impl Gate {
    fn new(kind: GateKind, angle: Option<f64>, targets: Vec<usize>, controls: Vec<Control>) -> Self {
        Self {
            kind,
            angle,
            targets,
            controls,
        }
    }

    pub fn ry(q: usize, theta: f64) -> Self {
        Self::new(GateKind::RY, Some(theta), vec![q], vec![])
    }

    pub fn rz(q: usize, theta: f64) -> Self {
        Self::new(GateKind::RZ, Some(theta), vec![q], vec![])
    }

    pub fn x(q: usize) -> Self {
        Self::new(GateKind::X, None, vec![q], vec![])
    }

    pub fn h(q: usize) -> Self {
        Self::new(GateKind::H, None, vec![q], vec![])
    }

    pub fn z(q: usize) -> Self {
        Self::new(GateKind::Z, None, vec![q], vec![])
    }

    pub fn cx(control: usize, target: usize) -> Self {
        Self::new(GateKind::CX, None, vec![target], vec![Control::one(control)])
    }

    pub fn mcx(controls: Vec<Control>, target: usize) -> Self {
        Self::new(GateKind::MCX, None, vec![target], controls)
    }

    pub fn mcz(controls: Vec<Control>, target: usize) -> Self {
        Self::new(GateKind::MCZ, None, vec![target], controls)
    }

    pub fn cphase(controls: Vec<Control>, target: usize, phi: f64) -> Self {
        Self::new(GateKind::CPhase, Some(phi), vec![target], controls)
    }

    pub fn gphase(phi: f64) -> Self {
        Self::new(GateKind::GPhase, Some(phi), vec![], vec![])
    }

    pub fn marker() -> Self {
        Self::new(GateKind::CuMarker, None, vec![], vec![])
    }

    /// Add one more control, promoting `X`/`CX` to `MCX` and `Z` to `MCZ`.
    pub fn with_control(&self, c: Control) -> Self {
        let mut g = self.clone();
        g.controls.push(c);
        g.kind = match g.kind {
            GateKind::X if g.controls.len() == 1 && c.on => GateKind::CX,
            GateKind::X | GateKind::CX => GateKind::MCX,
            GateKind::Z => GateKind::MCZ,
            k => k,
        };
        g
    }

    pub fn inverse(&self) -> Self {
        let mut g = self.clone();
        if matches!(
            g.kind,
            GateKind::RY | GateKind::RZ | GateKind::CPhase | GateKind::GPhase
        ) {
            g.angle = g.angle.map(|a| -a);
        }
        g
    }

    pub fn qubits(&self) -> impl Iterator<Item = usize> + '_ {
        self.targets
            .iter()
            .copied()
            .chain(self.controls.iter().map(|c| c.qubit))
    }

    pub fn validate(&self, qubit_count: usize) -> Result<()> {
        if self.targets.len() != self.kind.target_count() {
            return Err(Error::InvalidArgument(format!(
                "{} takes {} target(s), got {}",
                self.kind.name(),
                self.kind.target_count(),
                self.targets.len()
            )));
        }
        if self.kind == GateKind::CX && self.controls.len() != 1 {
            return Err(Error::InvalidArgument("CX takes exactly one control".into()));
        }
        match (self.kind.has_angle(), self.angle) {
            (true, Some(a)) if a.is_finite() => {}
            (true, _) => {
                return Err(Error::InvalidArgument(format!(
                    "{} needs a finite angle",
                    self.kind.name()
                )))
            }
            (false, Some(_)) => {
                return Err(Error::InvalidArgument(format!(
                    "{} takes no angle",
                    self.kind.name()
                )))
            }
            (false, None) => {}
        }
        let mut seen = 0u128;
        for q in self.qubits() {
            if q >= qubit_count {
                return Err(Error::QubitOutOfRange {
                    index: q,
                    qubits: qubit_count,
                });
            }
            if seen & (1u128 << q) != 0 {
                return Err(Error::OverlappingQubits(q));
            }
            seen |= 1u128 << q;
        }
        Ok(())
    }
}

fn join<T, F: Fn(&T) -> String>(items: &[T], f: F) -> String {
    if items.is_empty() {
        "-".to_string()
    } else {
        items.iter().map(f).collect::<Vec<_>>().join(",")
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let angle = self
            .angle
            .map(|a| a.to_string())
            .unwrap_or_else(|| "-".into());
        write!(
            f,
            "{} {} {} {}",
            self.kind.name(),
            angle,
            join(&self.targets, |t| t.to_string()),
            join(&self.controls, |c| format!("{}:{}", c.qubit, u8::from(c.on)))
        )
    }
}

impl FromStr for Gate {
    type Err = Error;

    fn from_str(line: &str) -> Result<Self> {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::Parse(format!("expected 4 fields in {line:?}")));
        }
        let bad = |what: &str| Error::Parse(format!("bad {what} in {line:?}"));
        let kind: GateKind = fields[0].parse()?;
        let angle = match fields[1] {
            "-" => None,
            a => Some(a.parse::<f64>().map_err(|_| bad("angle"))?),
        };
        let targets = match fields[2] {
            "-" => vec![],
            t => t
                .split(',')
                .map(|x| x.parse::<usize>().map_err(|_| bad("target")))
                .collect::<Result<_>>()?,
        };
        let controls = match fields[3] {
            "-" => vec![],
            c => c
                .split(',')
                .map(|x| {
                    let (q, v) = x.split_once(':').ok_or_else(|| bad("control"))?;
                    let qubit = q.parse::<usize>().map_err(|_| bad("control"))?;
                    let on = match v {
                        "0" => false,
                        "1" => true,
                        _ => return Err(bad("control value")),
                    };
                    Ok(Control { qubit, on })
                })
                .collect::<Result<_>>()?,
        };
        Ok(Gate::new(kind, angle, targets, controls))
    }
}

/// Register partition: `ancilla` qubits, then `work`, then an optional test qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegisterLayout {
    pub ancilla: usize,
    pub work: usize,
    pub test: bool,
}

impl RegisterLayout {
    pub fn new(ancilla: usize, work: usize) -> Self {
        Self {
            ancilla,
            work,
            test: false,
        }
    }

    pub fn qubit_count(&self) -> usize {
        self.ancilla + self.work + usize::from(self.test)
    }

    pub fn ancilla_qubits(&self) -> std::ops::Range<usize> {
        0..self.ancilla
    }

    pub fn work_qubits(&self) -> std::ops::Range<usize> {
        self.ancilla..self.ancilla + self.work
    }

    pub fn work_qubit(&self, i: usize) -> usize {
        self.ancilla + i
    }

    pub fn test_qubit(&self) -> Option<usize> {
        self.test.then_some(self.ancilla + self.work)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    layout: RegisterLayout,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(layout: RegisterLayout) -> Self {
        Self {
            layout,
            gates: Vec::new(),
        }
    }

    pub fn layout(&self) -> RegisterLayout {
        self.layout
    }

    pub fn qubit_count(&self) -> usize {
        self.layout.qubit_count()
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        gate.validate(self.qubit_count())?;
        self.gates.push(gate);
        Ok(())
    }

    pub fn append(&mut self, other: &Circuit) -> Result<()> {
        if other.qubit_count() > self.qubit_count() {
            return Err(Error::DimensionMismatch {
                expected: self.qubit_count(),
                got: other.qubit_count(),
            });
        }
        self.gates.extend_from_slice(&other.gates);
        Ok(())
    }

    pub fn inverse(&self) -> Circuit {
        Circuit {
            layout: self.layout,
            gates: self.gates.iter().rev().map(Gate::inverse).collect(),
        }
    }

    /// Same circuit on a wider layout; qubit indices are unchanged, so the
    /// new layout must keep the ancilla count.
    pub fn widened(&self, layout: RegisterLayout) -> Result<Circuit> {
        if layout.ancilla != self.layout.ancilla || layout.qubit_count() < self.qubit_count() {
            return Err(Error::InvalidArgument("incompatible layout".into()));
        }
        Ok(Circuit {
            layout,
            gates: self.gates.clone(),
        })
    }

    /// Every gate conditioned on an extra control qubit.
    pub fn controlled_by(&self, c: Control, layout: RegisterLayout) -> Result<Circuit> {
        if c.qubit >= layout.qubit_count() {
            return Err(Error::QubitOutOfRange {
                index: c.qubit,
                qubits: layout.qubit_count(),
            });
        }
        let mut out = Circuit::new(layout);
        for g in &self.gates {
            if g.kind == GateKind::CuMarker {
                out.push(g.clone())?;
            } else {
                out.push(g.with_control(c))?;
            }
        }
        Ok(out)
    }

    /// Emitted single-qubit rotations (`RY` and `RZ`).
    pub fn rotation_count(&self) -> usize {
        self.gates.iter().filter(|g| g.kind.is_rotation()).count()
    }

    pub fn count_kind(&self, kind: GateKind) -> usize {
        self.gates.iter().filter(|g| g.kind == kind).count()
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "# layout ancilla={} work={} test={}\n",
            self.layout.ancilla,
            self.layout.work,
            u8::from(self.layout.test)
        );
        for g in &self.gates {
            s.push_str(&g.to_string());
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Circuit> {
        let mut layout = None;
        let mut gates = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim();
                if let Some(spec) = rest.strip_prefix("layout") {
                    layout = Some(parse_layout(spec)?);
                }
                continue;
            }
            gates.push(line.parse::<Gate>()?);
        }
        let layout = layout.ok_or_else(|| Error::Parse("missing layout header".into()))?;
        let mut c = Circuit::new(layout);
        for g in gates {
            c.push(g)?;
        }
        Ok(c)
    }
}

fn parse_layout(spec: &str) -> Result<RegisterLayout> {
    let mut layout = RegisterLayout::new(0, 0);
    for kv in spec.split_whitespace() {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("bad layout field {kv:?}")))?;
        let n: usize = v
            .parse()
            .map_err(|_| Error::Parse(format!("bad layout value {kv:?}")))?;
        match k {
            "ancilla" => layout.ancilla = n,
            "work" => layout.work = n,
            "test" => layout.test = n != 0,
            _ => return Err(Error::Parse(format!("unknown layout field {k:?}"))),
        }
    }
    Ok(layout)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_bad_gates() {
        let mut c = Circuit::new(RegisterLayout::new(1, 2));
        assert!(matches!(
            c.push(Gate::x(3)),
            Err(Error::QubitOutOfRange { .. })
        ));
        assert!(matches!(
            c.push(Gate::cx(1, 1)),
            Err(Error::OverlappingQubits(1))
        ));
        assert!(c.push(Gate::ry(0, f64::NAN)).is_err());
        assert!(c.push(Gate::ry(0, 0.3)).is_ok());
    }

    #[test]
    fn control_promotion() {
        let g = Gate::x(2).with_control(Control::one(0));
        assert_eq!(g.kind, GateKind::CX);
        assert_eq!(g.with_control(Control::zero(1)).kind, GateKind::MCX);
        assert_eq!(Gate::x(2).with_control(Control::zero(0)).kind, GateKind::MCX);
        assert_eq!(Gate::z(2).with_control(Control::one(0)).kind, GateKind::MCZ);
    }

    #[test]
    fn inverse_reverses_and_negates() {
        let mut c = Circuit::new(RegisterLayout::new(0, 2));
        c.push(Gate::ry(0, 0.4)).unwrap();
        c.push(Gate::cx(0, 1)).unwrap();
        let inv = c.inverse();
        assert_eq!(inv.gates()[0], Gate::cx(0, 1));
        assert_eq!(inv.gates()[1], Gate::ry(0, -0.4));
    }

    #[test]
    fn text_format_fields() {
        let g = Gate::mcx(vec![Control::zero(0), Control::one(1)], 3);
        assert_eq!(g.to_string(), "MCX - 3 0:0,1:1");
        assert_eq!(Gate::gphase(0.5).to_string(), "GPHASE 0.5 - -");
        assert!("FOO - 1 -".parse::<Gate>().is_err());
        assert!("RY 0.1 1".parse::<Gate>().is_err());
    }

    fn arb_gate(n: usize) -> impl Strategy<Value = Gate> {
        (0..8usize, -10.0f64..10.0, 0..n, proptest::collection::vec((0..n, any::<bool>()), 0..3))
            .prop_map(move |(k, a, t, cs)| {
                let mut g = match k {
                    0 => Gate::ry(t, a),
                    1 => Gate::rz(t, a),
                    2 => Gate::x(t),
                    3 => Gate::h(t),
                    4 => Gate::z(t),
                    5 => Gate::cphase(vec![], t, a),
                    6 => Gate::gphase(a),
                    _ => Gate::marker(),
                };
                let mut used = vec![t];
                for (q, on) in cs {
                    if g.kind != GateKind::CuMarker && !used.contains(&q) {
                        used.push(q);
                        g = g.with_control(Control { qubit: q, on });
                    }
                }
                g
            })
    }

    proptest! {
        #[test]
        fn text_round_trip(gates in proptest::collection::vec(arb_gate(5), 0..20)) {
            let mut c = Circuit::new(RegisterLayout { ancilla: 2, work: 2, test: true });
            for g in gates {
                c.push(g).unwrap();
            }
            let back = Circuit::from_text(&c.to_text()).unwrap();
            prop_assert_eq!(back, c);
        }
    }
}
