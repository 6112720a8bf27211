//! Logical circuits: gates over logical-qubit operands with explicit dependency edges.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CircuitError {
    #[error("gate {id}: {kind:?} expects {expected} operands, got {got}")]
    Arity { id: usize, kind: GateKind, expected: usize, got: usize },
    #[error("gate {id}: repeated operand {qubit}")]
    RepeatedOperand { id: usize, qubit: usize },
    #[error("gate {id}: qubit {qubit} outside register of {n_qubits}")]
    QubitOutOfRange { id: usize, qubit: usize, n_qubits: usize },
    #[error("dependency {from} -> {to} is not forward in gate order")]
    BackwardEdge { from: usize, to: usize },
    #[error("gate {0} is not a classical reversible gate")]
    NonClassicalGate(usize),
    #[error("circuit has no adder register layout")]
    NoLayout,
    #[error("operand {0} does not fit in the register")]
    OperandTooWide(u128),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GateKind {
    X,
    Z,
    H,
    CNOT,
    Toffoli,
    T,
    TDagger,
    Measure,
    PrepMagicT,
    PrepMagicToffoli,
    TeleportIntoMagic,
    ECRound,
}

impl GateKind {
    /// Data-qubit operand count; `None` for the teleport, which takes one
    /// operand for a T state and three for a Toffoli state.
    pub fn arity(self) -> Option<usize> {
        Some(match self {
            GateKind::X
            | GateKind::Z
            | GateKind::H
            | GateKind::T
            | GateKind::TDagger
            | GateKind::Measure
            | GateKind::ECRound => 1,
            GateKind::CNOT => 2,
            GateKind::Toffoli => 3,
            GateKind::PrepMagicT | GateKind::PrepMagicToffoli => 0,
            GateKind::TeleportIntoMagic => return None,
        })
    }

    pub fn is_clifford(self) -> bool {
        matches!(self, GateKind::X | GateKind::Z | GateKind::H | GateKind::CNOT)
    }

    pub fn is_magic_prep(self) -> bool {
        matches!(self, GateKind::PrepMagicT | GateKind::PrepMagicToffoli)
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::X => "X",
            GateKind::Z => "Z",
            GateKind::H => "H",
            GateKind::CNOT => "CNOT",
            GateKind::Toffoli => "Toffoli",
            GateKind::T => "T",
            GateKind::TDagger => "TDagger",
            GateKind::Measure => "Measure",
            GateKind::PrepMagicT => "PrepMagicT",
            GateKind::PrepMagicToffoli => "PrepMagicToffoli",
            GateKind::TeleportIntoMagic => "TeleportIntoMagic",
            GateKind::ECRound => "ECRound",
        }
    }
}

impl FromStr for GateKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        const ALL: [GateKind; 12] = [
            GateKind::X,
            GateKind::Z,
            GateKind::H,
            GateKind::CNOT,
            GateKind::Toffoli,
            GateKind::T,
            GateKind::TDagger,
            GateKind::Measure,
            GateKind::PrepMagicT,
            GateKind::PrepMagicToffoli,
            GateKind::TeleportIntoMagic,
            GateKind::ECRound,
        ];
        ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| format!("unknown gate kind `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogicalGate {
    pub id: usize,
    pub kind: GateKind,
    pub operands: Vec<usize>,
}

/// Where an adder keeps its inputs and its result.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AdderLayout {
    pub a: Vec<usize>,
    pub b: Vec<usize>,
    /// Little-endian result bits, including the carry out.
    pub sum: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LogicalCircuit {
    pub n_qubits: usize,
    gates: Vec<LogicalGate>,
    preds: Vec<Vec<usize>>,
    pub layout: Option<AdderLayout>,
}

/// Appends gates while wiring each one after the previous gate on every operand.
#[derive(Debug, Clone)]
pub struct CircuitBuilder {
    circuit: LogicalCircuit,
    last_on_qubit: Vec<Option<usize>>,
}

impl CircuitBuilder {
    pub fn new(n_qubits: usize) -> Self {
        Self {
            circuit: LogicalCircuit { n_qubits, ..Default::default() },
            last_on_qubit: vec![None; n_qubits],
        }
    }

    pub fn push(&mut self, kind: GateKind, operands: &[usize]) -> usize {
        self.push_with_deps(kind, operands, &[])
    }

    pub fn push_with_deps(&mut self, kind: GateKind, operands: &[usize], extra: &[usize]) -> usize {
        let id = self.circuit.gates.len();
        let mut preds: Vec<usize> = operands
            .iter()
            .filter_map(|&q| self.last_on_qubit.get(q).copied().flatten())
            .chain(extra.iter().copied())
            .collect();
        preds.sort_unstable();
        preds.dedup();
        for &q in operands {
            if q >= self.last_on_qubit.len() {
                self.last_on_qubit.resize(q + 1, None);
            }
            self.last_on_qubit[q] = Some(id);
        }
        self.circuit.gates.push(LogicalGate { id, kind, operands: operands.to_vec() });
        self.circuit.preds.push(preds);
        id
    }

    pub fn x(&mut self, q: usize) -> usize {
        self.push(GateKind::X, &[q])
    }
    pub fn h(&mut self, q: usize) -> usize {
        self.push(GateKind::H, &[q])
    }
    pub fn cnot(&mut self, c: usize, t: usize) -> usize {
        self.push(GateKind::CNOT, &[c, t])
    }
    pub fn toffoli(&mut self, c1: usize, c2: usize, t: usize) -> usize {
        self.push(GateKind::Toffoli, &[c1, c2, t])
    }

    pub fn set_layout(&mut self, layout: AdderLayout) {
        self.circuit.layout = Some(layout);
    }

    pub fn build(mut self) -> Result<LogicalCircuit, CircuitError> {
        self.circuit.n_qubits = self.circuit.n_qubits.max(self.last_on_qubit.len());
        self.circuit.validate()?;
        Ok(self.circuit)
    }
}

impl LogicalCircuit {
    pub fn from_parts(
        n_qubits: usize,
        gates: Vec<LogicalGate>,
        edges: &[(usize, usize)],
    ) -> Result<Self, CircuitError> {
        let mut preds = vec![Vec::new(); gates.len()];
        for &(from, to) in edges {
            if from >= to || to >= gates.len() {
                return Err(CircuitError::BackwardEdge { from, to });
            }
            preds[to].push(from);
        }
        for p in &mut preds {
            p.sort_unstable();
            p.dedup();
        }
        let c = Self { n_qubits, gates, preds, layout: None };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), CircuitError> {
        for (i, g) in self.gates.iter().enumerate() {
            debug_assert_eq!(g.id, i);
            let got = g.operands.len();
            let ok = match g.kind.arity() {
                Some(n) => n == got,
                None => got == 1 || got == 3,
            };
            if !ok {
                return Err(CircuitError::Arity {
                    id: g.id,
                    kind: g.kind,
                    expected: g.kind.arity().unwrap_or(1),
                    got,
                });
            }
            for (j, &q) in g.operands.iter().enumerate() {
                if q >= self.n_qubits {
                    return Err(CircuitError::QubitOutOfRange { id: g.id, qubit: q, n_qubits: self.n_qubits });
                }
                if g.operands[..j].contains(&q) {
                    return Err(CircuitError::RepeatedOperand { id: g.id, qubit: q });
                }
            }
            if let Some(&p) = self.preds[i].iter().find(|&&p| p >= i) {
                return Err(CircuitError::BackwardEdge { from: p, to: i });
            }
        }
        Ok(())
    }

    pub fn gates(&self) -> &[LogicalGate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn preds(&self, id: usize) -> &[usize] {
        &self.preds[id]
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.preds.iter().enumerate().flat_map(|(to, ps)| ps.iter().map(move |&from| (from, to)))
    }

    pub fn successors(&self) -> Vec<Vec<usize>> {
        let mut succ = vec![Vec::new(); self.gates.len()];
        for (from, to) in self.edges() {
            succ[from].push(to);
        }
        succ
    }

    pub fn count(&self, kind: GateKind) -> usize {
        self.gates.iter().filter(|g| g.kind == kind).count()
    }

    /// Longest chain of gates, each gate weighing `weight(gate)`.
    pub fn weighted_depth(&self, mut weight: impl FnMut(&LogicalGate) -> f64) -> f64 {
        let mut finish = vec![0.0f64; self.gates.len()];
        let mut best = 0.0f64;
        for g in &self.gates {
            let start = self.preds[g.id].iter().map(|&p| finish[p]).fold(0.0, f64::max);
            finish[g.id] = start + weight(g);
            best = best.max(finish[g.id]);
        }
        best
    }

    /// Logical depth in gate layers.
    pub fn depth(&self) -> usize {
        self.weighted_depth(|_| 1.0) as usize
    }

    /// Reachability between gates, as sorted successor sets. Quadratic; for small circuits.
    pub fn transitive_closure(&self) -> Vec<BTreeSet<usize>> {
        let succ = self.successors();
        let mut reach: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); self.gates.len()];
        for id in (0..self.gates.len()).rev() {
            let mut set = BTreeSet::new();
            for &s in &succ[id] {
                set.insert(s);
                set.extend(reach[s].iter().copied());
            }
            reach[id] = set;
        }
        reach
    }

    /// Line-oriented text: a header, one `id kind q0 [q1 [q2]]` line per gate,
    /// then one `from to` line per dependency edge.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "qubits {}", self.n_qubits).unwrap();
        if let Some(l) = &self.layout {
            for (name, reg) in [("a", &l.a), ("b", &l.b), ("sum", &l.sum)] {
                write!(out, "register {name}").unwrap();
                for q in reg {
                    write!(out, " {q}").unwrap();
                }
                out.push('\n');
            }
        }
        out.push_str("gates\n");
        for g in &self.gates {
            write!(out, "{} {}", g.id, g.kind.name()).unwrap();
            for q in &g.operands {
                write!(out, " {q}").unwrap();
            }
            out.push('\n');
        }
        out.push_str("deps\n");
        for (from, to) in self.edges() {
            writeln!(out, "{from} {to}").unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, CircuitError> {
        #[derive(PartialEq)]
        enum Section {
            Header,
            Gates,
            Deps,
        }
        let mut section = Section::Header;
        let mut n_qubits = None;
        let mut layout = AdderLayout::default();
        let mut has_layout = false;
        let mut gates = Vec::new();
        let mut edges = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let err = |msg: String| CircuitError::Parse { line: line_no, msg };
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let mut tok = line.split_whitespace();
            let first = tok.next().unwrap();
            let num = |s: &str| s.parse::<usize>().map_err(|e| err(format!("`{s}`: {e}")));
            match (first, &section) {
                ("gates", _) => section = Section::Gates,
                ("deps", _) => section = Section::Deps,
                ("qubits", Section::Header) => {
                    n_qubits = Some(num(tok.next().ok_or_else(|| err("missing count".into()))?)?);
                }
                ("register", Section::Header) => {
                    has_layout = true;
                    let name = tok.next().ok_or_else(|| err("missing register name".into()))?;
                    let reg = tok.map(num).collect::<Result<Vec<_>, _>>()?;
                    match name {
                        "a" => layout.a = reg,
                        "b" => layout.b = reg,
                        "sum" => layout.sum = reg,
                        other => return Err(err(format!("unknown register `{other}`"))),
                    }
                }
                (_, Section::Gates) => {
                    let id = num(first)?;
                    if id != gates.len() {
                        return Err(err(format!("gate id {id} out of sequence")));
                    }
                    let kind: GateKind =
                        tok.next().ok_or_else(|| err("missing kind".into()))?.parse().map_err(err)?;
                    let operands = tok.map(num).collect::<Result<Vec<_>, _>>()?;
                    gates.push(LogicalGate { id, kind, operands });
                }
                (_, Section::Deps) => {
                    let from = num(first)?;
                    let to = num(tok.next().ok_or_else(|| err("missing edge target".into()))?)?;
                    edges.push((from, to));
                }
                (other, Section::Header) => return Err(err(format!("unexpected `{other}`"))),
            }
        }
        let n_qubits = n_qubits.ok_or(CircuitError::Parse { line: 0, msg: "missing `qubits` header".into() })?;
        let mut c = Self::from_parts(n_qubits, gates, &edges)?;
        if has_layout {
            c.layout = Some(layout);
        }
        Ok(c)
    }
}

/// Runs a classical reversible circuit on basis states and decodes the sum register.
pub fn verify_adder_semantics(circuit: &LogicalCircuit, a: u128, b: u128) -> Result<u128, CircuitError> {
    let layout = circuit.layout.as_ref().ok_or(CircuitError::NoLayout)?;
    let mut bits = vec![false; circuit.n_qubits];
    for (value, reg) in [(a, &layout.a), (b, &layout.b)] {
        if reg.len() < 128 && value >> reg.len() != 0 {
            return Err(CircuitError::OperandTooWide(value));
        }
        for (i, &q) in reg.iter().enumerate() {
            bits[q] = i < 128 && (value >> i) & 1 == 1;
        }
    }
    for g in circuit.gates() {
        match (g.kind, g.operands.as_slice()) {
            (GateKind::X, &[t]) => bits[t] ^= true,
            (GateKind::CNOT, &[c, t]) => bits[t] ^= bits[c],
            (GateKind::Toffoli, &[c1, c2, t]) => bits[t] ^= bits[c1] & bits[c2],
            _ => return Err(CircuitError::NonClassicalGate(g.id)),
        }
    }
    Ok(layout
        .sum
        .iter()
        .enumerate()
        .filter(|(_, &q)| bits[q])
        .map(|(i, _)| 1u128 << i)
        .sum())
}
