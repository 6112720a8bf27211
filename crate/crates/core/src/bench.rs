//! Benchmark circuit generators (ripple-carry adder, carry-lookahead adder,
//! approximate QFT) and the fault-tolerant expansion of non-Clifford gates.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{AdderLayout, CircuitBuilder, CircuitError, GateKind, LogicalCircuit};

#[derive(Debug, Error, PartialEq)]
pub enum BenchError {
    #[error("bit width {n} too small for {benchmark} (minimum {min})")]
    TooNarrow { benchmark: BenchmarkKind, n: usize, min: usize },
    #[error("invalid AQFT parameters: {0}")]
    InvalidAqft(String),
    #[error("gate {id}: {kind:?} cannot be expanded fault-tolerantly")]
    UnsupportedGate { id: usize, kind: GateKind },
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchmarkKind {
    Qcla,
    Qrca,
    Aqft,
}

impl fmt::Display for BenchmarkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BenchmarkKind::Qcla => "qcla",
            BenchmarkKind::Qrca => "qrca",
            BenchmarkKind::Aqft => "aqft",
        })
    }
}

impl FromStr for BenchmarkKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "qcla" => Ok(BenchmarkKind::Qcla),
            "qrca" => Ok(BenchmarkKind::Qrca),
            "aqft" => Ok(BenchmarkKind::Aqft),
            other => Err(format!("unknown circuit `{other}` (expected qcla, qrca or aqft)")),
        }
    }
}

/// Rotation truncation and approximation-sequence shape for the AQFT.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AqftParams {
    pub k_max: usize,
    pub seq_len: usize,
    pub t_count: usize,
}

impl Default for AqftParams {
    fn default() -> Self {
        Self { k_max: 8, seq_len: 375, t_count: 150 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub kind: BenchmarkKind,
    pub bits: usize,
    #[serde(default)]
    pub aqft: AqftParams,
}

impl BenchmarkSpec {
    pub fn new(kind: BenchmarkKind, bits: usize) -> Self {
        Self { kind, bits, aqft: AqftParams::default() }
    }

    pub fn generate(&self) -> Result<LogicalCircuit, BenchError> {
        match self.kind {
            BenchmarkKind::Qcla => gen_qcla(self.bits),
            BenchmarkKind::Qrca => gen_qrca(self.bits),
            BenchmarkKind::Aqft => gen_aqft(self.bits, self.aqft),
        }
    }
}

fn floor_log2(n: usize) -> usize {
    (usize::BITS - 1 - n.leading_zeros()) as usize
}

/// CDKM ripple-carry adder with the three-CNOT unmajority block.
///
/// Registers are interleaved `c0, b0, a0, b1, a1, ..., z` so every gate acts on
/// neighbouring qubits. The sum replaces `b`; `z` receives the carry out.
/// Counts: 2n Toffoli, 5n + 1 CNOT, 2n X.
pub fn gen_qrca(n: usize) -> Result<LogicalCircuit, BenchError> {
    if n == 0 {
        return Err(BenchError::TooNarrow { benchmark: BenchmarkKind::Qrca, n, min: 1 });
    }
    let c0 = 0;
    let b = |i: usize| 1 + 2 * i;
    let a = |i: usize| 2 + 2 * i;
    let z = 2 * n + 1;
    let mut cb = CircuitBuilder::new(2 * n + 2);

    let maj = |cb: &mut CircuitBuilder, c: usize, b: usize, a: usize| {
        cb.cnot(a, b);
        cb.cnot(a, c);
        cb.toffoli(c, b, a);
    };
    let uma = |cb: &mut CircuitBuilder, c: usize, b: usize, a: usize| {
        cb.x(b);
        cb.cnot(c, b);
        cb.toffoli(c, b, a);
        cb.x(b);
        cb.cnot(a, c);
        cb.cnot(a, b);
    };

    maj(&mut cb, c0, b(0), a(0));
    for i in 1..n {
        maj(&mut cb, a(i - 1), b(i), a(i));
    }
    cb.cnot(a(n - 1), z);
    for i in (1..n).rev() {
        uma(&mut cb, a(i - 1), b(i), a(i));
    }
    uma(&mut cb, c0, b(0), a(0));

    let mut sum: Vec<usize> = (0..n).map(b).collect();
    sum.push(z);
    cb.set_layout(AdderLayout { a: (0..n).map(a).collect(), b: (0..n).map(b).collect(), sum });
    Ok(cb.build()?)
}

/// Out-of-place logarithmic-depth carry-lookahead adder.
///
/// Generate bits land in `z`, propagate bits overwrite `b`, and the
/// propagate tree lives in ancillas that are uncomputed before the sum is
/// formed. `b` is restored at the end; the result is `z` (n + 1 bits).
pub fn gen_qcla(n: usize) -> Result<LogicalCircuit, BenchError> {
    if n < 2 {
        return Err(BenchError::TooNarrow { benchmark: BenchmarkKind::Qcla, n, min: 2 });
    }
    let a = |i: usize| i;
    let b = |i: usize| n + i;
    let z = |i: usize| 2 * n + i;
    let levels = floor_log2(n);

    // propagate[t][m]; level 0 is the b register after the first CNOT layer
    let mut next = 3 * n + 1;
    let mut propagate: Vec<Vec<usize>> = vec![(0..n).map(b).collect()];
    for t in 1..levels {
        let width = n >> t;
        let mut row = vec![usize::MAX; width];
        for slot in row.iter_mut().skip(1) {
            *slot = next;
            next += 1;
        }
        propagate.push(row);
    }

    let mut cb = CircuitBuilder::new(next);
    for i in 0..n {
        cb.toffoli(a(i), b(i), z(i + 1));
    }
    for i in 0..n {
        cb.cnot(a(i), b(i));
    }
    let p_rounds = |cb: &mut CircuitBuilder, forward: bool| {
        let order: Vec<usize> = if forward { (1..levels).collect() } else { (1..levels).rev().collect() };
        for t in order {
            for m in 1..(n >> t) {
                cb.toffoli(propagate[t - 1][2 * m], propagate[t - 1][2 * m + 1], propagate[t][m]);
            }
        }
    };
    p_rounds(&mut cb, true);
    // generate rounds
    for t in 1..=levels {
        let half = 1usize << (t - 1);
        for m in 0..(n >> t) {
            let base = m << t;
            cb.toffoli(z(base + half), propagate[t - 1][2 * m + 1], z(base + 2 * half));
        }
    }
    // carry rounds
    let mut c_levels = 0;
    while 3 * (1usize << (c_levels + 1)) <= 2 * n {
        c_levels += 1;
    }
    for t in (1..=c_levels).rev() {
        let half = 1usize << (t - 1);
        for m in 1..=((n - half) >> t) {
            let base = m << t;
            cb.toffoli(z(base), propagate[t - 1][2 * m], z(base + half));
        }
    }
    p_rounds(&mut cb, false);
    for i in 0..n {
        cb.cnot(b(i), z(i));
    }
    for i in 0..n {
        cb.cnot(a(i), b(i));
    }
    cb.set_layout(AdderLayout {
        a: (0..n).map(a).collect(),
        b: (0..n).map(b).collect(),
        sum: (0..=n).map(z).collect(),
    });
    Ok(cb.build()?)
}

/// Counts for the truncated QFT on `n` qubits: (controlled rotations,
/// single-qubit non-Clifford rotations after decomposition).
pub fn aqft_rotation_counts(n: usize, k_max: usize) -> (usize, usize) {
    let controlled: usize = (1..=k_max.min(n.saturating_sub(1))).map(|d| n - d).sum();
    (controlled, 2 * controlled)
}

/// Approximate QFT. Qubit `j` receives a Hadamard followed by controlled
/// rotations by `pi / 2^d` from qubits `j + d`, `d <= k_max`. Each controlled
/// rotation becomes two half-angle rotations on the target interleaved with
/// two CNOTs. A `pi/4` rotation is a single T; smaller angles become a
/// synthetic Clifford+T sequence of `seq_len` gates with `t_count` T gates.
pub fn gen_aqft(n: usize, params: AqftParams) -> Result<LogicalCircuit, BenchError> {
    if n == 0 {
        return Err(BenchError::TooNarrow { benchmark: BenchmarkKind::Aqft, n, min: 1 });
    }
    if params.k_max == 0 {
        return Err(BenchError::InvalidAqft("k_max must be positive".into()));
    }
    if params.t_count == 0 || params.t_count > params.seq_len {
        return Err(BenchError::InvalidAqft(format!(
            "need 0 < t_count <= seq_len, got t_count={} seq_len={}",
            params.t_count, params.seq_len
        )));
    }
    let mut cb = CircuitBuilder::new(n);
    for j in 0..n {
        cb.h(j);
        for d in 1..=params.k_max.min(n - 1 - j) {
            let control = j + d;
            // half of pi/2^d is pi/2^(d+1)
            rotation(&mut cb, j, d + 1, false, params);
            cb.cnot(control, j);
            rotation(&mut cb, j, d + 1, true, params);
            cb.cnot(control, j);
        }
    }
    Ok(cb.build()?)
}

fn rotation(cb: &mut CircuitBuilder, q: usize, angle_exp: usize, negative: bool, params: AqftParams) {
    let t_kind = |i: usize| if i.is_multiple_of(2) ^ negative { GateKind::T } else { GateKind::TDagger };
    if angle_exp <= 2 {
        cb.push(t_kind(0), &[q]);
        return;
    }
    let cliffords = params.seq_len - params.t_count;
    // T gates beyond `doubles` get one trailing Clifford; the first `doubles` get two
    let doubles = cliffords.saturating_sub(params.t_count).min(params.t_count);
    let mut placed = 0;
    for i in 0..params.t_count {
        cb.push(t_kind(i), &[q]);
        let want = if i < doubles { 2 } else { 1 };
        for c in 0..want {
            if placed < cliffords {
                cb.push(if c == 0 { GateKind::H } else { GateKind::Z }, &[q]);
                placed += 1;
            }
        }
    }
    while placed < cliffords {
        cb.push(GateKind::H, &[q]);
        placed += 1;
    }
}

/// Replaces each Toffoli and T/T-dagger by a magic-state preparation with no
/// data dependencies followed by a teleport of the operands into it.
pub fn expand_fault_tolerant(circuit: &LogicalCircuit) -> Result<LogicalCircuit, BenchError> {
    let mut cb = CircuitBuilder::new(circuit.n_qubits);
    let mut remap = vec![0usize; circuit.len()];
    for g in circuit.gates() {
        let extra: Vec<usize> = circuit.preds(g.id).iter().map(|&p| remap[p]).collect();
        remap[g.id] = match g.kind {
            GateKind::Toffoli => {
                let prep = cb.push(GateKind::PrepMagicToffoli, &[]);
                let mut deps = extra;
                deps.push(prep);
                cb.push_with_deps(GateKind::TeleportIntoMagic, &g.operands, &deps)
            }
            GateKind::T | GateKind::TDagger => {
                let prep = cb.push(GateKind::PrepMagicT, &[]);
                let mut deps = extra;
                deps.push(prep);
                cb.push_with_deps(GateKind::TeleportIntoMagic, &g.operands, &deps)
            }
            GateKind::X | GateKind::Z | GateKind::H | GateKind::CNOT | GateKind::Measure => {
                cb.push_with_deps(g.kind, &g.operands, &extra)
            }
            kind => return Err(BenchError::UnsupportedGate { id: g.id, kind }),
        };
    }
    if let Some(layout) = &circuit.layout {
        cb.set_layout(layout.clone());
    }
    Ok(cb.build()?)
}
