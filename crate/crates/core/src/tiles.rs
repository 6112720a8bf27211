//! L2 tile composition and the per-logical-operation performance database.
//!
//! Every logical operation is described by two coefficient vectors over
//! physical operation classes. Latency is linear in the physical durations and
//! failure is a sum of malignant-pair terms, quadratic in the physical error
//! rates. The coefficients are fitted once against reference L2 numbers at the
//! baseline device point and then evaluated at any other device point.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::{memory_error_prob, DeviceParams};
use crate::scalar::Scalar;

/// Physical qubits in one L1 block (7 data + 15 ancilla).
pub const L1_BLOCK_QUBITS: u32 = 22;
/// Physical EPR pairs (and optical ports) attached to a Communication tile.
pub const COMM_EPR_QUBITS: u32 = 49;
pub const MAX_TILE_CELLS: u32 = 600;
/// Malignant pairs among the cell hops of one logical tile crossing (C(60, 2)).
pub const SHUTTLE_TILE_PAIRS: f64 = 1770.0;
pub const MAX_SWITCH_HEIGHT: u32 = 3;

#[derive(Debug, Error, PartialEq)]
pub enum TileError {
    #[error("infeasible calibration for {op:?}: physical terms exceed target by {excess} us")]
    InfeasibleLatency { op: OpKind, excess: f64 },
    #[error("infeasible calibration for {op:?}: fixed failure terms exceed target by {excess}")]
    InfeasibleFailure { op: OpKind, excess: f64 },
    #[error("calibration requires strictly positive baseline value for `{0}`")]
    NonPositiveBaseline(&'static str),
    #[error("operation {0:?} missing from tile database")]
    UnknownOp(OpKind),
    #[error("switch tree height {0} outside 1..=3")]
    HeightOutOfRange(u32),
    #[error("malformed tile database: {0}")]
    Malformed(String),
    #[error("negative idle time {0} us")]
    NegativeIdle(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TileType {
    Data,
    Ancilla,
    ErrorCorrection,
    Communication,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileSpec {
    pub tile_type: TileType,
    pub l1_tiles: u32,
    pub physical_qubits: u32,
    pub cells: u32,
}

pub fn build_tile(tile_type: TileType) -> TileSpec {
    let l1_tiles = match tile_type {
        TileType::Data => 7,
        TileType::Ancilla | TileType::ErrorCorrection => 15,
        TileType::Communication => 22,
    };
    let extra = if tile_type == TileType::Communication { COMM_EPR_QUBITS } else { 0 };
    let physical_qubits = l1_tiles * L1_BLOCK_QUBITS + extra;
    TileSpec {
        tile_type,
        l1_tiles,
        physical_qubits,
        // one cell per physical qubit plus a shuttling lane cell per L1 block
        cells: (physical_qubits + l1_tiles).min(MAX_TILE_CELLS),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OpKind {
    PauliXZ,
    Hadamard,
    CNOT,
    TransversalToffoli,
    CatStatePrep7,
    Measurement,
    L2ErrorCorrection,
    L1ErrorCorrection,
    PrepZeroPlus,
    PrepTMagic,
    PrepToffoliMagic,
    EPRGeneration,
    TeleportData,
    ShuttleTile,
}

impl OpKind {
    pub const ALL: [OpKind; 14] = [
        OpKind::PauliXZ,
        OpKind::Hadamard,
        OpKind::CNOT,
        OpKind::TransversalToffoli,
        OpKind::CatStatePrep7,
        OpKind::Measurement,
        OpKind::L2ErrorCorrection,
        OpKind::L1ErrorCorrection,
        OpKind::PrepZeroPlus,
        OpKind::PrepTMagic,
        OpKind::PrepToffoliMagic,
        OpKind::EPRGeneration,
        OpKind::TeleportData,
        OpKind::ShuttleTile,
    ];
}

/// Physical operation classes: keys of both coefficient maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PhysClass {
    #[serde(rename = "1q")]
    OneQubit,
    #[serde(rename = "2q")]
    TwoQubit,
    #[serde(rename = "3q")]
    ThreeQubit,
    #[serde(rename = "meas")]
    Measure,
    #[serde(rename = "epr")]
    Epr,
    #[serde(rename = "shutt_cell")]
    ShuttleCell,
    #[serde(rename = "shutt_tile")]
    ShuttleTile,
}

impl PhysClass {
    pub fn duration<T: Scalar>(self, p: &DeviceParams<T>) -> T {
        match self {
            PhysClass::OneQubit => p.t_1q,
            PhysClass::TwoQubit => p.t_2q,
            PhysClass::ThreeQubit => p.t_3q,
            PhysClass::Measure => p.t_meas,
            PhysClass::Epr => p.t_epr_gen,
            PhysClass::ShuttleCell => p.t_shutt_cell,
            PhysClass::ShuttleTile => p.t_shutt_tile,
        }
    }

    pub fn error_rate<T: Scalar>(self, p: &DeviceParams<T>) -> T {
        match self {
            PhysClass::OneQubit => p.p_1q(),
            PhysClass::TwoQubit => p.p_2q(),
            PhysClass::ThreeQubit => p.p_3q(),
            PhysClass::Measure => p.p_meas(),
            PhysClass::Epr => p.p_epr,
            PhysClass::ShuttleCell | PhysClass::ShuttleTile => p.p_shutt,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TilePerfEntry<T = f64> {
    pub op_kind: OpKind,
    pub latency_coeffs: BTreeMap<PhysClass, T>,
    pub fail_coeffs: BTreeMap<PhysClass, T>,
}

impl<T: Scalar> TilePerfEntry<T> {
    pub fn latency(&self, p: &DeviceParams<T>) -> T {
        self.latency_coeffs
            .iter()
            .fold(T::zero(), |acc, (k, c)| acc + *c * k.duration(p))
    }

    pub fn p_fail(&self, p: &DeviceParams<T>) -> T {
        self.fail_coeffs.iter().fold(T::zero(), |acc, (k, a)| {
            let e = k.error_rate(p);
            acc + *a * e * e
        })
    }

    fn scaled_add(&mut self, other: &Self, latency_mult: T, fail_mult: T) {
        for (k, c) in &other.latency_coeffs {
            *self.latency_coeffs.entry(*k).or_insert(T::zero()) += *c * latency_mult;
        }
        for (k, a) in &other.fail_coeffs {
            *self.fail_coeffs.entry(*k).or_insert(T::zero()) += *a * fail_mult;
        }
    }
}

/// Reference L2 tile numbers at baseline: (op, latency us excluding the EPR
/// generation time, failure probability).
pub const REFERENCE_TABLE: [(OpKind, f64, f64); 11] = [
    (OpKind::PauliXZ, 1.0, 1.15e-18),
    (OpKind::Hadamard, 4.0, 1.15e-18),
    (OpKind::CNOT, 10.0, 4.74e-18),
    (OpKind::TransversalToffoli, 4_210.0, 1.1e-17),
    (OpKind::CatStatePrep7, 6_500.0, 3.75e-18),
    (OpKind::Measurement, 11_900.0, 6.14e-17),
    (OpKind::L2ErrorCorrection, 48_900.0, 4.58e-16),
    (OpKind::PrepZeroPlus, 34_500.0, 1.6e-16),
    (OpKind::PrepTMagic, 78_100.0, 4.23e-16),
    (OpKind::EPRGeneration, 50_800.0, 1.08e-11),
    (OpKind::L1ErrorCorrection, 687.0, 1.66e-10),
];

/// Critical-path count of physical operations per class, in the order
/// (1q, 2q, 3q, meas, epr). Whatever latency the counted gates do not explain
/// is assigned to ion shuttling through cells.
const PHYSICAL_RECIPES: [(OpKind, [u32; 5]); 11] = [
    (OpKind::PauliXZ, [1, 0, 0, 0, 0]),
    (OpKind::Hadamard, [1, 0, 0, 0, 0]),
    (OpKind::CNOT, [0, 1, 0, 0, 0]),
    (OpKind::TransversalToffoli, [0, 14, 7, 2, 0]),
    (OpKind::CatStatePrep7, [7, 7, 0, 7, 0]),
    (OpKind::Measurement, [7, 0, 0, 7, 0]),
    (OpKind::L2ErrorCorrection, [14, 98, 0, 14, 0]),
    (OpKind::PrepZeroPlus, [7, 49, 0, 14, 0]),
    (OpKind::PrepTMagic, [14, 98, 0, 28, 0]),
    (OpKind::EPRGeneration, [7, 49, 0, 14, 1]),
    (OpKind::L1ErrorCorrection, [7, 14, 0, 2, 0]),
];

/// Ops composed from other entries: (component, latency multiplicity, failure multiplicity).
/// The Toffoli magic state uses four ancilla blocks prepared in parallel, then a
/// cat state, the transversal Toffoli, measurement and one L2 correction round.
pub const COMPOSITE_RECIPES: [(OpKind, &[(OpKind, u32, u32)]); 2] = [
    (
        OpKind::PrepToffoliMagic,
        &[
            (OpKind::PrepZeroPlus, 1, 4),
            (OpKind::CatStatePrep7, 1, 1),
            (OpKind::TransversalToffoli, 1, 1),
            (OpKind::Measurement, 1, 1),
            (OpKind::L2ErrorCorrection, 1, 1),
        ],
    ),
    (
        OpKind::TeleportData,
        &[(OpKind::CNOT, 1, 1), (OpKind::Measurement, 1, 1), (OpKind::PauliXZ, 1, 1)],
    ),
];

/// The non-EPR failure share of a logical EPR pair: one logical CNOT of the
/// 49 physical pairs plus the correction round that follows it.
const EPR_FIXED_FAIL_PARTS: [OpKind; 2] = [OpKind::CNOT, OpKind::L2ErrorCorrection];

const GATE_CLASSES: [PhysClass; 4] =
    [PhysClass::OneQubit, PhysClass::TwoQubit, PhysClass::ThreeQubit, PhysClass::Measure];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TilePerfDatabase<T = f64> {
    pub entries: BTreeMap<OpKind, TilePerfEntry<T>>,
    pub calibration_params: DeviceParams<T>,
    /// Human-readable record of how each coefficient vector was derived.
    pub procedure: Vec<String>,
}

/// Latency and failure of one logical operation at a device point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogicalPerf<T> {
    pub latency: T,
    pub p_fail: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EprPerf<T> {
    pub latency: T,
    /// The height-scaled photonic generation share of `latency`.
    pub generation: T,
    pub p_fail: T,
}

pub fn calibrate_database<T: Scalar>(
    baseline: &DeviceParams<T>,
) -> Result<TilePerfDatabase<T>, TileError> {
    for class in GATE_CLASSES.iter().chain(&[PhysClass::Epr, PhysClass::ShuttleCell]) {
        if !(class.duration(baseline) > T::zero()) {
            return Err(TileError::NonPositiveBaseline("duration"));
        }
        if !(class.error_rate(baseline) > T::zero()) {
            return Err(TileError::NonPositiveBaseline("error rate"));
        }
    }
    if !(baseline.t_shutt_tile > T::zero()) {
        return Err(TileError::NonPositiveBaseline("t_shutt_tile"));
    }

    let mut entries = BTreeMap::new();
    let mut procedure = Vec::new();
    let classes = [
        PhysClass::OneQubit,
        PhysClass::TwoQubit,
        PhysClass::ThreeQubit,
        PhysClass::Measure,
        PhysClass::Epr,
    ];

    for (op, counts) in PHYSICAL_RECIPES {
        let (_, base_latency, target_fail) =
            REFERENCE_TABLE.iter().copied().find(|r| r.0 == op).expect("reference row");
        let mut latency_coeffs = BTreeMap::new();
        let mut explained = T::zero();
        for (class, n) in classes.iter().zip(counts) {
            if n > 0 {
                let c = T::lit(n as f64);
                latency_coeffs.insert(*class, c);
                explained += c * class.duration(baseline);
            }
        }
        // the generation time is additive on top of the reference number
        let target_latency = T::lit(base_latency)
            + if counts[4] > 0 { baseline.t_epr_gen * T::lit(counts[4] as f64) } else { T::zero() };
        let residual = target_latency - explained;
        if residual < T::zero() {
            return Err(TileError::InfeasibleLatency { op, excess: (-residual).as_f64() });
        }
        if residual > T::zero() {
            latency_coeffs.insert(PhysClass::ShuttleCell, residual / baseline.t_shutt_cell);
        }

        let target_fail = T::lit(target_fail);
        let mut fail_coeffs = BTreeMap::new();
        let gate_fail = if counts[4] > 0 {
            let fixed = EPR_FIXED_FAIL_PARTS
                .iter()
                .map(|k| T::lit(REFERENCE_TABLE.iter().find(|r| r.0 == *k).unwrap().2))
                .fold(T::zero(), |a, b| a + b);
            let epr_part = target_fail - fixed;
            if epr_part < T::zero() {
                return Err(TileError::InfeasibleFailure { op, excess: (-epr_part).as_f64() });
            }
            let pe = baseline.p_epr;
            fail_coeffs.insert(PhysClass::Epr, epr_part / (pe * pe));
            fixed
        } else {
            target_fail
        };
        let gate_total: u32 = counts[..4].iter().sum();
        for (class, n) in GATE_CLASSES.iter().zip(&counts[..4]) {
            if *n > 0 {
                let share = gate_fail * T::lit(*n as f64) / T::lit(gate_total as f64);
                let p = class.error_rate(baseline);
                fail_coeffs.insert(*class, share / (p * p));
            }
        }
        procedure.push(format!(
            "{op:?}: counts 1q/2q/3q/meas/epr = {counts:?}; residual {} us assigned to cell shuttling; \
             failure {} split over gate classes by count{}",
            residual,
            target_fail,
            if counts[4] > 0 { ", EPR term = target minus CNOT and L2 correction" } else { "" }
        ));
        entries.insert(op, TilePerfEntry { op_kind: op, latency_coeffs, fail_coeffs });
    }

    for (op, parts) in COMPOSITE_RECIPES {
        let mut entry = TilePerfEntry {
            op_kind: op,
            latency_coeffs: BTreeMap::new(),
            fail_coeffs: BTreeMap::new(),
        };
        for (part, lm, fm) in parts {
            let component = entries.get(part).ok_or(TileError::UnknownOp(*part))?.clone();
            entry.scaled_add(&component, T::lit(*lm as f64), T::lit(*fm as f64));
        }
        procedure.push(format!("{op:?}: composed from {parts:?} (op, latency mult, failure mult)"));
        entries.insert(op, entry);
    }

    let mut shuttle = TilePerfEntry {
        op_kind: OpKind::ShuttleTile,
        latency_coeffs: BTreeMap::new(),
        fail_coeffs: BTreeMap::new(),
    };
    shuttle.latency_coeffs.insert(PhysClass::ShuttleTile, T::one());
    shuttle.fail_coeffs.insert(PhysClass::ShuttleTile, T::lit(SHUTTLE_TILE_PAIRS));
    procedure.push(format!(
        "ShuttleTile: one logical tile crossing; failure {SHUTTLE_TILE_PAIRS} malignant pairs of cell hops"
    ));
    entries.insert(OpKind::ShuttleTile, shuttle);

    Ok(TilePerfDatabase { entries, calibration_params: *baseline, procedure })
}

impl<T: Scalar> TilePerfDatabase<T> {
    pub fn entry(&self, op: OpKind) -> Result<&TilePerfEntry<T>, TileError> {
        self.entries.get(&op).ok_or(TileError::UnknownOp(op))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("database serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, TileError> {
        serde_json::from_str(text).map_err(|e| TileError::Malformed(e.to_string()))
    }
}

pub fn logical_perf<T: Scalar>(
    db: &TilePerfDatabase<T>,
    op: OpKind,
    params: &DeviceParams<T>,
) -> Result<LogicalPerf<T>, TileError> {
    let e = db.entry(op)?;
    Ok(LogicalPerf { latency: e.latency(params), p_fail: e.p_fail(params) })
}

/// Logical failure of a data tile left idle for `idle` microseconds between
/// correction rounds. The physical decay probability acts as a uniform error
/// rate on every location of an L2 correction round, so it is suppressed by
/// the same malignant-pair coefficients.
pub fn logical_memory_fail<T: Scalar>(
    db: &TilePerfDatabase<T>,
    params: &DeviceParams<T>,
    idle: T,
) -> Result<T, TileError> {
    let e = db.entry(OpKind::L2ErrorCorrection)?;
    let pairs = e.fail_coeffs.values().fold(T::zero(), |acc, a| acc + *a);
    let pm = memory_error_prob(idle, params).map_err(|_| TileError::NegativeIdle(idle.as_f64()))?;
    Ok(pairs * pm * pm)
}

/// Minimal switch-tree height reaching `n_seg` segments, 20 per leaf switch.
pub fn switch_height_for(n_seg: usize) -> u32 {
    let mut h = 1u32;
    let mut reach = 20usize;
    while reach < n_seg {
        h += 1;
        reach = reach.saturating_mul(20);
    }
    h
}

/// Logical EPR pair between two segments through a switch tree of `tree_height`.
/// Only the photonic generation share scales with `2^(h-1)`.
pub fn logical_epr_perf<T: Scalar>(
    db: &TilePerfDatabase<T>,
    params: &DeviceParams<T>,
    tree_height: u32,
) -> Result<EprPerf<T>, TileError> {
    if !(1..=MAX_SWITCH_HEIGHT).contains(&tree_height) {
        return Err(TileError::HeightOutOfRange(tree_height));
    }
    let e = db.entry(OpKind::EPRGeneration)?;
    let scale = T::lit(f64::from(1u32 << (tree_height - 1)));
    let gen_coeff = e.latency_coeffs.get(&PhysClass::Epr).copied().unwrap_or(T::zero());
    let generation = gen_coeff * params.t_epr_gen * scale;
    let fixed = e.latency(params) - gen_coeff * params.t_epr_gen;
    Ok(EprPerf { latency: generation + fixed, generation, p_fail: e.p_fail(params) })
}
