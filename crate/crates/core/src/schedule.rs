//! Resource-constrained list scheduling of a fault-tolerant gate stream onto
//! a [`Machine`], with critical-path attribution and idle-time error
//! correction.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arch::Machine;
use crate::circuit::{GateKind, LogicalCircuit, LogicalGate};
use crate::mapper::QubitMap;
use crate::tiles::{logical_epr_perf, logical_memory_fail, logical_perf, EprPerf, OpKind, TileError};

#[derive(Debug, Error, PartialEq)]
pub enum SchedError {
    #[error("gate {id}: {kind:?} must be expanded before scheduling")]
    NotExpanded { id: usize, kind: GateKind },
    #[error("gate {0}: teleport has no magic-state preparation among its predecessors")]
    MissingMagicPrep(usize),
    #[error("qubit {0} has no valid placement")]
    UnmappedQubit(usize),
    #[error("qubits {0} and {1} share a data tile")]
    SharedTile(usize, usize),
    #[error("machine has no computational segment with ancilla tiles")]
    NoComputationalSegment,
    #[error("gate {id} needs {needed} operands in one computational segment, which holds {available} data tiles")]
    CsTooSmall { id: usize, needed: usize, available: usize },
    #[error("error-correction threshold must be positive and finite, got {0}")]
    InvalidThreshold(f64),
    #[error(transparent)]
    Tile(#[from] TileError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NoiseSource {
    Shuttling,
    Teleportation,
    Memory,
    Gate,
}

impl NoiseSource {
    pub const ALL: [NoiseSource; 4] =
        [NoiseSource::Shuttling, NoiseSource::Teleportation, NoiseSource::Memory, NoiseSource::Gate];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OpRole {
    /// A logical gate of the circuit; only these drive the critical path.
    Gate,
    MagicPrep,
    Shuttle,
    Teleport,
    Swap,
    /// Idle exposure of a data qubit or a waiting magic state.
    Idle,
    ErrorCorrection,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Delays {
    pub d_anc: f64,
    pub d_shut: f64,
    pub d_tel: f64,
    pub d_swp: f64,
}

impl Delays {
    pub fn total(&self) -> f64 {
        self.d_anc + self.d_shut + self.d_tel + self.d_swp
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduledOp {
    pub gate_id: Option<usize>,
    pub qubit: Option<usize>,
    pub role: OpRole,
    pub op_kind: Option<OpKind>,
    pub segment: usize,
    /// Data-tile row the op lands on (visualisation coordinate).
    pub row: usize,
    /// Row the critical operand came from when it crossed segments.
    pub from_row: Option<usize>,
    pub t_start_ready: f64,
    pub t_start_actual: f64,
    pub t_finish: f64,
    pub delays: Delays,
    pub p_fail: f64,
    pub noise_source: NoiseSource,
}

impl ScheduledOp {
    pub fn latency(&self) -> f64 {
        self.t_finish - self.t_start_actual
    }

    fn aux(role: OpRole, source: NoiseSource, start: f64, finish: f64, p_fail: f64) -> Self {
        Self {
            gate_id: None,
            qubit: None,
            role,
            op_kind: None,
            segment: 0,
            row: 0,
            from_row: None,
            t_start_ready: start,
            t_start_actual: start,
            t_finish: finish,
            delays: Delays::default(),
            p_fail,
            noise_source: source,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CriticalPathBreakdown {
    pub t_anc: f64,
    pub t_shut: f64,
    pub t_tel: f64,
    pub t_swp: f64,
    pub t_gate: f64,
    pub t_total: f64,
}

impl CriticalPathBreakdown {
    pub fn component_sum(&self) -> f64 {
        self.t_anc + self.t_shut + self.t_tel + self.t_swp + self.t_gate
    }
}

/// Splits the extension of the critical path caused by `op` over the delay
/// classes and the gate execution, in proportion to their share of the op.
pub fn update_critical_path(mut b: CriticalPathBreakdown, op: &ScheduledOp) -> CriticalPathBreakdown {
    if !(op.t_finish > b.t_total) {
        return b;
    }
    let dt = op.t_finish - b.t_total;
    let exec = op.latency();
    let d = &op.delays;
    let denom = d.total() + exec;
    if denom > 0.0 {
        let share = |x: f64| x / denom * dt;
        let (a, s, t, w) = (share(d.d_anc), share(d.d_shut), share(d.d_tel), share(d.d_swp));
        b.t_anc += a;
        b.t_shut += s;
        b.t_tel += t;
        b.t_swp += w;
        b.t_gate += dt - (a + s + t + w);
    } else {
        b.t_gate += dt;
    }
    b.t_total = op.t_finish;
    b
}

/// A window during which a logical qubit is inside a gate or in flight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Activity {
    pub start: f64,
    pub end: f64,
    pub segment: usize,
    pub row: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub ops: Vec<ScheduledOp>,
    pub breakdown: CriticalPathBreakdown,
    /// First data-tile row of each segment; the last entry is the row count.
    pub segment_rows: Vec<usize>,
    pub initial_map: QubitMap,
    pub final_map: QubitMap,
    /// Per logical qubit, busy windows in time order.
    pub activity: Vec<Vec<Activity>>,
    pub ec_rounds: usize,
}

impl Schedule {
    pub fn t_total(&self) -> f64 {
        self.breakdown.t_total
    }

    pub fn n_rows(&self) -> usize {
        self.segment_rows.last().copied().unwrap_or(0)
    }

    pub fn gate_ops(&self) -> impl Iterator<Item = &ScheduledOp> {
        self.ops.iter().filter(|o| o.role == OpRole::Gate)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("schedule serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

fn gate_op_kind(g: &LogicalGate) -> Result<OpKind, SchedError> {
    Ok(match g.kind {
        GateKind::X | GateKind::Z => OpKind::PauliXZ,
        GateKind::H => OpKind::Hadamard,
        GateKind::CNOT => OpKind::CNOT,
        GateKind::Measure => OpKind::Measurement,
        GateKind::PrepMagicT => OpKind::PrepTMagic,
        GateKind::PrepMagicToffoli => OpKind::PrepToffoliMagic,
        GateKind::TeleportIntoMagic => OpKind::TeleportData,
        GateKind::ECRound => OpKind::L2ErrorCorrection,
        kind @ (GateKind::Toffoli | GateKind::T | GateKind::TDagger) => {
            return Err(SchedError::NotExpanded { id: g.id, kind })
        }
    })
}

/// Logical latency and failure per op kind at the machine's parameters.
struct Costs {
    lat: Vec<f64>,
    p: Vec<f64>,
}

impl Costs {
    fn new(machine: &Machine) -> Result<Self, SchedError> {
        let mut lat = vec![0.0; OpKind::ALL.len()];
        let mut p = vec![0.0; OpKind::ALL.len()];
        for op in OpKind::ALL {
            let perf = logical_perf(&machine.db, op, &machine.params)?;
            lat[op as usize] = perf.latency;
            p[op as usize] = perf.p_fail;
        }
        Ok(Self { lat, p })
    }

    fn lat(&self, op: OpKind) -> f64 {
        self.lat[op as usize]
    }

    fn p(&self, op: OpKind) -> f64 {
        self.p[op as usize]
    }
}

#[derive(PartialEq)]
struct Ready {
    r: f64,
    downstream: f64,
    id: usize,
}

impl Eq for Ready {}

impl Ord for Ready {
    // max-heap: earliest ready time, then longest downstream path, then lowest id
    fn cmp(&self, o: &Self) -> Ordering {
        o.r.total_cmp(&self.r).then(self.downstream.total_cmp(&o.downstream)).then(o.id.cmp(&self.id))
    }
}

impl PartialOrd for Ready {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

struct Sim<'a> {
    m: &'a Machine,
    costs: Costs,
    epr: Vec<EprPerf<f64>>,
    row_base: Vec<usize>,
    /// Home data tile of each qubit; visitors return here after their gate.
    home: Vec<(usize, usize)>,
    /// Home owner of each data tile; unowned tiles host visitors.
    owner: Vec<Vec<Option<usize>>>,
    /// For unowned tiles, when the last visitor leaves.
    visit_free: Vec<Vec<f64>>,
    qubit_free: Vec<f64>,
    factories: Vec<Vec<f64>>,
    channels: Vec<Vec<f64>>,
    activity: Vec<Vec<Activity>>,
    ops: Vec<ScheduledOp>,
}

struct Arrival {
    time: f64,
    swap: bool,
    from_row: usize,
    /// Visitor tile taken in the target segment, if the stay is temporary.
    visit: Option<usize>,
}

impl<'a> Sim<'a> {
    fn row(&self, (seg, slot): (usize, usize)) -> usize {
        self.row_base[seg] + slot
    }

    fn epr_for(&self, a: usize, b: usize) -> &EprPerf<f64> {
        &self.epr[self.m.switch_levels_between(a, b) as usize - 1]
    }

    fn earliest(slots: &[f64]) -> usize {
        let mut best = 0;
        for (i, &t) in slots.iter().enumerate() {
            if t < slots[best] {
                best = i;
            }
        }
        best
    }

    /// Reserves one communication channel at each end; returns when the
    /// logical EPR pair is ready and the channels used.
    fn reserve_epr(&mut self, a: usize, b: usize, request: f64) -> (f64, usize, usize) {
        let ca = Self::earliest(&self.channels[a]);
        let cb = Self::earliest(&self.channels[b]);
        let start = request.max(self.channels[a][ca]).max(self.channels[b][cb]);
        let ready = start + self.epr_for(a, b).latency;
        self.channels[a][ca] = ready;
        self.channels[b][cb] = ready;
        (ready, ca, cb)
    }

    fn release(&mut self, a: usize, ca: usize, b: usize, cb: usize, t: f64) {
        self.channels[a][ca] = t;
        self.channels[b][cb] = t;
    }

    /// Unowned tiles of `seg`, soonest free first, ties to the tile nearest the ancillas.
    fn visitor_tiles(&self, seg: usize) -> Vec<usize> {
        let mut v: Vec<usize> = (0..self.owner[seg].len()).filter(|&k| self.owner[seg][k].is_none()).collect();
        v.sort_by(|&a, &b| self.visit_free[seg][a].total_cmp(&self.visit_free[seg][b]).then(b.cmp(&a)));
        v
    }

    fn teleport_record(&mut self, q: usize, role: OpRole, ready: f64, start: f64, finish: f64, from: (usize, usize), to: (usize, usize)) {
        let p = self.epr_for(from.0, to.0).p_fail + self.costs.p(OpKind::TeleportData);
        let mut op = ScheduledOp::aux(role, NoiseSource::Teleportation, start, finish, p);
        op.t_start_ready = ready;
        op.qubit = Some(q);
        op.op_kind = Some(OpKind::EPRGeneration);
        op.segment = to.0;
        op.row = self.row(to);
        op.from_row = Some(self.row(from));
        self.ops.push(op);
        let row = self.row(to);
        self.activity[q].push(Activity { start, end: finish, segment: to.0, row });
    }

    /// Teleports `q` into `target`. A free visitor tile gives a temporary
    /// stay; a segment without one forces a swap of homes with the least
    /// recently used resident that is not an operand.
    fn bring(&mut self, gid: usize, q: usize, target: usize, r: f64, operands: &[usize], taken: &[usize]) -> Result<Arrival, SchedError> {
        let src = self.home[q];
        let l_tel = self.costs.lat(OpKind::TeleportData);
        let from_row = self.row(src);
        if let Some(k) = self.visitor_tiles(target).into_iter().find(|k| !taken.contains(k)) {
            let (e, ca, cb) = self.reserve_epr(src.0, target, r);
            let start = e.max(self.visit_free[target][k]);
            let arrival = start + l_tel;
            self.release(src.0, ca, target, cb, arrival);
            self.visit_free[target][k] = f64::INFINITY;
            self.teleport_record(q, OpRole::Teleport, r, start, arrival, src, (target, k));
            return Ok(Arrival { time: arrival, swap: false, from_row, visit: Some(k) });
        }
        let victim = self.owner[target]
            .iter()
            .enumerate()
            .filter_map(|(k, o)| o.map(|v| (k, v)))
            .filter(|(_, v)| !operands.contains(v))
            .min_by(|a, b| self.qubit_free[a.1].total_cmp(&self.qubit_free[b.1]).then(a.1.cmp(&b.1)));
        let Some((vk, v)) = victim else {
            return Err(SchedError::CsTooSmall { id: gid, needed: operands.len(), available: self.owner[target].len() });
        };
        let (e1, ca1, cb1) = self.reserve_epr(src.0, target, r);
        let (e2, ca2, cb2) = self.reserve_epr(target, src.0, r);
        let v_start = e2.max(self.qubit_free[v]);
        let v_done = v_start + l_tel;
        let q_start = e1.max(v_done);
        let arrival = q_start + l_tel;
        self.release(src.0, ca1, target, cb1, arrival);
        self.release(target, ca2, src.0, cb2, v_done);
        self.owner[src.0][src.1] = Some(v);
        self.owner[target][vk] = Some(q);
        self.home[v] = src;
        self.home[q] = (target, vk);
        self.qubit_free[v] = v_done;
        self.teleport_record(v, OpRole::Swap, r, v_start, v_done, (target, vk), src);
        self.teleport_record(q, OpRole::Swap, r, q_start, arrival, src, (target, vk));
        Ok(Arrival { time: arrival, swap: true, from_row, visit: None })
    }

    /// Estimated time all operands could be gathered in `target`.
    fn gather_estimate(&self, target: usize, operands: &[usize], r: f64) -> f64 {
        let l_tel = self.costs.lat(OpKind::TeleportData);
        let visitors = self.visitor_tiles(target);
        let mut next_visitor = visitors.iter();
        let tgt_ch = self.channels[target][Self::earliest(&self.channels[target])];
        let mut done = r;
        for &q in operands {
            let src = self.home[q].0;
            if src == target {
                continue;
            }
            let src_ch = self.channels[src][Self::earliest(&self.channels[src])];
            let e = r.max(src_ch).max(tgt_ch) + self.epr_for(src, target).latency;
            let t = match next_visitor.next() {
                Some(&k) => e.max(self.visit_free[target][k]) + l_tel,
                None => e + 2.0 * l_tel,
            };
            done = done.max(t);
        }
        done
    }

    /// Computational segment where the operands and a magic state can meet
    /// first; ties go to the segment already holding more operands, then the
    /// lower id.
    fn choose_cs(&self, gid: usize, operands: &[usize], r: f64, prep: OpKind) -> Result<usize, SchedError> {
        let count = |s: usize| operands.iter().filter(|&&q| self.home[q].0 == s).count();
        let mut best: Option<(f64, usize, usize)> = None;
        for s in self.m.segments.iter().filter(|s| s.is_computational() && s.n_anc > 0) {
            if (s.n_data as usize) < operands.len() {
                continue;
            }
            let f = &self.factories[s.id];
            let state = f[Self::earliest(f)] + self.costs.lat(prep);
            let est = self.gather_estimate(s.id, operands, r).max(state);
            let c = count(s.id);
            let better = match best {
                None => true,
                Some((be, bc, _)) => est < be || (est == be && c > bc),
            };
            if better {
                best = Some((est, c, s.id));
            }
        }
        if let Some(b) = best {
            return Ok(b.2);
        }
        let widest = self.m.segments.iter().filter(|s| s.is_computational() && s.n_anc > 0).map(|s| s.n_data as usize).max();
        Err(match widest {
            Some(available) => SchedError::CsTooSmall { id: gid, needed: operands.len(), available },
            None => SchedError::NoComputationalSegment,
        })
    }

    fn shuttle_record(&mut self, q: usize, at: (usize, usize), start: f64, hops: usize) {
        if hops == 0 {
            return;
        }
        let t = self.m.params.t_shutt_tile * hops as f64;
        let p = self.costs.p(OpKind::ShuttleTile) * hops as f64;
        let mut op = ScheduledOp::aux(OpRole::Shuttle, NoiseSource::Shuttling, start, start + t, p);
        op.qubit = Some(q);
        op.op_kind = Some(OpKind::ShuttleTile);
        op.segment = at.0;
        op.row = self.row(at);
        self.ops.push(op);
    }

    fn magic_gate(&mut self, g: &LogicalGate, op_kind: OpKind, prep_id: usize, prep_kind: OpKind, r: f64) -> Result<(ScheduledOp, Vec<(usize, usize)>), SchedError> {
        let t_tile = self.m.params.t_shutt_tile;
        let mut delays = Delays::default();
        let mut from_row = None;
        let target = self.choose_cs(g.id, &g.operands, r, prep_kind)?;
        let n_data = self.owner[target].len();
        let k = Self::earliest(&self.factories[target]);
        let prep_start = self.factories[target][k];
        let state_ready = prep_start + self.costs.lat(prep_kind);
        let l_tel = self.costs.lat(OpKind::TeleportData);
        let mut gather = r;
        let mut at = Vec::with_capacity(g.operands.len());
        let mut visits = Vec::new();
        for &q in &g.operands {
            if self.home[q].0 == target {
                at.push(self.home[q]);
                continue;
            }
            // no point holding channels and a visitor tile before the magic state exists
            let lead = self.epr_for(self.home[q].0, target).latency + l_tel;
            let request = r.max(state_ready - lead);
            let taken: Vec<usize> = visits.iter().map(|&(_, k)| k).collect();
            let a = self.bring(g.id, q, target, request, &g.operands, &taken)?;
            match a.visit {
                Some(k) => {
                    visits.push((q, k));
                    at.push((target, k));
                }
                None => at.push(self.home[q]),
            }
            if a.time > gather {
                gather = a.time;
                from_row = Some(a.from_row);
                delays.d_tel = if a.swap { 0.0 } else { a.time - request };
                delays.d_swp = if a.swap { a.time - request } else { 0.0 };
            }
        }
        // states are handed over at the border of the ancilla bank, next to the last data tile
        let anc_pos = n_data;
        let mut max_hops = 0;
        for (&q, &pos) in g.operands.iter().zip(&at) {
            let hops = pos.1.abs_diff(anc_pos);
            max_hops = max_hops.max(hops);
            self.shuttle_record(q, pos, gather, hops);
        }
        delays.d_shut = t_tile * max_hops as f64;
        let t_actual = (gather + delays.d_shut).max(state_ready);
        // whatever is not transfer or shuttling was spent waiting for the state
        delays.d_anc = t_actual - r - delays.d_tel - delays.d_swp - delays.d_shut;
        let finish = t_actual + self.costs.lat(op_kind);
        self.factories[target][k] = finish;

        let mut p = ScheduledOp::aux(OpRole::MagicPrep, NoiseSource::Gate, prep_start, state_ready, self.costs.p(prep_kind));
        p.gate_id = Some(prep_id);
        p.op_kind = Some(prep_kind);
        p.segment = target;
        p.row = self.row_base[target];
        self.ops.push(p);
        if t_actual > state_ready {
            let wait = t_actual - state_ready;
            let p_wait = queued_state_p(wait, self.costs.lat(OpKind::L2ErrorCorrection), self.m)?;
            let mut idle = ScheduledOp::aux(OpRole::Idle, NoiseSource::Memory, state_ready, t_actual, p_wait);
            idle.segment = target;
            idle.row = self.row_base[target];
            self.ops.push(idle);
        }
        let op = ScheduledOp {
            gate_id: Some(g.id),
            qubit: g.operands.first().copied(),
            role: OpRole::Gate,
            op_kind: Some(op_kind),
            segment: target,
            row: self.row(at[0]),
            from_row,
            t_start_ready: r,
            t_start_actual: t_actual,
            t_finish: finish,
            delays,
            p_fail: self.costs.p(op_kind),
            noise_source: NoiseSource::Gate,
        };
        Ok((op, at))
    }

    /// Visitors go home once the gate is done; the return pair is generated
    /// while the gate runs.
    fn send_home(&mut self, q: usize, from: (usize, usize), t_actual: f64, finish: f64) {
        let home = self.home[q];
        let (e, ca, cb) = self.reserve_epr(from.0, home.0, t_actual);
        let start = finish.max(e);
        let done = start + self.costs.lat(OpKind::TeleportData);
        self.release(from.0, ca, home.0, cb, done);
        self.visit_free[from.0][from.1] = done;
        self.qubit_free[q] = done;
        self.teleport_record(q, OpRole::Teleport, finish, start, done, from, home);
    }

    /// Schedules one gate whose dependencies are met at `r`; returns its record.
    fn run_gate(&mut self, g: &LogicalGate, op_kind: OpKind, prep: Option<(usize, OpKind)>, r: f64) -> Result<ScheduledOp, SchedError> {
        let (op, at) = match prep {
            Some((prep_id, prep_kind)) => self.magic_gate(g, op_kind, prep_id, prep_kind, r)?,
            None => self.plain_gate(g, op_kind, r),
        };
        for (&q, &pos) in g.operands.iter().zip(&at) {
            self.qubit_free[q] = op.t_finish;
            let row = self.row(pos);
            self.activity[q].push(Activity { start: op.t_start_actual, end: op.t_finish, segment: pos.0, row });
            if pos != self.home[q] {
                self.send_home(q, pos, op.t_start_actual, op.t_finish);
            }
        }
        Ok(op)
    }

    /// Clifford gates run where their operands live; a two-qubit gate across
    /// segments is done remotely through one EPR pair.
    fn plain_gate(&mut self, g: &LogicalGate, op_kind: OpKind, r: f64) -> (ScheduledOp, Vec<(usize, usize)>) {
        let at: Vec<(usize, usize)> = g.operands.iter().map(|&q| self.home[q]).collect();
        let mut delays = Delays::default();
        let mut from_row = None;
        let mut kind = op_kind;
        let t_actual;
        let last = *at.last().expect("gates have operands");
        if at.len() == 2 && at[0].0 == at[1].0 {
            let hops = at[0].1.abs_diff(at[1].1);
            self.shuttle_record(g.operands[0], at[0], r, hops);
            delays.d_shut = self.m.params.t_shutt_tile * hops as f64;
            t_actual = r + delays.d_shut;
        } else if at.len() == 2 {
            kind = OpKind::TeleportData;
            let (a, b) = (at[0], at[1]);
            let (e, ca, cb) = self.reserve_epr(a.0, b.0, r);
            delays.d_tel = e - r;
            t_actual = e;
            self.release(a.0, ca, b.0, cb, e + self.costs.lat(kind));
            let mut op = ScheduledOp::aux(OpRole::Teleport, NoiseSource::Teleportation, r, e, self.epr_for(a.0, b.0).p_fail);
            op.qubit = Some(g.operands[0]);
            op.op_kind = Some(OpKind::EPRGeneration);
            op.segment = b.0;
            op.row = self.row(b);
            op.from_row = Some(self.row(a));
            self.ops.push(op);
            from_row = Some(self.row(a));
        } else {
            t_actual = r;
        }
        let op = ScheduledOp {
            gate_id: Some(g.id),
            qubit: g.operands.first().copied(),
            role: OpRole::Gate,
            op_kind: Some(kind),
            segment: last.0,
            row: self.row(last),
            from_row,
            t_start_ready: r,
            t_start_actual: t_actual,
            t_finish: t_actual + self.costs.lat(kind),
            delays,
            p_fail: self.costs.p(kind),
            noise_source: NoiseSource::Gate,
        };
        (op, at)
    }
}

fn memory_p(t: f64, m: &Machine) -> Result<f64, SchedError> {
    Ok(logical_memory_fail(&m.db, &m.params, t.max(0.0))?)
}

/// A prepared magic state waiting in its ancilla tile is kept corrected by
/// the tile's own blocks once per `interval`, so it decays in windows.
fn queued_state_p(wait: f64, interval: f64, m: &Machine) -> Result<f64, SchedError> {
    let full = (wait / interval).floor();
    let rest = wait - full * interval;
    let per = memory_p(interval, m)?;
    let log_ok = full * (-per).ln_1p() + (-memory_p(rest, m)?).ln_1p();
    Ok(-log_ok.exp_m1())
}

fn validate_map(circuit: &LogicalCircuit, machine: &Machine, map: &QubitMap) -> Result<Vec<Vec<Option<usize>>>, SchedError> {
    let mut occupant: Vec<Vec<Option<usize>>> =
        machine.segments.iter().map(|s| vec![None; s.n_data as usize]).collect();
    for q in 0..circuit.n_qubits {
        let &(seg, slot) = map.assignment.get(q).ok_or(SchedError::UnmappedQubit(q))?;
        let cell = occupant.get_mut(seg).and_then(|s| s.get_mut(slot)).ok_or(SchedError::UnmappedQubit(q))?;
        if let Some(other) = cell.replace(q) {
            return Err(SchedError::SharedTile(other, q));
        }
    }
    Ok(occupant)
}

/// Upper bounds on the ancilla tiles and communication channels a schedule
/// may use in each segment. Leaving tiles idle is always allowed, so a
/// capped schedule is valid on the full machine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ResourceCaps {
    pub anc: u32,
    pub comm: u32,
}

impl ResourceCaps {
    pub const NONE: ResourceCaps = ResourceCaps { anc: u32::MAX, comm: u32::MAX };
}

/// 1, 2, 4, ... below `max`, then `max` itself, largest first.
fn cap_ladder(max: u32) -> Vec<u32> {
    let mut v: Vec<u32> = std::iter::successors(Some(1u32), |&c| c.checked_mul(2)).take_while(|&c| c < max).collect();
    v.push(max.max(1));
    v.reverse();
    v
}

/// Schedules every gate of a fault-tolerantly expanded circuit, trying the
/// full machine and every cap on ancilla and channel use along a doubling
/// ladder, and keeps the shortest schedule (ties go to the larger caps).
/// Greedy list scheduling can get slower when given more resources; the
/// capped runs guard against that.
pub fn schedule(circuit: &LogicalCircuit, machine: &Machine, map: &QubitMap) -> Result<Schedule, SchedError> {
    let full = schedule_with_caps(circuit, machine, map, ResourceCaps::NONE)?;
    let max_anc = machine.segments.iter().map(|s| s.n_anc).max().unwrap_or(0);
    let max_comm = machine.segments.iter().map(|s| s.n_comm).max().unwrap_or(1);
    let caps: Vec<ResourceCaps> = cap_ladder(max_anc)
        .into_iter()
        .flat_map(|anc| cap_ladder(max_comm).into_iter().map(move |comm| ResourceCaps { anc, comm }))
        .skip(1)
        .collect();
    // reduce keeps at most a few schedules alive; earlier candidates win ties
    let pick = |best: Schedule, s: Schedule| if s.t_total() < best.t_total() { s } else { best };
    let tried = caps
        .par_iter()
        .filter_map(|&c| schedule_with_caps(circuit, machine, map, c).ok())
        .reduce_with(pick);
    Ok(match tried {
        Some(s) => pick(full, s),
        None => full,
    })
}

/// One list-scheduling pass. Ready gates are taken in order of ready time,
/// then longest remaining downstream latency, then gate id. Magic states are
/// prefabricated by each ancilla tile as soon as it is free and handed out
/// first come, first served.
pub fn schedule_with_caps(circuit: &LogicalCircuit, machine: &Machine, map: &QubitMap, caps: ResourceCaps) -> Result<Schedule, SchedError> {
    let occupant = validate_map(circuit, machine, map)?;
    let costs = Costs::new(machine)?;
    let epr = (1..=machine.switch_height)
        .map(|h| logical_epr_perf(&machine.db, &machine.params, h))
        .collect::<Result<Vec<_>, _>>()?;

    let gates = circuit.gates();
    let mut kinds = Vec::with_capacity(gates.len());
    for g in gates {
        kinds.push(gate_op_kind(g)?);
    }
    let mut prep_of: Vec<Option<(usize, OpKind)>> = vec![None; gates.len()];
    for g in gates.iter().filter(|g| g.kind == GateKind::TeleportIntoMagic) {
        let p = circuit
            .preds(g.id)
            .iter()
            .copied()
            .find(|&p| gates[p].kind.is_magic_prep())
            .ok_or(SchedError::MissingMagicPrep(g.id))?;
        prep_of[g.id] = Some((p, kinds[p]));
    }

    let succ = circuit.successors();
    let mut downstream = vec![0.0f64; gates.len()];
    for g in gates.iter().rev() {
        let tail = succ[g.id].iter().map(|&s| downstream[s]).fold(0.0, f64::max);
        downstream[g.id] = costs.lat(kinds[g.id]) + tail;
    }

    let mut row_base = Vec::with_capacity(machine.segments.len() + 1);
    let mut acc = 0;
    for s in &machine.segments {
        row_base.push(acc);
        acc += s.n_data as usize;
    }
    row_base.push(acc);

    let visit_free = occupant.iter().map(|s| vec![0.0; s.len()]).collect();
    let mut sim = Sim {
        m: machine,
        costs,
        epr,
        row_base,
        home: map.assignment[..circuit.n_qubits].to_vec(),
        owner: occupant,
        visit_free,
        qubit_free: vec![0.0; circuit.n_qubits],
        factories: machine
            .segments
            .iter()
            .map(|s| if s.is_computational() { vec![0.0; s.n_anc.min(caps.anc.max(1)) as usize] } else { Vec::new() })
            .collect(),
        channels: machine.segments.iter().map(|s| vec![0.0; s.n_comm.min(caps.comm).max(1) as usize]).collect(),
        activity: vec![Vec::new(); circuit.n_qubits],
        ops: Vec::with_capacity(gates.len() * 2),
    };

    let mut remaining: Vec<usize> = (0..gates.len()).map(|i| circuit.preds(i).len()).collect();
    let mut finish = vec![0.0f64; gates.len()];
    let mut heap = BinaryHeap::new();
    for (i, &n) in remaining.iter().enumerate() {
        if n == 0 {
            heap.push(Ready { r: 0.0, downstream: downstream[i], id: i });
        }
    }
    let mut breakdown = CriticalPathBreakdown::default();
    while let Some(Ready { r, id, .. }) = heap.pop() {
        let g = &gates[id];
        if !g.kind.is_magic_prep() {
            let r_q = g.operands.iter().map(|&q| sim.qubit_free[q]).fold(r, f64::max);
            if r_q > r {
                heap.push(Ready { r: r_q, downstream: downstream[id], id });
                continue;
            }
            let op = sim.run_gate(g, kinds[id], prep_of[id], r)?;
            breakdown = update_critical_path(breakdown, &op);
            finish[id] = op.t_finish;
            sim.ops.push(op);
        }
        // preparations are placed when their teleport consumes them
        for &s in &succ[id] {
            remaining[s] -= 1;
            if remaining[s] == 0 {
                let r_s = circuit.preds(s).iter().map(|&p| finish[p]).fold(0.0, f64::max);
                heap.push(Ready { r: r_s, downstream: downstream[s], id: s });
            }
        }
    }

    for a in &mut sim.activity {
        a.sort_by(|x, y| x.start.total_cmp(&y.start));
    }
    let mut schedule = Schedule {
        ops: sim.ops,
        breakdown,
        segment_rows: sim.row_base,
        initial_map: QubitMap { assignment: map.assignment[..circuit.n_qubits].to_vec() },
        final_map: QubitMap { assignment: sim.home },
        activity: sim.activity,
        ec_rounds: 0,
    };
    add_idle_records(&mut schedule, machine, None)?;
    Ok(schedule)
}

struct Gap {
    qubit: usize,
    start: f64,
    end: f64,
    segment: usize,
    row: usize,
}

fn idle_gaps(s: &Schedule) -> Vec<Gap> {
    let mut gaps = Vec::new();
    let t_total = s.t_total();
    for (q, acts) in s.activity.iter().enumerate() {
        let (seg, slot) = s.initial_map.assignment[q];
        let (mut segment, mut row) = (seg, s.segment_rows[seg] + slot);
        let mut prev_end = 0.0f64;
        for a in acts {
            if a.start > prev_end {
                gaps.push(Gap { qubit: q, start: prev_end, end: a.start, segment, row });
            }
            prev_end = prev_end.max(a.end);
            segment = a.segment;
            row = a.row;
        }
        if t_total > prev_end {
            gaps.push(Gap { qubit: q, start: prev_end, end: t_total, segment, row });
        }
    }
    gaps
}

/// Replaces data-qubit idle and error-correction records. `ec` carries the
/// round threshold, duration and failure; `None` leaves idle gaps
/// uncorrected. Each stretch of a gap between rounds is one memory window.
fn add_idle_records(s: &mut Schedule, m: &Machine, ec: Option<(f64, f64, f64)>) -> Result<(), SchedError> {
    s.ops.retain(|o| !(o.role == OpRole::ErrorCorrection || (o.role == OpRole::Idle && o.qubit.is_some())));
    let gaps = idle_gaps(s);
    let mut rounds_in: Vec<Vec<(f64, f64)>> = vec![Vec::new(); gaps.len()];
    let mut rounds = 0;
    if let Some((threshold, duration, p_ec)) = ec {
        let mut per_segment: Vec<Vec<usize>> = vec![Vec::new(); s.segment_rows.len().saturating_sub(1)];
        for (i, g) in gaps.iter().enumerate() {
            per_segment[g.segment].push(i);
        }
        for (segment, idx) in per_segment.iter().enumerate() {
            let mut heap = BinaryHeap::new();
            let mut left = vec![0usize; gaps.len()];
            for &i in idx {
                let g = &gaps[i];
                left[i] = ((g.end - g.start) / threshold).floor() as usize;
                if left[i] > 0 {
                    heap.push(Ready { r: g.start, downstream: 0.0, id: i });
                }
            }
            let mut ec_free = 0.0f64;
            // rounds requested in nominal time order share the single EC tile
            while let Some(Ready { r: nominal, id: i, .. }) = heap.pop() {
                let g = &gaps[i];
                let t = nominal.max(ec_free);
                if t + duration > g.end {
                    continue;
                }
                ec_free = t + duration;
                rounds_in[i].push((t, t + duration));
                left[i] -= 1;
                rounds += 1;
                let mut op = ScheduledOp::aux(OpRole::ErrorCorrection, NoiseSource::Gate, t, t + duration, p_ec);
                op.qubit = Some(g.qubit);
                op.op_kind = Some(OpKind::L2ErrorCorrection);
                op.segment = segment;
                op.row = g.row;
                s.ops.push(op);
                if left[i] > 0 {
                    heap.push(Ready { r: (nominal + threshold).max(t + duration), downstream: 0.0, id: i });
                }
            }
        }
    }
    for (g, rs) in gaps.iter().zip(&mut rounds_in) {
        rs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut from = g.start;
        for (a, b) in rs.iter().copied().chain([(g.end, g.end)]) {
            if a > from {
                let mut op = ScheduledOp::aux(OpRole::Idle, NoiseSource::Memory, from, a, memory_p(a - from, m)?);
                op.qubit = Some(g.qubit);
                op.segment = g.segment;
                op.row = g.row;
                s.ops.push(op);
            }
            from = b;
        }
    }
    s.ec_rounds = rounds;
    Ok(())
}

/// Inserts L2 error-correction rounds on idle data qubits. A gap of `k`
/// thresholds requests `k` rounds, the first at the start of the gap; the
/// requests of one segment are served in time order by its EC tile. The
/// threshold and round duration default to one L2 EC latency.
pub fn insert_error_correction(schedule: &Schedule, machine: &Machine) -> Result<Schedule, SchedError> {
    let ec = logical_perf(&machine.db, OpKind::L2ErrorCorrection, &machine.params)?;
    insert_error_correction_with(schedule, machine, ec.latency)
}

pub fn insert_error_correction_with(schedule: &Schedule, machine: &Machine, threshold: f64) -> Result<Schedule, SchedError> {
    if !(threshold > 0.0 && threshold.is_finite()) {
        return Err(SchedError::InvalidThreshold(threshold));
    }
    let ec = logical_perf(&machine.db, OpKind::L2ErrorCorrection, &machine.params)?;
    let mut out = schedule.clone();
    add_idle_records(&mut out, machine, Some((threshold, ec.latency, ec.p_fail)))?;
    Ok(out)
}
