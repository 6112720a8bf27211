//! Design-space sweeps and optimization over architecture configurations,
//! plus the Shor runtime estimate built on adder timings.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arch::{ArchConfig, CsConfig};
use crate::bench::BenchmarkSpec;
use crate::circuit::LogicalCircuit;
use crate::device::DeviceParams;
use crate::report::{prepare_circuit, run_circuit, PipelineError};
use crate::schedule::{CriticalPathBreakdown, NoiseSource};
use crate::tiles::TilePerfDatabase;

#[derive(Debug, Error, PartialEq)]
pub enum ExploreError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("no configuration in the grid fits a budget of {budget} qubits")]
    NoFeasibleConfig { budget: u64 },
    #[error("no adder call count is known for {0}-bit factoring (use 512, 1024 or 2048)")]
    UnsupportedShorBits(u32),
    #[error("durations must be finite and non-negative, got {0}")]
    InvalidDuration(f64),
}

/// Parameter ranges of a sweep. `n_seg = None` sizes each configuration to
/// the fewest segments whose data tiles hold the circuit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n_seg: Option<Vec<usize>>,
    pub n_cs: Vec<usize>,
    pub n_data: Vec<u32>,
    pub n_anc: Vec<u32>,
    pub n_comm: Vec<u32>,
}

impl Grid {
    /// The default optimizer search space: powers of two and a few
    /// intermediate tile counts, computational segments in a doubling ladder.
    pub fn search_default() -> Self {
        Self {
            n_seg: None,
            n_cs: (0..7).map(|k| 1 << k).collect(),
            n_data: vec![1, 2, 4, 8, 16, 24, 32, 48],
            n_anc: vec![1, 2, 4, 8, 16, 24],
            n_comm: vec![1, 2, 4, 8],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.n_cs.is_empty()
            || self.n_data.is_empty()
            || self.n_anc.is_empty()
            || self.n_comm.is_empty()
            || self.n_seg.as_ref().is_some_and(Vec::is_empty)
    }

    /// Every grid point as a configuration, sorted by [`config_key`] with
    /// duplicates removed. Points with more computational than total
    /// segments are skipped.
    pub fn configs(&self, n_qubits: usize, budget: u64, seg_cap: u64) -> Vec<ArchConfig> {
        let mut out = Vec::new();
        for &n_data in &self.n_data {
            for &n_anc in &self.n_anc {
                for &n_comm in &self.n_comm {
                    let cs = CsConfig::new(n_data, n_anc, n_comm);
                    for &n_cs in &self.n_cs {
                        let segs = match &self.n_seg {
                            Some(v) => v.clone(),
                            None => vec![minimal_segments(n_qubits, n_cs, cs)],
                        };
                        for n_seg in segs {
                            if n_cs >= 1 && n_cs <= n_seg {
                                out.push(ArchConfig::uniform(n_seg, n_cs, cs, seg_cap, budget));
                            }
                        }
                    }
                }
            }
        }
        out.sort_by_key(config_key);
        out.dedup();
        out
    }
}

/// Fewest segments (at least `n_cs`) whose data tiles hold `n_qubits`.
pub fn minimal_segments(n_qubits: usize, n_cs: usize, cs: CsConfig) -> usize {
    let in_cs = n_cs * cs.n_data as usize;
    if in_cs >= n_qubits {
        return n_cs.max(1);
    }
    let per_ss = cs.storage().n_data.max(1) as usize;
    n_cs + (n_qubits - in_cs).div_ceil(per_ss)
}

/// Lexicographic ordering key of a configuration.
pub fn config_key(c: &ArchConfig) -> (usize, usize, u32, u32, u32) {
    (c.n_seg, c.n_cs, c.cs_config.n_data, c.cs_config.n_anc, c.cs_config.n_comm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub t_total_us: f64,
    pub p_fail: f64,
    pub breakdown: CriticalPathBreakdown,
    pub components: BTreeMap<NoiseSource, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Outcome {
    Feasible(Metrics),
    Infeasible { violation: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub config: ArchConfig,
    pub qubit_count: u64,
    pub outcome: Outcome,
}

impl SweepRow {
    pub fn metrics(&self) -> Option<&Metrics> {
        match &self.outcome {
            Outcome::Feasible(m) => Some(m),
            Outcome::Infeasible { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

pub const CSV_COLUMNS: [&str; 21] = [
    "n_seg",
    "n_cs",
    "n_data",
    "n_anc",
    "n_comm",
    "ss_n_data",
    "ss_n_comm",
    "qubit_count",
    "feasible",
    "violation",
    "t_total_us",
    "p_fail",
    "t_anc",
    "t_shut",
    "t_tel",
    "t_swp",
    "t_gate",
    "p_shuttling",
    "p_teleportation",
    "p_memory",
    "p_gate",
];

impl SweepResult {
    pub fn feasible(&self) -> impl Iterator<Item = (&SweepRow, &Metrics)> {
        self.rows.iter().filter_map(|r| r.metrics().map(|m| (r, m)))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sweep serializes")
    }

    /// One row per configuration in [`CSV_COLUMNS`] order; metric cells are
    /// empty for infeasible rows.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_COLUMNS).expect("in-memory write");
        for r in &self.rows {
            let c = &r.config;
            let mut rec = vec![
                c.n_seg.to_string(),
                c.n_cs.to_string(),
                c.cs_config.n_data.to_string(),
                c.cs_config.n_anc.to_string(),
                c.cs_config.n_comm.to_string(),
                c.ss_config.n_data.to_string(),
                c.ss_config.n_comm.to_string(),
                r.qubit_count.to_string(),
            ];
            match &r.outcome {
                Outcome::Feasible(m) => {
                    let b = &m.breakdown;
                    rec.push("true".into());
                    rec.push(String::new());
                    for x in [m.t_total_us, m.p_fail, b.t_anc, b.t_shut, b.t_tel, b.t_swp, b.t_gate] {
                        rec.push(x.to_string());
                    }
                    for s in NoiseSource::ALL {
                        rec.push(m.components.get(&s).copied().unwrap_or(0.0).to_string());
                    }
                }
                Outcome::Infeasible { violation } => {
                    rec.push("false".into());
                    rec.push(violation.clone());
                    rec.extend(std::iter::repeat_n(String::new(), CSV_COLUMNS.len() - 10));
                }
            }
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv is utf-8")
    }
}

/// Runs the pipeline on every configuration, in parallel. Configurations
/// that cannot host the circuit become infeasible rows.
pub fn sweep_configs(
    circuit: &LogicalCircuit,
    configs: &[ArchConfig],
    db: &Arc<TilePerfDatabase>,
    params: &DeviceParams,
) -> SweepResult {
    let rows = configs
        .par_iter()
        .map(|cfg| {
            let outcome = match cfg.validate().map_err(PipelineError::from).and_then(|()| run_circuit(circuit, cfg, db.clone(), params)) {
                Ok(out) => Outcome::Feasible(Metrics {
                    t_total_us: out.schedule.t_total(),
                    p_fail: out.failure.p_fail,
                    breakdown: out.schedule.breakdown,
                    components: out.failure.components,
                }),
                Err(e) => Outcome::Infeasible { violation: e.to_string() },
            };
            SweepRow { config: cfg.clone(), qubit_count: crate::arch::qubit_count(cfg), outcome }
        })
        .collect();
    SweepResult { rows }
}

pub fn sweep(
    spec: &BenchmarkSpec,
    grid: &Grid,
    budget: u64,
    seg_cap: u64,
    db: &Arc<TilePerfDatabase>,
    params: &DeviceParams,
) -> Result<SweepResult, PipelineError> {
    if grid.is_empty() {
        return Ok(SweepResult { rows: Vec::new() });
    }
    let circuit = prepare_circuit(spec)?;
    let configs = grid.configs(circuit.n_qubits, budget, seg_cap);
    Ok(sweep_configs(&circuit, &configs, db, params))
}

/// Order used to pick the winner: shorter runtime, then fewer qubits, then
/// the lexicographically smaller configuration.
pub fn compare_rows(a: (&SweepRow, &Metrics), b: (&SweepRow, &Metrics)) -> Ordering {
    a.1.t_total_us
        .total_cmp(&b.1.t_total_us)
        .then(a.0.qubit_count.cmp(&b.0.qubit_count))
        .then(config_key(&a.0.config).cmp(&config_key(&b.0.config)))
}

pub fn best_row(result: &SweepResult) -> Option<(&SweepRow, &Metrics)> {
    result.feasible().min_by(|&a, &b| compare_rows(a, b))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub config: ArchConfig,
    pub qubit_count: u64,
    pub metrics: Metrics,
    pub evaluated: usize,
    pub feasible: usize,
}

pub fn optimize_over(
    spec: &BenchmarkSpec,
    grid: &Grid,
    budget: u64,
    seg_cap: u64,
    db: &Arc<TilePerfDatabase>,
    params: &DeviceParams,
) -> Result<Optimum, ExploreError> {
    let result = sweep(spec, grid, budget, seg_cap, db, params)?;
    let (row, m) = best_row(&result).ok_or(ExploreError::NoFeasibleConfig { budget })?;
    Ok(Optimum {
        config: row.config.clone(),
        qubit_count: row.qubit_count,
        metrics: m.clone(),
        evaluated: result.rows.len(),
        feasible: result.feasible().count(),
    })
}

pub fn optimize(
    spec: &BenchmarkSpec,
    budget: u64,
    seg_cap: u64,
    db: &Arc<TilePerfDatabase>,
    params: &DeviceParams,
) -> Result<Optimum, ExploreError> {
    optimize_over(spec, &Grid::search_default(), budget, seg_cap, db, params)
}

pub const SECONDS_PER_DAY: f64 = 86_400.0;
/// The five-month limit, taken as 16 million adder calls at 0.8 s each
/// (about 148 days) so that 0.8 s per call sits exactly on the boundary.
pub const FIVE_MONTHS_S: f64 = 16.0e6 * 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShorEstimate {
    pub n_bits: u32,
    pub adder_calls: u64,
    pub total_s: f64,
    pub total_days: f64,
    pub feasible_5_months: bool,
}

/// Adder calls made by modular exponentiation when factoring an `n_bits` number.
pub fn shor_adder_calls(n_bits: u32) -> Result<u64, ExploreError> {
    match n_bits {
        512 => Ok(1_000_000),
        1024 => Ok(4_000_000),
        2048 => Ok(16_000_000),
        n => Err(ExploreError::UnsupportedShorBits(n)),
    }
}

/// Total factoring time from one adder call and one AQFT, both in seconds.
pub fn estimate_shor_runtime(n_bits: u32, adder_s: f64, aqft_s: f64) -> Result<ShorEstimate, ExploreError> {
    for d in [adder_s, aqft_s] {
        if !(d.is_finite() && d >= 0.0) {
            return Err(ExploreError::InvalidDuration(d));
        }
    }
    let calls = shor_adder_calls(n_bits)?;
    let total_s = calls as f64 * adder_s + aqft_s;
    Ok(ShorEstimate {
        n_bits,
        adder_calls: calls,
        total_s,
        total_days: total_s / SECONDS_PER_DAY,
        feasible_5_months: total_s < FIVE_MONTHS_S,
    })
}
