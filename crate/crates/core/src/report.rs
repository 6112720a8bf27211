//! The end-to-end pipeline: generate, expand, map, schedule, insert error
//! correction and analyze failure, with errors tagged by stage.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arch::{build_machine, qubit_count, ArchConfig, ArchError, CsConfig};
use crate::bench::{expand_fault_tolerant, BenchError, BenchmarkSpec};
use crate::circuit::LogicalCircuit;
use crate::device::{device_params_to_json, DeviceParams};
use crate::failure::{circuit_failure, dominant_source, FailureError, FailureReport};
use crate::mapper::{map_circuit, MapError};
use crate::schedule::{insert_error_correction, schedule, CriticalPathBreakdown, NoiseSource, SchedError, Schedule};
use crate::tiles::TilePerfDatabase;

#[derive(Debug, Error, PartialEq)]
pub enum PipelineError {
    #[error("generation stage: {0}")]
    Generate(#[source] BenchError),
    #[error("expansion stage: {0}")]
    Expand(#[source] BenchError),
    #[error("architecture stage: {0}")]
    Arch(#[from] ArchError),
    #[error("mapping stage: {0}")]
    Map(#[from] MapError),
    #[error("scheduling stage: {0}")]
    Schedule(#[from] SchedError),
    #[error("analysis stage: {0}")]
    Analyze(#[from] FailureError),
}

impl PipelineError {
    /// Whether the configuration simply cannot host the circuit, as opposed
    /// to malformed input.
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            PipelineError::Arch(ArchError::BudgetExceeded { .. } | ArchError::SegmentCapExceeded { .. } | ArchError::TooManySegments { .. })
                | PipelineError::Map(MapError::InsufficientDataTiles { .. })
                | PipelineError::Schedule(SchedError::CsTooSmall { .. } | SchedError::NoComputationalSegment)
        )
    }
}

/// Largest probability kept when clamping out-of-range op failure terms.
pub const MAX_OP_PROBABILITY: f64 = 1.0 - f64::EPSILON;

/// Everything one pipeline run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub schedule: Schedule,
    pub failure: FailureReport,
    pub qubit_count: u64,
    pub warnings: Vec<String>,
}

/// Generates and fault-tolerantly expands a benchmark.
pub fn prepare_circuit(spec: &BenchmarkSpec) -> Result<LogicalCircuit, PipelineError> {
    let raw = spec.generate().map_err(PipelineError::Generate)?;
    expand_fault_tolerant(&raw).map_err(PipelineError::Expand)
}

/// Maps, schedules, inserts error correction and analyzes an expanded circuit.
pub fn run_circuit(
    circuit: &LogicalCircuit,
    cfg: &ArchConfig,
    db: Arc<TilePerfDatabase>,
    params: &DeviceParams,
) -> Result<RunOutput, PipelineError> {
    let machine = build_machine(cfg, db)?.with_params(*params);
    let map = map_circuit(circuit, &machine)?;
    let plain = schedule(circuit, &machine, &map)?;
    let mut sched = insert_error_correction(&plain, &machine)?;
    let mut warnings = Vec::new();
    let mut clamped = 0usize;
    for op in &mut sched.ops {
        if op.p_fail.is_nan() {
            continue;
        }
        let p = op.p_fail.clamp(0.0, MAX_OP_PROBABILITY);
        if p != op.p_fail {
            op.p_fail = p;
            clamped += 1;
        }
    }
    if clamped > 0 {
        warnings.push(format!("{clamped} op failure probabilities clamped into [0, 1)"));
    }
    let failure = circuit_failure(&sched)?;
    Ok(RunOutput { schedule: sched, failure, qubit_count: qubit_count(cfg), warnings })
}

/// A single computational segment when the circuit fits under the cap,
/// otherwise as few equal segments as the cap allows.
pub fn default_arch(n_qubits: usize, seg_qubit_cap: u64) -> ArchConfig {
    let shape = |n_data: u32| CsConfig::new(n_data.max(1), 8, 2);
    let fits = |n_data: u32| ArchConfig::uniform(1, 1, shape(n_data), seg_qubit_cap, u64::MAX).cs_qubits() <= seg_qubit_cap;
    let want = u32::try_from(n_qubits.max(1)).unwrap_or(u32::MAX);
    let n_data = (1..=want).rev().find(|&d| fits(d)).unwrap_or(1);
    let n_seg = n_qubits.max(1).div_ceil(n_data as usize);
    ArchConfig::uniform(n_seg, n_seg, shape(n_data), seg_qubit_cap, u64::MAX)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceDigest {
    pub params: DeviceParams,
    /// FNV-1a hash of the canonical JSON encoding, for quick comparison.
    pub fnv64: String,
}

impl DeviceDigest {
    pub fn of(params: &DeviceParams) -> Self {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in device_params_to_json(params).bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        Self { params: *params, fnv64: format!("{h:016x}") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub benchmark: BenchmarkSpec,
    pub n_logical_qubits: usize,
    pub n_gates: usize,
    pub arch: ArchConfig,
    pub qubit_count: u64,
    pub device: DeviceDigest,
    pub t_total_us: f64,
    pub breakdown: CriticalPathBreakdown,
    pub failure: FailureReport,
    pub dominant_source: Option<(NoiseSource, f64)>,
    pub ec_rounds: usize,
    pub tool_version: String,
    pub wall_clock_s: f64,
    pub warnings: Vec<String>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Runs the whole pipeline for one benchmark on one configuration. `arch`
/// defaults to [`default_arch`] under `seg_qubit_cap`.
pub fn run_benchmark(
    spec: &BenchmarkSpec,
    arch: Option<&ArchConfig>,
    seg_qubit_cap: u64,
    db: Arc<TilePerfDatabase>,
    params: &DeviceParams,
) -> Result<(RunReport, Schedule), PipelineError> {
    let start = Instant::now();
    let circuit = prepare_circuit(spec)?;
    let cfg = arch.cloned().unwrap_or_else(|| default_arch(circuit.n_qubits, seg_qubit_cap));
    let out = run_circuit(&circuit, &cfg, db, params)?;
    let report = RunReport {
        benchmark: *spec,
        n_logical_qubits: circuit.n_qubits,
        n_gates: circuit.len(),
        qubit_count: out.qubit_count,
        device: DeviceDigest::of(params),
        t_total_us: out.schedule.t_total(),
        breakdown: out.schedule.breakdown,
        dominant_source: dominant_source(&out.failure).ok(),
        failure: out.failure,
        ec_rounds: out.schedule.ec_rounds,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_clock_s: start.elapsed().as_secs_f64(),
        warnings: out.warnings,
        arch: cfg,
    };
    Ok((report, out.schedule))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::BenchmarkKind;
    use crate::tiles::calibrate_database;

    fn db() -> Arc<TilePerfDatabase> {
        Arc::new(calibrate_database(&DeviceParams::baseline()).unwrap())
    }

    #[test]
    fn small_aqft_runs_in_one_segment_without_teleports() {
        let spec = BenchmarkSpec::new(BenchmarkKind::Aqft, 8);
        let (r, _) = run_benchmark(&spec, None, crate::arch::LARGE_SEGMENT_CAP, db(), &DeviceParams::baseline()).unwrap();
        assert_eq!(r.arch.n_seg, 1);
        assert_eq!(r.breakdown.t_tel, 0.0);
        assert!(r.t_total_us > 0.0);
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn zero_bits_is_a_generation_error() {
        let spec = BenchmarkSpec::new(BenchmarkKind::Qrca, 0);
        let e = run_benchmark(&spec, None, crate::arch::LARGE_SEGMENT_CAP, db(), &DeviceParams::baseline()).unwrap_err();
        assert!(matches!(e, PipelineError::Generate(_)));
        assert!(e.to_string().starts_with("generation stage"));
        assert!(!e.is_infeasible());
    }

    #[test]
    fn over_budget_is_infeasible() {
        let spec = BenchmarkSpec::new(BenchmarkKind::Qrca, 4);
        let cfg = ArchConfig::uniform(2, 1, CsConfig::new(8, 2, 1), crate::arch::LARGE_SEGMENT_CAP, 1000);
        let e = run_benchmark(&spec, Some(&cfg), cfg.seg_qubit_cap, db(), &DeviceParams::baseline()).unwrap_err();
        assert!(e.is_infeasible());
    }

    #[test]
    fn default_arch_respects_the_cap() {
        for n in [1, 8, 40, 300, 5000] {
            for cap in [crate::arch::SMALL_SEGMENT_CAP, crate::arch::LARGE_SEGMENT_CAP] {
                let cfg = default_arch(n, cap);
                cfg.validate().unwrap();
                assert!(cfg.data_capacity() >= n);
            }
        }
    }

    #[test]
    fn digest_is_stable_and_sensitive() {
        let a = DeviceDigest::of(&DeviceParams::baseline());
        assert_eq!(a, DeviceDigest::of(&DeviceParams::baseline()));
        let mut p = DeviceParams::baseline();
        p.p_epr = 1e-5;
        assert_ne!(a.fnv64, DeviceDigest::of(&p).fnv64);
    }
}
