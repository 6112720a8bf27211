//! Composition of per-operation failure probabilities into a circuit
//! failure probability, split by noise source.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schedule::{NoiseSource, Schedule};

#[derive(Debug, Error, PartialEq)]
pub enum FailureError {
    #[error("op {index} has failure probability {p}, outside [0, 1)")]
    InvalidProbability { index: usize, p: f64 },
    #[error("no source contributes any failure probability")]
    NoDominantSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureReport {
    pub p_fail: f64,
    pub components: BTreeMap<NoiseSource, f64>,
    pub op_counts: BTreeMap<NoiseSource, usize>,
}

impl FailureReport {
    pub fn component(&self, source: NoiseSource) -> f64 {
        self.components.get(&source).copied().unwrap_or(0.0)
    }

    /// First-order share of each source: its component over the sum of all.
    pub fn shares(&self) -> BTreeMap<NoiseSource, f64> {
        let total: f64 = self.components.values().sum();
        self.components
            .iter()
            .map(|(&s, &p)| (s, if total > 0.0 { p / total } else { 0.0 }))
            .collect()
    }
}

/// `1 - prod(1 - p_i)` over an iterator of probabilities, accumulated in log
/// space so that terms near 1e-18 are not lost to rounding.
pub fn compose<I: IntoIterator<Item = f64>>(ps: I) -> f64 {
    let log_success: f64 = ps.into_iter().map(|p| (-p).ln_1p()).sum();
    -log_success.exp_m1()
}

/// Failure probability of a whole schedule, including idle memory exposure
/// and any inserted error-correction rounds.
pub fn circuit_failure(schedule: &Schedule) -> Result<FailureReport, FailureError> {
    let mut log_success: BTreeMap<NoiseSource, f64> = NoiseSource::ALL.iter().map(|&s| (s, 0.0)).collect();
    let mut op_counts: BTreeMap<NoiseSource, usize> = NoiseSource::ALL.iter().map(|&s| (s, 0)).collect();
    for (index, op) in schedule.ops.iter().enumerate() {
        let p = op.p_fail;
        if !(0.0..1.0).contains(&p) {
            return Err(FailureError::InvalidProbability { index, p });
        }
        *log_success.get_mut(&op.noise_source).expect("all sources present") += (-p).ln_1p();
        *op_counts.get_mut(&op.noise_source).expect("all sources present") += 1;
    }
    let total: f64 = log_success.values().sum();
    Ok(FailureReport {
        p_fail: -total.exp_m1(),
        components: log_success.into_iter().map(|(s, l)| (s, -l.exp_m1())).collect(),
        op_counts,
    })
}

/// The source with the largest component and its first-order share. Ties go
/// to the source listed first in [`NoiseSource::ALL`].
pub fn dominant_source(report: &FailureReport) -> Result<(NoiseSource, f64), FailureError> {
    let total: f64 = report.components.values().sum();
    if !(total > 0.0) {
        return Err(FailureError::NoDominantSource);
    }
    let mut best = (NoiseSource::ALL[0], report.component(NoiseSource::ALL[0]));
    for s in NoiseSource::ALL {
        let p = report.component(s);
        if p > best.1 {
            best = (s, p);
        }
    }
    Ok((best.0, best.1 / total))
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    use super::*;
    use crate::mapper::QubitMap;
    use crate::schedule::{CriticalPathBreakdown, Delays, OpRole, ScheduledOp};

    fn op(p: f64, source: NoiseSource) -> ScheduledOp {
        ScheduledOp {
            gate_id: None,
            qubit: None,
            role: OpRole::Gate,
            op_kind: None,
            segment: 0,
            row: 0,
            from_row: None,
            t_start_ready: 0.0,
            t_start_actual: 0.0,
            t_finish: 0.0,
            delays: Delays::default(),
            p_fail: p,
            noise_source: source,
        }
    }

    fn sched(ops: Vec<ScheduledOp>) -> Schedule {
        Schedule {
            ops,
            breakdown: CriticalPathBreakdown::default(),
            segment_rows: vec![0],
            initial_map: QubitMap { assignment: vec![] },
            final_map: QubitMap { assignment: vec![] },
            activity: vec![],
            ec_rounds: 0,
        }
    }

    fn report(components: [f64; 4]) -> FailureReport {
        FailureReport {
            p_fail: compose(components),
            components: NoiseSource::ALL.into_iter().zip(components).collect(),
            op_counts: BTreeMap::new(),
        }
    }

    #[test]
    fn composition_examples() {
        assert_eq!(circuit_failure(&sched(vec![])).unwrap().p_fail, 0.0);
        let two = sched(vec![op(0.5, NoiseSource::Gate), op(0.5, NoiseSource::Memory)]);
        assert_relative_eq!(circuit_failure(&two).unwrap().p_fail, 0.75, max_relative = 1e-12);
        let three = sched(vec![op(0.1, NoiseSource::Gate); 3]);
        let r = circuit_failure(&three).unwrap();
        assert_relative_eq!(r.p_fail, 0.271, max_relative = 1e-12);
        assert_eq!(r.op_counts[&NoiseSource::Gate], 3);
        assert_eq!(r.op_counts[&NoiseSource::Teleportation], 0);
    }

    #[test]
    fn tiny_probabilities_survive_composition() {
        let r = circuit_failure(&sched(vec![op(1e-18, NoiseSource::Shuttling); 1000])).unwrap();
        assert_relative_eq!(r.p_fail, 1e-15, max_relative = 1e-9);
    }

    #[test]
    fn out_of_range_probabilities_are_rejected() {
        for p in [1.0, -1e-3, f64::NAN] {
            let s = sched(vec![op(0.1, NoiseSource::Gate), op(p, NoiseSource::Gate)]);
            assert!(matches!(circuit_failure(&s), Err(FailureError::InvalidProbability { index: 1, .. })));
        }
    }

    #[test]
    fn dominant_source_examples() {
        let (s, share) = dominant_source(&report([0.0, 0.99e-7, 0.0, 0.01e-7])).unwrap();
        assert_eq!(s, NoiseSource::Teleportation);
        assert_relative_eq!(share, 0.99, max_relative = 1e-12);
        assert_eq!(dominant_source(&report([0.0, 0.0, 3e-9, 0.0])).unwrap(), (NoiseSource::Memory, 1.0));
        assert_eq!(dominant_source(&report([0.0; 4])), Err(FailureError::NoDominantSource));
    }

    proptest! {
        #[test]
        fn product_identity(ps in prop::collection::vec((0.0f64..0.2, 0usize..4), 0..60)) {
            let ops = ps.iter().map(|&(p, s)| op(p, NoiseSource::ALL[s])).collect();
            let r = circuit_failure(&sched(ops)).unwrap();
            let success: f64 = r.components.values().map(|c| 1.0 - c).product();
            prop_assert!(((1.0 - r.p_fail) - success).abs() <= 1e-12 * success.max(1e-300));
            let direct = 1.0 - ps.iter().map(|(p, _)| 1.0 - p).product::<f64>();
            prop_assert!((r.p_fail - direct).abs() <= 1e-12);
        }

        #[test]
        fn monotone_in_each_term(ps in prop::collection::vec(0.0f64..0.1, 1..30), i in 0usize..30, bump in 0.0f64..0.1) {
            let i = i % ps.len();
            let base = compose(ps.iter().copied());
            let mut up = ps.clone();
            up[i] += bump;
            prop_assert!(compose(up) >= base);
        }
    }
}
