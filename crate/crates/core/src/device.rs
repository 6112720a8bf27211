//! Physical device parameters and physical-level memory noise.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

/// Default qubit coherence time in microseconds when a parameter file omits it.
pub const DEFAULT_T_COH_US: f64 = 1.0e10;

#[derive(Debug, Error)]
pub enum DeviceError {
    #[error("negative duration {0} us")]
    NegativeTime(f64),
    #[error("device parameter `{field}` out of range: {value}")]
    OutOfRange { field: &'static str, value: f64 },
    #[error("malformed device parameter file: {0}")]
    Malformed(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Physical operation latencies (microseconds) and failure probabilities.
///
/// `p_gate` is shared by every gate class and measurement unless one of the
/// per-class overrides is set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DeviceParams<T = f64> {
    pub t_1q: T,
    pub t_2q: T,
    pub t_3q: T,
    pub t_meas: T,
    pub t_epr_gen: T,
    pub p_gate: T,
    pub p_epr: T,
    pub t_shutt_cell: T,
    pub t_shutt_tile: T,
    #[serde(default = "default_t_coh")]
    pub t_coh: T,
    /// Physical failure probability of moving an ion through one cell.
    #[serde(default = "default_p_shutt")]
    pub p_shutt: T,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_1q: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_2q: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_3q: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_meas: Option<T>,
}

fn default_t_coh<T: Scalar>() -> T {
    T::lit(DEFAULT_T_COH_US)
}

fn default_p_shutt<T: Scalar>() -> T {
    T::lit(1.0e-7)
}

impl<T: Scalar> DeviceParams<T> {
    /// Baseline trapped-ion parameters.
    pub fn baseline() -> Self {
        Self {
            t_1q: T::lit(1.0),
            t_2q: T::lit(10.0),
            t_3q: T::lit(100.0),
            t_meas: T::lit(100.0),
            t_epr_gen: T::lit(5000.0),
            p_gate: T::lit(1.0e-7),
            p_epr: T::lit(1.0e-4),
            t_shutt_cell: T::lit(1.0),
            t_shutt_tile: T::lit(60.0),
            t_coh: default_t_coh(),
            p_shutt: default_p_shutt(),
            p_1q: None,
            p_2q: None,
            p_3q: None,
            p_meas: None,
        }
    }

    pub fn p_1q(&self) -> T {
        self.p_1q.unwrap_or(self.p_gate)
    }
    pub fn p_2q(&self) -> T {
        self.p_2q.unwrap_or(self.p_gate)
    }
    pub fn p_3q(&self) -> T {
        self.p_3q.unwrap_or(self.p_gate)
    }
    pub fn p_meas(&self) -> T {
        self.p_meas.unwrap_or(self.p_gate)
    }

    /// Checks every duration is strictly positive and every probability lies in [0, 1).
    pub fn validate(&self) -> Result<(), DeviceError> {
        let durations = [
            ("t_1q", self.t_1q),
            ("t_2q", self.t_2q),
            ("t_3q", self.t_3q),
            ("t_meas", self.t_meas),
            ("t_epr_gen", self.t_epr_gen),
            ("t_shutt_cell", self.t_shutt_cell),
            ("t_shutt_tile", self.t_shutt_tile),
            ("t_coh", self.t_coh),
        ];
        for (field, v) in durations {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(DeviceError::OutOfRange { field, value: v.as_f64() });
            }
        }
        let probs = [
            ("p_gate", Some(self.p_gate)),
            ("p_epr", Some(self.p_epr)),
            ("p_shutt", Some(self.p_shutt)),
            ("p_1q", self.p_1q),
            ("p_2q", self.p_2q),
            ("p_3q", self.p_3q),
            ("p_meas", self.p_meas),
        ];
        for (field, v) in probs {
            if let Some(v) = v {
                if !(v >= T::zero() && v < T::one()) {
                    return Err(DeviceError::OutOfRange { field, value: v.as_f64() });
                }
            }
        }
        Ok(())
    }

    /// Scales every physical operation latency (gates, measurement, shuttling)
    /// but leaves EPR generation untouched.
    pub fn with_scaled_gate_times(mut self, factor: T) -> Self {
        self.t_1q *= factor;
        self.t_2q *= factor;
        self.t_3q *= factor;
        self.t_meas *= factor;
        self.t_shutt_cell *= factor;
        self.t_shutt_tile *= factor;
        self
    }
}

impl<T: Scalar> Default for DeviceParams<T> {
    fn default() -> Self {
        Self::baseline()
    }
}

/// Fidelity of an idle qubit after `t` microseconds: `exp(-t / t_coh)`.
pub fn memory_fidelity<T: Scalar>(t: T, params: &DeviceParams<T>) -> Result<T, DeviceError> {
    if t < T::zero() {
        return Err(DeviceError::NegativeTime(t.as_f64()));
    }
    Ok((-t / params.t_coh).exp())
}

/// Depolarizing error probability of an idle qubit after `t` microseconds.
///
/// Computed as `-expm1(-t/t_coh)` so tiny exposures keep full precision.
pub fn memory_error_prob<T: Scalar>(t: T, params: &DeviceParams<T>) -> Result<T, DeviceError> {
    if t < T::zero() {
        return Err(DeviceError::NegativeTime(t.as_f64()));
    }
    Ok(-(-t / params.t_coh).exp_m1())
}

/// The depolarizing channel splits an error equally over X, Z and Y.
pub fn depolarizing_components<T: Scalar>(p: T) -> [T; 3] {
    let third = p / T::lit(3.0);
    [third, third, third]
}

pub fn load_device_params<T: Scalar>(path: &Path) -> Result<DeviceParams<T>, DeviceError> {
    let text = std::fs::read_to_string(path)?;
    parse_device_params(&text)
}

pub fn parse_device_params<T: Scalar>(text: &str) -> Result<DeviceParams<T>, DeviceError> {
    let params: DeviceParams<T> =
        serde_json::from_str(text).map_err(|e| DeviceError::Malformed(e.to_string()))?;
    params.validate()?;
    Ok(params)
}

pub fn device_params_to_json<T: Scalar>(params: &DeviceParams<T>) -> String {
    serde_json::to_string_pretty(params).expect("device params serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn fidelity_examples() {
        let p = DeviceParams::<f64>::baseline();
        assert_eq!(memory_fidelity(0.0, &p).unwrap(), 1.0);
        assert_relative_eq!(memory_fidelity(p.t_coh, &p).unwrap(), (-1.0f64).exp());
        let q = DeviceParams { t_coh: 1.0e7, ..p };
        assert_relative_eq!(memory_fidelity(1.0e3, &q).unwrap(), 0.999_900_004_999_833_3, max_relative = 1e-15);
    }

    #[test]
    fn error_prob_examples() {
        let p = DeviceParams::<f64>::baseline();
        assert_eq!(memory_error_prob(0.0, &p).unwrap(), 0.0);
        assert_relative_eq!(memory_error_prob(p.t_coh * 2f64.ln(), &p).unwrap(), 0.5, max_relative = 1e-14);
        let q = DeviceParams { t_coh: 1.0e7, ..p };
        assert_relative_eq!(memory_error_prob(1.0e3, &q).unwrap(), 9.999_500_016_666e-5, max_relative = 1e-10);
    }

    #[test]
    fn negative_time_rejected() {
        let p = DeviceParams::<f64>::baseline();
        assert!(matches!(memory_fidelity(-1.0, &p), Err(DeviceError::NegativeTime(_))));
        assert!(matches!(memory_error_prob(-1.0, &p), Err(DeviceError::NegativeTime(_))));
    }

    #[test]
    fn baseline_file_and_defaults() {
        let text = r#"{"t_1q":1,"t_2q":10,"t_3q":100,"t_meas":100,"t_epr_gen":5000,
            "p_gate":1e-7,"p_epr":1e-4,"t_shutt_cell":1,"t_shutt_tile":60}"#;
        let p: DeviceParams = parse_device_params(text).unwrap();
        assert_eq!(p.t_2q, 10.0);
        assert_eq!(p.p_gate, 1e-7);
        assert_eq!(p.t_epr_gen, 5000.0);
        assert_eq!(p.p_epr, 1e-4);
        assert_eq!(p.t_coh, 1e10);
        assert_eq!(p, DeviceParams::baseline());

        let tuned = text.replace("1e-4", "1e-5");
        let p: DeviceParams = parse_device_params(&tuned).unwrap();
        assert_eq!(p.p_epr, 1e-5);
    }

    #[test]
    fn out_of_range_named() {
        let text = r#"{"t_1q":1,"t_2q":-10,"t_3q":100,"t_meas":100,"t_epr_gen":5000,
            "p_gate":1e-7,"p_epr":1e-4,"t_shutt_cell":1,"t_shutt_tile":60}"#;
        let err = parse_device_params::<f64>(text).unwrap_err();
        assert!(err.to_string().contains("t_2q"), "{err}");
        let text = text.replace("-10", "10").replace("1e-4", "1.5");
        let err = parse_device_params::<f64>(&text).unwrap_err();
        assert!(err.to_string().contains("p_epr"), "{err}");
        assert!(matches!(parse_device_params::<f64>("{"), Err(DeviceError::Malformed(_))));
    }

    #[test]
    fn works_in_single_precision() {
        let p = DeviceParams::<f32>::baseline();
        assert_eq!(memory_fidelity(0.0f32, &p).unwrap(), 1.0);
        assert!(memory_error_prob(1.0e3f32, &p).unwrap() > 0.0);
    }

    proptest::proptest! {
        #[test]
        fn fidelity_and_error_sum_to_one(t in 0.0f64..1.0e12) {
            let p = DeviceParams::<f64>::baseline();
            let f = memory_fidelity(t, &p).unwrap();
            let e = memory_error_prob(t, &p).unwrap();
            proptest::prop_assert!((f + e - 1.0).abs() <= 2.0 * f64::EPSILON);
        }

        #[test]
        fn error_composes_multiplicatively(t1 in 0.0f64..1.0e11, t2 in 0.0f64..1.0e11) {
            let p = DeviceParams::<f64>::baseline();
            let lhs = memory_fidelity(t1 + t2, &p).unwrap();
            let rhs = memory_fidelity(t1, &p).unwrap() * memory_fidelity(t2, &p).unwrap();
            proptest::prop_assert!(((lhs - rhs) / lhs).abs() <= 1e-12);
            proptest::prop_assert!(memory_error_prob(t1 + t2, &p).unwrap() >= memory_error_prob(t1, &p).unwrap());
        }

        #[test]
        fn json_round_trip(t2 in 0.1f64..1e3, pe in 0.0f64..0.5, coh in 1.0f64..1e12) {
            let p = DeviceParams { t_2q: t2, p_epr: pe, t_coh: coh, p_3q: Some(pe / 2.0), ..DeviceParams::baseline() };
            let back: DeviceParams = parse_device_params(&device_params_to_json(&p)).unwrap();
            proptest::prop_assert_eq!(p, back);
        }
    }
}
