//! Resource and performance modelling for modular trapped-ion fault-tolerant
//! quantum computers: device parameters, logical tile calibration, benchmark
//! circuits, architecture layout, mapping, scheduling, failure analysis and
//! design-space exploration.
//!
//! The device and tile layers are generic over the floating-point scalar;
//! the aliases below fix it for the common cases.

pub mod arch;
pub mod bench;
pub mod circuit;
pub mod device;
pub mod explore;
pub mod failure;
pub mod mapper;
pub mod report;
pub mod scalar;
pub mod schedule;
pub mod tiles;
pub mod viz;

pub use arch::{build_machine, qubit_count, ArchConfig, ArchError, CsConfig, Machine};
pub use bench::{expand_fault_tolerant, BenchError, BenchmarkKind, BenchmarkSpec};
pub use circuit::LogicalCircuit;
pub use device::{DeviceError, DeviceParams};
pub use explore::{estimate_shor_runtime, optimize, sweep, ExploreError, Grid, ShorEstimate, SweepResult};
pub use failure::{circuit_failure, dominant_source, FailureError, FailureReport};
pub use mapper::{map_circuit, MapError, QubitMap};
pub use report::{run_benchmark, run_circuit, PipelineError, RunReport};
pub use scalar::Scalar;
pub use schedule::{insert_error_correction, schedule, NoiseSource, SchedError, Schedule};
pub use tiles::{calibrate_database, OpKind, TileError, TilePerfDatabase, TilePerfEntry, TileType};
pub use viz::render_timeline;

pub type DeviceParamsF64 = DeviceParams<f64>;
pub type DeviceParamsF32 = DeviceParams<f32>;
pub type TilePerfDatabaseF64 = TilePerfDatabase<f64>;
pub type TilePerfDatabaseF32 = TilePerfDatabase<f32>;
pub type TilePerfEntryF64 = TilePerfEntry<f64>;
pub type TilePerfEntryF32 = TilePerfEntry<f32>;
