//! Fault detection and isolation for a three-tank hydraulic process.
//!
//! A seeded plant simulator feeds seven noisy sensors into state-variable
//! filters; five analytical redundancy relations turn the filtered signals
//! into residuals, which are checked against adaptive thresholds and a fuzzy
//! alarm index before an m-of-n persistence rule confirms a fault. The
//! signature matrix maps confirmed residuals to suspect variables.
//!
//! Everything is generic over the scalar type; the aliases below fix it to `f64`.

pub mod detector;
pub mod error;
pub mod filters;
pub mod fuzzy;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod pipeline;
pub mod plant;
pub mod residuals;
pub mod scalar;
pub mod threshold;

pub use detector::{DetectionMode, SystemVerdict};
pub use error::{Error, Result};
pub use plant::{Channel, FaultProfile, FaultSemantics};
pub use residuals::RESIDUAL_COUNT;
pub use scalar::Scalar;

pub type PlantParams = plant::PlantParams<f64>;
pub type PlantState = plant::PlantState<f64>;
pub type Inputs = plant::Inputs<f64>;
pub type InputProfile = plant::InputProfile<f64>;
pub type FaultSpec = plant::FaultSpec<f64>;
pub type NoiseConfig = plant::NoiseConfig<f64>;
pub type SensorFrame = plant::SensorFrame<f64>;
pub type ResidualVector = residuals::ResidualVector<f64>;
pub type ThresholdConfig = threshold::ThresholdConfig<f64>;
pub type InputPartition = fuzzy::InputPartition<f64>;
pub type OutputPartition = fuzzy::OutputPartition<f64>;
pub type AlarmIndex = fuzzy::AlarmIndex<f64>;
pub type DetectionVerdict = detector::DetectionVerdict<f64>;
pub type VariableStateMap = detector::VariableStateMap<f64>;
pub type PersistenceRule = detector::PersistenceRule<f64>;
pub type Scenario = harness::Scenario<f64>;
pub type DetectorSettings = harness::DetectorSettings<f64>;
pub type Calibration = harness::Calibration<f64>;
pub type RunLog = harness::RunLog<f64>;
pub type FalseAlarmReport = harness::FalseAlarmReport<f64>;
pub type Pipeline = pipeline::Pipeline<f64>;
pub type PipelineOutput = pipeline::PipelineOutput<f64>;
pub type Simulator = harness::Simulator<f64>;
