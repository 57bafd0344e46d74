//! Timing-offset-aware channel estimation and reflection design for
//! multi-RIS links whose surfaces are not symbol-synchronized.

pub mod channel;
pub mod config;
pub mod crlb;
pub mod design;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod linalg;
pub mod pulse;

pub use channel::{CascadedChannel, ChannelSet, MmWaveParams, UraGeometry};
pub use config::SystemConfig;
pub use crlb::CrlbResult;
pub use design::{DesignInputs, DesignOptions, DesignProblem, DesignResult, ReflectionVector};
pub use error::{Error, Result};
pub use estimator::{EstimationResult, MleOptions, TrainingPattern};
pub use harness::{Algorithm, ExperimentSpec, OffsetModel, Scenario, SweepRow};
pub use pulse::{PulseConfig, SteeringMatrix, WindowMatrix};
