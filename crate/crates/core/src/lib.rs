//! Personalized adaptive cruise control.
//!
//! - learn a driver's car-following cost from demonstrations
//!   ([`irl`], on top of [`trajectory`] and [`features`]);
//! - drive a semi-autonomous vehicle with that cost in a receding-horizon
//!   controller ([`control`]);
//! - evaluate the effect on a platoon of human-driven IDM vehicles
//!   ([`traffic`], [`evaluation`], [`scenario`]).

pub mod cli;
pub mod control;
pub mod cycle;
pub mod demo;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod irl;
pub mod numfmt;
pub mod optim;
pub mod scenario;
pub mod synthetic;
pub mod traffic;
pub mod trajectory;
pub mod types;

pub use control::{solve_step, Controller, ControllerConfig, PreviewWindow, StepOutcome};
pub use cycle::DrivingCycle;
pub use demo::{Demonstration, DemonstrationSegment, DemonstrationSet, SampledTrajectory};
pub use error::{PaccError, Result};
pub use evaluation::{FuelParams, Trace, TraceRow};
pub use irl::{learn, most_likely_segment, LearnedResult, LearningConfig};
pub use scenario::{compare, run, ComparisonReport, RunOutcome, ScenarioConfig, TrafficReport};
pub use traffic::{idm_accel, step_fleet, FleetState, IdmParams};
pub use trajectory::{Profile, QuinticSegment};
pub use types::{DriverModel, FeatureVector, VehicleState, Weights};
