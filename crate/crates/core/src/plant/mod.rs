//! Kinematic twins of the two robots and the monitor comparing them.

mod arm;
mod drive;
mod safety;

pub use arm::{joint_index, step_arm, ArmGoal, ArmState, TrajPoint, JOINT_NAMES, SHOULDER_PAN};
pub use drive::{normalize_angle, step_drive, DrivePose, Twist};
pub use safety::{
    evaluate_safety, format_nanos, ExclusionZone, PlantKind, SafetyEnvelope, SafetyReport, StateSeries, Violation,
    ViolationKind,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlantError {
    #[error("command contains a non-finite component")]
    NonFiniteCommand,
    #[error("trajectory has no points")]
    EmptyTrajectory,
    #[error("malformed goal: {0}")]
    BadGoal(String),
    #[error("state series are not sampled on the same grid")]
    GridMismatch,
    #[error("invalid envelope: {0}")]
    InvalidEnvelope(String),
}
