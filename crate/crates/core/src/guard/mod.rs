//! Mitigations: authenticated message trailers and a command anomaly
//! detector.
//!
//! Authentication protects integrity, not confidentiality. A tampered
//! message is dropped and the receiver keeps its last accepted command, so
//! an attacker can still starve the receiver but can no longer steer it.

mod anomaly;
mod auth;

pub use anomaly::{
    anomaly_check, AnomalyConfig, AnomalyDetector, AnomalyKind, AnomalyReason, AnomalyVerdict, FieldLimit,
};
pub use auth::{
    tag_message, verify_message, AuthConfig, AuthVerdict, Authenticator, HmacSha256Tag, RejectReason,
    TagFunction, TAG_LEN,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GuardError {
    #[error("threshold for {0} must be positive and finite")]
    InvalidThreshold(String),
    #[error("authentication key must not be empty")]
    EmptyKey,
}
