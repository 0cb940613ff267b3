use crate::wire::{FieldPath, FieldValue};

use super::GuardError;

/// Limits for one monitored Float64 field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldLimit {
    pub path: FieldPath,
    /// Largest allowed |change| relative to the last accepted message.
    pub max_step: Option<f64>,
    /// Inclusive absolute bounds.
    pub bounds: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnomalyConfig {
    pub limits: Vec<FieldLimit>,
}

impl AnomalyConfig {
    pub fn validate(&self) -> Result<(), GuardError> {
        for l in &self.limits {
            let path = l.path.to_string();
            if let Some(s) = l.max_step {
                if !(s.is_finite() && s > 0.0) {
                    return Err(GuardError::InvalidThreshold(path));
                }
            }
            if let Some((lo, hi)) = l.bounds {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(GuardError::InvalidThreshold(path));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnomalyKind {
    OutOfBounds,
    StepChange,
    Missing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyReason {
    pub path: String,
    pub kind: AnomalyKind,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AnomalyVerdict {
    Accept,
    Reject(AnomalyReason),
}

pub fn anomaly_check(cfg: &AnomalyConfig, prev: Option<&FieldValue>, candidate: &FieldValue) -> AnomalyVerdict {
    for limit in &cfg.limits {
        let reject = |kind, value| {
            AnomalyVerdict::Reject(AnomalyReason {
                path: limit.path.to_string(),
                kind,
                value,
            })
        };
        let Some(v) = limit.path.get(candidate).and_then(FieldValue::as_f64) else {
            return reject(AnomalyKind::Missing, f64::NAN);
        };
        if let (Some(step), Some(p)) = (
            limit.max_step,
            prev.and_then(|p| limit.path.get(p)).and_then(FieldValue::as_f64),
        ) {
            if !((v - p).abs() <= step) {
                return reject(AnomalyKind::StepChange, v);
            }
        }
        if let Some((lo, hi)) = limit.bounds {
            if !(lo <= v && v <= hi) {
                return reject(AnomalyKind::OutOfBounds, v);
            }
        }
    }
    AnomalyVerdict::Accept
}

/// Stateful detector: compares each candidate with the last accepted value.
#[derive(Debug, Clone)]
pub struct AnomalyDetector {
    cfg: AnomalyConfig,
    last_accepted: Option<FieldValue>,
    pub accepted: u64,
    pub rejected: u64,
}

impl AnomalyDetector {
    pub fn new(cfg: AnomalyConfig) -> Self {
        AnomalyDetector {
            cfg,
            last_accepted: None,
            accepted: 0,
            rejected: 0,
        }
    }

    pub fn check(&mut self, candidate: &FieldValue) -> AnomalyVerdict {
        let verdict = anomaly_check(&self.cfg, self.last_accepted.as_ref(), candidate);
        match verdict {
            AnomalyVerdict::Accept => {
                self.accepted += 1;
                self.last_accepted = Some(candidate.clone());
            }
            AnomalyVerdict::Reject(_) => self.rejected += 1,
        }
        verdict
    }
}
