use crate::wire::{FieldPath, FieldValue, MessageSchema};

use super::AttackError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MutationAction {
    Set(f64),
    Scale(f64),
    Add(f64),
    /// Replaces the field with `start + k * step` on the k-th intercepted
    /// message (k counts from 1), ignoring what the sender wrote.
    OverrideStream { start: f64, step: f64 },
}

/// A field-path edit applied to a decoded message.
#[derive(Debug, Clone, PartialEq)]
pub struct MutationRule {
    pub path: FieldPath,
    pub action: MutationAction,
}

impl MutationRule {
    pub fn new(path: &str, action: MutationAction) -> Result<Self, AttackError> {
        let path = path
            .parse()
            .map_err(|_| AttackError::PathUnresolved(path.to_string()))?;
        Ok(MutationRule { path, action })
    }

    /// Checks the path names a Float64 leaf of `schema` and the operands are
    /// usable.
    pub fn validate(&self, schema: &MessageSchema) -> Result<(), AttackError> {
        if !self.path.resolves_to_f64(schema) {
            return Err(AttackError::PathUnresolved(self.path.to_string()));
        }
        let finite = match self.action {
            MutationAction::Scale(v) | MutationAction::Add(v) => v.is_finite(),
            MutationAction::Set(_) => true,
            MutationAction::OverrideStream { start, step } => start.is_finite() && step.is_finite(),
        };
        if !finite {
            return Err(AttackError::InvalidPlan(format!(
                "non-finite operand in rule on {}",
                self.path
            )));
        }
        Ok(())
    }

    pub fn apply(&self, value: &mut FieldValue, k: u64) -> Result<(), AttackError> {
        let unresolved = || AttackError::PathUnresolved(self.path.to_string());
        let FieldValue::Float64(x) = self.path.get_mut(value).ok_or_else(unresolved)? else {
            return Err(unresolved());
        };
        *x = match self.action {
            MutationAction::Set(v) => v,
            MutationAction::Scale(f) => *x * f,
            MutationAction::Add(d) => *x + d,
            MutationAction::OverrideStream { start, step } => start + k as f64 * step,
        };
        Ok(())
    }
}
