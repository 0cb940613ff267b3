use std::fmt;
use std::str::FromStr;

use super::schema::{FieldKind, MessageSchema};
use super::value::FieldValue;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PathSegment {
    Field(String),
    Index(usize),
}

/// Dot/index path into a message, e.g. `goal.trajectory.points[0].positions[2]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldPath {
    segments: Vec<PathSegment>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid field path {0:?}")]
pub struct PathSyntaxError(pub String);

impl FromStr for FieldPath {
    type Err = PathSyntaxError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || PathSyntaxError(s.to_string());
        let mut segments = Vec::new();
        for part in s.split('.') {
            let (name, mut rest) = match part.find('[') {
                Some(i) => (&part[..i], &part[i..]),
                None => (part, ""),
            };
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(err());
            }
            segments.push(PathSegment::Field(name.to_string()));
            while !rest.is_empty() {
                let close = rest.find(']').ok_or_else(err)?;
                if !rest.starts_with('[') {
                    return Err(err());
                }
                let idx = rest[1..close].parse::<usize>().map_err(|_| err())?;
                segments.push(PathSegment::Index(idx));
                rest = &rest[close + 1..];
            }
        }
        Ok(FieldPath { segments })
    }
}

impl fmt::Display for FieldPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, seg) in self.segments.iter().enumerate() {
            match seg {
                PathSegment::Field(name) if i == 0 => write!(f, "{name}")?,
                PathSegment::Field(name) => write!(f, ".{name}")?,
                PathSegment::Index(idx) => write!(f, "[{idx}]")?,
            }
        }
        Ok(())
    }
}

impl FieldPath {
    pub fn segments(&self) -> &[PathSegment] {
        &self.segments
    }

    /// Kind of the leaf this path names in `schema`, if the path is
    /// structurally valid. Indices are not bounds-checked here since arrays
    /// are variable-length.
    pub fn leaf_kind<'a>(&self, schema: &'a MessageSchema) -> Option<&'a FieldKind> {
        let mut segments = self.segments.iter();
        let PathSegment::Field(first) = segments.next()? else {
            return None;
        };
        let mut kind = schema.field(first)?;
        for seg in segments {
            kind = match (seg, kind) {
                (PathSegment::Field(name), FieldKind::Record(s)) => s.field(name)?,
                (PathSegment::Index(_), FieldKind::Array(elem)) => elem,
                _ => return None,
            };
        }
        Some(kind)
    }

    pub fn resolves_to_f64(&self, schema: &MessageSchema) -> bool {
        matches!(self.leaf_kind(schema), Some(FieldKind::Float64))
    }

    pub fn get<'a>(&self, value: &'a FieldValue) -> Option<&'a FieldValue> {
        let mut cur = value;
        for seg in &self.segments {
            cur = match seg {
                PathSegment::Field(name) => cur.field(name)?,
                PathSegment::Index(i) => cur.as_array()?.get(*i)?,
            };
        }
        Some(cur)
    }

    pub fn get_mut<'a>(&self, value: &'a mut FieldValue) -> Option<&'a mut FieldValue> {
        let mut cur = value;
        for seg in &self.segments {
            cur = match seg {
                PathSegment::Field(name) => cur.field_mut(name)?,
                PathSegment::Index(i) => match cur {
                    FieldValue::Array(items) => items.get_mut(*i)?,
                    _ => return None,
                },
            };
        }
        Some(cur)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wire::schema::{builtin_schemas, FOLLOW_JOINT_TRAJECTORY_ACTION_GOAL, TWIST};

    #[test]
    fn parse_and_display() {
        let p: FieldPath = "goal.trajectory.points[0].positions[2]".parse().unwrap();
        assert_eq!(p.segments().len(), 6);
        assert_eq!(p.to_string(), "goal.trajectory.points[0].positions[2]");
        assert_eq!(
            "linear.x".parse::<FieldPath>().unwrap().segments(),
            &[
                PathSegment::Field("linear".into()),
                PathSegment::Field("x".into())
            ]
        );
    }

    #[test]
    fn parse_rejects_garbage() {
        for bad in ["", ".x", "a..b", "a[", "a[x]", "a]b", "a[1]b", "a-b"] {
            assert!(bad.parse::<FieldPath>().is_err(), "{bad}");
        }
    }

    #[test]
    fn schema_resolution() {
        let reg = builtin_schemas();
        let twist = reg.lookup(TWIST).unwrap();
        let goal = reg.lookup(FOLLOW_JOINT_TRAJECTORY_ACTION_GOAL).unwrap();
        let ok = |s: &str, schema: &MessageSchema| s.parse::<FieldPath>().unwrap().resolves_to_f64(schema);
        assert!(ok("linear.x", &twist));
        assert!(ok("angular.z", &twist));
        assert!(!ok("linear", &twist));
        assert!(!ok("linear.w", &twist));
        assert!(!ok("linear[0]", &twist));
        assert!(ok("goal.trajectory.points[0].positions[2]", &goal));
        assert!(!ok("goal.trajectory.points[0].positions", &goal));
        assert!(!ok("goal.trajectory.joint_names[0]", &goal));
    }
}
