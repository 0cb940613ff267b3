use std::fmt::Write as _;

/// A decoded message value.
///
/// Equality is bitwise for `Float64` so that NaN payloads and signed zeros
/// survive round-trip comparisons.
#[derive(Debug, Clone)]
pub enum FieldValue {
    Float64(f64),
    Int32(i32),
    UInt32(u32),
    Str(Vec<u8>),
    Duration { secs: i32, nsecs: i32 },
    Time { secs: u32, nsecs: u32 },
    Array(Vec<FieldValue>),
    Record(Vec<(String, FieldValue)>),
}

impl PartialEq for FieldValue {
    fn eq(&self, other: &Self) -> bool {
        use FieldValue::*;
        match (self, other) {
            (Float64(a), Float64(b)) => a.to_bits() == b.to_bits(),
            (Int32(a), Int32(b)) => a == b,
            (UInt32(a), UInt32(b)) => a == b,
            (Str(a), Str(b)) => a == b,
            (
                Duration { secs: a, nsecs: an },
                Duration { secs: b, nsecs: bn },
            ) => a == b && an == bn,
            (Time { secs: a, nsecs: an }, Time { secs: b, nsecs: bn }) => a == b && an == bn,
            (Array(a), Array(b)) => a == b,
            (Record(a), Record(b)) => a == b,
            _ => false,
        }
    }
}

impl FieldValue {
    pub fn record<I, S>(fields: I) -> Self
    where
        I: IntoIterator<Item = (S, FieldValue)>,
        S: Into<String>,
    {
        FieldValue::Record(fields.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }

    pub fn str(s: &str) -> Self {
        FieldValue::Str(s.as_bytes().to_vec())
    }

    pub fn f64_array(values: &[f64]) -> Self {
        FieldValue::Array(values.iter().copied().map(FieldValue::Float64).collect())
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            FieldValue::Float64(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_array(&self) -> Option<&[FieldValue]> {
        match self {
            FieldValue::Array(items) => Some(items),
            _ => None,
        }
    }

    pub fn as_bytes(&self) -> Option<&[u8]> {
        match self {
            FieldValue::Str(b) => Some(b),
            _ => None,
        }
    }

    /// Named field of a record.
    pub fn field(&self, name: &str) -> Option<&FieldValue> {
        match self {
            FieldValue::Record(fields) => fields.iter().find(|(n, _)| n == name).map(|(_, v)| v),
            _ => None,
        }
    }

    pub fn field_mut(&mut self, name: &str) -> Option<&mut FieldValue> {
        match self {
            FieldValue::Record(fields) => fields
                .iter_mut()
                .find(|(n, _)| n == name)
                .map(|(_, v)| v),
            _ => None,
        }
    }

    /// Indented text rendering, one leaf per line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        match self {
            FieldValue::Record(fields) => render_fields(&mut out, fields, 0),
            other => {
                let _ = writeln!(out, "{}", scalar_text(other).unwrap_or_default());
            }
        }
        out
    }
}

fn scalar_text(v: &FieldValue) -> Option<String> {
    Some(match v {
        FieldValue::Float64(x) => format!("{x:?}"),
        FieldValue::Int32(x) => x.to_string(),
        FieldValue::UInt32(x) => x.to_string(),
        FieldValue::Str(b) => format!("{:?}", String::from_utf8_lossy(b)),
        FieldValue::Duration { secs, nsecs } => format!("{secs}s {nsecs}ns"),
        FieldValue::Time { secs, nsecs } => format!("{secs}s {nsecs}ns"),
        FieldValue::Array(items) if items.iter().all(|i| !matches!(i, FieldValue::Record(_))) => {
            let parts: Vec<String> = items.iter().filter_map(scalar_text).collect();
            format!("[{}]", parts.join(", "))
        }
        _ => return None,
    })
}

fn render_fields(out: &mut String, fields: &[(String, FieldValue)], depth: usize) {
    let pad = "  ".repeat(depth);
    for (name, value) in fields {
        match value {
            FieldValue::Record(inner) => {
                let _ = writeln!(out, "{pad}{name}:");
                render_fields(out, inner, depth + 1);
            }
            FieldValue::Array(items) if scalar_text(value).is_none() => {
                let _ = writeln!(out, "{pad}{name}: ({} items)", items.len());
                for (i, item) in items.iter().enumerate() {
                    let _ = writeln!(out, "{pad}  [{i}]:");
                    if let FieldValue::Record(inner) = item {
                        render_fields(out, inner, depth + 2);
                    }
                }
            }
            scalar => {
                let _ = writeln!(out, "{pad}{name}: {}", scalar_text(scalar).unwrap_or_default());
            }
        }
    }
}
