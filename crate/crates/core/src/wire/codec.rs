//! Message body serialization: little-endian scalars, 4-byte count prefixes
//! for strings and variable arrays, and a 4-byte length prefix over the whole
//! body.

use super::schema::{FieldKind, MessageSchema};
use super::value::FieldValue;
use super::WireError;

pub fn encode_message(schema: &MessageSchema, value: &FieldValue) -> Result<Vec<u8>, WireError> {
    let mut out = vec![0u8; 4];
    encode_record(schema, value, &mut out, schema.type_name.as_str())?;
    let body_len = u32::try_from(out.len() - 4).map_err(|_| WireError::BadLength)?;
    out[..4].copy_from_slice(&body_len.to_le_bytes());
    Ok(out)
}

fn mismatch(path: &str) -> WireError {
    WireError::SchemaMismatch {
        path: path.to_string(),
    }
}

fn encode_record(
    schema: &MessageSchema,
    value: &FieldValue,
    out: &mut Vec<u8>,
    path: &str,
) -> Result<(), WireError> {
    let FieldValue::Record(fields) = value else {
        return Err(mismatch(path));
    };
    if fields.len() != schema.fields.len() {
        return Err(mismatch(path));
    }
    for ((name, kind), (vname, v)) in schema.fields.iter().zip(fields) {
        if name != vname {
            return Err(mismatch(&format!("{path}.{name}")));
        }
        encode_field(kind, v, out, &format!("{path}.{name}"))?;
    }
    Ok(())
}

fn encode_len(len: usize, out: &mut Vec<u8>) -> Result<(), WireError> {
    let len = u32::try_from(len).map_err(|_| WireError::BadLength)?;
    out.extend_from_slice(&len.to_le_bytes());
    Ok(())
}

fn encode_field(
    kind: &FieldKind,
    value: &FieldValue,
    out: &mut Vec<u8>,
    path: &str,
) -> Result<(), WireError> {
    match (kind, value) {
        (FieldKind::Float64, FieldValue::Float64(v)) => out.extend_from_slice(&v.to_le_bytes()),
        (FieldKind::Int32, FieldValue::Int32(v)) => out.extend_from_slice(&v.to_le_bytes()),
        (FieldKind::UInt32, FieldValue::UInt32(v)) => out.extend_from_slice(&v.to_le_bytes()),
        (FieldKind::Str, FieldValue::Str(bytes)) => {
            encode_len(bytes.len(), out)?;
            out.extend_from_slice(bytes);
        }
        (FieldKind::Duration, FieldValue::Duration { secs, nsecs }) => {
            out.extend_from_slice(&secs.to_le_bytes());
            out.extend_from_slice(&nsecs.to_le_bytes());
        }
        (FieldKind::Time, FieldValue::Time { secs, nsecs }) => {
            out.extend_from_slice(&secs.to_le_bytes());
            out.extend_from_slice(&nsecs.to_le_bytes());
        }
        (FieldKind::Array(elem), FieldValue::Array(items)) => {
            encode_len(items.len(), out)?;
            for (i, item) in items.iter().enumerate() {
                encode_field(elem, item, out, &format!("{path}[{i}]"))?;
            }
        }
        (FieldKind::Record(schema), v @ FieldValue::Record(_)) => encode_record(schema, v, out, path)?,
        _ => return Err(mismatch(path)),
    }
    Ok(())
}

/// Splits a stream payload into its length-prefixed message and whatever
/// bytes follow it. Returns `None` when the prefix is missing or claims more
/// bytes than are present.
pub fn split_message(buf: &[u8]) -> Option<(&[u8], &[u8])> {
    let prefix: [u8; 4] = buf.get(..4)?.try_into().ok()?;
    let end = 4usize.checked_add(u32::from_le_bytes(prefix) as usize)?;
    if end > buf.len() {
        return None;
    }
    Some(buf.split_at(end))
}

pub fn decode_message(schema: &MessageSchema, buf: &[u8]) -> Result<FieldValue, WireError> {
    let prefix: [u8; 4] = buf
        .get(..4)
        .ok_or(WireError::Truncated)?
        .try_into()
        .expect("slice of length 4");
    let declared = u32::from_le_bytes(prefix) as usize;
    let body = &buf[4..];
    if body.len() < declared {
        return Err(WireError::Truncated);
    }
    if body.len() > declared {
        return Err(WireError::TrailingBytes);
    }
    let mut reader = Reader { buf: body, pos: 0 };
    let value = reader.record(schema)?;
    if reader.pos != body.len() {
        return Err(WireError::TrailingBytes);
    }
    Ok(value)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn take<const N: usize>(&mut self) -> Result<[u8; N], WireError> {
        if self.remaining() < N {
            return Err(WireError::Truncated);
        }
        let mut out = [0u8; N];
        out.copy_from_slice(&self.buf[self.pos..self.pos + N]);
        self.pos += N;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, WireError> {
        self.take::<4>().map(u32::from_le_bytes)
    }

    fn i32(&mut self) -> Result<i32, WireError> {
        self.take::<4>().map(i32::from_le_bytes)
    }

    fn count(&mut self, min_elem: usize) -> Result<usize, WireError> {
        if self.remaining() < 4 {
            return Err(WireError::Truncated);
        }
        let n = self.u32()? as usize;
        if n.saturating_mul(min_elem.max(1)) > self.remaining() {
            return Err(WireError::BadLength);
        }
        Ok(n)
    }

    fn record(&mut self, schema: &MessageSchema) -> Result<FieldValue, WireError> {
        let mut fields = Vec::with_capacity(schema.fields.len());
        for (name, kind) in &schema.fields {
            fields.push((name.clone(), self.field(kind)?));
        }
        Ok(FieldValue::Record(fields))
    }

    fn field(&mut self, kind: &FieldKind) -> Result<FieldValue, WireError> {
        Ok(match kind {
            FieldKind::Float64 => FieldValue::Float64(f64::from_le_bytes(self.take::<8>()?)),
            FieldKind::Int32 => FieldValue::Int32(self.i32()?),
            FieldKind::UInt32 => FieldValue::UInt32(self.u32()?),
            FieldKind::Str => {
                let n = self.count(1)?;
                let bytes = self.buf[self.pos..self.pos + n].to_vec();
                self.pos += n;
                FieldValue::Str(bytes)
            }
            FieldKind::Duration => FieldValue::Duration {
                secs: self.i32()?,
                nsecs: self.i32()?,
            },
            FieldKind::Time => FieldValue::Time {
                secs: self.u32()?,
                nsecs: self.u32()?,
            },
            FieldKind::Array(elem) => {
                let n = self.count(elem.min_encoded_len())?;
                let mut items = Vec::with_capacity(n);
                for _ in 0..n {
                    items.push(self.field(elem)?);
                }
                FieldValue::Array(items)
            }
            FieldKind::Record(schema) => self.record(schema)?,
        })
    }
}
