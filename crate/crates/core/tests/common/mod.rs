#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use twinsec::wire::{FieldKind, FieldValue, MessageSchema};

/// A random value conforming to `schema`. Floats are arbitrary bit patterns,
/// NaNs and infinities included.
pub fn random_value(rng: &mut ChaCha8Rng, schema: &MessageSchema) -> FieldValue {
    FieldValue::Record(
        schema
            .fields
            .iter()
            .map(|(name, kind)| (name.clone(), random_field(rng, kind)))
            .collect(),
    )
}

fn random_field(rng: &mut ChaCha8Rng, kind: &FieldKind) -> FieldValue {
    match kind {
        FieldKind::Float64 => FieldValue::Float64(f64::from_bits(rng.gen())),
        FieldKind::Int32 => FieldValue::Int32(rng.gen()),
        FieldKind::UInt32 => FieldValue::UInt32(rng.gen()),
        FieldKind::Str => {
            let n = rng.gen_range(0..12);
            FieldValue::Str((0..n).map(|_| rng.gen()).collect())
        }
        FieldKind::Duration => FieldValue::Duration {
            secs: rng.gen(),
            nsecs: rng.gen(),
        },
        FieldKind::Time => FieldValue::Time {
            secs: rng.gen(),
            nsecs: rng.gen(),
        },
        FieldKind::Array(inner) => {
            let n = rng.gen_range(0..5);
            FieldValue::Array((0..n).map(|_| random_field(rng, inner)).collect())
        }
        FieldKind::Record(s) => random_value(rng, s),
    }
}

/// Twist serialized by hand: body length, then six little-endian doubles.
pub fn reference_twist(linear: [f64; 3], angular: [f64; 3]) -> Vec<u8> {
    let mut out = 48u32.to_le_bytes().to_vec();
    for v in linear.iter().chain(&angular) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn twist(vx: f64) -> FieldValue {
    twinsec::plant::Twist::planar(vx, 0.0).to_value()
}
