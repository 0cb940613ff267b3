//! TCPROS-style wire formats: connection headers and length-prefixed message
//! bodies for the schemas in [`builtin_schemas`].

mod codec;
mod header;
mod path;
mod schema;
mod value;

pub use codec::{decode_message, encode_message, split_message};
pub use header::{decode_header, encode_header, ConnectionHeader};
pub use path::{FieldPath, PathSegment, PathSyntaxError};
pub use schema::{
    builtin_schemas, FieldKind, MessageSchema, SchemaRegistry, FOLLOW_JOINT_TRAJECTORY_ACTION_GOAL,
    FOLLOW_JOINT_TRAJECTORY_GOAL, GOAL_ID, HEADER, JOINT_TOLERANCE, JOINT_TRAJECTORY,
    JOINT_TRAJECTORY_POINT, TWIST, VECTOR3,
};
pub use value::FieldValue;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WireError {
    #[error("value does not match schema at {path}")]
    SchemaMismatch { path: String },
    #[error("buffer shorter than declared length")]
    Truncated,
    #[error("bytes left over after decoding")]
    TrailingBytes,
    #[error("length field exceeds remaining bytes")]
    BadLength,
    #[error("malformed header entry")]
    MalformedEntry,
}
