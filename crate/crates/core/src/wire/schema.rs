use std::collections::BTreeMap;
use std::sync::Arc;

/// Wire kind of a single field.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldKind {
    Float64,
    Int32,
    UInt32,
    Str,
    Duration,
    Time,
    /// Variable-length array, 4-byte count prefix.
    Array(Box<FieldKind>),
    Record(Arc<MessageSchema>),
}

impl FieldKind {
    /// Smallest number of bytes any value of this kind can occupy on the wire.
    pub fn min_encoded_len(&self) -> usize {
        match self {
            FieldKind::Float64 | FieldKind::Duration | FieldKind::Time => 8,
            FieldKind::Int32 | FieldKind::UInt32 | FieldKind::Str | FieldKind::Array(_) => 4,
            FieldKind::Record(s) => s.fields.iter().map(|(_, k)| k.min_encoded_len()).sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MessageSchema {
    pub type_name: String,
    /// Opaque type token, compared for equality only.
    pub md5sum: String,
    pub fields: Vec<(String, FieldKind)>,
}

impl MessageSchema {
    pub fn new(type_name: &str, md5sum: &str, fields: Vec<(&str, FieldKind)>) -> Self {
        MessageSchema {
            type_name: type_name.to_string(),
            md5sum: md5sum.to_string(),
            fields: fields.into_iter().map(|(n, k)| (n.to_string(), k)).collect(),
        }
    }

    pub fn field(&self, name: &str) -> Option<&FieldKind> {
        self.fields.iter().find(|(n, _)| n == name).map(|(_, k)| k)
    }
}

/// Schemas keyed by type name.
#[derive(Debug, Clone, Default)]
pub struct SchemaRegistry {
    schemas: BTreeMap<String, Arc<MessageSchema>>,
}

impl SchemaRegistry {
    /// Adds a schema; returns false (and keeps the existing one) if the type
    /// name is already registered.
    pub fn insert(&mut self, schema: Arc<MessageSchema>) -> bool {
        if self.schemas.contains_key(&schema.type_name) {
            return false;
        }
        self.schemas.insert(schema.type_name.clone(), schema);
        true
    }

    pub fn lookup(&self, type_name: &str) -> Option<Arc<MessageSchema>> {
        self.schemas.get(type_name).cloned()
    }

    pub fn type_names(&self) -> impl Iterator<Item = &str> {
        self.schemas.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.schemas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.schemas.is_empty()
    }
}

pub const TWIST: &str = "geometry_msgs/Twist";
pub const VECTOR3: &str = "geometry_msgs/Vector3";
pub const HEADER: &str = "std_msgs/Header";
pub const GOAL_ID: &str = "actionlib_msgs/GoalID";
pub const JOINT_TRAJECTORY_POINT: &str = "trajectory_msgs/JointTrajectoryPoint";
pub const JOINT_TRAJECTORY: &str = "trajectory_msgs/JointTrajectory";
pub const JOINT_TOLERANCE: &str = "control_msgs/JointTolerance";
pub const FOLLOW_JOINT_TRAJECTORY_GOAL: &str = "control_msgs/FollowJointTrajectoryGoal";
pub const FOLLOW_JOINT_TRAJECTORY_ACTION_GOAL: &str = "control_msgs/FollowJointTrajectoryActionGoal";

fn arr(kind: FieldKind) -> FieldKind {
    FieldKind::Array(Box::new(kind))
}

/// The message types carried by the two case-study topics and everything
/// they nest.
pub fn builtin_schemas() -> SchemaRegistry {
    use FieldKind::*;

    let vector3 = Arc::new(MessageSchema::new(
        VECTOR3,
        "4a842b65f413084dc2b10fb484ea7f17",
        vec![("x", Float64), ("y", Float64), ("z", Float64)],
    ));
    let twist = Arc::new(MessageSchema::new(
        TWIST,
        "9f195f881246fdfa2798d1d3eebca84a",
        vec![
            ("linear", Record(vector3.clone())),
            ("angular", Record(vector3.clone())),
        ],
    ));
    let header = Arc::new(MessageSchema::new(
        HEADER,
        "2176decaecbce78abc3b96ef049fabed",
        vec![("seq", UInt32), ("stamp", Time), ("frame_id", Str)],
    ));
    let goal_id = Arc::new(MessageSchema::new(
        GOAL_ID,
        "302881f31927c1df708a2dbab0e80ee8",
        vec![("stamp", Time), ("id", Str)],
    ));
    let point = Arc::new(MessageSchema::new(
        JOINT_TRAJECTORY_POINT,
        "f3cd1e1c4d320c79d6985c904ae5dcd3",
        vec![
            ("positions", arr(Float64)),
            ("velocities", arr(Float64)),
            ("accelerations", arr(Float64)),
            ("time_from_start", Duration),
        ],
    ));
    let trajectory = Arc::new(MessageSchema::new(
        JOINT_TRAJECTORY,
        "65b4f94a94d1ed67169da35a02f33d3f",
        vec![
            ("header", Record(header.clone())),
            ("joint_names", arr(Str)),
            ("points", arr(Record(point.clone()))),
        ],
    ));
    let tolerance = Arc::new(MessageSchema::new(
        JOINT_TOLERANCE,
        "f544fe9c16cf04547e135dd6063ff5be",
        vec![
            ("name", Str),
            ("position", Float64),
            ("velocity", Float64),
            ("acceleration", Float64),
        ],
    ));
    let goal = Arc::new(MessageSchema::new(
        FOLLOW_JOINT_TRAJECTORY_GOAL,
        "69636787b6ecbde4d61d711979bc7ecb",
        vec![
            ("trajectory", Record(trajectory.clone())),
            ("path_tolerance", arr(Record(tolerance.clone()))),
            ("goal_tolerance", arr(Record(tolerance.clone()))),
            ("goal_time_tolerance", Duration),
        ],
    ));
    let action_goal = Arc::new(MessageSchema::new(
        FOLLOW_JOINT_TRAJECTORY_ACTION_GOAL,
        "cff5c1d533bf2f82dd0138d57f4304bb",
        vec![
            ("header", Record(header.clone())),
            ("goal_id", Record(goal_id.clone())),
            ("goal", Record(goal.clone())),
        ],
    ));

    let mut registry = SchemaRegistry::default();
    for s in [
        vector3,
        twist,
        header,
        goal_id,
        point,
        trajectory,
        tolerance,
        goal,
        action_goal,
    ] {
        registry.insert(s);
    }
    registry
}
