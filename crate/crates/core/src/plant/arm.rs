use crate::netsim::{Nanos, NANOS_PER_SEC};
use crate::wire::FieldValue;

use super::PlantError;

pub const JOINT_NAMES: [&str; 6] = [
    "elbow_joint",
    "shoulder_lift_joint",
    "shoulder_pan_joint",
    "wrist_1_joint",
    "wrist_2_joint",
    "wrist_3_joint",
];

pub const SHOULDER_PAN: usize = 2;

pub fn joint_index(name: &str) -> Option<usize> {
    JOINT_NAMES.iter().position(|j| *j == name)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajPoint {
    pub positions: [f64; 6],
    pub time_from_start: Nanos,
}

/// A trajectory in the fixed joint order.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmGoal {
    pub points: Vec<TrajPoint>,
}

impl ArmGoal {
    pub fn single(positions: [f64; 6], time_from_start: Nanos) -> Self {
        ArmGoal {
            points: vec![TrajPoint {
                positions,
                time_from_start,
            }],
        }
    }

    /// Builds a `FollowJointTrajectoryActionGoal` carrying this trajectory.
    /// Velocities and accelerations are zero.
    pub fn to_action_goal(&self, seq: u32, stamp: Nanos, goal_id: &str) -> FieldValue {
        let time = FieldValue::Time {
            secs: (stamp / NANOS_PER_SEC) as u32,
            nsecs: (stamp % NANOS_PER_SEC) as u32,
        };
        let header = |seq| {
            FieldValue::record([
                ("seq", FieldValue::UInt32(seq)),
                ("stamp", time.clone()),
                ("frame_id", FieldValue::str("")),
            ])
        };
        let points = self
            .points
            .iter()
            .map(|p| {
                FieldValue::record([
                    ("positions", FieldValue::f64_array(&p.positions)),
                    ("velocities", FieldValue::f64_array(&[0.0; 6])),
                    ("accelerations", FieldValue::f64_array(&[0.0; 6])),
                    (
                        "time_from_start",
                        FieldValue::Duration {
                            secs: (p.time_from_start / NANOS_PER_SEC) as i32,
                            nsecs: (p.time_from_start % NANOS_PER_SEC) as i32,
                        },
                    ),
                ])
            })
            .collect();
        let trajectory = FieldValue::record([
            ("header", header(0)),
            (
                "joint_names",
                FieldValue::Array(JOINT_NAMES.iter().map(|n| FieldValue::str(n)).collect()),
            ),
            ("points", FieldValue::Array(points)),
        ]);
        FieldValue::record([
            ("header", header(seq)),
            (
                "goal_id",
                FieldValue::record([("stamp", time.clone()), ("id", FieldValue::str(goal_id))]),
            ),
            (
                "goal",
                FieldValue::record([
                    ("trajectory", trajectory),
                    ("path_tolerance", FieldValue::Array(Vec::new())),
                    ("goal_tolerance", FieldValue::Array(Vec::new())),
                    ("goal_time_tolerance", FieldValue::Duration { secs: 0, nsecs: 0 }),
                ]),
            ),
        ])
    }

    /// Extracts the trajectory from a decoded `FollowJointTrajectoryActionGoal`,
    /// reordering positions by joint name.
    pub fn from_action_goal(v: &FieldValue) -> Result<Self, PlantError> {
        let bad = |why: &str| PlantError::BadGoal(why.to_string());
        let traj = v
            .field("goal")
            .and_then(|g| g.field("trajectory"))
            .ok_or_else(|| bad("missing goal.trajectory"))?;
        let names = traj
            .field("joint_names")
            .and_then(FieldValue::as_array)
            .ok_or_else(|| bad("missing joint_names"))?;
        let mut order = Vec::with_capacity(names.len());
        for n in names {
            let name = n
                .as_bytes()
                .and_then(|b| std::str::from_utf8(b).ok())
                .ok_or_else(|| bad("joint name is not text"))?;
            order.push(joint_index(name).ok_or_else(|| bad(&format!("unknown joint {name}")))?);
        }
        let mut seen = [false; 6];
        for &i in &order {
            if std::mem::replace(&mut seen[i], true) {
                return Err(bad("duplicate joint name"));
            }
        }
        if order.len() != 6 {
            return Err(bad("expected six joints"));
        }
        let raw = traj
            .field("points")
            .and_then(FieldValue::as_array)
            .ok_or_else(|| bad("missing points"))?;
        let mut points = Vec::with_capacity(raw.len());
        for p in raw {
            let pos = p
                .field("positions")
                .and_then(FieldValue::as_array)
                .ok_or_else(|| bad("missing positions"))?;
            if pos.len() != 6 {
                return Err(bad("positions must have six entries"));
            }
            let mut positions = [0.0; 6];
            for (slot, value) in order.iter().zip(pos) {
                positions[*slot] = value.as_f64().ok_or_else(|| bad("position is not float64"))?;
            }
            let time_from_start = match p.field("time_from_start") {
                Some(FieldValue::Duration { secs, nsecs }) if *secs >= 0 && *nsecs >= 0 => {
                    *secs as Nanos * NANOS_PER_SEC + *nsecs as Nanos
                }
                _ => return Err(bad("time_from_start must be a non-negative duration")),
            };
            points.push(TrajPoint {
                positions,
                time_from_start,
            });
        }
        Ok(ArmGoal { points })
    }
}

/// Six joint angles tracking the most recently received trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmState {
    pub angles: [f64; 6],
    /// Angles at the moment the active trajectory was received.
    pub origin: [f64; 6],
    pub trajectory: Vec<TrajPoint>,
    pub received_at: Nanos,
}

impl ArmState {
    pub fn new(angles: [f64; 6]) -> Self {
        ArmState {
            angles,
            origin: angles,
            trajectory: Vec::new(),
            received_at: 0,
        }
    }

    /// Replaces the active trajectory, starting from wherever the arm is at
    /// `now`. An empty or unsorted trajectory leaves the state untouched.
    pub fn receive_goal(&mut self, goal: &ArmGoal, now: Nanos) -> Result<(), PlantError> {
        if goal.points.is_empty() {
            return Err(PlantError::EmptyTrajectory);
        }
        if goal.points.windows(2).any(|w| w[0].time_from_start >= w[1].time_from_start) {
            return Err(PlantError::BadGoal("time_from_start not strictly increasing".into()));
        }
        if goal.points.iter().any(|p| p.positions.iter().any(|x| !x.is_finite())) {
            return Err(PlantError::BadGoal("non-finite position".into()));
        }
        let here = step_arm(self, now);
        self.angles = here.angles;
        self.origin = here.angles;
        self.trajectory = goal.points.clone();
        self.received_at = now;
        Ok(())
    }
}

/// Angles at `now`: piecewise-linear through the active trajectory, held at
/// the last point once it has elapsed.
pub fn step_arm(a: &ArmState, now: Nanos) -> ArmState {
    let mut out = a.clone();
    if a.trajectory.is_empty() {
        return out;
    }
    let elapsed = now.saturating_sub(a.received_at);
    let mut from = (0, a.origin);
    for p in &a.trajectory {
        if elapsed < p.time_from_start {
            let span = (p.time_from_start - from.0) as f64;
            let s = (elapsed - from.0) as f64 / span;
            for j in 0..6 {
                out.angles[j] = from.1[j] + (p.positions[j] - from.1[j]) * s;
            }
            return out;
        }
        from = (p.time_from_start, p.positions);
    }
    out.angles = from.1;
    out
}
