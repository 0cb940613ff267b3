use std::f64::consts::{PI, TAU};

use crate::netsim::Nanos;
use crate::wire::FieldValue;

use super::PlantError;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Twist {
    pub linear: [f64; 3],
    pub angular: [f64; 3],
}

impl Twist {
    pub fn planar(vx: f64, wz: f64) -> Self {
        Twist {
            linear: [vx, 0.0, 0.0],
            angular: [0.0, 0.0, wz],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.linear.iter().chain(&self.angular).all(|v| v.is_finite())
    }

    pub fn from_value(v: &FieldValue) -> Option<Twist> {
        let vec3 = |name: &str| -> Option<[f64; 3]> {
            let r = v.field(name)?;
            Some([r.field("x")?.as_f64()?, r.field("y")?.as_f64()?, r.field("z")?.as_f64()?])
        };
        Some(Twist {
            linear: vec3("linear")?,
            angular: vec3("angular")?,
        })
    }

    pub fn to_value(&self) -> FieldValue {
        let vec3 = |a: [f64; 3]| {
            FieldValue::record([
                ("x", FieldValue::Float64(a[0])),
                ("y", FieldValue::Float64(a[1])),
                ("z", FieldValue::Float64(a[2])),
            ])
        };
        FieldValue::record([("linear", vec3(self.linear)), ("angular", vec3(self.angular))])
    }
}

/// Wraps an angle into (-π, π].
pub fn normalize_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Planar pose of a differential-drive base with the command it is holding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrivePose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub last_cmd: Twist,
    pub stamp: Nanos,
}

impl DrivePose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        DrivePose {
            x,
            y,
            theta: normalize_angle(theta),
            last_cmd: Twist::default(),
            stamp: 0,
        }
    }

    /// Replaces the held command. Non-finite commands are refused and the
    /// previous one stays in force.
    pub fn set_command(&mut self, cmd: Twist) -> Result<(), PlantError> {
        if !cmd.is_finite() {
            return Err(PlantError::NonFiniteCommand);
        }
        self.last_cmd = cmd;
        Ok(())
    }
}

/// Integrates the held command over `dt` seconds.
pub fn step_drive(p: &DrivePose, dt: f64) -> DrivePose {
    let [vx, vy, _] = p.last_cmd.linear;
    let wz = p.last_cmd.angular[2];
    let (s, c) = p.theta.sin_cos();
    DrivePose {
        x: p.x + (vx * c - vy * s) * dt,
        y: p.y + (vx * s + vy * c) * dt,
        theta: normalize_angle(p.theta + wz * dt),
        last_cmd: p.last_cmd,
        stamp: p.stamp + (dt * 1e9).round() as Nanos,
    }
}
