use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::netsim::{Nanos, NANOS_PER_SEC};

use super::{joint_index, ArmState, DrivePose, PlantError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantKind {
    Drive,
    Arm,
}

/// Renders integer nanoseconds as `secs.nnnnnnnnn`.
pub fn format_nanos(t: Nanos) -> String {
    format!("{}.{:09}", t / NANOS_PER_SEC, t % NANOS_PER_SEC)
}

/// Sampled plant state on a fixed clock grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSeries {
    pub kind: PlantKind,
    pub times: Vec<Nanos>,
    /// `[x, y, theta]` for a drive, six joint angles for an arm.
    pub rows: Vec<Vec<f64>>,
}

impl StateSeries {
    pub fn new(kind: PlantKind) -> Self {
        StateSeries {
            kind,
            times: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn push_drive(&mut self, t: Nanos, p: &DrivePose) {
        self.times.push(t);
        self.rows.push(vec![p.x, p.y, p.theta]);
    }

    pub fn push_arm(&mut self, t: Nanos, a: &ArmState) {
        self.times.push(t);
        self.rows.push(a.angles.to_vec());
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn columns(&self) -> &'static [&'static str] {
        match self.kind {
            PlantKind::Drive => &["x", "y", "theta"],
            PlantKind::Arm => &["j1", "j2", "j3", "j4", "j5", "j6"],
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,{}", self.columns().join(","))?;
        for (t, row) in self.times.iter().zip(&self.rows) {
            write!(w, "{}", format_nanos(*t))?;
            for v in row {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExclusionZone {
    pub joint: String,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SafetyEnvelope {
    pub v_max: Option<f64>,
    pub exclusion_zone: Option<ExclusionZone>,
    /// Metres for a drive, radians for an arm.
    pub divergence_limit: Option<f64>,
}

impl SafetyEnvelope {
    pub fn validate(&self, kind: PlantKind) -> Result<(), PlantError> {
        let bad = |why: String| Err(PlantError::InvalidEnvelope(why));
        if let Some(v) = self.v_max {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("v_max must be positive, got {v}"));
            }
            if kind != PlantKind::Drive {
                return bad("v_max applies to drive plants only".into());
            }
        }
        if let Some(z) = &self.exclusion_zone {
            if !(z.lo < z.hi) {
                return bad(format!("exclusion zone needs lo < hi, got [{}, {}]", z.lo, z.hi));
            }
            if kind != PlantKind::Arm {
                return bad("exclusion_zone applies to arm plants only".into());
            }
            if joint_index(&z.joint).is_none() {
                return bad(format!("unknown joint {}", z.joint));
            }
        }
        if let Some(d) = self.divergence_limit {
            if !(d > 0.0) {
                return bad(format!("divergence_limit must be positive, got {d}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum ViolationKind {
    VelocityLimit,
    ExclusionZone,
    DivergenceLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Violation {
    pub t: Nanos,
    pub kind: ViolationKind,
    /// The offending speed, angle or divergence.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SafetyReport {
    pub max_divergence: f64,
    pub first_violation: Option<Violation>,
    /// Earliest occurrence of each kind that occurred.
    pub violations: BTreeMap<ViolationKind, Violation>,
    #[serde(skip)]
    pub divergence: Vec<(Nanos, f64)>,
}

impl SafetyReport {
    pub fn write_divergence_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,divergence")?;
        for (t, d) in &self.divergence {
            writeln!(w, "{},{d}", format_nanos(*t))?;
        }
        Ok(())
    }
}

fn divergence(kind: PlantKind, a: &[f64], b: &[f64]) -> f64 {
    match kind {
        PlantKind::Drive => (a[0] - b[0]).hypot(a[1] - b[1]),
        PlantKind::Arm => a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max),
    }
}

/// Compares intent (`dts`) against reality (`cps`) sample by sample. Speed
/// and zone limits are checked on the physical series only.
pub fn evaluate_safety(dts: &StateSeries, cps: &StateSeries, env: &SafetyEnvelope) -> Result<SafetyReport, PlantError> {
    if dts.kind != cps.kind || dts.times != cps.times || dts.rows.len() != cps.rows.len() {
        return Err(PlantError::GridMismatch);
    }
    let kind = cps.kind;
    let mut violations: BTreeMap<ViolationKind, Violation> = BTreeMap::new();
    let mut note = |v: Violation| {
        violations.entry(v.kind).or_insert(v);
    };
    let zone = env
        .exclusion_zone
        .as_ref()
        .and_then(|z| joint_index(&z.joint).map(|j| (j, z.lo, z.hi)));

    let mut series = Vec::with_capacity(cps.len());
    let mut max_divergence = 0.0f64;
    for i in 0..cps.len() {
        let t = cps.times[i];
        let d = divergence(kind, &dts.rows[i], &cps.rows[i]);
        max_divergence = max_divergence.max(d);
        series.push((t, d));
        if env.divergence_limit.is_some_and(|lim| d > lim) {
            note(Violation {
                t,
                kind: ViolationKind::DivergenceLimit,
                value: d,
            });
        }
        if let Some((j, lo, hi)) = zone {
            let q = cps.rows[i][j];
            if (lo..=hi).contains(&q) {
                note(Violation {
                    t,
                    kind: ViolationKind::ExclusionZone,
                    value: q,
                });
            }
        }
        if let (Some(v_max), PlantKind::Drive, true) = (env.v_max, kind, i > 0) {
            let dt = (t - cps.times[i - 1]) as f64 / NANOS_PER_SEC as f64;
            let (prev, cur) = (&cps.rows[i - 1], &cps.rows[i]);
            let speed = (cur[0] - prev[0]).hypot(cur[1] - prev[1]) / dt;
            // tolerance absorbs float noise on exactly-at-limit speeds
            if speed > v_max * (1.0 + 1e-9) {
                note(Violation {
                    t,
                    kind: ViolationKind::VelocityLimit,
                    value: speed,
                });
            }
        }
    }
    let first_violation = violations.values().min_by_key(|v| (v.t, v.kind)).copied();
    Ok(SafetyReport {
        max_divergence,
        first_violation,
        violations,
        divergence: series,
    })
}
