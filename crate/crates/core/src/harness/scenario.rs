use std::collections::BTreeSet;
use std::net::Ipv4Addr;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::attack::{MutationAction, MutationRule};
use crate::guard::{AnomalyConfig, FieldLimit};
use crate::netsim::{MacAddr, Nanos, NANOS_PER_SEC};
use crate::plant::{joint_index, PlantKind, SafetyEnvelope};
use crate::wire::{builtin_schemas, FieldPath, FOLLOW_JOINT_TRAJECTORY_ACTION_GOAL, HEADER, TWIST};

use super::ScenarioError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub duration_s: f64,
    #[serde(default)]
    pub network: NetworkSpec,
    pub hosts: Vec<HostEntry>,
    #[serde(default)]
    pub master: Option<String>,
    pub topics: Vec<TopicEntry>,
    pub plant: PlantSpec,
    #[serde(default)]
    pub attack: Option<AttackSpec>,
    #[serde(default)]
    pub guards: GuardSpec,
    #[serde(default)]
    pub envelope: SafetyEnvelope,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSpec {
    pub link_latency_us: u64,
    pub arp_timeout_ms: u64,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        NetworkSpec {
            link_latency_us: 1000,
            arp_timeout_ms: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HostEntry {
    pub name: String,
    pub ip: Ipv4Addr,
    pub mac: MacAddr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopicEntry {
    pub name: String,
    #[serde(rename = "type")]
    pub type_name: String,
    pub publisher: String,
    pub subscriber: String,
    pub port: u16,
    pub rate_hz: f64,
    #[serde(default)]
    pub start_s: f64,
    #[serde(default)]
    pub connect_s: f64,
    /// Stop after this many messages; unlimited when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<u64>,
    pub program: Program,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwistSpec {
    pub linear: [f64; 3],
    pub angular: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduledTwist {
    pub at_s: f64,
    #[serde(default)]
    pub linear: [f64; 3],
    #[serde(default)]
    pub angular: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmGoalSpec {
    pub joint: String,
    pub lo: f64,
    pub hi: f64,
    pub move_time_s: f64,
}

/// What the publishing side sends on a topic each period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Program {
    /// The same velocity command every period.
    Twist(TwistSpec),
    /// Piecewise-constant commands; before the first entry the command is zero.
    TwistSchedule(Vec<ScheduledTwist>),
    /// Single-point goals moving one joint to a seeded uniform random target.
    ArmGoals(ArmGoalSpec),
    /// A `std_msgs/Header` with an increasing sequence number.
    Header { frame_id: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSpec {
    pub kind: PlantKind,
    pub topic: String,
    #[serde(default = "default_dt")]
    pub dt_s: f64,
    #[serde(default)]
    pub start_s: f64,
    /// `[x, y, theta]` for a drive, six joint angles for an arm.
    #[serde(default)]
    pub initial: Option<Vec<f64>>,
    /// Zero the held drive command when nothing arrives for this long.
    #[serde(default)]
    pub command_timeout_s: Option<f64>,
}

fn default_dt() -> f64 {
    0.01
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ActionSpec {
    Set(f64),
    Scale(f64),
    Add(f64),
    OverrideStream { start: f64, step: f64 },
}

impl From<ActionSpec> for MutationAction {
    fn from(a: ActionSpec) -> Self {
        match a {
            ActionSpec::Set(v) => MutationAction::Set(v),
            ActionSpec::Scale(v) => MutationAction::Scale(v),
            ActionSpec::Add(v) => MutationAction::Add(v),
            ActionSpec::OverrideStream { start, step } => MutationAction::OverrideStream { start, step },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleSpec {
    pub path: String,
    pub action: ActionSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSpec {
    pub attacker: String,
    /// Host name or dotted-quad address.
    pub victim_a: String,
    pub victim_b: String,
    pub target_topic: String,
    #[serde(default)]
    pub rules: Vec<RuleSpec>,
    pub start_s: f64,
    /// Defaults to the end of the run.
    #[serde(default)]
    pub stop_s: Option<f64>,
    #[serde(default = "default_scan_window")]
    pub scan_window_ms: f64,
}

fn default_scan_window() -> f64 {
    5.0
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GuardSpec {
    pub auth: AuthSpec,
    pub anomaly: AnomalySpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuthSpec {
    pub enabled: bool,
    pub key: String,
    pub replay_protection: bool,
}

impl Default for AuthSpec {
    fn default() -> Self {
        AuthSpec {
            enabled: false,
            key: "twinsec-shared-key".into(),
            replay_protection: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnomalySpec {
    pub enabled: bool,
    pub fields: Vec<FieldLimitSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldLimitSpec {
    pub path: String,
    #[serde(default)]
    pub max_step: Option<f64>,
    #[serde(default)]
    pub bounds: Option<[f64; 2]>,
}

pub fn seconds_to_nanos(s: f64) -> Nanos {
    (s * NANOS_PER_SEC as f64).round() as Nanos
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Validation {
        field: field.into(),
        message: message.into(),
    }
}

fn non_negative(field: &str, v: f64) -> Result<(), ScenarioError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("must be a finite non-negative number, got {v}")))
    }
}

fn positive(field: &str, v: f64) -> Result<(), ScenarioError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("must be a finite positive number, got {v}")))
    }
}

impl Scenario {
    pub fn duration(&self) -> Nanos {
        seconds_to_nanos(self.duration_s)
    }

    pub fn host(&self, name: &str) -> Option<&HostEntry> {
        self.hosts.iter().find(|h| h.name == name)
    }

    pub fn topic(&self, name: &str) -> Option<&TopicEntry> {
        self.topics.iter().find(|t| t.name == name)
    }

    pub fn topic_index(&self, name: &str) -> Option<usize> {
        self.topics.iter().position(|t| t.name == name)
    }

    /// Resolves a victim given as a host name or an address literal.
    pub fn resolve_ip(&self, who: &str) -> Option<Ipv4Addr> {
        self.host(who).map(|h| h.ip).or_else(|| who.parse().ok())
    }

    /// End of the simulated run: the plant window's last sample.
    pub fn end_time(&self) -> Nanos {
        seconds_to_nanos(self.plant.start_s) + self.duration()
    }

    pub fn mutation_rules(&self) -> Result<Vec<MutationRule>, ScenarioError> {
        let Some(a) = &self.attack else {
            return Ok(Vec::new());
        };
        a.rules
            .iter()
            .enumerate()
            .map(|(i, r)| {
                MutationRule::new(&r.path, r.action.into())
                    .map_err(|e| invalid(format!("attack.rules[{i}].path"), e.to_string()))
            })
            .collect()
    }

    pub fn anomaly_config(&self) -> Result<AnomalyConfig, ScenarioError> {
        let mut limits = Vec::new();
        for (i, f) in self.guards.anomaly.fields.iter().enumerate() {
            let path: FieldPath = f
                .path
                .parse()
                .map_err(|e| invalid(format!("guards.anomaly.fields[{i}].path"), format!("{e}")))?;
            limits.push(FieldLimit {
                path,
                max_step: f.max_step,
                bounds: f.bounds.map(|[lo, hi]| (lo, hi)),
            });
        }
        Ok(AnomalyConfig { limits })
    }

    pub fn initial_state(&self) -> Vec<f64> {
        match (&self.plant.initial, self.plant.kind) {
            (Some(v), _) => v.clone(),
            (None, PlantKind::Drive) => vec![0.0; 3],
            (None, PlantKind::Arm) => vec![0.0; 6],
        }
    }

    /// Checks ranges and cross-references. Errors name the offending field.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.name.trim().is_empty() {
            return Err(invalid("name", "must not be empty"));
        }
        positive("duration_s", self.duration_s)?;
        positive("network.link_latency_us", self.network.link_latency_us as f64)?;
        positive("network.arp_timeout_ms", self.network.arp_timeout_ms as f64)?;
        if self.hosts.is_empty() {
            return Err(invalid("hosts", "at least one host is required"));
        }
        let mut names = BTreeSet::new();
        let mut ips = BTreeSet::new();
        let mut macs = BTreeSet::new();
        let first = self.hosts[0].ip.octets();
        for (i, h) in self.hosts.iter().enumerate() {
            let field = format!("hosts[{i}]");
            if h.name.is_empty() || !names.insert(h.name.as_str()) {
                return Err(invalid(format!("{field}.name"), format!("empty or duplicate host name {:?}", h.name)));
            }
            if !ips.insert(h.ip) {
                return Err(invalid(format!("{field}.ip"), format!("duplicate address {}", h.ip)));
            }
            if h.ip.octets()[..3] != first[..3] {
                return Err(invalid(format!("{field}.ip"), format!("{} is not on the /24 of {}", h.ip, self.hosts[0].ip)));
            }
            if h.mac.is_broadcast() || h.mac == MacAddr::ZERO || !macs.insert(h.mac) {
                return Err(invalid(format!("{field}.mac"), format!("unusable or duplicate mac {}", h.mac)));
            }
        }
        if let Some(m) = &self.master {
            if self.host(m).is_none() {
                return Err(invalid("master", format!("unknown host {m}")));
            }
        }
        self.validate_topics()?;
        self.validate_plant()?;
        self.validate_attack()?;
        self.validate_guards()?;
        self.envelope
            .validate(self.plant.kind)
            .map_err(|e| invalid("envelope", e.to_string()))
    }

    fn validate_topics(&self) -> Result<(), ScenarioError> {
        let registry = builtin_schemas();
        let mut names = BTreeSet::new();
        let mut endpoints = BTreeSet::new();
        if self.topics.is_empty() {
            return Err(invalid("topics", "at least one topic is required"));
        }
        for (i, t) in self.topics.iter().enumerate() {
            let field = |f: &str| format!("topics[{i}].{f}");
            if !t.name.starts_with('/') || !names.insert(t.name.as_str()) {
                return Err(invalid(field("name"), format!("{:?} must start with '/' and be unique", t.name)));
            }
            if registry.lookup(&t.type_name).is_none() {
                return Err(invalid(field("type"), format!("unknown message type {}", t.type_name)));
            }
            for (role, host) in [("publisher", &t.publisher), ("subscriber", &t.subscriber)] {
                if self.host(host).is_none() {
                    return Err(invalid(field(role), format!("unknown host {host}")));
                }
            }
            if t.publisher == t.subscriber {
                return Err(invalid(field("subscriber"), "publisher and subscriber must be different hosts"));
            }
            if !endpoints.insert((t.publisher.as_str(), t.port)) {
                return Err(invalid(field("port"), format!("port {} already used on {}", t.port, t.publisher)));
            }
            positive(&field("rate_hz"), t.rate_hz)?;
            if t.count == Some(0) {
                return Err(invalid(field("count"), "must be at least 1"));
            }
            non_negative(&field("start_s"), t.start_s)?;
            non_negative(&field("connect_s"), t.connect_s)?;
            let expected = match &t.program {
                Program::Twist(_) | Program::TwistSchedule(_) => TWIST,
                Program::ArmGoals(_) => FOLLOW_JOINT_TRAJECTORY_ACTION_GOAL,
                Program::Header { .. } => HEADER,
            };
            if t.type_name != expected {
                return Err(invalid(field("program"), format!("program produces {expected}, topic carries {}", t.type_name)));
            }
            match &t.program {
                Program::Twist(tw) => {
                    if tw.linear.iter().chain(&tw.angular).any(|v| !v.is_finite()) {
                        return Err(invalid(field("program"), "twist components must be finite"));
                    }
                }
                Program::TwistSchedule(entries) => {
                    if entries.is_empty() {
                        return Err(invalid(field("program"), "schedule is empty"));
                    }
                    if entries.windows(2).any(|w| w[0].at_s >= w[1].at_s) {
                        return Err(invalid(field("program"), "schedule times must increase"));
                    }
                    for e in entries {
                        non_negative(&field("program.at_s"), e.at_s)?;
                        if e.linear.iter().chain(&e.angular).any(|v| !v.is_finite()) {
                            return Err(invalid(field("program"), "twist components must be finite"));
                        }
                    }
                }
                Program::ArmGoals(g) => {
                    if joint_index(&g.joint).is_none() {
                        return Err(invalid(field("program.joint"), format!("unknown joint {}", g.joint)));
                    }
                    if !(g.lo.is_finite() && g.hi.is_finite() && g.lo < g.hi) {
                        return Err(invalid(field("program"), "target range needs finite lo < hi"));
                    }
                    positive(&field("program.move_time_s"), g.move_time_s)?;
                }
                Program::Header { .. } => {}
            }
        }
        Ok(())
    }

    fn validate_plant(&self) -> Result<(), ScenarioError> {
        let p = &self.plant;
        let Some(topic) = self.topic(&p.topic) else {
            return Err(invalid("plant.topic", format!("unknown topic {}", p.topic)));
        };
        let expected = match p.kind {
            PlantKind::Drive => TWIST,
            PlantKind::Arm => FOLLOW_JOINT_TRAJECTORY_ACTION_GOAL,
        };
        if topic.type_name != expected {
            return Err(invalid("plant.topic", format!("{:?} plant needs a {expected} topic", p.kind)));
        }
        positive("plant.dt_s", p.dt_s)?;
        non_negative("plant.start_s", p.start_s)?;
        if let Some(init) = &p.initial {
            let want = match p.kind {
                PlantKind::Drive => 3,
                PlantKind::Arm => 6,
            };
            if init.len() != want || init.iter().any(|v| !v.is_finite()) {
                return Err(invalid("plant.initial", format!("expected {want} finite values")));
            }
        }
        if let Some(t) = p.command_timeout_s {
            positive("plant.command_timeout_s", t)?;
            if p.kind != PlantKind::Drive {
                return Err(invalid("plant.command_timeout_s", "applies to drive plants only"));
            }
        }
        Ok(())
    }

    fn validate_attack(&self) -> Result<(), ScenarioError> {
        let Some(a) = &self.attack else {
            return Ok(());
        };
        if self.host(&a.attacker).is_none() {
            return Err(invalid("attack.attacker", format!("unknown host {}", a.attacker)));
        }
        for (field, who) in [("attack.victim_a", &a.victim_a), ("attack.victim_b", &a.victim_b)] {
            if self.resolve_ip(who).is_none() {
                return Err(invalid(field, format!("unknown host {who}")));
            }
            if *who == a.attacker {
                return Err(invalid(field, "victim cannot be the attacker"));
            }
        }
        if self.resolve_ip(&a.victim_a) == self.resolve_ip(&a.victim_b) {
            return Err(invalid("attack.victim_b", "victims must differ"));
        }
        let Some(topic) = self.topic(&a.target_topic) else {
            return Err(invalid("attack.target_topic", format!("unknown topic {}", a.target_topic)));
        };
        non_negative("attack.start_s", a.start_s)?;
        positive("attack.scan_window_ms", a.scan_window_ms)?;
        if let Some(stop) = a.stop_s {
            if !(stop > a.start_s) {
                return Err(invalid("attack.stop_s", "must be after start_s"));
            }
        }
        let schema = builtin_schemas().lookup(&topic.type_name).expect("topic types validated");
        for (i, rule) in self.mutation_rules()?.iter().enumerate() {
            rule.validate(&schema)
                .map_err(|e| invalid(format!("attack.rules[{i}]"), e.to_string()))?;
        }
        Ok(())
    }

    fn validate_guards(&self) -> Result<(), ScenarioError> {
        let g = &self.guards;
        if g.auth.enabled && g.auth.key.is_empty() {
            return Err(invalid("guards.auth.key", "must not be empty when auth is enabled"));
        }
        let cfg = self.anomaly_config()?;
        if g.anomaly.enabled && cfg.limits.is_empty() {
            return Err(invalid("guards.anomaly.fields", "anomaly detection needs at least one field"));
        }
        cfg.validate()
            .map_err(|e| invalid("guards.anomaly.fields", e.to_string()))?;
        let topic = self.topic(&self.plant.topic).expect("plant topic validated");
        let schema = builtin_schemas().lookup(&topic.type_name).expect("topic types validated");
        for (i, l) in cfg.limits.iter().enumerate() {
            if !l.path.resolves_to_f64(&schema) {
                return Err(invalid(
                    format!("guards.anomaly.fields[{i}].path"),
                    format!("{} is not a float64 field of {}", l.path, schema.type_name),
                ));
            }
        }
        Ok(())
    }
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let s: Scenario = serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    s.validate()?;
    Ok(s)
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_scenario(&text)
}
