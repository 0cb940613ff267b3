use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::attack::{AttackPlan, AttackSummary, Attacker};
use crate::guard::AuthConfig;
use crate::netsim::{write_jsonl, HostEvent, HostId, HostSpec, Nanos, NetConfig, NetStats, Network, TraceRecord};
use crate::plant::{
    evaluate_safety, format_nanos, joint_index, step_arm, step_drive, ArmGoal, ArmState, DrivePose, PlantError,
    PlantKind, SafetyReport, StateSeries, Twist,
};
use crate::pubsub::{Graph, Publisher, Routed, SubEvent, Subscriber, SubscriberCounters};
use crate::wire::{builtin_schemas, FieldValue};

use super::scenario::{seconds_to_nanos, Program, Scenario};
use super::RunError;

pub const INTEGRITY_NOTE: &str = "message tags give integrity, not confidentiality: the attacker still reads every \
command in clear, but cannot alter one without the key";

const HELD_COMMAND_NOTE: &str = "rejected commands are dropped and the robot keeps acting on the last accepted one, \
so a tampering attacker is reduced to starving the robot of updates";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubscriberReport {
    pub topic: String,
    pub host: String,
    #[serde(flatten)]
    pub counters: SubscriberCounters,
}

/// Rejections on the plant's command topic: the residual effect of a
/// defeated attack.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeldCommand {
    pub rejected_messages: u64,
    pub note: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub duration_s: f64,
    pub plant: PlantKind,
    pub attack_enabled: bool,
    pub auth_enabled: bool,
    pub anomaly_enabled: bool,
    pub safety: SafetyReport,
    pub attack: Option<AttackSummary>,
    pub subscribers: Vec<SubscriberReport>,
    pub held_command: HeldCommand,
    pub integrity_note: &'static str,
    pub network: NetStats,
    pub plant_errors: u64,
    pub final_dts: Vec<f64>,
    pub final_cps: Vec<f64>,
    pub files: Vec<String>,
    #[serde(skip)]
    pub wall_clock: Duration,
}

impl RunReport {
    pub fn msgs_seen(&self) -> u64 {
        self.attack.as_ref().map_or(0, |a| a.counters.seen)
    }

    pub fn msgs_mutated(&self) -> u64 {
        self.attack.as_ref().map_or(0, |a| a.counters.mutated)
    }

    pub fn msgs_rejected(&self) -> u64 {
        self.subscribers.iter().map(|s| s.counters.rejected()).sum()
    }

    pub fn write_metrics_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "scenario,seed,duration_s,msgs_seen,msgs_mutated,msgs_rejected,max_divergence,first_violation_t,violation_kind"
        )?;
        let (t, kind) = match &self.safety.first_violation {
            Some(v) => (format_nanos(v.t), format!("{:?}", v.kind)),
            None => (String::new(), String::new()),
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            self.scenario,
            self.seed,
            self.duration_s,
            self.msgs_seen(),
            self.msgs_mutated(),
            self.msgs_rejected(),
            self.safety.max_divergence,
            t,
            kind
        )
    }
}

/// Everything a run produces, kept in memory.
#[derive(Debug, Clone)]
pub struct SimOutput {
    pub report: RunReport,
    pub dts: StateSeries,
    pub cps: StateSeries,
    pub trace: Vec<TraceRecord>,
}

enum SimTimer {
    Connect(usize),
    Publish { topic: usize, k: u64 },
    Tick(u64),
    TwinApply(FieldValue),
    AttackStart,
    AttackScanDone,
    AttackStop,
}

enum Twin {
    Drive { pose: DrivePose, last_cmd_at: Option<Nanos> },
    Arm(ArmState),
}

impl Twin {
    fn new(kind: PlantKind, init: &[f64]) -> Self {
        match kind {
            PlantKind::Drive => Twin::Drive {
                pose: DrivePose::new(init[0], init[1], init[2]),
                last_cmd_at: None,
            },
            PlantKind::Arm => {
                let mut a = [0.0; 6];
                a.copy_from_slice(init);
                Twin::Arm(ArmState::new(a))
            }
        }
    }

    fn apply(&mut self, v: &FieldValue, t: Nanos) -> Result<(), PlantError> {
        match self {
            Twin::Drive { pose, last_cmd_at } => {
                let cmd = Twist::from_value(v).ok_or(PlantError::NonFiniteCommand)?;
                pose.set_command(cmd)?;
                *last_cmd_at = Some(t);
                Ok(())
            }
            Twin::Arm(a) => a.receive_goal(&ArmGoal::from_action_goal(v)?, t),
        }
    }

    fn sample(&mut self, t: Nanos, series: &mut StateSeries) {
        match self {
            Twin::Drive { pose, .. } => series.push_drive(t, pose),
            Twin::Arm(a) => {
                *a = step_arm(a, t);
                series.push_arm(t, a);
            }
        }
    }

    fn step(&mut self, t: Nanos, dt: f64, timeout: Option<Nanos>) {
        if let Twin::Drive { pose, last_cmd_at } = self {
            if let (Some(limit), Some(at)) = (timeout, *last_cmd_at) {
                if t.saturating_sub(at) > limit {
                    pose.last_cmd = Twist::default();
                    *last_cmd_at = None;
                }
            }
            *pose = step_drive(pose, dt);
        }
    }
}

struct Sim<'a> {
    s: &'a Scenario,
    net: Network<SimTimer>,
    graph: Graph,
    attacker: Option<(HostId, Attacker)>,
    dts: Twin,
    cps: Twin,
    dts_series: StateSeries,
    cps_series: StateSeries,
    rngs: Vec<ChaCha8Rng>,
    plant_topic: usize,
    end: Nanos,
    ticks: u64,
    dt_ns: Nanos,
    plant_errors: u64,
}

fn runtime(t: Nanos, message: impl ToString) -> RunError {
    RunError::Runtime {
        t,
        message: message.to_string(),
    }
}

impl<'a> Sim<'a> {
    fn build(s: &'a Scenario) -> Result<Self, RunError> {
        let mut net = Network::new(NetConfig {
            link_latency: s.network.link_latency_us * 1_000,
            arp_timeout: s.network.arp_timeout_ms * 1_000_000,
        });
        let mut hosts = Vec::new();
        for h in &s.hosts {
            hosts.push(
                net.add_host(HostSpec::new(&h.name, h.ip, h.mac))
                    .map_err(|e| runtime(0, e))?,
            );
        }
        let host = |name: &str| hosts[s.hosts.iter().position(|h| h.name == name).expect("validated host")];
        let registry = builtin_schemas();
        let auth = s.guards.auth.enabled.then(|| AuthConfig {
            key: s.guards.auth.key.as_bytes().to_vec(),
            replay_protection: s.guards.auth.replay_protection,
        });
        let anomaly = s.anomaly_config()?;
        let plant_topic = s.topic_index(&s.plant.topic).expect("validated plant topic");

        let mut graph = Graph::new();
        for (i, t) in s.topics.iter().enumerate() {
            let schema = registry.lookup(&t.type_name).expect("validated type");
            let mut p = Publisher::new(host(&t.publisher), &format!("/{}", t.publisher), &t.name, schema.clone(), t.port);
            let mut sub = Subscriber::new(
                host(&t.subscriber),
                &format!("/{}", t.subscriber),
                &t.name,
                schema,
                50000 + i as u16,
            );
            if let Some(cfg) = &auth {
                p = p.with_auth(cfg.clone());
                sub = sub.with_auth(cfg.clone());
            }
            if i == plant_topic && s.guards.anomaly.enabled {
                sub = sub.with_anomaly(anomaly.clone());
            }
            graph.add_publisher(&net, p).map_err(|e| runtime(0, e))?;
            graph.add_subscriber(sub);
            net.schedule(seconds_to_nanos(t.connect_s), host(&t.subscriber), SimTimer::Connect(i));
            net.schedule(seconds_to_nanos(t.start_s), host(&t.publisher), SimTimer::Publish { topic: i, k: 0 });
        }

        let end = s.end_time();
        let dt_ns = seconds_to_nanos(s.plant.dt_s);
        let ticks = s.duration() / dt_ns;
        let dts_host = host(&s.topics[plant_topic].publisher);
        net.schedule(seconds_to_nanos(s.plant.start_s), dts_host, SimTimer::Tick(0));

        let attacker = match &s.attack {
            None => None,
            Some(a) => {
                let id = host(&a.attacker);
                let plan = AttackPlan {
                    attacker: id,
                    victim_a: s.resolve_ip(&a.victim_a).expect("validated victim"),
                    victim_b: s.resolve_ip(&a.victim_b).expect("validated victim"),
                    target_topic: a.target_topic.clone(),
                    rules: s.mutation_rules()?,
                    start_time: seconds_to_nanos(a.start_s),
                    stop_time: a.stop_s.map_or(end.max(seconds_to_nanos(a.start_s) + 1), seconds_to_nanos),
                    scan_window: seconds_to_nanos(a.scan_window_ms / 1e3),
                };
                net.schedule(plan.start_time, id, SimTimer::AttackStart);
                if plan.stop_time <= end {
                    net.schedule(plan.stop_time, id, SimTimer::AttackStop);
                }
                Some((id, Attacker::new(plan).map_err(|e| runtime(0, e))?))
            }
        };

        let init = s.initial_state();
        let rngs = (0..s.topics.len())
            .map(|i| {
                let mut r = ChaCha8Rng::seed_from_u64(s.seed);
                r.set_stream(i as u64);
                r
            })
            .collect();
        Ok(Sim {
            s,
            net,
            graph,
            attacker,
            dts: Twin::new(s.plant.kind, &init),
            cps: Twin::new(s.plant.kind, &init),
            dts_series: StateSeries::new(s.plant.kind),
            cps_series: StateSeries::new(s.plant.kind),
            rngs,
            plant_topic,
            end,
            ticks,
            dt_ns,
            plant_errors: 0,
        })
    }

    fn program_value(&mut self, topic: usize, k: u64, t: Nanos) -> FieldValue {
        match &self.s.topics[topic].program {
            Program::Twist(tw) => Twist {
                linear: tw.linear,
                angular: tw.angular,
            }
            .to_value(),
            Program::TwistSchedule(entries) => {
                let cur = entries.iter().rev().find(|e| seconds_to_nanos(e.at_s) <= t);
                cur.map_or(Twist::default(), |e| Twist {
                    linear: e.linear,
                    angular: e.angular,
                })
                .to_value()
            }
            Program::ArmGoals(g) => {
                let mut positions = [0.0; 6];
                if self.s.plant.kind == PlantKind::Arm {
                    positions.copy_from_slice(&self.s.initial_state());
                }
                let j = joint_index(&g.joint).expect("validated joint");
                positions[j] = self.rngs[topic].gen_range(g.lo..g.hi);
                ArmGoal::single(positions, seconds_to_nanos(g.move_time_s)).to_action_goal(
                    k as u32,
                    t,
                    &format!("goal_{k}"),
                )
            }
            Program::Header { frame_id } => FieldValue::record([
                ("seq", FieldValue::UInt32(k as u32)),
                (
                    "stamp",
                    FieldValue::Time {
                        secs: (t / 1_000_000_000) as u32,
                        nsecs: (t % 1_000_000_000) as u32,
                    },
                ),
                ("frame_id", FieldValue::str(frame_id)),
            ]),
        }
    }

    fn on_timer(&mut self, t: Nanos, host: HostId, timer: SimTimer) -> Result<(), RunError> {
        match timer {
            SimTimer::Connect(i) => self.graph.subscribe(&mut self.net, i).map_err(|e| runtime(t, e))?,
            SimTimer::Publish { topic, k } => {
                let value = self.program_value(topic, k, t);
                self.graph.publishers[topic]
                    .publish(&mut self.net, &value)
                    .map_err(|e| runtime(t, e))?;
                if topic == self.plant_topic {
                    let at = t + self.net.config().link_latency;
                    self.net.schedule(at, host, SimTimer::TwinApply(value));
                }
                let entry = &self.s.topics[topic];
                let period = (1e9 / entry.rate_hz).round() as Nanos;
                let next = seconds_to_nanos(entry.start_s) + (k + 1) * period.max(1);
                if next <= self.end && entry.count.is_none_or(|n| k + 1 < n) {
                    self.net.schedule(next, host, SimTimer::Publish { topic, k: k + 1 });
                }
            }
            SimTimer::TwinApply(v) => {
                if let Err(e) = self.dts.apply(&v, t) {
                    log::warn!("twin rejected its own command at {}: {e}", format_nanos(t));
                    self.plant_errors += 1;
                }
            }
            SimTimer::Tick(k) => {
                self.dts.sample(t, &mut self.dts_series);
                self.cps.sample(t, &mut self.cps_series);
                if k < self.ticks {
                    let dt = self.s.plant.dt_s;
                    let timeout = self.s.plant.command_timeout_s.map(seconds_to_nanos);
                    self.dts.step(t, dt, timeout);
                    self.cps.step(t, dt, timeout);
                    self.net.schedule(t + self.dt_ns, host, SimTimer::Tick(k + 1));
                }
            }
            SimTimer::AttackStart => {
                if let Some((id, a)) = &mut self.attacker {
                    for rec in self.graph.master.topics() {
                        a.learn_publisher(rec);
                    }
                    let at = a.start(&mut self.net);
                    self.net.schedule(at, *id, SimTimer::AttackScanDone);
                }
            }
            SimTimer::AttackScanDone => {
                if let Some((_, a)) = &mut self.attacker {
                    // a missing victim is recorded in the summary; the run goes on
                    let _ = a.finish_scan(&mut self.net);
                }
            }
            SimTimer::AttackStop => {
                if let Some((_, a)) = &mut self.attacker {
                    a.stop(&mut self.net);
                }
            }
        }
        Ok(())
    }

    fn run(&mut self) -> Result<(), RunError> {
        while let Some((t, ev)) = self.net.next_event(self.end) {
            match ev {
                HostEvent::Timer { host, payload } => self.on_timer(t, host, payload)?,
                HostEvent::ArpReply { host, from } => {
                    if let Some((id, a)) = &mut self.attacker {
                        if *id == host {
                            a.on_arp_reply(from);
                        }
                    }
                }
                HostEvent::ArpTimeout { host, ip, .. } => {
                    if let Some((_, SubEvent::Failed(e))) = self.graph.arp_timeout(host, ip).into_iter().next() {
                        return Err(runtime(t, e));
                    }
                }
                HostEvent::Stream { host, frame } => {
                    if let Some((id, a)) = &mut self.attacker {
                        if *id == host && frame.dst_ip != self.net.spec(host).ip {
                            a.on_frame(&mut self.net, frame);
                            continue;
                        }
                    }
                    match self.graph.route(&mut self.net, host, &frame) {
                        Routed::Subscriber {
                            index,
                            event: SubEvent::Delivered(v),
                        } if index == self.plant_topic => {
                            if let Err(e) = self.cps.apply(&v, t) {
                                log::warn!("robot rejected a command at {}: {e}", format_nanos(t));
                                self.plant_errors += 1;
                            }
                        }
                        Routed::Subscriber {
                            event: SubEvent::Failed(e),
                            ..
                        } => return Err(runtime(t, e)),
                        Routed::Publisher { result: Err(e), .. } => {
                            log::warn!("publisher refused a connection at {}: {e}", format_nanos(t));
                        }
                        _ => {}
                    }
                }
            }
        }
        Ok(())
    }

    fn finish(mut self) -> Result<SimOutput, RunError> {
        let s = self.s;
        let safety = evaluate_safety(&self.dts_series, &self.cps_series, &s.envelope).map_err(|e| runtime(self.end, e))?;
        let subscribers: Vec<SubscriberReport> = self
            .graph
            .subscribers
            .iter()
            .zip(&s.topics)
            .map(|(sub, t)| SubscriberReport {
                topic: t.name.clone(),
                host: t.subscriber.clone(),
                counters: sub.counters,
            })
            .collect();
        let held = subscribers[self.plant_topic].counters.rejected();
        let report = RunReport {
            scenario: s.name.clone(),
            seed: s.seed,
            duration_s: s.duration_s,
            plant: s.plant.kind,
            attack_enabled: s.attack.is_some(),
            auth_enabled: s.guards.auth.enabled,
            anomaly_enabled: s.guards.anomaly.enabled,
            safety,
            attack: self.attacker.as_ref().map(|(_, a)| a.summary()),
            subscribers,
            held_command: HeldCommand {
                rejected_messages: held,
                note: HELD_COMMAND_NOTE,
            },
            integrity_note: INTEGRITY_NOTE,
            network: self.net.stats(),
            plant_errors: self.plant_errors,
            final_dts: self.dts_series.rows.last().cloned().unwrap_or_default(),
            final_cps: self.cps_series.rows.last().cloned().unwrap_or_default(),
            files: Vec::new(),
            wall_clock: Duration::ZERO,
        };
        Ok(SimOutput {
            report,
            trace: self.net.take_trace(),
            dts: self.dts_series,
            cps: self.cps_series,
        })
    }
}

/// Runs a validated scenario entirely in memory.
pub fn simulate(s: &Scenario) -> Result<SimOutput, RunError> {
    s.validate()?;
    let started = Instant::now();
    let mut sim = Sim::build(s)?;
    sim.run()?;
    let mut out = sim.finish()?;
    out.report.wall_clock = started.elapsed();
    Ok(out)
}

pub const OUTPUT_FILES: [&str; 6] = [
    "trace.jsonl",
    "dts_state.csv",
    "cps_state.csv",
    "divergence.csv",
    "metrics.csv",
    "report.json",
];

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> RunError + '_ {
    move |e| RunError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), RunError> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    f(&mut w).and_then(|_| w.flush()).map_err(io_err(path))
}

/// Writes every artifact of `out` into `dir`, which is created if needed.
pub fn emit_outputs(out: &mut SimOutput, dir: &Path) -> Result<(), RunError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    out.report.files = OUTPUT_FILES.iter().map(|f| f.to_string()).collect();
    write_file(&dir.join("trace.jsonl"), |w| write_jsonl(&out.trace, w))?;
    write_file(&dir.join("dts_state.csv"), |w| out.dts.write_csv(w))?;
    write_file(&dir.join("cps_state.csv"), |w| out.cps.write_csv(w))?;
    write_file(&dir.join("divergence.csv"), |w| out.report.safety.write_divergence_csv(w))?;
    write_file(&dir.join("metrics.csv"), |w| out.report.write_metrics_csv(w))?;
    write_file(&dir.join("report.json"), |w| {
        serde_json::to_writer_pretty(&mut *w, &out.report)?;
        writeln!(w)
    })
}

/// Simulates `s` and writes its artifacts into `dir`.
pub fn run_scenario(s: &Scenario, dir: &Path) -> Result<RunReport, RunError> {
    let mut out = simulate(s)?;
    emit_outputs(&mut out, dir)?;
    Ok(out.report)
}
