use std::collections::BTreeMap;
use std::net::Ipv4Addr;
use std::sync::Arc;

use serde::Serialize;

use crate::netsim::{Frame, FrameKind, HostId, MacAddr, Nanos, NetAddr, Network};
use crate::pubsub::TopicRecord;
use crate::wire::{builtin_schemas, decode_header, split_message, MessageSchema, SchemaRegistry};

use super::{mutate, AttackError, MutationRule};

/// What the attacker should do, against whom, and when.
#[derive(Debug, Clone)]
pub struct AttackPlan {
    pub attacker: HostId,
    /// Publishing side (the twin).
    pub victim_a: Ipv4Addr,
    /// Subscribing side (the physical robot).
    pub victim_b: Ipv4Addr,
    pub target_topic: String,
    pub rules: Vec<MutationRule>,
    pub start_time: Nanos,
    pub stop_time: Nanos,
    /// How long the scan waits for ARP replies.
    pub scan_window: Nanos,
}

impl AttackPlan {
    pub fn validate(&self) -> Result<(), AttackError> {
        if self.start_time >= self.stop_time {
            return Err(AttackError::InvalidPlan("start_time must precede stop_time".into()));
        }
        if self.target_topic.is_empty() {
            return Err(AttackError::InvalidPlan("target_topic is empty".into()));
        }
        if self.victim_a == self.victim_b {
            return Err(AttackError::InvalidPlan("victims must differ".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    HeaderFrame,
    TargetMessage,
    Passthrough,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct InterceptCounters {
    pub seen: u64,
    pub matched: u64,
    pub mutated: u64,
    pub forwarded: u64,
    pub headers: u64,
    pub errors: u64,
}

type Endpoint = (Ipv4Addr, u16);

#[derive(Debug, Clone, Default)]
struct ConnTrack {
    /// Whether the first frame in each direction has been looked at.
    opened: [bool; 2],
    topic: Option<String>,
    publisher: Option<Endpoint>,
    schema: Option<Arc<MessageSchema>>,
    counters: InterceptCounters,
}

/// Per-connection view of a tracked stream, for reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConnectionSummary {
    pub endpoints: [String; 2],
    pub topic: Option<String>,
    pub type_name: Option<String>,
    pub counters: InterceptCounters,
}

/// What the attacker has learned about the traffic it relays.
#[derive(Debug, Clone)]
pub struct InterceptState {
    target_topic: String,
    victims: (Ipv4Addr, Ipv4Addr),
    registry: SchemaRegistry,
    known_publishers: BTreeMap<Endpoint, (String, Arc<MessageSchema>)>,
    conns: BTreeMap<(Endpoint, Endpoint), ConnTrack>,
}

impl InterceptState {
    pub fn new(target_topic: &str, victim_a: Ipv4Addr, victim_b: Ipv4Addr) -> Self {
        InterceptState {
            target_topic: target_topic.to_string(),
            victims: (victim_a, victim_b),
            registry: builtin_schemas(),
            known_publishers: BTreeMap::new(),
            conns: BTreeMap::new(),
        }
    }

    /// Records a publisher endpoint read from the master registry.
    pub fn learn_publisher(&mut self, rec: &TopicRecord) {
        if let Some(schema) = self.registry.lookup(&rec.type_name) {
            self.known_publishers
                .insert((rec.publisher_ip, rec.port), (rec.topic.clone(), schema));
        }
    }

    fn on_victim_pair(&self, f: &Frame) -> bool {
        let (a, b) = self.victims;
        (f.src_ip == a && f.dst_ip == b) || (f.src_ip == b && f.dst_ip == a)
    }

    pub fn classify_frame(&mut self, f: &Frame) -> Classification {
        if f.kind != FrameKind::Stream || !self.on_victim_pair(f) {
            return Classification::Passthrough;
        }
        let src = (f.src_ip, f.src_port);
        let dst = (f.dst_ip, f.dst_port);
        let key = (src.min(dst), src.max(dst));
        let dir = usize::from(src != key.0);
        let track = self.conns.entry(key).or_default();

        if !track.opened[dir] {
            track.opened[dir] = true;
            if let Ok(h) = decode_header(&f.payload) {
                track.publisher.get_or_insert(dst);
                if let Some(topic) = h.get("topic") {
                    track.topic = Some(topic.to_string());
                }
                if let Some(schema) = h.get("type").and_then(|t| self.registry.lookup(t)) {
                    track.schema = Some(schema);
                }
                return Classification::HeaderFrame;
            }
        }
        if track.topic.is_none() {
            for end in [src, dst] {
                if let Some((topic, schema)) = self.known_publishers.get(&end) {
                    track.topic = Some(topic.clone());
                    track.publisher = Some(end);
                    track.schema = Some(schema.clone());
                }
            }
        }
        let is_target = track.topic.as_deref() == Some(self.target_topic.as_str())
            && track.publisher == Some(src)
            && track.schema.is_some();
        if is_target {
            Classification::TargetMessage
        } else {
            Classification::Passthrough
        }
    }

    fn track_mut(&mut self, f: &Frame) -> Option<&mut ConnTrack> {
        let src = (f.src_ip, f.src_port);
        let dst = (f.dst_ip, f.dst_port);
        self.conns.get_mut(&(src.min(dst), src.max(dst)))
    }

    fn schema_for(&self, f: &Frame) -> Option<Arc<MessageSchema>> {
        let src = (f.src_ip, f.src_port);
        let dst = (f.dst_ip, f.dst_port);
        self.conns.get(&(src.min(dst), src.max(dst)))?.schema.clone()
    }

    pub fn connections(&self) -> Vec<ConnectionSummary> {
        self.conns
            .iter()
            .map(|((a, b), t)| ConnectionSummary {
                endpoints: [format!("{}:{}", a.0, a.1), format!("{}:{}", b.0, b.1)],
                topic: t.topic.clone(),
                type_name: t.schema.as_ref().map(|s| s.type_name.clone()),
                counters: t.counters,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackPhase {
    Idle,
    Scanning,
    Active,
    Stopped,
    Aborted,
}

/// Report-friendly snapshot of an attack run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttackSummary {
    pub phase: AttackPhase,
    pub discovered: Vec<String>,
    pub poisoned_at: Option<Nanos>,
    pub stopped_at: Option<Nanos>,
    pub error: Option<String>,
    pub counters: InterceptCounters,
    pub connections: Vec<ConnectionSummary>,
}

/// The attacker host's event-driven behavior: scan, poison both victims,
/// then classify, rewrite and relay every frame diverted to it.
#[derive(Debug, Clone)]
pub struct Attacker {
    plan: AttackPlan,
    state: InterceptState,
    phase: AttackPhase,
    discovered: BTreeMap<Ipv4Addr, MacAddr>,
    counters: InterceptCounters,
    poisoned_at: Option<Nanos>,
    stopped_at: Option<Nanos>,
    error: Option<AttackError>,
}

impl Attacker {
    pub fn new(plan: AttackPlan) -> Result<Self, AttackError> {
        plan.validate()?;
        let state = InterceptState::new(&plan.target_topic, plan.victim_a, plan.victim_b);
        Ok(Attacker {
            plan,
            state,
            phase: AttackPhase::Idle,
            discovered: BTreeMap::new(),
            counters: InterceptCounters::default(),
            poisoned_at: None,
            stopped_at: None,
            error: None,
        })
    }

    pub fn plan(&self) -> &AttackPlan {
        &self.plan
    }

    pub fn phase(&self) -> AttackPhase {
        self.phase
    }

    pub fn counters(&self) -> InterceptCounters {
        self.counters
    }

    pub fn intercept(&self) -> &InterceptState {
        &self.state
    }

    pub fn learn_publisher(&mut self, rec: &TopicRecord) {
        self.state.learn_publisher(rec);
    }

    /// Broadcasts an ARP request for every other subnet address. Returns the
    /// time at which [`Attacker::finish_scan`] should be called.
    pub fn start<T>(&mut self, net: &mut Network<T>) -> Nanos {
        let me = net.spec(self.plan.attacker).ip;
        let mut targets = net.subnet_ips();
        for v in [self.plan.victim_a, self.plan.victim_b] {
            if !targets.contains(&v) {
                targets.push(v);
            }
        }
        targets.sort();
        for ip in targets.into_iter().filter(|ip| *ip != me) {
            net.send_arp_request(self.plan.attacker, ip);
        }
        self.phase = AttackPhase::Scanning;
        net.now() + self.plan.scan_window
    }

    pub fn on_arp_reply(&mut self, from: NetAddr) {
        if self.phase == AttackPhase::Scanning {
            self.discovered.insert(from.ip, from.mac);
        }
    }

    /// Ends the scan. If both victims answered, tells each that the other's
    /// ip lives at the attacker's mac.
    pub fn finish_scan<T>(&mut self, net: &mut Network<T>) -> Result<(), AttackError> {
        if self.phase != AttackPhase::Scanning {
            return Ok(());
        }
        let (a, b) = (self.plan.victim_a, self.plan.victim_b);
        let (Some(mac_a), Some(mac_b)) = (self.discovered.get(&a).copied(), self.discovered.get(&b).copied()) else {
            let missing = if self.discovered.contains_key(&a) { b } else { a };
            let err = AttackError::VictimNotFound(missing);
            log::warn!("attack aborted: {err}");
            self.phase = AttackPhase::Aborted;
            self.error = Some(err.clone());
            return Err(err);
        };
        let mine = net.spec(self.plan.attacker).mac;
        let id = self.plan.attacker;
        net.send_arp_reply(id, NetAddr { ip: a, mac: mac_a }, NetAddr { ip: b, mac: mine });
        net.send_arp_reply(id, NetAddr { ip: b, mac: mac_b }, NetAddr { ip: a, mac: mine });
        self.phase = AttackPhase::Active;
        self.poisoned_at = Some(net.now() + net.config().link_latency);
        log::info!("poisoned {a} and {b}");
        Ok(())
    }

    /// Restores both victims' caches with the true bindings. Frames still in
    /// flight keep being relayed, unmodified.
    pub fn stop<T>(&mut self, net: &mut Network<T>) {
        if self.phase == AttackPhase::Active {
            let (a, b) = (self.plan.victim_a, self.plan.victim_b);
            let mac_a = self.discovered[&a];
            let mac_b = self.discovered[&b];
            let id = self.plan.attacker;
            net.send_arp_reply(id, NetAddr { ip: a, mac: mac_a }, NetAddr { ip: b, mac: mac_b });
            net.send_arp_reply(id, NetAddr { ip: b, mac: mac_b }, NetAddr { ip: a, mac: mac_a });
        }
        if self.phase != AttackPhase::Aborted {
            self.phase = AttackPhase::Stopped;
        }
        self.stopped_at = Some(net.now());
    }

    pub fn classify_frame(&mut self, f: &Frame) -> Classification {
        self.state.classify_frame(f)
    }

    /// Handles a stream frame that arrived at the attacker but was addressed
    /// to someone else. Exactly one frame is sent on in its place.
    pub fn on_frame<T>(&mut self, net: &mut Network<T>, frame: Frame) {
        self.counters.seen += 1;
        let class = self.state.classify_frame(&frame);
        let mutating = self.phase == AttackPhase::Active;
        let (payload, note) = match class {
            Classification::HeaderFrame => {
                self.counters.headers += 1;
                (frame.payload.clone(), "header")
            }
            Classification::Passthrough => (frame.payload.clone(), "passthrough"),
            Classification::TargetMessage if !mutating => (frame.payload.clone(), "target-unchanged"),
            Classification::TargetMessage => {
                self.counters.matched += 1;
                let k = self.counters.matched;
                self.rewrite(&frame, k)
            }
        };
        if let Some(t) = self.state.track_mut(&frame) {
            t.counters.seen += 1;
            t.counters.forwarded += 1;
            if class == Classification::HeaderFrame {
                t.counters.headers += 1;
            }
            if class == Classification::TargetMessage && mutating {
                t.counters.matched += 1;
                match note {
                    "target-mutated" => t.counters.mutated += 1,
                    "target-error" => t.counters.errors += 1,
                    _ => {}
                }
            }
        }
        self.forward(net, frame, payload, note);
    }

    fn rewrite(&mut self, frame: &Frame, k: u64) -> (Vec<u8>, &'static str) {
        let Some(schema) = self.state.schema_for(frame) else {
            return (frame.payload.clone(), "target-unchanged");
        };
        let Some((msg, trailer)) = split_message(&frame.payload) else {
            self.counters.errors += 1;
            return (frame.payload.clone(), "target-error");
        };
        match mutate(&schema, msg, &self.plan.rules, k) {
            Ok(out) if out == msg => (frame.payload.clone(), "target-unchanged"),
            Ok(mut out) => {
                out.extend_from_slice(trailer);
                self.counters.mutated += 1;
                (out, "target-mutated")
            }
            Err(e) => {
                log::warn!("forwarding message {k} unmodified: {e}");
                self.counters.errors += 1;
                (frame.payload.clone(), "target-error")
            }
        }
    }

    /// Re-emits `frame` towards its true destination mac with `payload`.
    /// IP-layer addressing is left as the sender wrote it.
    pub fn forward<T>(&mut self, net: &mut Network<T>, mut frame: Frame, payload: Vec<u8>, note: &str) {
        let dst_mac = self
            .discovered
            .get(&frame.dst_ip)
            .copied()
            .or_else(|| net.arp_cache(self.plan.attacker).get(frame.dst_ip));
        frame.src_mac = net.spec(self.plan.attacker).mac;
        frame.dst_mac = dst_mac.unwrap_or(MacAddr::ZERO);
        frame.payload = payload;
        self.counters.forwarded += 1;
        net.transmit(self.plan.attacker, frame, Some(note.to_string()));
    }

    pub fn summary(&self) -> AttackSummary {
        AttackSummary {
            phase: self.phase,
            discovered: self.discovered.iter().map(|(ip, mac)| format!("{ip} {mac}")).collect(),
            poisoned_at: self.poisoned_at,
            stopped_at: self.stopped_at,
            error: self.error.as_ref().map(|e| e.to_string()),
            counters: self.counters,
            connections: self.state.connections(),
        }
    }
}
