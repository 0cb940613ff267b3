//! A small ROS1-style computation graph over the simulated LAN.
//!
//! The subscriber opens each connection by sending its connection header;
//! the publisher answers with its own, and only then streams
//! length-prefixed messages.

mod master;
mod node;

use std::net::Ipv4Addr;

pub use master::{Master, TopicRecord};
pub use node::{ConnState, Connection, Publisher, Rejection, SubEvent, Subscriber, SubscriberCounters};

use crate::netsim::{Frame, HostId, Network};
use crate::wire::WireError;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PubSubError {
    #[error("topic {0} already has a publisher")]
    DuplicateTopic(String),
    #[error("unknown topic {0}")]
    UnknownTopic(String),
    #[error("type mismatch: expected {expected}, got {got}")]
    TypeMismatch { expected: String, got: String },
    #[error("connection not established")]
    NotEstablished,
    #[error("publisher at {0} unreachable")]
    Unreachable(Ipv4Addr),
    #[error(transparent)]
    Wire(#[from] WireError),
}

/// Where an incoming stream frame ended up.
#[derive(Debug, Clone, PartialEq)]
pub enum Routed {
    Publisher { index: usize, result: Result<(), PubSubError> },
    Subscriber { index: usize, event: SubEvent },
    /// Not addressed to any node on the receiving host.
    Unrouted,
}

/// Master plus every publisher and subscriber in a run.
#[derive(Default)]
pub struct Graph {
    pub master: Master,
    pub publishers: Vec<Publisher>,
    pub subscribers: Vec<Subscriber>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_publisher<T>(&mut self, net: &Network<T>, publisher: Publisher) -> Result<usize, PubSubError> {
        let ip = net.spec(publisher.host).ip;
        self.master
            .register_publisher(publisher.host, ip, &publisher.topic, &publisher.schema, publisher.port)?;
        self.publishers.push(publisher);
        Ok(self.publishers.len() - 1)
    }

    pub fn add_subscriber(&mut self, subscriber: Subscriber) -> usize {
        self.subscribers.push(subscriber);
        self.subscribers.len() - 1
    }

    pub fn subscribe<T>(&mut self, net: &mut Network<T>, index: usize) -> Result<(), PubSubError> {
        self.subscribers[index].subscribe(net, &self.master)
    }

    /// Dispatches a stream frame that arrived at `host` to the node owning
    /// its destination port. Frames whose destination ip is not `host`'s own
    /// are never routed.
    pub fn route<T>(&mut self, net: &mut Network<T>, host: HostId, frame: &Frame) -> Routed {
        if frame.dst_ip != net.spec(host).ip {
            return Routed::Unrouted;
        }
        if let Some(index) = self
            .publishers
            .iter()
            .position(|p| p.host == host && p.port == frame.dst_port)
        {
            let result = self.publishers[index].handle_frame(net, frame);
            return Routed::Publisher { index, result };
        }
        if let Some(index) = self
            .subscribers
            .iter()
            .position(|s| s.host == host && s.local_port == frame.dst_port)
        {
            let event = self.subscribers[index].handle_frame(frame);
            return Routed::Subscriber { index, event };
        }
        Routed::Unrouted
    }

    /// Fails subscribers on `host` whose publisher ip never resolved.
    pub fn arp_timeout(&mut self, host: HostId, ip: Ipv4Addr) -> Vec<(usize, SubEvent)> {
        self.subscribers
            .iter_mut()
            .enumerate()
            .filter(|(_, s)| {
                s.host == host
                    && s
                        .connection()
                        .is_some_and(|c| c.remote_ip == ip && c.state == ConnState::HandshakeSent)
            })
            .map(|(i, s)| (i, s.fail_unreachable(ip)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netsim::{HostEvent, HostSpec, MacAddr, NetConfig, Nanos, NANOS_PER_MS};
    use crate::wire::{builtin_schemas, FieldValue, TWIST};

    fn setup() -> (Network<()>, Graph, HostId, HostId) {
        let mut net = Network::new(NetConfig::default());
        let dts = net
            .add_host(HostSpec::new("dts", Ipv4Addr::new(10, 0, 0, 10), MacAddr([2, 0, 0, 0, 0, 10])))
            .unwrap();
        let cps = net
            .add_host(HostSpec::new("cps", Ipv4Addr::new(10, 0, 0, 20), MacAddr([2, 0, 0, 0, 0, 20])))
            .unwrap();
        (net, Graph::new(), dts, cps)
    }

    fn twist(x: f64) -> FieldValue {
        let v3 = |x| {
            FieldValue::record([
                ("x", FieldValue::Float64(x)),
                ("y", FieldValue::Float64(0.0)),
                ("z", FieldValue::Float64(0.0)),
            ])
        };
        FieldValue::record([("linear", v3(x)), ("angular", v3(0.0))])
    }

    fn pump(net: &mut Network<()>, g: &mut Graph, until: Nanos) -> Vec<(Nanos, SubEvent)> {
        let mut out = Vec::new();
        while let Some((t, ev)) = net.next_event(until) {
            if let HostEvent::Stream { host, frame } = ev {
                if let Routed::Subscriber { event, .. } = g.route(net, host, &frame) {
                    out.push((t, event));
                }
            }
        }
        out
    }

    #[test]
    fn handshake_then_delivery() {
        let (mut net, mut g, dts, cps) = setup();
        let schema = builtin_schemas().lookup(TWIST).unwrap();
        g.add_publisher(&net, Publisher::new(dts, "/dts", "/cmd_vel", schema.clone(), 40001))
            .unwrap();
        assert_eq!(g.master.lookup("/cmd_vel").unwrap().publisher, dts);
        let s = g.add_subscriber(Subscriber::new(cps, "/cps", "/cmd_vel", schema, 50000));
        g.subscribe(&mut net, s).unwrap();
        let events = pump(&mut net, &mut g, 50 * NANOS_PER_MS);
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].1, SubEvent::Established);
        assert_eq!(g.subscribers[s].state(), Some(ConnState::Established));

        let sent_at = net.now();
        assert_eq!(g.publishers[0].publish(&mut net, &twist(1.0)).unwrap(), 1);
        let events = pump(&mut net, &mut g, Nanos::MAX);
        assert_eq!(events, vec![(sent_at + NANOS_PER_MS, SubEvent::Delivered(twist(1.0)))]);
    }

    #[test]
    fn unknown_topic() {
        let (mut net, mut g, _, cps) = setup();
        let schema = builtin_schemas().lookup(TWIST).unwrap();
        let s = g.add_subscriber(Subscriber::new(cps, "/cps", "/cmd_vel", schema, 50000));
        assert_eq!(
            g.subscribe(&mut net, s),
            Err(PubSubError::UnknownTopic("/cmd_vel".into()))
        );
    }

    #[test]
    fn md5_mismatch_closes() {
        let (mut net, mut g, dts, cps) = setup();
        let schema = builtin_schemas().lookup(TWIST).unwrap();
        g.add_publisher(&net, Publisher::new(dts, "/dts", "/cmd_vel", schema.clone(), 40001))
            .unwrap();
        let mut wrong = (*schema).clone();
        wrong.md5sum = "00000000000000000000000000000000".into();
        let s = g.add_subscriber(Subscriber::new(cps, "/cps", "/cmd_vel", wrong.into(), 50000));
        g.subscribe(&mut net, s).unwrap();
        let events = pump(&mut net, &mut g, Nanos::MAX);
        assert!(matches!(events[0].1, SubEvent::Failed(PubSubError::TypeMismatch { .. })));
        assert_eq!(g.subscribers[s].state(), Some(ConnState::Closed));
        // publisher holds no live connection, so nothing is sent
        assert_eq!(g.publishers[0].publish(&mut net, &twist(1.0)).unwrap(), 0);
    }

    #[test]
    fn closed_connection_rejects_send() {
        let (mut net, mut g, dts, cps) = setup();
        let schema = builtin_schemas().lookup(TWIST).unwrap();
        g.add_publisher(&net, Publisher::new(dts, "/dts", "/cmd_vel", schema.clone(), 40001))
            .unwrap();
        let s = g.add_subscriber(Subscriber::new(cps, "/cps", "/cmd_vel", schema, 50000));
        g.subscribe(&mut net, s).unwrap();
        pump(&mut net, &mut g, Nanos::MAX);
        let p = &mut g.publishers[0];
        p.send_to(&mut net, 0, &twist(1.0)).unwrap();
        p.close(0);
        assert_eq!(p.send_to(&mut net, 0, &twist(1.0)), Err(PubSubError::NotEstablished));
        assert_eq!(p.send_to(&mut net, 7, &twist(1.0)), Err(PubSubError::NotEstablished));
        assert!(matches!(
            p.publish(&mut net, &FieldValue::Float64(1.0)),
            Err(PubSubError::Wire(WireError::SchemaMismatch { .. }))
        ));
    }

    #[test]
    fn unreachable_publisher_fails_subscriber() {
        let (mut net, mut g, _dts, cps) = setup();
        let schema = builtin_schemas().lookup(TWIST).unwrap();
        let ghost = Ipv4Addr::new(10, 0, 0, 99);
        g.master
            .register_publisher(HostId(42), ghost, "/cmd_vel", &schema, 40001)
            .unwrap();
        let s = g.add_subscriber(Subscriber::new(cps, "/cps", "/cmd_vel", schema, 50000));
        g.subscribe(&mut net, s).unwrap();
        let mut failed = Vec::new();
        while let Some((_, ev)) = net.next_event(Nanos::MAX) {
            if let HostEvent::ArpTimeout { host, ip, .. } = ev {
                failed.extend(g.arp_timeout(host, ip));
            }
        }
        assert_eq!(failed, vec![(s, SubEvent::Failed(PubSubError::Unreachable(ghost)))]);
    }
}
