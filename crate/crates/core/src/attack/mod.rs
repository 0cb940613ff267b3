//! ARP-poisoning person-in-the-middle on the twin → robot link.
//!
//! The attacker scans the subnet, poisons both victims so each maps the
//! other's ip to the attacker's mac, and then relays every diverted frame.
//! Messages on the target topic flowing from its publisher are rewritten by
//! field-path rules; everything else passes through byte-identical.
//!
//! There is no datagram transport on the simulated LAN, so only stream
//! frames are ever classified.

mod attacker;
mod mutate;
mod rule;

use std::net::Ipv4Addr;

pub use attacker::{
    AttackPhase, AttackPlan, AttackSummary, Attacker, Classification, ConnectionSummary, InterceptCounters,
    InterceptState,
};
pub use mutate::mutate;
pub use rule::{MutationAction, MutationRule};

use crate::wire::WireError;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AttackError {
    #[error("victim {0} did not answer the scan")]
    VictimNotFound(Ipv4Addr),
    #[error("rule path {0} does not resolve to a float64 field")]
    PathUnresolved(String),
    #[error("invalid attack plan: {0}")]
    InvalidPlan(String),
    #[error(transparent)]
    Wire(#[from] WireError),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netsim::{Frame, FrameKind, HostEvent, HostId, HostSpec, MacAddr, NetConfig, Nanos, Network, NANOS_PER_MS};
    use crate::pubsub::{Graph, Publisher, Routed, SubEvent, Subscriber};
    use crate::wire::{builtin_schemas, encode_header, ConnectionHeader, FieldValue, TWIST};

    const DTS: Ipv4Addr = Ipv4Addr::new(10, 0, 0, 10);
    const CPS: Ipv4Addr = Ipv4Addr::new(10, 0, 0, 20);
    const EVE: Ipv4Addr = Ipv4Addr::new(10, 0, 0, 66);

    enum Tick {
        Start,
        FinishScan,
        Stop,
    }

    struct Lab {
        net: Network<Tick>,
        graph: Graph,
        dts: HostId,
        eve: HostId,
        attacker: Attacker,
        delivered: Vec<(Nanos, FieldValue)>,
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

    fn lab(victim_b: Ipv4Addr, rules: Vec<MutationRule>) -> Lab {
        let mut net = Network::new(NetConfig::default());
        let dts = net.add_host(HostSpec::new("dts", DTS, MacAddr([2, 0, 0, 0, 0, 10]))).unwrap();
        let cps = net.add_host(HostSpec::new("cps", CPS, MacAddr([2, 0, 0, 0, 0, 20]))).unwrap();
        let eve = net.add_host(HostSpec::new("eve", EVE, MacAddr([2, 0, 0, 0, 0, 66]))).unwrap();
        let schema = builtin_schemas().lookup(TWIST).unwrap();
        let mut graph = Graph::new();
        graph
            .add_publisher(&net, Publisher::new(dts, "/dts", "/cmd_vel", schema.clone(), 40001))
            .unwrap();
        let s = graph.add_subscriber(Subscriber::new(cps, "/cps", "/cmd_vel", schema, 50000));
        graph.subscribe(&mut net, s).unwrap();
        let mut attacker = Attacker::new(AttackPlan {
            attacker: eve,
            victim_a: DTS,
            victim_b,
            target_topic: "/cmd_vel".into(),
            rules,
            start_time: 20 * NANOS_PER_MS,
            stop_time: 500 * NANOS_PER_MS,
            scan_window: 5 * NANOS_PER_MS,
        })
        .unwrap();
        for rec in graph.master.topics() {
            attacker.learn_publisher(rec);
        }
        net.schedule(20 * NANOS_PER_MS, eve, Tick::Start);
        net.schedule(500 * NANOS_PER_MS, eve, Tick::Stop);
        Lab {
            net,
            graph,
            dts,
            eve,
            attacker,
            delivered: Vec::new(),
        }
    }

    impl Lab {
        fn run(&mut self, until: Nanos) {
            while let Some((t, ev)) = self.net.next_event(until) {
                match ev {
                    HostEvent::Timer { host, payload } if host == self.eve => match payload {
                        Tick::Start => {
                            let at = self.attacker.start(&mut self.net);
                            self.net.schedule(at, self.eve, Tick::FinishScan);
                        }
                        Tick::FinishScan => {
                            let _ = self.attacker.finish_scan(&mut self.net);
                        }
                        Tick::Stop => self.attacker.stop(&mut self.net),
                    },
                    HostEvent::ArpReply { host, from } if host == self.eve => self.attacker.on_arp_reply(from),
                    HostEvent::Stream { host, frame } if host == self.eve => {
                        if frame.dst_ip != EVE {
                            self.attacker.on_frame(&mut self.net, frame);
                        }
                    }
                    HostEvent::Stream { host, frame } => {
                        if let Routed::Subscriber {
                            event: SubEvent::Delivered(v),
                            ..
                        } = self.graph.route(&mut self.net, host, &frame)
                        {
                            self.delivered.push((t, v));
                        }
                    }
                    _ => {}
                }
            }
        }

        fn publish_every_10ms(&mut self, from: Nanos, to: Nanos, x: f64) {
            let mut t = from;
            while t < to {
                self.run(t);
                self.graph.publishers[0].publish(&mut self.net, &twist(x)).unwrap();
                t += 10 * NANOS_PER_MS;
            }
        }
    }

    #[test]
    fn set_rule_rewrites_while_poisoned() {
        let rule = MutationRule::new("linear.x", MutationAction::Set(1.5)).unwrap();
        let mut lab = lab(CPS, vec![rule]);
        lab.publish_every_10ms(10 * NANOS_PER_MS, 700 * NANOS_PER_MS, 1.0);
        lab.run(Nanos::MAX);
        assert_eq!(lab.attacker.phase(), AttackPhase::Stopped);
        let c = lab.attacker.counters();
        assert_eq!(c.seen, c.forwarded);
        assert!(c.mutated <= c.matched && c.matched <= c.seen);
        assert!(c.matched > 40);
        assert_eq!(c.mutated, c.matched);
        let xs: Vec<f64> = lab
            .delivered
            .iter()
            .map(|(_, v)| v.field("linear").unwrap().field("x").unwrap().as_f64().unwrap())
            .collect();
        assert_eq!(xs.len(), 69);
        assert_eq!(xs.iter().filter(|x| **x == 1.5).count() as u64, c.mutated);
        assert_eq!(xs[0], 1.0);
        assert_eq!(*xs.last().unwrap(), 1.0);
        let poisoned_at = lab.attacker.summary().poisoned_at.unwrap();
        assert!(lab.delivered.iter().all(|(t, v)| {
            let x = v.field("linear").unwrap().field("x").unwrap().as_f64().unwrap();
            x == 1.0 || *t > poisoned_at
        }));
        let s = lab.attacker.summary();
        assert_eq!(s.connections.len(), 1);
        assert_eq!(s.connections[0].topic.as_deref(), Some("/cmd_vel"));
    }

    #[test]
    fn diverted_path_costs_one_extra_hop() {
        let mut lab = lab(CPS, vec![]);
        lab.run(100 * NANOS_PER_MS);
        let sent = lab.net.now();
        lab.graph.publishers[0].publish(&mut lab.net, &twist(1.0)).unwrap();
        lab.run(Nanos::MAX);
        assert_eq!(lab.delivered, vec![(sent + 2 * NANOS_PER_MS, twist(1.0))]);
        let c = lab.attacker.counters();
        assert_eq!((c.seen, c.matched, c.mutated), (1, 1, 0));
    }

    #[test]
    fn missing_victim_aborts_without_poisoning() {
        let rule = MutationRule::new("linear.x", MutationAction::Set(1.5)).unwrap();
        let mut lab = lab(Ipv4Addr::new(10, 0, 0, 99), vec![rule]);
        lab.publish_every_10ms(10 * NANOS_PER_MS, 300 * NANOS_PER_MS, 1.0);
        lab.run(Nanos::MAX);
        assert_eq!(lab.attacker.phase(), AttackPhase::Aborted);
        assert_eq!(lab.attacker.counters().seen, 0);
        let s = lab.attacker.summary();
        assert!(s.error.unwrap().contains("10.0.0.99"));
        assert!(s.poisoned_at.is_none());
        assert!(lab.delivered.iter().all(|(_, v)| *v == twist(1.0)));
        assert_eq!(lab.net.arp_cache(lab.dts).get(CPS), Some(MacAddr([2, 0, 0, 0, 0, 20])));
    }

    #[test]
    fn classifier_tags_connections_by_header() {
        let mut st = InterceptState::new("/cmd_vel", DTS, CPS);
        let frame = |src: (Ipv4Addr, u16), dst: (Ipv4Addr, u16), kind, payload| Frame {
            src_mac: MacAddr::ZERO,
            dst_mac: MacAddr::ZERO,
            src_ip: src.0,
            dst_ip: dst.0,
            src_port: src.1,
            dst_port: dst.1,
            kind,
            payload,
            timestamp: 0,
        };
        let hdr = |pairs: &[(&str, &str)]| {
            encode_header(&ConnectionHeader::from_entries(pairs.iter().copied()).unwrap()).unwrap()
        };
        let sub = (CPS, 50000);
        let publ = (DTS, 40001);
        let arp = frame(publ, sub, FrameKind::ArpRequest, vec![]);
        assert_eq!(st.classify_frame(&arp), Classification::Passthrough);
        let req = frame(sub, publ, FrameKind::Stream, hdr(&[("topic", "/cmd_vel"), ("type", TWIST)]));
        assert_eq!(st.classify_frame(&req), Classification::HeaderFrame);
        let resp = frame(publ, sub, FrameKind::Stream, hdr(&[("type", TWIST)]));
        assert_eq!(st.classify_frame(&resp), Classification::HeaderFrame);
        let schema = builtin_schemas().lookup(TWIST).unwrap();
        let msg = crate::wire::encode_message(&schema, &twist(1.0)).unwrap();
        assert_eq!(
            st.classify_frame(&frame(publ, sub, FrameKind::Stream, msg.clone())),
            Classification::TargetMessage
        );
        // reverse direction on the same connection is never a target
        assert_eq!(
            st.classify_frame(&frame(sub, publ, FrameKind::Stream, msg.clone())),
            Classification::Passthrough
        );
        // other ip pair
        let other = (Ipv4Addr::new(10, 0, 0, 30), 40001);
        assert_eq!(
            st.classify_frame(&frame(other, sub, FrameKind::Stream, msg.clone())),
            Classification::Passthrough
        );
        // untagged connection, garbage payload
        assert_eq!(
            st.classify_frame(&frame((DTS, 40009), sub, FrameKind::Stream, vec![9, 9, 9])),
            Classification::Passthrough
        );
    }

    #[test]
    fn set_is_idempotent_and_override_is_monotone() {
        let schema = builtin_schemas().lookup(TWIST).unwrap();
        let input = crate::wire::encode_message(&schema, &twist(0.3)).unwrap();
        let set = [MutationRule::new("linear.x", MutationAction::Set(1.5)).unwrap()];
        let once = mutate(&schema, &input, &set, 1).unwrap();
        assert_eq!(mutate(&schema, &once, &set, 2).unwrap(), once);

        let ovr = [MutationRule::new("linear.x", MutationAction::OverrideStream { start: 0.0, step: 0.2 }).unwrap()];
        let mut prev = f64::NEG_INFINITY;
        for k in 1..=30 {
            let out = mutate(&schema, &input, &ovr, k).unwrap();
            let x = crate::wire::decode_message(&schema, &out).unwrap().field("linear").unwrap().field("x").unwrap().as_f64().unwrap();
            assert!(x > prev);
            prev = x;
        }
    }
}
