mod common;

use std::net::Ipv4Addr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use twinsec::guard::AuthConfig;
use twinsec::netsim::{FrameKind, HostEvent, HostSpec, MacAddr, Nanos, NetConfig, Network, NANOS_PER_MS};
use twinsec::pubsub::{Graph, Publisher, Routed, SubEvent, Subscriber};
use twinsec::wire::{builtin_schemas, encode_message, split_message, FieldValue, TWIST};

fn run(auth: Option<AuthConfig>, values: &[FieldValue]) -> (Network<()>, Vec<FieldValue>, Graph) {
    let mut net = Network::new(NetConfig::default());
    let dts = net
        .add_host(HostSpec::new("dts", Ipv4Addr::new(10, 0, 0, 10), MacAddr([2, 0, 0, 0, 0, 10])))
        .unwrap();
    let cps = net
        .add_host(HostSpec::new("cps", Ipv4Addr::new(10, 0, 0, 20), MacAddr([2, 0, 0, 0, 0, 20])))
        .unwrap();
    let schema = builtin_schemas().lookup(TWIST).unwrap();
    let mut g = Graph::new();
    let mut p = Publisher::new(dts, "/dts", "/cmd_vel", schema.clone(), 40001);
    let mut s = Subscriber::new(cps, "/cps", "/cmd_vel", schema, 50000);
    if let Some(cfg) = auth {
        p = p.with_auth(cfg.clone());
        s = s.with_auth(cfg);
    }
    g.add_publisher(&net, p).unwrap();
    let si = g.add_subscriber(s);
    g.subscribe(&mut net, si).unwrap();
    let mut got = Vec::new();
    let mut pump = |net: &mut Network<()>, g: &mut Graph, until: Nanos| {
        while let Some((_, ev)) = net.next_event(until) {
            if let HostEvent::Stream { host, frame } = ev {
                if let Routed::Subscriber {
                    event: SubEvent::Delivered(v),
                    ..
                } = g.route(net, host, &frame)
                {
                    got.push(v);
                }
            }
        }
    };
    pump(&mut net, &mut g, 20 * NANOS_PER_MS);
    for v in values {
        let t = net.now() + 500_000;
        pump(&mut net, &mut g, t);
        g.publishers[0].publish(&mut net, v).unwrap();
    }
    pump(&mut net, &mut g, Nanos::MAX);
    (net, got, g)
}

fn random_twists(n: usize) -> Vec<FieldValue> {
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    (0..n)
        .map(|_| {
            twinsec::plant::Twist {
                linear: [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen()],
                angular: [rng.gen(), rng.gen(), rng.gen_range(-3.0..3.0)],
            }
            .to_value()
        })
        .collect()
}

#[test]
fn thousand_messages_arrive_in_order_and_byte_exact() {
    let values = random_twists(1000);
    let (net, got, _) = run(None, &values);
    assert_eq!(got, values);
    let schema = builtin_schemas().lookup(TWIST).unwrap();
    let on_wire: Vec<&[u8]> = net
        .trace()
        .iter()
        .filter(|r| r.kind == FrameKind::Stream && r.src_port == 40001 && r.payload.len() == 52)
        .map(|r| r.payload.as_slice())
        .collect();
    assert_eq!(on_wire.len(), 1000);
    for (bytes, v) in on_wire.iter().zip(&values) {
        assert_eq!(*bytes, encode_message(&schema, v).unwrap().as_slice());
    }
}

#[test]
fn tagged_channel_is_transparent_apart_from_the_trailer() {
    let values = random_twists(200);
    let (plain, got_plain, _) = run(None, &values);
    let (tagged, got_tagged, g) = run(Some(AuthConfig::new(b"k".to_vec())), &values);
    assert_eq!(got_plain, got_tagged);
    assert_eq!(g.subscribers[0].counters.auth_rejected, 0);
    assert_eq!(g.subscribers[0].counters.delivered, 200);
    let msgs = |net: &Network<()>| -> Vec<Vec<u8>> {
        net.trace()
            .iter()
            .filter(|r| r.kind == FrameKind::Stream && r.src_port == 40001)
            .skip(1)
            .map(|r| r.payload.clone())
            .collect()
    };
    for (p, t) in msgs(&plain).iter().zip(msgs(&tagged)) {
        let (body, trailer) = split_message(&t).unwrap();
        assert_eq!(body, p.as_slice());
        assert_eq!(trailer.len(), 8);
    }
}
