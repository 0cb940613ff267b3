use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};

use super::addr::{HostId, HostSpec, MacAddr, NetAddr};
use super::queue::{EventQueue, Nanos, NANOS_PER_MS};
use super::trace::TraceRecord;
use super::NetError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FrameKind {
    ArpRequest,
    ArpReply,
    Stream,
}

/// Link-layer unit. A `Stream` frame carries exactly one pub/sub unit; ARP
/// frames use the address fields only (sender = src, target = dst).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub src_mac: MacAddr,
    pub dst_mac: MacAddr,
    pub src_ip: Ipv4Addr,
    pub dst_ip: Ipv4Addr,
    pub src_port: u16,
    pub dst_port: u16,
    pub kind: FrameKind,
    pub payload: Vec<u8>,
    pub timestamp: Nanos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetConfig {
    pub link_latency: Nanos,
    pub arp_timeout: Nanos,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            link_latency: NANOS_PER_MS,
            arp_timeout: 100 * NANOS_PER_MS,
        }
    }
}

/// Per-host ip → mac table. Accepts every reply it is handed and never
/// expires entries.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ArpCache {
    entries: BTreeMap<Ipv4Addr, MacAddr>,
}

impl ArpCache {
    pub fn get(&self, ip: Ipv4Addr) -> Option<MacAddr> {
        self.entries.get(&ip).copied()
    }

    pub fn insert(&mut self, ip: Ipv4Addr, mac: MacAddr) {
        self.entries.insert(ip, mac);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Ipv4Addr, MacAddr)> + '_ {
        self.entries.iter().map(|(ip, mac)| (*ip, *mac))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct NetStats {
    pub unicast_sent: u64,
    pub unicast_delivered: u64,
    pub broadcast_sent: u64,
    pub broadcast_deliveries: u64,
    pub dropped_unknown_mac: u64,
    /// Stream payloads discarded because ARP resolution timed out.
    pub dropped_unresolved: u64,
}

/// What the network hands back to the node layer.
#[derive(Debug, Clone, PartialEq)]
pub enum HostEvent<T> {
    Stream { host: HostId, frame: Frame },
    Timer { host: HostId, payload: T },
    ArpReply { host: HostId, from: NetAddr },
    ArpTimeout { host: HostId, ip: Ipv4Addr, dropped: usize },
}

enum NetEvent<T> {
    Arrive {
        from: HostId,
        to: HostId,
        frame: Frame,
        pitm: Option<String>,
    },
    Timer {
        host: HostId,
        payload: T,
    },
    ArpDeadline {
        host: HostId,
        ip: Ipv4Addr,
    },
}

struct PendingSend {
    dst_ip: Ipv4Addr,
    src_port: u16,
    dst_port: u16,
    payload: Vec<u8>,
}

struct Host {
    spec: HostSpec,
    arp: ArpCache,
    awaiting: BTreeSet<Ipv4Addr>,
    pending: Vec<PendingSend>,
}

/// A single-switch LAN driven by a discrete-event queue.
///
/// Delivery is by destination MAC, so a poisoned ARP cache diverts traffic.
/// `T` is the payload type of node-level timers.
pub struct Network<T> {
    cfg: NetConfig,
    hosts: Vec<Host>,
    by_mac: HashMap<MacAddr, HostId>,
    by_ip: HashMap<Ipv4Addr, HostId>,
    queue: EventQueue<NetEvent<T>>,
    deferred: VecDeque<(Nanos, HostEvent<T>)>,
    trace: Vec<TraceRecord>,
    stats: NetStats,
}

impl<T> Network<T> {
    pub fn new(cfg: NetConfig) -> Self {
        Network {
            cfg,
            hosts: Vec::new(),
            by_mac: HashMap::new(),
            by_ip: HashMap::new(),
            queue: EventQueue::new(),
            deferred: VecDeque::new(),
            trace: Vec::new(),
            stats: NetStats::default(),
        }
    }

    pub fn config(&self) -> NetConfig {
        self.cfg
    }

    pub fn add_host(&mut self, spec: HostSpec) -> Result<HostId, NetError> {
        if self.hosts.iter().any(|h| h.spec.name == spec.name) {
            return Err(NetError::DuplicateHost(spec.name));
        }
        if self.by_ip.contains_key(&spec.ip) {
            return Err(NetError::DuplicateIp(spec.ip));
        }
        if spec.mac.is_broadcast() || self.by_mac.contains_key(&spec.mac) {
            return Err(NetError::DuplicateMac(spec.mac));
        }
        if let Some(first) = self.hosts.first() {
            if first.spec.ip.octets()[..3] != spec.ip.octets()[..3] {
                return Err(NetError::SubnetMismatch(spec.ip));
            }
        }
        let id = HostId(self.hosts.len());
        self.by_mac.insert(spec.mac, id);
        self.by_ip.insert(spec.ip, id);
        self.hosts.push(Host {
            spec,
            arp: ArpCache::default(),
            awaiting: BTreeSet::new(),
            pending: Vec::new(),
        });
        Ok(id)
    }

    pub fn now(&self) -> Nanos {
        self.queue.now()
    }

    pub fn spec(&self, id: HostId) -> &HostSpec {
        &self.hosts[id.0].spec
    }

    pub fn host_ids(&self) -> impl Iterator<Item = HostId> {
        (0..self.hosts.len()).map(HostId)
    }

    pub fn host_by_ip(&self, ip: Ipv4Addr) -> Option<HostId> {
        self.by_ip.get(&ip).copied()
    }

    pub fn host_by_name(&self, name: &str) -> Option<HostId> {
        self.hosts.iter().position(|h| h.spec.name == name).map(HostId)
    }

    /// All registered addresses, sorted by ip.
    pub fn subnet_ips(&self) -> Vec<Ipv4Addr> {
        let mut ips: Vec<_> = self.hosts.iter().map(|h| h.spec.ip).collect();
        ips.sort();
        ips
    }

    pub fn arp_cache(&self, id: HostId) -> &ArpCache {
        &self.hosts[id.0].arp
    }

    pub fn stats(&self) -> NetStats {
        self.stats
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    pub fn take_trace(&mut self) -> Vec<TraceRecord> {
        std::mem::take(&mut self.trace)
    }

    pub fn schedule(&mut self, at: Nanos, host: HostId, payload: T) {
        self.queue.push(at, NetEvent::Timer { host, payload });
    }

    /// Switch delivery: hands `frame` to the owner of its destination MAC (or
    /// to every other host for broadcast) after one link latency. Frames for
    /// unknown MACs are dropped and counted.
    pub fn transmit(&mut self, from: HostId, mut frame: Frame, pitm: Option<String>) {
        let now = self.now();
        frame.timestamp = now;
        let at = now + self.cfg.link_latency;
        if frame.dst_mac.is_broadcast() {
            self.stats.broadcast_sent += 1;
            for to in self.host_ids().filter(|h| *h != from).collect::<Vec<_>>() {
                self.queue.push(
                    at,
                    NetEvent::Arrive {
                        from,
                        to,
                        frame: frame.clone(),
                        pitm: pitm.clone(),
                    },
                );
            }
            return;
        }
        self.stats.unicast_sent += 1;
        match self.by_mac.get(&frame.dst_mac).copied() {
            Some(to) => self.queue.push(
                at,
                NetEvent::Arrive {
                    from,
                    to,
                    frame,
                    pitm,
                },
            ),
            None => {
                self.stats.dropped_unknown_mac += 1;
                let record = self.record(now, from, None, &frame, pitm, Some("unknown_mac"));
                self.trace.push(record);
            }
        }
    }

    /// Sends a stream payload to `dst_ip`, resolving the MAC through the
    /// sender's ARP cache. On a miss the payload waits for the reply and is
    /// dropped if none arrives within the ARP timeout.
    pub fn send_stream(
        &mut self,
        from: HostId,
        dst_ip: Ipv4Addr,
        src_port: u16,
        dst_port: u16,
        payload: Vec<u8>,
    ) {
        match self.hosts[from.0].arp.get(dst_ip) {
            Some(mac) => self.emit_stream(from, mac, dst_ip, src_port, dst_port, payload),
            None => {
                self.hosts[from.0].pending.push(PendingSend {
                    dst_ip,
                    src_port,
                    dst_port,
                    payload,
                });
                self.request_resolution(from, dst_ip);
            }
        }
    }

    fn emit_stream(
        &mut self,
        from: HostId,
        dst_mac: MacAddr,
        dst_ip: Ipv4Addr,
        src_port: u16,
        dst_port: u16,
        payload: Vec<u8>,
    ) {
        let src = self.hosts[from.0].spec.addr();
        let frame = Frame {
            src_mac: src.mac,
            dst_mac,
            src_ip: src.ip,
            dst_ip,
            src_port,
            dst_port,
            kind: FrameKind::Stream,
            payload,
            timestamp: 0,
        };
        self.transmit(from, frame, None);
    }

    fn request_resolution(&mut self, host: HostId, ip: Ipv4Addr) {
        if self.hosts[host.0].awaiting.insert(ip) {
            self.send_arp_request(host, ip);
            let deadline = self.now() + self.cfg.arp_timeout;
            self.queue.push(deadline, NetEvent::ArpDeadline { host, ip });
        }
    }

    /// Broadcasts "who has `target_ip`".
    pub fn send_arp_request(&mut self, from: HostId, target_ip: Ipv4Addr) {
        let src = self.hosts[from.0].spec.addr();
        let frame = Frame {
            src_mac: src.mac,
            dst_mac: MacAddr::BROADCAST,
            src_ip: src.ip,
            dst_ip: target_ip,
            src_port: 0,
            dst_port: 0,
            kind: FrameKind::ArpRequest,
            payload: Vec::new(),
            timestamp: 0,
        };
        self.transmit(from, frame, None);
    }

    /// Unicasts an ARP reply to `to` asserting `claim.ip is-at claim.mac`.
    /// The recipient caches the claim unconditionally.
    pub fn send_arp_reply(&mut self, from: HostId, to: NetAddr, claim: NetAddr) {
        let frame = Frame {
            src_mac: claim.mac,
            dst_mac: to.mac,
            src_ip: claim.ip,
            dst_ip: to.ip,
            src_port: 0,
            dst_port: 0,
            kind: FrameKind::ArpReply,
            payload: Vec::new(),
            timestamp: 0,
        };
        self.transmit(from, frame, None);
    }

    /// Advances the simulation to the next node-visible event at or before
    /// `until`. ARP traffic is handled here and only surfaces as
    /// [`HostEvent::ArpReply`] / [`HostEvent::ArpTimeout`].
    pub fn next_event(&mut self, until: Nanos) -> Option<(Nanos, HostEvent<T>)> {
        if let Some((t, _)) = self.deferred.front() {
            if *t <= until {
                return self.deferred.pop_front();
            }
        }
        loop {
            let (t, ev) = self.queue.pop_until(until)?;
            if let Some(out) = self.process(t, ev) {
                return Some((t, out));
            }
        }
    }

    fn process(&mut self, t: Nanos, ev: NetEvent<T>) -> Option<HostEvent<T>> {
        match ev {
            NetEvent::Timer { host, payload } => Some(HostEvent::Timer { host, payload }),
            NetEvent::ArpDeadline { host, ip } => {
                if !self.hosts[host.0].awaiting.remove(&ip) {
                    return None;
                }
                let h = &mut self.hosts[host.0];
                let before = h.pending.len();
                h.pending.retain(|p| p.dst_ip != ip);
                let dropped = before - h.pending.len();
                self.stats.dropped_unresolved += dropped as u64;
                Some(HostEvent::ArpTimeout { host, ip, dropped })
            }
            NetEvent::Arrive {
                from,
                to,
                frame,
                pitm,
            } => {
                if frame.dst_mac.is_broadcast() {
                    self.stats.broadcast_deliveries += 1;
                } else {
                    self.stats.unicast_delivered += 1;
                }
                let record = self.record(t, from, Some(to), &frame, pitm, None);
                self.trace.push(record);
                self.on_arrival(to, frame)
            }
        }
    }

    fn on_arrival(&mut self, host: HostId, frame: Frame) -> Option<HostEvent<T>> {
        match frame.kind {
            FrameKind::Stream => Some(HostEvent::Stream { host, frame }),
            FrameKind::ArpRequest => {
                let me = self.hosts[host.0].spec.addr();
                if frame.dst_ip != me.ip {
                    return None;
                }
                self.hosts[host.0].arp.insert(frame.src_ip, frame.src_mac);
                let requester = NetAddr {
                    ip: frame.src_ip,
                    mac: frame.src_mac,
                };
                self.send_arp_reply(host, requester, me);
                None
            }
            FrameKind::ArpReply => {
                let claim = NetAddr {
                    ip: frame.src_ip,
                    mac: frame.src_mac,
                };
                let h = &mut self.hosts[host.0];
                h.arp.insert(claim.ip, claim.mac);
                h.awaiting.remove(&claim.ip);
                let (ready, waiting): (Vec<_>, Vec<_>) = std::mem::take(&mut h.pending)
                    .into_iter()
                    .partition(|p| p.dst_ip == claim.ip);
                h.pending = waiting;
                for p in ready {
                    self.emit_stream(host, claim.mac, p.dst_ip, p.src_port, p.dst_port, p.payload);
                }
                Some(HostEvent::ArpReply { host, from: claim })
            }
        }
    }

    fn record(
        &self,
        t: Nanos,
        from: HostId,
        to: Option<HostId>,
        frame: &Frame,
        pitm: Option<String>,
        dropped: Option<&str>,
    ) -> TraceRecord {
        TraceRecord {
            t,
            sent: frame.timestamp,
            kind: frame.kind,
            from: self.hosts[from.0].spec.name.clone(),
            to: to.map(|h| self.hosts[h.0].spec.name.clone()),
            src_mac: frame.src_mac,
            dst_mac: frame.dst_mac,
            src_ip: frame.src_ip,
            dst_ip: frame.dst_ip,
            src_port: frame.src_port,
            dst_port: frame.dst_port,
            payload: frame.payload.clone(),
            pitm,
            dropped: dropped.map(str::to_string),
        }
    }

    /// Resolves `ip` for `host`, running the network until a reply arrives or
    /// the ARP timeout passes. Node events that occur meanwhile are queued
    /// and returned by later [`Network::next_event`] calls.
    pub fn arp_resolve(&mut self, host: HostId, ip: Ipv4Addr) -> Result<MacAddr, NetError> {
        if let Some(mac) = self.hosts[host.0].arp.get(ip) {
            return Ok(mac);
        }
        self.request_resolution(host, ip);
        let deadline = self.now() + self.cfg.arp_timeout;
        while let Some((t, ev)) = self.queue.pop_until(deadline) {
            match self.process(t, ev) {
                Some(HostEvent::ArpReply { host: h, from }) if h == host && from.ip == ip => {
                    return Ok(from.mac);
                }
                Some(HostEvent::ArpTimeout { host: h, ip: i, .. }) if h == host && i == ip => {
                    return Err(NetError::ResolveTimeout(ip));
                }
                Some(other) => self.deferred.push_back((t, other)),
                None => {}
            }
        }
        Err(NetError::ResolveTimeout(ip))
    }

    /// Probes every registered address except the scanner's own and returns
    /// the responders sorted by ip. Waits one ARP timeout for replies.
    pub fn scan_subnet(&mut self, scanner: HostId) -> Vec<NetAddr> {
        let own = self.hosts[scanner.0].spec.ip;
        let targets: BTreeSet<Ipv4Addr> = self.subnet_ips().into_iter().filter(|ip| *ip != own).collect();
        for ip in &targets {
            self.send_arp_request(scanner, *ip);
        }
        let deadline = self.now() + self.cfg.arp_timeout;
        let mut found = BTreeMap::new();
        while let Some((t, ev)) = self.queue.pop_until(deadline) {
            match self.process(t, ev) {
                Some(HostEvent::ArpReply { host, from }) if host == scanner && targets.contains(&from.ip) => {
                    found.entry(from.ip).or_insert(from);
                }
                Some(other) => self.deferred.push_back((t, other)),
                None => {}
            }
        }
        found.into_values().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lan(names: &[&str]) -> (Network<()>, Vec<HostId>) {
        let mut net = Network::new(NetConfig::default());
        let ids = names
            .iter()
            .enumerate()
            .map(|(i, name)| {
                let n = i as u8 + 1;
                net.add_host(HostSpec::new(
                    name,
                    Ipv4Addr::new(10, 0, 0, n),
                    MacAddr([2, 0, 0, 0, 0, n]),
                ))
                .unwrap()
            })
            .collect();
        (net, ids)
    }

    fn stream_to(net: &Network<()>, from: HostId, to: HostId) -> Frame {
        Frame {
            src_mac: net.spec(from).mac,
            dst_mac: net.spec(to).mac,
            src_ip: net.spec(from).ip,
            dst_ip: net.spec(to).ip,
            src_port: 1,
            dst_port: 2,
            kind: FrameKind::Stream,
            payload: vec![7],
            timestamp: 0,
        }
    }

    #[test]
    fn unicast_arrives_after_one_latency() {
        let (mut net, ids) = lan(&["a", "b"]);
        let f = stream_to(&net, ids[0], ids[1]);
        net.transmit(ids[0], f, None);
        let (t, ev) = net.next_event(Nanos::MAX).unwrap();
        assert_eq!(t, NANOS_PER_MS);
        let HostEvent::Stream { host, frame } = ev else {
            panic!("expected stream")
        };
        assert_eq!(host, ids[1]);
        assert_eq!(frame.payload, vec![7]);
    }

    #[test]
    fn broadcast_reaches_everyone_but_sender() {
        let (mut net, ids) = lan(&["a", "b", "c"]);
        let mut f = stream_to(&net, ids[0], ids[1]);
        f.dst_mac = MacAddr::BROADCAST;
        net.transmit(ids[0], f, None);
        let mut got: Vec<_> = std::iter::from_fn(|| net.next_event(Nanos::MAX))
            .map(|(_, ev)| match ev {
                HostEvent::Stream { host, .. } => host,
                _ => panic!(),
            })
            .collect();
        got.sort();
        assert_eq!(got, vec![ids[1], ids[2]]);
    }

    #[test]
    fn unknown_mac_is_dropped_and_counted() {
        let (mut net, ids) = lan(&["a", "b"]);
        let mut f = stream_to(&net, ids[0], ids[1]);
        f.dst_mac = MacAddr([9; 6]);
        net.transmit(ids[0], f, None);
        assert!(net.next_event(Nanos::MAX).is_none());
        assert_eq!(net.stats().dropped_unknown_mac, 1);
        assert_eq!(net.trace()[0].dropped.as_deref(), Some("unknown_mac"));
    }

    #[test]
    fn resolve_cold_and_poisoned() {
        let (mut net, ids) = lan(&["a", "b", "m"]);
        let (a, b, m) = (ids[0], ids[1], ids[2]);
        assert_eq!(net.arp_resolve(a, net.spec(b).ip).unwrap(), net.spec(b).mac);

        let claim = NetAddr {
            ip: net.spec(b).ip,
            mac: net.spec(m).mac,
        };
        let to = net.spec(a).addr();
        net.send_arp_reply(m, to, claim);
        net.send_arp_reply(m, to, claim);
        while net.next_event(Nanos::MAX).is_some() {}
        assert_eq!(net.arp_cache(a).get(net.spec(b).ip), Some(net.spec(m).mac));
        assert_eq!(net.arp_resolve(a, net.spec(b).ip).unwrap(), net.spec(m).mac);
    }

    #[test]
    fn resolve_absent_ip_times_out() {
        let (mut net, ids) = lan(&["a", "b"]);
        let ghost = Ipv4Addr::new(10, 0, 0, 99);
        assert_eq!(net.arp_resolve(ids[0], ghost), Err(NetError::ResolveTimeout(ghost)));
        assert_eq!(net.now(), 100 * NANOS_PER_MS);
    }

    #[test]
    fn pending_stream_is_flushed_or_dropped() {
        let (mut net, ids) = lan(&["a", "b"]);
        let b_ip = net.spec(ids[1]).ip;
        net.send_stream(ids[0], b_ip, 1, 2, vec![1]);
        net.send_stream(ids[0], Ipv4Addr::new(10, 0, 0, 77), 1, 2, vec![2]);
        let events: Vec<_> = std::iter::from_fn(|| net.next_event(Nanos::MAX)).collect();
        assert!(events
            .iter()
            .any(|(_, e)| matches!(e, HostEvent::Stream { host, frame } if *host == ids[1] && frame.payload == [1])));
        assert!(events
            .iter()
            .any(|(_, e)| matches!(e, HostEvent::ArpTimeout { dropped: 1, .. })));
        assert_eq!(net.stats().dropped_unresolved, 1);
    }

    #[test]
    fn scan_lists_other_hosts_sorted() {
        let (mut net, ids) = lan(&["a", "b", "m"]);
        let found = net.scan_subnet(ids[2]);
        assert_eq!(found, vec![net.spec(ids[0]).addr(), net.spec(ids[1]).addr()]);

        let (mut alone, ids) = lan(&["solo"]);
        assert!(alone.scan_subnet(ids[0]).is_empty());
    }

    #[test]
    fn scan_ignores_poisoned_caches() {
        let (mut net, ids) = lan(&["a", "b", "m", "s"]);
        let poison = NetAddr {
            ip: net.spec(ids[1]).ip,
            mac: net.spec(ids[2]).mac,
        };
        let to = net.spec(ids[3]).addr();
        net.send_arp_reply(ids[2], to, poison);
        while net.next_event(Nanos::MAX).is_some() {}
        let found = net.scan_subnet(ids[3]);
        assert!(found.contains(&net.spec(ids[1]).addr()));
    }

    #[test]
    fn host_identity_is_unique() {
        let (mut net, _) = lan(&["a"]);
        let dup_ip = HostSpec::new("x", Ipv4Addr::new(10, 0, 0, 1), MacAddr([3; 6]));
        assert!(matches!(net.add_host(dup_ip), Err(NetError::DuplicateIp(_))));
        let other_subnet = HostSpec::new("y", Ipv4Addr::new(10, 0, 1, 5), MacAddr([4; 6]));
        assert!(matches!(net.add_host(other_subnet), Err(NetError::SubnetMismatch(_))));
    }
}
