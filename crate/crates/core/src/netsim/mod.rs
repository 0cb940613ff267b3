//! Deterministic single-switch LAN: hosts, a MAC-addressed switch, gullible
//! ARP caches, and a discrete-event clock.

mod addr;
mod network;
mod queue;
mod trace;

use std::net::Ipv4Addr;

pub use addr::{HostId, HostSpec, MacAddr, MacParseError, NetAddr};
pub use network::{ArpCache, Frame, FrameKind, HostEvent, NetConfig, NetStats, Network};
pub use queue::{EventQueue, Nanos, NANOS_PER_MS, NANOS_PER_SEC};
pub use trace::{read_jsonl, write_jsonl, TraceRecord};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NetError {
    #[error("no ARP reply for {0}")]
    ResolveTimeout(Ipv4Addr),
    #[error("duplicate host name {0:?}")]
    DuplicateHost(String),
    #[error("duplicate ip {0}")]
    DuplicateIp(Ipv4Addr),
    #[error("duplicate or reserved mac {0}")]
    DuplicateMac(MacAddr),
    #[error("{0} is outside the LAN subnet")]
    SubnetMismatch(Ipv4Addr),
}
