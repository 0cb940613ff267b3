use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::net::Ipv4Addr;
use std::sync::Arc;

use crate::netsim::{FrameKind, TraceRecord};
use crate::plant::format_nanos;
use crate::wire::{builtin_schemas, decode_header, decode_message, split_message, MessageSchema};

type Endpoint = (Ipv4Addr, u16);

fn indent(text: &str, by: &str) -> String {
    text.lines().map(|l| format!("{by}{l}\n")).collect()
}

/// Renders a trace one frame per line, decoding connection headers and, once
/// a connection's type is known, its messages.
pub fn inspect_trace(records: &[TraceRecord]) -> String {
    let registry = builtin_schemas();
    let mut types: BTreeMap<(Endpoint, Endpoint), Arc<MessageSchema>> = BTreeMap::new();
    let mut out = String::new();
    for r in records {
        let to = match (&r.to, &r.dropped) {
            (Some(to), _) => to.clone(),
            (None, Some(why)) => format!("dropped({why})"),
            (None, None) => "?".into(),
        };
        let _ = write!(
            out,
            "{} {:?} {} -> {} {}:{} -> {}:{} {} -> {} len={}",
            format_nanos(r.t),
            r.kind,
            r.from,
            to,
            r.src_ip,
            r.src_port,
            r.dst_ip,
            r.dst_port,
            r.src_mac,
            r.dst_mac,
            r.payload.len()
        );
        if let Some(p) = &r.pitm {
            let _ = write!(out, " pitm={p}");
        }
        out.push('\n');
        if r.kind != FrameKind::Stream {
            continue;
        }
        let a = (r.src_ip, r.src_port);
        let b = (r.dst_ip, r.dst_port);
        let key = (a.min(b), a.max(b));
        if let Some(schema) = types.get(&key) {
            if let Some((msg, trailer)) = split_message(&r.payload) {
                if let Ok(v) = decode_message(schema, msg) {
                    let _ = writeln!(out, "  {}", schema.type_name);
                    out.push_str(&indent(&v.render(), "    "));
                    if !trailer.is_empty() {
                        let _ = writeln!(out, "  trailer {}", hex::encode(trailer));
                    }
                    continue;
                }
            }
        }
        if let Ok(h) = decode_header(&r.payload) {
            for (k, v) in h.entries() {
                let _ = writeln!(out, "  {k}={v}");
            }
            if let Some(schema) = h.get("type").and_then(|t| registry.lookup(t)) {
                types.insert(key, schema);
            }
            continue;
        }
        let _ = writeln!(out, "  raw {}", hex::encode(&r.payload));
    }
    out
}
