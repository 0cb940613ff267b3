use std::net::Ipv4Addr;
use std::sync::Arc;

use log::{debug, warn};

use crate::guard::{AnomalyConfig, AnomalyDetector, AnomalyReason, AnomalyVerdict, AuthConfig, AuthVerdict, Authenticator, RejectReason};
use crate::netsim::{Frame, HostId, Network};
use crate::wire::{
    decode_header, decode_message, encode_header, encode_message, ConnectionHeader, FieldValue, MessageSchema,
};

use super::{Master, PubSubError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConnState {
    HandshakeSent,
    Established,
    Closed,
}

#[derive(Debug, Clone)]
pub struct Connection {
    pub pub_host: HostId,
    pub sub_host: HostId,
    pub topic: String,
    pub schema: Arc<MessageSchema>,
    pub state: ConnState,
    /// Address of the far end, as seen by the owner of this connection.
    pub remote_ip: Ipv4Addr,
    pub remote_port: u16,
}

struct PubConn {
    conn: Connection,
    auth: Option<Authenticator>,
}

/// Serves one topic on `port`; answers subscriber handshakes and streams
/// encoded messages to every established connection.
pub struct Publisher {
    pub host: HostId,
    pub callerid: String,
    pub topic: String,
    pub schema: Arc<MessageSchema>,
    pub port: u16,
    auth: Option<AuthConfig>,
    conns: Vec<PubConn>,
    pub published: u64,
    pub frames_sent: u64,
}

impl Publisher {
    pub fn new(host: HostId, callerid: &str, topic: &str, schema: Arc<MessageSchema>, port: u16) -> Self {
        Publisher {
            host,
            callerid: callerid.to_string(),
            topic: topic.to_string(),
            schema,
            port,
            auth: None,
            conns: Vec::new(),
            published: 0,
            frames_sent: 0,
        }
    }

    pub fn with_auth(mut self, cfg: AuthConfig) -> Self {
        self.auth = Some(cfg);
        self
    }

    pub fn connections(&self) -> impl Iterator<Item = &Connection> {
        self.conns.iter().map(|c| &c.conn)
    }

    /// Handles a subscriber's connection header addressed to this
    /// publisher's port.
    pub fn handle_frame<T>(&mut self, net: &mut Network<T>, frame: &Frame) -> Result<(), PubSubError> {
        let known = self
            .conns
            .iter()
            .any(|c| c.conn.remote_ip == frame.src_ip && c.conn.remote_port == frame.src_port);
        if known {
            debug!("{}: ignoring data from subscriber {}:{}", self.topic, frame.src_ip, frame.src_port);
            return Ok(());
        }
        let header = decode_header(&frame.payload)?;
        let sub_host = net.host_by_ip(frame.src_ip).unwrap_or(self.host);
        let mut conn = Connection {
            pub_host: self.host,
            sub_host,
            topic: self.topic.clone(),
            schema: self.schema.clone(),
            state: ConnState::Established,
            remote_ip: frame.src_ip,
            remote_port: frame.src_port,
        };

        let check = self.check_request(&header);
        let reply = match &check {
            Ok(()) => ConnectionHeader::from_entries([
                ("callerid", self.callerid.as_str()),
                ("topic", self.topic.as_str()),
                ("type", self.schema.type_name.as_str()),
                ("md5sum", self.schema.md5sum.as_str()),
                ("latching", "0"),
            ])?,
            Err(e) => {
                conn.state = ConnState::Closed;
                ConnectionHeader::from_entries([("error", e.to_string())])?
            }
        };
        net.send_stream(self.host, frame.src_ip, self.port, frame.src_port, encode_header(&reply)?);
        self.frames_sent += 1;
        let auth = self.auth.clone().map(Authenticator::new);
        self.conns.push(PubConn { conn, auth });
        check
    }

    fn check_request(&self, header: &ConnectionHeader) -> Result<(), PubSubError> {
        let topic = header.get("topic").unwrap_or_default();
        if topic != self.topic {
            return Err(PubSubError::UnknownTopic(topic.to_string()));
        }
        let ty = header.get("type").unwrap_or_default();
        let md5 = header.get("md5sum").unwrap_or_default();
        let type_ok = ty == "*" || ty == self.schema.type_name;
        let md5_ok = md5 == "*" || md5 == self.schema.md5sum;
        if !(type_ok && md5_ok) {
            return Err(PubSubError::TypeMismatch {
                expected: format!("{}/{}", self.schema.type_name, self.schema.md5sum),
                got: format!("{ty}/{md5}"),
            });
        }
        Ok(())
    }

    /// Publishes to every established connection; returns how many frames
    /// were sent.
    pub fn publish<T>(&mut self, net: &mut Network<T>, value: &FieldValue) -> Result<usize, PubSubError> {
        let bytes = encode_message(&self.schema, value)?;
        self.published += 1;
        let mut sent = 0;
        for idx in 0..self.conns.len() {
            if self.conns[idx].conn.state == ConnState::Established {
                self.send_bytes(net, idx, &bytes);
                sent += 1;
            }
        }
        Ok(sent)
    }

    /// Publishes on a single connection.
    pub fn send_to<T>(&mut self, net: &mut Network<T>, conn: usize, value: &FieldValue) -> Result<(), PubSubError> {
        match self.conns.get(conn) {
            Some(c) if c.conn.state == ConnState::Established => {}
            _ => return Err(PubSubError::NotEstablished),
        }
        let bytes = encode_message(&self.schema, value)?;
        self.send_bytes(net, conn, &bytes);
        Ok(())
    }

    /// Marks a connection closed; later sends on it fail.
    pub fn close(&mut self, conn: usize) {
        if let Some(c) = self.conns.get_mut(conn) {
            c.conn.state = ConnState::Closed;
        }
    }

    fn send_bytes<T>(&mut self, net: &mut Network<T>, idx: usize, bytes: &[u8]) {
        let pc = &mut self.conns[idx];
        let payload = match pc.auth.as_mut() {
            Some(a) => a.seal(&self.topic, bytes),
            None => bytes.to_vec(),
        };
        net.send_stream(self.host, pc.conn.remote_ip, self.port, pc.conn.remote_port, payload);
        self.frames_sent += 1;
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct SubscriberCounters {
    pub received: u64,
    pub delivered: u64,
    pub auth_rejected: u64,
    pub anomaly_rejected: u64,
    pub decode_errors: u64,
}

impl SubscriberCounters {
    pub fn rejected(&self) -> u64 {
        self.auth_rejected + self.anomaly_rejected
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Rejection {
    Auth(RejectReason),
    Anomaly(AnomalyReason),
    Decode(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SubEvent {
    Established,
    Failed(PubSubError),
    Delivered(FieldValue),
    Rejected(Rejection),
    Ignored,
}

/// Subscribes to one topic from `local_port` and decodes what arrives.
pub struct Subscriber {
    pub host: HostId,
    pub callerid: String,
    pub topic: String,
    pub schema: Arc<MessageSchema>,
    pub local_port: u16,
    conn: Option<Connection>,
    auth: Option<Authenticator>,
    anomaly: Option<AnomalyDetector>,
    pub counters: SubscriberCounters,
    pub error: Option<PubSubError>,
}

impl Subscriber {
    pub fn new(host: HostId, callerid: &str, topic: &str, schema: Arc<MessageSchema>, local_port: u16) -> Self {
        Subscriber {
            host,
            callerid: callerid.to_string(),
            topic: topic.to_string(),
            schema,
            local_port,
            conn: None,
            auth: None,
            anomaly: None,
            counters: SubscriberCounters::default(),
            error: None,
        }
    }

    pub fn with_auth(mut self, cfg: AuthConfig) -> Self {
        self.auth = Some(Authenticator::new(cfg));
        self
    }

    pub fn with_anomaly(mut self, cfg: AnomalyConfig) -> Self {
        self.anomaly = Some(AnomalyDetector::new(cfg));
        self
    }

    pub fn connection(&self) -> Option<&Connection> {
        self.conn.as_ref()
    }

    pub fn state(&self) -> Option<ConnState> {
        self.conn.as_ref().map(|c| c.state)
    }

    /// Looks the topic up in the master and sends this end's connection
    /// header. The connection becomes established when the publisher's
    /// header comes back.
    pub fn subscribe<T>(&mut self, net: &mut Network<T>, master: &Master) -> Result<(), PubSubError> {
        let rec = master
            .lookup(&self.topic)
            .ok_or_else(|| PubSubError::UnknownTopic(self.topic.clone()))?;
        let header = ConnectionHeader::from_entries([
            ("callerid", self.callerid.as_str()),
            ("topic", self.topic.as_str()),
            ("type", self.schema.type_name.as_str()),
            ("md5sum", self.schema.md5sum.as_str()),
        ])?;
        self.conn = Some(Connection {
            pub_host: rec.publisher,
            sub_host: self.host,
            topic: self.topic.clone(),
            schema: self.schema.clone(),
            state: ConnState::HandshakeSent,
            remote_ip: rec.publisher_ip,
            remote_port: rec.port,
        });
        net.send_stream(self.host, rec.publisher_ip, self.local_port, rec.port, encode_header(&header)?);
        Ok(())
    }

    pub fn handle_frame(&mut self, frame: &Frame) -> SubEvent {
        let Some(conn) = self.conn.as_mut() else {
            return SubEvent::Ignored;
        };
        if frame.src_ip != conn.remote_ip || frame.src_port != conn.remote_port {
            return SubEvent::Ignored;
        }
        match conn.state {
            ConnState::Closed => SubEvent::Ignored,
            ConnState::HandshakeSent => {
                let result = decode_header(&frame.payload)
                    .map_err(PubSubError::from)
                    .and_then(|h| check_response(&h, &self.schema));
                match result {
                    Ok(()) => {
                        conn.state = ConnState::Established;
                        SubEvent::Established
                    }
                    Err(e) => {
                        conn.state = ConnState::Closed;
                        self.error = Some(e.clone());
                        SubEvent::Failed(e)
                    }
                }
            }
            ConnState::Established => self.on_message(&frame.payload),
        }
    }

    fn on_message(&mut self, payload: &[u8]) -> SubEvent {
        self.counters.received += 1;
        let body = match self.auth.as_mut() {
            Some(auth) => match auth.open(&self.topic, payload) {
                AuthVerdict::Accept(body) => body,
                AuthVerdict::Reject(reason) => {
                    self.counters.auth_rejected += 1;
                    return SubEvent::Rejected(Rejection::Auth(reason));
                }
            },
            None => payload.to_vec(),
        };
        let value = match decode_message(&self.schema, &body) {
            Ok(v) => v,
            Err(e) => {
                warn!("{}: undecodable message: {e}", self.topic);
                self.counters.decode_errors += 1;
                return SubEvent::Rejected(Rejection::Decode(e.to_string()));
            }
        };
        if let Some(det) = self.anomaly.as_mut() {
            if let AnomalyVerdict::Reject(reason) = det.check(&value) {
                self.counters.anomaly_rejected += 1;
                return SubEvent::Rejected(Rejection::Anomaly(reason));
            }
        }
        self.counters.delivered += 1;
        SubEvent::Delivered(value)
    }

    /// The publisher's address never resolved.
    pub fn fail_unreachable(&mut self, ip: Ipv4Addr) -> SubEvent {
        let err = PubSubError::Unreachable(ip);
        if let Some(c) = self.conn.as_mut() {
            c.state = ConnState::Closed;
        }
        self.error = Some(err.clone());
        SubEvent::Failed(err)
    }
}

fn check_response(h: &ConnectionHeader, schema: &MessageSchema) -> Result<(), PubSubError> {
    if let Some(err) = h.get("error") {
        return Err(PubSubError::TypeMismatch {
            expected: format!("{}/{}", schema.type_name, schema.md5sum),
            got: err.to_string(),
        });
    }
    let ty = h.get("type").unwrap_or_default();
    let md5 = h.get("md5sum").unwrap_or_default();
    if ty != schema.type_name || md5 != schema.md5sum {
        return Err(PubSubError::TypeMismatch {
            expected: format!("{}/{}", schema.type_name, schema.md5sum),
            got: format!("{ty}/{md5}"),
        });
    }
    Ok(())
}
