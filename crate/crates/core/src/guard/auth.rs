use hmac::{Hmac, Mac};
use sha2::Sha256;

pub const TAG_LEN: usize = 8;

/// Keyed tag over (optional sequence number, topic, body).
pub trait TagFunction: Send + Sync {
    fn tag(&self, key: &[u8], topic: &str, body: &[u8], seq: Option<u64>) -> [u8; TAG_LEN];
}

/// HMAC-SHA256 truncated to the leftmost 8 bytes.
#[derive(Debug, Clone, Copy, Default)]
pub struct HmacSha256Tag;

impl TagFunction for HmacSha256Tag {
    fn tag(&self, key: &[u8], topic: &str, body: &[u8], seq: Option<u64>) -> [u8; TAG_LEN] {
        let mut mac = Hmac::<Sha256>::new_from_slice(key).expect("HMAC accepts any key length");
        if let Some(seq) = seq {
            mac.update(&seq.to_le_bytes());
        }
        // Length-delimit the topic so (topic, body) splits cannot collide.
        mac.update(&(topic.len() as u32).to_le_bytes());
        mac.update(topic.as_bytes());
        mac.update(body);
        let full = mac.finalize().into_bytes();
        let mut out = [0u8; TAG_LEN];
        out.copy_from_slice(&full[..TAG_LEN]);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuthConfig {
    pub key: Vec<u8>,
    /// Bind each tag to a per-connection sequence number.
    pub replay_protection: bool,
}

impl AuthConfig {
    pub fn new(key: impl Into<Vec<u8>>) -> Self {
        AuthConfig {
            key: key.into(),
            replay_protection: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    TooShort,
    BadTag,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AuthVerdict {
    Accept(Vec<u8>),
    Reject(RejectReason),
}

/// `body ++ tag` using the default tag function.
pub fn tag_message(cfg: &AuthConfig, topic: &str, body: &[u8]) -> Vec<u8> {
    seal_with(&HmacSha256Tag, &cfg.key, topic, body, None)
}

pub fn verify_message(cfg: &AuthConfig, topic: &str, payload: &[u8]) -> AuthVerdict {
    open_with(&HmacSha256Tag, &cfg.key, topic, payload, None)
}

fn seal_with(f: &dyn TagFunction, key: &[u8], topic: &str, body: &[u8], seq: Option<u64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(body.len() + TAG_LEN);
    out.extend_from_slice(body);
    out.extend_from_slice(&f.tag(key, topic, body, seq));
    out
}

fn open_with(f: &dyn TagFunction, key: &[u8], topic: &str, payload: &[u8], seq: Option<u64>) -> AuthVerdict {
    if payload.len() < TAG_LEN {
        return AuthVerdict::Reject(RejectReason::TooShort);
    }
    let (body, tag) = payload.split_at(payload.len() - TAG_LEN);
    let expected = f.tag(key, topic, body, seq);
    let diff = expected.iter().zip(tag).fold(0u8, |acc, (a, b)| acc | (a ^ b));
    if diff == 0 {
        AuthVerdict::Accept(body.to_vec())
    } else {
        AuthVerdict::Reject(RejectReason::BadTag)
    }
}

/// One end of an authenticated connection.
pub struct Authenticator {
    cfg: AuthConfig,
    tagger: Box<dyn TagFunction>,
    send_seq: u64,
    recv_seq: u64,
    pub accepted: u64,
    pub rejected: u64,
}

impl Authenticator {
    pub fn new(cfg: AuthConfig) -> Self {
        Self::with_tag_function(cfg, Box::new(HmacSha256Tag))
    }

    pub fn with_tag_function(cfg: AuthConfig, tagger: Box<dyn TagFunction>) -> Self {
        Authenticator {
            cfg,
            tagger,
            send_seq: 0,
            recv_seq: 0,
            accepted: 0,
            rejected: 0,
        }
    }

    pub fn config(&self) -> &AuthConfig {
        &self.cfg
    }

    pub fn seal(&mut self, topic: &str, body: &[u8]) -> Vec<u8> {
        let seq = self.cfg.replay_protection.then_some(self.send_seq);
        self.send_seq += 1;
        seal_with(self.tagger.as_ref(), &self.cfg.key, topic, body, seq)
    }

    /// Verifies and strips the tag. A rejected payload does not advance the
    /// expected sequence number.
    pub fn open(&mut self, topic: &str, payload: &[u8]) -> AuthVerdict {
        let seq = self.cfg.replay_protection.then_some(self.recv_seq);
        let verdict = open_with(self.tagger.as_ref(), &self.cfg.key, topic, payload, seq);
        match verdict {
            AuthVerdict::Accept(_) => {
                self.accepted += 1;
                self.recv_seq += 1;
            }
            AuthVerdict::Reject(_) => self.rejected += 1,
        }
        verdict
    }
}
