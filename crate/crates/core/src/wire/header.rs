use super::WireError;

/// TCPROS connection header: ordered `key=value` entries.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConnectionHeader {
    entries: Vec<(String, String)>,
}

impl ConnectionHeader {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a header from entries, rejecting keys that are empty or contain
    /// '=' and `topic` values that do not start with '/'.
    pub fn from_entries<I, K, V>(entries: I) -> Result<Self, WireError>
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        let mut h = Self::new();
        for (k, v) in entries {
            h.push(k, v)?;
        }
        Ok(h)
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl Into<String>) -> Result<(), WireError> {
        let key = key.into();
        let value = value.into();
        validate_entry(&key, &value)?;
        self.entries.push((key, value));
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn validate_entry(key: &str, value: &str) -> Result<(), WireError> {
    if key.is_empty() || key.contains('=') {
        return Err(WireError::MalformedEntry);
    }
    if key == "topic" && !value.starts_with('/') {
        return Err(WireError::MalformedEntry);
    }
    Ok(())
}

pub fn encode_header(h: &ConnectionHeader) -> Result<Vec<u8>, WireError> {
    let mut out = vec![0u8; 4];
    for (k, v) in &h.entries {
        validate_entry(k, v)?;
        let len = u32::try_from(k.len() + 1 + v.len()).map_err(|_| WireError::BadLength)?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(k.as_bytes());
        out.push(b'=');
        out.extend_from_slice(v.as_bytes());
    }
    let total = u32::try_from(out.len() - 4).map_err(|_| WireError::BadLength)?;
    out[..4].copy_from_slice(&total.to_le_bytes());
    Ok(out)
}

pub fn decode_header(buf: &[u8]) -> Result<ConnectionHeader, WireError> {
    let total = read_u32(buf, 0).ok_or(WireError::BadLength)? as usize;
    let body = &buf[4..];
    if body.len() != total {
        return Err(WireError::BadLength);
    }
    let mut header = ConnectionHeader::new();
    let mut pos = 0;
    while pos < body.len() {
        let len = read_u32(body, pos).ok_or(WireError::BadLength)? as usize;
        pos += 4;
        let entry = body.get(pos..pos.saturating_add(len)).ok_or(WireError::BadLength)?;
        pos += len;
        let entry = std::str::from_utf8(entry).map_err(|_| WireError::MalformedEntry)?;
        let (k, v) = entry.split_once('=').ok_or(WireError::MalformedEntry)?;
        header.push(k, v)?;
    }
    Ok(header)
}

fn read_u32(buf: &[u8], at: usize) -> Option<u32> {
    let bytes: [u8; 4] = buf.get(at..at.checked_add(4)?)?.try_into().ok()?;
    Some(u32::from_le_bytes(bytes))
}
