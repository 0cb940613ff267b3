use std::collections::BTreeMap;
use std::net::Ipv4Addr;

use crate::netsim::HostId;
use crate::wire::MessageSchema;

use super::PubSubError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicRecord {
    pub topic: String,
    pub type_name: String,
    pub md5sum: String,
    pub publisher: HostId,
    pub publisher_ip: Ipv4Addr,
    pub port: u16,
}

/// Topic → publisher registry. Lookups are direct calls, not networked.
#[derive(Debug, Clone, Default)]
pub struct Master {
    topics: BTreeMap<String, TopicRecord>,
}

impl Master {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register_publisher(
        &mut self,
        host: HostId,
        ip: Ipv4Addr,
        topic: &str,
        schema: &MessageSchema,
        port: u16,
    ) -> Result<(), PubSubError> {
        if self.topics.contains_key(topic) {
            return Err(PubSubError::DuplicateTopic(topic.to_string()));
        }
        self.topics.insert(
            topic.to_string(),
            TopicRecord {
                topic: topic.to_string(),
                type_name: schema.type_name.clone(),
                md5sum: schema.md5sum.clone(),
                publisher: host,
                publisher_ip: ip,
                port,
            },
        );
        Ok(())
    }

    pub fn lookup(&self, topic: &str) -> Option<&TopicRecord> {
        self.topics.get(topic)
    }

    pub fn topics(&self) -> impl Iterator<Item = &TopicRecord> {
        self.topics.values()
    }
}
