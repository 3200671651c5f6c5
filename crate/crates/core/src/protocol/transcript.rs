//! Append-only negotiation log, one JSON object per line.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::message::{MsgType, NegotiationMessage, Party, Primitive};
use crate::contract::Tick;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub tick: Tick,
    pub session_id: String,
    pub round: u32,
    pub sender: Party,
    pub msg_type: MsgType,
    pub primitive: Primitive,
    pub payload_digest: Option<String>,
}

impl From<&NegotiationMessage> for TranscriptRecord {
    fn from(m: &NegotiationMessage) -> Self {
        TranscriptRecord {
            tick: m.tick,
            session_id: m.session_id.clone(),
            round: m.round,
            sender: m.sender,
            msg_type: m.msg_type,
            primitive: m.primitive,
            payload_digest: m.payload.as_ref().map(|d| d.digest()),
        }
    }
}

impl TranscriptRecord {
    /// Consumer-side withdrawal of a provisional agreement.
    pub fn is_cancellation(&self) -> bool {
        self.primitive == Primitive::Withdraw && self.msg_type == MsgType::Unsigned && self.payload_digest.is_some()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transcript {
    records: Vec<TranscriptRecord>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, msg: &NegotiationMessage) {
        self.records.push(msg.into());
    }

    pub fn extend(&mut self, other: Transcript) {
        self.records.extend(other.records);
    }

    pub fn records(&self) -> &[TranscriptRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn for_session<'a>(&'a self, session_id: &'a str) -> impl Iterator<Item = &'a TranscriptRecord> + 'a {
        self.records.iter().filter(move |r| r.session_id == session_id)
    }

    pub fn count(&self, msg_type: MsgType) -> usize {
        self.records.iter().filter(|r| r.msg_type == msg_type).count()
    }

    pub fn cancellations(&self) -> usize {
        self.records.iter().filter(|r| r.is_cancellation()).count()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serialization cannot fail"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, serde_json::Error> {
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<_, _>>()?;
        Ok(Transcript { records })
    }

    pub fn write_to(&self, path: &Path) -> io::Result<()> {
        let mut f = fs::File::create(path)?;
        f.write_all(self.to_jsonl().as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_round_trip() {
        let mut t = Transcript::new();
        t.record(&NegotiationMessage::new(
            "s",
            Party::Consumer,
            Primitive::Propose,
            MsgType::Offer,
            3,
        ));
        t.record(&NegotiationMessage::new(
            "s",
            Party::Provider,
            Primitive::Reject,
            MsgType::Rejected,
            4,
        ));
        let text = t.to_jsonl();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with(r#"{"tick":3,"session_id":"s","round":0,"sender":"consumer","msg_type":"Offer""#));
        assert_eq!(Transcript::from_jsonl(&text).unwrap(), t);
    }
}
