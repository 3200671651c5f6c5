use serde::{Deserialize, Serialize};

use crate::contract::{AgreementDocument, Tick};

/// Message types of the negotiation vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MsgType {
    Offer,
    Counteroffer,
    Rejected,
    Accepted,
    Expired,
    SinglePartySigned,
    Signed,
    Unsigned,
}

impl MsgType {
    pub const ALL: [MsgType; 8] = [
        MsgType::Offer,
        MsgType::Counteroffer,
        MsgType::Rejected,
        MsgType::Accepted,
        MsgType::Expired,
        MsgType::SinglePartySigned,
        MsgType::Signed,
        MsgType::Unsigned,
    ];
}

/// Negotiation primitives; each protocol transition is keyed by one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Primitive {
    CallForProposal,
    Propose,
    Accept,
    Terminate,
    Reject,
    Acknowledge,
    Modify,
    Withdraw,
}

impl Primitive {
    pub const ALL: [Primitive; 8] = [
        Primitive::CallForProposal,
        Primitive::Propose,
        Primitive::Accept,
        Primitive::Terminate,
        Primitive::Reject,
        Primitive::Acknowledge,
        Primitive::Modify,
        Primitive::Withdraw,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Party {
    Consumer,
    Provider,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NegotiationMessage {
    pub msg_type: MsgType,
    pub primitive: Primitive,
    pub payload: Option<AgreementDocument>,
    pub session_id: String,
    pub round: u32,
    pub sender: Party,
    pub tick: Tick,
}

impl NegotiationMessage {
    pub fn new(session_id: &str, sender: Party, primitive: Primitive, msg_type: MsgType, tick: Tick) -> Self {
        NegotiationMessage {
            msg_type,
            primitive,
            payload: None,
            session_id: session_id.to_string(),
            round: 0,
            sender,
            tick,
        }
    }

    pub fn with_payload(mut self, doc: AgreementDocument) -> Self {
        self.payload = Some(doc);
        self
    }
}
