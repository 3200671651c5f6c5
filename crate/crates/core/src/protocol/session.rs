use serde::{Deserialize, Serialize};

use super::message::{MsgType, NegotiationMessage, Party, Primitive};
use super::spec::{PayloadRule, ProtocolKind, Settlement, Transition, Trigger};
use crate::contract::{AgreementDocument, Stage, Tick};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProtocolError {
    #[error("message for session `{found}` delivered to session `{expected}`")]
    SessionMismatch { expected: String, found: String },
    #[error("session is closed")]
    SessionClosed,
    #[error("{primitive:?} is not permitted in phase `{phase}`")]
    IllegalTransition { phase: String, primitive: Primitive },
    #[error("payload does not match what `{phase}` -> `{to}` requires")]
    InvalidPayload { phase: String, to: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "agreement", rename_all = "snake_case")]
pub enum Outcome {
    Pending,
    Agreed(Box<AgreementDocument>),
    Rejected,
    Expired,
    Withdrawn,
}

impl Outcome {
    pub fn is_pending(&self) -> bool {
        matches!(self, Outcome::Pending)
    }

    pub fn agreement(&self) -> Option<&AgreementDocument> {
        match self {
            Outcome::Agreed(a) => Some(a),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Outcome::Pending => "pending",
            Outcome::Agreed(_) => "agreed",
            Outcome::Rejected => "rejected",
            Outcome::Expired => "expired",
            Outcome::Withdrawn => "withdrawn",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionState {
    pub session_id: String,
    pub protocol: ProtocolKind,
    pub phase: String,
    pub round: u32,
    pub deadline_round: u32,
    pub deadline_tick: Tick,
    pub last_offer: Option<AgreementDocument>,
    pub outcome: Outcome,
    /// Diagnostic attached when a run aborts (e.g. a constraint violation).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl SessionState {
    pub fn new(
        session_id: impl Into<String>,
        protocol: ProtocolKind,
        deadline_round: u32,
        deadline_tick: Tick,
    ) -> Self {
        SessionState {
            session_id: session_id.into(),
            protocol,
            phase: protocol.spec().initial.clone(),
            round: 0,
            deadline_round,
            deadline_tick,
            last_offer: None,
            outcome: Outcome::Pending,
            note: None,
        }
    }

    pub fn is_terminal(&self) -> bool {
        self.protocol.spec().is_terminal(&self.phase)
    }

    fn apply(&self, t: &Transition, msg: &NegotiationMessage) -> (SessionState, NegotiationMessage) {
        let mut next = self.clone();
        next.phase = t.to.clone();
        if t.advances_round {
            next.round += 1;
        }
        if let Some(doc) = &msg.payload {
            if doc.stage == Stage::Offer {
                next.last_offer = Some(doc.clone());
            }
        }
        next.outcome = match t.settles {
            None => Outcome::Pending,
            Some(Settlement::Agreed) => match &msg.payload {
                Some(doc) => Outcome::Agreed(Box::new(doc.clone())),
                None => Outcome::Rejected,
            },
            Some(Settlement::Rejected) => Outcome::Rejected,
            Some(Settlement::Expired) => Outcome::Expired,
            Some(Settlement::Withdrawn) => Outcome::Withdrawn,
        };
        let mut out = NegotiationMessage::new(&self.session_id, msg.sender, msg.primitive, t.emits, msg.tick);
        out.round = next.round;
        if t.payload != PayloadRule::None {
            out.payload = msg.payload.clone();
        }
        (next, out)
    }

    fn expire(&self, sender: Party, tick: Tick) -> Option<(SessionState, NegotiationMessage)> {
        let spec = self.protocol.spec();
        let t = spec
            .transitions_from(&self.phase)
            .find(|t| t.trigger == Trigger::Timeout)?;
        let trigger = NegotiationMessage::new(&self.session_id, sender, Primitive::Terminate, MsgType::Expired, tick);
        let (mut next, mut out) = self.apply(t, &trigger);
        out.primitive = Primitive::Terminate;
        next.note = Some(format!("deadline tick {} passed at tick {tick}", self.deadline_tick));
        Some((next, out))
    }
}

fn payload_ok(rule: PayloadRule, payload: Option<&AgreementDocument>) -> bool {
    match rule {
        PayloadRule::None => payload.is_none(),
        PayloadRule::Any => true,
        PayloadRule::Stage(s) => payload.is_some_and(|d| d.stage == s),
    }
}

/// Advances a session by one incoming message.
///
/// Returns the successor state and the messages the engine emits for the
/// sender. A message stamped after the deadline tick expires the session
/// instead of being applied, when the protocol defines a timeout.
pub fn step(
    state: &SessionState,
    msg: &NegotiationMessage,
) -> Result<(SessionState, Vec<NegotiationMessage>), ProtocolError> {
    if msg.session_id != state.session_id {
        return Err(ProtocolError::SessionMismatch {
            expected: state.session_id.clone(),
            found: msg.session_id.clone(),
        });
    }
    if state.is_terminal() {
        return Err(ProtocolError::SessionClosed);
    }
    if msg.tick > state.deadline_tick {
        if let Some((next, out)) = state.expire(msg.sender, msg.tick) {
            return Ok((next, vec![out]));
        }
    }
    let spec = state.protocol.spec();
    let trigger = Trigger::Message {
        primitive: msg.primitive,
        sender: msg.sender,
    };
    let t = spec
        .transitions_from(&state.phase)
        .find(|t| t.trigger == trigger && t.guard.holds(state.round, state.deadline_round))
        .ok_or_else(|| ProtocolError::IllegalTransition {
            phase: state.phase.clone(),
            primitive: msg.primitive,
        })?;
    if !payload_ok(t.payload, msg.payload.as_ref()) {
        return Err(ProtocolError::InvalidPayload {
            phase: state.phase.clone(),
            to: t.to.clone(),
        });
    }
    let (next, out) = state.apply(t, msg);
    Ok((next, vec![out]))
}

/// Expires a session whose deadline tick has passed without a message.
pub fn step_timeout(
    state: &SessionState,
    tick: Tick,
) -> Result<(SessionState, Vec<NegotiationMessage>), ProtocolError> {
    if state.is_terminal() {
        return Err(ProtocolError::SessionClosed);
    }
    if tick <= state.deadline_tick {
        return Ok((state.clone(), Vec::new()));
    }
    Ok(match state.expire(Party::Provider, tick) {
        Some((next, out)) => (next, vec![out]),
        None => (state.clone(), Vec::new()),
    })
}
