//! Negotiation protocols as data-driven state machines, plus the runners
//! that drive them against provider ports.

mod bilateral;
mod message;
mod multilateral;
mod ports;
mod session;
mod spec;
mod transcript;

pub use bilateral::{Limits, NegotiationError, Negotiator};
pub use message::{MsgType, NegotiationMessage, Party, Primitive};
pub use multilateral::{DispatchMode, IterationRecord, MultilateralEnd, MultilateralOutcome};
pub use ports::{
    opponent_position, share, AgreementCheck, Exchange, OfferDecision, OfferHistory, ProviderError, ProviderPort,
    ProviderReply, SharedProvider, StrategyPort,
};
pub use session::{step, step_timeout, Outcome, ProtocolError, SessionState};
pub use spec::{Guard, PayloadRule, ProtocolKind, ProtocolSpec, Settlement, SpecError, Transition, Trigger};
pub use transcript::{Transcript, TranscriptRecord};
