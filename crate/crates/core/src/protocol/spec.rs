//! Declarative protocol definitions.
//!
//! A [`ProtocolSpec`] lists states and guarded transitions; the session
//! engine interprets it and never hard-codes protocol rules. New protocols
//! are added by writing another spec.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::message::{MsgType, Party, Primitive};
use crate::contract::Stage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ProtocolKind {
    #[serde(rename = "CNIP")]
    Cnip,
    AlternatingOffers,
    #[serde(rename = "IteratedCNIP")]
    IteratedCnip,
}

impl ProtocolKind {
    pub fn spec(self) -> &'static ProtocolSpec {
        static CNIP: OnceLock<ProtocolSpec> = OnceLock::new();
        static AO: OnceLock<ProtocolSpec> = OnceLock::new();
        static ICNIP: OnceLock<ProtocolSpec> = OnceLock::new();
        match self {
            ProtocolKind::Cnip => CNIP.get_or_init(ProtocolSpec::contract_net),
            ProtocolKind::AlternatingOffers => AO.get_or_init(ProtocolSpec::alternating_offers),
            ProtocolKind::IteratedCnip => ICNIP.get_or_init(ProtocolSpec::iterated_contract_net),
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            ProtocolKind::Cnip => "cnip",
            ProtocolKind::AlternatingOffers => "ao",
            ProtocolKind::IteratedCnip => "icnip",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Trigger {
    Message {
        primitive: Primitive,
        sender: Party,
    },
    /// A message arrived after the session's deadline tick.
    Timeout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Guard {
    Always,
    BeforeDeadlineRound,
    AtDeadlineRound,
}

impl Guard {
    pub fn holds(self, round: u32, deadline_round: u32) -> bool {
        match self {
            Guard::Always => true,
            Guard::BeforeDeadlineRound => round < deadline_round,
            Guard::AtDeadlineRound => round >= deadline_round,
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            Guard::Always => "always",
            Guard::BeforeDeadlineRound => "round < deadline_round",
            Guard::AtDeadlineRound => "round >= deadline_round",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PayloadRule {
    None,
    Any,
    Stage(Stage),
}

/// How a terminal transition settles the session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Settlement {
    Agreed,
    Rejected,
    Expired,
    Withdrawn,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub from: String,
    pub trigger: Trigger,
    pub guard: Guard,
    pub to: String,
    pub emits: MsgType,
    pub payload: PayloadRule,
    pub advances_round: bool,
    pub settles: Option<Settlement>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolSpec {
    pub name: String,
    pub states: Vec<String>,
    pub transitions: Vec<Transition>,
    pub initial: String,
    pub terminal: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SpecError {
    #[error("state `{0}` is used but not declared")]
    UnknownState(String),
    #[error("terminal state `{0}` has outgoing transitions")]
    TerminalHasExit(String),
    #[error("initial state must be declared and non-terminal")]
    BadInitial,
    #[error("transition {0} -> {1}: settlement must be set exactly on terminal targets")]
    Settlement(String, String),
    #[error("transition {0} -> {1} emits {2:?} with an incompatible payload rule")]
    PayloadMismatch(String, String, MsgType),
}

struct Builder {
    spec: ProtocolSpec,
}

impl Builder {
    fn new(name: &str, states: &[&str], initial: &str, terminal: &[&str]) -> Self {
        Builder {
            spec: ProtocolSpec {
                name: name.into(),
                states: states.iter().map(|s| s.to_string()).collect(),
                transitions: Vec::new(),
                initial: initial.into(),
                terminal: terminal.iter().map(|s| s.to_string()).collect(),
            },
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn on(
        mut self,
        from: &str,
        sender: Party,
        primitive: Primitive,
        guard: Guard,
        to: &str,
        emits: MsgType,
        payload: PayloadRule,
        advances_round: bool,
        settles: Option<Settlement>,
    ) -> Self {
        self.spec.transitions.push(Transition {
            from: from.into(),
            trigger: Trigger::Message { primitive, sender },
            guard,
            to: to.into(),
            emits,
            payload,
            advances_round,
            settles,
        });
        self
    }

    fn timeout(mut self, from: &[&str], to: &str) -> Self {
        for f in from {
            self.spec.transitions.push(Transition {
                from: f.to_string(),
                trigger: Trigger::Timeout,
                guard: Guard::Always,
                to: to.into(),
                emits: MsgType::Expired,
                payload: PayloadRule::None,
                advances_round: false,
                settles: Some(Settlement::Expired),
            });
        }
        self
    }

    fn build(self) -> ProtocolSpec {
        self.spec
    }
}

use Guard::*;
use Party::{Consumer, Provider};
use PayloadRule as P;

impl ProtocolSpec {
    /// Take-it-or-leave-it: one offer, one accept or reject.
    pub fn contract_net() -> Self {
        Builder::new(
            "CNIP",
            &["Init", "AwaitingDecision", "Agreed", "Rejected", "Expired"],
            "Init",
            &["Agreed", "Rejected", "Expired"],
        )
        .on(
            "Init",
            Consumer,
            Primitive::Propose,
            BeforeDeadlineRound,
            "AwaitingDecision",
            MsgType::Offer,
            P::Stage(Stage::Offer),
            true,
            None,
        )
        .on(
            "AwaitingDecision",
            Provider,
            Primitive::Accept,
            Always,
            "Agreed",
            MsgType::Accepted,
            P::Stage(Stage::Agreement),
            false,
            Some(Settlement::Agreed),
        )
        .on(
            "AwaitingDecision",
            Provider,
            Primitive::Reject,
            Always,
            "Rejected",
            MsgType::Rejected,
            P::None,
            false,
            Some(Settlement::Rejected),
        )
        .on(
            "Init",
            Consumer,
            Primitive::Withdraw,
            Always,
            "Rejected",
            MsgType::Rejected,
            P::None,
            false,
            Some(Settlement::Withdrawn),
        )
        .timeout(&["Init", "AwaitingDecision"], "Expired")
        .build()
    }

    /// Bilateral bargaining: the provider answers an offer with acceptance,
    /// rejection, or a counter template; the consumer answers a counter
    /// template with a counteroffer drawn from its permissible values.
    pub fn alternating_offers() -> Self {
        Builder::new(
            "AlternatingOffers",
            &["Init", "ConsumerTurn", "ProviderTurn", "Agreed", "Rejected", "Expired"],
            "Init",
            &["Agreed", "Rejected", "Expired"],
        )
        .on(
            "Init",
            Consumer,
            Primitive::Propose,
            BeforeDeadlineRound,
            "ProviderTurn",
            MsgType::Offer,
            P::Stage(Stage::Offer),
            true,
            None,
        )
        .on(
            "ProviderTurn",
            Provider,
            Primitive::Accept,
            Always,
            "Agreed",
            MsgType::Accepted,
            P::Stage(Stage::Agreement),
            false,
            Some(Settlement::Agreed),
        )
        .on(
            "ProviderTurn",
            Provider,
            Primitive::Reject,
            Always,
            "Rejected",
            MsgType::Rejected,
            P::None,
            false,
            Some(Settlement::Rejected),
        )
        .on(
            "ProviderTurn",
            Provider,
            Primitive::Modify,
            BeforeDeadlineRound,
            "ConsumerTurn",
            MsgType::Rejected,
            P::Stage(Stage::Template),
            false,
            None,
        )
        .on(
            "ProviderTurn",
            Provider,
            Primitive::Modify,
            AtDeadlineRound,
            "Rejected",
            MsgType::Rejected,
            P::Stage(Stage::Template),
            false,
            Some(Settlement::Rejected),
        )
        .on(
            "ConsumerTurn",
            Consumer,
            Primitive::Propose,
            BeforeDeadlineRound,
            "ProviderTurn",
            MsgType::Counteroffer,
            P::Stage(Stage::Offer),
            true,
            None,
        )
        .on(
            "ConsumerTurn",
            Consumer,
            Primitive::Withdraw,
            Always,
            "Rejected",
            MsgType::Rejected,
            P::None,
            false,
            Some(Settlement::Withdrawn),
        )
        .on(
            "ConsumerTurn",
            Consumer,
            Primitive::Terminate,
            Always,
            "Rejected",
            MsgType::Rejected,
            P::None,
            false,
            Some(Settlement::Rejected),
        )
        .timeout(&["Init", "ConsumerTurn", "ProviderTurn"], "Expired")
        .build()
    }

    /// Coordinator of the multilateral protocol. Its round counts dispatch
    /// iterations; the deadline round is the iteration limit.
    pub fn iterated_contract_net() -> Self {
        Builder::new(
            "IteratedCNIP",
            &[
                "Dispatch",
                "CheckAgreements",
                "CounterTemplates",
                "Confirmed",
                "Quit",
                "Exhausted",
            ],
            "Dispatch",
            &["Confirmed", "Quit", "Exhausted"],
        )
        .on(
            "Dispatch",
            Provider,
            Primitive::Acknowledge,
            Always,
            "CheckAgreements",
            MsgType::SinglePartySigned,
            P::None,
            true,
            None,
        )
        .on(
            "Dispatch",
            Provider,
            Primitive::Reject,
            Always,
            "Exhausted",
            MsgType::Rejected,
            P::None,
            true,
            Some(Settlement::Rejected),
        )
        .on(
            "CheckAgreements",
            Consumer,
            Primitive::Accept,
            Always,
            "Confirmed",
            MsgType::Signed,
            P::Stage(Stage::Agreement),
            false,
            Some(Settlement::Agreed),
        )
        .on(
            "CheckAgreements",
            Consumer,
            Primitive::Withdraw,
            Always,
            "Quit",
            MsgType::Rejected,
            P::None,
            false,
            Some(Settlement::Withdrawn),
        )
        .on(
            "CheckAgreements",
            Consumer,
            Primitive::CallForProposal,
            BeforeDeadlineRound,
            "CounterTemplates",
            MsgType::Unsigned,
            P::None,
            false,
            None,
        )
        .on(
            "CounterTemplates",
            Consumer,
            Primitive::Propose,
            Always,
            "Dispatch",
            MsgType::Unsigned,
            P::None,
            false,
            None,
        )
        .on(
            "CounterTemplates",
            Consumer,
            Primitive::Withdraw,
            Always,
            "Quit",
            MsgType::Rejected,
            P::None,
            false,
            Some(Settlement::Withdrawn),
        )
        .build()
    }

    pub fn is_terminal(&self, state: &str) -> bool {
        self.terminal.iter().any(|t| t == state)
    }

    pub fn transitions_from<'a>(&'a self, state: &'a str) -> impl Iterator<Item = &'a Transition> + 'a {
        self.transitions.iter().filter(move |t| t.from == state)
    }

    /// Every trigger that appears anywhere in the spec.
    pub fn triggers(&self) -> BTreeSet<Trigger> {
        self.transitions.iter().map(|t| t.trigger).collect()
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        let declared: BTreeSet<&str> = self.states.iter().map(String::as_str).collect();
        for s in self.terminal.iter().chain(std::iter::once(&self.initial)) {
            if !declared.contains(s.as_str()) {
                return Err(SpecError::UnknownState(s.clone()));
            }
        }
        if self.is_terminal(&self.initial) {
            return Err(SpecError::BadInitial);
        }
        for t in &self.transitions {
            for s in [&t.from, &t.to] {
                if !declared.contains(s.as_str()) {
                    return Err(SpecError::UnknownState(s.clone()));
                }
            }
            if self.is_terminal(&t.from) {
                return Err(SpecError::TerminalHasExit(t.from.clone()));
            }
            if self.is_terminal(&t.to) != t.settles.is_some() {
                return Err(SpecError::Settlement(t.from.clone(), t.to.clone()));
            }
            let needs = match (t.emits, t.trigger) {
                (MsgType::Offer | MsgType::Counteroffer, _) => Some(Stage::Offer),
                (
                    MsgType::Accepted,
                    Trigger::Message {
                        primitive: Primitive::Accept,
                        ..
                    },
                ) => Some(Stage::Agreement),
                _ => None,
            };
            if let Some(stage) = needs {
                if t.payload != PayloadRule::Stage(stage) {
                    return Err(SpecError::PayloadMismatch(t.from.clone(), t.to.clone(), t.emits));
                }
            }
        }
        Ok(())
    }
}
