//! Interfaces the engine uses to talk to providers and to the consumer's
//! decision logic.

use std::sync::{Arc, Mutex};

use indexmap::IndexMap;

use super::spec::ProtocolKind;
use crate::contract::{AgreementDocument, Bindings};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProviderError {
    #[error("provider unavailable: {0}")]
    Unavailable(String),
    #[error("execution refused: {0}")]
    Refused(String),
    #[error("native API failure: {0}")]
    Native(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProviderReply {
    Accept(AgreementDocument),
    Reject {
        reason: String,
    },
    /// Rejects the offer and states the permissible values for the next one.
    CounterTemplate(AgreementDocument),
    /// No reply at all; the session runs into its deadline.
    Silent,
}

pub trait ProviderPort: Send {
    fn provider_id(&self) -> &str;

    fn protocol(&self) -> ProtocolKind;

    fn get_template(&self) -> Result<AgreementDocument, ProviderError>;

    fn handle_offer(&mut self, offer: &AgreementDocument, round: u32) -> ProviderReply;

    /// Fresh template between multilateral iterations. Providers that
    /// concede over time lower their restrictions here.
    fn counter_template(&mut self, _iteration: u32) -> Option<AgreementDocument> {
        self.get_template().ok()
    }

    fn cancel(&mut self, agreement: &AgreementDocument);

    fn execute(&mut self, agreement: &AgreementDocument, input: &Bindings) -> Result<Bindings, ProviderError>;

    /// Instance-level search; each result describes one bookable item.
    fn search(&self, _query: &Bindings) -> Vec<Bindings> {
        Vec::new()
    }
}

pub type SharedProvider = Arc<Mutex<dyn ProviderPort>>;

pub fn share<P: ProviderPort + 'static>(p: P) -> SharedProvider {
    Arc::new(Mutex::new(p))
}

/// One consumer offer and, if the provider answered with one, the counter
/// template it received.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exchange {
    pub round: u32,
    pub offer: AgreementDocument,
    pub counter_template: Option<AgreementDocument>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct OfferHistory {
    pub deadline_round: u32,
    pub entries: Vec<Exchange>,
}

impl OfferHistory {
    pub fn last(&self) -> Option<&Exchange> {
        self.entries.last()
    }

    /// The offer the provider would accept next: the consumer's last offer
    /// clamped into the counter template's permissible values.
    pub fn opponent_position(&self) -> Option<Bindings> {
        let last = self.entries.last()?;
        let ct = last.counter_template.as_ref()?;
        Some(opponent_position(ct, &last.offer.bindings))
    }

    /// Opponent positions of every answered exchange, oldest first.
    pub fn opponent_positions(&self) -> Vec<Bindings> {
        self.entries
            .iter()
            .filter_map(|e| {
                e.counter_template
                    .as_ref()
                    .map(|ct| opponent_position(ct, &e.offer.bindings))
            })
            .collect()
    }
}

pub fn opponent_position(counter_template: &AgreementDocument, bindings: &Bindings) -> Bindings {
    bindings
        .iter()
        .map(|(k, v)| {
            let clamped = match (v.as_number(), counter_template.permissible_range(k)) {
                (Some(n), Some((lo, hi))) if lo <= hi => counter_template
                    .term(k)
                    .map(|t| t.value_domain.value_from_number(n.clamp(lo, hi)))
                    .unwrap_or_else(|| v.clone()),
                _ => v.clone(),
            };
            (k.clone(), clamped)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OfferDecision {
    Accept,
    Counter(Bindings),
    Quit,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AgreementCheck {
    /// Agreement ids to confirm.
    Confirm(Vec<String>),
    Counter,
    Quit,
}

pub trait StrategyPort: Send + Sync {
    /// Reaction to a counter template in a bilateral session.
    fn decide(&self, round: u32, history: &OfferHistory) -> OfferDecision;

    fn check_agreements(&mut self, agreements: &[AgreementDocument], round: u32) -> AgreementCheck;

    /// Picks the slots to keep and the bindings of their next offers.
    /// Slots missing from the result are dropped.
    fn filter_and_counter(
        &mut self,
        templates: &IndexMap<String, AgreementDocument>,
        round: u32,
    ) -> IndexMap<String, Bindings>;
}
