use serde::{Deserialize, Serialize};

use super::message::{NegotiationMessage, Party, Primitive};
use super::ports::{
    opponent_position, Exchange, OfferDecision, OfferHistory, ProviderReply, SharedProvider, StrategyPort,
};
use super::session::{step, step_timeout, ProtocolError, SessionState};
use super::spec::ProtocolKind;
use super::transcript::Transcript;
use crate::contract::{fill_template, AgreementDocument, Level, Stage, Tick};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Limits {
    /// Maximum number of consumer offers in a bilateral session.
    pub deadline_round: u32,
    /// Tick budget of one bilateral session, relative to its start.
    pub deadline_tick: Tick,
    /// Maximum number of multilateral iterations.
    pub iteration_limit: u32,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            deadline_round: 10,
            deadline_tick: 100,
            iteration_limit: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NegotiationError {
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("precondition failed: {0}")]
    Precondition(String),
}

/// Drives sessions against provider ports. Owns the logical clock and the
/// transcript; every message advances the clock by one tick.
#[derive(Debug, Clone, Default)]
pub struct Negotiator {
    pub clock: Tick,
    pub transcript: Transcript,
    next_session: u64,
}

impl Negotiator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn starting_at(clock: Tick) -> Self {
        Negotiator {
            clock,
            ..Self::default()
        }
    }

    /// Negotiator for work that runs apart from this one. Its sessions are
    /// numbered from `first_session`.
    pub(crate) fn child(&self, first_session: u64) -> Self {
        Negotiator {
            clock: self.clock,
            transcript: Transcript::new(),
            next_session: first_session,
        }
    }

    pub(crate) fn reserve_sessions(&mut self, n: u64) -> u64 {
        let first = self.next_session;
        self.next_session += n;
        first
    }

    pub(crate) fn merge(&mut self, child: Negotiator) {
        self.clock = self.clock.max(child.clock);
        self.transcript.extend(child.transcript);
    }

    pub(crate) fn open(&mut self, kind: ProtocolKind, deadline_round: u32, tick_budget: Tick) -> SessionState {
        self.next_session += 1;
        let id = format!("{}-{}", kind.short_name(), self.next_session);
        SessionState::new(id, kind, deadline_round, self.clock.saturating_add(tick_budget))
    }

    pub(crate) fn tick(&mut self) -> Tick {
        self.clock += 1;
        self.clock
    }

    pub(crate) fn send(
        &mut self,
        state: &mut SessionState,
        sender: Party,
        primitive: Primitive,
        payload: Option<AgreementDocument>,
    ) -> Result<(), ProtocolError> {
        let tick = self.tick();
        // The wire type is assigned by the protocol spec.
        let mut msg = NegotiationMessage::new(
            &state.session_id,
            sender,
            primitive,
            super::message::MsgType::Offer,
            tick,
        );
        msg.round = state.round;
        msg.payload = payload;
        let (next, out) = step(state, &msg)?;
        for m in &out {
            self.transcript.record(m);
        }
        *state = next;
        Ok(())
    }

    /// Appends a message that belongs to no state machine transition.
    pub(crate) fn note(&mut self, mut msg: NegotiationMessage) {
        msg.tick = self.tick();
        self.transcript.record(&msg);
    }

    fn time_out(&mut self, state: &mut SessionState) -> Result<(), ProtocolError> {
        self.clock = self.clock.max(state.deadline_tick + 1);
        let (next, out) = step_timeout(state, self.clock)?;
        for m in &out {
            self.transcript.record(m);
        }
        *state = next;
        Ok(())
    }

    fn reject(&mut self, state: &mut SessionState, note: String) -> Result<(), ProtocolError> {
        self.send(state, Party::Provider, Primitive::Reject, None)?;
        if state.note.is_none() {
            state.note = Some(note);
        }
        Ok(())
    }

    fn provider_accepts(
        &mut self,
        state: &mut SessionState,
        offer: &AgreementDocument,
        agreement: AgreementDocument,
        provider_id: &str,
    ) -> Result<(), ProtocolError> {
        let valid = agreement.stage == Stage::Agreement
            && agreement.bindings == offer.bindings
            && agreement.context.provider_id == provider_id
            && !agreement.context.agreement_id.is_empty();
        if valid {
            self.send(state, Party::Provider, Primitive::Accept, Some(agreement))
        } else {
            self.reject(
                state,
                "provider returned an agreement that does not match the offer".into(),
            )
        }
    }

    /// Take-it-or-leave-it: one offer, one reply.
    pub fn run_cnip(
        &mut self,
        offer: &AgreementDocument,
        provider: &SharedProvider,
        limits: &Limits,
    ) -> Result<SessionState, NegotiationError> {
        check_service_offer(offer)?;
        let mut s = self.open(ProtocolKind::Cnip, 1, limits.deadline_tick);
        self.send(&mut s, Party::Consumer, Primitive::Propose, Some(offer.clone()))?;
        if s.is_terminal() {
            return Ok(s);
        }
        let (reply, pid) = {
            let mut p = provider.lock().expect("provider lock poisoned");
            (p.handle_offer(offer, s.round), p.provider_id().to_string())
        };
        match reply {
            ProviderReply::Accept(agr) => self.provider_accepts(&mut s, offer, agr, &pid)?,
            ProviderReply::Reject { reason } => self.reject(&mut s, reason)?,
            ProviderReply::CounterTemplate(_) => {
                self.reject(&mut s, "counter template in take-it-or-leave-it".into())?
            }
            ProviderReply::Silent => self.time_out(&mut s)?,
        }
        Ok(s)
    }

    /// Bilateral bargaining until agreement, a quit, or the deadline.
    pub fn run_alternating_offers(
        &mut self,
        initial_offer: &AgreementDocument,
        provider: &SharedProvider,
        strategy: &dyn StrategyPort,
        limits: &Limits,
    ) -> Result<SessionState, NegotiationError> {
        check_service_offer(initial_offer)?;
        let mut s = self.open(
            ProtocolKind::AlternatingOffers,
            limits.deadline_round,
            limits.deadline_tick,
        );
        let mut history = OfferHistory {
            deadline_round: limits.deadline_round,
            entries: Vec::new(),
        };
        let mut offer = initial_offer.clone();
        self.send(&mut s, Party::Consumer, Primitive::Propose, Some(offer.clone()))?;
        while !s.is_terminal() {
            let (reply, pid) = {
                let mut p = provider.lock().expect("provider lock poisoned");
                (p.handle_offer(&offer, s.round), p.provider_id().to_string())
            };
            let ct = match reply {
                ProviderReply::Accept(agr) => {
                    self.provider_accepts(&mut s, &offer, agr, &pid)?;
                    break;
                }
                ProviderReply::Reject { reason } => {
                    self.reject(&mut s, reason)?;
                    break;
                }
                ProviderReply::Silent => {
                    self.time_out(&mut s)?;
                    break;
                }
                ProviderReply::CounterTemplate(ct) if ct.stage != Stage::Template => {
                    self.reject(&mut s, "counter template is not a template".into())?;
                    break;
                }
                ProviderReply::CounterTemplate(ct) => ct,
            };
            self.send(&mut s, Party::Provider, Primitive::Modify, Some(ct.clone()))?;
            history.entries.push(Exchange {
                round: s.round,
                offer: offer.clone(),
                counter_template: Some(ct.clone()),
            });
            if s.is_terminal() {
                break;
            }
            let bindings = match strategy.decide(s.round, &history) {
                OfferDecision::Accept => opponent_position(&ct, &offer.bindings),
                OfferDecision::Counter(b) => {
                    let mut merged = offer.bindings.clone();
                    merged.extend(b);
                    merged
                }
                OfferDecision::Quit => {
                    self.send(&mut s, Party::Consumer, Primitive::Withdraw, None)?;
                    break;
                }
            };
            match fill_template(&ct, &bindings) {
                Ok(mut next) => {
                    next.context.consumer_id = offer.context.consumer_id.clone();
                    offer = next;
                    self.send(&mut s, Party::Consumer, Primitive::Propose, Some(offer.clone()))?;
                }
                Err(e) => {
                    self.send(&mut s, Party::Consumer, Primitive::Terminate, None)?;
                    s.note = Some(format!("counteroffer violates counter template: {e}"));
                }
            }
        }
        Ok(s)
    }

    /// Runs whichever bilateral protocol the provider speaks.
    pub fn run_bilateral(
        &mut self,
        offer: &AgreementDocument,
        provider: &SharedProvider,
        strategy: &dyn StrategyPort,
        limits: &Limits,
    ) -> Result<SessionState, NegotiationError> {
        let kind = provider.lock().expect("provider lock poisoned").protocol();
        match kind {
            ProtocolKind::Cnip => self.run_cnip(offer, provider, limits),
            ProtocolKind::AlternatingOffers => self.run_alternating_offers(offer, provider, strategy, limits),
            ProtocolKind::IteratedCnip => Err(NegotiationError::Precondition(
                "iterated contract net is not a bilateral protocol".into(),
            )),
        }
    }
}

fn check_service_offer(offer: &AgreementDocument) -> Result<(), NegotiationError> {
    if offer.stage != Stage::Offer || offer.level != Level::Service {
        return Err(NegotiationError::Precondition("expected a service-level offer".into()));
    }
    Ok(())
}
