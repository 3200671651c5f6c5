//! Iterated contract net: competing bilateral sessions coordinated by the
//! consumer, one batch per iteration.

use std::thread;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::bilateral::{Limits, NegotiationError, Negotiator};
use super::message::{MsgType, NegotiationMessage, Party, Primitive};
use super::ports::{AgreementCheck, SharedProvider, StrategyPort};
use super::session::SessionState;
use super::spec::ProtocolKind;
use crate::contract::{fill_template, AgreementDocument, Tick};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DispatchMode {
    /// Sessions run one after another in registration order.
    #[default]
    Deterministic,
    /// Sessions of one iteration run on separate threads and are joined
    /// before the strategy sees their results.
    Concurrent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultilateralEnd {
    Confirmed,
    Quit,
    /// No provider holds a provisional agreement.
    Exhausted,
    /// The strategy asked for another iteration past the limit.
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IterationRecord {
    pub iteration: u32,
    /// Bilateral session results in slot order.
    pub sessions: Vec<(String, SessionState)>,
}

impl IterationRecord {
    /// Agreements reached during this iteration, in slot order.
    pub fn agreements(&self) -> impl Iterator<Item = (&str, &AgreementDocument)> {
        self.sessions
            .iter()
            .filter_map(|(slot, s)| s.outcome.agreement().map(|a| (slot.as_str(), a)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultilateralOutcome {
    /// Confirmed agreements.
    pub agreements: Vec<AgreementDocument>,
    /// Slots of the confirmed agreements.
    pub confirmed_slots: Vec<String>,
    pub iterations: u32,
    pub end: MultilateralEnd,
    pub log: Vec<IterationRecord>,
    /// Provisional agreements issued over the whole run.
    pub provisional: usize,
    /// Ids of cancelled provisional agreements.
    pub cancelled: Vec<String>,
    pub coordinator: SessionState,
}

impl Negotiator {
    fn dispatch(
        &mut self,
        offers: &IndexMap<String, AgreementDocument>,
        providers: &IndexMap<String, SharedProvider>,
        strategy: &dyn StrategyPort,
        limits: &Limits,
        mode: DispatchMode,
    ) -> Result<Vec<(String, SessionState)>, NegotiationError> {
        match mode {
            DispatchMode::Deterministic => offers
                .iter()
                .map(|(slot, offer)| {
                    Ok((
                        slot.clone(),
                        self.run_bilateral(offer, &providers[slot], strategy, limits)?,
                    ))
                })
                .collect(),
            DispatchMode::Concurrent => {
                let first = self.reserve_sessions(offers.len() as u64);
                let children: Vec<_> = thread::scope(|scope| {
                    let handles: Vec<_> = offers
                        .iter()
                        .enumerate()
                        .map(|(i, (slot, offer))| {
                            let mut child = self.child(first + i as u64);
                            let provider = providers[slot].clone();
                            scope.spawn(move || {
                                let r = child.run_bilateral(offer, &provider, strategy, limits);
                                (slot.clone(), child, r)
                            })
                        })
                        .collect();
                    handles
                        .into_iter()
                        .map(|h| h.join().expect("negotiation thread panicked"))
                        .collect()
                });
                let mut out = Vec::with_capacity(children.len());
                for (slot, child, r) in children {
                    self.merge(child);
                    out.push((slot, r?));
                }
                Ok(out)
            }
        }
    }

    fn cancel(&mut self, coordinator: &SessionState, provider: &SharedProvider, agreement: &AgreementDocument) {
        provider.lock().expect("provider lock poisoned").cancel(agreement);
        let mut msg = NegotiationMessage::new(
            &coordinator.session_id,
            Party::Consumer,
            Primitive::Withdraw,
            MsgType::Unsigned,
            0,
        )
        .with_payload(agreement.clone());
        msg.round = coordinator.round;
        self.note(msg);
    }

    /// Runs the multilateral protocol. `service_offers` and `providers` are
    /// keyed by slot (usually the provider id) in registration order.
    pub fn run_iterated_cnip(
        &mut self,
        service_offers: &IndexMap<String, AgreementDocument>,
        providers: &IndexMap<String, SharedProvider>,
        strategy: &mut dyn StrategyPort,
        limits: &Limits,
        mode: DispatchMode,
    ) -> Result<MultilateralOutcome, NegotiationError> {
        if service_offers.is_empty() {
            return Err(NegotiationError::Precondition("no service offers".into()));
        }
        if let Some(slot) = service_offers.keys().find(|s| !providers.contains_key(*s)) {
            return Err(NegotiationError::Precondition(format!("no provider for slot `{slot}`")));
        }
        let mut coord = self.open(
            ProtocolKind::IteratedCnip,
            limits.iteration_limit,
            Tick::MAX - self.clock,
        );
        let mut active = service_offers.clone();
        let mut standing: IndexMap<String, AgreementDocument> = IndexMap::new();
        let mut log = Vec::new();
        let mut issued = 0;
        let mut cancelled = Vec::new();

        let end = loop {
            let iteration = coord.round + 1;
            let sessions = self.dispatch(&active, providers, &*strategy, limits, mode)?;
            for (slot, s) in &sessions {
                if let Some(agr) = s.outcome.agreement() {
                    issued += 1;
                    // A newer agreement from the same slot supersedes the old one.
                    if let Some(old) = standing.insert(slot.clone(), agr.clone()) {
                        self.cancel(&coord, &providers[slot], &old);
                        cancelled.push(old.context.agreement_id.clone());
                    }
                }
            }
            log.push(IterationRecord { iteration, sessions });
            // Keep registration order regardless of when a slot last agreed.
            standing.sort_by_cached_key(|slot, _| service_offers.get_index_of(slot));

            if standing.is_empty() {
                self.send(&mut coord, Party::Provider, Primitive::Reject, None)?;
                break MultilateralEnd::Exhausted;
            }
            self.send(&mut coord, Party::Provider, Primitive::Acknowledge, None)?;
            let agreements: Vec<_> = standing.values().cloned().collect();
            let check = strategy.check_agreements(&agreements, coord.round);
            match check {
                AgreementCheck::Confirm(ids) => {
                    let confirmed: Vec<_> = standing
                        .iter()
                        .filter(|(_, a)| ids.contains(&a.context.agreement_id))
                        .map(|(s, a)| (s.clone(), a.clone()))
                        .collect();
                    if let Some((_, first)) = confirmed.first() {
                        self.send(&mut coord, Party::Consumer, Primitive::Accept, Some(first.clone()))?;
                        break MultilateralEnd::Confirmed;
                    }
                    coord.note = Some("strategy confirmed no standing agreement".into());
                    self.send(&mut coord, Party::Consumer, Primitive::Withdraw, None)?;
                    break MultilateralEnd::Quit;
                }
                AgreementCheck::Quit => {
                    self.send(&mut coord, Party::Consumer, Primitive::Withdraw, None)?;
                    break MultilateralEnd::Quit;
                }
                AgreementCheck::Counter if coord.round >= limits.iteration_limit => {
                    self.send(&mut coord, Party::Consumer, Primitive::Withdraw, None)?;
                    break MultilateralEnd::IterationLimit;
                }
                AgreementCheck::Counter => {
                    self.send(&mut coord, Party::Consumer, Primitive::CallForProposal, None)?;
                    let mut templates = IndexMap::new();
                    for slot in active.keys() {
                        let ct = providers[slot]
                            .lock()
                            .expect("provider lock poisoned")
                            .counter_template(iteration);
                        if let Some(ct) = ct {
                            templates.insert(slot.clone(), ct);
                        }
                    }
                    let counters = strategy.filter_and_counter(&templates, coord.round);
                    let mut next = IndexMap::new();
                    for (slot, bindings) in counters {
                        let (Some(ct), Some(prev)) = (templates.get(&slot), active.get(&slot)) else {
                            continue;
                        };
                        let mut merged = prev.bindings.clone();
                        merged.extend(bindings);
                        if let Ok(mut offer) = fill_template(ct, &merged) {
                            offer.context.consumer_id = prev.context.consumer_id.clone();
                            next.insert(slot, offer);
                        }
                    }
                    next.sort_by_cached_key(|slot, _| service_offers.get_index_of(slot));
                    active = next;
                    self.send(&mut coord, Party::Consumer, Primitive::Propose, None)?;
                }
            }
        };

        let provisional = issued;
        let mut agreements = Vec::new();
        let mut confirmed_slots = Vec::new();
        let kept = coord.outcome.agreement().map(|a| a.context.agreement_id.clone());
        for (slot, agr) in &standing {
            if end == MultilateralEnd::Confirmed && kept.as_ref() == Some(&agr.context.agreement_id) {
                agreements.push(agr.clone());
                confirmed_slots.push(slot.clone());
            } else {
                self.cancel(&coord, &providers[slot], agr);
                cancelled.push(agr.context.agreement_id.clone());
            }
        }
        Ok(MultilateralOutcome {
            agreements,
            confirmed_slots,
            iterations: log.len() as u32,
            end,
            log,
            provisional,
            cancelled,
            coordinator: coord,
        })
    }
}
