//! The consumer pipeline: collect, select, negotiate, use. Also the composite
//! Search & Book flow built from the same pieces.

use indexmap::IndexMap;

use super::engine::{CallbackHost, ExecContext, ExecutionEngine, Found, OpLevel, OperationDef, Phase, PortCall, Step};
use super::repository::Repository;
use super::store::DomainAgreement;
use super::MarketError;
use crate::aggregation::{aggregate_templates, filter_templates, map_to_service_term};
use crate::contract::{
    accept_offer, check_bindings, evaluate_guarantees, fill_template, AgreementDocument, Bindings, DomainSchema, Level,
    Stage, TermValue,
};
use crate::protocol::{MultilateralEnd, MultilateralOutcome, SharedProvider, StrategyPort};
use crate::strategy::{ScoreFunction, ScoringModel};

pub const SEARCH: &str = "Search";
pub const BOOK: &str = "Book";
pub const SEARCH_AND_BOOK: &str = "SearchAndBook";
pub const INSTANCE_SEARCH: &str = "search";
pub const INSTANCE_BOOK: &str = "book";

pub const CB_NEGOTIATE_SHOWS: &str = "negotiate_shows";
pub const CB_SELECT_SHOW: &str = "select_show";
pub const CB_PARSE_INPUT: &str = "parse_input";

/// Binding key that identifies a bookable item returned by search.
pub const ITEM_KEY: &str = "show_id";

fn fetch(op_id: &str) -> Step {
    Step::Fetch { op_id: op_id.into() }
}

fn callback(name: &str) -> Step {
    Step::Callback { name: name.into() }
}

/// Search, Book and Search & Book for a domain.
pub fn standard_class_operations(schema: &DomainSchema) -> Vec<OperationDef> {
    let class_op = |id: &str, body: Vec<Step>| OperationDef {
        id: id.into(),
        level: OpLevel::Class,
        domain_id: schema.domain_id.clone(),
        provider_id: String::new(),
        input_contract: schema.inputs.clone(),
        output_contract: schema.outputs.clone(),
        body,
    };
    vec![
        class_op(SEARCH, vec![fetch(INSTANCE_SEARCH)]),
        class_op(BOOK, vec![callback(CB_PARSE_INPUT), fetch(INSTANCE_BOOK)]),
        class_op(
            SEARCH_AND_BOOK,
            vec![
                fetch(SEARCH),
                callback(CB_NEGOTIATE_SHOWS),
                callback(CB_SELECT_SHOW),
                fetch(BOOK),
            ],
        ),
    ]
}

/// Instance operations wrapping a provider's search and execute calls.
pub fn standard_instance_operations(schema: &DomainSchema, provider_id: &str) -> Vec<OperationDef> {
    let inst = |id: &str, call: PortCall| OperationDef {
        id: id.into(),
        level: OpLevel::Instance,
        domain_id: schema.domain_id.clone(),
        provider_id: provider_id.into(),
        input_contract: schema.inputs.clone(),
        output_contract: schema.outputs.clone(),
        body: vec![Step::Invoke { call }],
    };
    vec![
        inst(INSTANCE_SEARCH, PortCall::Search),
        inst(INSTANCE_BOOK, PortCall::Execute),
    ]
}

#[derive(Debug, Clone)]
pub struct TemplateInfo {
    pub provider_id: String,
    pub template: AgreementDocument,
}

/// Picks the service templates to negotiate with, as an ordered subset of
/// provider ids.
pub trait SelectionCallback {
    fn select(&mut self, aggregate: &AgreementDocument, templates: &[TemplateInfo]) -> Vec<String>;
}

impl<F> SelectionCallback for F
where
    F: FnMut(&AgreementDocument, &[TemplateInfo]) -> Vec<String>,
{
    fn select(&mut self, aggregate: &AgreementDocument, templates: &[TemplateInfo]) -> Vec<String> {
        self(aggregate, templates)
    }
}

/// Default selection: ranks templates by the best score their permissible
/// ranges allow and keeps those reaching `min_score`.
#[derive(Debug, Clone)]
pub struct ScoreSelector {
    pub model: ScoringModel,
    pub min_score: f64,
}

impl ScoreSelector {
    pub fn new(model: ScoringModel) -> Self {
        ScoreSelector { model, min_score: 0.0 }
    }

    /// Upper bound on the score any offer against `template` can reach.
    pub fn optimistic_score(&self, template: &AgreementDocument) -> f64 {
        let Ok(weights) = self.model.normalized_weights() else {
            return 0.0;
        };
        self.model
            .terms
            .iter()
            .zip(weights)
            .map(|(t, w)| {
                let best = match (&t.function, template.permissible_range(&t.term_id)) {
                    (ScoreFunction::Linear { increasing, .. }, Some((lo, hi))) if lo <= hi => {
                        let x = if *increasing { hi } else { lo };
                        t.function.eval(&TermValue::Decimal(x)).unwrap_or(0.0)
                    }
                    (ScoreFunction::Table { values }, _) => values.values().copied().fold(0.0, f64::max),
                    // Terms the template does not restrict may take any value.
                    _ => 1.0,
                };
                w * best
            })
            .sum()
    }
}

impl SelectionCallback for ScoreSelector {
    fn select(&mut self, _aggregate: &AgreementDocument, templates: &[TemplateInfo]) -> Vec<String> {
        let mut scored: Vec<(f64, &str)> = templates
            .iter()
            .map(|t| (self.optimistic_score(&t.template), t.provider_id.as_str()))
            .filter(|(s, _)| *s >= self.min_score)
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0));
        scored.into_iter().map(|(_, p)| p.to_string()).collect()
    }
}

#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub domain_agreement: DomainAgreement,
    pub results: Bindings,
    pub negotiation: MultilateralOutcome,
}

#[derive(Debug, Clone)]
pub struct SearchBookResult {
    pub domain_agreement: DomainAgreement,
    pub results: Bindings,
    /// `None` when booking reused an existing agreement.
    pub negotiation: Option<MultilateralOutcome>,
    pub shows: Vec<Found>,
}

/// What Book accepts as input.
#[derive(Debug, Clone)]
pub enum BookInput {
    /// An agreement from an earlier negotiation; no negotiation takes place.
    Agreement(AgreementDocument),
    /// A show reference; Book negotiates it first.
    Show { provider_id: String, bindings: Bindings },
}

/// Service offer for `template` built from the domain offer's bindings
/// plus `extra`.
pub fn service_offer(
    template: &AgreementDocument,
    domain_offer: &AgreementDocument,
    extra: &Bindings,
) -> Result<AgreementDocument, MarketError> {
    let mut b = Bindings::new();
    for (key, value) in &domain_offer.bindings {
        if let Some(term) = map_to_service_term(template, key) {
            b.insert(term.id.clone(), value.clone());
        }
    }
    b.extend(extra.iter().map(|(k, v)| (k.clone(), v.clone())));
    let mut offer = fill_template(template, &b)?;
    offer.context.consumer_id = domain_offer.context.consumer_id.clone();
    Ok(offer)
}

/// Wraps the winning service agreement into the consumer's domain agreement.
pub fn build_domain_agreement(
    domain_offer: &AgreementDocument,
    service_agreement: &AgreementDocument,
    results: &Bindings,
) -> Result<DomainAgreement, MarketError> {
    let id = format!("dom-{}", service_agreement.context.agreement_id);
    let document = accept_offer(domain_offer, &id, &service_agreement.context.provider_id)?;
    let guarantee_outcomes = evaluate_guarantees(service_agreement, results)?;
    Ok(DomainAgreement {
        document,
        service_agreement: service_agreement.clone(),
        guarantee_outcomes,
    })
}

fn collect(
    repo: &Repository,
    domain_id: &str,
    domain_offer: &AgreementDocument,
) -> Result<Vec<AgreementDocument>, MarketError> {
    if domain_offer.stage != Stage::Offer || domain_offer.level != Level::Domain {
        return Err(MarketError::InvalidDomainOffer("expected a domain-level offer".into()));
    }
    let mut templates = Vec::new();
    for pid in repo.provider_ids(domain_id)? {
        let port = repo.port(domain_id, &pid)?;
        let t = port.lock().expect("provider lock poisoned").get_template();
        if let Ok(t) = t {
            templates.push(t);
        }
    }
    Ok(filter_templates(&templates, domain_offer)?)
}

struct MarketHost<'a> {
    strategy: &'a mut dyn StrategyPort,
    domain_offer: &'a AgreementDocument,
    templates: IndexMap<String, AgreementDocument>,
    negotiation: Option<MultilateralOutcome>,
}

impl MarketHost<'_> {
    fn negotiate_shows(
        &mut self,
        engine: &mut ExecutionEngine,
        repo: &Repository,
        ctx: &mut ExecContext,
    ) -> Result<(), MarketError> {
        if ctx.found.is_empty() {
            return Err(MarketError::NoShowsFound);
        }
        engine.phase(Phase::Select);
        let mut offers = IndexMap::new();
        let mut ports: IndexMap<String, SharedProvider> = IndexMap::new();
        for f in &ctx.found {
            let (Some(template), Some(item)) = (self.templates.get(&f.provider_id), f.item.get(ITEM_KEY)) else {
                continue;
            };
            let slot = format!("{}#{}", f.provider_id, item);
            let extra = Bindings::from([(ITEM_KEY.to_string(), item.clone())]);
            if let Ok(offer) = service_offer(template, self.domain_offer, &extra) {
                offers.insert(slot.clone(), offer);
                ports.insert(slot, repo.port(&ctx.domain_id, &f.provider_id)?);
            }
        }
        if offers.is_empty() {
            return Err(MarketError::NoShowsFound);
        }
        engine.phase(Phase::Negotiate);
        let limits = engine.limits;
        let outcome =
            engine
                .negotiator
                .run_iterated_cnip(&offers, &ports, &mut *self.strategy, &limits, engine.mode)?;
        let winner = outcome.agreements.first().cloned();
        let end = outcome.end;
        self.negotiation = Some(outcome);
        match winner {
            Some(a) => {
                ctx.agreement = Some(a);
                Ok(())
            }
            None => Err(MarketError::NegotiationFailed(format!("{end:?}"))),
        }
    }

    fn parse_input(
        &mut self,
        engine: &mut ExecutionEngine,
        repo: &Repository,
        ctx: &mut ExecContext,
    ) -> Result<(), MarketError> {
        if let Some(agr) = &ctx.agreement {
            let known = repo.port(&ctx.domain_id, &agr.context.provider_id).is_ok();
            if agr.stage != Stage::Agreement || !known {
                return Err(MarketError::BookingRejected(
                    "input is not a usable service agreement".into(),
                ));
            }
            return Ok(());
        }
        let Some(pid) = ctx.provider.clone() else {
            return Err(MarketError::BookingRejected(
                "neither an agreement nor a show reference".into(),
            ));
        };
        if !ctx.bindings.contains_key(ITEM_KEY) {
            return Err(MarketError::BookingRejected("show reference lacks a show id".into()));
        }
        let port = repo.port(&ctx.domain_id, &pid)?;
        let template = port
            .lock()
            .expect("provider lock poisoned")
            .get_template()
            .map_err(|e| MarketError::BookingRejected(e.to_string()))?;
        let bindings: Bindings = ctx
            .bindings
            .iter()
            .filter(|(k, _)| template.term(k).is_some())
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        let mut offer = fill_template(&template, &bindings)?;
        offer.context.consumer_id = self.domain_offer.context.consumer_id.clone();
        let limits = engine.limits;
        let s = engine
            .negotiator
            .run_bilateral(&offer, &port, &*self.strategy, &limits)?;
        match s.outcome.agreement() {
            Some(a) => {
                ctx.agreement = Some(a.clone());
                Ok(())
            }
            None => Err(MarketError::NegotiationFailed(s.outcome.label().into())),
        }
    }
}

impl CallbackHost for MarketHost<'_> {
    fn call(
        &mut self,
        name: &str,
        engine: &mut ExecutionEngine,
        repo: &Repository,
        ctx: &mut ExecContext,
    ) -> Result<(), MarketError> {
        match name {
            CB_NEGOTIATE_SHOWS => self.negotiate_shows(engine, repo, ctx),
            CB_SELECT_SHOW => {
                if ctx.agreement.is_none() {
                    return Err(MarketError::NegotiationFailed("no show selected".into()));
                }
                ctx.provider = None;
                engine.phase(Phase::Usage);
                Ok(())
            }
            CB_PARSE_INPUT => self.parse_input(engine, repo, ctx),
            other => Err(MarketError::UnknownCallback(other.into())),
        }
    }
}

/// Runs a class operation end to end: COL, SEL, NEG, USAGE, then stores
/// the domain agreement.
pub fn run_pipeline(
    repo: &Repository,
    domain_id: &str,
    class_op_id: &str,
    domain_offer: &AgreementDocument,
    selector: &mut dyn SelectionCallback,
    strategy: &mut dyn StrategyPort,
    engine: &mut ExecutionEngine,
) -> Result<PipelineResult, MarketError> {
    let op = repo.fetch_operation(domain_id, class_op_id)?;
    engine.phase(Phase::Collect);
    let survivors = collect(repo, domain_id, domain_offer)?;
    if survivors.is_empty() {
        return Err(MarketError::NoTemplatesSurviveFilter);
    }
    let aggregate = aggregate_templates(&survivors)?;
    if let Some(v) = check_bindings(&aggregate, &domain_offer.bindings).first() {
        return Err(MarketError::InvalidDomainOffer(v.to_string()));
    }

    engine.phase(Phase::Select);
    let infos: Vec<TemplateInfo> = survivors
        .iter()
        .map(|t| TemplateInfo {
            provider_id: t.context.provider_id.clone(),
            template: t.clone(),
        })
        .collect();
    let chosen = selector.select(&aggregate, &infos);
    // Negotiation runs in registration order whatever order the selector used.
    let selected: Vec<&AgreementDocument> = survivors
        .iter()
        .filter(|t| chosen.contains(&t.context.provider_id))
        .collect();
    if selected.is_empty() {
        return Err(MarketError::SelectionEmpty);
    }

    engine.phase(Phase::Negotiate);
    let mut offers = IndexMap::new();
    let mut ports = IndexMap::new();
    for t in selected {
        let pid = &t.context.provider_id;
        if let Ok(offer) = service_offer(t, domain_offer, &Bindings::new()) {
            offers.insert(pid.clone(), offer);
            ports.insert(pid.clone(), repo.port(domain_id, pid)?);
        }
    }
    if offers.is_empty() {
        return Err(MarketError::NegotiationFailed("no admissible service offer".into()));
    }
    let limits = engine.limits;
    let outcome = engine
        .negotiator
        .run_iterated_cnip(&offers, &ports, strategy, &limits, engine.mode)?;
    let Some(winner) = outcome.agreements.first().cloned() else {
        return Err(MarketError::NegotiationFailed(match outcome.end {
            MultilateralEnd::Confirmed => "confirmed without agreement".into(),
            other => format!("{other:?}"),
        }));
    };

    engine.phase(Phase::Usage);
    let mut ctx = ExecContext::new(domain_id, winner.bindings.clone());
    ctx.agreement = Some(winner.clone());
    let mut host = MarketHost {
        strategy,
        domain_offer,
        templates: IndexMap::new(),
        negotiation: None,
    };
    engine.run_operation(repo, &op, &mut ctx, &mut host)?;
    let domain_agreement = build_domain_agreement(domain_offer, &winner, &ctx.results)?;
    let tick = engine.negotiator.clock;
    engine.store.put(domain_agreement.clone(), tick, ctx.results.clone())?;
    Ok(PipelineResult {
        domain_agreement,
        results: ctx.results,
        negotiation: outcome,
    })
}

fn booking_error(e: MarketError) -> MarketError {
    match e {
        MarketError::ExecutionRejected { provider_id, reason } => {
            MarketError::BookingRejected(format!("{provider_id}: {reason}"))
        }
        other => other,
    }
}

/// Searches every provider that survives the domain offer, negotiates each
/// show found, books the one the strategy confirms, and cancels the rest.
pub fn search_and_book(
    repo: &Repository,
    domain_id: &str,
    domain_offer: &AgreementDocument,
    strategy: &mut dyn StrategyPort,
    engine: &mut ExecutionEngine,
) -> Result<SearchBookResult, MarketError> {
    let op = repo.fetch_operation(domain_id, SEARCH_AND_BOOK)?;
    engine.phase(Phase::Collect);
    let survivors = collect(repo, domain_id, domain_offer)?;
    if survivors.is_empty() {
        return Err(MarketError::NoShowsFound);
    }
    let templates: IndexMap<String, AgreementDocument> = survivors
        .into_iter()
        .map(|t| (t.context.provider_id.clone(), t))
        .collect();
    let mut ctx = ExecContext::new(domain_id, domain_offer.bindings.clone());
    ctx.candidates = Some(templates.keys().cloned().collect());
    let mut host = MarketHost {
        strategy,
        domain_offer,
        templates,
        negotiation: None,
    };
    engine
        .run_operation(repo, &op, &mut ctx, &mut host)
        .map_err(booking_error)?;
    let agreement = ctx.agreement.clone().ok_or(MarketError::NoShowsFound)?;
    let domain_agreement = build_domain_agreement(domain_offer, &agreement, &ctx.results)?;
    let tick = engine.negotiator.clock;
    engine.store.put(domain_agreement.clone(), tick, ctx.results.clone())?;
    Ok(SearchBookResult {
        domain_agreement,
        results: ctx.results,
        negotiation: host.negotiation,
        shows: ctx.found,
    })
}

/// Runs Book alone. With an agreement as input no negotiation happens.
pub fn book(
    repo: &Repository,
    domain_id: &str,
    domain_offer: &AgreementDocument,
    input: BookInput,
    strategy: &mut dyn StrategyPort,
    engine: &mut ExecutionEngine,
) -> Result<(AgreementDocument, Bindings), MarketError> {
    let op = repo.fetch_operation(domain_id, BOOK)?;
    engine.phase(Phase::Usage);
    let mut ctx = match input {
        BookInput::Agreement(a) => {
            let mut ctx = ExecContext::new(domain_id, a.bindings.clone());
            ctx.agreement = Some(a);
            ctx
        }
        BookInput::Show { provider_id, bindings } => {
            let mut ctx = ExecContext::new(domain_id, bindings);
            ctx.provider = Some(provider_id);
            ctx
        }
    };
    let mut host = MarketHost {
        strategy,
        domain_offer,
        templates: IndexMap::new(),
        negotiation: None,
    };
    engine
        .run_operation(repo, &op, &mut ctx, &mut host)
        .map_err(booking_error)?;
    let agreement = ctx
        .agreement
        .ok_or_else(|| MarketError::BookingRejected("no agreement".into()))?;
    Ok((agreement, ctx.results))
}

/// Integer view of a binding, for callers that read results.
pub fn binding_int(b: &Bindings, key: &str) -> Option<i64> {
    match b.get(key)? {
        TermValue::Integer(i) => Some(*i),
        other => other.as_number().filter(|d| d.is_integral()).map(|d| d.round_to_int()),
    }
}
