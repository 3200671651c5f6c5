//! Random documents and small provider doubles shared by the test targets.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::Rng;
use wsag_market::contract::{
    accept_offer, generate_service_template, AgreementDocument, Bindings, DomainSchema, ProviderProperties,
    TermDefinition, TermKind, TermValue, ValueDomain,
};
use wsag_market::decimal::Decimal;
use wsag_market::protocol::{ProtocolKind, ProviderError, ProviderPort, ProviderReply};

pub fn dec(s: &str) -> Decimal {
    s.parse().unwrap()
}

const WORDS: &[&str] = &["red", "green", "blue", "gold", "plain", "deluxe", "imax"];

fn random_domain<R: Rng>(rng: &mut R) -> ValueDomain {
    match rng.random_range(0..5) {
        0 => {
            let min = rng.random_range(-50..50);
            ValueDomain::IntegerRange {
                min,
                max: min + rng.random_range(0..100),
            }
        }
        1 => {
            let min = rng.random_range(-100_000..100_000);
            ValueDomain::decimal_range(
                Decimal::from_scaled(min),
                Decimal::from_scaled(min + rng.random_range(0..500_000)),
            )
        }
        2 => {
            let n = rng.random_range(1..=WORDS.len());
            ValueDomain::enumeration(WORDS.choose_multiple(rng, n).copied())
        }
        3 => ValueDomain::FreeString,
        _ => ValueDomain::Boolean,
    }
}

/// A random non-empty restriction of `domain`.
fn random_subdomain<R: Rng>(rng: &mut R, domain: &ValueDomain) -> ValueDomain {
    match domain {
        ValueDomain::IntegerRange { min, max } => {
            let a = rng.random_range(*min..=*max);
            let b = rng.random_range(a..=*max);
            ValueDomain::IntegerRange { min: a, max: b }
        }
        ValueDomain::DecimalRange { min, max } => {
            let a = rng.random_range(min.scaled()..=max.scaled());
            let b = rng.random_range(a..=max.scaled());
            ValueDomain::decimal_range(Decimal::from_scaled(a), Decimal::from_scaled(b))
        }
        ValueDomain::Enumeration { members } => {
            let n = rng.random_range(1..=members.len());
            ValueDomain::enumeration(members.choose_multiple(rng, n).cloned())
        }
        other => other.clone(),
    }
}

/// A random value inside a non-empty domain.
pub fn random_value<R: Rng>(rng: &mut R, domain: &ValueDomain) -> TermValue {
    match domain {
        ValueDomain::IntegerRange { min, max } => TermValue::Integer(rng.random_range(*min..=*max)),
        ValueDomain::DecimalRange { min, max } => {
            TermValue::Decimal(Decimal::from_scaled(rng.random_range(min.scaled()..=max.scaled())))
        }
        ValueDomain::Enumeration { members } => TermValue::Enum(members.choose(rng).unwrap().clone()),
        ValueDomain::FreeString => TermValue::string(format!("s{}", rng.random_range(0..1000))),
        ValueDomain::Boolean => TermValue::Boolean(rng.random()),
    }
}

/// Pool of term definitions. Templates built from one pool never declare
/// the same id with conflicting domains.
pub struct TermPool {
    pub properties: Vec<TermDefinition>,
    pub inputs: Vec<TermDefinition>,
    pub outputs: Vec<TermDefinition>,
}

pub fn random_pool<R: Rng>(rng: &mut R) -> TermPool {
    let mk = |rng: &mut R, prefix: &str, kind: TermKind, n: usize| {
        (0..n)
            .map(|i| {
                let mut t = TermDefinition::new(format!("{prefix}{i}"), kind, "", random_domain(rng));
                t.required = rng.random_bool(0.5);
                t
            })
            .collect::<Vec<_>>()
    };
    let (np, ni, no) = (rng.random_range(1..5), rng.random_range(1..7), rng.random_range(0..3));
    TermPool {
        properties: mk(rng, "prop", TermKind::ServiceProperty, np),
        inputs: mk(rng, "in", TermKind::Input, ni),
        outputs: mk(rng, "out", TermKind::Output, no),
    }
}

/// A service template for `provider_id` over a random subset of `pool`.
/// With `full` every pool term is used.
pub fn random_template_from<R: Rng>(rng: &mut R, pool: &TermPool, provider_id: &str, full: bool) -> AgreementDocument {
    let pick = |rng: &mut R, terms: &[TermDefinition]| -> Vec<TermDefinition> {
        terms.iter().filter(|_| full || rng.random_bool(0.7)).cloned().collect()
    };
    let mut properties = pick(rng, &pool.properties);
    for p in &mut properties {
        p.required = true;
    }
    let schema = DomainSchema {
        domain_id: "d".into(),
        properties,
        inputs: pick(rng, &pool.inputs),
        outputs: pick(rng, &pool.outputs),
        template_lifetime: 100,
    };
    let values = schema
        .properties
        .iter()
        .map(|p| (p.id.clone(), random_value(rng, &p.value_domain)))
        .collect();
    let mut term_ranges = BTreeMap::new();
    for t in schema.inputs.iter().chain(&schema.outputs) {
        if rng.random_bool(0.6) {
            term_ranges.insert(t.id.clone(), random_subdomain(rng, &t.value_domain));
        }
    }
    let props = ProviderProperties {
        provider_id: provider_id.into(),
        domain_id: "d".into(),
        values,
        term_ranges,
    };
    generate_service_template(&props, &schema).expect("generated template is valid")
}

pub fn random_template<R: Rng>(rng: &mut R, provider_id: &str) -> AgreementDocument {
    let pool = random_pool(rng);
    random_template_from(rng, &pool, provider_id, false)
}

/// Bindings that satisfy every constraint of a service template: each
/// mandatory input is bound, optional ones sometimes.
pub fn admissible_bindings<R: Rng>(rng: &mut R, template: &AgreementDocument) -> Bindings {
    let mut b = Bindings::new();
    for term in &template.terms {
        if term.kind != TermKind::Input {
            continue;
        }
        let mandatory = term.required || template.constraints_on(&term.id).any(|c| c.mandatory);
        if !mandatory && rng.random_bool(0.3) {
            continue;
        }
        let allowed = template
            .constraints_on(&term.id)
            .next()
            .map(|c| c.allowed.clone())
            .unwrap_or_else(|| term.value_domain.clone());
        b.insert(term.id.clone(), random_value(rng, &allowed));
    }
    b
}

/// Provider that signs any offer whose `price` reaches `reserve`, and
/// otherwise rejects (CNIP) or sends a fixed counter template (AO).
pub struct ThresholdProvider {
    pub id: String,
    pub protocol: ProtocolKind,
    pub template: AgreementDocument,
    pub counter: Option<AgreementDocument>,
    pub reserve: Decimal,
    pub issued: u32,
    pub seen: Vec<AgreementDocument>,
    pub cancelled: Vec<String>,
}

impl ThresholdProvider {
    pub fn new(id: &str, protocol: ProtocolKind, template: AgreementDocument, reserve: Decimal) -> Self {
        ThresholdProvider {
            id: id.into(),
            protocol,
            counter: Some(template.clone()),
            template,
            reserve,
            issued: 0,
            seen: Vec::new(),
            cancelled: Vec::new(),
        }
    }
}

impl ProviderPort for ThresholdProvider {
    fn provider_id(&self) -> &str {
        &self.id
    }

    fn protocol(&self) -> ProtocolKind {
        self.protocol
    }

    fn get_template(&self) -> Result<AgreementDocument, ProviderError> {
        Ok(self.template.clone())
    }

    fn handle_offer(&mut self, offer: &AgreementDocument, _round: u32) -> ProviderReply {
        self.seen.push(offer.clone());
        let price = offer.bindings.get("price").and_then(TermValue::as_number);
        if price.is_some_and(|p| p >= self.reserve) {
            self.issued += 1;
            return ProviderReply::Accept(
                accept_offer(offer, &format!("{}-{}", self.id, self.issued), &self.id).unwrap(),
            );
        }
        match (&self.protocol, &self.counter) {
            (ProtocolKind::AlternatingOffers, Some(ct)) => ProviderReply::CounterTemplate(ct.clone()),
            _ => ProviderReply::Reject {
                reason: "below reserve".into(),
            },
        }
    }

    fn cancel(&mut self, agreement: &AgreementDocument) {
        self.cancelled.push(agreement.context.agreement_id.clone());
    }

    fn execute(&mut self, agreement: &AgreementDocument, _input: &Bindings) -> Result<Bindings, ProviderError> {
        if agreement.context.provider_id != self.id {
            return Err(ProviderError::Refused("not ours".into()));
        }
        Ok(Bindings::new())
    }
}

/// Service template with a single decimal `price` input allowed in
/// `[lo, hi]`.
pub fn price_template(provider_id: &str, lo: Decimal, hi: Decimal) -> AgreementDocument {
    let schema = DomainSchema {
        domain_id: "d".into(),
        properties: vec![],
        inputs: vec![TermDefinition::new(
            "price",
            TermKind::Input,
            "EUR",
            ValueDomain::decimal_range(dec("0"), dec("100")),
        )
        .required()],
        outputs: vec![],
        template_lifetime: 100,
    };
    let props = ProviderProperties {
        provider_id: provider_id.into(),
        domain_id: "d".into(),
        values: BTreeMap::new(),
        term_ranges: BTreeMap::from([("price".to_string(), ValueDomain::decimal_range(lo, hi))]),
    };
    generate_service_template(&props, &schema).unwrap()
}

pub fn price_offer(template: &AgreementDocument, price: Decimal) -> AgreementDocument {
    wsag_market::contract::fill_template(
        template,
        &Bindings::from([("price".to_string(), TermValue::Decimal(price))]),
    )
    .unwrap()
}

/// Wraps a port and records every offer it receives with the reply.
pub struct Recorder<P> {
    pub inner: P,
    pub log: Vec<(AgreementDocument, ProviderReply)>,
}

impl<P> Recorder<P> {
    pub fn new(inner: P) -> Self {
        Recorder { inner, log: Vec::new() }
    }
}

impl<P: ProviderPort> ProviderPort for Recorder<P> {
    fn provider_id(&self) -> &str {
        self.inner.provider_id()
    }

    fn protocol(&self) -> ProtocolKind {
        self.inner.protocol()
    }

    fn get_template(&self) -> Result<AgreementDocument, ProviderError> {
        self.inner.get_template()
    }

    fn handle_offer(&mut self, offer: &AgreementDocument, round: u32) -> ProviderReply {
        let reply = self.inner.handle_offer(offer, round);
        self.log.push((offer.clone(), reply.clone()));
        reply
    }

    fn counter_template(&mut self, iteration: u32) -> Option<AgreementDocument> {
        self.inner.counter_template(iteration)
    }

    fn cancel(&mut self, agreement: &AgreementDocument) {
        self.inner.cancel(agreement)
    }

    fn execute(&mut self, agreement: &AgreementDocument, input: &Bindings) -> Result<Bindings, ProviderError> {
        self.inner.execute(agreement, input)
    }

    fn search(&self, query: &Bindings) -> Vec<Bindings> {
        self.inner.search(query)
    }
}
