//! Agreement document model: templates, offers and agreements.
//!
//! Documents keep the part structure of a WS-Agreement (context, service
//! terms, guarantee terms, creation constraints) but serialize to a canonical
//! JSON form instead of XML. Every operation here is a pure function over
//! immutable values.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::decimal::Decimal;

/// Separator between a provider id and a term id in domain-level documents.
pub const DEFAULT_SEPARATOR: &str = ".";

pub type Tick = u64;
pub type Bindings = BTreeMap<String, TermValue>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ContractError {
    #[error("required service property `{0}` is missing")]
    MissingProperty(String),
    #[error("invalid range on `{0}`: min > max")]
    InvalidRange(String),
    #[error("range on `{0}` is not a subset of the term's value domain")]
    RangeOutsideDomain(String),
    #[error("unknown term `{0}`")]
    UnknownTerm(String),
    #[error("duplicate term id `{0}`")]
    DuplicateTerm(String),
    #[error("binding for `{0}` violates its creation constraint")]
    ConstraintViolation(String),
    #[error("mandatory term `{0}` is not bound")]
    MissingBinding(String),
    #[error("domain mismatch: expected `{expected}`, found `{found}`")]
    DomainMismatch { expected: String, found: String },
    #[error("expected a {expected:?} document, found {found:?}")]
    WrongStage { expected: Stage, found: Stage },
    #[error("no observation for guaranteed term `{0}`")]
    MissingObservation(String),
    #[error("invalid document: {0}")]
    InvalidDocument(String),
    #[error("malformed document json: {0}")]
    Parse(String),
}

pub type Result<T, E = ContractError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermValue {
    Integer(i64),
    Decimal(Decimal),
    String(String),
    Boolean(bool),
    #[serde(rename = "enum")]
    Enum(String),
}

impl TermValue {
    pub fn decimal(v: Decimal) -> Self {
        TermValue::Decimal(v)
    }

    pub fn string(s: impl Into<String>) -> Self {
        TermValue::String(s.into())
    }

    /// Numeric view shared by integer and decimal values.
    pub fn as_number(&self) -> Option<Decimal> {
        match self {
            TermValue::Integer(i) => Some(Decimal::from_int(*i)),
            TermValue::Decimal(d) => Some(*d),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            TermValue::String(s) | TermValue::Enum(s) => Some(s),
            _ => None,
        }
    }

    /// Equality that treats `Integer(8)` and `Decimal(8.0000)` as the same
    /// number and enum members as their names.
    pub fn same_value(&self, other: &TermValue) -> bool {
        match (self.as_number(), other.as_number()) {
            (Some(a), Some(b)) => a == b,
            _ => match (self, other) {
                (TermValue::Boolean(a), TermValue::Boolean(b)) => a == b,
                _ => match (self.as_text(), other.as_text()) {
                    (Some(a), Some(b)) => a == b,
                    _ => false,
                },
            },
        }
    }
}

impl fmt::Display for TermValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TermValue::Integer(i) => write!(f, "{i}"),
            TermValue::Decimal(d) => write!(f, "{d}"),
            TermValue::String(s) | TermValue::Enum(s) => write!(f, "{s}"),
            TermValue::Boolean(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermKind {
    ServiceProperty,
    Input,
    Output,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValueDomain {
    IntegerRange { min: i64, max: i64 },
    DecimalRange { min: Decimal, max: Decimal },
    Enumeration { members: Vec<String> },
    FreeString,
    Boolean,
}

impl ValueDomain {
    pub fn decimal_range(min: Decimal, max: Decimal) -> Self {
        ValueDomain::DecimalRange { min, max }
    }

    pub fn enumeration<I, S>(members: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ValueDomain::Enumeration {
            members: members.into_iter().map(Into::into).collect(),
        }
    }

    /// Inclusive numeric bounds of a range domain.
    pub fn numeric_bounds(&self) -> Option<(Decimal, Decimal)> {
        match self {
            ValueDomain::IntegerRange { min, max } => Some((Decimal::from_int(*min), Decimal::from_int(*max))),
            ValueDomain::DecimalRange { min, max } => Some((*min, *max)),
            _ => None,
        }
    }

    pub fn is_integral(&self) -> bool {
        matches!(self, ValueDomain::IntegerRange { .. })
    }

    pub fn is_empty(&self) -> bool {
        match self {
            ValueDomain::Enumeration { members } => members.is_empty(),
            other => other.numeric_bounds().is_some_and(|(lo, hi)| lo > hi),
        }
    }

    pub fn check_range(&self, owner: &str) -> Result<()> {
        if self.numeric_bounds().is_some_and(|(lo, hi)| lo > hi) {
            return Err(ContractError::InvalidRange(owner.to_string()));
        }
        Ok(())
    }

    pub fn contains(&self, value: &TermValue) -> bool {
        match self {
            ValueDomain::IntegerRange { min, max } => match value.as_number() {
                Some(n) if n.is_integral() => {
                    let i = n.round_to_int();
                    *min <= i && i <= *max
                }
                _ => false,
            },
            ValueDomain::DecimalRange { min, max } => value.as_number().is_some_and(|n| *min <= n && n <= *max),
            ValueDomain::Enumeration { members } => value.as_text().is_some_and(|s| members.iter().any(|m| m == s)),
            ValueDomain::FreeString => matches!(value, TermValue::String(_) | TermValue::Enum(_)),
            ValueDomain::Boolean => matches!(value, TermValue::Boolean(_)),
        }
    }

    /// Structural subset test, decided per domain kind.
    pub fn is_subset_of(&self, outer: &ValueDomain) -> bool {
        use ValueDomain::*;
        match (self, outer) {
            (IntegerRange { .. } | DecimalRange { .. }, IntegerRange { .. } | DecimalRange { .. }) => {
                let (lo, hi) = self.numeric_bounds().unwrap();
                let (olo, ohi) = outer.numeric_bounds().unwrap();
                if lo > hi {
                    return true;
                }
                if matches!(self, DecimalRange { .. }) && outer.is_integral() && lo != hi {
                    return false;
                }
                olo <= lo && hi <= ohi && (!outer.is_integral() || lo.is_integral())
            }
            (Enumeration { members }, Enumeration { members: outer }) => members.iter().all(|m| outer.contains(m)),
            (Enumeration { .. }, FreeString) | (FreeString, FreeString) | (Boolean, Boolean) => true,
            _ => false,
        }
    }

    /// The value inside the domain closest to `value`, for numeric domains.
    pub fn clamp_number(&self, value: Decimal) -> Option<Decimal> {
        let (lo, hi) = self.numeric_bounds()?;
        if lo > hi {
            return None;
        }
        let v = value.clamp(lo, hi);
        Some(if self.is_integral() {
            Decimal::from_int(v.round_to_int()).clamp(lo, hi)
        } else {
            v
        })
    }

    pub fn value_from_number(&self, n: Decimal) -> TermValue {
        if self.is_integral() {
            TermValue::Integer(n.round_to_int())
        } else {
            TermValue::Decimal(n)
        }
    }

    fn canonicalize(&mut self) {
        if let ValueDomain::Enumeration { members } = self {
            members.sort();
            members.dedup();
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermDefinition {
    pub id: String,
    pub kind: TermKind,
    pub unit: String,
    pub value_domain: ValueDomain,
    pub required: bool,
    /// Static value of a service property as declared by its provider.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed: Option<TermValue>,
}

impl TermDefinition {
    pub fn new(id: impl Into<String>, kind: TermKind, unit: impl Into<String>, value_domain: ValueDomain) -> Self {
        TermDefinition {
            id: id.into(),
            kind,
            unit: unit.into(),
            value_domain,
            required: false,
            fixed: None,
        }
    }

    pub fn required(mut self) -> Self {
        self.required = true;
        self
    }

    /// Same id, kind, unit and domain.
    pub fn structurally_equal(&self, other: &TermDefinition) -> bool {
        self.id == other.id
            && self.kind == other.kind
            && self.unit == other.unit
            && self.value_domain == other.value_domain
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicate {
    Equals(TermValue),
    AtLeast(TermValue),
    AtMost(TermValue),
    Within { min: TermValue, max: TermValue },
}

impl Predicate {
    pub fn holds(&self, observed: &TermValue) -> bool {
        let num = |v: &TermValue| v.as_number();
        match self {
            Predicate::Equals(v) => v.same_value(observed),
            Predicate::AtLeast(v) => matches!((num(observed), num(v)), (Some(o), Some(b)) if o >= b),
            Predicate::AtMost(v) => matches!((num(observed), num(v)), (Some(o), Some(b)) if o <= b),
            Predicate::Within { min, max } => matches!(
                (num(observed), num(min), num(max)),
                (Some(o), Some(lo), Some(hi)) if lo <= o && o <= hi
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuaranteeTerm {
    pub term_id: String,
    pub predicate: Predicate,
    pub business_value: Decimal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CreationConstraint {
    pub term_id: String,
    pub allowed: ValueDomain,
    pub mandatory: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AgreementContext {
    pub consumer_id: String,
    pub provider_id: String,
    pub domain_id: String,
    pub created: Tick,
    pub expiry: Tick,
    pub agreement_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Template,
    Offer,
    Agreement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Domain,
    Service,
}

/// A template, offer or agreement. Field order is the canonical
/// serialization order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgreementDocument {
    pub stage: Stage,
    pub level: Level,
    pub context: AgreementContext,
    pub terms: Vec<TermDefinition>,
    pub constraints: Vec<CreationConstraint>,
    pub guarantees: Vec<GuaranteeTerm>,
    pub bindings: Bindings,
}

impl AgreementDocument {
    pub fn new_template(level: Level, context: AgreementContext) -> Self {
        AgreementDocument {
            stage: Stage::Template,
            level,
            context,
            terms: Vec::new(),
            constraints: Vec::new(),
            guarantees: Vec::new(),
            bindings: Bindings::new(),
        }
    }

    /// Sorts every list by term id (stable, so several constraints on one
    /// term keep their relative order) and normalizes enumeration members.
    pub fn canonicalize(&mut self) {
        for t in &mut self.terms {
            t.value_domain.canonicalize();
        }
        for c in &mut self.constraints {
            c.allowed.canonicalize();
        }
        self.terms.sort_by(|a, b| a.id.cmp(&b.id));
        self.constraints.sort_by(|a, b| a.term_id.cmp(&b.term_id));
        self.guarantees.sort_by(|a, b| a.term_id.cmp(&b.term_id));
    }

    pub fn canonical(mut self) -> Self {
        self.canonicalize();
        self
    }

    pub fn to_canonical_json(&self) -> String {
        let doc = self.clone().canonical();
        serde_json::to_string(&doc).expect("document serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: AgreementDocument = serde_json::from_str(s).map_err(|e| ContractError::Parse(e.to_string()))?;
        Ok(doc.canonical())
    }

    /// Lowercase hex SHA-256 of the canonical serialization.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_canonical_json().as_bytes()))
    }

    pub fn term(&self, id: &str) -> Option<&TermDefinition> {
        self.terms.iter().find(|t| t.id == id)
    }

    pub fn constraints_on<'a>(&'a self, term_id: &'a str) -> impl Iterator<Item = &'a CreationConstraint> + 'a {
        self.constraints.iter().filter(move |c| c.term_id == term_id)
    }

    /// Resolves a reference from a constraint or guarantee. Domain-level
    /// documents may reference a merged term through a provider prefix
    /// (`A.price` for the merged `price`).
    pub fn resolve_ref(&self, reference: &str) -> Option<&TermDefinition> {
        if let Some(t) = self.term(reference) {
            return Some(t);
        }
        if self.level != Level::Domain {
            return None;
        }
        self.terms.iter().find(|t| strip_prefix_for(reference, &t.id).is_some())
    }

    /// Numeric window a new binding for `term_id` may take: the term domain
    /// intersected with every direct constraint.
    pub fn permissible_range(&self, term_id: &str) -> Option<(Decimal, Decimal)> {
        let term = self.term(term_id)?;
        let (mut lo, mut hi) = term.value_domain.numeric_bounds()?;
        for c in self.constraints_on(term_id) {
            if let Some((clo, chi)) = c.allowed.numeric_bounds() {
                lo = lo.max(clo);
                hi = hi.min(chi);
            }
        }
        Some((lo, hi))
    }

    /// Checks the structural invariants of the document model.
    pub fn check_invariants(&self) -> Result<()> {
        let invalid = |m: String| Err(ContractError::InvalidDocument(m));
        let mut seen = BTreeSet::new();
        for t in &self.terms {
            if !seen.insert(t.id.as_str()) {
                return Err(ContractError::DuplicateTerm(t.id.clone()));
            }
            t.value_domain.check_range(&t.id)?;
            if self.level == Level::Service && t.id.contains(DEFAULT_SEPARATOR) {
                return invalid(format!("service-level term `{}` carries a prefix", t.id));
            }
            if let Some(v) = &t.fixed {
                if !t.value_domain.contains(v) {
                    return Err(ContractError::ConstraintViolation(t.id.clone()));
                }
            }
        }
        for c in &self.constraints {
            c.allowed.check_range(&c.term_id)?;
            let Some(t) = self.resolve_ref(&c.term_id) else {
                return Err(ContractError::UnknownTerm(c.term_id.clone()));
            };
            if !c.allowed.is_subset_of(&t.value_domain) {
                return Err(ContractError::RangeOutsideDomain(c.term_id.clone()));
            }
        }
        for g in &self.guarantees {
            if self.resolve_ref(&g.term_id).is_none() {
                return Err(ContractError::UnknownTerm(g.term_id.clone()));
            }
            if let Predicate::Within { min, max } = &g.predicate {
                if let (Some(lo), Some(hi)) = (min.as_number(), max.as_number()) {
                    if lo > hi {
                        return Err(ContractError::InvalidRange(g.term_id.clone()));
                    }
                }
            }
        }
        match self.stage {
            Stage::Template => {
                if !self.bindings.is_empty() {
                    return invalid("template carries bindings".into());
                }
            }
            Stage::Offer | Stage::Agreement => {
                let report = check_bindings(self, &self.bindings);
                if let Some(v) = report.first() {
                    return invalid(format!("binding violation: {v}"));
                }
            }
        }
        let is_agreement = self.stage == Stage::Agreement;
        if is_agreement == self.context.agreement_id.is_empty() {
            return invalid("agreement_id must be set exactly on agreements".into());
        }
        if is_agreement && self.context.provider_id.is_empty() {
            return invalid("agreement without provider".into());
        }
        if self.context.expiry <= self.context.created {
            return invalid("expiry must lie after creation".into());
        }
        Ok(())
    }
}

/// Returns the provider part when `reference` is `<provider><sep><term_id>`.
pub(crate) fn strip_prefix_for<'a>(reference: &'a str, term_id: &str) -> Option<&'a str> {
    let head = reference.strip_suffix(term_id)?;
    let provider = head.strip_suffix(DEFAULT_SEPARATOR)?;
    (!provider.is_empty()).then_some(provider)
}

/// Static data a provider supplies when joining a domain.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ProviderProperties {
    pub provider_id: String,
    pub domain_id: String,
    /// Service property values, keyed by property id.
    pub values: BTreeMap<String, TermValue>,
    /// Provider-specific restrictions on input/output terms.
    #[serde(default)]
    pub term_ranges: BTreeMap<String, ValueDomain>,
}

/// Class-level schema of a domain: properties every provider must declare,
/// plus the input and output schema of the class-level operations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainSchema {
    pub domain_id: String,
    pub properties: Vec<TermDefinition>,
    pub inputs: Vec<TermDefinition>,
    pub outputs: Vec<TermDefinition>,
    #[serde(default = "default_lifetime")]
    pub template_lifetime: Tick,
}

fn default_lifetime() -> Tick {
    1_000_000
}

impl DomainSchema {
    pub fn check(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for t in self.properties.iter().chain(&self.inputs).chain(&self.outputs) {
            t.value_domain.check_range(&t.id)?;
            if !seen.insert(t.id.as_str()) {
                return Err(ContractError::DuplicateTerm(t.id.clone()));
            }
        }
        Ok(())
    }

    /// Checks that `props` supplies every required property with a value
    /// from the property's domain.
    pub fn check_properties(&self, props: &ProviderProperties) -> Result<()> {
        for p in &self.properties {
            match props.values.get(&p.id) {
                None if p.required => return Err(ContractError::MissingProperty(p.id.clone())),
                Some(v) if !p.value_domain.contains(v) => return Err(ContractError::ConstraintViolation(p.id.clone())),
                _ => {}
            }
        }
        for id in props.values.keys() {
            if !self.properties.iter().any(|p| &p.id == id) {
                return Err(ContractError::UnknownTerm(id.clone()));
            }
        }
        Ok(())
    }
}

/// Builds the service-level template of one provider from the domain schema.
///
/// Properties become fixed-valued terms, inputs become terms with creation
/// constraints (the provider's declared range, or the schema domain), and
/// outputs with a numeric or single-valued range become guarantee terms.
pub fn generate_service_template(props: &ProviderProperties, schema: &DomainSchema) -> Result<AgreementDocument> {
    schema.check()?;
    schema.check_properties(props)?;
    if props.domain_id != schema.domain_id {
        return Err(ContractError::DomainMismatch {
            expected: schema.domain_id.clone(),
            found: props.domain_id.clone(),
        });
    }
    for (id, range) in &props.term_ranges {
        range.check_range(id)?;
        let Some(def) = schema.inputs.iter().chain(&schema.outputs).find(|t| &t.id == id) else {
            return Err(ContractError::UnknownTerm(id.clone()));
        };
        if !range.is_subset_of(&def.value_domain) {
            return Err(ContractError::RangeOutsideDomain(id.clone()));
        }
    }

    let mut doc = AgreementDocument::new_template(
        Level::Service,
        AgreementContext {
            provider_id: props.provider_id.clone(),
            domain_id: schema.domain_id.clone(),
            created: 0,
            expiry: schema.template_lifetime,
            ..Default::default()
        },
    );
    for p in &schema.properties {
        if let Some(v) = props.values.get(&p.id) {
            doc.terms.push(TermDefinition {
                required: false,
                fixed: Some(v.clone()),
                ..p.clone()
            });
        }
    }
    for input in &schema.inputs {
        doc.terms.push(input.clone());
        let allowed = props
            .term_ranges
            .get(&input.id)
            .cloned()
            .unwrap_or_else(|| input.value_domain.clone());
        doc.constraints.push(CreationConstraint {
            term_id: input.id.clone(),
            allowed,
            mandatory: input.required,
        });
    }
    for output in &schema.outputs {
        doc.terms.push(output.clone());
        let range = props.term_ranges.get(&output.id).unwrap_or(&output.value_domain);
        let predicate = match range {
            ValueDomain::IntegerRange { min, max } => Some(Predicate::Within {
                min: TermValue::Integer(*min),
                max: TermValue::Integer(*max),
            }),
            ValueDomain::DecimalRange { min, max } => Some(Predicate::Within {
                min: TermValue::Decimal(*min),
                max: TermValue::Decimal(*max),
            }),
            ValueDomain::Enumeration { members } if members.len() == 1 => {
                Some(Predicate::Equals(TermValue::Enum(members[0].clone())))
            }
            _ => None,
        };
        if let Some(predicate) = predicate {
            doc.guarantees.push(GuaranteeTerm {
                term_id: output.id.clone(),
                predicate,
                business_value: Decimal::ONE,
            });
        }
    }
    doc.canonicalize();
    doc.check_invariants()?;
    Ok(doc)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "violation", content = "term_id", rename_all = "snake_case")]
pub enum Violation {
    UnknownTerm(String),
    UnboundMandatory(String),
    ConstraintBreach(String),
}

impl Violation {
    pub fn term_id(&self) -> &str {
        match self {
            Violation::UnknownTerm(t) | Violation::UnboundMandatory(t) | Violation::ConstraintBreach(t) => t,
        }
    }

    fn into_error(self) -> ContractError {
        match self {
            Violation::UnknownTerm(t) => ContractError::UnknownTerm(t),
            Violation::UnboundMandatory(t) => ContractError::MissingBinding(t),
            Violation::ConstraintBreach(t) => ContractError::ConstraintViolation(t),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnknownTerm(t) => write!(f, "unknown term `{t}`"),
            Violation::UnboundMandatory(t) => write!(f, "mandatory term `{t}` unbound"),
            Violation::ConstraintBreach(t) => write!(f, "constraint breach on `{t}`"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Whether `value` is an admissible binding for `term` in `tmpl`: inside the
/// term domain, equal to a fixed property value, and allowed by every
/// constraint that targets the term directly.
pub fn admits(tmpl: &AgreementDocument, term: &TermDefinition, value: &TermValue) -> bool {
    term.value_domain.contains(value)
        && term.fixed.as_ref().is_none_or(|f| f.same_value(value))
        && tmpl.constraints_on(&term.id).all(|c| c.allowed.contains(value))
}

/// Outputs are observed after execution and never bound in an offer.
fn is_mandatory(tmpl: &AgreementDocument, term: &TermDefinition) -> bool {
    term.kind != TermKind::Output && (term.required || tmpl.constraints_on(&term.id).any(|c| c.mandatory))
}

/// All violations of `bindings` against `tmpl`, in template term order,
/// followed by unknown keys in key order.
///
/// On domain-level templates a key may also name a prefixed term by its
/// original id (`smoking` for `A.smoking`); such keys are only checked
/// against the value domain, since provider-scoped restrictions apply when
/// templates are filtered.
pub fn check_bindings(tmpl: &AgreementDocument, bindings: &Bindings) -> Vec<Violation> {
    let mut out = Vec::new();
    for term in &tmpl.terms {
        match bindings.get(&term.id) {
            Some(v) if !admits(tmpl, term, v) => out.push(Violation::ConstraintBreach(term.id.clone())),
            Some(_) => {}
            None if is_mandatory(tmpl, term) => out.push(Violation::UnboundMandatory(term.id.clone())),
            None => {}
        }
    }
    for (key, value) in bindings {
        if tmpl.term(key).is_some() {
            continue;
        }
        let prefixed: Vec<_> = if tmpl.level == Level::Domain {
            tmpl.terms
                .iter()
                .filter(|t| strip_prefix_for(&t.id, key).is_some())
                .collect()
        } else {
            Vec::new()
        };
        if prefixed.is_empty() {
            out.push(Violation::UnknownTerm(key.clone()));
        } else if !prefixed.iter().any(|t| t.value_domain.contains(value)) {
            out.push(Violation::ConstraintBreach(key.clone()));
        }
    }
    out
}

/// Turns a template into an offer. The template is left untouched.
pub fn fill_template(tmpl: &AgreementDocument, bindings: &Bindings) -> Result<AgreementDocument> {
    if tmpl.stage != Stage::Template {
        return Err(ContractError::WrongStage {
            expected: Stage::Template,
            found: tmpl.stage,
        });
    }
    if let Some(v) = check_bindings(tmpl, bindings).into_iter().next() {
        return Err(v.into_error());
    }
    let mut offer = tmpl.clone();
    offer.stage = Stage::Offer;
    offer.bindings = bindings.clone();
    Ok(offer)
}

pub fn validate_offer(tmpl: &AgreementDocument, offer: &AgreementDocument) -> Result<ValidationReport> {
    if tmpl.stage != Stage::Template {
        return Err(ContractError::WrongStage {
            expected: Stage::Template,
            found: tmpl.stage,
        });
    }
    if offer.stage != Stage::Offer {
        return Err(ContractError::WrongStage {
            expected: Stage::Offer,
            found: offer.stage,
        });
    }
    if tmpl.context.domain_id != offer.context.domain_id {
        return Err(ContractError::DomainMismatch {
            expected: tmpl.context.domain_id.clone(),
            found: offer.context.domain_id.clone(),
        });
    }
    Ok(ValidationReport {
        violations: check_bindings(tmpl, &offer.bindings),
    })
}

/// Promotes an offer to an agreement signed by `provider_id`.
pub fn accept_offer(offer: &AgreementDocument, agreement_id: &str, provider_id: &str) -> Result<AgreementDocument> {
    if offer.stage != Stage::Offer {
        return Err(ContractError::WrongStage {
            expected: Stage::Offer,
            found: offer.stage,
        });
    }
    if agreement_id.is_empty() || provider_id.is_empty() {
        return Err(ContractError::InvalidDocument(
            "agreement needs agreement and provider ids".into(),
        ));
    }
    let mut agr = offer.clone();
    agr.stage = Stage::Agreement;
    agr.context.agreement_id = agreement_id.to_string();
    agr.context.provider_id = provider_id.to_string();
    Ok(agr)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuaranteeOutcome {
    pub term_id: String,
    pub fulfilled: bool,
    pub business_value: Decimal,
}

pub fn evaluate_guarantees(agr: &AgreementDocument, observed: &Bindings) -> Result<Vec<GuaranteeOutcome>> {
    if agr.stage != Stage::Agreement {
        return Err(ContractError::WrongStage {
            expected: Stage::Agreement,
            found: agr.stage,
        });
    }
    agr.guarantees
        .iter()
        .map(|g| {
            let value = observed
                .get(&g.term_id)
                .ok_or_else(|| ContractError::MissingObservation(g.term_id.clone()))?;
            Ok(GuaranteeOutcome {
                term_id: g.term_id.clone(),
                fulfilled: g.predicate.holds(value),
                business_value: g.business_value,
            })
        })
        .collect()
}
