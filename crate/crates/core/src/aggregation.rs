//! Class-level templates built by concatenating service templates.
//!
//! Terms that are structurally identical across every provider defining them
//! (id, kind, unit, value domain, and fixed property value) collapse into one
//! unprefixed term. Everything else is kept once per provider under a
//! `<provider><sep><id>` prefix. Constraints and guarantees are carried over
//! with their references rewritten the same way; a merged term shared by
//! several providers keeps each provider's restriction under the prefixed
//! reference.

use std::collections::{BTreeMap, BTreeSet};

use crate::contract::{admits, AgreementContext, AgreementDocument, Level, Stage, TermDefinition, DEFAULT_SEPARATOR};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AggregationError {
    #[error("nothing to aggregate")]
    Empty,
    #[error("document of provider `{0}` is not a service-level template")]
    NotServiceTemplate(String),
    #[error("expected a domain-level offer")]
    NotDomainOffer,
    #[error("templates span several domains (`{0}` vs `{1}`)")]
    DomainMismatch(String, String),
    #[error("provider `{0}` contributes more than one template")]
    DuplicateProvider(String),
    #[error("provider id `{0}` is empty or contains the prefix separator")]
    InvalidProviderId(String),
    #[error("term `{0}` is declared with conflicting unit or value domain")]
    ConflictingDuplicate(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrefixRule {
    pub provider_id: String,
    pub separator: String,
}

impl PrefixRule {
    pub fn new(provider_id: impl Into<String>) -> Self {
        PrefixRule {
            provider_id: provider_id.into(),
            separator: DEFAULT_SEPARATOR.to_string(),
        }
    }

    pub fn apply(&self, term_id: &str) -> String {
        format!("{}{}{}", self.provider_id, self.separator, term_id)
    }
}

enum Placement {
    Merged { contributors: usize },
    Prefixed,
}

/// Aggregates service templates (in provider registration order) into one
/// domain-level template.
pub fn aggregate_templates(templates: &[AgreementDocument]) -> Result<AgreementDocument, AggregationError> {
    let first = templates.first().ok_or(AggregationError::Empty)?;
    let domain = &first.context.domain_id;
    let mut providers = BTreeSet::new();
    for t in templates {
        let pid = &t.context.provider_id;
        if t.stage != Stage::Template || t.level != Level::Service {
            return Err(AggregationError::NotServiceTemplate(pid.clone()));
        }
        if &t.context.domain_id != domain {
            return Err(AggregationError::DomainMismatch(
                domain.clone(),
                t.context.domain_id.clone(),
            ));
        }
        if pid.is_empty() || pid.contains(DEFAULT_SEPARATOR) {
            return Err(AggregationError::InvalidProviderId(pid.clone()));
        }
        if !providers.insert(pid.as_str()) {
            return Err(AggregationError::DuplicateProvider(pid.clone()));
        }
    }

    let mut groups: BTreeMap<&str, Vec<&TermDefinition>> = BTreeMap::new();
    for t in templates {
        for term in &t.terms {
            groups.entry(term.id.as_str()).or_default().push(term);
        }
    }
    let mut placement = BTreeMap::new();
    for (id, defs) in &groups {
        for (i, a) in defs.iter().enumerate() {
            for b in &defs[i + 1..] {
                if a.kind == b.kind && (a.unit != b.unit || a.value_domain != b.value_domain) {
                    return Err(AggregationError::ConflictingDuplicate(id.to_string()));
                }
            }
        }
        let head = defs[0];
        let identical = defs.iter().all(|d| d.structurally_equal(head) && d.fixed == head.fixed);
        placement.insert(
            *id,
            if identical {
                Placement::Merged {
                    contributors: defs.len(),
                }
            } else {
                Placement::Prefixed
            },
        );
    }

    let mut out = AgreementDocument::new_template(
        Level::Domain,
        AgreementContext {
            domain_id: domain.clone(),
            created: templates.iter().map(|t| t.context.created).max().unwrap_or(0),
            expiry: templates.iter().map(|t| t.context.expiry).min().unwrap_or(0),
            ..Default::default()
        },
    );
    let mut emitted = BTreeSet::new();
    for t in templates {
        let rule = PrefixRule::new(&t.context.provider_id);
        let reference = |term_id: &str| match placement.get(term_id) {
            Some(Placement::Merged { contributors: 1 }) => term_id.to_string(),
            _ => rule.apply(term_id),
        };
        for term in &t.terms {
            let out_id = match placement[term.id.as_str()] {
                Placement::Merged { .. } => term.id.clone(),
                Placement::Prefixed => rule.apply(&term.id),
            };
            if !emitted.insert(out_id.clone()) {
                if let Some(existing) = out.terms.iter_mut().find(|x| x.id == out_id) {
                    existing.required |= term.required;
                }
                continue;
            }
            out.terms.push(TermDefinition {
                id: out_id,
                ..term.clone()
            });
        }
        for c in &t.constraints {
            let mut c = c.clone();
            c.term_id = reference(&c.term_id);
            out.constraints.push(c);
        }
        for g in &t.guarantees {
            let mut g = g.clone();
            g.term_id = reference(&g.term_id);
            out.guarantees.push(g);
        }
    }
    out.canonicalize();
    Ok(out)
}

/// Maps a domain-offer binding key onto a term of the provider's service
/// template: either the plain id or the provider-prefixed form.
pub fn map_to_service_term<'a>(template: &'a AgreementDocument, key: &str) -> Option<&'a TermDefinition> {
    if let Some(t) = template.term(key) {
        return Some(t);
    }
    let rule = PrefixRule::new(&template.context.provider_id);
    template.terms.iter().find(|t| rule.apply(&t.id) == key)
}

/// Keeps the service templates whose constraints admit every domain-offer
/// binding that maps onto one of their terms. Order is preserved.
pub fn filter_templates(
    templates: &[AgreementDocument],
    domain_offer: &AgreementDocument,
) -> Result<Vec<AgreementDocument>, AggregationError> {
    if domain_offer.stage != Stage::Offer || domain_offer.level != Level::Domain {
        return Err(AggregationError::NotDomainOffer);
    }
    Ok(templates
        .iter()
        .filter(|t| {
            domain_offer
                .bindings
                .iter()
                .all(|(key, value)| match map_to_service_term(t, key) {
                    Some(term) => admits(t, term, value),
                    None => true,
                })
        })
        .cloned()
        .collect())
}
