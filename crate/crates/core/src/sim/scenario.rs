use std::collections::BTreeSet;
use std::fmt;
use std::sync::{Arc, Mutex};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cinema::{cinema_schema, ProviderModel, SimCinemaProvider, DOMAIN, MOVIE_TITLE};
use super::native::{adapt_unaware_provider, BoxOffice, UnawareAdapter};
use super::SimError;
use crate::contract::{AgreementDocument, Bindings, ProviderProperties, TermValue};
use crate::marketplace::{standard_class_operations, standard_instance_operations, Repository};
use crate::protocol::{Limits, ProtocolKind, SharedProvider};
use crate::strategy::{StrategyConfig, ValueScoringStrategy};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassOp {
    /// Negotiate with every surviving provider, then book the winner.
    #[default]
    Book,
    /// Search shows, negotiate each, book the confirmed one.
    SearchAndBook,
}

fn default_consumer() -> String {
    "consumer".into()
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub seed: u64,
    #[serde(default = "default_consumer")]
    pub consumer_id: String,
    pub providers: Vec<ProviderModel>,
    /// Consumer bindings of the domain offer.
    pub domain_offer: Bindings,
    pub strategy: StrategyConfig,
    #[serde(default)]
    pub limits: Limits,
    #[serde(default = "yes")]
    pub deterministic_mode: bool,
    #[serde(default)]
    pub class_op: ClassOp,
}

/// One problem found while validating a scenario.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl Scenario {
    pub fn from_json(s: &str) -> Result<Self, SimError> {
        serde_json::from_str(s).map_err(|e| SimError::Parse(e.to_string()))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialization cannot fail")
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Field-level diagnostics; empty when the scenario can run.
    pub fn diagnostics(&self) -> Vec<FieldError> {
        let mut out = Vec::new();
        let mut err = |field: String, message: String| out.push(FieldError { field, message });
        if self.name.is_empty() {
            err("name".into(), "must not be empty".into());
        }
        if self.consumer_id.is_empty() {
            err("consumer_id".into(), "must not be empty".into());
        }
        if self.providers.is_empty() {
            err("providers".into(), "at least one provider is required".into());
        }
        let mut ids = BTreeSet::new();
        for (i, p) in self.providers.iter().enumerate() {
            if let Err(m) = p.check() {
                err(format!("providers[{i}]"), m);
            }
            if !ids.insert(&p.provider_id) {
                err(
                    format!("providers[{i}].provider_id"),
                    format!("duplicate id `{}`", p.provider_id),
                );
            }
            if !p.wsag_aware && p.protocol != ProtocolKind::Cnip {
                err(
                    format!("providers[{i}].protocol"),
                    "native cinemas only support CNIP".into(),
                );
            }
            if let Err(e) = cinema_schema().check_properties(&p.properties()) {
                err(format!("providers[{i}].properties"), e.to_string());
            }
        }
        if !matches!(self.domain_offer.get(MOVIE_TITLE), Some(TermValue::String(_))) {
            err(
                format!("domain_offer.{MOVIE_TITLE}"),
                "a movie title is required".into(),
            );
        }
        if let Err(e) = self.strategy.model.normalized_weights() {
            err("strategy.model".into(), e.to_string());
        }
        if !(0.0..=1.0).contains(&self.strategy.confirm_threshold) {
            err("strategy.confirm_threshold".into(), "must lie in [0, 1]".into());
        }
        for (i, t) in self.strategy.tactics.iter().enumerate() {
            if self.strategy.model.function(&t.term_id).is_none() {
                err(
                    format!("strategy.tactics[{i}]"),
                    format!("term `{}` is not scored", t.term_id),
                );
            }
        }
        let l = &self.limits;
        if l.deadline_round == 0 || l.deadline_tick == 0 || l.iteration_limit == 0 {
            err(
                "limits".into(),
                "deadline_round, deadline_tick and iteration_limit must be positive".into(),
            );
        }
        out
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let d = self.diagnostics();
        if d.is_empty() {
            Ok(())
        } else {
            Err(SimError::ScenarioInvalid(d))
        }
    }

    pub fn consumer_strategy(&self) -> ValueScoringStrategy {
        ValueScoringStrategy::new(self.strategy.clone(), self.limits.iteration_limit)
    }
}

/// Typed handle on a provider, kept alongside the shared port so tests and
/// reports can inspect provider state after a run.
#[derive(Clone)]
pub enum ProviderHandle {
    Aware(Arc<Mutex<SimCinemaProvider>>),
    Unaware(Arc<Mutex<UnawareAdapter<BoxOffice>>>),
}

impl ProviderHandle {
    pub fn port(&self) -> SharedProvider {
        match self {
            ProviderHandle::Aware(p) => p.clone(),
            ProviderHandle::Unaware(p) => p.clone(),
        }
    }

    pub fn seats_free(&self, show_id: &str) -> Option<u32> {
        match self {
            ProviderHandle::Aware(p) => p.lock().expect("provider lock poisoned").seats_free(show_id),
            ProviderHandle::Unaware(p) => p.lock().expect("provider lock poisoned").native().seats_free(show_id),
        }
    }

    pub fn open_holds(&self) -> usize {
        match self {
            ProviderHandle::Aware(p) => p.lock().expect("provider lock poisoned").open_holds(),
            ProviderHandle::Unaware(p) => p.lock().expect("provider lock poisoned").native().open_holds(),
        }
    }
}

/// The marketplace as a scenario sets it up.
pub struct World {
    pub repo: Repository,
    pub providers: Vec<(String, ProviderHandle)>,
    pub domain_offer: AgreementDocument,
}

impl World {
    pub fn handle(&self, provider_id: &str) -> Option<&ProviderHandle> {
        self.providers.iter().find(|(id, _)| id == provider_id).map(|(_, h)| h)
    }
}

pub(crate) fn provider_properties(model: &ProviderModel) -> Result<ProviderProperties, SimError> {
    if model.wsag_aware {
        Ok(model.properties())
    } else {
        let adapter = adapt_unaware_provider(
            &model.provider_id,
            model.properties.clone(),
            BoxOffice::new(model.inventory.clone()),
        )?;
        Ok(adapter.properties().clone())
    }
}

/// Builds providers (drawing their jitter from the seed in registration
/// order), registers them, and fills the domain offer.
pub fn build_world(s: &Scenario) -> Result<World, SimError> {
    s.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let schema = cinema_schema();
    let mut repo = Repository::new();
    repo.register_domain(schema.clone())?;
    for op in standard_class_operations(&schema) {
        repo.add_class_operation(op)?;
    }
    let mut providers = Vec::new();
    for model in &s.providers {
        let (props, handle) = if model.wsag_aware {
            let p = SimCinemaProvider::new(model.clone(), &mut rng)?;
            (model.properties(), ProviderHandle::Aware(Arc::new(Mutex::new(p))))
        } else {
            let a = adapt_unaware_provider(
                &model.provider_id,
                model.properties.clone(),
                BoxOffice::new(model.inventory.clone()),
            )?;
            (a.properties().clone(), ProviderHandle::Unaware(Arc::new(Mutex::new(a))))
        };
        let ops = standard_instance_operations(&schema, &model.provider_id);
        repo.register_provider(DOMAIN, props, ops, handle.port())?;
        providers.push((model.provider_id.clone(), handle));
    }
    let domain_offer = repo.domain_offer(DOMAIN, &s.consumer_id, &s.domain_offer)?;
    Ok(World {
        repo,
        providers,
        domain_offer,
    })
}
