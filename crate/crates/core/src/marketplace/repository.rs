use std::fmt;

use indexmap::IndexMap;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::engine::{OpLevel, OperationDef, Step};
use super::MarketError;
use crate::aggregation::aggregate_templates;
use crate::contract::{
    fill_template, generate_service_template, AgreementDocument, Bindings, ContractError, DomainSchema,
    ProviderProperties,
};
use crate::protocol::SharedProvider;

pub struct ProviderEntry {
    pub properties: ProviderProperties,
    pub instance_ops: IndexMap<String, OperationDef>,
    pub port: SharedProvider,
}

impl fmt::Debug for ProviderEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProviderEntry")
            .field("properties", &self.properties)
            .field("instance_ops", &self.instance_ops.keys().collect::<Vec<_>>())
            .finish_non_exhaustive()
    }
}

#[derive(Debug)]
pub struct DomainEntry {
    pub schema: DomainSchema,
    pub class_ops: IndexMap<String, OperationDef>,
    /// Providers in registration order.
    pub providers: IndexMap<String, ProviderEntry>,
}

/// Passive store of domains, operations and provider registrations. It
/// hands out copies of operation definitions and never runs them.
#[derive(Debug, Default)]
pub struct Repository {
    domains: IndexMap<String, DomainEntry>,
}

#[derive(Serialize)]
struct DigestView<'a> {
    domain: &'a DomainSchema,
    class_ops: Vec<&'a OperationDef>,
    providers: Vec<(&'a ProviderProperties, Vec<&'a OperationDef>)>,
}

impl Repository {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register_domain(&mut self, schema: DomainSchema) -> Result<(), MarketError> {
        schema.check()?;
        if self.domains.contains_key(&schema.domain_id) {
            return Err(MarketError::DuplicateDomain(schema.domain_id));
        }
        self.domains.insert(
            schema.domain_id.clone(),
            DomainEntry {
                schema,
                class_ops: IndexMap::new(),
                providers: IndexMap::new(),
            },
        );
        Ok(())
    }

    pub fn add_class_operation(&mut self, op: OperationDef) -> Result<(), MarketError> {
        if op.level != OpLevel::Class || !op.provider_id.is_empty() {
            return Err(MarketError::InvalidOperation(format!(
                "`{}` is not a class-level operation",
                op.id
            )));
        }
        if op.body.iter().any(|s| matches!(s, Step::Invoke { .. })) {
            return Err(MarketError::InvalidOperation(format!(
                "class-level `{}` may not call a provider port directly",
                op.id
            )));
        }
        let entry = self.domain_mut(&op.domain_id)?;
        entry.class_ops.insert(op.id.clone(), op);
        Ok(())
    }

    pub fn register_provider(
        &mut self,
        domain_id: &str,
        props: ProviderProperties,
        instance_ops: Vec<OperationDef>,
        port: SharedProvider,
    ) -> Result<String, MarketError> {
        let entry = self.domain_mut(domain_id)?;
        entry.schema.check_properties(&props).map_err(|e| match e {
            ContractError::MissingProperty(p) => MarketError::MissingProperty(p),
            other => MarketError::Contract(other),
        })?;
        if props.domain_id != domain_id {
            return Err(MarketError::Contract(ContractError::DomainMismatch {
                expected: domain_id.into(),
                found: props.domain_id.clone(),
            }));
        }
        let pid = props.provider_id.clone();
        if entry.providers.contains_key(&pid) {
            return Err(MarketError::DuplicateProviderId(pid));
        }
        let port_id = port.lock().expect("provider lock poisoned").provider_id().to_string();
        if port_id != pid {
            return Err(MarketError::InvalidOperation(format!(
                "port answers as `{port_id}` but is registered as `{pid}`"
            )));
        }
        let mut ops = IndexMap::new();
        for op in instance_ops {
            let invokes = op.body.iter().filter(|s| matches!(s, Step::Invoke { .. })).count();
            if op.level != OpLevel::Instance || op.provider_id != pid || op.domain_id != domain_id || invokes != 1 {
                return Err(MarketError::InvalidOperation(format!(
                    "`{}` is not a single-port instance operation of `{pid}`",
                    op.id
                )));
            }
            ops.insert(op.id.clone(), op);
        }
        // The template must be generatable from what was registered.
        generate_service_template(&props, &entry.schema)?;
        entry.providers.insert(
            pid.clone(),
            ProviderEntry {
                properties: props,
                instance_ops: ops,
                port,
            },
        );
        Ok(pid)
    }

    fn domain_mut(&mut self, domain_id: &str) -> Result<&mut DomainEntry, MarketError> {
        self.domains
            .get_mut(domain_id)
            .ok_or_else(|| MarketError::UnknownDomain(domain_id.into()))
    }

    pub fn domain(&self, domain_id: &str) -> Result<&DomainEntry, MarketError> {
        self.domains
            .get(domain_id)
            .ok_or_else(|| MarketError::UnknownDomain(domain_id.into()))
    }

    pub fn provider_ids(&self, domain_id: &str) -> Result<Vec<String>, MarketError> {
        Ok(self.domain(domain_id)?.providers.keys().cloned().collect())
    }

    pub fn port(&self, domain_id: &str, provider_id: &str) -> Result<SharedProvider, MarketError> {
        self.domain(domain_id)?
            .providers
            .get(provider_id)
            .map(|p| p.port.clone())
            .ok_or_else(|| MarketError::UnknownProvider(provider_id.into()))
    }

    /// Copy of a class-level operation.
    pub fn fetch_operation(&self, domain_id: &str, op_id: &str) -> Result<OperationDef, MarketError> {
        self.domain(domain_id)?
            .class_ops
            .get(op_id)
            .cloned()
            .ok_or_else(|| MarketError::UnknownOperation(op_id.into()))
    }

    /// Copy of a provider's instance-level operation.
    pub fn fetch_instance_operation(
        &self,
        domain_id: &str,
        provider_id: &str,
        op_id: &str,
    ) -> Result<OperationDef, MarketError> {
        self.domain(domain_id)?
            .providers
            .get(provider_id)
            .ok_or_else(|| MarketError::UnknownProvider(provider_id.into()))?
            .instance_ops
            .get(op_id)
            .cloned()
            .ok_or_else(|| MarketError::UnknownOperation(op_id.into()))
    }

    pub fn service_template(&self, domain_id: &str, provider_id: &str) -> Result<AgreementDocument, MarketError> {
        let d = self.domain(domain_id)?;
        let p = d
            .providers
            .get(provider_id)
            .ok_or_else(|| MarketError::UnknownProvider(provider_id.into()))?;
        Ok(generate_service_template(&p.properties, &d.schema)?)
    }

    /// Domain template over every registered provider.
    pub fn domain_template(&self, domain_id: &str) -> Result<AgreementDocument, MarketError> {
        let templates = self
            .provider_ids(domain_id)?
            .iter()
            .map(|p| self.service_template(domain_id, p))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(aggregate_templates(&templates)?)
    }

    /// Fills the domain template with the consumer's bindings.
    pub fn domain_offer(
        &self,
        domain_id: &str,
        consumer_id: &str,
        bindings: &Bindings,
    ) -> Result<AgreementDocument, MarketError> {
        let mut offer = fill_template(&self.domain_template(domain_id)?, bindings)?;
        offer.context.consumer_id = consumer_id.into();
        Ok(offer)
    }

    /// Hash over domains, operations and registrations (not provider state).
    pub fn digest(&self) -> String {
        let views: Vec<DigestView> = self
            .domains
            .values()
            .map(|d| DigestView {
                domain: &d.schema,
                class_ops: d.class_ops.values().collect(),
                providers: d
                    .providers
                    .values()
                    .map(|p| (&p.properties, p.instance_ops.values().collect()))
                    .collect(),
            })
            .collect();
        let text = serde_json::to_string(&views).expect("repository serialization cannot fail");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}
