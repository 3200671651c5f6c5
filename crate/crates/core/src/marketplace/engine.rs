//! Operation definitions ("microflows") and the consumer-side interpreter
//! that runs them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::repository::Repository;
use super::store::AgreementStore;
use super::MarketError;
use crate::contract::{AgreementDocument, Bindings, TermDefinition, Tick};
use crate::protocol::{DispatchMode, Limits, Negotiator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpLevel {
    Class,
    Instance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PortCall {
    Search,
    Execute,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum Step {
    /// Runs another operation: a class operation of the domain, or the
    /// instance operation of that name for the provider(s) in scope.
    Fetch {
        op_id: String,
    },
    Invoke {
        call: PortCall,
    },
    /// Renames binding keys, then sets constants.
    Transform {
        #[serde(default)]
        rename: BTreeMap<String, String>,
        #[serde(default)]
        set: Bindings,
    },
    /// Hands control to logic the consumer injected under this name.
    Callback {
        name: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperationDef {
    pub id: String,
    pub level: OpLevel,
    pub domain_id: String,
    /// Empty for class-level operations.
    pub provider_id: String,
    pub input_contract: Vec<TermDefinition>,
    pub output_contract: Vec<TermDefinition>,
    pub body: Vec<Step>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Collect,
    Select,
    Negotiate,
    Usage,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceKind {
    Phase {
        phase: Phase,
    },
    Search {
        provider_id: String,
        results: usize,
    },
    Execute {
        provider_id: String,
        agreement_id: String,
        agreement_provider: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub tick: Tick,
    #[serde(flatten)]
    pub kind: TraceKind,
}

/// A search hit: one bookable item of one provider.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Found {
    pub provider_id: String,
    pub item: Bindings,
}

#[derive(Debug, Clone, Default)]
pub struct ExecContext {
    pub domain_id: String,
    pub bindings: Bindings,
    pub agreement: Option<AgreementDocument>,
    /// Provider the current instance-level step runs for.
    pub provider: Option<String>,
    /// Restricts fan-out over providers; `None` means all registered.
    pub candidates: Option<Vec<String>>,
    pub found: Vec<Found>,
    pub results: Bindings,
    depth: u32,
}

impl ExecContext {
    pub fn new(domain_id: &str, bindings: Bindings) -> Self {
        ExecContext {
            domain_id: domain_id.into(),
            bindings,
            ..Default::default()
        }
    }
}

pub trait CallbackHost {
    fn call(
        &mut self,
        name: &str,
        engine: &mut ExecutionEngine,
        repo: &Repository,
        ctx: &mut ExecContext,
    ) -> Result<(), MarketError>;
}

pub struct NoCallbacks;

impl CallbackHost for NoCallbacks {
    fn call(
        &mut self,
        name: &str,
        _: &mut ExecutionEngine,
        _: &Repository,
        _: &mut ExecContext,
    ) -> Result<(), MarketError> {
        Err(MarketError::UnknownCallback(name.into()))
    }
}

const MAX_DEPTH: u32 = 16;

/// Consumer-side runtime: interprets operations, drives negotiations, and
/// persists agreements.
#[derive(Debug)]
pub struct ExecutionEngine {
    pub negotiator: Negotiator,
    pub limits: Limits,
    pub mode: DispatchMode,
    pub store: AgreementStore,
    pub trace: Vec<TraceEvent>,
}

impl ExecutionEngine {
    pub fn new(limits: Limits, mode: DispatchMode, store: AgreementStore) -> Self {
        ExecutionEngine {
            negotiator: Negotiator::new(),
            limits,
            mode,
            store,
            trace: Vec::new(),
        }
    }

    /// Records a trace event at the current tick. Only messages advance
    /// the clock.
    pub fn event(&mut self, kind: TraceKind) {
        let tick = self.negotiator.clock;
        self.trace.push(TraceEvent { tick, kind });
    }

    pub fn phase(&mut self, phase: Phase) {
        self.event(TraceKind::Phase { phase });
    }

    pub fn trace_jsonl(&self) -> String {
        self.trace
            .iter()
            .map(|e| serde_json::to_string(e).expect("trace serialization cannot fail") + "\n")
            .collect()
    }

    pub fn run_operation(
        &mut self,
        repo: &Repository,
        op: &OperationDef,
        ctx: &mut ExecContext,
        host: &mut dyn CallbackHost,
    ) -> Result<(), MarketError> {
        if ctx.depth >= MAX_DEPTH {
            return Err(MarketError::InvalidOperation(format!("`{}` nests too deeply", op.id)));
        }
        ctx.depth += 1;
        let r = op
            .body
            .iter()
            .try_for_each(|step| self.run_step(repo, op, step, ctx, host));
        ctx.depth -= 1;
        r
    }

    fn run_step(
        &mut self,
        repo: &Repository,
        op: &OperationDef,
        step: &Step,
        ctx: &mut ExecContext,
        host: &mut dyn CallbackHost,
    ) -> Result<(), MarketError> {
        match step {
            Step::Fetch { op_id } => {
                if let Ok(class_op) = repo.fetch_operation(&ctx.domain_id, op_id) {
                    return self.run_operation(repo, &class_op, ctx, host);
                }
                let targets = match (&ctx.provider, &ctx.agreement, &ctx.candidates) {
                    (Some(p), _, _) => vec![p.clone()],
                    (None, Some(a), _) => vec![a.context.provider_id.clone()],
                    (None, None, Some(c)) => c.clone(),
                    (None, None, None) => repo.provider_ids(&ctx.domain_id)?,
                };
                let mut ran = false;
                for pid in targets {
                    let Ok(inst) = repo.fetch_instance_operation(&ctx.domain_id, &pid, op_id) else {
                        continue;
                    };
                    ran = true;
                    let saved = ctx.provider.replace(pid);
                    let r = self.run_operation(repo, &inst, ctx, host);
                    ctx.provider = saved;
                    r?;
                }
                if ran {
                    Ok(())
                } else {
                    Err(MarketError::UnknownOperation(op_id.clone()))
                }
            }
            Step::Invoke { call } => {
                if op.level != OpLevel::Instance {
                    return Err(MarketError::InvalidOperation(format!(
                        "`{}` invokes a port at class level",
                        op.id
                    )));
                }
                let pid = op.provider_id.clone();
                let port = repo.port(&ctx.domain_id, &pid)?;
                match call {
                    PortCall::Search => {
                        let items = port.lock().expect("provider lock poisoned").search(&ctx.bindings);
                        self.event(TraceKind::Search {
                            provider_id: pid.clone(),
                            results: items.len(),
                        });
                        ctx.found.extend(items.into_iter().map(|item| Found {
                            provider_id: pid.clone(),
                            item,
                        }));
                        Ok(())
                    }
                    PortCall::Execute => {
                        let rejected = |reason: String| MarketError::ExecutionRejected {
                            provider_id: pid.clone(),
                            reason,
                        };
                        let agr = ctx
                            .agreement
                            .clone()
                            .ok_or_else(|| rejected("no agreement authorizes the call".into()))?;
                        if agr.context.provider_id != pid {
                            return Err(rejected(format!(
                                "agreement `{}` was issued by `{}`",
                                agr.context.agreement_id, agr.context.provider_id
                            )));
                        }
                        self.event(TraceKind::Execute {
                            provider_id: pid.clone(),
                            agreement_id: agr.context.agreement_id.clone(),
                            agreement_provider: agr.context.provider_id.clone(),
                        });
                        let out = port
                            .lock()
                            .expect("provider lock poisoned")
                            .execute(&agr, &ctx.bindings)
                            .map_err(|e| rejected(e.to_string()))?;
                        ctx.results.extend(out);
                        Ok(())
                    }
                }
            }
            Step::Transform { rename, set } => {
                for (from, to) in rename {
                    if let Some(v) = ctx.bindings.remove(from) {
                        ctx.bindings.insert(to.clone(), v);
                    }
                }
                ctx.bindings.extend(set.iter().map(|(k, v)| (k.clone(), v.clone())));
                Ok(())
            }
            Step::Callback { name } => host.call(name, self, repo, ctx),
        }
    }
}
