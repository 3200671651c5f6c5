//! Passive repository of domain operations plus the consumer-side runtime
//! that fetches and runs them.

mod engine;
mod pipeline;
mod repository;
mod store;

pub use engine::{
    CallbackHost, ExecContext, ExecutionEngine, Found, NoCallbacks, OpLevel, OperationDef, Phase, PortCall, Step,
    TraceEvent, TraceKind,
};
pub use pipeline::{
    binding_int, book, build_domain_agreement, run_pipeline, search_and_book, service_offer, standard_class_operations,
    standard_instance_operations, BookInput, PipelineResult, ScoreSelector, SearchBookResult, SelectionCallback,
    TemplateInfo, BOOK, INSTANCE_BOOK, INSTANCE_SEARCH, ITEM_KEY, SEARCH, SEARCH_AND_BOOK,
};
pub use repository::{DomainEntry, ProviderEntry, Repository};
pub use store::{AgreementStore, DomainAgreement, IndexEntry};

use crate::aggregation::AggregationError;
use crate::contract::ContractError;
use crate::protocol::NegotiationError;

#[derive(Debug, thiserror::Error)]
pub enum MarketError {
    #[error("unknown domain `{0}`")]
    UnknownDomain(String),
    #[error("domain `{0}` is already registered")]
    DuplicateDomain(String),
    #[error("provider lacks required property `{0}`")]
    MissingProperty(String),
    #[error("provider id `{0}` is already registered")]
    DuplicateProviderId(String),
    #[error("unknown provider `{0}`")]
    UnknownProvider(String),
    #[error("unknown operation `{0}`")]
    UnknownOperation(String),
    #[error("no callback named `{0}` was injected")]
    UnknownCallback(String),
    #[error("invalid operation: {0}")]
    InvalidOperation(String),
    #[error("domain offer not admissible: {0}")]
    InvalidDomainOffer(String),
    #[error("no service template survives the domain offer")]
    NoTemplatesSurviveFilter,
    #[error("selection kept no template")]
    SelectionEmpty,
    #[error("negotiation failed: {0}")]
    NegotiationFailed(String),
    #[error("provider `{provider_id}` refused an authorized call: {reason}")]
    ExecutionRejected { provider_id: String, reason: String },
    #[error("search found no shows")]
    NoShowsFound,
    #[error("booking rejected: {0}")]
    BookingRejected(String),
    #[error(transparent)]
    Contract(#[from] ContractError),
    #[error(transparent)]
    Aggregation(#[from] AggregationError),
    #[error(transparent)]
    Negotiation(#[from] NegotiationError),
    #[error("agreement store: {0}")]
    Store(#[from] std::io::Error),
}
