//! Deterministic cinema marketplace simulator: provider models, scenarios,
//! the runner, and a brute-force oracle.

mod cinema;
mod native;
mod oracle;
mod runner;
mod scenario;

pub use cinema::{
    cinema_schema, price_ceiling, ProviderModel, ShowSpec, SimCinemaProvider, DOMAIN, MAX_SEATS_PER_BOOKING,
    MOVIE_TITLE, PRICE, SEATS_BOOKED, SEAT_COUNT, TICKET_ID,
};
pub use native::{adapt_unaware_provider, BoxOffice, NativeCinemaApi, UnawareAdapter};
pub use oracle::{oracle_best_outcome, OracleError, OracleOutcome, MAX_GRID_POINTS};
pub use runner::{
    replay, run_scenario, ReplayReport, RunRecord, RunReport, RunSummary, RUN_FILE, STORE_DIR, TRACE_FILE,
    TRANSCRIPT_FILE,
};
pub use scenario::{build_world, ClassOp, FieldError, ProviderHandle, Scenario, World};

use crate::contract::ContractError;
use crate::marketplace::MarketError;
use crate::strategy::StrategyError;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("scenario invalid: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    ScenarioInvalid(Vec<FieldError>),
    #[error("cannot parse: {0}")]
    Parse(String),
    #[error("unknown bundled scenario `{0}`")]
    UnknownScenario(String),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error(transparent)]
    Contract(#[from] ContractError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

const BUNDLED: &[(&str, &str)] = &[
    (
        "cinema-3p-icnip",
        include_str!("../../../../scenarios/cinema-3p-icnip.json"),
    ),
    (
        "cinema-1p-cnip",
        include_str!("../../../../scenarios/cinema-1p-cnip.json"),
    ),
    ("cinema-ao", include_str!("../../../../scenarios/cinema-ao.json")),
    (
        "cinema-search-book",
        include_str!("../../../../scenarios/cinema-search-book.json"),
    ),
    (
        "cinema-unaware-cnip",
        include_str!("../../../../scenarios/cinema-unaware-cnip.json"),
    ),
];

/// Names of the scenarios shipped with the crate.
pub fn bundled_names() -> Vec<&'static str> {
    BUNDLED.iter().map(|(n, _)| *n).collect()
}

pub fn bundled_scenario(name: &str) -> Result<Scenario, SimError> {
    let (_, json) = BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| SimError::UnknownScenario(name.into()))?;
    Scenario::from_json(json)
}

pub fn bundled_scenarios() -> Vec<Scenario> {
    bundled_names()
        .into_iter()
        .map(|n| bundled_scenario(n).expect("bundled scenarios parse"))
        .collect()
}
