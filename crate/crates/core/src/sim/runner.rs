use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::cinema::{DOMAIN, PRICE};
use super::scenario::{build_world, ClassOp, Scenario, World};
use super::SimError;
use crate::contract::{AgreementDocument, Bindings, TermValue};
use crate::decimal::Decimal;
use crate::marketplace::{
    run_pipeline, search_and_book, AgreementStore, ExecutionEngine, IndexEntry, MarketError, ScoreSelector, BOOK,
};
use crate::protocol::{DispatchMode, MultilateralOutcome, Transcript};

pub const TRANSCRIPT_FILE: &str = "transcript.jsonl";
pub const TRACE_FILE: &str = "trace.jsonl";
pub const RUN_FILE: &str = "run.json";
pub const STORE_DIR: &str = "store";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    /// `confirmed` or `no_agreement`.
    pub outcome: String,
    /// Why no agreement was reached, when none was.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub confirmed: Vec<String>,
    pub provider_id: Option<String>,
    pub iterations: u32,
    pub final_price: Option<Decimal>,
    /// Consumer score of the confirmed agreement; 0 without one.
    pub utility: f64,
    /// Lowest price among the agreements reached in each iteration.
    pub per_iteration_best: Vec<Option<Decimal>>,
    pub provisional: usize,
    pub cancellations: usize,
    pub stored_agreements: usize,
    pub results: Bindings,
    pub messages: usize,
}

impl RunSummary {
    pub fn is_confirmed(&self) -> bool {
        self.outcome == "confirmed"
    }
}

/// Contents of `run.json`: enough to reproduce the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub scenario: Scenario,
    pub seed: u64,
    pub summary: RunSummary,
}

pub struct RunReport {
    pub summary: RunSummary,
    pub transcript: Transcript,
    pub trace_jsonl: String,
    pub store_entries: Vec<IndexEntry>,
    pub negotiation: Option<MultilateralOutcome>,
    pub world: World,
    pub transcript_path: Option<PathBuf>,
    pub store_path: Option<PathBuf>,
}

/// Whether a pipeline error means "no deal" rather than a broken setup.
fn is_no_agreement(e: &MarketError) -> bool {
    matches!(
        e,
        MarketError::NoTemplatesSurviveFilter
            | MarketError::SelectionEmpty
            | MarketError::NegotiationFailed(_)
            | MarketError::NoShowsFound
            | MarketError::BookingRejected(_)
            | MarketError::ExecutionRejected { .. }
    )
}

fn price_of(a: &AgreementDocument) -> Option<Decimal> {
    a.bindings.get(PRICE).and_then(TermValue::as_number)
}

/// Runs the scenario's class operation. With `out_dir` the transcript,
/// trace, store and `run.json` are written there.
pub fn run_scenario(s: &Scenario, out_dir: Option<&Path>) -> Result<RunReport, SimError> {
    let world = build_world(s)?;
    let store = match out_dir {
        Some(dir) => {
            let store_dir = dir.join(STORE_DIR);
            if store_dir.exists() {
                fs::remove_dir_all(&store_dir)?;
            }
            AgreementStore::at(store_dir)?
        }
        None => AgreementStore::in_memory(),
    };
    let mode = if s.deterministic_mode {
        DispatchMode::Deterministic
    } else {
        DispatchMode::Concurrent
    };
    let mut engine = ExecutionEngine::new(s.limits, mode, store);
    let mut strategy = s.consumer_strategy();

    let result = match s.class_op {
        ClassOp::Book => {
            let mut selector = ScoreSelector::new(s.strategy.model.clone());
            run_pipeline(
                &world.repo,
                DOMAIN,
                BOOK,
                &world.domain_offer,
                &mut selector,
                &mut strategy,
                &mut engine,
            )
            .map(|r| (r.domain_agreement, r.results, Some(r.negotiation)))
        }
        ClassOp::SearchAndBook => search_and_book(&world.repo, DOMAIN, &world.domain_offer, &mut strategy, &mut engine)
            .map(|r| (r.domain_agreement, r.results, r.negotiation)),
    };

    let transcript = engine.negotiator.transcript.clone();
    let (agreement, results, negotiation, reason) = match result {
        Ok((d, results, n)) => (Some(d), results, n, None),
        Err(e) if is_no_agreement(&e) => (None, Bindings::new(), None, Some(e.to_string())),
        Err(e) => return Err(e.into()),
    };
    let service = agreement.as_ref().map(|d| d.service_agreement.clone());
    let utility = service
        .as_ref()
        .map(|a| s.strategy.model.score_bindings(&a.bindings).unwrap_or(0.0))
        .unwrap_or(0.0);
    let per_iteration_best = negotiation
        .as_ref()
        .map(|n| {
            n.log
                .iter()
                .map(|it| it.agreements().filter_map(|(_, a)| price_of(a)).min())
                .collect()
        })
        .unwrap_or_default();
    let summary = RunSummary {
        outcome: if service.is_some() { "confirmed" } else { "no_agreement" }.into(),
        reason,
        confirmed: agreement.iter().map(|d| d.agreement_id().to_string()).collect(),
        provider_id: service.as_ref().map(|a| a.context.provider_id.clone()),
        iterations: negotiation.as_ref().map_or(0, |n| n.iterations),
        final_price: service.as_ref().and_then(price_of),
        utility,
        per_iteration_best,
        provisional: negotiation.as_ref().map_or(0, |n| n.provisional),
        cancellations: transcript.cancellations(),
        stored_agreements: engine.store.len(),
        results,
        messages: transcript.len(),
    };
    let store_entries: Vec<IndexEntry> = engine.store.entries().cloned().collect();
    let trace_jsonl = engine.trace_jsonl();

    let (transcript_path, store_path) = match out_dir {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let tp = dir.join(TRANSCRIPT_FILE);
            fs::write(&tp, transcript.to_jsonl())?;
            fs::write(dir.join(TRACE_FILE), &trace_jsonl)?;
            let record = RunRecord {
                scenario: s.clone(),
                seed: s.seed,
                summary: summary.clone(),
            };
            let json = serde_json::to_string_pretty(&record).expect("run record serialization cannot fail");
            fs::write(dir.join(RUN_FILE), json + "\n")?;
            (Some(tp), Some(dir.join(STORE_DIR)))
        }
        None => (None, None),
    };

    Ok(RunReport {
        summary,
        transcript,
        trace_jsonl,
        store_entries,
        negotiation,
        world,
        transcript_path,
        store_path,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReplayReport {
    pub identical: bool,
    pub records: usize,
    /// 1-based line of the first difference.
    pub first_difference: Option<usize>,
}

/// Re-runs the scenario recorded next to `transcript` (in `run.json`) and
/// compares the fresh transcript with the stored one byte for byte.
pub fn replay(transcript: &Path) -> Result<ReplayReport, SimError> {
    let stored = fs::read_to_string(transcript)?;
    let dir = transcript.parent().unwrap_or(Path::new("."));
    let record: RunRecord = serde_json::from_str(&fs::read_to_string(dir.join(RUN_FILE))?)
        .map_err(|e| SimError::Parse(format!("{RUN_FILE}: {e}")))?;
    let scenario = record.scenario.with_seed(record.seed);
    let fresh = run_scenario(&scenario, None)?.transcript.to_jsonl();
    let first_difference = if stored == fresh {
        None
    } else {
        let mut a = stored.lines();
        let mut b = fresh.lines();
        let mut line = 1;
        loop {
            match (a.next(), b.next()) {
                (Some(x), Some(y)) if x == y => line += 1,
                _ => break Some(line),
            }
        }
    };
    Ok(ReplayReport {
        identical: first_difference.is_none(),
        records: stored.lines().count(),
        first_difference,
    })
}
