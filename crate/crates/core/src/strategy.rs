//! Consumer decision logic: value scoring, per-term tactics with
//! time-varying weights, and counteroffer generation.
//!
//! Scores are `f64` in `[0, 1]`; term values stay [`Decimal`] so generated
//! offers compare exactly against template constraints.

use std::collections::{BTreeMap, BTreeSet};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::contract::{AgreementDocument, Bindings, TermValue};
use crate::decimal::Decimal;
use crate::protocol::{AgreementCheck, OfferDecision, OfferHistory, StrategyPort};

/// Scores closer than this count as equal when picking a winner.
pub const SCORE_TIE_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StrategyError {
    #[error("binding for `{0}` has no score function")]
    UnscoredTerm(String),
    #[error("scored term `{0}` is not bound")]
    MissingBinding(String),
    #[error("term `{0}` has an empty permissible range")]
    EmptyPermissibleRange(String),
    #[error("term `{0}` is not a numeric term of the counter template")]
    NotNegotiable(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TacticKind {
    /// `start + (t / deadline)^beta * (reserve - start)`.
    TimeDependent {
        start: Decimal,
        reserve: Decimal,
        beta: f64,
    },
    /// Repeats the opponent's last concession, moving toward `reserve`.
    BehaviorDependent {
        reserve: Decimal,
    },
    FixedTarget {
        target: Decimal,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tactic {
    pub term_id: String,
    #[serde(flatten)]
    pub kind: TacticKind,
    /// Optional grid the emitted value is snapped to before clamping.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<Decimal>,
}

impl Tactic {
    pub fn time_dependent(term_id: &str, start: Decimal, reserve: Decimal, beta: f64) -> Self {
        Tactic {
            term_id: term_id.into(),
            kind: TacticKind::TimeDependent { start, reserve, beta },
            step: None,
        }
    }

    pub fn is_behavioral(&self) -> bool {
        matches!(self.kind, TacticKind::BehaviorDependent { .. })
    }

    /// Raw value at `round`, or `None` while the tactic has nothing to say
    /// (a behavior tactic before it has seen the opponent move).
    pub fn value(&self, round: u32, deadline: u32, history: &OfferHistory) -> Option<Decimal> {
        match &self.kind {
            TacticKind::TimeDependent { start, reserve, beta } => {
                let progress = if deadline == 0 {
                    1.0
                } else {
                    (round as f64 / deadline as f64).min(1.0)
                };
                if progress <= 0.0 {
                    return Some(*start);
                }
                if progress >= 1.0 {
                    return Some(*reserve);
                }
                let span = (*reserve - *start).to_f64();
                Some(*start + Decimal::from_f64(progress.powf(*beta) * span))
            }
            TacticKind::BehaviorDependent { reserve } => {
                let own = history.last()?.offer.bindings.get(&self.term_id)?.as_number()?;
                let positions = history.opponent_positions();
                let delta = match positions.as_slice() {
                    [.., a, b] => {
                        let (a, b) = (a.get(&self.term_id)?.as_number()?, b.get(&self.term_id)?.as_number()?);
                        (b - a).abs()
                    }
                    _ => Decimal::ZERO,
                };
                Some(if own <= *reserve {
                    (own + delta).min(*reserve)
                } else {
                    (own - delta).max(*reserve)
                })
            }
            TacticKind::FixedTarget { target } => Some(*target),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "preset", rename_all = "snake_case")]
pub enum WeightSchedule {
    #[default]
    Uniform,
    /// Behavior tactics start at 0.8 and fade to 0.2 by the deadline; the
    /// other tactics move the opposite way.
    BehaviorFirst,
    /// One trajectory per tactic, indexed by round; the last entry holds.
    Explicit { trajectories: Vec<Vec<f64>> },
}

impl WeightSchedule {
    pub fn raw_weight(&self, index: usize, tactic: &Tactic, round: u32, deadline: u32) -> f64 {
        match self {
            WeightSchedule::Uniform => 1.0,
            WeightSchedule::BehaviorFirst => {
                let p = if deadline == 0 {
                    1.0
                } else {
                    (round as f64 / deadline as f64).min(1.0)
                };
                if tactic.is_behavioral() {
                    0.8 - 0.6 * p
                } else {
                    0.2 + 0.6 * p
                }
            }
            WeightSchedule::Explicit { trajectories } => trajectories
                .get(index)
                .and_then(|t| t.get(round as usize).or(t.last()))
                .copied()
                .unwrap_or(0.0)
                .max(0.0),
        }
    }

    /// Weights of the active tactics of every term, normalized per term.
    /// Inactive tactics get weight 0.
    pub fn normalized(&self, tactics: &[Tactic], active: &[bool], round: u32, deadline: u32) -> Vec<f64> {
        let raw: Vec<f64> = tactics
            .iter()
            .enumerate()
            .map(|(i, t)| {
                if active[i] {
                    self.raw_weight(i, t, round, deadline)
                } else {
                    0.0
                }
            })
            .collect();
        let mut sums: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
        for (i, t) in tactics.iter().enumerate() {
            if active[i] {
                let e = sums.entry(t.term_id.as_str()).or_default();
                e.0 += raw[i];
                e.1 += 1;
            }
        }
        tactics
            .iter()
            .enumerate()
            .map(|(i, t)| {
                if !active[i] {
                    return 0.0;
                }
                let (sum, n) = sums[t.term_id.as_str()];
                if sum > 0.0 {
                    raw[i] / sum
                } else {
                    1.0 / n as f64
                }
            })
            .collect()
    }
}

/// Counteroffer bindings for the tactic terms: per term, the weighted mean
/// of the active tactics, snapped and clamped into the counter template's
/// permissible range.
pub fn generate_counteroffer(
    tactics: &[Tactic],
    schedule: &WeightSchedule,
    counter_template: &AgreementDocument,
    round: u32,
    history: &OfferHistory,
) -> Result<Bindings, StrategyError> {
    let deadline = history.deadline_round;
    let values: Vec<Option<Decimal>> = tactics.iter().map(|t| t.value(round, deadline, history)).collect();
    let active: Vec<bool> = values.iter().map(Option::is_some).collect();
    let weights = schedule.normalized(tactics, &active, round, deadline);

    let mut order: Vec<&str> = Vec::new();
    for t in tactics {
        if !order.contains(&t.term_id.as_str()) {
            order.push(&t.term_id);
        }
    }
    let mut out = Bindings::new();
    for term_id in order {
        let term = counter_template
            .term(term_id)
            .ok_or_else(|| StrategyError::NotNegotiable(term_id.to_string()))?;
        let (lo, hi) = counter_template
            .permissible_range(term_id)
            .ok_or_else(|| StrategyError::NotNegotiable(term_id.to_string()))?;
        if lo > hi {
            return Err(StrategyError::EmptyPermissibleRange(term_id.to_string()));
        }
        let members: Vec<usize> = (0..tactics.len())
            .filter(|&i| tactics[i].term_id == term_id && active[i])
            .collect();
        let Some(&first) = members.first() else {
            continue;
        };
        let combined: f64 = members
            .iter()
            .map(|&i| weights[i] * values[i].expect("active tactic has a value").to_f64())
            .sum();
        let mut v = if members.len() == 1 {
            values[first].expect("active tactic has a value")
        } else {
            Decimal::from_f64(combined)
        };
        if let Some(step) = tactics[first].step {
            v = v.snap(step);
        }
        let v = v.clamp(lo, hi);
        let value = term.value_domain.value_from_number(v);
        if !term.value_domain.contains(&value)
            || !counter_template
                .constraints_on(term_id)
                .all(|c| c.allowed.contains(&value))
        {
            return Err(StrategyError::EmptyPermissibleRange(term_id.to_string()));
        }
        out.insert(term_id.to_string(), value);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScoreFunction {
    /// Linear over `[min, max]`, clamped outside.
    Linear {
        min: Decimal,
        max: Decimal,
        increasing: bool,
    },
    /// Score per textual value; unlisted values score 0.
    Table { values: BTreeMap<String, f64> },
}

impl ScoreFunction {
    pub fn eval(&self, value: &TermValue) -> Option<f64> {
        match self {
            ScoreFunction::Linear { min, max, increasing } => {
                let x = value.as_number()?;
                let frac = if max > min {
                    ((x - *min).to_f64() / (*max - *min).to_f64()).clamp(0.0, 1.0)
                } else if x >= *max {
                    1.0
                } else {
                    0.0
                };
                Some(if *increasing {
                    frac
                } else if max > min {
                    1.0 - frac
                } else if x <= *min {
                    1.0
                } else {
                    0.0
                })
            }
            ScoreFunction::Table { values } => {
                let key = match value {
                    TermValue::Boolean(b) => b.to_string(),
                    other => other.as_text().map(str::to_string).unwrap_or_else(|| other.to_string()),
                };
                Some(values.get(&key).copied().unwrap_or(0.0).clamp(0.0, 1.0))
            }
        }
    }

    /// Whether a lower number scores at least as well as a higher one.
    pub fn prefers_lower(&self) -> bool {
        matches!(self, ScoreFunction::Linear { increasing: false, .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermScore {
    pub term_id: String,
    pub weight: f64,
    pub function: ScoreFunction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ScoringModel {
    pub terms: Vec<TermScore>,
    /// Bound terms that carry no utility (titles, identifiers). Any other
    /// binding without a score function is an error.
    #[serde(default)]
    pub neutral: BTreeSet<String>,
}

impl ScoringModel {
    pub fn linear(term_id: &str, min: Decimal, max: Decimal, increasing: bool) -> Self {
        ScoringModel {
            terms: vec![TermScore {
                term_id: term_id.into(),
                weight: 1.0,
                function: ScoreFunction::Linear { min, max, increasing },
            }],
            neutral: BTreeSet::new(),
        }
    }

    pub fn with_neutral<I: IntoIterator<Item = S>, S: Into<String>>(mut self, ids: I) -> Self {
        self.neutral.extend(ids.into_iter().map(Into::into));
        self
    }

    pub fn function(&self, term_id: &str) -> Option<&ScoreFunction> {
        self.terms.iter().find(|t| t.term_id == term_id).map(|t| &t.function)
    }

    pub fn normalized_weights(&self) -> Result<Vec<f64>, StrategyError> {
        if self
            .terms
            .iter()
            .any(|t| t.weight.is_nan() || t.weight < 0.0 || !t.weight.is_finite())
        {
            return Err(StrategyError::InvalidModel(
                "weights must be finite and non-negative".into(),
            ));
        }
        let total: f64 = self.terms.iter().map(|t| t.weight).sum();
        if total <= 0.0 {
            return Err(StrategyError::InvalidModel("weights sum to zero".into()));
        }
        Ok(self.terms.iter().map(|t| t.weight / total).collect())
    }

    pub fn score_bindings(&self, bindings: &Bindings) -> Result<f64, StrategyError> {
        for key in bindings.keys() {
            if self.function(key).is_none() && !self.neutral.contains(key) {
                return Err(StrategyError::UnscoredTerm(key.clone()));
            }
        }
        let weights = self.normalized_weights()?;
        let mut total = 0.0;
        for (t, w) in self.terms.iter().zip(weights) {
            let value = bindings
                .get(&t.term_id)
                .ok_or_else(|| StrategyError::MissingBinding(t.term_id.clone()))?;
            let v = t
                .function
                .eval(value)
                .ok_or_else(|| StrategyError::UnscoredTerm(t.term_id.clone()))?;
            total += w * v;
        }
        Ok(total.clamp(0.0, 1.0))
    }
}

/// Weighted sum of per-term scores of a bound offer or agreement.
pub fn score_offer(model: &ScoringModel, offer: &AgreementDocument) -> Result<f64, StrategyError> {
    model.score_bindings(&offer.bindings)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThresholdSchedule {
    Constant {
        value: f64,
    },
    /// Moves linearly from `start` at round 0 to `end` at the deadline.
    Linear {
        start: f64,
        end: f64,
    },
}

impl Default for ThresholdSchedule {
    fn default() -> Self {
        ThresholdSchedule::Constant { value: 1.0 }
    }
}

impl ThresholdSchedule {
    pub fn at(&self, round: u32, deadline: u32) -> f64 {
        match self {
            ThresholdSchedule::Constant { value } => *value,
            ThresholdSchedule::Linear { start, end } => {
                let p = if deadline == 0 {
                    1.0
                } else {
                    (round as f64 / deadline as f64).min(1.0)
                };
                start + (end - start) * p
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Accept,
    Counter,
    Quit,
}

/// Accept at or above the threshold, otherwise counter until the deadline.
/// An offer the model cannot score is treated as worthless.
pub fn decide(
    model: &ScoringModel,
    threshold: &ThresholdSchedule,
    incoming: &AgreementDocument,
    round: u32,
    deadline_round: u32,
) -> Verdict {
    let score = score_offer(model, incoming).unwrap_or(0.0);
    if score >= threshold.at(round, deadline_round) {
        Verdict::Accept
    } else if round < deadline_round {
        Verdict::Counter
    } else {
        Verdict::Quit
    }
}

/// Index of the best-scoring agreement; ties go to the earliest.
pub fn best_agreement(model: &ScoringModel, agreements: &[AgreementDocument]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, a) in agreements.iter().enumerate() {
        let s = score_offer(model, a).unwrap_or(0.0);
        if best.is_none_or(|(_, b)| s > b + SCORE_TIE_EPSILON) {
            best = Some((i, s));
        }
    }
    best
}

/// Confirms the single best agreement if it reaches the threshold;
/// otherwise asks for another iteration while the limit allows.
pub fn check_agreements(
    model: &ScoringModel,
    agreements: &[AgreementDocument],
    round: u32,
    confirm_threshold: f64,
    iteration_limit: u32,
) -> AgreementCheck {
    let Some((i, score)) = best_agreement(model, agreements) else {
        return AgreementCheck::Quit;
    };
    if score >= confirm_threshold {
        AgreementCheck::Confirm(vec![agreements[i].context.agreement_id.clone()])
    } else if round < iteration_limit {
        AgreementCheck::Counter
    } else {
        AgreementCheck::Quit
    }
}

/// Strategy configuration as it appears in scenario files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub model: ScoringModel,
    #[serde(default)]
    pub tactics: Vec<Tactic>,
    #[serde(default)]
    pub schedule: WeightSchedule,
    #[serde(default)]
    pub accept_threshold: ThresholdSchedule,
    pub confirm_threshold: f64,
    /// Multilateral counters: per term, the amount by which the next offer
    /// improves on the best value agreed so far.
    #[serde(default)]
    pub undercut: BTreeMap<String, Decimal>,
}

/// The value-scoring consumer strategy behind [`StrategyPort`].
#[derive(Debug, Clone)]
pub struct ValueScoringStrategy {
    pub config: StrategyConfig,
    pub iteration_limit: u32,
    best_seen: BTreeMap<String, Decimal>,
}

impl ValueScoringStrategy {
    pub fn new(config: StrategyConfig, iteration_limit: u32) -> Self {
        ValueScoringStrategy {
            config,
            iteration_limit,
            best_seen: BTreeMap::new(),
        }
    }

    pub fn best_seen(&self, term_id: &str) -> Option<Decimal> {
        self.best_seen.get(term_id).copied()
    }

    fn prefers_lower(&self, term_id: &str) -> bool {
        self.config
            .model
            .function(term_id)
            .is_none_or(ScoreFunction::prefers_lower)
    }

    fn observe(&mut self, agreements: &[AgreementDocument]) {
        for term in self.config.undercut.keys() {
            let lower = self.prefers_lower(term);
            for a in agreements {
                let Some(v) = a.bindings.get(term).and_then(TermValue::as_number) else {
                    continue;
                };
                let slot = self.best_seen.entry(term.clone()).or_insert(v);
                *slot = if lower { (*slot).min(v) } else { (*slot).max(v) };
            }
        }
    }

    fn undercut_bindings(&self, ct: &AgreementDocument) -> Option<Bindings> {
        let mut out = Bindings::new();
        for (term, amount) in &self.config.undercut {
            let (lo, hi) = ct.permissible_range(term)?;
            if lo > hi {
                return None;
            }
            let def = ct.term(term)?;
            let value = match self.best_seen.get(term) {
                Some(&best) if self.prefers_lower(term) => {
                    if lo > best {
                        return None;
                    }
                    (best - *amount).clamp(lo, hi)
                }
                Some(&best) => {
                    if hi < best {
                        return None;
                    }
                    (best + *amount).clamp(lo, hi)
                }
                None => continue,
            };
            out.insert(term.clone(), def.value_domain.value_from_number(value));
        }
        Some(out)
    }
}

impl StrategyPort for ValueScoringStrategy {
    fn decide(&self, round: u32, history: &OfferHistory) -> OfferDecision {
        let deadline = history.deadline_round;
        if let Some(position) = history.opponent_position() {
            let score = self.config.model.score_bindings(&position).unwrap_or(0.0);
            if score >= self.config.accept_threshold.at(round, deadline) {
                return OfferDecision::Accept;
            }
        }
        if round >= deadline {
            return OfferDecision::Quit;
        }
        let Some(ct) = history.last().and_then(|e| e.counter_template.as_ref()) else {
            return OfferDecision::Quit;
        };
        match generate_counteroffer(&self.config.tactics, &self.config.schedule, ct, round, history) {
            Ok(b) => OfferDecision::Counter(b),
            Err(_) => OfferDecision::Quit,
        }
    }

    fn check_agreements(&mut self, agreements: &[AgreementDocument], round: u32) -> AgreementCheck {
        self.observe(agreements);
        check_agreements(
            &self.config.model,
            agreements,
            round,
            self.config.confirm_threshold,
            self.iteration_limit,
        )
    }

    fn filter_and_counter(
        &mut self,
        templates: &IndexMap<String, AgreementDocument>,
        round: u32,
    ) -> IndexMap<String, Bindings> {
        let history = OfferHistory {
            deadline_round: self.iteration_limit,
            entries: Vec::new(),
        };
        templates
            .iter()
            .filter_map(|(slot, ct)| {
                let mut b = if self.config.tactics.is_empty() {
                    Bindings::new()
                } else {
                    generate_counteroffer(&self.config.tactics, &self.config.schedule, ct, round, &history).ok()?
                };
                b.extend(self.undercut_bindings(ct)?);
                Some((slot.clone(), b))
            })
            .collect()
    }
}
