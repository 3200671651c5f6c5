//! Exhaustive grid search over what each provider would sign. Involves no
//! protocol, so it bounds what any negotiation can achieve.

use serde::{Deserialize, Serialize};

use super::cinema::{cinema_schema, requested_seats, ShowSpec, MOVIE_TITLE, PRICE};
use super::scenario::{provider_properties, Scenario};
use super::SimError;
use crate::aggregation::map_to_service_term;
use crate::contract::{check_bindings, generate_service_template, Bindings, TermValue};
use crate::decimal::Decimal;
use crate::marketplace::ITEM_KEY;
use crate::strategy::SCORE_TIE_EPSILON;

/// Upper bound on grid points per provider and show.
pub const MAX_GRID_POINTS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleOutcome {
    pub best_utility: f64,
    pub best_provider: String,
    pub best_bindings: Bindings,
    /// Grid points that passed admissibility and acceptance.
    pub feasible_points: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("grid step must be positive")]
    InvalidStep,
    #[error("term `{0}` has no bounded range to enumerate")]
    Unbounded(String),
    #[error("grid has more than {MAX_GRID_POINTS} points")]
    GridTooLarge,
    #[error("no grid point is admissible and acceptable")]
    GridTooCoarse,
}

fn grid(lo: Decimal, hi: Decimal, step: Decimal) -> Vec<Decimal> {
    let mut out = Vec::new();
    let mut x = lo;
    while x <= hi {
        out.push(x);
        x = x + step;
    }
    out
}

/// Whether the provider's policy signs `bindings` for `show`.
fn acceptable(aware: bool, model: &super::cinema::ProviderModel, show: &ShowSpec, bindings: &Bindings) -> bool {
    if aware {
        return model.would_accept(show, bindings);
    }
    let seats = requested_seats(bindings);
    let price = bindings.get(PRICE).and_then(TermValue::as_number);
    (1..=show.seats_free as i64).contains(&seats) && price.is_some_and(|p| p >= show.list_price)
}

pub fn oracle_best_outcome(s: &Scenario, grid_step: Decimal) -> Result<OracleOutcome, SimError> {
    s.validate()?;
    if grid_step <= Decimal::ZERO {
        return Err(OracleError::InvalidStep.into());
    }
    let schema = cinema_schema();
    let title = s.domain_offer.get(MOVIE_TITLE).and_then(TermValue::as_text);
    let mut best: Option<OracleOutcome> = None;
    let mut feasible = 0;

    for model in &s.providers {
        let template = generate_service_template(&provider_properties(model)?, &schema)?;
        let mut base = Bindings::new();
        for (key, value) in &s.domain_offer {
            if let Some(term) = map_to_service_term(&template, key) {
                base.insert(term.id.clone(), value.clone());
            }
        }
        // Every scored numeric term is negotiable and enumerated.
        let mut axes: Vec<(String, Vec<Decimal>)> = Vec::new();
        for t in &s.strategy.model.terms {
            let Some(def) = template.term(&t.term_id) else {
                continue;
            };
            if def.value_domain.numeric_bounds().is_none() {
                continue;
            }
            let (lo, hi) = template
                .permissible_range(&t.term_id)
                .ok_or_else(|| OracleError::Unbounded(t.term_id.clone()))?;
            axes.push((t.term_id.clone(), grid(lo, hi, grid_step)));
        }
        let points = axes.iter().try_fold(1usize, |n, (_, g)| n.checked_mul(g.len().max(1)));
        if points.is_none_or(|n| n > MAX_GRID_POINTS) {
            return Err(OracleError::GridTooLarge.into());
        }

        for show in model
            .inventory
            .iter()
            .filter(|sh| title.is_none_or(|t| t == sh.movie_title))
        {
            let mut idx = vec![0usize; axes.len()];
            loop {
                let mut b = base.clone();
                b.insert(ITEM_KEY.into(), TermValue::string(&show.show_id));
                for ((term, g), &i) in axes.iter().zip(&idx) {
                    if let Some(x) = g.get(i) {
                        let v = template
                            .term(term)
                            .map(|d| d.value_domain.value_from_number(*x))
                            .unwrap_or(TermValue::Decimal(*x));
                        b.insert(term.clone(), v);
                    }
                }
                if check_bindings(&template, &b).is_empty() && acceptable(model.wsag_aware, model, show, &b) {
                    feasible += 1;
                    let u = s.strategy.model.score_bindings(&b)?;
                    if best.as_ref().is_none_or(|o| u > o.best_utility + SCORE_TIE_EPSILON) {
                        best = Some(OracleOutcome {
                            best_utility: u,
                            best_provider: model.provider_id.clone(),
                            best_bindings: b,
                            feasible_points: 0,
                        });
                    }
                }
                // Odometer over the axes.
                let mut k = 0;
                while k < idx.len() {
                    idx[k] += 1;
                    if idx[k] < axes[k].1.len() {
                        break;
                    }
                    idx[k] = 0;
                    k += 1;
                }
                if k == idx.len() {
                    break;
                }
            }
        }
    }
    let mut out = best.ok_or(OracleError::GridTooCoarse)?;
    out.feasible_points = feasible;
    Ok(out)
}
