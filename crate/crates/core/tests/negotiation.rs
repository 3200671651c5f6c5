mod common;

use std::sync::{Arc, Mutex};

use common::{dec, price_offer, price_template, ThresholdProvider};
use indexmap::IndexMap;
use proptest::prelude::*;
use wsag_market::contract::TermValue;
use wsag_market::protocol::{
    share, DispatchMode, Limits, MsgType, MultilateralEnd, Negotiator, OfferHistory, Outcome, ProtocolKind,
    ProviderPort, ProviderReply, SharedProvider, Transcript,
};
use wsag_market::strategy::{
    ScoringModel, StrategyConfig, Tactic, ThresholdSchedule, ValueScoringStrategy, WeightSchedule,
};

fn consumer(confirm: f64, undercut: &str) -> ValueScoringStrategy {
    ValueScoringStrategy::new(
        StrategyConfig {
            model: ScoringModel::linear("price", dec("0"), dec("20"), false),
            tactics: vec![],
            schedule: WeightSchedule::Uniform,
            accept_threshold: ThresholdSchedule::default(),
            confirm_threshold: confirm,
            undercut: [("price".to_string(), dec(undercut))].into(),
        },
        10,
    )
}

struct Silent(ThresholdProvider);

impl ProviderPort for Silent {
    fn provider_id(&self) -> &str {
        self.0.provider_id()
    }
    fn protocol(&self) -> ProtocolKind {
        ProtocolKind::Cnip
    }
    fn get_template(&self) -> Result<wsag_market::contract::AgreementDocument, wsag_market::protocol::ProviderError> {
        self.0.get_template()
    }
    fn handle_offer(&mut self, _: &wsag_market::contract::AgreementDocument, _: u32) -> ProviderReply {
        ProviderReply::Silent
    }
    fn cancel(&mut self, _: &wsag_market::contract::AgreementDocument) {}
    fn execute(
        &mut self,
        _: &wsag_market::contract::AgreementDocument,
        _: &wsag_market::contract::Bindings,
    ) -> Result<wsag_market::contract::Bindings, wsag_market::protocol::ProviderError> {
        Err(wsag_market::protocol::ProviderError::Unavailable("silent".into()))
    }
}

#[test]
fn cnip_accept_reject_and_silence() {
    let t = price_template("p", dec("5"), dec("20"));
    let p = share(ThresholdProvider::new("p", ProtocolKind::Cnip, t.clone(), dec("9")));
    let mut n = Negotiator::new();
    let limits = Limits::default();

    let s = n.run_cnip(&price_offer(&t, dec("9")), &p, &limits).unwrap();
    let agr = s.outcome.agreement().expect("agreed at reserve");
    assert_eq!(agr.bindings["price"], TermValue::Decimal(dec("9")));

    let s = n.run_cnip(&price_offer(&t, dec("8.99")), &p, &limits).unwrap();
    assert_eq!(s.outcome, Outcome::Rejected);

    let silent = share(Silent(ThresholdProvider::new(
        "q",
        ProtocolKind::Cnip,
        t.clone(),
        dec("0"),
    )));
    let s = n.run_cnip(&price_offer(&t, dec("9")), &silent, &limits).unwrap();
    assert_eq!(s.outcome, Outcome::Expired);

    // Every message took one tick.
    let ticks: Vec<_> = n.transcript.records().iter().map(|r| r.tick).collect();
    assert!(ticks.windows(2).all(|w| w[0] < w[1]));
    assert!(n.transcript.count(MsgType::Accepted) + n.transcript.count(MsgType::Signed) > 0);
}

#[test]
fn transcript_survives_jsonl() {
    let t = price_template("p", dec("5"), dec("20"));
    let p = share(ThresholdProvider::new(
        "p",
        ProtocolKind::AlternatingOffers,
        t.clone(),
        dec("9"),
    ));
    let mut n = Negotiator::new();
    let mut strategy = consumer(0.5, "0.5");
    strategy.config.tactics = vec![Tactic::time_dependent("price", dec("6"), dec("12"), 1.0)];
    n.run_alternating_offers(&price_offer(&t, dec("6")), &p, &strategy, &Limits::default())
        .unwrap();
    let text = n.transcript.to_jsonl();
    assert_eq!(Transcript::from_jsonl(&text).unwrap(), n.transcript);
    assert_eq!(text.lines().count(), n.transcript.len());
}

type Market = (
    IndexMap<String, wsag_market::contract::AgreementDocument>,
    IndexMap<String, SharedProvider>,
    Vec<Arc<Mutex<ThresholdProvider>>>,
);

fn market(reserves: &[&str]) -> Market {
    let mut offers = IndexMap::new();
    let mut ports = IndexMap::new();
    let mut raw = Vec::new();
    for (i, r) in reserves.iter().enumerate() {
        let id = format!("p{i}");
        let t = price_template(&id, dec("5"), dec("20"));
        offers.insert(id.clone(), price_offer(&t, dec("12")));
        let p = Arc::new(Mutex::new(ThresholdProvider::new(&id, ProtocolKind::Cnip, t, dec(r))));
        ports.insert(id, p.clone() as SharedProvider);
        raw.push(p);
    }
    (offers, ports, raw)
}

#[test]
fn iterated_cnip_undercuts_until_confirmed() {
    let (offers, ports, raw) = market(&["9", "11", "13"]);
    let mut strategy = consumer(0.5, "1");
    let mut n = Negotiator::new();
    let out = n
        .run_iterated_cnip(
            &offers,
            &ports,
            &mut strategy,
            &Limits::default(),
            DispatchMode::Deterministic,
        )
        .unwrap();
    assert_eq!(out.end, MultilateralEnd::Confirmed);
    let winner = &out.agreements[0];
    assert_eq!(winner.context.provider_id, "p0");
    assert_eq!(winner.bindings["price"], TermValue::Decimal(dec("10")));
    assert_eq!(out.cancelled.len(), out.provisional - 1);
    assert_eq!(n.transcript.cancellations(), out.cancelled.len());
    let cancelled_at_providers: usize = raw.iter().map(|p| p.lock().unwrap().cancelled.len()).sum();
    assert_eq!(cancelled_at_providers, out.cancelled.len());
    assert!(!out.cancelled.contains(&winner.context.agreement_id));
    // The most expensive provider never signed.
    assert_eq!(raw[2].lock().unwrap().issued, 0);
}

#[test]
fn concurrent_dispatch_matches_sequential() {
    let run = |mode| {
        let (offers, ports, _) = market(&["9", "11", "10"]);
        let mut strategy = consumer(0.55, "0.5");
        let mut n = Negotiator::new();
        let out = n
            .run_iterated_cnip(&offers, &ports, &mut strategy, &Limits::default(), mode)
            .unwrap();
        (out.agreements, out.cancelled, out.iterations, n.transcript.len())
    };
    assert_eq!(run(DispatchMode::Deterministic), run(DispatchMode::Concurrent));
}

#[test]
fn iteration_limit_ends_without_agreement() {
    let (offers, ports, _) = market(&["11"]);
    let mut strategy = consumer(0.99, "0.1");
    let limits = Limits {
        iteration_limit: 3,
        ..Limits::default()
    };
    let mut n = Negotiator::new();
    let out = n
        .run_iterated_cnip(&offers, &ports, &mut strategy, &limits, DispatchMode::Deterministic)
        .unwrap();
    assert!(out.agreements.is_empty());
    assert!(out.iterations <= 3);
    assert!(matches!(
        out.end,
        MultilateralEnd::IterationLimit | MultilateralEnd::Quit | MultilateralEnd::Exhausted
    ));
}

proptest! {
    #[test]
    fn time_dependent_tactic_stays_between_start_and_reserve(
        start in 0i64..2000, reserve in 0i64..2000, beta in 0.1f64..5.0, deadline in 1u32..30,
    ) {
        let (s, r) = (wsag_market::decimal::Decimal::from_cents(start), wsag_market::decimal::Decimal::from_cents(reserve));
        let tactic = Tactic::time_dependent("price", s, r, beta);
        let h = OfferHistory { deadline_round: deadline, entries: vec![] };
        let mut prev = s;
        for round in 0..=deadline {
            let v = tactic.value(round, deadline, &h).unwrap();
            prop_assert!(v >= s.min(r) && v <= s.max(r));
            // Concession never reverses.
            let forward = if s <= r { v >= prev } else { v <= prev };
            prop_assert!(forward);
            prev = v;
        }
        prop_assert_eq!(tactic.value(deadline, deadline, &h), Some(r));
    }

    #[test]
    fn linear_threshold_moves_monotonically(start in 0.0f64..1.0, end in 0.0f64..1.0, deadline in 1u32..50) {
        let t = ThresholdSchedule::Linear { start, end };
        let vals: Vec<f64> = (0..=deadline).map(|r| t.at(r, deadline)).collect();
        prop_assert!((vals[0] - start).abs() < 1e-12 && (vals[deadline as usize] - end).abs() < 1e-12);
        let monotone = vals.windows(2).all(|w| if start >= end { w[1] <= w[0] + 1e-12 } else { w[1] + 1e-12 >= w[0] });
        prop_assert!(monotone);
    }
}
