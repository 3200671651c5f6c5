mod common;

use common::dec;
use wsag_market::contract::{fill_template, Bindings, TermValue};
use wsag_market::protocol::{ProviderPort, ProviderReply};
use wsag_market::sim::{
    adapt_unaware_provider, bundled_names, bundled_scenario, oracle_best_outcome, run_scenario, BoxOffice,
    NativeCinemaApi, OracleError, Scenario, SimError, MOVIE_TITLE, PRICE, SEAT_COUNT,
};

fn offer_bindings(price: &str) -> Bindings {
    Bindings::from([
        (MOVIE_TITLE.to_string(), TermValue::string("Metropolis")),
        (SEAT_COUNT.to_string(), TermValue::Integer(2)),
        (PRICE.to_string(), TermValue::Decimal(dec(price))),
    ])
}

#[test]
fn adapter_pins_price_to_the_quote_and_holds_on_accept() {
    let s = bundled_scenario("cinema-unaware-cnip").unwrap();
    let kino = &s.providers[0];
    let mut a = adapt_unaware_provider(
        &kino.provider_id,
        kino.properties.clone(),
        BoxOffice::new(kino.inventory.clone()),
    )
    .unwrap();
    let template = a.get_template().unwrap();
    assert_eq!(template.permissible_range(PRICE), Some((dec("9"), dec("9"))));

    let offer = fill_template(&template, &offer_bindings("9")).unwrap();
    let ProviderReply::Accept(agr) = a.handle_offer(&offer, 0) else {
        panic!("quote-priced offer must be signed");
    };
    assert_eq!(a.native().open_holds(), 1);

    // An offer under the quote never reaches the box office.
    let mut low = offer.clone();
    low.bindings.insert(PRICE.into(), TermValue::Decimal(dec("8")));
    assert!(matches!(a.handle_offer(&low, 0), ProviderReply::Reject { .. }));
    assert_eq!(a.native().open_holds(), 1);

    let out = a.execute(&agr, &Bindings::new()).unwrap();
    assert!(out.contains_key("ticket_id"));
    assert_eq!(a.native().open_holds(), 0);
    assert_eq!(a.native().seats_free("kino-2000"), Some(23));
    assert!(a.execute(&agr, &Bindings::new()).is_err());
}

#[test]
fn unaware_provider_books_like_an_aware_one() {
    let s = bundled_scenario("cinema-unaware-cnip").unwrap();
    let mut only_kino = s.clone();
    only_kino.providers.truncate(1);
    let mut only_plaza = s.clone();
    only_plaza.providers.remove(0);
    let a = run_scenario(&only_kino, None).unwrap().summary;
    let b = run_scenario(&only_plaza, None).unwrap().summary;
    assert!(a.is_confirmed() && b.is_confirmed());
    assert_eq!(a.final_price, b.final_price);
    assert_eq!(a.utility, b.utility);
}

#[test]
fn oracle_finds_the_single_acceptable_price() {
    let mut s = bundled_scenario("cinema-1p-cnip").unwrap();
    let show = &mut s.providers[0].inventory[0];
    show.list_price = dec("8");
    show.reserve_price = dec("8");
    s.providers[0].price_floor = Some(dec("5"));
    let o = oracle_best_outcome(&s, dec("0.5")).unwrap();
    assert_eq!(o.best_bindings[PRICE], TermValue::Decimal(dec("8")));
    assert_eq!(o.best_provider, s.providers[0].provider_id);
}

#[test]
fn oracle_reports_an_empty_policy() {
    let mut s = bundled_scenario("cinema-1p-cnip").unwrap();
    s.providers[0].inventory[0].movie_title = "Something Else".into();
    let err = oracle_best_outcome(&s, dec("0.5")).unwrap_err();
    assert!(matches!(err, SimError::Oracle(OracleError::GridTooCoarse)), "{err:?}");
    let err = oracle_best_outcome(&s, dec("0")).unwrap_err();
    assert!(matches!(err, SimError::Oracle(OracleError::InvalidStep)), "{err:?}");
}

#[test]
fn no_overbooking_and_no_dangling_holds() {
    for name in bundled_names() {
        for seed in 0..30 {
            let s = bundled_scenario(name).unwrap().with_seed(seed);
            let r = run_scenario(&s, None).unwrap();
            for (model, (_, handle)) in s.providers.iter().zip(&r.world.providers) {
                assert_eq!(
                    handle.open_holds(),
                    0,
                    "{name} seed {seed}: {} keeps holds",
                    model.provider_id
                );
                for show in &model.inventory {
                    let free = handle.seats_free(&show.show_id).unwrap();
                    assert!(free <= show.seats_free);
                }
            }
            let booked: u32 = s
                .providers
                .iter()
                .zip(&r.world.providers)
                .flat_map(|(m, (_, h))| {
                    m.inventory
                        .iter()
                        .map(move |sh| sh.seats_free - h.seats_free(&sh.show_id).unwrap())
                })
                .sum();
            let expected = r.summary.results.get("seats_booked").and_then(TermValue::as_number);
            assert_eq!(
                booked as i64,
                expected.map_or(0, |d| d.round_to_int()),
                "{name} seed {seed}"
            );
        }
    }
}

#[test]
fn concurrent_mode_matches_deterministic_mode() {
    for name in bundled_names() {
        let s = bundled_scenario(name).unwrap();
        let mut c = s.clone();
        c.deterministic_mode = false;
        let a = run_scenario(&s, None).unwrap();
        let b = run_scenario(&c, None).unwrap();
        assert_eq!(a.summary, b.summary, "{name}");
    }
}

#[test]
fn diagnostics_name_every_bad_field() {
    let mut s: Scenario = bundled_scenario("cinema-3p-icnip").unwrap();
    s.providers[1].provider_id = s.providers[0].provider_id.clone();
    s.strategy.confirm_threshold = 1.5;
    s.limits.iteration_limit = 0;
    s.domain_offer.remove(MOVIE_TITLE);
    let fields: Vec<String> = s.diagnostics().into_iter().map(|d| d.field).collect();
    for f in [
        "providers[1].provider_id",
        "strategy.confirm_threshold",
        "limits",
        "domain_offer.movie_title",
    ] {
        assert!(fields.iter().any(|x| x == f), "missing {f} in {fields:?}");
    }
    assert!(matches!(run_scenario(&s, None), Err(SimError::ScenarioInvalid(_))));
    assert!(Scenario::from_json("{").is_err());
    assert!(matches!(bundled_scenario("nope"), Err(SimError::UnknownScenario(_))));
}

#[test]
fn scenario_json_round_trips() {
    for name in bundled_names() {
        let s = bundled_scenario(name).unwrap();
        assert_eq!(Scenario::from_json(&s.to_json_pretty()).unwrap(), s);
    }
}

#[test]
fn box_office_refuses_to_overbook() {
    let s = bundled_scenario("cinema-unaware-cnip").unwrap();
    let mut show = s.providers[0].inventory[0].clone();
    show.seats_free = 3;
    let mut bo = BoxOffice::new(vec![show]);
    let h = bo.hold("kino-2000", 2).unwrap();
    assert!(bo.hold("kino-2000", 2).is_err());
    bo.confirm(&h).unwrap();
    assert_eq!(bo.seats_free("kino-2000"), Some(1));
    assert!(bo.hold("kino-2000", 2).is_err());
}
