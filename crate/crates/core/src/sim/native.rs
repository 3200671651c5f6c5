//! Cinemas that know nothing about agreements, and the adapter that puts a
//! contract-aware port in front of them.

use std::collections::BTreeMap;

use crate::contract::{
    accept_offer, generate_service_template, AgreementDocument, Bindings, ContractError, ProviderProperties, TermValue,
    ValueDomain,
};
use crate::decimal::Decimal;
use crate::marketplace::ITEM_KEY;
use crate::protocol::{ProtocolKind, ProviderError, ProviderPort, ProviderReply};

use super::cinema::{
    cinema_schema, price_ceiling, requested_seats, ShowSpec, DOMAIN, MAX_SEATS_PER_BOOKING, MOVIE_TITLE, PRICE,
    SEATS_BOOKED, SEAT_COUNT, TICKET_ID,
};

/// Native box office interface: fixed quotes, seat holds, confirmation.
pub trait NativeCinemaApi: Send {
    fn shows(&self) -> Vec<ShowSpec>;
    fn quote(&self, show_id: &str) -> Option<Decimal>;
    fn hold(&mut self, show_id: &str, seats: u32) -> Result<String, String>;
    fn confirm(&mut self, hold_id: &str) -> Result<String, String>;
    fn release(&mut self, hold_id: &str);
}

/// In-memory box office selling every show at its list price.
#[derive(Debug, Clone)]
pub struct BoxOffice {
    shows: Vec<ShowSpec>,
    free: BTreeMap<String, u32>,
    holds: BTreeMap<String, (String, u32)>,
    next_hold: u64,
    tickets: u64,
}

impl BoxOffice {
    pub fn new(shows: Vec<ShowSpec>) -> Self {
        let free = shows.iter().map(|s| (s.show_id.clone(), s.seats_free)).collect();
        BoxOffice {
            shows,
            free,
            holds: BTreeMap::new(),
            next_hold: 0,
            tickets: 0,
        }
    }

    pub fn seats_free(&self, show_id: &str) -> Option<u32> {
        self.free.get(show_id).copied()
    }

    pub fn open_holds(&self) -> usize {
        self.holds.len()
    }
}

impl NativeCinemaApi for BoxOffice {
    fn shows(&self) -> Vec<ShowSpec> {
        self.shows.clone()
    }

    fn quote(&self, show_id: &str) -> Option<Decimal> {
        self.shows.iter().find(|s| s.show_id == show_id).map(|s| s.list_price)
    }

    fn hold(&mut self, show_id: &str, seats: u32) -> Result<String, String> {
        let free = self.free.get(show_id).ok_or_else(|| format!("no show `{show_id}`"))?;
        let held: u32 = self.holds.values().filter(|(s, _)| s == show_id).map(|(_, n)| n).sum();
        if seats == 0 || held + seats > *free {
            return Err(format!("cannot hold {seats} seats for `{show_id}`"));
        }
        self.next_hold += 1;
        let id = format!("hold-{}", self.next_hold);
        self.holds.insert(id.clone(), (show_id.to_string(), seats));
        Ok(id)
    }

    fn confirm(&mut self, hold_id: &str) -> Result<String, String> {
        let (show, seats) = self
            .holds
            .remove(hold_id)
            .ok_or_else(|| format!("unknown hold `{hold_id}`"))?;
        let free = self.free.get_mut(&show).expect("held show exists");
        *free -= seats;
        self.tickets += 1;
        Ok(format!("{show}-T{}", self.tickets))
    }

    fn release(&mut self, hold_id: &str) {
        self.holds.remove(hold_id);
    }
}

/// Contract-aware port in front of a native box office. Speaks only the
/// take-it-or-leave-it protocol.
pub struct UnawareAdapter<N> {
    provider_id: String,
    properties: ProviderProperties,
    native: N,
    template: AgreementDocument,
    /// Agreement id to (hold id, seats).
    holds: BTreeMap<String, (String, u32)>,
    issued: u64,
}

impl<N: NativeCinemaApi> UnawareAdapter<N> {
    pub fn native(&self) -> &N {
        &self.native
    }

    pub fn properties(&self) -> &ProviderProperties {
        &self.properties
    }
}

/// Wraps a native box office. The synthesized template pins the price to
/// the quoted range, so a single-quote cinema yields `price within(q, q)`.
pub fn adapt_unaware_provider<N: NativeCinemaApi>(
    provider_id: &str,
    values: BTreeMap<String, TermValue>,
    native: N,
) -> Result<UnawareAdapter<N>, ContractError> {
    let quotes: Vec<Decimal> = native.shows().iter().filter_map(|s| native.quote(&s.show_id)).collect();
    let (Some(lo), Some(hi)) = (quotes.iter().min().copied(), quotes.iter().max().copied()) else {
        return Err(ContractError::InvalidDocument(format!(
            "`{provider_id}` quotes no show"
        )));
    };
    if hi > price_ceiling() {
        return Err(ContractError::InvalidRange(PRICE.into()));
    }
    let seats = ValueDomain::IntegerRange {
        min: 1,
        max: MAX_SEATS_PER_BOOKING,
    };
    let props = ProviderProperties {
        provider_id: provider_id.into(),
        domain_id: DOMAIN.into(),
        values,
        term_ranges: BTreeMap::from([
            (PRICE.to_string(), ValueDomain::decimal_range(lo, hi)),
            (SEAT_COUNT.to_string(), seats.clone()),
            (SEATS_BOOKED.to_string(), seats),
        ]),
    };
    let template = generate_service_template(&props, &cinema_schema())?;
    Ok(UnawareAdapter {
        provider_id: provider_id.into(),
        properties: props,
        native,
        template,
        holds: BTreeMap::new(),
        issued: 0,
    })
}

impl<N: NativeCinemaApi> ProviderPort for UnawareAdapter<N> {
    fn provider_id(&self) -> &str {
        &self.provider_id
    }

    fn protocol(&self) -> ProtocolKind {
        ProtocolKind::Cnip
    }

    fn get_template(&self) -> Result<AgreementDocument, ProviderError> {
        Ok(self.template.clone())
    }

    fn handle_offer(&mut self, offer: &AgreementDocument, _round: u32) -> ProviderReply {
        let title = offer.bindings.get(MOVIE_TITLE).and_then(TermValue::as_text);
        let seats = requested_seats(&offer.bindings);
        let shows = self.native.shows();
        let show = match offer.bindings.get(ITEM_KEY).and_then(TermValue::as_text) {
            Some(id) => shows.iter().find(|s| s.show_id == id),
            None => shows.iter().find(|s| title.is_none_or(|t| t == s.movie_title)),
        };
        let Some(show) = show else {
            return ProviderReply::Reject {
                reason: "no matching show".into(),
            };
        };
        let (Some(quote), Some(price)) = (
            self.native.quote(&show.show_id),
            offer.bindings.get(PRICE).and_then(TermValue::as_number),
        ) else {
            return ProviderReply::Reject {
                reason: "no quote or no price".into(),
            };
        };
        if price < quote || !(1..=MAX_SEATS_PER_BOOKING).contains(&seats) {
            return ProviderReply::Reject {
                reason: format!("offer {price} below quote {quote}"),
            };
        }
        let hold = match self.native.hold(&show.show_id, seats as u32) {
            Ok(h) => h,
            Err(e) => return ProviderReply::Reject { reason: e },
        };
        self.issued += 1;
        let id = format!("{}-agr-{}", self.provider_id, self.issued);
        match accept_offer(offer, &id, &self.provider_id) {
            Ok(agr) => {
                self.holds.insert(id, (hold, seats as u32));
                ProviderReply::Accept(agr)
            }
            Err(e) => {
                self.native.release(&hold);
                ProviderReply::Reject { reason: e.to_string() }
            }
        }
    }

    fn counter_template(&mut self, _iteration: u32) -> Option<AgreementDocument> {
        Some(self.template.clone())
    }

    fn cancel(&mut self, agreement: &AgreementDocument) {
        if let Some((hold, _)) = self.holds.remove(&agreement.context.agreement_id) {
            self.native.release(&hold);
        }
    }

    fn execute(&mut self, agreement: &AgreementDocument, _input: &Bindings) -> Result<Bindings, ProviderError> {
        let id = &agreement.context.agreement_id;
        let (hold, seats) = self
            .holds
            .remove(id)
            .ok_or_else(|| ProviderError::Refused(format!("unknown or used agreement `{id}`")))?;
        let ticket = self.native.confirm(&hold).map_err(ProviderError::Native)?;
        Ok(Bindings::from([
            (TICKET_ID.to_string(), TermValue::string(ticket)),
            (SEATS_BOOKED.to_string(), TermValue::Integer(seats as i64)),
        ]))
    }

    fn search(&self, query: &Bindings) -> Vec<Bindings> {
        let title = query.get(MOVIE_TITLE).and_then(TermValue::as_text);
        self.native
            .shows()
            .into_iter()
            .filter(|s| title.is_none_or(|t| t == s.movie_title))
            .map(|s| {
                Bindings::from([
                    (ITEM_KEY.to_string(), TermValue::string(&s.show_id)),
                    (MOVIE_TITLE.to_string(), TermValue::string(&s.movie_title)),
                    ("start_tick".to_string(), TermValue::Integer(s.start_tick as i64)),
                    ("list_price".to_string(), TermValue::Decimal(s.list_price)),
                ])
            })
            .collect()
    }
}
