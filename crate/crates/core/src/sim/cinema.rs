//! The cinema domain and a simulated, contract-aware cinema provider.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::contract::{
    accept_offer, generate_service_template, AgreementDocument, Bindings, ContractError, CreationConstraint,
    DomainSchema, ProviderProperties, TermDefinition, TermKind, TermValue, Tick, ValueDomain,
};
use crate::decimal::Decimal;
use crate::marketplace::ITEM_KEY;
use crate::protocol::{ProtocolKind, ProviderError, ProviderPort, ProviderReply};

pub const DOMAIN: &str = "cinemas";
pub const PRICE: &str = "price";
pub const SEAT_COUNT: &str = "seat_count";
pub const MOVIE_TITLE: &str = "movie_title";
pub const TICKET_ID: &str = "ticket_id";
pub const SEATS_BOOKED: &str = "seats_booked";
pub const MAX_SEATS_PER_BOOKING: i64 = 10;

pub fn price_ceiling() -> Decimal {
    Decimal::from_int(100)
}

/// Properties every cinema declares, plus the class-level input and output
/// schema of Search and Book.
pub fn cinema_schema() -> DomainSchema {
    let prop =
        |id: &str, unit: &str, d: ValueDomain| TermDefinition::new(id, TermKind::ServiceProperty, unit, d).required();
    DomainSchema {
        domain_id: DOMAIN.into(),
        properties: vec![
            prop("address", "", ValueDomain::FreeString),
            prop("seats", "seats", ValueDomain::IntegerRange { min: 1, max: 100_000 }),
            prop("smoking", "", ValueDomain::Boolean),
            prop("food_corner", "", ValueDomain::Boolean),
        ],
        inputs: vec![
            TermDefinition::new(MOVIE_TITLE, TermKind::Input, "", ValueDomain::FreeString).required(),
            TermDefinition::new(ITEM_KEY, TermKind::Input, "", ValueDomain::FreeString),
            TermDefinition::new(
                SEAT_COUNT,
                TermKind::Input,
                "seats",
                ValueDomain::IntegerRange {
                    min: 1,
                    max: MAX_SEATS_PER_BOOKING,
                },
            )
            .required(),
            TermDefinition::new(
                PRICE,
                TermKind::Input,
                "EUR",
                ValueDomain::decimal_range(Decimal::ZERO, price_ceiling()),
            )
            .required(),
        ],
        outputs: vec![
            TermDefinition::new(TICKET_ID, TermKind::Output, "", ValueDomain::FreeString),
            TermDefinition::new(
                SEATS_BOOKED,
                TermKind::Output,
                "seats",
                ValueDomain::IntegerRange {
                    min: 1,
                    max: MAX_SEATS_PER_BOOKING,
                },
            ),
        ],
        template_lifetime: 1_000_000,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShowSpec {
    pub show_id: String,
    pub movie_title: String,
    #[serde(default)]
    pub start_tick: Tick,
    pub seats_free: u32,
    pub list_price: Decimal,
    pub reserve_price: Decimal,
}

fn one() -> i64 {
    1
}
fn ten() -> i64 {
    MAX_SEATS_PER_BOOKING
}
fn half() -> Decimal {
    Decimal::from_cents(50)
}
fn yes() -> bool {
    true
}
fn cnip() -> ProtocolKind {
    ProtocolKind::Cnip
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderModel {
    pub provider_id: String,
    pub properties: BTreeMap<String, TermValue>,
    pub inventory: Vec<ShowSpec>,
    #[serde(default = "one")]
    pub min_seats: i64,
    #[serde(default = "ten")]
    pub max_seats: i64,
    /// Price drop per concession, also the jitter step of the opening ask.
    #[serde(default = "half")]
    pub concession: Decimal,
    #[serde(default = "cnip")]
    pub protocol: ProtocolKind,
    #[serde(default = "yes")]
    pub wsag_aware: bool,
    /// The opening ask lies up to this many concession steps below list.
    #[serde(default)]
    pub jitter_steps: u32,
    /// Lowest price the template admits; defaults to the lowest reserve.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price_floor: Option<Decimal>,
    /// Counter templates disclose the current ask as the price minimum.
    #[serde(default = "yes")]
    pub reveal_ask: bool,
    /// Never answers offers.
    #[serde(default)]
    pub silent: bool,
}

impl ProviderModel {
    pub fn check(&self) -> Result<(), String> {
        if self.provider_id.is_empty() || self.provider_id.contains(['.', '#']) {
            return Err("provider_id must be non-empty and free of '.' and '#'".into());
        }
        if self.inventory.is_empty() {
            return Err("inventory is empty".into());
        }
        let mut ids = BTreeSet::new();
        for s in &self.inventory {
            if !ids.insert(&s.show_id) {
                return Err(format!("duplicate show `{}`", s.show_id));
            }
            if s.reserve_price > s.list_price {
                return Err(format!("show `{}`: reserve above list price", s.show_id));
            }
            if s.reserve_price < Decimal::ZERO || s.list_price > price_ceiling() {
                return Err(format!("show `{}`: prices outside [0, {}]", s.show_id, price_ceiling()));
            }
        }
        if !(1 <= self.min_seats && self.min_seats <= self.max_seats && self.max_seats <= MAX_SEATS_PER_BOOKING) {
            return Err("seat bundle bounds must satisfy 1 <= min_seats <= max_seats <= 10".into());
        }
        if self.concession <= Decimal::ZERO {
            return Err("concession must be positive".into());
        }
        if self.protocol == ProtocolKind::IteratedCnip {
            return Err("providers speak a bilateral protocol".into());
        }
        if let Some(f) = self.price_floor {
            if f < Decimal::ZERO || f > self.min_reserve() {
                return Err("price_floor must lie in [0, lowest reserve]".into());
            }
        }
        Ok(())
    }

    pub fn min_reserve(&self) -> Decimal {
        self.inventory
            .iter()
            .map(|s| s.reserve_price)
            .min()
            .unwrap_or(Decimal::ZERO)
    }

    pub fn properties(&self) -> ProviderProperties {
        let bundle = ValueDomain::IntegerRange {
            min: self.min_seats,
            max: self.max_seats,
        };
        ProviderProperties {
            provider_id: self.provider_id.clone(),
            domain_id: DOMAIN.into(),
            values: self.properties.clone(),
            term_ranges: BTreeMap::from([
                (
                    PRICE.to_string(),
                    ValueDomain::decimal_range(self.price_floor.unwrap_or(self.min_reserve()), price_ceiling()),
                ),
                (SEAT_COUNT.to_string(), bundle.clone()),
                (SEATS_BOOKED.to_string(), bundle),
            ]),
        }
    }

    /// Show an offer refers to: the bound show id, or the first show of the
    /// requested title with enough free seats.
    pub fn pick_show<'a>(&'a self, bindings: &Bindings, seats_free: &BTreeMap<String, u32>) -> Option<&'a ShowSpec> {
        let title = bindings.get(MOVIE_TITLE).and_then(TermValue::as_text);
        let wanted = requested_seats(bindings);
        match bindings.get(ITEM_KEY).and_then(TermValue::as_text) {
            Some(id) => self
                .inventory
                .iter()
                .find(|s| s.show_id == id && title.is_none_or(|t| t == s.movie_title)),
            None => self.inventory.iter().find(|s| {
                title.is_none_or(|t| t == s.movie_title)
                    && seats_free.get(&s.show_id).copied().unwrap_or(0) as i64 >= wanted
            }),
        }
    }

    /// Whether the provider would ever sign `bindings` (reserve and seat
    /// bundle only; ignores current inventory).
    pub fn would_accept(&self, show: &ShowSpec, bindings: &Bindings) -> bool {
        let seats = requested_seats(bindings);
        let price = bindings.get(PRICE).and_then(TermValue::as_number);
        seats >= self.min_seats
            && seats <= self.max_seats
            && seats <= show.seats_free as i64
            && price.is_some_and(|p| p >= show.reserve_price)
    }
}

pub(crate) fn requested_seats(bindings: &Bindings) -> i64 {
    match bindings.get(SEAT_COUNT) {
        Some(TermValue::Integer(n)) => *n,
        Some(v) => v.as_number().map(|d| d.round_to_int()).unwrap_or(1),
        None => 1,
    }
}

/// Replaces the price constraint of a template.
pub(crate) fn with_price_range(template: &AgreementDocument, lo: Decimal, hi: Decimal) -> AgreementDocument {
    let mut t = template.clone();
    t.constraints.retain(|c| c.term_id != PRICE);
    t.constraints.push(CreationConstraint {
        term_id: PRICE.into(),
        allowed: ValueDomain::decimal_range(lo, hi),
        mandatory: true,
    });
    t.canonical()
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Hold {
    show_id: String,
    seats: u32,
}

/// Contract-aware cinema. Asks start at list price (minus seeded jitter)
/// and drop by one concession per counter round or multilateral
/// iteration, never below the show's reserve.
#[derive(Debug, Clone)]
pub struct SimCinemaProvider {
    model: ProviderModel,
    template: AgreementDocument,
    asks: BTreeMap<String, Decimal>,
    seats_free: BTreeMap<String, u32>,
    holds: BTreeMap<String, Hold>,
    booked: BTreeSet<String>,
    last_concession: u32,
    issued: u64,
}

impl SimCinemaProvider {
    pub fn new<R: Rng + ?Sized>(model: ProviderModel, rng: &mut R) -> Result<Self, ContractError> {
        model.check().map_err(ContractError::InvalidDocument)?;
        let template = generate_service_template(&model.properties(), &cinema_schema())?;
        let asks = model
            .inventory
            .iter()
            .map(|s| {
                let k = if model.jitter_steps == 0 {
                    0
                } else {
                    rng.random_range(0..=model.jitter_steps)
                };
                let ask = model.concession.checked_mul_int(k as i64).map(|j| s.list_price - j);
                (s.show_id.clone(), ask.unwrap_or(s.reserve_price).max(s.reserve_price))
            })
            .collect();
        let seats_free = model
            .inventory
            .iter()
            .map(|s| (s.show_id.clone(), s.seats_free))
            .collect();
        Ok(SimCinemaProvider {
            model,
            template,
            asks,
            seats_free,
            holds: BTreeMap::new(),
            booked: BTreeSet::new(),
            last_concession: 0,
            issued: 0,
        })
    }

    pub fn model(&self) -> &ProviderModel {
        &self.model
    }

    pub fn ask(&self, show_id: &str) -> Option<Decimal> {
        self.asks.get(show_id).copied()
    }

    pub fn seats_free(&self, show_id: &str) -> Option<u32> {
        self.seats_free.get(show_id).copied()
    }

    pub fn bookings(&self) -> usize {
        self.booked.len()
    }

    pub fn open_holds(&self) -> usize {
        self.holds.len()
    }

    fn concede(&mut self, show_id: &str) {
        let reserve = self
            .model
            .inventory
            .iter()
            .find(|s| s.show_id == show_id)
            .map(|s| s.reserve_price);
        if let (Some(ask), Some(reserve)) = (self.asks.get_mut(show_id), reserve) {
            *ask = (*ask - self.model.concession).max(reserve);
        }
    }

    fn counter_for(&self, floor: Decimal) -> AgreementDocument {
        let lo = if self.model.reveal_ask {
            floor
        } else {
            self.model.price_floor.unwrap_or(self.model.min_reserve())
        };
        with_price_range(&self.template, lo, price_ceiling())
    }
}

impl ProviderPort for SimCinemaProvider {
    fn provider_id(&self) -> &str {
        &self.model.provider_id
    }

    fn protocol(&self) -> ProtocolKind {
        self.model.protocol
    }

    fn get_template(&self) -> Result<AgreementDocument, ProviderError> {
        Ok(self.template.clone())
    }

    fn handle_offer(&mut self, offer: &AgreementDocument, _round: u32) -> ProviderReply {
        if self.model.silent {
            return ProviderReply::Silent;
        }
        let Some(show) = self.model.pick_show(&offer.bindings, &self.seats_free).cloned() else {
            return ProviderReply::Reject {
                reason: "no matching show".into(),
            };
        };
        let seats = requested_seats(&offer.bindings);
        let free = self.seats_free[&show.show_id] as i64;
        if seats < self.model.min_seats || seats > self.model.max_seats || seats > free {
            return ProviderReply::Reject {
                reason: format!("cannot sell {seats} seats for `{}`", show.show_id),
            };
        }
        let Some(price) = offer.bindings.get(PRICE).and_then(TermValue::as_number) else {
            return ProviderReply::Reject {
                reason: "offer has no price".into(),
            };
        };
        let ask = self.asks[&show.show_id];
        if price >= ask {
            self.issued += 1;
            let id = format!("{}-agr-{}", self.model.provider_id, self.issued);
            return match accept_offer(offer, &id, &self.model.provider_id) {
                Ok(agr) => {
                    self.holds.insert(
                        id,
                        Hold {
                            show_id: show.show_id.clone(),
                            seats: seats as u32,
                        },
                    );
                    ProviderReply::Accept(agr)
                }
                Err(e) => ProviderReply::Reject { reason: e.to_string() },
            };
        }
        match self.model.protocol {
            ProtocolKind::AlternatingOffers => {
                self.concede(&show.show_id);
                ProviderReply::CounterTemplate(self.counter_for(self.asks[&show.show_id]))
            }
            _ => ProviderReply::Reject {
                reason: format!("price {price} below ask"),
            },
        }
    }

    fn counter_template(&mut self, iteration: u32) -> Option<AgreementDocument> {
        if iteration > self.last_concession {
            self.last_concession = iteration;
            let ids: Vec<String> = self.asks.keys().cloned().collect();
            for id in ids {
                self.concede(&id);
            }
        }
        let floor = self.asks.values().copied().min()?;
        Some(self.counter_for(floor))
    }

    fn cancel(&mut self, agreement: &AgreementDocument) {
        self.holds.remove(&agreement.context.agreement_id);
    }

    fn execute(&mut self, agreement: &AgreementDocument, _input: &Bindings) -> Result<Bindings, ProviderError> {
        let id = &agreement.context.agreement_id;
        if agreement.context.provider_id != self.model.provider_id {
            return Err(ProviderError::Refused(format!(
                "agreement `{id}` belongs to another provider"
            )));
        }
        if self.booked.contains(id) {
            return Err(ProviderError::Refused(format!("agreement `{id}` already used")));
        }
        let hold = self
            .holds
            .get(id)
            .cloned()
            .ok_or_else(|| ProviderError::Refused(format!("unknown or cancelled agreement `{id}`")))?;
        let free = self
            .seats_free
            .get_mut(&hold.show_id)
            .expect("hold refers to a known show");
        if *free < hold.seats {
            return Err(ProviderError::Refused(format!("show `{}` sold out", hold.show_id)));
        }
        *free -= hold.seats;
        self.holds.remove(id);
        self.booked.insert(id.clone());
        Ok(Bindings::from([
            (
                TICKET_ID.to_string(),
                TermValue::string(format!(
                    "{}-{}-{}",
                    self.model.provider_id,
                    hold.show_id,
                    self.booked.len()
                )),
            ),
            (SEATS_BOOKED.to_string(), TermValue::Integer(hold.seats as i64)),
        ]))
    }

    fn search(&self, query: &Bindings) -> Vec<Bindings> {
        let title = query.get(MOVIE_TITLE).and_then(TermValue::as_text);
        let wanted = requested_seats(query);
        self.model
            .inventory
            .iter()
            .filter(|s| title.is_none_or(|t| t == s.movie_title))
            .filter(|s| self.seats_free[&s.show_id] as i64 >= wanted)
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
