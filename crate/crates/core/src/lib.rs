//! Contract-aware service marketplace.
//!
//! Providers publish WS-Agreement style templates, the marketplace aggregates
//! them per domain, and consumers negotiate service agreements through
//! pluggable protocols and scoring strategies. A deterministic simulator of a
//! cinema domain exercises the whole pipeline.

pub mod aggregation;
pub mod contract;
pub mod decimal;
pub mod marketplace;
pub mod protocol;
pub mod sim;
pub mod strategy;
