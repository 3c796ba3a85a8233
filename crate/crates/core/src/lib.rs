//! Scam-baiting mail orchestration: report ingestion, reply strategies,
//! contact policies, transcript archive, experiment metrics and a
//! deterministic simulation harness.

pub mod address;
pub mod archive;
pub mod clock;
pub mod config;
pub mod corpus;
pub mod gateway;
pub mod ingestion;
pub mod orchestrator;
pub mod responders;
pub mod seed;
pub mod sim;

pub use address::{AddressError, EmailAddress};
