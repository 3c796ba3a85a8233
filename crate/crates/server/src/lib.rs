//! HTTP front end for baitmail instances: the operator REST API and the
//! inbound mail webhook. Each instance runs its own event loop thread.

pub mod api;
pub mod engine;

pub use api::{router, AppState, DEBRIEF_REFUSED};
pub use engine::{EngineGone, Instance, LoopSettings};
