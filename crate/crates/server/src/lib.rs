//! HTTP session service and the wiring shared by the `taskbot` binary.

pub mod api;
pub mod setup;
pub mod transcript;

pub use api::{router, AppState, DebugInfo, TurnRequest, TurnResponse};
pub use setup::{build_engine, DeciderChoice, EngineOptions};
