//! Core of a task-oriented conversational assistant.
//!
//! User turns are mapped to action codes ([`action`]), checked against the
//! current scope, and dispatched by the [`orchestrator`] to policies that
//! navigate or adapt a [`taskgraph::TaskGraph`], search tasks and knowledge
//! ([`retrieval`]) and call generative models through the [`gateway`].

pub mod action;
pub mod decision;
pub mod gateway;
pub mod orchestrator;
pub mod retrieval;
pub mod taskgraph;
