//! Deterministic, event-sourced community governance with an exit/voice/loyalty simulator.

pub mod canonical;
pub mod config;
pub mod domain;
pub mod engine;
pub mod lifecycle;
pub mod mechanisms;
pub mod par;
pub mod simulation;
