//! Config-driven experiment harness around the guided-decoding engine.

pub mod config;
pub mod harness;
