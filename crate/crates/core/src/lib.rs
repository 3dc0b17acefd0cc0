//! Cooperative physical-layer authentication for underwater acoustic sensor
//! networks.
//!
//! A network of sensors observes the acoustic channel of a transmitter.
//! Each sensor reduces its estimated power delay profile to a small feature
//! vector, compresses it with a tiny neural network, and reports the result
//! to a sink. The sink fuses the reports into a scalar score and compares it
//! against a threshold to decide whether the transmitter is the legitimate
//! node or an impersonator.
//!
//! The crate provides the building blocks end to end: feature extraction
//! from power delay profiles ([`pdp`]), synthetic channel-feature generation
//! with controllable inter-sensor dependence ([`datagen`]), the network
//! machinery ([`nn`]), the compression/fusion training schemes
//! ([`schemes`]), and decision-error evaluation ([`eval`]).

pub mod datagen;
pub mod eval;
pub mod nn;
pub mod pdp;
pub mod schemes;
pub mod seeding;
pub mod stats;
