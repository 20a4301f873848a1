//! A constructive Lovász Local Lemma toolkit.
//!
//! The crate implements the Moser-Tardos resampling algorithm over exact
//! rational distributions, turns its analysis (witness trees, the tree
//! probability lemma, the Galton-Watson comparison) into executable checks
//! backed by exhaustive enumeration of coin-flip tapes, and builds on top of
//! it the layerwise-computability machinery that yields prefixes of
//! computable assignments for effectively presented infinite systems.
//!
//! Module map:
//!
//! - [`model`]: variables, events, neighborhoods, side conditions.
//! - [`tape`]: pre-drawn value tables, seeded or explicit.
//! - [`engine`]: the resampling algorithm and log replay.
//! - [`explore`]: exhaustive enumeration of tapes with exact branch weights.
//! - [`witness`]: witness trees and the tree probability lemma.
//! - [`gw`]: the Galton-Watson comparison process.
//! - [`layerwise`]: stability horizons, output distributions, extraction.
//! - [`corollaries`]: infinite CNF families and forbidden substrings.
//! - [`fireworks`]: the fireworks game and beating computable bounds.
//! - [`cli`]: the `lll` command-line front end.

pub mod cli;
pub mod corollaries;
pub mod corpus;
pub mod engine;
pub mod error;
pub mod explore;
pub mod family;
pub mod fireworks;
pub mod formats;
pub mod gw;
pub mod layerwise;
pub mod model;
pub mod rational;
pub mod tape;
pub mod witness;

pub use error::{Error, Result};
pub use model::{ConstraintSystem, Event, LllParams, VariableSpec};
pub use rational::Rational;
pub use tape::Tape;
