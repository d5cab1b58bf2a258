//! Guitar tablature transcription with pairwise string/fret inhibition.
//!
//! The crate estimates how often string/fret combinations sound together in
//! a symbolic corpus, turns those likelihoods into inhibition weights, and
//! trains a small frame-level network whose loss penalizes co-activating
//! combinations that rarely occur together.

pub mod cooccurrence;
pub mod corpus;
pub mod error;
pub mod experiment;
pub mod fretboard;
pub mod heatmap;
pub mod inhibition;
pub mod metrics;
pub mod model;
pub mod persist;
pub mod synth;
pub mod tab;

pub use error::{Error, Result};
pub use fretboard::{ComboIndex, FretboardConfig};
