//! Online hand-gesture detection and classification from 20-joint hand
//! skeleton streams.
//!
//! The crate bundles five detection pipelines over one shared data model:
//!
//! * a dissimilarity + sliding-window SVM baseline,
//! * two causal recurrent networks (a GRU stack and a temporal-shift
//!   feed-forward network) with per-frame labels post-processed by a
//!   finite-state machine,
//! * a motion-energy segmenter that hands candidate windows to any
//!   whole-window classifier,
//! * a trajectory-histogram refiner that re-scores path-shaped classes.
//!
//! Everything is deterministic: seeded RNG, fixed iteration orders and
//! single-threaded numerics, so a given seed reproduces bit-identical
//! models and detections.

pub mod config;
pub mod dissim;
pub mod energy;
pub mod error;
pub mod eval;
pub mod features;
pub mod fsm;
pub mod grid;
pub mod io;
pub mod model;
pub mod net;
pub mod recognizers;
pub mod svm;
pub mod synth;
pub mod trajectory;

pub use error::{Error, Result};
