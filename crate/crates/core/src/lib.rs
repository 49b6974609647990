//! Toolkit for studying random k-uniform hypergraph 2-coloring near the
//! condensation transition.
//!
//! * [`analytic`] evaluates rate functions, overlap parameters and thresholds.
//! * [`model`] holds hypergraphs, colorings and the random-model samplers.
//! * [`exact`] enumerates small instances exhaustively.
//! * [`whitening`] runs the whitening, core, attachment and residual processes.
//! * [`experiments`] orchestrates seeded Monte-Carlo trials and scans.

pub mod analytic;
pub mod error;
pub mod exact;
pub mod experiments;
pub mod model;
mod optim;
pub mod whitening;

pub use error::{LabError, Result};
pub use model::{Coloring, Hypergraph};
