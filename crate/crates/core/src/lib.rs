//! Randomized signatures as reservoirs for learning the solutions of
//! controlled (rough) differential equations.
//!
//! The crate covers the whole pipeline: sampling controls ([`paths`]),
//! simulating ground truth ([`dynamics`]), computing truncated signatures
//! ([`tsig`]) and randomized signatures ([`rsig`]), fitting ridge readouts
//! ([`readout`]), an echo-state baseline ([`esn`]), and the experiment
//! presets ([`experiment`]).

pub mod container;
pub mod dynamics;
pub mod error;
pub mod esn;
pub mod experiment;
pub mod features;
pub mod paths;
pub mod pipeline;
pub mod readout;
pub mod rng;
pub mod rsig;
pub mod tsig;

pub use error::{Error, Result};
