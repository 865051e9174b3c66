//! Quantum state transfer through a dephasing spin channel that is weakly
//! coupled to a sender and a receiver qubit, with optional regular global
//! measurements of the channel.

// `!(x >= 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod dynamics;
pub mod error;
pub mod integrate;
pub mod oracle;
pub mod state;

pub use error::{Error, Result};
pub use state::{ChainConfig, DensityMatrix, ExcitationBasis, SenderState};
pub mod checks;
pub mod exec;
pub mod experiments;
pub mod fidelity;
pub mod protocol;
