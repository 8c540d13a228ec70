//! Matrix-level simulation and resource estimation for one-ancilla QSample
//! preparation: qubitized Szegedy walks, Chebyshev gap filters, the
//! selective-phase gadget, fixed-point amplitude amplification and the
//! annealing loop that chains them together.

pub mod anneal;
pub mod cli;
pub mod cost;
pub mod error;
pub mod filter;
pub mod fpaa;
pub mod gadget;
pub mod gibbs;
pub mod markov;
pub mod verify;
pub mod walk;

pub use error::{Error, Result};
