//! Mimosa: a synchronous step language coordinated by timed FIFO channels.
//!
//! The pipeline is [`parser`] → [`analysis`] → [`sim`], with [`eval`]
//! implementing the step semantics and [`coord`] the channel rewriting rules.

pub mod analysis;
pub mod ast;
pub mod coord;
pub mod diag;
pub mod eval;
pub mod parser;
pub mod pretty;
pub mod sim;
