//! Semi-Lagrangian solver for static Hamilton-Jacobi-Bellman equations with
//! exact local minimization of the discrete Hamiltonian.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod config;
pub mod control;
pub mod error;
pub mod grid;
pub mod io;
pub mod local;
pub mod minimize;
pub mod reference;
pub mod run;
pub mod solver;
pub mod synthesis;

pub use error::{Error, Result};
