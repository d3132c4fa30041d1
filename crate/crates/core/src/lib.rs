//! Simulation and verification workbench for snap-stabilizing protocols on
//! fully-connected networks with lossy, bounded-capacity FIFO channels.
//!
//! Three protocols are stacked on each process: propagation of information
//! with feedback ([`pif`]), identity learning ([`idl`]) and mutual exclusion
//! ([`me`]). The [`kernel`] runs them from arbitrary configurations under a
//! scheduler, [`monitors`] judge the resulting traces, [`adversary`] builds
//! hostile starting points and [`explore`] enumerates small instances
//! exhaustively.

pub mod adversary;
pub mod cli;
pub mod error;
pub mod explore;
pub mod idl;
pub mod kernel;
pub mod me;
pub mod monitors;
pub mod pif;

pub use error::Error;
