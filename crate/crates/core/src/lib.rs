//! Optimal surrender of variable annuities with a guaranteed minimum
//! maturity benefit under Black-Scholes dynamics.
//!
//! The crate prices the contract as an optimal stopping problem with two
//! independent solvers (a Markov-chain lattice and a finite-difference
//! variational inequality), extracts surrender regions and boundaries,
//! evaluates the early-surrender and continuation premium representations,
//! and provides Monte Carlo oracles for all of the above.

pub mod analytic;
pub mod decompose;
pub mod error;
pub mod model;
pub mod pde;
pub mod lattice;
pub mod mc;
pub mod quad;
pub mod region;
pub mod surface;

pub use error::{Result, VaError};
pub use model::{ChargeSpec, ContractParams, FeeSpec, MarketParams, Scenario};
