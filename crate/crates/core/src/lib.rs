//! Performance modeling of Always Best Packet Switching (ABPS) multi-NIC
//! communication with a WiFi-coverage oracle.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only the algorithmic
//! parts of the toolkit:
//!
//! - [`markov`]: finite CTMC generators, reachability, stationary solution and
//!   rate rewards.
//! - [`lang`]: a small stochastic-module language (constants, modules, guarded
//!   commands, synchronization labels, reward structures) and its composition
//!   into a single CTMC.
//! - [`models`]: programmatic builders for the plain ABPS and ABPS+oracle
//!   chains, metric evaluation and parameter sweeps.
//! - [`sim`]: a packet-level discrete-event simulation of the NIC lifecycles,
//!   the oracle and the client/server proxies, used to cross-validate the
//!   analytic model.
//! - [`coverage`]: access-point catalogs, coverage prediction along a
//!   trajectory and the oracle's NIC activation policy.
//!
//! File formats, remote catalog access, parallel sweeps and the command line
//! live in the `abps-toolkit` crate.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod coverage;
pub mod lang;
pub mod markov;
pub mod models;
pub mod sim;

mod math;

pub use markov::{GeneratorMatrix, MarkovError, RewardVector, StationaryDistribution};
