//! End-to-end tests of the `abps` binary and the catalog clients.

mod cli;
mod remote_catalog;
