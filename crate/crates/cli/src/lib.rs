//! Command-line and HTTP front ends for `softsnap-core`.
//!
//! [`api`] holds the request/response documents both front ends share,
//! [`store`] the on-disk design sessions, [`service`] the axum router and
//! [`cli`] the `softsnap` verbs.

pub mod api;
pub mod cli;
pub mod service;
pub mod store;
