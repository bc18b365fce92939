//! Secret sharing over products of public matrices.
//!
//! A dealer publishes `k` integer matrices and privately hands each of `n`
//! ring participants the index of one of them. The secret is the ordered
//! product of the selected matrices. Participants verify their shares with
//! binary check vectors, then reconstruct by passing blinded partial
//! products around the ring.

pub mod algebra;
pub mod attack;
pub mod cli;
pub mod dealer;
pub mod error;
pub mod exec;
pub mod files;
pub mod protocol;
pub mod sim;
pub mod transport;

pub use error::{Error, Result};
