//! Randomized binary Byzantine agreement for complete synchronous networks,
//! driven by committee-based common coins, together with a deterministic
//! simulator for an adaptive, full-information, rushing adversary.
//!
//! The crate is organised bottom-up:
//!
//! * [`coin`]: the one-round ±1 common coin, its designated-committee
//!   variant, exact moment enumeration and anti-concentration bounds.
//! * [`protocol`]: the per-node phase state machine, committee schedule and
//!   message format.
//! * [`adversary`]: the rushing adversary interface and built-in strategies.
//! * [`engine`]: the round executor, invariant checks, traces and batches.
//! * [`analysis`]: batch statistics and asymptotic reference curves.

pub mod adversary;
pub mod analysis;
pub mod coin;
pub mod engine;
mod error;
pub mod protocol;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use error::{Error, Result};

/// Public, 1-based node identifier. IDs `1..=n` are known to every node.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    /// Zero-based slot for per-node vectors.
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }

    #[inline]
    pub fn from_index(index: usize) -> Self {
        NodeId(index as u32 + 1)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}
