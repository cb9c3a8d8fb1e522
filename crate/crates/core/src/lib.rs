//! Capacity-adequacy risk simulation with energy storage, equivalent firm
//! capacity, and capacity auction clearing.
//!
//! A [`system::ShortfallEnsemble`] holds Monte Carlo traces of residual demand
//! (demand net of the committed fleet). Resource sets are evaluated against it
//! for LOLE and EEU with storage dispatched optimally, valued in MW of firm
//! capacity, and cleared in auctions against a reliability standard.

pub mod auction;
pub mod diagnostics;
pub mod dispatch;
pub mod economics;
pub mod efc;
pub mod error;
pub mod io;
mod par;
pub mod risk;
pub mod rng;
pub mod scenario;
pub mod system;

pub use error::{Error, Result};
pub use risk::Metric;
