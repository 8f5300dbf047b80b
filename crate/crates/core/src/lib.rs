//! Place-of-interest (POI) extraction from raw GPS trajectories.
//!
//! The pipeline cleans a fix stream ([`trajectory`]), builds a complete-linkage
//! dendrogram over the projected fixes ([`geo`], [`hclust`]) and picks the cut
//! that maximizes the number of clusters meeting visit-frequency and
//! dwell-per-day constraints ([`pctc`]). Qualifying clusters become global POIs
//! and are re-clustered under looser constraints into local POIs.
//!
//! Four stay-point based clusterers live in [`baselines`] for comparison, and
//! [`predictability`] scores POI sequences by their entropy-implied
//! predictability limit. [`synth`] generates trajectories with known POIs.

pub mod baselines;
pub mod compare;
pub mod error;
pub mod geo;
pub mod hclust;
pub mod pctc;
pub mod predictability;
pub mod staypoint;
pub mod synth;
pub mod trajectory;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
