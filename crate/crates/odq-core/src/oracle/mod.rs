//! Ground-truth generators used to validate the analytic engines: a
//! truncated Markov-chain solver for the slotted recursion, a seeded Monte
//! Carlo simulator of the same recursion, and (re-exported from [`gauss`])
//! the Gaussian Spitzer series.
//!
//! [`gauss`]: crate::gauss

mod markov;
mod sim;

pub use crate::gauss::gauss_series_oracle;
pub use markov::{markov_stationary, MarkovConfig};
pub use sim::{simulate, SimConfig};
