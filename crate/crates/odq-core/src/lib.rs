//! Stationary analysis of a discrete-time queue fed by overdispersed,
//! Gamma-Poisson mixed (negative binomial) arrivals.
//!
//! The model is the slotted recursion `Q' = max(Q + A - s, 0)` where `A` is
//! the demand per period and `s` the integer capacity. Demand is Poisson with
//! a Gamma-distributed random rate, so its variance strictly exceeds its mean.
//!
//! The crate provides three independent exact engines for the stationary
//! mean, variance and empty-queue probability (Spitzer-series summation,
//! Pollaczek contour integration, and root factorization), two heavy-traffic
//! approximation families built on Gaussian random-walk functionals (the
//! classical one and a saddle-point corrected "robust" one), and two
//! ground-truth oracles (a truncated Markov chain and a seeded Monte Carlo
//! simulator of the recursion).
//!
//! `no_std` builds (with `alloc`) are supported by disabling the default
//! `std` feature; all floating-point math is routed through `libm`.
//!
//! ```
//! use odq_core::{exact, hedge, regime_instance};
//!
//! // Capacity 50 sized as n + beta * n^delta with beta = 1, delta = 0.6.
//! let (inst, point) = regime_instance(50, 1.0, 0.6)?;
//! assert!((point.n - 40.7512).abs() < 1e-3);
//!
//! let exact = exact::spitzer_metrics(&inst, 1e-10)?;
//! let robust = hedge::robust_approx(&inst)?;
//! assert!((exact.mean - 1.40529).abs() < 1e-4);
//! assert!((robust.mean - exact.mean).abs() < 0.01);
//! # Ok::<(), odq_core::Error>(())
//! ```

#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod exact;
pub mod gauss;
pub mod hedge;
mod math;
pub mod metrics;
pub mod model;
pub mod oracle;

pub use metrics::{ErrorEstimate, Method, StationaryMetrics};
pub use model::{regime_instance, ArrivalModel, QueueInstance, RegimePoint, SaddleData};

use core::fmt;

/// Errors reported by the analysis engines.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// `sigma2 <= mu`: the arrival law is Poisson or underdispersed, which is
    /// outside the Gamma-Poisson model class.
    Underdispersed { mu: f64, sigma2: f64 },
    /// A scalar parameter violated its documented precondition.
    InvalidParameter(&'static str),
    /// `s <= mu`: the queue has no stationary distribution.
    Unstable { mu: f64, s: u32 },
    /// `n + beta * n^delta = s` has no root with `n > 1` (capacity too small
    /// for the requested regime).
    NoRegimeRoot { s: u32 },
    /// A root bracket did not change sign; the instance data is inconsistent.
    NoBracket(&'static str),
    /// Evaluation was requested on or beyond a branch cut / admissible domain.
    OutsideDomain(&'static str),
    /// The contour passed too close to a zero of `1 - h(z)`; results would
    /// lose significance.
    PrecisionLoss(&'static str),
    /// Series truncated at the iteration cap before reaching the requested
    /// tolerance. Partial sums and the remainder bound are in `partial.err`.
    Truncated { partial: StationaryMetrics },
    /// The Buermann-Lagrange series fails its convergence-radius test for
    /// this instance (`ratio` is the per-term geometric factor).
    SeriesDivergent { ratio: f64 },
    /// A root set was rejected: wrong cardinality or residuals above
    /// tolerance.
    IncompleteRoots { expected: usize, got: usize },
    /// An iteration failed to converge within its cap.
    Nonconvergence(&'static str),
    /// A configuration struct violated one of its invariants.
    InvalidConfig(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Underdispersed { mu, sigma2 } => write!(
                f,
                "arrival law must be overdispersed: require sigma2 > mu > 0, got mu={mu}, sigma2={sigma2}"
            ),
            Error::InvalidParameter(what) => write!(f, "invalid parameter: {what}"),
            Error::Unstable { mu, s } => {
                write!(f, "unstable queue: capacity s={s} must exceed mean demand mu={mu}")
            }
            Error::NoRegimeRoot { s } => {
                write!(f, "no regime solution with n > 1 exists for s={s} (capacity too small)")
            }
            Error::NoBracket(what) => write!(f, "bracket does not change sign: {what}"),
            Error::OutsideDomain(what) => write!(f, "outside admissible domain: {what}"),
            Error::PrecisionLoss(what) => write!(f, "loss of precision: {what}"),
            Error::Truncated { partial } => write!(
                f,
                "series truncated at iteration cap; partial mean={} with bound {}",
                partial.mean, partial.err.mean
            ),
            Error::SeriesDivergent { ratio } => write!(
                f,
                "Buermann-Lagrange series diverges or converges too slowly (term ratio {ratio})"
            ),
            Error::IncompleteRoots { expected, got } => {
                write!(f, "incomplete root set: expected {expected} converged roots, got {got}")
            }
            Error::Nonconvergence(what) => write!(f, "iteration did not converge: {what}"),
            Error::InvalidConfig(what) => write!(f, "invalid configuration: {what}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;
