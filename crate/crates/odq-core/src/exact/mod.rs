//! Exact stationary metrics by three mutually independent methods:
//! Spitzer-series summation, Pollaczek contour integration, and root
//! factorization. On any stable instance the three must agree within their
//! combined error estimates; the cross-checks live in the integration tests.

mod pollaczek;
mod roots;
mod spitzer;

pub use pollaczek::{pollaczek_metrics, pollaczek_metrics_at};
pub use roots::{
    bl_term_ratio, find_roots_bl, find_roots_fixed_point, roots_metrics, RootMethod, RootSet,
};
pub use spitzer::{spitzer_metrics, spitzer_term, SpitzerTerm};
