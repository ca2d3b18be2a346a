//! Result type shared by every engine: the three stationary summary
//! statistics, a tag identifying the method that produced them, and
//! per-field absolute error estimates.

use core::fmt;

/// Which engine produced a [`StationaryMetrics`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Spitzer,
    Pollaczek,
    Roots,
    Markov,
    MonteCarlo,
    Classical,
    Robust,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Spitzer => "spitzer",
            Method::Pollaczek => "pollaczek",
            Method::Roots => "roots",
            Method::Markov => "markov",
            Method::MonteCarlo => "montecarlo",
            Method::Classical => "classical",
            Method::Robust => "robust",
        }
    }

    /// All method tags, in the order reports list them.
    pub const ALL: [Method; 7] = [
        Method::Spitzer,
        Method::Pollaczek,
        Method::Roots,
        Method::Markov,
        Method::MonteCarlo,
        Method::Classical,
        Method::Robust,
    ];
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Estimated absolute error per reported field. For truncated series these
/// are remainder bounds; for quadratures, node-doubling differences; for the
/// simulator, 95% confidence half-widths.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ErrorEstimate {
    pub mean: f64,
    pub variance: f64,
    pub p0: f64,
}

/// Stationary queue-length summary: mean, variance (in jobs^2) and the
/// empty-queue probability.
///
/// `variance` is `None` for methods that do not produce one (the root
/// factorization has closed forms only for the mean and `p0`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StationaryMetrics {
    pub mean: f64,
    pub variance: Option<f64>,
    pub p0: f64,
    pub method: Method,
    pub err: ErrorEstimate,
}

impl StationaryMetrics {
    /// Standard deviation, when a variance is available.
    pub fn sd(&self) -> Option<f64> {
        self.variance.map(libm::sqrt)
    }
}
