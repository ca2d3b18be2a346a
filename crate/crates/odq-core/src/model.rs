//! The arrival law, queue instance, heavy-traffic regime parameterization,
//! and the analytic data (saddle point, outer zero) shared by the engines.

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float; // float math on no_std builds

use crate::math::{self, newton_bracketed};
use crate::{Error, Result};

/// Negative binomial demand per period, arising as a Poisson count whose
/// random rate is Gamma with shape `a` and scale `b`.
///
/// The probability generating function is `(1 + b(1-z))^(-a)`, analytic for
/// `|z| < 1 + 1/b`, with mean `a*b` and variance `a*b*(b+1) > mean`: the law
/// is strictly overdispersed for every valid parameter pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArrivalModel {
    a: f64,
    b: f64,
}

impl ArrivalModel {
    /// Build from the Gamma prior parameters. Both must be finite and > 0.
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::InvalidParameter("shape a must be finite and > 0"));
        }
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::InvalidParameter("scale b must be finite and > 0"));
        }
        Ok(ArrivalModel { a, b })
    }

    /// Build from a target mean and variance: `a = mu^2/(sigma2 - mu)`,
    /// `b = (sigma2 - mu)/mu`. Rejects `sigma2 <= mu` (no overdispersion).
    pub fn from_mean_variance(mu: f64, sigma2: f64) -> Result<Self> {
        if !(mu.is_finite() && sigma2.is_finite() && mu > 0.0 && sigma2 > mu) {
            return Err(Error::Underdispersed { mu, sigma2 });
        }
        let excess = sigma2 - mu;
        ArrivalModel::new(mu * mu / excess, excess / mu)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Mean demand per period, `a*b`.
    pub fn mean(&self) -> f64 {
        self.a * self.b
    }

    /// Demand variance per period, `a*b*(b+1)`.
    pub fn variance(&self) -> f64 {
        self.a * self.b * (self.b + 1.0)
    }

    /// Radius of analyticity of the pgf, `1 + 1/b`.
    pub fn pgf_radius(&self) -> f64 {
        1.0 + 1.0 / self.b
    }

    /// Probability generating function `(1 + b(1-z))^(-a)`, principal branch.
    ///
    /// Rejects arguments for which `1 + b(1-z)` lands on the branch cut
    /// `(-inf, 0]`, i.e. real `z >= 1 + 1/b`.
    pub fn pgf(&self, z: Complex64) -> Result<Complex64> {
        let w = Complex64::new(1.0, 0.0) + self.b * (Complex64::new(1.0, 0.0) - z);
        if w.im == 0.0 && w.re <= 0.0 {
            return Err(Error::OutsideDomain(
                "pgf argument on branch cut z >= 1 + 1/b",
            ));
        }
        Ok((-self.a * w.ln()).exp())
    }

    /// pgf without the branch-cut check, for internal use on domains known
    /// to be safe (closed unit disk, contours inside the analyticity disk).
    pub(crate) fn pgf_complex(&self, z: Complex64) -> Complex64 {
        let w = Complex64::new(1.0, 0.0) + self.b * (Complex64::new(1.0, 0.0) - z);
        (-self.a * w.ln()).exp()
    }

    /// log-pmf at count `j`. Supports non-integer `a` and very large `j`:
    /// the saddle-point-stable evaluation avoids both overflow and the
    /// log-gamma cancellation that sets in past `j ~ 1e5`.
    pub fn ln_pmf(&self, j: u64) -> f64 {
        math::ln_nb_pmf(self.a, self.b, j as f64)
    }

    /// pmf at count `j`.
    pub fn pmf(&self, j: u64) -> f64 {
        self.ln_pmf(j).exp()
    }
}

/// A stable queue: an [`ArrivalModel`] plus an integer per-period capacity
/// `s > mean`.
///
/// Integrality of `s` is required by the contour and root engines (powers
/// `z^s` must be single-valued), so it is part of the type.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QueueInstance {
    arrivals: ArrivalModel,
    s: u32,
}

impl QueueInstance {
    pub fn new(arrivals: ArrivalModel, s: u32) -> Result<Self> {
        if s == 0 || (s as f64) <= arrivals.mean() {
            return Err(Error::Unstable {
                mu: arrivals.mean(),
                s,
            });
        }
        Ok(QueueInstance { arrivals, s })
    }

    pub fn arrivals(&self) -> &ArrivalModel {
        &self.arrivals
    }

    pub fn capacity(&self) -> u32 {
        self.s
    }

    /// Utilization `rho = mu / s`, in (0, 1) for a stable instance.
    pub fn utilization(&self) -> f64 {
        self.arrivals.mean() / self.s as f64
    }

    /// The variability hedge `beta = (s - mu) / sigma` implied by the
    /// capacity rule `s = mu + beta * sigma`.
    pub fn hedge_beta(&self) -> f64 {
        (self.s as f64 - self.arrivals.mean()) / self.arrivals.variance().sqrt()
    }

    /// `g(z) = -ln z + (1/s) ln pgf(z)` on the real segment `(0, 1 + 1/b)`;
    /// its saddle and outer zero organize the contour engine.
    pub(crate) fn g_real(&self, x: f64) -> f64 {
        let rho = self.utilization();
        let b = self.arrivals.b;
        -x.ln() - rho / b * (1.0 + (1.0 - x) * b).ln()
    }

    pub(crate) fn g_complex(&self, z: Complex64) -> Complex64 {
        let rho = self.utilization();
        let b = self.arrivals.b;
        -z.ln() - rho / b * (Complex64::new(1.0, 0.0) + b * (Complex64::new(1.0, 0.0) - z)).ln()
    }

    pub(crate) fn g_prime_complex(&self, z: Complex64) -> Complex64 {
        let rho = self.utilization();
        let b = self.arrivals.b;
        -z.inv() + rho / (Complex64::new(1.0, 0.0) + b * (Complex64::new(1.0, 0.0) - z))
    }

    /// Saddle point, outer zero and curvature for this instance.
    pub fn saddle_data(&self) -> Result<SaddleData> {
        let rho = self.utilization();
        let b = self.arrivals.b;
        let z_sp = 1.0 + (1.0 - rho) / (rho + b);
        let radius = self.arrivals.pgf_radius();

        // r0 is the zero of g on (z_sp, 1 + 1/b): g(z_sp) < 0 and
        // g -> +inf at the branch point, so the bracket always changes sign
        // mathematically. Newton is seeded with the small-(1-rho) expansion.
        let guess = 1.0 + 2.0 * (1.0 - rho) / (rho + 1.0 / b) / b;
        let lo = z_sp + 1e-14 * z_sp;
        let hi = radius - 1e-14 * radius - f64::EPSILON;
        let f = |x: f64| (self.g_real(x), -1.0 / x + rho / (1.0 + (1.0 - x) * b));
        // In very light traffic z_sp crowds the branch point and the sign
        // change of g sits closer to it than one ulp; the representable
        // boundary is then the best available r0.
        let r0 = if f(hi).0 <= 0.0 {
            hi
        } else {
            newton_bracketed(f, lo, hi, guess, 1e-15, "outer zero r0")?
        };
        let g_dd_sp = (1.0 + b / rho) / (z_sp * z_sp);
        Ok(SaddleData { z_sp, r0, g_dd_sp })
    }
}

/// Analytic landmarks of `g(z) = -ln z + (1/s) ln pgf(z)`: the saddle
/// `z_sp`, the outer real zero `r0` of `z^s - pgf(z)`, and `g''(z_sp)`.
/// Always `1 < z_sp < r0 < 1 + 1/b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SaddleData {
    pub z_sp: f64,
    pub r0: f64,
    pub g_dd_sp: f64,
}

/// A point of the overdispersed heavy-traffic family: scale `n`, dispersion
/// exponent `delta` in (1/2, 1) and hedge `beta > 0`, inducing
/// `mu = n`, `sigma^2 = n^(2 delta)` and capacity `s = n + beta n^delta`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegimePoint {
    pub n: f64,
    pub delta: f64,
    pub beta: f64,
}

impl RegimePoint {
    pub fn mu(&self) -> f64 {
        self.n
    }

    pub fn sigma2(&self) -> f64 {
        self.n.powf(2.0 * self.delta)
    }

    /// Gamma scale `b = n^(2 delta - 1) - 1`.
    pub fn b(&self) -> f64 {
        self.n.powf(2.0 * self.delta - 1.0) - 1.0
    }
}

/// Solve the regime equation `n + beta * n^delta = s` for the unique real
/// `n > 1` and build the corresponding queue instance.
///
/// `n` is treated as a continuous real (the induced `a`, `b` need not be
/// integers); only the capacity is integral. Fails with
/// [`Error::NoRegimeRoot`] when `s <= 1 + beta` leaves no admissible root.
pub fn regime_instance(s: u32, beta: f64, delta: f64) -> Result<(QueueInstance, RegimePoint)> {
    if s < 2 {
        return Err(Error::InvalidParameter("capacity s must be >= 2"));
    }
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::InvalidParameter("hedge beta must be finite and > 0"));
    }
    if !(delta > 0.5 && delta < 1.0) {
        return Err(Error::InvalidParameter(
            "dispersion exponent delta must lie in (1/2, 1)",
        ));
    }
    let sf = s as f64;
    if 1.0 + beta >= sf {
        return Err(Error::NoRegimeRoot { s });
    }
    let f = |n: f64| {
        (
            n + beta * n.powf(delta) - sf,
            1.0 + beta * delta * n.powf(delta - 1.0),
        )
    };
    let guess = (sf - beta * sf.powf(delta)).max(1.0 + 1e-9);
    let n = newton_bracketed(f, 1.0, sf, guess, 1e-15, "regime scale n")?;
    debug_assert!(f(n).0.abs() < 1e-12 * sf);

    let point = RegimePoint { n, delta, beta };
    let arrivals = ArrivalModel::from_mean_variance(point.mu(), point.sigma2())?;
    let inst = QueueInstance::new(arrivals, s)?;
    Ok((inst, point))
}
