//! Functionals of the maximum `M_beta` of a Gaussian random walk with
//! increments `N(-beta, 1)`: `c0 = -ln P(M=0)`, `c1 = E M`, `c2 = Var M`.
//!
//! Two independent routes are provided. [`gauss_max_moments`] evaluates the
//! three real semi-infinite integrals obtained from the Pollaczek-type
//! representation, and [`gauss_series_oracle`] sums the Spitzer series with
//! normal increments. They must agree; the series route doubles as the test
//! oracle for the quadrature route.

#[allow(unused_imports)]
use num_traits::Float; // float math on no_std builds

use crate::math::{self, integrate_gl, Kahan};
use crate::{Error, Result};

/// The triple `(c0, c1, c2)` for drift `beta`, with
/// `P(M_beta = 0) = exp(-c0)`, `E M_beta = c1`, `Var M_beta = c2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussMoments {
    pub beta: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl GaussMoments {
    /// `P(M_beta = 0) = exp(-c0)`.
    pub fn p0(&self) -> f64 {
        (-self.c0).exp()
    }
}

const QUAD_NODES: usize = 200;

/// Integral route. Each integrand decays like `exp(-t^2)`, so the
/// semi-infinite range is cut at `T = sqrt(ln(1/tol)) + beta` (remainder
/// below `exp(-T^2)`) and handled by Gauss-Legendre. The node-doubled error
/// estimate is returned alongside for callers that propagate it.
pub(crate) fn c_functionals(beta: f64, tol: f64) -> Result<(GaussMoments, [f64; 3])> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::InvalidParameter("gauss moments require beta > 0"));
    }
    if !(tol.is_finite() && tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidParameter(
            "gauss moments require tol in (0, 1)",
        ));
    }
    let upper = (1.0 / tol).ln().sqrt() + beta;
    let coarse = c_quad(beta, upper, QUAD_NODES);
    let fine = c_quad(beta, upper, 2 * QUAD_NODES);
    let err = [
        (fine[0] - coarse[0]).abs(),
        (fine[1] - coarse[1]).abs(),
        (fine[2] - coarse[2]).abs(),
    ];
    Ok((
        GaussMoments {
            beta,
            c0: fine[0],
            c1: fine[1],
            c2: fine[2],
        },
        err,
    ))
}

fn c_quad(beta: f64, upper: f64, nodes: usize) -> [f64; 3] {
    let half_b2 = 0.5 * beta * beta;
    let pi = core::f64::consts::PI;
    // Kernel exp(-x)/(1 - exp(-x)) written as 1/expm1(x) for stability.
    let c0 = -1.0 / pi
        * integrate_gl(
            |t| {
                let x = half_b2 + t * t;
                (beta / 2.0f64.sqrt()) / x * (-(-x).exp()).ln_1p()
            },
            0.0,
            upper,
            nodes,
        );
    let c1 = 2.0f64.sqrt() / pi
        * integrate_gl(
            |t| {
                let x = half_b2 + t * t;
                t * t / x / x.exp_m1()
            },
            0.0,
            upper,
            nodes,
        );
    let c2 = 2.0f64.sqrt() * beta / pi
        * integrate_gl(
            |t| {
                let x = half_b2 + t * t;
                t * t / (x * x) / x.exp_m1()
            },
            0.0,
            upper,
            nodes,
        );
    [c0, c1, c2]
}

/// Evaluate `(c0, c1, c2)` by quadrature of the three real integrals.
pub fn gauss_max_moments(beta: f64, tol: f64) -> Result<GaussMoments> {
    c_functionals(beta, tol).map(|(m, _)| m)
}

/// Spitzer-series route with `N(-beta, 1)` increments: the `k`-step sum is
/// `N(-k beta, k)`, so each term has a closed form in `Phi` and `phi`.
///
/// Convergence is geometric with ratio about `exp(-beta^2/2)`; drifts below
/// 0.05 are rejected as impractically slow.
pub fn gauss_series_oracle(beta: f64, tol: f64) -> Result<GaussMoments> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::InvalidParameter("gauss series requires beta > 0"));
    }
    if beta < 0.05 {
        return Err(Error::Nonconvergence(
            "gaussian Spitzer series converges too slowly for beta < 0.05",
        ));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidParameter("gauss series requires tol > 0"));
    }
    let mut s0 = Kahan::default();
    let mut s1 = Kahan::default();
    let mut s2 = Kahan::default();
    let mut prev = f64::INFINITY;
    let mut quiet = 0u32;
    const K_MAX: u64 = 50_000_000;
    for k in 1..=K_MAX {
        let kf = k as f64;
        let x = beta * kf.sqrt();
        let tail = math::norm_cdf(-x); // P(S_k > 0)
        let pdf = math::norm_pdf(x);
        let e_plus = kf.sqrt() * pdf - kf * beta * tail;
        let e_plus_sq = (kf + kf * kf * beta * beta) * tail - kf * kf.sqrt() * beta * pdf;
        s0.add(tail / kf);
        s1.add(e_plus / kf);
        s2.add(e_plus_sq / kf);

        let term = (tail / kf).max(e_plus / kf).max(e_plus_sq / kf);
        // Geometric remainder test: ratio from the last two terms.
        if k > 8 && term < prev {
            let ratio = (term / prev).min(0.999_999);
            if term * ratio / (1.0 - ratio) < tol {
                quiet += 1;
                if quiet >= 2 {
                    return Ok(GaussMoments {
                        beta,
                        c0: s0.value(),
                        c1: s1.value(),
                        c2: s2.value(),
                    });
                }
            } else {
                quiet = 0;
            }
        }
        prev = term;
    }
    Err(Error::Nonconvergence(
        "gaussian Spitzer series hit its term cap",
    ))
}
