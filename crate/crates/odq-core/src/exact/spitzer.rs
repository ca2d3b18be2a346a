//! Spitzer-series engine.
//!
//! The stationary mean, variance and `-ln p0` are the series
//! `sum_k (1/k) E[S_k^+]`, `sum_k (1/k) E[(S_k^+)^2]` and
//! `sum_k (1/k) P(S_k > 0)` over `S_k = A^(k) - k s`, where `A^(k)` is the
//! `k`-period demand. The key aggregation identity: a sum of `k` i.i.d.
//! Gamma-Poisson counts with common scale `b` is again Gamma-Poisson with
//! shape `k a` and the same `b`, so every term is an exact negative binomial
//! tail sum rather than a convolution.

#[allow(unused_imports)]
use num_traits::Float; // float math on no_std builds

use crate::math::Kahan;
use crate::metrics::{ErrorEstimate, Method, StationaryMetrics};
use crate::model::QueueInstance;
use crate::{Error, Result};

/// One term of the three Spitzer series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpitzerTerm {
    pub k: u64,
    /// `P(S_k > 0)`.
    pub p_pos: f64,
    /// `E[S_k^+]`.
    pub e_plus: f64,
    /// `E[(S_k^+)^2]`.
    pub e_plus_sq: f64,
}

/// Tail sums of a negative binomial with shape `r` and Gamma scale `b`,
/// past the cut `m`: returns `(P(X > m), E[(X-m)^+], E[((X-m)^+)^2])`.
///
/// The pmf is evaluated once at `m + 1` (saddle-point form, stable for
/// aggregated shapes) and then recursed upward through its term ratio; all
/// summands are nonnegative, so there is no cancellation, and past the cut
/// the ratio is strictly below one, which gives a geometric bound for the
/// stopping rule.
fn nb_tail_sums(r: f64, b: f64, m: f64) -> (f64, f64, f64) {
    let p = b / (1.0 + b);
    let j0 = m + 1.0;
    let ln_pmf = crate::math::ln_nb_pmf(r, b, j0);
    if ln_pmf < -720.0 {
        return (0.0, 0.0, 0.0);
    }
    let mut f = ln_pmf.exp();
    let mut j = j0;
    let mut tail = Kahan::default();
    let mut first = Kahan::default();
    let mut second = Kahan::default();
    loop {
        let d = j - m;
        tail.add(f);
        first.add(d * f);
        second.add(d * d * f);
        let ratio = (r + j) * p / (j + 1.0);
        debug_assert!(ratio < 1.0);
        f *= ratio;
        j += 1.0;
        // Remainder of the quadratic-weighted sum is below
        // f * g * (d^2 + 2 d g + 2 g^2) with g = 1/(1 - ratio).
        let g = 1.0 / (1.0 - ratio);
        let rem = f * g * ((d + 1.0) * (d + 1.0) + 2.0 * (d + 1.0) * g + 2.0 * g * g);
        if rem < 1e-17 * (second.value() + 1e-300) && f * g < 1e-17 * (tail.value() + 1e-300) {
            break;
        }
    }
    (tail.value(), first.value(), second.value())
}

/// The `k`-th Spitzer term for this instance.
pub fn spitzer_term(inst: &QueueInstance, k: u64) -> SpitzerTerm {
    let a = inst.arrivals().a();
    let b = inst.arrivals().b();
    let kf = k as f64;
    let m = kf * inst.capacity() as f64;
    let (p_pos, e_plus, e_plus_sq) = nb_tail_sums(kf * a, b, m);
    SpitzerTerm {
        k,
        p_pos,
        e_plus,
        e_plus_sq,
    }
}

const K_MAX: u64 = 1_000_000;

/// Sum the three Spitzer series until the geometric remainder bound of each
/// falls below `tol`; the bounds are reported in `err`.
///
/// The term ratio is bounded by the large-deviation rate
/// `exp(s g(z_sp)) < 1` of the positive-excursion probability, which gives a
/// remainder bound `term * r/(1 - r)` that stays valid at any truncation
/// point (the polynomial prefactors of all three series only speed the
/// decay up). Instances pushed extremely close to saturation may still hit
/// the term cap; they return [`Error::Truncated`] carrying the partial sums
/// and bounds.
pub fn spitzer_metrics(inst: &QueueInstance, tol: f64) -> Result<StationaryMetrics> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidParameter("spitzer tolerance must be > 0"));
    }
    let s = inst.capacity() as f64;
    let rho = inst.utilization();
    let z_sp = 1.0 + (1.0 - rho) / (rho + inst.arrivals().b());
    let rate = (s * inst.g_real(z_sp)).exp();
    debug_assert!(rate < 1.0);
    let remainder_factor = rate / (1.0 - rate);

    let mut mean = Kahan::default();
    let mut var = Kahan::default();
    let mut ln_p0 = Kahan::default();
    let mut bounds = [f64::INFINITY; 3];
    let mut prev = [f64::INFINITY; 3];
    let mut quiet = 0u32;
    for k in 1..=K_MAX {
        let term = spitzer_term(inst, k);
        let kf = k as f64;
        let t = [term.e_plus / kf, term.e_plus_sq / kf, term.p_pos / kf];
        mean.add(t[0]);
        var.add(t[1]);
        ln_p0.add(t[2]);

        // Only trust the bound once the terms have entered the decay regime
        // consistent with the asymptotic rate.
        let decaying = t
            .iter()
            .zip(prev.iter())
            .all(|(a, b)| *a <= *b * rate * (1.0 + 1e-9) + f64::MIN_POSITIVE);
        if k > 8 && decaying {
            let mut done = true;
            for i in 0..3 {
                bounds[i] = t[i] * remainder_factor;
                done &= bounds[i] < tol;
            }
            if done {
                quiet += 1;
                if quiet >= 2 {
                    return Ok(assemble(mean, var, ln_p0, bounds));
                }
            } else {
                quiet = 0;
            }
        } else {
            quiet = 0;
        }
        prev = t;
    }
    Err(Error::Truncated {
        partial: assemble(mean, var, ln_p0, bounds),
    })
}

fn assemble(mean: Kahan, var: Kahan, ln_p0: Kahan, bounds: [f64; 3]) -> StationaryMetrics {
    let p0 = (-ln_p0.value()).exp();
    StationaryMetrics {
        mean: mean.value(),
        variance: Some(var.value()),
        p0,
        method: Method::Spitzer,
        err: ErrorEstimate {
            mean: bounds[0],
            variance: bounds[1],
            p0: p0 * bounds[2],
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{regime_instance, ArrivalModel};

    fn golden() -> QueueInstance {
        QueueInstance::new(ArrivalModel::new(1.0, 1.0).unwrap(), 2).unwrap()
    }

    #[test]
    fn golden_instance_closed_forms() {
        // a = b = 1, s = 2: mean = (sqrt5 - 1)/2, variance = sqrt5,
        // p0 = 3 - sqrt5, all from the cubic factorization
        // z^3 - 2 z^2 + 1 = (z - 1)(z^2 - z - 1).
        let m = spitzer_metrics(&golden(), 1e-13).unwrap();
        let sqrt5 = 5.0f64.sqrt();
        assert!((m.mean - (sqrt5 - 1.0) / 2.0).abs() < 1e-11);
        assert!((m.variance.unwrap() - sqrt5).abs() < 1e-10);
        assert!((m.p0 - (3.0 - sqrt5)).abs() < 1e-11);
    }

    #[test]
    fn table_instance_matches_oracle() {
        let (inst, _) = regime_instance(5, 1.0, 0.6).unwrap();
        let m = spitzer_metrics(&inst, 1e-12).unwrap();
        assert!((m.mean - 0.343948853241392).abs() < 1e-9);
        assert!((m.variance.unwrap() - 1.0083288344529049).abs() < 1e-9);
        assert!((m.p0 - 0.8430948158285838).abs() < 1e-9);
    }

    #[test]
    fn near_empty_system_limit() {
        // As a b -> 0 at fixed s the queue drains: mean -> 0, p0 -> 1.
        // Frozen value at a = 0.002: mean 1.40821e-3 (independent oracle).
        let inst = QueueInstance::new(ArrivalModel::new(0.002, 2.0).unwrap(), 2).unwrap();
        let m = spitzer_metrics(&inst, 1e-12).unwrap();
        assert!((m.mean - 1.4082106135176304e-3).abs() < 1e-10);
        assert!((m.p0 - 0.9993906867333832).abs() < 1e-10);

        let tiny = QueueInstance::new(ArrivalModel::new(2e-6, 2.0).unwrap(), 2).unwrap();
        let t = spitzer_metrics(&tiny, 1e-13).unwrap();
        assert!(t.mean < m.mean && t.mean < 2e-6);
        assert!(t.p0 > 0.999999 && t.p0 > m.p0);
    }

    #[test]
    fn terms_are_nonnegative_and_eventually_decay() {
        let (inst, _) = regime_instance(10, 1.0, 0.6).unwrap();
        let mut prev = f64::INFINITY;
        let mut decaying = true;
        for k in 1..60 {
            let t = spitzer_term(&inst, k);
            assert!(t.p_pos >= 0.0 && t.e_plus >= 0.0 && t.e_plus_sq >= 0.0);
            if k > 10 {
                decaying &= t.p_pos <= prev;
            }
            prev = t.p_pos;
        }
        assert!(decaying);
    }

    #[test]
    fn partial_sums_monotone_in_cap() {
        // Every term is nonnegative, so prefix sums only grow.
        let (inst, _) = regime_instance(5, 1.0, 0.8).unwrap();
        let mut acc = 0.0;
        for k in 1..40 {
            let t = spitzer_term(&inst, k);
            let next = acc + t.e_plus / k as f64;
            assert!(next >= acc);
            acc = next;
        }
    }

    #[test]
    fn reported_bounds_cover_truncation() {
        let (inst, _) = regime_instance(10, 1.0, 0.8).unwrap();
        let loose = spitzer_metrics(&inst, 1e-6).unwrap();
        let tight = spitzer_metrics(&inst, 1e-13).unwrap();
        assert!((loose.mean - tight.mean).abs() <= loose.err.mean + 1e-13);
        assert!(
            (loose.variance.unwrap() - tight.variance.unwrap()).abs() <= loose.err.variance + 1e-12
        );
        assert!((loose.p0 - tight.p0).abs() <= loose.err.p0 + 1e-13);
    }

    #[test]
    fn rejects_bad_tolerance() {
        assert!(spitzer_metrics(&golden(), 0.0).is_err());
        assert!(spitzer_metrics(&golden(), f64::NAN).is_err());
    }
}
