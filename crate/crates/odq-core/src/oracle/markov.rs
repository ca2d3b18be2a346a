//! Truncated Markov-chain solver for `Q' = max(Q + A - s, 0)`.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float; // float math on no_std builds

use crate::hedge::robust_approx;
use crate::math::Kahan;
use crate::metrics::{ErrorEstimate, Method, StationaryMetrics};
use crate::model::QueueInstance;
use crate::{Error, Result};

/// Configuration for [`markov_stationary`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MarkovConfig {
    /// Initial state-space truncation level in jobs. `None` sizes it from
    /// the robust approximation as `mean + 40 sd` (the stationary tail is
    /// geometric, so this is already generous); the level is doubled until
    /// the truncated tail mass falls below `tol`.
    pub truncation: Option<u32>,
    /// Acceptable truncated tail mass, and the stationarity target of the
    /// power iteration.
    pub tol: f64,
}

impl Default for MarkovConfig {
    fn default() -> Self {
        MarkovConfig {
            truncation: None,
            tol: 1e-10,
        }
    }
}

struct Solved {
    pi: Vec<f64>,
    tail: f64,
    iters: u32,
}

/// Arrival pmf on `0..=J`, truncated where the tail drops below `cut` and
/// renormalized.
fn arrival_pmf(inst: &QueueInstance, cut: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let arrivals = inst.arrivals();
    let mut pmf = Vec::with_capacity(256);
    let mut cum = 0.0;
    let mut j = 0u64;
    let mean = arrivals.mean();
    loop {
        let p = arrivals.pmf(j);
        pmf.push(p);
        cum += p;
        if 1.0 - cum < cut && j as f64 > mean {
            break;
        }
        j += 1;
        if j > 50_000_000 {
            return Err(Error::Nonconvergence(
                "arrival pmf support too wide to truncate",
            ));
        }
    }
    let scale = 1.0 / cum;
    let mut cdf = Vec::with_capacity(pmf.len());
    let mut acc = 0.0;
    for p in pmf.iter_mut() {
        *p *= scale;
        acc += *p;
        cdf.push(acc.min(1.0));
    }
    Ok((pmf, cdf))
}

fn power_iterate(inst: &QueueInstance, k_level: usize, tol: f64) -> Result<Solved> {
    let s = inst.capacity() as usize;
    let (pmf, cdf) = arrival_pmf(inst, (tol * 1e-3).min(1e-14))?;
    let j_max = pmf.len() - 1;

    let mut pi = vec![0.0; k_level + 1];
    pi[0] = 1.0;
    let mut next = vec![0.0; k_level + 1];
    let mut prev_diff = f64::INFINITY;
    const ITER_CAP: u32 = 2_000_000;
    for it in 1..=ITER_CAP {
        next.iter_mut().for_each(|x| *x = 0.0);
        for (q, &w) in pi.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let j_start = if q <= s {
                // All arrivals up to s - q empty the queue.
                next[0] += w * cdf[(s - q).min(j_max)];
                s - q + 1
            } else {
                0
            };
            if j_start > j_max {
                continue;
            }
            for (j, &p) in pmf.iter().enumerate().skip(j_start) {
                let target = q + j - s;
                if target >= k_level {
                    // Overflowing mass is clamped into the top state.
                    let rest = if j == 0 { 1.0 } else { 1.0 - cdf[j - 1] };
                    next[k_level] += w * rest;
                    break;
                }
                next[target] += w * p;
            }
        }
        let mut diff = 0.0;
        for (a, b) in next.iter().zip(pi.iter()) {
            diff += (a - b).abs();
        }
        core::mem::swap(&mut pi, &mut next);
        if it % 128 == 0 {
            let total: f64 = pi.iter().sum();
            pi.iter_mut().for_each(|x| *x /= total);
        }
        // Geometric-convergence stopping: the distance to the fixed point is
        // about diff * r/(1 - r) with r the observed contraction rate. The
        // clamp keeps the bound usable once diff sits on the roundoff floor
        // where successive differences stop shrinking.
        let rate = (diff / prev_diff).clamp(0.0, 0.9999);
        if diff < 1e-15 || (diff * rate / (1.0 - rate) < 0.01 * tol && it > 16) {
            let w = s.max(16).min(k_level / 2 + 1);
            let tail = pi[k_level + 1 - w..].iter().sum();
            return Ok(Solved {
                pi,
                tail,
                iters: it,
            });
        }
        prev_diff = diff;
    }
    Err(Error::Nonconvergence("markov power iteration hit its cap"))
}

/// Stationary metrics from the truncated chain.
///
/// The truncation level doubles until the tail mass near the cap is below
/// `cfg.tol`; failure to get there is an error rather than a silently biased
/// answer.
pub fn markov_stationary(inst: &QueueInstance, cfg: &MarkovConfig) -> Result<StationaryMetrics> {
    if !(cfg.tol.is_finite() && cfg.tol > 0.0 && cfg.tol < 1.0) {
        return Err(Error::InvalidConfig("markov tol must lie in (0, 1)"));
    }
    let s = inst.capacity();
    let mut k_level = match cfg.truncation {
        Some(0) => return Err(Error::InvalidConfig("markov truncation must be >= 1")),
        Some(k) => k as usize,
        None => {
            let guide = robust_approx(inst)?;
            let sd = guide.variance.unwrap_or(0.0).sqrt();
            (guide.mean + 40.0 * sd).ceil() as usize
        }
    };
    k_level = k_level.max(s as usize + 10);

    for _ in 0..6 {
        let solved = power_iterate(inst, k_level, cfg.tol)?;
        if solved.tail < cfg.tol {
            let mut mean = Kahan::default();
            let mut second = Kahan::default();
            for (q, &w) in solved.pi.iter().enumerate() {
                let qf = q as f64;
                mean.add(qf * w);
                second.add(qf * qf * w);
            }
            let mean = mean.value();
            let variance = second.value() - mean * mean;
            let kf = k_level as f64;
            return Ok(StationaryMetrics {
                mean,
                variance: Some(variance),
                p0: solved.pi[0],
                method: Method::Markov,
                err: ErrorEstimate {
                    mean: solved.tail * kf + 0.01 * cfg.tol,
                    variance: solved.tail * kf * kf + 0.01 * cfg.tol,
                    p0: solved.tail + 0.01 * cfg.tol,
                },
            });
        }
        k_level *= 2;
        let _ = solved.iters;
    }
    Err(Error::Nonconvergence(
        "markov truncation level failed to capture the tail",
    ))
}
