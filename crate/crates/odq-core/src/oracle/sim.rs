//! Seeded Monte Carlo simulation of the slotted recursion with batch-means
//! confidence intervals.
//!
//! Demand is drawn compositionally: a Gamma(a, scale b) rate first, then a
//! Poisson count at that rate, which is exactly the negative binomial law.
//! Everything is driven by one ChaCha12 stream, so results are a pure
//! function of the configuration.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float; // float math on no_std builds
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Gamma, Poisson};

use crate::math::t_quantile_975;
use crate::metrics::{ErrorEstimate, Method, StationaryMetrics};
use crate::model::QueueInstance;
use crate::{Error, Result};

/// Configuration for [`simulate`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SimConfig {
    pub seed: u64,
    /// Periods discarded before sampling starts. Must cover the relaxation
    /// of the recursion: at least `10 / (1 - rho)`.
    pub warmup: u64,
    /// Periods sampled after warmup (`periods / batches` per batch; any
    /// remainder is dropped).
    pub periods: u64,
    /// Batch count for the batch-means confidence intervals.
    pub batches: u32,
}

impl SimConfig {
    /// Defaults sized for the instance: the batch length grows like
    /// `1/(1-rho)^2` so that batches dominate the autocorrelation time near
    /// saturation, warmup sits well past `10/(1-rho)`.
    pub fn for_instance(inst: &QueueInstance, seed: u64) -> SimConfig {
        let gap = 1.0 - inst.utilization();
        let batches = 16u32;
        let per_batch = ((400.0 / (gap * gap)).ceil() as u64).clamp(1 << 16, 1 << 19);
        let periods = batches as u64 * per_batch;
        SimConfig {
            seed,
            warmup: 2_000 + (10.0 / gap).ceil() as u64 + periods / 64,
            periods,
            batches,
        }
    }
}

/// Run the recursion and estimate mean, variance and `p0`; `err` carries
/// 95% batch-means confidence half-widths.
pub fn simulate(inst: &QueueInstance, cfg: &SimConfig) -> Result<StationaryMetrics> {
    if cfg.batches < 2 {
        return Err(Error::InvalidConfig("simulation needs at least 2 batches"));
    }
    if cfg.periods / (cfg.batches as u64) < 1_000 {
        return Err(Error::InvalidConfig(
            "simulation needs >= 1000 periods per batch",
        ));
    }
    let rho = inst.utilization();
    if (cfg.warmup as f64) < 10.0 / (1.0 - rho) {
        return Err(Error::InvalidConfig(
            "warmup shorter than 10/(1-rho) periods",
        ));
    }

    let arrivals = inst.arrivals();
    let gamma = Gamma::new(arrivals.a(), arrivals.b())
        .map_err(|_| Error::InvalidParameter("gamma sampler rejected (a, b)"))?;
    let s = inst.capacity() as i64;
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);

    let mut q: i64 = 0;
    let draw = |rng: &mut ChaCha12Rng| -> i64 {
        let rate: f64 = gamma.sample(rng);
        if rate > 0.0 {
            Poisson::new(rate)
                .map(|p| p.sample(rng) as i64)
                .unwrap_or(0)
        } else {
            0
        }
    };
    for _ in 0..cfg.warmup {
        q = (q + draw(&mut rng) - s).max(0);
    }

    let batch_len = cfg.periods / cfg.batches as u64;
    let mut means = Vec::with_capacity(cfg.batches as usize);
    let mut vars = Vec::with_capacity(cfg.batches as usize);
    let mut zeros = Vec::with_capacity(cfg.batches as usize);
    for _ in 0..cfg.batches {
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let mut zero_count = 0u64;
        for _ in 0..batch_len {
            q = (q + draw(&mut rng) - s).max(0);
            let qf = q as f64;
            sum += qf;
            sum_sq += qf * qf;
            zero_count += (q == 0) as u64;
        }
        let n = batch_len as f64;
        let m1 = sum / n;
        means.push(m1);
        vars.push(sum_sq / n - m1 * m1);
        zeros.push(zero_count as f64 / n);
    }

    let mean = average(&means);
    let p0 = average(&zeros);
    // Point variance from the pooled second moment; its CI comes from the
    // spread of the per-batch variance estimates.
    let pooled_m2 = means
        .iter()
        .zip(vars.iter())
        .map(|(m, v)| v + m * m)
        .sum::<f64>()
        / cfg.batches as f64;
    let variance = pooled_m2 - mean * mean;

    let t = t_quantile_975((cfg.batches - 1) as f64);
    Ok(StationaryMetrics {
        mean,
        variance: Some(variance),
        p0,
        method: Method::MonteCarlo,
        err: ErrorEstimate {
            mean: t * std_error(&means),
            variance: t * std_error(&vars),
            p0: t * std_error(&zeros),
        },
    })
}

fn average(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn std_error(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = average(xs);
    let ss = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>();
    (ss / (n - 1.0)).sqrt() / n.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{regime_instance, ArrivalModel};
    use rand::SeedableRng;

    #[test]
    fn deterministic_given_seed() {
        let (inst, _) = regime_instance(5, 1.0, 0.6).unwrap();
        let cfg = SimConfig {
            seed: 7,
            warmup: 200,
            periods: 64_000,
            batches: 16,
        };
        let a = simulate(&inst, &cfg).unwrap();
        let b = simulate(&inst, &cfg).unwrap();
        assert_eq!(a, b);
        let c = simulate(&inst, &SimConfig { seed: 8, ..cfg }).unwrap();
        assert!(a.mean != c.mean);
    }

    #[test]
    fn golden_instance_within_ci() {
        let inst = QueueInstance::new(ArrivalModel::new(1.0, 1.0).unwrap(), 2).unwrap();
        let cfg = SimConfig {
            seed: 42,
            warmup: 1_000,
            periods: 1 << 20,
            batches: 32,
        };
        let m = simulate(&inst, &cfg).unwrap();
        let exact = (5.0f64.sqrt() - 1.0) / 2.0;
        assert!(
            (m.mean - exact).abs() < 3.0 * m.err.mean,
            "mean {} +- {}",
            m.mean,
            m.err.mean
        );
        assert!((m.p0 - (3.0 - 5.0f64.sqrt())).abs() < 3.0 * m.err.p0);
        assert!((m.variance.unwrap() - 5.0f64.sqrt()).abs() < 4.0 * m.err.variance);
    }

    #[test]
    fn light_traffic_is_mostly_empty() {
        // s is 20x the mean demand: the queue should almost never be busy.
        let inst = QueueInstance::new(ArrivalModel::new(1.0, 1.0).unwrap(), 20).unwrap();
        let cfg = SimConfig {
            seed: 3,
            warmup: 100,
            periods: 200_000,
            batches: 8,
        };
        let m = simulate(&inst, &cfg).unwrap();
        assert!(m.p0 > 0.99);
    }

    #[test]
    fn compositional_sampler_moments() {
        // Empirical mean/variance of sampled demand within 4 standard errors.
        let (inst, _) = regime_instance(10, 1.0, 0.6).unwrap();
        let arrivals = inst.arrivals();
        let gamma = Gamma::new(arrivals.a(), arrivals.b()).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(123);
        let n = 1_000_000usize;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let rate: f64 = gamma.sample(&mut rng);
            let a = if rate > 0.0 {
                Poisson::new(rate).unwrap().sample(&mut rng)
            } else {
                0.0
            };
            sum += a;
            sum_sq += a * a;
        }
        let nf = n as f64;
        let mean = sum / nf;
        let var = sum_sq / nf - mean * mean;
        let mu = arrivals.mean();
        let sigma2 = arrivals.variance();
        let se_mean = (sigma2 / nf).sqrt();
        assert!((mean - mu).abs() < 4.0 * se_mean, "mean {mean} vs {mu}");
        // SE of the variance estimate, roughly sqrt((m4 - var^2)/n); use a
        // generous normal-based proxy.
        assert!(
            (var - sigma2).abs() / sigma2 < 0.02,
            "var {var} vs {sigma2}"
        );
    }

    #[test]
    fn rejects_bad_config() {
        let (inst, _) = regime_instance(5, 1.0, 0.6).unwrap();
        assert!(simulate(
            &inst,
            &SimConfig {
                seed: 1,
                warmup: 10_000,
                periods: 500,
                batches: 4
            }
        )
        .is_err());
        assert!(simulate(
            &inst,
            &SimConfig {
                seed: 1,
                warmup: 10_000,
                periods: 64_000,
                batches: 1
            }
        )
        .is_err());
        assert!(simulate(
            &inst,
            &SimConfig {
                seed: 1,
                warmup: 1,
                periods: 64_000,
                batches: 8
            }
        )
        .is_err());
    }
}
