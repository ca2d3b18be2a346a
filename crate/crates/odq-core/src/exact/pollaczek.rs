//! Pollaczek contour engine.
//!
//! The stationary mean, variance and `ln p0` are contour integrals of
//! kernels against the logarithmic derivative of `z^s - pgf(z)` over a
//! circle `|z| = c` with `1 < c < r0`. Overflow is avoided by never forming
//! `z^s`: with `h(z) = exp(s g(z))` and `g = -ln z + (1/s) ln pgf`,
//!
//! `(z^s - pgf)'/(z^s - pgf) = s/z - h'/(1 - h),  h' = s g' h,`
//!
//! which is exact for integer `s`. The trapezoid rule in the angle is
//! spectrally accurate for these analytic periodic integrands, and conjugate
//! symmetry halves the work.

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float; // float math on no_std builds

use crate::math::Kahan;
use crate::metrics::{ErrorEstimate, Method, StationaryMetrics};
use crate::model::QueueInstance;
use crate::{Error, Result};

/// Node count past which adaptive doubling gives up.
const NODE_CAP: usize = 1 << 22;

fn contour_sums(inst: &QueueInstance, radius: f64, nodes: usize) -> Result<(f64, f64, f64)> {
    let s = inst.capacity() as f64;
    let n = nodes.next_multiple_of(2);
    let half = n / 2;
    let mut mean = Kahan::default();
    let mut var = Kahan::default();
    let mut lp0 = Kahan::default();
    let step = 2.0 * core::f64::consts::PI / n as f64;
    for j in 0..=half {
        let theta = step * j as f64;
        let z = Complex64::from_polar(radius, theta);
        let h = (s * inst.g_complex(z)).exp();
        let one_minus_h = 1.0 - h;
        if one_minus_h.norm() < 1e-13 {
            return Err(Error::PrecisionLoss(
                "contour passes within 1e-13 of a zero of 1 - h",
            ));
        }
        // log-derivative of z^s - pgf(z), stabilized.
        let log_deriv = s / z - s * inst.g_prime_complex(z) * h / one_minus_h;
        let common = log_deriv * z;
        let one_minus_z = 1.0 - z;
        let f_mean = common / one_minus_z;
        let f_var = -z * common / (one_minus_z * one_minus_z);
        let f_p0 = (z / (z - 1.0)).ln() * common;
        // Endpoints are real axis points; interior nodes pair with their
        // conjugates, contributing twice their real part.
        let w = if j == 0 || j == half { 1.0 } else { 2.0 };
        mean.add(w * f_mean.re);
        var.add(w * f_var.re);
        lp0.add(w * f_p0.re);
    }
    let scale = 1.0 / n as f64;
    Ok((
        mean.value() * scale,
        var.value() * scale,
        lp0.value() * scale,
    ))
}

fn eval_adaptive(
    inst: &QueueInstance,
    radius: f64,
    start_nodes: usize,
) -> Result<StationaryMetrics> {
    let mut n = start_nodes.max(64);
    let mut prev = contour_sums(inst, radius, n)?;
    loop {
        n *= 2;
        let cur = contour_sums(inst, radius, n)?;
        let err = (
            (cur.0 - prev.0).abs(),
            (cur.1 - prev.1).abs(),
            (cur.2 - prev.2).abs(),
        );
        let converged = err.0 < 1e-13 * (1.0 + cur.0.abs())
            && err.1 < 1e-13 * (1.0 + cur.1.abs())
            && err.2 < 1e-13 * (1.0 + cur.2.abs());
        if converged || n >= NODE_CAP {
            let p0 = cur.2.exp();
            return Ok(StationaryMetrics {
                mean: cur.0,
                variance: Some(cur.1),
                p0,
                method: Method::Pollaczek,
                err: ErrorEstimate {
                    mean: err.0,
                    variance: err.1,
                    p0: p0 * err.2,
                },
            });
        }
        prev = cur;
    }
}

/// Contour metrics on the default circle `|z| = sqrt(z_sp * r0)`, the
/// geometric mean of the saddle point and the outer zero.
///
/// `nodes` is the starting resolution (at least 64); it is raised upfront to
/// the analyticity-based estimate `~40 / ln(r0 / c)` so the first pass is
/// already in the spectral regime, then doubled until two successive grids
/// agree. The doubling differences are reported in `err`.
pub fn pollaczek_metrics(inst: &QueueInstance, nodes: usize) -> Result<StationaryMetrics> {
    if nodes < 64 {
        return Err(Error::InvalidParameter(
            "pollaczek requires at least 64 nodes",
        ));
    }
    let sd = inst.saddle_data()?;
    let radius = (sd.z_sp * sd.r0).sqrt();
    // Nearest singularity in the angular strip is r0; ln(c) to the pole at
    // z = 1 is farther by construction of the geometric mean.
    let gap = (sd.r0 / radius).ln();
    let estimate = ((40.0 / gap) as usize).clamp(64, NODE_CAP / 4);
    eval_adaptive(inst, radius, nodes.max(estimate))
}

/// Contour metrics at a caller-chosen radius in `(1, r0)`. Cauchy's theorem
/// makes the result radius-independent; this entry point exists to verify
/// exactly that.
pub fn pollaczek_metrics_at(
    inst: &QueueInstance,
    radius: f64,
    nodes: usize,
) -> Result<StationaryMetrics> {
    if nodes < 64 {
        return Err(Error::InvalidParameter(
            "pollaczek requires at least 64 nodes",
        ));
    }
    let sd = inst.saddle_data()?;
    if !(radius > 1.0 && radius < sd.r0) {
        return Err(Error::OutsideDomain("contour radius must lie in (1, r0)"));
    }
    let gap = (sd.r0 / radius).ln().min(radius.ln());
    let estimate = ((40.0 / gap) as usize).clamp(64, NODE_CAP / 4);
    eval_adaptive(inst, radius, nodes.max(estimate))
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
        let m = pollaczek_metrics(&golden(), 64).unwrap();
        let sqrt5 = 5.0f64.sqrt();
        assert!((m.mean - (sqrt5 - 1.0) / 2.0).abs() < 1e-12);
        assert!((m.variance.unwrap() - sqrt5).abs() < 1e-11);
        assert!((m.p0 - (3.0 - sqrt5)).abs() < 1e-12);
    }

    #[test]
    fn table_instance_matches_published_cell() {
        let (inst, _) = regime_instance(100, 1.0, 0.8).unwrap();
        let m = pollaczek_metrics(&inst, 64).unwrap();
        assert!((m.mean - 5.561).abs() < 2e-3);
        // Published dispersion column squares to the standard deviation.
        assert!((m.variance.unwrap().powf(0.25) - 3.983).abs() < 2e-3);
    }

    #[test]
    fn table_instance_matches_frozen_oracle() {
        let (inst, _) = regime_instance(10, 0.1, 0.8).unwrap();
        let m = pollaczek_metrics(&inst, 64).unwrap();
        assert!((m.mean - 27.561312607275628).abs() < 1e-7);
        assert!((m.variance.unwrap() - 1021.1677427829744).abs() < 1e-5);
        assert!((m.p0 - 0.16768661748018024).abs() < 1e-9);
    }

    #[test]
    fn node_doubling_error_is_spectral() {
        let (inst, _) = regime_instance(10, 1.0, 0.6).unwrap();
        let m = pollaczek_metrics(&inst, 64).unwrap();
        assert!(m.err.mean < 1e-10);
        assert!(m.err.variance < 1e-10);
        assert!(m.err.p0 < 1e-10);
    }

    #[test]
    fn radius_independence() {
        let (inst, _) = regime_instance(50, 1.0, 0.6).unwrap();
        let sd = inst.saddle_data().unwrap();
        let c1 = (sd.z_sp * sd.r0).sqrt();
        let c2 = sd.z_sp.powf(0.75) * sd.r0.powf(0.25);
        let m1 = pollaczek_metrics_at(&inst, c1, 64).unwrap();
        let m2 = pollaczek_metrics_at(&inst, c2, 64).unwrap();
        assert!((m1.mean - m2.mean).abs() < 1e-9);
        assert!((m1.variance.unwrap() - m2.variance.unwrap()).abs() < 1e-8);
        assert!((m1.p0 - m2.p0).abs() < 1e-9);
    }

    #[test]
    fn rejects_inadmissible_radius_and_node_floor() {
        let inst = golden();
        let sd = inst.saddle_data().unwrap();
        assert!(pollaczek_metrics_at(&inst, 0.9, 128).is_err());
        assert!(pollaczek_metrics_at(&inst, sd.r0 + 0.01, 128).is_err());
        assert!(pollaczek_metrics(&inst, 32).is_err());
    }

    #[test]
    fn flags_precision_loss_on_contours_hugging_r0() {
        // 1 - h vanishes at r0; a contour within ~1e-14 of it must refuse.
        let inst = golden();
        let sd = inst.saddle_data().unwrap();
        let result = pollaczek_metrics_at(&inst, sd.r0 - 1e-14, 64);
        assert!(matches!(result, Err(crate::Error::PrecisionLoss(_))));
    }
}
