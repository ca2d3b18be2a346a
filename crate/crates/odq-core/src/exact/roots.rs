//! Root-factorization engine.
//!
//! The stationary pgf factorizes through the `s - 1` zeros of
//! `z^s - pgf(z)` inside the unit disk. Two independent root finders are
//! provided: the contractive fixed-point iteration
//! `z <- w_k * pgf(z)^(1/s)` seeded at the roots of unity, and the explicit
//! Buermann-Lagrange power series in `w_k`. The closed forms then give the
//! stationary mean and empty-queue probability (the factorization carries no
//! variance formula; that field stays `None`).

use alloc::vec::Vec;
use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float; // float math on no_std builds

use crate::math::{lgamma, Kahan};
use crate::metrics::{ErrorEstimate, Method, StationaryMetrics};
use crate::model::QueueInstance;
use crate::{Error, Result};

/// Which finder produced a [`RootSet`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RootMethod {
    FixedPoint,
    BuermannLagrange,
}

/// The `s - 1` in-disk zeros of `z^s - pgf(z)`, with per-root diagnostics.
///
/// Roots are indexed by `k = 1..s-1` (the root-of-unity branch that produced
/// them); `k = 0` is excluded because that branch converges to `z = 1`.
/// Non-real roots occur in conjugate pairs since the defining function has
/// real coefficients.
#[derive(Clone, Debug)]
pub struct RootSet {
    pub roots: Vec<Complex64>,
    /// `|z^s - pgf(z)|` at each returned root.
    pub residuals: Vec<f64>,
    /// Iterations (or series terms) spent per root.
    pub iterations: Vec<u32>,
    pub method: RootMethod,
}

impl RootSet {
    pub fn len(&self) -> usize {
        self.roots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }
}

fn residual(inst: &QueueInstance, z: Complex64) -> f64 {
    (z.powu(inst.capacity()) - inst.arrivals().pgf_complex(z)).norm()
}

/// `pgf(z)^(1/s)` with the principal root; the fixed-point map.
fn step(inst: &QueueInstance, w: Complex64, z: Complex64) -> Complex64 {
    let b = inst.arrivals().b();
    let rho = inst.utilization();
    let lin = Complex64::new(1.0, 0.0) + b * (Complex64::new(1.0, 0.0) - z);
    // pgf^(1/s) = (1 + b(1-z))^(-a/s) and a/s = rho/b.
    w * (-(rho / b) * lin.ln()).exp()
}

fn iterate_root(inst: &QueueInstance, k: u32, tol: f64, max_iter: u32) -> (Complex64, u32) {
    let s = inst.capacity();
    let theta = 2.0 * core::f64::consts::PI * k as f64 / s as f64;
    let w = Complex64::from_polar(1.0, theta);
    let mut z = Complex64::new(0.0, 0.0);
    let mut prev_delta = f64::INFINITY;
    let mut trail = [z; 2];
    for it in 1..=max_iter {
        let next = step(inst, w, z);
        let delta = (next - z).norm();
        trail = [trail[1], z];
        z = next;
        if delta < tol {
            return (z, it);
        }
        // Linear convergence stalls for zeros near 1; an Aitken extrapolation
        // every few steps collapses the geometric tail.
        if it % 8 == 0 && delta > 0.5 * prev_delta {
            let d1 = trail[1] - trail[0];
            let d2 = z - trail[1];
            let denom = d2 - d1;
            if denom.norm() > 1e-300 {
                let accel = z - d2 * d2 / denom;
                if accel.norm() < 1.0 + 1e-9 {
                    z = accel;
                }
            }
        }
        prev_delta = delta;
    }
    (z, max_iter)
}

/// Find all `s - 1` in-disk roots by the fixed-point scheme.
///
/// Per-root nonconvergence is not an error: such roots are returned with
/// `iterations == max_iter` and their residual, for the caller to judge
/// (the scheme slows down near `z = 1`, i.e. for `k` near 0 mod `s`).
/// Conjugate symmetry is exact, so only `k <= s/2` is iterated.
pub fn find_roots_fixed_point(inst: &QueueInstance, tol: f64, max_iter: u32) -> Result<RootSet> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidParameter("root tolerance must be > 0"));
    }
    if max_iter == 0 {
        return Err(Error::InvalidParameter("max_iter must be >= 1"));
    }
    let s = inst.capacity();
    let count = (s - 1) as usize;
    let mut roots = alloc::vec![Complex64::new(0.0, 0.0); count];
    let mut residuals = alloc::vec![0.0; count];
    let mut iterations = alloc::vec![0u32; count];
    for k in 1..=s / 2 {
        let (z, iters) = iterate_root(inst, k, tol, max_iter);
        let res = residual(inst, z);
        let i = (k - 1) as usize;
        roots[i] = z;
        residuals[i] = res;
        iterations[i] = iters;
        let mirror = (s - k - 1) as usize;
        if mirror != i {
            roots[mirror] = z.conj();
            residuals[mirror] = res;
            iterations[mirror] = iters;
        }
    }
    Ok(RootSet {
        roots,
        residuals,
        iterations,
        method: RootMethod::FixedPoint,
    })
}

/// Per-term geometric factor of the Buermann-Lagrange series on `|w| = 1`,
/// i.e. the reciprocal radius of convergence
/// `((b + rho)/(b + 1))^(rho/b + 1) * (1/rho)^(rho/b)`.
/// Strictly below 1 for every stable instance, but it approaches 1 as
/// `rho -> 1`, where the series becomes useless.
pub fn bl_term_ratio(inst: &QueueInstance) -> f64 {
    let b = inst.arrivals().b();
    let rho = inst.utilization();
    ((b + rho) / (b + 1.0)).powf(rho / b + 1.0) * rho.powf(-rho / b)
}

/// Find the roots by summing the Buermann-Lagrange series to `terms` terms.
///
/// The coefficient of `w^l` is `(1/l!) Gamma(l alpha + l - 1)/Gamma(l alpha)
/// ((b+1)/b) (b/(b+1)^(alpha+1))^l` with `alpha = a/s`, evaluated in log
/// space. The radius test runs first: if the geometric tail after
/// `terms` terms cannot reach 1e-9, the series is declared divergent and no
/// roots are returned.
pub fn find_roots_bl(inst: &QueueInstance, terms: u32) -> Result<RootSet> {
    if terms == 0 {
        return Err(Error::InvalidParameter("series needs at least one term"));
    }
    let s = inst.capacity();
    let a = inst.arrivals().a();
    let b = inst.arrivals().b();
    let alpha = a / s as f64;

    let q = bl_term_ratio(inst);
    if q >= 1.0 - 1e-12 {
        return Err(Error::SeriesDivergent { ratio: q });
    }
    // Stirling prefactor of the coefficient asymptotics D q^l / l^(3/2).
    let prefactor = (b + 1.0) / b * alpha.sqrt() * (alpha + 1.0).powf(-1.5)
        / (2.0 * core::f64::consts::PI).sqrt();
    let lf = terms as f64;
    let tail = prefactor * q.powf(lf + 1.0) / ((1.0 - q) * lf.powf(1.5));
    if tail.is_nan() || tail >= 1e-9 {
        return Err(Error::SeriesDivergent { ratio: q });
    }

    // Coefficients are k-independent; compute once.
    let ln_cw = (b / (b + 1.0).powf(alpha + 1.0)).ln();
    let ln_front = ((b + 1.0) / b).ln();
    let mut coefs = Vec::with_capacity(terms as usize);
    for l in 1..=terms {
        let lf = l as f64;
        let ln_c = lgamma(lf * alpha + lf - 1.0) - lgamma(lf * alpha) - lgamma(lf + 1.0)
            + ln_front
            + lf * ln_cw;
        coefs.push(ln_c.exp());
    }

    let count = (s - 1) as usize;
    let mut roots = alloc::vec![Complex64::new(0.0, 0.0); count];
    let mut residuals = alloc::vec![0.0; count];
    let iterations = alloc::vec![terms; count];
    for k in 1..=s / 2 {
        let theta = 2.0 * core::f64::consts::PI * k as f64 / s as f64;
        let w = Complex64::from_polar(1.0, theta);
        let mut wp = Complex64::new(1.0, 0.0);
        let mut sum_re = Kahan::default();
        let mut sum_im = Kahan::default();
        for (l, &c) in coefs.iter().enumerate() {
            // Resync the incremental power now and then so phase drift stays
            // below the series tolerance even for tens of thousands of terms.
            wp = if l % 1024 == 0 {
                Complex64::from_polar(1.0, theta * (l as f64 + 1.0))
            } else {
                wp * w
            };
            sum_re.add(c * wp.re);
            sum_im.add(c * wp.im);
        }
        let z = Complex64::new(sum_re.value(), sum_im.value());
        let res = residual(inst, z);
        let i = (k - 1) as usize;
        roots[i] = z;
        residuals[i] = res;
        let mirror = (s - k - 1) as usize;
        if mirror != i {
            roots[mirror] = z.conj();
            residuals[mirror] = res;
        }
    }
    Ok(RootSet {
        roots,
        residuals,
        iterations,
        method: RootMethod::BuermannLagrange,
    })
}

/// Residual level above which a root set is rejected by [`roots_metrics`].
const ACCEPT_RESIDUAL: f64 = 1e-8;

/// Stationary mean and `p0` from a complete root set:
///
/// `mean = sigma^2 / (2(s - mu)) - (s - 1 + mu)/2 + sum_k 1/(1 - z_k)` and
/// `p0 = (s - mu)/pgf(0) * prod_k z_k/(z_k - 1)`, the factorization
/// evaluated at `w = 0` (the product convention checks out against it: the
/// `s - 1` sign flips cancel exactly). The product is taken in log space so
/// large-`s` instances cannot overflow `(1 + b)^a`.
pub fn roots_metrics(inst: &QueueInstance, roots: &RootSet) -> Result<StationaryMetrics> {
    let s = inst.capacity() as f64;
    let expected = inst.capacity() as usize - 1;
    if roots.len() != expected {
        return Err(Error::IncompleteRoots {
            expected,
            got: roots.len(),
        });
    }
    let converged = roots
        .residuals
        .iter()
        .filter(|r| **r < ACCEPT_RESIDUAL)
        .count();
    if converged != expected {
        return Err(Error::IncompleteRoots {
            expected,
            got: converged,
        });
    }
    let arrivals = inst.arrivals();
    let (a, b) = (arrivals.a(), arrivals.b());
    let mu = arrivals.mean();
    let sigma2 = arrivals.variance();

    let mut sum_inv = Kahan::default();
    let mut sum_inv_im = Kahan::default();
    let mut ln_prod = Kahan::default();
    let mut ln_prod_im = Kahan::default();
    let mut err_mean = 0.0;
    let mut err_lp0 = 0.0;
    for (z, res) in roots.roots.iter().zip(roots.residuals.iter()) {
        let inv = (1.0 - z).inv();
        sum_inv.add(inv.re);
        sum_inv_im.add(inv.im);
        let lg = (z / (z - 1.0)).ln();
        ln_prod.add(lg.re);
        ln_prod_im.add(lg.im);
        // Residual -> root displacement through |f'(z)|, then through the
        // derivative of each functional.
        let lin = Complex64::new(1.0, 0.0) + b * (Complex64::new(1.0, 0.0) - z);
        let fp = s * z.powu(inst.capacity() - 1) - a * b * arrivals.pgf_complex(*z) / lin;
        let dz = if fp.norm() > 0.0 {
            res / fp.norm()
        } else {
            *res
        };
        err_mean += dz * inv.norm_sqr();
        err_lp0 += dz * (z.inv() - (z - 1.0).inv()).norm();
    }
    let mean = sigma2 / (2.0 * (s - mu)) - (s - 1.0 + mu) / 2.0 + sum_inv.value();
    let ln_p0 = (s - mu).ln() + a * (1.0 + b).ln() + ln_prod.value();
    let p0 = ln_p0.exp();
    Ok(StationaryMetrics {
        mean,
        variance: None,
        p0,
        method: Method::Roots,
        err: ErrorEstimate {
            mean: err_mean + sum_inv_im.value().abs(),
            variance: 0.0,
            p0: p0 * (err_lp0 + ln_prod_im.value().abs()),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{regime_instance, ArrivalModel};

    fn golden() -> QueueInstance {
        QueueInstance::new(ArrivalModel::new(1.0, 1.0).unwrap(), 2).unwrap()
    }

    #[test]
    fn golden_fixed_point_iterates() {
        // First iterates of z <- -pgf(z)^(1/2) from 0, frozen independently:
        // -0.7071067812, -0.6077812621, -0.6192477251, then the golden root.
        let inst = golden();
        let w = Complex64::new(-1.0, 0.0);
        let mut z = Complex64::new(0.0, 0.0);
        let expected = [
            -core::f64::consts::FRAC_1_SQRT_2,
            -0.6077812621,
            -0.6192477251,
        ];
        for e in expected {
            z = step(&inst, w, z);
            assert!((z.re - e).abs() < 1e-9 && z.im.abs() < 1e-12);
        }
        let set = find_roots_fixed_point(&inst, 1e-14, 500).unwrap();
        assert_eq!(set.len(), 1);
        assert!((set.roots[0].re + 0.6180339887498949).abs() < 1e-12);
        assert!(set.residuals[0] < 1e-13);
    }

    #[test]
    fn golden_bl_series() {
        let inst = golden();
        let set = find_roots_bl(&inst, 400).unwrap();
        assert_eq!(set.len(), 1);
        assert!((set.roots[0].re + 0.6180339887498949).abs() < 1e-11);
        // Term ratio for this instance, frozen: 0.91855865...
        assert!((bl_term_ratio(&inst) - 0.9185586535436919).abs() < 1e-12);
        // 30 terms are not enough for 1e-8 here; the tail test must say so.
        assert!(matches!(
            find_roots_bl(&inst, 30),
            Err(Error::SeriesDivergent { .. })
        ));
    }

    #[test]
    fn golden_roots_metrics() {
        let inst = golden();
        let set = find_roots_fixed_point(&inst, 1e-14, 500).unwrap();
        let m = roots_metrics(&inst, &set).unwrap();
        let sqrt5 = 5.0f64.sqrt();
        assert!((m.mean - (sqrt5 - 1.0) / 2.0).abs() < 1e-12);
        assert!((m.p0 - (3.0 - sqrt5)).abs() < 1e-12);
        assert!(m.variance.is_none());
    }

    #[test]
    fn residuals_vanish_on_table_instance() {
        let (inst, _) = regime_instance(5, 1.0, 0.6).unwrap();
        let set = find_roots_fixed_point(&inst, 1e-14, 2000).unwrap();
        assert_eq!(set.len(), 4);
        for r in &set.residuals {
            assert!(*r < 1e-12);
        }
        // Conjugate pairing: roots 0/3 and 1/2 mirror each other.
        assert!((set.roots[0] - set.roots[3].conj()).norm() < 1e-15);
        assert!((set.roots[1] - set.roots[2].conj()).norm() < 1e-15);
    }

    #[test]
    fn roots_mean_matches_spitzer_on_table_row() {
        let (inst, _) = regime_instance(10, 1.0, 0.6).unwrap();
        let set = find_roots_fixed_point(&inst, 1e-14, 5000).unwrap();
        let m = roots_metrics(&inst, &set).unwrap();
        // Published cell 0.535; frozen oracle value below.
        assert!((m.mean - 0.53514005648).abs() < 1e-8);
        assert!((m.p0 - 0.82671606768).abs() < 1e-8);
    }

    #[test]
    fn bl_agrees_with_fixed_point() {
        let (inst, _) = regime_instance(5, 1.0, 0.6).unwrap();
        let fp = find_roots_fixed_point(&inst, 1e-14, 2000).unwrap();
        let bl = find_roots_bl(&inst, 600).unwrap();
        for (x, y) in fp.roots.iter().zip(bl.roots.iter()) {
            assert!((x - y).norm() < 1e-8);
        }
    }

    #[test]
    fn metrics_reject_incomplete_sets() {
        let (inst, _) = regime_instance(5, 1.0, 0.6).unwrap();
        let mut set = find_roots_fixed_point(&inst, 1e-14, 2000).unwrap();
        set.roots.pop();
        set.residuals.pop();
        assert!(matches!(
            roots_metrics(&inst, &set),
            Err(Error::IncompleteRoots { .. })
        ));

        let mut set = find_roots_fixed_point(&inst, 1e-14, 2000).unwrap();
        set.residuals[1] = 1e-3;
        assert!(roots_metrics(&inst, &set).is_err());
    }

    #[test]
    fn rejects_bad_arguments() {
        let inst = golden();
        assert!(find_roots_fixed_point(&inst, 0.0, 100).is_err());
        assert!(find_roots_fixed_point(&inst, 1e-12, 0).is_err());
        assert!(find_roots_bl(&inst, 0).is_err());
    }
}
