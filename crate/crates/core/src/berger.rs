//! The one-parameter Berger family on the three-sphere: the round metric with
//! the Hopf fibres rescaled to length `rho` times their round length.
//!
//! The width of a Berger sphere is the area of its unique minimal two-sphere.
//! Its scale-free quotient by `volume^(2/3)` is
//!
//! ```text
//! (2/pi)^(1/3) * int_0^pi sin s * sqrt(cos^2 s * rho^(-4/3) + sin^2 s * rho^(2/3)) ds
//! ```
//!
//! and the volume is `2 pi^2 rho`. The volume formula is cross-checked by
//! [`monte_carlo_volume`], which integrates the metric density in a
//! hyperspherical chart without using it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numerics::{
    central_first_difference, central_second_difference, integrate_adaptive, QuadratureConfig,
};
use crate::scalar::Real;

/// Absolute tolerance used when comparing `width * scalar_curvature` to `24 pi`.
pub const EQUALITY_TOL: f64 = 1e-4;

/// Bound on `|first difference|` for the local-minimum certificate at `rho = 1`.
pub const FIRST_DIFF_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BergerParameter<T> {
    rho: T,
}

impl<T: Real> BergerParameter<T> {
    pub fn new(rho: T) -> Result<Self> {
        if !(rho > T::zero()) || !rho.is_finite() {
            return invalid(format!("Berger parameter must be positive and finite, got {rho}"));
        }
        Ok(Self { rho })
    }

    pub fn round() -> Self {
        Self { rho: T::one() }
    }

    pub fn rho(&self) -> T {
        self.rho
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BergerReport<T> {
    pub rho: T,
    pub scalar_curvature: T,
    pub ricci_positive: bool,
    pub volume: T,
    pub width: T,
    pub normalized_width: T,
}

/// `8 - 2 rho^2`.
pub fn scalar_curvature<T: Real>(p: &BergerParameter<T>) -> T {
    T::lit(8.0) - T::lit(2.0) * p.rho * p.rho
}

/// Ricci curvature is positive exactly for `0 < rho < sqrt 2`.
pub fn has_positive_ricci<T: Real>(p: &BergerParameter<T>) -> bool {
    p.rho < T::SQRT_2()
}

/// `2 pi^2 rho`.
pub fn volume<T: Real>(p: &BergerParameter<T>) -> T {
    T::lit(2.0) * T::PI() * T::PI() * p.rho
}

pub fn normalized_width<T: Real>(p: &BergerParameter<T>, cfg: &QuadratureConfig<T>) -> Result<T> {
    let rho = p.rho;
    let fiber = rho.powf(T::lit(-4.0 / 3.0));
    let base = rho.powf(T::lit(2.0 / 3.0));
    let integrand = |s: T| {
        let (sin, cos) = s.sin_cos();
        sin * (cos * cos * fiber + sin * sin * base).sqrt()
    };
    // the integrand is symmetric about pi/2
    let half = integrate_adaptive(integrand, T::zero(), T::FRAC_PI_2(), &half_cfg(cfg))?;
    let prefactor = (T::lit(2.0) / T::PI()).cbrt();
    Ok(prefactor * T::lit(2.0) * half)
}

fn half_cfg<T: Real>(cfg: &QuadratureConfig<T>) -> QuadratureConfig<T> {
    QuadratureConfig {
        abs_tol: cfg.abs_tol / T::lit(2.0),
        max_depth: cfg.max_depth,
    }
}

pub fn width<T: Real>(p: &BergerParameter<T>, cfg: &QuadratureConfig<T>) -> Result<T> {
    Ok(normalized_width(p, cfg)? * volume(p).powf(T::lit(2.0 / 3.0)))
}

pub fn report<T: Real>(p: &BergerParameter<T>, cfg: &QuadratureConfig<T>) -> Result<BergerReport<T>> {
    let normalized = normalized_width(p, cfg)?;
    let vol = volume(p);
    Ok(BergerReport {
        rho: p.rho,
        scalar_curvature: scalar_curvature(p),
        ricci_positive: has_positive_ricci(p),
        volume: vol,
        width: normalized * vol.powf(T::lit(2.0 / 3.0)),
        normalized_width: normalized,
    })
}

/// `n` log-spaced values from `rho_min` to `rho_max` inclusive.
pub fn log_grid<T: Real>(rho_min: T, rho_max: T, n: usize) -> Result<Vec<T>> {
    if !(rho_min > T::zero()) || !(rho_min < rho_max) || !rho_max.is_finite() {
        return invalid(format!(
            "scan range must satisfy 0 < rho_min < rho_max, got [{rho_min}, {rho_max}]"
        ));
    }
    if n < 2 {
        return invalid(format!("scan needs at least 2 points, got {n}"));
    }
    let (lo, hi) = (rho_min.ln(), rho_max.ln());
    let last = T::from_usize_lossy(n - 1);
    Ok((0..n)
        .map(|i| {
            if i == 0 {
                rho_min
            } else if i == n - 1 {
                rho_max
            } else {
                (lo + (hi - lo) * T::from_usize_lossy(i) / last).exp()
            }
        })
        .collect())
}

/// Reports at `n` log-spaced parameters, in increasing `rho`. Evaluated in
/// parallel; output order does not depend on scheduling.
pub fn scan<T: Real>(
    rho_min: T,
    rho_max: T,
    n: usize,
    cfg: &QuadratureConfig<T>,
) -> Result<Vec<BergerReport<T>>> {
    log_grid(rho_min, rho_max, n)?
        .into_par_iter()
        .map(|rho| report(&BergerParameter::new(rho)?, cfg))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalMinCertificate<T> {
    pub h: T,
    pub first_diff: T,
    pub second_diff: T,
    pub first_tol: T,
    pub pass: bool,
}

/// Finite-difference certificate that `rho = 1` is a strict local minimum of
/// the normalized width.
pub fn local_min_certificate<T: Real>(h: T, cfg: &QuadratureConfig<T>) -> Result<LocalMinCertificate<T>> {
    if !(h > T::zero() && h < T::lit(0.5)) {
        return invalid(format!("certificate step must lie in (0, 0.5), got {h}"));
    }
    let nw = |rho: T| {
        BergerParameter::new(rho)
            .and_then(|p| normalized_width(&p, cfg))
            .unwrap_or_else(|_| T::nan())
    };
    let first_diff = central_first_difference(nw, T::one(), h)?;
    let second_diff = central_second_difference(nw, T::one(), h)?;
    let first_tol = T::lit(FIRST_DIFF_TOL);
    Ok(LocalMinCertificate {
        h,
        first_diff,
        second_diff,
        first_tol,
        pass: first_diff.abs() < first_tol && second_diff > T::zero(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarBoundCheck<T> {
    pub rho: T,
    pub product: T,
    pub bound: T,
    pub tol: T,
    pub pass: bool,
    pub equality: bool,
}

/// Compares `width * scalar_curvature` with `24 pi`. Only defined while the
/// scalar curvature is positive (`rho < 2`), where rescaling to scalar
/// curvature 6 turns the comparison into `width <= 4 pi`.
pub fn scalar_normalized_bound_check<T: Real>(
    p: &BergerParameter<T>,
    cfg: &QuadratureConfig<T>,
) -> Result<ScalarBoundCheck<T>> {
    if p.rho >= T::lit(2.0) {
        return invalid(format!(
            "scalar curvature is not positive for rho = {} >= 2",
            p.rho
        ));
    }
    let product = width(p, cfg)? * scalar_curvature(p);
    let bound = T::lit(24.0) * T::PI();
    let tol = T::lit(EQUALITY_TOL);
    Ok(ScalarBoundCheck {
        rho: p.rho,
        product,
        bound,
        tol,
        pass: product <= bound + tol,
        equality: (product - bound).abs() < tol,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Monte Carlo volume of the Berger sphere.
///
/// Points of `S^3 ⊂ R^4` are written as
/// `(cos a, sin a cos b, sin a sin b cos c, sin a sin b sin c)` with
/// `(a, b, c)` uniform in `[0, pi] x [0, pi] x [0, 2 pi]`. At each sample the
/// Berger metric `<v, w> + (rho^2 - 1) <v, V> <w, V>`, with `V` the Hopf field,
/// is pulled back to the chart and `sqrt(det)` is averaged.
pub fn monte_carlo_volume(rho: f64, samples: usize, seed: u64) -> Result<MonteCarloEstimate> {
    if !(rho > 0.0) {
        return invalid(format!("rho must be positive, got {rho}"));
    }
    if samples < 2 {
        return invalid("need at least 2 samples");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let box_volume = std::f64::consts::PI * std::f64::consts::PI * 2.0 * std::f64::consts::PI;
    let stretch = rho * rho - 1.0;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..samples {
        let a = rng.gen::<f64>() * std::f64::consts::PI;
        let b = rng.gen::<f64>() * std::f64::consts::PI;
        let c = rng.gen::<f64>() * 2.0 * std::f64::consts::PI;
        let density = chart_density(a, b, c, stretch);
        sum += density;
        sum_sq += density * density;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0);
    Ok(MonteCarloEstimate {
        mean: mean * box_volume,
        std_error: (var / n).sqrt() * box_volume,
        samples,
    })
}

fn chart_density(a: f64, b: f64, c: f64, stretch: f64) -> f64 {
    let (sa, ca) = a.sin_cos();
    let (sb, cb) = b.sin_cos();
    let (sc, cc) = c.sin_cos();
    let x = [ca, sa * cb, sa * sb * cc, sa * sb * sc];
    let da = [-sa, ca * cb, ca * sb * cc, ca * sb * sc];
    let db = [0.0, -sa * sb, sa * cb * cc, sa * cb * sc];
    let dc = [0.0, 0.0, -sa * sb * sc, sa * sb * cc];
    // Hopf field i*x on C^2 = R^4
    let hopf = [-x[1], x[0], -x[3], x[2]];
    let cols = [da, db, dc];
    let dot = |u: &[f64; 4], v: &[f64; 4]| u.iter().zip(v).map(|(p, q)| p * q).sum::<f64>();
    let mut g = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            g[i][j] = dot(&cols[i], &cols[j])
                + stretch * dot(&cols[i], &hopf) * dot(&cols[j], &hopf);
        }
    }
    let det = g[0][0] * (g[1][1] * g[2][2] - g[1][2] * g[2][1])
        - g[0][1] * (g[1][0] * g[2][2] - g[1][2] * g[2][0])
        + g[0][2] * (g[1][0] * g[2][1] - g[1][1] * g[2][0]);
    det.max(0.0).sqrt()
}
