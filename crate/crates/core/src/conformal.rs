//! Axisymmetric conformally round metrics `g = u(theta)^4 g_round` on the
//! three-sphere, where `theta in [0, pi]` is the distance from the north pole
//! in the round metric.
//!
//! The latitude sphere at `theta` is a round two-sphere of squared radius
//! `u^4 sin^2 theta`, so its area is `A(theta) = 4 pi u^4 sin^2 theta`. It is
//! minimal exactly when `A'(theta) = 0`. Only these coordinate spheres are
//! considered as minimal-sphere candidates, and every width reported here is
//! the upper bound `max A` given by the latitude sweep-out.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::{
    critical_points, integrate_adaptive, parabolic_vertex, quadratic_at, CriticalKind,
    GridFunction, QuadratureConfig,
};
use crate::scalar::Real;

/// `|u_1 - u_0| <= POLE_REGULARITY_CONSTANT * h^2 * max(u)` at both poles.
pub const POLE_REGULARITY_CONSTANT: f64 = 10.0;

/// Eigenvalues with `|lambda| <= ZERO_EIGENVALUE_TOL / induced_radius_sq`
/// count towards the nullity.
pub const ZERO_EIGENVALUE_TOL: f64 = 1e-6;

/// Largest admissible `|A'(theta*)| / A(theta*)` for the second-variation oracle.
pub const CRITICAL_RESIDUAL_TOL: f64 = 1e-8;

/// Default latitude displacement (radians, before the `1/u^2` normal scaling)
/// used by [`jacobi_spectrum`] for the oracle.
pub const ORACLE_DISPLACEMENT: f64 = 1e-2;

/// Spherical-harmonic degrees computed by [`minimal_coordinate_spheres`].
pub const SPECTRUM_K_MAX: usize = 4;

/// Label attached to every verdict that only inspects latitude spheres.
pub const CANDIDATE_SCOPE: &str = "coordinate (latitude) spheres only";

/// Positive conformal factor on the latitude grid, regular at both poles.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound(serialize = "T: Real + Serialize"))]
pub struct AxisymProfile<T> {
    grid: GridFunction<T>,
}

impl<T: Real> AxisymProfile<T> {
    pub fn new(grid: GridFunction<T>) -> Result<Self> {
        let u = grid.values();
        if let Some(i) = u.iter().position(|&v| !(v > T::zero())) {
            return invalid(format!(
                "conformal factor must be positive, u[{i}] = {}",
                u[i]
            ));
        }
        let h = grid.spacing();
        let max = u.iter().copied().fold(T::zero(), T::max);
        let bound = T::lit(POLE_REGULARITY_CONSTANT) * h * h * max;
        let n = u.len();
        if (u[1] - u[0]).abs() > bound || (u[n - 2] - u[n - 1]).abs() > bound {
            return invalid(
                "profile is not regular at the poles: u'(0) and u'(pi) must vanish to grid order",
            );
        }
        Ok(Self { grid })
    }

    pub fn from_values(values: Vec<T>) -> Result<Self> {
        Self::new(GridFunction::new(values)?)
    }

    pub fn from_fn(n: usize, f: impl Fn(T) -> T) -> Result<Self> {
        Self::new(GridFunction::from_fn(n, f)?)
    }

    pub fn constant(n: usize, c: T) -> Result<Self> {
        Self::from_fn(n, |_| c)
    }

    pub fn grid(&self) -> &GridFunction<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        self.grid.values()
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    /// The profile `c u`, i.e. the metric scaled by `c^4`.
    pub fn scaled(&self, c: T) -> Result<Self> {
        Self::new(self.grid.map(|v| v * c)?)
    }

    /// Replaces the values without re-checking pole regularity; positivity is
    /// still enforced. Used by the flow, whose updates preserve regularity.
    pub(crate) fn with_values(&self, values: Vec<T>) -> Result<Self> {
        if let Some(i) = values.iter().position(|&v| !(v > T::zero()) || !v.is_finite()) {
            return invalid(format!("conformal factor must be positive, u[{i}] = {}", values[i]));
        }
        Ok(Self {
            grid: GridFunction::new(values)?,
        })
    }
}

impl<'de, T: Real + Deserialize<'de>> Deserialize<'de> for AxisymProfile<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(bound(deserialize = "T: Real + Deserialize<'de>"))]
        struct Raw<T> {
            grid: GridFunction<T>,
        }
        let raw = Raw::<T>::deserialize(d)?;
        AxisymProfile::new(raw.grid).map_err(serde::de::Error::custom)
    }
}

/// Value at node `i` of the even reflection of `u` across both poles.
#[inline]
fn reflected<T: Copy>(u: &[T], i: isize) -> T {
    let last = u.len() as isize - 1;
    let j = if i < 0 {
        -i
    } else if i > last {
        2 * last - i
    } else {
        i
    };
    u[j as usize]
}

/// Round Laplacian of the axisymmetric function at each node, fourth-order
/// central differences on the even reflection across the poles. At a pole
/// `Delta u = 3 u''`, which reduces to the one-sided stencil
/// `(-u_2 + 16 u_1 - 15 u_0) / (6 h^2)` for `u''`.
pub(crate) fn round_laplacian_into<T: Real>(u: &[T], h: T, out: &mut [T]) {
    let n = u.len();
    let inv12h = T::one() / (T::lit(12.0) * h);
    let inv12h2 = inv12h / h;
    let (c16, c30, c8, c3, c2) = (T::lit(16.0), T::lit(30.0), T::lit(8.0), T::lit(3.0), T::lit(2.0));
    for i in 0..n {
        let ii = i as isize;
        let um2 = reflected(u, ii - 2);
        let um1 = reflected(u, ii - 1);
        let up1 = reflected(u, ii + 1);
        let up2 = reflected(u, ii + 2);
        let second = (-um2 + c16 * um1 - c30 * u[i] + c16 * up1 - up2) * inv12h2;
        out[i] = if i == 0 || i + 1 == n {
            c3 * second
        } else {
            let first = (um2 - c8 * um1 + c8 * up1 - up2) * inv12h;
            let theta = h * T::from_usize_lossy(i);
            second + c2 * first / theta.tan()
        };
    }
}

/// `R = u^-5 (-8 Delta u + 6 u)` written into `out`.
pub(crate) fn scalar_curvature_into<T: Real>(u: &[T], h: T, out: &mut [T]) {
    round_laplacian_into(u, h, out);
    let (c8, c6) = (T::lit(8.0), T::lit(6.0));
    for (r, &ui) in out.iter_mut().zip(u) {
        let u2 = ui * ui;
        *r = (-c8 * *r + c6 * ui) / (u2 * u2 * ui);
    }
}

/// Scalar curvature of `u^4 g_round` at every node.
pub fn scalar_curvature_field<T: Real>(p: &AxisymProfile<T>) -> GridFunction<T> {
    let mut out = vec![T::zero(); p.n()];
    scalar_curvature_into(p.values(), p.grid.spacing(), &mut out);
    GridFunction::new(out).expect("curvature of a positive profile is finite")
}

/// Trapezoid sum of `4 pi u^6 sin^2 theta` over the nodes.
pub(crate) fn volume_of<T: Real>(u: &[T], h: T) -> T {
    let n = u.len();
    let mut acc = T::zero();
    // both end terms vanish with sin^2
    for (i, &ui) in u.iter().enumerate().take(n - 1).skip(1) {
        let s = (h * T::from_usize_lossy(i)).sin();
        let u2 = ui * ui;
        acc += u2 * u2 * u2 * s * s;
    }
    T::lit(4.0) * T::PI() * h * acc
}

/// `vol(S^3, u^4 g_round) = 4 pi int_0^pi u^6 sin^2 theta d theta`.
///
/// The trapezoid rule on the nodes is used: for pole-regular profiles the
/// integrand extends to a smooth even periodic function, on which the rule
/// converges faster than any power of `h`.
pub fn volume<T: Real>(p: &AxisymProfile<T>) -> T {
    volume_of(p.values(), p.grid.spacing())
}

/// Area profile `A_i = 4 pi u_i^4 sin^2 theta_i` on the grid.
pub fn area_profile<T: Real>(p: &AxisymProfile<T>) -> GridFunction<T> {
    let four_pi = T::lit(4.0) * T::PI();
    let g = &p.grid;
    let values = (0..g.n())
        .map(|i| {
            let u2 = g.values()[i] * g.values()[i];
            let s = g.theta(i).sin();
            four_pi * u2 * u2 * s * s
        })
        .collect();
    GridFunction::new(values).expect("finite areas")
}

/// Area of the latitude sphere at `theta`, with `u` interpolated linearly.
pub fn sphere_area<T: Real>(p: &AxisymProfile<T>, theta: T) -> Result<T> {
    if !(theta >= T::zero() && theta <= T::PI()) {
        return invalid(format!("latitude must lie in [0, pi], got {theta}"));
    }
    let u = p.grid.interp_linear(theta);
    let s = theta.sin();
    Ok(T::lit(4.0) * T::PI() * u * u * u * u * s * s)
}

/// Quartic interpolant of `u` through the five nodes nearest a latitude
/// (reflected across the poles), in the local variable `s = (theta - theta_c) / h`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LocalModel<T> {
    center: T,
    h: T,
    coeffs: [T; 5],
}

impl<T: Real> LocalModel<T> {
    pub(crate) fn around(p: &AxisymProfile<T>, theta: T) -> Self {
        let g = &p.grid;
        let h = g.spacing();
        let last = g.n() - 1;
        let c = (theta / h).round().to_usize().unwrap_or(0).min(last);
        let u = g.values();
        let ci = c as isize;
        let v: [T; 5] = std::array::from_fn(|k| reflected(u, ci + k as isize - 2));
        let [um2, um1, u0, up1, up2] = v;
        let (c2, c4, c6, c8, c12, c16, c24, c30) = (
            T::lit(2.0),
            T::lit(4.0),
            T::lit(6.0),
            T::lit(8.0),
            T::lit(12.0),
            T::lit(16.0),
            T::lit(24.0),
            T::lit(30.0),
        );
        let coeffs = [
            u0,
            (um2 - c8 * um1 + c8 * up1 - up2) / c12,
            (-um2 + c16 * um1 - c30 * u0 + c16 * up1 - up2) / c24,
            (-um2 + c2 * um1 - c2 * up1 + up2) / c12,
            (um2 - c4 * um1 + c6 * u0 - c4 * up1 + up2) / c24,
        ];
        Self {
            center: g.theta(c),
            h,
            coeffs,
        }
    }

    /// `(u, du/dtheta, d2u/dtheta2)` at `theta`.
    pub(crate) fn eval(&self, theta: T) -> (T, T, T) {
        let s = (theta - self.center) / self.h;
        let [a0, a1, a2, a3, a4] = self.coeffs;
        let (c2, c3, c4, c6, c12) = (T::lit(2.0), T::lit(3.0), T::lit(4.0), T::lit(6.0), T::lit(12.0));
        let u = a0 + s * (a1 + s * (a2 + s * (a3 + s * a4)));
        let du = a1 + s * (c2 * a2 + s * (c3 * a3 + s * c4 * a4));
        let d2u = c2 * a2 + s * (c6 * a3 + s * c12 * a4);
        (u, du / self.h, d2u / (self.h * self.h))
    }

    /// `(A, A', A'')` of the latitude area `4 pi u^4 sin^2`.
    pub(crate) fn area_derivatives(&self, theta: T) -> (T, T, T) {
        let (u, du, d2u) = self.eval(theta);
        let (s, c) = theta.sin_cos();
        let four_pi = T::lit(4.0) * T::PI();
        let (c2, c4, c12, c16) = (T::lit(2.0), T::lit(4.0), T::lit(12.0), T::lit(16.0));
        let u2 = u * u;
        let u3 = u2 * u;
        let u4 = u2 * u2;
        let a = four_pi * u4 * s * s;
        let da = four_pi * (c4 * u3 * du * s * s + c2 * u4 * s * c);
        let d2a = four_pi
            * (c12 * u2 * du * du * s * s + c4 * u3 * d2u * s * s + c16 * u3 * du * s * c
                + c2 * u4 * (c * c - s * s));
        (a, da, d2a)
    }
}

/// Newton iteration on `A'(theta) = 0` of the local quartic model.
fn refine_critical<T: Real>(p: &AxisymProfile<T>, start: T) -> T {
    let h = p.grid.spacing();
    let mut theta = start;
    for _ in 0..50 {
        let model = LocalModel::around(p, theta);
        let (_, da, d2a) = model.area_derivatives(theta);
        if d2a == T::zero() {
            break;
        }
        let step = (da / d2a).max(-h).min(h);
        theta -= step;
        if step.abs() <= T::epsilon() * T::lit(4.0) {
            break;
        }
    }
    theta
}

/// A minimal latitude sphere together with its Jacobi data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct LatitudeSphere<T> {
    pub theta: T,
    pub area: T,
    pub minimality_residual: T,
    /// `Ric(N, N) + |A|^2`, constant on the sphere.
    pub jacobi_Q: T,
    pub induced_radius_sq: T,
    pub index: usize,
    pub nullity: usize,
    /// Whether the sphere sits at a local maximum or minimum of `A(theta)`.
    pub kind: CriticalKind,
}

/// Interior critical latitudes of the area profile, refined below grid
/// resolution with the local quartic model of `u`, each with its Jacobi data.
pub fn minimal_coordinate_spheres<T: Real>(p: &AxisymProfile<T>) -> Result<Vec<LatitudeSphere<T>>> {
    let area = area_profile(p);
    let mut out = Vec::new();
    for cp in critical_points(&area) {
        if cp.kind == CriticalKind::SaddleFlat {
            continue;
        }
        let theta = refine_critical(p, cp.refined_theta);
        let spectrum = jacobi_spectrum(p, theta, SPECTRUM_K_MAX)?;
        let model = LocalModel::around(p, theta);
        let (u, _, _) = model.eval(theta);
        let (_, da, _) = model.area_derivatives(theta);
        let s = theta.sin();
        let radius_sq = u * u * u * u * s * s;
        out.push(LatitudeSphere {
            theta,
            area: T::lit(4.0) * T::PI() * radius_sq,
            minimality_residual: da.abs(),
            jacobi_Q: spectrum.q,
            induced_radius_sq: radius_sq,
            index: spectrum.index,
            nullity: spectrum.nullity,
            kind: cp.kind,
        });
    }
    Ok(out)
}

/// Legendre polynomial `P_k(x)` and its derivative.
fn legendre<T: Real>(k: usize, x: T) -> (T, T) {
    if k == 0 {
        return (T::one(), T::zero());
    }
    let (mut p0, mut p1) = (T::one(), x);
    for j in 1..k {
        let jf = T::from_usize_lossy(j);
        let p2 = ((T::lit(2.0) * jf + T::one()) * x * p1 - jf * p0) / (jf + T::one());
        p0 = p1;
        p1 = p2;
    }
    // derivative from P_k and P_{k-1}
    let kf = T::from_usize_lossy(k);
    let one_minus = T::one() - x * x;
    let dp = if one_minus.abs() <= T::epsilon() {
        let sign = if x > T::zero() || k.is_multiple_of(2) { T::one() } else { -T::one() };
        sign * kf * (kf + T::one()) / T::lit(2.0)
    } else {
        kf * (p0 - x * p1) / one_minus
    };
    (p1, dp)
}

/// Quadrature settings of the oracle's area integrals.
fn oracle_quadrature<T: Real>() -> QuadratureConfig<T> {
    // f32 cannot resolve the f64 tolerance
    let tol = T::epsilon().sqrt() * T::lit(1e-5);
    QuadratureConfig {
        abs_tol: tol.max(T::lit(1e-13)),
        max_depth: 40,
    }
}

/// Area of the normal graph `theta = theta* + eps P_k(cos alpha) / u(theta*)^2`
/// over the latitude sphere, with `alpha` the polar angle on it.
fn graph_area<T: Real>(
    model: &LocalModel<T>,
    theta_star: T,
    k: usize,
    eps: T,
    u_star_sq: T,
) -> Result<T> {
    let two_pi = T::lit(2.0) * T::PI();
    let integrand = |alpha: T| {
        let (sa, ca) = alpha.sin_cos();
        let (pk, dpk) = legendre(k, ca);
        let phi = pk / u_star_sq;
        let dphi = -sa * dpk / u_star_sq;
        let theta = theta_star + eps * phi;
        let (u, _, _) = model.eval(theta);
        let st = theta.sin();
        // divided by u*^4 so the absolute quadrature tolerance is scale free
        let u2 = u * u / u_star_sq;
        sa * u2 * u2 * st * (st * st + eps * eps * dphi * dphi).sqrt()
    };
    let scale = u_star_sq * u_star_sq;
    Ok(two_pi * scale * integrate_adaptive(integrand, T::zero(), T::PI(), &oracle_quadrature())?)
}

/// Second variation of area at the latitude sphere `theta*` in the normal
/// direction of the degree-`k` zonal harmonic, divided by its squared
/// `L^2` norm on the sphere.
///
/// The area of the normal graph is computed by quadrature for `+-eps` and
/// `+-eps/2`; the two second differences are combined by Richardson
/// extrapolation. The result is the Jacobi eigenvalue
/// `k (k + 1) / radius^2 - Q`, so `k = 0` yields `-Q`.
pub fn second_variation_oracle<T: Real>(
    p: &AxisymProfile<T>,
    theta_star: T,
    k: usize,
    eps: T,
) -> Result<T> {
    if !(theta_star > T::zero() && theta_star < T::PI()) {
        return invalid(format!("latitude must lie in (0, pi), got {theta_star}"));
    }
    if !(eps > T::zero()) {
        return invalid(format!("oracle step must be positive, got {eps}"));
    }
    let model = LocalModel::around(p, theta_star);
    let (area0, da, _) = model.area_derivatives(theta_star);
    let residual = (da / area0).abs();
    if residual > T::lit(CRITICAL_RESIDUAL_TOL) {
        return Err(Error::NotCritical {
            theta: theta_star.as_f64(),
            residual: residual.as_f64(),
        });
    }
    let (u_star, _, _) = model.eval(theta_star);
    let u_star_sq = u_star * u_star;
    // the graph moves by eps / u*^2 in theta
    if !(eps / u_star_sq < T::lit(0.5)) {
        return invalid(format!(
            "oracle step {eps} moves the latitude by {} >= 0.5",
            eps / u_star_sq
        ));
    }
    let base = graph_area(&model, theta_star, k, T::zero(), u_star_sq)?;
    let second = |e: T| -> Result<T> {
        let plus = graph_area(&model, theta_star, k, e, u_star_sq)?;
        let minus = graph_area(&model, theta_star, k, -e, u_star_sq)?;
        Ok((plus - T::lit(2.0) * base + minus) / (e * e))
    };
    let coarse = second(eps)?;
    let fine = second(eps / T::lit(2.0))?;
    let extrapolated = (T::lit(4.0) * fine - coarse) / T::lit(3.0);
    let s = theta_star.sin();
    let radius_sq = u_star_sq * u_star_sq * s * s;
    let norm_sq = radius_sq * T::lit(4.0) * T::PI() / T::from_usize_lossy(2 * k + 1);
    Ok(extrapolated / norm_sq)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JacobiSpectrum<T> {
    /// `lambda_k` for `k = 0..=k_max`; each has multiplicity `2k + 1`.
    pub eigenvalues: Vec<T>,
    pub q: T,
    pub induced_radius_sq: T,
    pub index: usize,
    pub nullity: usize,
}

/// Jacobi spectrum of a minimal latitude sphere: `Q` is measured by the
/// second-variation oracle with `k = 0`, and `lambda_k = k (k+1) / r^2 - Q`.
/// Index and nullity count multiplicities over all degrees, not only up to
/// `k_max`.
pub fn jacobi_spectrum<T: Real>(p: &AxisymProfile<T>, theta_star: T, k_max: usize) -> Result<JacobiSpectrum<T>> {
    if k_max < 2 {
        return invalid(format!("k_max must be at least 2, got {k_max}"));
    }
    let model = LocalModel::around(p, theta_star);
    let (u_star, _, _) = model.eval(theta_star);
    let eps = T::lit(ORACLE_DISPLACEMENT) * u_star * u_star;
    let q = -second_variation_oracle(p, theta_star, 0, eps)?;
    let s = theta_star.sin();
    let radius_sq = u_star * u_star * u_star * u_star * s * s;
    let lambda = |k: usize| T::from_usize_lossy(k * (k + 1)) / radius_sq - q;
    let zero_tol = T::lit(ZERO_EIGENVALUE_TOL) / radius_sq;
    let (mut index, mut nullity) = (0, 0);
    let mut k = 0;
    loop {
        let l = lambda(k);
        if l > zero_tol {
            break;
        }
        if l < -zero_tol {
            index += 2 * k + 1;
        } else {
            nullity += 2 * k + 1;
        }
        k += 1;
    }
    Ok(JacobiSpectrum {
        eigenvalues: (0..=k_max).map(lambda).collect(),
        q,
        induced_radius_sq: radius_sq,
        index,
        nullity,
    })
}

/// Largest latitude-sphere area, refined by the parabola through the
/// maximizing node and its neighbours. The latitude family is a sweep-out,
/// so this bounds the width from above.
pub fn width_upper_bound<T: Real>(p: &AxisymProfile<T>) -> T {
    width_upper_bound_at(p).1
}

/// `(theta, value)` of the refined maximum of the area profile.
pub fn width_upper_bound_at<T: Real>(p: &AxisymProfile<T>) -> (T, T) {
    let area = area_profile(p);
    let (i, _) = area.argmax();
    let i = i.clamp(1, area.n() - 2);
    let a = area.values();
    let (offset, value) = parabolic_vertex(a[i - 1], a[i], a[i + 1]);
    (area.theta(i) + offset * area.spacing(), value)
}

/// Grid field value at `theta` by three-point quadratic interpolation.
pub(crate) fn interp_quadratic<T: Real>(g: &GridFunction<T>, theta: T) -> T {
    let h = g.spacing();
    let i = (theta / h).round().to_usize().unwrap_or(0).clamp(1, g.n() - 2);
    let v = g.values();
    let s = (theta - g.theta(i)) / h;
    quadratic_at(v[i - 1], v[i], v[i + 1], s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarReport<T> {
    pub width_upper_bound: T,
    pub minimal_spheres: Vec<LatitudeSphere<T>>,
    pub star_holds_on_axisym_candidates: bool,
    pub scope: String,
}

/// Checks that no minimal latitude sphere is strictly stable (index 0,
/// nullity 0) with area at most the width bound.
pub fn star_scan<T: Real>(p: &AxisymProfile<T>) -> Result<StarReport<T>> {
    let bound = width_upper_bound(p);
    let spheres = minimal_coordinate_spheres(p)?;
    let violated = spheres
        .iter()
        .any(|s| s.index == 0 && s.nullity == 0 && s.area <= bound);
    Ok(StarReport {
        width_upper_bound: bound,
        minimal_spheres: spheres,
        star_holds_on_axisym_candidates: !violated,
        scope: CANDIDATE_SCOPE.to_string(),
    })
}

/// `int_Sigma R dA` over the latitude sphere at `theta*`. `R` is constant on
/// the sphere; it is interpolated quadratically from the grid.
pub fn curvature_integral_over_sphere<T: Real>(p: &AxisymProfile<T>, theta_star: T) -> Result<T> {
    if !(theta_star > T::zero() && theta_star < T::PI()) {
        return invalid(format!("latitude must lie in (0, pi), got {theta_star}"));
    }
    let r = interp_quadratic(&scalar_curvature_field(p), theta_star);
    Ok(r * sphere_area(p, theta_star)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsoperimetricCheck<T> {
    pub max_profile_area: T,
    pub round_equator_area_same_volume: T,
    pub tol: T,
    pub pass: bool,
    /// Reported only; the comparison is meaningful for positive Ricci metrics.
    pub positive_scalar_curvature: bool,
    pub note: String,
}

/// Compares the latitude width bound with the equator area of the round
/// sphere of equal volume, `4 pi (vol / 2 pi^2)^(2/3)`.
pub fn isoperimetric_check<T: Real>(p: &AxisymProfile<T>, tol: T) -> IsoperimetricCheck<T> {
    let max_area = width_upper_bound(p);
    let vol = volume(p);
    let round = T::lit(4.0) * T::PI() * (vol / (T::lit(2.0) * T::PI() * T::PI())).powf(T::lit(2.0 / 3.0));
    let positive = scalar_curvature_field(p).values().iter().all(|&r| r > T::zero());
    IsoperimetricCheck {
        max_profile_area: max_area,
        round_equator_area_same_volume: round,
        tol,
        pass: max_area <= round + tol,
        positive_scalar_curvature: positive,
        note: format!(
            "max_profile_area is the latitude sweep-out bound, an upper bound for the width; {CANDIDATE_SCOPE}"
        ),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreatSphereCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub abs_err: f64,
    pub rel_err: f64,
    pub samples: usize,
    pub seed: u64,
}

/// Nodes per axis of the product rule used on each great sphere.
const SPHERE_RULE_ORDER: usize = 12;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub(crate) fn gauss_legendre(m: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre::<f64>(m, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre::<f64>(m, x);
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

fn uniform_on_s3(rng: &mut ChaCha8Rng) -> [f64; 4] {
    loop {
        let v: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(rng));
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.map(|x| x / norm);
        }
    }
}

/// Orthonormal basis of the orthogonal complement of the unit vector `n`.
fn complement_basis(n: &[f64; 4]) -> [[f64; 4]; 3] {
    let skip = (0..4)
        .max_by(|&a, &b| n[a].abs().total_cmp(&n[b].abs()))
        .unwrap_or(0);
    let mut basis: Vec<[f64; 4]> = Vec::with_capacity(3);
    for axis in (0..4).filter(|&a| a != skip) {
        let mut v = [0.0; 4];
        v[axis] = 1.0;
        for b in std::iter::once(n).chain(basis.iter()) {
            let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            for (x, y) in v.iter_mut().zip(b) {
                *x -= d * y;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        basis.push(v.map(|x| x / norm));
    }
    [basis[0], basis[1], basis[2]]
}

/// Integral-geometry check for the round metric: the average over random
/// great two-spheres of the mean of `f` on the sphere against the mean of `f`
/// over the three-sphere.
///
/// Normals are uniform on `S^3`; the mean over each great sphere uses a fixed
/// Gauss-Legendre x trapezoid product rule (exact for polynomials of degree
/// below 24 and antipodally symmetric). The volume mean uses independent
/// uniform points drawn from the same seeded stream after the normals.
pub fn great_sphere_average_check<F>(f: F, samples: usize, seed: u64) -> Result<GreatSphereCheck>
where
    F: Fn(&[f64; 4]) -> f64,
{
    if samples < 1000 {
        return invalid(format!("need at least 1000 samples, got {samples}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gl = gauss_legendre(SPHERE_RULE_ORDER);
    let azimuths = 2 * SPHERE_RULE_ORDER;
    let rule: Vec<([f64; 3], f64)> = gl
        .iter()
        .flat_map(|&(z, w)| {
            let rho = (1.0 - z * z).sqrt();
            (0..azimuths).map(move |j| {
                let phi = 2.0 * std::f64::consts::PI * j as f64 / azimuths as f64;
                ([rho * phi.cos(), rho * phi.sin(), z], w)
            })
        })
        .collect();
    let weight_sum: f64 = rule.iter().map(|(_, w)| w).sum();

    let mut lhs_acc = 0.0;
    for _ in 0..samples {
        let normal = uniform_on_s3(&mut rng);
        let [e1, e2, e3] = complement_basis(&normal);
        let mut acc = 0.0;
        for (pt, w) in &rule {
            let x: [f64; 4] = std::array::from_fn(|a| pt[0] * e1[a] + pt[1] * e2[a] + pt[2] * e3[a]);
            acc += w * f(&x);
        }
        lhs_acc += acc / weight_sum;
    }
    let lhs = lhs_acc / samples as f64;

    let mut rhs_acc = 0.0;
    for _ in 0..samples {
        rhs_acc += f(&uniform_on_s3(&mut rng));
    }
    let rhs = rhs_acc / samples as f64;
    let abs_err = (lhs - rhs).abs();
    let rel_err = if rhs != 0.0 { abs_err / rhs.abs() } else { abs_err };
    Ok(GreatSphereCheck {
        lhs,
        rhs,
        abs_err,
        rel_err,
        samples,
        seed,
    })
}
