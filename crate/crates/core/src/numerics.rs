//! Deterministic numeric kernels shared by the analyses: adaptive quadrature,
//! finite differences, and functions sampled on a uniform latitude grid.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

/// Tolerance and recursion limit for [`integrate_adaptive`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig<T> {
    pub abs_tol: T,
    pub max_depth: usize,
}

impl<T: Real> QuadratureConfig<T> {
    pub fn new(abs_tol: T, max_depth: usize) -> Result<Self> {
        if !(abs_tol > T::zero()) || !abs_tol.is_finite() {
            return invalid(format!("quadrature abs_tol must be positive, got {abs_tol}"));
        }
        if max_depth < 1 {
            return invalid("quadrature max_depth must be at least 1");
        }
        Ok(Self { abs_tol, max_depth })
    }
}

impl Default for QuadratureConfig<f64> {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            max_depth: 50,
        }
    }
}

/// Number of equal panels the interval is split into before adaptation starts.
/// Prevents the first Simpson comparison from accepting a symmetric integrand
/// whose coarse estimates agree by accident.
const INITIAL_PANELS: usize = 4;

struct Accum<T> {
    sum: T,
    exhausted_err: T,
    exhausted: bool,
}

/// Adaptive Simpson quadrature with Richardson error control.
///
/// Each panel compares the one-panel Simpson estimate `s1` with the two
/// half-panel estimate `s2`; it is accepted when `|s2 - s1| <= 15 tol` and
/// contributes `s2 + (s2 - s1) / 15`. The tolerance is halved on every split.
/// Panels still unresolved at `max_depth` make the call fail with
/// [`Error::QuadratureDepth`], carrying the best estimate and the summed
/// error indicator of those panels.
pub fn integrate_adaptive<T, F>(f: F, a: T, b: T, cfg: &QuadratureConfig<T>) -> Result<T>
where
    T: Real,
    F: Fn(T) -> T,
{
    if !(a < b) {
        return invalid(format!("integration bounds must satisfy a < b, got [{a}, {b}]"));
    }
    let panels = T::from_usize_lossy(INITIAL_PANELS);
    let width = (b - a) / panels;
    let tol = cfg.abs_tol / panels;
    let mut acc = Accum {
        sum: T::zero(),
        exhausted_err: T::zero(),
        exhausted: false,
    };
    for k in 0..INITIAL_PANELS {
        let lo = a + width * T::from_usize_lossy(k);
        let hi = if k + 1 == INITIAL_PANELS { b } else { lo + width };
        let mid = (lo + hi) / T::lit(2.0);
        let (flo, fmid, fhi) = (f(lo), f(mid), f(hi));
        let whole = simpson(lo, hi, flo, fmid, fhi);
        refine(&f, lo, hi, flo, fmid, fhi, whole, tol, cfg.max_depth, &mut acc);
    }
    if !acc.sum.is_finite() {
        return Err(Error::NonFinite(format!(
            "integrand produced a non-finite value on [{a}, {b}]"
        )));
    }
    if acc.exhausted {
        return Err(Error::QuadratureDepth {
            estimate: acc.sum.as_f64(),
            error_bound: acc.exhausted_err.as_f64(),
        });
    }
    Ok(acc.sum)
}

#[inline]
fn simpson<T: Real>(lo: T, hi: T, flo: T, fmid: T, fhi: T) -> T {
    (hi - lo) / T::lit(6.0) * (flo + T::lit(4.0) * fmid + fhi)
}

#[allow(clippy::too_many_arguments)]
fn refine<T: Real, F: Fn(T) -> T>(
    f: &F,
    lo: T,
    hi: T,
    flo: T,
    fmid: T,
    fhi: T,
    whole: T,
    tol: T,
    depth_left: usize,
    acc: &mut Accum<T>,
) {
    let two = T::lit(2.0);
    let mid = (lo + hi) / two;
    let lmid = (lo + mid) / two;
    let rmid = (mid + hi) / two;
    let flmid = f(lmid);
    let frmid = f(rmid);
    let left = simpson(lo, mid, flo, flmid, fmid);
    let right = simpson(mid, hi, fmid, frmid, fhi);
    let halves = left + right;
    let delta = halves - whole;
    let fifteen = T::lit(15.0);
    if delta.abs() <= fifteen * tol || !delta.is_finite() {
        acc.sum += halves + delta / fifteen;
        if !delta.is_finite() {
            acc.sum = T::nan();
        }
        return;
    }
    if depth_left <= 1 {
        acc.sum += halves + delta / fifteen;
        acc.exhausted_err += delta.abs() / fifteen;
        acc.exhausted = true;
        return;
    }
    let half_tol = tol / two;
    refine(f, lo, mid, flo, flmid, fmid, left, half_tol, depth_left - 1, acc);
    refine(f, mid, hi, fmid, frmid, fhi, right, half_tol, depth_left - 1, acc);
}

/// `(f(x-h) - 2 f(x) + f(x+h)) / h^2`.
pub fn central_second_difference<T, F>(f: F, x: T, h: T) -> Result<T>
where
    T: Real,
    F: Fn(T) -> T,
{
    if !(h > T::zero()) {
        return invalid(format!("difference step must be positive, got {h}"));
    }
    let (fm, f0, fp) = (f(x - h), f(x), f(x + h));
    if !(fm.is_finite() && f0.is_finite() && fp.is_finite()) {
        return Err(Error::NonFinite(format!(
            "second difference at x = {x}, h = {h}"
        )));
    }
    Ok((fm - T::lit(2.0) * f0 + fp) / (h * h))
}

/// `(f(x+h) - f(x-h)) / 2h`.
pub fn central_first_difference<T, F>(f: F, x: T, h: T) -> Result<T>
where
    T: Real,
    F: Fn(T) -> T,
{
    if !(h > T::zero()) {
        return invalid(format!("difference step must be positive, got {h}"));
    }
    let (fm, fp) = (f(x - h), f(x + h));
    if !(fm.is_finite() && fp.is_finite()) {
        return Err(Error::NonFinite(format!("first difference at x = {x}, h = {h}")));
    }
    Ok((fp - fm) / (T::lit(2.0) * h))
}

/// Minimum number of nodes of a [`GridFunction`].
pub const MIN_GRID_NODES: usize = 5;

/// Values of a function of latitude at the uniform nodes `theta_i = i pi / (n - 1)`,
/// both poles included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<T>", into = "Vec<T>")]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct GridFunction<T> {
    values: Vec<T>,
}

impl<T: Real> TryFrom<Vec<T>> for GridFunction<T> {
    type Error = Error;

    fn try_from(values: Vec<T>) -> Result<Self> {
        Self::new(values)
    }
}

impl<T: Real> From<GridFunction<T>> for Vec<T> {
    fn from(g: GridFunction<T>) -> Self {
        g.values
    }
}

impl<T: Real> GridFunction<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.len() < MIN_GRID_NODES {
            return invalid(format!(
                "grid needs at least {MIN_GRID_NODES} nodes, got {}",
                values.len()
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("grid value at node {i}")));
        }
        Ok(Self { values })
    }

    /// Samples `f` at the `n` grid nodes.
    pub fn from_fn(n: usize, f: impl Fn(T) -> T) -> Result<Self> {
        if n < MIN_GRID_NODES {
            return invalid(format!("grid needs at least {MIN_GRID_NODES} nodes, got {n}"));
        }
        let h = T::PI() / T::from_usize_lossy(n - 1);
        Self::new((0..n).map(|i| f(h * T::from_usize_lossy(i))).collect())
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn spacing(&self) -> T {
        T::PI() / T::from_usize_lossy(self.n() - 1)
    }

    pub fn theta(&self, i: usize) -> T {
        if i + 1 == self.n() {
            T::PI()
        } else {
            self.spacing() * T::from_usize_lossy(i)
        }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Result<Self> {
        Self::new(self.values.iter().map(|&v| f(v)).collect())
    }

    /// Piecewise-linear interpolation, clamped to `[0, pi]`.
    pub fn interp_linear(&self, theta: T) -> T {
        let h = self.spacing();
        let last = self.n() - 1;
        let x = (theta / h).max(T::zero());
        let i = x.floor().to_usize().unwrap_or(0).min(last - 1);
        let w = (x - T::from_usize_lossy(i)).min(T::one());
        self.values[i] * (T::one() - w) + self.values[i + 1] * w
    }

    /// Composite trapezoid rule of the node values over `[0, pi]`.
    pub fn trapezoid(&self) -> T {
        let n = self.n();
        let half = T::lit(0.5);
        let inner: T = self.values[1..n - 1].iter().copied().sum();
        self.spacing() * (inner + half * (self.values[0] + self.values[n - 1]))
    }

    /// Trapezoid integral of `weight(theta_i) * v_i` over `[0, pi]`.
    pub fn trapezoid_weighted(&self, weight: impl Fn(T) -> T) -> T {
        let n = self.n();
        let h = self.spacing();
        let mut acc = T::zero();
        for (i, &v) in self.values.iter().enumerate() {
            let w = if i == 0 || i + 1 == n { T::lit(0.5) } else { T::one() };
            acc += w * weight(self.theta(i)) * v;
        }
        acc * h
    }

    /// Index and value of the largest node value (first one on ties).
    pub fn argmax(&self) -> (usize, T) {
        let mut best = (0, self.values[0]);
        for (i, &v) in self.values.iter().enumerate().skip(1) {
            if v > best.1 {
                best = (i, v);
            }
        }
        best
    }
}

/// Vertex of the parabola through `(-1, ym), (0, y0), (1, yp)`.
///
/// Returns the offset of the vertex in units of the node spacing and the
/// interpolated value there. A degenerate (flat) parabola gives offset 0.
pub fn parabolic_vertex<T: Real>(ym: T, y0: T, yp: T) -> (T, T) {
    let curvature = ym - T::lit(2.0) * y0 + yp;
    if curvature == T::zero() {
        return (T::zero(), y0);
    }
    let offset = T::lit(0.5) * (ym - yp) / curvature;
    let offset = offset.max(-T::one()).min(T::one());
    let value = y0 - T::lit(0.25) * (ym - yp) * offset;
    (offset, value)
}

/// Quadratic interpolation through three equally spaced values at offset `s`
/// (in units of the spacing) from the middle one.
pub fn quadratic_at<T: Real>(ym: T, y0: T, yp: T, s: T) -> T {
    let half = T::lit(0.5);
    y0 + half * s * (yp - ym) + half * s * s * (yp - T::lit(2.0) * y0 + ym)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CriticalKind {
    Max,
    Min,
    SaddleFlat,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint<T> {
    pub index: usize,
    pub kind: CriticalKind,
    /// Node latitude.
    pub theta: T,
    /// Latitude of the parabola vertex through the node and its neighbours
    /// (equal to `theta` for flat runs).
    pub refined_theta: T,
}

/// Interior critical points of a grid function.
///
/// Strict extrema are the interior nodes where the forward difference changes
/// sign, classified by the sign of the second difference. Every maximal run of
/// exactly-zero differences is reported once at its middle node: as a plateau
/// `Max`/`Min` when the differences on either side have opposite signs, and as
/// `SaddleFlat` otherwise (monotone plateaus, or a constant function).
pub fn critical_points<T: Real>(f: &GridFunction<T>) -> Vec<CriticalPoint<T>> {
    let v = f.values();
    let n = v.len();
    let sign = |d: T| -> i8 {
        if d > T::zero() {
            1
        } else if d < T::zero() {
            -1
        } else {
            0
        }
    };
    let diffs: Vec<i8> = (0..n - 1).map(|i| sign(v[i + 1] - v[i])).collect();
    let h = f.spacing();
    let mut out = Vec::new();

    let mut j = 0;
    while j < diffs.len() {
        if diffs[j] == 0 {
            let start = j;
            while j < diffs.len() && diffs[j] == 0 {
                j += 1;
            }
            // run covers nodes start ..= j
            let left = start.checked_sub(1).map(|k| diffs[k]);
            let right = diffs.get(j).copied();
            let kind = match (left, right) {
                (Some(1), Some(-1)) => CriticalKind::Max,
                (Some(-1), Some(1)) => CriticalKind::Min,
                _ => CriticalKind::SaddleFlat,
            };
            let idx = (start + j) / 2;
            let mid_theta = (f.theta(start) + f.theta(j)) / T::lit(2.0);
            out.push(CriticalPoint {
                index: idx,
                kind,
                theta: f.theta(idx),
                refined_theta: mid_theta,
            });
            continue;
        }
        j += 1;
    }

    for i in 1..n - 1 {
        let (l, r) = (diffs[i - 1], diffs[i]);
        if l == 0 || r == 0 || l == r {
            continue;
        }
        let second = v[i - 1] - T::lit(2.0) * v[i] + v[i + 1];
        let kind = if second < T::zero() {
            CriticalKind::Max
        } else if second > T::zero() {
            CriticalKind::Min
        } else {
            CriticalKind::SaddleFlat
        };
        let (offset, _) = parabolic_vertex(v[i - 1], v[i], v[i + 1]);
        out.push(CriticalPoint {
            index: i,
            kind,
            theta: f.theta(i),
            refined_theta: f.theta(i) + offset * h,
        });
    }
    out.sort_by_key(|c| c.index);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn cfg(tol: f64) -> QuadratureConfig<f64> {
        QuadratureConfig::new(tol, 50).unwrap()
    }

    #[test]
    fn sine_over_half_period() {
        let i = integrate_adaptive(f64::sin, 0.0, PI, &cfg(1e-10)).unwrap();
        assert_abs_diff_eq!(i, 2.0, epsilon = 1e-10);
    }

    #[test]
    fn sine_squared() {
        let i = integrate_adaptive(|x: f64| x.sin().powi(2), 0.0, PI, &cfg(1e-10)).unwrap();
        assert_abs_diff_eq!(i, PI / 2.0, epsilon = 1e-10);
    }

    #[test]
    fn berger_integrand_collapses_at_unit_rho() {
        let f = |s: f64| {
            let s2 = s.sin().powi(2);
            s.sin() * ((1.0 - s2) * 1.0 + s2 * 1.0).sqrt()
        };
        let i = integrate_adaptive(f, 0.0, PI, &cfg(1e-10)).unwrap();
        assert_abs_diff_eq!(i, 2.0, epsilon = 1e-10);
    }

    #[test]
    fn f32_quadrature() {
        let c = QuadratureConfig::new(1e-4f32, 30).unwrap();
        let i = integrate_adaptive(f32::sin, 0.0, std::f32::consts::PI, &c).unwrap();
        assert!((i - 2.0).abs() < 1e-4);
    }

    #[test]
    fn depth_exhaustion_reports_estimate() {
        let c = QuadratureConfig::new(1e-14, 2).unwrap();
        let err = integrate_adaptive(|x: f64| x.sqrt(), 0.0, 1.0, &c).unwrap_err();
        match err {
            Error::QuadratureDepth {
                estimate,
                error_bound,
            } => {
                assert!((estimate - 2.0 / 3.0).abs() < 1e-2);
                assert!(error_bound > 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_reversed_bounds_and_bad_config() {
        assert!(integrate_adaptive(f64::sin, 1.0, 1.0, &cfg(1e-8)).is_err());
        assert!(QuadratureConfig::new(0.0, 10).is_err());
        assert!(QuadratureConfig::new(1e-8, 0).is_err());
    }

    #[test]
    fn non_finite_integrand_is_an_error() {
        let r = integrate_adaptive(|x: f64| 1.0 / (x - 0.5), 0.0, 1.0, &cfg(1e-8));
        assert!(r.is_err());
    }

    #[test]
    fn second_difference_examples() {
        assert_eq!(central_second_difference(|x: f64| x * x, 0.0, 0.1).unwrap(), 2.0);
        assert_eq!(central_second_difference(|x: f64| x * x * x, 0.0, 0.1).unwrap(), 0.0);
        assert!(central_second_difference(|x: f64| x, 0.0, 0.0).is_err());
        assert!(central_second_difference(|x: f64| 1.0 / x, 0.0, 0.1).is_err());
    }

    #[test]
    fn sine_squared_has_single_max_at_equator() {
        let g = GridFunction::from_fn(101, |t: f64| t.sin().powi(2)).unwrap();
        let cps = critical_points(&g);
        assert_eq!(cps.len(), 1);
        assert_eq!(cps[0].index, 50);
        assert_eq!(cps[0].kind, CriticalKind::Max);
    }

    #[test]
    fn constant_has_one_flat_run() {
        let g = GridFunction::from_fn(11, |_t: f64| 3.0).unwrap();
        let cps = critical_points(&g);
        assert_eq!(cps.len(), 1);
        assert_eq!(cps[0].kind, CriticalKind::SaddleFlat);
    }

    #[test]
    fn plateau_between_rise_and_fall_is_a_max() {
        let g = GridFunction::new(vec![0.0, 1.0, 2.0, 2.0, 1.0, 0.0]).unwrap();
        let cps = critical_points(&g);
        assert_eq!(cps.len(), 1);
        assert_eq!(cps[0].kind, CriticalKind::Max);
        assert_eq!(cps[0].refined_theta, (g.theta(2) + g.theta(3)) / 2.0);
        let g = GridFunction::new(vec![0.0, 1.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(critical_points(&g)[0].kind, CriticalKind::SaddleFlat);
    }

    #[test]
    fn skewed_bump_against_dense_scan() {
        let f = |t: f64| t.sin().powi(2) * (1.0 + 0.3 * t.cos()).powi(4);
        // dense scan oracle
        let m = 100_000;
        let (mut best_t, mut best_v) = (0.0, f64::MIN);
        for i in 0..=m {
            let t = PI * i as f64 / m as f64;
            if f(t) > best_v {
                best_v = f(t);
                best_t = t;
            }
        }
        let g = GridFunction::from_fn(401, f).unwrap();
        let cps = critical_points(&g);
        assert_eq!(cps.len(), 1);
        assert_eq!(cps[0].kind, CriticalKind::Max);
        assert!((cps[0].theta - best_t).abs() <= g.spacing());
        assert!((cps[0].refined_theta - best_t).abs() < 1e-4);
    }

    #[test]
    fn grid_validation() {
        assert!(GridFunction::new(vec![1.0; 4]).is_err());
        assert!(GridFunction::new(vec![1.0, 1.0, f64::NAN, 1.0, 1.0]).is_err());
        let g = GridFunction::from_fn(5, |t: f64| t).unwrap();
        assert_eq!(g.theta(4), PI);
        assert_abs_diff_eq!(g.interp_linear(PI / 8.0), PI / 8.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.interp_linear(PI), PI, epsilon = 1e-15);
    }

    #[test]
    fn trapezoid_is_exact_for_sine_squared() {
        let g = GridFunction::from_fn(9, |t: f64| t.sin().powi(2)).unwrap();
        assert_abs_diff_eq!(g.trapezoid(), PI / 2.0, epsilon = 1e-14);
    }

    #[test]
    fn parabola_vertex_recovers_shift() {
        // y = -(x - 0.3)^2 sampled at -1, 0, 1
        let y = |x: f64| -(x - 0.3).powi(2);
        let (s, v) = parabolic_vertex(y(-1.0), y(0.0), y(1.0));
        assert_abs_diff_eq!(s, 0.3, epsilon = 1e-14);
        assert_abs_diff_eq!(v, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(quadratic_at(y(-1.0), y(0.0), y(1.0), 0.7), y(0.7), epsilon = 1e-14);
    }
}
