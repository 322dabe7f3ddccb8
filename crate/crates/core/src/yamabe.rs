//! Normalized Yamabe flow `dg/dt = (r - R) g` on axisymmetric profiles.
//!
//! With `g = u^4 g_round` the flow reads `u_t = (u / 4) (r - R)`, since
//! `d/dt (u^4) = 4 u^3 u_t = (r - R) u^4`. The diffusive part of `-u R / 4` is
//! `2 u^-4 Delta u`, which fixes the explicit stability limit
//! `dt <= CFL_CONSTANT * h^2 / max(2 u^-4)`.

use serde::{Deserialize, Serialize};

use crate::conformal::{
    interp_quadratic, minimal_coordinate_spheres, scalar_curvature_field, scalar_curvature_into,
    volume_of, width_upper_bound_at, AxisymProfile, LatitudeSphere,
};
use crate::error::{invalid, Error, Result};
use crate::numerics::{CriticalKind, GridFunction};
use crate::scalar::Real;

/// Safety factor of the explicit step limit. A Gershgorin bound on the
/// fourth-order Laplacian with the pole closure gives `|lambda| <= 16 / h^2`,
/// so forward Euler is stable for `c <= 1/8`.
pub const CFL_CONSTANT: f64 = 0.1;

/// Flow is declared converged once `sup |R - r|` drops below this.
pub const CONVERGENCE_TOL: f64 = 1e-3;

/// Default time step of [`FlowConfig`].
pub const DEFAULT_DT: f64 = 1e-5;

/// Slack on `W r <= 24 pi` in [`theorem1_monitor`].
pub const THEOREM1_TOL: f64 = 1e-3;

pub const HYPOTHESIS_NOTE: &str =
    "positive Ricci curvature of the initial metric and along the flow is assumed, not verified";

fn weighted_sums<T: Real>(u: &[T], h: T, rfield: &[T]) -> (T, T) {
    let n = u.len();
    let (mut num, mut den) = (T::zero(), T::zero());
    for i in 1..n - 1 {
        let s = (h * T::from_usize_lossy(i)).sin();
        let u2 = u[i] * u[i];
        let w = u2 * u2 * u2 * s * s;
        num += rfield[i] * w;
        den += w;
    }
    (num, den)
}

fn average_of<T: Real>(u: &[T], h: T, rfield: &[T]) -> T {
    let (num, den) = weighted_sums(u, h, rfield);
    num / den
}

/// `r_g = (int R dV) / vol`, both integrals by the nodal trapezoid rule.
pub fn average_scalar_curvature<T: Real>(p: &AxisymProfile<T>) -> T {
    let r = scalar_curvature_field(p);
    average_of(p.values(), p.grid().spacing(), r.values())
}

/// Normalized total curvature `E(g) = (int R dV) / vol^(1/3)`.
pub fn hilbert_einstein_energy<T: Real>(p: &AxisymProfile<T>) -> T {
    let vol = crate::conformal::volume(p);
    average_scalar_curvature(p) * vol.powf(T::lit(2.0 / 3.0))
}

/// Velocity of the conformal factor, `u_t = (u / 4) (r - R)`.
#[inline]
pub fn conformal_velocity<T: Real>(u: T, r: T, big_r: T) -> T {
    u * (r - big_r) / T::lit(4.0)
}

fn stability_limit_of<T: Real>(u: &[T], h: T) -> T {
    let umin = u.iter().copied().fold(T::infinity(), T::min);
    let u2 = umin * umin;
    T::lit(CFL_CONSTANT) * h * h * u2 * u2 / T::lit(2.0)
}

/// Largest admissible explicit step for the profile.
pub fn stability_limit<T: Real>(p: &AxisymProfile<T>) -> T {
    stability_limit_of(p.values(), p.grid().spacing())
}

/// Snapshot of the flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct FlowState<T> {
    pub time: T,
    pub profile: AxisymProfile<T>,
    pub r_avg: T,
    pub energy: T,
    pub volume: T,
    pub width_bound: T,
    /// Largest-area minimal latitude sphere.
    pub max_sphere: LatitudeSphere<T>,
    pub sup_r_minus_r: T,
}

impl<T: Real> FlowState<T> {
    pub fn new(profile: AxisymProfile<T>, time: T) -> Result<Self> {
        let rfield = scalar_curvature_field(&profile);
        let h = profile.grid().spacing();
        let r_avg = average_of(profile.values(), h, rfield.values());
        let volume = volume_of(profile.values(), h);
        let (_, width_bound) = width_upper_bound_at(&profile);
        let max_sphere = minimal_coordinate_spheres(&profile)?
            .into_iter()
            .filter(|s| s.kind == CriticalKind::Max)
            .max_by(|a, b| a.area.partial_cmp(&b.area).unwrap_or(std::cmp::Ordering::Equal))
            .ok_or_else(|| Error::NonFinite("area profile has no interior maximum".into()))?;
        let sup = sup_deviation(rfield.values(), r_avg);
        Ok(Self {
            time,
            r_avg,
            energy: r_avg * volume.powf(T::lit(2.0 / 3.0)),
            volume,
            width_bound,
            max_sphere,
            sup_r_minus_r: sup,
            profile,
        })
    }
}

fn sup_deviation<T: Real>(rfield: &[T], r: T) -> T {
    rfield.iter().fold(T::zero(), |m, &v| m.max((v - r).abs()))
}

/// One explicit Euler step of length `dt` followed by rescaling to the
/// volume `v0`. The caller has checked the step limit.
fn euler_substep<T: Real>(
    u: &mut [T],
    rfield: &[T],
    h: T,
    dt: T,
    v0: T,
    time: T,
) -> Result<()> {
    let r = average_of(u, h, rfield);
    let before: Vec<f64> = u.iter().map(|v| v.as_f64()).collect();
    for (ui, &ri) in u.iter_mut().zip(rfield) {
        *ui += dt * conformal_velocity(*ui, r, ri);
    }
    if let Some(node) = u.iter().position(|&v| !(v > T::zero()) || !v.is_finite()) {
        return Err(Error::PositivityLoss {
            time: time.as_f64(),
            node,
            last_good: before,
        });
    }
    let scale = (v0 / volume_of(u, h)).powf(T::lit(1.0 / 6.0));
    for ui in u.iter_mut() {
        *ui *= scale;
    }
    Ok(())
}

/// One flow step of length `dt`, rejected if `dt` exceeds
/// [`stability_limit`]. The volume is restored to that of `s`.
pub fn step<T: Real>(s: &FlowState<T>, dt: T) -> Result<FlowState<T>> {
    if !(dt > T::zero()) {
        return invalid(format!("time step must be positive, got {dt}"));
    }
    let limit = stability_limit(&s.profile);
    if dt > limit {
        return Err(Error::UnstableStep {
            dt: dt.as_f64(),
            limit: limit.as_f64(),
        });
    }
    let h = s.profile.grid().spacing();
    let mut u = s.profile.values().to_vec();
    let mut rfield = vec![T::zero(); u.len()];
    scalar_curvature_into(&u, h, &mut rfield);
    euler_substep(&mut u, &rfield, h, dt, s.volume, s.time)?;
    FlowState::new(s.profile.with_values(u)?, s.time + dt)
}

/// What [`run`] does with a time step above the stability limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepPolicy {
    /// Fail with [`Error::UnstableStep`].
    Strict,
    /// Split the step into equal stable substeps.
    Subdivide,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig<T> {
    pub t_end: T,
    pub dt: T,
    /// Steps between stored states; the final state is always stored.
    pub sample_every: usize,
    pub convergence_tol: T,
    pub policy: StepPolicy,
}

impl<T: Real> FlowConfig<T> {
    pub fn new(t_end: T, dt: T) -> Self {
        Self {
            t_end,
            dt,
            sample_every: 1000,
            convergence_tol: T::lit(CONVERGENCE_TOL),
            policy: StepPolicy::Subdivide,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.t_end > T::zero()) {
            return invalid(format!("t_end must be positive, got {}", self.t_end));
        }
        if !(self.dt > T::zero()) {
            return invalid(format!("dt must be positive, got {}", self.dt));
        }
        if self.sample_every == 0 {
            return invalid("sample_every must be at least 1");
        }
        if !(self.convergence_tol > T::zero()) {
            return invalid("convergence tolerance must be positive");
        }
        Ok(())
    }
}

/// Scalar record after each step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepMonitor<T> {
    pub t: T,
    pub volume: T,
    pub r_avg: T,
    pub energy: T,
    pub width_bound: T,
    /// Latitude of the refined area maximum.
    pub max_theta: T,
    pub sup_r_minus_r: T,
    /// `int_Sigma (r - R) dA` over the latitude sphere at `max_theta`.
    pub width_rate: T,
    pub substeps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlowStatus {
    Converged,
    ReachedEnd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct FlowTrace<T> {
    pub states: Vec<FlowState<T>>,
    pub step_size: T,
    pub monitors: Vec<StepMonitor<T>>,
    pub status: FlowStatus,
    pub initial_volume: T,
    /// Largest `|V - V0| / V0` after renormalization over all steps.
    pub max_volume_drift: T,
    /// Largest per-step increase of the energy (zero if it never increased).
    pub max_energy_increase: T,
}

impl<T: Real> FlowTrace<T> {
    pub fn final_state(&self) -> &FlowState<T> {
        self.states.last().expect("a trace holds at least the initial state")
    }
}

fn monitor_of<T: Real>(u: &[T], h: T, rfield: &[T], t: T, substeps: usize) -> StepMonitor<T> {
    let (num, den) = weighted_sums(u, h, rfield);
    let r = num / den;
    let volume = T::lit(4.0) * T::PI() * h * den;
    let four_pi = T::lit(4.0) * T::PI();
    let areas: Vec<T> = u
        .iter()
        .enumerate()
        .map(|(i, &ui)| {
            let s = (h * T::from_usize_lossy(i)).sin();
            let u2 = ui * ui;
            four_pi * u2 * u2 * s * s
        })
        .collect();
    let a = GridFunction::new(areas).expect("flow keeps the profile finite");
    let (i, _) = a.argmax();
    let i = i.clamp(1, a.n() - 2);
    let av = a.values();
    let (offset, width_bound) = crate::numerics::parabolic_vertex(av[i - 1], av[i], av[i + 1]);
    let max_theta = a.theta(i) + offset * h;
    let rgrid = GridFunction::new(rfield.to_vec()).expect("finite");
    let r_at = interp_quadratic(&rgrid, max_theta);
    StepMonitor {
        t,
        volume,
        r_avg: r,
        energy: r * volume.powf(T::lit(2.0 / 3.0)),
        width_bound,
        max_theta,
        sup_r_minus_r: sup_deviation(rfield, r),
        width_rate: (r - r_at) * width_bound,
        substeps,
    }
}

/// Integrates the flow from `p0` until `t_end` or until
/// `sup |R - r| < convergence_tol`. A monitor record is kept for every step
/// (including `t = 0`), full states every `sample_every` steps.
pub fn run<T: Real>(p0: &AxisymProfile<T>, cfg: &FlowConfig<T>) -> Result<FlowTrace<T>> {
    cfg.validate()?;
    let h = p0.grid().spacing();
    let mut u = p0.values().to_vec();
    let n = u.len();
    let mut rfield = vec![T::zero(); n];
    scalar_curvature_into(&u, h, &mut rfield);
    let v0 = volume_of(&u, h);

    let first = monitor_of(&u, h, &rfield, T::zero(), 0);
    let mut monitors = vec![first];
    let mut states = vec![FlowState::new(p0.clone(), T::zero())?];
    let mut max_drift = T::zero();
    let mut max_increase = T::zero();
    let mut status = FlowStatus::ReachedEnd;

    let steps = (cfg.t_end / cfg.dt).ceil().to_usize().unwrap_or(usize::MAX);
    if first.sup_r_minus_r < cfg.convergence_tol {
        status = FlowStatus::Converged;
    } else {
        for k in 1..=steps {
            let t_prev = cfg.dt * T::from_usize_lossy(k - 1);
            let limit = stability_limit_of(&u, h);
            let substeps = if cfg.dt <= limit {
                1
            } else if cfg.policy == StepPolicy::Strict {
                return Err(Error::UnstableStep {
                    dt: cfg.dt.as_f64(),
                    limit: limit.as_f64(),
                });
            } else {
                (cfg.dt / limit).ceil().to_usize().unwrap_or(usize::MAX)
            };
            let dt_sub = cfg.dt / T::from_usize_lossy(substeps);
            for j in 0..substeps {
                if j > 0 {
                    scalar_curvature_into(&u, h, &mut rfield);
                }
                let t = t_prev + dt_sub * T::from_usize_lossy(j);
                euler_substep(&mut u, &rfield, h, dt_sub, v0, t)?;
            }
            scalar_curvature_into(&u, h, &mut rfield);
            let t = cfg.dt * T::from_usize_lossy(k);
            let m = monitor_of(&u, h, &rfield, t, substeps);
            let prev = monitors.last().expect("non-empty");
            max_drift = max_drift.max(((m.volume - v0) / v0).abs());
            max_increase = max_increase.max(m.energy - prev.energy);
            let done = m.sup_r_minus_r < cfg.convergence_tol;
            monitors.push(m);
            if done || k % cfg.sample_every == 0 || k == steps {
                states.push(FlowState::new(p0.with_values(u.clone())?, t)?);
            }
            if done {
                status = FlowStatus::Converged;
                break;
            }
        }
    }
    Ok(FlowTrace {
        states,
        step_size: cfg.dt,
        monitors,
        status,
        initial_volume: v0,
        max_volume_drift: max_drift,
        max_energy_increase: max_increase,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WidthDerivativeRecord<T> {
    pub t: T,
    /// Centered difference of the width bound.
    pub lhs: T,
    /// `int_Sigma (r - R) dA` on the maximal latitude sphere.
    pub rhs: T,
    pub residual: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidthDerivativeReport<T> {
    pub records: Vec<WidthDerivativeRecord<T>>,
    pub max_abs_residual: T,
    pub max_abs_rhs: T,
    /// `max |residual| / max |rhs|`, zero for a stationary trace.
    pub relative_residual: T,
}

/// Compares `dW/dt` with `int_Sigma (r - R) dA` at every interior step of
/// the trace. Along the flow `Tr_Sigma(dg/dt) / 2 = r - R`.
pub fn width_derivative_monitor<T: Real>(trace: &FlowTrace<T>) -> Result<WidthDerivativeReport<T>> {
    let m = &trace.monitors;
    if m.len() < 3 {
        return invalid(format!(
            "width derivative monitor needs at least 3 records, trace has {}",
            m.len()
        ));
    }
    let records: Vec<_> = m
        .windows(3)
        .map(|w| {
            let lhs = (w[2].width_bound - w[0].width_bound) / (w[2].t - w[0].t);
            let rhs = w[1].width_rate;
            WidthDerivativeRecord {
                t: w[1].t,
                lhs,
                rhs,
                residual: lhs - rhs,
            }
        })
        .collect();
    let max_res = records.iter().fold(T::zero(), |a, r| a.max(r.residual.abs()));
    let max_rhs = records.iter().fold(T::zero(), |a, r| a.max(r.rhs.abs()));
    let rel = if max_rhs > T::zero() { max_res / max_rhs } else { T::zero() };
    Ok(WidthDerivativeReport {
        records,
        max_abs_residual: max_res,
        max_abs_rhs: max_rhs,
        relative_residual: rel,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Report<T> {
    pub tau_star: T,
    pub width_at_max: T,
    pub r_at_max: T,
    pub product_at_max: T,
    pub bound: T,
    pub tol: T,
    pub pass: bool,
    pub final_normalized_width: T,
    pub round_normalized_width: T,
    pub final_relative_error: T,
    /// `min_t r(t) - r(t_end)`; non-negative when `r` decreases.
    pub r_margin: T,
    pub hypothesis: String,
}

/// Evaluates `W(tau*) r(tau*) <= 24 pi` at the step maximizing the width
/// bound and compares the final normalized width with the round value.
pub fn theorem1_monitor<T: Real>(trace: &FlowTrace<T>, tol: T) -> Theorem1Report<T> {
    let m = &trace.monitors;
    let best = m
        .iter()
        .fold(&m[0], |b, x| if x.width_bound > b.width_bound { x } else { b });
    let last = m.last().expect("non-empty");
    let product = best.width_bound * best.r_avg;
    let bound = T::lit(24.0) * T::PI();
    let round = (T::lit(16.0) / T::PI()).cbrt();
    let final_nw = last.width_bound / last.volume.powf(T::lit(2.0 / 3.0));
    let r_min = m.iter().fold(T::infinity(), |a, x| a.min(x.r_avg));
    Theorem1Report {
        tau_star: best.t,
        width_at_max: best.width_bound,
        r_at_max: best.r_avg,
        product_at_max: product,
        bound,
        tol,
        pass: product <= bound + tol,
        final_normalized_width: final_nw,
        round_normalized_width: round,
        final_relative_error: ((final_nw - round) / round).abs(),
        r_margin: r_min - last.r_avg,
        hypothesis: HYPOTHESIS_NOTE.to_string(),
    }
}

/// Volume-preserving conformal family
/// `g(t) = vol(g)^(2/3) (1 + t f) / vol((1 + t f) g)^(2/3) * g`
/// with `f` of zero `g`-average.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct ConformalVariation<T> {
    pub base: AxisymProfile<T>,
    /// The mean-zero direction `f`.
    pub direction: GridFunction<T>,
    /// Average removed from the supplied function.
    pub removed_mean: T,
    pub volume: T,
}

impl<T: Real> ConformalVariation<T> {
    /// Profile of `g(t)`; `1 + t f` must stay positive.
    pub fn profile_at(&self, t: T) -> Result<AxisymProfile<T>> {
        let u = self.base.values();
        let f = self.direction.values();
        let h = self.base.grid().spacing();
        let mut w = Vec::with_capacity(u.len());
        for (&ui, &fi) in u.iter().zip(f) {
            let factor = T::one() + t * fi;
            if !(factor > T::zero()) {
                return invalid(format!("1 + t f is not positive at t = {t}"));
            }
            w.push(ui * factor.powf(T::lit(0.25)));
        }
        let scale = (self.volume / volume_of(&w, h)).powf(T::lit(1.0 / 6.0));
        for v in w.iter_mut() {
            *v *= scale;
        }
        self.base.with_values(w)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct TestDirection<T> {
    pub variation: ConformalVariation<T>,
    pub max_theta: T,
    /// `int_Sigma f dA` over the maximal latitude sphere.
    pub trace_integral_over_max_sphere: T,
}

/// Builds the volume-preserving family in the direction `f` (after removing
/// its `g`-average) and integrates `f` over the maximal latitude sphere.
pub fn maximum_test_direction<T: Real>(p: &AxisymProfile<T>, f: &GridFunction<T>) -> Result<TestDirection<T>> {
    if f.n() != p.n() {
        return invalid(format!("direction has {} nodes, profile has {}", f.n(), p.n()));
    }
    let h = p.grid().spacing();
    let mean = average_of(p.values(), h, f.values());
    let direction = f.map(|v| v - mean)?;
    // the sphere's area is the refined width bound, as in the flow monitors
    let (theta, area) = width_upper_bound_at(p);
    let value = interp_quadratic(&direction, theta) * area;
    Ok(TestDirection {
        variation: ConformalVariation {
            base: p.clone(),
            direction,
            removed_mean: mean,
            volume: volume_of(p.values(), h),
        },
        max_theta: theta,
        trace_integral_over_max_sphere: value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conformal::{volume, width_upper_bound};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn tilted(n: usize, a: f64) -> AxisymProfile<f64> {
        AxisymProfile::from_fn(n, |t: f64| 1.0 + a * t.cos()).unwrap()
    }

    #[test]
    fn velocity_is_the_conformal_flow() {
        // d/dt u^4 = 4 u^3 u_t must equal (r - R) u^4
        for &(u, r, big_r) in &[(1.0f64, 6.0, 5.0), (0.7, 6.2, 9.1), (1.3, 5.9, 2.0)] {
            let v = conformal_velocity(u, r, big_r);
            assert_abs_diff_eq!(4.0 * u * u * u * v, (r - big_r) * u.powi(4), epsilon = 1e-12);
            let dt = 1e-7;
            let quotient = ((u + dt * v).powi(4) - u.powi(4)) / dt;
            assert_abs_diff_eq!(quotient, (r - big_r) * u.powi(4), epsilon = 1e-5);
        }
    }

    #[test]
    fn averages_and_energy() {
        let round = AxisymProfile::constant(201, 1.0).unwrap();
        assert_abs_diff_eq!(average_scalar_curvature(&round), 6.0, epsilon = 1e-8);
        let e_round = 6.0 * (2.0 * PI * PI).powf(2.0 / 3.0);
        assert_abs_diff_eq!(hilbert_einstein_energy(&round), e_round, epsilon = 1e-6);
        for c in [0.5f64, 2.0, 10.0] {
            let p = AxisymProfile::constant(201, c).unwrap();
            assert_abs_diff_eq!(average_scalar_curvature(&p), 6.0 / c.powi(4), epsilon = 1e-8);
            assert_abs_diff_eq!(hilbert_einstein_energy(&p), e_round, epsilon = 1e-6);
        }
        assert!(hilbert_einstein_energy(&tilted(401, 0.3)) > e_round);
    }

    #[test]
    fn average_curvature_converges() {
        let coarse = average_scalar_curvature(&tilted(401, 0.3));
        let fine = average_scalar_curvature(&tilted(3201, 0.3));
        assert!(((coarse - fine) / fine).abs() < 1e-5);
    }

    #[test]
    fn energy_is_scale_invariant() {
        let p = tilted(201, 0.3);
        let e = hilbert_einstein_energy(&p);
        for c in [0.5f64, 2.0, 10.0] {
            let q = p.scaled(c).unwrap();
            assert!(((hilbert_einstein_energy(&q) - e) / e).abs() < 1e-10);
        }
    }

    #[test]
    fn round_is_fixed_by_step() {
        for c in [1.0f64, 2.0] {
            let s = FlowState::new(AxisymProfile::constant(101, c).unwrap(), 0.0).unwrap();
            let dt = 0.5 * stability_limit(&s.profile);
            let next = step(&s, dt).unwrap();
            for (a, b) in next.profile.values().iter().zip(s.profile.values()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-13);
            }
            assert_abs_diff_eq!(next.r_avg, 6.0 / c.powi(4), epsilon = 1e-10);
        }
    }

    #[test]
    fn step_rejects_unstable_dt() {
        let s = FlowState::new(tilted(401, 0.3), 0.0).unwrap();
        assert!(matches!(step(&s, 1e-5), Err(Error::UnstableStep { .. })));
        let cfg = FlowConfig {
            policy: StepPolicy::Strict,
            ..FlowConfig::new(1e-3, 1e-5)
        };
        assert!(matches!(run(&tilted(401, 0.3), &cfg), Err(Error::UnstableStep { .. })));
        assert!(step(&s, -1.0).is_err());
    }

    #[test]
    fn step_conserves_volume_and_lowers_energy() {
        let mut s = FlowState::new(tilted(201, 0.3), 0.0).unwrap();
        let v0 = s.volume;
        let dt = stability_limit(&s.profile);
        for _ in 0..20 {
            let next = step(&s, dt).unwrap();
            assert!(((next.volume - v0) / v0).abs() < 1e-12);
            assert!(next.energy <= s.energy + 1e-8);
            s = next;
        }
        assert!(s.time > 0.0);
    }

    #[test]
    fn round_run_converges_immediately() {
        let trace = run(&AxisymProfile::constant(101, 1.0).unwrap(), &FlowConfig::new(1.0, 1e-5)).unwrap();
        assert_eq!(trace.status, FlowStatus::Converged);
        assert_eq!(trace.monitors.len(), 1);
        assert_eq!(trace.states.len(), 1);
    }

    #[test]
    fn short_run_monitors() {
        let cfg = FlowConfig {
            sample_every: 10,
            ..FlowConfig::new(2e-3, 1e-4)
        };
        let trace = run(&tilted(101, 0.3), &cfg).unwrap();
        assert_eq!(trace.status, FlowStatus::ReachedEnd);
        assert_eq!(trace.monitors.len(), 21);
        assert_eq!(trace.states.len(), 3);
        assert!(trace.monitors.windows(2).all(|w| w[1].t > w[0].t));
        assert!(trace.max_volume_drift < 1e-12);
        assert!(trace.max_energy_increase <= 1e-8);
        let wd = width_derivative_monitor(&trace).unwrap();
        assert_eq!(wd.records.len(), 19);
        assert!(wd.max_abs_rhs > 0.0);
        let mut two = trace.clone();
        two.monitors.truncate(2);
        assert!(width_derivative_monitor(&two).is_err());
    }

    #[test]
    fn round_theorem1_equality() {
        let cfg = FlowConfig::new(1.0, 1e-5);
        let trace = run(&AxisymProfile::constant(101, 1.0).unwrap(), &cfg).unwrap();
        let rep = theorem1_monitor(&trace, THEOREM1_TOL);
        assert_abs_diff_eq!(rep.product_at_max, 24.0 * PI, epsilon = 1e-4);
        assert!(rep.pass);
        assert!(rep.final_relative_error < 1e-8);
    }

    #[test]
    fn test_direction_trivial_and_round() {
        let round = AxisymProfile::constant(201, 1.0).unwrap();
        let zero = GridFunction::from_fn(201, |_| 0.0).unwrap();
        let td = maximum_test_direction(&round, &zero).unwrap();
        assert_eq!(td.trace_integral_over_max_sphere, 0.0);
        // P_2(cos) has S^3-average -1/8, so the mean-zero part at the
        // equator is -1/2 + 1/8
        let p2 = GridFunction::from_fn(201, |t: f64| 0.5 * (3.0 * t.cos().powi(2) - 1.0)).unwrap();
        let td = maximum_test_direction(&round, &p2).unwrap();
        assert_abs_diff_eq!(td.variation.removed_mean, -0.125, epsilon = 1e-10);
        assert_abs_diff_eq!(td.trace_integral_over_max_sphere, -1.5 * PI, epsilon = 1e-8);
        let g = td.variation.profile_at(0.3).unwrap();
        assert_abs_diff_eq!(volume(&g), volume(&round), epsilon = 1e-12);
    }

    #[test]
    fn test_direction_matches_width_rate() {
        let p = tilted(401, 0.05);
        let rf = scalar_curvature_field(&p);
        let r = average_scalar_curvature(&p);
        let f = rf.map(|v| v - r).unwrap();
        let td = maximum_test_direction(&p, &f).unwrap();
        assert_abs_diff_eq!(td.variation.removed_mean, 0.0, epsilon = 1e-12);
        let h = p.grid().spacing();
        let m = monitor_of(p.values(), h, rf.values(), 0.0, 0);
        assert_abs_diff_eq!(td.trace_integral_over_max_sphere, -m.width_rate, epsilon = 1e-9);
        assert_abs_diff_eq!(m.width_bound, width_upper_bound(&p), epsilon = 1e-12);
    }
}
