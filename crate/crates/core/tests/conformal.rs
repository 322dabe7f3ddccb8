use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use widthlab::conformal::{self, AxisymProfile};
use widthlab::numerics::CriticalKind;
use widthlab::AxisymProfileF64;

fn cos_profile(n: usize, a: f64) -> AxisymProfileF64 {
    AxisymProfile::from_fn(n, |t: f64| 1.0 + a * t.cos()).unwrap()
}

/// `R` of `u = 1 + a cos(theta)`: the round Laplacian of `cos` is `-3 cos`.
fn exact_r(a: f64, t: f64) -> f64 {
    let u = 1.0 + a * t.cos();
    (24.0 * a * t.cos() + 6.0 * u) / u.powi(5)
}

fn r_error(n: usize, a: f64) -> f64 {
    let p = cos_profile(n, a);
    let g = conformal::scalar_curvature_field(&p);
    (0..n)
        .map(|i| (g.values()[i] - exact_r(a, g.theta(i))).abs())
        .fold(0.0, f64::max)
}

#[test]
fn scalar_curvature_refinement_order() {
    let (e1, e2, e3) = (r_error(51, 0.3), r_error(101, 0.3), r_error(201, 0.3));
    let o1 = (e1 / e2).log2();
    let o2 = (e2 / e3).log2();
    assert!(o1 >= 1.8 && o2 >= 1.8, "orders {o1} {o2} (errors {e1} {e2} {e3})");
}

#[test]
fn volume_refinement_order() {
    // vol(1 + a cos) = 4 pi int (1 + a cos)^6 sin^2, computed at high resolution
    let fine = conformal::volume(&cos_profile(4001, 0.3));
    let err = |n| (conformal::volume(&cos_profile(n, 0.3)) - fine).abs();
    let (e1, e2) = (err(21), err(41));
    assert!(e2 < 1e-10 || (e1 / e2).log2() >= 1.8, "{e1} {e2}");
}

#[test]
fn scale_coherence() {
    let p = cos_profile(401, 0.1);
    let r0 = conformal::scalar_curvature_field(&p);
    let v0 = conformal::volume(&p);
    let (t0, w0) = conformal::width_upper_bound_at(&p);
    let s0 = conformal::minimal_coordinate_spheres(&p).unwrap();
    for c in [0.5, 2.0, 10.0] {
        let q = p.scaled(c).unwrap();
        let c2: f64 = c * c;
        let r = conformal::scalar_curvature_field(&q);
        for (a, b) in r.values().iter().zip(r0.values()) {
            assert!((a * c2 * c2 - b).abs() <= 1e-10 * b.abs().max(1.0));
        }
        assert!((conformal::volume(&q) - v0 * c2 * c2 * c2).abs() <= 1e-12 * v0 * c2 * c2 * c2);
        let (t, w) = conformal::width_upper_bound_at(&q);
        assert_abs_diff_eq!(t, t0, epsilon = 1e-12);
        assert!((w - w0 * c2 * c2).abs() <= 1e-12 * w);
        let s = conformal::minimal_coordinate_spheres(&q).unwrap();
        assert_eq!(s.len(), s0.len());
        for (a, b) in s.iter().zip(&s0) {
            assert_eq!((a.index, a.nullity, a.kind), (b.index, b.nullity, b.kind));
            assert!((a.jacobi_Q * c2 * c2 - b.jacobi_Q).abs() <= 1e-6 * b.jacobi_Q.abs());
        }
    }
}

#[test]
fn area_derivative_integrates_to_zero() {
    for a in [0.05, 0.1, 0.3] {
        let area = conformal::area_profile(&cos_profile(401, a));
        let h = area.spacing();
        let v = area.values();
        let n = v.len();
        // centered differences inside, one-sided at the ends, trapezoid sum
        let d: Vec<f64> = (0..n)
            .map(|i| match i {
                0 => (v[1] - v[0]) / h,
                _ if i == n - 1 => (v[n - 1] - v[n - 2]) / h,
                _ => (v[i + 1] - v[i - 1]) / (2.0 * h),
            })
            .collect();
        let integral = h * (d.iter().sum::<f64>() - 0.5 * (d[0] + d[n - 1]));
        let scale = v.iter().copied().fold(0.0, f64::max);
        assert!(integral.abs() < 1e-10 * scale, "a = {a}: {integral}");
    }
}

#[test]
fn cos_profile_has_one_maximal_sphere() {
    let p = cos_profile(401, 0.1);
    let s = conformal::minimal_coordinate_spheres(&p).unwrap();
    assert_eq!(s.len(), 1);
    assert_eq!(s[0].kind, CriticalKind::Max);
    assert!(s[0].theta < PI / 2.0);
    assert!(s[0].index >= 1);
    let star = conformal::star_scan(&p).unwrap();
    assert!(star.star_holds_on_axisym_candidates);
    assert_eq!(star.scope, conformal::CANDIDATE_SCOPE);
}

#[test]
fn profile_json_round_trip() {
    let p = cos_profile(101, 0.2);
    let json = serde_json::to_string(&p).unwrap();
    let back: AxisymProfileF64 = serde_json::from_str(&json).unwrap();
    assert_eq!(back, p);
    // a profile that is not regular at the poles is rejected on load
    let kink: Vec<f64> = (0..401).map(|i| 1.0 + PI * i as f64 / 400.0).collect();
    let json = serde_json::json!({ "grid": kink }).to_string();
    let err = serde_json::from_str::<AxisymProfileF64>(&json).unwrap_err();
    assert!(err.to_string().contains("not regular at the poles"), "{err}");
}

#[test]
fn generic_over_f32() {
    let p = AxisymProfile::<f32>::constant(101, 1.0).unwrap();
    let v = conformal::volume(&p);
    assert!((v - 2.0 * std::f32::consts::PI.powi(2)).abs() < 1e-4);
    assert!((conformal::width_upper_bound(&p) - 4.0 * std::f32::consts::PI).abs() < 1e-4);
}
