use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use widthlab::numerics::{critical_points, integrate_adaptive, GridFunction, QuadratureConfig};
use widthlab::QuadratureConfigF64;

fn cfg() -> QuadratureConfigF64 {
    QuadratureConfig::new(1e-12, 50).unwrap()
}

fn poly(c: [f64; 4]) -> impl Fn(f64) -> f64 {
    move |x| c[0] + x * (c[1] + x * (c[2] + x * c[3]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn quadrature_is_linear(
        a in prop::array::uniform4(-3.0..3.0f64),
        b in prop::array::uniform4(-3.0..3.0f64),
        s in -2.0..2.0f64,
        t in -2.0..2.0f64,
    ) {
        let fa = poly(a);
        let fb = poly(b);
        let ia = integrate_adaptive(&fa, -1.0, 2.0, &cfg()).unwrap();
        let ib = integrate_adaptive(&fb, -1.0, 2.0, &cfg()).unwrap();
        let ic = integrate_adaptive(|x| s * fa(x) + t * fb(x) + (3.0 * x).sin(), -1.0, 2.0, &cfg()).unwrap();
        let isin = integrate_adaptive(|x| (3.0 * x).sin(), -1.0, 2.0, &cfg()).unwrap();
        prop_assert!((ic - (s * ia + t * ib + isin)).abs() < 1e-9);
    }

    #[test]
    fn even_integrand_is_twice_the_half(k in 1.0..6.0f64, l in 0.2..3.0f64) {
        let f = |x: f64| (k * x * x).cos() + x.powi(4);
        let full = integrate_adaptive(f, -l, l, &cfg()).unwrap();
        let half = integrate_adaptive(f, 0.0, l, &cfg()).unwrap();
        prop_assert!((full - 2.0 * half).abs() < 1e-9);
        let odd = integrate_adaptive(|x: f64| x * f(x), -l, l, &cfg()).unwrap();
        prop_assert!(odd.abs() < 1e-9);
    }

    #[test]
    fn critical_points_ignore_constant_shift(
        amps in prop::array::uniform3(-1.0..1.0f64),
        c in -50.0..50.0f64,
    ) {
        let f = GridFunction::from_fn(201, |t: f64| {
            amps[0] * t.cos() + amps[1] * (2.0 * t).cos() + amps[2] * (3.0 * t).cos()
        }).unwrap();
        let g = f.map(|v| v + c).unwrap();
        let a: Vec<_> = critical_points(&f).into_iter().map(|p| (p.index, p.kind)).collect();
        let b: Vec<_> = critical_points(&g).into_iter().map(|p| (p.index, p.kind)).collect();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn polynomial_integrals_are_exact() {
    let f = poly([1.0, -2.0, 3.0, 0.5]);
    let exact = |x: f64| x - x * x + x.powi(3) + 0.125 * x.powi(4);
    let i = integrate_adaptive(f, -0.5, 1.5, &cfg()).unwrap();
    assert_abs_diff_eq!(i, exact(1.5) - exact(-0.5), epsilon = 1e-13);
}

#[test]
fn generic_over_f32() {
    let cfg = QuadratureConfig::new(1e-5f32, 30).unwrap();
    let i = integrate_adaptive(|x: f32| x.sin(), 0.0, std::f32::consts::PI, &cfg).unwrap();
    assert!((i - 2.0).abs() < 1e-4);
}
