mod common;

use common::sweep::*;
use electroseis::field::Field3;
use electroseis::grid::{build_domain, Domain, Grid, Region, Resolution};
use electroseis::params::{Bump, ScalarSpec};
use electroseis::stability::{
    compute_lambda, fit_holder, holder_sweep, region_weights, sobolev_sq, sweep_point, Samples,
    DEFAULT_SAFETY,
};
use electroseis::Error;
use proptest::prelude::*;

fn grid(n: usize) -> Grid {
    build_domain(
        Domain::unit_cube(0.25, 1.0, 0.2),
        Resolution {
            n: [n; 3],
            dt_max: None,
        },
    )
    .unwrap()
    .1
}

/// Plateau on `[a, b]` with quintic ramps of width `w` inside it.
fn plateau(x: f64, a: f64, b: f64, w: f64) -> [f64; 3] {
    let ramp = |s: f64| -> [f64; 3] {
        [
            s * s * s * (10.0 - 15.0 * s + 6.0 * s * s),
            30.0 * s * s * (1.0 - s) * (1.0 - s),
            60.0 * s * (1.0 - s) * (1.0 - 2.0 * s),
        ]
    };
    if x <= a || x >= b {
        [0.0; 3]
    } else if x < a + w {
        let r = ramp((x - a) / w);
        [r[0], r[1] / w, r[2] / (w * w)]
    } else if x > b - w {
        let r = ramp((b - x) / w);
        [r[0], -r[1] / w, r[2] / (w * w)]
    } else {
        [1.0, 0.0, 0.0]
    }
}

/// Composite Simpson rule with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn zero_differences_give_zero_lambda() {
    let g = grid(8);
    let z = Field3::zeros(g.node_dims());
    let l = compute_lambda(&g, &z, &z, &z, &z);
    assert_eq!((l.tilde, l.full), (0.0, 0.0));
}

#[test]
fn smooth_box_matches_its_closed_form_integral() {
    let (a, b, w, k) = (0.1, 0.9, 0.35, 0.4);
    let g = grid(96);
    let alpha = Field3::from_fn(g.node_dims(), |i, j, l| {
        let x = g.node(i, j, l);
        k * (0..3).map(|c| plateau(x[c], a, b, w)[0]).product::<f64>()
    });
    let z = Field3::zeros(g.node_dims());
    let got = compute_lambda(&g, &alpha, &z, &z, &z).tilde;

    // α = k f(x)f(y)f(z): every term factors into 1D integrals.
    let i = |p: usize| simpson(|x| plateau(x, a, b, w)[p].powi(2), 0.0, 1.0, 24_000);
    let (f0, f1, f2) = (i(0), i(1), i(2));
    let value = f0.powi(3);
    let grad = 3.0 * f1 * f0 * f0;
    let hess = 3.0 * f2 * f0 * f0 + 6.0 * f1 * f1 * f0;
    let want = k * k * (value + grad + hess);
    println!("Λ̃ = {got}, closed form {want}");
    assert!((got - want).abs() <= 1e-2 * want);
}

#[test]
fn lambda_minus_tilde_is_the_xi_part() {
    let g = grid(16);
    let f = |amp: f64, c: [f64; 3]| {
        ScalarSpec::constant(0.0)
            .with_bump(Bump::Compact {
                amp,
                center: c,
                radius: 0.2,
            })
            .sample(&g)
    };
    let (al, be, ga, xi) = (f(0.1, [0.5; 3]), f(0.2, [0.4; 3]), f(0.3, [0.6; 3]), f(0.4, [0.5, 0.45, 0.5]));
    let z = Field3::zeros(g.node_dims());
    let with = compute_lambda(&g, &al, &be, &ga, &xi);
    let only_xi = compute_lambda(&g, &z, &z, &z, &xi);
    assert!(with.full > with.tilde && with.tilde > 0.0);
    assert!((with.full - with.tilde - only_xi.full).abs() <= 1e-12 * with.full);
    assert_eq!(only_xi.tilde, 0.0);
}

fn levels(g: &Grid, nt: usize, dt: f64, f: impl Fn([f64; 3], f64) -> f64 + Sync) -> Samples {
    let lv: Vec<Field3> = (0..nt)
        .map(|l| Field3::from_fn(g.node_dims(), |i, j, k| f(g.node(i, j, k), l as f64 * dt)))
        .collect();
    Samples::from_levels(&lv, g.h, dt)
}

#[test]
fn data_norm_of_simple_fields() {
    let g = grid(8);
    let w = region_weights(&g, Region::Shell);
    assert_eq!(sobolev_sq(&levels(&g, 9, 0.125, |_, _| 0.0), 4, &w).unwrap(), 0.0);
    let c = sobolev_sq(&levels(&g, 9, 0.125, |_, _| 1.5), 5, &w).unwrap();
    assert!((c - 1.5 * 1.5 * 0.875).abs() < 1e-12);
    assert!(matches!(
        sobolev_sq(&levels(&g, 5, 0.25, |_, _| 1.0), 5, &w),
        Err(Error::Invalid(_))
    ));
}

#[test]
fn first_order_norm_of_a_bilinear_field_converges() {
    // f = x₁t on ω × [0,1]: ∫ x₁²t² + t² + x₁².
    let ix = 1.0 / 3.0 - 0.25 * (0.75f64.powi(3) - 0.25f64.powi(3)) / 3.0;
    let exact = ix / 3.0 + 0.875 / 3.0 + ix;
    let err = |n: usize| {
        let g = grid(n);
        let w = region_weights(&g, Region::Shell);
        let v = sobolev_sq(&levels(&g, n + 1, 1.0 / n as f64, |x, t| x[0] * t), 1, &w).unwrap();
        (v - exact).abs() / exact
    };
    let (a, b) = (err(8), err(16));
    println!("H¹ errors {a:e} {b:e}");
    assert!(b < 5e-3 && a / b > 3.5);
}

#[test]
fn small_perturbations_respond_linearly() {
    let c = case(10, 0.4);
    let pts = holder_sweep(&c.setup(), &[1.0 / 64.0, 1.0 / 32.0, 1.0 / 16.0, 1.0 / 8.0]).unwrap();
    for p in &pts {
        println!("s = {} Λ = {:e} 𝔒 = {:e}", p.s, p.lambda, p.data_sum());
    }
    assert!(pts.windows(2).all(|w| w[1].data_sum() >= w[0].data_sum()));
    let fit = fit_holder(&pts, DEFAULT_SAFETY).unwrap();
    println!("exponent {} R² {}", fit.exponent, fit.r2);
    assert!((fit.exponent - 1.0).abs() <= 0.1);
    assert!(fit.r2 >= 0.95 && fit.bound_holds());
}

#[test]
fn zero_scale_gives_zero_quantities() {
    let c = case(8, 0.3);
    let p = sweep_point(&c.setup(), 0.0).unwrap();
    assert_eq!((p.lambda, p.data_sum()), (0.0, 0.0));
}

#[test]
fn inadmissible_scale_is_reported() {
    let c = case(8, 0.3);
    // α + s·δα turns negative at the bump centre.
    let err = sweep_point(&c.setup(), -10.0).unwrap_err();
    assert!(matches!(err, Error::NonPositive { .. }), "{err}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn both_quantities_scale_quadratically(k in 0.1f64..10.0, seed in 0u64..1000) {
        let g = grid(6);
        let s = seed as f64;
        let f = |x: [f64; 3], t: f64| (s + 3.0 * x[0] - x[1] * t).sin() * (x[2] + t).cos();
        let w = region_weights(&g, Region::Shell);
        let base = sobolev_sq(&levels(&g, 7, 0.1, f), 5, &w).unwrap();
        let scaled = sobolev_sq(&levels(&g, 7, 0.1, |x, t| k * f(x, t)), 5, &w).unwrap();
        prop_assert!((scaled - k * k * base).abs() <= 1e-12 * scaled);

        let field = Field3::from_fn(g.node_dims(), |i, j, l| f(g.node(i, j, l), 0.3));
        let kf = field.map(|v| k * v);
        let a = compute_lambda(&g, &field, &field, &field, &field);
        let b = compute_lambda(&g, &kf, &kf, &kf, &kf);
        prop_assert!((b.full - k * k * a.full).abs() <= 1e-12 * b.full);
        prop_assert!((b.tilde - k * k * a.tilde).abs() <= 1e-12 * b.tilde);
    }
}
