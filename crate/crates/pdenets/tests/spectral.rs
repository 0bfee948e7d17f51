use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pdenets::spectral::{encode, interpolate, project, pseudospectral_project, sobolev_norm_fn, TorusGrid, TrigPoly};

fn cos_x(x: &[f64]) -> f64 {
    x[0].cos()
}

#[test]
fn encode_cosine_on_three_nodes() {
    let v = encode(&cos_x, &TorusGrid::new(1, 1));
    let want = [1.0, -0.5, -0.5];
    for (a, b) in v.iter().zip(want) {
        assert!((a - b).abs() <= 1e-15, "{v:?}");
    }
}

#[test]
fn cosine_is_recovered_exactly() {
    let p = project(&cos_x, 1, 3);
    assert!((p.coeff(&[1]) - FRAC_1_SQRT_2).abs() <= 1e-14);
    let mut rest = p.clone();
    rest.set(&[1], 0.0).unwrap();
    assert!(rest.l2_norm() <= 1e-14);
}

#[test]
fn interpolant_reproduces_random_samples_at_nodes() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for d in 1..=2 {
        for n in [1usize, 4, 9, 32] {
            if d == 2 && n > 16 {
                continue;
            }
            let grid = TorusGrid::new(d, n);
            let y: Vec<f64> = (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let p = interpolate(&y, &grid).unwrap();
            let back = p.decode(&grid);
            let err = y.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err <= 1e-11, "d={d} N={n}: {err}");
        }
    }
}

#[test]
fn decode_then_interpolate_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let p = TrigPoly::from_fn(2, 3, |_| rng.random_range(-1.0..1.0));
    let grid = TorusGrid::new(2, 3);
    let q = interpolate(&p.decode(&grid), &grid).unwrap();
    assert!(p.sub(&q).l2_norm() <= 1e-12);
}

#[test]
fn parseval_matches_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let p = TrigPoly::from_fn(1, 5, |_| rng.random_range(-1.0..1.0));
    let n = 64;
    let quad = (0..n).map(|i| p.evaluate(&[2.0 * PI * i as f64 / n as f64]).powi(2)).sum::<f64>() / n as f64;
    assert!((quad.sqrt() - p.l2_norm()).abs() <= 1e-12);
}

#[test]
fn analytic_function_error_decays_geometrically() {
    let f = |x: &[f64]| x[0].cos().exp();
    let e = |n: usize| pseudospectral_project(&f, 1, n, 0).1.l2_error;
    for n in [2usize, 4, 6] {
        let ratio = e(n) / e(n + 1);
        assert!(ratio >= 4.0, "N={n}: {ratio}");
    }
}

#[test]
fn sobolev_norm_of_cosine() {
    let p = project(&cos_x, 1, 2);
    assert!((p.sobolev_norm(1).powi(2) - 2.0 * p.l2_norm().powi(2)).abs() <= 1e-14);
    let fd = sobolev_norm_fn(&cos_x, 1, 1, 256);
    assert!((fd - p.sobolev_norm(1)).abs() <= 1e-8, "{fd}");
}

#[test]
fn projection_is_idempotent() {
    let f = |x: &[f64]| (x[0] + 2.0 * x[1]).sin() + 0.3 * x[1].cos();
    let p = project(&f, 2, 4);
    let q = project(&|x: &[f64]| p.evaluate(x), 2, 4);
    assert!(p.sub(&q).l2_norm() <= 1e-12);
}

#[test]
fn coefficients_agree_with_quadrature() {
    let f = |x: &[f64]| 1.0 / (2.0 + x[0].sin());
    let p = project(&f, 1, 20);
    let n = 4096;
    for k in [0i64, 1, -1, 3, -5] {
        let basis = |x: f64| match k.signum() {
            0 => 1.0,
            1 => 2f64.sqrt() * (k as f64 * x).cos(),
            _ => 2f64.sqrt() * (k as f64 * x).sin(),
        };
        let c = (0..n).map(|i| 2.0 * PI * i as f64 / n as f64).map(|x| f(&[x]) * basis(x)).sum::<f64>() / n as f64;
        assert!((p.coeff(&[k]) - c).abs() <= 1e-8, "k={k}");
    }
}

#[test]
fn derivative_and_json() {
    let p = project(&|x: &[f64]| (2.0 * x[0]).sin(), 1, 3);
    let dp = p.derivative(0);
    for x in [0.1, 1.3, 4.0] {
        assert!((dp.evaluate(&[x]) - 2.0 * (2.0 * x).cos()).abs() <= 1e-12);
    }
    assert_eq!(TrigPoly::from_json(&p.to_json()).unwrap(), p);
    assert!(p.max_outside(2) <= 1e-15 && p.max_outside(1) > 0.5);
}
