use std::f64::consts::{PI, SQRT_2};

use pdenets::emulators::{
    emulate, fit_univariate, fourier_basis, fourier_trunk_nets, identity_net, legendre_tensor, legendre_trunk_nets,
    monomial_nets, pairwise_product_with, partition_alpha, partition_of_unity, product_net, verify_1d, verify_grid,
    EmulationError, EmulationSpec, EmulationTarget, SquareDesign,
};
use pdenets::net::TanhNetwork;

fn grid(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| a + (b - a) * i as f64 / (n - 1) as f64)
}

#[test]
fn identity_is_zero_at_origin_and_within_tolerance() {
    let net = identity_net(2.0, 1e-6).unwrap();
    assert_eq!(net.eval1(&[0.0]).unwrap(), 0.0);
    let err = grid(-2.0, 2.0, 10_000).map(|x| (net.eval1(&[x]).unwrap() - x).abs()).fold(0.0, f64::max);
    assert!(err <= 1e-6, "{err}");
}

#[test]
fn identity_composed_with_itself() {
    let eps = 1e-6;
    let net = identity_net(2.5, eps).unwrap();
    let twice = TanhNetwork::compose(&net, &net).unwrap();
    let err = grid(-2.0, 2.0, 10_000).map(|x| (twice.eval1(&[x]).unwrap() - x).abs()).fold(0.0, f64::max);
    assert!(err <= 2.0 * eps + 1e-10, "{err}");
}

#[test]
fn product_of_zeros_is_exactly_zero() {
    for arity in 2..=4 {
        let net = product_net(arity, 3.0, 1e-5).unwrap();
        assert_eq!(net.eval1(&vec![0.0; arity]).unwrap(), 0.0);
    }
}

#[test]
fn product_examples() {
    let eps = 1e-4;
    let p2 = product_net(2, 4.0, eps).unwrap();
    assert!((p2.eval1(&[2.0, 3.0]).unwrap() - 6.0).abs() <= eps);
    let p3 = product_net(3, 1.0, eps).unwrap();
    assert!((p3.eval1(&[1.0, 1.0, 1.0]).unwrap() - 1.0).abs() <= eps);
    let err = verify_grid(&p2, &|x: &[f64]| x[0] * x[1], &[(-4.0, 4.0), (-4.0, 4.0)]);
    assert!(err <= eps, "{err}");
}

#[test]
fn product_error_is_second_order_in_step() {
    let e = |h: f64| {
        verify_grid(&pairwise_product_with(1.0, SquareDesign { levels: 1, h }), &|x: &[f64]| x[0] * x[1], &[(-1.0, 1.0), (-1.0, 1.0)])
    };
    let ratio = e(0.1) / e(0.05);
    assert!(ratio >= 3.0, "{ratio}");
}

#[test]
fn monomial_examples() {
    let eps = 1e-6;
    let nets = monomial_nets(3, 1.0, eps).unwrap();
    assert_eq!(nets.len(), 3);
    let e1 = verify_1d(&nets[0], &|x| x, None, -1.0, 1.0, 1000).0;
    assert!(e1 <= eps);
    assert!((nets[1].eval1(&[-1.0]).unwrap() - 1.0).abs() <= eps);
    let e3 = verify_1d(&nets[2], &|x| x * x * x, None, -1.0, 1.0, 1000).0;
    assert!(e3 <= eps, "{e3}");
}

#[test]
fn single_window_is_one() {
    let phi = partition_of_unity(1, 2.0, 5.0);
    assert_eq!(phi.len(), 1);
    for t in grid(0.0, 2.0, 50) {
        assert_eq!(phi[0].eval1(&[t]).unwrap(), 1.0);
    }
}

#[test]
fn partition_sums_to_one_and_concentrates() {
    let eps = 1e-6;
    for n in [2usize, 5, 16, 64] {
        let alpha = partition_alpha(1.0, n, 1, eps);
        let phi = partition_of_unity(n, 1.0, alpha);
        let h = 1.0 / n as f64;
        for t in grid(0.0, 1.0, 1000) {
            let vals: Vec<f64> = phi.iter().map(|p| p.eval1(&[t]).unwrap()).collect();
            assert!((vals.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            let j = ((t / h).floor() as usize).min(n - 1);
            let near: f64 = vals[j.saturating_sub(1)..(j + 2).min(n)].iter().sum();
            assert!(1.0 - near <= eps, "N={n} t={t}: {}", 1.0 - near);
        }
    }
}

#[test]
fn fit_of_constant_and_tanh() {
    let c = fit_univariate(&|_| 0.75, -1.0, 1.0, 4, 1e-12).unwrap();
    assert!(verify_1d(&c, &|_| 0.75, None, -1.0, 1.0, 1000).0 <= 1e-12);
    let t = fit_univariate(&f64::tanh, -3.0, 3.0, 1, 1e-8).unwrap();
    assert!(verify_1d(&t, &f64::tanh, None, -3.0, 3.0, 1000).0 <= 1e-8);
}

#[test]
fn fit_of_cosine_on_wide_interval() {
    let net = fit_univariate(&f64::cos, -4.0 * PI, 4.0 * PI, 16, 1e-4).unwrap();
    let err = verify_1d(&net, &f64::cos, None, -4.0 * PI, 4.0 * PI, 100_000).0;
    assert!(err <= 1e-4, "{err}");
}

#[test]
fn fit_reports_unreachable_tolerance() {
    let r = fit_univariate(&|x: f64| x.abs(), -1.0, 1.0, 4, 1e-14);
    assert!(matches!(r, Err(EmulationError::Unachievable { .. })));
}

#[test]
fn fourier_trunks_match_basis() {
    let eps = 1e-4;
    let tr = fourier_trunk_nets(1, 1, 0, eps).unwrap();
    let p = 3.0f64;
    let k0 = tr.wavenumbers.iter().position(|k| k == &[0]).unwrap();
    assert_eq!(tr.nets[k0].eval1(&[1.234]).unwrap(), 1.0);
    let k1 = tr.wavenumbers.iter().position(|k| k == &[1]).unwrap();
    let err = grid(0.0, 2.0 * PI, 10_000).map(|x| (tr.nets[k1].eval1(&[x]).unwrap() - SQRT_2 * x.cos()).abs()).fold(0.0, f64::max);
    assert!(err <= eps * p.powf(-1.5), "{err}");
}

#[test]
fn fourier_trunks_are_orthonormal() {
    let tr = fourier_trunk_nets(2, 1, 0, 1e-4).unwrap();
    let n = 400;
    let xs: Vec<f64> = (0..n).map(|i| 2.0 * PI * i as f64 / n as f64).collect();
    let vals: Vec<Vec<f64>> = tr.nets.iter().map(|net| xs.iter().map(|x| net.eval1(&[*x]).unwrap()).collect()).collect();
    for (i, a) in vals.iter().enumerate() {
        for (j, b) in vals.iter().enumerate() {
            let ip = a.iter().zip(b).map(|(u, v)| u * v).sum::<f64>() / n as f64;
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((ip - want).abs() <= 1e-2, "({i},{j}) -> {ip}");
        }
    }
    for (k, v) in tr.wavenumbers.iter().zip(&vals) {
        assert!((v[7] - fourier_basis(k, &[xs[7]])).abs() <= 1e-4);
    }
}

#[test]
fn legendre_trunks() {
    let eps = 1e-6;
    let tr = legendre_trunk_nets(4, 1, eps).unwrap();
    let idx = |j: usize| tr.multi_indices.iter().position(|m| m == &[j]).unwrap();
    assert_eq!(tr.nets[idx(0)].eval1(&[0.3]).unwrap(), 1.0);
    let e1 = verify_1d(&tr.nets[idx(1)], &|x| 3f64.sqrt() * x, None, -1.0, 1.0, 2000).0;
    assert!(e1 <= eps, "{e1}");
    // Midpoint rule for ∫ L_j L_k dλ/2.
    let n = 4000;
    let xs: Vec<f64> = (0..n).map(|i| -1.0 + (2 * i + 1) as f64 / n as f64).collect();
    for j in 0..=4 {
        for k in 0..=4 {
            let ip = xs.iter().map(|x| tr.nets[idx(j)].eval1(&[*x]).unwrap() * tr.nets[idx(k)].eval1(&[*x]).unwrap()).sum::<f64>() / n as f64;
            let want = if j == k { 1.0 } else { 0.0 };
            assert!((ip - want).abs() <= 1e-2, "({j},{k}) -> {ip}");
        }
    }
    assert!((legendre_tensor(&[2], &[1.0]) - 5f64.sqrt()).abs() < 1e-14);
}

#[test]
fn emulate_reports_derivative_error() {
    let spec = EmulationSpec { target: EmulationTarget::Sin, domain_bound: 3.0, tolerance: 1e-6, derivative_order_checked: 1 };
    let (_, rep) = emulate(&spec).unwrap();
    assert!(rep.achieved_sup_error <= 1e-6);
    let de = rep.derivative_error.unwrap();
    assert!(de <= 10.0 * 1e-6 / rep.grid_spacing, "{de}");
}

#[test]
fn emulate_rejects_bad_specs() {
    let spec = EmulationSpec { target: EmulationTarget::Identity, domain_bound: 1.0, tolerance: 0.0, derivative_order_checked: 0 };
    assert!(matches!(emulate(&spec), Err(EmulationError::Invalid(_))));
}
