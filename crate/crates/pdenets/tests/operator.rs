use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pdenets::net::PadPolicy;
use pdenets::operator::{
    build_fno, build_pi_deeponet, fno_deeponet_discrepancy, fno_to_deeponet, pendulum_solve, sample_kl_field,
    CoefficientLaw, DeepOnet, KlFieldSampler, Multiplier, OperatorOracle, PiDeepOnetParams, SpectralMultiplierOracle,
};
use pdenets::residual::{residual_norm, PdeOperator, Quadrature, ResidualDomain};
use pdenets::spectral::{TorusGrid, TrigPoly};

fn heat() -> Arc<dyn OperatorOracle> {
    Arc::new(SpectralMultiplierOracle::new(1, Multiplier::Heat))
}

fn identity() -> Arc<dyn OperatorOracle> {
    Arc::new(SpectralMultiplierOracle::new(1, Multiplier::Identity))
}

fn random_poly(rng: &mut ChaCha8Rng, n: usize) -> TrigPoly {
    TrigPoly::from_fn(1, n, |_| rng.random_range(-1.0..1.0))
}

#[test]
fn identity_fno_fixes_band_limited_inputs() {
    let fno = build_fno(identity(), 4, 1e-6, 0.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let v = random_poly(&mut rng, 4);
    let out = fno.apply(&v).unwrap();
    assert!(out.sub(&v).l2_norm() <= 1e-12);
}

#[test]
fn heat_fno_applies_exact_multiplier() {
    let (n, t) = (6usize, 0.1);
    let fno = build_fno(heat(), n, 1e-6, t).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let v = random_poly(&mut rng, n);
    let out = fno.apply(&v).unwrap();
    for k in -(n as i64)..=n as i64 {
        let want = v.coeff(&[k]) * (-((k * k) as f64) * t).exp();
        let rel = (out.coeff(&[k]) - want).abs() / want.abs().max(1e-300);
        assert!(rel <= fno.oracle.tolerance() + 1e-8, "k={k}: {rel}");
    }
}

#[test]
fn fno_output_is_band_limited() {
    let fno = build_fno(heat(), 3, 1e-6, 0.05).unwrap();
    let out = fno.apply_fn(&|x: &[f64]| 1.0 / (2.0 + x[0].cos())).unwrap();
    assert_eq!(out.degree(), 3);
    assert_eq!(out.resize(6).max_outside(3), 0.0);
}

#[test]
fn single_mode_deeponet_is_exact() {
    let fno = build_fno(heat(), 0, 1e-6, 0.3).unwrap();
    let onet = fno_to_deeponet(&fno, 1e-6).unwrap();
    assert_eq!(onet.p(), 1);
    let v = TrigPoly::from_fn(1, 0, |_| 0.8);
    let d = fno_deeponet_discrepancy(&fno, &onet, &[v], &[vec![0.0], vec![2.5]]).unwrap();
    assert!(d <= 1e-15, "{d}");
}

#[test]
fn identity_deeponet_matches_fno() {
    let eps = 1e-6;
    let fno = build_fno(identity(), 2, eps, 0.0).unwrap();
    let onet = fno_to_deeponet(&fno, eps).unwrap();
    assert_eq!(onet.p(), 5);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let inputs: Vec<TrigPoly> = (0..100).map(|_| random_poly(&mut rng, 2)).collect();
    let queries: Vec<Vec<f64>> = (0..1000).map(|i| vec![2.0 * PI * i as f64 / 1000.0]).collect();
    let d = fno_deeponet_discrepancy(&fno, &onet, &inputs, &queries).unwrap();
    assert!(d <= eps, "{d}");
}

#[test]
fn deeponet_json_round_trip() {
    let fno = build_fno(heat(), 2, 1e-6, 0.1).unwrap();
    let onet = fno_to_deeponet(&fno, 1e-6).unwrap();
    let back = DeepOnet::from_json(&onet.to_json()).unwrap();
    let samples = vec![0.3, -0.2, 0.9, 0.0, 0.4];
    assert_eq!(back.evaluate(&samples, &[1.1]).unwrap(), onet.evaluate(&samples, &[1.1]).unwrap());
}

#[test]
fn physics_informed_single_block_collapses_to_snapshot() {
    let (n, eps, t_end) = (2usize, 1e-4, 0.5);
    let pi = build_pi_deeponet(heat(), &PiDeepOnetParams { m: 1, s: 1, n, z: n, eps, t_end }).unwrap();
    assert_eq!(pi.onet.p(), 2 * n + 1);
    let fno = build_fno(heat(), n, eps, t_end).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let v = random_poly(&mut rng, n);
    let samples = v.decode(&TorusGrid::new(1, n));
    let snap = fno.apply_samples(&samples).unwrap();
    for t in [0.0, 0.2, 0.5] {
        for x in [0.4, 3.0, 5.9] {
            let diff = (pi.onet.evaluate(&samples, &[t, x]).unwrap() - snap.evaluate(&[x])).abs();
            assert!(diff <= pi.delta, "t={t} x={x}: {diff:e} > {:e}", pi.delta);
        }
    }
}

#[test]
fn physics_informed_residual_shrinks_with_refinement() {
    let sampler = KlFieldSampler::new(1, 2.0, 16, CoefficientLaw::Gaussian, 1e-6).unwrap();
    let v = sample_kl_field(&sampler, 7);
    let domain = ResidualDomain { t_end: 1.0, d: 1, initial: None };
    let residual = |nm: usize| {
        let pi = build_pi_deeponet(heat(), &PiDeepOnetParams { m: nm, s: 2, n: nm, z: nm, eps: 1e-4, t_end: 1.0 }).unwrap();
        assert_eq!(pi.onet.p(), 2 * nm * (2 * nm + 1));
        let net = pi.onet.at_input(&v.decode(&TorusGrid::new(1, nm)), PadPolicy { bound: 10.0, tol: 1e-12 }).unwrap();
        residual_norm(&net, &PdeOperator::heat(1), &domain, Quadrature::Mc { n: 2000, seed: 7 }).unwrap().residual
    };
    let (r2, r8) = (residual(2), residual(8));
    assert!(r8 < r2 / 2.0, "{r8} vs {r2}");
}

#[test]
fn kl_large_decay_leaves_constant() {
    let sampler = KlFieldSampler::new(1, 60.0, 4, CoefficientLaw::Gaussian, 1e-6).unwrap();
    let v = sample_kl_field(&sampler, 3);
    assert!(v.max_outside(0) <= 1e-25);
    assert!(v.coeff(&[0]) != 0.0);
}

#[test]
fn kl_coefficient_variance() {
    let sampler = KlFieldSampler::new(1, 0.5, 3, CoefficientLaw::Gaussian, 1.0).unwrap();
    let draws: Vec<TrigPoly> = (0..10_000).map(|s| sample_kl_field(&sampler, s)).collect();
    for k in [0i64, 1, -2, 3] {
        let var = draws.iter().map(|v| v.coeff(&[k]).powi(2)).sum::<f64>() / draws.len() as f64;
        let want = sampler.alpha(&[k]).powi(2);
        assert!((var / want - 1.0).abs() <= 0.05, "k={k}: {var} vs {want}");
        for v in &draws {
            assert!(v.coeff(&[k]).abs() <= 10.0 * (-0.5 * k.abs() as f64).exp());
        }
    }
}

#[test]
fn kl_sampled_fields_have_stable_sobolev_norm() {
    let sampler = KlFieldSampler::new(1, 1.0, 32, CoefficientLaw::Gaussian, 1e-12).unwrap();
    let norms: Vec<f64> = (0..200).map(|s| sample_kl_field(&sampler, s).sobolev_norm(2)).collect();
    let mean = norms.iter().sum::<f64>() / norms.len() as f64;
    let sd = (norms.iter().map(|n| (n - mean).powi(2)).sum::<f64>() / (norms.len() - 1) as f64).sqrt();
    assert!(norms.iter().all(|n| n.is_finite()));
    let fresh = sample_kl_field(&sampler, 10_000).sobolev_norm(2);
    assert!((fresh - mean).abs() <= 3.0 * sd, "{fresh} vs {mean} ± {sd}");
}

#[test]
fn kl_rejects_heavy_tail() {
    assert!(KlFieldSampler::new(1, 0.1, 2, CoefficientLaw::Uniform, 1e-6).is_err());
}

#[test]
fn pendulum_rest_without_forcing() {
    let tr = pendulum_solve(&|_| 0.0, 1.0, 2.0, 64).unwrap();
    assert!(tr.v1.iter().chain(&tr.v2).all(|v| *v == 0.0));
    assert!(pendulum_solve(&|_| 0.0, 1.0, 2.0, 32).is_err());
}

#[test]
fn pendulum_is_fourth_order() {
    let t_end = 2.0;
    let u = move |t: f64| (2.0 * PI * t / t_end).cos();
    let end = |steps: usize| *pendulum_solve(&u, 1.0, t_end, steps).unwrap().v1.last().unwrap();
    let reference = end(4096);
    let ratio = (end(64) - reference).abs() / (end(128) - reference).abs();
    assert!((ratio - 16.0).abs() <= 1.0, "{ratio}");
}

#[test]
fn pendulum_matches_finer_reference() {
    let t_end = 2.0;
    let u = move |t: f64| (2.0 * PI * t / t_end).cos();
    let coarse = pendulum_solve(&u, 1.0, t_end, 1000).unwrap();
    let fine = pendulum_solve(&u, 1.0, t_end, 10_000).unwrap();
    for (i, (a, b)) in coarse.v1.iter().zip(&coarse.v2).enumerate() {
        assert!((a - fine.v1[10 * i]).abs() <= 1e-8 && (b - fine.v2[10 * i]).abs() <= 1e-8);
    }
}
