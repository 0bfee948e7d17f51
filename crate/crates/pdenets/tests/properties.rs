use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pdenets::emulators::partition_of_unity;
use pdenets::finite_diff::{make_stencil, make_stencil_1d, Bias, MAX_STENCIL_ORDER};
use pdenets::harness::fit_slope;
use pdenets::mlp::{mlp_estimate, SemilinearProblem};
use pdenets::net::{combine, CombineMode, Layer, TanhNetwork};
use pdenets::operator::{sample_kl_field, CoefficientLaw, KlFieldSampler};
use pdenets::spectral::{interpolate, TorusGrid};

fn net_from_seed(seed: u64, dims: &[usize]) -> TanhNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = dims
        .windows(2)
        .map(|w| {
            let m: Vec<Vec<f64>> = (0..w[1]).map(|_| (0..w[0]).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let b: Vec<f64> = (0..w[1]).map(|_| rng.random_range(-0.5..0.5)).collect();
            Layer::from_dense(&m, b, w[0]).unwrap()
        })
        .collect();
    TanhNetwork::new(layers).unwrap()
}

fn bias() -> impl Strategy<Value = Bias> {
    prop_oneof![Just(Bias::Forward), Just(Bias::Backward), Just(Bias::Central)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn jets_agree_with_differences(seed in any::<u64>(), x in prop::array::uniform2(-1.0f64..1.0), dir in prop::array::uniform2(-1.0f64..1.0)) {
        let net = net_from_seed(seed, &[2, 5, 1]);
        let jet = net.directional_jet(&x, &dir, 1).unwrap();
        let h = 1e-5;
        let at = |s: f64| net.eval1(&[x[0] + s * dir[0], x[1] + s * dir[1]]).unwrap();
        let fd = (at(h) - at(-h)) / (2.0 * h);
        prop_assert!((jet.coeffs[1] - fd).abs() <= 1e-7 * (1.0 + fd.abs()));
    }

    #[test]
    fn weighted_sum_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0, x in prop::array::uniform2(-2.0f64..2.0)) {
        let f = net_from_seed(seed, &[2, 3, 1]);
        let g = net_from_seed(seed.wrapping_add(1), &[2, 4, 4, 1]);
        let s = combine(&[f.clone(), g.clone()], CombineMode::WeightedSum(vec![a, b])).unwrap();
        let want = a * f.eval1(&x).unwrap() + b * g.eval1(&x).unwrap();
        prop_assert!((s.eval1(&x).unwrap() - want).abs() <= 1e-9 * (1.0 + want.abs()));
    }

    #[test]
    fn partition_telescopes(n in 1usize..40, alpha in 1.0f64..30.0, t in 0.0f64..1.0) {
        let sum: f64 = partition_of_unity(n, 1.0, alpha).iter().map(|p| p.eval1(&[t]).unwrap()).sum();
        prop_assert!((sum - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn stencil_moments_are_exact(order in 1usize..=4, acc in 1usize..=4, b in bias()) {
        prop_assume!(order + acc <= MAX_STENCIL_ORDER);
        let s = make_stencil_1d(order, acc, b).unwrap();
        let fact = (1..=order as i64).fold(BigRational::one(), |p, k| p * BigRational::from_integer(BigInt::from(k)));
        for m in 0..order + acc {
            let want = if m == order { fact.clone() } else { BigRational::zero() };
            prop_assert_eq!(s.moment(m), want);
        }
    }

    #[test]
    fn stencils_differentiate_low_degree_polynomials(order in 1usize..=3, acc in 1usize..=3, b in bias(), x in -1.0f64..1.0) {
        // Exact on polynomials of degree order + acc - 1; compare against x^order.
        let st = make_stencil(&[order], acc, b).unwrap();
        let v = st.apply(&|z| z[0].powi(order as i32), &[x], 0.125, None).unwrap();
        let fact = (1..=order).product::<usize>() as f64;
        prop_assert!((v - fact).abs() <= 1e-9);
    }

    #[test]
    fn interpolation_is_exact_at_nodes(seed in any::<u64>(), n in 0usize..12) {
        let grid = TorusGrid::new(1, n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y: Vec<f64> = (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let back = interpolate(&y, &grid).unwrap().decode(&grid);
        prop_assert!(y.iter().zip(&back).all(|(a, b)| (a - b).abs() <= 1e-12));
    }

    #[test]
    fn kl_weights_decay(decay in 0.5f64..4.0, seed in any::<u64>(), k in -8i64..=8) {
        let sampler = KlFieldSampler::new(1, decay, 8, CoefficientLaw::Uniform, 1.0).unwrap();
        let bound = (-decay * k.abs() as f64).exp();
        prop_assert!(sampler.alpha(&[k]) <= bound * (1.0 + 1e-15));
        let v = sample_kl_field(&sampler, seed);
        prop_assert!(v.coeff(&[k]).abs() <= bound * (1.0 + 1e-15));
    }

    #[test]
    fn slope_fit_recovers_power_laws(p in -4.0f64..4.0, c in 0.1f64..10.0) {
        let pts: Vec<(f64, f64)> = [1.0, 2.0, 4.0, 8.0, 16.0].iter().map(|&x: &f64| (x, c * x.powf(p))).collect();
        let (slope, se) = fit_slope(&pts).unwrap();
        prop_assert!((slope - p).abs() <= 1e-10 && se <= 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn estimates_repeat_bit_for_bit(seed in any::<u64>(), x in 0.0f64..6.0, n in 1usize..=2, m in 1usize..=3) {
        let p = SemilinearProblem::heat(1, 1.0, Arc::new(|x: &[f64]| x[0].sin()), 1.0);
        let a = mlp_estimate(&p, n, m, 0.0, &[x], seed).unwrap();
        let b = mlp_estimate(&p, n, m, 0.0, &[x], seed).unwrap();
        prop_assert_eq!(a.to_bits(), b.to_bits());
    }
}
