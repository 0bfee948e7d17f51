use approx::assert_relative_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pdenets::emulators::monomial_nets;
use pdenets::net::{combine, CombineMode, Layer, NetError, PadPolicy, TanhNetwork};

fn random_dense(rng: &mut ChaCha8Rng, dims: &[usize]) -> (Vec<(Vec<Vec<f64>>, Vec<f64>)>, TanhNetwork) {
    let mut raw = Vec::new();
    let mut layers = Vec::new();
    for w in dims.windows(2) {
        let m: Vec<Vec<f64>> = (0..w[1]).map(|_| (0..w[0]).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let b: Vec<f64> = (0..w[1]).map(|_| rng.random_range(-0.5..0.5)).collect();
        layers.push(Layer::from_dense(&m, b.clone(), w[0]).unwrap());
        raw.push((m, b));
    }
    (raw, TanhNetwork::new(layers).unwrap())
}

fn by_hand(raw: &[(Vec<Vec<f64>>, Vec<f64>)], x: &[f64]) -> Vec<f64> {
    let mut cur = x.to_vec();
    for (l, (w, b)) in raw.iter().enumerate() {
        cur = w.iter().zip(b).map(|(row, bi)| row.iter().zip(&cur).map(|(a, v)| a * v).sum::<f64>() + bi).collect();
        if l + 1 < raw.len() {
            cur.iter_mut().for_each(|v| *v = v.tanh());
        }
    }
    cur
}

#[test]
fn random_net_matches_hand_composition() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (raw, net) = random_dense(&mut rng, &[3, 6, 1]);
    for _ in 0..20 {
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
        let a = net.evaluate(&x).unwrap();
        let b = by_hand(&raw, &x);
        assert!((a[0] - b[0]).abs() <= 1e-14, "{a:?} vs {b:?}");
    }
}

#[test]
fn identity_affine_evaluates_input() {
    let net = TanhNetwork::affine(&[vec![1.0]], vec![0.0], 1).unwrap();
    assert_eq!(net.evaluate(&[3.0]).unwrap(), vec![3.0]);
}

#[test]
fn zero_direction_gives_flat_jet() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (_, net) = random_dense(&mut rng, &[2, 5, 5, 1]);
    let x = [0.3, -0.7];
    let jet = net.directional_jet(&x, &[0.0, 0.0], 4).unwrap();
    assert_eq!(jet.coeffs[0], net.eval1(&x).unwrap());
    assert!(jet.coeffs[1..].iter().all(|c| *c == 0.0));
}

#[test]
fn jets_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (_, net) = random_dense(&mut rng, &[3, 8, 6, 1]);
    let h = 1e-4;
    for _ in 0..20 {
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let dir: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let at = |s: f64| net.eval1(&x.iter().zip(&dir).map(|(a, d)| a + s * d).collect::<Vec<_>>()).unwrap();
        let jet = net.directional_jet(&x, &dir, 2).unwrap();
        let d1 = (at(h) - at(-h)) / (2.0 * h);
        let d2 = (at(h) - 2.0 * at(0.0) + at(-h)) / (h * h);
        assert_relative_eq!(jet.coeffs[1], d1, max_relative = 1e-5, epsilon = 1e-7);
        assert_relative_eq!(jet.coeffs[2], d2, max_relative = 1e-5, epsilon = 1e-5);
    }
}

#[test]
fn jet_order_above_four_is_rejected() {
    let net = TanhNetwork::linear_form(&[1.0], 0.0);
    assert!(matches!(net.directional_jet(&[0.0], &[1.0], 5), Err(NetError::UnsupportedOrder(5))));
}

#[test]
fn affine_net_is_harmonic() {
    let net = TanhNetwork::linear_form(&[2.0, -3.0], 1.0);
    assert_eq!(net.laplacian(&[0.4, 0.9]).unwrap(), 0.0);
}

#[test]
fn laplacian_of_emulated_sum_of_squares() {
    let eps = 1e-6;
    let sq = monomial_nets(2, 1.0, eps).unwrap().pop().unwrap();
    let pad = PadPolicy { bound: 2.0, tol: 1e-12 };
    let sx = sq.precompose_affine(&[vec![1.0, 0.0]], &[0.0]).unwrap();
    let sy = sq.precompose_affine(&[vec![0.0, 1.0]], &[0.0]).unwrap();
    let net = TanhNetwork::weighted_sum(&[sx, sy], &[1.0, 1.0], pad).unwrap();
    for x in [[0.1, 0.2], [-0.5, 0.3], [0.7, -0.6]] {
        let lap = net.laplacian(&x).unwrap();
        assert!((lap - 4.0).abs() < 1e-3, "{lap}");
        let h = 1e-2;
        let f = |a: f64, b: f64| net.eval1(&[a, b]).unwrap();
        let fd = (f(x[0] + h, x[1]) + f(x[0] - h, x[1]) + f(x[0], x[1] + h) + f(x[0], x[1] - h) - 4.0 * f(x[0], x[1])) / (h * h);
        assert_relative_eq!(lap, fd, max_relative = 1e-4);
    }
}

#[test]
fn weighted_sum_with_negation_cancels() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (_, net) = random_dense(&mut rng, &[2, 4, 1]);
    let z = combine(&[net.clone(), net], CombineMode::WeightedSum(vec![1.0, -1.0])).unwrap();
    for i in 0..50 {
        let x = [i as f64 / 10.0 - 2.5, 1.0 - i as f64 / 25.0];
        assert!(z.eval1(&x).unwrap().abs() <= 1e-13);
    }
}

#[test]
fn identity_precompose_keeps_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (_, net) = random_dense(&mut rng, &[2, 4, 1]);
    let p = combine(&[net.clone()], CombineMode::AffinePrecompose { a: vec![vec![1.0, 0.0], vec![0.0, 1.0]], b: vec![0.0, 0.0] }).unwrap();
    for x in [[0.0, 0.0], [1.5, -0.2], [-3.0, 2.0]] {
        assert_eq!(p.evaluate(&x).unwrap(), net.evaluate(&x).unwrap());
    }
}

#[test]
fn parallel_stacks_outputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (_, f) = random_dense(&mut rng, &[2, 3, 1]);
    let (_, g) = random_dense(&mut rng, &[2, 5, 1]);
    let both = combine(&[f.clone(), g.clone()], CombineMode::ParallelConcat).unwrap();
    for x in [[0.1, 0.2], [-1.0, 0.5]] {
        assert_eq!(both.evaluate(&x).unwrap(), vec![f.eval1(&x).unwrap(), g.eval1(&x).unwrap()]);
    }
}

#[test]
fn wrong_input_length_is_rejected() {
    let net = TanhNetwork::linear_form(&[1.0, 1.0], 0.0);
    assert!(matches!(net.evaluate(&[1.0]), Err(NetError::DimensionMismatch { expected: 2, got: 1 })));
}

#[test]
fn json_round_trip_is_bit_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (_, net) = random_dense(&mut rng, &[3, 7, 4, 2]);
    let back = TanhNetwork::from_json(&net.to_json()).unwrap();
    assert_eq!(back, net);
    let x = [0.1, 0.2, 0.3];
    assert_eq!(back.evaluate(&x).unwrap(), net.evaluate(&x).unwrap());
}
