//! Tanh networks with explicit weights for the primitive functions the
//! constructions consume: identity, products, monomials, a partition of
//! unity, and trigonometric and Legendre bases.
//!
//! Every builder verifies its result on an equispaced grid and fails with
//! [`EmulationError::Unachievable`] instead of returning a network that misses
//! the requested sup-norm tolerance.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use thiserror::Error;

use crate::linalg::lstsq;
use crate::net::{NetError, PadPolicy, TanhNetwork};

/// Expansion point of the symmetric second difference used for squares.
pub const SQUARE_CENTER: f64 = 0.5;

/// Points per axis used when verifying a one-dimensional emulator.
pub const VERIFY_POINTS_1D: usize = 10_000;

/// Cap on the total number of points of a multivariate verification grid.
pub const VERIFY_POINTS_TOTAL: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmulationError {
    #[error("{target}: tolerance {tol:e} not reached, best achieved {achieved:e}")]
    Unachievable { target: String, tol: f64, achieved: f64 },
    #[error("invalid emulation request: {0}")]
    Invalid(String),
    #[error(transparent)]
    Net(#[from] NetError),
}

/// Function family an [`EmulationSpec`] asks for.
#[derive(Clone, Debug, PartialEq)]
pub enum EmulationTarget {
    Identity,
    Monomial(u32),
    Product(usize),
    Cos,
    Sin,
    Legendre(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmulationSpec {
    pub target: EmulationTarget,
    /// Inputs range over `[-domain_bound, domain_bound]` per coordinate.
    pub domain_bound: f64,
    pub tolerance: f64,
    pub derivative_order_checked: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmulationReport {
    pub achieved_sup_error: f64,
    /// Sup error of the first derivative, when requested.
    pub derivative_error: Option<f64>,
    /// Grid spacing of the verification scan.
    pub grid_spacing: f64,
    pub width: usize,
    pub depth: usize,
    pub size: usize,
}

/// Builds and verifies the network requested by `spec`.
pub fn emulate(spec: &EmulationSpec) -> Result<(TanhNetwork, EmulationReport), EmulationError> {
    let m = spec.domain_bound;
    let eps = spec.tolerance;
    if !(m > 0.0 && m.is_finite() && eps > 0.0) {
        return Err(EmulationError::Invalid(format!("bound {m} and tolerance {eps} must be positive")));
    }
    let n = VERIFY_POINTS_1D;
    let h_grid = 2.0 * m / (n - 1) as f64;
    let with_der = spec.derivative_order_checked >= 1;
    let univariate = |net: TanhNetwork, f: &(dyn Fn(f64) -> f64 + Sync), df: &(dyn Fn(f64) -> f64 + Sync)| {
        let (e, de) = verify_1d(&net, f, if with_der { Some(df) } else { None }, -m, m, n);
        (net, e, de)
    };
    let (net, err, der) = match &spec.target {
        EmulationTarget::Identity => univariate(identity_net(m, eps)?, &|x| x, &|_| 1.0),
        EmulationTarget::Monomial(p) => {
            let p = *p;
            if p == 0 {
                return Err(EmulationError::Invalid("monomial power must be at least 1".into()));
            }
            let net = monomial_nets(p as usize, m, eps)?.pop().unwrap();
            univariate(net, &move |x| x.powi(p as i32), &move |x| p as f64 * x.powi(p as i32 - 1))
        }
        EmulationTarget::Cos => univariate(fit_univariate(&f64::cos, -m, m, 16, eps)?, &f64::cos, &|x| -x.sin()),
        EmulationTarget::Sin => univariate(fit_univariate(&f64::sin, -m, m, 16, eps)?, &f64::sin, &f64::cos),
        EmulationTarget::Product(d) => {
            let net = product_net(*d, m, eps)?;
            let e = verify_grid(&net, &|x: &[f64]| x.iter().product(), &vec![(-m, m); *d]);
            (net, e, None)
        }
        EmulationTarget::Legendre(nu) => {
            let d = nu.len();
            let deg = nu.iter().copied().max().unwrap_or(0);
            let trunks = legendre_trunk_nets(deg, d, eps)?;
            let idx = trunks.multi_indices.iter().position(|k| k == nu).unwrap();
            let net = trunks.nets[idx].clone();
            let nu2 = nu.clone();
            let e = verify_grid(&net, &move |x: &[f64]| legendre_tensor(&nu2, x), &vec![(-1.0, 1.0); d]);
            (net, e, None)
        }
    };
    if err > eps {
        return Err(EmulationError::Unachievable { target: format!("{:?}", spec.target), tol: eps, achieved: err });
    }
    let report = EmulationReport {
        achieved_sup_error: err,
        derivative_error: der,
        grid_spacing: h_grid,
        width: net.width(),
        depth: net.depth(),
        size: net.size(),
    };
    Ok((net, report))
}

// ---------------------------------------------------------------------------
// Verification
// ---------------------------------------------------------------------------

/// Sup errors of value and (optionally) first derivative of a scalar
/// univariate network over `n` equispaced points of `[a, b]`.
pub fn verify_1d(
    net: &TanhNetwork,
    f: &(dyn Fn(f64) -> f64 + Sync),
    df: Option<&(dyn Fn(f64) -> f64 + Sync)>,
    a: f64,
    b: f64,
    n: usize,
) -> (f64, Option<f64>) {
    let step = (b - a) / (n.max(2) - 1) as f64;
    let (e, de) = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = a + step * i as f64;
            match df {
                Some(df) => {
                    let j = net.directional_jet(&[x], &[1.0], 1).expect("univariate scalar network");
                    ((j.coeffs[0] - f(x)).abs(), (j.coeffs[1] - df(x)).abs())
                }
                None => ((net.eval1(&[x]).expect("univariate scalar network") - f(x)).abs(), 0.0),
            }
        })
        .reduce(|| (0.0, 0.0), |p, q| (p.0.max(q.0), p.1.max(q.1)));
    (e, df.map(|_| de))
}

/// Sup error of a scalar network over a tensor grid of the box `bounds`,
/// with at most [`VERIFY_POINTS_1D`] points per axis and
/// [`VERIFY_POINTS_TOTAL`] points overall.
pub fn verify_grid(net: &TanhNetwork, f: &(dyn Fn(&[f64]) -> f64 + Sync), bounds: &[(f64, f64)]) -> f64 {
    let d = bounds.len();
    let per_axis = ((VERIFY_POINTS_TOTAL as f64).powf(1.0 / d as f64).floor() as usize).clamp(2, VERIFY_POINTS_1D);
    let total = per_axis.pow(d as u32);
    (0..total)
        .into_par_iter()
        .map(|mut idx| {
            let mut x = vec![0.0; d];
            for (k, (lo, hi)) in bounds.iter().enumerate().rev() {
                let i = idx % per_axis;
                idx /= per_axis;
                x[k] = lo + (hi - lo) * i as f64 / (per_axis - 1) as f64;
            }
            (net.eval1(&x).expect("scalar network") - f(&x)).abs()
        })
        .reduce(|| 0.0, f64::max)
}

// ---------------------------------------------------------------------------
// Identity
// ---------------------------------------------------------------------------

/// Inner scale `h` for which `tanh(h x)/h` is within `tol` of `x` on `|x| <= bound`.
pub fn identity_step(bound: f64, tol: f64) -> Result<f64, NetError> {
    let fail = |achieved| NetError::Padding { bound, tol, achieved };
    if !(bound > 0.0 && tol > 0.0 && bound.is_finite()) {
        return Err(fail(f64::NAN));
    }
    // x - tanh(hx)/h <= h^2 x^3 / 3 for x >= 0.
    let h = (0.5 * (3.0 * tol / bound.powi(3)).sqrt()).min(1.0 / bound);
    if !h.is_normal() {
        return Err(fail(f64::INFINITY));
    }
    let u = h * bound;
    let trunc = if u < 1e-3 { u * u * bound / 3.0 } else { bound - u.tanh() / h };
    let achieved = trunc + 4.0 * f64::EPSILON * bound;
    if achieved > tol {
        return Err(fail(achieved));
    }
    Ok(h)
}

/// One-hidden-layer network `x -> tanh(h x)/h` within `eps` of the identity on `[-m, m]`.
pub fn identity_net(m: f64, eps: f64) -> Result<TanhNetwork, EmulationError> {
    identity_net_dim(1, m, eps)
}

/// Coordinatewise identity emulation in `dim` dimensions.
pub fn identity_net_dim(dim: usize, m: f64, eps: f64) -> Result<TanhNetwork, EmulationError> {
    let h = identity_step(m, 0.5 * eps)?;
    let hidden = (0..dim).map(|i| vec![(i, h)]).collect();
    let out = (0..dim).map(|i| vec![(i, 1.0 / h)]).collect();
    let net = TanhNetwork::shallow(dim, hidden, vec![0.0; dim], out, vec![0.0; dim]);
    if dim == 1 {
        let (err, _) = verify_1d(&net, &|x| x, None, -m, m, VERIFY_POINTS_1D);
        if err > eps {
            return Err(EmulationError::Unachievable { target: "identity".into(), tol: eps, achieved: err });
        }
    }
    Ok(net)
}

// ---------------------------------------------------------------------------
// Squares and products
// ---------------------------------------------------------------------------

/// Parameters of the square emulator: `levels` second differences with steps
/// `h, 2h, ..., levels·h`, combined by Richardson extrapolation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SquareDesign {
    pub levels: usize,
    pub h: f64,
}

/// Richardson weights cancelling the `h^2, ..., h^{2(levels-1)}` error terms.
pub fn richardson_weights(levels: usize) -> Vec<f64> {
    let y: Vec<f64> = (1..=levels).map(|j| (j * j) as f64).collect();
    (0..levels)
        .map(|j| {
            let mut w = 1.0;
            for i in 0..levels {
                if i != j {
                    w *= -y[i] / (y[j] - y[i]);
                }
            }
            w
        })
        .collect()
}

fn tanh_second_derivative(a: f64) -> f64 {
    let t = a.tanh();
    -2.0 * t * (1.0 - t * t)
}

/// Hidden neurons `(scale, output weight)` of `z -> z^2` on `[-1, 1]`; each
/// scale appears as `tanh(a + s z)` and `tanh(a - s z)` with the same weight.
fn square_terms(design: SquareDesign) -> (Vec<(f64, f64)>, f64) {
    let a = SQUARE_CENTER;
    let f2 = tanh_second_derivative(a);
    let w = richardson_weights(design.levels);
    let mut terms = Vec::with_capacity(design.levels);
    let mut bias = 0.0;
    for (j, wj) in w.iter().enumerate() {
        let step = (j + 1) as f64 * design.h;
        let c = wj / (step * step * f2);
        terms.push((step, c));
        bias -= 2.0 * a.tanh() * c;
    }
    (terms, bias)
}

/// Network for `z -> z^2` on `|z| <= bound`.
pub fn square_net_with(bound: f64, design: SquareDesign) -> TanhNetwork {
    let a = SQUARE_CENTER;
    let (terms, bias) = square_terms(design);
    let mut hidden = Vec::new();
    let mut hb = Vec::new();
    let mut out = Vec::new();
    for (k, (s, c)) in terms.iter().enumerate() {
        hidden.push(vec![(0, s / bound)]);
        hidden.push(vec![(0, -s / bound)]);
        hb.push(a);
        hb.push(a);
        out.push((2 * k, c * bound * bound));
        out.push((2 * k + 1, c * bound * bound));
    }
    TanhNetwork::shallow(1, hidden, hb, vec![out], vec![bias * bound * bound])
}

/// Network for `(x, y) -> x y` on `[-bound, bound]^2` built from
/// `x y = ((x+y)^2 - (x-y)^2)/4`. The `u`/`v` neurons are interleaved so that
/// the output at the origin cancels exactly.
pub fn pairwise_product_with(bound: f64, design: SquareDesign) -> TanhNetwork {
    let a = SQUARE_CENTER;
    let (terms, _) = square_terms(design);
    let scale = 1.0 / (2.0 * bound);
    let mut hidden = Vec::new();
    let mut out = Vec::new();
    let b2 = bound * bound;
    for (s, c) in terms {
        let k = s * scale;
        for sign in [1.0, -1.0] {
            hidden.push(vec![(0, sign * k), (1, sign * k)]);
            out.push((hidden.len() - 1, c * b2));
            hidden.push(vec![(0, sign * k), (1, -sign * k)]);
            out.push((hidden.len() - 1, -c * b2));
        }
    }
    let n = hidden.len();
    TanhNetwork::shallow(2, hidden, vec![a; n], vec![out], vec![0.0])
}

/// Sup error of a square design on `[-1, 1]`.
pub fn square_error(design: SquareDesign, n: usize) -> f64 {
    let net = square_net_with(1.0, design);
    verify_1d(&net, &|z| z * z, None, -1.0, 1.0, n).0
}

fn square_design_cache() -> &'static Mutex<HashMap<u64, Result<(SquareDesign, f64), f64>>> {
    static CACHE: OnceLock<Mutex<HashMap<u64, Result<(SquareDesign, f64), f64>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Design whose square error on `[-1, 1]` is at most `tol` with the smallest
/// total output weight `Σ|c|`, which bounds how much rounding in the hidden
/// layer is amplified. On failure returns the best error found.
pub fn choose_square_design(tol: f64) -> Result<(SquareDesign, f64), f64> {
    if let Some(r) = square_design_cache().lock().unwrap().get(&tol.to_bits()) {
        return *r;
    }
    let mut best = f64::INFINITY;
    let mut found: Option<(SquareDesign, f64, f64)> = None;
    for levels in 1..=3 {
        // Largest admissible step for this number of levels.
        for i in 0..48 {
            let h = 0.5 * 10f64.powf(-(i as f64) / 8.0);
            let design = SquareDesign { levels, h };
            let e = square_error(design, 2001);
            best = best.min(e);
            if e > tol {
                continue;
            }
            let full = square_error(design, VERIFY_POINTS_1D);
            if full > tol {
                continue;
            }
            let weight: f64 = square_terms(design).0.iter().map(|(_, c)| 2.0 * c.abs()).sum();
            if found.map_or(true, |(_, _, w)| weight < w) {
                found = Some((design, full, weight));
            }
            break;
        }
    }
    let r = found.map(|(d, e, _)| (d, e)).ok_or(best);
    square_design_cache().lock().unwrap().insert(tol.to_bits(), r);
    r
}

/// `z -> z^2` on `|z| <= bound` within `eps`.
pub fn square_net(bound: f64, eps: f64) -> Result<TanhNetwork, EmulationError> {
    let tol = eps / (bound * bound);
    let (design, _) = choose_square_design(tol).map_err(|best| EmulationError::Unachievable {
        target: "square".into(),
        tol: eps,
        achieved: best * bound * bound,
    })?;
    Ok(square_net_with(bound, design))
}

/// `(x, y) -> x y` on `[-bound, bound]^2` within `eps`.
pub fn pairwise_product(bound: f64, eps: f64) -> Result<TanhNetwork, EmulationError> {
    let tol = eps / (2.0 * bound * bound);
    let (design, _) = choose_square_design(tol).map_err(|best| EmulationError::Unachievable {
        target: "product".into(),
        tol: eps,
        achieved: 2.0 * best * bound * bound,
    })?;
    Ok(pairwise_product_with(bound, design))
}

type ProductKey = (usize, u64, u64);

fn product_cache() -> &'static Mutex<HashMap<ProductKey, Arc<TanhNetwork>>> {
    static CACHE: OnceLock<Mutex<HashMap<ProductKey, Arc<TanhNetwork>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Network `x -> Π x_i` on `[-m, m]^arity` within `eps`, as a balanced binary
/// tree of pairwise products.
pub fn product_net(arity: usize, m: f64, eps: f64) -> Result<TanhNetwork, EmulationError> {
    if !(2..=8).contains(&arity) {
        return Err(EmulationError::Invalid(format!("product arity {arity} outside 2..=8")));
    }
    if !(m > 0.0 && eps > 0.0) {
        return Err(EmulationError::Invalid("bound and tolerance must be positive".into()));
    }
    let key = (arity, m.to_bits(), eps.to_bits());
    if let Some(net) = product_cache().lock().unwrap().get(&key) {
        return Ok((**net).clone());
    }
    let bounds = vec![(-m, m); arity];
    let exact = |x: &[f64]| x.iter().product::<f64>();
    let mut node_tol = if arity == 2 { eps } else { eps / (arity as f64 * m.max(1.0).powi(arity as i32)) };
    let mut best = f64::INFINITY;
    for _ in 0..4 {
        let (net, _) = product_tree(0, arity, arity, m, node_tol)?;
        let err = verify_grid(&net, &exact, &bounds);
        if err <= eps {
            product_cache().lock().unwrap().insert(key, Arc::new(net.clone()));
            return Ok(net);
        }
        best = best.min(err);
        node_tol *= 0.1;
    }
    Err(EmulationError::Unachievable { target: format!("product of {arity}"), tol: eps, achieved: best })
}

/// Product of inputs `lo..hi` of an `n`-input network, with its value bound.
fn product_tree(lo: usize, hi: usize, n: usize, m: f64, tol: f64) -> Result<(TanhNetwork, f64), EmulationError> {
    let len = hi - lo;
    if len == 1 {
        return Ok((TanhNetwork::projection(n, &[lo]), m));
    }
    let mid = lo + len / 2;
    let (left, bl) = product_tree(lo, mid, n, m, tol)?;
    let (right, br) = product_tree(mid, hi, n, m, tol)?;
    let bound = bl.max(br) * (1.0 + 1e-6) + tol;
    let pad = PadPolicy { bound, tol: 0.01 * tol };
    let both = TanhNetwork::parallel(&[left, right], pad)?;
    let pair = pairwise_product(bound, tol)?;
    Ok((TanhNetwork::compose(&pair, &both)?, bl * br))
}

// ---------------------------------------------------------------------------
// Monomials
// ---------------------------------------------------------------------------

/// Networks `ψ_1, ..., ψ_s` with `sup_{|x|<=m} |ψ_p(x) - x^p| <= eps`,
/// built by repeated squaring and multiplication by `x`.
pub fn monomial_nets(s: usize, m: f64, eps: f64) -> Result<Vec<TanhNetwork>, EmulationError> {
    if !(1..=8).contains(&s) {
        return Err(EmulationError::Invalid(format!("monomial power {s} outside 1..=8")));
    }
    let mut tol = 0.25 * eps;
    let mut worst = f64::INFINITY;
    for _ in 0..4 {
        let nets = monomials_at(s, m, tol)?;
        let errs: Vec<f64> = nets
            .iter()
            .enumerate()
            .map(|(i, net)| {
                let p = i as i32 + 1;
                verify_1d(net, &move |x| x.powi(p), None, -m, m, VERIFY_POINTS_1D).0
            })
            .collect();
        let e = errs.iter().copied().fold(0.0, f64::max);
        if e <= eps {
            return Ok(nets);
        }
        worst = worst.min(e);
        tol *= 0.1;
    }
    Err(EmulationError::Unachievable { target: format!("monomials up to {s}"), tol: eps, achieved: worst })
}

fn monomials_at(s: usize, m: f64, tol: f64) -> Result<Vec<TanhNetwork>, EmulationError> {
    let mut nets = vec![identity_net(m, tol)?];
    let x = TanhNetwork::projection(1, &[0]);
    for p in 2..=s {
        let net = if p % 2 == 0 {
            let half = &nets[p / 2 - 1];
            let b = m.powi((p / 2) as i32) * (1.0 + 1e-6) + tol;
            TanhNetwork::compose(&square_net(b, tol)?, half)?
        } else {
            let prev = &nets[p - 2];
            let b = m.powi(p as i32 - 1).max(m) * (1.0 + 1e-6) + tol;
            let pad = PadPolicy { bound: b, tol: 0.01 * tol };
            let both = TanhNetwork::parallel(&[prev.clone(), x.clone()], pad)?;
            TanhNetwork::compose(&pairwise_product(b, tol)?, &both)?
        };
        nets.push(net);
    }
    Ok(nets)
}

/// Network for the polynomial `Σ_p c_p x^p` on `[-m, m]` within `eps`,
/// as a weighted sum of emulated monomials plus a bias.
pub fn polynomial_net(coeffs: &[f64], m: f64, eps: f64) -> Result<TanhNetwork, EmulationError> {
    let degree = coeffs.iter().rposition(|c| *c != 0.0).unwrap_or(0);
    let c0 = coeffs.first().copied().unwrap_or(0.0);
    if degree == 0 {
        return Ok(TanhNetwork::constant(1, &[c0]));
    }
    let weight: f64 = coeffs[1..=degree].iter().map(|c| c.abs()).sum();
    let monos = monomial_nets(degree, m, 0.5 * eps / weight)?;
    let (nets, weights): (Vec<TanhNetwork>, Vec<f64>) =
        (1..=degree).filter(|&p| coeffs[p] != 0.0).map(|p| (monos[p - 1].clone(), coeffs[p])).unzip();
    let bound = m.max(1.0).powi(degree as i32) * (1.0 + 1e-6) + eps;
    let pad = PadPolicy { bound, tol: 0.01 * eps / weight };
    let net = TanhNetwork::weighted_sum(&nets, &weights, pad)?.postcompose_affine(&[vec![1.0]], &[c0])?;
    let exact = |x: f64| coeffs[..=degree].iter().rev().fold(0.0, |acc, c| acc * x + c);
    let (err, _) = verify_1d(&net, &exact, None, -m, m, VERIFY_POINTS_1D);
    if err > eps {
        return Err(EmulationError::Unachievable { target: format!("polynomial of degree {degree}"), tol: eps, achieved: err });
    }
    Ok(net)
}

// ---------------------------------------------------------------------------
// Partition of unity
// ---------------------------------------------------------------------------

/// Tanh partition of unity `Φ_1, ..., Φ_N` on `[0, T]` with breakpoints
/// `t_j = jT/N`. The sigmoid arguments are `α (N t / T - j)`, so `α` controls
/// sharpness in units of one subinterval. The sum telescopes to one.
pub fn partition_of_unity(n: usize, t_end: f64, alpha: f64) -> Vec<TanhNetwork> {
    assert!(n >= 1 && alpha > 0.0 && t_end > 0.0);
    if n == 1 {
        return vec![TanhNetwork::constant(1, &[1.0])];
    }
    let k = alpha * n as f64 / t_end;
    let sig = |j: usize| (vec![(0, k)], -alpha * j as f64);
    let mut nets = Vec::with_capacity(n);
    for j in 1..=n {
        let net = if j == 1 {
            let (w, b) = sig(1);
            TanhNetwork::shallow(1, vec![w], vec![b], vec![vec![(0, -0.5)]], vec![0.5])
        } else if j == n {
            let (w, b) = sig(n - 1);
            TanhNetwork::shallow(1, vec![w], vec![b], vec![vec![(0, 0.5)]], vec![0.5])
        } else {
            let (w1, b1) = sig(j - 1);
            let (w2, b2) = sig(j);
            TanhNetwork::shallow(1, vec![w1, w2], vec![b1, b2], vec![vec![(0, 0.5), (1, -0.5)]], vec![0.0])
        };
        nets.push(net);
    }
    nets
}

/// Sharpness `α = ln(C N^k / ε)` for the partition of unity.
pub fn partition_alpha(c: f64, n: usize, k: u32, eps: f64) -> f64 {
    (c * (n as f64).powi(k as i32) / eps).ln()
}

// ---------------------------------------------------------------------------
// Least-squares univariate fits
// ---------------------------------------------------------------------------

/// Options of [`fit_univariate_with`].
#[derive(Clone, Debug, PartialEq)]
pub struct FitOptions {
    /// Inner slope of the first feature bank; bank `k` uses `(k+1)·scale`.
    pub scale: f64,
    /// Number of feature banks, each fitted to the residual of the previous ones.
    pub banks: usize,
    pub max_width: usize,
    /// Least-squares points per neuron of a bank.
    pub grid_factor: usize,
    pub verify_points: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { scale: 0.5, banks: 2, max_width: 512, grid_factor: 10, verify_points: VERIFY_POINTS_1D }
    }
}

/// Fits `f` on `[a, b]` with a one-hidden-layer tanh network whose inner
/// weights are fixed (equispaced centres, fixed slopes) and whose output
/// weights solve a linear least-squares problem. The width is doubled until
/// the sup error on the verification grid is at most `eps`.
pub fn fit_univariate(
    f: &(dyn Fn(f64) -> f64 + Sync),
    a: f64,
    b: f64,
    width: usize,
    eps: f64,
) -> Result<TanhNetwork, EmulationError> {
    fit_univariate_with(f, a, b, width, eps, &FitOptions::default())
}

pub fn fit_univariate_with(
    f: &(dyn Fn(f64) -> f64 + Sync),
    a: f64,
    b: f64,
    width: usize,
    eps: f64,
    opts: &FitOptions,
) -> Result<TanhNetwork, EmulationError> {
    if !(b > a) || width == 0 {
        return Err(EmulationError::Invalid(format!("bad fit request on [{a}, {b}] with width {width}")));
    }
    let mut w = width;
    let mut best = f64::INFINITY;
    loop {
        let net = fit_once(f, a, b, w, opts);
        let (err, _) = verify_1d(&net, f, None, a, b, opts.verify_points);
        if err <= eps {
            return Ok(net);
        }
        best = best.min(err);
        if w * 2 > opts.max_width {
            return Err(EmulationError::Unachievable { target: format!("fit on [{a}, {b}]"), tol: eps, achieved: best });
        }
        w *= 2;
    }
}

fn fit_once(f: &(dyn Fn(f64) -> f64 + Sync), a: f64, b: f64, w: usize, opts: &FitOptions) -> TanhNetwork {
    let n = (opts.grid_factor * w).max(w + 2);
    let xs: Vec<f64> = (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let spacing = if w > 1 { (b - a) / (w - 1) as f64 } else { 0.0 };
    let mut hidden = Vec::new();
    let mut hb = Vec::new();
    let mut out = Vec::new();
    let mut out_bias = 0.0;
    if ys.iter().all(|&y| y == ys[0]) {
        // Constant target: keep the hidden layer, solve with the bias alone.
        for i in 0..w {
            hidden.push(vec![(0, opts.scale)]);
            hb.push(-opts.scale * (a + spacing * i as f64 + if w == 1 { 0.5 * (b - a) } else { 0.0 }));
        }
        return TanhNetwork::shallow(1, hidden, hb, vec![Vec::new()], vec![ys[0]]);
    }
    let mut resid = DVector::from_vec(ys);
    for bank in 0..opts.banks.max(1) {
        let s = opts.scale * (bank + 1) as f64;
        let shift = if bank % 2 == 1 { 0.5 * spacing } else { 0.0 };
        let centres: Vec<f64> = (0..w)
            .map(|i| if w == 1 { 0.5 * (a + b) } else { a + spacing * i as f64 + shift })
            .collect();
        let mat = DMatrix::from_fn(n, w + 1, |r, c| if c == 0 { 1.0 } else { (s * (xs[r] - centres[c - 1])).tanh() });
        let coef = lstsq(mat.clone(), &resid, 1e-15);
        resid -= &mat * &coef;
        out_bias += coef[0];
        for (i, c) in centres.iter().enumerate() {
            hidden.push(vec![(0, s)]);
            hb.push(-s * c);
            out.push((hidden.len() - 1, coef[i + 1]));
        }
    }
    TanhNetwork::shallow(1, hidden, hb, vec![out], vec![out_bias])
}

// ---------------------------------------------------------------------------
// Trigonometric basis
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Trig {
    Cos,
    Sin,
}

type FitKey = (Trig, u64, u64);

fn trig_fit_cache() -> &'static Mutex<HashMap<FitKey, Result<Arc<(TanhNetwork, f64)>, EmulationError>>> {
    static CACHE: OnceLock<Mutex<HashMap<FitKey, Result<Arc<(TanhNetwork, f64)>, EmulationError>>>> =
        OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn trig_fit(kind: Trig, reach: f64, tol: f64) -> Result<Arc<(TanhNetwork, f64)>, EmulationError> {
    let key = (kind, reach.to_bits(), tol.to_bits());
    if let Some(r) = trig_fit_cache().lock().unwrap().get(&key) {
        return r.clone();
    }
    let f: fn(f64) -> f64 = match kind {
        Trig::Cos => f64::cos,
        Trig::Sin => f64::sin,
    };
    let start = ((2.0 * reach).ceil() as usize).next_power_of_two().max(16);
    let r = fit_univariate(&f, -reach, reach, start, tol).map(|net| {
        let (err, _) = verify_1d(&net, &f, None, -reach, reach, 100_000);
        Arc::new((net, err))
    });
    trig_fit_cache().lock().unwrap().insert(key, r.clone());
    r
}

/// Sign of the first nonzero component of `κ`.
pub fn kappa_sign(kappa: &[i64]) -> i64 {
    kappa.iter().find(|&&k| k != 0).map_or(0, |k| k.signum())
}

/// Normalization of `e_κ` under the measure `dx/(2π)^d`.
pub fn kappa_norm(kappa: &[i64]) -> f64 {
    if kappa_sign(kappa) == 0 {
        1.0
    } else {
        std::f64::consts::SQRT_2
    }
}

/// Exact value of the real Fourier basis function `e_κ(x)`.
pub fn fourier_basis(kappa: &[i64], x: &[f64]) -> f64 {
    let dot: f64 = kappa.iter().zip(x).map(|(&k, &xi)| k as f64 * xi).sum();
    match kappa_sign(kappa) {
        0 => 1.0,
        1 => std::f64::consts::SQRT_2 * dot.cos(),
        _ => std::f64::consts::SQRT_2 * dot.sin(),
    }
}

/// Emulated real Fourier basis on `[0, 2π]^d` for all `|κ|_1 <= reach`.
///
/// One fitted `cos` and one fitted `sin` on `[-π·reach, π·reach]` are shared
/// by all wavenumbers through `e_κ(x) = ±C_κ g(⟨κ, x - π⟩)`.
#[derive(Clone, Debug)]
pub struct TrigBasisNets {
    d: usize,
    reach: usize,
    cos: Arc<(TanhNetwork, f64)>,
    sin: Arc<(TanhNetwork, f64)>,
}

impl TrigBasisNets {
    /// `tol` bounds the sup error of every basis network.
    pub fn new(d: usize, reach: usize, tol: f64) -> Result<Self, EmulationError> {
        let half = PI * reach.max(1) as f64 + 0.25;
        let t = tol / std::f64::consts::SQRT_2;
        let cos = trig_fit(Trig::Cos, half, t)?;
        let sin = trig_fit(Trig::Sin, half, t)?;
        Ok(Self { d, reach, cos, sin })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn reach(&self) -> usize {
        self.reach
    }

    /// Sup error of the shared univariate fits, scaled by `C_κ = √2`.
    pub fn achieved_error(&self) -> f64 {
        std::f64::consts::SQRT_2 * self.cos.1.max(self.sin.1)
    }

    /// Network approximating `e_κ` on `[0, 2π]^d`.
    pub fn basis_net(&self, kappa: &[i64]) -> Result<TanhNetwork, EmulationError> {
        if kappa.len() != self.d {
            return Err(EmulationError::Invalid(format!("wavenumber of length {} in dimension {}", kappa.len(), self.d)));
        }
        let l1: i64 = kappa.iter().map(|k| k.abs()).sum();
        if l1 as usize > self.reach {
            return Err(EmulationError::Invalid(format!("|κ|_1 = {l1} exceeds reach {}", self.reach)));
        }
        let sigma = kappa_sign(kappa);
        if sigma == 0 {
            return Ok(TanhNetwork::constant(self.d, &[1.0]));
        }
        let g = if sigma > 0 { &self.cos.0 } else { &self.sin.0 };
        let ksum: i64 = kappa.iter().sum();
        let coef: Vec<f64> = kappa.iter().map(|&k| k as f64).collect();
        let inner = TanhNetwork::linear_form(&coef, -PI * ksum as f64);
        let parity = if ksum.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        let net = TanhNetwork::compose(g, &inner)?;
        Ok(net.postcompose_affine(&[vec![parity * std::f64::consts::SQRT_2]], &[0.0])?)
    }
}

/// All `κ ∈ {-N..N}^d`, ordered by `|κ|_∞` and then lexicographically.
pub fn wavenumbers(n: usize, d: usize) -> Vec<Vec<i64>> {
    let side = 2 * n + 1;
    let mut all: Vec<Vec<i64>> = (0..side.pow(d as u32))
        .map(|mut idx| {
            let mut k = vec![0i64; d];
            for slot in k.iter_mut().rev() {
                *slot = (idx % side) as i64 - n as i64;
                idx /= side;
            }
            k
        })
        .collect();
    all.sort_by(|a, b| {
        let na = a.iter().map(|v| v.abs()).max().unwrap_or(0);
        let nb = b.iter().map(|v| v.abs()).max().unwrap_or(0);
        na.cmp(&nb).then_with(|| a.cmp(b))
    });
    all
}

/// Trunk networks for the Fourier basis on `K_N`.
#[derive(Clone, Debug)]
pub struct FourierTrunks {
    pub nets: Vec<TanhNetwork>,
    pub wavenumbers: Vec<Vec<i64>>,
    /// Sup error of the shared univariate fits times `C_κ`.
    pub achieved_error: f64,
    /// Sup errors of derivatives `1..=s` of the shared fits, times `C_κ |κ|_1^j`.
    pub derivative_errors: Vec<f64>,
}

/// Trunk nets `τ_κ ≈ e_κ` for `κ ∈ K_N` with `max_κ sup |τ_κ - e_κ| <= ε p^{-3/2}`,
/// `p = (2N+1)^d`.
pub fn fourier_trunk_nets(n: usize, d: usize, s: usize, eps: f64) -> Result<FourierTrunks, EmulationError> {
    let p = (2 * n + 1).pow(d as u32) as f64;
    if p > 1e4 {
        return Err(EmulationError::Invalid(format!("(2N+1)^d = {p} exceeds 10^4")));
    }
    let tol = eps * p.powf(-1.5);
    let ks = wavenumbers(n, d);
    if n == 0 {
        return Ok(FourierTrunks {
            nets: vec![TanhNetwork::constant(d, &[1.0])],
            wavenumbers: ks,
            achieved_error: 0.0,
            derivative_errors: vec![0.0; s],
        });
    }
    let basis = TrigBasisNets::new(d, d * n, tol)?;
    let nets = ks.iter().map(|k| basis.basis_net(k)).collect::<Result<Vec<_>, _>>()?;
    let half = PI * (d * n) as f64 + 0.25;
    let mut derivative_errors = Vec::new();
    for order in 1..=s.min(crate::net::MAX_JET_ORDER) {
        let errs = [(&basis.cos.0, Trig::Cos), (&basis.sin.0, Trig::Sin)].map(|(net, kind)| {
            let m = 2001;
            (0..m)
                .map(|i| {
                    let x = -half + 2.0 * half * i as f64 / (m - 1) as f64;
                    let j = net.directional_jet(&[x], &[1.0], order).unwrap();
                    (j.coeffs[order] - trig_derivative(kind, order, x)).abs()
                })
                .fold(0.0, f64::max)
        });
        let scale = std::f64::consts::SQRT_2 * ((d * n) as f64).powi(order as i32);
        derivative_errors.push(scale * errs[0].max(errs[1]));
    }
    Ok(FourierTrunks { nets, wavenumbers: ks, achieved_error: basis.achieved_error(), derivative_errors })
}

fn trig_derivative(kind: Trig, order: usize, x: f64) -> f64 {
    let shift = match kind {
        Trig::Cos => 0,
        Trig::Sin => 3,
    };
    match (order + shift) % 4 {
        0 => x.cos(),
        1 => -x.sin(),
        2 => -x.cos(),
        _ => x.sin(),
    }
}

// ---------------------------------------------------------------------------
// Legendre basis
// ---------------------------------------------------------------------------

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r
}

/// Monomial coefficients `c^j_ℓ`, `ℓ = 0..=j`, of the Legendre polynomial
/// `L_j` normalized in `L^2([-1,1], λ/2)`.
pub fn legendre_coefficients(j: usize) -> Vec<f64> {
    (0..=j)
        .map(|l| {
            if (j - l) % 2 == 1 {
                return 0.0;
            }
            let m = (j - l) / 2;
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            // binomial(j+l, j) can exceed f64 integer precision only far beyond degree 8.
            sign * 0.5f64.powi(j as i32) * binomial(j, m) * binomial(j + l, j) * ((2 * j + 1) as f64).sqrt()
        })
        .collect()
}

/// Exact value of the tensorized normalized Legendre polynomial `L_ν(x)`.
pub fn legendre_tensor(nu: &[usize], x: &[f64]) -> f64 {
    nu.iter()
        .zip(x)
        .map(|(&j, &xi)| legendre_coefficients(j).iter().rev().fold(0.0, |acc, c| acc * xi + c))
        .product()
}

#[derive(Clone, Debug)]
pub struct LegendreTrunks {
    pub nets: Vec<TanhNetwork>,
    /// Multi-indices in lexicographic order.
    pub multi_indices: Vec<Vec<usize>>,
}

/// Networks approximating `L_ν` on `[-1, 1]^d` for all `ν ∈ {0..=max_degree}^d`.
pub fn legendre_trunk_nets(max_degree: usize, d: usize, eps: f64) -> Result<LegendreTrunks, EmulationError> {
    if max_degree > 8 || !(1..=2).contains(&d) {
        return Err(EmulationError::Invalid(format!("degree {max_degree} or dimension {d} out of range")));
    }
    let univariate = legendre_1d(max_degree, eps / (d as f64 * (2 * max_degree + 2) as f64))?;
    let side = max_degree + 1;
    let mut nets = Vec::new();
    let mut idx = Vec::new();
    for flat in 0..side.pow(d as u32) {
        let mut nu = vec![0usize; d];
        let mut r = flat;
        for slot in nu.iter_mut().rev() {
            *slot = r % side;
            r /= side;
        }
        let net = if d == 1 {
            univariate[nu[0]].clone()
        } else {
            let f0 = univariate[nu[0]].precompose_affine(&[vec![1.0, 0.0]], &[0.0])?;
            let f1 = univariate[nu[1]].precompose_affine(&[vec![0.0, 1.0]], &[0.0])?;
            match (nu[0], nu[1]) {
                (0, 0) => TanhNetwork::constant(2, &[1.0]),
                (_, 0) => f0,
                (0, _) => f1,
                (a, b) => {
                    let bound = ((2 * a.max(b) + 1) as f64).sqrt() * (1.0 + 1e-6) + eps;
                    let tol = 0.5 * eps;
                    let pad = PadPolicy { bound, tol: 0.01 * tol };
                    let both = TanhNetwork::parallel(&[f0, f1], pad)?;
                    TanhNetwork::compose(&pairwise_product(bound, tol)?, &both)?
                }
            }
        };
        let nu_c = nu.clone();
        let err = verify_grid(&net, &move |x: &[f64]| legendre_tensor(&nu_c, x), &vec![(-1.0, 1.0); d]);
        if err > eps {
            return Err(EmulationError::Unachievable { target: format!("Legendre {nu:?}"), tol: eps, achieved: err });
        }
        nets.push(net);
        idx.push(nu);
    }
    Ok(LegendreTrunks { nets, multi_indices: idx })
}

fn legendre_1d(max_degree: usize, eps: f64) -> Result<Vec<TanhNetwork>, EmulationError> {
    let mut out = vec![TanhNetwork::constant(1, &[1.0])];
    if max_degree == 0 {
        return Ok(out);
    }
    let worst: f64 = (1..=max_degree).map(|j| legendre_coefficients(j).iter().map(|c| c.abs()).sum::<f64>()).fold(0.0, f64::max);
    let monos = monomial_nets(max_degree, 1.0, eps / worst)?;
    for j in 1..=max_degree {
        let c = legendre_coefficients(j);
        let (nets, weights): (Vec<TanhNetwork>, Vec<f64>) =
            (1..=j).filter(|&l| c[l] != 0.0).map(|l| (monos[l - 1].clone(), c[l])).unzip();
        let pad = PadPolicy { bound: 1.0 + eps, tol: 0.01 * eps / worst };
        let sum = TanhNetwork::weighted_sum(&nets, &weights, pad)?;
        out.push(sum.postcompose_affine(&[vec![1.0]], &[c[0]])?);
    }
    Ok(out)
}
