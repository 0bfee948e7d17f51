//! Multilevel Picard estimator for `∂_t u = Δu + F(u)` on the torus, its
//! realization as a tanh network at frozen randomness, closed-form error
//! bounds, a spectral reference solver and a Feynman–Kac oracle for linear
//! Kolmogorov equations.
//!
//! The estimator `U_n(t, x)` approximates the solution of the terminal-value
//! problem `∂_t u + Δu + F(u) = 0`, `u(T) = g`, which equals the forward
//! solution at time `T - t`. Brownian motions are scaled by `√2` so that the
//! generator is `Δ`.

use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::emulators::{fit_univariate, polynomial_net, EmulationError};
use crate::net::{NetError, PadPolicy, TanhNetwork};
use crate::rng;
use crate::spectral::{encode, interpolate, TorusGrid, TrigPoly};

pub type ScalarField = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type Nonlinearity = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MlpError {
    #[error("time {t} outside [0, {t_end}]")]
    Time { t: f64, t_end: f64 },
    #[error("point has dimension {got}, problem has {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("problem constants violated: {0}")]
    Constants(String),
    #[error("argument of the emulated nonlinearity reaches {reached}, fitted range is {range}")]
    Range { reached: f64, range: f64 },
    #[error("nonlinear coefficients cannot be recombined from base paths")]
    NonAffine,
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error(transparent)]
    Emulation(#[from] EmulationError),
    #[error(transparent)]
    Net(#[from] NetError),
}

/// `∂_t u = Δu + F(u)` on `[0, T] × [0, 2π]^d` with initial value `g`.
#[derive(Clone)]
pub struct SemilinearProblem {
    pub name: String,
    pub d: usize,
    pub t_end: f64,
    pub g: ScalarField,
    pub f: Nonlinearity,
    /// Global Lipschitz constant of `F`.
    pub lipschitz: f64,
    /// Bound on `|F|` and `|g|`.
    pub bound: f64,
    /// Coefficients `c_p` of `F(u) = Σ c_p u^p` and the radius on which this holds.
    pub f_poly: Option<(Vec<f64>, f64)>,
}

impl std::fmt::Debug for SemilinearProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SemilinearProblem")
            .field("name", &self.name)
            .field("d", &self.d)
            .field("t_end", &self.t_end)
            .field("lipschitz", &self.lipschitz)
            .field("bound", &self.bound)
            .finish()
    }
}

/// `u - u^3` with `u` clamped to `[-2, 2]`: Lipschitz 11, bounded by 6.
pub fn allen_cahn_clamped(u: f64) -> f64 {
    let v = u.clamp(-2.0, 2.0);
    v - v * v * v
}

impl SemilinearProblem {
    /// Clamped Allen–Cahn with `g(x) = (2d)^{-1} Σ_i cos x_i`.
    pub fn allen_cahn(d: usize, t_end: f64) -> Self {
        Self {
            name: "allen-cahn".into(),
            d,
            t_end,
            g: Arc::new(move |x: &[f64]| x.iter().map(|v| v.cos()).sum::<f64>() / (2.0 * x.len() as f64)),
            f: Arc::new(allen_cahn_clamped),
            lipschitz: 11.0,
            bound: 6.0,
            f_poly: Some((vec![0.0, 1.0, 0.0, -1.0], 2.0)),
        }
    }

    /// Heat equation `∂_t u = Δu` with initial value `g` bounded by `bound`.
    pub fn heat(d: usize, t_end: f64, g: ScalarField, bound: f64) -> Self {
        Self { name: "heat".into(), d, t_end, g, f: Arc::new(|_| 0.0), lipschitz: 0.0, bound, f_poly: Some((vec![], f64::INFINITY)) }
    }

    /// Scans `F` on `[-4, 4]` and `g` on a probe set against the declared constants.
    pub fn validate(&self) -> Result<(), MlpError> {
        if !(self.t_end > 0.0) || self.d == 0 {
            return Err(MlpError::Invalid("T and d must be positive".into()));
        }
        let n = 4001;
        let us: Vec<f64> = (0..n).map(|i| -4.0 + 8.0 * i as f64 / (n - 1) as f64).collect();
        let slack = 1.0 + 1e-9;
        for w in us.windows(2) {
            let (a, b) = ((self.f)(w[0]), (self.f)(w[1]));
            if (a - b).abs() > self.lipschitz * (w[1] - w[0]) * slack + 1e-12 {
                return Err(MlpError::Constants(format!("F not {}-Lipschitz near {}", self.lipschitz, w[0])));
            }
            if a.abs() > self.bound * slack {
                return Err(MlpError::Constants(format!("|F({})| = {} exceeds {}", w[0], a.abs(), self.bound)));
            }
        }
        for x in probe_points(self.d, 512) {
            let v = (self.g)(&x);
            if v.abs() > self.bound * slack {
                return Err(MlpError::Constants(format!("|g| = {} exceeds {}", v.abs(), self.bound)));
            }
        }
        Ok(())
    }
}

/// Deterministic low-discrepancy points in `[0, 2π)^d`.
pub fn probe_points(d: usize, count: usize) -> Vec<Vec<f64>> {
    const PRIMES: [f64; 12] = [2.0, 3.0, 5.0, 7.0, 11.0, 13.0, 17.0, 19.0, 23.0, 29.0, 31.0, 37.0];
    (0..count)
        .map(|k| (0..d).map(|i| 2.0 * PI * ((k as f64 + 0.5) * PRIMES[i % 12].sqrt() + i as f64 / 7.0).fract()).collect())
        .collect()
}

fn brownian_draw(seed: u64, path: &[i64], d: usize, with_time: bool) -> (f64, Vec<f64>) {
    let mut r = rng::stream("mlp", seed, path);
    let y = if with_time { r.random::<f64>() } else { 0.0 };
    let w = (0..d).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
    (y, w)
}

fn check_time(p: &SemilinearProblem, t: f64) -> Result<(), MlpError> {
    if !(0.0..=p.t_end).contains(&t) {
        return Err(MlpError::Time { t, t_end: p.t_end });
    }
    Ok(())
}

/// One realization of `U_n(t, x)` for `seed`.
pub fn mlp_estimate(p: &SemilinearProblem, n: usize, m: usize, t: f64, x: &[f64], seed: u64) -> Result<f64, MlpError> {
    Ok(mlp_estimate_counted(p, n, m, t, x, seed)?.0)
}

/// As [`mlp_estimate`], also returning the number of Brownian increments drawn.
pub fn mlp_estimate_counted(
    p: &SemilinearProblem,
    n: usize,
    m: usize,
    t: f64,
    x: &[f64],
    seed: u64,
) -> Result<(f64, u64), MlpError> {
    check_time(p, t)?;
    if x.len() != p.d {
        return Err(MlpError::Dimension { expected: p.d, got: x.len() });
    }
    if m == 0 {
        return Err(MlpError::Invalid("m must be positive".into()));
    }
    let mut count = 0;
    let mut path = Vec::new();
    let v = recurse(p, n, m, t, x, seed, &mut path, &mut count);
    Ok((v, count))
}

#[allow(clippy::too_many_arguments)]
fn recurse(p: &SemilinearProblem, n: usize, m: usize, t: f64, x: &[f64], seed: u64, path: &mut Vec<i64>, count: &mut u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let dt = p.t_end - t;
    let mn = m.pow(n as u32);
    let mut y = vec![0.0; x.len()];
    let mut g_sum = 0.0;
    for i in 1..=mn {
        path.extend([0, -(i as i64)]);
        let (_, w) = brownian_draw(seed, path, p.d, false);
        *count += 1;
        for k in 0..x.len() {
            y[k] = x[k] + SQRT_2 * dt.sqrt() * w[k];
        }
        g_sum += (p.g)(&y);
        path.truncate(path.len() - 2);
    }
    let mut total = g_sum / mn as f64;
    for l in 0..n {
        let ml = m.pow((n - l) as u32);
        let mut s = 0.0;
        for i in 1..=ml {
            path.extend([l as i64, i as i64]);
            let (u, w) = brownian_draw(seed, path, p.d, true);
            *count += 1;
            let r = t + dt * u;
            let y: Vec<f64> = x.iter().zip(&w).map(|(a, b)| a + SQRT_2 * (r - t).sqrt() * b).collect();
            s += (p.f)(recurse(p, l, m, r, &y, seed, path, count));
            if l >= 1 {
                let k = path.len();
                path[k - 2] = -(l as i64);
                s -= (p.f)(recurse(p, l - 1, m, r, &y, seed, path, count));
            }
            path.truncate(path.len() - 2);
        }
        total += dt * s / ml as f64;
    }
    total
}

/// Number of Brownian increments one estimate of `U_n` draws.
pub fn mlp_draw_count(n: usize, m: u64) -> u64 {
    let mut d = vec![0u64; n + 1];
    for k in 1..=n {
        let mut c = m.pow(k as u32);
        for l in 0..k {
            c += m.pow((k - l) as u32) * (1 + d[l] + if l >= 1 { d[l - 1] } else { 0 });
        }
        d[k] = c;
    }
    d[n]
}

/// Estimates over several seeds with their sample statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpEstimate {
    pub n: usize,
    pub m: usize,
    pub t: f64,
    pub x: Vec<f64>,
    pub seeds: Vec<u64>,
    pub values: Vec<f64>,
    pub mean: f64,
    pub variance: f64,
    pub std_error: f64,
}

pub fn mlp_estimate_seeds(
    p: &SemilinearProblem,
    n: usize,
    m: usize,
    t: f64,
    x: &[f64],
    seeds: &[u64],
) -> Result<MlpEstimate, MlpError> {
    let values = seeds.par_iter().map(|&s| mlp_estimate(p, n, m, t, x, s)).collect::<Result<Vec<_>, _>>()?;
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let variance = if values.len() > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0) } else { 0.0 };
    Ok(MlpEstimate {
        n,
        m,
        t,
        x: x.to_vec(),
        seeds: seeds.to_vec(),
        values,
        mean,
        variance,
        std_error: (variance / k).sqrt(),
    })
}

/// Which closed-form bound [`mlp_error_bound`] evaluates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BoundKind {
    /// Estimator error `𝓛(T+1)e^{LT}(1+2LT)^n m^{-n/2} e^{m/2}`.
    Raw,
    /// Network error `C_1 C_2^n (e_g + e_F + e_I + m^{-n/2} e^{m/2})` with
    /// `C_1 = (T+1)(1+𝓛e^{LT})`, `C_2 = 5+3LT`.
    Network { g_err: f64, f_err: f64, id_err: f64 },
}

pub fn mlp_error_bound(lipschitz: f64, bound: f64, t_end: f64, n: usize, m: usize, which: BoundKind) -> f64 {
    let (l, b, t) = (lipschitz, bound, t_end);
    let mc = (m as f64).powf(-(n as f64) / 2.0) * (m as f64 / 2.0).exp();
    match which {
        BoundKind::Raw => b * (t + 1.0) * (l * t).exp() * (1.0 + 2.0 * l * t).powi(n as i32) * mc,
        BoundKind::Network { g_err, f_err, id_err } => {
            let c1 = (t + 1.0) * (1.0 + b * (l * t).exp());
            let c2 = 5.0 + 3.0 * l * t;
            c1 * c2.powi(n as i32) * (g_err + f_err + id_err + mc)
        }
    }
}

// ---------------------------------------------------------------------------
// Network realization
// ---------------------------------------------------------------------------

/// Emulations consumed by [`mlp_network_realization`].
#[derive(Clone, Debug)]
pub struct MlpEmulations {
    pub g_hat: TanhNetwork,
    pub g_err: f64,
    pub f_hat: TanhNetwork,
    pub f_err: f64,
    /// `F̂` is accurate on `[-f_range, f_range]`.
    pub f_range: f64,
    pub pad: PadPolicy,
}

impl MlpEmulations {
    /// Fits `ĝ` on `[-nπ - 1/2, 2π + nπ + 1/2]` and `F̂` on `[-f_range, f_range]` for a
    /// one-dimensional problem.
    pub fn fit_1d(p: &SemilinearProblem, n: usize, tol: f64, f_range: f64) -> Result<Self, MlpError> {
        if p.d != 1 {
            return Err(MlpError::Dimension { expected: 1, got: p.d });
        }
        let g = p.g.clone();
        let lo = -(n as f64) * PI - 0.5;
        let hi = 2.0 * PI + n as f64 * PI + 0.5;
        let g_hat = fit_univariate(&move |x| g(&[x]), lo, hi, 32, tol)?;
        let f_hat = match &p.f_poly {
            Some((c, radius)) if f_range <= *radius => polynomial_net(c, f_range, tol)?,
            _ => {
                let f = p.f.clone();
                fit_univariate(&move |u| f(u), -f_range, f_range, 16, tol)?
            }
        };
        let pad = PadPolicy { bound: 2.0 * (p.bound + f_range) + 2.0, tol: 1e-10 };
        Ok(Self { g_hat, g_err: tol, f_hat, f_err: tol, f_range, pad })
    }
}

#[derive(Clone, Debug)]
pub struct MlpNetwork {
    pub net: TanhNetwork,
    /// Largest `|Û_l|` fed into `F̂` over the probe set.
    pub f_argument_max: f64,
    /// Telescoped bound on `sup |Û_n - U_n|` at the frozen randomness.
    pub budget: f64,
}

fn wrap(v: f64) -> f64 {
    v - 2.0 * PI * (v / (2.0 * PI)).round()
}

/// Tanh network in `x` equal to `U_n(t, ·)` at the Brownian draws of `seed`,
/// with `g`, `F` replaced by their emulations and shifts reduced mod `2π`.
pub fn mlp_network_realization(
    p: &SemilinearProblem,
    emu: &MlpEmulations,
    n: usize,
    m: usize,
    t: f64,
    seed: u64,
) -> Result<MlpNetwork, MlpError> {
    check_time(p, t)?;
    if m == 0 {
        return Err(MlpError::Invalid("m must be positive".into()));
    }
    let probes = probe_points(p.d, 256);
    let mut reach = 0.0f64;
    let mut path = Vec::new();
    let net = realize(p, emu, n, m, t, seed, &mut path, &probes, &mut reach)?;
    if reach > emu.f_range {
        return Err(MlpError::Range { reached: reach, range: emu.f_range });
    }
    let budget = realization_budget(p, emu, n, net.depth());
    Ok(MlpNetwork { net, f_argument_max: reach, budget })
}

/// `E_n <= e_g + e_pad + T Σ_{l<n} [(e_F + L E_l) + 1_{l>=1}(e_F + L E_{l-1})]`.
fn realization_budget(p: &SemilinearProblem, emu: &MlpEmulations, n: usize, depth: usize) -> f64 {
    let t = p.t_end;
    let l = p.lipschitz;
    let pad = emu.pad.tol * depth as f64 * (1.0 + 2.0 * n as f64 * t);
    let mut e = vec![0.0; n + 1];
    for k in 1..=n {
        let mut acc = emu.g_err + pad;
        for j in 0..k {
            acc += t * (emu.f_err + l * e[j]);
            if j >= 1 {
                acc += t * (emu.f_err + l * e[j - 1]);
            }
        }
        e[k] = acc;
    }
    e[n]
}

#[allow(clippy::too_many_arguments)]
fn realize(
    p: &SemilinearProblem,
    emu: &MlpEmulations,
    n: usize,
    m: usize,
    t: f64,
    seed: u64,
    path: &mut Vec<i64>,
    probes: &[Vec<f64>],
    reach: &mut f64,
) -> Result<TanhNetwork, MlpError> {
    let d = p.d;
    if n == 0 {
        return Ok(TanhNetwork::constant(d, &[0.0]));
    }
    let eye: Vec<Vec<f64>> = (0..d).map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    let dt = p.t_end - t;
    let mn = m.pow(n as u32);
    let mut nets = Vec::new();
    let mut weights = Vec::new();
    for i in 1..=mn {
        path.extend([0, -(i as i64)]);
        let (_, w) = brownian_draw(seed, path, d, false);
        let shift: Vec<f64> = w.iter().map(|v| wrap(SQRT_2 * dt.sqrt() * v)).collect();
        nets.push(emu.g_hat.precompose_affine(&eye, &shift)?);
        weights.push(1.0 / mn as f64);
        path.truncate(path.len() - 2);
    }
    for l in 0..n {
        let ml = m.pow((n - l) as u32);
        for i in 1..=ml {
            path.extend([l as i64, i as i64]);
            let (u, w) = brownian_draw(seed, path, d, true);
            let r = t + dt * u;
            let shift: Vec<f64> = w.iter().map(|v| wrap(SQRT_2 * (r - t).sqrt() * v)).collect();
            let mut terms = vec![(l, 1.0)];
            if l >= 1 {
                terms.push((l - 1, -1.0));
            }
            for (level, sign) in terms {
                let k = path.len();
                path[k - 2] = if sign > 0.0 { l as i64 } else { -(l as i64) };
                let inner = realize(p, emu, level, m, r, seed, path, probes, reach)?;
                for x in probes {
                    *reach = reach.max(inner.eval1(x)?.abs());
                }
                let term = TanhNetwork::compose(&emu.f_hat, &inner)?.precompose_affine(&eye, &shift)?;
                nets.push(term);
                weights.push(sign * dt / ml as f64);
            }
            path.truncate(path.len() - 2);
        }
    }
    Ok(TanhNetwork::weighted_sum(&nets, &weights, emu.pad)?)
}

// ---------------------------------------------------------------------------
// Spectral reference
// ---------------------------------------------------------------------------

/// Forward solution at time `T` by exponential time differencing (second
/// order, Cox–Matthews) on `K_N` with step `dt`.
pub fn spectral_reference(p: &SemilinearProblem, n_modes: usize, dt: f64) -> TrigPoly {
    let grid = TorusGrid::new(p.d, n_modes);
    let g = p.g.clone();
    let mut u = interpolate(&encode(&move |x: &[f64]| g(x), &grid), &grid).expect("grid samples");
    let steps = (p.t_end / dt).ceil() as usize;
    let h = p.t_end / steps as f64;
    let lambdas: Vec<f64> = (0..u.coeffs().len()).map(|i| -(u.kappa(i).iter().map(|k| k * k).sum::<i64>() as f64)).collect();
    let phis: Vec<(f64, f64, f64)> = lambdas
        .iter()
        .map(|&lam| {
            let z = lam * h;
            let e = z.exp();
            if z.abs() < 1e-2 {
                let p1 = h * (1.0 + z / 2.0 + z * z / 6.0 + z * z * z / 24.0 + z.powi(4) / 120.0);
                let p2 = h * (0.5 + z / 6.0 + z * z / 24.0 + z * z * z / 120.0 + z.powi(4) / 720.0);
                (e, p1, p2)
            } else {
                (e, (e - 1.0) / lam, (e - 1.0 - z) / (h * lam * lam))
            }
        })
        .collect();
    let f = p.f.clone();
    let nonlin = |v: &TrigPoly| -> TrigPoly {
        let vals: Vec<f64> = v.decode(&grid).into_iter().map(|y| f(y)).collect();
        interpolate(&vals, &grid).expect("grid samples")
    };
    for _ in 0..steps {
        let nu = nonlin(&u);
        let a: Vec<f64> = (0..lambdas.len()).map(|i| phis[i].0 * u.coeffs()[i] + phis[i].1 * nu.coeffs()[i]).collect();
        let a = TrigPoly::from_coeffs(p.d, n_modes, a).unwrap();
        let na = nonlin(&a);
        let next: Vec<f64> =
            (0..lambdas.len()).map(|i| a.coeffs()[i] + phis[i].2 * (na.coeffs()[i] - nu.coeffs()[i])).collect();
        u = TrigPoly::from_coeffs(p.d, n_modes, next).unwrap();
    }
    u
}

// ---------------------------------------------------------------------------
// Feynman–Kac oracle
// ---------------------------------------------------------------------------

/// Drift or diffusion coefficient of a Kolmogorov equation.
#[derive(Clone)]
pub enum Coefficient {
    /// `x -> A x + b`; for diffusions `A` has shape `[d·d, d]` and `b` length
    /// `d·d`, giving the row-major matrix `σ(x)`.
    Affine { a: Vec<Vec<f64>>, b: Vec<f64> },
    /// Arbitrary coefficient; rejected by the Feynman–Kac oracle.
    General(Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>),
}

impl std::fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Coefficient::Affine { a, b } => f.debug_struct("Affine").field("a", a).field("b", b).finish(),
            Coefficient::General(_) => f.write_str("General"),
        }
    }
}

impl Coefficient {
    pub fn zero_drift(d: usize) -> Self {
        Coefficient::Affine { a: vec![vec![0.0; d]; d], b: vec![0.0; d] }
    }

    /// Constant diffusion `c·I`.
    pub fn scaled_identity(d: usize, c: f64) -> Self {
        let mut b = vec![0.0; d * d];
        for i in 0..d {
            b[i * d + i] = c;
        }
        Coefficient::Affine { a: vec![vec![0.0; d]; d * d], b }
    }

    fn affine_eval(a: &[Vec<f64>], b: &[f64], x: &[f64]) -> Vec<f64> {
        a.iter().zip(b).map(|(row, bi)| bi + row.iter().zip(x).map(|(r, v)| r * v).sum::<f64>()).collect()
    }
}

/// `∂_t u = ½ tr(σσ^T ∇²u) + μ·∇u`, `u(0) = φ`.
#[derive(Clone, Debug)]
pub struct KolmogorovProblem {
    pub d: usize,
    pub drift: Coefficient,
    pub diffusion: Coefficient,
    pub phi_hat: TanhNetwork,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeynmanKacOptions {
    pub samples: usize,
    pub steps: usize,
    pub seed: u64,
}

impl Default for FeynmanKacOptions {
    fn default() -> Self {
        Self { samples: 64, steps: 1024, seed: 0 }
    }
}

/// Network `x -> m^{-1} Σ_k φ̂(A_k x + b_k)` where `A_k x + b_k` is the
/// Euler–Maruyama endpoint started at `x`, assembled from the `d+1` base
/// paths started at `0` and `e_i`.
pub fn feynman_kac_oracle(p: &KolmogorovProblem, t: f64, opts: FeynmanKacOptions) -> Result<TanhNetwork, MlpError> {
    let (Coefficient::Affine { a: ma, b: mb }, Coefficient::Affine { a: sa, b: sb }) = (&p.drift, &p.diffusion) else {
        return Err(MlpError::NonAffine);
    };
    let d = p.d;
    if ma.len() != d || mb.len() != d || sa.len() != d * d || sb.len() != d * d {
        return Err(MlpError::Invalid("coefficient shapes do not match the dimension".into()));
    }
    if opts.samples == 0 || opts.steps == 0 || t < 0.0 {
        return Err(MlpError::Invalid("samples, steps and t must be positive".into()));
    }
    let h = t / opts.steps as f64;
    let copies: Vec<TanhNetwork> = (0..opts.samples)
        .into_par_iter()
        .map(|k| {
            let mut r = rng::stream("feynman-kac", opts.seed, &[k as i64]);
            // Column 0 is the path from the origin, column i+1 from e_i.
            let mut paths: Vec<Vec<f64>> = (0..=d)
                .map(|c| (0..d).map(|i| if c == i + 1 { 1.0 } else { 0.0 }).collect())
                .collect();
            let mut dw = vec![0.0; d];
            for _ in 0..opts.steps {
                for v in dw.iter_mut() {
                    *v = h.sqrt() * r.sample::<f64, _>(StandardNormal);
                }
                for x in paths.iter_mut() {
                    let mu = Coefficient::affine_eval(ma, mb, x);
                    let sig = Coefficient::affine_eval(sa, sb, x);
                    for i in 0..d {
                        let noise: f64 = (0..d).map(|j| sig[i * d + j] * dw[j]).sum();
                        x[i] += mu[i] * h + noise;
                    }
                }
            }
            let a: Vec<Vec<f64>> = (0..d).map(|i| (0..d).map(|j| paths[j + 1][i] - paths[0][i]).collect()).collect();
            p.phi_hat.precompose_affine(&a, &paths[0])
        })
        .collect::<Result<_, _>>()?;
    let w = vec![1.0 / opts.samples as f64; opts.samples];
    Ok(TanhNetwork::weighted_sum(&copies, &w, PadPolicy::default())?)
}
