//! Operator approximations on the torus: a pseudo-spectral FNO built around a
//! fixed-time operator oracle, its conversion to a DeepONet, the
//! physics-informed DeepONet assembled from time finite differences of oracle
//! snapshots, Karhunen–Loève input fields, and the forced pendulum.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_traits::ToPrimitive;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::emulators::{
    fourier_trunk_nets, legendre_tensor, legendre_trunk_nets, monomial_nets, partition_alpha, partition_of_unity,
    product_net, wavenumbers, EmulationError,
};
use crate::linalg::lstsq;
use crate::net::{NetError, PadPolicy, TanhNetwork};
use crate::rng;
use crate::spacetime::{time_stencils, SpaceTimeError};
use crate::spectral::{encode, interpolate, SpectralError, TorusGrid, TrigPoly};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("oracle {name} failed: {message}")]
    Oracle { name: String, message: String },
    #[error("invalid operator construction: {0}")]
    Invalid(String),
    #[error("oracle {0} is not linear; its branch network is unavailable")]
    NonLinear(String),
    #[error(transparent)]
    Emulation(#[from] EmulationError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    SpaceTime(#[from] SpaceTimeError),
}

/// Solution operator at a fixed time, applied to band-limited inputs.
pub trait OperatorOracle: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    /// Declared sup accuracy of every output.
    fn tolerance(&self) -> f64;
    /// Values of the output at time `t` for input `v` at `points`.
    fn apply_at(&self, v: &TrigPoly, t: f64, points: &[Vec<f64>]) -> Result<Vec<f64>, OperatorError>;
    /// Whether `v -> output` is linear, so that branch networks are affine.
    fn is_linear(&self) -> bool {
        false
    }
}

/// Fourier multiplier applied exactly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Multiplier {
    Identity,
    /// `e^{-|κ|^2 t}`.
    Heat,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralMultiplierOracle {
    pub d: usize,
    pub multiplier: Multiplier,
}

impl SpectralMultiplierOracle {
    pub fn new(d: usize, multiplier: Multiplier) -> Self {
        Self { d, multiplier }
    }

    /// Exact output at time `t`.
    pub fn apply_poly(&self, v: &TrigPoly, t: f64) -> TrigPoly {
        match self.multiplier {
            Multiplier::Identity => v.clone(),
            Multiplier::Heat => v.apply_multiplier(|k| (-(k.iter().map(|a| a * a).sum::<i64>() as f64) * t).exp()),
        }
    }
}

impl OperatorOracle for SpectralMultiplierOracle {
    fn name(&self) -> &str {
        match self.multiplier {
            Multiplier::Identity => "identity",
            Multiplier::Heat => "heat-multiplier",
        }
    }

    fn dim(&self) -> usize {
        self.d
    }

    fn tolerance(&self) -> f64 {
        0.0
    }

    fn apply_at(&self, v: &TrigPoly, t: f64, points: &[Vec<f64>]) -> Result<Vec<f64>, OperatorError> {
        if v.dim() != self.d {
            return Err(OperatorError::Invalid(format!("input of dimension {} for a {}-d oracle", v.dim(), self.d)));
        }
        let out = self.apply_poly(v, t);
        Ok(points.par_iter().map(|x| out.evaluate(x)).collect())
    }

    fn is_linear(&self) -> bool {
        true
    }
}

// ---------------------------------------------------------------------------
// FNO
// ---------------------------------------------------------------------------

/// `𝒢_θ = Q_N ∘ E_N ∘ 𝒰^ε ∘ Q_N ∘ E_N` at horizon `t`.
#[derive(Clone)]
pub struct FnoApprox {
    pub n: usize,
    pub t: f64,
    pub eps: f64,
    pub oracle: Arc<dyn OperatorOracle>,
}

impl std::fmt::Debug for FnoApprox {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FnoApprox").field("n", &self.n).field("t", &self.t).field("oracle", &self.oracle.name()).finish()
    }
}

pub fn build_fno(oracle: Arc<dyn OperatorOracle>, n: usize, eps: f64, t: f64) -> Result<FnoApprox, OperatorError> {
    if !(t >= 0.0 && eps > 0.0) {
        return Err(OperatorError::Invalid(format!("t = {t} and eps = {eps}")));
    }
    if oracle.tolerance() > eps {
        return Err(OperatorError::Invalid(format!("oracle tolerance {:e} exceeds eps {eps:e}", oracle.tolerance())));
    }
    Ok(FnoApprox { n, t, eps, oracle })
}

impl FnoApprox {
    pub fn dim(&self) -> usize {
        self.oracle.dim()
    }

    pub fn grid(&self) -> TorusGrid {
        TorusGrid::new(self.dim(), self.n)
    }

    /// `E_N`.
    pub fn encode_stage(&self, f: &(dyn Fn(&[f64]) -> f64 + Sync)) -> Vec<f64> {
        encode(f, &self.grid())
    }

    /// `Q_N`.
    pub fn lift_stage(&self, samples: &[f64]) -> Result<TrigPoly, OperatorError> {
        Ok(interpolate(samples, &self.grid())?)
    }

    /// `E_N ∘ 𝒰^ε`.
    pub fn oracle_stage(&self, v: &TrigPoly) -> Result<Vec<f64>, OperatorError> {
        self.oracle.apply_at(v, self.t, &self.grid().nodes())
    }

    /// The full pipeline on encoded samples.
    pub fn apply_samples(&self, samples: &[f64]) -> Result<TrigPoly, OperatorError> {
        let v = self.lift_stage(samples)?;
        let out = self.oracle_stage(&v)?;
        self.lift_stage(&out)
    }

    pub fn apply_fn(&self, f: &(dyn Fn(&[f64]) -> f64 + Sync)) -> Result<TrigPoly, OperatorError> {
        self.apply_samples(&self.encode_stage(f))
    }

    pub fn apply(&self, v: &TrigPoly) -> Result<TrigPoly, OperatorError> {
        self.apply_samples(&v.decode(&self.grid()))
    }
}

// ---------------------------------------------------------------------------
// DeepONet
// ---------------------------------------------------------------------------

/// `𝒢(v)(y) = τ_0(y) + Σ_k β_k(v(x_1), ..., v(x_m)) τ_k(y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeepOnet {
    pub sensors: Vec<Vec<f64>>,
    pub branch: Vec<TanhNetwork>,
    pub trunk: Vec<TanhNetwork>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trunk0: Option<TanhNetwork>,
}

impl DeepOnet {
    pub fn new(
        sensors: Vec<Vec<f64>>,
        branch: Vec<TanhNetwork>,
        trunk: Vec<TanhNetwork>,
        trunk0: Option<TanhNetwork>,
    ) -> Result<Self, OperatorError> {
        let onet = Self { sensors, branch, trunk, trunk0 };
        onet.check()?;
        Ok(onet)
    }

    fn check(&self) -> Result<(), OperatorError> {
        if self.branch.len() != self.trunk.len() {
            return Err(OperatorError::Invalid(format!("{} branch nets and {} trunk nets", self.branch.len(), self.trunk.len())));
        }
        let m = self.sensors.len();
        if let Some(b) = self.branch.iter().find(|b| b.input_dim() != m || b.output_dim() != 1) {
            return Err(OperatorError::Invalid(format!("branch net {}→{} with {m} sensors", b.input_dim(), b.output_dim())));
        }
        let q = self.query_dim();
        if self.trunk.iter().chain(&self.trunk0).any(|t| t.input_dim() != q || t.output_dim() != 1) {
            return Err(OperatorError::Invalid("trunk nets disagree on the query dimension".into()));
        }
        Ok(())
    }

    pub fn p(&self) -> usize {
        self.branch.len()
    }

    pub fn query_dim(&self) -> usize {
        self.trunk.first().or(self.trunk0.as_ref()).map_or(0, |t| t.input_dim())
    }

    pub fn branch_values(&self, samples: &[f64]) -> Result<Vec<f64>, OperatorError> {
        Ok(self.branch.iter().map(|b| b.eval1(samples)).collect::<Result<_, _>>()?)
    }

    pub fn trunk_values(&self, y: &[f64]) -> Result<Vec<f64>, OperatorError> {
        Ok(self.trunk.iter().map(|t| t.eval1(y)).collect::<Result<_, _>>()?)
    }

    pub fn evaluate(&self, samples: &[f64], y: &[f64]) -> Result<f64, OperatorError> {
        let b = self.branch_values(samples)?;
        let t = self.trunk_values(y)?;
        let base = match &self.trunk0 {
            Some(t0) => t0.eval1(y)?,
            None => 0.0,
        };
        Ok(base + b.iter().zip(&t).map(|(u, v)| u * v).sum::<f64>())
    }

    /// The network `y -> 𝒢(v)(y)` at fixed sensor values.
    pub fn at_input(&self, samples: &[f64], pad: PadPolicy) -> Result<TanhNetwork, OperatorError> {
        let mut weights = self.branch_values(samples)?;
        let mut nets = self.trunk.clone();
        if let Some(t0) = &self.trunk0 {
            nets.push(t0.clone());
            weights.push(1.0);
        }
        if nets.is_empty() {
            return Ok(TanhNetwork::constant(self.query_dim(), &[0.0]));
        }
        Ok(TanhNetwork::weighted_sum(&nets, &weights, pad)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("DeepONet serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self, OperatorError> {
        let onet: Self = serde_json::from_str(s).map_err(|e| OperatorError::Invalid(e.to_string()))?;
        onet.check()?;
        Ok(onet)
    }
}

/// Columns are the responses of a linear map to the unit sample vectors.
fn linear_response(
    inputs: usize,
    f: impl Fn(&[f64]) -> Result<Vec<f64>, OperatorError> + Sync,
) -> Result<DMatrix<f64>, OperatorError> {
    let cols: Vec<Vec<f64>> = (0..inputs)
        .into_par_iter()
        .map(|j| {
            let mut e = vec![0.0; inputs];
            e[j] = 1.0;
            f(&e)
        })
        .collect::<Result<_, _>>()?;
    let rows = cols.first().map_or(0, |c| c.len());
    Ok(DMatrix::from_fn(rows, inputs, |i, j| cols[j][i]))
}

fn affine_row(row: &[f64]) -> TanhNetwork {
    TanhNetwork::linear_form(row, 0.0)
}

/// DeepONet with sensors at the grid nodes, branch nets equal to the FNO's
/// output coefficients and trunk nets emulating the Fourier basis with budget
/// `ε p^{-3/2}`, `p = (2N+1)^d`.
///
/// For a linear oracle the sample-to-sample interpolation, the oracle and the
/// coefficient transform are affine, so each branch net is one affine layer.
pub fn fno_to_deeponet(fno: &FnoApprox, eps: f64) -> Result<DeepOnet, OperatorError> {
    let grid = fno.grid();
    let p = grid.len();
    if p > 1000 {
        return Err(OperatorError::Invalid(format!("(2N+1)^d = {p} exceeds 10^3")));
    }
    if !fno.oracle.is_linear() {
        return Err(OperatorError::NonLinear(fno.oracle.name().into()));
    }
    let coeff_map = linear_response(p, |e| Ok(fno.apply_samples(e)?.coeffs().to_vec()))?;
    let trunks = fourier_trunk_nets(fno.n, grid.d, 0, eps)?;
    let template = TrigPoly::zeros(grid.d, grid.n);
    let branch = trunks
        .wavenumbers
        .iter()
        .map(|k| {
            let i = template.index_of(k).expect("wavenumber in K_N");
            affine_row(&coeff_map.row(i).iter().copied().collect::<Vec<_>>())
        })
        .collect();
    DeepOnet::new(grid.nodes(), branch, trunks.nets, None)
}

/// `sup |𝒢_θ(v)(y) - 𝒢*_θ(v)(y)|` over the listed inputs and query points.
pub fn fno_deeponet_discrepancy(
    fno: &FnoApprox,
    onet: &DeepOnet,
    inputs: &[TrigPoly],
    queries: &[Vec<f64>],
) -> Result<f64, OperatorError> {
    Ok(fno_deeponet_discrepancies(fno, onet, inputs, queries)?.into_iter().fold(0.0, f64::max))
}

/// Sup over the query points of `|𝒢_θ(v)(y) - 𝒢*_θ(v)(y)|`, one entry per input.
pub fn fno_deeponet_discrepancies(
    fno: &FnoApprox,
    onet: &DeepOnet,
    inputs: &[TrigPoly],
    queries: &[Vec<f64>],
) -> Result<Vec<f64>, OperatorError> {
    let trunk: Vec<Vec<f64>> = queries.par_iter().map(|y| onet.trunk_values(y)).collect::<Result<_, _>>()?;
    let grid = fno.grid();
    inputs
        .par_iter()
        .map(|v| -> Result<f64, OperatorError> {
            let samples = v.decode(&grid);
            let exact = fno.apply_samples(&samples)?;
            let b = onet.branch_values(&samples)?;
            let mut worst = 0.0f64;
            for (y, t) in queries.iter().zip(&trunk) {
                let approx: f64 = b.iter().zip(t).map(|(u, w)| u * w).sum();
                worst = worst.max((approx - exact.evaluate(y)).abs());
            }
            Ok(worst)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Physics-informed DeepONet
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiDeepOnetParams {
    pub m: usize,
    pub s: usize,
    pub n: usize,
    pub z: usize,
    pub eps: f64,
    pub t_end: f64,
}

/// Trunk index `(i, m, κ)` of a physics-informed DeepONet.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrunkIndex {
    pub order: usize,
    pub block: usize,
    pub kappa: Vec<i64>,
}

#[derive(Clone, Debug)]
pub struct PiDeepOnet {
    /// Queries are `(t, x)`.
    pub onet: DeepOnet,
    pub params: PiDeepOnetParams,
    pub indices: Vec<TrunkIndex>,
    pub alpha: f64,
    pub delta: f64,
}

/// DeepONet in `(t, x)` whose branch coefficients are the spatial
/// interpolation coefficients of time finite differences of oracle snapshots
/// at the interpolated input `Q_Z E_Z u_0`, and whose trunk nets are
/// `×̂(φ̂_i(t - t_m), Φ_m(t), ê_κ(x))`.
pub fn build_pi_deeponet(oracle: Arc<dyn OperatorOracle>, params: &PiDeepOnetParams) -> Result<PiDeepOnet, OperatorError> {
    let PiDeepOnetParams { m: m_count, s, n, z, eps, t_end } = *params;
    let d = oracle.dim();
    if d != 1 || z > 8 || n > 8 || m_count == 0 || m_count > 8 || !(1..=3).contains(&s) || !(eps > 0.0 && t_end > 0.0) {
        return Err(OperatorError::Invalid(format!("d = {d}, Z = {z}, N = {n}, M = {m_count}, s = {s}, eps = {eps}, T = {t_end}")));
    }
    if !oracle.is_linear() {
        return Err(OperatorError::NonLinear(oracle.name().into()));
    }
    let delta = eps / 10.0;
    let h = t_end / m_count as f64;
    let grid_in = TorusGrid::new(d, z);
    let grid_out = TorusGrid::new(d, n);
    let nodes_out = grid_out.nodes();
    let plans = time_stencils(m_count, s)?;
    let ks = wavenumbers(n, d);
    let template = TrigPoly::zeros(d, n);

    // Per sensor: snapshot values at every time node on the output grid.
    let times: Vec<f64> = (0..=m_count).map(|j| j as f64 * h).collect();
    let response = |samples: &[f64]| -> Result<Vec<f64>, OperatorError> {
        let v = interpolate(samples, &grid_in)?;
        let mut snaps = Vec::with_capacity(times.len());
        for &t in &times {
            snaps.push(oracle.apply_at(&v, t, &nodes_out)?);
        }
        let mut out = Vec::new();
        for (mi, per_order) in plans.iter().enumerate() {
            let m = mi + 1;
            for i in 0..s {
                let vals: Vec<f64> = if i == 0 {
                    snaps[m].clone()
                } else {
                    let st = &per_order[i - 1];
                    let fact: f64 = (1..=i).map(|v| v as f64).product();
                    let scale = h.powi(-(i as i32)) / fact;
                    (0..nodes_out.len())
                        .map(|q| {
                            st.offsets
                                .iter()
                                .zip(&st.coeffs)
                                .map(|(b, c)| c.to_f64().unwrap() * scale * snaps[(m as i64 + b) as usize][q])
                                .sum()
                        })
                        .collect()
                };
                let coeffs = interpolate(&vals, &grid_out)?;
                out.extend(ks.iter().map(|k| coeffs.coeffs()[template.index_of(k).unwrap()]));
            }
        }
        Ok(out)
    };
    let branch_map = linear_response(grid_in.len(), response)?;

    let trunks = fourier_trunk_nets(n, d, 0, delta)?;
    let alpha = partition_alpha(1.0, m_count, 1, eps);
    let windows = partition_of_unity(m_count, t_end, alpha);
    let monomials = if s > 1 { monomial_nets(s - 1, t_end, delta / (4.0 * s as f64))? } else { Vec::new() };
    let bound = 1.05 * (std::f64::consts::SQRT_2 + trunks.achieved_error).max(t_end.powi(s as i32 - 1)).max(1.0);
    let prod = product_net(3, bound, delta)?;
    let pad = PadPolicy { bound, tol: (delta * 1e-2).min(1e-12) };
    let lift_time = |net: &TanhNetwork, shift: f64| net.precompose_affine(&[vec![1.0, 0.0]], &[-shift]);
    let space = trunks.nets.iter().map(|e| e.precompose_affine(&[vec![0.0, 1.0]], &[0.0])).collect::<Result<Vec<_>, _>>()?;

    let mut indices = Vec::new();
    let mut trunk = Vec::new();
    for m in 1..=m_count {
        let t_m = m as f64 * h;
        let window = lift_time(&windows[m - 1], 0.0)?;
        for i in 0..s {
            let phi = if i == 0 { TanhNetwork::constant(2, &[1.0]) } else { lift_time(&monomials[i - 1], t_m)? };
            for (k, e) in ks.iter().zip(&space) {
                let inner = TanhNetwork::parallel(&[phi.clone(), window.clone(), e.clone()], pad)?;
                trunk.push(TanhNetwork::compose(&prod, &inner)?);
                indices.push(TrunkIndex { order: i, block: m, kappa: k.clone() });
            }
        }
    }
    let branch = (0..branch_map.nrows()).map(|r| affine_row(&branch_map.row(r).iter().copied().collect::<Vec<_>>())).collect();
    let onet = DeepOnet::new(grid_in.nodes(), branch, trunk, None)?;
    Ok(PiDeepOnet { onet, params: params.clone(), indices, alpha, delta })
}

// ---------------------------------------------------------------------------
// Karhunen–Loève fields
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoefficientLaw {
    Gaussian,
    Uniform,
}

/// Random field `v = Σ_{|κ|_∞ <= cutoff} α_κ Y_κ e_κ` with `α_κ = exp(-ℓ|κ|)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KlFieldSampler {
    pub d: usize,
    pub decay: f64,
    pub cutoff: usize,
    pub law: CoefficientLaw,
    /// Largest admissible `Σ_{|κ|_∞ > cutoff} α_κ^2`.
    pub tail_tol: f64,
}

/// Largest supported cutoff.
pub const KL_MAX_CUTOFF: usize = 64;

impl KlFieldSampler {
    pub fn new(d: usize, decay: f64, cutoff: usize, law: CoefficientLaw, tail_tol: f64) -> Result<Self, OperatorError> {
        let s = Self { d, decay, cutoff, law, tail_tol };
        if d == 0 || d > 2 || !(decay > 0.0) || cutoff > KL_MAX_CUTOFF {
            return Err(OperatorError::Invalid(format!("d = {d}, decay = {decay}, cutoff = {cutoff}")));
        }
        let tail = s.tail();
        if tail > tail_tol {
            return Err(OperatorError::Invalid(format!("truncation tail {tail:e} exceeds {tail_tol:e}")));
        }
        Ok(s)
    }

    pub fn alpha(&self, kappa: &[i64]) -> f64 {
        let r = kappa.iter().map(|k| (k * k) as f64).sum::<f64>().sqrt();
        (-self.decay * r).exp()
    }

    /// `Σ_{|κ|_∞ > cutoff} α_κ^2`, summed until the shells fall below `1e-30`.
    pub fn tail(&self) -> f64 {
        let mut total = 0.0;
        let mut r = self.cutoff as i64 + 1;
        loop {
            // Shell |κ|_∞ = r.
            let shell: f64 = match self.d {
                1 => 2.0 * self.alpha(&[r]).powi(2),
                _ => {
                    let mut acc = 0.0;
                    for a in -r..=r {
                        for b in -r..=r {
                            if a.abs().max(b.abs()) == r {
                                acc += self.alpha(&[a, b]).powi(2);
                            }
                        }
                    }
                    acc
                }
            };
            total += shell;
            if shell < 1e-30 * total.max(1e-300) || shell == 0.0 || r > 100_000 {
                break;
            }
            r += 1;
        }
        total
    }
}

pub fn sample_kl_field(sampler: &KlFieldSampler, seed: u64) -> TrigPoly {
    let mut r = rng::stream("kl", seed, &[]);
    let mut v = TrigPoly::zeros(sampler.d, sampler.cutoff);
    for i in 0..v.coeffs().len() {
        let k = v.kappa(i);
        let y: f64 = match sampler.law {
            CoefficientLaw::Gaussian => r.sample(StandardNormal),
            CoefficientLaw::Uniform => r.random_range(-1.0..=1.0),
        };
        let c = sampler.alpha(&k) * y;
        v.set(&k, c).expect("wavenumber in range");
    }
    v
}

// ---------------------------------------------------------------------------
// Forced pendulum
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
}

/// Classical RK4 for `v1' = v2`, `v2' = -γ sin v1 + u(t)`, `v(0) = 0`.
pub fn pendulum_solve(u: &dyn Fn(f64) -> f64, gamma: f64, t_end: f64, steps: usize) -> Result<Trajectory, OperatorError> {
    if steps < 64 || !(t_end > 0.0) {
        return Err(OperatorError::Invalid(format!("steps = {steps}, T = {t_end}")));
    }
    let h = t_end / steps as f64;
    let rhs = |t: f64, a: f64, b: f64| (b, -gamma * a.sin() + u(t));
    let (mut a, mut b) = (0.0, 0.0);
    let mut out = Trajectory { t: vec![0.0], v1: vec![0.0], v2: vec![0.0] };
    for k in 0..steps {
        let t = k as f64 * h;
        let k1 = rhs(t, a, b);
        let k2 = rhs(t + 0.5 * h, a + 0.5 * h * k1.0, b + 0.5 * h * k1.1);
        let k3 = rhs(t + 0.5 * h, a + 0.5 * h * k2.0, b + 0.5 * h * k2.1);
        let k4 = rhs(t + h, a + h * k3.0, b + h * k3.1);
        a += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        b += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        out.t.push((k + 1) as f64 * h);
        out.v1.push(a);
        out.v2.push(b);
    }
    Ok(out)
}

/// Forcing `u(t) = Σ_k α_k Y_k e_k(2πt/T)` drawn from `sampler`.
pub fn pendulum_forcing(sampler: &KlFieldSampler, seed: u64, t_end: f64) -> impl Fn(f64) -> f64 + Send + Sync + Clone {
    let field = sample_kl_field(sampler, seed);
    move |t: f64| field.evaluate(&[2.0 * PI * t / t_end])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PendulumDeepOnetParams {
    pub gamma: f64,
    pub t_end: f64,
    /// Legendre trunk degree.
    pub degree: usize,
    pub sensors: usize,
    pub train: usize,
    pub test: usize,
    pub steps: usize,
    pub trunk_eps: f64,
    pub sampler: KlFieldSampler,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct PendulumDeepOnet {
    /// Angle and angular velocity operators, queried at `t`.
    pub angle: DeepOnet,
    pub velocity: DeepOnet,
    /// Relative `L^2` errors over the test draws, per component.
    pub test_errors: [f64; 2],
    pub train_errors: [f64; 2],
}

/// DeepONet for the forced pendulum with Legendre trunk nets in rescaled
/// time and affine branch nets fitted by least squares to the Legendre
/// coefficients of RK4 trajectories.
pub fn pendulum_deeponet(p: &PendulumDeepOnetParams) -> Result<PendulumDeepOnet, OperatorError> {
    if p.sampler.d != 1 || p.sensors < 2 || p.train <= p.sensors || p.degree > 8 {
        return Err(OperatorError::Invalid(format!("sensors = {}, train = {}, degree = {}", p.sensors, p.train, p.degree)));
    }
    let t_end = p.t_end;
    let sensors: Vec<f64> = (0..p.sensors).map(|i| t_end * i as f64 / (p.sensors - 1) as f64).collect();
    let trunks = legendre_trunk_nets(p.degree, 1, p.trunk_eps)?;
    let basis = p.degree + 1;
    let rescale = |net: &TanhNetwork| net.precompose_affine(&[vec![2.0 / t_end]], &[-1.0]);
    let trunk: Vec<TanhNetwork> = trunks.nets.iter().map(rescale).collect::<Result<_, _>>()?;

    // Projection of a trajectory onto the Legendre basis by least squares on the time grid.
    let steps = p.steps;
    let design = DMatrix::from_fn(steps + 1, basis, |r, j| {
        let s = 2.0 * r as f64 / steps as f64 - 1.0;
        legendre_tensor(&trunks.multi_indices[j], &[s])
    });
    let draw = |seed: u64| -> Result<(Vec<f64>, [Vec<f64>; 2], Trajectory), OperatorError> {
        let u = pendulum_forcing(&p.sampler, seed, t_end);
        let traj = pendulum_solve(&u, p.gamma, t_end, steps)?;
        let samples: Vec<f64> = sensors.iter().map(|&t| u(t)).collect();
        let c1 = lstsq(design.clone(), &DVector::from_vec(traj.v1.clone()), 1e-14);
        let c2 = lstsq(design.clone(), &DVector::from_vec(traj.v2.clone()), 1e-14);
        Ok((samples, [c1.iter().copied().collect(), c2.iter().copied().collect()], traj))
    };
    let train: Vec<_> = (0..p.train as u64).into_par_iter().map(|i| draw(rng_seed(p.seed, 0, i))).collect::<Result<_, _>>()?;
    let test: Vec<_> = (0..p.test as u64).into_par_iter().map(|i| draw(rng_seed(p.seed, 1, i))).collect::<Result<_, _>>()?;

    // Affine branch: [samples, 1] -> coefficients.
    let features = DMatrix::from_fn(p.train, p.sensors + 1, |r, c| if c < p.sensors { train[r].0[c] } else { 1.0 });
    let sensor_points: Vec<Vec<f64>> = sensors.iter().map(|&t| vec![t]).collect();
    let mut onets = Vec::new();
    for comp in 0..2 {
        let mut branch = Vec::with_capacity(basis);
        for j in 0..basis {
            let target = DVector::from_iterator(p.train, train.iter().map(|d| d.1[comp][j]));
            let w = lstsq(features.clone(), &target, 1e-12);
            branch.push(TanhNetwork::linear_form(&w.as_slice()[..p.sensors], w[p.sensors]));
        }
        onets.push(DeepOnet::new(sensor_points.clone(), branch, trunk.clone(), None)?);
    }
    let rel_error = |set: &[(Vec<f64>, [Vec<f64>; 2], Trajectory)], comp: usize| -> Result<f64, OperatorError> {
        let mut num = 0.0;
        let mut den = 0.0;
        for (samples, _, traj) in set {
            let b = onets[comp].branch_values(samples)?;
            for (r, &t) in traj.t.iter().enumerate().step_by((steps / 64).max(1)) {
                let s = 2.0 * t / t_end - 1.0;
                let approx: f64 = b.iter().enumerate().map(|(j, c)| c * legendre_tensor(&trunks.multi_indices[j], &[s])).sum();
                let exact = if comp == 0 { traj.v1[r] } else { traj.v2[r] };
                num += (approx - exact).powi(2);
                den += exact * exact;
            }
        }
        Ok((num / den.max(1e-300)).sqrt())
    };
    let test_errors = [rel_error(&test, 0)?, rel_error(&test, 1)?];
    let train_errors = [rel_error(&train, 0)?, rel_error(&train, 1)?];
    let velocity = onets.pop().unwrap();
    let angle = onets.pop().unwrap();
    Ok(PendulumDeepOnet { angle, velocity, test_errors, train_errors })
}

fn rng_seed(seed: u64, split: i64, i: u64) -> u64 {
    use rand::RngCore;
    rng::stream("pendulum-draw", seed, &[split, i as i64]).next_u64()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn heat(d: usize) -> Arc<dyn OperatorOracle> {
        Arc::new(SpectralMultiplierOracle::new(d, Multiplier::Heat))
    }

    fn identity(d: usize) -> Arc<dyn OperatorOracle> {
        Arc::new(SpectralMultiplierOracle::new(d, Multiplier::Identity))
    }

    fn random_poly(d: usize, n: usize, seed: u64) -> TrigPoly {
        let mut r = rng::stream("test-poly", seed, &[]);
        TrigPoly::from_fn(d, n, |_| r.random_range(-1.0..1.0))
    }

    #[test]
    fn identity_fno_fixes_band_limited_inputs() {
        let fno = build_fno(identity(2), 3, 1e-8, 0.0).unwrap();
        let v = random_poly(2, 3, 1);
        let out = fno.apply(&v).unwrap();
        let err = out.sub(&v).coeffs().iter().fold(0.0f64, |a, c| a.max(c.abs()));
        assert!(err < 1e-13, "{err}");
    }

    #[test]
    fn heat_fno_matches_multiplier() {
        let t = 0.1;
        let fno = build_fno(heat(1), 6, 1e-8, t).unwrap();
        let v = random_poly(1, 6, 2);
        let out = fno.apply(&v).unwrap();
        for i in 0..v.coeffs().len() {
            let k = v.kappa(i);
            let exact = v.coeffs()[i] * (-((k[0] * k[0]) as f64) * t).exp();
            assert!((out.coeffs()[i] - exact).abs() <= 1e-8 * exact.abs().max(1e-300) + 1e-14);
        }
        assert_eq!(out.degree(), 6);
    }

    #[test]
    fn single_mode_deeponet_is_exact() {
        let fno = build_fno(heat(1), 0, 1e-6, 0.3).unwrap();
        let onet = fno_to_deeponet(&fno, 1e-6).unwrap();
        assert_eq!(onet.p(), 1);
        let v = random_poly(1, 0, 3);
        let samples = v.decode(&fno.grid());
        let got = onet.evaluate(&samples, &[1.3]).unwrap();
        assert!((got - v.coeffs()[0]).abs() < 1e-15);
    }

    #[test]
    fn deeponet_json_round_trip() {
        let fno = build_fno(identity(1), 1, 1e-6, 0.0).unwrap();
        let onet = fno_to_deeponet(&fno, 1e-5).unwrap();
        let back = DeepOnet::from_json(&onet.to_json()).unwrap();
        assert_eq!(back, onet);
        let v: serde_json::Value = serde_json::from_str(&onet.to_json()).unwrap();
        assert!(v.get("sensors").is_some() && v.get("branch").is_some() && v.get("trunk").is_some());
    }

    #[test]
    fn kl_infinite_decay_is_constant() {
        let s = KlFieldSampler::new(1, 1e6, 4, CoefficientLaw::Gaussian, 1e-12).unwrap();
        let v = sample_kl_field(&s, 9);
        assert!(v.coeffs().iter().enumerate().all(|(i, c)| v.kappa(i) == vec![0] || *c == 0.0));
    }

    #[test]
    fn kl_coefficients_respect_decay() {
        let s = KlFieldSampler::new(2, 0.7, 6, CoefficientLaw::Uniform, 1e-2).unwrap();
        for seed in 0..20 {
            let v = sample_kl_field(&s, seed);
            for i in 0..v.coeffs().len() {
                assert!(v.coeffs()[i].abs() <= s.alpha(&v.kappa(i)));
            }
        }
    }

    #[test]
    fn kl_rejects_large_tail() {
        assert!(KlFieldSampler::new(1, 0.1, 2, CoefficientLaw::Gaussian, 1e-6).is_err());
    }

    #[test]
    fn pendulum_at_rest_stays_at_rest() {
        let tr = pendulum_solve(&|_| 0.0, 1.0, 2.0, 128).unwrap();
        assert!(tr.v1.iter().chain(&tr.v2).all(|v| *v == 0.0));
    }

    #[test]
    fn pendulum_rejects_coarse_grids() {
        assert!(pendulum_solve(&|_| 0.0, 1.0, 2.0, 10).is_err());
    }
}
