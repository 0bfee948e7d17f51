//! Space-time networks assembled from fixed-time snapshot networks: time
//! finite differences give Taylor coefficients around `t_m = mT/M`, emulated
//! monomials carry the powers of `t - t_m`, and a tanh partition of unity
//! blends the `M` local expansions.

use std::f64::consts::PI;
use std::sync::Arc;

use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::emulators::{monomial_nets, pairwise_product, partition_alpha, partition_of_unity, EmulationError, TrigBasisNets};
use crate::finite_diff::{make_stencil_1d, Bias, FdError, Stencil1d};
use crate::mlp::{feynman_kac_oracle, mlp_network_realization, FeynmanKacOptions, KolmogorovProblem, MlpEmulations, SemilinearProblem};
use crate::net::{NetError, PadPolicy, TanhNetwork};
use crate::spectral::TrigPoly;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceTimeError {
    #[error("oracle failed at t = {t}: {message}")]
    Oracle { t: f64, message: String },
    #[error("invalid construction parameters: {0}")]
    Invalid(String),
    #[error(transparent)]
    Emulation(#[from] EmulationError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Fd(#[from] FdError),
}

/// Produces a network for the solution at a single time.
pub trait FixedTimeOracle: Sync {
    fn name(&self) -> &str;
    /// Spatial dimension.
    fn dim(&self) -> usize;
    /// Declared accuracy of every snapshot.
    fn tolerance(&self) -> f64;
    fn snapshot(&self, t: f64) -> Result<TanhNetwork, SpaceTimeError>;
}

/// Heat semigroup applied to a trigonometric polynomial, with each basis
/// function replaced by its emulation.
pub struct HeatSpectralOracle {
    initial: TrigPoly,
    basis: TrigBasisNets,
    tolerance: f64,
}

impl HeatSpectralOracle {
    /// `basis_tol` bounds the error of every emulated basis function.
    pub fn new(initial: TrigPoly, basis_tol: f64) -> Result<Self, SpaceTimeError> {
        let d = initial.dim();
        let reach = d * initial.degree();
        let basis = TrigBasisNets::new(d, reach, basis_tol)?;
        let weight: f64 = initial.coeffs().iter().map(|c| c.abs()).sum();
        let tolerance = weight * basis.achieved_error();
        Ok(Self { initial, basis, tolerance })
    }

    pub fn initial(&self) -> &TrigPoly {
        &self.initial
    }

    /// Exact solution `Σ c_κ e^{-|κ|^2 t} e_κ(x)`.
    pub fn exact(&self, t: f64, x: &[f64]) -> f64 {
        self.initial.apply_multiplier(|k| (-(k.iter().map(|v| v * v).sum::<i64>() as f64) * t).exp()).evaluate(x)
    }
}

impl FixedTimeOracle for HeatSpectralOracle {
    fn name(&self) -> &str {
        "heat-spectral"
    }

    fn dim(&self) -> usize {
        self.initial.dim()
    }

    fn tolerance(&self) -> f64 {
        self.tolerance
    }

    fn snapshot(&self, t: f64) -> Result<TanhNetwork, SpaceTimeError> {
        let mut nets = Vec::new();
        let mut weights = Vec::new();
        for (i, &c) in self.initial.coeffs().iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let k = self.initial.kappa(i);
            let k2 = k.iter().map(|v| v * v).sum::<i64>() as f64;
            nets.push(self.basis.basis_net(&k)?);
            weights.push(c * (-k2 * t).exp());
        }
        if nets.is_empty() {
            return Ok(TanhNetwork::constant(self.dim(), &[0.0]));
        }
        let bound = 2.0 * weights.iter().map(|w| w.abs()).sum::<f64>() + 2.0;
        Ok(TanhNetwork::weighted_sum(&nets, &weights, PadPolicy { bound, tol: 1e-12 })?)
    }
}

/// Snapshots from the Feynman–Kac Monte Carlo network.
pub struct FeynmanKacFixedTime {
    pub problem: KolmogorovProblem,
    pub options: FeynmanKacOptions,
    /// Accuracy declared by the caller.
    pub declared_tolerance: f64,
}

impl FixedTimeOracle for FeynmanKacFixedTime {
    fn name(&self) -> &str {
        "feynman-kac"
    }

    fn dim(&self) -> usize {
        self.problem.d
    }

    fn tolerance(&self) -> f64 {
        self.declared_tolerance
    }

    fn snapshot(&self, t: f64) -> Result<TanhNetwork, SpaceTimeError> {
        feynman_kac_oracle(&self.problem, t, self.options).map_err(|e| SpaceTimeError::Oracle { t, message: e.to_string() })
    }
}

/// Snapshots from the multilevel Picard network, `U_n(T - t, ·)`.
pub struct MlpFixedTime {
    pub problem: SemilinearProblem,
    pub emulations: MlpEmulations,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub declared_tolerance: f64,
}

impl FixedTimeOracle for MlpFixedTime {
    fn name(&self) -> &str {
        "mlp"
    }

    fn dim(&self) -> usize {
        self.problem.d
    }

    fn tolerance(&self) -> f64 {
        self.declared_tolerance
    }

    fn snapshot(&self, t: f64) -> Result<TanhNetwork, SpaceTimeError> {
        let tau = (self.problem.t_end - t).clamp(0.0, self.problem.t_end);
        mlp_network_realization(&self.problem, &self.emulations, self.n, self.m, tau, self.seed)
            .map(|r| r.net)
            .map_err(|e| SpaceTimeError::Oracle { t, message: e.to_string() })
    }
}

/// Parameters of [`build_spacetime`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeParams {
    pub m: usize,
    pub s: usize,
    pub eps: f64,
    /// Emulation tolerance; defaults to `eps / 10`.
    pub delta: Option<f64>,
    pub t_end: f64,
    /// Largest residual time-derivative order `k` in `α = ln(M^k/ε)`.
    pub residual_order: u32,
}

impl SpaceTimeParams {
    pub fn new(m: usize, s: usize, eps: f64, t_end: f64) -> Self {
        Self { m, s, eps, delta: None, t_end, residual_order: 1 }
    }

    pub fn delta(&self) -> f64 {
        self.delta.unwrap_or(self.eps / 10.0)
    }
}

/// Components of one local expansion, all as networks in `(t, x)`.
#[derive(Clone, Debug)]
pub struct BlockTerms {
    pub t_m: f64,
    /// `c_{i,m}(x) = h^{-i}/i! Σ_j c_j û(t_m + b_j h, x)`.
    pub coeffs: Vec<TanhNetwork>,
    /// Time stencil biases chosen for `i = 1..s-1`.
    pub biases: Vec<Bias>,
    /// Products `×̂(c_{i,m}, φ̂_i(t - t_m))` for `i >= 1`.
    pub coeff_products: Vec<TanhNetwork>,
    /// `N̂_m`.
    pub taylor: TanhNetwork,
    /// `Φ_m(t)`.
    pub window: TanhNetwork,
}

#[derive(Clone, Debug)]
pub struct SpaceTimeNet {
    pub net: TanhNetwork,
    pub params: SpaceTimeParams,
    pub d: usize,
    pub alpha: f64,
    pub blocks: Vec<BlockTerms>,
    /// `φ̂_1, ..., φ̂_{s-1}` on `[-T, T]`.
    pub monomials: Vec<TanhNetwork>,
    /// Product network used for each `i >= 1` Taylor term, per block.
    pub inner_products: Vec<Vec<TanhNetwork>>,
    /// Product network blending each block with its window.
    pub outer_products: Vec<TanhNetwork>,
}

fn lift_space(net: &TanhNetwork, d: usize) -> Result<TanhNetwork, NetError> {
    let a: Vec<Vec<f64>> = (0..d).map(|i| (0..=d).map(|j| if j == i + 1 { 1.0 } else { 0.0 }).collect()).collect();
    net.precompose_affine(&a, &vec![0.0; d])
}

fn lift_time(net: &TanhNetwork, d: usize, shift: f64) -> Result<TanhNetwork, NetError> {
    let mut row = vec![0.0; d + 1];
    row[0] = 1.0;
    net.precompose_affine(&[row], &[-shift])
}

fn probe_bound(net: &TanhNetwork, d: usize, t_end: f64) -> Result<f64, NetError> {
    let mut sup = 0.0f64;
    let pts = crate::mlp::probe_points(d, 64);
    for (k, x) in pts.iter().enumerate() {
        let t = t_end * k as f64 / 63.0;
        let mut z = vec![t];
        z.extend_from_slice(x);
        sup = sup.max(net.eval1(&z)?.abs());
    }
    Ok(sup)
}

/// Time stencils for derivative orders `1..s` at every node `t_m`, `m = 1..=M`,
/// preferring backward, then central, then forward variants that stay within
/// nodes `0..=M`. The window of block `m` is `[t_{m-1}, t_m]`, so backward
/// stencils draw on snapshots inside it and neighbouring expansions agree at
/// the breakpoints up to the stencil error.
pub fn time_stencils(m_count: usize, s: usize) -> Result<Vec<Vec<Stencil1d>>, SpaceTimeError> {
    let h = 1.0 / m_count as f64;
    let mut plans = Vec::with_capacity(m_count);
    for m in 1..=m_count {
        let mut per_order = Vec::new();
        for i in 1..s {
            let acc = s - i;
            let choice = [Bias::Backward, Bias::Central, Bias::Forward].into_iter().find_map(|b| {
                let st = make_stencil_1d(i, acc, b).ok()?;
                let (lo, hi) = st.span();
                (m as i64 + lo >= 0 && m as i64 + hi <= m_count as i64).then_some(st)
            });
            let st = choice.ok_or_else(|| SpaceTimeError::Fd(FdError::NoVariant { point: vec![m as f64 * h], axis: 0 }))?;
            per_order.push(st);
        }
        plans.push(per_order);
    }
    Ok(plans)
}

/// Assembles `û(t, x) = Σ_m ×̂(N̂_m(t, x), Φ_m(t))` with
/// `N̂_m = Σ_i ×̂(c_{i,m}, φ̂_i(t - t_m))`.
pub fn build_spacetime(oracle: &dyn FixedTimeOracle, params: &SpaceTimeParams) -> Result<SpaceTimeNet, SpaceTimeError> {
    let (m_count, s, t_end) = (params.m, params.s, params.t_end);
    if m_count == 0 || !(1..=4).contains(&s) || !(t_end > 0.0) || !(params.eps > 0.0) {
        return Err(SpaceTimeError::Invalid(format!("M = {m_count}, s = {s}, T = {t_end}, eps = {}", params.eps)));
    }
    let d = oracle.dim();
    let delta = params.delta();
    let h = t_end / m_count as f64;

    let plans = time_stencils(m_count, s)?;
    let mut needed = vec![false; m_count + 1];
    for (m, per_order) in plans.iter().enumerate() {
        needed[m + 1] = true;
        for st in per_order {
            for (b, c) in st.offsets.iter().zip(&st.coeffs) {
                if !num_traits::Zero::is_zero(c) {
                    needed[(m as i64 + 1 + b) as usize] = true;
                }
            }
        }
    }
    let nodes: Vec<usize> = (0..=m_count).filter(|&j| needed[j]).collect();
    let snaps: Vec<(usize, TanhNetwork)> = nodes
        .par_iter()
        .map(|&j| {
            let t = j as f64 * h;
            oracle.snapshot(t).and_then(|n| Ok((j, lift_space(&n, d)?)))
        })
        .collect::<Result<_, _>>()?;
    let snapshot = |j: usize| &snaps.iter().find(|(k, _)| *k == j).expect("snapshot requested").1;

    let alpha = partition_alpha(1.0, m_count, params.residual_order, params.eps);
    let windows = partition_of_unity(m_count, t_end, alpha);
    let terms_per_block = s as f64;
    let mono_tol = delta / (4.0 * terms_per_block);
    let monomials = if s > 1 { monomial_nets(s - 1, t_end, mono_tol)? } else { Vec::new() };
    let pad_tol = (delta * 1e-2).min(1e-12);

    let mut blocks = Vec::with_capacity(m_count);
    let mut inner_products = Vec::with_capacity(m_count);
    let mut outer_products = Vec::with_capacity(m_count);
    let mut block_nets = Vec::with_capacity(m_count);
    for (mi, per_order) in plans.iter().enumerate() {
        let m = mi + 1;
        let t_m = m as f64 * h;
        let mut coeffs = vec![snapshot(m).clone()];
        let mut biases = Vec::new();
        for (k, st) in per_order.iter().enumerate() {
            let i = k + 1;
            let fact: f64 = (1..=i).map(|v| v as f64).product();
            let scale = h.powi(-(i as i32)) / fact;
            let (nets, ws): (Vec<TanhNetwork>, Vec<f64>) = st
                .offsets
                .iter()
                .zip(&st.coeffs)
                .filter(|(_, c)| !num_traits::Zero::is_zero(*c))
                .map(|(b, c)| (snapshot((m as i64 + b) as usize).clone(), c.to_f64().unwrap() * scale))
                .unzip();
            let bound = 2.0 * ws.iter().map(|w| w.abs()).sum::<f64>() + 2.0;
            coeffs.push(TanhNetwork::weighted_sum(&nets, &ws, PadPolicy { bound, tol: pad_tol })?);
            biases.push(st.bias);
        }
        let mut terms = vec![coeffs[0].clone()];
        let mut products = Vec::new();
        for i in 1..s {
            let c = &coeffs[i];
            let phi = lift_time(&monomials[i - 1], d, t_m)?;
            let bound = (probe_bound(c, d, t_end)? * 1.2 + 0.1).max(t_end.powi(i as i32) * 1.01);
            let prod = pairwise_product(bound, delta / (2.0 * terms_per_block))?;
            let both = TanhNetwork::parallel(&[c.clone(), phi], PadPolicy { bound, tol: pad_tol })?;
            terms.push(TanhNetwork::compose(&prod, &both)?);
            products.push(prod);
        }
        let ones = vec![1.0; terms.len()];
        let tb = 2.0 * probe_bound(&coeffs[0], d, t_end)? + 2.0;
        let taylor = TanhNetwork::weighted_sum(&terms, &ones, PadPolicy { bound: tb, tol: pad_tol })?;
        let window = lift_time(&windows[mi], d, 0.0)?;
        let bound = (probe_bound(&taylor, d, t_end)? * 1.2 + 0.1).max(1.01);
        // Off-window blocks see |Φ_m| ≈ 0, where the product error vanishes with Φ_m.
        let outer = pairwise_product(bound, 0.5 * delta)?;
        let both = TanhNetwork::parallel(&[taylor.clone(), window.clone()], PadPolicy { bound, tol: pad_tol })?;
        block_nets.push(TanhNetwork::compose(&outer, &both)?);
        blocks.push(BlockTerms { t_m, coeff_products: terms[1..].to_vec(), coeffs, biases, taylor, window });
        inner_products.push(products);
        outer_products.push(outer);
    }
    let ones = vec![1.0; block_nets.len()];
    let total_bound = block_nets.iter().map(|n| probe_bound(n, d, t_end)).sum::<Result<f64, _>>()? * 2.0 + 2.0;
    let net = TanhNetwork::weighted_sum(&block_nets, &ones, PadPolicy { bound: total_bound, tol: pad_tol })?;
    Ok(SpaceTimeNet { net, params: params.clone(), d, alpha, blocks, monomials, inner_products, outer_products })
}

impl SpaceTimeNet {
    pub fn evaluate(&self, t: f64, x: &[f64]) -> f64 {
        let mut z = vec![t];
        z.extend_from_slice(x);
        self.net.eval1(&z).expect("(t, x) input")
    }

    /// `Σ_m ×̂(N̂_m, Φ_m)` evaluated from the stored components.
    pub fn evaluate_by_terms(&self, t: f64, x: &[f64]) -> f64 {
        let mut z = vec![t];
        z.extend_from_slice(x);
        let mut total = 0.0;
        for (mi, block) in self.blocks.iter().enumerate() {
            let mut taylor = block.coeffs[0].eval1(&z).unwrap();
            for (k, prod) in self.inner_products[mi].iter().enumerate() {
                let c = block.coeffs[k + 1].eval1(&z).unwrap();
                let phi = self.monomials[k].eval1(&[t - block.t_m]).unwrap();
                taylor += prod.eval1(&[c, phi]).unwrap();
            }
            let w = block.window.eval1(&z).unwrap();
            total += self.outer_products[mi].eval1(&[taylor, w]).unwrap();
        }
        total
    }
}

/// Exact solution with optional derivatives, for error reports.
#[derive(Clone)]
pub struct Reference {
    pub value: Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>,
    /// `(∂_t u, ∇_x u)`.
    pub derivatives: Option<Arc<dyn Fn(f64, &[f64]) -> (f64, Vec<f64>) + Send + Sync>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeErrorReport {
    pub l2: f64,
    pub sup: f64,
    pub h1: Option<f64>,
    pub initial_l2: f64,
    pub terminal_l2: f64,
    /// Largest jump of the network across opposite faces of the torus.
    pub spatial_periodicity: f64,
    pub time_points: usize,
    pub space_points: usize,
    pub measure: String,
}

/// Errors of a `(t, x)` network against `reference` on a tensor grid with
/// `nt` trapezoid nodes in time and `nx` periodic nodes per space axis.
pub fn spacetime_error_report(net: &TanhNetwork, reference: &Reference, t_end: f64, nt: usize, nx: usize) -> SpaceTimeErrorReport {
    let d = net.input_dim() - 1;
    let spatial = nx.pow(d as u32);
    let point = |mut idx: usize| -> Vec<f64> {
        let mut x = vec![0.0; d];
        for slot in x.iter_mut().rev() {
            *slot = 2.0 * PI * (idx % nx) as f64 / nx as f64;
            idx /= nx;
        }
        x
    };
    let tw = |i: usize| if i == 0 || i == nt - 1 { 0.5 } else { 1.0 } / (nt - 1) as f64;
    let rows: Vec<(f64, f64, f64, f64)> = (0..nt * spatial)
        .into_par_iter()
        .map(|k| {
            let i = k / spatial;
            let t = t_end * i as f64 / (nt - 1) as f64;
            let x = point(k % spatial);
            let mut z = vec![t];
            z.extend_from_slice(&x);
            let e = net.eval1(&z).unwrap() - (reference.value)(t, &x);
            let w = tw(i) / spatial as f64;
            let dh = reference.derivatives.as_ref().map_or(0.0, |der| {
                let (ut, ux) = der(t, &x);
                let mut acc = 0.0;
                for axis in 0..=d {
                    let mut dir = vec![0.0; d + 1];
                    dir[axis] = 1.0;
                    let j = net.directional_jet(&z, &dir, 1).unwrap();
                    let exact = if axis == 0 { ut } else { ux[axis - 1] };
                    acc += (j.coeffs[1] - exact).powi(2);
                }
                acc
            });
            (w * e * e, e.abs(), w * dh, if i == 0 || i == nt - 1 { e * e / spatial as f64 } else { 0.0 })
        })
        .collect();
    let l2 = rows.iter().map(|r| r.0).sum::<f64>().sqrt();
    let sup = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let h1 = reference.derivatives.as_ref().map(|_| (l2 * l2 + rows.iter().map(|r| r.2).sum::<f64>()).sqrt());
    let initial_l2 = rows[..spatial].iter().map(|r| r.3).sum::<f64>().sqrt();
    let terminal_l2 = rows[(nt - 1) * spatial..].iter().map(|r| r.3).sum::<f64>().sqrt();
    let mut periodicity = 0.0f64;
    for i in 0..nt {
        let t = t_end * i as f64 / (nt - 1) as f64;
        for k in 0..spatial.min(64) {
            let x = point(k);
            for axis in 0..d {
                let mut a = vec![t];
                a.extend_from_slice(&x);
                let mut b = a.clone();
                a[axis + 1] = 0.0;
                b[axis + 1] = 2.0 * PI;
                periodicity = periodicity.max((net.eval1(&a).unwrap() - net.eval1(&b).unwrap()).abs());
            }
        }
    }
    SpaceTimeErrorReport {
        l2,
        sup,
        h1,
        initial_l2,
        terminal_l2,
        spatial_periodicity: periodicity,
        time_points: nt,
        space_points: nx,
        measure: "normalized dt/T dx/(2pi)^d".into(),
    }
}

/// `L^2` norm of `∂_t u - Δ_x u` for a `(t, x)` network on the same grid as
/// [`spacetime_error_report`].
pub fn heat_residual(net: &TanhNetwork, t_end: f64, nt: usize, nx: usize) -> f64 {
    let d = net.input_dim() - 1;
    let spatial = nx.pow(d as u32);
    (0..nt * spatial)
        .into_par_iter()
        .map(|k| {
            let i = k / spatial;
            let t = t_end * i as f64 / (nt - 1) as f64;
            let mut idx = k % spatial;
            let mut z = vec![t; d + 1];
            for slot in z[1..].iter_mut().rev() {
                *slot = 2.0 * PI * (idx % nx) as f64 / nx as f64;
                idx /= nx;
            }
            let mut dir = vec![0.0; d + 1];
            dir[0] = 1.0;
            let ut = net.directional_jet(&z, &dir, 1).unwrap().coeffs[1];
            let lap = net.laplacian_over(&z, 1..=d).unwrap();
            let w = if i == 0 || i == nt - 1 { 0.5 } else { 1.0 } / (nt - 1) as f64 / spatial as f64;
            w * (ut - lap).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}
