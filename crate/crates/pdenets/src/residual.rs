//! PDE residuals of space-time fields, the decomposition of a residual into
//! derivative errors, rate-transfer arithmetic for physics-informed operator
//! bounds, and the a-posteriori generalization bound.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::finite_diff::{make_stencil_1d, Bias};
use crate::linalg::lstsq;
use crate::mlp::{Coefficient, Nonlinearity, ScalarField};
use crate::net::{TanhNetwork, MAX_JET_ORDER};
use crate::rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ResidualError {
    #[error("derivative of order {0} is not supported")]
    Order(usize),
    #[error("field has input dimension {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("self-test failed for {kind}: residual {residual:e} exceeds {tol:e}")]
    SelfTest { kind: String, residual: f64, tol: f64 },
    #[error("bound undefined: {0}")]
    Undefined(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}

// ---------------------------------------------------------------------------
// Fields
// ---------------------------------------------------------------------------

/// Function of `z = (t, x)` with directional derivatives.
pub trait SpaceTimeField: Sync {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    /// Row `o` holds `(f_o, D f_o, ..., D^k f_o)` along `dir`.
    fn directional(&self, z: &[f64], dir: &[f64], k: usize) -> Result<Vec<Vec<f64>>, ResidualError>;
    /// Largest supported `k`.
    fn max_order(&self) -> usize;
}

impl SpaceTimeField for TanhNetwork {
    fn input_dim(&self) -> usize {
        TanhNetwork::input_dim(self)
    }

    fn output_dim(&self) -> usize {
        TanhNetwork::output_dim(self)
    }

    fn directional(&self, z: &[f64], dir: &[f64], k: usize) -> Result<Vec<Vec<f64>>, ResidualError> {
        self.directional_jets(z, dir, k).map_err(|_| ResidualError::Order(k))
    }

    fn max_order(&self) -> usize {
        MAX_JET_ORDER
    }
}

/// Closure field differentiated by central stencils of accuracy 6.
#[derive(Clone)]
pub struct FdField {
    pub input_dim: usize,
    pub output_dim: usize,
    pub f: Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
    pub h: f64,
}

impl FdField {
    pub fn scalar(input_dim: usize, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self { input_dim, output_dim: 1, f: Arc::new(move |z| vec![f(z)]), h: 1e-2 }
    }
}

impl SpaceTimeField for FdField {
    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn output_dim(&self) -> usize {
        self.output_dim
    }

    fn directional(&self, z: &[f64], dir: &[f64], k: usize) -> Result<Vec<Vec<f64>>, ResidualError> {
        if k > 2 {
            return Err(ResidualError::Order(k));
        }
        let at = |s: f64| -> Vec<f64> {
            let p: Vec<f64> = z.iter().zip(dir).map(|(a, b)| a + s * b).collect();
            (self.f)(&p)
        };
        let base = at(0.0);
        let mut rows: Vec<Vec<f64>> = base.iter().map(|v| vec![*v]).collect();
        for order in 1..=k {
            let st = make_stencil_1d(order, 6, Bias::Central).map_err(|_| ResidualError::Order(order))?;
            let mut acc = vec![0.0; self.output_dim];
            for (b, c) in st.offsets.iter().zip(&st.coeffs) {
                if c.is_zero() {
                    continue;
                }
                let w = c.to_f64().unwrap() / self.h.powi(order as i32);
                for (a, v) in acc.iter_mut().zip(at(*b as f64 * self.h)) {
                    *a += w * v;
                }
            }
            for (row, a) in rows.iter_mut().zip(acc) {
                row.push(a);
            }
        }
        Ok(rows)
    }

    fn max_order(&self) -> usize {
        2
    }
}

/// `a - b` as a field.
pub struct Difference<'a> {
    pub a: &'a dyn SpaceTimeField,
    pub b: &'a dyn SpaceTimeField,
}

impl SpaceTimeField for Difference<'_> {
    fn input_dim(&self) -> usize {
        self.a.input_dim()
    }

    fn output_dim(&self) -> usize {
        self.a.output_dim()
    }

    fn directional(&self, z: &[f64], dir: &[f64], k: usize) -> Result<Vec<Vec<f64>>, ResidualError> {
        let x = self.a.directional(z, dir, k)?;
        let y = self.b.directional(z, dir, k)?;
        Ok(x.iter().zip(&y).map(|(r, s)| r.iter().zip(s).map(|(u, v)| u - v).collect()).collect())
    }

    fn max_order(&self) -> usize {
        self.a.max_order().min(self.b.max_order())
    }
}

// ---------------------------------------------------------------------------
// Operators
// ---------------------------------------------------------------------------

#[derive(Clone)]
pub enum PdeKind {
    /// `∂_t u - Δu`.
    Heat,
    /// `∂_t u - Δu - F(u)`.
    Semilinear { f: Nonlinearity, lipschitz: f64 },
    /// `∂_t u - μ·∇u - ½ tr(σσ^T ∇²u)` with affine `μ`, `σ`.
    Kolmogorov { drift: Coefficient, diffusion: Coefficient },
    /// `(v_1' - v_2, v_2' + γ sin v_1 - u(t))` for a field `t -> (v_1, v_2)`.
    Pendulum { gamma: f64, forcing: Arc<dyn Fn(f64) -> f64 + Send + Sync> },
}

impl std::fmt::Debug for PdeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl PdeKind {
    pub fn label(&self) -> &'static str {
        match self {
            PdeKind::Heat => "heat",
            PdeKind::Semilinear { .. } => "semilinear",
            PdeKind::Kolmogorov { .. } => "kolmogorov",
            PdeKind::Pendulum { .. } => "pendulum",
        }
    }
}

/// Differential operator with its derivative orders `k` in time and `ℓ` in space.
#[derive(Clone, Debug)]
pub struct PdeOperator {
    pub kind: PdeKind,
    /// Spatial dimension (zero for the pendulum).
    pub d: usize,
    pub time_order: usize,
    pub space_order: usize,
}

/// Exact solution used for the self-test at registration.
pub struct ExactSolution {
    pub field: FdField,
    pub t_end: f64,
}

/// Tolerance of the registration self-test.
pub const SELF_TEST_TOL: f64 = 1e-6;

impl PdeOperator {
    pub fn heat(d: usize) -> Self {
        Self { kind: PdeKind::Heat, d, time_order: 1, space_order: 2 }
    }

    pub fn semilinear(d: usize, f: Nonlinearity, lipschitz: f64) -> Self {
        Self { kind: PdeKind::Semilinear { f, lipschitz }, d, time_order: 1, space_order: 2 }
    }

    pub fn kolmogorov(d: usize, drift: Coefficient, diffusion: Coefficient) -> Self {
        Self { kind: PdeKind::Kolmogorov { drift, diffusion }, d, time_order: 1, space_order: 2 }
    }

    pub fn pendulum(gamma: f64, forcing: Arc<dyn Fn(f64) -> f64 + Send + Sync>) -> Self {
        Self { kind: PdeKind::Pendulum { gamma, forcing }, d: 0, time_order: 1, space_order: 0 }
    }

    /// Registers the operator after checking that `exact` has residual at most
    /// [`SELF_TEST_TOL`] on a small tensor grid.
    pub fn register(self, exact: &ExactSolution) -> Result<Self, ResidualError> {
        let domain = ResidualDomain { t_end: exact.t_end, d: self.d, initial: None };
        let r = residual_norm(&exact.field, &self, &domain, Quadrature::Trapezoid { nt: 9, nx: 8 })?;
        if r.residual > SELF_TEST_TOL {
            return Err(ResidualError::SelfTest { kind: self.kind.label().into(), residual: r.residual, tol: SELF_TEST_TOL });
        }
        Ok(self)
    }

    fn input_dim(&self) -> usize {
        self.d + 1
    }

    fn output_dim(&self) -> usize {
        match self.kind {
            PdeKind::Pendulum { .. } => 2,
            _ => 1,
        }
    }

    /// Squared pointwise residual at `z = (t, x)`.
    pub fn residual_sq_at(&self, field: &dyn SpaceTimeField, z: &[f64]) -> Result<f64, ResidualError> {
        let n = self.input_dim();
        let unit = |i: usize| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            e
        };
        let dt = field.directional(z, &unit(0), 1)?;
        match &self.kind {
            PdeKind::Pendulum { gamma, forcing } => {
                let (v1, v2) = (&dt[0], &dt[1]);
                let r1 = v1[1] - v2[0];
                let r2 = v2[1] + gamma * v1[0].sin() - forcing(z[0]);
                Ok(r1 * r1 + r2 * r2)
            }
            kind => {
                let u = dt[0][0];
                let ut = dt[0][1];
                let second = |i: usize| -> Result<Vec<f64>, ResidualError> { Ok(field.directional(z, &unit(i), 2)?.swap_remove(0)) };
                let r = match kind {
                    PdeKind::Heat => ut - (1..n).map(|i| second(i).map(|j| j[2])).sum::<Result<f64, _>>()?,
                    PdeKind::Semilinear { f, .. } => {
                        ut - (1..n).map(|i| second(i).map(|j| j[2])).sum::<Result<f64, _>>()? - f(u)
                    }
                    PdeKind::Kolmogorov { drift, diffusion } => {
                        let x = &z[1..];
                        let d = self.d;
                        let mu = coefficient_at(drift, x)?;
                        let sigma = coefficient_at(diffusion, x)?;
                        let mut grad = vec![0.0; d];
                        let mut diag = vec![0.0; d];
                        for i in 0..d {
                            let j = second(i + 1)?;
                            grad[i] = j[1];
                            diag[i] = j[2];
                        }
                        // a = σσ^T, mixed derivatives by polarization.
                        let mut trace = 0.0;
                        for i in 0..d {
                            for k in 0..d {
                                let a_ik: f64 = (0..d).map(|l| sigma[i * d + l] * sigma[k * d + l]).sum();
                                if a_ik == 0.0 {
                                    continue;
                                }
                                let hik = if i == k {
                                    diag[i]
                                } else {
                                    let mut dir = vec![0.0; n];
                                    dir[i + 1] = 1.0;
                                    dir[k + 1] = 1.0;
                                    let both = field.directional(z, &dir, 2)?[0][2];
                                    0.5 * (both - diag[i] - diag[k])
                                };
                                trace += a_ik * hik;
                            }
                        }
                        ut - mu.iter().zip(&grad).map(|(a, b)| a * b).sum::<f64>() - 0.5 * trace
                    }
                    PdeKind::Pendulum { .. } => unreachable!(),
                };
                Ok(r * r)
            }
        }
    }
}

fn coefficient_at(c: &Coefficient, x: &[f64]) -> Result<Vec<f64>, ResidualError> {
    match c {
        Coefficient::Affine { a, b } => {
            Ok(a.iter().zip(b).map(|(row, bi)| bi + row.iter().zip(x).map(|(r, v)| r * v).sum::<f64>()).collect())
        }
        Coefficient::General(f) => Ok(f(x)),
    }
}

// ---------------------------------------------------------------------------
// Residual norms
// ---------------------------------------------------------------------------

/// `[0, T] × [0, 2π]^d` with an optional initial value.
#[derive(Clone)]
pub struct ResidualDomain {
    pub t_end: f64,
    pub d: usize,
    pub initial: Option<ScalarField>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Quadrature {
    Mc { n: usize, seed: u64 },
    Trapezoid { nt: usize, nx: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// `‖ℒ(u)‖` under the normalized measure `dt/T dx/(2π)^d`.
    pub residual: f64,
    /// Standard error of `residual` for Monte Carlo quadrature.
    pub std_error: Option<f64>,
    /// `‖u(0, ·) - u_0‖`, when `u_0` is given.
    pub initial_mismatch: Option<f64>,
    /// `L^2` jump of `u` across opposite faces of the torus.
    pub boundary_mismatch: f64,
    pub points: usize,
}

fn quadrature_points(domain: &ResidualDomain, quad: Quadrature) -> (Vec<Vec<f64>>, Vec<f64>) {
    let d = domain.d;
    match quad {
        Quadrature::Mc { n, seed } => {
            let pts: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    let mut r = rng::stream("residual-mc", seed, &[i as i64]);
                    let mut z = vec![domain.t_end * r.random::<f64>()];
                    z.extend((0..d).map(|_| 2.0 * PI * r.random::<f64>()));
                    z
                })
                .collect();
            (pts, vec![1.0 / n as f64; n])
        }
        Quadrature::Trapezoid { nt, nx } => {
            let spatial = nx.pow(d as u32);
            let mut pts = Vec::with_capacity(nt * spatial);
            let mut w = Vec::with_capacity(nt * spatial);
            for i in 0..nt {
                let t = if nt == 1 { 0.0 } else { domain.t_end * i as f64 / (nt - 1) as f64 };
                let wt = if nt == 1 { 1.0 } else if i == 0 || i == nt - 1 { 0.5 / (nt - 1) as f64 } else { 1.0 / (nt - 1) as f64 };
                for mut idx in 0..spatial {
                    let mut z = vec![t; d + 1];
                    for slot in z[1..].iter_mut().rev() {
                        *slot = 2.0 * PI * (idx % nx) as f64 / nx as f64;
                        idx /= nx;
                    }
                    pts.push(z);
                    w.push(wt / spatial as f64);
                }
            }
            (pts, w)
        }
    }
}

/// Weighted `L^2` norm of `g` over the quadrature, with the Monte Carlo
/// standard error of the norm by the delta method.
fn quadrature_norm(
    domain: &ResidualDomain,
    quad: Quadrature,
    g: impl Fn(&[f64]) -> Result<f64, ResidualError> + Sync,
) -> Result<(f64, Option<f64>), ResidualError> {
    let (pts, w) = quadrature_points(domain, quad);
    let vals: Vec<f64> = pts.par_iter().map(|z| g(z)).collect::<Result<_, _>>()?;
    let mean: f64 = vals.iter().zip(&w).map(|(v, w)| v * w).sum();
    let norm = mean.max(0.0).sqrt();
    let se = match quad {
        Quadrature::Mc { n, .. } if n > 1 => {
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let se_mean = (var / n as f64).sqrt();
            Some(if norm > 0.0 { se_mean / (2.0 * norm) } else { se_mean.sqrt() })
        }
        _ => None,
    };
    Ok((norm, se))
}

/// Residual `‖ℒ(u)‖`, initial mismatch and periodic boundary mismatch of a
/// field on `[0, T] × [0, 2π]^d`.
pub fn residual_norm(
    field: &dyn SpaceTimeField,
    op: &PdeOperator,
    domain: &ResidualDomain,
    quad: Quadrature,
) -> Result<ResidualReport, ResidualError> {
    if field.input_dim() != op.input_dim() || domain.d != op.d {
        return Err(ResidualError::Dimension { expected: op.input_dim(), got: field.input_dim() });
    }
    if field.output_dim() != op.output_dim() {
        return Err(ResidualError::Dimension { expected: op.output_dim(), got: field.output_dim() });
    }
    let needed = op.time_order.max(op.space_order);
    if needed > field.max_order() {
        return Err(ResidualError::Order(needed));
    }
    let (residual, std_error) = quadrature_norm(domain, quad, |z| op.residual_sq_at(field, z))?;
    let value = |z: &[f64]| -> Result<Vec<f64>, ResidualError> {
        Ok(field.directional(z, &vec![0.0; z.len()], 0)?.into_iter().map(|r| r[0]).collect())
    };
    let slice = ResidualDomain { t_end: 0.0, d: domain.d, initial: None };
    let slice_quad = match quad {
        Quadrature::Mc { n, seed } => Quadrature::Mc { n, seed: seed ^ 0x5eed },
        Quadrature::Trapezoid { nx, .. } => Quadrature::Trapezoid { nt: 1, nx },
    };
    let initial_mismatch = match &domain.initial {
        Some(u0) => Some(
            quadrature_norm(&slice, slice_quad, |z| {
                let v = value(z)?;
                Ok(if op.d == 0 { v.iter().map(|a| a * a).sum() } else { (v[0] - u0(&z[1..])).powi(2) })
            })?
            .0,
        ),
        None if op.d == 0 => Some(value(&[0.0])?.iter().map(|a| a * a).sum::<f64>().sqrt()),
        None => None,
    };
    let boundary_mismatch = if op.d == 0 {
        0.0
    } else {
        quadrature_norm(domain, quad, |z| {
            let mut acc = 0.0;
            for axis in 1..z.len() {
                let mut a = z.to_vec();
                let mut b = z.to_vec();
                a[axis] = 0.0;
                b[axis] = 2.0 * PI;
                acc += (value(&a)?[0] - value(&b)?[0]).powi(2);
            }
            Ok(acc)
        })?
        .0
    };
    let points = quadrature_points(domain, quad).0.len();
    Ok(ResidualReport { residual, std_error, initial_mismatch, boundary_mismatch, points })
}

// ---------------------------------------------------------------------------
// Decomposition into derivative errors
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionTerm {
    /// Time order and spatial multi-index.
    pub time: usize,
    pub space: Vec<usize>,
    pub norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub terms: Vec<DecompositionTerm>,
    pub residual: f64,
    pub sum: f64,
    /// `L ‖u - u_ref‖` for semilinear operators, otherwise zero.
    pub lipschitz_term: f64,
    /// Largest coefficient magnitude of the operator on the quadrature set.
    pub coefficient_bound: f64,
    /// `residual / (sum + lipschitz_term)`.
    pub fitted_constant: f64,
    /// `residual <= coefficient_bound · sum + lipschitz_term`.
    pub holds: bool,
}

/// Norms `‖D^{(k,α)}(u - u_ref)‖` of every derivative the operator uses and
/// the check that the residual of `u` is bounded by their weighted sum.
pub fn assumption_decomposition(
    field: &dyn SpaceTimeField,
    reference: &dyn SpaceTimeField,
    op: &PdeOperator,
    domain: &ResidualDomain,
    quad: Quadrature,
) -> Result<Decomposition, ResidualError> {
    if op.d == 0 {
        return Err(ResidualError::Invalid("decomposition is defined for space-time operators".into()));
    }
    let err = Difference { a: field, b: reference };
    let n = op.input_dim();
    let mut dirs: Vec<(usize, Vec<usize>, Vec<f64>, usize)> = Vec::new();
    let unit = |i: usize| {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        e
    };
    dirs.push((1, vec![0; op.d], unit(0), 1));
    let kolmogorov = matches!(op.kind, PdeKind::Kolmogorov { .. });
    for i in 0..op.d {
        let mut a = vec![0; op.d];
        if kolmogorov {
            a[i] = 1;
            dirs.push((0, a.clone(), unit(i + 1), 1));
        }
        a[i] = 2;
        dirs.push((0, a, unit(i + 1), 2));
    }
    let mut terms = Vec::new();
    for (time, space, dir, order) in dirs {
        let (norm, _) = quadrature_norm(domain, quad, |z| Ok(err.directional(z, &dir, order)?[0][order].powi(2)))?;
        terms.push(DecompositionTerm { time, space, norm });
    }
    let (e0, _) = quadrature_norm(domain, quad, |z| Ok(err.directional(z, &vec![0.0; n], 0)?[0][0].powi(2)))?;
    let lipschitz_term = match &op.kind {
        PdeKind::Semilinear { lipschitz, .. } => lipschitz * e0,
        _ => 0.0,
    };
    let coefficient_bound = match &op.kind {
        PdeKind::Kolmogorov { drift, diffusion } => {
            let (pts, _) = quadrature_points(domain, quad);
            let mut c = 1.0f64;
            for z in &pts {
                let x = &z[1..];
                let mu = coefficient_at(drift, x)?;
                let s = coefficient_at(diffusion, x)?;
                let d = op.d;
                c = c.max(mu.iter().fold(0.0, |a, v| a.max(v.abs())));
                for i in 0..d {
                    for k in 0..d {
                        let a_ik: f64 = (0..d).map(|l| s[i * d + l] * s[k * d + l]).sum();
                        c = c.max(0.5 * a_ik.abs() * d as f64);
                    }
                }
            }
            c
        }
        _ => 1.0,
    };
    let residual = residual_norm(field, op, domain, quad)?.residual;
    let sum: f64 = terms.iter().map(|t| t.norm).sum();
    let denom = sum + lipschitz_term;
    Ok(Decomposition {
        terms,
        residual,
        sum,
        lipschitz_term,
        coefficient_bound,
        fitted_constant: if denom > 0.0 { residual / denom } else { 0.0 },
        holds: residual <= coefficient_bound * sum + lipschitz_term + 1e-12 * (1.0 + residual),
    })
}

// ---------------------------------------------------------------------------
// Rate transfer
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateTransfer {
    /// Largest admissible `β = ((r - ℓ)λ* - ℓσ(r)) / r`.
    pub beta: f64,
    /// `β` for the requested rate `λ`, `((r - ℓ)λ - ℓσ(r)) / r`.
    pub beta_at_lambda: f64,
    /// Exponent `e` in `h = p^e`, `e = -(σ(r) + β)/(r - ℓ)`.
    pub h_exponent: f64,
    pub feasible: bool,
}

fn check_orders(r: u32, l: u32) -> Result<(), ResidualError> {
    if r <= l {
        return Err(ResidualError::Invalid(format!("need r > ℓ, got r = {r}, ℓ = {l}")));
    }
    Ok(())
}

/// Balancing of the network-size exponent against the derivative loss.
pub fn pido_rate_transfer(lambda: f64, lambda_star: f64, sigma: f64, r: u32, l: u32) -> Result<RateTransfer, ResidualError> {
    check_orders(r, l)?;
    let (r, l) = (r as f64, l as f64);
    let beta = ((r - l) * lambda_star - l * sigma) / r;
    Ok(RateTransfer {
        beta,
        beta_at_lambda: ((r - l) * lambda - l * sigma) / r,
        h_exponent: -(sigma + beta) / (r - l),
        feasible: (r - l) * lambda_star > l * sigma,
    })
}

/// Exact `β` and the rate `λ = ℓσ/(r - ℓ) + rβ/(r - ℓ)` it gives back.
pub fn pido_rate_transfer_exact(
    lambda_star: &BigRational,
    sigma: &BigRational,
    r: u32,
    l: u32,
) -> Result<(BigRational, BigRational), ResidualError> {
    check_orders(r, l)?;
    let rr = BigRational::from_integer(r.into());
    let ll = BigRational::from_integer(l.into());
    let gap = &rr - &ll;
    let beta = (&gap * lambda_star - &ll * sigma) / &rr;
    let lambda = (&ll * sigma) / &gap + (&rr * &beta) / &gap;
    Ok((beta, lambda))
}

// ---------------------------------------------------------------------------
// Generalization bound
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenBoundInput {
    /// Number of parameters `d_Θ`.
    pub params: f64,
    /// Weight bound `R`.
    pub weight_bound: f64,
    /// Lipschitz constant `𝔏` of `θ -> E_T^2`.
    pub lipschitz: f64,
    /// Bound `c` on the loss.
    pub loss_bound: f64,
    pub samples: f64,
    /// Training error `E_T`.
    pub training_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenBound {
    pub rhs: f64,
    /// `n >= 2c^2 e^8 / (2R𝔏)^{d_Θ/2}`.
    pub precondition_ok: bool,
    pub precondition_threshold: f64,
}

/// `E_T^2 + sqrt(2c^2 (d_Θ + 1)/n · ln(R𝔏√n))`.
pub fn generalization_bound(inp: &GenBoundInput) -> Result<GenBound, ResidualError> {
    let GenBoundInput { params, weight_bound, lipschitz, loss_bound: c, samples: n, training_error } = *inp;
    if !(params > 0.0 && weight_bound > 0.0 && lipschitz > 0.0 && c > 0.0 && n > 0.0 && training_error >= 0.0) {
        return Err(ResidualError::Invalid(format!("{inp:?}")));
    }
    let rl = weight_bound * lipschitz;
    let arg = rl * n.sqrt();
    if arg <= 1.0 {
        return Err(ResidualError::Undefined(format!("R𝔏√n = {arg} <= 1")));
    }
    let rhs = training_error.powi(2) + (2.0 * c * c * (params + 1.0) / n * arg.ln()).sqrt();
    // Threshold in log space: (2R𝔏)^{d_Θ/2} overflows for large d_Θ.
    let log_thr = (2.0 * c * c).ln() + 8.0 - 0.5 * params * (2.0 * rl).ln();
    let precondition_threshold = log_thr.exp();
    Ok(GenBound { rhs, precondition_ok: n.ln() >= log_thr, precondition_threshold })
}

/// Settings of the synthetic regression trials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionTrials {
    pub trials: usize,
    pub samples: usize,
    pub width: usize,
    pub test_samples: usize,
    pub noise: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub training_loss: f64,
    pub test_loss: f64,
    pub rhs: f64,
    pub precondition_ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialsReport {
    pub outcomes: Vec<TrialOutcome>,
    /// Trials with test loss at most the bound.
    pub passes: usize,
}

/// Output clamp of the fitted networks; with labels in `[-1 - noise, 1 + noise]`
/// the squared loss is at most `(OUTPUT_CLAMP + 1 + noise)^2`.
const OUTPUT_CLAMP: f64 = 2.0;

/// Regression of `sin(πx)` on `[-1, 1]` from noisy samples by a shallow tanh
/// network with random inner weights and least-squares output weights;
/// compares the test loss with the bound at the training loss.
///
/// `𝔏` is taken as `(d R W)^L` with depth `L = 2`, `d = 1`.
pub fn regression_trials(cfg: &RegressionTrials) -> Result<TrialsReport, ResidualError> {
    if cfg.trials == 0 || cfg.samples < 2 || cfg.width == 0 || cfg.test_samples == 0 {
        return Err(ResidualError::Invalid(format!("{cfg:?}")));
    }
    let target = |x: f64| (PI * x).sin();
    let c = (OUTPUT_CLAMP + 1.0 + cfg.noise).powi(2);
    let outcomes: Vec<TrialOutcome> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let mut r = rng::stream("regression", cfg.seed, &[trial as i64]);
            let w: Vec<f64> = (0..cfg.width).map(|_| r.random_range(-3.0..3.0)).collect();
            let b: Vec<f64> = (0..cfg.width).map(|_| r.random_range(-3.0..3.0)).collect();
            let mut draw = |count: usize| -> Vec<(f64, f64)> {
                (0..count)
                    .map(|_| {
                        let x: f64 = r.random_range(-1.0..1.0);
                        let e: f64 = r.random_range(-1.0..1.0);
                        (x, target(x) + cfg.noise * e)
                    })
                    .collect()
            };
            let train = draw(cfg.samples);
            let test = draw(cfg.test_samples);
            let feat = |x: f64, j: usize| if j < cfg.width { (w[j] * x + b[j]).tanh() } else { 1.0 };
            let a = DMatrix::from_fn(train.len(), cfg.width + 1, |i, j| feat(train[i].0, j));
            let y = DVector::from_iterator(train.len(), train.iter().map(|p| p.1));
            let v = lstsq(a, &y, 1e-8);
            let predict = |x: f64| (0..=cfg.width).map(|j| v[j] * feat(x, j)).sum::<f64>().clamp(-OUTPUT_CLAMP, OUTPUT_CLAMP);
            let loss = |set: &[(f64, f64)]| set.iter().map(|(x, y)| (predict(*x) - y).powi(2)).sum::<f64>() / set.len() as f64;
            let training_loss = loss(&train);
            let test_loss = loss(&test);
            let radius = w.iter().chain(&b).chain(v.iter()).fold(1.0f64, |m, p| m.max(p.abs()));
            let lipschitz = (radius * cfg.width as f64).powi(2);
            let bound = generalization_bound(&GenBoundInput {
                params: (3 * cfg.width + 1) as f64,
                weight_bound: radius,
                lipschitz,
                loss_bound: c,
                samples: cfg.samples as f64,
                training_error: training_loss.sqrt(),
            })?;
            Ok(TrialOutcome { training_loss, test_loss, rhs: bound.rhs, precondition_ok: bound.precondition_ok })
        })
        .collect::<Result<_, ResidualError>>()?;
    let passes = outcomes.iter().filter(|o| o.test_loss <= o.rhs).count();
    Ok(TrialsReport { outcomes, passes })
}
