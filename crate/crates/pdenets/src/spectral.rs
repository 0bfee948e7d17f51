//! Uniform torus grids, trigonometric interpolation in the real Fourier basis,
//! pseudo-spectral projection and Sobolev norms.
//!
//! All norms use the normalized measure `dx/(2π)^d`, under which the real
//! basis `e_κ` is orthonormal.

use std::collections::BTreeMap;
use std::f64::consts::{PI, SQRT_2};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::emulators::{fourier_basis, kappa_sign};
use crate::finite_diff::{make_stencil, Bias};

/// Label attached to every reported torus norm.
pub const MEASURE: &str = "normalized dx/(2pi)^d";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("expected {expected} samples, got {got}")]
    Size { expected: usize, got: usize },
    #[error("wavenumber {0:?} outside the coefficient box")]
    Wavenumber(Vec<i64>),
    #[error("malformed polynomial: {0}")]
    Malformed(String),
}

/// Nodes `x_j = 2πj/(2N+1)`, `j ∈ {0..2N}^d`, last axis fastest.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TorusGrid {
    pub d: usize,
    pub n: usize,
}

impl TorusGrid {
    pub fn new(d: usize, n: usize) -> Self {
        Self { d, n }
    }

    pub fn side(&self) -> usize {
        2 * self.n + 1
    }

    pub fn len(&self) -> usize {
        self.side().pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn node(&self, mut flat: usize) -> Vec<f64> {
        let side = self.side();
        let mut x = vec![0.0; self.d];
        for slot in x.iter_mut().rev() {
            *slot = 2.0 * PI * (flat % side) as f64 / side as f64;
            flat /= side;
        }
        x
    }

    pub fn nodes(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|j| self.node(j)).collect()
    }
}

/// Samples `(f(x_j))_j` on the grid.
pub fn encode(f: &(dyn Fn(&[f64]) -> f64 + Sync), grid: &TorusGrid) -> Vec<f64> {
    (0..grid.len()).into_par_iter().map(|j| f(&grid.node(j))).collect()
}

/// Real trigonometric polynomial `Σ_{κ ∈ K_N} c_κ e_κ`, `K_N = {-N..N}^d`,
/// coefficients stored with the last axis fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct TrigPoly {
    d: usize,
    n: usize,
    coeffs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct TrigPolyWire {
    d: usize,
    #[serde(rename = "N")]
    n: usize,
    coeffs: BTreeMap<String, f64>,
}

impl TrigPoly {
    pub fn zeros(d: usize, n: usize) -> Self {
        Self { d, n, coeffs: vec![0.0; (2 * n + 1).pow(d as u32)] }
    }

    pub fn from_coeffs(d: usize, n: usize, coeffs: Vec<f64>) -> Result<Self, SpectralError> {
        let expected = (2 * n + 1).pow(d as u32);
        if coeffs.len() != expected {
            return Err(SpectralError::Size { expected, got: coeffs.len() });
        }
        Ok(Self { d, n, coeffs })
    }

    /// Builds `Σ c_κ e_κ` from a coefficient function.
    pub fn from_fn(d: usize, n: usize, mut f: impl FnMut(&[i64]) -> f64) -> Self {
        let mut p = Self::zeros(d, n);
        for i in 0..p.coeffs.len() {
            p.coeffs[i] = f(&p.kappa(i));
        }
        p
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn degree(&self) -> usize {
        self.n
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn kappa(&self, mut flat: usize) -> Vec<i64> {
        let side = 2 * self.n + 1;
        let mut k = vec![0i64; self.d];
        for slot in k.iter_mut().rev() {
            *slot = (flat % side) as i64 - self.n as i64;
            flat /= side;
        }
        k
    }

    pub fn index_of(&self, kappa: &[i64]) -> Option<usize> {
        let side = 2 * self.n as i64 + 1;
        if kappa.len() != self.d || kappa.iter().any(|k| k.unsigned_abs() as usize > self.n) {
            return None;
        }
        Some(kappa.iter().fold(0i64, |acc, &k| acc * side + k + self.n as i64) as usize)
    }

    pub fn coeff(&self, kappa: &[i64]) -> f64 {
        self.index_of(kappa).map_or(0.0, |i| self.coeffs[i])
    }

    pub fn set(&mut self, kappa: &[i64], v: f64) -> Result<(), SpectralError> {
        let i = self.index_of(kappa).ok_or_else(|| SpectralError::Wavenumber(kappa.to_vec()))?;
        self.coeffs[i] = v;
        Ok(())
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(i, c)| c * fourier_basis(&self.kappa(i), x))
            .sum()
    }

    /// Values at the grid nodes of `grid`.
    pub fn decode(&self, grid: &TorusGrid) -> Vec<f64> {
        (0..grid.len()).into_par_iter().map(|j| self.evaluate(&grid.node(j))).collect()
    }

    /// `∂/∂x_axis`, using `∂_i e_κ = κ_i e_{-κ}`.
    pub fn derivative(&self, axis: usize) -> Self {
        let mut out = Self::zeros(self.d, self.n);
        for (i, &c) in self.coeffs.iter().enumerate() {
            let k = self.kappa(i);
            if c == 0.0 || kappa_sign(&k) == 0 {
                continue;
            }
            let neg: Vec<i64> = k.iter().map(|v| -v).collect();
            let j = out.index_of(&neg).unwrap();
            out.coeffs[j] = k[axis] as f64 * c;
        }
        out
    }

    /// Multiplies each coefficient by `m(κ)`.
    pub fn apply_multiplier(&self, m: impl Fn(&[i64]) -> f64) -> Self {
        let mut out = self.clone();
        for i in 0..out.coeffs.len() {
            out.coeffs[i] *= m(&self.kappa(i));
        }
        out
    }

    pub fn laplacian(&self) -> Self {
        self.apply_multiplier(|k| -(k.iter().map(|v| v * v).sum::<i64>() as f64))
    }

    /// Coefficients embedded into (or truncated to) degree `n`.
    pub fn resize(&self, n: usize) -> Self {
        let mut out = Self::zeros(self.d, n);
        for (i, &c) in self.coeffs.iter().enumerate() {
            if let Some(j) = out.index_of(&self.kappa(i)) {
                out.coeffs[j] = c;
            }
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let n = self.n.max(other.n);
        let mut a = self.resize(n);
        let b = other.resize(n);
        for (x, y) in a.coeffs.iter_mut().zip(&b.coeffs) {
            *x -= y;
        }
        a
    }

    /// `L^2` norm by Parseval.
    pub fn l2_norm(&self) -> f64 {
        self.sobolev_norm(0)
    }

    /// `H^k` norm `(Σ_κ c_κ^2 Σ_{m<=k} |κ|^{2m})^{1/2}`.
    pub fn sobolev_norm(&self, k: usize) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let k2 = self.kappa(i).iter().map(|v| (v * v) as f64).sum::<f64>();
                let w: f64 = (0..=k).map(|m| k2.powi(m as i32)).sum();
                c * c * w
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Largest absolute coefficient outside `K_n`.
    pub fn max_outside(&self, n: usize) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(i, _)| self.kappa(*i).iter().any(|k| k.unsigned_abs() as usize > n))
            .map(|(_, c)| c.abs())
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> String {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let key = self.kappa(i).iter().map(|k| k.to_string()).collect::<Vec<_>>().join(",");
                (key, c)
            })
            .collect();
        serde_json::to_string(&TrigPolyWire { d: self.d, n: self.n, coeffs }).expect("serializable")
    }

    pub fn from_json(s: &str) -> Result<Self, SpectralError> {
        let wire: TrigPolyWire = serde_json::from_str(s).map_err(|e| SpectralError::Malformed(e.to_string()))?;
        let mut p = Self::zeros(wire.d, wire.n);
        for (key, v) in wire.coeffs {
            let k: Vec<i64> = key
                .split(',')
                .map(|t| t.trim().parse::<i64>())
                .collect::<Result<_, _>>()
                .map_err(|e| SpectralError::Malformed(e.to_string()))?;
            p.set(&k, v)?;
        }
        Ok(p)
    }
}

/// Real interpolation coefficients `c_κ = |J_N|^{-1} Σ_j y_j e_κ(x_j)`.
pub fn interpolate(samples: &[f64], grid: &TorusGrid) -> Result<TrigPoly, SpectralError> {
    if samples.len() != grid.len() {
        return Err(SpectralError::Size { expected: grid.len(), got: samples.len() });
    }
    let side = grid.side();
    // Per-axis tables of cos(κ x_j) and sin(κ x_j).
    let (cos_t, sin_t): (Vec<f64>, Vec<f64>) = (0..side * side)
        .map(|idx| {
            let k = (idx / side) as i64 - grid.n as i64;
            let j = idx % side;
            let a = 2.0 * PI * (k * j as i64).rem_euclid(side as i64) as f64 / side as f64;
            (a.cos(), a.sin())
        })
        .unzip();
    let template = TrigPoly::zeros(grid.d, grid.n);
    let inv = 1.0 / grid.len() as f64;
    let coeffs: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let k = template.kappa(i);
            let sigma = kappa_sign(&k);
            let mut re = 0.0;
            let mut im = 0.0;
            for (flat, y) in samples.iter().enumerate() {
                // e^{i⟨κ, x_j⟩} as a product over axes.
                let mut r = 1.0;
                let mut s = 0.0;
                let mut rest = flat;
                for axis in (0..grid.d).rev() {
                    let j = rest % side;
                    rest /= side;
                    let t = (k[axis] + grid.n as i64) as usize * side + j;
                    let (c, sn) = (cos_t[t], sin_t[t]);
                    let nr = r * c - s * sn;
                    s = r * sn + s * c;
                    r = nr;
                }
                re += y * r;
                im += y * s;
            }
            match sigma {
                0 => re * inv,
                1 => SQRT_2 * re * inv,
                _ => SQRT_2 * im * inv,
            }
        })
        .collect();
    TrigPoly::from_coeffs(grid.d, grid.n, coeffs)
}

/// `Q_N ∘ E_N`.
pub fn project(f: &(dyn Fn(&[f64]) -> f64 + Sync), d: usize, n: usize) -> TrigPoly {
    let grid = TorusGrid::new(d, n);
    interpolate(&encode(f, &grid), &grid).expect("grid-sized samples")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionReport {
    pub n: usize,
    pub k: usize,
    pub l2_error: f64,
    pub hk_error: f64,
    /// Degree of the fine interpolant used as reference.
    pub reference_degree: usize,
    pub measure: String,
}

/// Pseudo-spectral projection of `f` with its `L^2` and `H^k` errors,
/// measured against an interpolant on a four times finer grid.
pub fn pseudospectral_project(f: &(dyn Fn(&[f64]) -> f64 + Sync), d: usize, n: usize, k: usize) -> (TrigPoly, ProjectionReport) {
    let p = project(f, d, n);
    let nf = 4 * n + 2;
    let fine = project(f, d, nf);
    let diff = fine.sub(&p);
    let report = ProjectionReport {
        n,
        k,
        l2_error: diff.l2_norm(),
        hk_error: diff.sobolev_norm(k),
        reference_degree: nf,
        measure: MEASURE.to_string(),
    };
    (p, report)
}

/// `H^k` norm (`k <= 2`) of a periodic callable by trapezoid quadrature on
/// `points` nodes per axis, with derivatives from fourth-order central differences.
pub fn sobolev_norm_fn(f: &(dyn Fn(&[f64]) -> f64 + Sync), d: usize, k: usize, points: usize) -> f64 {
    assert!(k <= 2, "callable Sobolev norms support k <= 2");
    let h = 1e-3;
    let mut stencils = Vec::new();
    // Multi-indices of order 1..=k.
    for order in 1..=k {
        for flat in 0..(order + 1).pow(d as u32) {
            let mut a = vec![0usize; d];
            let mut r = flat;
            for slot in a.iter_mut() {
                *slot = r % (order + 1);
                r /= order + 1;
            }
            if a.iter().sum::<usize>() == order {
                let mult = multinomial(&a);
                stencils.push((make_stencil(&a, 4, Bias::Central).expect("low order"), mult));
            }
        }
    }
    let total = points.pow(d as u32);
    let sum: f64 = (0..total)
        .into_par_iter()
        .map(|mut idx| {
            let mut x = vec![0.0; d];
            for slot in x.iter_mut().rev() {
                *slot = 2.0 * PI * (idx % points) as f64 / points as f64;
                idx /= points;
            }
            let v = f(&x);
            let mut acc = v * v;
            for (s, mult) in &stencils {
                let dv = s.apply(&|y| f(y), &x, h, None).unwrap();
                acc += mult * dv * dv;
            }
            acc
        })
        .sum();
    (sum / total as f64).sqrt()
}

/// `|α|! / α!`, the multiplicity of `D^α` in `|∇^m f|^2`.
fn multinomial(a: &[usize]) -> f64 {
    let fact = |n: usize| (1..=n).map(|v| v as f64).product::<f64>();
    fact(a.iter().sum()) / a.iter().map(|&v| fact(v)).product::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cos_samples_on_three_nodes() {
        let y = encode(&|x: &[f64]| x[0].cos(), &TorusGrid::new(1, 1));
        assert!((y[0] - 1.0).abs() < 1e-15);
        assert!((y[1] + 0.5).abs() < 1e-15 && (y[2] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn constant_samples_give_mean_mode() {
        let grid = TorusGrid::new(2, 2);
        let p = interpolate(&vec![3.0; grid.len()], &grid).unwrap();
        assert!((p.coeff(&[0, 0]) - 3.0).abs() < 1e-14);
        assert!(p.max_outside(0) < 1e-14);
    }

    #[test]
    fn derivative_of_cos_is_minus_sin() {
        let p = project(&|x: &[f64]| x[0].cos(), 1, 3);
        let dp = p.derivative(0);
        for x in [0.3, 1.7, 4.0] {
            assert!((dp.evaluate(&[x]) + x.sin()).abs() < 1e-13);
        }
    }

    #[test]
    fn json_round_trip() {
        let p = project(&|x: &[f64]| (x[0] + 2.0 * x[1]).sin(), 2, 2);
        assert_eq!(TrigPoly::from_json(&p.to_json()).unwrap(), p);
    }
}
