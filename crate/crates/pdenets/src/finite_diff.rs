//! Finite-difference stencils from moment conditions, solved exactly in
//! rational arithmetic, with domain-aware placement.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest supported `ℓ + r`.
pub const MAX_STENCIL_ORDER: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FdError {
    #[error("derivative order {order} plus accuracy {accuracy} exceeds {MAX_STENCIL_ORDER}")]
    TooHigh { order: usize, accuracy: usize },
    #[error("accuracy order must be at least 1")]
    ZeroAccuracy,
    #[error("singular moment system")]
    Singular,
    #[error("offset {offset:?} leaves the domain at {point:?}")]
    Placement { offset: Vec<i64>, point: Vec<f64> },
    #[error("no admissible stencil at {point:?} along axis {axis}")]
    NoVariant { point: Vec<f64>, axis: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bias {
    Forward,
    Backward,
    Central,
}

/// One-dimensional stencil for the `order`-th derivative.
#[derive(Clone, Debug, PartialEq)]
pub struct Stencil1d {
    pub order: usize,
    /// Requested accuracy.
    pub accuracy: usize,
    /// Accuracy actually attained (central stencils may exceed the request).
    pub attained: usize,
    pub bias: Bias,
    pub offsets: Vec<i64>,
    pub coeffs: Vec<BigRational>,
}

/// Tensor-product stencil realizing `h^{-ℓ} Σ c_j f(x + h b_j) ≈ D^α f(x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FdStencil {
    pub alpha: Vec<usize>,
    pub accuracy: usize,
    pub biases: Vec<Bias>,
    pub offsets: Vec<Vec<i64>>,
    pub coeffs: Vec<BigRational>,
    pub coeffs_f64: Vec<f64>,
}

fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

fn factorial(n: usize) -> BigInt {
    (1..=n as u64).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

/// Solves `Σ_j c_j b_j^m = ℓ! δ_{mℓ}` for `m = 0..offsets.len()`.
fn moment_solve(offsets: &[i64], order: usize) -> Result<Vec<BigRational>, FdError> {
    let n = offsets.len();
    let mut a: Vec<Vec<BigRational>> = (0..n)
        .map(|m| {
            let mut row: Vec<BigRational> = offsets.iter().map(|&b| rat(b).pow(m as i32)).collect();
            row.push(if m == order { BigRational::from_integer(factorial(order)) } else { BigRational::zero() });
            row
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).find(|&r| !a[r][col].is_zero()).ok_or(FdError::Singular)?;
        a.swap(col, piv);
        let p = a[col][col].clone();
        for v in a[col].iter_mut() {
            *v = &*v / &p;
        }
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for c in col..=n {
                    let t = &a[col][c] * &f;
                    a[r][c] = &a[r][c] - t;
                }
            }
        }
    }
    Ok(a.into_iter().map(|row| row[n].clone()).collect())
}

fn offsets_for(order: usize, accuracy: usize, bias: Bias) -> (Vec<i64>, usize) {
    match bias {
        Bias::Forward => ((0..(order + accuracy) as i64).collect(), accuracy),
        Bias::Backward => ((0..(order + accuracy) as i64).map(|b| -b).rev().collect(), accuracy),
        Bias::Central => {
            // Symmetric stencils on 2p+1 points have even accuracy.
            let attained = |p: usize| 2 * p + 1 - order + usize::from(order % 2 == 0);
            let mut p = 1;
            while 2 * p + 1 < order + 1 || attained(p) < accuracy {
                p += 1;
            }
            ((-(p as i64)..=p as i64).collect(), attained(p))
        }
    }
}

/// Minimal-width one-dimensional stencil with the given bias.
pub fn make_stencil_1d(order: usize, accuracy: usize, bias: Bias) -> Result<Stencil1d, FdError> {
    if accuracy == 0 {
        return Err(FdError::ZeroAccuracy);
    }
    if order + accuracy > MAX_STENCIL_ORDER {
        return Err(FdError::TooHigh { order, accuracy });
    }
    let (offsets, attained) = offsets_for(order, accuracy, bias);
    let coeffs = moment_solve(&offsets, order)?;
    Ok(Stencil1d { order, accuracy, attained, bias, offsets, coeffs })
}

impl Stencil1d {
    /// Offsets exceed `order + accuracy` points only for central stencils.
    pub fn span(&self) -> (i64, i64) {
        (*self.offsets.first().unwrap(), *self.offsets.last().unwrap())
    }

    /// `Σ_j c_j b_j^m` in exact arithmetic.
    pub fn moment(&self, m: usize) -> BigRational {
        self.offsets.iter().zip(&self.coeffs).fold(BigRational::zero(), |acc, (&b, c)| acc + c * rat(b).pow(m as i32))
    }
}

/// Stencil for `D^α` with accuracy `r`, using the same bias on every
/// differentiated axis.
pub fn make_stencil(alpha: &[usize], accuracy: usize, bias: Bias) -> Result<FdStencil, FdError> {
    make_stencil_biased(alpha, accuracy, &vec![bias; alpha.len()])
}

/// Stencil for `D^α` with a separate bias per axis.
pub fn make_stencil_biased(alpha: &[usize], accuracy: usize, biases: &[Bias]) -> Result<FdStencil, FdError> {
    if biases.len() != alpha.len() {
        return Err(FdError::Dimension { expected: alpha.len(), got: biases.len() });
    }
    let order: usize = alpha.iter().sum();
    if order + accuracy > MAX_STENCIL_ORDER {
        return Err(FdError::TooHigh { order, accuracy });
    }
    let mut offsets = vec![Vec::new()];
    let mut coeffs = vec![BigRational::one()];
    for (&a, &b) in alpha.iter().zip(biases) {
        let (offs, cs) = if a == 0 {
            (vec![0], vec![BigRational::one()])
        } else {
            let s = make_stencil_1d(a, accuracy, b)?;
            (s.offsets, s.coeffs)
        };
        let mut next_o = Vec::new();
        let mut next_c = Vec::new();
        for (o, c) in offsets.iter().zip(&coeffs) {
            for (&b1, c1) in offs.iter().zip(&cs) {
                if c1.is_zero() {
                    continue;
                }
                let mut v = o.clone();
                v.push(b1);
                next_o.push(v);
                next_c.push(c * c1);
            }
        }
        offsets = next_o;
        coeffs = next_c;
    }
    let coeffs_f64 = coeffs.iter().map(|c| c.to_f64().unwrap()).collect();
    Ok(FdStencil { alpha: alpha.to_vec(), accuracy, biases: biases.to_vec(), offsets, coeffs, coeffs_f64 })
}

/// Axis-aligned box `[lo_i, hi_i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl DomainBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len());
        Self { lo, hi }
    }

    pub fn interval(a: f64, b: f64) -> Self {
        Self { lo: vec![a], hi: vec![b] }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| *l <= *v && *v <= *h)
    }
}

/// Pieces `(region, bias per axis)` covering a box, with the margin each
/// piece keeps from the boundary in its stencil direction.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainPartition {
    pub domain: DomainBox,
    pub pieces: Vec<(DomainBox, Vec<Bias>)>,
}

impl DomainPartition {
    /// Forward stencils on the lower half of each axis, backward on the upper half.
    pub fn halves(domain: DomainBox) -> Self {
        let d = domain.lo.len();
        let mut pieces = Vec::new();
        for mask in 0..(1usize << d) {
            let mut lo = Vec::with_capacity(d);
            let mut hi = Vec::with_capacity(d);
            let mut biases = Vec::with_capacity(d);
            for i in 0..d {
                let mid = 0.5 * (domain.lo[i] + domain.hi[i]);
                if mask >> i & 1 == 0 {
                    lo.push(domain.lo[i]);
                    hi.push(mid);
                    biases.push(Bias::Forward);
                } else {
                    lo.push(mid);
                    hi.push(domain.hi[i]);
                    biases.push(Bias::Backward);
                }
            }
            pieces.push((DomainBox::new(lo, hi), biases));
        }
        Self { domain, pieces }
    }

    /// Largest step for which every piece's stencils of order `ℓ + r` stay inside the domain.
    pub fn max_step(&self, order: usize, accuracy: usize) -> f64 {
        let width = (order + accuracy - 1) as f64;
        self.domain.lo.iter().zip(&self.domain.hi).map(|(l, h)| 0.5 * (h - l) / width).fold(f64::INFINITY, f64::min)
    }

    pub fn biases_at(&self, x: &[f64]) -> Option<&[Bias]> {
        self.pieces.iter().find(|(b, _)| b.contains(x)).map(|(_, v)| v.as_slice())
    }
}

impl FdStencil {
    pub fn order(&self) -> usize {
        self.alpha.iter().sum()
    }

    /// `h^{-ℓ} Σ c_j f(x + h b_j)`, rejecting offsets outside `domain`.
    pub fn apply(
        &self,
        f: &dyn Fn(&[f64]) -> f64,
        x: &[f64],
        h: f64,
        domain: Option<&DomainBox>,
    ) -> Result<f64, FdError> {
        if x.len() != self.alpha.len() {
            return Err(FdError::Dimension { expected: self.alpha.len(), got: x.len() });
        }
        let mut acc = 0.0;
        let mut y = vec![0.0; x.len()];
        for (off, c) in self.offsets.iter().zip(&self.coeffs_f64) {
            for i in 0..x.len() {
                y[i] = x[i] + h * off[i] as f64;
            }
            if let Some(dom) = domain {
                if !dom.contains(&y) {
                    return Err(FdError::Placement { offset: off.clone(), point: x.to_vec() });
                }
            }
            acc += c * f(&y);
        }
        Ok(acc / h.powi(self.order() as i32))
    }

    /// Exact moment `Σ_j c_j Π_i b_{j,i}^{m_i}`.
    pub fn moment(&self, m: &[usize]) -> BigRational {
        self.offsets.iter().zip(&self.coeffs).fold(BigRational::zero(), |acc, (b, c)| {
            let mono = b.iter().zip(m).fold(BigRational::one(), |p, (&bi, &mi)| p * rat(bi).pow(mi as i32));
            acc + c * mono
        })
    }

    /// Rows `offset_0, ..., coefficient, coefficient_f64`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.alpha.len() {
            out.push_str(&format!("offset_{i},"));
        }
        out.push_str("coefficient,coefficient_f64\n");
        for (b, (c, cf)) in self.offsets.iter().zip(self.coeffs.iter().zip(&self.coeffs_f64)) {
            for v in b {
                out.push_str(&format!("{v},"));
            }
            out.push_str(&format!("{c},{cf:e}\n"));
        }
        out
    }
}

/// Chooses per axis the first admissible bias among central, forward,
/// backward, so that every offset stays inside `domain`.
pub fn select_biases(domain: &DomainBox, alpha: &[usize], accuracy: usize, x: &[f64], h: f64) -> Result<Vec<Bias>, FdError> {
    alpha
        .iter()
        .enumerate()
        .map(|(axis, &a)| {
            if a == 0 {
                return Ok(Bias::Central);
            }
            for bias in [Bias::Central, Bias::Forward, Bias::Backward] {
                let (offs, _) = offsets_for(a, accuracy, bias);
                let lo = x[axis] + h * *offs.first().unwrap() as f64;
                let hi = x[axis] + h * *offs.last().unwrap() as f64;
                if domain.lo[axis] <= lo && hi <= domain.hi[axis] {
                    return Ok(bias);
                }
            }
            Err(FdError::NoVariant { point: x.to_vec(), axis })
        })
        .collect()
}

/// Applies the stencil family `(α, r)` at `x`, choosing the placement with [`select_biases`].
pub fn piecewise_apply(
    domain: &DomainBox,
    alpha: &[usize],
    accuracy: usize,
    f: &dyn Fn(&[f64]) -> f64,
    x: &[f64],
    h: f64,
) -> Result<(f64, Vec<Bias>), FdError> {
    let biases = select_biases(domain, alpha, accuracy, x, h)?;
    let st = make_stencil_biased(alpha, accuracy, &biases)?;
    Ok((st.apply(f, x, h, Some(domain))?, biases))
}
