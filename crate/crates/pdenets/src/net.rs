//! Explicitly weighted feedforward tanh networks.
//!
//! A network is a chain of affine maps `A_1, ..., A_L` with `tanh` applied
//! between consecutive maps. Weights are stored row-sparse so that the
//! block-structured networks produced by [`TanhNetwork::parallel`] and friends
//! stay cheap to evaluate. Derivatives are obtained by pushing truncated
//! Taylor jets through the layers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::emulators;

/// Highest directional derivative order supported by jet propagation.
pub const MAX_JET_ORDER: usize = 4;

/// Serialization schema version written into every network file.
pub const NET_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("jet order {0} exceeds supported order {MAX_JET_ORDER}")]
    UnsupportedOrder(usize),
    #[error("incompatible networks: {0}")]
    Incompatible(String),
    #[error("identity padding cannot reach tolerance {tol:e} on |y| <= {bound}: achieved {achieved:e}")]
    Padding { bound: f64, tol: f64, achieved: f64 },
    #[error("malformed network: {0}")]
    Malformed(String),
}

/// One affine map `x -> W x + b` with `W` stored in compressed sparse rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    vals: Vec<f64>,
    bias: Vec<f64>,
}

impl Layer {
    /// Builds a layer from a dense row-major matrix. Entries whose bit pattern
    /// is `+0.0` are not stored; everything else (including `-0.0`) is kept so
    /// that dense round trips are bit-exact.
    pub fn from_dense(w: &[Vec<f64>], bias: Vec<f64>, cols: usize) -> Result<Self, NetError> {
        if w.len() != bias.len() {
            return Err(NetError::Malformed(format!(
                "weight has {} rows but bias has {} entries",
                w.len(),
                bias.len()
            )));
        }
        let mut row_ptr = Vec::with_capacity(w.len() + 1);
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in w {
            if row.len() != cols {
                return Err(NetError::Malformed(format!(
                    "row of length {} in a layer with {} columns",
                    row.len(),
                    cols
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                if v.to_bits() != 0 {
                    col_idx.push(j as u32);
                    vals.push(v);
                }
            }
            row_ptr.push(vals.len());
        }
        Ok(Self { cols, row_ptr, col_idx, vals, bias })
    }

    /// Builds a layer from per-row `(column, value)` lists.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>, bias: Vec<f64>, cols: usize) -> Self {
        assert_eq!(rows.len(), bias.len());
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                assert!(c < cols, "column {c} out of range {cols}");
                if last == Some(c) {
                    *vals.last_mut().unwrap() += v;
                    continue;
                }
                col_idx.push(c as u32);
                vals.push(v);
                last = Some(c);
            }
            row_ptr.push(vals.len());
        }
        Self { cols, row_ptr, col_idx, vals, bias }
    }

    pub fn rows(&self) -> usize {
        self.bias.len()
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    /// Nonzero `(column, value)` entries of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().map(|&c| c as usize).zip(self.vals[r].iter().copied())
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.rows())
            .map(|i| {
                let mut row = vec![0.0; self.cols];
                for (c, v) in self.row(i) {
                    row[c] = v;
                }
                row
            })
            .collect()
    }

    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for i in 0..self.rows() {
            let mut acc = self.bias[i];
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.col_idx[k] as usize];
            }
            out.push(acc);
        }
    }

    fn apply_jet(&self, x: &[[f64; MAX_JET_ORDER + 1]], order: usize, out: &mut Vec<[f64; MAX_JET_ORDER + 1]>) {
        out.clear();
        for i in 0..self.rows() {
            let mut acc = [0.0; MAX_JET_ORDER + 1];
            acc[0] = self.bias[i];
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let w = self.vals[k];
                let xi = &x[self.col_idx[k] as usize];
                for j in 0..=order {
                    acc[j] += w * xi[j];
                }
            }
            out.push(acc);
        }
    }

    fn scaled(&self, s: f64) -> Self {
        let mut l = self.clone();
        l.vals.iter_mut().for_each(|v| *v *= s);
        l.bias.iter_mut().for_each(|v| *v *= s);
        l
    }

    /// `self ∘ inner` for two affine maps.
    fn after(&self, inner: &Layer) -> Layer {
        let mut rows = Vec::with_capacity(self.rows());
        let mut bias = Vec::with_capacity(self.rows());
        let mut acc = vec![0.0; inner.cols];
        let mut touched = vec![false; inner.cols];
        let mut list = Vec::new();
        for i in 0..self.rows() {
            let mut b = self.bias[i];
            for (c, w) in self.row(i) {
                b += w * inner.bias[c];
                for (cc, v) in inner.row(c) {
                    if !touched[cc] {
                        touched[cc] = true;
                        list.push(cc);
                    }
                    acc[cc] += w * v;
                }
            }
            list.sort_unstable();
            let row: Vec<(usize, f64)> = list.iter().map(|&cc| (cc, acc[cc])).collect();
            for &cc in &list {
                acc[cc] = 0.0;
                touched[cc] = false;
            }
            list.clear();
            rows.push(row);
            bias.push(b);
        }
        Layer::from_rows(rows, bias, inner.cols)
    }
}

/// Feedforward tanh network `A_L ∘ tanh ∘ ... ∘ tanh ∘ A_1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "NetWire", try_from = "NetWire")]
pub struct TanhNetwork {
    layers: Vec<Layer>,
}

/// Truncated directional Taylor data of a scalar network output.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    pub base_point: Vec<f64>,
    pub direction: Vec<f64>,
    pub order: usize,
    /// `coeffs[j]` is the `j`-th derivative of `t -> net(x + t dir)` at `t = 0`.
    pub coeffs: Vec<f64>,
}

/// How [`combine`] merges a list of networks.
#[derive(Clone, Debug, PartialEq)]
pub enum CombineMode {
    /// Same input, outputs stacked.
    ParallelConcat,
    /// Same input and output dimension, outputs summed with weights.
    WeightedSum(Vec<f64>),
    /// Single network evaluated at `a x + b`.
    AffinePrecompose { a: Vec<Vec<f64>>, b: Vec<f64> },
}

/// Bound and tolerance for the identity-emulation layers used to equalize depths.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PadPolicy {
    pub bound: f64,
    pub tol: f64,
}

impl Default for PadPolicy {
    fn default() -> Self {
        Self { bound: 100.0, tol: 1e-9 }
    }
}

/// Merges networks according to `mode`, padding shallower networks with the
/// default [`PadPolicy`].
pub fn combine(nets: &[TanhNetwork], mode: CombineMode) -> Result<TanhNetwork, NetError> {
    combine_with(nets, mode, PadPolicy::default())
}

pub fn combine_with(nets: &[TanhNetwork], mode: CombineMode, pad: PadPolicy) -> Result<TanhNetwork, NetError> {
    match mode {
        CombineMode::ParallelConcat => TanhNetwork::parallel(nets, pad),
        CombineMode::WeightedSum(w) => TanhNetwork::weighted_sum(nets, &w, pad),
        CombineMode::AffinePrecompose { a, b } => {
            if nets.len() != 1 {
                return Err(NetError::Incompatible(format!(
                    "affine precomposition takes one network, got {}",
                    nets.len()
                )));
            }
            nets[0].precompose_affine(&a, &b)
        }
    }
}

impl TanhNetwork {
    pub fn new(layers: Vec<Layer>) -> Result<Self, NetError> {
        if layers.is_empty() {
            return Err(NetError::Malformed("network without layers".into()));
        }
        for w in layers.windows(2) {
            if w[1].cols() != w[0].rows() {
                return Err(NetError::Malformed(format!(
                    "layer with {} inputs follows a layer with {} outputs",
                    w[1].cols(),
                    w[0].rows()
                )));
            }
        }
        Ok(Self { layers })
    }

    /// Single affine map `x -> w x + b`.
    pub fn affine(w: &[Vec<f64>], b: Vec<f64>, input_dim: usize) -> Result<Self, NetError> {
        Self::new(vec![Layer::from_dense(w, b, input_dim)?])
    }

    /// Constant map with the given output values.
    pub fn constant(input_dim: usize, values: &[f64]) -> Self {
        let rows = vec![Vec::new(); values.len()];
        Self { layers: vec![Layer::from_rows(rows, values.to_vec(), input_dim)] }
    }

    /// Projection `x -> (x_{idx[0]}, x_{idx[1]}, ...)`.
    pub fn projection(input_dim: usize, idx: &[usize]) -> Self {
        let rows = idx.iter().map(|&i| vec![(i, 1.0)]).collect();
        Self { layers: vec![Layer::from_rows(rows, vec![0.0; idx.len()], input_dim)] }
    }

    /// Affine network `x -> a·x + b` with scalar output.
    pub fn linear_form(a: &[f64], b: f64) -> Self {
        let row = a.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, v)| (i, *v)).collect();
        Self { layers: vec![Layer::from_rows(vec![row], vec![b], a.len())] }
    }

    /// Network with one hidden tanh layer: `x -> W2 tanh(W1 x + b1) + b2`.
    pub fn shallow(
        input_dim: usize,
        hidden: Vec<Vec<(usize, f64)>>,
        hidden_bias: Vec<f64>,
        out: Vec<Vec<(usize, f64)>>,
        out_bias: Vec<f64>,
    ) -> Self {
        let width = hidden_bias.len();
        Self {
            layers: vec![
                Layer::from_rows(hidden, hidden_bias, input_dim),
                Layer::from_rows(out, out_bias, width),
            ],
        }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].cols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().rows()
    }

    /// Number of affine maps.
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Largest layer output dimension.
    pub fn width(&self) -> usize {
        self.layers.iter().map(Layer::rows).max().unwrap_or(0)
    }

    /// Number of stored nonzero weights plus biases.
    pub fn size(&self) -> usize {
        self.layers.iter().map(|l| l.nnz() + l.rows()).sum()
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>, NetError> {
        self.check_input(x)?;
        Ok(self.eval_unchecked(x))
    }

    /// Evaluates a scalar-output network.
    pub fn eval1(&self, x: &[f64]) -> Result<f64, NetError> {
        if self.output_dim() != 1 {
            return Err(NetError::DimensionMismatch { expected: 1, got: self.output_dim() });
        }
        Ok(self.evaluate(x)?[0])
    }

    /// Evaluates many points in parallel; output order follows input order.
    pub fn evaluate_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, NetError> {
        for x in xs {
            self.check_input(x)?;
        }
        Ok(xs.par_iter().map(|x| self.eval_unchecked(x)).collect())
    }

    fn check_input(&self, x: &[f64]) -> Result<(), NetError> {
        if x.len() != self.input_dim() {
            return Err(NetError::DimensionMismatch { expected: self.input_dim(), got: x.len() });
        }
        Ok(())
    }

    fn eval_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            layer.apply(&cur, &mut next);
            if l < last {
                next.iter_mut().for_each(|v| *v = v.tanh());
            }
            std::mem::swap(&mut cur, &mut next);
        }
        cur
    }

    /// Directional derivatives of every output along `dir`, up to order `k`.
    /// Row `o` holds `(f_o, D f_o, ..., D^k f_o)`.
    pub fn directional_jets(&self, x: &[f64], dir: &[f64], k: usize) -> Result<Vec<Vec<f64>>, NetError> {
        self.check_input(x)?;
        self.check_input(dir)?;
        if k > MAX_JET_ORDER {
            return Err(NetError::UnsupportedOrder(k));
        }
        let mut cur: Vec<[f64; MAX_JET_ORDER + 1]> = x
            .iter()
            .zip(dir)
            .map(|(&xi, &di)| {
                let mut c = [0.0; MAX_JET_ORDER + 1];
                c[0] = xi;
                if k >= 1 {
                    c[1] = di;
                }
                c
            })
            .collect();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            layer.apply_jet(&cur, k, &mut next);
            if l < last {
                next.iter_mut().for_each(|z| *z = tanh_series(z, k));
            }
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur
            .iter()
            .map(|c| {
                let mut fact = 1.0;
                (0..=k)
                    .map(|j| {
                        if j > 0 {
                            fact *= j as f64;
                        }
                        c[j] * fact
                    })
                    .collect()
            })
            .collect())
    }

    /// Directional jet of a scalar-output network.
    pub fn directional_jet(&self, x: &[f64], dir: &[f64], k: usize) -> Result<Jet, NetError> {
        if self.output_dim() != 1 {
            return Err(NetError::DimensionMismatch { expected: 1, got: self.output_dim() });
        }
        let coeffs = self.directional_jets(x, dir, k)?.swap_remove(0);
        Ok(Jet { base_point: x.to_vec(), direction: dir.to_vec(), order: k, coeffs })
    }

    /// Laplacian of a scalar-output network over all input coordinates.
    pub fn laplacian(&self, x: &[f64]) -> Result<f64, NetError> {
        self.laplacian_over(x, 0..self.input_dim())
    }

    /// Sum of second derivatives along the listed coordinate axes.
    pub fn laplacian_over(&self, x: &[f64], axes: impl IntoIterator<Item = usize>) -> Result<f64, NetError> {
        let mut dir = vec![0.0; self.input_dim()];
        let mut sum = 0.0;
        for a in axes {
            dir[a] = 1.0;
            sum += self.directional_jet(x, &dir, 2)?.coeffs[2];
            dir[a] = 0.0;
        }
        Ok(sum)
    }

    /// `outer ∘ inner`; the last affine map of `inner` is merged into the first of `outer`.
    pub fn compose(outer: &TanhNetwork, inner: &TanhNetwork) -> Result<TanhNetwork, NetError> {
        if outer.input_dim() != inner.output_dim() {
            return Err(NetError::Incompatible(format!(
                "outer expects {} inputs, inner produces {}",
                outer.input_dim(),
                inner.output_dim()
            )));
        }
        let mut layers: Vec<Layer> = inner.layers[..inner.layers.len() - 1].to_vec();
        layers.push(outer.layers[0].after(inner.layers.last().unwrap()));
        layers.extend_from_slice(&outer.layers[1..]);
        TanhNetwork::new(layers)
    }

    /// `x -> net(a x + b)` where `a` has `input_dim` rows.
    pub fn precompose_affine(&self, a: &[Vec<f64>], b: &[f64]) -> Result<TanhNetwork, NetError> {
        if a.len() != self.input_dim() || b.len() != self.input_dim() {
            return Err(NetError::Incompatible(format!(
                "affine map with {} rows feeding a network with {} inputs",
                a.len(),
                self.input_dim()
            )));
        }
        let cols = a.first().map_or(0, Vec::len);
        let inner = TanhNetwork::affine(a, b.to_vec(), cols)?;
        TanhNetwork::compose(self, &inner)
    }

    /// `x -> a net(x) + b`.
    pub fn postcompose_affine(&self, a: &[Vec<f64>], b: &[f64]) -> Result<TanhNetwork, NetError> {
        let outer = TanhNetwork::affine(a, b.to_vec(), self.output_dim())?;
        TanhNetwork::compose(&outer, self)
    }

    /// Adds identity-emulation layers after the output until `depth` is reached.
    pub fn pad_to_depth(&self, depth: usize, pad: PadPolicy) -> Result<TanhNetwork, NetError> {
        if depth < self.depth() {
            return Err(NetError::Incompatible(format!(
                "cannot pad depth {} down to {}",
                self.depth(),
                depth
            )));
        }
        if depth == self.depth() {
            return Ok(self.clone());
        }
        let h = emulators::identity_step(pad.bound, pad.tol)?;
        let mut layers = self.layers.clone();
        let dim = self.output_dim();
        for _ in self.depth()..depth {
            let last = layers.pop().unwrap();
            layers.push(last.scaled(h));
            let rows = (0..dim).map(|i| vec![(i, 1.0 / h)]).collect();
            layers.push(Layer::from_rows(rows, vec![0.0; dim], dim));
        }
        TanhNetwork::new(layers)
    }

    /// Stacks outputs of networks sharing an input; shallower ones are padded.
    pub fn parallel(nets: &[TanhNetwork], pad: PadPolicy) -> Result<TanhNetwork, NetError> {
        let first = nets.first().ok_or_else(|| NetError::Incompatible("empty network list".into()))?;
        let input_dim = first.input_dim();
        if let Some(bad) = nets.iter().find(|n| n.input_dim() != input_dim) {
            return Err(NetError::Incompatible(format!(
                "input dimensions {} and {} differ",
                input_dim,
                bad.input_dim()
            )));
        }
        if nets.len() == 1 {
            return Ok(first.clone());
        }
        let depth = nets.iter().map(TanhNetwork::depth).max().unwrap();
        let padded: Vec<TanhNetwork> =
            nets.iter().map(|n| n.pad_to_depth(depth, pad)).collect::<Result<_, _>>()?;
        let mut layers = Vec::with_capacity(depth);
        for l in 0..depth {
            let mut rows = Vec::new();
            let mut bias = Vec::new();
            let mut offset = 0;
            for n in &padded {
                let layer = &n.layers[l];
                let shift = if l == 0 { 0 } else { offset };
                for i in 0..layer.rows() {
                    rows.push(layer.row(i).map(|(c, v)| (c + shift, v)).collect());
                    bias.push(layer.bias[i]);
                }
                if l > 0 {
                    offset += layer.cols();
                }
            }
            let cols = if l == 0 { input_dim } else { offset };
            layers.push(Layer::from_rows(rows, bias, cols));
        }
        TanhNetwork::new(layers)
    }

    /// `x -> Σ_i w_i net_i(x)`.
    pub fn weighted_sum(nets: &[TanhNetwork], weights: &[f64], pad: PadPolicy) -> Result<TanhNetwork, NetError> {
        if nets.len() != weights.len() {
            return Err(NetError::Incompatible(format!(
                "{} networks but {} weights",
                nets.len(),
                weights.len()
            )));
        }
        let first = nets.first().ok_or_else(|| NetError::Incompatible("empty network list".into()))?;
        let out = first.output_dim();
        if let Some(bad) = nets.iter().find(|n| n.output_dim() != out) {
            return Err(NetError::Incompatible(format!(
                "output dimensions {} and {} differ",
                out,
                bad.output_dim()
            )));
        }
        let stacked = TanhNetwork::parallel(nets, pad)?;
        let total = stacked.output_dim();
        let a: Vec<Vec<(usize, f64)>> = (0..out)
            .map(|o| weights.iter().enumerate().map(|(i, &w)| (i * out + o, w)).filter(|e| e.1 != 0.0).collect())
            .collect();
        let outer = TanhNetwork { layers: vec![Layer::from_rows(a, vec![0.0; out], total)] };
        TanhNetwork::compose(&outer, &stacked)
    }

    /// Selects the listed outputs.
    pub fn select_outputs(&self, idx: &[usize]) -> Result<TanhNetwork, NetError> {
        let proj = TanhNetwork::projection(self.output_dim(), idx);
        TanhNetwork::compose(&proj, self)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("network serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self, NetError> {
        serde_json::from_str(s).map_err(|e| NetError::Malformed(e.to_string()))
    }
}

/// Taylor coefficients of `tanh(z(t))` from those of `z(t)`, via `y' = (1 - y^2) z'`.
fn tanh_series(z: &[f64; MAX_JET_ORDER + 1], k: usize) -> [f64; MAX_JET_ORDER + 1] {
    let mut y = [0.0; MAX_JET_ORDER + 1];
    let mut w = [0.0; MAX_JET_ORDER + 1];
    y[0] = z[0].tanh();
    w[0] = 1.0 - y[0] * y[0];
    for j in 1..=k {
        let mut s = 0.0;
        for i in 1..=j {
            s += i as f64 * z[i] * w[j - i];
        }
        y[j] = s / j as f64;
        let mut q = 0.0;
        for a in 0..=j {
            q += y[a] * y[j - a];
        }
        w[j] = -q;
    }
    y
}

#[derive(Serialize, Deserialize)]
struct LayerWire {
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct NetWire {
    version: u32,
    input_dim: usize,
    layers: Vec<LayerWire>,
}

impl From<TanhNetwork> for NetWire {
    fn from(n: TanhNetwork) -> Self {
        NetWire {
            version: NET_SCHEMA_VERSION,
            input_dim: n.input_dim(),
            layers: n.layers.iter().map(|l| LayerWire { w: l.to_dense(), b: l.bias.clone() }).collect(),
        }
    }
}

impl TryFrom<NetWire> for TanhNetwork {
    type Error = NetError;

    fn try_from(w: NetWire) -> Result<Self, NetError> {
        if w.version != NET_SCHEMA_VERSION {
            return Err(NetError::Malformed(format!("unsupported schema version {}", w.version)));
        }
        let mut cols = w.input_dim;
        let mut layers = Vec::with_capacity(w.layers.len());
        for l in w.layers {
            let layer = Layer::from_dense(&l.w, l.b, cols)?;
            cols = layer.rows();
            layers.push(layer);
        }
        TanhNetwork::new(layers)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn neuron() -> TanhNetwork {
        TanhNetwork::shallow(1, vec![vec![(0, 1.0)]], vec![0.0], vec![vec![(0, 1.0)]], vec![0.0])
    }

    #[test]
    fn identity_affine_layer() {
        let net = TanhNetwork::affine(&[vec![1.0]], vec![0.0], 1).unwrap();
        assert_eq!(net.evaluate(&[3.0]).unwrap(), vec![3.0]);
        assert_eq!(net.depth(), 1);
    }

    #[test]
    fn single_neuron_at_origin() {
        assert_eq!(neuron().evaluate(&[0.0]).unwrap(), vec![0.0]);
        assert_eq!(neuron().depth(), 2);
        assert_eq!(neuron().width(), 1);
    }

    #[test]
    fn wrong_input_length_is_rejected() {
        let err = neuron().evaluate(&[0.0, 1.0]).unwrap_err();
        assert_eq!(err, NetError::DimensionMismatch { expected: 1, got: 2 });
    }

    #[test]
    fn neuron_jet_at_origin() {
        let jet = neuron().directional_jet(&[0.0], &[1.0], 2).unwrap();
        assert_eq!(jet.coeffs, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn order_above_limit_is_rejected() {
        let err = neuron().directional_jet(&[0.0], &[1.0], 5).unwrap_err();
        assert_eq!(err, NetError::UnsupportedOrder(5));
    }

    #[test]
    fn tanh_series_matches_known_derivatives() {
        // tanh at 0: derivatives 0, 1, 0, -2, 0
        let mut z = [0.0; MAX_JET_ORDER + 1];
        z[1] = 1.0;
        let y = tanh_series(&z, 4);
        let d: Vec<f64> = [1.0, 1.0, 2.0, 6.0, 24.0].iter().zip(y).map(|(f, c)| f * c).collect();
        assert!((d[1] - 1.0).abs() < 1e-15);
        assert!((d[3] + 2.0).abs() < 1e-14);
        assert!(d[2].abs() < 1e-15 && d[4].abs() < 1e-15);
    }

    #[test]
    fn padding_keeps_values_close() {
        let net = neuron();
        let padded = net.pad_to_depth(4, PadPolicy::default()).unwrap();
        assert_eq!(padded.depth(), 4);
        for i in -10..=10 {
            let x = [i as f64 * 0.3];
            let a = net.eval1(&x).unwrap();
            let b = padded.eval1(&x).unwrap();
            assert!((a - b).abs() < 3e-9);
        }
    }

    #[test]
    fn dense_round_trip_keeps_negative_zero() {
        let net = TanhNetwork::affine(&[vec![-0.0, 2.0]], vec![-0.0], 2).unwrap();
        let back = TanhNetwork::from_json(&net.to_json()).unwrap();
        assert_eq!(back.layers()[0].to_dense()[0][0].to_bits(), (-0.0f64).to_bits());
        assert_eq!(back.layers()[0].bias()[0].to_bits(), (-0.0f64).to_bits());
    }
}
