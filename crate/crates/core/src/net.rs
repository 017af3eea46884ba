//! ReLU networks in the standard affine-layer form, their norm budget
//! `kappa`, rescaling, output truncation and JSON serialization.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::matrix::Matrix;

/// Largest dense entry count written by [`ReluNet::to_json`].
pub const MAX_SERIALIZED_ENTRIES: usize = 50_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct AffineLayer {
    pub weights: Matrix,
    /// Present on every hidden layer, absent on the output layer.
    pub bias: Option<Vec<f64>>,
}

impl AffineLayer {
    pub fn hidden(weights: Matrix, bias: Vec<f64>) -> Self {
        AffineLayer {
            weights,
            bias: Some(bias),
        }
    }

    pub fn output(weights: Matrix) -> Self {
        AffineLayer {
            weights,
            bias: None,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }
}

/// `x -> A_L s(A_{L-1} ... s(A_0 x + b_0) ... + b_{L-1})` with `s = max(., 0)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReluNet {
    layers: Vec<AffineLayer>,
    width: usize,
}

impl ReluNet {
    pub fn new(layers: Vec<AffineLayer>) -> Result<Self> {
        let Some(last) = layers.last() else {
            return Err(Error::MalformedNet("no layers".into()));
        };
        if last.bias.is_some() {
            return Err(Error::MalformedNet("output layer carries a bias".into()));
        }
        if layers[0].in_dim() == 0 || last.out_dim() == 0 {
            return Err(Error::MalformedNet("zero input or output dimension".into()));
        }
        for (l, layer) in layers.iter().enumerate() {
            if l + 1 < layers.len() {
                match &layer.bias {
                    None => {
                        return Err(Error::MalformedNet(format!("hidden layer {l} has no bias")))
                    }
                    Some(b) => {
                        check_dim("bias length", layer.out_dim(), b.len())?;
                        if b.iter().any(|v| !v.is_finite()) {
                            return Err(Error::NonFinite("bias"));
                        }
                    }
                }
                check_dim("layer chaining", layer.out_dim(), layers[l + 1].in_dim())?;
            }
            if !layer.weights.is_finite() {
                return Err(Error::NonFinite("weights"));
            }
        }
        let width = layers[..layers.len() - 1]
            .iter()
            .map(AffineLayer::out_dim)
            .max()
            .unwrap_or(0);
        Ok(ReluNet { layers, width })
    }

    /// Single hidden layer net `x -> out * s(w x + b)`.
    pub fn shallow(w: Matrix, b: Vec<f64>, out: Matrix) -> Result<Self> {
        ReluNet::new(vec![AffineLayer::hidden(w, b), AffineLayer::output(out)])
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim()
    }

    /// Number of hidden layers `L`.
    pub fn depth(&self) -> usize {
        self.layers.len() - 1
    }

    /// Largest hidden layer dimension (0 for a pure affine map).
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn layers(&self) -> &[AffineLayer] {
        &self.layers
    }

    pub fn hidden_layers(&self) -> &[AffineLayer] {
        &self.layers[..self.depth()]
    }

    pub fn output_layer(&self) -> &AffineLayer {
        self.layers.last().unwrap()
    }

    pub fn into_layers(self) -> Vec<AffineLayer> {
        self.layers
    }

    /// Stored weights plus biases.
    pub fn num_parameters(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.nnz() + l.bias.as_ref().map_or(0, Vec::len))
            .sum()
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [AffineLayer] {
        &mut self.layers
    }

    pub(crate) fn hidden_layers_mut(&mut self) -> &mut [AffineLayer] {
        let depth = self.depth();
        &mut self.layers[..depth]
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim("network input", self.input_dim(), x.len())?;
        let mut scratch = Scratch::default();
        Ok(self.eval_with(x, &mut scratch).to_vec())
    }

    /// Forward pass reusing `scratch`; the input length is not checked.
    pub fn eval_with<'s>(&self, x: &[f64], scratch: &'s mut Scratch) -> &'s [f64] {
        let Scratch { a, b } = scratch;
        a.clear();
        a.extend_from_slice(x);
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            b.resize(layer.out_dim(), 0.0);
            layer.weights.mul_vec_into(a, b);
            if let Some(bias) = &layer.bias {
                for (v, c) in b.iter_mut().zip(bias) {
                    *v += c;
                }
            }
            if l < last {
                b.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            std::mem::swap(a, b);
        }
        a
    }

    /// Scalar output of a single-output net.
    pub fn eval_scalar(&self, x: &[f64], scratch: &mut Scratch) -> f64 {
        self.eval_with(x, scratch)[0]
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&NetFile::try_from(self)?)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: NetFile = serde_json::from_str(s)?;
        file.try_into()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::harness::write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}

/// Reusable activation buffers for [`ReluNet::eval_with`].
#[derive(Default, Debug, Clone)]
pub struct Scratch {
    a: Vec<f64>,
    b: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct NetFile {
    input_dim: usize,
    output_dim: usize,
    layers: Vec<LayerFile>,
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "b", default, skip_serializing_if = "Option::is_none")]
    b: Option<Vec<f64>>,
}

impl TryFrom<&ReluNet> for NetFile {
    type Error = Error;

    fn try_from(net: &ReluNet) -> Result<Self> {
        if net.depth() == 0 {
            return Err(Error::MalformedNet(
                "pure affine maps (depth 0) are not serialized".into(),
            ));
        }
        let entries: usize = net
            .layers
            .iter()
            .map(|l| l.weights.rows() * l.weights.cols())
            .sum();
        if entries > MAX_SERIALIZED_ENTRIES {
            return Err(Error::ResourceCap {
                what: "dense serialization",
                needed: entries as u128,
                cap: MAX_SERIALIZED_ENTRIES as u128,
            });
        }
        Ok(NetFile {
            input_dim: net.input_dim(),
            output_dim: net.output_dim(),
            layers: net
                .layers
                .iter()
                .map(|l| LayerFile {
                    a: l.weights.to_dense_rows(),
                    b: l.bias.clone(),
                })
                .collect(),
        })
    }
}

impl TryFrom<NetFile> for ReluNet {
    type Error = Error;

    fn try_from(file: NetFile) -> Result<Self> {
        let mut layers = Vec::with_capacity(file.layers.len());
        let mut in_dim = file.input_dim;
        for lf in file.layers {
            let w = if lf.a.is_empty() {
                Matrix::zeros(0, in_dim)
            } else {
                Matrix::from_rows(&lf.a)?
            };
            in_dim = w.rows();
            layers.push(AffineLayer {
                weights: w,
                bias: lf.b,
            });
        }
        let net = ReluNet::new(layers)?;
        check_dim("declared input_dim", file.input_dim, net.input_dim())?;
        check_dim("declared output_dim", file.output_dim, net.output_dim())?;
        if net.depth() == 0 {
            return Err(Error::MalformedNet("serialized net has no hidden layer".into()));
        }
        Ok(net)
    }
}

/// Induced `inf -> inf` norm: the largest row 1-norm.
pub fn op_norm(a: &Matrix) -> Result<f64> {
    if a.rows() == 0 || a.cols() == 0 {
        return Err(Error::EmptyMatrix {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    Ok((0..a.rows()).map(|i| a.row_abs_sum(i)).fold(0.0, f64::max))
}

/// `||(A, b)||`: operator norm of `A` with `b` appended as a column.
pub fn affine_norm(a: &Matrix, b: &[f64]) -> f64 {
    (0..a.rows())
        .map(|i| a.row_abs_sum(i) + b[i].abs())
        .fold(0.0, f64::max)
}

fn layer_norm(layer: &AffineLayer) -> f64 {
    match &layer.bias {
        Some(b) => affine_norm(&layer.weights, b),
        None => (0..layer.weights.rows())
            .map(|i| layer.weights.row_abs_sum(i))
            .fold(0.0, f64::max),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KappaReport {
    pub hidden_norms: Vec<f64>,
    pub output_norm: f64,
    pub kappa: f64,
}

pub fn kappa(net: &ReluNet) -> KappaReport {
    let hidden_norms: Vec<f64> = net.hidden_layers().iter().map(layer_norm).collect();
    let output_norm = layer_norm(net.output_layer());
    let kappa = hidden_norms
        .iter()
        .fold(output_norm, |acc, &h| acc * h.max(1.0));
    KappaReport {
        hidden_norms,
        output_norm,
        kappa,
    }
}

/// Layer-wise rescaling: every hidden `||(A_l, b_l)|| <= 1`, the scale is
/// pushed into the output layer. The function is unchanged.
pub fn rescale(net: &ReluNet) -> ReluNet {
    let mut out = net.clone();
    let depth = net.depth();
    let mut cumulative = 1.0;
    for layer in &mut out.layers_mut()[..depth] {
        let k = layer_norm(layer).max(1.0);
        cumulative *= k;
        layer.weights.scale(1.0 / k);
        for v in layer.bias.as_mut().unwrap() {
            *v /= cumulative;
        }
    }
    out.layers_mut()[depth].weights.scale(cumulative);
    out
}

/// Neuron-wise normalization: every hidden row of `(A_l, b_l)` with nonzero
/// norm is scaled to norm exactly 1 (up to rounding) and the factor moved
/// into the outgoing column. Units that are identically zero get their
/// outgoing weights zeroed. Never increases `kappa` and keeps the function.
pub fn normalize_neurons(net: &ReluNet) -> ReluNet {
    let mut out = net.clone();
    let depth = net.depth();
    let mut carry = vec![1.0; net.input_dim()];
    for layer in &mut out.layers_mut()[..depth] {
        layer.weights.scale_cols(&carry);
        let bias = layer.bias.as_mut().unwrap();
        let norms: Vec<f64> = (0..layer.weights.rows())
            .map(|i| layer.weights.row_abs_sum(i) + bias[i].abs())
            .collect();
        let inv: Vec<f64> = norms
            .iter()
            .map(|&n| if n > 0.0 { 1.0 / n } else { 0.0 })
            .collect();
        layer.weights.scale_rows(&inv);
        for (b, s) in bias.iter_mut().zip(&inv) {
            *b *= s;
        }
        carry = norms;
    }
    out.layers_mut()[depth].weights.scale_cols(&carry);
    out
}

/// Componentwise clipping net `x -> (x v -B) ^ B` on `k` coordinates.
pub fn clip_net(k: usize, bound: f64) -> Result<ReluNet> {
    if !(bound > 0.0) || !bound.is_finite() {
        return Err(Error::param("B", format!("must be positive, got {bound}")));
    }
    if k == 0 {
        return Err(Error::param("k", "output dimension must be positive"));
    }
    let s = 1.0 / (bound + 1.0);
    let t = bound / (bound + 1.0);
    let mut rows = Vec::with_capacity(4 * k);
    let mut bias = Vec::with_capacity(4 * k);
    let mut out = Vec::with_capacity(k);
    for j in 0..k {
        rows.push(vec![(j, 1.0)]);
        rows.push(vec![(j, -1.0)]);
        rows.push(vec![(j, s)]);
        rows.push(vec![(j, -s)]);
        bias.extend_from_slice(&[0.0, 0.0, -t, -t]);
        let u = 4 * j;
        out.push(vec![
            (u, 1.0),
            (u + 1, -1.0),
            (u + 2, -(bound + 1.0)),
            (u + 3, bound + 1.0),
        ]);
    }
    ReluNet::shallow(
        Matrix::from_sparse_rows(k, rows),
        bias,
        Matrix::from_sparse_rows(4 * k, out),
    )
}

/// Composes `net` with elementwise clipping to `[-B, B]`.
pub fn truncate(net: &ReluNet, bound: f64) -> Result<ReluNet> {
    let chi = clip_net(net.output_dim(), bound)?;
    crate::algebra::compose(&chi, net)
}

/// Bias-free form over the augmented input `(x, 1)`: hidden blocks
/// `[[A, b], [0, 1]]`, output `(A_L, 0)`.
pub fn snn_embed(net: &ReluNet) -> ReluNet {
    let depth = net.depth();
    let mut layers = Vec::with_capacity(depth + 1);
    for layer in net.hidden_layers() {
        let w = &layer.weights;
        let b = layer.bias.as_ref().unwrap();
        let cols = w.cols() + 1;
        let mut rows: Vec<Vec<(usize, f64)>> = (0..w.rows())
            .map(|i| {
                let (c, v) = w.row(i);
                let mut row: Vec<(usize, f64)> = c.iter().copied().zip(v.iter().copied()).collect();
                if b[i] != 0.0 {
                    row.push((w.cols(), b[i]));
                }
                row
            })
            .collect();
        rows.push(vec![(w.cols(), 1.0)]);
        layers.push(AffineLayer::hidden(
            Matrix::from_sparse_rows(cols, rows),
            vec![0.0; w.rows() + 1],
        ));
    }
    let out = &net.output_layer().weights;
    layers.push(AffineLayer::output(out.padded(out.rows(), out.cols() + 1)));
    ReluNet::new(layers).expect("embedding preserves validity")
}

/// Product of the weight-matrix operator norms (biases ignored).
pub fn norm_product(net: &ReluNet) -> f64 {
    net.layers()
        .iter()
        .map(|l| op_norm(&l.weights).unwrap_or(0.0))
        .product()
}

fn inf_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Largest observed `||f(x) - f(y)||_inf / ||x - y||_inf` over the pairs.
pub fn lipschitz_probe(net: &ReluNet, pairs: &[(Vec<f64>, Vec<f64>)]) -> Result<f64> {
    let mut scratch = Scratch::default();
    let mut best: Option<f64> = None;
    for (x, y) in pairs {
        check_dim("probe point", net.input_dim(), x.len())?;
        check_dim("probe point", net.input_dim(), y.len())?;
        let dx = inf_dist(x, y);
        if dx == 0.0 {
            continue;
        }
        let fx = net.eval_with(x, &mut scratch).to_vec();
        let fy = net.eval_with(y, &mut scratch);
        let q = inf_dist(&fx, fy) / dx;
        best = Some(best.map_or(q, |b: f64| b.max(q)));
    }
    best.ok_or(Error::DegeneratePairs)
}
