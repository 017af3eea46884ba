//! Combinators on networks that track width, depth and norm budget.
//!
//! Every combinator first normalizes its operands neuron-wise (see
//! [`normalize_neurons`]), which leaves the function unchanged and never
//! increases `kappa`. With hidden rows of norm at most one the budget of a
//! combined net follows from the operands' budgets by the arithmetic in
//! [`BudgetBound`].

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::matrix::Matrix;
use crate::net::{affine_norm, kappa, normalize_neurons, AffineLayer, ReluNet};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetBound {
    pub width_bound: usize,
    pub depth_bound: usize,
    pub kappa_bound: f64,
}

impl BudgetBound {
    /// Width, depth and normalized `kappa` of an existing net.
    pub fn of(net: &ReluNet) -> Self {
        BudgetBound {
            width_bound: net.width(),
            depth_bound: net.depth(),
            kappa_bound: kappa(&normalize_neurons(net)).kappa,
        }
    }

    pub fn compose(outer: &Self, inner: &Self) -> Self {
        BudgetBound {
            width_bound: outer.width_bound.max(inner.width_bound),
            depth_bound: outer.depth_bound + inner.depth_bound,
            kappa_bound: outer.kappa_bound * inner.kappa_bound.max(1.0),
        }
    }

    /// Pre-composition with an affine map whose `||(A, b)||` is `affine_norm`.
    pub fn precompose(net: &Self, affine_norm: f64) -> Self {
        BudgetBound {
            kappa_bound: net.kappa_bound * affine_norm.max(1.0),
            ..*net
        }
    }

    pub fn concat(a: &Self, b: &Self) -> Self {
        BudgetBound {
            width_bound: a.width_bound + b.width_bound,
            depth_bound: a.depth_bound.max(b.depth_bound),
            kappa_bound: a.kappa_bound.max(b.kappa_bound),
        }
    }

    pub fn lincomb(c1: f64, a: &Self, c2: f64, b: &Self) -> Self {
        BudgetBound {
            width_bound: a.width_bound + b.width_bound,
            depth_bound: a.depth_bound.max(b.depth_bound),
            kappa_bound: c1.abs() * a.kappa_bound + c2.abs() * b.kappa_bound,
        }
    }
}

/// Pads to the requested width and depth without changing the function or
/// `kappa`.
pub fn pad(net: &ReluNet, target_width: usize, target_depth: usize) -> Result<ReluNet> {
    if target_width < net.width() {
        return Err(Error::param(
            "target_width",
            format!("{target_width} is below the current width {}", net.width()),
        ));
    }
    let extended = extend_depth(net, target_depth)?;
    pad_width(&extended, target_width)
}

/// Inserts identity layers after the first hidden layer until the depth is
/// `target_depth`. The activations there are nonnegative, so the inserted
/// ReLU layers act as the identity.
pub fn extend_depth(net: &ReluNet, target_depth: usize) -> Result<ReluNet> {
    let depth = net.depth();
    if target_depth < depth {
        return Err(Error::param(
            "target_depth",
            format!("{target_depth} is below the current depth {depth}"),
        ));
    }
    if target_depth == depth {
        return Ok(net.clone());
    }
    if depth == 0 {
        return Err(Error::MalformedNet(
            "a pure affine map cannot be deepened without changing its budget".into(),
        ));
    }
    let mut layers = net.clone().into_layers();
    let w0 = layers[0].out_dim();
    let identity = AffineLayer::hidden(Matrix::identity(w0), vec![0.0; w0]);
    let extra = std::iter::repeat_n(identity, target_depth - depth);
    layers.splice(1..1, extra);
    ReluNet::new(layers)
}

/// Appends inert hidden units so every hidden layer has `target_width`
/// units. A no-op when the width already equals the target.
pub fn pad_width(net: &ReluNet, target_width: usize) -> Result<ReluNet> {
    if target_width < net.width() {
        return Err(Error::param(
            "target_width",
            format!("{target_width} is below the current width {}", net.width()),
        ));
    }
    if target_width == net.width() {
        return Ok(net.clone());
    }
    let depth = net.depth();
    let mut layers = net.clone().into_layers();
    let mut in_dim = net.input_dim();
    for (l, layer) in layers.iter_mut().enumerate() {
        let rows = if l < depth { target_width } else { layer.out_dim() };
        layer.weights = layer.weights.padded(rows, in_dim);
        if let Some(b) = &mut layer.bias {
            b.resize(rows, 0.0);
        }
        in_dim = rows;
    }
    ReluNet::new(layers)
}

/// `x -> outer(inner(x))`.
pub fn compose(outer: &ReluNet, inner: &ReluNet) -> Result<ReluNet> {
    check_dim("compose", outer.input_dim(), inner.output_dim())?;
    let outer = normalize_neurons(outer);
    let inner = normalize_neurons(inner);
    if inner.depth() == 0 {
        let zero = vec![0.0; inner.output_dim()];
        return precompose_normalized(outer, &inner.output_layer().weights, &zero);
    }
    let mut layers = inner.into_layers();
    let last = layers.pop().unwrap().weights;
    let mut outer_layers = outer.into_layers();
    let first = &mut outer_layers[0];
    first.weights = first.weights.matmul(&last)?;
    layers.extend(outer_layers);
    ReluNet::new(layers)
}

/// `x -> net(a x + b)`.
pub fn precompose_affine(net: &ReluNet, a: &Matrix, b: &[f64]) -> Result<ReluNet> {
    check_dim("precompose rows", net.input_dim(), a.rows())?;
    check_dim("precompose bias", a.rows(), b.len())?;
    if !a.is_finite() || b.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("affine map"));
    }
    precompose_normalized(normalize_neurons(net), a, b)
}

fn precompose_normalized(net: ReluNet, a: &Matrix, b: &[f64]) -> Result<ReluNet> {
    let mut layers = net.into_layers();
    let first = &mut layers[0];
    let mut shift = vec![0.0; first.out_dim()];
    first.weights.mul_vec_into(b, &mut shift);
    first.weights = first.weights.matmul(a)?;
    match &mut first.bias {
        Some(bias) => bias.iter_mut().zip(&shift).for_each(|(c, s)| *c += s),
        None => {
            if shift.iter().any(|&s| s != 0.0) {
                return Err(Error::MalformedNet(
                    "an output offset cannot be represented without a hidden layer".into(),
                ));
            }
        }
    }
    ReluNet::new(layers)
}

/// `x -> (n1(x), n2(x))`.
pub fn concat(n1: &ReluNet, n2: &ReluNet) -> Result<ReluNet> {
    concat_all(&[n1, n2])
}

/// Stacks the outputs of all nets, which must share their input dimension.
pub fn concat_all(nets: &[&ReluNet]) -> Result<ReluNet> {
    let mut parts = aligned_parts(nets)?;
    let outputs: Vec<Matrix> = parts
        .iter_mut()
        .map(|layers| layers.pop().unwrap().weights)
        .collect();
    let refs: Vec<&Matrix> = outputs.iter().collect();
    assemble(parts, Matrix::block_diag(&refs))
}

/// `x -> c1 n1(x) + c2 n2(x)`.
pub fn lincomb(c1: f64, n1: &ReluNet, c2: f64, n2: &ReluNet) -> Result<ReluNet> {
    lincomb_all(&[(c1, n1), (c2, n2)])
}

/// `x -> sum_i c_i n_i(x)`; nets share input and output dimensions.
pub fn lincomb_all(terms: &[(f64, &ReluNet)]) -> Result<ReluNet> {
    let Some((_, first)) = terms.first() else {
        return Err(Error::Empty("linear combination"));
    };
    for (c, n) in terms {
        check_dim("lincomb output", first.output_dim(), n.output_dim())?;
        if !c.is_finite() {
            return Err(Error::NonFinite("coefficient"));
        }
    }
    let nets: Vec<&ReluNet> = terms.iter().map(|t| t.1).collect();
    let mut parts = aligned_parts(&nets)?;
    let outputs: Vec<Matrix> = parts
        .iter_mut()
        .zip(terms)
        .map(|(layers, (c, _))| {
            let mut w = layers.pop().unwrap().weights;
            w.scale(*c);
            w
        })
        .collect();
    let refs: Vec<&Matrix> = outputs.iter().collect();
    assemble(parts, Matrix::hstack(&refs)?)
}

/// Normalized operands brought to a common depth; returns their layer lists.
fn aligned_parts(nets: &[&ReluNet]) -> Result<Vec<Vec<AffineLayer>>> {
    let Some(first) = nets.first() else {
        return Err(Error::Empty("network list"));
    };
    for n in nets {
        check_dim("shared input dimension", first.input_dim(), n.input_dim())?;
    }
    let depth = nets.iter().map(|n| n.depth()).max().unwrap();
    nets.iter()
        .map(|n| Ok(extend_depth(&normalize_neurons(n), depth)?.into_layers()))
        .collect()
}

/// Parallel assembly of aligned hidden layers (output layers already
/// removed): first hidden layers stacked, deeper ones block diagonal.
fn assemble(parts: Vec<Vec<AffineLayer>>, output: Matrix) -> Result<ReluNet> {
    let depth = parts[0].len();
    let mut layers = Vec::with_capacity(depth + 1);
    for l in 0..depth {
        let mats: Vec<&Matrix> = parts.iter().map(|p| &p[l].weights).collect();
        let weights = if l == 0 {
            Matrix::vstack(&mats)?
        } else {
            Matrix::block_diag(&mats)
        };
        let bias = parts
            .iter()
            .flat_map(|p| p[l].bias.as_ref().unwrap().iter().copied())
            .collect();
        layers.push(AffineLayer::hidden(weights, bias));
    }
    layers.push(AffineLayer::output(output));
    ReluNet::new(layers)
}

/// `||(A, b)||` helper re-exported for callers that build affine maps.
pub fn affine_map_norm(a: &Matrix, b: &[f64]) -> Result<f64> {
    check_dim("affine map bias", a.rows(), b.len())?;
    Ok(affine_norm(a, b))
}
