//! Training at desk scale: backpropagation, projection onto the budget
//! ball, the `kappa` penalty subgradient, regression ERM, IPM estimates
//! and a penalized GAN loop.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::matrix::Matrix;
use crate::net::{kappa, lipschitz_probe, rescale, AffineLayer, ReluNet, Scratch};
use crate::rng::{self, Rng};

/// Loss at which training is declared divergent.
pub const DIVERGENCE_LOSS: f64 = 1e6;

/// Per-layer gradients aligned with the stored weight entries.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn zeros_like(net: &ReluNet) -> Self {
        Gradients {
            weights: net.layers().iter().map(|l| vec![0.0; l.weights.nnz()]).collect(),
            biases: net
                .layers()
                .iter()
                .map(|l| l.bias.as_ref().map(|b| vec![0.0; b.len()]))
                .collect(),
        }
    }

    pub fn add_scaled(&mut self, other: &Gradients, c: f64) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += c * y);
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            if let (Some(a), Some(b)) = (a, b) {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += c * y);
            }
        }
    }

    pub fn scale(&mut self, c: f64) {
        self.weights.iter_mut().flatten().for_each(|v| *v *= c);
        self.biases.iter_mut().flatten().flatten().for_each(|v| *v *= c);
    }

    pub fn norm(&self) -> f64 {
        self.weights
            .iter()
            .flatten()
            .chain(self.biases.iter().flatten().flatten())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Flattened as weights then biases, layer by layer.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w);
            if let Some(b) = b {
                out.extend_from_slice(b);
            }
        }
        out
    }
}

/// `net -= lr * grad`.
pub fn apply_step(net: &mut ReluNet, grad: &Gradients, lr: f64) {
    for (l, layer) in net.layers_mut().iter_mut().enumerate() {
        layer
            .weights
            .values_mut()
            .iter_mut()
            .zip(&grad.weights[l])
            .for_each(|(w, g)| *w -= lr * g);
        if let (Some(b), Some(g)) = (&mut layer.bias, &grad.biases[l]) {
            b.iter_mut().zip(g).for_each(|(w, g)| *w -= lr * g);
        }
    }
}

/// Penalty step that moves entries toward zero without crossing it, so a
/// large step cannot flip a row's signs and inflate its norm.
pub fn shrink_step(net: &mut ReluNet, penalty: &Gradients, lr: f64) {
    let shrink = |w: &mut f64, g: f64| {
        let next = *w - lr * g;
        *w = if next * *w < 0.0 { 0.0 } else { next };
    };
    for (l, layer) in net.layers_mut().iter_mut().enumerate() {
        layer.weights.values_mut().iter_mut().zip(&penalty.weights[l]).for_each(|(w, &g)| shrink(w, g));
        if let (Some(b), Some(g)) = (&mut layer.bias, &penalty.biases[l]) {
            b.iter_mut().zip(g).for_each(|(w, &g)| shrink(w, g));
        }
    }
}

/// Flattened parameter view, in the order of [`Gradients::flatten`].
pub fn parameters(net: &ReluNet) -> Vec<f64> {
    let mut out = Vec::new();
    for layer in net.layers() {
        out.extend_from_slice(layer.weights.values());
        if let Some(b) = &layer.bias {
            out.extend_from_slice(b);
        }
    }
    out
}

pub fn set_parameters(net: &mut ReluNet, params: &[f64]) {
    let mut pos = 0;
    for layer in net.layers_mut() {
        let n = layer.weights.nnz();
        layer.weights.values_mut().copy_from_slice(&params[pos..pos + n]);
        pos += n;
        if let Some(b) = &mut layer.bias {
            let m = b.len();
            b.copy_from_slice(&params[pos..pos + m]);
            pos += m;
        }
    }
}

/// Forward pass keeping every layer's input activation and
/// pre-activation, then accumulates `grad += d/dtheta <dout, net(x)>`.
/// Returns `d/dx <dout, net(x)>` when `want_input` is set.
pub fn accumulate(
    net: &ReluNet,
    x: &[f64],
    dout: &[f64],
    grad: &mut Gradients,
    want_input: bool,
) -> Option<Vec<f64>> {
    let layers = net.layers();
    let last = layers.len() - 1;
    let mut inputs: Vec<Vec<f64>> = Vec::with_capacity(layers.len());
    let mut pre: Vec<Vec<f64>> = Vec::with_capacity(last);
    let mut a = x.to_vec();
    for (l, layer) in layers.iter().enumerate() {
        let mut z = vec![0.0; layer.out_dim()];
        layer.weights.mul_vec_into(&a, &mut z);
        if let Some(b) = &layer.bias {
            z.iter_mut().zip(b).for_each(|(v, c)| *v += c);
        }
        inputs.push(a);
        if l < last {
            a = z.iter().map(|v| v.max(0.0)).collect();
            pre.push(z);
        } else {
            a = z;
        }
    }
    let mut delta = dout.to_vec();
    for l in (0..layers.len()).rev() {
        let layer = &layers[l];
        if l < last {
            for (d, z) in delta.iter_mut().zip(&pre[l]) {
                if *z <= 0.0 {
                    *d = 0.0;
                }
            }
            if let Some(gb) = &mut grad.biases[l] {
                gb.iter_mut().zip(&delta).for_each(|(g, d)| *g += d);
            }
        }
        let gw = &mut grad.weights[l];
        let mut p = 0;
        for (i, &di) in delta.iter().enumerate() {
            let (cols, _) = layer.weights.row(i);
            if di != 0.0 {
                for (k, &j) in cols.iter().enumerate() {
                    gw[p + k] += di * inputs[l][j];
                }
            }
            p += cols.len();
        }
        if l > 0 || want_input {
            let mut prev = vec![0.0; layer.in_dim()];
            layer.weights.mul_transpose_add(&delta, &mut prev);
            delta = prev;
        }
    }
    want_input.then_some(delta)
}

#[derive(Clone, Copy, Debug)]
pub enum Loss<'a> {
    /// `mean_i ||net(x_i) - y_i||^2`.
    Squared { xs: &'a [Vec<f64>], ys: &'a [Vec<f64>] },
    /// `mean_{x in a} net(x) - mean_{x in b} net(x)` for a scalar net.
    LinearWitness { a: &'a [Vec<f64>], b: &'a [Vec<f64>] },
}

/// Loss value and its gradient with respect to every stored parameter.
/// The ReLU subgradient at zero is zero.
pub fn backprop(net: &ReluNet, loss: Loss<'_>) -> Result<(f64, Gradients)> {
    let mut grad = Gradients::zeros_like(net);
    let mut scratch = Scratch::default();
    let value = match loss {
        Loss::Squared { xs, ys } => {
            if xs.is_empty() {
                return Err(Error::Empty("batch"));
            }
            check_dim("targets", xs.len(), ys.len())?;
            let n = xs.len() as f64;
            let mut total = 0.0;
            for (x, y) in xs.iter().zip(ys) {
                check_dim("input", net.input_dim(), x.len())?;
                check_dim("target", net.output_dim(), y.len())?;
                let out = net.eval_with(x, &mut scratch);
                let resid: Vec<f64> = out.iter().zip(y).map(|(o, t)| o - t).collect();
                total += resid.iter().map(|r| r * r).sum::<f64>();
                let dout: Vec<f64> = resid.iter().map(|r| 2.0 * r / n).collect();
                accumulate(net, x, &dout, &mut grad, false);
            }
            total / n
        }
        Loss::LinearWitness { a, b } => {
            if a.is_empty() || b.is_empty() {
                return Err(Error::Empty("sample set"));
            }
            check_dim("witness output", 1, net.output_dim())?;
            let mut value = 0.0;
            for (set, sign) in [(a, 1.0), (b, -1.0)] {
                let w = sign / set.len() as f64;
                for x in set {
                    check_dim("input", net.input_dim(), x.len())?;
                    value += w * net.eval_scalar(x, &mut scratch);
                    accumulate(net, x, &[w], &mut grad, false);
                }
            }
            value
        }
    };
    Ok((value, grad))
}

/// Maps `net` into `{kappa <= K}`: unchanged if already feasible, else
/// layer-wise rescaling followed by shrinking the output layer.
pub fn kappa_project(net: &ReluNet, k: f64) -> Result<ReluNet> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::param("K", format!("must be positive, got {k}")));
    }
    if kappa(net).kappa <= k {
        return Ok(net.clone());
    }
    let mut out = rescale(net);
    let depth = out.depth();
    loop {
        let current = kappa(&out).kappa;
        if current <= k {
            return Ok(out);
        }
        let factor = if current.is_finite() { k / current } else { 0.0 };
        let w = &mut out.layers_mut()[depth].weights;
        if factor >= 1.0 {
            w.scale(1.0 - 1e-15);
        } else {
            w.scale(factor);
        }
    }
}

fn argmax_row(layer: &AffineLayer) -> (usize, f64) {
    let mut best = (0usize, f64::NEG_INFINITY);
    for i in 0..layer.weights.rows() {
        let norm = layer.weights.row_abs_sum(i) + layer.bias.as_ref().map_or(0.0, |b| b[i].abs());
        if norm > best.1 {
            best = (i, norm);
        }
    }
    best
}

fn signum0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Subgradient of `kappa` (or of `kappa^2` when `squared`). Each layer
/// contributes through its first maximal row only; hidden layers with
/// norm at most one contribute nothing.
pub fn kappa_penalty_grad(net: &ReluNet, squared: bool) -> Gradients {
    let mut grad = Gradients::zeros_like(net);
    let layers = net.layers();
    let depth = net.depth();
    let rows: Vec<(usize, f64)> = layers.iter().map(argmax_row).collect();
    let factors: Vec<f64> = rows
        .iter()
        .enumerate()
        .map(|(l, &(_, n))| if l < depth { n.max(1.0) } else { n })
        .collect();
    let kap: f64 = factors.iter().product();
    let outer = if squared { 2.0 * kap } else { 1.0 };
    for (l, layer) in layers.iter().enumerate() {
        let (row, norm) = rows[l];
        if layer.weights.rows() == 0 || (l < depth && norm <= 1.0) {
            continue;
        }
        let others: f64 = factors
            .iter()
            .enumerate()
            .filter(|&(m, _)| m != l)
            .map(|(_, f)| f)
            .product();
        let c = outer * others;
        let start: usize = (0..row).map(|i| layer.weights.row(i).0.len()).sum();
        let (_, vals) = layer.weights.row(row);
        for (k, &v) in vals.iter().enumerate() {
            grad.weights[l][start + k] = c * signum0(v);
        }
        if let (Some(gb), Some(b)) = (&mut grad.biases[l], &layer.bias) {
            gb[row] = c * signum0(b[row]);
        }
    }
    grad
}

/// Fully connected net with uniform `+-sqrt(6/(fan_in+fan_out))` weights
/// and zero biases; every entry is stored.
pub fn random_dense_net(dims: &[usize], rng: &mut Rng) -> Result<ReluNet> {
    if dims.len() < 2 {
        return Err(Error::param("dims", "need input and output dimensions"));
    }
    let mut layers = Vec::with_capacity(dims.len() - 1);
    for l in 0..dims.len() - 1 {
        let (fan_in, fan_out) = (dims[l], dims[l + 1]);
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let data: Vec<f64> = (0..fan_in * fan_out)
            .map(|_| rng.random_range(-limit..=limit))
            .collect();
        let w = Matrix::from_dense(fan_out, fan_in, &data);
        layers.push(if l + 2 < dims.len() {
            AffineLayer::hidden(w, vec![0.0; fan_out])
        } else {
            AffineLayer::output(w)
        });
    }
    ReluNet::new(layers)
}

/// Layer sizes `[d, W, ..., W, out]` with `depth` hidden layers.
pub fn arch_dims(input: usize, width: usize, depth: usize, output: usize) -> Vec<usize> {
    let mut dims = vec![input];
    dims.extend(std::iter::repeat_n(width, depth));
    dims.push(output);
    dims
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Budget {
    /// Hard constraint `kappa <= K`, enforced by projection.
    #[serde(rename = "K")]
    Constraint(f64),
    /// Penalty weight `lambda`.
    #[serde(rename = "lambda")]
    Penalty(f64),
}

impl Budget {
    fn validate(&self) -> Result<()> {
        match *self {
            Budget::Constraint(k) if !(k > 0.0) => Err(Error::param("K", "must be positive")),
            Budget::Penalty(l) if !(l >= 0.0) => Err(Error::param("lambda", "must be nonnegative")),
            _ => Ok(()),
        }
    }
}

/// Regression target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum RegressionTarget {
    /// A named analytic target (`sine`, `product`, `const`).
    Named { name: String, alpha: f64 },
    /// A random net of the given shape rescaled to `kappa`, drawn from `seed`.
    Planted {
        width: usize,
        depth: usize,
        kappa: f64,
        seed: u64,
    },
}

impl RegressionTarget {
    pub fn build(&self, d: usize) -> Result<Box<dyn Fn(&[f64]) -> f64 + Send + Sync>> {
        match self {
            RegressionTarget::Named { name, alpha } => {
                let spec = crate::targets::by_name(name, d, *alpha)?;
                Ok(Box::new(move |x: &[f64]| spec.eval(x)))
            }
            RegressionTarget::Planted {
                width,
                depth,
                kappa: k,
                seed,
            } => {
                let net = planted_net(d, *width, *depth, 1, *k, *seed)?;
                Ok(Box::new(move |x: &[f64]| {
                    net.eval_scalar(x, &mut Scratch::default())
                }))
            }
        }
    }
}

/// Random net of the given shape, rescaled so that `kappa` equals `k`.
pub fn planted_net(d: usize, width: usize, depth: usize, out: usize, k: f64, seed: u64) -> Result<ReluNet> {
    let mut rng = rng::stream(seed, 0xA11CE);
    let mut net = random_dense_net(&arch_dims(d, width, depth, out), &mut rng)?;
    for layer in net.hidden_layers_mut() {
        let b = layer.bias.as_mut().unwrap();
        b.iter_mut().for_each(|v| *v = rng.random_range(-0.5..0.5));
    }
    let mut net = rescale(&net);
    let current = kappa(&net).kappa;
    let depth = net.depth();
    net.layers_mut()[depth].weights.scale(k / current);
    Ok(net)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionConfig {
    pub d: usize,
    pub target: RegressionTarget,
    pub n: usize,
    #[serde(default)]
    pub noise_std: f64,
    pub width: usize,
    pub depth: usize,
    pub budget: Budget,
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
    /// Step-decay constant `T0` in `lr / (1 + t / T0)`.
    #[serde(default = "default_t0")]
    pub t0: f64,
    #[serde(default = "default_holdout")]
    pub holdout: usize,
    pub seed: u64,
}

fn default_t0() -> f64 {
    1000.0
}

fn default_holdout() -> usize {
    10_000
}

impl RegressionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.n == 0 || self.width == 0 || self.batch == 0 {
            return Err(Error::param("d/n/width/batch", "must be positive"));
        }
        if !(self.lr > 0.0) || !(self.t0 > 0.0) || !(self.noise_std >= 0.0) {
            return Err(Error::param("lr/t0/noise_std", "lr, t0 positive; noise_std nonnegative"));
        }
        if self.holdout == 0 {
            return Err(Error::param("holdout", "must be positive"));
        }
        self.budget.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub kappa: f64,
    /// Held-out `L^2(mu)` distance of the truncated predictor to the target.
    pub heldout_l2: Option<f64>,
    /// Penalized inner objective (GAN).
    pub ipm_penalized: Option<f64>,
    /// Witness-family IPM between target samples and generated samples.
    pub ipm_surrogate: Option<f64>,
    /// Discriminator Lipschitz probe (GAN).
    pub lipschitz: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub net: ReluNet,
    pub generator: Option<ReluNet>,
    pub best_loss: f64,
    /// Final minus best-seen training objective.
    pub opt_gap: f64,
}

impl TrainReport {
    pub const CSV_COLUMNS: [&'static str; 7] = [
        "epoch",
        "loss",
        "kappa",
        "heldout_l2",
        "ipm_penalized",
        "ipm_surrogate",
        "lipschitz",
    ];

    pub fn to_csv(&self) -> String {
        let mut out = Self::CSV_COLUMNS.join(",");
        out.push('\n');
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:?}"));
        for r in &self.epochs {
            out.push_str(&format!(
                "{},{:?},{:?},{},{},{},{}\n",
                r.epoch,
                r.loss,
                r.kappa,
                opt(r.heldout_l2),
                opt(r.ipm_penalized),
                opt(r.ipm_surrogate),
                opt(r.lipschitz)
            ));
        }
        out
    }
}

fn clip1(v: f64) -> f64 {
    v.clamp(-1.0, 1.0)
}

fn lr_at(lr: f64, t0: f64, step: usize) -> f64 {
    lr / (1.0 + step as f64 / t0)
}

/// SGD on the squared loss with projection (`K`) or penalty (`lambda`).
/// The reported held-out error is for the predictor truncated to `[-1, 1]`.
pub fn train_regression(cfg: &RegressionConfig) -> Result<TrainReport> {
    cfg.validate()?;
    let f0 = cfg.target.build(cfg.d)?;
    let mut data_rng = rng::stream(cfg.seed, 0);
    let xs = rng::uniform_points(&mut data_rng, cfg.n, cfg.d, 0.0, 1.0);
    let noise = Normal::new(0.0, cfg.noise_std.max(0.0)).map_err(|e| Error::param("noise_std", e.to_string()))?;
    let ys: Vec<Vec<f64>> = xs
        .iter()
        .map(|x| {
            let eta = if cfg.noise_std > 0.0 {
                noise.sample(&mut data_rng)
            } else {
                0.0
            };
            vec![f0(x) + eta]
        })
        .collect();
    let mut hold_rng = rng::stream(cfg.seed, 1);
    let hold_x = rng::uniform_points(&mut hold_rng, cfg.holdout, cfg.d, 0.0, 1.0);
    let hold_y: Vec<f64> = hold_x.iter().map(|x| f0(x)).collect();

    let mut init_rng = rng::stream(cfg.seed, 2);
    let mut net = random_dense_net(&arch_dims(cfg.d, cfg.width, cfg.depth, 1), &mut init_rng)?;
    if let Budget::Constraint(k) = cfg.budget {
        net = kappa_project(&net, k)?;
    }
    let mut order_rng = rng::stream(cfg.seed, 3);
    let mut order: Vec<usize> = (0..cfg.n).collect();
    let mut step = 0usize;
    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut best = f64::INFINITY;
    let mut last = f64::NAN;
    let mut scratch = Scratch::default();
    let mut bx: Vec<Vec<f64>> = Vec::with_capacity(cfg.batch);
    let mut by: Vec<Vec<f64>> = Vec::with_capacity(cfg.batch);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut order_rng);
        for chunk in order.chunks(cfg.batch) {
            bx.clear();
            by.clear();
            bx.extend(chunk.iter().map(|&i| xs[i].clone()));
            by.extend(chunk.iter().map(|&i| ys[i].clone()));
            let (value, grad) = backprop(&net, Loss::Squared { xs: &bx, ys: &by })?;
            if !value.is_finite() || value > DIVERGENCE_LOSS {
                return Err(Error::Divergence { epoch, loss: value });
            }
            let lr = lr_at(cfg.lr, cfg.t0, step);
            apply_step(&mut net, &grad, lr);
            if let Budget::Penalty(lambda) = cfg.budget {
                let penalty = kappa_penalty_grad(&net, false);
                shrink_step(&mut net, &penalty, lr * lambda);
            }
            if let Budget::Constraint(k) = cfg.budget {
                net = kappa_project(&net, k)?;
            }
            step += 1;
        }
        let loss = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (net.eval_scalar(x, &mut scratch) - y[0]).powi(2))
            .sum::<f64>()
            / cfg.n as f64;
        if !loss.is_finite() || loss > DIVERGENCE_LOSS {
            return Err(Error::Divergence { epoch, loss });
        }
        let objective = match cfg.budget {
            Budget::Penalty(lambda) => loss + lambda * kappa(&net).kappa,
            Budget::Constraint(_) => loss,
        };
        best = best.min(objective);
        last = objective;
        let mse = hold_x
            .iter()
            .zip(&hold_y)
            .map(|(x, y)| (clip1(net.eval_scalar(x, &mut scratch)) - y).powi(2))
            .sum::<f64>()
            / cfg.holdout as f64;
        epochs.push(EpochRecord {
            epoch,
            loss,
            kappa: kappa(&net).kappa,
            heldout_l2: Some(mse.sqrt()),
            ipm_penalized: None,
            ipm_surrogate: None,
            lipschitz: None,
        });
    }
    Ok(TrainReport {
        epochs,
        net,
        generator: None,
        best_loss: best,
        opt_gap: if last.is_finite() { last - best } else { 0.0 },
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct IpmEstimate {
    /// Best objective seen during ascent, starting from the zero witness.
    /// A lower bound on the (penalized) IPM over the architecture.
    pub value: f64,
    pub steps_to_best: usize,
    pub witness: ReluNet,
}

/// Value of the inner objective for a witness `net`.
fn inner_objective(net: &ReluNet, mu: &[Vec<f64>], nu: &[Vec<f64>], budget: Budget) -> f64 {
    let mut scratch = Scratch::default();
    let mean = |s: &[Vec<f64>], scratch: &mut Scratch| {
        s.iter().map(|x| net.eval_scalar(x, scratch)).sum::<f64>() / s.len() as f64
    };
    let gap = mean(mu, &mut scratch) - mean(nu, &mut scratch);
    match budget {
        Budget::Constraint(_) => gap,
        Budget::Penalty(lambda) => gap - lambda * kappa(net).kappa.powi(2),
    }
}

/// One ascent step on `E_mu f - E_nu f` (minus `lambda kappa^2`).
fn ascent_step(net: &mut ReluNet, mu: &[Vec<f64>], nu: &[Vec<f64>], budget: Budget, lr: f64) -> Result<()> {
    let (_, mut grad) = backprop(net, Loss::LinearWitness { a: mu, b: nu })?;
    grad.scale(-1.0);
    apply_step(net, &grad, lr);
    if let Budget::Penalty(lambda) = budget {
        let penalty = kappa_penalty_grad(net, true);
        shrink_step(net, &penalty, lr * lambda);
    }
    if let Budget::Constraint(k) = budget {
        *net = kappa_project(net, k)?;
    }
    Ok(())
}

/// Inner maximization of the (penalized) IPM over one architecture.
pub fn ipm_estimate(
    dims: &[usize],
    budget: Budget,
    samples_mu: &[Vec<f64>],
    samples_nu: &[Vec<f64>],
    inner_steps: usize,
    lr: f64,
    seed: u64,
) -> Result<IpmEstimate> {
    if samples_mu.is_empty() || samples_nu.is_empty() {
        return Err(Error::Empty("sample set"));
    }
    budget.validate()?;
    let mut net = random_dense_net(dims, &mut rng::stream(seed, 0))?;
    if let Budget::Constraint(k) = budget {
        net = kappa_project(&net, k)?;
    }
    let mut best_net = net.clone();
    best_net.layers_mut().last_mut().unwrap().weights.scale(0.0);
    let mut best = 0.0;
    let mut steps_to_best = 0;
    for step in 0..inner_steps {
        ascent_step(&mut net, samples_mu, samples_nu, budget, lr_at(lr, 100.0, step))?;
        let value = inner_objective(&net, samples_mu, samples_nu, budget);
        if value > best {
            best = value;
            best_net = net.clone();
            steps_to_best = step + 1;
        }
    }
    Ok(IpmEstimate {
        value: best,
        steps_to_best,
        witness: best_net,
    })
}

/// Checks `sup_{a >= 0} (a D - lambda a^2) = max(D, 0)^2 / (4 lambda)` for
/// `D = E_mu f - E_nu f` with the witness rescaled to `kappa = 1`. The
/// left side is found by golden-section search.
pub fn scaling_identity_check(
    disc: &ReluNet,
    samples_mu: &[Vec<f64>],
    samples_nu: &[Vec<f64>],
    lambda: f64,
) -> Result<(f64, f64)> {
    if !(lambda > 0.0) {
        return Err(Error::param("lambda", "must be positive"));
    }
    if samples_mu.is_empty() || samples_nu.is_empty() {
        return Err(Error::Empty("sample set"));
    }
    check_dim("witness output", 1, disc.output_dim())?;
    let mut unit = rescale(disc);
    let kap = kappa(&unit).kappa;
    let delta = if kap > 0.0 {
        let depth = unit.depth();
        unit.layers_mut()[depth].weights.scale(1.0 / kap);
        inner_objective(&unit, samples_mu, samples_nu, Budget::Constraint(1.0))
    } else {
        0.0
    };
    Ok(scaling_identity(delta, lambda))
}

/// `(sup_{a >= 0} (a delta - lambda a^2), max(delta, 0)^2 / (4 lambda))`.
pub fn scaling_identity(delta: f64, lambda: f64) -> (f64, f64) {
    let objective = |a: f64| a * delta - lambda * a * a;
    let (mut lo, mut hi) = (0.0f64, 2.0 * delta.max(0.0) / lambda + 1.0);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - ratio * (hi - lo);
    let mut e = lo + ratio * (hi - lo);
    let (mut fc, mut fe) = (objective(c), objective(e));
    for _ in 0..400 {
        if hi - lo <= 1e-15 * hi.max(1e-300) {
            break;
        }
        if fc >= fe {
            hi = e;
            e = c;
            fe = fc;
            c = hi - ratio * (hi - lo);
            fc = objective(c);
        } else {
            lo = c;
            c = e;
            fc = fe;
            e = lo + ratio * (hi - lo);
            fe = objective(e);
        }
    }
    let lhs = [objective(0.0), objective(lo), objective(hi), fc, fe]
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    let rhs = delta.max(0.0).powi(2) / (4.0 * lambda);
    (lhs, rhs)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GanConfig {
    /// Data dimension.
    pub d: usize,
    /// Latent dimension; the source is uniform on `[0,1]^k`.
    pub latent: usize,
    pub gen_width: usize,
    pub gen_depth: usize,
    pub disc_width: usize,
    pub disc_depth: usize,
    pub budget: Budget,
    pub outer_steps: usize,
    pub inner_steps: usize,
    pub gen_lr: f64,
    pub disc_lr: f64,
    #[serde(default = "default_t0")]
    pub t0: f64,
    /// Number of target samples.
    pub n: usize,
    /// Generated samples per step.
    pub batch: usize,
    /// Seed of the planted generator defining the target.
    pub planted_seed: u64,
    pub seed: u64,
    /// Outer steps between logged checkpoints.
    #[serde(default = "default_log_every")]
    pub log_every: usize,
}

fn default_log_every() -> usize {
    10
}

impl GanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.latent == 0 || self.gen_width == 0 || self.disc_width == 0 {
            return Err(Error::param("dims", "must be positive"));
        }
        if self.n == 0 || self.batch == 0 || self.log_every == 0 {
            return Err(Error::param("n/batch/log_every", "must be positive"));
        }
        if !(self.gen_lr > 0.0 && self.disc_lr > 0.0 && self.t0 > 0.0) {
            return Err(Error::param("lr", "learning rates and t0 must be positive"));
        }
        self.budget.validate()
    }
}

/// Fixed family of 1-Lipschitz witnesses on `[0,1]^d`: coordinate ramps
/// `s(x_j - t)` and the diagonal ramps `s((x_i +- x_j)/2 - t)`.
pub fn witness_family(d: usize) -> Vec<(Vec<f64>, f64)> {
    let thresholds = [-1.0, 0.0, 0.25, 0.5, 0.75];
    let mut out = Vec::new();
    for j in 0..d {
        for &t in &thresholds {
            let mut w = vec![0.0; d];
            w[j] = 1.0;
            out.push((w.clone(), t));
            out.push((w.iter().map(|v| -v).collect(), -t - 1.0));
        }
    }
    for i in 0..d {
        for j in i + 1..d {
            for sign in [1.0, -1.0] {
                for &t in &thresholds {
                    let mut w = vec![0.0; d];
                    w[i] = 0.5;
                    w[j] = 0.5 * sign;
                    out.push((w, t));
                }
            }
        }
    }
    out
}

/// `max_f |E_a f - E_b f|` over [`witness_family`]; a surrogate for an
/// IPM over Hölder or Lipschitz witnesses.
pub fn surrogate_ipm(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let d = a[0].len();
    witness_family(d)
        .iter()
        .map(|(w, t)| {
            let mean = |s: &[Vec<f64>]| {
                s.iter()
                    .map(|x| (x.iter().zip(w).map(|(u, v)| u * v).sum::<f64>() - t).max(0.0))
                    .sum::<f64>()
                    / s.len() as f64
            };
            (mean(a) - mean(b)).abs()
        })
        .fold(0.0, f64::max)
}

/// Planted generator: a random net from `[0,1]^latent` to `R^d` with
/// `kappa = 1`.
pub fn planted_generator(cfg: &GanConfig) -> Result<ReluNet> {
    planted_net(cfg.latent, cfg.gen_width, cfg.gen_depth, cfg.d, 1.0, cfg.planted_seed)
}

fn push_forward(generator: &ReluNet, zs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut scratch = Scratch::default();
    zs.iter()
        .map(|z| generator.eval_with(z, &mut scratch).to_vec())
        .collect()
}

/// Alternating penalized-IPM training. The discriminator is re-trained for
/// `inner_steps` per outer step; the generator takes one descent step on
/// `-E f(g(z))`. Checkpoints log the penalized objective, the discriminator
/// `kappa` and Lipschitz probe, and the witness-family surrogate IPM
/// between the target samples and the generator on the same latent draws.
pub fn train_gan(cfg: &GanConfig) -> Result<TrainReport> {
    cfg.validate()?;
    let planted = planted_generator(cfg)?;
    let mut data_rng = rng::stream(cfg.seed, 0);
    let z_target = rng::uniform_points(&mut data_rng, cfg.n, cfg.latent, 0.0, 1.0);
    let target = push_forward(&planted, &z_target);

    let mut gen = random_dense_net(
        &arch_dims(cfg.latent, cfg.gen_width, cfg.gen_depth, cfg.d),
        &mut rng::stream(cfg.seed, 1),
    )?;
    let disc_dims = arch_dims(cfg.d, cfg.disc_width, cfg.disc_depth, 1);
    let mut disc = random_dense_net(&disc_dims, &mut rng::stream(cfg.seed, 2))?;
    if let Budget::Constraint(k) = cfg.budget {
        disc = kappa_project(&disc, k)?;
    }
    let mut z_rng = rng::stream(cfg.seed, 3);
    let mut probe_rng = rng::stream(cfg.seed, 4);
    let mut epochs = Vec::new();
    let mut best = f64::INFINITY;
    let mut last = f64::NAN;
    let mut inner_step = 0usize;
    for outer in 0..=cfg.outer_steps {
        let zs = rng::uniform_points(&mut z_rng, cfg.batch, cfg.latent, 0.0, 1.0);
        let fake = push_forward(&gen, &zs);
        let idx: Vec<usize> = (0..cfg.batch).map(|_| z_rng.random_range(0..cfg.n)).collect();
        let real: Vec<Vec<f64>> = idx.iter().map(|&i| target[i].clone()).collect();
        for _ in 0..cfg.inner_steps {
            ascent_step(&mut disc, &real, &fake, cfg.budget, lr_at(cfg.disc_lr, cfg.t0, inner_step))?;
            inner_step += 1;
        }
        let objective = inner_objective(&disc, &target, &push_forward(&gen, &z_target), cfg.budget);
        if !objective.is_finite() || objective.abs() > DIVERGENCE_LOSS {
            return Err(Error::Divergence {
                epoch: outer,
                loss: objective,
            });
        }
        if outer % cfg.log_every == 0 || outer == cfg.outer_steps {
            let generated = push_forward(&gen, &z_target);
            let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..64)
                .map(|_| {
                    let x: Vec<f64> = (0..cfg.d).map(|_| probe_rng.random_range(-0.5..1.5)).collect();
                    let y: Vec<f64> = x.iter().map(|v| v + probe_rng.random_range(-0.1..0.1)).collect();
                    (x, y)
                })
                .collect();
            epochs.push(EpochRecord {
                epoch: outer,
                loss: objective,
                kappa: kappa(&disc).kappa,
                heldout_l2: None,
                ipm_penalized: Some(objective),
                ipm_surrogate: Some(surrogate_ipm(&target, &generated)),
                lipschitz: Some(lipschitz_probe(&disc, &pairs)?),
            });
            best = best.min(objective);
            last = objective;
        }
        if outer == cfg.outer_steps {
            break;
        }
        // Generator step: minimize -E f(g(z)).
        let mut grad = Gradients::zeros_like(&gen);
        let scale = -1.0 / cfg.batch as f64;
        for z in &zs {
            let x = gen.eval(z)?;
            let mut dgrad = Gradients::zeros_like(&disc);
            let dx = accumulate(&disc, &x, &[scale], &mut dgrad, true).unwrap();
            accumulate(&gen, z, &dx, &mut grad, false);
        }
        apply_step(&mut gen, &grad, lr_at(cfg.gen_lr, cfg.t0, outer));
    }
    Ok(TrainReport {
        epochs,
        net: disc,
        generator: Some(gen),
        best_loss: best,
        opt_gap: if last.is_finite() { last - best } else { 0.0 },
    })
}
