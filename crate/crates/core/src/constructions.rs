//! Explicit approximating networks with stated budgets and error bounds.
//!
//! All emitted nets are neuron-normalized (hidden rows of norm one, scale
//! carried to the output layer), which is the parameterization under which
//! the stated budgets hold.

use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{compose, concat_all, lincomb_all, precompose_affine};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::net::{kappa, normalize_neurons, truncate, AffineLayer, ReluNet};
use crate::probes;

/// Default cap on stored weights plus biases of a Taylor net.
pub const DEFAULT_MEMORY_CAP: usize = 2_000_000;

pub type TargetFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// Partial derivative `d^s f (x)`; returns an error message on failure.
pub type DerivFn = Arc<dyn Fn(&[usize], &[f64]) -> std::result::Result<f64, String> + Send + Sync>;

/// A target on `[0,1]^d` with smoothness `alpha = r + beta`.
#[derive(Clone)]
pub struct HolderSpec {
    pub d: usize,
    pub alpha: f64,
    pub f: TargetFn,
    pub deriv: DerivFn,
    /// Lipschitz constant of `f` w.r.t. the sup-norm, if known. Used for
    /// rigorous grid brackets.
    pub lipschitz: Option<f64>,
}

impl fmt::Debug for HolderSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HolderSpec")
            .field("d", &self.d)
            .field("alpha", &self.alpha)
            .field("lipschitz", &self.lipschitz)
            .finish_non_exhaustive()
    }
}

impl HolderSpec {
    pub fn new(d: usize, alpha: f64, f: TargetFn, deriv: DerivFn) -> Result<Self> {
        if d == 0 {
            return Err(Error::param("d", "dimension must be at least 1"));
        }
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::param("alpha", format!("must be positive, got {alpha}")));
        }
        Ok(HolderSpec {
            d,
            alpha,
            f,
            deriv,
            lipschitz: None,
        })
    }

    pub fn with_lipschitz(mut self, lip: f64) -> Self {
        self.lipschitz = Some(lip);
        self
    }

    /// Integer part `r`: the largest integer strictly below `alpha`.
    pub fn r(&self) -> usize {
        smoothness_order(self.alpha)
    }

    pub fn beta(&self) -> f64 {
        self.alpha - self.r() as f64
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

pub(crate) fn smoothness_order(alpha: f64) -> usize {
    (alpha.ceil() - 1.0).max(0.0) as usize
}

/// All multi-indices `s` in `d` variables with `|s|_1 <= r`, graded by
/// order, lexicographic within an order.
pub fn multi_indices(d: usize, r: usize) -> Vec<Vec<usize>> {
    fn rec(d: usize, left: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == d {
            if left == 0 {
                out.push(prefix.clone());
            }
            return;
        }
        for v in (0..=left).rev() {
            prefix.push(v);
            rec(d, left - v, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    for order in 0..=r {
        rec(d, order, &mut Vec::with_capacity(d), &mut out);
    }
    out
}

#[derive(Clone, Debug)]
pub struct ApproxCertificate {
    pub net: ReluNet,
    pub width: usize,
    pub depth: usize,
    pub kappa_stated: f64,
    pub error_bound: f64,
    /// Grid resolution of the partition of unity, when there is one.
    pub n: Option<usize>,
    pub k: usize,
}

/// Serializable view of a certificate plus measured quantities.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CertificateReport {
    pub width_stated: usize,
    pub depth_stated: usize,
    pub kappa_stated: f64,
    pub error_bound: f64,
    #[serde(rename = "N")]
    pub n: Option<usize>,
    pub k: usize,
    pub width: usize,
    pub depth: usize,
    pub kappa: f64,
    pub grid_points: usize,
    pub grid_sup_error: Option<f64>,
    /// Rigorous upper bound on the sup error over the whole domain, when
    /// the grid has a known covering radius.
    pub sup_error_upper: Option<f64>,
    pub holds: Option<bool>,
}

impl ApproxCertificate {
    pub fn report(&self) -> CertificateReport {
        CertificateReport {
            width_stated: self.width,
            depth_stated: self.depth,
            kappa_stated: self.kappa_stated,
            error_bound: self.error_bound,
            n: self.n,
            k: self.k,
            width: self.net.width(),
            depth: self.net.depth(),
            kappa: kappa(&self.net).kappa,
            grid_points: 0,
            grid_sup_error: None,
            sup_error_upper: None,
            holds: None,
        }
    }

    /// Measures the sup error on `grid` and checks every stated bound.
    pub fn certify(
        &self,
        f: &(dyn Fn(&[f64]) -> f64 + Sync),
        f_lipschitz: Option<f64>,
        grid: &GridSpec,
    ) -> Result<CertificateReport> {
        let mut rep = self.report();
        let err = probes::sup_error(&self.net, f, grid)?;
        rep.grid_points = grid.len();
        rep.grid_sup_error = Some(err);
        rep.sup_error_upper = match (grid.covering_radius(), f_lipschitz) {
            (Some(h), Some(lf)) => Some(err + h * (rep.kappa + lf)),
            _ => None,
        };
        rep.holds = Some(
            err <= self.error_bound
                && rep.kappa <= self.kappa_stated * (1.0 + 1e-9)
                && rep.width <= self.width
                && rep.depth <= self.depth,
        );
        Ok(rep)
    }
}

/// Evaluation grids for sup-error measurements.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum GridSpec {
    /// Tensor grid with `per_dim` points per axis, endpoints included.
    Uniform {
        d: usize,
        lo: f64,
        hi: f64,
        per_dim: usize,
    },
    /// Latin hypercube sample of `n` points.
    Latin {
        d: usize,
        lo: f64,
        hi: f64,
        n: usize,
        seed: u64,
    },
}

impl GridSpec {
    /// 10^5 points on a line, 512^2 in the plane, a 10^5-point Latin
    /// hypercube above.
    pub fn default_for(d: usize, lo: f64, hi: f64) -> Self {
        match d {
            1 => GridSpec::Uniform {
                d,
                lo,
                hi,
                per_dim: 100_000,
            },
            2 => GridSpec::Uniform {
                d,
                lo,
                hi,
                per_dim: 512,
            },
            _ => GridSpec::Latin {
                d,
                lo,
                hi,
                n: 100_000,
                seed: 0,
            },
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            GridSpec::Uniform { d, .. } | GridSpec::Latin { d, .. } => *d,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            GridSpec::Uniform { d, per_dim, .. } => per_dim.saturating_pow(*d as u32),
            GridSpec::Latin { n, .. } => *n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every point of the domain lies within this sup-distance of a grid
    /// point (tensor grids only).
    pub fn covering_radius(&self) -> Option<f64> {
        match self {
            GridSpec::Uniform { lo, hi, per_dim, .. } if *per_dim >= 2 => {
                Some(0.5 * (hi - lo) / (*per_dim - 1) as f64)
            }
            _ => None,
        }
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        match *self {
            GridSpec::Uniform { d, lo, hi, per_dim } => {
                let step = if per_dim > 1 {
                    (hi - lo) / (per_dim - 1) as f64
                } else {
                    0.0
                };
                (0..self.len())
                    .map(|mut idx| {
                        (0..d)
                            .map(|_| {
                                let i = idx % per_dim;
                                idx /= per_dim;
                                if i + 1 == per_dim && per_dim > 1 {
                                    hi
                                } else {
                                    lo + step * i as f64
                                }
                            })
                            .collect()
                    })
                    .collect()
            }
            GridSpec::Latin { d, lo, hi, n, seed } => {
                let mut rng = crate::rng::stream(seed, 0);
                let mut cols: Vec<Vec<f64>> = Vec::with_capacity(d);
                for _ in 0..d {
                    let mut perm: Vec<usize> = (0..n).collect();
                    perm.shuffle(&mut rng);
                    cols.push(
                        perm.into_iter()
                            .map(|p| {
                                let u: f64 = rng.random();
                                lo + (hi - lo) * (p as f64 + u) / n as f64
                            })
                            .collect(),
                    );
                }
                (0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect()
            }
        }
    }
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        Err(Error::param("k", "must be at least 1"))
    } else {
        Ok(())
    }
}

/// Riemann-sum approximation of `x^2` on `[0,1]`, zero for `x <= 0`.
pub fn build_square(k: usize) -> Result<ApproxCertificate> {
    check_k(k)?;
    let kf = k as f64;
    let w = Matrix::from_dense(k, 1, &vec![1.0; k]);
    let b = (1..=k).map(|i| -((2 * i - 1) as f64) / (2.0 * kf)).collect();
    let out = Matrix::from_dense(1, k, &vec![2.0 / kf; k]);
    let net = normalize_neurons(&ReluNet::shallow(w, b, out)?);
    Ok(ApproxCertificate {
        net,
        width: k,
        depth: 1,
        kappa_stated: 3.0,
        error_bound: 1.0 / (2.0 * kf * kf),
        n: None,
        k,
    })
}

/// Approximate product on `[-1,1]^2`, clipped to `[-1,1]`.
pub fn build_product(k: usize) -> Result<ApproxCertificate> {
    check_k(k)?;
    let sq = build_square(k)?.net;
    let neg = Matrix::from_dense(1, 1, &[-1.0]);
    let even_sq = crate::algebra::lincomb(1.0, &sq, 1.0, &precompose_affine(&sq, &neg, &[0.0])?)?;
    let halves = |a: f64, b: f64| precompose_affine(&even_sq, &Matrix::from_dense(1, 2, &[a, b]), &[0.0]);
    let raw = lincomb_all(&[
        (2.0, &halves(0.5, 0.5)?),
        (-2.0, &halves(0.5, 0.0)?),
        (-2.0, &halves(0.0, 0.5)?),
    ])?;
    let net = normalize_neurons(&truncate(&raw, 1.0)?);
    let kf = k as f64;
    Ok(ApproxCertificate {
        net,
        width: 6 * k,
        depth: 2,
        kappa_stated: 216.0,
        error_bound: 3.0 / (kf * kf),
        n: None,
        k,
    })
}

fn ceil_log2(d: usize) -> u32 {
    d.next_power_of_two().trailing_zeros()
}

/// Approximate `x_1 ... x_d` on `[-1,1]^d` by a binary tree of products;
/// unused leaves read the constant one.
pub fn build_monomial(d: usize, k: usize) -> Result<ApproxCertificate> {
    if d < 2 {
        return Err(Error::param("d", "monomial needs at least 2 factors"));
    }
    check_k(k)?;
    let levels = ceil_log2(d);
    let product = build_product(k)?.net;
    let mut tree = product.clone();
    for level in 1..levels {
        let half = 1usize << level;
        let left = Matrix::selection(2 * half, &(0..half).collect::<Vec<_>>())?;
        let right = Matrix::selection(2 * half, &(half..2 * half).collect::<Vec<_>>())?;
        let zero = vec![0.0; half];
        let pair = concat_all(&[
            &precompose_affine(&tree, &left, &zero)?,
            &precompose_affine(&tree, &right, &zero)?,
        ])?;
        tree = compose(&product, &pair)?;
    }
    let leaves = 1usize << levels;
    let embed = Matrix::from_sparse_rows(
        d,
        (0..leaves)
            .map(|i| if i < d { vec![(i, 1.0)] } else { Vec::new() })
            .collect(),
    );
    let ones: Vec<f64> = (0..leaves).map(|i| if i < d { 0.0 } else { 1.0 }).collect();
    let net = normalize_neurons(&precompose_affine(&tree, &embed, &ones)?);
    let kf = k as f64;
    Ok(ApproxCertificate {
        net,
        width: 6 * d * k,
        depth: 2 * levels as usize,
        kappa_stated: 6f64.powi(3 * levels as i32),
        error_bound: 6.0 * d as f64 / (kf * kf),
        n: None,
        k,
    })
}

/// Hat `t -> max(1 - |t|, 0)` of the affine coordinate `scale * x_i - shift`,
/// as a depth-2 net on `R^d`.
fn hat_net(d: usize, i: usize, scale: f64, shift: f64) -> Result<ReluNet> {
    ReluNet::new(vec![
        AffineLayer::hidden(
            Matrix::from_sparse_rows(d, vec![vec![(i, scale)], vec![(i, -scale)]]),
            vec![-shift, shift],
        ),
        AffineLayer::hidden(Matrix::from_dense(1, 2, &[-1.0, -1.0]), vec![1.0]),
        AffineLayer::output(Matrix::from_dense(1, 1, &[1.0])),
    ])
}

/// `x -> x_i - c` as `s(x_i - c) - s(c - x_i)`, padded to depth 2.
fn offset_net(d: usize, i: usize, c: f64) -> Result<ReluNet> {
    ReluNet::new(vec![
        AffineLayer::hidden(
            Matrix::from_sparse_rows(d, vec![vec![(i, 1.0)], vec![(i, -1.0)]]),
            vec![-c, c],
        ),
        AffineLayer::hidden(Matrix::identity(2), vec![0.0, 0.0]),
        AffineLayer::output(Matrix::from_dense(1, 2, &[1.0, -1.0])),
    ])
}

fn check_index(n_grid: usize, index: &[usize]) -> Result<()> {
    if n_grid == 0 {
        return Err(Error::param("N", "must be at least 1"));
    }
    if let Some(&bad) = index.iter().find(|&&v| v > n_grid) {
        return Err(Error::param(
            "n",
            format!("multi-index entry {bad} outside 0..={n_grid}"),
        ));
    }
    Ok(())
}

/// The `d` hat factors `psi(N x_i - n_i)` of the partition-of-unity
/// function centred at `n / N`; their product is `psi_n`.
pub fn build_partition(n_grid: usize, d: usize, index: &[usize]) -> Result<ReluNet> {
    crate::error::check_dim("partition multi-index", d, index.len())?;
    check_index(n_grid, index)?;
    let hats = (0..d)
        .map(|i| hat_net(d, i, n_grid as f64, index[i] as f64))
        .collect::<Result<Vec<_>>>()?;
    concat_all(&hats.iter().collect::<Vec<_>>())
}

/// Stated `(W, L, K, error)` of the Taylor construction.
pub fn taylor_budget(d: usize, alpha: f64, n_grid: usize, k: usize) -> (f64, usize, f64, f64) {
    let r = smoothness_order(alpha);
    let (df, rf, nf, kf) = (d as f64, r as f64, n_grid as f64, k as f64);
    let levels = ceil_log2(d + r) as i32;
    let dr = df.powi(r as i32);
    let cells = (nf + 1.0).powi(d as i32);
    let width = 6.0 * (rf + 1.0) * (df + rf) * dr * cells * kf;
    let depth = 2 * levels as usize + 2;
    let kappa = 6f64.powi(3 * levels + 1) * (rf + 1.0) * dr * nf * cells;
    let error = 2f64.powi(d as i32) * dr * (nf.powf(-alpha) + 6.0 * (rf + 1.0) * (df + rf) / (kf * kf));
    (width, depth, kappa, error)
}

fn factorial(s: &[usize]) -> f64 {
    s.iter()
        .map(|&v| (1..=v).map(|i| i as f64).product::<f64>())
        .product()
}

/// Network approximating the local Taylor expansion of `spec.f` on a grid
/// of spacing `1/N`, with monomials of accuracy parameter `k`.
pub fn build_taylor_net(spec: &HolderSpec, n_grid: usize, k: usize) -> Result<ApproxCertificate> {
    build_taylor_net_capped(spec, n_grid, k, DEFAULT_MEMORY_CAP)
}

pub fn build_taylor_net_capped(
    spec: &HolderSpec,
    n_grid: usize,
    k: usize,
    memory_cap: usize,
) -> Result<ApproxCertificate> {
    check_k(k)?;
    if n_grid == 0 {
        return Err(Error::param("N", "must be at least 1"));
    }
    let d = spec.d;
    let r = spec.r();
    let orders = multi_indices(d, r);
    let cells_u = (n_grid as u128 + 1)
        .checked_pow(d as u32)
        .ok_or(Error::ResourceCap {
            what: "Taylor net cells",
            needed: u128::MAX,
            cap: memory_cap as u128,
        })?;
    let (width, depth, kappa_stated, error_bound) = taylor_budget(d, spec.alpha, n_grid, k);

    // One template per order, at the centre 0; only biases depend on n.
    let mut monomials: Vec<Option<ReluNet>> = vec![None; d + r + 1];
    for dim in d.max(2)..=d + r {
        monomials[dim] = Some(build_monomial(dim, k)?.net);
    }
    let term = |index: &[usize], s: &[usize]| -> Result<ReluNet> {
        let nf = n_grid as f64;
        let mut parts = Vec::with_capacity(d + r);
        for i in 0..d {
            parts.push(hat_net(d, i, nf, index[i] as f64)?);
        }
        for (i, &si) in s.iter().enumerate() {
            for _ in 0..si {
                parts.push(offset_net(d, i, index[i] as f64 / nf)?);
            }
        }
        let stage = concat_all(&parts.iter().collect::<Vec<_>>())?;
        match &monomials[parts.len()] {
            Some(m) if parts.len() >= 2 => compose(m, &stage),
            _ => Ok(stage),
        }
    };

    // Resource estimate from the templates before building everything.
    let centre = vec![0; d];
    let mut needed: u128 = 0;
    for s in &orders {
        let t = term(&centre, s)?;
        let pad = (depth - t.depth()) * 2 * t.layers()[0].out_dim();
        needed = needed.saturating_add(cells_u.saturating_mul((t.num_parameters() + pad) as u128));
    }
    if needed > memory_cap as u128 {
        return Err(Error::ResourceCap {
            what: "Taylor net weights",
            needed,
            cap: memory_cap as u128,
        });
    }
    let cells = cells_u as usize;

    let blocks: Vec<Vec<(f64, ReluNet)>> = (0..cells)
        .into_par_iter()
        .map(|flat| {
            let mut index = vec![0usize; d];
            let mut rem = flat;
            for v in index.iter_mut().rev() {
                *v = rem % (n_grid + 1);
                rem /= n_grid + 1;
            }
            let point: Vec<f64> = index.iter().map(|&v| v as f64 / n_grid as f64).collect();
            orders
                .iter()
                .map(|s| {
                    let value = (spec.deriv)(s, &point).map_err(|reason| Error::Oracle {
                        index: s.clone(),
                        reason,
                    })?;
                    if !value.is_finite() {
                        return Err(Error::Oracle {
                            index: s.clone(),
                            reason: format!("non-finite value {value} at {point:?}"),
                        });
                    }
                    Ok((value / factorial(s), term(&index, s)?))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let terms: Vec<(f64, &ReluNet)> = blocks.iter().flatten().map(|(c, n)| (*c, n)).collect();
    let net = normalize_neurons(&lincomb_all(&terms)?);
    Ok(ApproxCertificate {
        net,
        width: width.round() as usize,
        depth,
        kappa_stated,
        error_bound,
        n: Some(n_grid),
        k,
    })
}

/// `N = ceil(k^(2/alpha))`, robust to rounding just above an integer.
pub fn grid_for(k: usize, alpha: f64) -> usize {
    let v = (k as f64).powf(2.0 / alpha);
    let c = v.ceil();
    if c - v > 1.0 - 1e-9 * v.max(1.0) {
        (c - 1.0).max(1.0) as usize
    } else {
        c.max(1.0) as usize
    }
}

/// Largest `k` whose stated budget with `N = ceil(k^(2/alpha))` is within
/// `k_target`; returns `(k, N, stated kappa)`.
pub fn select_resolution(d: usize, alpha: f64, k_target: f64) -> Result<(usize, usize, f64)> {
    if !(k_target >= 1.0) {
        return Err(Error::param("K_target", format!("must be at least 1, got {k_target}")));
    }
    let stated = |k: usize| {
        let n = grid_for(k, alpha);
        (n, taylor_budget(d, alpha, n, k).2)
    };
    if stated(1).1 > k_target {
        return Err(Error::Infeasible(format!(
            "budget {k_target} is below the smallest construction budget {}",
            stated(1).1
        )));
    }
    let mut lo = 1usize;
    let mut hi = 2usize;
    while stated(hi).1 <= k_target {
        lo = hi;
        hi = hi.checked_mul(2).ok_or_else(|| Error::Infeasible("budget too large".into()))?;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if stated(mid).1 <= k_target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (n, kap) = stated(lo);
    Ok((lo, n, kap))
}

/// Taylor net with the finest resolution affordable under `k_target`.
pub fn build_approximant(spec: &HolderSpec, k_target: f64) -> Result<ApproxCertificate> {
    let (k, n, _) = select_resolution(spec.d, spec.alpha, k_target)?;
    build_taylor_net(spec, n, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_examples() {
        let c = build_square(4).unwrap();
        assert_eq!(c.net.eval(&[-0.3]).unwrap(), vec![0.0]);
        assert!((build_square(1).unwrap().net.eval(&[1.0]).unwrap()[0] - 1.0).abs() < 1e-15);
        assert!((build_square(2).unwrap().net.eval(&[0.75]).unwrap()[0] - 0.5).abs() < 1e-15);
        assert!((kappa(&c.net).kappa - 3.0).abs() < 1e-12);
        assert!(build_square(0).is_err());
    }

    #[test]
    fn multi_index_counts() {
        assert_eq!(multi_indices(2, 1), vec![vec![0, 0], vec![1, 0], vec![0, 1]]);
        assert_eq!(multi_indices(3, 2).len(), 10);
        assert_eq!(multi_indices(1, 0), vec![vec![0]]);
    }

    #[test]
    fn stated_width_example() {
        let (w, l, _, _) = taylor_budget(2, 2.0, 4, 8);
        assert_eq!(w, 14400.0);
        assert_eq!(l, 6);
    }

    #[test]
    fn smoothness_split() {
        assert_eq!(smoothness_order(1.0), 0);
        assert_eq!(smoothness_order(2.0), 1);
        assert_eq!(smoothness_order(1.5), 1);
        assert_eq!(smoothness_order(0.3), 0);
    }

    #[test]
    fn grid_rounding() {
        assert_eq!(grid_for(4, 1.0), 16);
        assert_eq!(grid_for(3, 2.0), 3);
        assert_eq!(grid_for(2, 4.0), 2);
        assert_eq!(grid_for(1, 0.5), 1);
    }
}
