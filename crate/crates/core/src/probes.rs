//! Complexity and lower-bound probes: the sampling metric `rho2`, greedy
//! sign packings, the bump class, Rademacher estimates for the linear
//! subclass, the nearest-neighbour Wasserstein probe, and the closed-form
//! bound evaluators.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constructions::GridSpec;
use crate::error::{check_dim, Error, Result};
use crate::net::{ReluNet, Scratch};
use crate::rng;

/// `m^{-1/2} ||x - y||_2`.
pub fn rho2(x: &[f64], y: &[f64]) -> Result<f64> {
    check_dim("rho2", x.len(), y.len())?;
    if x.is_empty() {
        return Err(Error::Empty("vector"));
    }
    let ss: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((ss / x.len() as f64).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignPack {
    pub m: usize,
    pub vectors: Vec<Vec<i8>>,
    pub min_hamming: usize,
}

pub const MAX_PACKING_LENGTH: usize = 24;

fn next_same_weight(v: u32) -> u32 {
    let t = v | (v - 1);
    (t + 1) | (((!t & (!t).wrapping_neg()) - 1) >> (v.trailing_zeros() + 1))
}

/// Calls `f` on every `m`-bit mask of Hamming weight `w` (`w >= 1`);
/// stops early when `f` returns `true`.
fn any_mask_of_weight(m: usize, w: usize, mut f: impl FnMut(u32) -> bool) -> bool {
    if w == 0 || w > m {
        return false;
    }
    let limit = 1u64 << m;
    let mut v: u32 = (1u32 << w) - 1;
    loop {
        if f(v) {
            return true;
        }
        if w == m {
            return false;
        }
        let next = next_same_weight(v);
        if next as u64 >= limit || next <= v {
            return false;
        }
        v = next;
    }
}

/// Greedy packing of `{-1, +1}^m` with pairwise Hamming distance greater
/// than `floor(m/8)`.
///
/// Candidates are visited in increasing order of their bit pattern (bit
/// `j` set means entry `j` is `-1`); a candidate is kept if no kept vector
/// lies within the exclusion radius.
pub fn greedy_sign_packing(m: usize) -> Result<SignPack> {
    if !(8..=MAX_PACKING_LENGTH).contains(&m) {
        return Err(Error::param(
            "m",
            format!("supported range is 8..={MAX_PACKING_LENGTH}, got {m}"),
        ));
    }
    let radius = m / 8;
    let total = 1usize << m;
    let mut covered = vec![0u64; total.div_ceil(64)];
    let mut member = vec![0u64; total.div_ceil(64)];
    let get = |bits: &[u64], i: usize| bits[i >> 6] >> (i & 63) & 1 == 1;
    let set = |bits: &mut [u64], i: usize| bits[i >> 6] |= 1 << (i & 63);
    let mut words: Vec<u32> = Vec::new();
    for c in 0..total {
        if get(&covered, c) {
            continue;
        }
        words.push(c as u32);
        set(&mut member, c);
        set(&mut covered, c);
        for w in 1..=radius {
            any_mask_of_weight(m, w, |mask| {
                set(&mut covered, c ^ mask as usize);
                false
            });
        }
    }
    // Smallest distance realised between two kept words, searched shell by
    // shell; also re-verifies the exclusion radius.
    let mut min_hamming = m + 1;
    for w in 1..=m {
        let hit = words.iter().any(|&c| {
            any_mask_of_weight(m, w, |mask| get(&member, (c ^ mask) as usize))
        });
        if hit {
            min_hamming = w;
            break;
        }
    }
    if min_hamming <= radius {
        return Err(Error::Infeasible(format!(
            "packing violates separation: distance {min_hamming}"
        )));
    }
    let vectors = words
        .iter()
        .map(|&c| (0..m).map(|j| if c >> j & 1 == 1 { -1 } else { 1 }).collect())
        .collect();
    Ok(SignPack {
        m,
        vectors,
        min_hamming,
    })
}

pub fn hamming(a: &[i8], b: &[i8]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// `g(t) = exp(1 - 1/(1 - t^2))` on `|t| < 1`, zero outside; `g(0) = 1`.
pub fn bump_1d(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - t * t)).exp()
    }
}

/// `psi(x) = prod_i g(4 x_i)`: `psi(0) = 1`, zero for `||x||_inf >= 1/4`.
pub fn bump(x: &[f64]) -> f64 {
    x.iter().map(|&v| bump_1d(4.0 * v)).product()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpClassSpec {
    pub d: usize,
    #[serde(rename = "N")]
    pub n_grid: usize,
    pub alpha: f64,
    pub c_psi_alpha: f64,
    /// Signs indexed by `{0..N-1}^d`, first coordinate most significant.
    pub signs: Vec<i8>,
}

impl BumpClassSpec {
    pub fn new(d: usize, n_grid: usize, alpha: f64, c_psi_alpha: f64, signs: Vec<i8>) -> Result<Self> {
        if d == 0 || n_grid == 0 {
            return Err(Error::param("d/N", "must be positive"));
        }
        if !(c_psi_alpha > 0.0) {
            return Err(Error::param("C_psi_alpha", "must be positive"));
        }
        let cells = n_grid
            .checked_pow(d as u32)
            .ok_or_else(|| Error::param("N", "grid too large"))?;
        check_dim("sign vector", cells, signs.len())?;
        if signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::param("signs", "entries must be +1 or -1"));
        }
        Ok(BumpClassSpec {
            d,
            n_grid,
            alpha,
            c_psi_alpha,
            signs,
        })
    }

    pub fn flat_index(&self, index: &[usize]) -> usize {
        index.iter().fold(0, |acc, &v| acc * self.n_grid + v)
    }
}

/// `h_a(x) = C N^{-alpha} sum_n a_n psi(N x - n)`. Supports are disjoint,
/// so only the nearest grid cell can contribute.
pub fn bump_eval(spec: &BumpClassSpec, x: &[f64]) -> Result<f64> {
    check_dim("bump input", spec.d, x.len())?;
    let nf = spec.n_grid as f64;
    let mut index = Vec::with_capacity(spec.d);
    let mut local = Vec::with_capacity(spec.d);
    for &v in x {
        let c = (nf * v).round();
        if c < 0.0 || c >= nf {
            return Ok(0.0);
        }
        index.push(c as usize);
        local.push(nf * v - c);
    }
    let psi = bump(&local);
    if psi == 0.0 {
        return Ok(0.0);
    }
    let a = spec.signs[spec.flat_index(&index)] as f64;
    Ok(spec.c_psi_alpha * nf.powf(-spec.alpha) * a * psi)
}

/// Numerical constant `C` with `C psi` in the unit Hölder ball of order
/// `alpha`: derivative sup-norms from tabulated finite differences and
/// Hölder quotients on sampled pairs, reciprocal of the largest, times 1/2.
pub fn estimate_c_psi_alpha(d: usize, alpha: f64, seed: u64) -> Result<f64> {
    if d == 0 || !(alpha > 0.0) {
        return Err(Error::param("d/alpha", "must be positive"));
    }
    let r = crate::constructions::smoothness_order(alpha);
    let beta = alpha - r as f64;
    // Tabulate g^(j)(t) for t in [-1, 1], j <= r.
    let m = 40_001usize;
    let h = 2.0 / (m - 1) as f64;
    let mut tables = vec![(0..m).map(|i| bump_1d(-1.0 + h * i as f64)).collect::<Vec<f64>>()];
    for _ in 0..r {
        let prev = tables.last().unwrap();
        let mut next = vec![0.0; m];
        for i in 1..m - 1 {
            next[i] = (prev[i + 1] - prev[i - 1]) / (2.0 * h);
        }
        tables.push(next);
    }
    let sups: Vec<f64> = tables
        .iter()
        .map(|t| t.iter().fold(0.0f64, |a, v| a.max(v.abs())))
        .collect();
    let lookup = |j: usize, t: f64| -> f64 {
        if t.abs() >= 1.0 {
            return 0.0;
        }
        let pos = (t + 1.0) / h;
        let i = (pos.floor() as usize).min(m - 2);
        let w = pos - i as f64;
        tables[j][i] * (1.0 - w) + tables[j][i + 1] * w
    };
    // d^s psi(x) = prod_i 4^{s_i} g^{(s_i)}(4 x_i).
    let deriv = |s: &[usize], x: &[f64]| -> f64 {
        s.iter()
            .zip(x)
            .map(|(&si, &xi)| 4f64.powi(si as i32) * lookup(si, 4.0 * xi))
            .product()
    };
    let mut worst = 0.0f64;
    for s in crate::constructions::multi_indices(d, r) {
        let sup: f64 = s.iter().map(|&si| 4f64.powi(si as i32) * sups[si]).product();
        worst = worst.max(sup);
    }
    let mut rng = rng::stream(seed, 0);
    let top: Vec<Vec<usize>> = crate::constructions::multi_indices(d, r)
        .into_iter()
        .filter(|s| s.iter().sum::<usize>() == r)
        .collect();
    for s in &top {
        for trial in 0..4000 {
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-0.25..0.25)).collect();
            let scale = 10f64.powi(-(trial % 5) as i32 - 1);
            let y: Vec<f64> = x
                .iter()
                .map(|&v| v + scale * rng.random_range(-1.0..1.0))
                .collect();
            let dist = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if dist == 0.0 {
                continue;
            }
            let q = (deriv(s, &x) - deriv(s, &y)).abs() / dist.powf(beta);
            worst = worst.max(q);
        }
    }
    Ok(0.5 / worst)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RademacherEstimate {
    pub n: usize,
    #[serde(rename = "K")]
    pub k: f64,
    pub trials: usize,
    pub mc_mean: f64,
    pub mc_stderr: f64,
    pub formula_lb: f64,
    pub formula_ub: f64,
}

impl RademacherEstimate {
    /// Whether the 3-sigma interval around the estimate meets the bracket.
    pub fn brackets(&self) -> bool {
        self.mc_mean + 3.0 * self.mc_stderr >= self.formula_lb
            && self.mc_mean - 3.0 * self.mc_stderr <= self.formula_ub
    }
}

pub(crate) fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Monte-Carlo estimate of the Rademacher complexity of the linear class
/// `{x -> a . (x, 1) : ||a||_1 <= K/2}` on `points`, whose per-draw
/// supremum is `(K/2) ||sum_i xi_i (x_i, 1)||_inf / n`. `depth` and
/// `bound` only enter the reported upper bound.
pub fn rademacher_linear_lb(
    points: &[Vec<f64>],
    k: f64,
    trials: usize,
    seed: u64,
    depth: usize,
    bound: f64,
) -> Result<RademacherEstimate> {
    let Some(first) = points.first() else {
        return Err(Error::Empty("point set"));
    };
    if !(k >= 0.0) || trials == 0 {
        return Err(Error::param("K/trials", "need K >= 0 and trials >= 1"));
    }
    let d = first.len();
    for p in points {
        check_dim("point dimension", d, p.len())?;
    }
    let n = points.len();
    let draws: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng::stream(seed, t as u64);
            let mut acc = vec![0.0; d + 1];
            for p in points {
                let xi = if rng.random::<bool>() { 1.0 } else { -1.0 };
                for (a, v) in acc.iter_mut().zip(p) {
                    *a += xi * v;
                }
                acc[d] += xi;
            }
            0.5 * k * acc.iter().fold(0.0f64, |m, v| m.max(v.abs())) / n as f64
        })
        .collect();
    let (mc_mean, mc_stderr) = mean_stderr(&draws);
    let col_norm = (0..=d)
        .map(|j| {
            points
                .iter()
                .map(|p| if j < d { p[j] * p[j] } else { 1.0 })
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max);
    let formula_lb = k / (2.0 * 2f64.sqrt() * n as f64) * col_norm;
    let (_, formula_ub) = rademacher_bound_formulas(n, d, k, depth, bound);
    Ok(RademacherEstimate {
        n,
        k,
        trials,
        mc_mean,
        mc_stderr,
        formula_lb,
        formula_ub,
    })
}

/// Point-free bracket `(K / (2 sqrt(2n)), B K sqrt(2(L + 2 + ln(d+1))) / sqrt(n))`.
pub fn rademacher_bound_formulas(n: usize, d: usize, k: f64, depth: usize, bound: f64) -> (f64, f64) {
    let nf = n as f64;
    let lb = k / (2.0 * (2.0 * nf).sqrt());
    let ub = bound * k * (2.0 * (depth as f64 + 2.0 + (d as f64 + 1.0).ln())).sqrt() / nf.sqrt();
    (lb, ub)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct W1Probe {
    pub estimate: f64,
    pub stderr: f64,
    pub formula_lb: f64,
}

/// `d (d+1)^{-1-1/d} n^{-1/d} / 2`.
pub fn w1_lower_bound(n: usize, d: usize) -> f64 {
    let df = d as f64;
    0.5 * df * (df + 1.0).powf(-1.0 - 1.0 / df) * (n as f64).powf(-1.0 / df)
}

/// Monte-Carlo mean of `min_i ||x_i - Y||_inf` for `Y` uniform on `[0,1]^d`.
pub fn w1_nn_probe(points: &[Vec<f64>], mc_samples: usize, seed: u64) -> Result<W1Probe> {
    let Some(first) = points.first() else {
        return Err(Error::Empty("point set"));
    };
    if mc_samples == 0 {
        return Err(Error::param("mc_samples", "must be at least 1"));
    }
    let d = first.len();
    for p in points {
        check_dim("point dimension", d, p.len())?;
    }
    const CHUNK: usize = 1024;
    let chunks = mc_samples.div_ceil(CHUNK);
    let values: Vec<f64> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = rng::stream(seed, c as u64);
            let count = CHUNK.min(mc_samples - c * CHUNK);
            let mut y = vec![0.0; d];
            (0..count)
                .map(|_| {
                    y.iter_mut().for_each(|v| *v = rng.random::<f64>());
                    points
                        .iter()
                        .map(|p| p.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                        .fold(f64::INFINITY, f64::min)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let (estimate, stderr) = mean_stderr(&values);
    Ok(W1Probe {
        estimate,
        stderr,
        formula_lb: w1_lower_bound(points.len(), d),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerBounds {
    /// `(K sqrt(L))^{-2 alpha / (d - 2 alpha)}`, the bare power term (the
    /// implied constant is not known).
    pub general_power_term: f64,
    /// `c_d (K sqrt(L + 2 + ln(d+1)))^{-2/(d-2)}` when `alpha = 1`, `d >= 3`.
    pub lipschitz_explicit: Option<f64>,
}

pub fn explicit_constant(d: usize) -> f64 {
    let df = d as f64;
    (df - 2.0) * 4f64.powf(-df / (df - 2.0)) * (df + 1.0).powf(-(df + 1.0) / (df - 2.0))
}

pub fn approx_lower_bound_formulas(d: usize, alpha: f64, k: f64, depth: usize) -> Result<LowerBounds> {
    if !(k >= 1.0) {
        return Err(Error::param("K", "must be at least 1"));
    }
    if depth < 1 {
        return Err(Error::param("L", "must be at least 1"));
    }
    let df = d as f64;
    if !(df > 2.0 * alpha) {
        return Err(Error::Regime(format!(
            "the lower bound needs d > 2 alpha, got d = {d}, alpha = {alpha}"
        )));
    }
    let lf = depth as f64;
    let general_power_term = (k * lf.sqrt()).powf(-2.0 * alpha / (df - 2.0 * alpha));
    let lipschitz_explicit = (alpha == 1.0 && d >= 3).then(|| {
        explicit_constant(d) * (k * (lf + 2.0 + (df + 1.0).ln()).sqrt()).powf(-2.0 / (df - 2.0))
    });
    Ok(LowerBounds {
        general_power_term,
        lipschitz_explicit,
    })
}

/// Largest `|f(x) - net(x)|` over the grid (first output of the net).
pub fn sup_error(net: &ReluNet, f: &(dyn Fn(&[f64]) -> f64 + Sync), grid: &GridSpec) -> Result<f64> {
    check_dim("grid dimension", net.input_dim(), grid.dim())?;
    if grid.is_empty() {
        return Err(Error::Empty("grid"));
    }
    sup_error_points(net, f, &grid.points())
}

pub fn sup_error_points(
    net: &ReluNet,
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    points: &[Vec<f64>],
) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::Empty("point set"));
    }
    for p in points {
        check_dim("grid point", net.input_dim(), p.len())?;
    }
    Ok(points
        .par_chunks(4096)
        .map(|chunk| {
            let mut scratch = Scratch::default();
            chunk
                .iter()
                .map(|p| (f(p) - net.eval_scalar(p, &mut scratch)).abs())
                .fold(0.0f64, f64::max)
        })
        .reduce(|| 0.0, f64::max))
}
