//! End-to-end acceptance checks, run in order with one PASS/FAIL line each.
//! Exits non-zero if any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use common::{close, random_dims, random_net};
use normnet::algebra::{compose, concat, lincomb, pad, precompose_affine};
use normnet::constructions::{build_monomial, build_product, build_square, build_taylor_net};
use normnet::harness::{parse_config, run};
use normnet::learn::{backprop, parameters, scaling_identity_check, set_parameters, Loss};
use normnet::probes::{greedy_sign_packing, hamming, rademacher_linear_lb, sup_error_points, w1_nn_probe};
use normnet::rng::{stream, uniform_points};
use normnet::{kappa, targets, BudgetBound, GridSpec, Matrix, ReluNet};
use rand::Rng as _;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn run_criterion(id: usize, name: &str, limit: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        Err(format!("panicked: {msg}"))
    });
    let elapsed = start.elapsed();
    let result = match result {
        Ok(detail) if elapsed > limit => Err(format!("{detail}; too slow ({elapsed:.2?} > {limit:?})")),
        other => other,
    };
    match &result {
        Ok(detail) => println!("PASS criterion {id:2} [{name}] ({elapsed:.2?}): {detail}"),
        Err(detail) => println!("FAIL criterion {id:2} [{name}] ({elapsed:.2?}): {detail}"),
    }
    result.is_ok()
}

fn square() -> Outcome {
    let grid = GridSpec::default_for(1, 0.0, 1.0).points();
    let mut worst = 0.0f64;
    for k in [1usize, 2, 4, 8, 16, 32] {
        let c = build_square(k).map_err(|e| e.to_string())?;
        let err = sup_error_points(&c.net, &|x: &[f64]| x[0] * x[0], &grid).map_err(|e| e.to_string())?;
        let bound = 1.0 / (2.0 * (k * k) as f64);
        check(err <= bound, || format!("k={k}: error {err} > {bound}"))?;
        let kap = kappa(&c.net).kappa;
        check((kap - 3.0).abs() <= 1e-9, || format!("k={k}: kappa {kap}"))?;
        worst = worst.max(err / bound);
    }
    Ok(format!("max error/bound ratio {worst:.3}, kappa = 3"))
}

fn product() -> Outcome {
    let m = 200;
    let axis: Vec<f64> = (0..m).map(|i| -1.0 + 2.0 * i as f64 / (m - 1) as f64).collect();
    let mut summary = Vec::new();
    for k in [2usize, 4, 8] {
        let c = build_product(k).map_err(|e| e.to_string())?;
        let bound = 3.0 / (k * k) as f64;
        let mut err = 0.0f64;
        for &x in &axis {
            for &y in &axis {
                let v = c.net.eval(&[x, y]).map_err(|e| e.to_string())?[0];
                check((-1.0..=1.0).contains(&v), || format!("k={k}: value {v} outside [-1,1]"))?;
                err = err.max((v - x * y).abs());
            }
            for p in [[x, 0.0], [0.0, x]] {
                let v = c.net.eval(&p).map_err(|e| e.to_string())?[0];
                check(v.abs() <= 1e-12, || format!("k={k}: {v} at axis point {p:?}"))?;
            }
        }
        check(err <= bound, || format!("k={k}: error {err} > {bound}"))?;
        summary.push(format!("k={k} err {err:.2e}"));
    }
    Ok(summary.join(", "))
}

fn monomial() -> Outcome {
    let mut summary = Vec::new();
    for d in [2usize, 3, 4] {
        let pts = GridSpec::Latin {
            d,
            lo: -1.0,
            hi: 1.0,
            n: 100_000,
            seed: 3,
        }
        .points();
        let levels = (d as f64).log2().ceil() as i32;
        for k in [4usize, 8] {
            let c = build_monomial(d, k).map_err(|e| e.to_string())?;
            let err = sup_error_points(&c.net, &|x: &[f64]| x.iter().product(), &pts).map_err(|e| e.to_string())?;
            let bound = 6.0 * d as f64 / (k * k) as f64;
            check(err <= bound, || format!("d={d} k={k}: error {err} > {bound}"))?;
            check(c.net.width() <= 6 * d * k, || format!("d={d} k={k}: width {}", c.net.width()))?;
            check(c.net.depth() == 2 * levels as usize, || format!("d={d}: depth {}", c.net.depth()))?;
            let kap = kappa(&c.net).kappa;
            check(kap <= 6f64.powi(3 * levels) * (1.0 + 1e-9), || format!("d={d} k={k}: kappa {kap}"))?;
            summary.push(format!("d={d} k={k} err/bound {:.3}", err / bound));
        }
    }
    Ok(summary.join(", "))
}

fn taylor() -> Outcome {
    let mut summary = Vec::new();
    for (alpha, name) in [(1.0, "sine"), (2.0, "product")] {
        let spec = targets::by_name(name, 2, alpha).map_err(|e| e.to_string())?;
        let r = spec.r() as i32;
        for (n, k) in [(2usize, 4usize), (4, 8)] {
            let c = build_taylor_net(&spec, n, k).map_err(|e| e.to_string())?;
            let (nf, kf, rf) = (n as f64, k as f64, r as f64);
            let formula = 4.0 * 2f64.powi(r) * (nf.powf(-alpha) + 6.0 * (rf + 1.0) * (2.0 + rf) / (kf * kf));
            check((c.error_bound - formula).abs() <= 1e-12 * formula, || {
                format!("stated bound {} differs from {formula}", c.error_bound)
            })?;
            let f = |x: &[f64]| spec.eval(x);
            let rep = c
                .certify(&f, spec.lipschitz, &GridSpec::default_for(2, 0.0, 1.0))
                .map_err(|e| e.to_string())?;
            let err = rep.grid_sup_error.unwrap();
            check(err <= c.error_bound, || format!("{name} N={n} k={k}: error {err} > {}", c.error_bound))?;
            check(rep.kappa <= c.kappa_stated * (1.0 + 1e-9), || {
                format!("{name} N={n} k={k}: kappa {} > {}", rep.kappa, c.kappa_stated)
            })?;
            summary.push(format!("{name} a={alpha} N={n} k={k} err {err:.3e}/{:.3}", c.error_bound));
        }
    }
    Ok(summary.join(", "))
}

fn combinators() -> Outcome {
    let mut rng = stream(500, 0);
    let mut worst_ratio = 0.0f64;
    for trial in 0..200 {
        let d = rng.random_range(1..=3);
        let xs = uniform_points(&mut rng, 25, d, -1.5, 1.5);
        let dims = random_dims(&mut rng, d, 1);
        let a = random_net(&mut rng, &dims, 1.5);
        let dims = random_dims(&mut rng, d, 1);
        let b = random_net(&mut rng, &dims, 1.5);
        let (ba, bb) = (BudgetBound::of(&a), BudgetBound::of(&b));
        let eval = |n: &ReluNet, x: &[f64]| n.eval(x).unwrap();
        let (net, bound, want): (ReluNet, BudgetBound, Box<dyn Fn(&[f64]) -> Vec<f64>>) = match trial % 5 {
            0 => {
                let outer = random_net(&mut rng, &[1, 3, 1], 1.5);
                let bo = BudgetBound::of(&outer);
                let (o, i) = (outer.clone(), a.clone());
                (
                    compose(&outer, &a).unwrap(),
                    BudgetBound::compose(&bo, &ba),
                    Box::new(move |x| eval(&o, &eval(&i, x))),
                )
            }
            1 => {
                let m: Vec<Vec<f64>> = (0..d).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
                let shift: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                let mat = Matrix::from_rows(&m).unwrap();
                let norm = normnet::net::affine_norm(&mat, &shift);
                let (n, mm, s) = (a.clone(), mat.clone(), shift.clone());
                (
                    precompose_affine(&a, &mat, &shift).unwrap(),
                    BudgetBound::precompose(&ba, norm),
                    Box::new(move |x| {
                        let mut y = s.clone();
                        for (yi, row) in y.iter_mut().zip(mm.to_dense_rows()) {
                            *yi += row.iter().zip(x).map(|(u, v)| u * v).sum::<f64>();
                        }
                        eval(&n, &y)
                    }),
                )
            }
            2 => {
                let (p, q) = (a.clone(), b.clone());
                (
                    concat(&a, &b).unwrap(),
                    BudgetBound::concat(&ba, &bb),
                    Box::new(move |x| [eval(&p, x), eval(&q, x)].concat()),
                )
            }
            3 => {
                let (c1, c2) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
                let (p, q) = (a.clone(), b.clone());
                (
                    lincomb(c1, &a, c2, &b).unwrap(),
                    BudgetBound::lincomb(c1, &ba, c2, &bb),
                    Box::new(move |x| vec![c1 * eval(&p, x)[0] + c2 * eval(&q, x)[0]]),
                )
            }
            _ => {
                let (w, l) = (a.width() + 3, a.depth() + 2);
                let p = a.clone();
                (
                    pad(&a, w, l).unwrap(),
                    BudgetBound {
                        width_bound: w,
                        depth_bound: l,
                        kappa_bound: kappa(&a).kappa,
                    },
                    Box::new(move |x| eval(&p, x)),
                )
            }
        };
        let kap = kappa(&net).kappa;
        check(kap <= bound.kappa_bound * (1.0 + 1e-12), || {
            format!("trial {trial}: kappa {kap} > bound {}", bound.kappa_bound)
        })?;
        check(net.width() <= bound.width_bound && net.depth() <= bound.depth_bound, || {
            format!("trial {trial}: shape ({}, {}) exceeds {bound:?}", net.width(), net.depth())
        })?;
        if bound.kappa_bound > 0.0 {
            worst_ratio = worst_ratio.max(kap / bound.kappa_bound);
        }
        for x in &xs {
            let (got, want) = (net.eval(x).unwrap(), want(x));
            for (g, w) in got.iter().zip(&want) {
                check(close(*g, *w, 1e-10), || format!("trial {trial}: {g} vs {w} at {x:?}"))?;
            }
        }
    }
    Ok(format!("200 compositions, max kappa/bound {worst_ratio:.3}"))
}

fn rademacher() -> Outcome {
    let mut summary = Vec::new();
    for (i, (n, d, k, l)) in [(50usize, 2usize, 1.0, 2usize), (200, 3, 2.0, 3), (1000, 5, 4.0, 2)]
        .into_iter()
        .enumerate()
    {
        let pts = uniform_points(&mut stream(600 + i as u64, 0), n, d, 0.0, 1.0);
        let e = rademacher_linear_lb(&pts, k, 10_000, 601 + i as u64, l, 1.0).map_err(|e| e.to_string())?;
        let (lo, hi) = (e.formula_lb - 3.0 * e.mc_stderr, e.formula_ub + 3.0 * e.mc_stderr);
        check(e.mc_mean >= lo && e.mc_mean <= hi, || {
            format!("(n,d,K,L)=({n},{d},{k},{l}): {} outside [{lo}, {hi}]", e.mc_mean)
        })?;
        summary.push(format!(
            "n={n}: {:.4} in [{:.4}, {:.4}]",
            e.mc_mean, e.formula_lb, e.formula_ub
        ));
    }
    Ok(summary.join(", "))
}

fn packing() -> Outcome {
    let mut summary = Vec::new();
    for m in [8usize, 12, 16, 20, 24] {
        let p = greedy_sign_packing(m).map_err(|e| e.to_string())?;
        let need = 2f64.powf(m as f64 / 4.0);
        check(p.vectors.len() as f64 >= need, || format!("m={m}: {} < {need}", p.vectors.len()))?;
        check(p.min_hamming > m / 8, || format!("m={m}: min distance {}", p.min_hamming))?;
        if m <= 16 {
            for i in 0..p.vectors.len() {
                for j in 0..i {
                    check(hamming(&p.vectors[i], &p.vectors[j]) > m / 8, || format!("m={m}: pair ({i},{j})"))?;
                }
            }
        }
        summary.push(format!("m={m}: |B|={} dist={}", p.vectors.len(), p.min_hamming));
    }
    Ok(summary.join(", "))
}

fn wasserstein() -> Outcome {
    let mut rng = stream(700, 0);
    let mut sets = 0;
    let mut worst = f64::INFINITY;
    for d in [1usize, 2, 3] {
        let mut configs: Vec<Vec<Vec<f64>>> = (0..20)
            .map(|_| {
                let n = rng.random_range(1..=400);
                uniform_points(&mut rng, n, d, 0.0, 1.0)
            })
            .collect();
        // regular grid, a tight cluster, a single corner point
        let m = match d {
            1 => 64,
            2 => 8,
            _ => 4,
        };
        let mut grid = vec![vec![]];
        for _ in 0..d {
            grid = grid
                .into_iter()
                .flat_map(|p: Vec<f64>| {
                    (0..m).map(move |i| {
                        let mut q = p.clone();
                        q.push((i as f64 + 0.5) / m as f64);
                        q
                    })
                })
                .collect();
        }
        configs.push(grid);
        configs.push(uniform_points(&mut rng, 100, d, 0.45, 0.55));
        configs.push(vec![vec![0.0; d]]);
        for (i, pts) in configs.iter().enumerate() {
            let w = w1_nn_probe(pts, 10_000, 701 + i as u64).map_err(|e| e.to_string())?;
            check(w.estimate >= w.formula_lb - 3.0 * w.stderr, || {
                format!("d={d} set {i} (n={}): {} < {}", pts.len(), w.estimate, w.formula_lb)
            })?;
            worst = worst.min(w.estimate / w.formula_lb);
            sets += 1;
        }
    }
    let single = w1_nn_probe(&[vec![0.5]], 100_000, 799).map_err(|e| e.to_string())?;
    check((single.estimate - 0.25).abs() <= 3.0 * single.stderr, || {
        format!("single point: {} +- {}", single.estimate, single.stderr)
    })?;
    Ok(format!(
        "{sets} point sets, min estimate/bound {worst:.2}; single point {:.4} +- {:.4}",
        single.estimate, single.stderr
    ))
}

fn scaling() -> Outcome {
    let mut rng = stream(800, 0);
    let mut worst = 0.0f64;
    for trial in 0..100 {
        let d = rng.random_range(1..=3);
        let dims = random_dims(&mut rng, d, 1);
        let net = random_net(&mut rng, &dims, 1.0);
        let mu = uniform_points(&mut rng, 30, d, 0.0, 1.0);
        let nu = uniform_points(&mut rng, 30, d, 0.0, 1.0);
        let lambda = 10f64.powf(rng.random_range(-3.0..2.0));
        let (lhs, rhs) = scaling_identity_check(&net, &mu, &nu, lambda).map_err(|e| e.to_string())?;
        check((lhs - rhs).abs() < 1e-9, || format!("trial {trial}: {lhs} vs {rhs}"))?;
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(format!("100 draws, max gap {worst:.1e}"))
}

fn min_preactivation(net: &ReluNet, xs: &[Vec<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for x in xs {
        let mut h = x.clone();
        for layer in net.hidden_layers() {
            let mut z = vec![0.0; layer.out_dim()];
            layer.weights.mul_vec_into(&h, &mut z);
            for (zi, bi) in z.iter_mut().zip(layer.bias.as_ref().unwrap()) {
                *zi += bi;
                best = best.min(zi.abs());
            }
            h = z.iter().map(|v| v.max(0.0)).collect();
        }
    }
    best
}

fn gradients() -> Outcome {
    let mut rng = stream(900, 0);
    let h = 1e-5;
    let mut summary = Vec::new();
    for dims in [vec![2usize, 6, 1], vec![3, 5, 4, 1], vec![1, 4, 4, 4, 2]] {
        let (mut checked, mut worst) = (0, 0.0f64);
        for _ in 0..5000 {
            if checked == 100 {
                break;
            }
            let net = random_net(&mut rng, &dims, 1.0);
            let xs = uniform_points(&mut rng, 3, dims[0], -1.0, 1.0);
            let ys = uniform_points(&mut rng, 3, *dims.last().unwrap(), -1.0, 1.0);
            if min_preactivation(&net, &xs) < 1e-3 {
                continue;
            }
            let loss = Loss::Squared { xs: &xs, ys: &ys };
            let g = backprop(&net, loss).map_err(|e| e.to_string())?.1.flatten();
            let theta = parameters(&net);
            let mut probe = net.clone();
            let (mut diff, mut scale) = (0.0f64, 1e-3f64);
            for i in 0..theta.len() {
                let mut t = theta.clone();
                t[i] += h;
                set_parameters(&mut probe, &t);
                let up = backprop(&probe, loss).unwrap().0;
                t[i] -= 2.0 * h;
                set_parameters(&mut probe, &t);
                let down = backprop(&probe, loss).unwrap().0;
                diff = diff.max(((up - down) / (2.0 * h) - g[i]).abs());
                scale = scale.max(g[i].abs());
            }
            let rel = diff / scale;
            check(rel < 1e-5, || format!("{dims:?}: relative error {rel}"))?;
            worst = worst.max(rel);
            checked += 1;
        }
        check(checked == 100, || format!("{dims:?}: only {checked} kink-free configurations"))?;
        summary.push(format!("{dims:?} worst {worst:.1e}"));
    }
    Ok(summary.join(", "))
}

const REGRESS: &str = r#"
kind = "regress-sweep"
seed = 2024
[regress]
d = 1
n = [100, 400, 1600]
replicates = [0, 1, 2, 3, 4]
width = 16
depth = 2
K_scaled = 1.0
alpha = 1.0
epochs = 100
lr = 0.05
batch = 16
target = { type = "planted", width = 8, depth = 2, kappa = 2.0, seed = 11 }
"#;

const GAN: &str = r#"
kind = "gan-run"
seed = 77
[gan]
replicates = [0, 1, 2, 3, 4]
d = 2
latent = 2
gen_width = 8
gen_depth = 1
disc_width = 16
disc_depth = 1
budget = { lambda = 0.015625 }
outer_steps = 2000
inner_steps = 5
gen_lr = 0.5
disc_lr = 0.1
n = 1000
batch = 64
planted_seed = 5
seed = 0
log_every = 10
"#;

fn csv_rows(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), String> {
    let mut r = csv::Reader::from_path(path).map_err(|e| e.to_string())?;
    let header = r.headers().map_err(|e| e.to_string())?.iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|r| r.iter().map(String::from).collect()))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    Ok((header, rows))
}

fn column(header: &[String], row: &[String], name: &str) -> f64 {
    let i = header.iter().position(|h| h == name).unwrap();
    row[i].parse().unwrap_or(f64::NAN)
}

fn regression(out: &Path) -> Outcome {
    let cfg = parse_config(REGRESS, false).map_err(|e| e.to_string())?;
    let m = run(&cfg, out).map_err(|e| e.to_string())?;
    check(m.failures.is_empty(), || format!("failed points: {:?}", m.failures))?;
    let (header, rows) = csv_rows(&out.join("results.csv"))?;
    // per-epoch kappa from every epoch log
    for (i, row) in rows.iter().enumerate() {
        let k = column(&header, row, "budget_value");
        let (eh, erows) = csv_rows(&out.join(format!("points/{i:04}_epochs.csv")))?;
        for e in &erows {
            let kap = column(&eh, e, "kappa");
            check(kap <= k, || format!("point {i}: epoch kappa {kap} > K = {k}"))?;
        }
    }
    let mut good = 0;
    let mut lines = Vec::new();
    for rep in 0..5 {
        let errs: Vec<f64> = rows
            .iter()
            .filter(|r| column(&header, r, "replicate") == rep as f64)
            .map(|r| column(&header, r, "final_heldout_l2"))
            .collect();
        if errs.len() == 3 && errs[0] > errs[1] && errs[1] > errs[2] {
            good += 1;
        }
        lines.push(format!("{:.2e}>{:.2e}>{:.2e}", errs[0], errs[1], errs[2]));
    }
    check(good >= 4, || format!("strict decrease on {good}/5 seeds: {}", lines.join(" ")))?;
    Ok(format!("strict decrease on {good}/5 seeds ({})", lines.join(" ")))
}

fn gan(out: &Path) -> Outcome {
    let cfg = parse_config(GAN, false).map_err(|e| e.to_string())?;
    let m = run(&cfg, out).map_err(|e| e.to_string())?;
    check(m.failures.is_empty(), || format!("failed points: {:?}", m.failures))?;
    let (header, rows) = csv_rows(&out.join("results.csv"))?;
    let mut good = 0;
    let mut ratios = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let ratio = column(&header, row, "final_ipm") / column(&header, row, "initial_ipm");
        if ratio < 0.1 {
            good += 1;
        }
        ratios.push(format!("{ratio:.3}"));
        let (sh, srows) = csv_rows(&out.join(format!("points/{i:04}_steps.csv")))?;
        for s in &srows {
            let (lip, kap) = (column(&sh, s, "lipschitz"), column(&sh, s, "kappa"));
            check(lip <= kap * (1.0 + 1e-9), || format!("replicate {i}: probe {lip} > kappa {kap}"))?;
        }
    }
    check(good >= 4, || format!("surrogate below 10% on {good}/5 seeds: {}", ratios.join(", ")))?;
    Ok(format!("final/initial surrogate IPM {} ({good}/5 below 0.1)", ratios.join(", ")))
}

/// Every file under `dir`, relative path to bytes, with the manifest's
/// wall-clock field dropped.
fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(p) = stack.pop() {
        for entry in std::fs::read_dir(&p).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
                continue;
            }
            let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
            let mut bytes = std::fs::read(&path).unwrap();
            if rel == "manifest.json" {
                let mut v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
                v.as_object_mut().unwrap().remove("wall_clock_seconds");
                bytes = serde_json::to_vec(&v).unwrap();
            }
            out.push((rel, bytes));
        }
    }
    out.sort();
    out
}

fn determinism(first_runs: &[(&str, &Path)]) -> Outcome {
    let construct = r#"
kind = "construct-sweep"
seed = 9
[construct]
family = "product"
k = [2, 4]
"#;
    let probe = r#"
kind = "probe-sweep"
seed = 9
[probe]
probe = "rademacher"
n = [50, 200]
d = [2, 3]
K = [1.0]
L = [2]
trials = 2000
"#;
    let mut checked = Vec::new();
    for (name, text) in [("construct", construct), ("probe", probe)] {
        let cfg = parse_config(text, false).map_err(|e| e.to_string())?;
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        run(&cfg, a.path()).map_err(|e| e.to_string())?;
        run(&cfg, b.path()).map_err(|e| e.to_string())?;
        check(snapshot(a.path()) == snapshot(b.path()), || format!("{name} sweep outputs differ"))?;
        checked.push(name.to_string());
    }
    for (name, first) in first_runs {
        let text = if *name == "regress" { REGRESS } else { GAN };
        let cfg = parse_config(text, false).map_err(|e| e.to_string())?;
        let again = tempfile::tempdir().unwrap();
        run(&cfg, again.path()).map_err(|e| e.to_string())?;
        let (x, y) = (snapshot(first), snapshot(again.path()));
        check(!x.is_empty() && x == y, || format!("{name} sweep outputs differ"))?;
        checked.push(format!("{name} ({} files)", x.len()));
    }
    Ok(format!("byte-identical reruns: {}", checked.join(", ")))
}

fn main() {
    // `cargo test -- --list` and filters come through here too.
    let args: Vec<String> = std::env::args().collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let secs = Duration::from_secs;
    let regress_dir = tempfile::tempdir().unwrap();
    let gan_dir = tempfile::tempdir().unwrap();
    let results = [
        run_criterion(1, "square approximator", secs(1), square),
        run_criterion(2, "product approximator", secs(5), product),
        run_criterion(3, "monomial approximator", secs(30), monomial),
        run_criterion(4, "taylor network", secs(120), taylor),
        run_criterion(5, "norm calculus", secs(10), combinators),
        run_criterion(6, "rademacher bracket", secs(30), rademacher),
        run_criterion(7, "sign packing", secs(60), packing),
        run_criterion(8, "wasserstein probe", secs(30), wasserstein),
        run_criterion(9, "scaling identity", secs(5), scaling),
        run_criterion(10, "gradient oracle", secs(10), gradients),
        run_criterion(11, "regression trend", secs(600), || regression(regress_dir.path())),
        run_criterion(12, "gan sanity", secs(600), || gan(gan_dir.path())),
        run_criterion(13, "determinism", secs(1200), || {
            determinism(&[("regress", regress_dir.path()), ("gan", gan_dir.path())])
        }),
    ];
    let passed = results.iter().filter(|&&ok| ok).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
