mod common;

use common::points;
use normnet::constructions::build_square;
use normnet::probes::{
    approx_lower_bound_formulas, bump, bump_eval, estimate_c_psi_alpha, greedy_sign_packing, hamming,
    rademacher_bound_formulas, rademacher_linear_lb, rho2, sup_error, w1_lower_bound, w1_nn_probe, BumpClassSpec,
};
use normnet::{Error, GridSpec, Matrix, ReluNet};

#[test]
fn rho2_examples() {
    assert_eq!(rho2(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
    assert_eq!(rho2(&[1.0; 4], &[0.0; 4]).unwrap(), 1.0);
    assert!(rho2(&[1.0], &[1.0, 2.0]).is_err());
    let pack = greedy_sign_packing(16).unwrap();
    let to_f = |v: &[i8]| v.iter().map(|&s| s as f64).collect::<Vec<_>>();
    for i in 0..pack.vectors.len() {
        for j in 0..i {
            let r = rho2(&to_f(&pack.vectors[i]), &to_f(&pack.vectors[j])).unwrap();
            assert!(r > 0.5, "rho2 {r}");
        }
    }
}

#[test]
fn packing_examples() {
    for (m, size, dist) in [(8, 4, 2), (16, 16, 3)] {
        let p = greedy_sign_packing(m).unwrap();
        assert!(p.vectors.len() >= size);
        assert!(p.min_hamming >= dist);
        assert!(p.vectors.iter().flatten().all(|&s| s == 1 || s == -1));
        for i in 0..p.vectors.len() {
            for j in 0..i {
                assert!(hamming(&p.vectors[i], &p.vectors[j]) > m / 8);
            }
        }
    }
    assert!(greedy_sign_packing(7).is_err());
    assert!(greedy_sign_packing(25).is_err());
    assert_eq!(greedy_sign_packing(12).unwrap(), greedy_sign_packing(12).unwrap());
}

#[test]
fn bump_properties() {
    assert_eq!(bump(&[0.0, 0.0]), 1.0);
    assert_eq!(bump(&[0.25, 0.0]), 0.0);
    assert_eq!(bump(&[0.1, -0.3]), 0.0);
    assert!(bump(&[0.1, -0.1]) > 0.0);
}

#[test]
fn bump_grid_values_and_support() {
    let (d, n) = (2, 4);
    let c = estimate_c_psi_alpha(d, 1.5, 0).unwrap();
    assert!(c > 0.0);
    let signs: Vec<i8> = (0..n * n).map(|i| if i % 3 == 0 { -1 } else { 1 }).collect();
    let spec = BumpClassSpec::new(d, n, 1.5, c, signs.clone()).unwrap();
    let scale = c * (n as f64).powf(-1.5);
    for i in 0..n {
        for j in 0..n {
            let x = [i as f64 / n as f64, j as f64 / n as f64];
            let v = bump_eval(&spec, &x).unwrap();
            assert!((v - scale * signs[spec.flat_index(&[i, j])] as f64).abs() < 1e-15);
            // a quarter cell away the bump vanishes
            let off = [x[0] + 0.25 / n as f64, x[1]];
            assert_eq!(bump_eval(&spec, &off).unwrap(), 0.0);
        }
    }
    // flipping one sign changes only its own cell
    let mut flipped = signs.clone();
    flipped[5] = -flipped[5];
    let other = BumpClassSpec::new(d, n, 1.5, c, flipped).unwrap();
    let neg = BumpClassSpec::new(d, n, 1.5, c, signs.iter().map(|s| -s).collect()).unwrap();
    for x in points(1, 2000, 2, 0.0, 1.0) {
        let (a, b) = (bump_eval(&spec, &x).unwrap(), bump_eval(&other, &x).unwrap());
        let cell = [(x[0] * n as f64).round() as usize, (x[1] * n as f64).round() as usize];
        if cell[0] < n && cell[1] < n && spec.flat_index(&cell) == 5 {
            assert_eq!(a, -b);
        } else {
            assert_eq!(a, b);
        }
        assert_eq!(a + bump_eval(&neg, &x).unwrap(), 0.0);
    }
    assert!(BumpClassSpec::new(d, n, 1.5, c, vec![1; 3]).is_err());
    assert!(BumpClassSpec::new(d, n, 1.5, c, vec![0; 16]).is_err());
}

#[test]
fn rademacher_examples() {
    let pts = points(2, 20, 3, 0.0, 1.0);
    let zero = rademacher_linear_lb(&pts, 0.0, 100, 1, 2, 1.0).unwrap();
    assert_eq!((zero.mc_mean, zero.mc_stderr), (0.0, 0.0));

    let single = rademacher_linear_lb(&[vec![0.0; 3]], 3.0, 200, 1, 2, 1.0).unwrap();
    assert_eq!(single.mc_mean, 1.5);
    assert_eq!(single.mc_stderr, 0.0);

    let pts = points(3, 100, 3, 0.0, 1.0);
    let e = rademacher_linear_lb(&pts, 2.0, 4000, 7, 2, 1.0).unwrap();
    assert!(e.mc_mean >= e.formula_lb - 3.0 * e.mc_stderr);
    assert!(e.brackets());
    assert!(matches!(rademacher_linear_lb(&[], 1.0, 10, 0, 1, 1.0), Err(Error::Empty(_))));
    // same seed, same answer
    assert_eq!(e, rademacher_linear_lb(&pts, 2.0, 4000, 7, 2, 1.0).unwrap());
}

#[test]
fn rademacher_formula_examples() {
    assert_eq!(rademacher_bound_formulas(10, 2, 0.0, 1, 1.0), (0.0, 0.0));
    let (lb, ub) = rademacher_bound_formulas(100, 3, 1.0, 1, 1.0);
    assert!((ub - 0.29618).abs() < 1e-5, "{ub}");
    assert!((lb - 0.035355).abs() < 5e-7, "{lb}");
    assert!(lb <= ub);
}

#[test]
fn wasserstein_examples() {
    let w = w1_nn_probe(&[vec![0.5]], 200_000, 3).unwrap();
    assert!((w.estimate - 0.25).abs() <= 3.0 * w.stderr + 1e-12);
    assert!((w1_lower_bound(1000, 3) - 0.023623).abs() < 1e-6);
    let m = 8usize;
    let grid: Vec<Vec<f64>> = (0..m)
        .flat_map(|i| (0..m).map(move |j| vec![(i as f64 + 0.5) / m as f64, (j as f64 + 0.5) / m as f64]))
        .collect();
    let w = w1_nn_probe(&grid, 20_000, 4).unwrap();
    assert!(w.estimate >= w.formula_lb - 3.0 * w.stderr);
    assert!(w1_nn_probe(&[], 10, 0).is_err());
    assert!(w1_nn_probe(&grid, 0, 0).is_err());
}

#[test]
fn lower_bound_examples() {
    let b = approx_lower_bound_formulas(3, 1.0, 1.0, 1).unwrap();
    let want = 4f64.powi(-7) / (3.0 + 4f64.ln());
    assert!((b.lipschitz_explicit.unwrap() - want).abs() < 1e-12 * want);
    assert!((b.lipschitz_explicit.unwrap() - 1.3915e-5).abs() < 1e-8);
    assert!(matches!(approx_lower_bound_formulas(2, 1.0, 1.0, 1), Err(Error::Regime(_))));
    assert!(matches!(approx_lower_bound_formulas(4, 2.0, 1.0, 1), Err(Error::Regime(_))));
    let (alpha, d) = (1.5, 5usize);
    let one = approx_lower_bound_formulas(d, alpha, 3.0, 2).unwrap();
    let two = approx_lower_bound_formulas(d, alpha, 6.0, 2).unwrap();
    let ratio = two.general_power_term / one.general_power_term;
    assert!((ratio - 2f64.powf(-2.0 * alpha / (d as f64 - 2.0 * alpha))).abs() < 1e-12);
    assert!(one.lipschitz_explicit.is_none());
}

#[test]
fn sup_error_examples() {
    let sq = build_square(8).unwrap().net;
    let grid = GridSpec::default_for(1, 0.0, 1.0);
    assert!(sup_error(&sq, &|x: &[f64]| x[0] * x[0], &grid).unwrap() <= 1.0 / 128.0);
    let zero = ReluNet::shallow(Matrix::zeros(1, 1), vec![0.0], Matrix::zeros(1, 1)).unwrap();
    assert_eq!(sup_error(&zero, &|_: &[f64]| 1.0, &grid).unwrap(), 1.0);
    assert_eq!(sup_error(&sq, &|x: &[f64]| sq.eval(x).unwrap()[0], &grid).unwrap(), 0.0);
    assert!(sup_error(&sq, &|_: &[f64]| 0.0, &GridSpec::default_for(2, 0.0, 1.0)).is_err());
}
