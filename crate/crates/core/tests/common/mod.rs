#![allow(dead_code)]

use normnet::rng::{self, Rng};
use normnet::{AffineLayer, Matrix, ReluNet};
use rand::Rng as _;

/// Random dense net with weights and biases uniform in `[-scale, scale]`.
pub fn random_net(rng: &mut Rng, dims: &[usize], scale: f64) -> ReluNet {
    let mut layers = Vec::new();
    for (l, w) in dims.windows(2).enumerate() {
        let rows: Vec<Vec<f64>> = (0..w[1])
            .map(|_| (0..w[0]).map(|_| rng.random_range(-scale..scale)).collect())
            .collect();
        let a = Matrix::from_rows(&rows).unwrap();
        if l + 2 < dims.len() {
            let b = (0..w[1]).map(|_| rng.random_range(-scale..scale)).collect();
            layers.push(AffineLayer::hidden(a, b));
        } else {
            layers.push(AffineLayer::output(a));
        }
    }
    ReluNet::new(layers).unwrap()
}

/// Random architecture: input `d`, 1..=3 hidden layers of width 1..=6.
pub fn random_dims(rng: &mut Rng, d: usize, out: usize) -> Vec<usize> {
    let depth = rng.random_range(1..=3);
    let mut dims = vec![d];
    dims.extend((0..depth).map(|_| rng.random_range(1..=6)));
    dims.push(out);
    dims
}

pub fn points(seed: u64, n: usize, d: usize, lo: f64, hi: f64) -> Vec<Vec<f64>> {
    rng::uniform_points(&mut rng::stream(seed, 99), n, d, lo, hi)
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}
