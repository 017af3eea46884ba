//! Named analytic targets with exact derivative oracles.
//!
//! Each target has every partial derivative of order `<= r` bounded by one
//! and the top-order derivatives 1-Lipschitz in the sup-norm on `[0,1]^d`,
//! so it lies in the unit Hölder ball for the advertised `alpha`.

use std::sync::Arc;

use crate::constructions::HolderSpec;
use crate::error::{Error, Result};

/// `f(x) = sin(mean(x)) / 2`; smooth, admissible for every `alpha`.
pub fn sine(d: usize, alpha: f64) -> Result<HolderSpec> {
    let df = d as f64;
    let f = Arc::new(move |x: &[f64]| 0.5 * (x.iter().sum::<f64>() / df).sin());
    let deriv = Arc::new(move |s: &[usize], x: &[f64]| {
        let order: usize = s.iter().sum();
        let u = x.iter().sum::<f64>() / df;
        let base = match order % 4 {
            0 => u.sin(),
            1 => u.cos(),
            2 => -u.sin(),
            _ => -u.cos(),
        };
        Ok(0.5 * base / df.powi(order as i32))
    });
    Ok(HolderSpec::new(d, alpha, f, deriv)?.with_lipschitz(0.5))
}

/// `f(x) = x_1 x_2`; admissible for `alpha <= 2` in two dimensions.
pub fn product2(alpha: f64) -> Result<HolderSpec> {
    if alpha > 2.0 {
        return Err(Error::param("alpha", "the product target supports alpha <= 2"));
    }
    let f = Arc::new(|x: &[f64]| x[0] * x[1]);
    let deriv = Arc::new(|s: &[usize], x: &[f64]| {
        Ok(match (s[0], s[1]) {
            (0, 0) => x[0] * x[1],
            (1, 0) => x[1],
            (0, 1) => x[0],
            (1, 1) => 1.0,
            _ => 0.0,
        })
    });
    Ok(HolderSpec::new(2, alpha, f, deriv)?.with_lipschitz(2.0))
}

/// Constant function.
pub fn constant(d: usize, alpha: f64, value: f64) -> Result<HolderSpec> {
    if value.abs() > 1.0 {
        return Err(Error::param("value", "constant must lie in [-1, 1]"));
    }
    let f = Arc::new(move |_: &[f64]| value);
    let deriv = Arc::new(move |s: &[usize], _: &[f64]| {
        Ok(if s.iter().all(|&v| v == 0) { value } else { 0.0 })
    });
    Ok(HolderSpec::new(d, alpha, f, deriv)?.with_lipschitz(0.0))
}

/// Looks a target up by name: `sine`, `product`, `const`.
pub fn by_name(name: &str, d: usize, alpha: f64) -> Result<HolderSpec> {
    match name {
        "sine" => sine(d, alpha),
        "product" if d == 2 => product2(alpha),
        "product" => Err(Error::param("d", "the product target is two-dimensional")),
        "const" => constant(d, alpha, 0.5),
        other => Err(Error::param("target", format!("unknown target `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sine_derivatives_match_finite_differences() {
        let spec = sine(2, 2.0).unwrap();
        let x = [0.3, 0.6];
        let h = 1e-6;
        let fd = (spec.eval(&[x[0] + h, x[1]]) - spec.eval(&[x[0] - h, x[1]])) / (2.0 * h);
        assert!((fd - (spec.deriv)(&[1, 0], &x).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn lookup() {
        assert!(by_name("product", 3, 2.0).is_err());
        assert!(by_name("nope", 2, 1.0).is_err());
        assert_eq!(by_name("const", 1, 1.0).unwrap().eval(&[0.2]), 0.5);
    }
}
