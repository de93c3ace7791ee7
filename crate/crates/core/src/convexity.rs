//! Second fundamental form of the hypersurfaces `{e^{ay} = x_i}`.
//!
//! For a curve `α` on `{f = 0}` with `f = e^{ay} − x_i`, the sign of
//! `df(∇_{α'}α')` decides convexity of `{f ≥ 0}` with respect to the interior
//! normal. With `x_i' = a y' e^{ay}`,
//!
//! ```text
//! df(∇_{α'}α') = (2aλ_i − a²) e^{ay} y'² + a e^{ay} Σ_j λ_j x_j'² e^{-2λ_j y}
//! ```
//!
//! where the sum runs over every `j`, including `j = i`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::HeintzeGroup;

/// A point and velocity of a curve on `{e^{ay} = x_i}`; only the quantities
/// entering `df(∇_{α'}α')` are stored.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CurveState {
    pub y: f64,
    pub dy: f64,
    /// `x'`, with `x_i' = a y' e^{ay}` already imposed.
    pub dx: Vec<f64>,
}

impl CurveState {
    /// Tangent state with free components `dx_j` (`j ≠ i`); the `i`-th entry is overwritten.
    pub fn tangent(i: usize, a: f64, y: f64, dy: f64, mut dx: Vec<f64>) -> Self {
        dx[i] = a * dy * (a * y).exp();
        Self { y, dy, dx }
    }
}

/// `df(∇_{α'}α')` at one state.
pub fn second_fundamental(g: &HeintzeGroup, i: usize, a: f64, s: &CurveState) -> f64 {
    let e = (a * s.y).exp();
    let horizontal: f64 = (0..g.dim())
        .map(|j| g.lambda(j) * s.dx[j] * s.dx[j] * (-2.0 * g.lambda(j) * s.y).exp())
        .sum();
    (2.0 * a * g.lambda(i) - a * a) * e * s.dy * s.dy + a * e * horizontal
}

/// Seeded states with `y ∈ [y_lo, 0]` and standard normal `y'`, `x_j'`.
pub fn sample_states(g: &HeintzeGroup, i: usize, a: f64, n: usize, y_lo: f64, seed: u64) -> Vec<CurveState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let y = rng.gen_range(y_lo..=0.0);
            let dy = normal(&mut rng);
            let dx = (0..g.dim()).map(|_| normal(&mut rng)).collect();
            CurveState::tangent(i, a, y, dy, dx)
        })
        .collect()
}

/// Box-Muller.
pub(crate) fn normal<R: Rng>(rng: &mut R) -> f64 {
    let u: f64 = rng.gen_range(f64::EPSILON..1.0);
    let v: f64 = rng.gen();
    (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}

/// Minimum of `df(∇_{α'}α')` over `samples`.
pub fn convexity_probe(g: &HeintzeGroup, i: usize, a: f64, samples: &[CurveState]) -> Result<f64> {
    if i >= g.dim() {
        return Err(Error::InvalidArgument(format!("direction index {i} out of range")));
    }
    if samples.is_empty() {
        return Err(Error::InvalidArgument(
            "convexity probe needs at least one sample".into(),
        ));
    }
    Ok(samples
        .iter()
        .map(|s| second_fundamental(g, i, a, s))
        .fold(f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connection::christoffel;
    use approx::assert_relative_eq;

    /// `−Hess f(α', α')` from the Christoffel symbols.
    fn minus_hessian(g: &HeintzeGroup, i: usize, a: f64, s: &CurveState) -> f64 {
        let d = g.dim();
        let w: Vec<f64> = std::iter::once(s.dy).chain(s.dx.iter().copied()).collect();
        let mut grad = vec![0.0; d + 1];
        grad[0] = a * (a * s.y).exp();
        grad[i + 1] = -1.0;
        let second = a * a * (a * s.y).exp() * s.dy * s.dy;
        let mut gamma = 0.0;
        for k in 0..=d {
            for b in 0..=d {
                for c in 0..=d {
                    gamma += christoffel(g, s.y, k, b, c) * w[b] * w[c] * grad[k];
                }
            }
        }
        -(second - gamma)
    }

    #[test]
    fn matches_hessian_oracle() {
        let g = HeintzeGroup::new(vec![0.7, 1.3, 2.0]).unwrap();
        for i in 0..3 {
            for a in [0.2, 1.0, 3.5] {
                for s in sample_states(&g, i, a, 50, -6.0, 3) {
                    let lhs = second_fundamental(&g, i, a, &s);
                    assert_relative_eq!(lhs, minus_hessian(&g, i, a, &s), max_relative = 1e-10, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn coefficient_vanishes_at_twice_lambda() {
        let g = HeintzeGroup::new(vec![1.0, 2.0]).unwrap();
        let s = CurveState::tangent(1, 4.0, -3.0, 1.0, vec![0.0, 0.0]);
        // only the j = i term survives
        let expect = 4.0 * (-12.0f64).exp() * 2.0 * (4.0 * (-12.0f64).exp()).powi(2) * 12f64.exp();
        assert_relative_eq!(second_fundamental(&g, 1, 4.0, &s), expect, max_relative = 1e-12);
    }

    #[test]
    fn convex_range_and_its_failure() {
        let g = HeintzeGroup::new(vec![1.0, 2.0]).unwrap();
        for i in 0..2 {
            let l = g.lambda(i);
            for m in [0.1, 0.5, 1.0, 2.0] {
                let s = sample_states(&g, i, m * l, 1000, -10.0, 11);
                assert!(convexity_probe(&g, i, m * l, &s).unwrap() >= 0.0);
            }
            let s = sample_states(&g, i, 3.0 * l, 1000, -10.0, 11);
            assert!(convexity_probe(&g, i, 3.0 * l, &s).unwrap() < 0.0);
        }
    }
}
