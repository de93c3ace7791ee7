//! Levi-Civita connection and sectional curvature.
//!
//! Coordinates are indexed `0 = y`, `1..=d = x_1..x_d`. The only nonzero
//! Christoffel symbols are
//!
//! ```text
//! Γ^y_{x_i x_i}       =  λ_i e^{-2λ_i y}
//! Γ^{x_i}_{y x_i}     =  Γ^{x_i}_{x_i y} = -λ_i
//! ```
//!
//! and they depend on `y` alone.

use crate::error::{Error, Result};
use crate::group::{HeintzeGroup, Tangent};

/// A coordinate vector field `Y = ∂_y` or `X_i = ∂_{x_i}` (zero-based `i`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoordField {
    Y,
    X(usize),
}

impl CoordField {
    fn index(self, d: usize) -> Result<usize> {
        match self {
            CoordField::Y => Ok(0),
            CoordField::X(i) if i < d => Ok(i + 1),
            CoordField::X(i) => Err(Error::InvalidArgument(format!(
                "field index X({i}) out of range for d = {d}"
            ))),
        }
    }
}

/// `Γ^a_{bc}` at height `y`.
pub fn christoffel(g: &HeintzeGroup, y: f64, a: usize, b: usize, c: usize) -> f64 {
    if a == 0 {
        if b == c && b > 0 {
            let l = g.lambda(b - 1);
            return l * (-2.0 * l * y).exp();
        }
        return 0.0;
    }
    // a = x_i: nonzero only for {b, c} = {y, x_i}
    if (b == 0 && c == a) || (c == 0 && b == a) {
        return -g.lambda(a - 1);
    }
    0.0
}

/// `∇_A B` for coordinate fields, as tangent components at height `y`.
pub fn covariant_derivative(g: &HeintzeGroup, y: f64, field_a: CoordField, field_b: CoordField) -> Result<Tangent> {
    let d = g.dim();
    let b = field_a.index(d)?;
    let c = field_b.index(d)?;
    let mut out = Tangent::zero(d);
    out.v = christoffel(g, y, 0, b, c);
    for i in 0..d {
        out.u[i] = christoffel(g, y, i + 1, b, c);
    }
    Ok(out)
}

fn components(w: &Tangent) -> Vec<f64> {
    std::iter::once(w.v).chain(w.u.iter().copied()).collect()
}

fn metric_diag(g: &HeintzeGroup, y: f64) -> Vec<f64> {
    std::iter::once(1.0)
        .chain((0..g.dim()).map(|i| g.weight(i, y)))
        .collect()
}

/// Sectional curvature of `span(w1, w2)` at height `y`.
///
/// The curvature tensor is assembled as
/// `R^a_{bcd} = ∂_c Γ^a_{db} − ∂_d Γ^a_{cb} + Γ^a_{ce} Γ^e_{db} − Γ^a_{de} Γ^e_{cb}`,
/// where only `c = y` or `d = y` derivatives survive; those are taken by a
/// central difference of the exact Christoffel symbols with step `h`
/// (error `O(h²)`). The plane value is
/// `K = g(R(w1, w2) w2, w1) / (|w1|²|w2|² − g(w1, w2)²)`.
pub fn sectional_curvature_fd(g: &HeintzeGroup, y: f64, w1: &Tangent, w2: &Tangent, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("step h must be positive, got {h}")));
    }
    let n = g.dim() + 1;
    let gd = metric_diag(g, y);
    let a1 = components(w1);
    let a2 = components(w2);

    let n11: f64 = (0..n).map(|i| gd[i] * a1[i] * a1[i]).sum();
    let n22: f64 = (0..n).map(|i| gd[i] * a2[i] * a2[i]).sum();
    let n12: f64 = (0..n).map(|i| gd[i] * a1[i] * a2[i]).sum();
    let gram = n11 * n22 - n12 * n12;
    // scale-free degeneracy test
    let rel = if n11 * n22 > 0.0 { gram / (n11 * n22) } else { 0.0 };
    if rel < 1e-12 {
        return Err(Error::DegeneratePlane { gram: rel });
    }

    let gamma = |yy: f64, a: usize, b: usize, c: usize| christoffel(g, yy, a, b, c);
    let dgamma = |a: usize, b: usize, c: usize, dir: usize| -> f64 {
        if dir != 0 {
            return 0.0;
        }
        (gamma(y + h, a, b, c) - gamma(y - h, a, b, c)) / (2.0 * h)
    };

    // R_{abcd} w1^a w2^b w1^c w2^d with R_{abcd} = g_aa R^a_{bcd}
    let mut num = 0.0;
    for a in 0..n {
        if a1[a] == 0.0 {
            continue;
        }
        for b in 0..n {
            if a2[b] == 0.0 {
                continue;
            }
            for c in 0..n {
                if a1[c] == 0.0 {
                    continue;
                }
                for dd in 0..n {
                    if a2[dd] == 0.0 {
                        continue;
                    }
                    let mut r = dgamma(a, dd, b, c) - dgamma(a, c, b, dd);
                    for e in 0..n {
                        r += gamma(y, a, c, e) * gamma(y, e, dd, b) - gamma(y, a, dd, e) * gamma(y, e, c, b);
                    }
                    num += gd[a] * r * a1[a] * a2[b] * a1[c] * a2[dd];
                }
            }
        }
    }
    Ok(num / gram)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn connection_cases() {
        let g = HeintzeGroup::new(vec![1.0, 2.0]).unwrap();
        let yy = covariant_derivative(&g, 0.4, CoordField::Y, CoordField::Y).unwrap();
        assert!(yy.is_zero());

        let x1x1 = covariant_derivative(&g, 0.0, CoordField::X(0), CoordField::X(0)).unwrap();
        assert_eq!(x1x1, Tangent::new(1.0, vec![0.0, 0.0]));

        let x1x2 = covariant_derivative(&g, 1.3, CoordField::X(0), CoordField::X(1)).unwrap();
        assert!(x1x2.is_zero());

        let yx = covariant_derivative(&g, 0.7, CoordField::Y, CoordField::X(1)).unwrap();
        let xy = covariant_derivative(&g, 0.7, CoordField::X(1), CoordField::Y).unwrap();
        assert_eq!(yx, xy);
        assert_eq!(yx, Tangent::new(0.0, vec![0.0, -2.0]));

        let x2x2 = covariant_derivative(&g, 0.5, CoordField::X(1), CoordField::X(1)).unwrap();
        assert_abs_diff_eq!(x2x2.v, 2.0 * (-2.0f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn invalid_field_index() {
        let g = HeintzeGroup::new(vec![1.0]).unwrap();
        assert!(covariant_derivative(&g, 0.0, CoordField::X(1), CoordField::Y).is_err());
    }

    #[test]
    fn constant_curvature_in_dimension_one() {
        let a = 1.7;
        let g = HeintzeGroup::new(vec![a]).unwrap();
        let k = sectional_curvature_fd(&g, 0.3, &Tangent::vertical(1), &Tangent::horizontal(1, 0), 1e-4).unwrap();
        assert_abs_diff_eq!(k, -a * a, epsilon = 1e-6);
        let k2 = sectional_curvature_fd(
            &g,
            -2.0,
            &Tangent::new(0.3, vec![5.0]),
            &Tangent::new(-1.0, vec![2.0]),
            1e-4,
        )
        .unwrap();
        assert_abs_diff_eq!(k2, -a * a, epsilon = 1e-6);
    }

    #[test]
    fn degenerate_plane_rejected() {
        let g = HeintzeGroup::new(vec![1.0, 2.0]).unwrap();
        let w = Tangent::new(1.0, vec![2.0, 3.0]);
        let err = sectional_curvature_fd(&g, 0.0, &w, &w.scaled(2.0), 1e-4);
        assert!(matches!(err, Err(Error::DegeneratePlane { .. })));
    }
}
