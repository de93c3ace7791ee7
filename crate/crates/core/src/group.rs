//! The model space: `ℝ × ℝ^d` with metric `dy² + Σ e^{-2λ_i y} dx_i²`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of a real diagonal Heintze group `ℝ ⋉_A ℝ^d`, `A = diag(λ_1, …, λ_d)`.
///
/// Eigenvalues are stored in ascending order; order carries no meaning.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeintzeGroup {
    lambdas: Vec<f64>,
}

impl HeintzeGroup {
    pub fn new(mut lambdas: Vec<f64>) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(Error::InvalidArgument("need at least one eigenvalue".into()));
        }
        if let Some(bad) = lambdas.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "eigenvalues must be positive and finite, got {bad}"
            )));
        }
        lambdas.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(Self { lambdas })
    }

    pub fn dim(&self) -> usize {
        self.lambdas.len()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn lambda(&self, i: usize) -> f64 {
        self.lambdas[i]
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambdas[0]
    }

    pub fn lambda_max(&self) -> f64 {
        *self.lambdas.last().unwrap()
    }

    pub fn lambda_sum(&self) -> f64 {
        self.lambdas.iter().sum()
    }

    /// Growth exponent `k = (λ_1 + … + λ_d) / λ_1` of the non-Euclidean horospheres.
    pub fn growth_exponent(&self) -> f64 {
        self.lambda_sum() / self.lambda_min()
    }

    /// Metric coefficient `e^{-2λ_i y}` of `dx_i²`.
    #[inline]
    pub fn weight(&self, i: usize, y: f64) -> f64 {
        (-2.0 * self.lambdas[i] * y).exp()
    }

    /// `g_p(w1, w2)` for tangent components `(v, u)` at height `y`.
    pub fn inner(&self, y: f64, w1: &Tangent, w2: &Tangent) -> f64 {
        debug_assert_eq!(w1.u.len(), self.dim());
        let horiz: f64 = (0..self.dim()).map(|i| self.weight(i, y) * w1.u[i] * w2.u[i]).sum();
        w1.v * w2.v + horiz
    }

    pub fn norm(&self, y: f64, w: &Tangent) -> f64 {
        self.inner(y, w, w).max(0.0).sqrt()
    }

    /// Horizontal norm `|u|_y` on the horosphere `{y} × ℝ^d`.
    pub fn horizontal_norm(&self, y: f64, u: &[f64]) -> f64 {
        u.iter()
            .enumerate()
            .map(|(i, ui)| self.weight(i, y) * ui * ui)
            .sum::<f64>()
            .sqrt()
    }

    /// Vertical translation `(t, x) ↦ (t + s, e^{sA} x)`.
    pub fn tau(&self, s: f64, p: &Point) -> Point {
        Point {
            y: p.y + s,
            x: p.x
                .iter()
                .zip(&self.lambdas)
                .map(|(xi, l)| xi * (s * l).exp())
                .collect(),
        }
    }

    /// Differential of [`tau`](Self::tau): `(v, u) ↦ (v, e^{sA} u)`.
    pub fn tau_push(&self, s: f64, w: &Tangent) -> Tangent {
        Tangent {
            v: w.v,
            u: w.u
                .iter()
                .zip(&self.lambdas)
                .map(|(ui, l)| ui * (s * l).exp())
                .collect(),
        }
    }

    /// Horizontal translation `T_z(t, x) = (t, x + z)`. Its differential is the identity.
    pub fn translate(&self, z: &[f64], p: &Point) -> Point {
        Point {
            y: p.y,
            x: p.x.iter().zip(z).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn origin(&self) -> Point {
        Point::new(0.0, vec![0.0; self.dim()])
    }
}

/// A point `(y, x)` of the group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub y: f64,
    pub x: Vec<f64>,
}

impl Point {
    pub fn new(y: f64, x: Vec<f64>) -> Self {
        Self { y, x }
    }

    pub fn on_axis(y: f64, d: usize) -> Self {
        Self { y, x: vec![0.0; d] }
    }

    pub fn is_finite(&self) -> bool {
        self.y.is_finite() && self.x.iter().all(|v| v.is_finite())
    }
}

/// Tangent components `v ∂_y + Σ u_i ∂_{x_i}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tangent {
    pub v: f64,
    pub u: Vec<f64>,
}

impl Tangent {
    pub fn new(v: f64, u: Vec<f64>) -> Self {
        Self { v, u }
    }

    pub fn zero(d: usize) -> Self {
        Self {
            v: 0.0,
            u: vec![0.0; d],
        }
    }

    /// `∂_y`.
    pub fn vertical(d: usize) -> Self {
        Self {
            v: 1.0,
            u: vec![0.0; d],
        }
    }

    /// `∂_{x_i}`.
    pub fn horizontal(d: usize, i: usize) -> Self {
        let mut u = vec![0.0; d];
        u[i] = 1.0;
        Self { v: 0.0, u }
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            v: self.v * a,
            u: self.u.iter().map(|c| c * a).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.v == 0.0 && self.u.iter().all(|c| *c == 0.0)
    }
}

/// A tangent vector attached to its base point.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentVector {
    pub base: Point,
    pub w: Tangent,
}

impl TangentVector {
    pub fn norm(&self, g: &HeintzeGroup) -> f64 {
        g.norm(self.base.y, &self.w)
    }
}
