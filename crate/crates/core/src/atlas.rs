//! The approximate horosphere `𝓗 = ∂(V ∩ {y ≤ 0})` and its `2d + 1` faces.
//!
//! `𝓗₀ = {y = 0, max |x_i| ≤ 1}` is flat. The face `𝓗ᵢ±` is
//! `{x_i = ±e^{λ_i y/2}, |x_j| ≤ e^{λ_j y/2} (j ≠ i), y ≤ 0}`, charted by
//! `(y, x_ĵ)` with pullback metric
//! `(1 + λ_i²/4 e^{-λ_i y}) dy² + Σ_{j≠i} e^{-2λ_j y} dx_j²`.
//! In normalized coordinates `ξ_j = e^{-λ_j y/2} x_j ∈ [−1, 1]` the area
//! element is `√(1 + λ_i²/4 e^{-λ_i y}) Π_{j≠i} e^{-λ_j y/2} dy dξ`, constant in `ξ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{HeintzeGroup, Point};
use crate::quadrature::integrate;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FaceKind {
    H0,
    Plus(usize),
    Minus(usize),
}

impl FaceKind {
    /// Dense chart id: `0` for `𝓗₀`, then `𝓗₁⁺, 𝓗₁⁻, 𝓗₂⁺, …`.
    pub fn id(self) -> usize {
        match self {
            FaceKind::H0 => 0,
            FaceKind::Plus(i) => 1 + 2 * i,
            FaceKind::Minus(i) => 2 + 2 * i,
        }
    }

    pub fn from_id(id: usize) -> Self {
        match id {
            0 => FaceKind::H0,
            k if k % 2 == 1 => FaceKind::Plus((k - 1) / 2),
            k => FaceKind::Minus((k - 2) / 2),
        }
    }

    /// Active coordinate and sign for side faces.
    pub fn side(self) -> Option<(usize, f64)> {
        match self {
            FaceKind::H0 => None,
            FaceKind::Plus(i) => Some((i, 1.0)),
            FaceKind::Minus(i) => Some((i, -1.0)),
        }
    }

    pub fn label(self) -> String {
        match self {
            FaceKind::H0 => "H0".into(),
            FaceKind::Plus(i) => format!("H{}+", i + 1),
            FaceKind::Minus(i) => format!("H{}-", i + 1),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FaceChart {
    pub kind: FaceKind,
    lambdas: Vec<f64>,
    /// Faces are truncated to `y ≥ −t_max`.
    pub t_max: f64,
}

impl FaceChart {
    pub fn dim(&self) -> usize {
        self.lambdas.len()
    }

    /// Parameter box: `[−1, 1]^d` for `𝓗₀`, otherwise `y ∈ [−t_max, 0]` and
    /// `ξ ∈ [−1, 1]^{d−1}`.
    pub fn param_domain(&self) -> Vec<(f64, f64)> {
        match self.kind {
            FaceKind::H0 => vec![(-1.0, 1.0); self.dim()],
            _ => std::iter::once((-self.t_max, 0.0))
                .chain(std::iter::repeat_n((-1.0, 1.0), self.dim() - 1))
                .collect(),
        }
    }

    /// Free coordinates `ĵ` of a side face, ascending.
    pub fn free_coords(&self) -> Vec<usize> {
        match self.kind.side() {
            None => (0..self.dim()).collect(),
            Some((i, _)) => (0..self.dim()).filter(|j| *j != i).collect(),
        }
    }

    /// Ambient point for chart parameters: `x` on `𝓗₀`, `(y, x_ĵ)` on a side face.
    pub fn embed(&self, params: &[f64]) -> Point {
        match self.kind.side() {
            None => Point::new(0.0, params.to_vec()),
            Some((i, s)) => {
                let y = params[0];
                let mut x = vec![0.0; self.dim()];
                x[i] = s * (0.5 * self.lambdas[i] * y).exp();
                for (k, j) in self.free_coords().into_iter().enumerate() {
                    x[j] = params[k + 1];
                }
                Point::new(y, x)
            }
        }
    }

    /// Ambient point for normalized parameters `(y, ξ)` (ignored `y` on `𝓗₀`).
    pub fn embed_normalized(&self, y: f64, xi: &[f64]) -> Point {
        match self.kind.side() {
            None => Point::new(0.0, xi.to_vec()),
            Some(_) => {
                let mut params = vec![y];
                for (k, j) in self.free_coords().into_iter().enumerate() {
                    params.push(xi[k] * (0.5 * self.lambdas[j] * y).exp());
                }
                self.embed(&params)
            }
        }
    }

    /// Diagonal pullback metric coefficients at chart parameters.
    pub fn pullback_metric(&self, params: &[f64]) -> Vec<f64> {
        match self.kind.side() {
            None => vec![1.0; self.dim()],
            Some((i, _)) => {
                let y = params[0];
                let l = self.lambdas[i];
                std::iter::once(1.0 + 0.25 * l * l * (-l * y).exp())
                    .chain(
                        self.free_coords()
                            .into_iter()
                            .map(|j| (-2.0 * self.lambdas[j] * y).exp()),
                    )
                    .collect()
            }
        }
    }

    /// Area density with respect to `dy dξ` (or `dx` on `𝓗₀`).
    pub fn area_density(&self, y: f64) -> f64 {
        match self.kind.side() {
            None => 1.0,
            Some((i, _)) => face_density(&self.lambdas, i, y),
        }
    }

    pub fn contains(&self, params: &[f64]) -> bool {
        match self.kind.side() {
            None => params.iter().all(|x| x.abs() <= 1.0),
            Some(_) => {
                let y = params[0];
                if !(y <= 0.0 && y >= -self.t_max) {
                    return false;
                }
                self.free_coords()
                    .into_iter()
                    .enumerate()
                    .all(|(k, j)| params[k + 1].abs() <= (0.5 * self.lambdas[j] * y).exp() * (1.0 + 1e-12))
            }
        }
    }
}

pub(crate) fn face_density(lambdas: &[f64], i: usize, y: f64) -> f64 {
    let l = lambdas[i];
    let others: f64 = lambdas
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != i)
        .map(|(_, lj)| -0.5 * lj * y)
        .sum();
    (1.0 + 0.25 * l * l * (-l * y).exp()).sqrt() * others.exp()
}

/// The `2d + 1` charts of `𝓗` truncated at `y ≥ −t_max`, in chart-id order.
pub fn build_atlas(g: &HeintzeGroup, t_max: f64) -> Result<Vec<FaceChart>> {
    if !(t_max > 0.0) || !t_max.is_finite() {
        return Err(Error::InvalidArgument(format!("t_max must be positive, got {t_max}")));
    }
    Ok((0..2 * g.dim() + 1)
        .map(|id| FaceChart {
            kind: FaceKind::from_id(id),
            lambdas: g.lambdas().to_vec(),
            t_max,
        })
        .collect())
}

/// Volume of one side face `𝓗ᵢ±` truncated at depth `t`:
/// `2^{d−1} ∫_{−t}^0 e^{-(λ_1+⋯+λ_d) y/2} (e^{λ_i y} + λ_i²/4)^{1/2} dy`.
pub fn face_volume_closed(g: &HeintzeGroup, i: usize, t: f64) -> Result<f64> {
    if i >= g.dim() {
        return Err(Error::InvalidArgument(format!("face index {i} out of range")));
    }
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("depth must be nonnegative, got {t}")));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let sum = g.lambda_sum();
    let li = g.lambda(i);
    let (v, _) = integrate(
        |y| (-0.5 * sum * y).exp() * ((li * y).exp() + 0.25 * li * li).sqrt(),
        -t,
        0.0,
        0.0,
        1e-12,
    );
    Ok(2f64.powi(g.dim() as i32 - 1) * v)
}

/// Total volume of `𝓗(t)`: `2^d` plus both sides of every face.
pub fn total_volume_closed(g: &HeintzeGroup, t: f64) -> Result<f64> {
    let mut v = 2f64.powi(g.dim() as i32);
    for i in 0..g.dim() {
        v += 2.0 * face_volume_closed(g, i, t)?;
    }
    Ok(v)
}
