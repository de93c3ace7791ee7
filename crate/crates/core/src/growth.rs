//! Ball volumes on meshes and log-log growth fits.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::HeintzeGroup;
use crate::mesh::SurfaceMesh;

/// Largest radius `r` with `𝓑(r) ⊂ 𝓗(t_max)`.
///
/// On every face the `dy²` coefficient is at least `λ_1²/4 e^{-λ_1 y}`, so
/// reaching depth `t` from `𝓗₀` costs at least `e^{λ_1 t/2} − 1`.
pub fn approx_r_valid(g: &HeintzeGroup, t_max: f64) -> f64 {
    (0.5 * g.lambda_min() * t_max).exp() - 1.0
}

/// Smallest truncation depth for which radius `r` is valid.
pub fn required_t_max(g: &HeintzeGroup, r: f64) -> f64 {
    2.0 / g.lambda_min() * (r + 1.0).ln()
}

/// The constant `Ĉ₃` in `r_valid = e^{λ_1 (t_max − Ĉ₃)/2}`.
pub fn c3_hat(g: &HeintzeGroup, t_max: f64) -> f64 {
    t_max - 2.0 / g.lambda_min() * approx_r_valid(g, t_max).ln()
}

/// Truncation depth for a target radius: `(2/λ_1) ln r_max + margin`.
pub fn t_max_for(g: &HeintzeGroup, r_max: f64, margin: f64) -> f64 {
    2.0 / g.lambda_min() * r_max.ln() + margin
}

/// `(r, Vol(dist ≤ r))` for each radius, counting whole cells.
pub fn ball_volumes(
    mesh: &SurfaceMesh,
    dists: &[f64],
    radii: &[f64],
    r_valid: f64,
    t_needed: impl Fn(f64) -> f64,
) -> Result<Vec<(f64, f64)>> {
    if let Some(&r) = radii.iter().find(|r| **r > r_valid) {
        return Err(Error::Truncation {
            r,
            r_valid,
            required_t_max: t_needed(r),
        });
    }
    let mut order: Vec<usize> = (0..mesh.len()).filter(|v| dists[*v].is_finite()).collect();
    order.sort_by(|a, b| dists[*a].total_cmp(&dists[*b]).then(a.cmp(b)));
    let mut cum = Vec::with_capacity(order.len());
    let mut acc = 0.0;
    for &v in &order {
        acc += mesh.area[v];
        cum.push(acc);
    }
    Ok(radii
        .iter()
        .map(|&r| {
            let k = order.partition_point(|v| dists[*v] <= r);
            (r, if k == 0 { 0.0 } else { cum[k - 1] })
        })
        .collect())
}

/// Geometric grid from `r_lo` up to at most `r_hi` with `per_octave` points per doubling.
pub fn dyadic_radii(r_lo: f64, r_hi: f64, per_octave: usize) -> Vec<f64> {
    let n = ((r_hi / r_lo).log2() * per_octave as f64 + 1e-9).floor() as usize;
    (0..=n)
        .map(|k| r_lo * 2f64.powf(k as f64 / per_octave as f64))
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GrowthFit {
    pub r_window: (f64, f64),
    pub exponent: f64,
    pub intercept: f64,
    /// Largest absolute residual in `log V`.
    pub residual_max: f64,
    pub points: Vec<(f64, f64)>,
}

/// Least-squares slope of `log V` against `log r` over points with `r` in `window`.
pub fn fit_growth(points: &[(f64, f64)], window: (f64, f64)) -> Result<GrowthFit> {
    let sel: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|(r, _)| *r >= window.0 && *r <= window.1)
        .collect();
    if sel.len() < 5 {
        return Err(Error::InsufficientData {
            got: sel.len(),
            need: 5,
        });
    }
    if let Some((r, v)) = sel.iter().find(|(r, v)| !(*r > 0.0 && *v > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "growth fit needs positive radii and volumes, got ({r}, {v})"
        )));
    }
    let n = sel.len() as f64;
    let lx: Vec<f64> = sel.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = sel.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let residual_max = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - exponent * x).abs())
        .fold(0.0, f64::max);
    Ok(GrowthFit {
        r_window: window,
        exponent,
        intercept,
        residual_max,
        points: sel,
    })
}

/// CSV with header `r,volume,log_r,log_volume`.
pub fn write_growth_csv<W: Write>(mut w: W, points: &[(f64, f64)]) -> std::io::Result<()> {
    writeln!(w, "r,volume,log_r,log_volume")?;
    for &(r, v) in points {
        writeln!(w, "{r:.10e},{v:.10e},{:.10e},{:.10e}", r.ln(), v.ln())?;
    }
    Ok(())
}

/// Euclidean unit-ball volume `ω_d = π^{d/2} / Γ(d/2 + 1)`.
pub fn unit_ball_volume(d: usize) -> f64 {
    // Γ(d/2 + 1) by the half-integer recursion
    let mut gamma = if d.is_multiple_of(2) {
        1.0
    } else {
        std::f64::consts::PI.sqrt() / 2.0
    };
    let mut a = if d.is_multiple_of(2) { 1.0 } else { 1.5 };
    while a < d as f64 / 2.0 + 1.0 - 1e-9 {
        gamma *= a;
        a += 1.0;
    }
    std::f64::consts::PI.powf(d as f64 / 2.0) / gamma
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn power_laws_are_recovered() {
        let pts: Vec<(f64, f64)> = dyadic_radii(1.0, 64.0, 2).into_iter().map(|r| (r, r.powi(3))).collect();
        let f = fit_growth(&pts, (1.0, 64.0)).unwrap();
        assert_abs_diff_eq!(f.exponent, 3.0, epsilon = 1e-12);
        assert!(f.residual_max < 1e-12);
        let pts2: Vec<(f64, f64)> = pts.iter().map(|(r, v)| (*r, 2.0 * v)).collect();
        let f2 = fit_growth(&pts2, (1.0, 64.0)).unwrap();
        assert_abs_diff_eq!(f2.exponent, 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f2.intercept, 2f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn too_few_points() {
        let pts = [(1.0, 1.0), (2.0, 8.0), (4.0, 64.0), (8.0, 512.0)];
        assert!(matches!(
            fit_growth(&pts, (1.0, 8.0)),
            Err(Error::InsufficientData { got: 4, need: 5 })
        ));
    }

    #[test]
    fn unit_balls() {
        assert_abs_diff_eq!(unit_ball_volume(1), 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(unit_ball_volume(2), std::f64::consts::PI, epsilon = 1e-14);
        assert_abs_diff_eq!(unit_ball_volume(3), 4.0 / 3.0 * std::f64::consts::PI, epsilon = 1e-14);
        assert_abs_diff_eq!(unit_ball_volume(4), std::f64::consts::PI.powi(2) / 2.0, epsilon = 1e-14);
    }

    #[test]
    fn truncation_constants() {
        let g = HeintzeGroup::new(vec![1.0, 2.0]).unwrap();
        let t = t_max_for(&g, 128.0, 4.0);
        assert!(approx_r_valid(&g, t) >= 128.0);
        assert!(c3_hat(&g, t) > 0.0);
        assert_abs_diff_eq!(approx_r_valid(&g, required_t_max(&g, 50.0)), 50.0, epsilon = 1e-9);
    }
}
