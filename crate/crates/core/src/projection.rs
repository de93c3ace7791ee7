//! Balls of `𝓗` far down a face and the vertical projection `Π_{y_p}(y, x) = (y_p, x)`.
//!
//! For fixed `r`, a ball `B_𝓗(p, r)` flattens as `y_p → −∞`: heights inside it
//! differ from `y_p` by at most `C(r) e^{λ_1 y_p/2}` with `C(r) = 2λ_1^{-1} r e^{λ_1 r/2}`,
//! the projection is almost an isometry on it, and its volume tends to `ω_d r^d`.
//! These balls are far smaller than the `𝓗` mesh spacing at that depth, so they
//! are probed on a local patch of the face with absolute spacing.

use serde::{Deserialize, Serialize};

use crate::atlas::FaceKind;
use crate::error::{Error, Result};
use crate::group::{HeintzeGroup, Point};
use crate::growth::unit_ball_volume;
use crate::mesh::{constrained_length, MeshParts, SurfaceMesh};
use crate::shortest::dijkstra;

/// Singular-value ratios of `dΠ_{y_p}` at `q ∈ 𝓗ᵢ±`, indexed by coordinate:
/// entry `j ≠ i` is `e^{λ_j (y − y_p)}` along `X_j`, entry `i` is
/// `(λ_i/2) e^{λ_i y/2} e^{−λ_i y_p} / (1 + λ_i²/4 e^{−λ_i y})^{1/2}` along
/// `Z_i = ∂_y ± (λ_i/2) e^{λ_i y/2} X_i`.
pub fn projection_jacobian(g: &HeintzeGroup, face: FaceKind, q: &Point, y_p: f64) -> Result<Vec<f64>> {
    let (i, s) = face
        .side()
        .ok_or_else(|| Error::InvalidArgument("projection ratios need a side face".into()))?;
    let li = g.lambda(i);
    if ((-0.5 * li * q.y).exp() * s * q.x[i] - 1.0).abs() > 1e-9 || q.y > 0.0 {
        return Err(Error::InvalidArgument(format!("point is not on face {}", face.label())));
    }
    Ok((0..g.dim())
        .map(|j| {
            let l = g.lambda(j);
            if j == i {
                0.5 * l * (0.5 * l * q.y - l * y_p).exp() / (1.0 + 0.25 * l * l * (-l * q.y).exp()).sqrt()
            } else {
                (l * (q.y - y_p)).exp()
            }
        })
        .collect())
}

/// `C(r) = 2λ_1^{-1} r e^{λ_1 r/2}`.
pub fn drift_constant(g: &HeintzeGroup, r: f64) -> f64 {
    let l = g.lambda_min();
    2.0 / l * r * (0.5 * l * r).exp()
}

/// A uniform grid on one chart around a centre vertex.
#[derive(Clone, Debug)]
pub struct Patch {
    pub face: FaceKind,
    pub mesh: SurfaceMesh,
    pub center: usize,
    /// Vertices on the outer layer of the grid.
    pub boundary: Vec<bool>,
}

fn stencil(d: usize) -> Vec<Vec<i64>> {
    fn gcd(a: i64, b: i64) -> i64 {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    let mut out = Vec::new();
    for code in 0..5usize.pow(d as u32) {
        let mut c = code;
        let off: Vec<i64> = (0..d)
            .map(|_| {
                let v = (c % 5) as i64 - 2;
                c /= 5;
                v
            })
            .collect();
        if off.iter().fold(0, |a, &b| gcd(a, b.abs())) == 1 {
            out.push(off);
        }
    }
    out
}

/// Patch centred at `y = y_p`, `x_ĵ = 0` on `face` (anywhere on `𝓗₀`, at `x = 0`),
/// covering metric half-width `half` with spacing about `spacing` per axis. Edges
/// use every primitive offset in `{−2, …, 2}^d`.
pub fn local_patch(g: &HeintzeGroup, face: FaceKind, y_p: f64, half: f64, spacing: f64) -> Result<Patch> {
    if !(spacing > 0.0 && half > spacing) {
        return Err(Error::InvalidArgument(format!(
            "patch needs 0 < spacing < half-width, got {spacing} and {half}"
        )));
    }
    let d = g.dim();
    let side = face.side();
    let y0 = if side.is_some() { y_p } else { 0.0 };
    // parameter steps from the metric at the centre
    let steps: Vec<f64> = match side {
        None => vec![spacing; d],
        Some((i, _)) => {
            let li = g.lambda(i);
            std::iter::once(spacing / (1.0 + 0.25 * li * li * (-li * y0).exp()).sqrt())
                .chain((0..d).filter(|j| *j != i).map(|j| spacing * (g.lambda(j) * y0).exp()))
                .collect()
        }
    };
    let m = (half / spacing).ceil() as i64;
    let n = (2 * m + 1) as usize;
    let total = n.pow(d as u32);
    let unravel = |mut k: usize| -> Vec<i64> {
        (0..d)
            .map(|_| {
                let v = (k % n) as i64 - m;
                k /= n;
                v
            })
            .collect()
    };
    let point_of = |idx: &[i64]| -> Point {
        match side {
            None => Point::new(0.0, idx.iter().zip(&steps).map(|(k, h)| *k as f64 * h).collect()),
            Some((i, s)) => {
                let y = y0 + idx[0] as f64 * steps[0];
                let mut x = vec![0.0; d];
                x[i] = s * (0.5 * g.lambda(i) * y).exp();
                for (k, j) in (0..d).filter(|j| *j != i).enumerate() {
                    x[j] = idx[k + 1] as f64 * steps[k + 1];
                }
                Point::new(y, x)
            }
        }
    };
    let mut parts = MeshParts {
        dim: d,
        chart: vec![face.id() as u16; total],
        params: Vec::with_capacity(total * d),
        y: Vec::with_capacity(total),
        x: Vec::with_capacity(total * d),
        area: Vec::with_capacity(total),
        edges: Vec::new(),
        sources: vec![(total - 1) / 2],
        resolution: spacing,
        layout_id: Vec::new(),
    };
    let mut boundary = Vec::with_capacity(total);
    let cell: f64 = steps.iter().product();
    for k in 0..total {
        let idx = unravel(k);
        let p = point_of(&idx);
        let density = match side {
            None => 1.0,
            Some((i, _)) => {
                let li = g.lambda(i);
                let others: f64 = (0..d).filter(|j| *j != i).map(|j| -g.lambda(j) * p.y).sum();
                (1.0 + 0.25 * li * li * (-li * p.y).exp()).sqrt() * others.exp()
            }
        };
        if let Some((i, _)) = side {
            if p.y > 0.0 || (0..d).any(|j| j != i && p.x[j].abs() > (0.5 * g.lambda(j) * p.y).exp()) {
                return Err(Error::InvalidArgument(format!(
                    "patch around y = {y_p} leaves face {}; move the centre down",
                    face.label()
                )));
            }
        }
        match side {
            None => parts.params.extend(&p.x),
            Some((i, _)) => {
                parts.params.push(p.y);
                parts.params.extend((0..d).filter(|j| *j != i).map(|j| p.x[j]));
            }
        }
        parts.y.push(p.y);
        parts.x.extend(&p.x);
        parts.area.push(density * cell);
        boundary.push(idx.iter().any(|v| v.abs() == m));
    }
    let constrained: Vec<usize> = side.map(|(i, _)| vec![i]).unwrap_or_default();
    let offs = stencil(d);
    for k in 0..total {
        let idx = unravel(k);
        for off in &offs {
            let nb: Vec<i64> = idx.iter().zip(off).map(|(a, b)| a + b).collect();
            if nb.iter().any(|v| v.abs() > m) {
                continue;
            }
            let kb = nb.iter().rev().fold(0usize, |acc, v| acc * n + (v + m) as usize);
            if kb <= k {
                continue;
            }
            let len = constrained_length(g, &point_of(&idx), &point_of(&nb), &constrained);
            parts.edges.push((k as u32, kb as u32, len));
        }
    }
    let mesh = SurfaceMesh::from_parts(parts)?;
    Ok(Patch {
        face,
        center: (total - 1) / 2,
        mesh,
        boundary,
    })
}

/// `Vol(B(p, r)) / (ω_d r^d)` from single-source distances `dists` out of `p`.
pub fn controlled_volume_probe(patch: &Patch, dists: &[f64], r: f64) -> Result<f64> {
    if let Some(v) = (0..patch.mesh.len()).find(|v| patch.boundary[*v] && dists[*v] <= r) {
        return Err(Error::Mesh(format!(
            "ball of radius {r} reaches the patch boundary at vertex {v}"
        )));
    }
    let vol: f64 = (0..patch.mesh.len())
        .filter(|v| dists[*v] <= r)
        .map(|v| patch.mesh.area[v])
        .sum();
    Ok(vol / (unit_ball_volume(patch.mesh.dim) * r.powi(patch.mesh.dim as i32)))
}

/// Largest `|y(q) − y(p)| e^{−λ_1 y_p/2} / C(r)` over vertices `q` with `dist(p, q) ≤ r`.
pub fn vertical_drift_bound_check(g: &HeintzeGroup, mesh: &SurfaceMesh, p: usize, dists: &[f64], r: f64) -> f64 {
    let y_p = mesh.y[p];
    let scale = (-0.5 * g.lambda_min() * y_p).exp() / drift_constant(g, r);
    (0..mesh.len())
        .filter(|q| dists[*q] <= r)
        .map(|q| (mesh.y[q] - y_p).abs() * scale)
        .fold(0.0, f64::max)
}

/// Everything measured on one ball `B(p, r)` far down a face.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BallProbe {
    pub face: String,
    pub y_p: f64,
    pub r: f64,
    pub vertices: usize,
    /// `Vol(B) / (ω_d r^d)`.
    pub ratio: f64,
    /// `ratio` divided by the same quantity on a flat patch with the same grid.
    pub calibrated: f64,
    /// Largest `|σ − 1|` over projection ratios at ball vertices.
    pub jacobian_deviation: f64,
    /// Normalized vertical drift, see [`vertical_drift_bound_check`].
    pub drift: f64,
    /// Largest `|y(q) − y_p|` over the ball.
    pub height_span: f64,
}

/// Ball-volume ratio of a flat `d`-dimensional grid with the same stencil.
pub fn flat_ratio(d: usize, r: f64, spacing: f64) -> Result<f64> {
    let g = HeintzeGroup::new(vec![1.0; d])?;
    let patch = local_patch(&g, FaceKind::H0, 0.0, 1.15 * r + 2.0 * spacing, spacing)?;
    let dists = dijkstra(&patch.mesh, &[patch.center], r * 1.0001);
    controlled_volume_probe(&patch, &dists, r)
}

/// Probe `B(p, r)` for `p` on `face` at height `y_p`, `ξ = 0`.
pub fn ball_probe(g: &HeintzeGroup, face: FaceKind, y_p: f64, r: f64, spacing: f64, flat: f64) -> Result<BallProbe> {
    let patch = local_patch(g, face, y_p, 1.15 * r + 2.0 * spacing, spacing)?;
    let dists = dijkstra(&patch.mesh, &[patch.center], r * 1.0001);
    let ratio = controlled_volume_probe(&patch, &dists, r)?;
    let mut dev: f64 = 0.0;
    let mut span: f64 = 0.0;
    for q in (0..patch.mesh.len()).filter(|q| dists[*q] <= r) {
        span = span.max((patch.mesh.y[q] - y_p).abs());
        for s in projection_jacobian(g, face, &patch.mesh.point(q), y_p)? {
            dev = dev.max((s - 1.0).abs());
        }
    }
    Ok(BallProbe {
        face: face.label(),
        y_p,
        r,
        vertices: patch.mesh.len(),
        ratio,
        calibrated: ratio / flat,
        jacobian_deviation: dev,
        drift: vertical_drift_bound_check(g, &patch.mesh, patch.center, &dists, r),
        height_span: span,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ratios_at_zero_height_gap() {
        let g = HeintzeGroup::new(vec![1.0, 2.0]).unwrap();
        let y = -3.0;
        let q = Point::new(y, vec![(0.5 * y).exp(), 0.1]);
        let s = projection_jacobian(&g, FaceKind::Plus(0), &q, y).unwrap();
        assert_eq!(s[1], 1.0);
        let g1 = HeintzeGroup::new(vec![1.0]).unwrap();
        let q = Point::new(-20.0, vec![(-10.0f64).exp()]);
        let z = projection_jacobian(&g1, FaceKind::Plus(0), &q, -20.0).unwrap()[0];
        let direct = 0.5 * (-10.0f64).exp() * 20f64.exp() / (1.0 + 20f64.exp() / 4.0).sqrt();
        assert_relative_eq!(z, direct, max_relative = 1e-14);
        assert_relative_eq!(z, 1.0, max_relative = 1e-8);
        let off = Point::new(-2.0, vec![0.1, 0.2]);
        assert!(projection_jacobian(&g, FaceKind::Plus(1), &off, -2.0).is_err());
    }

    #[test]
    fn stencil_sizes() {
        assert_eq!(stencil(1).len(), 2);
        assert_eq!(stencil(2).len(), 16);
    }

    #[test]
    fn flat_disc() {
        let f = flat_ratio(2, 1.0, 0.05).unwrap();
        assert!((f - 1.0).abs() < 0.05, "{f}");
    }

    #[test]
    fn zero_radius_drift() {
        let g = HeintzeGroup::new(vec![1.0, 2.0]).unwrap();
        let patch = local_patch(&g, FaceKind::Plus(0), -8.0, 0.5, 0.1).unwrap();
        let dists = dijkstra(&patch.mesh, &[patch.center], 0.0);
        assert_eq!(
            vertical_drift_bound_check(&g, &patch.mesh, patch.center, &dists, 1.0),
            0.0
        );
    }
}
