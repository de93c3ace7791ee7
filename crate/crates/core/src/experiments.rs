//! Seeded measurement pipelines, one per audit. They return raw numbers;
//! callers decide pass or fail.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::atlas::{face_volume_closed, FaceKind};
use crate::coarse::{c_rho_from_pairs, measure_rho, RhoAudit, RhoAuditPair};
use crate::connection::sectional_curvature_fd;
use crate::convexity::{convexity_probe, normal, sample_states};
use crate::error::{Error, Result};
use crate::geodesic::{integrate_geodesic, GeodesicState};
use crate::group::{HeintzeGroup, Point, Tangent};
use crate::growth::{approx_r_valid, ball_volumes, dyadic_radii, fit_growth, required_t_max, GrowthFit};
use crate::horosphere::{
    euclidean_horosphere_mesh, horosphere_mesh, sample_horosphere, sheet_r_valid, HorosphereSample,
};
use crate::mesh::{build_mesh, Layout, SurfaceMesh};
use crate::par;
use crate::projection::{ball_probe, flat_ratio, BallProbe};
use crate::shortest::{dijkstra, mesh_distance_from_sources};

fn random_tangent(rng: &mut ChaCha8Rng, d: usize) -> Tangent {
    Tangent::new(normal(rng), (0..d).map(|_| normal(rng)).collect())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CurvatureScan {
    pub samples: Vec<f64>,
    pub min: f64,
    pub max: f64,
    /// `−λ_d²`.
    pub lower: f64,
    /// `−λ_1²`.
    pub upper: f64,
}

/// Sectional curvature of `samples` random planes at heights in `[−3, 3]`.
pub fn curvature_scan(g: &HeintzeGroup, samples: usize, seed: u64, h: f64) -> Result<CurvatureScan> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = g.dim();
    let planes: Vec<(f64, Tangent, Tangent)> = (0..samples)
        .map(|_| {
            (
                rng.gen_range(-3.0..=3.0),
                random_tangent(&mut rng, d),
                random_tangent(&mut rng, d),
            )
        })
        .collect();
    let values = par::try_map(&planes, |(y, w1, w2)| sectional_curvature_fd(g, *y, w1, w2, h))?;
    Ok(CurvatureScan {
        min: values.iter().copied().fold(f64::INFINITY, f64::min),
        max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        samples: values,
        lower: -g.lambda_max().powi(2),
        upper: -g.lambda_min().powi(2),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeodesicRun {
    pub start: Point,
    pub velocity: Tangent,
    pub speed_drift: f64,
    pub momentum_drift: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeodesicAudit {
    pub runs: Vec<GeodesicRun>,
    pub max_speed_drift: f64,
    pub max_momentum_drift: f64,
}

/// Integrate `runs` seeded unit-speed geodesics over `[0, t_end]`.
pub fn geodesic_audit(g: &HeintzeGroup, runs: usize, t_end: f64, step: f64, seed: u64) -> Result<GeodesicAudit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = g.dim();
    let starts: Vec<(Point, Tangent)> = (0..runs)
        .map(|_| {
            let y = rng.gen_range(-2.0..=2.0);
            let x = (0..d).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let p = Point::new(y, x);
            let w = random_tangent(&mut rng, d);
            let n = g.norm(p.y, &w);
            (p, w.scaled(1.0 / n))
        })
        .collect();
    let out = par::try_map(&starts, |(p, w)| -> Result<GeodesicRun> {
        let path = integrate_geodesic(g, &GeodesicState::new(g, p.clone(), w.clone()), t_end, step)?;
        Ok(GeodesicRun {
            start: p.clone(),
            velocity: w.clone(),
            speed_drift: path.speed_drift,
            momentum_drift: path.momentum_drift.iter().copied().fold(0.0, f64::max),
        })
    })?;
    Ok(GeodesicAudit {
        max_speed_drift: out.iter().map(|r| r.speed_drift).fold(0.0, f64::max),
        max_momentum_drift: out.iter().map(|r| r.momentum_drift).fold(0.0, f64::max),
        runs: out,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RhoSweep {
    pub points: Vec<(Point, Point)>,
    pub audit: RhoAudit,
    /// Largest `ρ − dist` with `dist` below and above `split`.
    pub max_low: f64,
    pub max_high: f64,
    pub split: f64,
}

/// `ρ − dist` on `n` seeded pairs whose distance lies in `range`. Candidates
/// are drawn at horizontal separations spread over the range, a quarter of
/// them nearly vertical, and kept when the measured distance falls inside it.
pub fn rho_sweep(g: &HeintzeGroup, n: usize, range: (f64, f64), split: f64, seed: u64, tol: f64) -> Result<RhoSweep> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = g.dim();
    let mut points = Vec::with_capacity(n);
    let mut measured: Vec<RhoAuditPair> = Vec::with_capacity(n);
    let mut rounds = 0;
    while points.len() < n {
        rounds += 1;
        if rounds > 50 {
            return Err(Error::InsufficientData {
                got: points.len(),
                need: n,
            });
        }
        let batch: Vec<(Point, Point)> = (0..n)
            .map(|_| {
                let y: f64 = rng.gen_range(-3.0..3.0);
                let p = Point::new(
                    y,
                    (0..d)
                        .map(|i| rng.gen_range(-1.0..1.0) * (g.lambda(i) * y).exp())
                        .collect(),
                );
                let y2 = y + rng.gen_range(-0.2 * range.1..0.2 * range.1);
                let climb: f64 = rng.gen_range(0.0..0.45 * range.1);
                let top = y.max(y2) + climb;
                let spread = if rng.gen_bool(0.25) { 1e-3 } else { 1.0 };
                let x2 = (0..d)
                    .map(|i| p.x[i] + spread * rng.gen_range(-1.0..1.0) * (g.lambda(i) * top).exp())
                    .collect();
                (p, Point::new(y2, x2))
            })
            .collect();
        let m = par::try_map(&batch, |(p, q)| measure_rho(g, p, q, tol))?;
        for (pq, r) in batch.into_iter().zip(m) {
            if points.len() < n && r.dist >= range.0 && r.dist <= range.1 {
                points.push(pq);
                measured.push(r);
            }
        }
    }
    let split_max = |low: bool| {
        measured
            .iter()
            .filter(|m| (m.dist < split) == low)
            .map(|m| m.gap)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let (max_low, max_high) = (split_max(true), split_max(false));
    Ok(RhoSweep {
        points,
        audit: c_rho_from_pairs(g, measured, tol)?,
        max_low,
        max_high,
        split,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FaceVolumeRow {
    pub face: String,
    pub closed: f64,
    pub mesh: f64,
    pub rel_err: f64,
    pub mesh_refined: f64,
    pub rel_err_refined: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FaceVolumeAudit {
    pub t_max: f64,
    pub resolution: f64,
    pub faces: Vec<FaceVolumeRow>,
    /// `(t, V_1(t + 1) / V_1(t))` for the first face.
    pub ratios: Vec<(f64, f64)>,
    /// `e^{(λ_1 + ⋯ + λ_d)/2}`.
    pub ratio_limit: f64,
}

/// Mesh cell-area totals per side face against the closed-form integral at
/// `resolution` and `resolution / 2`, and the depth ratios for `t = 1..=t_ratio`.
pub fn face_volume_audit(g: &HeintzeGroup, t_max: f64, resolution: f64, t_ratio: usize) -> Result<FaceVolumeAudit> {
    let coarse = Layout::new(g, t_max, resolution)?;
    let fine = Layout::new(g, t_max, 0.5 * resolution)?;
    let mut faces = Vec::new();
    for (f, fl) in coarse.faces.iter().enumerate() {
        let Some((i, _)) = fl.kind.side() else { continue };
        let closed = face_volume_closed(g, i, t_max)?;
        let mesh = coarse.face_area(f);
        let ff = fine
            .faces
            .iter()
            .position(|q| q.kind == fl.kind)
            .ok_or_else(|| Error::Mesh(format!("face {} missing after refinement", fl.kind.label())))?;
        let mesh_refined = fine.face_area(ff);
        faces.push(FaceVolumeRow {
            face: fl.kind.label(),
            closed,
            mesh,
            rel_err: (mesh / closed - 1.0).abs(),
            mesh_refined,
            rel_err_refined: (mesh_refined / closed - 1.0).abs(),
        });
    }
    let ratios = (1..=t_ratio)
        .map(|t| {
            let t = t as f64;
            Ok((t, face_volume_closed(g, 0, t + 1.0)? / face_volume_closed(g, 0, t)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FaceVolumeAudit {
        t_max,
        resolution,
        faces,
        ratios,
        ratio_limit: (0.5 * g.lambda_sum()).exp(),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvexityRow {
    pub direction: usize,
    pub multiple: f64,
    pub a: f64,
    /// `2aλ_i − a²`.
    pub coefficient: f64,
    pub min: f64,
}

/// [`convexity_probe`] for `a = m·λ_i` over `multiples` and every direction.
pub fn convexity_scan(
    g: &HeintzeGroup,
    multiples: &[f64],
    samples: usize,
    y_lo: f64,
    seed: u64,
) -> Result<Vec<ConvexityRow>> {
    let mut rows = Vec::new();
    for i in 0..g.dim() {
        let l = g.lambda(i);
        for &m in multiples {
            let a = m * l;
            let states = sample_states(g, i, a, samples, y_lo, seed ^ (i as u64) << 32);
            rows.push(ConvexityRow {
                direction: i,
                multiple: m,
                a,
                coefficient: 2.0 * a * l - a * a,
                min: convexity_probe(g, i, a, &states)?,
            });
        }
    }
    Ok(rows)
}

/// Ball growth of one mesh around its sources.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GrowthRun {
    pub vertices: usize,
    pub edges: usize,
    pub r_valid: f64,
    pub points: Vec<(f64, f64)>,
    pub fit: GrowthFit,
}

fn growth_run(
    mesh: &SurfaceMesh,
    dists: &[f64],
    r_valid: f64,
    window: (f64, f64),
    t_needed: impl Fn(f64) -> f64,
) -> Result<GrowthRun> {
    let radii = dyadic_radii(window.0 / 2.0, r_valid.min(4.0 * window.1), 4);
    let points = ball_volumes(mesh, dists, &radii, r_valid, t_needed)?;
    let fit = fit_growth(&points, window)?;
    Ok(GrowthRun {
        vertices: mesh.len(),
        edges: mesh.edges.len(),
        r_valid,
        points,
        fit,
    })
}

/// Growth of `𝓗(t_max)` at `resolution`, with the mesh and its distances.
pub fn growth_approx(
    g: &HeintzeGroup,
    t_max: f64,
    resolution: f64,
    window: (f64, f64),
) -> Result<(GrowthRun, SurfaceMesh, Vec<f64>)> {
    let mesh = build_mesh(g, t_max, resolution)?;
    let dists = mesh_distance_from_sources(&mesh);
    let r_valid = approx_r_valid(g, t_max);
    if window.1 > r_valid {
        return Err(Error::Truncation {
            r: window.1,
            r_valid,
            required_t_max: required_t_max(g, window.1),
        });
    }
    let run = growth_run(&mesh, &dists, r_valid, window, |r| required_t_max(g, r))?;
    Ok((run, mesh, dists))
}

/// Everything built for the sheet of `H_{ξ₋}(t)`.
#[derive(Clone, Debug)]
pub struct SheetRun {
    pub layout: Layout,
    pub sample: HorosphereSample,
    pub mesh: SurfaceMesh,
    pub dists: Vec<f64>,
    pub growth: GrowthRun,
}

/// Growth of the lower sheet of `H_{ξ₋}(t)` below `y_cut`, sampled over the
/// `𝓗(t_max)` layout at `resolution`.
pub fn growth_horosphere(
    g: &HeintzeGroup,
    t: f64,
    t_max: f64,
    resolution: f64,
    y_cut: f64,
    window: (f64, f64),
) -> Result<SheetRun> {
    let layout = Layout::new(g, t_max, resolution)?;
    let sample = sample_horosphere(g, &layout, t, y_cut)?;
    let mesh = horosphere_mesh(g, &layout, &sample)?;
    let dists = mesh_distance_from_sources(&mesh);
    let r_valid = sheet_r_valid(&layout, &mesh, &dists);
    if window.1 > r_valid {
        return Err(Error::Truncation {
            r: window.1,
            r_valid,
            required_t_max: t_max + 2.0 / g.lambda_min() * (window.1 / r_valid).ln(),
        });
    }
    let growth = growth_run(&mesh, &dists, r_valid, window, |r| {
        t_max + 2.0 / g.lambda_min() * (r / r_valid).ln()
    })?;
    Ok(SheetRun {
        layout,
        sample,
        mesh,
        dists,
        growth,
    })
}

/// Growth of the flat horosphere `H_{ξ₊}(t)` out to radius `r_max`.
pub fn growth_euclidean(g: &HeintzeGroup, t: f64, r_max: f64, spacing: f64, window: (f64, f64)) -> Result<GrowthRun> {
    let mesh = euclidean_horosphere_mesh(g, t, r_max, spacing)?;
    let dists = dijkstra(&mesh, &mesh.sources, f64::INFINITY);
    growth_run(&mesh, &dists, r_max, window, |_| f64::NAN)
}

/// [`ball_probe`] on `face` at each height of `ladder`.
pub fn ball_ladder(g: &HeintzeGroup, face: FaceKind, ladder: &[f64], r: f64, spacing: f64) -> Result<Vec<BallProbe>> {
    let flat = flat_ratio(g.dim(), r, spacing)?;
    par::try_map(ladder, |&y_p| ball_probe(g, face, y_p, r, spacing, flat))
}
