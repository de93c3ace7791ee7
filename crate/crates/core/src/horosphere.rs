//! The true horosphere `H_{ξ₋}(t)` next to `𝓗`.
//!
//! The part of `{b_{ξ₋} = t}` that runs down to `ξ₋` is a graph `y = Y(x)`
//! over a punctured neighbourhood of `x = 0`. It is sampled above the nodes of
//! the `𝓗` layout lying below a cut height, so every `H` vertex has a
//! designated `𝓗` vertex straight above or below it, and the two meshes share
//! their connectivity.

use serde::{Deserialize, Serialize};

use crate::coarse::{busemann_minus_approx, busemann_minus_num, r_of, CoarseConfig, SandwichConstants};
use crate::error::{Error, Result};
use crate::group::{HeintzeGroup, Point};
use crate::growth::GrowthFit;
use crate::mesh::{chord_length, coincidence_roots, Layout, MeshParts, Slot, SurfaceMesh};
use crate::par;
use crate::rays::{lower_sheet_point, lower_sheet_point_tol, RayPoint, SheetWarm};

/// Lower-sheet samples of `{b_{ξ₋} = t}` above the layout rows with `y ≤ y_cut`.
#[derive(Clone, Debug)]
pub struct HorosphereSample {
    pub level: f64,
    pub y_cut: f64,
    /// Layout ids of the sampled nodes, ascending.
    pub ids: Vec<usize>,
    pub points: Vec<RayPoint>,
    /// Level accuracy of the ray solver.
    pub tolerance: f64,
}

impl HorosphereSample {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Sample index of a layout id.
    pub fn index_of(&self, id: usize) -> Option<usize> {
        self.ids.binary_search(&id).ok()
    }
}

fn kept_rows(layout: &Layout, y_cut: f64) -> Vec<(usize, usize)> {
    let mut rows = Vec::new();
    for (f, fl) in layout.faces.iter().enumerate() {
        for (r, row) in fl.rows.iter().enumerate() {
            if r > 0 && row.y <= y_cut {
                rows.push((f, r));
            }
        }
    }
    rows
}

/// Solve for the lower-sheet point above every kept layout node. Rows are
/// independent; within a row each node warm-starts from its predecessor.
pub fn sample_horosphere(g: &HeintzeGroup, layout: &Layout, t: f64, y_cut: f64) -> Result<HorosphereSample> {
    if !(y_cut < 0.0 && y_cut > -layout.t_max) {
        return Err(Error::InvalidArgument(format!(
            "cut height must lie in (−t_max, 0), got {y_cut}"
        )));
    }
    let rows = kept_rows(layout, y_cut);
    if rows.is_empty() {
        return Err(Error::InvalidArgument("no layout rows below the cut".into()));
    }
    let per_row = par::try_map(&rows, |&(f, r)| -> Result<Vec<(usize, RayPoint)>> {
        let row = &layout.faces[f].rows[r];
        let mut out = Vec::with_capacity(row.len());
        let mut warm = SheetWarm::default();
        for k in 0..row.len() {
            let id = row.first + k;
            let x = layout.ambient(id).x;
            let pt = match lower_sheet_point_tol(g, &x, t, &mut warm, 1e-8) {
                Ok(p) => p,
                Err(_) => lower_sheet_point(g, &x, t, None).map_err(|e| match e {
                    Error::Sampling { reason, .. } => Error::Sampling {
                        node: format!("layout {id} at x = {x:?}"),
                        reason,
                    },
                    other => other,
                })?,
            };
            out.push((id, pt));
        }
        Ok(out)
    })?;
    let mut all: Vec<(usize, RayPoint)> = per_row.into_iter().flatten().collect();
    all.sort_by_key(|(id, _)| *id);
    let (ids, points): (Vec<usize>, Vec<RayPoint>) = all.into_iter().unzip();
    Ok(HorosphereSample {
        level: t,
        y_cut,
        ids,
        points,
        tolerance: 1e-9,
    })
}

/// Graph on the sampled sheet with the connectivity of the `𝓗` layout rows it
/// sits over. Edge lengths are midpoint-metric chords; a vertex carries the
/// sheet area above its projected layout cell. Sources are the nodes of the
/// top sampled row of every face.
pub fn horosphere_mesh(g: &HeintzeGroup, layout: &Layout, sample: &HorosphereSample) -> Result<SurfaceMesh> {
    let d = g.dim();
    let y_cut = sample.y_cut;
    let keep = |f: usize, r: usize| r > 0 && layout.faces[f].rows[r].y <= y_cut;
    let layout_edges = layout.edges(keep, false);
    let roots = coincidence_roots(layout, &layout_edges, false)?;
    let top: Vec<usize> = layout
        .faces
        .iter()
        .map(|fl| fl.rows.iter().position(|row| row.y <= y_cut).unwrap_or(0).max(1))
        .collect();
    let mut map = vec![u32::MAX; layout.total];
    let mut parts = MeshParts {
        dim: d,
        chart: Vec::with_capacity(sample.len()),
        params: Vec::with_capacity(sample.len() * d),
        y: Vec::with_capacity(sample.len()),
        x: Vec::with_capacity(sample.len() * d),
        area: Vec::with_capacity(sample.len()),
        edges: Vec::new(),
        sources: Vec::new(),
        resolution: layout.resolution,
        layout_id: Vec::with_capacity(sample.len()),
    };
    for (k, &id) in sample.ids.iter().enumerate() {
        let Slot::Face { face, row, index } = layout.slot(id) else {
            return Err(Error::Mesh(format!("layout node {id} is not on a side face")));
        };
        let pt = &sample.points[k];
        let area = layout.face_cell_projection(face, row, &index) * pt.area_density(g);
        let root = roots[id];
        if root != id {
            let m = map[root];
            if m == u32::MAX {
                return Err(Error::Mesh(format!("layout node {root} was not sampled")));
            }
            map[id] = m;
            parts.area[m as usize] += area;
            continue;
        }
        map[id] = parts.y.len() as u32;
        if row == top[face] {
            parts.sources.push(parts.y.len());
        }
        parts.chart.push(layout.faces[face].kind.id() as u16);
        parts.params.extend(&pt.pos.x);
        parts.y.push(pt.pos.y);
        parts.x.extend(&pt.pos.x);
        parts.area.push(area);
        parts.layout_id.push(id);
    }
    let point = |v: u32| {
        let v = v as usize;
        Point::new(parts.y[v], parts.x[v * d..(v + 1) * d].to_vec())
    };
    let mut edges: Vec<(u32, u32, f64)> = layout_edges
        .iter()
        .filter_map(|e| {
            let (a, b) = (map[e.a], map[e.b]);
            if a == b || a == u32::MAX || b == u32::MAX {
                return None;
            }
            Some((a.min(b), a.max(b), chord_length(g, &point(a), &point(b))))
        })
        .collect();
    edges.sort_by(|p, q| (p.0, p.1).cmp(&(q.0, q.1)).then(p.2.total_cmp(&q.2)));
    edges.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1);
    parts.edges = edges;
    SurfaceMesh::from_parts(parts)
}

/// Radius up to which balls around the sources of a horosphere mesh stay
/// clear of its truncated bottom: the smallest distance to a vertex over the
/// deepest layout row of any face.
pub fn sheet_r_valid(layout: &Layout, mesh: &SurfaceMesh, dists: &[f64]) -> f64 {
    (0..mesh.len())
        .filter(|&v| match layout.slot(mesh.layout_id[v]) {
            Slot::Face { face, row, .. } => row + 1 == layout.faces[face].rows.len(),
            Slot::H0(_) => false,
        })
        .map(|v| dists[v])
        .fold(f64::INFINITY, f64::min)
}

/// Flat mesh of the horosphere `H_{ξ₊}(t) = {y = t}` with metric spacing `spacing`
/// out to metric half-width `half`, full `3^d − 1` stencil, one source at the centre.
pub fn euclidean_horosphere_mesh(g: &HeintzeGroup, t: f64, half: f64, spacing: f64) -> Result<SurfaceMesh> {
    if !(spacing > 0.0 && half >= 2.0 * spacing) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < 2·spacing ≤ half-width, got {spacing} and {half}"
        )));
    }
    let d = g.dim();
    let m = (half / spacing).round() as i64;
    let n = (2 * m + 1) as usize;
    let total = n
        .checked_pow(d as u32)
        .filter(|v| *v <= 20_000_000)
        .ok_or_else(|| Error::InvalidArgument("flat horosphere grid too large".into()))?;
    let scale: Vec<f64> = (0..d).map(|i| spacing * (g.lambda(i) * t).exp()).collect();
    let unravel = |mut k: usize| -> Vec<i64> {
        (0..d)
            .map(|_| {
                let v = (k % n) as i64 - m;
                k /= n;
                v
            })
            .collect()
    };
    let mut parts = MeshParts {
        dim: d,
        chart: vec![0; total],
        params: Vec::with_capacity(total * d),
        y: vec![t; total],
        x: Vec::with_capacity(total * d),
        area: vec![spacing.powi(d as i32); total],
        edges: Vec::new(),
        sources: vec![(total - 1) / 2],
        resolution: spacing,
        layout_id: Vec::new(),
    };
    for k in 0..total {
        let x: Vec<f64> = unravel(k).iter().zip(&scale).map(|(v, s)| *v as f64 * s).collect();
        parts.params.extend(&x);
        parts.x.extend(&x);
    }
    let offsets: Vec<Vec<i64>> = (0..3usize.pow(d as u32))
        .map(|mut c| {
            (0..d)
                .map(|_| {
                    let v = (c % 3) as i64 - 1;
                    c /= 3;
                    v
                })
                .collect::<Vec<i64>>()
        })
        .filter(|o| o.iter().find(|v| **v != 0).is_some_and(|v| *v > 0))
        .collect();
    for k in 0..total {
        let idx = unravel(k);
        for o in &offsets {
            let nb: Vec<i64> = idx.iter().zip(o).map(|(a, b)| a + b).collect();
            if nb.iter().any(|v| v.abs() > m) {
                continue;
            }
            let kb = nb.iter().rev().fold(0usize, |acc, v| acc * n + (v + m) as usize);
            let len = spacing * (o.iter().map(|v| (v * v) as f64).sum::<f64>()).sqrt();
            parts.edges.push((k.min(kb) as u32, k.max(kb) as u32, len));
        }
    }
    parts.edges.sort_by_key(|p| (p.0, p.1));
    SurfaceMesh::from_parts(parts)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpotCheck {
    pub vertex: usize,
    pub busemann: f64,
    pub bracket: (f64, f64),
    pub inside: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SandwichReport {
    /// Smallest and largest `y + 2R(y, x)` over the vertices.
    pub band: (f64, f64),
    /// `λ_1^{-1} log d`.
    pub upper: f64,
    pub tolerance: f64,
    /// Vertices outside `[0, upper + tolerance]`.
    pub violations: Vec<usize>,
    pub spot_checks: Vec<SpotCheck>,
}

/// `0 ≤ y + 2R(y, x) ≤ λ_1^{-1} log d + tol` at every vertex of `mesh`, and
/// `b_{ξ₋}` inside its coarse bracket at `spot` seeded vertices.
pub fn sandwich_check(
    g: &HeintzeGroup,
    mesh: &SurfaceMesh,
    constants: &SandwichConstants,
    spot: usize,
    seed: u64,
    tol: f64,
) -> Result<SandwichReport> {
    use rand::{Rng, SeedableRng};
    let upper = (g.dim() as f64).ln() / g.lambda_min();
    let values: Vec<f64> = par::map_range(mesh.len(), |v| {
        let p = mesh.point(v);
        p.y + 2.0 * r_of(g, &p, 1e-13)
    });
    let band = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(*v), hi.max(*v))
    });
    let violations: Vec<usize> = (0..mesh.len())
        .filter(|v| values[*v] < -tol || values[*v] > upper + tol)
        .collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let picks: Vec<usize> = (0..spot).map(|_| rng.gen_range(0..mesh.len())).collect();
    let cfg = CoarseConfig::default();
    let spot_checks = par::try_map(&picks, |&v| -> Result<SpotCheck> {
        let p = mesh.point(v);
        let b = busemann_minus_num(g, &p, &cfg, 1e-4)?.value;
        let bracket = busemann_minus_approx(g, &p, constants);
        Ok(SpotCheck {
            vertex: v,
            busemann: b,
            bracket,
            inside: b >= bracket.0 && b <= bracket.1,
        })
    })?;
    let report = SandwichReport {
        band,
        upper,
        tolerance: tol,
        violations,
        spot_checks,
    };
    let mut bad: Vec<usize> = report.violations.clone();
    bad.extend(report.spot_checks.iter().filter(|s| !s.inside).map(|s| s.vertex));
    if let Some(&first) = bad.first() {
        return Err(Error::SandwichFailure {
            count: bad.len(),
            first,
        });
    }
    Ok(report)
}

/// Affine envelope between two distance functions on matched pairs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QIAudit {
    pub a: f64,
    pub b: f64,
    pub violations: usize,
    /// `(dist_H, dist_𝓗)` per audited pair.
    pub pairs: Vec<(f64, f64)>,
    /// Range of `dist_H` over the pairs.
    pub window: (f64, f64),
    /// Additive constant needed on sub-ranges of `dist_H`, at the fitted `a`.
    pub b_by_window: Vec<((f64, f64), f64)>,
    /// Largest ambient offset between matched vertices.
    pub max_offset: f64,
}

/// Smallest `b ≥ 0` with `d₁/a − b ≤ d₂ ≤ a d₁ + b` on `pairs`.
pub fn envelope_b(pairs: &[(f64, f64)], a: f64) -> f64 {
    pairs
        .iter()
        .map(|&(d1, d2)| (d2 - a * d1).max(d1 / a - d2))
        .fold(0.0, f64::max)
}

/// Fit `(a, b)`: `a` minimizes `(a − 1) · scale + b(a)` on a log grid over
/// `[1, 16]`, so `scale` is the distance below which a multiplicative excess
/// counts as additive.
pub fn fit_envelope(pairs: &[(f64, f64)], scale: f64) -> (f64, f64) {
    let mut best = (1.0, envelope_b(pairs, 1.0));
    let mut best_cost = best.1;
    for k in 1..=4000 {
        let a = 16f64.powf(k as f64 / 4000.0);
        let b = envelope_b(pairs, a);
        let cost = (a - 1.0) * scale + b;
        if cost < best_cost {
            best_cost = cost;
            best = (a, b);
        }
    }
    best
}

/// Audit the vertical matching between the sheet mesh `h` and the `𝓗` mesh
/// `approx` (matched through layout ids). Distances are taken from `sources`
/// seeded sheet vertices to `per_source` seeded targets with `dist_H` between
/// the first and last of `bins`; the additive constant is also reported per
/// bin. Vertices within `margin` of the truncation depth are excluded.
/// Matches farther apart than `3 C_V` fail.
#[allow(clippy::too_many_arguments)]
pub fn qi_audit(
    g: &HeintzeGroup,
    h: &SurfaceMesh,
    approx: &SurfaceMesh,
    c_v: f64,
    t_max: f64,
    margin: f64,
    bins: &[f64],
    sources: usize,
    per_source: usize,
    seed: u64,
) -> Result<QIAudit> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    if approx.layout_id.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "approximate mesh must carry ascending layout ids".into(),
        ));
    }
    if bins.len() < 2 || bins.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument(
            "distance bins must be ascending, at least two edges".into(),
        ));
    }
    let window = (bins[0], bins[bins.len() - 1]);
    // matching and its ambient offsets
    let mut partner = vec![usize::MAX; h.len()];
    let mut max_offset: f64 = 0.0;
    let limit = 3.0 * c_v;
    for v in 0..h.len() {
        let id = h.layout_id[v];
        let w = approx.layout_id.binary_search(&id).map_err(|_| Error::Matching {
            vertex: v,
            offset: f64::INFINITY,
            limit,
        })?;
        let dx: Vec<f64> = h
            .horizontal(v)
            .iter()
            .zip(approx.horizontal(w))
            .map(|(a, b)| a - b)
            .collect();
        // vertical segment plus a horizontal one at the higher end
        let top = h.y[v].max(approx.y[w]);
        let offset = (h.y[v] - approx.y[w]).abs() + g.horizontal_norm(top, &dx);
        if offset > limit {
            return Err(Error::Matching {
                vertex: v,
                offset,
                limit,
            });
        }
        max_offset = max_offset.max(offset);
        partner[v] = w;
    }
    let eligible: Vec<usize> = (0..h.len())
        .filter(|&v| approx.y[partner[v]] >= -t_max + margin)
        .collect();
    if eligible.is_empty() {
        return Err(Error::InsufficientData { got: 0, need: 1 });
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let picks: Vec<usize> = eligible
        .choose_multiple(&mut rng, sources.min(eligible.len()))
        .copied()
        .collect();
    let seeds: Vec<u64> = (0..picks.len()).map(|_| rand::Rng::gen(&mut rng)).collect();
    let jobs: Vec<(usize, u64)> = picks.into_iter().zip(seeds).collect();
    let per = par::map(&jobs, |&(s, sd)| {
        let dh = crate::shortest::dijkstra(h, &[s], window.1 * 1.0001);
        let da = crate::shortest::dijkstra(approx, &[partner[s]], f64::INFINITY);
        let mut targets: Vec<usize> = eligible
            .iter()
            .copied()
            .filter(|&w| dh[w] >= window.0 && dh[w] <= window.1)
            .collect();
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(sd);
        targets.shuffle(&mut r);
        targets.truncate(per_source);
        targets.sort_unstable();
        targets.into_iter().map(|w| (dh[w], da[partner[w]])).collect::<Vec<_>>()
    });
    let pairs: Vec<(f64, f64)> = per.into_iter().flatten().filter(|p| p.1.is_finite()).collect();
    if pairs.len() < 2 {
        return Err(Error::InsufficientData {
            got: pairs.len(),
            need: 2,
        });
    }
    let (a, b) = fit_envelope(&pairs, window.0);
    let violations = pairs
        .iter()
        .filter(|&&(d1, d2)| d2 > a * d1 + b + 1e-9 || d2 < d1 / a - b - 1e-9)
        .count();
    let lo = pairs.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = pairs.iter().map(|p| p.0).fold(0.0, f64::max);
    let b_by_window = bins
        .windows(2)
        .filter_map(|w| {
            let sub: Vec<(f64, f64)> = pairs.iter().copied().filter(|p| p.0 >= w[0] && p.0 <= w[1]).collect();
            (!sub.is_empty()).then(|| ((w[0], w[1]), envelope_b(&sub, a)))
        })
        .collect();
    Ok(QIAudit {
        a,
        b,
        violations,
        pairs,
        window: (lo, hi),
        b_by_window,
        max_offset,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    /// Both exponents agree with each other and with `k`.
    Pass,
    /// The exponents differ by more than the combined budget.
    Distinct,
    Fail,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GrowthComparison {
    pub verdict: Verdict,
    pub exponent_h: f64,
    pub exponent_approx: f64,
    pub k: f64,
    pub budget_h: f64,
    pub budget_approx: f64,
}

/// Compare growth fits of a horosphere and of `𝓗`. `Pass` needs each exponent
/// within its budget of `k` and the two within the summed budget of each other;
/// `Distinct` means they are further apart than the summed budget.
pub fn growth_compare(
    fit_h: &GrowthFit,
    fit_approx: &GrowthFit,
    g: &HeintzeGroup,
    budget_h: f64,
    budget_approx: f64,
) -> Result<GrowthComparison> {
    let (a, b) = (fit_h.r_window, fit_approx.r_window);
    if a.1 < b.0 || b.1 < a.0 {
        return Err(Error::Window {
            a_lo: a.0,
            a_hi: a.1,
            b_lo: b.0,
            b_hi: b.1,
        });
    }
    let k = g.growth_exponent();
    let gap = (fit_h.exponent - fit_approx.exponent).abs();
    let verdict = if gap > budget_h + budget_approx {
        Verdict::Distinct
    } else if (fit_h.exponent - k).abs() <= budget_h && (fit_approx.exponent - k).abs() <= budget_approx {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(GrowthComparison {
        verdict,
        exponent_h: fit_h.exponent,
        exponent_approx: fit_approx.exponent,
        k,
        budget_h,
        budget_approx,
    })
}
