//! Graph discretization of `𝓗(t_max)`.
//!
//! Side faces are meshed in rows of constant `y` on the normalized chart
//! `(y, ξ)`. The target metric edge length at height `y` is
//! `h(y) = ε max(1, e^{-λ_1 y/2})`, so the spacing stays a fixed fraction `ε`
//! of the typical distance from `𝓗₀` at that depth. Row `y` carries
//! `⌈2e^{-λ_j y/2}/h⌉ + 1` nodes along each free `ξ_j` and the next row down
//! sits `h / √(1 + λ_i²/4 e^{-λ_i y})` lower. The row at `y = 0` coincides with
//! the boundary of the uniform `𝓗₀` grid and is merged into it.
//!
//! Edges join grid neighbours within a row (full `3^{d−1} − 1` stencil),
//! nodes of adjacent rows around the one with the nearest `x` (so vertical
//! edges follow the lines of constant `x_ĵ` rather than constant `ξ`), and
//! boundary nodes of touching faces. Each
//! edge length is the metric length of the curve on `𝓗` that is straight in
//! the free coordinates, by 2-point Gauss.

use std::io::Write;

use crate::atlas::{face_density, FaceKind};
use crate::error::{Error, Result};
use crate::group::{HeintzeGroup, Point};

const GL2: [f64; 2] = [0.211_324_865_405_187_1, 0.788_675_134_594_812_9];
const GL3_X: [f64; 3] = [0.112_701_665_379_258_3, 0.5, 0.887_298_334_620_741_7];
const GL3_W: [f64; 3] = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];

#[derive(Clone, Debug)]
pub struct FaceRow {
    pub y: f64,
    /// Node counts along each free coordinate.
    pub counts: Vec<usize>,
    /// `y`-extent of the row's cells.
    pub cell: (f64, f64),
    /// Layout id of the row's first node.
    pub first: usize,
}

impl FaceRow {
    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug)]
pub struct FaceLayout {
    pub kind: FaceKind,
    pub free: Vec<usize>,
    pub rows: Vec<FaceRow>,
}

/// Node layout shared by the `𝓗` mesh and lattices derived from it.
#[derive(Clone, Debug)]
pub struct Layout {
    pub lambdas: Vec<f64>,
    pub resolution: f64,
    pub t_max: f64,
    /// Nodes per axis of the `𝓗₀` grid.
    pub n0: usize,
    pub faces: Vec<FaceLayout>,
    pub total: usize,
}

/// Where a layout id lives.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Slot {
    H0(Vec<usize>),
    Face { face: usize, row: usize, index: Vec<usize> },
}

fn unravel(mut k: usize, counts: &[usize]) -> Vec<usize> {
    counts
        .iter()
        .map(|n| {
            let c = k % n;
            k /= n;
            c
        })
        .collect()
}

fn ravel(idx: &[usize], counts: &[usize]) -> usize {
    let mut k = 0;
    let mut stride = 1;
    for (i, n) in idx.iter().zip(counts) {
        k += i * stride;
        stride *= n;
    }
    k
}

fn xi_of(k: usize, n: usize) -> f64 {
    -1.0 + 2.0 * k as f64 / (n - 1) as f64
}

fn cell_width(k: usize, n: usize) -> f64 {
    let w = 2.0 / (n - 1) as f64;
    if k == 0 || k == n - 1 {
        0.5 * w
    } else {
        w
    }
}

/// Index in a row with `m` nodes at height `y_to` closest to the same `x_j`
/// as node `k` of `n` at height `y_from`.
fn nearest(k: usize, n: usize, lambda: f64, y_from: f64, y_to: f64, m: usize) -> usize {
    let xi = (xi_of(k, n) * (0.5 * lambda * (y_from - y_to)).exp()).clamp(-1.0, 1.0);
    (0.5 * (xi + 1.0) * (m - 1) as f64).round() as usize
}

/// All offsets in `{−1, 0, 1}^n`.
fn offsets(n: usize) -> Vec<Vec<i64>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|o| {
                (-1..=1).map(move |s| {
                    let mut v = o.clone();
                    v.push(s);
                    v
                })
            })
            .collect();
    }
    out
}

fn shifted(idx: &[usize], off: &[i64], counts: &[usize]) -> Option<Vec<usize>> {
    idx.iter()
        .zip(off)
        .zip(counts)
        .map(|((i, o), n)| {
            let v = *i as i64 + o;
            (v >= 0 && v < *n as i64).then_some(v as usize)
        })
        .collect()
}

/// An edge between layout nodes lying on the faces whose active coordinates
/// are `constrained`.
#[derive(Clone, Debug)]
pub struct LayoutEdge {
    pub a: usize,
    pub b: usize,
    pub constrained: Vec<usize>,
}

impl Layout {
    pub fn new(g: &HeintzeGroup, t_max: f64, resolution: f64) -> Result<Self> {
        if !(resolution > 0.0 && resolution <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "resolution must lie in (0, 1], got {resolution}"
            )));
        }
        if !(t_max > 0.0) || !t_max.is_finite() {
            return Err(Error::InvalidArgument(format!("t_max must be positive, got {t_max}")));
        }
        let d = g.dim();
        let l1 = g.lambda_min();
        let h_of = |y: f64| resolution * (-0.5 * l1 * y).exp().max(1.0);
        let n0 = (2.0 / resolution).ceil() as usize + 1;
        let mut total = n0.pow(d as u32);
        let mut faces = Vec::with_capacity(2 * d);
        for id in 1..=2 * d {
            let kind = FaceKind::from_id(id);
            let (i, _) = kind.side().unwrap();
            let li = g.lambda(i);
            let free: Vec<usize> = (0..d).filter(|j| *j != i).collect();
            let mut ys = vec![0.0];
            loop {
                let y = *ys.last().unwrap();
                let step = h_of(y) / (1.0 + 0.25 * li * li * (-li * y).exp()).sqrt();
                let next = y - step;
                if next <= -t_max + 0.5 * step {
                    if y > -t_max {
                        ys.push(-t_max);
                    }
                    break;
                }
                ys.push(next);
            }
            let mut rows = Vec::with_capacity(ys.len());
            for (r, &y) in ys.iter().enumerate() {
                let h = h_of(y);
                let counts: Vec<usize> = if r == 0 {
                    vec![n0; d - 1]
                } else {
                    free.iter()
                        .map(|&j| (2.0 * (-0.5 * g.lambda(j) * y).exp() / h).ceil() as usize + 1)
                        .collect()
                };
                let hi = if r == 0 { 0.0 } else { 0.5 * (ys[r - 1] + y) };
                let lo = if r + 1 == ys.len() {
                    -t_max
                } else {
                    0.5 * (ys[r + 1] + y)
                };
                let row = FaceRow {
                    y,
                    counts,
                    cell: (lo, hi),
                    first: total,
                };
                total += row.len();
                rows.push(row);
            }
            faces.push(FaceLayout { kind, free, rows });
        }
        Ok(Self {
            lambdas: g.lambdas().to_vec(),
            resolution,
            t_max,
            n0,
            faces,
            total,
        })
    }

    pub fn dim(&self) -> usize {
        self.lambdas.len()
    }

    pub fn h0_len(&self) -> usize {
        self.n0.pow(self.dim() as u32)
    }

    pub fn slot(&self, id: usize) -> Slot {
        if id < self.h0_len() {
            return Slot::H0(unravel(id, &vec![self.n0; self.dim()]));
        }
        for (f, face) in self.faces.iter().enumerate() {
            let last = face.rows.last().unwrap();
            if id >= last.first + last.len() {
                continue;
            }
            let r = face.rows.partition_point(|row| row.first <= id) - 1;
            let row = &face.rows[r];
            return Slot::Face {
                face: f,
                row: r,
                index: unravel(id - row.first, &row.counts),
            };
        }
        panic!("layout id {id} out of range");
    }

    /// Normalized coordinates of a row node.
    pub fn xi(&self, face: usize, row: usize, index: &[usize]) -> Vec<f64> {
        let counts = &self.faces[face].rows[row].counts;
        index.iter().zip(counts).map(|(k, n)| xi_of(*k, *n)).collect()
    }

    pub fn ambient(&self, id: usize) -> Point {
        let d = self.dim();
        match self.slot(id) {
            Slot::H0(idx) => Point::new(0.0, idx.iter().map(|k| xi_of(*k, self.n0)).collect()),
            Slot::Face { face, row, index } => {
                let fl = &self.faces[face];
                let (i, s) = fl.kind.side().unwrap();
                let y = fl.rows[row].y;
                let mut x = vec![0.0; d];
                x[i] = s * (0.5 * self.lambdas[i] * y).exp();
                for (m, &j) in fl.free.iter().enumerate() {
                    x[j] = xi_of(index[m], fl.rows[row].counts[m]) * (0.5 * self.lambdas[j] * y).exp();
                }
                Point::new(y, x)
            }
        }
    }

    /// Chart id and chart parameters (`x` on `𝓗₀`, `(y, x_ĵ)` on side faces).
    pub fn chart_params(&self, id: usize) -> (FaceKind, Vec<f64>) {
        let p = self.ambient(id);
        match self.slot(id) {
            Slot::H0(_) => (FaceKind::H0, p.x),
            Slot::Face { face, .. } => {
                let fl = &self.faces[face];
                let params = std::iter::once(p.y).chain(fl.free.iter().map(|&j| p.x[j])).collect();
                (fl.kind, params)
            }
        }
    }

    /// The `𝓗₀` node that a `y = 0` face node coincides with.
    pub fn h0_twin(&self, face: usize, index: &[usize]) -> usize {
        let d = self.dim();
        let fl = &self.faces[face];
        let (i, s) = fl.kind.side().unwrap();
        let mut idx = vec![0; d];
        idx[i] = if s > 0.0 { self.n0 - 1 } else { 0 };
        for (m, &j) in fl.free.iter().enumerate() {
            idx[j] = index[m];
        }
        ravel(&idx, &vec![self.n0; d])
    }

    fn face_of(&self, kind: FaceKind) -> usize {
        kind.id() - 1
    }

    /// Edge set over the nodes kept by `keep_row(face, row)`, plus the `𝓗₀`
    /// grid when `with_h0`. Sorted by `(a, b)` with `a < b`, deduplicated.
    pub fn edges<F: Fn(usize, usize) -> bool>(&self, keep_row: F, with_h0: bool) -> Vec<LayoutEdge> {
        let d = self.dim();
        let mut out: Vec<LayoutEdge> = Vec::new();
        let mut push = |a: usize, b: usize, c: Vec<usize>| {
            if a != b {
                out.push(LayoutEdge {
                    a: a.min(b),
                    b: a.max(b),
                    constrained: c,
                });
            }
        };
        let positive = |o: &[i64]| o.iter().find(|v| **v != 0).is_some_and(|v| *v > 0);
        if with_h0 {
            let counts = vec![self.n0; d];
            let offs: Vec<Vec<i64>> = offsets(d).into_iter().filter(|o| positive(o)).collect();
            for id in 0..self.h0_len() {
                let idx = unravel(id, &counts);
                for o in &offs {
                    if let Some(nb) = shifted(&idx, o, &counts) {
                        push(id, ravel(&nb, &counts), vec![]);
                    }
                }
            }
        }
        let all_offs = offsets(d - 1);
        let row_offs: Vec<&Vec<i64>> = all_offs.iter().filter(|o| positive(o)).collect();
        for (f, fl) in self.faces.iter().enumerate() {
            let (i, si) = fl.kind.side().unwrap();
            for (r, row) in fl.rows.iter().enumerate() {
                if !keep_row(f, r) {
                    continue;
                }
                for k in 0..row.len() {
                    let idx = unravel(k, &row.counts);
                    let a = row.first + k;
                    for o in &row_offs {
                        if let Some(nb) = shifted(&idx, o, &row.counts) {
                            push(a, row.first + ravel(&nb, &row.counts), vec![i]);
                        }
                    }
                    // adjacent rows, both directions
                    for nr in [r.wrapping_sub(1), r + 1] {
                        if nr >= fl.rows.len() || !keep_row(f, nr) {
                            continue;
                        }
                        let other = &fl.rows[nr];
                        let base: Vec<usize> = (0..d - 1)
                            .map(|m| {
                                let lam = self.lambdas[fl.free[m]];
                                nearest(idx[m], row.counts[m], lam, row.y, other.y, other.counts[m])
                            })
                            .collect();
                        for o in &all_offs {
                            if let Some(nb) = shifted(&base, o, &other.counts) {
                                push(a, other.first + ravel(&nb, &other.counts), vec![i]);
                            }
                        }
                    }
                    // boundary nodes to the bracketing rows of the touching faces
                    for (m, &j) in fl.free.iter().enumerate() {
                        let sj = if idx[m] == 0 {
                            -1.0
                        } else if idx[m] + 1 == row.counts[m] {
                            1.0
                        } else {
                            continue;
                        };
                        let gk = if sj > 0.0 {
                            FaceKind::Plus(j)
                        } else {
                            FaceKind::Minus(j)
                        };
                        let gf = self.face_of(gk);
                        let gl = &self.faces[gf];
                        let below = gl.rows.partition_point(|q| q.y >= row.y);
                        for gr in [below.wrapping_sub(1), below] {
                            if gr >= gl.rows.len() || !keep_row(gf, gr) {
                                continue;
                            }
                            let grow = &gl.rows[gr];
                            // gl.free lists every coordinate but j; x_i keeps its value
                            // and lands inside the face on rows above
                            let base: Vec<usize> = gl
                                .free
                                .iter()
                                .enumerate()
                                .map(|(mm, &c)| {
                                    let n = grow.counts[mm];
                                    let lam = self.lambdas[c];
                                    if c == i {
                                        nearest(usize::from(si > 0.0), 2, lam, row.y, grow.y, n)
                                    } else {
                                        let src = fl.free.iter().position(|q| *q == c).unwrap();
                                        nearest(idx[src], row.counts[src], lam, row.y, grow.y, n)
                                    }
                                })
                                .collect();
                            for o in &all_offs {
                                if let Some(nb) = shifted(&base, o, &grow.counts) {
                                    push(a, grow.first + ravel(&nb, &grow.counts), vec![j]);
                                }
                            }
                        }
                    }
                }
            }
        }
        out.sort_by_key(|p| (p.a, p.b, p.constrained.len()));
        // keep the most constrained variant of duplicates (the tightest face)
        out.dedup_by(|later, earlier| {
            if later.a == earlier.a && later.b == earlier.b {
                if later.constrained.len() > earlier.constrained.len() {
                    earlier.constrained = later.constrained.clone();
                }
                true
            } else {
                false
            }
        });
        out
    }

    /// Exact-in-`ξ` cell area of a side-face node (3-point Gauss over the `y`-cell).
    pub fn face_cell_area(&self, face: usize, row: usize, index: &[usize]) -> f64 {
        let fl = &self.faces[face];
        let (i, _) = fl.kind.side().unwrap();
        let rw = &fl.rows[row];
        let (lo, hi) = rw.cell;
        let ay: f64 = GL3_X
            .iter()
            .zip(GL3_W)
            .map(|(s, w)| w * face_density(&self.lambdas, i, lo + s * (hi - lo)))
            .sum::<f64>()
            * (hi - lo);
        let axi: f64 = index.iter().zip(&rw.counts).map(|(k, n)| cell_width(*k, *n)).product();
        ay * axi
    }

    /// Lebesgue measure in `x` of the vertical projection of a side-face cell:
    /// `Π δξ · (λ_i / Σλ) (e^{Σλ y_hi/2} − e^{Σλ y_lo/2})`.
    pub fn face_cell_projection(&self, face: usize, row: usize, index: &[usize]) -> f64 {
        let fl = &self.faces[face];
        let (i, _) = fl.kind.side().unwrap();
        let rw = &fl.rows[row];
        let sum: f64 = self.lambdas.iter().sum();
        let (lo, hi) = rw.cell;
        let ay = self.lambdas[i] / sum * ((0.5 * sum * hi).exp() - (0.5 * sum * lo).exp());
        let axi: f64 = index.iter().zip(&rw.counts).map(|(k, n)| cell_width(*k, *n)).product();
        ay * axi
    }

    /// Total cell area of one side face (`face` indexes [`Layout::faces`]).
    pub fn face_area(&self, face: usize) -> f64 {
        let fl = &self.faces[face];
        (0..fl.rows.len())
            .map(|r| {
                let counts = &fl.rows[r].counts;
                (0..fl.rows[r].len())
                    .map(|k| self.face_cell_area(face, r, &unravel(k, counts)))
                    .sum::<f64>()
            })
            .sum()
    }

    pub fn h0_cell_area(&self, id: usize) -> f64 {
        unravel(id, &vec![self.n0; self.dim()])
            .iter()
            .map(|k| cell_width(*k, self.n0))
            .product()
    }
}

/// Length of the curve from `a` to `b` on the face (or face intersection)
/// where the coordinates in `constrained` follow `|x_c| = e^{λ_c y/2}` and the
/// remaining coordinates move linearly with `y`.
pub fn constrained_length(g: &HeintzeGroup, a: &Point, b: &Point, constrained: &[usize]) -> f64 {
    let dy = b.y - a.y;
    let mut total = 0.0;
    for s in GL2 {
        let y = a.y + s * dy;
        let mut q = 1.0;
        for &c in constrained {
            let l = g.lambda(c);
            q += 0.25 * l * l * (-l * y).exp();
        }
        q *= dy * dy;
        for j in 0..g.dim() {
            if constrained.contains(&j) {
                continue;
            }
            let dx = b.x[j] - a.x[j];
            q += g.weight(j, y) * dx * dx;
        }
        total += 0.5 * q.sqrt();
    }
    total
}

/// Metric length of the straight coordinate chord `a → b`, metric frozen at the midpoint.
pub fn chord_length(g: &HeintzeGroup, a: &Point, b: &Point) -> f64 {
    let mid = 0.5 * (a.y + b.y);
    let dy = b.y - a.y;
    (dy * dy
        + (0..g.dim())
            .map(|j| {
                let dx = b.x[j] - a.x[j];
                g.weight(j, mid) * dx * dx
            })
            .sum::<f64>())
    .sqrt()
}

/// A weighted graph carried by a piecewise smooth surface.
#[derive(Clone, Debug)]
pub struct SurfaceMesh {
    pub dim: usize,
    /// Chart id per vertex.
    pub chart: Vec<u16>,
    /// Chart parameters, `dim` per vertex.
    pub params: Vec<f64>,
    pub y: Vec<f64>,
    /// Horizontal coordinates, `dim` per vertex.
    pub x: Vec<f64>,
    pub area: Vec<f64>,
    pub edges: Vec<(u32, u32, f64)>,
    pub sources: Vec<usize>,
    pub resolution: f64,
    /// Layout id per vertex, when the mesh comes from a [`Layout`].
    pub layout_id: Vec<usize>,
    offsets: Vec<usize>,
    adjacency: Vec<(u32, f64)>,
}

/// Mesh contents before adjacency is assembled.
pub struct MeshParts {
    pub dim: usize,
    pub chart: Vec<u16>,
    pub params: Vec<f64>,
    pub y: Vec<f64>,
    pub x: Vec<f64>,
    pub area: Vec<f64>,
    pub edges: Vec<(u32, u32, f64)>,
    pub sources: Vec<usize>,
    pub resolution: f64,
    pub layout_id: Vec<usize>,
}

impl SurfaceMesh {
    /// Assemble adjacency and reject bad edges or a disconnected graph.
    pub fn from_parts(p: MeshParts) -> Result<Self> {
        let n = p.y.len();
        if n == 0 {
            return Err(Error::Mesh("no vertices".into()));
        }
        if p.sources.is_empty() {
            return Err(Error::Mesh("no source vertices".into()));
        }
        let mut degree = vec![0usize; n + 1];
        for &(a, b, w) in &p.edges {
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::Mesh(format!("edge {a}-{b} has length {w}")));
            }
            degree[a as usize + 1] += 1;
            degree[b as usize + 1] += 1;
        }
        for k in 0..n {
            degree[k + 1] += degree[k];
        }
        let offsets = degree.clone();
        let mut fill = degree;
        let mut adjacency = vec![(0u32, 0.0); 2 * p.edges.len()];
        for &(a, b, w) in &p.edges {
            adjacency[fill[a as usize]] = (b, w);
            fill[a as usize] += 1;
            adjacency[fill[b as usize]] = (a, w);
            fill[b as usize] += 1;
        }
        let mesh = Self {
            dim: p.dim,
            chart: p.chart,
            params: p.params,
            y: p.y,
            x: p.x,
            area: p.area,
            edges: p.edges,
            sources: p.sources,
            resolution: p.resolution,
            layout_id: p.layout_id,
            offsets,
            adjacency,
        };
        let reached = mesh.component_size(0);
        if reached != n {
            return Err(Error::Mesh(format!(
                "graph is disconnected: {reached} of {n} vertices reachable"
            )));
        }
        Ok(mesh)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn point(&self, v: usize) -> Point {
        Point::new(self.y[v], self.x[v * self.dim..(v + 1) * self.dim].to_vec())
    }

    pub fn horizontal(&self, v: usize) -> &[f64] {
        &self.x[v * self.dim..(v + 1) * self.dim]
    }

    pub fn neighbors(&self, v: usize) -> &[(u32, f64)] {
        &self.adjacency[self.offsets[v]..self.offsets[v + 1]]
    }

    fn component_size(&self, start: usize) -> usize {
        let mut seen = vec![false; self.len()];
        let mut stack = vec![start];
        seen[start] = true;
        let mut count = 0;
        while let Some(v) = stack.pop() {
            count += 1;
            for &(w, _) in self.neighbors(v) {
                if !seen[w as usize] {
                    seen[w as usize] = true;
                    stack.push(w as usize);
                }
            }
        }
        count
    }

    pub fn total_area(&self) -> f64 {
        self.area.iter().sum()
    }

    /// Area carried by vertices of one chart.
    pub fn chart_area(&self, chart: FaceKind) -> f64 {
        let id = chart.id() as u16;
        self.chart
            .iter()
            .zip(&self.area)
            .filter(|(c, _)| **c == id)
            .map(|(_, a)| a)
            .sum()
    }

    /// Plain-text export: `v id chart params… y x… area` then `e a b length`.
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let d = self.dim;
        writeln!(w, "# vertices {} edges {} dim {}", self.len(), self.edges.len(), d)?;
        for v in 0..self.len() {
            write!(w, "v {} {}", v, FaceKind::from_id(self.chart[v] as usize).label())?;
            for p in &self.params[v * d..(v + 1) * d] {
                write!(w, " {p:.12e}")?;
            }
            write!(w, " {:.12e}", self.y[v])?;
            for x in self.horizontal(v) {
                write!(w, " {x:.12e}")?;
            }
            writeln!(w, " {:.12e}", self.area[v])?;
        }
        for &(a, b, len) in &self.edges {
            writeln!(w, "e {a} {b} {len:.12e}")?;
        }
        Ok(())
    }
}

/// Union of layout nodes that coincide in ambient space: `y = 0` face nodes
/// with their `𝓗₀` twins (when `with_h0`) and edge endpoints closer than `1e−9`.
/// Returns the representative (smallest id) of every node.
pub fn coincidence_roots(layout: &Layout, edges: &[LayoutEdge], with_h0: bool) -> Result<Vec<usize>> {
    fn find(parent: &mut [usize], mut v: usize) -> usize {
        while parent[v] != v {
            parent[v] = parent[parent[v]];
            v = parent[v];
        }
        v
    }
    fn union(parent: &mut [usize], a: usize, b: usize) {
        let (ra, rb) = (find(parent, a), find(parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let gap = |a: &Point, b: &Point| {
        a.x.iter()
            .zip(&b.x)
            .map(|(u, v)| (u - v).abs())
            .fold((a.y - b.y).abs(), f64::max)
    };
    let mut parent: Vec<usize> = (0..layout.total).collect();
    if with_h0 {
        for (f, fl) in layout.faces.iter().enumerate() {
            let row = &fl.rows[0];
            for k in 0..row.len() {
                let id = row.first + k;
                let twin = layout.h0_twin(f, &unravel(k, &row.counts));
                let g = gap(&layout.ambient(id), &layout.ambient(twin));
                if g > 1e-9 {
                    return Err(Error::Mesh(format!("gluing gap {g:e} at layout node {id}")));
                }
                union(&mut parent, id, twin);
            }
        }
    }
    for e in edges {
        if gap(&layout.ambient(e.a), &layout.ambient(e.b)) <= 1e-9 {
            union(&mut parent, e.a, e.b);
        }
    }
    Ok((0..layout.total).map(|v| find(&mut parent, v)).collect())
}

/// Mesh of `𝓗(t_max)` at relative resolution `ε`; sources are the `𝓗₀` vertices.
pub fn build_mesh(g: &HeintzeGroup, t_max: f64, resolution: f64) -> Result<SurfaceMesh> {
    if g.dim() > 4 {
        return Err(Error::InvalidArgument(format!(
            "meshing is limited to d <= 4 (got d = {}); vertex counts grow like ε^-d",
            g.dim()
        )));
    }
    let layout = Layout::new(g, t_max, resolution)?;
    let d = g.dim();
    let h0 = layout.h0_len();
    let layout_edges = layout.edges(|_, _| true, true);
    let roots = coincidence_roots(&layout, &layout_edges, true)?;
    let mut map = vec![u32::MAX; layout.total];
    let mut parts = MeshParts {
        dim: d,
        chart: Vec::new(),
        params: Vec::new(),
        y: Vec::new(),
        x: Vec::new(),
        area: Vec::new(),
        edges: Vec::new(),
        sources: (0..h0).collect(),
        resolution,
        layout_id: Vec::new(),
    };
    for id in 0..layout.total {
        let area = match layout.slot(id) {
            Slot::H0(_) => layout.h0_cell_area(id),
            Slot::Face { face, row, index } => layout.face_cell_area(face, row, &index),
        };
        let root = roots[id];
        if root != id {
            map[id] = map[root];
            parts.area[map[root] as usize] += area;
            continue;
        }
        let (kind, params) = layout.chart_params(id);
        let p = layout.ambient(id);
        parts.chart.push(kind.id() as u16);
        parts.params.extend(params);
        parts.y.push(p.y);
        parts.x.extend(p.x);
        parts.area.push(area);
        parts.layout_id.push(id);
        map[id] = (parts.y.len() - 1) as u32;
    }
    let mut edges: Vec<(u32, u32, f64)> = layout_edges
        .into_iter()
        .filter_map(|e| {
            let (a, b) = (map[e.a], map[e.b]);
            if a == b {
                return None;
            }
            let len = constrained_length(g, &layout.ambient(e.a), &layout.ambient(e.b), &e.constrained);
            Some((a.min(b), a.max(b), len))
        })
        .collect();
    edges.sort_by(|p, q| (p.0, p.1).cmp(&(q.0, q.1)).then(p.2.total_cmp(&q.2)));
    edges.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1);
    parts.edges = edges;
    SurfaceMesh::from_parts(parts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atlas::total_volume_closed;
    use approx::assert_relative_eq;

    #[test]
    fn flat_cube_area() {
        let g = HeintzeGroup::new(vec![1.0, 2.0]).unwrap();
        let layout = Layout::new(&g, 3.0, 0.2).unwrap();
        let a: f64 = (0..layout.h0_len()).map(|id| layout.h0_cell_area(id)).sum();
        assert_relative_eq!(a, 4.0, max_relative = 1e-12);
    }

    #[test]
    fn face_area_matches_closed_form() {
        for lambdas in [vec![1.0], vec![1.0, 2.0], vec![1.0, 1.0, 2.0]] {
            let g = HeintzeGroup::new(lambdas).unwrap();
            let t = 4.0;
            let m = build_mesh(&g, t, 0.3).unwrap();
            assert_relative_eq!(m.total_area(), total_volume_closed(&g, t).unwrap(), max_relative = 1e-4);
        }
    }

    #[test]
    fn edges_connect_and_are_positive() {
        let g = HeintzeGroup::new(vec![1.0, 1.5, 2.0]).unwrap();
        let m = build_mesh(&g, 2.0, 0.5).unwrap();
        assert!(m.edges.iter().all(|e| e.2 > 0.0));
        assert_eq!(m.sources.len(), 5usize.pow(3));
    }

    #[test]
    fn curve_length_in_dimension_one() {
        let g = HeintzeGroup::new(vec![1.0]).unwrap();
        let a = Point::new(0.0, vec![1.0]);
        let b = Point::new(-0.01, vec![(-0.005f64).exp()]);
        let exact = crate::quadrature::integrate(|s| (1.0 + 0.25 * (-s).exp()).sqrt(), -0.01, 0.0, 1e-15, 1e-14).0;
        assert_relative_eq!(constrained_length(&g, &a, &b, &[0]), exact, max_relative = 1e-9);
    }

    #[test]
    fn rejects_large_dimension() {
        let g = HeintzeGroup::new(vec![1.0; 5]).unwrap();
        assert!(build_mesh(&g, 2.0, 0.5).is_err());
    }
}
