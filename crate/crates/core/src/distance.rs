//! Two-point Riemannian distance.
//!
//! The distance is the length of a minimizing polyline. A polyline with `N`
//! segments is seeded on the three-leg ρ path (up, across, down), its discrete
//! energy `Σ |Δz_k|²_{g(mid_k)}` is minimized by damped Newton steps on the
//! block-tridiagonal Hessian, and `N` is doubled until the polyline length
//! moves by less than the tolerance. The polyline is an admissible curve, so
//! its length is an upper bound on the distance.
//!
//! [`shoot_distance`] is an independent initial-value route used to
//! cross-check moderate distances.

use crate::coarse::r_inf;
use crate::error::{Error, Result};
use crate::geodesic::{integrate_endpoint, GeodesicState};
use crate::group::{HeintzeGroup, Point, Tangent};

#[derive(Clone, Debug)]
pub struct DistanceOptions {
    pub tol: f64,
    pub initial_segments: usize,
    pub max_refinements: usize,
    pub max_newton_iters: usize,
}

impl DistanceOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

impl Default for DistanceOptions {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            initial_segments: 32,
            max_refinements: 10,
            max_newton_iters: 200,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DistanceResult {
    /// Extrapolated estimate from the last two refinement levels.
    pub value: f64,
    /// Length of the best polyline found.
    pub upper_bound: f64,
    pub segments: usize,
    dim: usize,
    nodes: Vec<f64>,
}

impl DistanceResult {
    pub fn nodes(&self) -> Vec<Point> {
        self.nodes
            .chunks(self.dim + 1)
            .map(|c| Point::new(c[0], c[1..].to_vec()))
            .collect()
    }

    /// Coordinate velocity of the polyline's first segment, rescaled to a
    /// unit-time parametrization of the whole path.
    pub fn initial_velocity(&self) -> Tangent {
        let m = self.dim + 1;
        let n = self.segments as f64;
        let d: Vec<f64> = (0..m).map(|j| (self.nodes[m + j] - self.nodes[j]) * n).collect();
        Tangent::new(d[0], d[1..].to_vec())
    }
}

const GL5_X: [f64; 5] = [
    0.046_910_077_030_668,
    0.230_765_344_947_158,
    0.5,
    0.769_234_655_052_842,
    0.953_089_922_969_332,
];
const GL5_W: [f64; 5] = [
    0.118_463_442_528_095,
    0.239_314_335_249_683,
    0.284_444_444_444_444,
    0.239_314_335_249_683,
    0.118_463_442_528_095,
];

/// Metric length of the coordinate-straight segment `a → b` (5-point Gauss).
pub fn segment_length(g: &HeintzeGroup, a: &[f64], b: &[f64]) -> f64 {
    let dy = b[0] - a[0];
    let mut total = 0.0;
    for (s, w) in GL5_X.iter().zip(GL5_W.iter()) {
        let y = a[0] + s * dy;
        let mut q = dy * dy;
        for i in 0..g.dim() {
            let dx = b[i + 1] - a[i + 1];
            q += g.weight(i, y) * dx * dx;
        }
        total += w * q.sqrt();
    }
    total
}

fn polyline_length(g: &HeintzeGroup, z: &[f64], m: usize) -> f64 {
    z.chunks(m)
        .zip(z.chunks(m).skip(1))
        .map(|(a, b)| segment_length(g, a, b))
        .sum()
}

fn energy(g: &HeintzeGroup, z: &[f64], m: usize) -> f64 {
    let d = m - 1;
    let mut e = 0.0;
    for (a, b) in z.chunks(m).zip(z.chunks(m).skip(1)) {
        let dy = b[0] - a[0];
        let mid = 0.5 * (a[0] + b[0]);
        e += dy * dy;
        for i in 0..d {
            let dx = b[i + 1] - a[i + 1];
            e += g.weight(i, mid) * dx * dx;
        }
    }
    e
}

/// In-place Cholesky of a dense `m×m` SPD block; `false` if not positive definite.
fn cholesky(a: &mut [f64], m: usize) -> bool {
    for j in 0..m {
        let mut s = a[j * m + j];
        for k in 0..j {
            s -= a[j * m + k] * a[j * m + k];
        }
        if !(s > 0.0) || !s.is_finite() {
            return false;
        }
        let ljj = s.sqrt();
        a[j * m + j] = ljj;
        for i in j + 1..m {
            let mut t = a[i * m + j];
            for k in 0..j {
                t -= a[i * m + k] * a[j * m + k];
            }
            a[i * m + j] = t / ljj;
        }
    }
    true
}

fn cholesky_solve(l: &[f64], m: usize, b: &mut [f64]) {
    for i in 0..m {
        let mut t = b[i];
        for k in 0..i {
            t -= l[i * m + k] * b[k];
        }
        b[i] = t / l[i * m + i];
    }
    for i in (0..m).rev() {
        let mut t = b[i];
        for k in i + 1..m {
            t -= l[k * m + i] * b[k];
        }
        b[i] = t / l[i * m + i];
    }
}

struct Derivs {
    grad: Vec<f64>,
    diag: Vec<f64>,
    off: Vec<f64>,
}

/// Gradient and block-tridiagonal Hessian of the discrete energy over the
/// interior nodes `1..N`.
fn derivs(g: &HeintzeGroup, z: &[f64], m: usize) -> Derivs {
    let d = m - 1;
    let n_nodes = z.len() / m;
    let n_int = n_nodes - 2;
    let mm = m * m;
    let mut grad = vec![0.0; n_int * m];
    let mut diag = vec![0.0; n_int * mm];
    let mut off = vec![0.0; n_int.saturating_sub(1) * mm];
    let mut haa = vec![0.0; mm];
    let mut hbb = vec![0.0; mm];
    let mut hab = vec![0.0; mm];
    let mut ga = vec![0.0; m];
    let mut gb = vec![0.0; m];
    for s in 0..n_nodes - 1 {
        let a = &z[s * m..(s + 1) * m];
        let b = &z[(s + 1) * m..(s + 2) * m];
        let dy = b[0] - a[0];
        let mid = 0.5 * (a[0] + b[0]);
        let mut q = 0.0;
        let mut r2 = 0.0;
        haa.iter_mut().for_each(|v| *v = 0.0);
        hbb.iter_mut().for_each(|v| *v = 0.0);
        hab.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..d {
            let l = g.lambda(i);
            let w = g.weight(i, mid);
            let dx = b[i + 1] - a[i + 1];
            q += l * w * dx * dx;
            r2 += l * l * w * dx * dx;
            ga[i + 1] = -2.0 * w * dx;
            gb[i + 1] = 2.0 * w * dx;
            let c = 2.0 * l * w * dx;
            let xi = i + 1;
            haa[xi] = c;
            haa[xi * m] = c;
            hbb[xi] = -c;
            hbb[xi * m] = -c;
            hab[xi] = -c; // (a_y, b_x)
            hab[xi * m] = c; // (a_x, b_y)
            haa[xi * m + xi] = 2.0 * w;
            hbb[xi * m + xi] = 2.0 * w;
            hab[xi * m + xi] = -2.0 * w;
        }
        ga[0] = -2.0 * dy - q;
        gb[0] = 2.0 * dy - q;
        haa[0] = 2.0 + r2;
        hbb[0] = 2.0 + r2;
        hab[0] = -2.0 + r2;

        if s >= 1 {
            let k = s - 1;
            for j in 0..m {
                grad[k * m + j] += ga[j];
            }
            for j in 0..mm {
                diag[k * mm + j] += haa[j];
            }
        }
        if s < n_nodes - 2 {
            let k = s;
            for j in 0..m {
                grad[k * m + j] += gb[j];
            }
            for j in 0..mm {
                diag[k * mm + j] += hbb[j];
            }
        }
        if s >= 1 && s < n_nodes - 2 {
            let k = s - 1;
            for j in 0..mm {
                off[k * mm + j] += hab[j];
            }
        }
    }
    Derivs { grad, diag, off }
}

/// Solve `(H + μ M) δ = −grad` for block-tridiagonal `H`, where `M` is the
/// metric at each node. Returns `None` when the damped matrix is not SPD.
fn damped_step(g: &HeintzeGroup, z: &[f64], m: usize, dv: &Derivs, mu: f64) -> Option<Vec<f64>> {
    let mm = m * m;
    let n_int = dv.grad.len() / m;
    let mut s_fac = dv.diag.clone();
    for k in 0..n_int {
        let y = z[(k + 1) * m];
        s_fac[k * mm] += mu;
        for i in 0..m - 1 {
            s_fac[k * mm + (i + 1) * m + i + 1] += mu * g.weight(i, y);
        }
    }
    let mut rhs: Vec<f64> = dv.grad.iter().map(|v| -v).collect();
    // forward elimination; w_k = S_k^{-1} B_k stored per block
    let mut wblk = vec![0.0; n_int.saturating_sub(1) * mm];
    let mut col = vec![0.0; m];
    for k in 0..n_int {
        if k > 0 {
            // S_k -= B_{k-1}^T S_{k-1}^{-1} B_{k-1};  rhs_k -= B_{k-1}^T S_{k-1}^{-1} rhs_{k-1}
            let (prev, cur) = s_fac.split_at_mut(k * mm);
            let _ = prev;
            let b = &dv.off[(k - 1) * mm..k * mm];
            let w = &wblk[(k - 1) * mm..k * mm];
            for i in 0..m {
                for j in 0..m {
                    let mut acc = 0.0;
                    for r in 0..m {
                        acc += b[r * m + i] * w[r * m + j];
                    }
                    cur[i * m + j] -= acc;
                }
            }
            let (rp, rc) = rhs.split_at_mut(k * m);
            let mut tmp = rp[(k - 1) * m..].to_vec();
            cholesky_solve(&s_fac[(k - 1) * mm..k * mm], m, &mut tmp);
            for i in 0..m {
                let mut acc = 0.0;
                for r in 0..m {
                    acc += b[r * m + i] * tmp[r];
                }
                rc[i] -= acc;
            }
        }
        if !cholesky(&mut s_fac[k * mm..(k + 1) * mm], m) {
            return None;
        }
        if k + 1 < n_int {
            let b = &dv.off[k * mm..(k + 1) * mm];
            for j in 0..m {
                for r in 0..m {
                    col[r] = b[r * m + j];
                }
                cholesky_solve(&s_fac[k * mm..(k + 1) * mm], m, &mut col);
                for r in 0..m {
                    wblk[k * mm + r * m + j] = col[r];
                }
            }
        }
    }
    // back substitution
    let mut x = vec![0.0; n_int * m];
    for k in (0..n_int).rev() {
        let mut t = rhs[k * m..(k + 1) * m].to_vec();
        if k + 1 < n_int {
            let b = &dv.off[k * mm..(k + 1) * mm];
            for i in 0..m {
                let mut acc = 0.0;
                for r in 0..m {
                    acc += b[i * m + r] * x[(k + 1) * m + r];
                }
                t[i] -= acc;
            }
        }
        cholesky_solve(&s_fac[k * mm..(k + 1) * mm], m, &mut t);
        x[k * m..(k + 1) * m].copy_from_slice(&t);
    }
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

fn minimize_energy(g: &HeintzeGroup, z: &mut Vec<f64>, m: usize, max_iters: usize) {
    if z.len() / m <= 2 {
        return;
    }
    let mut e = energy(g, z, m);
    let mut mu = 1e-6;
    let mut trial = z.clone();
    for _ in 0..max_iters {
        let dv = derivs(g, z, m);
        let mut accepted = false;
        while mu < 1e12 {
            if let Some(step) = damped_step(g, z, m, &dv, mu) {
                trial.copy_from_slice(z);
                for (t, s) in trial[m..z.len() - m].iter_mut().zip(&step) {
                    *t += s;
                }
                let e_new = energy(g, &trial, m);
                if e_new.is_finite() && e_new <= e {
                    let decrease = e - e_new;
                    std::mem::swap(z, &mut trial);
                    e = e_new;
                    mu = (mu * 0.1).max(1e-12);
                    accepted = true;
                    if decrease <= 1e-15 * e {
                        return;
                    }
                    break;
                }
            }
            mu *= 10.0;
        }
        if !accepted {
            return;
        }
    }
}

/// Nodes of the three-leg ρ path from `p` to `q`, equally spaced in arclength.
fn rho_path(g: &HeintzeGroup, p: &Point, q: &Point, segments: usize) -> Vec<f64> {
    let d = g.dim();
    let m = d + 1;
    let dx: Vec<f64> = q.x.iter().zip(&p.x).map(|(a, b)| a - b).collect();
    let top = p.y.max(q.y) + r_inf(g, p.y.max(q.y), &dx, 1e-12);
    let l1 = top - p.y;
    let l2 = g.horizontal_norm(top, &dx);
    let l3 = top - q.y;
    let total = l1 + l2 + l3;
    let mut z = Vec::with_capacity((segments + 1) * m);
    for k in 0..=segments {
        let s = total * k as f64 / segments as f64;
        if s <= l1 && l1 > 0.0 {
            z.push(p.y + s);
            z.extend_from_slice(&p.x);
        } else if s <= l1 + l2 && l2 > 0.0 {
            let f = (s - l1) / l2;
            z.push(top);
            z.extend(p.x.iter().zip(&dx).map(|(a, b)| a + f * b));
        } else {
            let down = (s - l1 - l2).min(l3);
            z.push(top - down);
            z.extend_from_slice(&q.x);
        }
    }
    // pin endpoints exactly
    z[..m].copy_from_slice(&[&[p.y][..], &p.x[..]].concat());
    let last = z.len() - m;
    z[last..].copy_from_slice(&[&[q.y][..], &q.x[..]].concat());
    z
}

fn refine(z: &[f64], m: usize) -> Vec<f64> {
    let n = z.len() / m;
    let mut out = Vec::with_capacity((2 * n - 1) * m);
    for k in 0..n {
        out.extend_from_slice(&z[k * m..(k + 1) * m]);
        if k + 1 < n {
            for j in 0..m {
                out.push(0.5 * (z[k * m + j] + z[(k + 1) * m + j]));
            }
        }
    }
    out
}

/// Riemannian distance between `p` and `q` to within `opts.tol`.
pub fn distance(g: &HeintzeGroup, p: &Point, q: &Point, opts: &DistanceOptions) -> Result<DistanceResult> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tol must be positive, got {}",
            opts.tol
        )));
    }
    let d = g.dim();
    let m = d + 1;
    if p == q {
        return Ok(DistanceResult {
            value: 0.0,
            upper_bound: 0.0,
            segments: 1,
            dim: d,
            nodes: [&[p.y][..], &p.x[..], &[q.y][..], &q.x[..]].concat(),
        });
    }
    let mut segments = opts.initial_segments.max(2);
    let mut z = rho_path(g, p, q, segments);
    minimize_energy(g, &mut z, m, opts.max_newton_iters);
    let mut prev_len = polyline_length(g, &z, m);
    for _ in 0..opts.max_refinements {
        let mut finer = refine(&z, m);
        minimize_energy(g, &mut finer, m, opts.max_newton_iters);
        let len = polyline_length(g, &finer, m);
        segments *= 2;
        z = finer;
        let gap = prev_len - len;
        if gap.abs() < opts.tol {
            // second-order convergence in the segment count
            let value = len - gap / 3.0;
            return Ok(DistanceResult {
                value,
                upper_bound: len,
                segments,
                dim: d,
                nodes: z,
            });
        }
        prev_len = len;
    }
    let best = polyline_length(g, &z, m);
    Err(Error::Convergence {
        best,
        gap: (prev_len - best).abs(),
    })
}

/// Distance by initial-value shooting: find the initial velocity `w` at `p`
/// whose unit-time geodesic ends at `q`; the distance is `|w|_p`.
pub fn shoot_distance(g: &HeintzeGroup, p: &Point, q: &Point, guess: &Tangent) -> Result<f64> {
    let d = g.dim();
    let m = d + 1;
    let scale: Vec<f64> = std::iter::once(1.0)
        .chain((0..d).map(|i| (-g.lambda(i) * q.y).exp()))
        .collect();
    let residual = |w: &[f64]| -> Result<Vec<f64>> {
        let vel = Tangent::new(w[0], w[1..].to_vec());
        let speed = g.norm(p.y, &vel);
        let steps = (200.0 * speed * g.lambda_max()).max(400.0);
        let s0 = GeodesicState::new(g, p.clone(), vel);
        let end = integrate_endpoint(g, &s0, 1.0, 1.0 / steps)?;
        let mut r = vec![(end.pos.y - q.y) * scale[0]];
        for i in 0..d {
            r.push((end.pos.x[i] - q.x[i]) * scale[i + 1]);
        }
        Ok(r)
    };
    let mut w: Vec<f64> = std::iter::once(guess.v).chain(guess.u.iter().copied()).collect();
    let mut r = residual(&w)?;
    let norm = |v: &[f64]| v.iter().map(|c| c * c).sum::<f64>().sqrt();
    for _ in 0..50 {
        if norm(&r) < 1e-10 {
            break;
        }
        let mut jac = vec![0.0; m * m];
        for j in 0..m {
            let h = 1e-7 * w[j].abs().max(1e-7 * norm(&w)).max(1e-12);
            let mut wp = w.clone();
            wp[j] += h;
            let rp = residual(&wp)?;
            for i in 0..m {
                jac[i * m + j] = (rp[i] - r[i]) / h;
            }
        }
        let step = solve_dense(&jac, &r, m).ok_or(Error::Convergence {
            best: f64::NAN,
            gap: norm(&r),
        })?;
        let mut t = 1.0;
        let mut improved = false;
        while t > 1e-4 {
            let wn: Vec<f64> = w.iter().zip(&step).map(|(a, s)| a - t * s).collect();
            if let Ok(rn) = residual(&wn) {
                if norm(&rn) < norm(&r) {
                    w = wn;
                    r = rn;
                    improved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    if norm(&r) > 1e-7 {
        return Err(Error::Convergence {
            best: g.norm(p.y, &Tangent::new(w[0], w[1..].to_vec())),
            gap: norm(&r),
        });
    }
    Ok(g.norm(p.y, &Tangent::new(w[0], w[1..].to_vec())))
}

/// Gaussian elimination with partial pivoting for a small dense system.
fn solve_dense(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i * n + c].abs().partial_cmp(&a[j * n + c].abs()).unwrap())?;
        if a[piv * n + c].abs() < 1e-300 {
            return None;
        }
        if piv != c {
            for k in 0..n {
                a.swap(piv * n + k, c * n + k);
            }
            b.swap(piv, c);
        }
        for r in c + 1..n {
            let f = a[r * n + c] / a[c * n + c];
            for k in c..n {
                a[r * n + k] -= f * a[c * n + k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let mut t = b[r];
        for k in r + 1..n {
            t -= a[r * n + k] * x[k];
        }
        x[r] = t / a[r * n + r];
    }
    Some(x)
}
