//! Geodesic rays issuing from `ξ₋` and the Busemann function along them.
//!
//! A unit-speed geodesic leaving `ξ₋` has conserved momenta `P_j`, rises to
//! the height `y_top` where `Σ_j e^{2λ_j y} P_j² = 1`, and falls back. With
//! `c_j = e^{2λ_j y_top} P_j²` and depth `σ = y_top − y`,
//!
//! ```text
//! v² = 1 − w(σ),   w(σ) = Σ_j c_j e^{-2λ_j σ}
//! ```
//!
//! The Busemann function of `ξ₋` (normalized by `b(y, 0) = y`) grows at unit
//! rate along such a ray. Since the ray is asymptotic to the vertical axis as
//! `y → −∞`, on the way up `b = y + ∫_{-∞}^{y} (1/v − 1)`. Writing
//! `F(σ₀) = ∫_{σ₀}^∞ (1/v − 1) dσ` and `G_i(σ₀) = ∫_{σ₀}^∞ e^{-2λ_i σ}/v dσ`,
//! the point at depth `σ₀` after the turn is
//!
//! ```text
//! b   = y_top + σ₀ + 2F(0) − F(σ₀)
//! x_i = sgn(P_i) √c_i e^{λ_i y_top} (2G_i(0) − G_i(σ₀))
//! ```
//!
//! These descending points make up the lower sheet of each horosphere
//! `{b = t}`, the part that runs down to `ξ₋`. Because `∇b` is the ray
//! velocity, `db = v dy + Σ P_a dx_a`, so the sheet, seen as a graph
//! `y = Y(x)`, has gradient `∂_a Y = −P_a / v`.

use crate::distance::{distance, DistanceOptions};
use crate::error::{Error, Result};
use crate::group::{HeintzeGroup, Point};
use crate::quadrature::integrate_vec;

/// Height where the ray with momenta `p` turns, `Σ_j e^{2λ_j y} p_j² = 1`.
pub fn turning_height(g: &HeintzeGroup, p: &[f64]) -> Option<f64> {
    let terms: Vec<(f64, f64)> = p
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(j, v)| (2.0 * g.lambda(j), 2.0 * v.abs().ln()))
        .collect();
    if terms.is_empty() {
        return None;
    }
    // h(y) = ln Σ exp(a_j y + b_j) is convex and increasing; Newton from the
    // right converges monotonically
    let mut y = terms.iter().map(|(a, b)| -b / a).fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let m = terms.iter().map(|(a, b)| a * y + b).fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        let mut ds = 0.0;
        for (a, b) in &terms {
            let e = (a * y + b - m).exp();
            s += e;
            ds += a * e;
        }
        let h = m + s.ln();
        let step = h / (ds / s);
        y -= step;
        if step.abs() <= 1e-15 * (1.0 + y.abs()) {
            break;
        }
    }
    Some(y)
}

struct Profile<'a> {
    lambdas: &'a [f64],
    c: Vec<f64>,
    lambda_lo: f64,
}

impl<'a> Profile<'a> {
    /// `1 − w(σ)` without cancellation near the turn.
    fn one_minus_w(&self, sigma: f64) -> f64 {
        self.c
            .iter()
            .zip(self.lambdas)
            .map(|(c, l)| -c * (-2.0 * l * sigma).exp_m1())
            .sum()
    }

    /// `(∫ dσ/v, ∫ e^{-2λ_1 σ}/v dσ, …)` over `σ ∈ [u_a², u_b²]`, signed.
    fn head(&self, u_a: f64, u_b: f64) -> Vec<f64> {
        let d = self.c.len();
        let r = integrate_vec(
            |u, out| {
                let sigma = u * u;
                let v = self.one_minus_w(sigma).max(0.0).sqrt();
                // 2u/v stays finite at the turn, where v ≈ u √(2 Σ λ_j c_j)
                let base = if v > 0.0 {
                    2.0 * u / v
                } else {
                    2.0 / (2.0 * self.slope0()).sqrt()
                };
                out[0] = base;
                for i in 0..d {
                    out[i + 1] = base * (-2.0 * self.lambdas[i] * sigma).exp();
                }
            },
            u_a,
            u_b,
            d + 1,
            1e-13,
            1e-11,
            400,
        );
        r.value
    }

    /// `w'(0) = −2 Σ λ_j c_j`, negated.
    fn slope0(&self) -> f64 {
        self.c.iter().zip(self.lambdas).map(|(c, l)| l * c).sum()
    }

    /// `(F(σ₀), G_1(σ₀), …, G_d(σ₀))`.
    fn tails(&self, sigma0: f64) -> Vec<f64> {
        let d = self.c.len();
        let u_max = (40.0 / (2.0 * self.lambda_lo)).sqrt();
        let r = integrate_vec(
            |u, out| {
                let sigma = sigma0 + u * u;
                let omw = self.one_minus_w(sigma);
                if !(omw > 0.0) {
                    out.iter_mut().for_each(|o| *o = 0.0);
                    if u == 0.0 {
                        return;
                    }
                }
                let v = omw.max(0.0).sqrt();
                let jac = 2.0 * u;
                let w = 1.0 - omw;
                out[0] = if v > 0.0 { jac * w / (v * (1.0 + v)) } else { 0.0 };
                for i in 0..d {
                    out[i + 1] = if v > 0.0 {
                        jac * (-2.0 * self.lambdas[i] * sigma).exp() / v
                    } else {
                        0.0
                    };
                }
            },
            0.0,
            u_max,
            d + 1,
            1e-13,
            1e-11,
            400,
        );
        r.value
    }
}

/// A point of the lower sheet of `{b = t}` reached by a ray from `ξ₋`.
#[derive(Clone, Debug)]
pub struct RayPoint {
    pub pos: Point,
    /// Momenta of the ray.
    pub momenta: Vec<f64>,
    /// Vertical velocity at `pos`, negative on the lower sheet.
    pub v: f64,
    pub y_top: f64,
    /// Busemann value at the turning point.
    pub b_top: f64,
}

impl RayPoint {
    /// Gradient `∂_a Y = −P_a / v` of the sheet viewed as a graph over `x`.
    pub fn graph_gradient(&self) -> Vec<f64> {
        self.momenta.iter().map(|p| -p / self.v).collect()
    }

    /// Riemannian area density of the sheet with respect to `dx_1…dx_d`.
    pub fn area_density(&self, g: &HeintzeGroup) -> f64 {
        let e: f64 = (0..g.dim()).map(|a| -g.lambda(a) * self.pos.y).sum();
        e.exp() / self.v.abs()
    }
}

/// The point at Busemann level `t` on the descending half of the ray with
/// momenta `p`, or `None` if the ray is still rising when it reaches `t`.
pub fn descending_point(g: &HeintzeGroup, p: &[f64], t: f64) -> Option<RayPoint> {
    let d = g.dim();
    let y_top = turning_height(g, p)?;
    let c: Vec<f64> = (0..d)
        .map(|j| p[j] * p[j] * (2.0 * g.lambda(j) * y_top).exp())
        .collect();
    let lambda_lo = (0..d)
        .filter(|j| p[*j] != 0.0)
        .map(|j| g.lambda(j))
        .fold(f64::INFINITY, f64::min);
    let prof = Profile {
        lambdas: g.lambdas(),
        c,
        lambda_lo,
    };
    let t0 = prof.tails(0.0);
    let b_top = y_top + t0[0];
    if !(b_top < t) {
        return None;
    }
    // with σ = u², b − b_top = ∫_0^u 2u/v and 1/v ≥ 1 puts the root in
    // [0, √(t − b_top)]; Newton from the right, accumulating the integrals
    // over each increment only
    let target = t - b_top;
    let (mut lo, mut hi) = (0.0, target.sqrt());
    let mut u = hi;
    let mut acc = prof.head(0.0, u);
    for _ in 0..100 {
        let f = acc[0] - target;
        if f > 0.0 {
            hi = u;
        } else {
            lo = u;
        }
        if f.abs() < 1e-12 * (1.0 + t.abs()) || hi - lo < 1e-15 * (1.0 + hi) {
            break;
        }
        let slope = 2.0 * u / prof.one_minus_w(u * u).max(0.0).sqrt();
        let mut next = if slope.is_finite() && slope > 0.0 {
            u - f / slope
        } else {
            0.5 * (lo + hi)
        };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let inc = prof.head(u, next);
        acc.iter_mut().zip(&inc).for_each(|(a, b)| *a += b);
        u = next;
    }
    let s = u * u;
    let y = y_top - s;
    let x: Vec<f64> = (0..d)
        .map(|i| {
            if p[i] == 0.0 {
                0.0
            } else {
                p[i].signum() * prof.c[i].sqrt() * (g.lambda(i) * y_top).exp() * (t0[i + 1] + acc[i + 1])
            }
        })
        .collect();
    let v = -prof.one_minus_w(s).max(0.0).sqrt();
    Some(RayPoint {
        pos: Point::new(y, x),
        momenta: p.to_vec(),
        v,
        y_top,
        b_top,
    })
}

/// Initial momenta for a target `x`, from the hyperbolic-plane relation
/// `P = 2 / (λ x_*)` between a ray's momentum and its landing point.
pub fn momentum_guess(g: &HeintzeGroup, x: &[f64]) -> Vec<f64> {
    x.iter()
        .enumerate()
        .map(|(j, xj)| if *xj == 0.0 { 0.0 } else { 2.0 / (g.lambda(j) * xj) })
        .collect()
}

fn solve_small(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i * n + c].abs().total_cmp(&a[j * n + c].abs()))?;
        if a[piv * n + c].abs() < 1e-300 {
            return None;
        }
        for k in 0..n {
            a.swap(piv * n + k, c * n + k);
        }
        b.swap(piv, c);
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

/// Continuation state for [`lower_sheet_point_warm`]: the last solution and
/// the Jacobian of `ln |X|` with respect to `ln |P|` there.
#[derive(Clone, Debug, Default)]
pub struct SheetWarm {
    momenta: Option<Vec<f64>>,
    active: Vec<usize>,
    jacobian: Option<Vec<f64>>,
    /// `ln |x|` of the last request, over `active`.
    target: Vec<f64>,
}

/// The lower-sheet point of `{b = t}` above the horizontal position `x`.
///
/// Damped Newton in `ln |P|` on `ln |X(P)| = ln |x|`, coordinates with
/// `x_i = 0` being fixed at `P_i = 0` by symmetry. `guess` is a warm start.
pub fn lower_sheet_point(g: &HeintzeGroup, x: &[f64], t: f64, guess: Option<&[f64]>) -> Result<RayPoint> {
    let mut warm = SheetWarm {
        momenta: guess.map(|p| p.to_vec()),
        ..SheetWarm::default()
    };
    lower_sheet_point_warm(g, x, t, &mut warm)
}

/// [`lower_sheet_point`] continuing from a nearby solve: the stored Jacobian
/// is reused until a step fails to halve the residual.
pub fn lower_sheet_point_warm(g: &HeintzeGroup, x: &[f64], t: f64, warm: &mut SheetWarm) -> Result<RayPoint> {
    lower_sheet_point_tol(g, x, t, warm, 1e-11)
}

/// [`lower_sheet_point_warm`] stopping once `|ln |X| − ln |x||` drops below `tol`.
/// The returned point lies on the level set regardless; `tol` only controls how
/// close its `x` is to the request.
pub fn lower_sheet_point_tol(g: &HeintzeGroup, x: &[f64], t: f64, warm: &mut SheetWarm, tol: f64) -> Result<RayPoint> {
    let d = g.dim();
    let active: Vec<usize> = (0..d).filter(|i| x[*i] != 0.0).collect();
    let n = active.len();
    let fail = |reason: String| Error::Sampling {
        node: format!("{x:?}"),
        reason,
    };
    if n == 0 {
        return Err(fail("the axis meets the lower sheet only at infinity".into()));
    }
    if warm.active != active {
        warm.jacobian = None;
    }
    let target: Vec<f64> = active.iter().map(|&i| x[i].abs().ln()).collect();
    let momenta = |u: &[f64]| -> Vec<f64> {
        let mut p = vec![0.0; d];
        for (k, &i) in active.iter().enumerate() {
            p[i] = x[i].signum() * u[k].exp();
        }
        p
    };
    let residual = |u: &[f64]| -> Option<(Vec<f64>, RayPoint)> {
        let pt = descending_point(g, &momenta(u), t)?;
        let r: Vec<f64> = active
            .iter()
            .enumerate()
            .map(|(k, &i)| pt.pos.x[i].abs().ln() - target[k])
            .collect();
        if r.iter().all(|v| v.is_finite()) {
            Some((r, pt))
        } else {
            None
        }
    };
    let start = warm.momenta.clone().unwrap_or_else(|| momentum_guess(g, x));
    let mut u: Vec<f64> = active
        .iter()
        .map(|&i| {
            let v = start[i].abs();
            if v > 0.0 {
                v.ln()
            } else {
                (2.0 / (g.lambda(i) * x[i].abs())).ln()
            }
        })
        .collect();
    let mut cur = None;
    // first-order predictor from the previous solve
    if let (Some(jac), true) = (&warm.jacobian, warm.target.len() == n) {
        let shift: Vec<f64> = target.iter().zip(&warm.target).map(|(a, b)| a - b).collect();
        if let Some(du) = solve_small(jac, &shift, n) {
            let predicted: Vec<f64> = u.iter().zip(&du).map(|(a, b)| a + b).collect();
            if let Some(c) = residual(&predicted) {
                u = predicted;
                cur = Some(c);
            }
        }
    }
    // push the ray deeper until it turns below level t
    for _ in 0..200 {
        if cur.is_some() {
            break;
        }
        if let Some(c) = residual(&u) {
            cur = Some(c);
            break;
        }
        u.iter_mut().for_each(|v| *v += 0.5);
    }
    let (mut r, mut pt) = cur.ok_or_else(|| fail("no descending ray found".into()))?;
    let norm = |v: &[f64]| v.iter().map(|c| c * c).sum::<f64>().sqrt();
    let fd_jacobian = |u: &[f64], r: &[f64]| -> Result<Vec<f64>> {
        let h = 1e-6;
        let mut jac = vec![0.0; n * n];
        for j in 0..n {
            let mut up = u.to_vec();
            up[j] += h;
            let rp = match residual(&up) {
                Some((v, _)) => v,
                None => {
                    up[j] -= 2.0 * h;
                    let (rm, _) =
                        residual(&up).ok_or_else(|| fail("Jacobian probe left the descending region".into()))?;
                    r.iter().zip(&rm).map(|(a, b)| 2.0 * a - b).collect()
                }
            };
            for i in 0..n {
                jac[i * n + j] = (rp[i] - r[i]) / h;
            }
        }
        Ok(jac)
    };
    let mut jac = match warm.jacobian.take() {
        Some(j) => j,
        None => fd_jacobian(&u, &r)?,
    };
    let mut fresh = warm.momenta.is_none();
    for _ in 0..100 {
        if norm(&r) < tol {
            break;
        }
        let step = solve_small(&jac, &r, n).ok_or_else(|| fail("singular Jacobian".into()))?;
        let mut damp = 1.0;
        let mut accepted = None;
        while damp > 1e-6 {
            let un: Vec<f64> = u.iter().zip(&step).map(|(a, s)| a - damp * s).collect();
            if let Some((rn, pn)) = residual(&un) {
                if norm(&rn) < norm(&r) {
                    accepted = Some((un, rn, pn));
                    break;
                }
            }
            if !fresh {
                break;
            }
            damp *= 0.5;
        }
        match accepted {
            Some((un, rn, pn)) => {
                let slow = norm(&rn) > 0.5 * norm(&r);
                // Broyden rank-one update along the step taken
                let du: Vec<f64> = un.iter().zip(&u).map(|(a, b)| a - b).collect();
                let dd: f64 = du.iter().map(|v| v * v).sum();
                if dd > 0.0 {
                    for i in 0..n {
                        let jdu: f64 = (0..n).map(|j| jac[i * n + j] * du[j]).sum();
                        let c = (rn[i] - r[i] - jdu) / dd;
                        for j in 0..n {
                            jac[i * n + j] += c * du[j];
                        }
                    }
                }
                u = un;
                r = rn;
                pt = pn;
                if slow && norm(&r) >= tol {
                    jac = fd_jacobian(&u, &r)?;
                    fresh = true;
                } else {
                    fresh = false;
                }
            }
            None if !fresh => {
                jac = fd_jacobian(&u, &r)?;
                fresh = true;
            }
            None => break,
        }
    }
    if norm(&r) < tol.max(1e-9) {
        warm.momenta = Some(pt.momenta.clone());
        warm.active = active;
        warm.jacobian = Some(jac);
        warm.target = target;
        return Ok(pt);
    }
    Err(fail(format!("Newton stalled with log-residual {:.3e}", norm(&r))))
}

/// Independent check of a sheet point: `dist(p, (−s, 0)) − s` at large `s`.
pub fn busemann_by_distance(g: &HeintzeGroup, p: &Point, s: f64, tol: f64) -> Result<f64> {
    let far = Point::on_axis(-s, g.dim());
    Ok(distance(g, p, &far, &DistanceOptions::with_tol(tol))?.value - s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// `d = 1`: the horocycle `a²x² + Z² = e^{at} Z` with `Z = e^{ay}`; lower root.
    fn horocycle_lower(a: f64, t: f64, x: f64) -> f64 {
        let e = (a * t).exp();
        let z = 0.5 * (e - (e * e - 4.0 * a * a * x * x).sqrt());
        z.ln() / a
    }

    #[test]
    fn turning_height_single_component() {
        let g = HeintzeGroup::new(vec![2.0]).unwrap();
        let y = turning_height(&g, &[0.5]).unwrap();
        assert_abs_diff_eq!((2.0 * 2.0 * y).exp() * 0.25, 1.0, epsilon = 1e-13);
    }

    #[test]
    fn hyperbolic_plane_lower_sheet() {
        for &(a, t, x) in &[(1.0, 0.0, 0.2), (1.0, 0.0, 1e-3), (2.0, 1.0, 0.3), (0.7, -1.0, -0.05)] {
            let g = HeintzeGroup::new(vec![a]).unwrap();
            let pt = lower_sheet_point(&g, &[x], t, None).unwrap();
            assert_abs_diff_eq!(pt.pos.x[0], x, epsilon = 1e-9 * x.abs());
            assert_abs_diff_eq!(pt.pos.y, horocycle_lower(a, t, x), epsilon = 1e-8);
            assert!(pt.v < 0.0);
        }
    }

    #[test]
    fn graph_gradient_matches_finite_difference() {
        let g = HeintzeGroup::new(vec![1.0, 2.0]).unwrap();
        let x = [0.02, -0.001];
        let pt = lower_sheet_point(&g, &x, 0.0, None).unwrap();
        let grad = pt.graph_gradient();
        for a in 0..2 {
            let h = 1e-6 * x[a].abs();
            let mut xp = x;
            let mut xm = x;
            xp[a] += h;
            xm[a] -= h;
            let yp = lower_sheet_point(&g, &xp, 0.0, Some(&pt.momenta)).unwrap().pos.y;
            let ym = lower_sheet_point(&g, &xm, 0.0, Some(&pt.momenta)).unwrap().pos.y;
            assert_abs_diff_eq!((yp - ym) / (2.0 * h), grad[a], epsilon = 1e-4 * grad[a].abs());
        }
    }

    #[test]
    fn level_by_independent_distance() {
        let g = HeintzeGroup::new(vec![1.0, 2.0]).unwrap();
        let pt = lower_sheet_point(&g, &[0.05, 0.01], 0.0, None).unwrap();
        let b = busemann_by_distance(&g, &pt.pos, 30.0, 1e-5).unwrap();
        assert_abs_diff_eq!(b, 0.0, epsilon = 1e-3);
    }

    #[test]
    fn mirror_symmetry() {
        let g = HeintzeGroup::new(vec![1.0, 1.5]).unwrap();
        let a = lower_sheet_point(&g, &[0.03, 0.02], 0.0, None).unwrap();
        let b = lower_sheet_point(&g, &[-0.03, 0.02], 0.0, None).unwrap();
        assert_abs_diff_eq!(a.pos.y, b.pos.y, epsilon = 1e-10);
    }
}
