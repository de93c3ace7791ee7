//! Coarse geometry: the three-segment distance surrogate ρ, the Busemann
//! functions of the two distinguished boundary points, the set `V` and the
//! sandwich constants.

use serde::{Deserialize, Serialize};

use crate::distance::{distance, DistanceOptions};
use crate::error::{Error, Result};
use crate::group::{HeintzeGroup, Point};
use crate::par;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoarseConfig {
    /// Largest ray parameter used for the numerical Busemann limit.
    pub s_max: f64,
    pub bisect_tol: f64,
}

impl Default for CoarseConfig {
    fn default() -> Self {
        Self {
            s_max: 40.0,
            bisect_tol: 1e-12,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SandwichConstants {
    pub c_rho_hat: f64,
    pub c_v: f64,
    /// Safety margin added to the sample maximum of `ρ − dist`.
    pub margin: f64,
}

impl SandwichConstants {
    pub fn from_c_rho(g: &HeintzeGroup, c_rho_hat: f64, margin: f64) -> Self {
        let log_d = (g.dim() as f64).ln();
        let c_v = (c_rho_hat - 1.0).max(c_rho_hat + 1.0 + log_d / g.lambda_min());
        Self { c_rho_hat, c_v, margin }
    }
}

/// `inf{t ≥ 0 : Σ_i e^{-2λ_i (t + y)} dx_i² ≤ 1}` by bisection.
pub fn r_inf(g: &HeintzeGroup, y: f64, dx: &[f64], tol: f64) -> f64 {
    // ln of e^{-2λ_i y} dx_i²; zero components drop out
    let logs: Vec<(f64, f64)> = dx
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(i, v)| (g.lambda(i), -2.0 * g.lambda(i) * y + 2.0 * v.abs().ln()))
        .collect();
    if logs.is_empty() {
        return 0.0;
    }
    let sum_at = |t: f64| -> f64 { logs.iter().map(|(l, la)| (la - 2.0 * l * t).exp()).sum() };
    if sum_at(0.0) <= 1.0 {
        return 0.0;
    }
    let d = g.dim() as f64;
    let mut hi = logs
        .iter()
        .map(|(l, la)| ((d.ln() + la) / l).max(0.0))
        .fold(0.0, f64::max)
        + 1.0;
    while sum_at(hi) > 1.0 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if sum_at(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if mid == lo && mid == hi {
            break;
        }
    }
    hi
}

/// `R(y, x)`: the extra height needed before `x` has horizontal norm ≤ 1.
pub fn r_of(g: &HeintzeGroup, p: &Point, tol: f64) -> f64 {
    r_inf(g, p.y, &p.x, tol)
}

/// `ρ(p, q) = 1 + |y − y'| + 2 inf{t ≥ 0 : Σ e^{-2λ_i (t + max(y, y'))}(x_i − x_i')² ≤ 1}`.
pub fn rho(g: &HeintzeGroup, p: &Point, q: &Point) -> f64 {
    let dx: Vec<f64> = p.x.iter().zip(&q.x).map(|(a, b)| a - b).collect();
    1.0 + (p.y - q.y).abs() + 2.0 * r_inf(g, p.y.max(q.y), &dx, 1e-12)
}

/// `b_{ξ+}(y, x) = −y`.
pub fn busemann_plus(p: &Point) -> f64 {
    -p.y
}

/// Center `1 + y + 2R(y, x)` of the bracket for `b_{ξ−}`.
pub fn busemann_minus_center(g: &HeintzeGroup, p: &Point) -> f64 {
    1.0 + p.y + 2.0 * r_of(g, p, 1e-12)
}

/// Bracket `[center − C_ρ, center + C_ρ]` containing `b_{ξ−}(p)` when `C_ρ` is valid.
pub fn busemann_minus_approx(g: &HeintzeGroup, p: &Point, c: &SandwichConstants) -> (f64, f64) {
    let center = busemann_minus_center(g, p);
    (center - c.c_rho_hat, center + c.c_rho_hat)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BusemannEstimate {
    pub value: f64,
    /// Parameter `s` at which the limit was read.
    pub s: f64,
    /// Change between the last two `s` values.
    pub last_increment: f64,
    pub stabilized: bool,
}

/// `b_{ξ−}(p) = lim_s dist(p, (−s, 0)) − s`, normalized at `o = (0, 0)`.
///
/// `s` doubles from `s_max / 4` until consecutive values differ by less than
/// `tol` or `s_max` is reached; `stabilized = false` flags the latter.
pub fn busemann_minus_num(g: &HeintzeGroup, p: &Point, cfg: &CoarseConfig, tol: f64) -> Result<BusemannEstimate> {
    let d = g.dim();
    let opts = DistanceOptions::with_tol(tol * 0.25);
    let eval = |s: f64| -> Result<f64> {
        let far = Point::on_axis(-s, d);
        // dist(o, (−s, 0)) = s exactly, so the normalization at o is s itself
        Ok(distance(g, p, &far, &opts)?.value - s)
    };
    let mut s = (cfg.s_max / 4.0).max(p.y.abs() + 2.0).min(cfg.s_max);
    let mut prev = eval(s)?;
    loop {
        let next_s = (2.0 * s).min(cfg.s_max);
        if next_s <= s {
            return Ok(BusemannEstimate {
                value: prev,
                s,
                last_increment: f64::NAN,
                stabilized: false,
            });
        }
        let cur = eval(next_s)?;
        let inc = (cur - prev).abs();
        if inc < tol || next_s >= cfg.s_max {
            return Ok(BusemannEstimate {
                value: cur,
                s: next_s,
                last_increment: inc,
                stabilized: inc < tol,
            });
        }
        prev = cur;
        s = next_s;
    }
}

/// Membership in `V = {max_i e^{-λ_i y/2} |x_i| ≤ 1}`.
pub fn in_v(g: &HeintzeGroup, p: &Point) -> bool {
    p.x.iter()
        .enumerate()
        .all(|(i, xi)| (-0.5 * g.lambda(i) * p.y).exp() * xi.abs() <= 1.0)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RhoAuditPair {
    pub rho: f64,
    pub dist: f64,
    pub gap: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RhoAudit {
    pub constants: SandwichConstants,
    pub pairs: Vec<RhoAuditPair>,
    pub max_gap: f64,
    pub min_gap: f64,
}

/// Empirical `C_ρ`: sample maximum of `ρ − dist` plus `3·tol`; `C_V` follows.
pub fn estimate_c_rho(g: &HeintzeGroup, pairs: &[(Point, Point)], tol: f64) -> Result<RhoAudit> {
    let measured = par::try_map(pairs, |(p, q)| measure_rho(g, p, q, tol))?;
    c_rho_from_pairs(g, measured, tol)
}

/// One `(ρ, dist)` pair at distance tolerance `tol`.
pub fn measure_rho(g: &HeintzeGroup, p: &Point, q: &Point, tol: f64) -> Result<RhoAuditPair> {
    let r = rho(g, p, q);
    let dist = distance(g, p, q, &DistanceOptions::with_tol(tol))?.value;
    Ok(RhoAuditPair {
        rho: r,
        dist,
        gap: r - dist,
    })
}

/// [`estimate_c_rho`] on pairs measured beforehand.
pub fn c_rho_from_pairs(g: &HeintzeGroup, measured: Vec<RhoAuditPair>, tol: f64) -> Result<RhoAudit> {
    if measured.is_empty() {
        return Err(Error::InsufficientData { got: 0, need: 1 });
    }
    for (index, m) in measured.iter().enumerate() {
        if m.gap < -3.0 * tol {
            return Err(Error::SandwichViolation {
                index,
                rho: m.rho,
                dist: m.dist,
            });
        }
    }
    let max_gap = measured.iter().map(|m| m.gap).fold(f64::NEG_INFINITY, f64::max);
    let min_gap = measured.iter().map(|m| m.gap).fold(f64::INFINITY, f64::min);
    let margin = 3.0 * tol;
    Ok(RhoAudit {
        constants: SandwichConstants::from_c_rho(g, max_gap + margin, margin),
        pairs: measured,
        max_gap,
        min_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn g12() -> HeintzeGroup {
        HeintzeGroup::new(vec![1.0, 2.0]).unwrap()
    }

    #[test]
    fn r_examples() {
        let g = g12();
        assert_eq!(r_of(&g, &Point::new(0.3, vec![0.0, 0.0]), 1e-12), 0.0);
        let g1 = HeintzeGroup::new(vec![1.0]).unwrap();
        let r = r_of(&g1, &Point::new(0.0, vec![5f64.exp()]), 1e-12);
        assert_abs_diff_eq!(r, 5.0, epsilon = 1e-11);
        // exactly on the unit level at t = 0
        let y: f64 = 0.7;
        let x1 = (y).exp(); // e^{-2y} x1² = 1
        assert!(r_of(&g1, &Point::new(y, vec![x1]), 1e-12) < 1e-11);
    }

    #[test]
    fn rho_examples() {
        let g = g12();
        let p = Point::new(-0.4, vec![1.0, 3.0]);
        assert_eq!(rho(&g, &p, &p), 1.0);
        let o = g.origin();
        assert_eq!(rho(&g, &o, &Point::new(3.0, vec![0.0, 0.0])), 4.0);
    }

    #[test]
    fn busemann_bracket_shape() {
        let g = g12();
        let c = SandwichConstants::from_c_rho(&g, 2.5, 0.0);
        let t = 3.0;
        let (lo, hi) = busemann_minus_approx(&g, &Point::on_axis(-t, 2), &c);
        assert_abs_diff_eq!(0.5 * (lo + hi), 1.0 - t, epsilon = 1e-15);
        assert_abs_diff_eq!(hi - lo, 5.0, epsilon = 1e-15);
        assert_eq!(busemann_plus(&Point::new(3.0, vec![1.0, 1.0])), -3.0);
    }

    #[test]
    fn busemann_center_slope_along_vertical_lines() {
        // y + 2R has slope +1 where R = 0 and -1 where R > 0 (R = c(x) - y there)
        let g = g12();
        let x = vec![4.0, -7.0];
        let h = 1e-6;
        for k in 0..200 {
            let y = -6.0 + 0.06 * k as f64;
            let p = Point::new(y, x.clone());
            let slope = (busemann_minus_center(&g, &Point::new(y + h, x.clone()))
                - busemann_minus_center(&g, &Point::new(y - h, x.clone())))
                / (2.0 * h);
            let r = r_of(&g, &p, 1e-14);
            let r_below = r_of(&g, &Point::new(y - h, x.clone()), 1e-14);
            if r > 1e-3 {
                assert_abs_diff_eq!(slope, -1.0, epsilon = 1e-4);
            } else if r_below == 0.0 {
                assert_abs_diff_eq!(slope, 1.0, epsilon = 1e-4);
            }
        }
    }

    #[test]
    fn v_membership() {
        let g1 = HeintzeGroup::new(vec![1.0]).unwrap();
        assert!(in_v(&g1, &Point::new(0.0, vec![1.0])));
        assert!(!in_v(&g1, &Point::new(0.0, vec![1.01])));
        assert!(in_v(&g1, &Point::new(-50.0, vec![0.0])));
        assert!(!in_v(&g1, &Point::new(-50.0, vec![1e-6])));
    }

    #[test]
    fn c_v_formula() {
        let g = HeintzeGroup::new(vec![1.0, 1.0, 2.0, 3.0]).unwrap();
        let c = SandwichConstants::from_c_rho(&g, 2.0, 0.0);
        assert_abs_diff_eq!(c.c_v, 3.0 + 4f64.ln(), epsilon = 1e-15);
    }
}
