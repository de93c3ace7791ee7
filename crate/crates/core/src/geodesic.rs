//! Geodesic equations and a fixed-step RK4 integrator.
//!
//! Setting `∇_{α'}α' = 0` componentwise gives
//!
//! ```text
//! y''   = -Σ_j λ_j e^{-2λ_j y} x_j'²
//! x_j'' =  2λ_j x_j' y'
//! ```
//!
//! so `p_j = e^{-2λ_j y} x_j'` and the speed are first integrals.

use crate::error::{Error, Result};
use crate::group::{HeintzeGroup, Point, Tangent};

#[derive(Clone, Debug, PartialEq)]
pub struct GeodesicState {
    pub pos: Point,
    pub vel: Tangent,
    /// Cached `p_j = e^{-2λ_j y} u_j`.
    pub momenta: Vec<f64>,
}

impl GeodesicState {
    pub fn new(g: &HeintzeGroup, pos: Point, vel: Tangent) -> Self {
        let momenta = momenta_of(g, pos.y, &vel.u);
        Self { pos, vel, momenta }
    }

    pub fn speed(&self, g: &HeintzeGroup) -> f64 {
        g.norm(self.pos.y, &self.vel)
    }

    fn to_flat(&self) -> Vec<f64> {
        let mut s = Vec::with_capacity(2 * self.pos.x.len() + 2);
        s.push(self.pos.y);
        s.extend_from_slice(&self.pos.x);
        s.push(self.vel.v);
        s.extend_from_slice(&self.vel.u);
        s
    }

    fn from_flat(g: &HeintzeGroup, s: &[f64]) -> Self {
        let d = g.dim();
        let pos = Point::new(s[0], s[1..=d].to_vec());
        let vel = Tangent::new(s[d + 1], s[d + 2..].to_vec());
        Self::new(g, pos, vel)
    }
}

pub fn momenta_of(g: &HeintzeGroup, y: f64, u: &[f64]) -> Vec<f64> {
    u.iter().enumerate().map(|(i, ui)| g.weight(i, y) * ui).collect()
}

/// Time derivative of a state: `(y', x', v', u')`.
pub fn geodesic_rhs(g: &HeintzeGroup, s: &GeodesicState) -> (Tangent, Tangent) {
    let d = g.dim();
    let mut dv = 0.0;
    let mut du = vec![0.0; d];
    for j in 0..d {
        let l = g.lambda(j);
        let uj = s.vel.u[j];
        dv -= l * uj * uj * g.weight(j, s.pos.y);
        du[j] = 2.0 * l * uj * s.vel.v;
    }
    (s.vel.clone(), Tangent::new(dv, du))
}

fn rhs_flat(g: &HeintzeGroup, s: &[f64], out: &mut [f64]) {
    let d = g.dim();
    let y = s[0];
    let v = s[d + 1];
    out[0] = v;
    let mut dv = 0.0;
    for j in 0..d {
        let l = g.lambda(j);
        let uj = s[d + 2 + j];
        out[1 + j] = uj;
        dv -= l * uj * uj * (-2.0 * l * y).exp();
        out[d + 2 + j] = 2.0 * l * uj * v;
    }
    out[d + 1] = dv;
}

struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    fn new(n: usize) -> Self {
        Self {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }

    fn step(&mut self, g: &HeintzeGroup, s: &mut [f64], h: f64) {
        let n = s.len();
        rhs_flat(g, s, &mut self.k1);
        for i in 0..n {
            self.tmp[i] = s[i] + 0.5 * h * self.k1[i];
        }
        rhs_flat(g, &self.tmp, &mut self.k2);
        for i in 0..n {
            self.tmp[i] = s[i] + 0.5 * h * self.k2[i];
        }
        rhs_flat(g, &self.tmp, &mut self.k3);
        for i in 0..n {
            self.tmp[i] = s[i] + h * self.k3[i];
        }
        rhs_flat(g, &self.tmp, &mut self.k4);
        for i in 0..n {
            s[i] += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

#[derive(Clone, Debug)]
pub struct GeodesicPath {
    pub states: Vec<GeodesicState>,
    pub times: Vec<f64>,
    /// `max_t |speed(t) − speed(0)|`.
    pub speed_drift: f64,
    /// Per coordinate `max_t |p_i(t) − p_i(0)| / |p_i(0)|` (absolute when `p_i(0) = 0`).
    pub momentum_drift: Vec<f64>,
}

fn check_args(step: f64, t_end: f64) -> Result<()> {
    if !(step > 0.0) || !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "need step > 0 and T >= 0, got step = {step}, T = {t_end}"
        )));
    }
    Ok(())
}

/// Integrate from `s0` over `[0, t_end]` with classical RK4 at fixed `step`
/// (the last step is shortened to land on `t_end`).
pub fn integrate_geodesic(g: &HeintzeGroup, s0: &GeodesicState, t_end: f64, step: f64) -> Result<GeodesicPath> {
    check_args(step, t_end)?;
    let speed0 = s0.speed(g);
    let p0 = s0.momenta.clone();
    let mut flat = s0.to_flat();
    let mut rk = Rk4::new(flat.len());
    let mut states = vec![s0.clone()];
    let mut times = vec![0.0];
    let mut speed_drift: f64 = 0.0;
    let mut momentum_drift = vec![0.0f64; g.dim()];
    let mut t = 0.0;
    let n_steps = (t_end / step).ceil() as usize;
    for k in 0..n_steps {
        let h = if k + 1 == n_steps { t_end - t } else { step };
        if h <= 0.0 {
            break;
        }
        rk.step(g, &mut flat, h);
        if flat.iter().any(|c| !c.is_finite()) {
            return Err(Error::IntegrationBlowup { last_valid_time: t });
        }
        t += h;
        let st = GeodesicState::from_flat(g, &flat);
        speed_drift = speed_drift.max((st.speed(g) - speed0).abs());
        for (i, drift) in momentum_drift.iter_mut().enumerate() {
            let dp = (st.momenta[i] - p0[i]).abs();
            let rel = if p0[i] != 0.0 { dp / p0[i].abs() } else { dp };
            *drift = (*drift).max(rel);
        }
        states.push(st);
        times.push(t);
    }
    Ok(GeodesicPath {
        states,
        times,
        speed_drift,
        momentum_drift,
    })
}

/// Only the endpoint of [`integrate_geodesic`]; no path is stored.
pub fn integrate_endpoint(g: &HeintzeGroup, s0: &GeodesicState, t_end: f64, step: f64) -> Result<GeodesicState> {
    check_args(step, t_end)?;
    let mut flat = s0.to_flat();
    let mut rk = Rk4::new(flat.len());
    let n_steps = (t_end / step).ceil().max(0.0) as usize;
    let h = if n_steps > 0 { t_end / n_steps as f64 } else { 0.0 };
    for k in 0..n_steps {
        rk.step(g, &mut flat, h);
        if flat.iter().any(|c| !c.is_finite()) {
            return Err(Error::IntegrationBlowup {
                last_valid_time: k as f64 * h,
            });
        }
    }
    Ok(GeodesicState::from_flat(g, &flat))
}
