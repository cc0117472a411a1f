//! Closure laws and numerical flux kernels.
//!
//! The second-order model carries `U = (rho, rho v)` with the isentropic
//! pressure `P = p0 rho^gamma` inside the momentum flux; the Hughes model
//! carries density only with flux `rho V(rho) mu`. All kernels are pure.

use crate::error::{Error, Result};
use crate::mesh::BoundaryTag;

/// Densities at or below this value are treated as vacuum (ped/m²).
pub const RHO_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Hughes,
    SecondOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostKind {
    /// c = 1 / v_max
    Simple,
    /// c = 1 / V(rho)
    DensityDriven,
}

/// Boundary flux of the Hughes model on outflow facets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HughesOutflow {
    /// rho_max V(rho_max), limited by what the cell can supply.
    Prescribed,
    /// Upwind flux of the interior state.
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub v_max: f64,
    pub tau: f64,
    pub rho_max: f64,
    pub p0: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub cfl: f64,
    pub model_kind: ModelKind,
    pub cost_kind: CostKind,
    pub hughes_outflow: HughesOutflow,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            v_max: 2.0,
            tau: 0.61,
            rho_max: 7.0,
            p0: 0.005,
            gamma: 2.0,
            alpha: 7.5,
            cfl: 0.9,
            model_kind: ModelKind::SecondOrder,
            cost_kind: CostKind::DensityDriven,
            hughes_outflow: HughesOutflow::Prescribed,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        let finite = [
            self.v_max, self.tau, self.rho_max, self.p0, self.gamma, self.alpha, self.cfl,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return bad("model parameters must be finite");
        }
        if !(self.v_max > 0.0) {
            return bad("v_max must be > 0");
        }
        if !(self.tau > 0.0) {
            return bad("tau must be > 0");
        }
        if !(self.rho_max > 0.0) {
            return bad("rho_max must be > 0");
        }
        if !(self.p0 >= 0.0) {
            return bad("p0 must be >= 0");
        }
        if !(self.gamma > 1.0) {
            return bad("gamma must be > 1");
        }
        if !(self.alpha >= 0.0) {
            return bad("alpha must be >= 0");
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return bad("cfl must lie in (0, 1]");
        }
        Ok(())
    }
}

/// Conserved variables of one cell.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Conserved {
    pub rho: f64,
    pub mom: [f64; 2],
}

impl Conserved {
    pub fn new(rho: f64, mom: [f64; 2]) -> Self {
        Conserved { rho, mom }
    }

    pub fn from_velocity(rho: f64, v: [f64; 2]) -> Self {
        Conserved {
            rho,
            mom: [rho * v[0], rho * v[1]],
        }
    }

    /// Velocity, zero in vacuum.
    #[inline]
    pub fn velocity(&self) -> [f64; 2] {
        if self.rho > RHO_EPS {
            [self.mom[0] / self.rho, self.mom[1] / self.rho]
        } else {
            [0.0, 0.0]
        }
    }
}

/// Flux or source triple: (mass, momentum-x, momentum-y).
pub type Flux = [f64; 3];

#[inline]
fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Speed–density law V(rho) = v_max exp(-alpha (rho / rho_max)^2).
#[inline]
pub fn speed(rho: f64, p: &ModelParams) -> f64 {
    let r = rho / p.rho_max;
    p.v_max * (-p.alpha * r * r).exp()
}

#[inline]
pub fn pressure(rho: f64, p: &ModelParams) -> f64 {
    p.p0 * rho.max(0.0).powf(p.gamma)
}

/// s = sqrt(P'(rho)).
#[inline]
pub fn sound_speed(rho: f64, p: &ModelParams) -> f64 {
    (p.gamma * p.p0 * rho.max(0.0).powf(p.gamma - 1.0)).sqrt()
}

/// d(rho V)/d rho = V(rho) (1 - 2 alpha rho^2 / rho_max^2).
#[inline]
pub fn hughes_flux_derivative(rho: f64, p: &ModelParams) -> f64 {
    let r = rho / p.rho_max;
    speed(rho, p) * (1.0 - 2.0 * p.alpha * r * r)
}

/// Global wave-speed bound of the Hughes flux.
#[inline]
pub fn hughes_wavespeed_bound(p: &ModelParams) -> f64 {
    p.v_max
}

/// Lax–Friedrichs viscosity: max |d(rho V)/d rho| over the two states.
#[inline]
pub fn lf_viscosity(rho_i: f64, rho_j: f64, p: &ModelParams) -> f64 {
    hughes_flux_derivative(rho_i, p)
        .abs()
        .max(hughes_flux_derivative(rho_j, p).abs())
}

/// Einfeldt wave-speed estimates for the HLL flux across a face with unit
/// normal `n`. Returns (0, 0) when both states are vacuum.
pub fn einfeldt_speeds(ul: &Conserved, ur: &Conserved, n: [f64; 2], p: &ModelParams) -> (f64, f64) {
    let (rl, rr) = (ul.rho.max(0.0), ur.rho.max(0.0));
    if rl <= RHO_EPS && rr <= RHO_EPS {
        return (0.0, 0.0);
    }
    let vl = dot(ul.velocity(), n);
    let vr = dot(ur.velocity(), n);
    let (sl, sr) = (sound_speed(rl, p), sound_speed(rr, p));
    let (ql, qr) = (
        if rl > RHO_EPS { rl.sqrt() } else { 0.0 },
        if rr > RHO_EPS { rr.sqrt() } else { 0.0 },
    );
    let v_roe = (ql * vl + qr * vr) / (ql + qr);
    let s_bar = sound_speed(0.5 * (rl + rr), p);
    ((vl - sl).min(v_roe - s_bar), (v_roe + s_bar).max(vr + sr))
}

/// Physical normal flux in the rotated frame for (rho, v_n, v_t).
#[inline]
fn normal_flux(rho: f64, vn: f64, vt: f64, p: &ModelParams) -> Flux {
    [rho * vn, rho * vn * vn + pressure(rho, p), rho * vn * vt]
}

/// F(U) · n in Cartesian components.
pub fn physical_flux(u: &Conserved, n: [f64; 2], p: &ModelParams) -> Flux {
    let v = u.velocity();
    let rho = u.rho.max(0.0);
    let vn = dot(v, n);
    let pr = pressure(rho, p);
    [
        rho * vn,
        rho * v[0] * vn + pr * n[0],
        rho * v[1] * vn + pr * n[1],
    ]
}

/// HLL flux with Einfeldt speeds, evaluated in the face-aligned frame.
pub fn hll_flux(ul: &Conserved, ur: &Conserved, n: [f64; 2], p: &ModelParams) -> Flux {
    assert!(
        ul.rho.is_finite()
            && ur.rho.is_finite()
            && ul.mom.iter().chain(ur.mom.iter()).all(|m| m.is_finite()),
        "non-finite state passed to hll_flux: {ul:?} {ur:?}"
    );
    let (sig_l, sig_r) = einfeldt_speeds(ul, ur, n, p);
    if sig_l == 0.0 && sig_r == 0.0 {
        return [0.0; 3];
    }
    let t = [-n[1], n[0]];
    let (vl, vr) = (ul.velocity(), ur.velocity());
    let (rl, rr) = (ul.rho.max(0.0), ur.rho.max(0.0));
    let (vnl, vtl) = (dot(vl, n), dot(vl, t));
    let (vnr, vtr) = (dot(vr, n), dot(vr, t));
    let f_l = normal_flux(rl, vnl, vtl, p);
    let f_r = normal_flux(rr, vnr, vtr, p);
    let rot = if sig_l >= 0.0 {
        f_l
    } else if sig_r <= 0.0 {
        f_r
    } else {
        let u_l = [rl, rl * vnl, rl * vtl];
        let u_r = [rr, rr * vnr, rr * vtr];
        let inv = 1.0 / (sig_r - sig_l);
        let mut f = [0.0; 3];
        for k in 0..3 {
            f[k] = (sig_r * f_l[k] - sig_l * f_r[k] + sig_l * sig_r * (u_r[k] - u_l[k])) * inv;
        }
        f
    };
    [
        rot[0],
        rot[1] * n[0] + rot[2] * t[0],
        rot[1] * n[1] + rot[2] * t[1],
    ]
}

/// Lax–Friedrichs mass flux of the Hughes model.
pub fn lax_friedrichs_flux(
    rho_l: f64,
    rho_r: f64,
    mu_l: [f64; 2],
    mu_r: [f64; 2],
    n: [f64; 2],
    p: &ModelParams,
) -> f64 {
    let fl = rho_l * speed(rho_l, p) * dot(mu_l, n);
    let fr = rho_r * speed(rho_r, p) * dot(mu_r, n);
    0.5 * (fl + fr - lf_viscosity(rho_l, rho_r, p) * (rho_r - rho_l))
}

/// Relaxation source (0, (rho V(rho) mu - rho v) / tau).
pub fn source(u: &Conserved, mu: [f64; 2], p: &ModelParams) -> Flux {
    if u.rho <= RHO_EPS {
        return [0.0; 3];
    }
    let target = u.rho * speed(u.rho, p);
    [
        0.0,
        (target * mu[0] - u.mom[0]) / p.tau,
        (target * mu[1] - u.mom[1]) / p.tau,
    ]
}

/// Exterior state across a boundary facet with outward unit normal `n`.
pub fn ghost_state(ui: &Conserved, n: [f64; 2], tag: BoundaryTag, p: &ModelParams) -> Conserved {
    match tag {
        BoundaryTag::Wall => {
            let v = ui.velocity();
            let vn = dot(v, n);
            Conserved::from_velocity(ui.rho, [v[0] - 2.0 * vn * n[0], v[1] - 2.0 * vn * n[1]])
        }
        BoundaryTag::Outflow => {
            Conserved::from_velocity(0.1 * p.rho_max, [p.v_max * n[0], p.v_max * n[1]])
        }
    }
}

/// Outward mass flux of the Hughes model through a boundary facet.
pub fn hughes_boundary_flux(
    rho_i: f64,
    mu_i: [f64; 2],
    n: [f64; 2],
    tag: BoundaryTag,
    p: &ModelParams,
) -> f64 {
    match tag {
        BoundaryTag::Wall => 0.0,
        BoundaryTag::Outflow => match p.hughes_outflow {
            HughesOutflow::Prescribed => {
                (p.rho_max * speed(p.rho_max, p)).min(hughes_demand(rho_i, p))
            }
            HughesOutflow::Free => (rho_i * speed(rho_i, p) * dot(mu_i, n)).max(0.0),
        },
    }
}

/// Nondecreasing envelope of rho V(rho): the largest flux a cell at density
/// `rho` can send.
pub fn hughes_demand(rho: f64, p: &ModelParams) -> f64 {
    let rho_crit = p.rho_max / (2.0 * p.alpha).sqrt();
    let r = if p.alpha > 0.0 { rho.min(rho_crit) } else { rho };
    r.max(0.0) * speed(r, p)
}
