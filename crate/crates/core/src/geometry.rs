//! Prescribed motion of the fluid domain: the boundary velocity field V, the
//! flow map it generates, the level set of the transported domain, boundary
//! normals, the regularized surface measure and the spatial masks for
//! viscosity and heat conductivity.
//!
//! The level set is evaluated by integrating the characteristic ODE
//! dY/ds = V(s, Y) backward to the initial time and reading the reference
//! signed distance there. Grid-resident caches are rebuilt from scratch on a
//! motion-bound cadence; nothing is advected on the grid, so the field never
//! accumulates transport error.

use crate::numerics::smoothstep;
use crate::solver::grid::Grid;
use thiserror::Error;

pub type Vec3 = [f64; 3];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("level-set gradient too small for a normal: |grad phi| = {0:.3e}")]
    DegenerateGradient(f64),
}

/// Penalization parameters: boundary penalty weight, solid viscosity and
/// conductivity fractions, mollification width, artificial pressure weight
/// and exponent.
#[derive(Debug, Clone, Copy)]
pub struct PenaltyParams {
    pub eps: f64,
    pub omega: f64,
    pub nu: f64,
    pub xi: f64,
    pub delta: f64,
    pub beta: f64,
}

impl PenaltyParams {
    pub fn validate(&self, gamma: f64) -> Result<(), String> {
        let pos = [
            ("eps", self.eps),
            ("omega", self.omega),
            ("nu", self.nu),
            ("xi", self.xi),
            ("delta", self.delta),
            ("beta", self.beta),
        ];
        for (name, v) in pos {
            if !(v > 0.0) || !v.is_finite() {
                return Err(format!("{name} must be strictly positive, got {v}"));
            }
        }
        for (name, v) in [("omega", self.omega), ("nu", self.nu)] {
            if v > 1.0 {
                return Err(format!("{name} must lie in (0,1], got {v}"));
            }
        }
        if self.beta <= 4.0_f64.max(gamma) {
            return Err(format!(
                "beta must exceed max(4, gamma) = {}, got {}",
                4.0_f64.max(gamma),
                self.beta
            ));
        }
        Ok(())
    }
}

impl Default for PenaltyParams {
    fn default() -> Self {
        Self { eps: 1e-2, omega: 0.25, nu: 0.05, xi: 0.1, delta: 0.05, beta: 5.0 }
    }
}

/// C2 radial cutoff: 1 for r <= rigid, 0 for r >= support.
#[inline]
fn radial_cutoff(r: f64, rigid: f64, support: f64) -> f64 {
    if r <= rigid {
        1.0
    } else if r >= support {
        0.0
    } else {
        smoothstep((support - r) / (support - rigid))
    }
}

/// Built-in boundary velocity fields. Every field vanishes identically for
/// |x| >= support_radius; the motion is exact (rigid or radial) inside
/// rigid_radius.
#[derive(Debug, Clone)]
pub enum VelocityField {
    Rest,
    Translation { velocity: Vec3, rigid_radius: f64, support_radius: f64 },
    Rotation { rate: f64, rigid_radius: f64, support_radius: f64 },
    PulsatingDisk { amplitude: f64, period: f64, rigid_radius: f64, support_radius: f64 },
}

impl VelocityField {
    pub fn support_radius(&self) -> f64 {
        match *self {
            VelocityField::Rest => 0.0,
            VelocityField::Translation { support_radius, .. }
            | VelocityField::Rotation { support_radius, .. }
            | VelocityField::PulsatingDisk { support_radius, .. } => support_radius,
        }
    }

    /// Upper bound on |V| over all space and time.
    pub fn max_speed(&self) -> f64 {
        match *self {
            VelocityField::Rest => 0.0,
            VelocityField::Translation { velocity, .. } => norm(velocity),
            VelocityField::Rotation { rate, support_radius, .. } => rate.abs() * support_radius,
            VelocityField::PulsatingDisk { amplitude, period: _, rigid_radius, support_radius } => {
                amplitude.abs() * support_radius / rigid_radius.max(1e-300)
            }
        }
    }

    pub fn eval(&self, t: f64, x: Vec3) -> Vec3 {
        let r = norm(x);
        match *self {
            VelocityField::Rest => [0.0; 3],
            VelocityField::Translation { velocity, rigid_radius, support_radius } => {
                let c = radial_cutoff(r, rigid_radius, support_radius);
                [velocity[0] * c, velocity[1] * c, velocity[2] * c]
            }
            VelocityField::Rotation { rate, rigid_radius, support_radius } => {
                let c = rate * radial_cutoff(r, rigid_radius, support_radius);
                [-x[1] * c, x[0] * c, 0.0]
            }
            VelocityField::PulsatingDisk { amplitude, period, rigid_radius, support_radius } => {
                let s = amplitude * (2.0 * std::f64::consts::PI * t / period).cos()
                    / rigid_radius.max(1e-300)
                    * radial_cutoff(r, rigid_radius, support_radius);
                [x[0] * s, x[1] * s, x[2] * s]
            }
        }
    }

    /// Analytic time derivative of the field at fixed x.
    pub fn eval_dt(&self, t: f64, x: Vec3) -> Vec3 {
        match *self {
            VelocityField::Rest
            | VelocityField::Translation { .. }
            | VelocityField::Rotation { .. } => [0.0; 3],
            VelocityField::PulsatingDisk { amplitude, period, rigid_radius, support_radius } => {
                let om = 2.0 * std::f64::consts::PI / period;
                let r = norm(x);
                let s = -amplitude * om * (om * t).sin() / rigid_radius.max(1e-300)
                    * radial_cutoff(r, rigid_radius, support_radius);
                [x[0] * s, x[1] * s, x[2] * s]
            }
        }
    }
}

/// Reference signed distance to the initial boundary; negative inside.
#[derive(Debug, Clone)]
pub enum ReferenceShape {
    /// Disk in 2D, ball in 3D.
    Disk { center: Vec3, radius: f64 },
    /// phi0 = n.x - offset for a unit normal n.
    HalfSpace { normal: Vec3, offset: f64 },
    /// The whole box is fluid (no interface).
    AllFluid,
}

impl ReferenceShape {
    pub fn phi0(&self, x: Vec3) -> f64 {
        match *self {
            ReferenceShape::Disk { center, radius } => {
                let d = [x[0] - center[0], x[1] - center[1], x[2] - center[2]];
                norm(d) - radius
            }
            ReferenceShape::HalfSpace { normal, offset } => dot(normal, x) - offset,
            ReferenceShape::AllFluid => -1e30,
        }
    }
}

/// The moving fluid domain: a reference shape transported by the flow map of
/// a compactly supported velocity field. The reference box B has half-width
/// 2 * support_radius.
#[derive(Debug, Clone)]
pub struct MovingDomain {
    pub velocity: VelocityField,
    pub shape: ReferenceShape,
    pub support_radius: f64,
    /// Substep bound for characteristic integration.
    pub ode_substep: f64,
}

impl MovingDomain {
    pub fn new(velocity: VelocityField, shape: ReferenceShape, support_radius: f64) -> Self {
        Self { velocity, shape, support_radius, ode_substep: 0.02 }
    }

    pub fn half_width(&self) -> f64 {
        2.0 * self.support_radius
    }

    /// The given boundary velocity V(t, x); zero outside the support radius.
    pub fn evaluate_v(&self, t: f64, x: Vec3) -> Vec3 {
        self.velocity.eval(t, x)
    }

    pub fn evaluate_v_dt(&self, t: f64, x: Vec3) -> Vec3 {
        self.velocity.eval_dt(t, x)
    }

    /// One classical RK4 step of dX/dt = V(t, X) for a set of particles.
    pub fn advance_flow_map(&self, points: &mut [Vec3], t: f64, dt: f64) {
        for p in points.iter_mut() {
            *p = rk4_step(|s, y| self.velocity.eval(s, y), t, *p, dt);
        }
    }

    /// Signed level set of Omega_t: integrates the characteristic backward
    /// from (t, x) and evaluates the reference signed distance at its foot.
    pub fn level_set(&self, t: f64, x: Vec3) -> f64 {
        self.shape.phi0(self.backtrace(t, x))
    }

    fn backtrace(&self, t: f64, x: Vec3) -> Vec3 {
        if t == 0.0 || matches!(self.velocity, VelocityField::Rest) {
            return x;
        }
        let steps = (t / self.ode_substep).ceil().max(1.0) as usize;
        let ds = t / steps as f64;
        let mut y = x;
        let mut s = t;
        for _ in 0..steps {
            // RK4 with a negative step integrates dY/ds = V backward in s
            y = rk4_step(|tau, p| self.velocity.eval(tau, p), s, y, -ds);
            s -= ds;
        }
        y
    }

    /// Outward unit normal from centered differences of the level set.
    pub fn boundary_normal(&self, t: f64, x: Vec3, h: f64) -> Result<Vec3, GeometryError> {
        let mut g = [0.0; 3];
        for a in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[a] += h;
            xm[a] -= h;
            g[a] = (self.level_set(t, xp) - self.level_set(t, xm)) / (2.0 * h);
        }
        let n = norm(g);
        if n <= 1e-8 {
            return Err(GeometryError::DegenerateGradient(n));
        }
        Ok([g[0] / n, g[1] / n, g[2] / n])
    }

    /// Regularized surface density at x: delta_h(phi) |grad phi|.
    pub fn surface_delta(&self, t: f64, x: Vec3, h: f64) -> f64 {
        let phi = self.level_set(t, x);
        let k = cosine_kernel(phi, 1.5 * h);
        if k == 0.0 {
            return 0.0;
        }
        let mut g = [0.0; 3];
        for a in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[a] += h;
            xm[a] -= h;
            g[a] = (self.level_set(t, xp) - self.level_set(t, xm)) / (2.0 * h);
        }
        k * norm(g)
    }

    /// chi_nu mask at a point.
    pub fn chi_nu(&self, t: f64, x: Vec3, nu: f64) -> f64 {
        mask_chi_sharp(self.level_set(t, x), nu)
    }

    /// Smoothed conductivity mask at a point.
    pub fn chi_nu_xi(&self, t: f64, x: Vec3, nu: f64, xi: f64) -> f64 {
        mask_chi_smooth(self.level_set(t, x), nu, xi)
    }

    /// Viscosity mask at a point; transition width 3 cells into the solid.
    pub fn viscosity_mask(&self, t: f64, x: Vec3, omega: f64, mu: f64, h: f64) -> f64 {
        mask_viscosity(self.level_set(t, x), omega, mu, 3.0 * h)
    }

    /// Points on the reference boundary, for flow-map sampling.
    pub fn boundary_seed_points(&self, count: usize) -> Vec<Vec3> {
        match self.shape {
            ReferenceShape::Disk { center, radius } => (0..count)
                .map(|k| {
                    let a = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
                    [center[0] + radius * a.cos(), center[1] + radius * a.sin(), center[2]]
                })
                .collect(),
            _ => Vec::new(),
        }
    }
}

/// Cache of boundary-point positions under the flow map at stored time nodes.
#[derive(Debug, Clone, Default)]
pub struct FlowMapCache {
    pub times: Vec<f64>,
    pub positions: Vec<Vec<Vec3>>,
}

impl FlowMapCache {
    pub fn seed(domain: &MovingDomain, count: usize) -> Self {
        Self { times: vec![0.0], positions: vec![domain.boundary_seed_points(count)] }
    }

    /// Extend the cache to `t` with RK4 steps bounded by the domain substep.
    pub fn extend_to(&mut self, domain: &MovingDomain, t: f64) {
        let mut current = *self.times.last().unwrap_or(&0.0);
        let mut pts = self.positions.last().cloned().unwrap_or_default();
        while current + 1e-14 < t {
            let dt = domain.ode_substep.min(t - current);
            domain.advance_flow_map(&mut pts, current, dt);
            current += dt;
            self.times.push(current);
            self.positions.push(pts.clone());
        }
    }
}

/// Sharp conductivity mask: 1 in the fluid, nu in the solid.
#[inline]
pub fn mask_chi_sharp(phi: f64, nu: f64) -> f64 {
    if phi < 0.0 {
        1.0
    } else {
        nu
    }
}

/// Smoothed conductivity mask: C2 in phi, 1 for phi <= -xi, nu for phi >= xi.
#[inline]
pub fn mask_chi_smooth(phi: f64, nu: f64, xi: f64) -> f64 {
    nu + (1.0 - nu) * (1.0 - smoothstep(0.5 * (phi / xi + 1.0)))
}

/// Viscosity mask: mu on the closed fluid domain, decaying to omega*mu over
/// `width` into the solid.
#[inline]
pub fn mask_viscosity(phi: f64, omega: f64, mu: f64, width: f64) -> f64 {
    mu * (omega + (1.0 - omega) * (1.0 - smoothstep(phi / width)))
}

/// Cosine bump of unit mass with support |phi| < w.
#[inline]
pub fn cosine_kernel(phi: f64, w: f64) -> f64 {
    if phi.abs() >= w {
        0.0
    } else {
        (1.0 + (std::f64::consts::PI * phi / w).cos()) / (2.0 * w)
    }
}

/// Per-timestep grid cache of the level set and everything derived from it.
#[derive(Debug, Clone)]
pub struct GeometryCache {
    pub time: f64,
    pub phi: Vec<f64>,
    pub grad_phi: Vec<Vec3>,
    /// delta_h(phi) |grad phi|, the surface measure density.
    pub sigma: Vec<f64>,
    /// Unit normal where sigma > 0, zero elsewhere.
    pub normal: Vec<Vec3>,
    /// Smoothed conductivity mask chi_{nu, xi}.
    pub chi: Vec<f64>,
    /// Sharp conductivity mask chi_nu.
    pub chi_sharp: Vec<f64>,
    /// Viscosity mask mu_omega.
    pub mu_mask: Vec<f64>,
}

impl GeometryCache {
    pub fn build(domain: &MovingDomain, grid: &Grid, t: f64, params: &PenaltyParams, mu: f64) -> Self {
        let n = grid.cells();
        // integrate every cell center backward in lockstep
        let mut pts: Vec<Vec3> = Vec::with_capacity(n);
        for c in 0..n {
            pts.push(grid.cell_center(c));
        }
        if t > 0.0 && !matches!(domain.velocity, VelocityField::Rest) {
            let steps = (t / domain.ode_substep).ceil().max(1.0) as usize;
            let ds = t / steps as f64;
            let mut s = t;
            for _ in 0..steps {
                for p in pts.iter_mut() {
                    *p = rk4_step(|tau, y| domain.velocity.eval(tau, y), s, *p, -ds);
                }
                s -= ds;
            }
        }
        let phi: Vec<f64> = pts.iter().map(|&p| domain.shape.phi0(p)).collect();

        let mut grad_phi = vec![[0.0; 3]; n];
        let h = grid.h;
        for c in 0..n {
            let (i, j, k) = grid.unflatten(c);
            let mut g = [0.0; 3];
            for a in 0..grid.dim {
                let (lo, hi, span) = grid.neighbor_pair(i, j, k, a);
                g[a] = (phi[hi] - phi[lo]) / (span * h);
            }
            grad_phi[c] = g;
        }

        let w = 1.5 * h;
        let mut sigma = vec![0.0; n];
        let mut normal = vec![[0.0; 3]; n];
        let mut chi = vec![0.0; n];
        let mut chi_sharp = vec![0.0; n];
        let mut mu_mask = vec![0.0; n];
        for c in 0..n {
            let p = phi[c];
            let gn = norm(grad_phi[c]);
            let k = cosine_kernel(p, w);
            if k > 0.0 && gn > 1e-12 {
                sigma[c] = k * gn;
                normal[c] = [grad_phi[c][0] / gn, grad_phi[c][1] / gn, grad_phi[c][2] / gn];
            }
            chi[c] = mask_chi_smooth(p, params.nu, params.xi);
            chi_sharp[c] = mask_chi_sharp(p, params.nu);
            mu_mask[c] = mask_viscosity(p, params.omega, mu, 3.0 * h);
        }

        Self { time: t, phi, grad_phi, sigma, normal, chi, chi_sharp, mu_mask }
    }

    /// Cells counted as solid for the confinement diagnostic: phi > 3h/2.
    pub fn is_solid(&self, cell: usize, h: f64) -> bool {
        self.phi[cell] > 1.5 * h
    }
}

#[inline]
fn rk4_step<F: Fn(f64, Vec3) -> Vec3>(f: F, t: f64, y: Vec3, dt: f64) -> Vec3 {
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * dt, axpy(y, 0.5 * dt, k1));
    let k3 = f(t + 0.5 * dt, axpy(y, 0.5 * dt, k2));
    let k4 = f(t + dt, axpy(y, dt, k3));
    [
        y[0] + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        y[1] + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        y[2] + dt / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
    ]
}

#[inline]
fn axpy(y: Vec3, a: f64, x: Vec3) -> Vec3 {
    [y[0] + a * x[0], y[1] + a * x[1], y[2] + a * x[2]]
}

#[inline]
pub fn norm(v: Vec3) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
