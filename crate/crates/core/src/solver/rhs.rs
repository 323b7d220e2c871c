//! Tendency assembly for the penalized system.
//!
//! Flux structure per interior face, per axis:
//!   mass      F = rho* ubar - (lambda/2) d(rho),  lambda = max(|uL.n|,|uR.n|)
//!   momentum  F^m = F * (arithmetic mean velocity)
//!   thermal   F^w = q_donor * F - harmonic(chi kappa) d(theta)/h
//! with rho* = d(pi)/d(g): the face density for which the discrete pressure
//! work telescopes exactly against the change of elastic plus artificial
//! potential (pi = p_e + delta rho^beta, g = d[rho P_e + delta rho^beta/(beta-1)]/d rho).
//! The thermal pressure contributes through matching face means on the
//! momentum and thermal sides, so its exchange telescopes as well. Every
//! remaining flux term is dissipative and is tallied in the stage budget.

use super::step::cfl_dt_derived;
use super::viscous::ViscousOperator;
use super::{FieldState, SolverConfig, SolverError, RHO_REG};
use crate::geometry::{GeometryCache, MovingDomain, Vec3};
use crate::numerics::fast_pow;

/// Per-cell quantities derived from the conserved fields at one stage.
#[derive(Debug, Clone)]
pub struct Derived {
    pub theta: Vec<f64>,
    pub u: [Vec<f64>; 3],
    /// Specific thermal energy w / (rho + delta), the advected quantity.
    pub q_spec: Vec<f64>,
    /// p_e + delta rho^beta.
    pub pi: Vec<f64>,
    /// theta * p_theta(rho).
    pub cap_pi: Vec<f64>,
    /// P_e + p_e/rho + delta beta/(beta-1) rho^(beta-1).
    pub g_pot: Vec<f64>,
    /// Wide-centered divergence of u with zero-velocity ghosts.
    pub div_u: Vec<f64>,
    /// chi_{nu,xi} * kappa(theta).
    pub kchi: Vec<f64>,
    pub cs: Vec<f64>,
    pub mu_eff: Vec<f64>,
    pub eta_eff: Vec<f64>,
    /// theta^(alpha+1).
    pub sink: Vec<f64>,
}

impl Derived {
    pub fn compute(
        state: &FieldState,
        geom: &GeometryCache,
        cfg: &SolverConfig,
        warm_theta: Option<&[f64]>,
    ) -> Self {
        let n = state.cells();
        let grid = &state.grid;
        let set = &cfg.constitutive;
        let delta = cfg.penalty.delta;
        let beta = cfg.penalty.beta;
        let mut theta = vec![0.0; n];
        let mut u = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        let mut q_spec = vec![0.0; n];
        let mut pi = vec![0.0; n];
        let mut cap_pi = vec![0.0; n];
        let mut g_pot = vec![0.0; n];
        let mut kchi = vec![0.0; n];
        let mut cs = vec![0.0; n];
        let mut sink = vec![0.0; n];

        let cv0 = set.c_v.eval(0.0).max(1e-300);
        for c in 0..n {
            let rho = state.rho[c];
            let rho_pos = rho.max(0.0);
            let rho_t = rho.max(0.0) + RHO_REG;
            for a in 0..grid.dim {
                u[a][c] = state.mom[a][c] / rho_t;
            }
            let q = (state.w[c] / (rho_pos + delta)).max(0.0);
            q_spec[c] = state.w[c] / (rho_pos + delta);
            let seed = warm_theta.map(|w| w[c]).unwrap_or(q / cv0);
            let th = set.invert_q_seeded(q, seed).unwrap_or(0.0);
            theta[c] = th;
            let rb = fast_pow(rho_pos, beta);
            pi[c] = set.p_e.eval(rho_pos) + delta * rb;
            cap_pi[c] = th * set.p_theta.eval(rho_pos);
            g_pot[c] = set.specific_g_elastic(rho_pos)
                + delta * beta / (beta - 1.0) * fast_pow(rho_pos, beta - 1.0);
            kchi[c] = geom.chi[c] * set.kappa.eval(th);
            let rho_cs = rho_pos.max(1e-8);
            let cs2 = set.p_e.deriv(rho_cs)
                + th * set.p_theta.deriv(rho_cs)
                + delta * beta * fast_pow(rho_cs, beta - 1.0);
            cs[c] = cs2.max(0.0).sqrt();
            sink[c] = fast_pow(th, set.alpha + 1.0);
        }

        // wide-centered divergence with zero ghosts
        let mut div_u = vec![0.0; n];
        let h = grid.h;
        for c in 0..n {
            let (i, j, k) = grid.unflatten(c);
            let pos = [i, j, k];
            let mut d = 0.0;
            for a in 0..grid.dim {
                let s = grid.stride(a);
                let up = if pos[a] + 1 < grid.n[a] { u[a][c + s] } else { 0.0 };
                let dn = if pos[a] > 0 { u[a][c - s] } else { 0.0 };
                d += (up - dn) / (2.0 * h);
            }
            div_u[c] = d;
        }

        let mu_eff = geom.mu_mask.clone();
        let eta_eff = vec![set.eta; n];

        Self { theta, u, q_spec, pi, cap_pi, g_pot, div_u, kchi, cs, mu_eff, eta_eff, sink }
    }

    /// Cap the viscous coefficients by the explicit diffusion stability bound
    /// for the time step actually taken. Binds only in near-vacuum cells.
    pub fn limit_viscosity(&mut self, state: &FieldState, dt: f64) {
        let grid = &state.grid;
        let cap_coef = grid.h * grid.h / (3.0 * grid.dim as f64 * dt);
        for c in 0..state.cells() {
            let cap = (state.rho[c].max(0.0) + RHO_REG) * cap_coef;
            if self.mu_eff[c] > cap {
                self.mu_eff[c] = cap;
            }
            if self.eta_eff[c] > cap {
                self.eta_eff[c] = cap;
            }
        }
    }
}

/// Conserved-field tendencies (per-volume rates).
#[derive(Debug, Clone)]
pub struct Tendencies {
    pub d_rho: Vec<f64>,
    pub d_mom: [Vec<f64>; 3],
    pub d_w: Vec<f64>,
}

impl Tendencies {
    pub fn zeros(n: usize) -> Self {
        Self {
            d_rho: vec![0.0; n],
            d_mom: [vec![0.0; n], vec![0.0; n], vec![0.0; n]],
            d_w: vec![0.0; n],
        }
    }

    fn clear(&mut self) {
        self.d_rho.iter_mut().for_each(|v| *v = 0.0);
        self.d_w.iter_mut().for_each(|v| *v = 0.0);
        for a in 0..3 {
            self.d_mom[a].iter_mut().for_each(|v| *v = 0.0);
        }
    }
}

/// Sign-definite and work tallies for one tendency evaluation. All entries
/// are integrated over the box (units of power).
#[derive(Debug, Clone, Default)]
pub struct StageBudget {
    /// Total S : grad u (nonnegative).
    pub visc_dissipation: f64,
    /// Sum theta^(alpha+1) vol (unscaled by delta).
    pub theta_sink: f64,
    /// -(F dg - ubar dpi) summed over faces (nonnegative).
    pub flux_potential_dissipation: f64,
    /// zeta sigma |[u-V]_tan|^2 (nonnegative).
    pub friction_dissipation: f64,
    /// Discrete S : grad V.
    pub work_visc_v: f64,
    /// Discrete rho u x u : grad V.
    pub work_adv_v: f64,
    /// Discrete p_delta div V.
    pub work_pressure_v: f64,
    /// Sum m . dV/dt.
    pub work_dt_v: f64,
    /// Friction force power against V.
    pub work_friction_v: f64,
    /// Viscous dissipation in elements fully inside the solid.
    pub solid_visc_dissipation: f64,
    /// chi kappa |grad theta|^2 over solid-solid faces.
    pub solid_diffusion: f64,
    /// Sum (T_k'(rho) rho - T_k(rho)) div u vol for the renormalization monitor.
    pub renorm_excess: f64,
    /// Per-monitor flux contraction: sum_f F^w (phi_R - phi_L) area.
    pub m6_flux: Vec<f64>,
    /// Per-monitor source contraction (compression work + deposited heat).
    pub m6_src: Vec<f64>,
}

/// Assemble all explicit tendencies at one stage.
#[allow(clippy::too_many_arguments)]
pub(crate) fn assemble(
    state: &FieldState,
    der: &Derived,
    geom: &GeometryCache,
    v_cells: &[Vec3],
    dtv_cells: &[Vec3],
    visc: &ViscousOperator,
    cfg: &SolverConfig,
    dt_limiter: f64,
    monitors: &[Vec<f64>],
    out: &mut Tendencies,
    heat: &mut [f64],
) -> StageBudget {
    let grid = &state.grid;
    let n = state.cells();
    let h = grid.h;
    let vol = grid.cell_volume();
    let area = grid.face_area();
    let dim = grid.dim;
    let delta = cfg.penalty.delta;
    let zeta = cfg.constitutive.zeta;
    let k_cut = cfg.renorm_cutoff;
    let solid_band = 1.5 * h;

    out.clear();
    heat.iter_mut().for_each(|v| *v = 0.0);
    let mut budget = StageBudget {
        m6_flux: vec![0.0; monitors.len()],
        m6_src: vec![0.0; monitors.len()],
        ..Default::default()
    };

    // cell sources: compression work, radiative-like sink, friction, V-rate
    for c in 0..n {
        out.d_w[c] -= der.cap_pi[c] * der.div_u[c] + delta * der.sink[c];
        budget.theta_sink += der.sink[c] * vol;
        for a in 0..dim {
            budget.work_dt_v += state.mom[a][c] * dtv_cells[c][a] * vol;
        }
        let rho = state.rho[c];
        if rho >= k_cut {
            budget.renorm_excess += -k_cut * der.div_u[c] * vol;
        }
        if zeta > 0.0 && geom.sigma[c] > 0.0 {
            let nrm = geom.normal[c];
            let mut rel = [0.0; 3];
            for a in 0..dim {
                rel[a] = der.u[a][c] - v_cells[c][a];
            }
            let rel_n = rel[0] * nrm[0] + rel[1] * nrm[1] + rel[2] * nrm[2];
            let mut tan2 = 0.0;
            let mut vf = 0.0;
            for a in 0..dim {
                let t = rel[a] - rel_n * nrm[a];
                let f = -zeta * geom.sigma[c] * t;
                out.d_mom[a][c] += f;
                tan2 += t * t;
                vf += v_cells[c][a] * f;
            }
            budget.friction_dissipation += zeta * geom.sigma[c] * tan2 * vol;
            budget.work_friction_v += vf * vol;
        }
    }

    // interior faces, axis by axis
    let cap = 0.25 * h / (dim as f64 * dt_limiter);
    for axis in 0..dim {
        let s = grid.stride(axis);
        for kk in 0..grid.n[2] {
            for jj in 0..grid.n[1] {
                for ii in 0..grid.n[0] {
                    let pos = [ii, jj, kk][axis];
                    let c = grid.idx(ii, jj, kk);
                    if pos + 1 >= grid.n[axis] {
                        continue;
                    }
                    let r = c + s;
                    let ul = der.u[axis][c];
                    let ur = der.u[axis][r];
                    let ubar = 0.5 * (ul + ur);
                    let lam = ul.abs().max(ur.abs());
                    let d_rho = state.rho[r] - state.rho[c];
                    let d_pi = der.pi[r] - der.pi[c];
                    let d_g = der.g_pot[r] - der.g_pot[c];
                    let scale = state.rho[c].abs().max(state.rho[r].abs()).max(1e-300);
                    let rho_star = if d_rho.abs() > 1e-13 * scale && d_g.abs() > 1e-300 {
                        (d_pi / d_g).clamp(state.rho[c].min(state.rho[r]), state.rho[c].max(state.rho[r]))
                    } else {
                        0.5 * (state.rho[c] + state.rho[r])
                    };
                    let mut flux = rho_star * ubar - 0.5 * lam * d_rho;
                    // positivity guard: never drain more than half a cell
                    let hi = state.rho[c].max(0.0) * cap;
                    let lo = -state.rho[r].max(0.0) * cap;
                    flux = flux.clamp(lo.min(hi), hi.max(lo));

                    budget.flux_potential_dissipation -= (flux * d_g - ubar * d_pi) * area;

                    out.d_rho[c] -= flux / h;
                    out.d_rho[r] += flux / h;

                    let mut adv_v = 0.0;
                    for b in 0..dim {
                        let umean = 0.5 * (der.u[b][c] + der.u[b][r]);
                        out.d_mom[b][c] -= flux * umean / h;
                        out.d_mom[b][r] += flux * umean / h;
                        adv_v += umean * (v_cells[r][b] - v_cells[c][b]);
                    }
                    budget.work_adv_v += flux * adv_v * area;

                    let pbar = 0.5 * (der.pi[c] + der.pi[r]) + 0.5 * (der.cap_pi[c] + der.cap_pi[r]);
                    out.d_mom[axis][c] -= pbar / h;
                    out.d_mom[axis][r] += pbar / h;
                    budget.work_pressure_v += pbar * (v_cells[r][axis] - v_cells[c][axis]) * area;

                    // thermal advection (donor) + diffusion (harmonic face coefficient)
                    let q = if flux >= 0.0 { der.q_spec[c] } else { der.q_spec[r] };
                    let ka = der.kchi[c];
                    let kb = der.kchi[r];
                    let kf = if ka + kb > 0.0 { 2.0 * ka * kb / (ka + kb) } else { 0.0 };
                    let d_th = der.theta[r] - der.theta[c];
                    let fw = q * flux - kf * d_th / h;
                    out.d_w[c] -= fw / h;
                    out.d_w[r] += fw / h;

                    for (p, phi) in monitors.iter().enumerate() {
                        budget.m6_flux[p] += fw * (phi[r] - phi[c]) * area;
                    }
                    if geom.phi[c] > solid_band && geom.phi[r] > solid_band {
                        budget.solid_diffusion += kf * (d_th / h) * (d_th / h) * vol;
                    }
                }
            }
        }
        // wall faces carry only the (copied) pressure
        for kk in 0..grid.n[2] {
            for jj in 0..grid.n[1] {
                for ii in 0..grid.n[0] {
                    let pos = [ii, jj, kk][axis];
                    let c = grid.idx(ii, jj, kk);
                    if pos == 0 {
                        out.d_mom[axis][c] += (der.pi[c] + der.cap_pi[c]) / h;
                    }
                    if pos == grid.n[axis] - 1 {
                        out.d_mom[axis][c] -= (der.pi[c] + der.cap_pi[c]) / h;
                    }
                }
            }
        }
    }

    visc.apply(
        grid,
        &der.u,
        v_cells,
        &der.mu_eff,
        &der.eta_eff,
        &geom.phi,
        heat,
        &mut out.d_mom,
        &mut budget,
    );
    for c in 0..n {
        out.d_w[c] += (1.0 - delta) * heat[c];
    }
    for (p, phi) in monitors.iter().enumerate() {
        let mut acc = 0.0;
        for c in 0..n {
            acc += phi[c] * (-der.cap_pi[c] * der.div_u[c] + (1.0 - delta) * heat[c]) * vol;
        }
        budget.m6_src[p] += acc;
    }

    budget
}

fn rhs_with_default_dt(
    state: &FieldState,
    t: f64,
    geom: &GeometryCache,
    domain: &MovingDomain,
    cfg: &SolverConfig,
) -> Result<Tendencies, SolverError> {
    let mut der = Derived::compute(state, geom, cfg, None);
    let dt = cfl_dt_derived(state, &der, cfg)?;
    der.limit_viscosity(state, dt);
    let n = state.cells();
    let mut v_cells = vec![[0.0; 3]; n];
    let mut dtv_cells = vec![[0.0; 3]; n];
    for c in 0..n {
        let x = state.grid.cell_center(c);
        v_cells[c] = domain.evaluate_v(t, x);
        dtv_cells[c] = domain.evaluate_v_dt(t, x);
    }
    let visc = ViscousOperator::new(state.grid.dim, state.grid.h);
    let mut out = Tendencies::zeros(n);
    let mut heat = vec![0.0; n];
    assemble(state, &der, geom, &v_cells, &dtv_cells, &visc, cfg, dt, &[], &mut out, &mut heat);
    Ok(out)
}

/// Density tendency: conservative advective flux divergence of rho u.
pub fn continuity_rhs(
    state: &FieldState,
    t: f64,
    geom: &GeometryCache,
    domain: &MovingDomain,
    cfg: &SolverConfig,
) -> Result<Vec<f64>, SolverError> {
    Ok(rhs_with_default_dt(state, t, geom, domain, cfg)?.d_rho)
}

/// Explicit momentum tendency: advection, pressure gradient, viscous force
/// and tangential friction. The stiff normal penalty is handled implicitly
/// in [`step`](super::step::step) and is not part of this tendency.
pub fn momentum_rhs(
    state: &FieldState,
    t: f64,
    geom: &GeometryCache,
    domain: &MovingDomain,
    cfg: &SolverConfig,
) -> Result<[Vec<f64>; 3], SolverError> {
    Ok(rhs_with_default_dt(state, t, geom, domain, cfg)?.d_mom)
}

/// Thermal tendency: advection, masked diffusion, compression work,
/// deposited viscous heating and the delta theta^(alpha+1) sink.
pub fn thermal_rhs(
    state: &FieldState,
    t: f64,
    geom: &GeometryCache,
    domain: &MovingDomain,
    cfg: &SolverConfig,
) -> Result<Vec<f64>, SolverError> {
    Ok(rhs_with_default_dt(state, t, geom, domain, cfg)?.d_w)
}
