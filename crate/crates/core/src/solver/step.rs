//! Time stepping: CFL estimate, SSP-RK2 (Heun) over the explicit tendencies,
//! pointwise-implicit normal penalty, positivity repair and the per-step
//! energy bookkeeping consumed by the diagnostics.

use super::rhs::{assemble, Derived, StageBudget, Tendencies};
use super::viscous::ViscousOperator;
use super::{
    FieldState, PenaltyWeighting, SolverConfig, SolverError, BLOWUP_LIMIT, RHO_REG, RHO_VACUUM,
    THETA_FLOOR,
};
use crate::geometry::{GeometryCache, MovingDomain, Vec3};
use crate::numerics::CompensatedSum;

/// CFL time step from precomputed derived fields.
pub(crate) fn cfl_dt_derived(
    state: &FieldState,
    der: &Derived,
    cfg: &SolverConfig,
) -> Result<f64, SolverError> {
    let n = state.cells();
    if n == 0 {
        return Err(SolverError::EmptyState);
    }
    let grid = &state.grid;
    let h = grid.h;
    let delta = cfg.penalty.delta;
    let mut adv_min = f64::INFINITY;
    let mut d_max: f64 = 0.0;
    for c in 0..n {
        let mut speed2 = 0.0;
        for a in 0..grid.dim {
            speed2 += der.u[a][c] * der.u[a][c];
        }
        let signal = speed2.sqrt() + der.cs[c];
        if signal > 0.0 {
            adv_min = adv_min.min(h / signal);
        }
        let cv = cfg.constitutive.c_v.eval(der.theta[c]).max(1e-300);
        let diff = der.kchi[c] / ((state.rho[c].max(0.0) + delta) * cv);
        d_max = d_max.max(diff);
    }
    let dt_diff = if d_max > 0.0 {
        h * h / (2.0 * grid.dim as f64 * d_max)
    } else {
        f64::INFINITY
    };
    let dt = cfg.cfl * adv_min.min(dt_diff);
    if !dt.is_finite() || dt <= 0.0 {
        return Err(SolverError::BadConfig(format!("degenerate time step {dt}")));
    }
    Ok(dt)
}

/// Stable explicit time step: advective signal speed and thermal diffusion.
/// The penalty never enters (it is implicit) and the viscous terms are kept
/// stable by the per-cell coefficient cap.
pub fn cfl_dt(
    state: &FieldState,
    geom: &GeometryCache,
    cfg: &SolverConfig,
) -> Result<f64, SolverError> {
    let der = Derived::compute(state, geom, cfg, None);
    cfl_dt_derived(state, &der, cfg)
}

/// Result of the pointwise implicit penalty at one cell.
#[derive(Debug, Clone, Copy)]
pub struct PenaltySample {
    pub m_new: Vec3,
    /// Exact kinetic-energy bookkeeping: Delta(KE) - Delta(m.V) = -energy.
    pub energy: f64,
    /// sigma |(u'-V).n|^2, the unweighted penalty-integral density rate.
    pub quad_unweighted: f64,
}

/// Relax the normal momentum component toward the boundary velocity.
///
/// Solves m' = m - (dt sigma / eps) w ((u'-V).n) n with w the density or unit
/// weight; closed form, unconditionally stable in eps. Tangential components
/// are untouched.
pub fn apply_penalty_implicit(
    m: Vec3,
    rho: f64,
    sigma: f64,
    normal: Vec3,
    v_wall: Vec3,
    dt: f64,
    eps: f64,
    weighting: PenaltyWeighting,
) -> PenaltySample {
    if sigma == 0.0 {
        return PenaltySample { m_new: m, energy: 0.0, quad_unweighted: 0.0 };
    }
    let rho_t = rho.max(0.0) + RHO_REG;
    let weight = match weighting {
        PenaltyWeighting::Density => rho_t,
        PenaltyWeighting::Unit => 1.0,
    };
    let lam = dt * sigma / eps * weight / rho_t;
    let a = (m[0] * normal[0] + m[1] * normal[1] + m[2] * normal[2]) / rho_t;
    let b = v_wall[0] * normal[0] + v_wall[1] * normal[1] + v_wall[2] * normal[2];
    let a_new = (a + lam * b) / (1.0 + lam);
    let da = a_new - a;
    let mis = a_new - b;
    PenaltySample {
        m_new: [
            m[0] + rho_t * da * normal[0],
            m[1] + rho_t * da * normal[1],
            m[2] + rho_t * da * normal[2],
        ],
        energy: rho_t * lam * (1.0 + 0.5 * lam) * mis * mis,
        quad_unweighted: sigma * mis * mis,
    }
}

/// Reusable buffers and run-scoped configuration for the stepper.
pub struct StepContext {
    pub visc: ViscousOperator,
    pub warm_theta: Option<Vec<f64>>,
    /// Thermal test functions contracted against fluxes and sources.
    pub monitors: Vec<Vec<f64>>,
    stage1: Option<FieldState>,
    tend0: Option<Tendencies>,
    tend1: Option<Tendencies>,
    heat: Vec<f64>,
    v0: Vec<Vec3>,
    v1: Vec<Vec3>,
    dtv0: Vec<Vec3>,
    dtv1: Vec<Vec3>,
}

impl StepContext {
    pub fn new(grid_dim: usize, h: f64) -> Self {
        Self {
            visc: ViscousOperator::new(grid_dim, h),
            warm_theta: None,
            monitors: Vec::new(),
            stage1: None,
            tend0: None,
            tend1: None,
            heat: Vec::new(),
            v0: Vec::new(),
            v1: Vec::new(),
            dtv0: Vec::new(),
            dtv1: Vec::new(),
        }
    }
}

/// Everything one step reports to the diagnostics layer.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub dt: f64,
    /// dt-integrated counted dissipation: delta (S:grad u + theta sink),
    /// friction quadratic, plus the exact penalty energy.
    pub counted_dissipation: f64,
    /// dt-integrated V-work: S:grad V - rho u x u:grad V - p_delta div V - m.dV/dt.
    pub work_integral: f64,
    pub penalty_energy: f64,
    /// Increment of the unweighted penalty integral (p12 monitor).
    pub penalty_integral_inc: f64,
    /// Total energy and transfer sum m.V after the step (V at t + dt).
    pub e_after: f64,
    pub mv_after: f64,
    /// sum T_k(rho) vol after the step.
    pub tk_after: f64,
    /// Per-step renormalized-continuity residual rate.
    pub renorm_residual: f64,
    pub min_theta: f64,
    pub repair_mass: f64,
    pub repair_energy: f64,
    pub ke_projected: f64,
    /// dt-integrated monitor contractions (fluxes plus sources).
    pub m6_integral: Vec<f64>,
    /// Monitor-weighted thermal repair additions.
    pub m6_repair: Vec<f64>,
    /// dt-integrated delta * theta sink (for the energy ledger).
    pub delta_sink_integral: f64,
    /// dt-integrated solid-region tallies for sweeps.
    pub solid_visc_integral: f64,
    pub solid_diffusion_integral: f64,
}

/// One full step: Heun over the explicit tendencies, implicit penalty,
/// vacuum momentum projection and positivity repair.
///
/// `dt_cap` bounds the step (used to land exactly on output times and T).
pub fn step(
    state: &FieldState,
    t: f64,
    dt_cap: f64,
    geom: &GeometryCache,
    domain: &MovingDomain,
    cfg: &SolverConfig,
    ctx: &mut StepContext,
) -> Result<(FieldState, StepRecord), SolverError> {
    let n = state.cells();
    let grid = state.grid.clone();
    let vol = grid.cell_volume();
    let delta = cfg.penalty.delta;

    // stage 0 derived fields and time step
    let mut der0 = Derived::compute(state, geom, cfg, ctx.warm_theta.as_deref());
    let dt = cfl_dt_derived(state, &der0, cfg)?.min(dt_cap);
    der0.limit_viscosity(state, dt);

    sample_field(domain, &grid, t, &mut ctx.v0, &mut ctx.dtv0);
    sample_field(domain, &grid, t + dt, &mut ctx.v1, &mut ctx.dtv1);
    if ctx.heat.len() != n {
        ctx.heat = vec![0.0; n];
    }

    let mut tend0 = ctx.tend0.take().unwrap_or_else(|| Tendencies::zeros(n));
    let budget0 = assemble(
        state, &der0, geom, &ctx.v0, &ctx.dtv0, &ctx.visc, cfg, dt, &ctx.monitors, &mut tend0,
        &mut ctx.heat,
    );

    // stage 1: full Euler step, tendencies evaluated at t + dt
    let mut s1 = ctx.stage1.take().unwrap_or_else(|| FieldState::zeros(grid.clone()));
    s1.assign_axpy(state, dt, &tend0);
    let mut der1 = Derived::compute(&s1, geom, cfg, Some(&der0.theta));
    der1.limit_viscosity(&s1, dt);
    let mut tend1 = ctx.tend1.take().unwrap_or_else(|| Tendencies::zeros(n));
    let budget1 = assemble(
        &s1, &der1, geom, &ctx.v1, &ctx.dtv1, &ctx.visc, cfg, dt, &ctx.monitors, &mut tend1,
        &mut ctx.heat,
    );

    let mut next = FieldState::zeros(grid.clone());
    next.assign_axpy2(state, 0.5 * dt, &tend0, 0.5 * dt, &tend1);

    // pointwise implicit penalty at the end-of-step time
    let mut penalty_energy = 0.0;
    let mut penalty_quad = 0.0;
    for c in 0..n {
        let sg = geom.sigma[c];
        if sg > 0.0 {
            let m = [next.mom[0][c], next.mom[1][c], next.mom[2][c]];
            let s = apply_penalty_implicit(
                m,
                next.rho[c],
                sg,
                geom.normal[c],
                ctx.v1[c],
                dt,
                cfg.penalty.eps,
                cfg.penalty_weighting,
            );
            for a in 0..grid.dim {
                next.mom[a][c] = s.m_new[a];
            }
            penalty_energy += s.energy * vol;
            penalty_quad += s.quad_unweighted * vol * dt;
        }
    }

    // repairs, blow-up detection, energy snapshot
    let set = &cfg.constitutive;
    let w_floor_per_unit = set.thermal_q(THETA_FLOOR).unwrap_or(0.0);
    let mut repair_mass = 0.0;
    let mut repair_energy = 0.0;
    let mut ke_projected = 0.0;
    let mut m6_repair = vec![0.0; ctx.monitors.len()];
    let mut e_sum = CompensatedSum::new();
    let mut mv_sum = CompensatedSum::new();
    let mut tk_sum = CompensatedSum::new();
    let mut q_min = f64::INFINITY;
    let k_cut = cfg.renorm_cutoff;
    let beta = cfg.penalty.beta;

    for c in 0..n {
        let mut rho = next.rho[c];
        let mut w = next.w[c];
        let mut m = [next.mom[0][c], next.mom[1][c], next.mom[2][c]];
        if !rho.is_finite()
            || !w.is_finite()
            || !m[0].is_finite()
            || !m[1].is_finite()
            || !m[2].is_finite()
            || rho.abs() > BLOWUP_LIMIT
            || w.abs() > BLOWUP_LIMIT
            || m[0].abs().max(m[1].abs()).max(m[2].abs()) > BLOWUP_LIMIT
        {
            return Err(SolverError::BlowUp {
                time: t + dt,
                what: format!("cell {c}: rho={rho:.3e} w={w:.3e}"),
            });
        }
        if rho < 0.0 {
            repair_mass += -rho * vol;
            repair_energy += -rho * set.elastic_potential(rho.max(0.0)) * vol;
            rho = 0.0;
            next.rho[c] = 0.0;
        }
        if rho <= RHO_VACUUM {
            let m2 = m[0] * m[0] + m[1] * m[1] + m[2] * m[2];
            if m2 > 0.0 {
                ke_projected += 0.5 * m2 / (rho.max(0.0) + RHO_REG) * vol;
                m = [0.0; 3];
                for a in 0..grid.dim {
                    next.mom[a][c] = 0.0;
                }
            }
        }
        let w_min = (rho + delta) * w_floor_per_unit;
        if w < w_min {
            let add = w_min - w;
            repair_energy += add * vol;
            for (p, phi) in ctx.monitors.iter().enumerate() {
                m6_repair[p] += phi[c] * add * vol;
            }
            w = w_min;
            next.w[c] = w;
        }
        let rho_t = rho.max(0.0) + RHO_REG;
        let ke = 0.5 * (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]) / rho_t;
        let pot = rho * set.elastic_potential(rho)
            + delta / (beta - 1.0) * crate::numerics::fast_pow(rho, beta);
        e_sum.add(ke + pot + w);
        let mut mv = 0.0;
        for a in 0..grid.dim {
            mv += m[a] * ctx.v1[c][a];
        }
        mv_sum.add(mv);
        tk_sum.add(rho.min(k_cut));
        q_min = q_min.min(w / (rho + delta));
    }

    let min_theta = set.invert_q(q_min.max(0.0)).unwrap_or(0.0);

    // fold the two stage budgets with the Heun weights
    let half_dt = 0.5 * dt;
    let counted_dissipation = half_dt
        * (delta * (budget0.visc_dissipation + budget1.visc_dissipation)
            + delta * (budget0.theta_sink + budget1.theta_sink)
            + (budget0.friction_dissipation + budget1.friction_dissipation))
        + penalty_energy;
    let work = |b: &StageBudget| b.work_visc_v - b.work_adv_v - b.work_pressure_v - b.work_dt_v;
    let work_integral = half_dt * (work(&budget0) + work(&budget1));
    let m6_integral: Vec<f64> = (0..ctx.monitors.len())
        .map(|p| half_dt * (budget0.m6_flux[p] + budget0.m6_src[p] + budget1.m6_flux[p] + budget1.m6_src[p]))
        .collect();
    let renorm_residual = (tk_sum.value() * vol) / dt
        + 0.5 * (budget0.renorm_excess + budget1.renorm_excess);
    // caller subtracts the previous T_k total / dt; report the pieces
    let record = StepRecord {
        dt,
        counted_dissipation,
        work_integral,
        penalty_energy,
        penalty_integral_inc: penalty_quad,
        e_after: e_sum.value() * vol,
        mv_after: mv_sum.value() * vol,
        tk_after: tk_sum.value() * vol,
        renorm_residual,
        min_theta,
        repair_mass,
        repair_energy,
        ke_projected,
        m6_integral,
        m6_repair,
        delta_sink_integral: half_dt * delta * (budget0.theta_sink + budget1.theta_sink),
        solid_visc_integral: half_dt
            * (budget0.solid_visc_dissipation + budget1.solid_visc_dissipation),
        solid_diffusion_integral: half_dt * (budget0.solid_diffusion + budget1.solid_diffusion),
    };

    ctx.warm_theta = Some(der1.theta);
    ctx.stage1 = Some(s1);
    ctx.tend0 = Some(tend0);
    ctx.tend1 = Some(tend1);
    Ok((next, record))
}

fn sample_field(
    domain: &MovingDomain,
    grid: &super::grid::Grid,
    t: f64,
    v: &mut Vec<Vec3>,
    dtv: &mut Vec<Vec3>,
) {
    let n = grid.cells();
    v.resize(n, [0.0; 3]);
    dtv.resize(n, [0.0; 3]);
    for c in 0..n {
        let x = grid.cell_center(c);
        v[c] = domain.evaluate_v(t, x);
        dtv[c] = domain.evaluate_v_dt(t, x);
    }
}

/// Total energy and transfer functional of a state with V at time t.
pub fn energy_snapshot(
    state: &FieldState,
    cfg: &SolverConfig,
    domain: &MovingDomain,
    t: f64,
) -> (f64, f64) {
    let set = &cfg.constitutive;
    let delta = cfg.penalty.delta;
    let beta = cfg.penalty.beta;
    let vol = state.grid.cell_volume();
    let mut e = CompensatedSum::new();
    let mut mv = CompensatedSum::new();
    for c in 0..state.cells() {
        let rho = state.rho[c];
        let rho_t = rho.max(0.0) + RHO_REG;
        let mut ke = 0.0;
        let mut mvc = 0.0;
        let v = domain.evaluate_v(t, state.grid.cell_center(c));
        for a in 0..state.grid.dim {
            ke += state.mom[a][c] * state.mom[a][c];
            mvc += state.mom[a][c] * v[a];
        }
        e.add(
            0.5 * ke / rho_t
                + rho * set.elastic_potential(rho.max(0.0))
                + delta / (beta - 1.0) * crate::numerics::fast_pow(rho.max(0.0), beta)
                + state.w[c],
        );
        mv.add(mvc);
    }
    (e.value() * vol, mv.value() * vol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn penalty_identities() {
        let n = [0.6, 0.8, 0.0];
        let v = [0.3, -0.2, 0.0];
        let m = [0.5, 0.9, 0.0];
        let rho = 1.3;
        let rho_t = rho + RHO_REG;
        for (dt, eps, sigma) in [(1e-3, 1e-2, 5.0), (0.1, 1e-4, 12.0), (1e-4, 1.0, 0.7)] {
            for weighting in [PenaltyWeighting::Density, PenaltyWeighting::Unit] {
                let s = apply_penalty_implicit(m, rho, sigma, n, v, dt, eps, weighting);
                // tangential momentum unchanged
                let dm = [s.m_new[0] - m[0], s.m_new[1] - m[1], s.m_new[2] - m[2]];
                let cross = dm[0] * n[1] - dm[1] * n[0];
                assert!(cross.abs() < 1e-14, "tangential change {cross}");
                // exact energy identity: d(KE) - dm.V + energy = 0
                let ke0 = 0.5 * (m[0] * m[0] + m[1] * m[1]) / rho_t;
                let ke1 = 0.5 * (s.m_new[0] * s.m_new[0] + s.m_new[1] * s.m_new[1]) / rho_t;
                let dmv = dm[0] * v[0] + dm[1] * v[1];
                let residual = (ke1 - ke0) - dmv + s.energy;
                assert!(residual.abs() < 1e-13, "penalty energy identity {residual}");
                assert!(s.energy >= 0.0);
            }
        }
    }

    #[test]
    fn penalty_limits_and_monotonicity() {
        let n = [1.0, 0.0, 0.0];
        let v = [0.25, 0.0, 0.0];
        let m = [1.0, 0.4, 0.0];
        let rho = 1.0;
        let rho_t = rho + RHO_REG;
        // sigma = 0: untouched
        let s0 = apply_penalty_implicit(m, rho, 0.0, n, v, 0.1, 1e-3, PenaltyWeighting::Density);
        assert_eq!(s0.m_new, m);
        // dt sigma / eps -> infinity: normal velocity pinned to V.n
        let s = apply_penalty_implicit(m, rho, 1e12, n, v, 1.0, 1e-6, PenaltyWeighting::Density);
        assert!((s.m_new[0] / rho_t - 0.25).abs() < 1e-9);
        // lambda = 1: mismatch halves
        let m1 = [rho_t * (v[0] + 1.0), 0.0, 0.0];
        let s1 = apply_penalty_implicit(m1, rho, 1.0, n, v, 1.0, 1.0, PenaltyWeighting::Density);
        let mis = s1.m_new[0] / rho_t - v[0];
        assert!((mis - 0.5).abs() < 1e-13);
        // the normal mismatch never grows
        for lam_scale in [1e-4, 1e-2, 1.0, 1e3] {
            let s = apply_penalty_implicit(m, rho, lam_scale, n, v, 0.01, 0.1, PenaltyWeighting::Unit);
            let before = (m[0] / rho_t - v[0]).abs();
            let after = (s.m_new[0] / rho_t - v[0]).abs();
            assert!(after <= before + 1e-15);
        }
    }
}
