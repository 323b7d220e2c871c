use nsf_core::constitutive::ConstitutiveSet;
use nsf_core::geometry::{GeometryCache, PenaltyParams, ReferenceShape, VelocityField};
use nsf_core::solver::{step, InitialData, StepContext, apply_initial_data};
use nsf_core::diagnostics::energy_residual;
use nsf_core::{Grid, MovingDomain, SolverConfig};

fn main() {
    let grid = Grid::new(2, 32, 2.0).unwrap();
    let domain = MovingDomain::new(
        VelocityField::Rotation { rate: 1.0, rigid_radius: 0.82, support_radius: 1.0 },
        ReferenceShape::Disk { center: [0.0; 3], radius: 0.5 },
        1.0,
    );
    let cfg = SolverConfig::new(
        PenaltyParams { eps: 1e-2, omega: 0.25, nu: 0.05, xi: 0.1, delta: 0.05, beta: 5.0 },
        ConstitutiveSet::default_laws(),
        0.25,
    );
    let state0 = apply_initial_data(&grid, &domain, &InitialData::default(), &cfg).unwrap();
    let geom = GeometryCache::build(&domain, &grid, 0.0, &cfg.penalty, cfg.constitutive.mu);
    let mut ctx = StepContext::new(grid.dim, grid.h);
    let (e0, mv0) = nsf_core::solver::energy_snapshot(&state0, &cfg, &domain, 0.0);
    let mut state = state0;
    let mut t = 0.0;
    let mut prev_e = e0;
    let mut prev_mv = mv0;
    for k in 0..60 {
        let (next, rec) = step(&state, t, f64::INFINITY, &geom, &domain, &cfg, &mut ctx).unwrap();
        let r = energy_residual(prev_e, prev_mv, &rec);
        if k < 10 || r.abs() > 1e-6 {
            println!(
                "step {k}: dt={:.3e} residual={:+.6e}  dE={:+.3e} dMV={:+.3e} counted={:.3e} work={:+.3e} pen={:.3e} keproj={:.3e} rep_e={:.3e}",
                rec.dt, r, rec.e_after - prev_e, rec.mv_after - prev_mv,
                rec.counted_dissipation, rec.work_integral, rec.penalty_energy,
                rec.ke_projected, rec.repair_energy
            );
        }
        prev_e = rec.e_after;
        prev_mv = rec.mv_after;
        state = next;
        t += rec.dt;
    }
}
