//! Initial data: density confined to the initial fluid domain with a short
//! mass-preserving ramp, momentum consistent with the chosen velocity
//! profile (zero wherever the density vanishes), temperature clipped into
//! its admissible band and the thermal variable w = (rho + delta) Q(theta).

use super::{FieldState, SolverConfig, SolverError};
use crate::geometry::{MovingDomain, Vec3};
use crate::numerics::{smoothstep, CompensatedSum};
use crate::solver::grid::Grid;

#[derive(Debug, Clone)]
pub enum ThetaInit {
    Uniform { value: f64 },
    Gaussian { center: Vec3, width: f64, amplitude: f64, base: f64 },
}

impl ThetaInit {
    fn eval(&self, x: Vec3) -> f64 {
        match *self {
            ThetaInit::Uniform { value } => value,
            ThetaInit::Gaussian { center, width, amplitude, base } => {
                let d2 = (x[0] - center[0]).powi(2)
                    + (x[1] - center[1]).powi(2)
                    + (x[2] - center[2]).powi(2);
                base + amplitude * (-d2 / (width * width)).exp()
            }
        }
    }
}

#[derive(Debug, Clone)]
pub enum VelocityInit {
    Rest,
    /// Rigid rotation about the z axis through `center`.
    RigidRotation { rate: f64, center: Vec3 },
    /// The boundary field V(0, x) itself.
    BoundaryField,
}

#[derive(Debug, Clone)]
pub struct InitialData {
    pub rho_fluid: f64,
    pub theta: ThetaInit,
    pub velocity: VelocityInit,
    pub theta_min: f64,
    pub theta_max: f64,
    /// Ramp width of the density confinement, in cells.
    pub smoothing_cells: f64,
}

impl Default for InitialData {
    fn default() -> Self {
        Self {
            rho_fluid: 1.0,
            theta: ThetaInit::Uniform { value: 1.0 },
            velocity: VelocityInit::Rest,
            theta_min: 0.5,
            theta_max: 2.0,
            smoothing_cells: 2.5,
        }
    }
}

/// Build the initial state on `grid` for the domain at t = 0.
pub fn apply_initial_data(
    grid: &Grid,
    domain: &MovingDomain,
    init: &InitialData,
    cfg: &SolverConfig,
) -> Result<FieldState, SolverError> {
    if !(init.rho_fluid > 0.0) {
        return Err(SolverError::BadConfig(format!(
            "initial fluid density must be positive, got {}",
            init.rho_fluid
        )));
    }
    if !(init.theta_min > 0.0 && init.theta_max >= init.theta_min) {
        return Err(SolverError::BadConfig(format!(
            "temperature bounds must satisfy 0 < min <= max, got [{}, {}]",
            init.theta_min, init.theta_max
        )));
    }
    if !(init.smoothing_cells > 0.0) {
        return Err(SolverError::BadConfig("smoothing width must be positive".into()));
    }

    let n = grid.cells();
    let mut state = FieldState::zeros(grid.clone());
    let ramp_width = init.smoothing_cells * grid.h;
    let delta = cfg.penalty.delta;

    // Density ramp centered on the interface so the support edge sits inside
    // the penalty band and pressures stay graded cell to cell; values below
    // a relative tail cut are zeroed exactly, then the profile is rescaled to
    // the sharp-indicator mass.
    let mut sharp = CompensatedSum::new();
    let mut ramped = CompensatedSum::new();
    let tail_cut = 1e-9 * init.rho_fluid;
    for c in 0..n {
        let x = grid.cell_center(c);
        let p = domain.shape.phi0(x);
        if p < 0.0 {
            sharp.add(init.rho_fluid);
        }
        let mut r = init.rho_fluid * smoothstep((0.5 * ramp_width - p) / ramp_width);
        if r < tail_cut {
            r = 0.0;
        }
        state.rho[c] = r;
        ramped.add(r);
    }
    if ramped.value() <= 0.0 {
        return Err(SolverError::BadConfig(
            "initial fluid domain does not intersect the grid".into(),
        ));
    }
    let scale = sharp.value() / ramped.value();
    for c in 0..n {
        state.rho[c] *= scale;
    }

    for c in 0..n {
        let x = grid.cell_center(c);
        let rho = state.rho[c];
        if rho > 0.0 {
            let u = match &init.velocity {
                VelocityInit::Rest => [0.0; 3],
                VelocityInit::RigidRotation { rate, center } => {
                    [-(x[1] - center[1]) * rate, (x[0] - center[0]) * rate, 0.0]
                }
                VelocityInit::BoundaryField => domain.evaluate_v(0.0, x),
            };
            for a in 0..grid.dim {
                state.mom[a][c] = rho * u[a];
            }
        }
        let theta = init.theta.eval(x).clamp(init.theta_min, init.theta_max);
        state.w[c] = (rho + delta) * cfg.constitutive.thermal_q(theta)?;
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::ConstitutiveSet;
    use crate::geometry::{PenaltyParams, ReferenceShape, VelocityField};
    use approx::assert_relative_eq;

    fn setup() -> (Grid, MovingDomain, SolverConfig) {
        let grid = Grid::new(2, 64, 2.0).unwrap();
        let domain = MovingDomain::new(
            VelocityField::Rest,
            ReferenceShape::Disk { center: [0.0; 3], radius: 0.5 },
            1.0,
        );
        let cfg = SolverConfig::new(PenaltyParams::default(), ConstitutiveSet::default_laws(), 1.0);
        (grid, domain, cfg)
    }

    #[test]
    fn mass_matches_sharp_indicator_and_solid_is_empty() {
        let (grid, domain, cfg) = setup();
        let init = InitialData::default();
        let state = apply_initial_data(&grid, &domain, &init, &cfg).unwrap();
        let vol = grid.cell_volume();
        let mut total = 0.0;
        let mut sharp = 0.0;
        let mut solid = 0.0;
        for c in 0..grid.cells() {
            total += state.rho[c] * vol;
            let phi = domain.shape.phi0(grid.cell_center(c));
            if phi < 0.0 {
                sharp += init.rho_fluid * vol;
            }
            if phi > 1.5 * grid.h {
                solid += state.rho[c] * vol;
            }
        }
        assert_relative_eq!(total, sharp, max_relative = 1e-13);
        assert!(solid <= 1e-12 * total, "solid mass {solid}");
    }

    #[test]
    fn theta_round_trip_and_momentum_support() {
        let (grid, domain, mut cfg) = setup();
        cfg.penalty.delta = 0.05;
        let init = InitialData {
            theta: ThetaInit::Uniform { value: 1.3 },
            velocity: VelocityInit::RigidRotation { rate: 0.7, center: [0.0; 3] },
            ..Default::default()
        };
        let state = apply_initial_data(&grid, &domain, &init, &cfg).unwrap();
        for c in 0..grid.cells() {
            let q = state.w[c] / (state.rho[c] + cfg.penalty.delta);
            let theta = cfg.constitutive.invert_q(q).unwrap();
            assert_relative_eq!(theta, 1.3, max_relative = 1e-10);
            if state.rho[c] == 0.0 {
                assert_eq!(state.mom[0][c], 0.0);
                assert_eq!(state.mom[1][c], 0.0);
            }
        }
    }

    #[test]
    fn theta_is_clipped_into_bounds() {
        let (grid, domain, cfg) = setup();
        let init = InitialData {
            theta: ThetaInit::Gaussian {
                center: [0.0; 3],
                width: 0.3,
                amplitude: 10.0,
                base: 0.01,
            },
            theta_min: 0.5,
            theta_max: 2.0,
            ..Default::default()
        };
        let state = apply_initial_data(&grid, &domain, &init, &cfg).unwrap();
        for c in 0..grid.cells() {
            let q = state.w[c] / (state.rho[c] + cfg.penalty.delta);
            let theta = cfg.constitutive.invert_q(q).unwrap();
            assert!(theta >= 0.5 - 1e-9 && theta <= 2.0 + 1e-9);
        }
    }

    #[test]
    fn rejects_bad_config() {
        let (grid, domain, cfg) = setup();
        let bad = InitialData { rho_fluid: -1.0, ..Default::default() };
        assert!(apply_initial_data(&grid, &domain, &bad, &cfg).is_err());
        let bad2 = InitialData { theta_min: 0.0, ..Default::default() };
        assert!(apply_initial_data(&grid, &domain, &bad2, &cfg).is_err());
    }
}
