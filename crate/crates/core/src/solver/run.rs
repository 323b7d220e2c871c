//! The time loop: geometry-cache rebuilds on a motion bound, stepping to the
//! end time, diagnostics cadence and snapshot hooks. Single-threaded and
//! bitwise deterministic for a fixed configuration.

use super::init::{apply_initial_data, InitialData};
use super::step::{energy_snapshot, step, StepContext};
use super::{FieldState, SolverConfig, SolverError};
use crate::diagnostics::{DiagnosticsEngine, DiagnosticsSeries, ThermalTestFunction};
use crate::geometry::{GeometryCache, MovingDomain};
use crate::numerics::CompensatedSum;
use crate::solver::grid::Grid;

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Register the built-in admissible test-function library.
    pub with_monitors: bool,
    /// Times at which the snapshot hook fires (the stepper lands on them).
    pub snapshot_times: Vec<f64>,
    /// Rebuild the geometry cache once the boundary may have moved this
    /// fraction of a cell.
    pub motion_fraction: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { with_monitors: true, snapshot_times: Vec::new(), motion_fraction: 0.1 }
    }
}

/// Limit-relevant tallies collected for parameter sweeps.
#[derive(Debug, Clone, Copy, Default)]
pub struct SweepMetrics {
    /// Time-integrated viscous dissipation inside the solid.
    pub solid_visc_dissipation: f64,
    /// Time-integrated chi kappa |grad theta|^2 over solid faces.
    pub solid_diffusion: f64,
    /// L1 distance between the smoothed and sharp conductivity masks.
    pub chi_l1_distance: f64,
    /// Final artificial-pressure energy.
    pub final_artificial_energy: f64,
    /// Final cumulative penalty integral.
    pub final_penalty_integral: f64,
    /// Final solid-region mass.
    pub final_solid_mass: f64,
}

#[derive(Debug)]
pub struct RunOutput {
    pub final_state: FieldState,
    pub series: DiagnosticsSeries,
    pub e0: f64,
    pub max_energy_residual: f64,
    /// Residuals of the thermal inequality per test function; None when the
    /// monitors became inadmissible during the run.
    pub thermal_residuals: Option<Vec<(String, f64)>>,
    pub thermal_scale: f64,
    pub repair_mass: f64,
    pub repair_energy: f64,
    pub steps: usize,
    pub sweep: SweepMetrics,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub domain: MovingDomain,
    pub grid: Grid,
    pub config: SolverConfig,
    pub initial: InitialData,
}

impl Simulation {
    /// Advance to the configured end time, emitting one diagnostics row per
    /// cadence interval and invoking the snapshot hook at the requested times.
    pub fn run(
        &self,
        opts: &RunOptions,
        mut on_snapshot: impl FnMut(f64, &FieldState, &GeometryCache),
    ) -> Result<RunOutput, SolverError> {
        self.config.validate()?;
        if !self.config.override_hypotheses {
            let report = self.config.constitutive.validate_hypotheses();
            if !report.all_passed() {
                let names: Vec<&str> =
                    report.failures().iter().map(|c| c.name).collect();
                return Err(SolverError::BadConfig(format!(
                    "constitutive hypotheses failed ({}); set the override to run anyway",
                    names.join("; ")
                )));
            }
        }
        if self.domain.support_radius > 0.5 * self.grid.half_width + 1e-12 {
            return Err(SolverError::BadConfig(format!(
                "velocity support radius {} exceeds half the box half-width {}",
                self.domain.support_radius, self.grid.half_width
            )));
        }

        let mut state = apply_initial_data(&self.grid, &self.domain, &self.initial, &self.config)?;
        let mut geom = GeometryCache::build(
            &self.domain,
            &self.grid,
            0.0,
            &self.config.penalty,
            self.config.constitutive.mu,
        );

        let mut monitors_valid = opts.with_monitors;
        let monitors = if opts.with_monitors {
            let lib = ThermalTestFunction::library(&geom, &self.grid);
            for f in &lib {
                if f.check_admissible(&self.grid, &geom, 1e-10).is_err() {
                    monitors_valid = false;
                }
            }
            if monitors_valid {
                lib
            } else {
                Vec::new()
            }
        } else {
            Vec::new()
        };

        let (e0, mv0) = energy_snapshot(&state, &self.config, &self.domain, 0.0);
        let mut engine = DiagnosticsEngine::new(&state, &self.config, e0, mv0, monitors);
        let mut ctx = StepContext::new(self.grid.dim, self.grid.h);
        ctx.monitors = engine.monitor_values();

        let mut series = DiagnosticsSeries::default();
        series.rows.push(engine.make_row(0.0, &state, &geom, &self.config));

        let mut snaps: Vec<f64> = opts.snapshot_times.clone();
        snaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut snap_idx = 0;
        while snap_idx < snaps.len() && snaps[snap_idx] <= 1e-14 {
            on_snapshot(0.0, &state, &geom);
            snap_idx += 1;
        }

        let t_end = self.config.t_end;
        let v_max = self.domain.velocity.max_speed();
        let mut t = 0.0;
        let mut steps = 0usize;
        let mut tick = 1usize;
        let eps_t = 1e-12 * t_end.max(1.0);

        while t < t_end - eps_t {
            if v_max > 0.0 && (t - geom.time) * v_max > opts.motion_fraction * self.grid.h {
                geom = GeometryCache::build(
                    &self.domain,
                    &self.grid,
                    t,
                    &self.config.penalty,
                    self.config.constitutive.mu,
                );
                if monitors_valid {
                    for values in &ctx.monitors {
                        let f = ThermalTestFunction { name: String::new(), values: values.clone() };
                        if f.check_admissible(&self.grid, &geom, 1e-10).is_err() {
                            monitors_valid = false;
                        }
                    }
                }
            }

            let mut dt_cap = t_end - t;
            if snap_idx < snaps.len() {
                let gap = snaps[snap_idx] - t;
                if gap > eps_t {
                    dt_cap = dt_cap.min(gap);
                }
            }

            let (next, rec) = step(&state, t, dt_cap, &geom, &self.domain, &self.config, &mut ctx)?;
            state = next;
            t += rec.dt;
            steps += 1;
            engine.after_step(&rec);

            while tick as f64 * self.config.cadence <= t + eps_t {
                series.rows.push(engine.make_row(t, &state, &geom, &self.config));
                tick += 1;
            }
            while snap_idx < snaps.len() && t >= snaps[snap_idx] - eps_t {
                on_snapshot(t, &state, &geom);
                snap_idx += 1;
            }
        }

        if series.rows.last().map(|r| r.t < t - eps_t).unwrap_or(true) {
            series.rows.push(engine.make_row(t, &state, &geom, &self.config));
        }

        // mask-distance metric for the xi sweep
        let mut chi_l1 = CompensatedSum::new();
        for c in 0..state.cells() {
            chi_l1.add((geom.chi[c] - geom.chi_sharp[c]).abs());
        }
        let final_row = series.rows.last().unwrap();
        let sweep = SweepMetrics {
            solid_visc_dissipation: engine.solid_visc_integral,
            solid_diffusion: engine.solid_diffusion_integral,
            chi_l1_distance: chi_l1.value() * self.grid.cell_volume(),
            final_artificial_energy: final_row.artificial_energy,
            final_penalty_integral: engine.cum_penalty_integral,
            final_solid_mass: final_row.solid_mass,
        };

        let thermal_residuals = if monitors_valid && !ctx.monitors.is_empty() {
            Some(engine.thermal_residuals(&state))
        } else {
            None
        };

        Ok(RunOutput {
            max_energy_residual: if steps == 0 { 0.0 } else { engine.max_energy_residual },
            thermal_residuals,
            thermal_scale: engine.thermal_scale,
            repair_mass: engine.cum_repair_mass,
            repair_energy: engine.cum_repair_energy,
            e0: engine.e0,
            final_state: state,
            series,
            steps,
            sweep,
        })
    }
}
