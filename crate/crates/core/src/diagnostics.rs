//! Conserved-quantity and inequality monitors evaluated on discrete states:
//! total mass, the energy ledger, the cumulative boundary-penalty integral,
//! solid-region mass, the per-step energy-inequality residual, renormalized
//! thermal-inequality residuals against a library of admissible test
//! functions, and the renormalized-continuity monitor.
//!
//! The energy residual is assembled from the exact per-step bookkeeping of
//! the stepper: state energy differences plus counted dissipation minus the
//! discrete boundary-work terms. For the scheme in this crate everything
//! uncounted is nonpositive, so the residual should never exceed round-off
//! plus time-integration error.

use crate::geometry::GeometryCache;
use crate::numerics::CompensatedSum;
use crate::solver::{FieldState, SolverConfig, StepRecord, RHO_REG};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("test function is not admissible: max |grad phi . n| = {0:.3e} on the interface band")]
    InadmissibleTestFunction(f64),
    #[error("degenerate samples for rate estimation")]
    DegenerateSamples,
}

/// Total mass with compensated summation.
pub fn total_mass(state: &FieldState) -> f64 {
    let mut s = CompensatedSum::new();
    for &r in &state.rho {
        s.add(r);
    }
    s.value() * state.grid.cell_volume()
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EnergyBreakdown {
    pub kinetic: f64,
    pub elastic: f64,
    pub artificial: f64,
    pub thermal: f64,
}

impl EnergyBreakdown {
    pub fn total(&self) -> f64 {
        self.kinetic + self.elastic + self.artificial + self.thermal
    }
}

pub fn energies(state: &FieldState, cfg: &SolverConfig) -> EnergyBreakdown {
    let set = &cfg.constitutive;
    let delta = cfg.penalty.delta;
    let beta = cfg.penalty.beta;
    let vol = state.grid.cell_volume();
    let mut ke = CompensatedSum::new();
    let mut el = CompensatedSum::new();
    let mut ar = CompensatedSum::new();
    let mut th = CompensatedSum::new();
    for c in 0..state.cells() {
        let rho = state.rho[c].max(0.0);
        let rho_t = state.rho[c].max(0.0) + RHO_REG;
        let mut m2 = 0.0;
        for a in 0..state.grid.dim {
            m2 += state.mom[a][c] * state.mom[a][c];
        }
        ke.add(0.5 * m2 / rho_t);
        el.add(rho * set.elastic_potential(rho));
        ar.add(delta / (beta - 1.0) * crate::numerics::fast_pow(rho, beta));
        th.add(state.w[c]);
    }
    EnergyBreakdown {
        kinetic: ke.value() * vol,
        elastic: el.value() * vol,
        artificial: ar.value() * vol,
        thermal: th.value() * vol,
    }
}

/// Mass in cells with phi > 3h/2.
pub fn solid_mass(state: &FieldState, geom: &GeometryCache) -> f64 {
    let mut s = CompensatedSum::new();
    let band = 1.5 * state.grid.h;
    for c in 0..state.cells() {
        if geom.phi[c] > band {
            s.add(state.rho[c]);
        }
    }
    s.value() * state.grid.cell_volume()
}

/// One increment of the unweighted penalty integral from a state snapshot:
/// dt * sum sigma |(u - V).n|^2 vol.
pub fn penalty_integral_increment(
    state: &FieldState,
    geom: &GeometryCache,
    v_cells: &[[f64; 3]],
    dt: f64,
) -> f64 {
    let mut s = CompensatedSum::new();
    for c in 0..state.cells() {
        let sg = geom.sigma[c];
        if sg > 0.0 {
            let rho_t = state.rho[c].max(0.0) + RHO_REG;
            let n = geom.normal[c];
            let mut mis = 0.0;
            for a in 0..state.grid.dim {
                mis += (state.mom[a][c] / rho_t - v_cells[c][a]) * n[a];
            }
            s.add(sg * mis * mis);
        }
    }
    s.value() * state.grid.cell_volume() * dt
}

/// Signed per-step energy-inequality residual:
/// Delta(E - sum m.V) + counted dissipation - integrated V-work.
pub fn energy_residual(e_prev: f64, mv_prev: f64, rec: &StepRecord) -> f64 {
    (rec.e_after - rec.mv_after) - (e_prev - mv_prev) + rec.counted_dissipation
        - rec.work_integral
}

/// Least-squares slope of log(value) against log(parameter).
pub fn convergence_rate(samples: &[(f64, f64)]) -> Result<f64, DiagnosticsError> {
    if samples.len() < 3 {
        return Err(DiagnosticsError::DegenerateSamples);
    }
    for (i, &(p, _)) in samples.iter().enumerate() {
        if p <= 0.0 {
            return Err(DiagnosticsError::DegenerateSamples);
        }
        for &(q, _) in &samples[..i] {
            if p == q {
                return Err(DiagnosticsError::DegenerateSamples);
            }
        }
    }
    crate::numerics::log_log_slope(samples).ok_or(DiagnosticsError::DegenerateSamples)
}

/// A nonnegative test function for the thermal inequality monitor, sampled
/// at cell centers. Admissibility requires a vanishing normal derivative on
/// the interface band.
#[derive(Debug, Clone)]
pub struct ThermalTestFunction {
    pub name: String,
    pub values: Vec<f64>,
}

impl ThermalTestFunction {
    pub fn constant_one(name: &str, cells: usize) -> Self {
        Self { name: name.to_string(), values: vec![1.0; cells] }
    }

    /// Plateau bump built from the level set: exactly constant within
    /// `cut_cells` of the interface, so its normal derivative vanishes on the
    /// band by construction. `fluid_side` selects which side carries the bump.
    pub fn interface_flattened(
        name: &str,
        geom: &GeometryCache,
        h: f64,
        fluid_side: bool,
        cut_cells: f64,
        width_cells: f64,
    ) -> Self {
        let cut = cut_cells * h;
        let w = width_cells * h;
        let values = geom
            .phi
            .iter()
            .map(|&p| {
                let d = if fluid_side { -p } else { p };
                crate::numerics::smoothstep((d - cut) / w)
            })
            .collect();
        Self { name: name.to_string(), values }
    }

    /// The built-in admissible library: the constant plus three flattened bumps.
    pub fn library(geom: &GeometryCache, grid: &crate::solver::Grid) -> Vec<Self> {
        vec![
            Self::constant_one("const-one", grid.cells()),
            Self::interface_flattened("fluid-core", geom, grid.h, true, 3.0, 3.0),
            Self::interface_flattened("solid-region", geom, grid.h, false, 3.0, 3.0),
            Self::interface_flattened("fluid-wide", geom, grid.h, true, 3.0, 6.0),
        ]
    }

    /// Check the discrete admissibility condition |grad phi . n| <= tol on
    /// the band where the surface density is positive.
    pub fn check_admissible(
        &self,
        grid: &crate::solver::Grid,
        geom: &GeometryCache,
        tol: f64,
    ) -> Result<(), DiagnosticsError> {
        let mut worst: f64 = 0.0;
        for c in 0..grid.cells() {
            if geom.sigma[c] > 0.0 {
                let (i, j, k) = grid.unflatten(c);
                let mut gdot = 0.0;
                for a in 0..grid.dim {
                    let (lo, hi, span) = grid.neighbor_pair(i, j, k, a);
                    let d = (self.values[hi] - self.values[lo]) / (span * grid.h);
                    gdot += d * geom.normal[c][a];
                }
                worst = worst.max(gdot.abs());
            }
        }
        if worst > tol {
            Err(DiagnosticsError::InadmissibleTestFunction(worst))
        } else {
            Ok(())
        }
    }
}

/// One diagnostics record. Serialized as one CSV row.
#[derive(Debug, Clone)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub total_mass: f64,
    pub kinetic_energy: f64,
    pub elastic_energy: f64,
    pub artificial_energy: f64,
    pub thermal_energy: f64,
    pub penalty_integral: f64,
    pub solid_mass: f64,
    pub energy_residual: f64,
    pub thermal_residual: f64,
    pub renorm_residual: f64,
    pub min_theta: f64,
    pub repair_mass: f64,
    pub repair_energy: f64,
}

pub const CSV_SCHEMA: &str = "nsf.diagnostics.v1";

#[derive(Debug, Clone, Default)]
pub struct DiagnosticsSeries {
    pub rows: Vec<DiagnosticsRow>,
}

impl DiagnosticsSeries {
    pub fn header() -> String {
        "t,total_mass,kinetic_energy,elastic_energy,artificial_energy,thermal_energy,\
         penalty_integral,solid_mass,energy_residual,thermal_residual,renorm_residual,\
         min_theta,repair_mass,repair_energy"
            .replace(' ', "")
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("schema,{}\n{}\n", CSV_SCHEMA, Self::header());
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.t,
                r.total_mass,
                r.kinetic_energy,
                r.elastic_energy,
                r.artificial_energy,
                r.thermal_energy,
                r.penalty_integral,
                r.solid_mass,
                r.energy_residual,
                r.thermal_residual,
                r.renorm_residual,
                r.min_theta,
                r.repair_mass,
                r.repair_energy
            ));
        }
        out
    }
}

struct MonitorAccum {
    name: String,
    values: Vec<f64>,
    wphi0: f64,
    integral: f64,
    repairs: f64,
}

/// Accumulates per-step records into the diagnostics series and the
/// inequality monitors.
pub struct DiagnosticsEngine {
    vol: f64,
    pub e0: f64,
    prev_e: f64,
    prev_mv: f64,
    prev_tk: f64,
    pub cum_penalty_integral: f64,
    pub max_energy_residual: f64,
    row_max_residual: f64,
    last_renorm: f64,
    last_min_theta: f64,
    pub cum_repair_mass: f64,
    pub cum_repair_energy: f64,
    pub thermal_scale: f64,
    monitors: Vec<MonitorAccum>,
    pub solid_visc_integral: f64,
    pub solid_diffusion_integral: f64,
    pub delta_sink_integral: f64,
}

impl DiagnosticsEngine {
    pub fn new(
        state: &FieldState,
        cfg: &SolverConfig,
        e0: f64,
        mv0: f64,
        monitors: Vec<ThermalTestFunction>,
    ) -> Self {
        let vol = state.grid.cell_volume();
        let mut tk = CompensatedSum::new();
        for &r in &state.rho {
            tk.add(r.min(cfg.renorm_cutoff));
        }
        let mut thermal_scale = CompensatedSum::new();
        for &w in &state.w {
            thermal_scale.add(w);
        }
        let monitors = monitors
            .into_iter()
            .map(|m| {
                let mut s = CompensatedSum::new();
                for (c, &w) in state.w.iter().enumerate() {
                    s.add(w * m.values[c]);
                }
                MonitorAccum {
                    name: m.name,
                    values: m.values,
                    wphi0: s.value() * vol,
                    integral: 0.0,
                    repairs: 0.0,
                }
            })
            .collect();
        Self {
            vol,
            e0,
            prev_e: e0,
            prev_mv: mv0,
            prev_tk: tk.value() * vol,
            cum_penalty_integral: 0.0,
            max_energy_residual: f64::NEG_INFINITY,
            row_max_residual: f64::NEG_INFINITY,
            last_renorm: 0.0,
            last_min_theta: f64::NAN,
            cum_repair_mass: 0.0,
            cum_repair_energy: 0.0,
            thermal_scale: thermal_scale.value() * vol,
            monitors,
            solid_visc_integral: 0.0,
            solid_diffusion_integral: 0.0,
            delta_sink_integral: 0.0,
        }
    }

    /// Values of the registered test functions (for the step context).
    pub fn monitor_values(&self) -> Vec<Vec<f64>> {
        self.monitors.iter().map(|m| m.values.clone()).collect()
    }

    pub fn after_step(&mut self, rec: &StepRecord) -> f64 {
        let residual = energy_residual(self.prev_e, self.prev_mv, rec);
        self.prev_e = rec.e_after;
        self.prev_mv = rec.mv_after;
        self.max_energy_residual = self.max_energy_residual.max(residual);
        self.row_max_residual = self.row_max_residual.max(residual);
        self.cum_penalty_integral += rec.penalty_integral_inc;
        self.last_renorm = rec.renorm_residual - self.prev_tk / rec.dt;
        self.prev_tk = rec.tk_after;
        self.last_min_theta = rec.min_theta;
        self.cum_repair_mass += rec.repair_mass;
        self.cum_repair_energy += rec.repair_energy;
        self.solid_visc_integral += rec.solid_visc_integral;
        self.solid_diffusion_integral += rec.solid_diffusion_integral;
        self.delta_sink_integral += rec.delta_sink_integral;
        for (p, m) in self.monitors.iter_mut().enumerate() {
            m.integral += rec.m6_integral[p];
            m.repairs += rec.m6_repair[p];
        }
        residual
    }

    /// Current residual of the renormalized thermal inequality for each
    /// registered test function: [sum w phi](t) - [sum w phi](0) minus the
    /// integrated discrete fluxes and admissible sources. Nonpositive up to
    /// repairs for the scheme in this crate.
    pub fn thermal_residuals(&self, state: &FieldState) -> Vec<(String, f64)> {
        self.monitors
            .iter()
            .map(|m| {
                let mut s = CompensatedSum::new();
                for (c, &w) in state.w.iter().enumerate() {
                    s.add(w * m.values[c]);
                }
                (m.name.clone(), s.value() * self.vol - m.wphi0 - m.integral)
            })
            .collect()
    }

    pub fn make_row(
        &mut self,
        t: f64,
        state: &FieldState,
        geom: &GeometryCache,
        cfg: &SolverConfig,
    ) -> DiagnosticsRow {
        let e = energies(state, cfg);
        let thermal = self
            .thermal_residuals(state)
            .first()
            .map(|(_, v)| *v)
            .unwrap_or(0.0);
        let residual = if self.row_max_residual == f64::NEG_INFINITY {
            0.0
        } else {
            self.row_max_residual
        };
        self.row_max_residual = f64::NEG_INFINITY;
        DiagnosticsRow {
            t,
            total_mass: total_mass(state),
            kinetic_energy: e.kinetic,
            elastic_energy: e.elastic,
            artificial_energy: e.artificial,
            thermal_energy: e.thermal,
            penalty_integral: self.cum_penalty_integral,
            solid_mass: solid_mass(state, geom),
            energy_residual: residual,
            thermal_residual: thermal,
            renorm_residual: self.last_renorm,
            min_theta: if self.last_min_theta.is_nan() {
                // before the first step: derive from the state
                let mut q_min = f64::INFINITY;
                for c in 0..state.cells() {
                    q_min = q_min.min(state.w[c] / (state.rho[c].max(0.0) + cfg.penalty.delta));
                }
                cfg.constitutive.invert_q(q_min.max(0.0)).unwrap_or(0.0)
            } else {
                self.last_min_theta
            },
            repair_mass: self.cum_repair_mass,
            repair_energy: self.cum_repair_energy,
        }
    }
}
