//! Finite-volume solver for a penalized compressible heat-conducting flow on
//! a fixed box containing a prescribed moving domain, with diagnostics that
//! check mass conservation, energy and thermal inequalities, and the decay of
//! the boundary-penalty and confinement errors under parameter sweeps.

pub mod constitutive;
pub mod diagnostics;
pub mod geometry;
pub mod numerics;
pub mod solver;

pub use constitutive::ConstitutiveSet;
pub use geometry::{MovingDomain, PenaltyParams, ReferenceShape, VelocityField};
pub use solver::{FieldState, Grid, Simulation, SolverConfig};
