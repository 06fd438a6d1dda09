//! Constrained variational solver for heteroclinic connections
//! `u'' = h(x) ∇W(u)`, `u(±∞) = a_±`, of vector double-well potentials.
//!
//! The action is minimized over paths confined to `δ`-tubes around the wells
//! beyond `±L`; the tube is grown until the minimizer sits strictly inside it,
//! at which point it solves the Euler-Lagrange equation everywhere. The
//! [`diagnostics`] module measures the quantitative estimates behind the
//! construction (first integral, equipartition, clearing-out, energy bounds)
//! and provides an independent shooting solver for scalar problems.

pub mod diagnostics;
pub mod discretization;
pub mod inhomogeneity;
pub mod parallel;
pub mod potential;
pub mod sampling;
pub mod solver;

pub mod cli;

pub use discretization::{
    discrete_energy, discrete_gradient, linear_competitor, project_constraints, ConstraintSpec, DiscreteAction,
    Grid, Profile,
};
pub use inhomogeneity::{make_profile, verify_profile, InhomogeneityProfile, ProfileKind, ProfileParams};
pub use potential::{build_envelope, modica_lower_bound, validate_assumptions, EnvelopeTable, PotentialSpec};
pub use solver::{minimize, normalize_translate, solve_heteroclinic, SolveConfig, SolveReport, StepRule};
