//! Measurements of the estimates that make the constrained minimizer a
//! genuine heteroclinic connection, plus an independent shooting solver for
//! scalar problems.

mod clearing;
mod shooting;

pub use clearing::{
    clearing_out_check, empirical_c2, epsilon_threshold, estimate_c2, mean_value_points, CheckReport,
    ClearingOutParams, MeanValuePoint, Violation,
};
pub use shooting::{shooting_oracle_scalar, shooting_oracle_scalar_near};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::discretization::{DiscreteAction, Profile};
use crate::inhomogeneity::InhomogeneityProfile;
use crate::potential::{PotentialError, PotentialSpec};

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    /// A homogeneous-only diagnostic was applied to a weighted problem.
    #[error("diagnostic misuse: {0}")]
    Misuse(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Envelope(#[from] PotentialError),
    #[error("shooting failed: {0}")]
    ShootingFailure(String),
}

fn require_constant(h: &InhomogeneityProfile, what: &str) -> Result<(), DiagnosticsError> {
    if h.is_constant() {
        Ok(())
    } else {
        Err(DiagnosticsError::Misuse(format!("{what} needs h ≡ 1, got {:?}", h.kind())))
    }
}

fn cell_kinetic(u: &Profile, i: usize) -> f64 {
    let s = u.grid().spacing();
    let d2: f64 = u.node(i).iter().zip(u.node(i + 1)).map(|(a, b)| (b - a) * (b - a)).sum();
    0.5 * d2 / (s * s)
}

/// `max_i |½|Δu/s|² - ½(W(u_i) + W(u_{i+1}))|` over cells. The first
/// integral of `u'' = ∇W(u)` vanishes on a connection, so this is the
/// deviation from zero.
pub fn first_integral_deviation(
    p: &PotentialSpec,
    h: &InhomogeneityProfile,
    u: &Profile,
) -> Result<f64, DiagnosticsError> {
    require_constant(h, "first_integral_deviation")?;
    let w: Vec<f64> = (0..u.len()).map(|i| p.w(u.node(i))).collect();
    Ok((0..u.len() - 1)
        .map(|i| (cell_kinetic(u, i) - 0.5 * (w[i] + w[i + 1])).abs())
        .fold(0.0, f64::max))
}

/// Max over cells of `|½|u'|² - h W(u) + ∫_{-R}^x h' W(u)|`, the weighted
/// analogue of the first integral. Its value at the left end is zero for a
/// profile pinned at `a_-`. For `h ≡ 1` this is
/// [`first_integral_deviation`].
pub fn weighted_energy_identity_residual(p: &PotentialSpec, h: &InhomogeneityProfile, u: &Profile) -> f64 {
    let g = u.grid();
    let s = g.spacing();
    let n = u.len();
    let w: Vec<f64> = (0..n).map(|i| p.w(u.node(i))).collect();
    let hw: Vec<f64> = (0..n).map(|i| h.eval(g.x(i)) * w[i]).collect();
    let dhw: Vec<f64> = (0..n).map(|i| h.derivative(g.x(i)) * w[i]).collect();
    let mut integral = vec![0.0; n];
    for i in 1..n {
        integral[i] = integral[i - 1] + 0.5 * s * (dhw[i - 1] + dhw[i]);
    }
    (0..n - 1)
        .map(|i| {
            let q = cell_kinetic(u, i) - 0.5 * (hw[i] + hw[i + 1]) + 0.5 * (integral[i] + integral[i + 1]);
            q.abs()
        })
        .fold(0.0, f64::max)
}

/// `|K - P| / (K + P)` for the discrete kinetic and potential energies; 0
/// when both vanish.
pub fn equipartition_ratio(
    p: &PotentialSpec,
    h: &InhomogeneityProfile,
    u: &Profile,
) -> Result<f64, DiagnosticsError> {
    require_constant(h, "equipartition_ratio")?;
    let parts = DiscreteAction::new(p, h, u.grid()).parts(u);
    let total = parts.kinetic + parts.potential;
    if total == 0.0 {
        return Ok(0.0);
    }
    Ok((parts.kinetic - parts.potential).abs() / total)
}

/// One key per diagnostic; absent diagnostics serialize as `null`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub first_integral_deviation: Option<f64>,
    pub equipartition_ratio: Option<f64>,
    pub weighted_energy_identity_residual: Option<f64>,
    pub modica_lower_bound: Option<f64>,
    pub epsilon_threshold: Option<f64>,
    pub empirical_c2: Option<f64>,
    pub clearing_out_violations: Option<usize>,
    pub clearing_out_pairs: Option<usize>,
    pub mean_value_points: Option<Vec<MeanValuePoint>>,
    pub oracle_sup_gap: Option<f64>,
}
