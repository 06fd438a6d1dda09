use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use super::config::RunConfig;
use crate::diagnostics::{
    clearing_out_check, empirical_c2, epsilon_threshold, equipartition_ratio, first_integral_deviation,
    mean_value_points, shooting_oracle_scalar_near, weighted_energy_identity_residual, ClearingOutParams,
    DiagnosticReport,
};
use crate::discretization::{discrete_energy, linear_competitor, write_profile_csv, DiscretizationError, Profile};
use crate::inhomogeneity::{verify_profile, InhomogeneityProfile, ProfileError, ProfileKind};
use crate::parallel;
use crate::potential::{build_envelope, distance, modica_lower_bound, validate_assumptions, PotentialError, PotentialSpec};
use crate::solver::{energy_comparison_detailed, solve_heteroclinic, ComparisonReport, SolveError, SolveReport};

pub const EXIT_CERTIFIED: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_UNCERTIFIED: i32 = 2;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("potential: {0}")]
    Potential(#[from] PotentialError),
    #[error("inhomogeneity: {0}")]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Solve(SolveError),
    #[error("writing output: {0}")]
    Output(#[from] DiscretizationError),
    #[error("writing output: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Config(String),
}

/// Contents of the report JSON.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    /// `Certified`, or the name of the failure carried by the profile.
    pub status: String,
    #[serde(flatten)]
    pub solve: SolveReport,
    pub diagnostics: DiagnosticReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison: Option<ComparisonSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonSummary {
    pub m_l: f64,
    pub m_inf_l: f64,
    pub gap: f64,
    pub test_function_energy: f64,
    pub constant_tube_certificate: bool,
}

impl From<&ComparisonReport> for ComparisonSummary {
    fn from(c: &ComparisonReport) -> Self {
        ComparisonSummary {
            m_l: c.m_l,
            m_inf_l: c.m_inf_l,
            gap: c.gap,
            test_function_energy: c.test_function_energy,
            constant_tube_certificate: c.constant.tube_certificate,
        }
    }
}

pub struct RunOutcome {
    pub profile: Profile,
    pub report: RunReport,
    pub exit_code: i32,
}

fn failure_name(e: &SolveError) -> &'static str {
    match e {
        SolveError::NonConvergence(_) => "NonConvergence",
        SolveError::StepCollapse(_) => "StepCollapse",
        SolveError::TubeCertificateFailure(_) => "TubeCertificateFailure",
        _ => "Error",
    }
}

fn first_crossing(u: &Profile, p: &PotentialSpec) -> f64 {
    let half = 0.5 * p.well_separation();
    let g = u.grid();
    match (0..u.len()).find(|&i| distance(u.node(i), p.a_minus()) >= half) {
        Some(0) | None => 0.0,
        Some(i) => {
            let f0 = distance(u.node(i - 1), p.a_minus()) - half;
            let f1 = distance(u.node(i), p.a_minus()) - half;
            g.x(i - 1) + g.spacing() * if f1 != f0 { -f0 / (f1 - f0) } else { 0.0 }
        }
    }
}

fn diagnostics(cfg: &RunConfig, p: &PotentialSpec, h: &InhomogeneityProfile, u: &Profile) -> DiagnosticReport {
    let d = &cfg.diagnostics;
    let mut r = DiagnosticReport::default();
    if h.is_constant() {
        if d.first_integral {
            r.first_integral_deviation = first_integral_deviation(p, h, u).ok();
        }
        if d.equipartition {
            r.equipartition_ratio = equipartition_ratio(p, h, u).ok();
        }
    }
    if d.energy_identity {
        r.weighted_energy_identity_residual = Some(weighted_energy_identity_residual(p, h, u));
    }
    if d.modica {
        r.modica_lower_bound = Some(modica_lower_bound(p, 20001));
    }
    let c1 = linear_competitor(p, u.grid()).map(|lin| discrete_energy(p, h, &lin)).ok();
    if d.clearing_out {
        let sphere = if p.dim() == 1 { 2 } else { 256 };
        match (build_envelope(p, 2001, sphere), empirical_c2(p, h, u), c1) {
            (Ok(env), Some(c2), Some(c1)) if c2 > 0.0 => {
                r.empirical_c2 = Some(c2);
                r.epsilon_threshold = epsilon_threshold(&env, p.delta(), c2).ok();
                match ClearingOutParams::derive(&env, p.delta(), c2, c1, d.zeta)
                    .and_then(|params| clearing_out_check(p, u, &params))
                {
                    Ok(rep) => {
                        r.clearing_out_violations = Some(rep.violation_count);
                        r.clearing_out_pairs = Some(rep.pairs_checked);
                    }
                    Err(e) => log::warn!("clearing-out check skipped: {e}"),
                }
            }
            (Err(e), ..) => log::warn!("clearing-out check skipped: {e}"),
            _ => log::warn!("clearing-out check skipped: no pair of points near a well"),
        }
    }
    if d.mean_value {
        if let Some(c1) = c1 {
            match mean_value_points(p, h, u, d.zeta, c1 / d.zeta) {
                Ok(points) => r.mean_value_points = Some(points),
                Err(e) => log::warn!("mean-value points skipped: {e}"),
            }
        }
    }
    if d.oracle {
        if p.dim() == 1 {
            match shooting_oracle_scalar_near(p, h, u.grid(), first_crossing(u, p)) {
                Ok(o) => r.oracle_sup_gap = Some(u.sup_distance(&o)),
                Err(e) => log::warn!("shooting oracle failed: {e}"),
            }
        } else {
            log::warn!("shooting oracle needs a scalar potential; skipped");
        }
    }
    r
}

/// Solves, runs the enabled diagnostics and assembles the report. Failures
/// that still carry a profile become a report with a non-certified status.
pub fn execute(cfg: &RunConfig) -> Result<RunOutcome, RunError> {
    if cfg.deterministic {
        parallel::force_threads(1);
    }
    let p = cfg.potential.build()?;
    let sample_radius = 2.0 * p.well_separation() + 1.0;
    validate_assumptions(&p, sample_radius, 4096)?;
    let h = cfg.profile()?;
    let check = verify_profile(&h, cfg.solver.radius)?;
    for w in &check.warnings {
        log::warn!("{w}");
    }
    let mut comparison = None;
    let solved = if cfg.diagnostics.compare_asymptotic {
        if h.kind() != ProfileKind::AsymptoticallyConstant {
            return Err(RunError::Config("--compare-asymptotic needs an asymptotic inhomogeneity".into()));
        }
        energy_comparison_detailed(&p, &h, &cfg.solver).map(|(c, uw, _)| {
            let r = c.weighted.clone();
            comparison = Some(ComparisonSummary::from(&c));
            (uw, r)
        })
    } else {
        solve_heteroclinic(&p, &h, &cfg.solver)
    };
    let (profile, solve, status) = match solved {
        Ok((u, r)) => (u, r, "Certified".to_string()),
        Err(e) => match e.outcome() {
            Some((u, r)) => {
                log::warn!("{e}");
                (u.clone(), r.clone(), failure_name(&e).to_string())
            }
            None => return Err(RunError::Solve(e)),
        },
    };
    let certified = solve.tube_certificate && comparison.as_ref().is_none_or(|c: &ComparisonSummary| c.constant_tube_certificate);
    let diagnostics = diagnostics(cfg, &p, &h, &profile);
    Ok(RunOutcome {
        profile,
        report: RunReport {
            status,
            solve,
            diagnostics,
            comparison,
        },
        exit_code: if certified { EXIT_CERTIFIED } else { EXIT_UNCERTIFIED },
    })
}

fn create(path: &Path) -> std::io::Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// Columns `x |u-a_-| |u-a_+| W(u) ½|u'|² h(x)`, whitespace separated, with
/// central differences for `u'` (one-sided at the ends).
pub fn write_plotdata<W: Write>(
    u: &Profile,
    p: &PotentialSpec,
    h: &InhomogeneityProfile,
    mut out: W,
) -> std::io::Result<()> {
    let g = u.grid();
    let n = u.len();
    let s = g.spacing();
    writeln!(out, "# x |u-a_-| |u-a_+| W(u) kinetic h(x)")?;
    for i in 0..n {
        let (lo, hi) = (i.saturating_sub(1), (i + 1).min(n - 1));
        let width = (hi - lo) as f64 * s;
        let kin = 0.5
            * u.node(hi)
                .iter()
                .zip(u.node(lo))
                .map(|(a, b)| ((a - b) / width).powi(2))
                .sum::<f64>();
        let ui = u.node(i);
        writeln!(
            out,
            "{:.16e} {:.16e} {:.16e} {:.16e} {:.16e} {:.16e}",
            g.x(i),
            distance(ui, p.a_minus()),
            distance(ui, p.a_plus()),
            p.w(ui),
            kin,
            h.eval(g.x(i))
        )?;
    }
    Ok(())
}

pub fn write_outputs(cfg: &RunConfig, outcome: &RunOutcome) -> Result<(), RunError> {
    let p = cfg.potential.build()?;
    let h = cfg.profile()?;
    let mut csv = create(&cfg.output.profile_csv)?;
    write_profile_csv(&outcome.profile, &mut csv)?;
    csv.flush()?;
    let mut json = create(&cfg.output.report_json)?;
    serde_json::to_writer_pretty(&mut json, &outcome.report).map_err(std::io::Error::from)?;
    writeln!(json)?;
    json.flush()?;
    let mut plot = create(&cfg.output.plotdata)?;
    write_plotdata(&outcome.profile, &p, &h, &mut plot)?;
    plot.flush()?;
    Ok(())
}

/// Full run; returns the process exit code (0 certified, 2 not certified,
/// 1 configuration or runtime error).
pub fn run(cfg: &RunConfig) -> i32 {
    let outcome = match execute(cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_ERROR;
        }
    };
    if let Err(e) = write_outputs(cfg, &outcome) {
        eprintln!("error: {e}");
        return EXIT_ERROR;
    }
    if outcome.exit_code != EXIT_CERTIFIED {
        eprintln!("tube certificate not obtained: {}", outcome.report.status);
    }
    outcome.exit_code
}
