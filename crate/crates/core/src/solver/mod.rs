//! Constrained minimization of the discrete action and the tube-certificate
//! loop built on top of it.
//!
//! [`minimize`] runs projected gradient descent (Armijo or safeguarded
//! Barzilai-Borwein steps) onto the tube constraints, optionally finished by
//! projected Newton steps on the block-tridiagonal Hessian.
//! [`solve_heteroclinic`] checks whether the minimizer sits strictly inside
//! the tubes; if not it recentres the transition and, failing that, widens
//! the constraint onset `L`.

mod newton;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics;
use crate::discretization::{
    linear_competitor, project_constraints_in_place, project_onto_ball, ConstraintSpec, DiscreteAction,
    DiscretizationError, Grid, Profile,
};
use crate::inhomogeneity::{InhomogeneityProfile, ProfileKind};
use crate::parallel;
use crate::potential::{distance, PotentialSpec};

use newton::BlockTridiagonal;

/// Armijo sufficient-decrease constant.
const ARMIJO_SIGMA: f64 = 1e-4;
const BACKTRACK: f64 = 0.5;
const MIN_STEP: f64 = 1e-16;
/// Relative tolerance for "on the tube boundary".
const BOUNDARY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// Backtracking from step 1 with factor 0.5 and sufficient decrease 1e-4.
    Armijo,
    /// Barzilai-Borwein trial step, safeguarded by the same backtracking.
    BarzilaiBorwein,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    /// Constraint onset `L`.
    pub l: f64,
    /// Truncation half-width `R`.
    pub radius: f64,
    pub node_count: usize,
    /// Stopping threshold on the max-norm of the projected gradient.
    pub grad_tol: f64,
    pub max_iters: usize,
    pub step_rule: StepRule,
    pub l_growth_factor: f64,
    pub max_l_doublings: usize,
    /// Finish with projected Newton steps once the gradient phase has
    /// brought the projected gradient below `polish_switch_tol`, or after
    /// `polish_after` gradient iterations.
    pub newton_polish: bool,
    pub polish_switch_tol: f64,
    pub polish_after: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            l: 5.0,
            radius: 20.0,
            node_count: 4001,
            grad_tol: 1e-8,
            max_iters: 200_000,
            step_rule: StepRule::Armijo,
            l_growth_factor: 2.0,
            max_l_doublings: 6,
            newton_polish: true,
            polish_switch_tol: 1e-3,
            polish_after: 5_000,
        }
    }
}

impl SolveConfig {
    /// Configuration with `R = 2L` and the given spacing.
    pub fn with_spacing(l: f64, spacing: f64) -> Self {
        let radius = 2.0 * l;
        let half = (radius / spacing).round() as usize;
        SolveConfig {
            l,
            radius,
            node_count: 2 * half + 1,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        let bad = |m: String| Err(SolveError::InvalidConfig(m));
        if !(self.l >= 2.0) {
            return bad(format!("L = {} must be at least 2", self.l));
        }
        if !(self.radius >= 2.0 * self.l) {
            return bad(format!("R = {} must be at least 2L = {}", self.radius, 2.0 * self.l));
        }
        if !(self.grad_tol > 0.0) {
            return bad("grad_tol must be positive".into());
        }
        if !(self.l_growth_factor > 1.0) {
            return bad("L growth factor must exceed 1".into());
        }
        if self.node_count < 3 || self.node_count.is_multiple_of(2) {
            return bad(format!("node count {} must be odd and at least 3", self.node_count));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid, SolveError> {
        Ok(Grid::new(self.radius, self.node_count)?)
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.radius / (self.node_count - 1) as f64
    }
}

/// Outcome of a run. `energy` is `m_L`; the homogeneous-only diagnostics are
/// `None` when `h` is not constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub energy: f64,
    pub iterations: usize,
    pub newton_iterations: usize,
    pub projected_grad_norm: f64,
    /// Max of `|u'' - h ∇W(u)|` over interior nodes not held by the tube.
    pub el_residual_max: f64,
    pub first_integral_dev: Option<f64>,
    pub equipartition_ratio: Option<f64>,
    pub converged: bool,
    pub tube_certificate: bool,
    /// Constrained nodes sitting on the tube boundary.
    pub active_constraint_count: usize,
    /// Energy of the cells beyond `±L`.
    pub tail_energy: f64,
    pub translation_shift: f64,
    pub l: f64,
    pub radius: f64,
    pub node_count: usize,
    pub l_growths: usize,
    #[serde(skip)]
    pub energy_history: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("no convergence after {} iterations (projected gradient {:e})", .0.1.iterations, .0.1.projected_grad_norm)]
    NonConvergence(Box<(Profile, SolveReport)>),
    #[error("line search step underflow (projected gradient {:e})", .0.1.projected_grad_norm)]
    StepCollapse(Box<(Profile, SolveReport)>),
    #[error("tube certificate still fails at L = {}", .0.1.l)]
    TubeCertificateFailure(Box<(Profile, SolveReport)>),
    #[error("profile never leaves both tubes")]
    NoTransition,
    #[error(transparent)]
    Discretization(#[from] DiscretizationError),
}

impl SolveError {
    /// The flagged profile and report carried by run failures.
    pub fn outcome(&self) -> Option<&(Profile, SolveReport)> {
        match self {
            SolveError::NonConvergence(b) | SolveError::StepCollapse(b) | SolveError::TubeCertificateFailure(b) => {
                Some(b)
            }
            _ => None,
        }
    }
}

enum Status {
    Converged,
    MaxIters,
    StepCollapse,
}

struct Minimizer<'a> {
    action: DiscreteAction<'a>,
    constraint: ConstraintSpec,
    sides: Vec<Option<&'a [f64]>>,
    dim: usize,
}

impl<'a> Minimizer<'a> {
    fn new(p: &'a PotentialSpec, h: &InhomogeneityProfile, grid: &Grid, constraint: ConstraintSpec) -> Self {
        let sides = (0..grid.node_count())
            .map(|i| constraint.side(grid, i).map(|s| constraint.well(s, p)))
            .collect();
        Minimizer {
            action: DiscreteAction::new(p, h, grid),
            constraint,
            sides,
            dim: p.dim(),
        }
    }

    fn delta(&self) -> f64 {
        self.constraint.delta()
    }

    fn project(&self, u: &mut Profile) {
        let last = u.len() - 1;
        for i in 1..last {
            if let Some(well) = self.sides[i] {
                project_onto_ball(u.node_mut(i), well, self.delta());
            }
        }
    }

    /// `u - P(u - g)`, max-norm.
    fn projected_grad_norm(&self, u: &Profile, g: &[f64]) -> f64 {
        let d = self.dim;
        let mut tmp = vec![0.0; d];
        let mut norm = 0.0_f64;
        for i in 1..u.len() - 1 {
            let ui = u.node(i);
            let gi = &g[i * d..(i + 1) * d];
            match self.sides[i] {
                None => norm = gi.iter().fold(norm, |m, v| m.max(v.abs())),
                Some(well) => {
                    for k in 0..d {
                        tmp[k] = ui[k] - gi[k];
                    }
                    project_onto_ball(&mut tmp, well, self.delta());
                    for k in 0..d {
                        norm = norm.max((ui[k] - tmp[k]).abs());
                    }
                }
            }
        }
        norm
    }

    fn on_boundary(&self, u: &Profile, i: usize) -> bool {
        match self.sides[i] {
            Some(well) => distance(u.node(i), well) >= self.delta() * (1.0 - BOUNDARY_TOL),
            None => false,
        }
    }

    fn noise(energy: f64) -> f64 {
        1e-14 * (1.0 + energy.abs())
    }

    /// One projected backtracking step from trial step `t0`. Returns the new
    /// state, or `None` once the step underflows.
    fn gradient_step(
        &self,
        u: &Profile,
        g: &[f64],
        energy: f64,
        pg: f64,
        t0: f64,
    ) -> Option<(Profile, Vec<f64>, f64, f64, f64)> {
        let mut t = t0;
        let mut trial = u.clone();
        while t >= MIN_STEP {
            for ((v, x), gi) in trial.values_mut().iter_mut().zip(u.values()).zip(g) {
                *v = x - t * gi;
            }
            self.project(&mut trial);
            let decrease: f64 = g
                .iter()
                .zip(u.values().iter().zip(trial.values()))
                .map(|(gi, (a, b))| gi * (a - b))
                .sum();
            let e = self.action.energy(&trial);
            if e <= energy - ARMIJO_SIGMA * decrease && e <= energy {
                let tg = self.action.gradient(&trial);
                let tpg = self.projected_grad_norm(&trial, &tg);
                return Some((trial, tg, e, tpg, t));
            }
            if (e - energy).abs() <= Self::noise(energy) {
                // below the resolution of the energy: fall back on the
                // projected gradient to judge progress
                let tg = self.action.gradient(&trial);
                let tpg = self.projected_grad_norm(&trial, &tg);
                if tpg < pg {
                    return Some((trial, tg, e.min(energy), tpg, t));
                }
            }
            t *= BACKTRACK;
        }
        None
    }

    /// Regularized projected Newton direction on the free nodes.
    fn newton_direction(&self, u: &Profile, g: &[f64], pg: f64) -> Option<Vec<f64>> {
        let d = self.dim;
        let n = u.len();
        let s = self.action.grid().spacing();
        let weights = self.action.weights();
        let p = self.action.potential();
        let free: Vec<bool> = (0..n)
            .map(|i| {
                if i == 0 || i == n - 1 {
                    return false;
                }
                if let Some(well) = self.sides[i] {
                    if self.on_boundary(u, i) {
                        // held if descent pushes outward
                        let gi = &g[i * d..(i + 1) * d];
                        let radial: f64 = gi.iter().zip(u.node(i)).zip(well).map(|((gk, x), a)| gk * (x - a)).sum();
                        return radial >= 0.0;
                    }
                }
                true
            })
            .collect();
        let mut base = BlockTridiagonal::zeros(d, n);
        let mut hess = vec![0.0; d * d];
        for i in 0..n {
            let blk = base.diag_block_mut(i);
            if free[i] {
                p.hessian(u.node(i), &mut hess);
                for r in 0..d {
                    for c in 0..d {
                        blk[r * d + c] = s * weights[i] * hess[r * d + c];
                    }
                    blk[r * d + r] += 2.0 / s;
                }
            } else {
                for r in 0..d {
                    blk[r * d + r] = 1.0;
                }
            }
        }
        for i in 0..n - 1 {
            base.coupling[i] = if free[i] && free[i + 1] { -1.0 / s } else { 0.0 };
        }
        let rhs: Vec<f64> = (0..n * d).map(|k| if free[k / d] { -g[k] } else { 0.0 }).collect();
        let mut mu = pg.max(1e-14);
        for _ in 0..30 {
            let mut sys = base.clone();
            for i in 0..n {
                if free[i] {
                    let blk = sys.diag_block_mut(i);
                    for r in 0..d {
                        blk[r * d + r] += mu;
                    }
                }
            }
            let mut x = rhs.clone();
            if sys.solve(&mut x).is_ok() {
                return Some(x);
            }
            mu = (mu * 10.0).max(1e-8);
        }
        None
    }

    fn newton_step(&self, u: &Profile, g: &[f64], energy: f64, pg: f64) -> Option<(Profile, Vec<f64>, f64, f64)> {
        let dir = self.newton_direction(u, g, pg)?;
        let mut t = 1.0;
        let mut trial = u.clone();
        while t >= 1e-10 {
            for ((v, x), di) in trial.values_mut().iter_mut().zip(u.values()).zip(&dir) {
                *v = x + t * di;
            }
            self.project(&mut trial);
            let predicted: f64 = g
                .iter()
                .zip(u.values().iter().zip(trial.values()))
                .map(|(gi, (a, b))| gi * (b - a))
                .sum();
            let e = self.action.energy(&trial);
            if predicted < 0.0 && e <= energy + ARMIJO_SIGMA * predicted {
                let tg = self.action.gradient(&trial);
                let tpg = self.projected_grad_norm(&trial, &tg);
                return Some((trial, tg, e, tpg));
            }
            if (e - energy).abs() <= Self::noise(energy) {
                let tg = self.action.gradient(&trial);
                let tpg = self.projected_grad_norm(&trial, &tg);
                if tpg < pg {
                    return Some((trial, tg, e.min(energy), tpg));
                }
            }
            t *= BACKTRACK;
        }
        None
    }

    fn run(&self, cfg: &SolveConfig, mut u: Profile) -> (Profile, Status, RunStats) {
        let mut stats = RunStats::default();
        let mut g = self.action.gradient(&u);
        let mut energy = self.action.energy(&u);
        let mut pg = self.projected_grad_norm(&u, &g);
        stats.history.push(energy);
        let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
        let mut newton_phase = false;
        loop {
            stats.pg = pg;
            if pg <= cfg.grad_tol {
                return (u, Status::Converged, stats);
            }
            if stats.iterations >= cfg.max_iters {
                return (u, Status::MaxIters, stats);
            }
            if cfg.newton_polish
                && !newton_phase
                && (pg <= cfg.polish_switch_tol || stats.iterations >= cfg.polish_after)
            {
                newton_phase = true;
            }
            stats.iterations += 1;
            if newton_phase {
                if let Some((nu, ng, ne, npg)) = self.newton_step(&u, &g, energy, pg) {
                    stats.newton_iterations += 1;
                    u = nu;
                    g = ng;
                    energy = ne;
                    pg = npg;
                    stats.history.push(energy);
                    continue;
                }
            }
            let t0 = match (cfg.step_rule, &prev) {
                (StepRule::BarzilaiBorwein, Some((pu, pgr))) => {
                    let mut ss = 0.0;
                    let mut sy = 0.0;
                    for k in 0..g.len() {
                        let sk = u.values()[k] - pu[k];
                        ss += sk * sk;
                        sy += sk * (g[k] - pgr[k]);
                    }
                    if sy > 0.0 {
                        (ss / sy).clamp(1e-10, 1e10)
                    } else {
                        1.0
                    }
                }
                _ => 1.0,
            };
            match self.gradient_step(&u, &g, energy, pg, t0) {
                Some((nu, ng, ne, npg, _t)) => {
                    if cfg.step_rule == StepRule::BarzilaiBorwein {
                        prev = Some((u.values().to_vec(), g));
                    }
                    u = nu;
                    g = ng;
                    energy = ne;
                    pg = npg;
                    stats.history.push(energy);
                }
                None => return (u, Status::StepCollapse, stats),
            }
        }
    }
}

#[derive(Default)]
struct RunStats {
    iterations: usize,
    newton_iterations: usize,
    pg: f64,
    history: Vec<f64>,
}

fn build_report(
    p: &PotentialSpec,
    h: &InhomogeneityProfile,
    cfg: &SolveConfig,
    m: &Minimizer<'_>,
    u: &Profile,
    stats: RunStats,
    converged: bool,
) -> SolveReport {
    let g = m.action.gradient(u);
    let s = u.grid().spacing();
    let d = u.dim();
    let mut active = 0;
    let mut residual = 0.0_f64;
    for i in 1..u.len() - 1 {
        if m.on_boundary(u, i) {
            active += 1;
            continue;
        }
        for k in 0..d {
            residual = residual.max(g[i * d + k].abs() / s);
        }
    }
    let homogeneous = h.kind() == ProfileKind::Constant;
    SolveReport {
        energy: m.action.energy(u),
        iterations: stats.iterations,
        newton_iterations: stats.newton_iterations,
        projected_grad_norm: stats.pg,
        el_residual_max: residual,
        first_integral_dev: homogeneous.then(|| diagnostics::first_integral_deviation(p, h, u).unwrap_or(f64::NAN)),
        equipartition_ratio: homogeneous.then(|| diagnostics::equipartition_ratio(p, h, u).unwrap_or(f64::NAN)),
        converged,
        tube_certificate: converged && active == 0,
        active_constraint_count: active,
        tail_energy: m.action.tail_energy(u, cfg.l),
        translation_shift: 0.0,
        l: cfg.l,
        radius: cfg.radius,
        node_count: cfg.node_count,
        l_growths: 0,
        energy_history: stats.history,
    }
}

/// Minimizes the discrete action over the tube-constrained class. The
/// default start is the linear competitor.
pub fn minimize(
    p: &PotentialSpec,
    h: &InhomogeneityProfile,
    cfg: &SolveConfig,
    init: Option<Profile>,
) -> Result<(Profile, SolveReport), SolveError> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let constraint = ConstraintSpec::for_grid(cfg.l, p.delta(), &grid)?;
    let mut u = match init {
        Some(u) => {
            if u.grid() != &grid || u.dim() != p.dim() {
                return Err(SolveError::InvalidConfig(
                    "initial profile does not live on the configured grid".into(),
                ));
            }
            u
        }
        None => linear_competitor(p, &grid)?,
    };
    u.pin(p);
    project_constraints_in_place(&mut u, &constraint, p);
    let m = Minimizer::new(p, h, &grid, constraint);
    let (u, status, stats) = m.run(cfg, u);
    let converged = matches!(status, Status::Converged);
    let report = build_report(p, h, cfg, &m, &u, stats, converged);
    match status {
        Status::Converged => Ok((u, report)),
        Status::MaxIters => Err(SolveError::NonConvergence(Box::new((u, report)))),
        Status::StepCollapse => Err(SolveError::StepCollapse(Box::new((u, report)))),
    }
}

/// Shifts `u` by whole cells so that the first point where
/// `|u - a_-| = |a_+ - a_-| / 2` (scanning left to right) lands at `x = 0`.
/// Vacated cells take the adjacent well value. Returns the shifted profile
/// and the applied shift.
pub fn normalize_translate(
    u: &Profile,
    p: &PotentialSpec,
    c: &ConstraintSpec,
) -> Result<(Profile, f64), SolveError> {
    let delta = c.delta();
    let leaves = (0..u.len()).any(|i| distance(u.node(i), p.a_minus()) > delta && distance(u.node(i), p.a_plus()) > delta);
    if !leaves {
        return Err(SolveError::NoTransition);
    }
    let half = 0.5 * p.well_separation();
    let grid = u.grid();
    let first = (0..u.len())
        .find(|&i| distance(u.node(i), p.a_minus()) >= half)
        .ok_or(SolveError::NoTransition)?;
    let crossing = if first == 0 {
        grid.x(0)
    } else {
        let f0 = distance(u.node(first - 1), p.a_minus()) - half;
        let f1 = distance(u.node(first), p.a_minus()) - half;
        let t = if f1 != f0 { -f0 / (f1 - f0) } else { 0.0 };
        grid.x(first - 1) + t * grid.spacing()
    };
    let cells = (crossing / grid.spacing()).round() as i64;
    let n = u.len() as i64;
    let mut out = u.clone();
    for j in 0..n {
        let src = j + cells;
        let v: &[f64] = if src < 0 {
            p.a_minus()
        } else if src >= n {
            p.a_plus()
        } else {
            u.node(src as usize)
        };
        out.node_mut(j as usize).copy_from_slice(v);
    }
    Ok((out, -(cells as f64) * grid.spacing()))
}

fn grown(cfg: &SolveConfig) -> SolveConfig {
    let spacing = cfg.spacing();
    let l = cfg.l * cfg.l_growth_factor;
    let half = ((cfg.radius * cfg.l_growth_factor) / spacing).round().max((2.0 * l / spacing).ceil()) as usize;
    SolveConfig {
        l,
        radius: half as f64 * spacing,
        node_count: 2 * half + 1,
        ..cfg.clone()
    }
}

/// Minimizes, then enforces the strict tube condition: a run with nodes
/// held on the tube boundary is recentred and re-minimized, and if that
/// does not clear the boundary `L` (and `R` with it) is grown by
/// `l_growth_factor`, up to `max_l_doublings` times.
pub fn solve_heteroclinic(
    p: &PotentialSpec,
    h: &InhomogeneityProfile,
    cfg: &SolveConfig,
) -> Result<(Profile, SolveReport), SolveError> {
    solve_from(p, h, cfg, None)
}

pub fn solve_from(
    p: &PotentialSpec,
    h: &InhomogeneityProfile,
    cfg: &SolveConfig,
    init: Option<Profile>,
) -> Result<(Profile, SolveReport), SolveError> {
    cfg.validate()?;
    let mut cfg = cfg.clone();
    let mut init = init;
    let mut shift_total = 0.0;
    for growth in 0..=cfg.max_l_doublings {
        let (mut u, mut report) = minimize(p, h, &cfg, init.take())?;
        report.l_growths = growth;
        report.translation_shift = shift_total;
        if report.tube_certificate {
            return Ok((u, report));
        }
        let constraint = ConstraintSpec::new(cfg.l, p.delta())?;
        if let Ok((shifted, shift)) = normalize_translate(&u, p, &constraint) {
            if shift != 0.0 {
                log::info!("constraints active at L = {}; recentring by {shift}", cfg.l);
                shift_total += shift;
                let (u2, mut r2) = minimize(p, h, &cfg, Some(shifted))?;
                r2.l_growths = growth;
                r2.translation_shift = shift_total;
                if r2.tube_certificate {
                    return Ok((u2, r2));
                }
                u = u2;
                report = r2;
            }
        }
        if growth == cfg.max_l_doublings {
            return Err(SolveError::TubeCertificateFailure(Box::new((u, report))));
        }
        let next = grown(&cfg);
        log::info!("constraints active at L = {}; growing to L = {}", cfg.l, next.l);
        init = Some(u.extend_to(&next.grid()?)?);
        cfg = next;
    }
    unreachable!("loop returns on its last iteration")
}

/// Weighted minimum `m_L` against the constant-weight minimum `m_{∞,L}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub m_l: f64,
    pub m_inf_l: f64,
    /// `m_{∞,L} - m_L`.
    pub gap: f64,
    /// `J_h(u_{∞,L})`: the constant-weight minimizer used as a test function
    /// in the weighted problem.
    pub test_function_energy: f64,
    pub l: f64,
    pub radius: f64,
    pub weighted: SolveReport,
    pub constant: SolveReport,
}

/// Solves the weighted problem and the problem with `h` replaced by `h_inf`
/// on a common grid and compares the minima.
pub fn energy_comparison_asymptotic(
    p: &PotentialSpec,
    h: &InhomogeneityProfile,
    cfg: &SolveConfig,
) -> Result<ComparisonReport, SolveError> {
    energy_comparison_detailed(p, h, cfg).map(|(r, _, _)| r)
}

/// Like [`energy_comparison_asymptotic`] but also returns the weighted and
/// constant-weight minimizers.
pub fn energy_comparison_detailed(
    p: &PotentialSpec,
    h: &InhomogeneityProfile,
    cfg: &SolveConfig,
) -> Result<(ComparisonReport, Profile, Profile), SolveError> {
    if h.kind() != ProfileKind::AsymptoticallyConstant {
        return Err(SolveError::InvalidConfig("energy comparison needs an asymptotically constant h".into()));
    }
    let h_inf = h
        .h_inf()
        .ok_or_else(|| SolveError::InvalidConfig("asymptotic profile without h_inf".into()))?;
    let p_inf = p.scaled(h_inf);
    let flat = InhomogeneityProfile::constant();
    let (weighted, constant) = if parallel::thread_budget() > 1 {
        std::thread::scope(|s| {
            let a = s.spawn(|| solve_heteroclinic(p, h, cfg));
            let b = s.spawn(|| solve_heteroclinic(&p_inf, &flat, cfg));
            (a.join().expect("weighted solve panicked"), b.join().expect("constant solve panicked"))
        })
    } else {
        (solve_heteroclinic(p, h, cfg), solve_heteroclinic(&p_inf, &flat, cfg))
    };
    let (mut uw, mut rw) = weighted?;
    let (mut uc, mut rc) = constant?;
    // bring both to the larger L so that the two minima are over the same class
    if rw.l < rc.l {
        let c = common_config(cfg, &rc);
        let (u, r) = solve_from(p, h, &c, Some(uw.extend_to(&c.grid()?)?))?;
        uw = u;
        rw = r;
    } else if rc.l < rw.l {
        let c = common_config(cfg, &rw);
        let (u, r) = solve_from(&p_inf, &flat, &c, Some(uc.extend_to(&c.grid()?)?))?;
        uc = u;
        rc = r;
    }
    let test_function_energy = DiscreteAction::new(p, h, uc.grid()).energy(&uc);
    Ok((
        ComparisonReport {
            m_l: rw.energy,
            m_inf_l: rc.energy,
            gap: rc.energy - rw.energy,
            test_function_energy,
            l: rw.l,
            radius: rw.radius,
            weighted: rw,
            constant: rc,
        },
        uw,
        uc,
    ))
}

fn common_config(base: &SolveConfig, r: &SolveReport) -> SolveConfig {
    SolveConfig {
        l: r.l,
        radius: r.radius,
        node_count: r.node_count,
        max_l_doublings: 0,
        ..base.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inhomogeneity::{make_profile, ProfileParams};
    use std::f64::consts::SQRT_2;

    fn small_cfg() -> SolveConfig {
        SolveConfig {
            l: 3.0,
            radius: 8.0,
            node_count: 401,
            ..Default::default()
        }
    }

    #[test]
    fn config_validation() {
        assert!(SolveConfig::default().validate().is_ok());
        let bad = [
            SolveConfig { l: 1.5, ..Default::default() },
            SolveConfig { radius: 9.0, ..Default::default() },
            SolveConfig { grad_tol: 0.0, ..Default::default() },
            SolveConfig { node_count: 4000, ..Default::default() },
            SolveConfig { l_growth_factor: 1.0, ..Default::default() },
        ];
        for c in bad {
            assert!(matches!(c.validate(), Err(SolveError::InvalidConfig(_))), "{c:?}");
        }
    }

    #[test]
    fn quartic_small_grid_converges() {
        let p = PotentialSpec::quartic();
        let h = InhomogeneityProfile::constant();
        let (u, r) = minimize(&p, &h, &small_cfg(), None).unwrap();
        assert!(r.converged && r.tube_certificate);
        assert!((r.energy - 2.0 * SQRT_2 / 3.0).abs() < 1e-3);
        assert!(u.is_pinned(&p));
        for w in r.energy_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn fixed_point_returns_immediately() {
        let p = PotentialSpec::quartic();
        let h = InhomogeneityProfile::constant();
        let cfg = small_cfg();
        let (u, _) = minimize(&p, &h, &cfg, None).unwrap();
        let (v, r) = minimize(&p, &h, &cfg, Some(u.clone())).unwrap();
        assert_eq!(r.iterations, 0);
        assert_eq!(u, v);
    }

    #[test]
    fn armijo_without_polish_descends() {
        let p = PotentialSpec::quartic();
        let h = InhomogeneityProfile::constant();
        let cfg = SolveConfig {
            newton_polish: false,
            grad_tol: 1e-6,
            node_count: 161,
            ..small_cfg()
        };
        let (_, r) = minimize(&p, &h, &cfg, None).unwrap();
        assert!(r.converged);
        assert_eq!(r.newton_iterations, 0);
        assert!(r.energy < 1.0 + 4.0 / 15.0);
    }

    #[test]
    fn bb_matches_armijo() {
        let p = PotentialSpec::quartic();
        let h = InhomogeneityProfile::constant();
        let a = minimize(&p, &h, &small_cfg(), None).unwrap().1;
        let cfg = SolveConfig {
            step_rule: StepRule::BarzilaiBorwein,
            newton_polish: false,
            ..small_cfg()
        };
        let b = minimize(&p, &h, &cfg, None).unwrap().1;
        assert!((a.energy - b.energy).abs() < 1e-9, "{} vs {}", a.energy, b.energy);
    }

    #[test]
    fn iteration_cap_is_flagged() {
        let p = PotentialSpec::quartic();
        let h = InhomogeneityProfile::constant();
        let cfg = SolveConfig { max_iters: 3, ..small_cfg() };
        match minimize(&p, &h, &cfg, None) {
            Err(SolveError::NonConvergence(b)) => {
                assert_eq!(b.1.iterations, 3);
                assert!(!b.1.tube_certificate);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn normalize_examples() {
        let p = PotentialSpec::quartic();
        let g = Grid::new(20.0, 4001).unwrap();
        let c = ConstraintSpec::new(5.0, 0.5).unwrap();
        let centred = Profile::from_fn(g.clone(), 1, |x| vec![(x / SQRT_2).tanh()]);
        assert_eq!(normalize_translate(&centred, &p, &c).unwrap().1, 0.0);
        let moved = Profile::from_fn(g.clone(), 1, |x| vec![((x - 3.0) / SQRT_2).tanh()]);
        let (v, shift) = normalize_translate(&moved, &p, &c).unwrap();
        assert!((shift + 3.0).abs() <= g.spacing());
        assert!(v.sup_distance(&centred) < 1e-2);
        let flat = Profile::constant(g, &[1.0]);
        assert!(matches!(normalize_translate(&flat, &p, &c), Err(SolveError::NoTransition)));
    }

    #[test]
    fn growth_keeps_spacing() {
        let c = SolveConfig::with_spacing(2.0, 0.01);
        assert_eq!(c.node_count, 801);
        let g = grown(&c);
        assert_eq!(g.l, 4.0);
        assert_eq!(g.node_count, 1601);
        assert!((g.spacing() - c.spacing()).abs() < 1e-15);
    }

    #[test]
    fn tiny_tube_fails_certificate() {
        // delta so small that the tail is still outside the tube at L = 2
        let p = PotentialSpec::quartic().with_delta(1e-6).unwrap();
        let h = InhomogeneityProfile::constant();
        let cfg = SolveConfig {
            max_l_doublings: 0,
            ..SolveConfig::with_spacing(2.0, 0.05)
        };
        match solve_heteroclinic(&p, &h, &cfg) {
            Err(SolveError::TubeCertificateFailure(b)) => assert!(b.1.active_constraint_count > 0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn degenerate_comparison_has_zero_gap() {
        let p = PotentialSpec::quartic();
        let h = make_profile(ProfileParams::Asymptotic { h_inf: 2.0, dip: 0.0, width: 1.0 }).unwrap();
        let r = energy_comparison_asymptotic(&p, &h, &small_cfg()).unwrap();
        assert!(r.gap.abs() <= 2.0 * small_cfg().grad_tol, "{}", r.gap);
        assert!(r.m_l <= r.test_function_energy + 1e-12);
    }
}
