//! Uniform-grid finite-difference action
//!
//! ```text
//! J(u) = Σ_cells s [ ½ |(u_{i+1} - u_i)/s|² + ½ (h_i W(u_i) + h_{i+1} W(u_{i+1})) ]
//! ```
//!
//! on a truncated domain `[-R, R]`, together with its exact gradient with
//! respect to the interior nodes and the discrete tube constraints
//! `|u_i - a_-| <= δ` for `x_i <= -L`, `|u_i - a_+| <= δ` for `x_i >= L`.

use std::io::{BufRead, Write};

use thiserror::Error;

use crate::inhomogeneity::InhomogeneityProfile;
use crate::potential::{distance, PotentialSpec};

#[derive(Debug, Error)]
pub enum DiscretizationError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid constraint: {0}")]
    InvalidConstraint(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("profile csv, line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Uniform grid `x_i = -R + i s`, `i = 0..N`, with `N` odd so that `x = 0`
/// is a node.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    radius: f64,
    node_count: usize,
    spacing: f64,
}

impl Grid {
    pub fn new(radius: f64, node_count: usize) -> Result<Self, DiscretizationError> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(DiscretizationError::InvalidGrid(format!("radius {radius} must be positive")));
        }
        if node_count < 3 || node_count.is_multiple_of(2) {
            return Err(DiscretizationError::InvalidGrid(format!(
                "node count {node_count} must be odd and at least 3"
            )));
        }
        Ok(Grid {
            radius,
            node_count,
            spacing: 2.0 * radius / (node_count - 1) as f64,
        })
    }

    /// Grid on `[-R, R]` whose spacing is the closest to `spacing` that fits
    /// an even number of cells.
    pub fn with_spacing(radius: f64, spacing: f64) -> Result<Self, DiscretizationError> {
        if !(spacing > 0.0) {
            return Err(DiscretizationError::InvalidGrid("spacing must be positive".into()));
        }
        let half_cells = (radius / spacing).round().max(1.0) as usize;
        Self::new(radius, 2 * half_cells + 1)
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
    pub fn node_count(&self) -> usize {
        self.node_count
    }
    pub fn spacing(&self) -> f64 {
        self.spacing
    }
    /// Index of the node at `x = 0`.
    pub fn center(&self) -> usize {
        (self.node_count - 1) / 2
    }

    /// Node position; computed as `R * (i - m) / m` so the grid is exactly
    /// symmetric and the end nodes are exactly `±R`.
    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        let m = self.center() as f64;
        self.radius * ((i as f64 - m) / m)
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.node_count).map(|i| self.x(i))
    }
}

/// Discrete path: `node_count` points of `R^dim`, stored node-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    grid: Grid,
    dim: usize,
    values: Vec<f64>,
}

impl Profile {
    pub fn new(grid: Grid, dim: usize, values: Vec<f64>) -> Result<Self, DiscretizationError> {
        if values.len() != grid.node_count() * dim {
            return Err(DiscretizationError::DimensionMismatch {
                expected: grid.node_count() * dim,
                found: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(DiscretizationError::InvalidGrid(format!("non-finite profile value {v}")));
        }
        Ok(Profile { grid, dim, values })
    }

    /// Samples `f(x)` at every node.
    pub fn from_fn(grid: Grid, dim: usize, mut f: impl FnMut(f64) -> Vec<f64>) -> Self {
        let mut values = Vec::with_capacity(grid.node_count() * dim);
        for x in grid.nodes() {
            let v = f(x);
            assert_eq!(v.len(), dim, "sampled value has wrong dimension");
            values.extend(v);
        }
        Profile { grid, dim, values }
    }

    pub fn constant(grid: Grid, point: &[f64]) -> Self {
        let values = point.iter().copied().cycle().take(grid.node_count() * point.len()).collect();
        Profile {
            dim: point.len(),
            grid,
            values,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn len(&self) -> usize {
        self.grid.node_count()
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    #[inline]
    pub fn node(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }
    #[inline]
    pub fn node_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// Sets `u_0 = a_-` and `u_{N-1} = a_+`.
    pub fn pin(&mut self, p: &PotentialSpec) {
        let last = self.len() - 1;
        self.node_mut(0).copy_from_slice(p.a_minus());
        self.node_mut(last).copy_from_slice(p.a_plus());
    }

    pub fn is_pinned(&self, p: &PotentialSpec) -> bool {
        self.node(0) == p.a_minus() && self.node(self.len() - 1) == p.a_plus()
    }

    /// Scalar component `k` as a vector over the nodes.
    pub fn component(&self, k: usize) -> Vec<f64> {
        (0..self.len()).map(|i| self.node(i)[k]).collect()
    }

    /// Sup-norm distance to another profile on the same grid.
    pub fn sup_distance(&self, other: &Profile) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Piecewise-linear interpolation at `x`, clamped to the end values.
    pub fn interpolate(&self, x: f64) -> Vec<f64> {
        let g = &self.grid;
        if x <= -g.radius() {
            return self.node(0).to_vec();
        }
        if x >= g.radius() {
            return self.node(self.len() - 1).to_vec();
        }
        let t = (x + g.radius()) / g.spacing();
        let i = (t.floor() as usize).min(self.len() - 2);
        let f = t - i as f64;
        self.node(i)
            .iter()
            .zip(self.node(i + 1))
            .map(|(a, b)| (1.0 - f) * a + f * b)
            .collect()
    }

    /// Copies the profile onto a wider grid with the same spacing, filling
    /// the new cells with the end values.
    pub fn extend_to(&self, grid: &Grid) -> Result<Profile, DiscretizationError> {
        if (grid.spacing() - self.grid.spacing()).abs() > 1e-12 * self.grid.spacing()
            || grid.node_count() < self.len()
        {
            return Err(DiscretizationError::InvalidGrid(
                "extension requires a wider grid with equal spacing".into(),
            ));
        }
        let pad = (grid.node_count() - self.len()) / 2;
        let left = self.node(0).to_vec();
        let right = self.node(self.len() - 1).to_vec();
        let mut values = Vec::with_capacity(grid.node_count() * self.dim);
        for _ in 0..pad {
            values.extend_from_slice(&left);
        }
        values.extend_from_slice(&self.values);
        for _ in 0..pad {
            values.extend_from_slice(&right);
        }
        Profile::new(grid.clone(), self.dim, values)
    }
}

/// Which tube a node belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Minus,
    Plus,
}

/// Discrete realization of the tube constraints beyond `±L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintSpec {
    l: f64,
    delta: f64,
}

impl ConstraintSpec {
    pub fn new(l: f64, delta: f64) -> Result<Self, DiscretizationError> {
        if !(l >= 2.0 && l.is_finite()) {
            return Err(DiscretizationError::InvalidConstraint(format!("L = {l} must be at least 2")));
        }
        if !(delta > 0.0) {
            return Err(DiscretizationError::InvalidConstraint(format!("delta = {delta} must be positive")));
        }
        Ok(ConstraintSpec { l, delta })
    }

    /// Also checks `L < R` for the grid the constraint will be used on.
    pub fn for_grid(l: f64, delta: f64, grid: &Grid) -> Result<Self, DiscretizationError> {
        let c = Self::new(l, delta)?;
        if l >= grid.radius() {
            return Err(DiscretizationError::InvalidConstraint(format!(
                "L = {l} must be below the truncation radius {}",
                grid.radius()
            )));
        }
        Ok(c)
    }

    pub fn l(&self) -> f64 {
        self.l
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }

    #[inline]
    pub fn side(&self, grid: &Grid, i: usize) -> Option<Side> {
        let x = grid.x(i);
        let slack = 1e-9 * grid.spacing();
        if x <= -self.l + slack {
            Some(Side::Minus)
        } else if x >= self.l - slack {
            Some(Side::Plus)
        } else {
            None
        }
    }

    pub fn well<'a>(&self, side: Side, p: &'a PotentialSpec) -> &'a [f64] {
        match side {
            Side::Minus => p.a_minus(),
            Side::Plus => p.a_plus(),
        }
    }
}

/// Radial projection of `v` onto the closed ball `B(center, radius)`.
#[inline]
/// Points within a few ulps of the sphere count as inside, so projecting an
/// already projected point is a no-op.
pub(crate) fn project_onto_ball(v: &mut [f64], center: &[f64], radius: f64) {
    let d = distance(v, center);
    if d > radius * (1.0 + 8.0 * f64::EPSILON) {
        let scale = radius / d;
        for (x, c) in v.iter_mut().zip(center) {
            *x = c + (*x - c) * scale;
        }
    }
}

pub fn project_constraints_in_place(u: &mut Profile, c: &ConstraintSpec, p: &PotentialSpec) {
    for i in 0..u.len() {
        if let Some(side) = c.side(u.grid(), i) {
            let well = c.well(side, p);
            project_onto_ball(u.node_mut(i), well, c.delta());
        }
    }
}

/// Nearest point of the constraint set, node by node; interior nodes are
/// untouched.
pub fn project_constraints(u: &Profile, c: &ConstraintSpec, p: &PotentialSpec) -> Profile {
    let mut out = u.clone();
    project_constraints_in_place(&mut out, c, p);
    out
}

/// `a_-` for `x <= -1`, `a_+` for `x >= 1`, linear in between.
pub fn linear_competitor(p: &PotentialSpec, g: &Grid) -> Result<Profile, DiscretizationError> {
    if g.radius() < 2.0 {
        return Err(DiscretizationError::InvalidGrid(format!(
            "linear competitor needs R >= 2, got {}",
            g.radius()
        )));
    }
    let (am, ap) = (p.a_minus().to_vec(), p.a_plus().to_vec());
    let mut u = Profile::from_fn(g.clone(), p.dim(), |x| {
        let t = (0.5 * (x + 1.0)).clamp(0.0, 1.0);
        am.iter().zip(&ap).map(|(a, b)| a + t * (b - a)).collect()
    });
    u.pin(p);
    Ok(u)
}

/// Action evaluator with `h(x_i)` cached for one grid.
#[derive(Debug, Clone)]
pub struct DiscreteAction<'a> {
    potential: &'a PotentialSpec,
    grid: Grid,
    weights: Vec<f64>,
}

/// Kinetic and potential parts of the discrete action.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParts {
    pub kinetic: f64,
    pub potential: f64,
}

impl EnergyParts {
    pub fn total(&self) -> f64 {
        self.kinetic + self.potential
    }
}

impl<'a> DiscreteAction<'a> {
    pub fn new(potential: &'a PotentialSpec, h: &InhomogeneityProfile, grid: &Grid) -> Self {
        DiscreteAction {
            potential,
            grid: grid.clone(),
            weights: grid.nodes().map(|x| h.eval(x)).collect(),
        }
    }

    pub fn potential(&self) -> &PotentialSpec {
        self.potential
    }
    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn check(&self, u: &Profile) {
        assert_eq!(u.len(), self.grid.node_count(), "profile and action grids differ");
        assert_eq!(u.dim(), self.potential.dim(), "profile and potential dimensions differ");
    }

    pub fn parts(&self, u: &Profile) -> EnergyParts {
        self.check(u);
        let s = self.grid.spacing();
        let n = u.len();
        let mut kin = 0.0;
        let mut pot = 0.0;
        for i in 0..n {
            let ui = u.node(i);
            let wgt = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            pot += wgt * self.weights[i] * self.potential.w(ui);
            if i + 1 < n {
                let d2: f64 = ui.iter().zip(u.node(i + 1)).map(|(a, b)| (b - a) * (b - a)).sum();
                kin += d2;
            }
        }
        EnergyParts {
            kinetic: 0.5 * kin / s,
            potential: pot * s,
        }
    }

    pub fn energy(&self, u: &Profile) -> f64 {
        self.parts(u).total()
    }

    /// Energy of each cell `[x_i, x_{i+1}]`.
    pub fn cell_energies(&self, u: &Profile) -> Vec<f64> {
        self.check(u);
        let s = self.grid.spacing();
        let w: Vec<f64> = (0..u.len()).map(|i| self.weights[i] * self.potential.w(u.node(i))).collect();
        (0..u.len() - 1)
            .map(|i| {
                let d2: f64 = u.node(i).iter().zip(u.node(i + 1)).map(|(a, b)| (b - a) * (b - a)).sum();
                0.5 * d2 / s + 0.5 * s * (w[i] + w[i + 1])
            })
            .collect()
    }

    /// Exact gradient of [`energy`](Self::energy) with respect to the
    /// interior nodes; the two end slots are zero.
    pub fn gradient_into(&self, u: &Profile, out: &mut [f64]) {
        self.check(u);
        let s = self.grid.spacing();
        let n = u.len();
        let dim = u.dim();
        out[..dim].iter_mut().for_each(|x| *x = 0.0);
        out[(n - 1) * dim..].iter_mut().for_each(|x| *x = 0.0);
        let mut gw = vec![0.0; dim];
        for i in 1..n - 1 {
            self.potential.grad_w(u.node(i), &mut gw);
            let (prev, cur, next) = (u.node(i - 1), u.node(i), u.node(i + 1));
            let hi = self.weights[i];
            for k in 0..dim {
                let lap = (next[k] - 2.0 * cur[k] + prev[k]) / s;
                out[i * dim + k] = -lap + s * hi * gw[k];
            }
        }
    }

    pub fn gradient(&self, u: &Profile) -> Vec<f64> {
        let mut g = vec![0.0; u.values().len()];
        self.gradient_into(u, &mut g);
        g
    }

    /// Energy of the cells lying entirely in `x <= -l` or `x >= l`.
    pub fn tail_energy(&self, u: &Profile, l: f64) -> f64 {
        let slack = 1e-9 * self.grid.spacing();
        self.cell_energies(u)
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                let (a, b) = (self.grid.x(*i), self.grid.x(*i + 1));
                b <= -l + slack || a >= l - slack
            })
            .map(|(_, e)| e)
            .sum()
    }
}

pub fn discrete_energy(p: &PotentialSpec, h: &InhomogeneityProfile, u: &Profile) -> f64 {
    DiscreteAction::new(p, h, u.grid()).energy(u)
}

pub fn discrete_gradient(p: &PotentialSpec, h: &InhomogeneityProfile, u: &Profile) -> Vec<f64> {
    DiscreteAction::new(p, h, u.grid()).gradient(u)
}

/// Writes `x,u1,...,un` rows with 17 significant digits.
pub fn write_profile_csv<W: Write>(u: &Profile, mut out: W) -> Result<(), DiscretizationError> {
    let mut header = String::from("x");
    for k in 1..=u.dim() {
        header.push_str(&format!(",u{k}"));
    }
    writeln!(out, "{header}")?;
    for i in 0..u.len() {
        let mut line = format!("{:.16e}", u.grid().x(i));
        for v in u.node(i) {
            line.push_str(&format!(",{v:.16e}"));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Reads a profile written by [`write_profile_csv`]. The grid is rebuilt
/// from the first node and the row count, and the `x` column must agree with
/// it.
pub fn read_profile_csv<R: BufRead>(input: R) -> Result<Profile, DiscretizationError> {
    let csv_err = |line: usize, message: String| DiscretizationError::Csv { line, message };
    let mut lines = input.lines();
    let header = lines.next().ok_or_else(|| csv_err(1, "empty file".into()))??;
    let cols: Vec<&str> = header.trim().split(',').collect();
    if cols.first() != Some(&"x") || cols.len() < 2 {
        return Err(csv_err(1, format!("bad header `{header}`")));
    }
    for (k, c) in cols.iter().enumerate().skip(1) {
        if *c != format!("u{k}") {
            return Err(csv_err(1, format!("bad column name `{c}`")));
        }
    }
    let dim = cols.len() - 1;
    let mut xs = Vec::new();
    let mut values = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line = line?;
        let lineno = idx + 2;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != dim + 1 {
            return Err(csv_err(lineno, format!("expected {} fields, found {}", dim + 1, fields.len())));
        }
        let mut parsed = fields.iter().map(|f| {
            f.trim()
                .parse::<f64>()
                .map_err(|e| csv_err(lineno, format!("`{f}`: {e}")))
        });
        xs.push(parsed.next().unwrap()?);
        for v in parsed {
            values.push(v?);
        }
    }
    if xs.len() < 3 {
        return Err(csv_err(0, "need at least three rows".into()));
    }
    let grid = Grid::new(-xs[0], xs.len()).map_err(|e| csv_err(0, e.to_string()))?;
    for (i, x) in xs.iter().enumerate() {
        if (grid.x(i) - x).abs() > 1e-12 * (1.0 + grid.radius()) {
            return Err(csv_err(i + 2, format!("x = {x} is off the uniform grid (expected {})", grid.x(i))));
        }
    }
    Profile::new(grid, dim, values)
}
