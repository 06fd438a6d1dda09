//! Double-well potentials `W: R^n -> R` and the radial quantities derived
//! from them.
//!
//! A [`PotentialSpec`] carries the potential, its gradient (analytic when the
//! constructor knows it, central differences otherwise), the two wells and the
//! tube radius used by the constrained minimization. The standing assumptions
//! are that `W` vanishes exactly at the two wells, is positive elsewhere and
//! stays bounded away from zero at infinity; [`validate_assumptions`] checks
//! them on deterministic samples.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::parallel;
use crate::sampling;

/// Tolerance on `W(a_-)` and `W(a_+)`.
pub const WELL_TOLERANCE: f64 = 1e-12;

/// The sphere minimum of `W` must exceed this for the coercivity check.
pub const COERCIVITY_FLOOR: f64 = 1e-6;

pub type ScalarField = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PotentialError {
    #[error("the two minima coincide")]
    DegenerateMinima,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("tube radius {delta} must lie in (0, {separation})")]
    InvalidDelta { delta: f64, separation: f64 },
    #[error("assumption `{assumption}` violated at {point:?} (W = {value:e})")]
    AssumptionViolation {
        point: Vec<f64>,
        assumption: Assumption,
        value: f64,
    },
    #[error("envelope vanishes at rho = {rho} (V = {value:e})")]
    EnvelopeDegenerate { rho: f64, value: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Which standing assumption a sample failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Assumption {
    /// `W(a_-) = W(a_+) = 0`.
    WellsVanish,
    /// `W(u) > 0` for `u` away from the wells.
    PositiveAwayFromWells,
    /// `liminf W > 0` as `|u| -> infinity`, checked on one large sphere.
    BoundedBelowAtInfinity,
}

impl fmt::Display for Assumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Assumption::WellsVanish => "W vanishes at both wells",
            Assumption::PositiveAwayFromWells => "W positive away from the wells",
            Assumption::BoundedBelowAtInfinity => "W bounded away from zero at infinity",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Smoothness {
    C1,
    C2,
}

/// One term `coef * u_1^e_1 * ... * u_n^e_n` of a polynomial potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coef: f64,
    pub exponents: Vec<u32>,
}

#[derive(Clone)]
pub struct PotentialSpec {
    name: String,
    dim: usize,
    a_minus: Vec<f64>,
    a_plus: Vec<f64>,
    delta: f64,
    smoothness: Smoothness,
    w: ScalarField,
    grad: Option<VectorField>,
    hess: Option<VectorField>,
}

impl fmt::Debug for PotentialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PotentialSpec")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("a_minus", &self.a_minus)
            .field("a_plus", &self.a_plus)
            .field("delta", &self.delta)
            .field("smoothness", &self.smoothness)
            .field("analytic_gradient", &self.grad.is_some())
            .finish()
    }
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

impl PotentialSpec {
    /// Generic constructor. Without `grad` the gradient falls back to central
    /// differences with step `1e-6 * (1 + |u|)`.
    pub fn from_fn(
        name: impl Into<String>,
        a_minus: Vec<f64>,
        a_plus: Vec<f64>,
        w: ScalarField,
        grad: Option<VectorField>,
    ) -> Result<Self, PotentialError> {
        let dim = a_minus.len();
        if dim == 0 {
            return Err(PotentialError::InvalidArgument("dimension must be positive".into()));
        }
        if a_plus.len() != dim {
            return Err(PotentialError::DimensionMismatch {
                expected: dim,
                found: a_plus.len(),
            });
        }
        let sep = distance(&a_minus, &a_plus);
        if sep == 0.0 {
            return Err(PotentialError::DegenerateMinima);
        }
        Ok(PotentialSpec {
            name: name.into(),
            dim,
            a_minus,
            a_plus,
            delta: 0.25 * sep,
            smoothness: Smoothness::C1,
            w,
            grad,
            hess: None,
        })
    }

    /// `W(u) = (u^2 - 1)^2 / 4` with wells at `-1` and `+1`, `delta = 0.5`.
    pub fn quartic() -> Self {
        let w: ScalarField = Arc::new(|u: &[f64]| {
            let s = u[0] * u[0] - 1.0;
            0.25 * s * s
        });
        let grad: VectorField = Arc::new(|u: &[f64], g: &mut [f64]| {
            g[0] = u[0] * u[0] * u[0] - u[0];
        });
        let hess: VectorField = Arc::new(|u: &[f64], h: &mut [f64]| {
            h[0] = 3.0 * u[0] * u[0] - 1.0;
        });
        PotentialSpec {
            name: "quartic".into(),
            dim: 1,
            a_minus: vec![-1.0],
            a_plus: vec![1.0],
            delta: 0.5,
            smoothness: Smoothness::C2,
            w,
            grad: Some(grad),
            hess: Some(hess),
        }
    }

    /// `W(u) = |u - a_-|^2 |u - a_+|^2 / 4`.
    pub fn product(a_minus: Vec<f64>, a_plus: Vec<f64>) -> Result<Self, PotentialError> {
        let am = a_minus.clone();
        let ap = a_plus.clone();
        let w: ScalarField = Arc::new(move |u: &[f64]| {
            let a: f64 = u.iter().zip(&am).map(|(x, y)| (x - y) * (x - y)).sum();
            let b: f64 = u.iter().zip(&ap).map(|(x, y)| (x - y) * (x - y)).sum();
            0.25 * a * b
        });
        let (am, ap) = (a_minus.clone(), a_plus.clone());
        let grad: VectorField = Arc::new(move |u: &[f64], g: &mut [f64]| {
            let a: f64 = u.iter().zip(&am).map(|(x, y)| (x - y) * (x - y)).sum();
            let b: f64 = u.iter().zip(&ap).map(|(x, y)| (x - y) * (x - y)).sum();
            for k in 0..u.len() {
                g[k] = 0.5 * ((u[k] - am[k]) * b + (u[k] - ap[k]) * a);
            }
        });
        let (am, ap) = (a_minus.clone(), a_plus.clone());
        let hess: VectorField = Arc::new(move |u: &[f64], h: &mut [f64]| {
            let n = u.len();
            let a: f64 = u.iter().zip(&am).map(|(x, y)| (x - y) * (x - y)).sum();
            let b: f64 = u.iter().zip(&ap).map(|(x, y)| (x - y) * (x - y)).sum();
            for i in 0..n {
                for j in 0..n {
                    let p = u[i] - am[i];
                    let q = u[j] - ap[j];
                    let r = u[i] - ap[i];
                    let s = u[j] - am[j];
                    let diag = if i == j { 0.5 * (a + b) } else { 0.0 };
                    h[i * n + j] = diag + p * q + r * s;
                }
            }
        });
        let mut spec = Self::from_fn("product", a_minus, a_plus, w, Some(grad))?;
        spec.hess = Some(hess);
        spec.smoothness = Smoothness::C2;
        Ok(spec)
    }

    /// Polynomial potential from a monomial table, with analytic gradient and
    /// Hessian.
    pub fn polynomial(
        terms: Vec<Monomial>,
        a_minus: Vec<f64>,
        a_plus: Vec<f64>,
    ) -> Result<Self, PotentialError> {
        let dim = a_minus.len();
        if let Some(t) = terms.iter().find(|t| t.exponents.len() != dim) {
            return Err(PotentialError::DimensionMismatch {
                expected: dim,
                found: t.exponents.len(),
            });
        }
        let terms = Arc::new(terms);
        let t = terms.clone();
        let w: ScalarField = Arc::new(move |u: &[f64]| {
            t.iter()
                .map(|m| m.coef * m.exponents.iter().zip(u).map(|(&e, x)| x.powi(e as i32)).product::<f64>())
                .sum()
        });
        let t = terms.clone();
        let grad: VectorField = Arc::new(move |u: &[f64], g: &mut [f64]| {
            g.iter_mut().for_each(|x| *x = 0.0);
            for m in t.iter() {
                for k in 0..u.len() {
                    let ek = m.exponents[k];
                    if ek == 0 {
                        continue;
                    }
                    let mut v = m.coef * ek as f64;
                    for (j, (&e, x)) in m.exponents.iter().zip(u).enumerate() {
                        let p = if j == k { e - 1 } else { e };
                        v *= x.powi(p as i32);
                    }
                    g[k] += v;
                }
            }
        });
        let t = terms;
        let hess: VectorField = Arc::new(move |u: &[f64], h: &mut [f64]| {
            let n = u.len();
            h.iter_mut().for_each(|x| *x = 0.0);
            for m in t.iter() {
                for a in 0..n {
                    for b in 0..n {
                        let mut e = m.exponents.clone();
                        let mut v = m.coef;
                        if e[a] == 0 {
                            continue;
                        }
                        v *= e[a] as f64;
                        e[a] -= 1;
                        if e[b] == 0 {
                            continue;
                        }
                        v *= e[b] as f64;
                        e[b] -= 1;
                        for (&p, x) in e.iter().zip(u) {
                            v *= x.powi(p as i32);
                        }
                        h[a * n + b] += v;
                    }
                }
            }
        });
        let mut spec = Self::from_fn("custom", a_minus, a_plus, w, Some(grad))?;
        spec.hess = Some(hess);
        spec.smoothness = Smoothness::C2;
        Ok(spec)
    }

    pub fn with_delta(mut self, delta: f64) -> Result<Self, PotentialError> {
        let separation = self.well_separation();
        if !(delta > 0.0 && delta < separation) {
            return Err(PotentialError::InvalidDelta { delta, separation });
        }
        self.delta = delta;
        Ok(self)
    }

    pub fn with_smoothness(mut self, smoothness: Smoothness) -> Self {
        self.smoothness = smoothness;
        self
    }

    /// The potential `lambda * W`, same wells and tube.
    pub fn scaled(&self, lambda: f64) -> Self {
        let w0 = self.w.clone();
        let w: ScalarField = Arc::new(move |u: &[f64]| lambda * w0(u));
        let grad = self.grad.clone().map(|g0| -> VectorField {
            Arc::new(move |u: &[f64], g: &mut [f64]| {
                g0(u, g);
                g.iter_mut().for_each(|x| *x *= lambda);
            })
        });
        let hess = self.hess.clone().map(|h0| -> VectorField {
            Arc::new(move |u: &[f64], h: &mut [f64]| {
                h0(u, h);
                h.iter_mut().for_each(|x| *x *= lambda);
            })
        });
        PotentialSpec {
            name: format!("{}*{}", lambda, self.name),
            w,
            grad,
            hess,
            ..self.clone()
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn a_minus(&self) -> &[f64] {
        &self.a_minus
    }
    pub fn a_plus(&self) -> &[f64] {
        &self.a_plus
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }
    pub fn smoothness(&self) -> Smoothness {
        self.smoothness
    }
    pub fn has_analytic_gradient(&self) -> bool {
        self.grad.is_some()
    }
    pub fn well_separation(&self) -> f64 {
        distance(&self.a_minus, &self.a_plus)
    }
    pub fn midpoint(&self) -> Vec<f64> {
        self.a_minus.iter().zip(&self.a_plus).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    #[inline]
    pub fn w(&self, u: &[f64]) -> f64 {
        (self.w)(u)
    }

    pub fn grad_w(&self, u: &[f64], out: &mut [f64]) {
        match &self.grad {
            Some(g) => g(u, out),
            None => {
                let mut x = u.to_vec();
                for k in 0..u.len() {
                    let step = 1e-6 * (1.0 + u[k].abs());
                    x[k] = u[k] + step;
                    let fp = self.w(&x);
                    x[k] = u[k] - step;
                    let fm = self.w(&x);
                    x[k] = u[k];
                    out[k] = (fp - fm) / (2.0 * step);
                }
            }
        }
    }

    /// Row-major `n x n` Hessian; central differences of the gradient when no
    /// analytic form is known.
    pub fn hessian(&self, u: &[f64], out: &mut [f64]) {
        if let Some(h) = &self.hess {
            h(u, out);
            return;
        }
        let n = u.len();
        let mut x = u.to_vec();
        let mut gp = vec![0.0; n];
        let mut gm = vec![0.0; n];
        for k in 0..n {
            let step = 1e-4 * (1.0 + u[k].abs());
            x[k] = u[k] + step;
            self.grad_w(&x, &mut gp);
            x[k] = u[k] - step;
            self.grad_w(&x, &mut gm);
            x[k] = u[k];
            for j in 0..n {
                out[j * n + k] = (gp[j] - gm[j]) / (2.0 * step);
            }
        }
        // symmetrize
        for i in 0..n {
            for j in 0..i {
                let s = 0.5 * (out[i * n + j] + out[j * n + i]);
                out[i * n + j] = s;
                out[j * n + i] = s;
            }
        }
    }
}

/// Summary of a successful assumption check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub samples_checked: usize,
    pub min_sampled_w: f64,
    pub min_sampled_point: Vec<f64>,
    pub sphere_min_w: f64,
    pub sphere_radius: f64,
}

/// Checks the standing assumptions on deterministic samples: both wells are
/// zeros of `W`, `W > 0` on a Halton sample of the ball of radius
/// `sample_radius` around the midpoint of the wells (minus small
/// neighbourhoods of the wells), and `W` exceeds [`COERCIVITY_FLOOR`] on the
/// bounding sphere. The last check is only a proxy for the behaviour at
/// infinity.
pub fn validate_assumptions(
    p: &PotentialSpec,
    sample_radius: f64,
    sample_count: usize,
) -> Result<ValidationReport, PotentialError> {
    let sep = p.well_separation();
    if sample_radius <= sep {
        return Err(PotentialError::InvalidArgument(format!(
            "sample radius {sample_radius} must exceed the well separation {sep}"
        )));
    }
    if sample_count < 1000 {
        return Err(PotentialError::InvalidArgument("sample_count must be at least 1000".into()));
    }
    for a in [p.a_minus(), p.a_plus()] {
        let v = p.w(a);
        if !(v.abs() <= WELL_TOLERANCE) {
            return Err(PotentialError::AssumptionViolation {
                point: a.to_vec(),
                assumption: Assumption::WellsVanish,
                value: v,
            });
        }
    }
    let center = p.midpoint();
    let exclusion = 1e-3 * sep;
    let mut min_w = f64::INFINITY;
    let mut min_pt = center.clone();
    let mut checked = 0;
    for u in sampling::ball_points(&center, sample_radius, sample_count) {
        if distance(&u, p.a_minus()) < exclusion || distance(&u, p.a_plus()) < exclusion {
            continue;
        }
        checked += 1;
        let v = p.w(&u);
        if !(v > 0.0) {
            return Err(PotentialError::AssumptionViolation {
                point: u,
                assumption: Assumption::PositiveAwayFromWells,
                value: v,
            });
        }
        if v < min_w {
            min_w = v;
            min_pt = u;
        }
    }
    let dirs = sampling::sphere_directions(p.dim(), (sample_count / 10).max(64));
    let mut sphere_min = f64::INFINITY;
    for d in dirs {
        let u: Vec<f64> = center.iter().zip(&d).map(|(c, v)| c + sample_radius * v).collect();
        let v = p.w(&u);
        if !(v > COERCIVITY_FLOOR) {
            return Err(PotentialError::AssumptionViolation {
                point: u,
                assumption: Assumption::BoundedBelowAtInfinity,
                value: v,
            });
        }
        sphere_min = sphere_min.min(v);
    }
    Ok(ValidationReport {
        samples_checked: checked,
        min_sampled_w: min_w,
        min_sampled_point: min_pt,
        sphere_min_w: sphere_min,
        sphere_radius: sample_radius,
    })
}

/// Radial lower envelope `V(rho) = min(V_-(rho), V_+(rho))` with
/// `V_±(rho) = min_nu W(a_± + rho nu)` over a fixed direction sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeTable {
    pub rho_samples: Vec<f64>,
    pub v_values: Vec<f64>,
    pub sphere_sample_count: usize,
}

impl EnvelopeTable {
    /// Piecewise-linear interpolation, clamped to the tabulated range.
    pub fn value_at(&self, rho: f64) -> f64 {
        let r = &self.rho_samples;
        let last = r.len() - 1;
        if rho <= r[0] {
            return self.v_values[0];
        }
        if rho >= r[last] {
            return self.v_values[last];
        }
        let step = r[1] - r[0];
        let k = (((rho - r[0]) / step).floor() as usize).min(last - 1);
        let t = (rho - r[k]) / step;
        (1.0 - t) * self.v_values[k] + t * self.v_values[k + 1]
    }

    /// Trapezoid quadrature of `V^{1/2}` over `[lo, hi]` with `points` nodes.
    pub fn sqrt_integral(&self, lo: f64, hi: f64, points: usize) -> f64 {
        let points = points.max(2);
        let h = (hi - lo) / (points - 1) as f64;
        let mut acc = 0.0;
        for k in 0..points {
            let wgt = if k == 0 || k == points - 1 { 0.5 } else { 1.0 };
            acc += wgt * self.value_at(lo + h * k as f64).max(0.0).sqrt();
        }
        acc * h
    }

    pub fn delta(&self) -> f64 {
        *self.rho_samples.last().unwrap()
    }
}

pub fn build_envelope(
    p: &PotentialSpec,
    rho_count: usize,
    sphere_sample_count: usize,
) -> Result<EnvelopeTable, PotentialError> {
    if rho_count < 8 {
        return Err(PotentialError::InvalidArgument("rho_count must be at least 8".into()));
    }
    let min_dirs = if p.dim() == 1 { 2 } else { 64 };
    if sphere_sample_count < min_dirs {
        return Err(PotentialError::InvalidArgument(format!(
            "sphere_sample_count must be at least {min_dirs} in dimension {}",
            p.dim()
        )));
    }
    let dirs = sampling::sphere_directions(p.dim(), sphere_sample_count);
    let delta = p.delta();
    let rho: Vec<f64> = (0..rho_count)
        .map(|k| delta * k as f64 / (rho_count - 1) as f64)
        .collect();
    let mut v = parallel::map_indexed(rho_count, |k| {
        let mut best = f64::INFINITY;
        let mut u = vec![0.0; p.dim()];
        for a in [p.a_minus(), p.a_plus()] {
            for d in &dirs {
                for j in 0..u.len() {
                    u[j] = a[j] + rho[k] * d[j];
                }
                best = best.min(p.w(&u));
            }
        }
        best
    });
    if v[0].abs() <= WELL_TOLERANCE {
        v[0] = 0.0;
    }
    for k in 1..rho_count {
        if !(v[k] > 0.0) {
            return Err(PotentialError::EnvelopeDegenerate {
                rho: rho[k],
                value: v[k],
            });
        }
    }
    Ok(EnvelopeTable {
        rho_samples: rho,
        v_values: v,
        sphere_sample_count: dirs.len(),
    })
}

/// `sqrt(2) * ∫ W^{1/2}` along the straight segment from `a_-` to `a_+`
/// (trapezoid rule). Exact minimal action for `n = 1`; for `n >= 2` it is
/// the action of the segment path and certifies the minimum only when the
/// segment is a geodesic of the degenerate metric `W |du|^2`.
pub fn modica_lower_bound(p: &PotentialSpec, quadrature_points: usize) -> f64 {
    let points = quadrature_points.max(2);
    let len = p.well_separation();
    let mut u = vec![0.0; p.dim()];
    let h = 1.0 / (points - 1) as f64;
    let mut acc = 0.0;
    for k in 0..points {
        let t = k as f64 * h;
        for j in 0..u.len() {
            u[j] = p.a_minus()[j] + t * (p.a_plus()[j] - p.a_minus()[j]);
        }
        let wgt = if k == 0 || k == points - 1 { 0.5 } else { 1.0 };
        acc += wgt * p.w(&u).max(0.0).sqrt();
    }
    std::f64::consts::SQRT_2 * acc * h * len
}
