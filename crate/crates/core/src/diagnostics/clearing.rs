use serde::{Deserialize, Serialize};

use super::DiagnosticsError;
use crate::discretization::Profile;
use crate::inhomogeneity::InhomogeneityProfile;
use crate::potential::{distance, EnvelopeTable, PotentialSpec};

/// Cap on the violating triples stored in a [`CheckReport`]; the total count
/// is always exact.
const STORED_VIOLATIONS: usize = 1000;
const SAFETY: f64 = 0.99;
/// Gauss-Legendre nodes on `[0, 1]` for the competitor ramps.
const RAMP_QUADRATURE: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClearingOutParams {
    /// Radius that the profile must not leave between two ε-close points.
    pub d: f64,
    pub epsilon: f64,
    pub c2_estimate: f64,
    /// The integral `∫_{d/2}^d V^{1/2}` that `epsilon` was derived from.
    pub checked_integral: f64,
    pub zeta: f64,
    /// Interval length `C₁ / ζ` of the mean-value argument.
    pub m: f64,
    /// Minimum pair separation `x₂ - x₁`.
    pub min_gap: f64,
}

impl ClearingOutParams {
    /// Derives `epsilon` from the envelope via [`epsilon_threshold`] and `M`
    /// from the competitor energy `c1`.
    pub fn derive(
        env: &EnvelopeTable,
        d: f64,
        c2: f64,
        c1: f64,
        zeta: f64,
    ) -> Result<Self, DiagnosticsError> {
        if !(zeta > 0.0 && c1 > 0.0) {
            return Err(DiagnosticsError::Precondition("zeta and C1 must be positive".into()));
        }
        let epsilon = epsilon_threshold(env, d, c2)?;
        Ok(ClearingOutParams {
            d,
            epsilon,
            c2_estimate: c2,
            checked_integral: sqrt_envelope_integral(env, d),
            zeta,
            m: c1 / zeta,
            min_gap: 3.0,
        })
    }

    fn validate(&self) -> Result<(), DiagnosticsError> {
        if !(self.d > 0.0 && self.epsilon > 0.0 && self.epsilon < 0.5 * self.d && self.min_gap > 0.0) {
            return Err(DiagnosticsError::Precondition(format!(
                "need 0 < epsilon < d/2 and a positive gap, got d = {}, epsilon = {}",
                self.d, self.epsilon
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub x1: f64,
    pub x2: f64,
    /// First node between `x1` and `x2` at distance `>= d` from the well.
    pub x_violate: f64,
    /// `-1` for `a_-`, `+1` for `a_+`.
    pub well: i8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    /// Node pairs with `x₂ - x₁ >= min_gap` and both ends ε-close to the
    /// same well.
    pub pairs_checked: usize,
    pub violation_count: usize,
    /// The first violating triples, at most 1000.
    pub violations: Vec<Violation>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.violation_count == 0
    }
}

/// For every pair of nodes at least `min_gap` apart whose values are both
/// within `epsilon` of the same well, checks that every node in between
/// stays strictly within `d` of that well.
pub fn clearing_out_check(
    p: &PotentialSpec,
    u: &Profile,
    params: &ClearingOutParams,
) -> Result<CheckReport, DiagnosticsError> {
    params.validate()?;
    let g = u.grid();
    let n = u.len();
    let s = g.spacing();
    let gap = (params.min_gap / s - 1e-9).ceil().max(1.0) as usize;
    let mut report = CheckReport {
        pairs_checked: 0,
        violation_count: 0,
        violations: Vec::new(),
    };
    for (tag, well) in [(-1i8, p.a_minus()), (1, p.a_plus())] {
        let dist: Vec<f64> = (0..n).map(|i| distance(u.node(i), well)).collect();
        let near: Vec<bool> = dist.iter().map(|&r| r <= params.epsilon).collect();
        // near_after[j] = number of near nodes with index >= j
        let mut near_after = vec![0usize; n + 1];
        for j in (0..n).rev() {
            near_after[j] = near_after[j + 1] + near[j] as usize;
        }
        // next_bad[i] = smallest index > i with dist >= d, or n
        let mut next_bad = vec![n; n];
        let mut upcoming = n;
        for i in (0..n).rev() {
            next_bad[i] = upcoming;
            if dist[i] >= params.d {
                upcoming = i;
            }
        }
        for i in (0..n).filter(|&i| near[i]) {
            let first_j = i + gap;
            if first_j >= n {
                break;
            }
            report.pairs_checked += near_after[first_j];
            let b = next_bad[i];
            if b >= n {
                continue;
            }
            let from = first_j.max(b + 1);
            if from >= n {
                continue;
            }
            report.violation_count += near_after[from];
            for j in (from..n).filter(|&j| near[j]) {
                if report.violations.len() >= STORED_VIOLATIONS {
                    break;
                }
                report.violations.push(Violation {
                    x1: g.x(i),
                    x2: g.x(j),
                    x_violate: g.x(b),
                    well: tag,
                });
            }
        }
    }
    Ok(report)
}

fn sqrt_envelope_integral(env: &EnvelopeTable, d: f64) -> f64 {
    env.sqrt_integral(0.5 * d, d, 2001)
}

/// `0.99 · min(d/2, (1/c2) ∫_{d/2}^d V^{1/2})` with trapezoid quadrature of
/// the tabulated envelope.
pub fn epsilon_threshold(env: &EnvelopeTable, d: f64, c2: f64) -> Result<f64, DiagnosticsError> {
    if !(d > 0.0 && d <= env.delta() * (1.0 + 1e-12)) {
        return Err(DiagnosticsError::Precondition(format!(
            "d = {d} must lie in (0, {}]",
            env.delta()
        )));
    }
    if !(c2 > 0.0) {
        return Err(DiagnosticsError::Precondition(format!("c2 = {c2} must be positive")));
    }
    let integral = sqrt_envelope_integral(env, d);
    Ok(SAFETY * (0.5 * d).min(integral / c2))
}

fn nearest_well<'a>(p: &'a PotentialSpec, v: &[f64]) -> (&'a [f64], f64) {
    let dm = distance(v, p.a_minus());
    let dp = distance(v, p.a_plus());
    if dm <= dp {
        (p.a_minus(), dm)
    } else {
        (p.a_plus(), dp)
    }
}

/// Gauss-Legendre nodes and weights on `[0, 1]`, by Newton iteration on the
/// Legendre recurrence.
fn gauss_legendre(count: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(count);
    let n = count as f64;
    for k in 0..count {
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=count {
                let j = j as f64;
                let p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            let step = p1 / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (1.0 - x), 0.5 * w));
    }
    out
}

/// Energy of the straight ramp from `from` to `to` over `[x0, x0 + 1]`.
fn ramp_energy(p: &PotentialSpec, h: &InhomogeneityProfile, from: &[f64], to: &[f64], x0: f64, rule: &[(f64, f64)]) -> f64 {
    let len2: f64 = from.iter().zip(to).map(|(a, b)| (b - a) * (b - a)).sum();
    let mut v = vec![0.0; from.len()];
    let potential: f64 = rule
        .iter()
        .map(|&(t, w)| {
            for k in 0..v.len() {
                v[k] = from[k] + t * (to[k] - from[k]);
            }
            w * h.eval(x0 + t) * p.w(&v)
        })
        .sum();
    0.5 * len2 + potential
}

/// Empirical `C₂` for the pair `(x1, x2)`: energy of the local competitor
/// that ramps linearly from `u(x1)` to the well over one unit, stays at the
/// well, and ramps back to `u(x2)` over the last unit, divided by the larger
/// endpoint distance. Returns 0 when both endpoints sit exactly at the well.
pub fn estimate_c2(
    p: &PotentialSpec,
    h: &InhomogeneityProfile,
    u: &Profile,
    x1: f64,
    x2: f64,
) -> Result<f64, DiagnosticsError> {
    let rule = gauss_legendre(RAMP_QUADRATURE);
    estimate_c2_with(p, h, u, x1, x2, &rule)
}

fn estimate_c2_with(
    p: &PotentialSpec,
    h: &InhomogeneityProfile,
    u: &Profile,
    x1: f64,
    x2: f64,
    rule: &[(f64, f64)],
) -> Result<f64, DiagnosticsError> {
    let r = u.grid().radius();
    if !(x2 - x1 >= 3.0 - 1e-12) || x1 < -r - 1e-12 || x2 > r + 1e-12 {
        return Err(DiagnosticsError::Precondition(format!(
            "need x2 - x1 >= 3 inside the domain, got [{x1}, {x2}]"
        )));
    }
    let u1 = u.interpolate(x1);
    let u2 = u.interpolate(x2);
    let (well, d1) = nearest_well(p, &u1);
    let (well2, d2) = nearest_well(p, &u2);
    let delta = p.delta();
    if well != well2 || d1 >= delta || d2 >= delta {
        return Err(DiagnosticsError::Precondition(format!(
            "endpoints must both lie within delta = {delta} of the same well"
        )));
    }
    let scale = d1.max(d2);
    if scale == 0.0 {
        return Ok(0.0);
    }
    // the ramp back is traversed from the well to u(x2) over [x2 - 1, x2]
    let energy = ramp_energy(p, h, &u1, well, x1, rule) + ramp_energy(p, h, well, &u2, x2 - 1.0, rule);
    Ok(energy / scale)
}

/// Largest [`estimate_c2`] over node pairs `(x, x + 3)` whose endpoints are
/// both within `delta` of the same well. `None` if there is no such pair.
pub fn empirical_c2(p: &PotentialSpec, h: &InhomogeneityProfile, u: &Profile) -> Option<f64> {
    let g = u.grid();
    let gap = (3.0 / g.spacing() - 1e-9).ceil() as usize;
    let rule = gauss_legendre(RAMP_QUADRATURE);
    let mut best: Option<f64> = None;
    for i in 0..u.len().saturating_sub(gap) {
        let (x1, x2) = (g.x(i), g.x(i + gap));
        if let Ok(c) = estimate_c2_with(p, h, u, x1, x2, &rule) {
            best = Some(best.map_or(c, |b: f64| b.max(c)));
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanValuePoint {
    pub x: f64,
    pub w: f64,
    pub interval: (f64, f64),
    /// Mean of `½|u'|² + h W(u)` over the interval.
    pub average_density: f64,
    /// The mean-value argument applies: `average_density / min h <= ζ`.
    pub certified: bool,
    pub holds: bool,
}

/// In each interval `[2kM, (2k+1)M]` and its mirror image inside the domain,
/// the node minimizing `W(u)`. Wherever the interval's mean energy density
/// over `min h` is at most `zeta`, that minimum is necessarily `<= zeta`.
pub fn mean_value_points(
    p: &PotentialSpec,
    h: &InhomogeneityProfile,
    u: &Profile,
    zeta: f64,
    m: f64,
) -> Result<Vec<MeanValuePoint>, DiagnosticsError> {
    if !(m >= 3.0) || !(zeta > 0.0) {
        return Err(DiagnosticsError::Precondition(format!("need M >= 3 and zeta > 0, got M = {m}, zeta = {zeta}")));
    }
    let g = u.grid();
    let r = g.radius();
    let s = g.spacing();
    let slack = 1e-9 * s;
    let mut intervals = Vec::new();
    let mut k = 0;
    while ((2 * k + 1) as f64) * m <= r + slack {
        let (lo, hi) = (2.0 * k as f64 * m, (2 * k + 1) as f64 * m);
        intervals.push((-hi, -lo + 0.0));
        intervals.push((lo, hi));
        k += 1;
    }
    intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = Vec::new();
    for (lo, hi) in intervals {
        let nodes: Vec<usize> = (0..u.len())
            .filter(|&i| g.x(i) >= lo - slack && g.x(i) <= hi + slack)
            .collect();
        if nodes.len() < 2 {
            continue;
        }
        let (&best, w) = nodes
            .iter()
            .map(|i| (i, p.w(u.node(*i))))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty");
        let mut energy = 0.0;
        let mut h_min = f64::INFINITY;
        for pair in nodes.windows(2) {
            let (i, j) = (pair[0], pair[1]);
            let d2: f64 = u.node(i).iter().zip(u.node(j)).map(|(a, b)| (b - a) * (b - a)).sum();
            let (hi_, hj) = (h.eval(g.x(i)), h.eval(g.x(j)));
            energy += 0.5 * d2 / s + 0.5 * s * (hi_ * p.w(u.node(i)) + hj * p.w(u.node(j)));
            h_min = h_min.min(hi_).min(hj);
        }
        let length = g.x(*nodes.last().unwrap()) - g.x(nodes[0]);
        let average_density = energy / length;
        let certified = h_min > 0.0 && average_density / h_min <= zeta;
        out.push(MeanValuePoint {
            x: g.x(best),
            w,
            interval: (lo, hi),
            average_density,
            certified,
            holds: w <= zeta,
        });
    }
    Ok(out)
}
