//! Shooting solver for scalar problems `u'' = h(x) W'(u)`, independent of the
//! variational machinery: fixed-step RK4 from the midpoint value, bisection
//! on the initial slope, cubic Hermite resampling onto the grid.

use super::DiagnosticsError;
use crate::discretization::{DiscreteAction, Grid, Profile};
use crate::inhomogeneity::InhomogeneityProfile;
use crate::potential::PotentialSpec;

const MAX_BISECTIONS: usize = 200;
/// The two bracketing trajectories are averaged while they agree this well;
/// past that point the half-solution is replaced by the well value.
const SEPARATION: f64 = 1e-8;
const SCAN_POINTS: usize = 25;
const PHASE_BISECTIONS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Overshoot,
    Turnback,
    Unresolved,
}

/// RK4 samples along `x0 + dir * k * step`.
struct Half {
    x0: f64,
    dir: f64,
    step: f64,
    u: Vec<f64>,
    v: Vec<f64>,
    target: f64,
}

impl Half {
    /// Value and slope at `x`, which must lie on this half's side of `x0`.
    fn eval(&self, x: f64) -> (f64, f64) {
        let t = (x - self.x0) * self.dir / self.step;
        let last = self.u.len() - 1;
        if t >= last as f64 {
            return (self.target, 0.0);
        }
        let t = t.max(0.0);
        let k = (t.floor() as usize).min(last.saturating_sub(1));
        if last == 0 {
            return (self.u[0], self.v[0]);
        }
        let f = t - k as f64;
        // Hermite in the local coordinate, slopes converted to d/dt
        let (y0, y1) = (self.u[k], self.u[k + 1]);
        let (m0, m1) = (self.v[k] * self.dir * self.step, self.v[k + 1] * self.dir * self.step);
        let f2 = f * f;
        let f3 = f2 * f;
        let u = (2.0 * f3 - 3.0 * f2 + 1.0) * y0 + (f3 - 2.0 * f2 + f) * m0 + (-2.0 * f3 + 3.0 * f2) * y1 + (f3 - f2) * m1;
        let dudt = (6.0 * f2 - 6.0 * f) * y0 + (3.0 * f2 - 4.0 * f + 1.0) * m0 + (-6.0 * f2 + 6.0 * f) * y1 + (3.0 * f2 - 2.0 * f) * m1;
        (u, dudt / (self.dir * self.step))
    }
}

struct Shooter<'a> {
    p: &'a PotentialSpec,
    h: &'a InhomogeneityProfile,
    step: f64,
    radius: f64,
    mid: f64,
}

impl Shooter<'_> {
    fn accel(&self, x: f64, u: f64) -> f64 {
        let mut g = [0.0];
        self.p.grad_w(&[u], &mut g);
        self.h.eval(x) * g[0]
    }

    /// Integrates from `(x0, mid)` with slope magnitude `q` toward `target`
    /// in direction `dir` until it overshoots the target, turns back, or
    /// leaves the domain.
    fn integrate(&self, x0: f64, dir: f64, target: f64, q: f64) -> (Outcome, Vec<f64>, Vec<f64>) {
        let sigma = (target - self.mid).signum();
        let mut u = self.mid;
        let mut v = sigma * dir * q;
        let mut us = vec![u];
        let mut vs = vec![v];
        if q <= 0.0 {
            return (Outcome::Turnback, us, vs);
        }
        let hstep = dir * self.step;
        let steps = ((self.radius - dir * x0) / self.step).ceil() as usize;
        let mut x = x0;
        for k in 0..steps {
            let k1u = v;
            let k1v = self.accel(x, u);
            let k2u = v + 0.5 * hstep * k1v;
            let k2v = self.accel(x + 0.5 * hstep, u + 0.5 * hstep * k1u);
            let k3u = v + 0.5 * hstep * k2v;
            let k3v = self.accel(x + 0.5 * hstep, u + 0.5 * hstep * k2u);
            let k4u = v + hstep * k3v;
            let k4v = self.accel(x + hstep, u + hstep * k3u);
            u += hstep / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
            v += hstep / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
            x = x0 + (k + 1) as f64 * hstep;
            us.push(u);
            vs.push(v);
            if !u.is_finite() || sigma * (u - target) > 0.0 {
                return (Outcome::Overshoot, us, vs);
            }
            if sigma * dir * v <= 0.0 {
                return (Outcome::Turnback, us, vs);
            }
        }
        (Outcome::Unresolved, us, vs)
    }

    /// Bisects on the slope magnitude. Returns the separatrix slope and the
    /// half-solution built from the final bracket.
    fn shoot(&self, x0: f64, dir: f64, target: f64) -> Result<(f64, Half), DiagnosticsError> {
        let half = |u: Vec<f64>, v: Vec<f64>| Half { x0, dir, step: self.step, u, v, target };
        let mut hi = (2.0 * self.h.eval(x0).abs() * self.p.w(&[self.mid])).sqrt() + 1.0;
        let mut hi_run = None;
        for _ in 0..64 {
            match self.integrate(x0, dir, target, hi) {
                (Outcome::Overshoot, u, v) => {
                    hi_run = Some((u, v));
                    break;
                }
                (Outcome::Unresolved, u, v) => return Ok((hi, half(u, v))),
                (Outcome::Turnback, ..) => hi *= 2.0,
            }
        }
        let (mut hu, mut hv) = hi_run.ok_or_else(|| {
            DiagnosticsError::ShootingFailure(format!("no overshooting slope from x0 = {x0}"))
        })?;
        let mut lo = 0.0;
        let (mut lu, mut lv) = (vec![self.mid], vec![0.0]);
        for _ in 0..MAX_BISECTIONS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            match self.integrate(x0, dir, target, mid) {
                (Outcome::Overshoot, u, v) => {
                    hi = mid;
                    hu = u;
                    hv = v;
                }
                (Outcome::Turnback, u, v) => {
                    lo = mid;
                    lu = u;
                    lv = v;
                }
                (Outcome::Unresolved, u, v) => return Ok((mid, half(u, v))),
            }
            if (hu.last().unwrap() - target).abs() <= 1e-10 && (lu.last().unwrap() - target).abs() <= 1e-10 {
                break;
            }
        }
        if lo == 0.0 {
            return Err(DiagnosticsError::ShootingFailure(format!(
                "every positive slope overshoots from x0 = {x0}"
            )));
        }
        let len = lu.len().min(hu.len());
        let mut u = Vec::with_capacity(len);
        let mut v = Vec::with_capacity(len);
        for k in 0..len {
            if (lu[k] - hu[k]).abs() > SEPARATION {
                break;
            }
            u.push(0.5 * (lu[k] + hu[k]));
            v.push(0.5 * (lv[k] + hv[k]));
        }
        Ok((0.5 * (lo + hi), half(u, v)))
    }

    fn assemble(&self, grid: &Grid, x0: f64, fwd: &Half, bwd: &Half) -> Profile {
        Profile::from_fn(grid.clone(), 1, |x| {
            let (u, _) = if x >= x0 { fwd.eval(x) } else { bwd.eval(x) };
            vec![u]
        })
    }
}

fn scalar_values(p: &PotentialSpec) -> Result<(f64, f64), DiagnosticsError> {
    if p.dim() != 1 {
        return Err(DiagnosticsError::Precondition(format!(
            "shooting needs a scalar potential, got dimension {}",
            p.dim()
        )));
    }
    Ok((p.a_minus()[0], p.a_plus()[0]))
}

fn symmetric_about_mid(p: &PotentialSpec, mid: f64, span: f64) -> bool {
    (1..=64).all(|k| {
        let t = span * k as f64 / 64.0;
        let (a, b) = (p.w(&[mid + t]), p.w(&[mid - t]));
        (a - b).abs() <= 1e-12 * (1.0 + a.abs())
    })
}

/// Shooting solution sampled on `grid`. Constant `h` is centred at `x = 0`;
/// see [`shooting_oracle_scalar_near`].
pub fn shooting_oracle_scalar(
    p: &PotentialSpec,
    h: &InhomogeneityProfile,
    grid: &Grid,
) -> Result<Profile, DiagnosticsError> {
    shooting_oracle_scalar_near(p, h, grid, 0.0)
}

/// Shooting solution sampled on `grid` with RK4 step `spacing / 4`.
///
/// - constant `h`: independent forward and backward shots from the midpoint
///   value placed at `hint`;
/// - even `h` and `W` symmetric about the midpoint: odd solution, forward
///   shot from `x = 0` and reflection;
/// - otherwise: the matching point `x0` where forward and backward
///   separatrix slopes agree, searched within half a period (or one unit) of
///   `hint`; the lowest-energy match wins.
pub fn shooting_oracle_scalar_near(
    p: &PotentialSpec,
    h: &InhomogeneityProfile,
    grid: &Grid,
    hint: f64,
) -> Result<Profile, DiagnosticsError> {
    let (a_minus, a_plus) = scalar_values(p)?;
    let mid = 0.5 * (a_minus + a_plus);
    let sh = Shooter {
        p,
        h,
        step: grid.spacing() / 4.0,
        radius: grid.radius(),
        mid,
    };
    if h.is_constant() {
        let (_, fwd) = sh.shoot(hint, 1.0, a_plus)?;
        let (_, bwd) = sh.shoot(hint, -1.0, a_minus)?;
        return Ok(sh.assemble(grid, hint, &fwd, &bwd));
    }
    let span = 2.0 * (a_plus - a_minus).abs();
    if h.is_even() && symmetric_about_mid(p, mid, span) {
        let (_, fwd) = sh.shoot(0.0, 1.0, a_plus)?;
        return Ok(Profile::from_fn(grid.clone(), 1, |x| {
            if x >= 0.0 {
                vec![fwd.eval(x).0]
            } else {
                vec![2.0 * mid - fwd.eval(-x).0]
            }
        }));
    }
    let half_window = 0.5 * h.period_t().unwrap_or(2.0);
    let mismatch = |x0: f64| -> Result<f64, DiagnosticsError> {
        let (qf, _) = sh.shoot(x0, 1.0, a_plus)?;
        let (qb, _) = sh.shoot(x0, -1.0, a_minus)?;
        Ok(qf - qb)
    };
    let xs: Vec<f64> = (0..SCAN_POINTS)
        .map(|k| hint - half_window + 2.0 * half_window * k as f64 / (SCAN_POINTS - 1) as f64)
        .collect();
    let fs = xs.iter().map(|&x| mismatch(x)).collect::<Result<Vec<_>, _>>()?;
    let action = DiscreteAction::new(p, h, grid);
    let mut best: Option<(f64, Profile)> = None;
    for k in 0..SCAN_POINTS - 1 {
        if fs[k] == 0.0 || fs[k].signum() != fs[k + 1].signum() {
            let (mut lo, mut hi, flo) = (xs[k], xs[k + 1], fs[k]);
            if flo != 0.0 {
                for _ in 0..PHASE_BISECTIONS {
                    let m = 0.5 * (lo + hi);
                    if mismatch(m)?.signum() == flo.signum() {
                        lo = m;
                    } else {
                        hi = m;
                    }
                }
            }
            let x0 = 0.5 * (lo + hi);
            let (_, fwd) = sh.shoot(x0, 1.0, a_plus)?;
            let (_, bwd) = sh.shoot(x0, -1.0, a_minus)?;
            let u = sh.assemble(grid, x0, &fwd, &bwd);
            let e = action.energy(&u);
            if best.as_ref().is_none_or(|(b, _)| e < *b) {
                best = Some((e, u));
            }
        }
    }
    best.map(|(_, u)| u).ok_or_else(|| {
        DiagnosticsError::ShootingFailure(format!("no matching point within {half_window} of x = {hint}"))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inhomogeneity::{make_profile, ProfileParams};
    use std::f64::consts::SQRT_2;

    #[test]
    fn homogeneous_matches_tanh() {
        let p = PotentialSpec::quartic();
        let h = InhomogeneityProfile::constant();
        let g = Grid::with_spacing(20.0, 0.01).unwrap();
        let u = shooting_oracle_scalar(&p, &h, &g).unwrap();
        let exact = Profile::from_fn(g, 1, |x| vec![(x / SQRT_2).tanh()]);
        assert!(u.sup_distance(&exact) <= 1e-6, "{}", u.sup_distance(&exact));
    }

    #[test]
    fn separatrix_slope_from_first_integral() {
        let p = PotentialSpec::quartic();
        let h = InhomogeneityProfile::constant();
        let sh = Shooter { p: &p, h: &h, step: 0.0025, radius: 20.0, mid: 0.0 };
        let (q, _) = sh.shoot(0.0, 1.0, 1.0).unwrap();
        assert!((q - 1.0 / SQRT_2).abs() < 1e-9, "{q}");
    }

    #[test]
    fn diverging_profile_is_odd_and_increasing() {
        let p = PotentialSpec::quartic();
        let h = make_profile(ProfileParams::Diverging { alpha: 1.0, c0: 0.0 }).unwrap();
        let g = Grid::with_spacing(10.0, 0.01).unwrap();
        let u = shooting_oracle_scalar(&p, &h, &g).unwrap();
        let c = u.component(0);
        assert!(c.windows(2).all(|w| w[1] >= w[0]));
        let n = c.len();
        assert!((0..n).all(|i| (c[i] + c[n - 1 - i]).abs() < 1e-12));
        assert!((c[n - 1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn vector_potential_rejected() {
        let p = PotentialSpec::product(vec![-1.0, 0.0], vec![1.0, 0.0]).unwrap();
        let g = Grid::with_spacing(5.0, 0.1).unwrap();
        assert!(matches!(
            shooting_oracle_scalar(&p, &InhomogeneityProfile::constant(), &g),
            Err(DiagnosticsError::Precondition(_))
        ));
    }
}
