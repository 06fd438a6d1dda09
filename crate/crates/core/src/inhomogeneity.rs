//! The spatial weight `h(x)` multiplying `∇W(u)`.
//!
//! Four regimes are supported: constant (`h ≡ 1`), periodic and positive,
//! asymptotically constant from below, and diverging at both ends. Built-in
//! shapes have closed-form derivatives, which the weighted energy identity
//! diagnostic uses.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error("invalid profile parameters: {0}")]
    Param(String),
    #[error("profile invariant violated at x = {x}: {reason}")]
    InvariantViolation { x: f64, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProfileKind {
    Constant,
    Periodic,
    AsymptoticallyConstant,
    Diverging,
}

/// Parameters of the built-in shapes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ProfileParams {
    /// `h ≡ 1`.
    Constant,
    /// `h(x) = base + amp * sin(2πx / period)`.
    Periodic { period: f64, base: f64, amp: f64 },
    /// `h(x) = h_inf - dip * exp(-(x / width)^2)`.
    Asymptotic { h_inf: f64, dip: f64, width: f64 },
    /// `h(x) = c0 + |x|^alpha`.
    Diverging { alpha: f64, c0: f64 },
}

impl ProfileParams {
    pub fn kind(&self) -> ProfileKind {
        match self {
            ProfileParams::Constant => ProfileKind::Constant,
            ProfileParams::Periodic { .. } => ProfileKind::Periodic,
            ProfileParams::Asymptotic { .. } => ProfileKind::AsymptoticallyConstant,
            ProfileParams::Diverging { .. } => ProfileKind::Diverging,
        }
    }
}

impl fmt::Display for ProfileParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ProfileParams::Constant => write!(f, "constant"),
            ProfileParams::Periodic { period, base, amp } => {
                write!(f, "periodic:T={period:?},base={base:?},amp={amp:?}")
            }
            ProfileParams::Asymptotic { h_inf, dip, width } => {
                write!(f, "asymptotic:hinf={h_inf:?},dip={dip:?},width={width:?}")
            }
            ProfileParams::Diverging { alpha, c0 } => write!(f, "diverging:alpha={alpha:?},c0={c0:?}"),
        }
    }
}

impl FromStr for ProfileParams {
    type Err = ProfileError;

    /// Parses `constant`, `periodic:T=1,base=1.5,amp=0.5`,
    /// `asymptotic:hinf=2,dip=1,width=1` and `diverging:alpha=1,c0=0`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (head, rest) = match s.split_once(':') {
            Some((h, r)) => (h.trim(), r.trim()),
            None => (s, ""),
        };
        let mut pairs: Vec<(String, f64)> = Vec::new();
        for item in rest.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| ProfileError::Param(format!("expected key=value, found `{item}`")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| ProfileError::Param(format!("`{}` is not a number", v.trim())))?;
            pairs.push((k.trim().to_string(), v));
        }
        let allowed: &[&str] = match head {
            "constant" => &[],
            "periodic" => &["T", "base", "amp"],
            "asymptotic" => &["hinf", "dip", "width"],
            "diverging" => &["alpha", "c0"],
            other => return Err(ProfileError::Param(format!("unknown profile kind `{other}`"))),
        };
        if let Some((k, _)) = pairs.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
            return Err(ProfileError::Param(format!("unknown key `{k}` for `{head}` profile")));
        }
        let get = |k: &str| pairs.iter().find(|(n, _)| n == k).map(|(_, v)| *v);
        let need = |k: &str| get(k).ok_or_else(|| ProfileError::Param(format!("`{head}` profile requires `{k}`")));
        Ok(match head {
            "constant" => ProfileParams::Constant,
            "periodic" => ProfileParams::Periodic {
                period: need("T")?,
                base: get("base").unwrap_or(1.5),
                amp: get("amp").unwrap_or(0.5),
            },
            "asymptotic" => ProfileParams::Asymptotic {
                h_inf: need("hinf")?,
                dip: get("dip").unwrap_or(1.0),
                width: get("width").unwrap_or(1.0),
            },
            _ => ProfileParams::Diverging {
                alpha: need("alpha")?,
                c0: get("c0").unwrap_or(0.0),
            },
        })
    }
}

pub type WeightFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Shape {
    Builtin(ProfileParams),
    Custom { f: WeightFn, df: Option<WeightFn> },
}

#[derive(Clone)]
pub struct InhomogeneityProfile {
    kind: ProfileKind,
    shape: Shape,
    period_t: Option<f64>,
    h_inf: Option<f64>,
    alpha: Option<f64>,
    lower_bound: f64,
    even: bool,
}

impl fmt::Debug for InhomogeneityProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut d = f.debug_struct("InhomogeneityProfile");
        d.field("kind", &self.kind);
        if let Shape::Builtin(p) = &self.shape {
            d.field("params", p);
        }
        d.field("period_t", &self.period_t)
            .field("h_inf", &self.h_inf)
            .field("alpha", &self.alpha)
            .field("lower_bound", &self.lower_bound)
            .finish()
    }
}

pub fn make_profile(params: ProfileParams) -> Result<InhomogeneityProfile, ProfileError> {
    let bad = |m: &str| Err(ProfileError::Param(m.to_string()));
    let finite = |v: f64| v.is_finite();
    let mut out = InhomogeneityProfile {
        kind: params.kind(),
        shape: Shape::Builtin(params),
        period_t: None,
        h_inf: None,
        alpha: None,
        lower_bound: 1.0,
        even: true,
    };
    match params {
        ProfileParams::Constant => {}
        ProfileParams::Periodic { period, base, amp } => {
            if !(finite(period) && period > 0.0) {
                return bad("period T must be positive");
            }
            if !(finite(base) && finite(amp)) || base - amp.abs() <= 0.0 {
                return bad("periodic profile must be positive: need base > |amp|");
            }
            out.period_t = Some(period);
            out.lower_bound = base - amp.abs();
            out.even = amp == 0.0;
        }
        ProfileParams::Asymptotic { h_inf, dip, width } => {
            if !(finite(h_inf) && h_inf > 0.0) {
                return bad("h_inf must be positive");
            }
            if !(finite(dip) && dip >= 0.0) {
                return bad("dip must be nonnegative so that h <= h_inf");
            }
            if dip >= h_inf {
                return bad("dip must be below h_inf so that h stays positive");
            }
            if !(finite(width) && width > 0.0) {
                return bad("width must be positive");
            }
            out.h_inf = Some(h_inf);
            out.lower_bound = h_inf - dip;
        }
        ProfileParams::Diverging { alpha, c0 } => {
            if !(finite(alpha) && alpha > 0.0) {
                return bad("alpha must be positive");
            }
            if !(finite(c0) && c0 >= 0.0) {
                return bad("c0 must be nonnegative");
            }
            out.alpha = Some(alpha);
            out.lower_bound = c0;
        }
    }
    Ok(out)
}

/// Regime metadata for a custom weight.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ProfileMeta {
    pub period_t: Option<f64>,
    pub h_inf: Option<f64>,
    pub alpha: Option<f64>,
    pub lower_bound: f64,
    pub even: bool,
}

impl InhomogeneityProfile {
    /// Arbitrary weight with declared regime metadata. Nothing is checked
    /// here; run [`verify_profile`] to test the declaration.
    pub fn custom(kind: ProfileKind, meta: ProfileMeta, f: WeightFn, df: Option<WeightFn>) -> Self {
        InhomogeneityProfile {
            kind,
            shape: Shape::Custom { f, df },
            period_t: meta.period_t,
            h_inf: meta.h_inf,
            alpha: meta.alpha,
            lower_bound: meta.lower_bound,
            even: meta.even,
        }
    }

    pub fn constant() -> Self {
        make_profile(ProfileParams::Constant).unwrap()
    }

    pub fn kind(&self) -> ProfileKind {
        self.kind
    }
    pub fn params(&self) -> Option<ProfileParams> {
        match &self.shape {
            Shape::Builtin(p) => Some(*p),
            Shape::Custom { .. } => None,
        }
    }
    pub fn period_t(&self) -> Option<f64> {
        self.period_t
    }
    pub fn h_inf(&self) -> Option<f64> {
        self.h_inf
    }
    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }
    pub fn lower_bound(&self) -> f64 {
        self.lower_bound
    }
    /// Whether `h(-x) = h(x)` by construction.
    pub fn is_even(&self) -> bool {
        self.even
    }
    pub fn is_constant(&self) -> bool {
        self.kind == ProfileKind::Constant
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match &self.shape {
            Shape::Builtin(p) => match *p {
                ProfileParams::Constant => 1.0,
                ProfileParams::Periodic { period, base, amp } => base + amp * (2.0 * PI * x / period).sin(),
                ProfileParams::Asymptotic { h_inf, dip, width } => {
                    let s = x / width;
                    h_inf - dip * (-s * s).exp()
                }
                ProfileParams::Diverging { alpha, c0 } => c0 + x.abs().powf(alpha),
            },
            Shape::Custom { f, .. } => f(x),
        }
    }

    /// `h'(x)`; closed form for built-in shapes, otherwise a central
    /// difference with step `1e-6 (1 + |x|)`. For `|x|^alpha` at `x = 0` the
    /// symmetric value 0 is returned.
    pub fn derivative(&self, x: f64) -> f64 {
        match &self.shape {
            Shape::Builtin(p) => match *p {
                ProfileParams::Constant => 0.0,
                ProfileParams::Periodic { period, amp, .. } => {
                    amp * 2.0 * PI / period * (2.0 * PI * x / period).cos()
                }
                ProfileParams::Asymptotic { dip, width, .. } => {
                    let s = x / width;
                    dip * (-s * s).exp() * 2.0 * x / (width * width)
                }
                ProfileParams::Diverging { alpha, .. } => {
                    if x == 0.0 {
                        0.0
                    } else {
                        alpha * x.abs().powf(alpha - 1.0) * x.signum()
                    }
                }
            },
            Shape::Custom { df: Some(df), .. } => df(x),
            Shape::Custom { f, df: None } => {
                let step = 1e-6 * (1.0 + x.abs());
                (f(x + step) - f(x - step)) / (2.0 * step)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileReport {
    pub samples: usize,
    pub min_value: f64,
    pub max_value: f64,
    /// `min(h(-R), h(R))`.
    pub tail_min: f64,
    /// Asymptotic profiles only: whether `h < h_inf` somewhere.
    pub dips_below_h_inf: Option<bool>,
    pub warnings: Vec<String>,
}

const VERIFY_TOL: f64 = 1e-12;

/// Samples `h` on a dense grid of `[-domain_radius, domain_radius]` and
/// checks the invariants of the declared regime.
pub fn verify_profile(p: &InhomogeneityProfile, domain_radius: f64) -> Result<ProfileReport, ProfileError> {
    if !(domain_radius > 0.0) {
        return Err(ProfileError::Param("domain radius must be positive".into()));
    }
    let count = ((2.0 * domain_radius / 0.005).ceil() as usize + 1).clamp(2001, 1_000_001);
    let step = 2.0 * domain_radius / (count - 1) as f64;
    let xs = (0..count).map(|i| -domain_radius + step * i as f64);
    let violation = |x: f64, reason: String| Err(ProfileError::InvariantViolation { x, reason });

    let mut min_v = f64::INFINITY;
    let mut max_v = f64::NEG_INFINITY;
    let mut dips = false;
    for x in xs.clone() {
        let v = p.eval(x);
        if !v.is_finite() {
            return violation(x, format!("non-finite value {v}"));
        }
        if v < p.lower_bound() - VERIFY_TOL {
            return violation(x, format!("value {v} below declared lower bound {}", p.lower_bound()));
        }
        min_v = min_v.min(v);
        max_v = max_v.max(v);
        match p.kind() {
            ProfileKind::Constant => {
                if (v - 1.0).abs() > VERIFY_TOL {
                    return violation(x, format!("constant profile evaluates to {v}"));
                }
            }
            ProfileKind::Periodic => {
                if v <= 0.0 {
                    return violation(x, format!("periodic profile not positive ({v})"));
                }
            }
            ProfileKind::AsymptoticallyConstant => {
                let h_inf = p.h_inf().unwrap_or(f64::NAN);
                if v > h_inf + VERIFY_TOL || v <= 0.0 {
                    return violation(x, format!("value {v} outside (0, h_inf = {h_inf}]"));
                }
                if v < h_inf - VERIFY_TOL {
                    dips = true;
                }
            }
            ProfileKind::Diverging => {
                if v < 0.0 {
                    return violation(x, format!("diverging profile negative ({v})"));
                }
            }
        }
    }

    let mut warnings = Vec::new();
    let tail_min = p.eval(-domain_radius).min(p.eval(domain_radius));
    match p.kind() {
        ProfileKind::Periodic => {
            let period = match p.period_t() {
                Some(t) if t > 0.0 => t,
                _ => return Err(ProfileError::Param("periodic profile without positive period".into())),
            };
            for x in xs.clone().filter(|x| x + period <= domain_radius) {
                let (a, b) = (p.eval(x), p.eval(x + period));
                if (a - b).abs() > VERIFY_TOL * (1.0 + a.abs()) {
                    return violation(x, format!("h(x) = {a} but h(x + T) = {b}"));
                }
            }
        }
        ProfileKind::AsymptoticallyConstant => {
            let h_inf = p.h_inf().unwrap_or(f64::NAN);
            for x in [-domain_radius, domain_radius] {
                if (p.eval(x) - h_inf).abs() > 1e-3 {
                    warnings.push(format!("h({x}) = {} is not within 1e-3 of h_inf = {h_inf}", p.eval(x)));
                }
            }
            if !dips {
                warnings.push("h never drops below h_inf; the energy gap degenerates to zero".into());
            }
        }
        ProfileKind::Diverging => {
            let need = 10.0 * p.eval(0.0) + 1.0;
            if tail_min < need {
                warnings.push(format!(
                    "h(±R) = {tail_min} is below 10 h(0) + 1 = {need}; truncation may not capture the divergence"
                ));
            }
        }
        ProfileKind::Constant => {}
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(ProfileReport {
        samples: count,
        min_value: min_v,
        max_value: max_v,
        tail_min,
        dips_below_h_inf: (p.kind() == ProfileKind::AsymptoticallyConstant).then_some(dips),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_profiles_are_valid() {
        let per = make_profile(ProfileParams::Periodic { period: 1.0, base: 1.5, amp: 0.5 }).unwrap();
        assert_eq!(per.lower_bound(), 1.0);
        let r = verify_profile(&per, 10.0).unwrap();
        assert!(r.min_value >= 1.0 - 1e-12);

        let asy = make_profile(ProfileParams::Asymptotic { h_inf: 2.0, dip: 1.0, width: 1.0 }).unwrap();
        let r = verify_profile(&asy, 10.0).unwrap();
        assert_eq!(r.dips_below_h_inf, Some(true));
        assert!(r.warnings.is_empty());
        assert_eq!(asy.eval(0.0), 1.0);

        let div = make_profile(ProfileParams::Diverging { alpha: 1.0, c0: 0.0 }).unwrap();
        assert_eq!(div.eval(0.0), 0.0);
        assert!(verify_profile(&div, 10.0).is_ok());
    }

    #[test]
    fn constant_profile_passes() {
        let r = verify_profile(&InhomogeneityProfile::constant(), 10.0).unwrap();
        assert_eq!(r.min_value, 1.0);
        assert_eq!(r.max_value, 1.0);
    }

    #[test]
    fn wrong_period_is_detected() {
        let f: WeightFn = Arc::new(|x| 1.5 + 0.5 * (PI * x).sin());
        let meta = ProfileMeta { period_t: Some(1.0), lower_bound: 1.0, ..Default::default() };
        let p = InhomogeneityProfile::custom(ProfileKind::Periodic, meta, f, None);
        assert!(matches!(verify_profile(&p, 5.0), Err(ProfileError::InvariantViolation { .. })));
    }

    #[test]
    fn diverging_sqrt_tail() {
        let p = make_profile(ProfileParams::Diverging { alpha: 0.5, c0: 0.0 }).unwrap();
        let r = verify_profile(&p, 100.0).unwrap();
        assert_eq!(r.tail_min, 10.0);
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn weak_divergence_warns() {
        let p = make_profile(ProfileParams::Diverging { alpha: 0.5, c0: 1.0 }).unwrap();
        let r = verify_profile(&p, 4.0).unwrap();
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn bad_params_rejected() {
        for params in [
            ProfileParams::Periodic { period: 0.0, base: 1.5, amp: 0.5 },
            ProfileParams::Periodic { period: 1.0, base: 0.5, amp: 0.5 },
            ProfileParams::Asymptotic { h_inf: 0.0, dip: 0.0, width: 1.0 },
            ProfileParams::Asymptotic { h_inf: 2.0, dip: -1.0, width: 1.0 },
            ProfileParams::Diverging { alpha: 0.0, c0: 0.0 },
        ] {
            assert!(matches!(make_profile(params), Err(ProfileError::Param(_))), "{params:?}");
        }
    }

    #[test]
    fn parse_round_trip() {
        for s in [
            "constant",
            "periodic:T=1,base=1.5,amp=0.5",
            "asymptotic:hinf=2,dip=1,width=1",
            "diverging:alpha=1,c0=0",
        ] {
            let p: ProfileParams = s.parse().unwrap();
            let again: ProfileParams = p.to_string().parse().unwrap();
            assert_eq!(p, again);
        }
        assert!("periodic:base=1".parse::<ProfileParams>().is_err());
        assert!("periodic:T=1,bogus=2".parse::<ProfileParams>().is_err());
        assert!("wavy".parse::<ProfileParams>().is_err());
    }

    #[test]
    fn derivatives_match_differences() {
        let shapes = [
            ProfileParams::Periodic { period: 1.0, base: 1.5, amp: 0.5 },
            ProfileParams::Asymptotic { h_inf: 2.0, dip: 1.0, width: 1.3 },
            ProfileParams::Diverging { alpha: 1.7, c0: 0.2 },
        ];
        for params in shapes {
            let p = make_profile(params).unwrap();
            for k in 0..40 {
                let x = -3.9 + 0.2 * k as f64;
                let step = 1e-6;
                let fd = (p.eval(x + step) - p.eval(x - step)) / (2.0 * step);
                assert!((fd - p.derivative(x)).abs() < 1e-6 * (1.0 + fd.abs()), "{params:?} at {x}");
            }
        }
    }
}
