//! Run configuration: TOML sections `[potential]`, `[inhomogeneity]`,
//! `[solver]`, `[output]` and optionally `[diagnostics]`.

use std::ops::Range;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use toml::Spanned;

use crate::inhomogeneity::{make_profile, InhomogeneityProfile, ProfileParams};
use crate::potential::{Monomial, PotentialError, PotentialSpec};
use crate::solver::{SolveConfig, StepRule};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("config line {line}: unknown key: {message}")]
    UnknownKey { line: usize, message: String },
    #[error("bad override `{0}`: expected section.key=value")]
    Override(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialChoice {
    Quartic,
    Product { a_minus: Vec<f64>, a_plus: Vec<f64> },
    Polynomial { terms: Vec<Monomial>, a_minus: Vec<f64>, a_plus: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialConfig {
    pub choice: PotentialChoice,
    /// Tube radius; the constructor's default when absent.
    pub delta: Option<f64>,
}

impl PotentialConfig {
    pub fn build(&self) -> Result<PotentialSpec, PotentialError> {
        let p = match &self.choice {
            PotentialChoice::Quartic => PotentialSpec::quartic(),
            PotentialChoice::Product { a_minus, a_plus } => PotentialSpec::product(a_minus.clone(), a_plus.clone())?,
            PotentialChoice::Polynomial { terms, a_minus, a_plus } => {
                PotentialSpec::polynomial(terms.clone(), a_minus.clone(), a_plus.clone())?
            }
        };
        match self.delta {
            Some(d) => p.with_delta(d),
            None => Ok(p),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputPaths {
    pub profile_csv: PathBuf,
    pub report_json: PathBuf,
    pub plotdata: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticOptions {
    pub first_integral: bool,
    pub equipartition: bool,
    pub energy_identity: bool,
    pub modica: bool,
    pub clearing_out: bool,
    pub mean_value: bool,
    pub oracle: bool,
    pub compare_asymptotic: bool,
    pub zeta: f64,
}

impl Default for DiagnosticOptions {
    fn default() -> Self {
        DiagnosticOptions {
            first_integral: true,
            equipartition: true,
            energy_identity: true,
            modica: true,
            clearing_out: true,
            mean_value: true,
            oracle: false,
            compare_asymptotic: false,
            zeta: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub potential: PotentialConfig,
    pub inhomogeneity: ProfileParams,
    pub solver: SolveConfig,
    pub output: OutputPaths,
    pub diagnostics: DiagnosticOptions,
    /// Single-threaded evaluation throughout.
    pub deterministic: bool,
}

impl RunConfig {
    pub fn profile(&self) -> Result<InhomogeneityProfile, crate::inhomogeneity::ProfileError> {
        make_profile(self.inhomogeneity)
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    potential: Option<Spanned<RawPotential>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    inhomogeneity: Option<Spanned<RawInhomogeneity>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    solver: Option<Spanned<RawSolver>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    output: Option<RawOutput>,
    #[serde(skip_serializing_if = "Option::is_none")]
    diagnostics: Option<Spanned<RawDiagnostics>>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPotential {
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    a_minus: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    a_plus: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    terms: Option<Vec<RawMonomial>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMonomial {
    coef: f64,
    exponents: Vec<u32>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInhomogeneity {
    #[serde(skip_serializing_if = "Option::is_none")]
    h: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    kind: Option<String>,
    #[serde(rename = "T", skip_serializing_if = "Option::is_none")]
    period: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    base: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    amp: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    h_inf: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dip: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    width: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    c0: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    #[serde(rename = "L", skip_serializing_if = "Option::is_none")]
    l: Option<f64>,
    #[serde(rename = "R", skip_serializing_if = "Option::is_none")]
    radius: Option<f64>,
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    node_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    grad_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_iters: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    step_rule: Option<String>,
    #[serde(rename = "L_growth_factor", skip_serializing_if = "Option::is_none")]
    l_growth_factor: Option<f64>,
    #[serde(rename = "max_L_doublings", skip_serializing_if = "Option::is_none")]
    max_l_doublings: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    newton_polish: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    polish_switch_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    polish_after: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    deterministic: Option<bool>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    #[serde(skip_serializing_if = "Option::is_none")]
    profile_csv: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    report_json: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    plotdata: Option<String>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDiagnostics {
    #[serde(skip_serializing_if = "Option::is_none")]
    first_integral: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    equipartition: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    energy_identity: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    modica: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    clearing_out: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mean_value: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    compare_asymptotic: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    zeta: Option<f64>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn err_at(text: &str, span: Range<usize>, message: impl Into<String>) -> ConfigError {
    ConfigError::Parse {
        line: line_of(text, span.start),
        message: message.into(),
    }
}

fn resolve_potential(text: &str, raw: Option<Spanned<RawPotential>>) -> Result<PotentialConfig, ConfigError> {
    let raw = raw.ok_or_else(|| ConfigError::Parse {
        line: 1,
        message: "missing [potential] section".into(),
    })?;
    let span = raw.span();
    let raw = raw.into_inner();
    let wells = |kind: &str| -> Result<(Vec<f64>, Vec<f64>), ConfigError> {
        match (raw.a_minus.clone(), raw.a_plus.clone()) {
            (Some(a), Some(b)) => Ok((a, b)),
            _ => Err(err_at(text, span.clone(), format!("`{kind}` potential requires a_minus and a_plus"))),
        }
    };
    let only = |allowed: &[&str]| -> Result<(), ConfigError> {
        let present = [
            ("a_minus", raw.a_minus.is_some()),
            ("a_plus", raw.a_plus.is_some()),
            ("terms", raw.terms.is_some()),
        ];
        match present.iter().find(|(k, set)| *set && !allowed.contains(k)) {
            Some((k, _)) => Err(err_at(text, span.clone(), format!("`{k}` does not apply to `{}`", raw.kind))),
            None => Ok(()),
        }
    };
    let choice = match raw.kind.as_str() {
        "quartic" => {
            only(&[])?;
            PotentialChoice::Quartic
        }
        "product" | "product2d" => {
            only(&["a_minus", "a_plus"])?;
            let (a_minus, a_plus) = wells("product")?;
            PotentialChoice::Product { a_minus, a_plus }
        }
        "polynomial" | "custom" => {
            only(&["a_minus", "a_plus", "terms"])?;
            let (a_minus, a_plus) = wells("polynomial")?;
            let terms = raw
                .terms
                .as_ref()
                .ok_or_else(|| err_at(text, span.clone(), "`polynomial` potential requires terms"))?
                .iter()
                .map(|t| Monomial {
                    coef: t.coef,
                    exponents: t.exponents.clone(),
                })
                .collect();
            PotentialChoice::Polynomial { terms, a_minus, a_plus }
        }
        other => return Err(err_at(text, span, format!("unknown potential kind `{other}`"))),
    };
    Ok(PotentialConfig {
        choice,
        delta: raw.delta,
    })
}

fn resolve_inhomogeneity(text: &str, raw: Option<Spanned<RawInhomogeneity>>) -> Result<ProfileParams, ConfigError> {
    let Some(raw) = raw else {
        return Ok(ProfileParams::Constant);
    };
    let span = raw.span();
    let r = raw.into_inner();
    let keyed = [
        ("T", r.period),
        ("base", r.base),
        ("amp", r.amp),
        ("hinf", r.h_inf),
        ("dip", r.dip),
        ("width", r.width),
        ("alpha", r.alpha),
        ("c0", r.c0),
    ];
    let spec = match (&r.h, &r.kind) {
        (Some(_), Some(_)) => return Err(err_at(text, span, "give either `h` or `kind`, not both")),
        (Some(h), None) => {
            if keyed.iter().any(|(_, v)| v.is_some()) {
                return Err(err_at(text, span, "shape keys go inside the `h` string when `h` is used"));
            }
            h.clone()
        }
        (None, Some(kind)) => {
            let params: Vec<String> = keyed
                .iter()
                .filter_map(|(k, v)| v.map(|v| format!("{k}={v:?}")))
                .collect();
            if params.is_empty() {
                kind.clone()
            } else {
                format!("{kind}:{}", params.join(","))
            }
        }
        (None, None) => return Ok(ProfileParams::Constant),
    };
    let params: ProfileParams = spec.parse().map_err(|e: crate::inhomogeneity::ProfileError| err_at(text, span.clone(), e.to_string()))?;
    make_profile(params).map_err(|e| err_at(text, span, e.to_string()))?;
    Ok(params)
}

fn resolve_solver(text: &str, raw: Option<Spanned<RawSolver>>) -> Result<(SolveConfig, bool), ConfigError> {
    let d = SolveConfig::default();
    let Some(raw) = raw else {
        return Ok((d, false));
    };
    let span = raw.span();
    let r = raw.into_inner();
    let step_rule = match r.step_rule.as_deref() {
        None | Some("armijo") => StepRule::Armijo,
        Some("bb") | Some("barzilai_borwein") => StepRule::BarzilaiBorwein,
        Some(other) => return Err(err_at(text, span, format!("unknown step_rule `{other}` (armijo or bb)"))),
    };
    let cfg = SolveConfig {
        l: r.l.unwrap_or(d.l),
        radius: r.radius.unwrap_or(d.radius),
        node_count: r.node_count.unwrap_or(d.node_count),
        grad_tol: r.grad_tol.unwrap_or(d.grad_tol),
        max_iters: r.max_iters.unwrap_or(d.max_iters),
        step_rule,
        l_growth_factor: r.l_growth_factor.unwrap_or(d.l_growth_factor),
        max_l_doublings: r.max_l_doublings.unwrap_or(d.max_l_doublings),
        newton_polish: r.newton_polish.unwrap_or(d.newton_polish),
        polish_switch_tol: r.polish_switch_tol.unwrap_or(d.polish_switch_tol),
        polish_after: r.polish_after.unwrap_or(d.polish_after),
    };
    cfg.validate().map_err(|e| err_at(text, span, e.to_string()))?;
    Ok((cfg, r.deterministic.unwrap_or(false)))
}

fn resolve_diagnostics(text: &str, raw: Option<Spanned<RawDiagnostics>>) -> Result<DiagnosticOptions, ConfigError> {
    let d = DiagnosticOptions::default();
    let Some(raw) = raw else {
        return Ok(d);
    };
    let span = raw.span();
    let r = raw.into_inner();
    let opts = DiagnosticOptions {
        first_integral: r.first_integral.unwrap_or(d.first_integral),
        equipartition: r.equipartition.unwrap_or(d.equipartition),
        energy_identity: r.energy_identity.unwrap_or(d.energy_identity),
        modica: r.modica.unwrap_or(d.modica),
        clearing_out: r.clearing_out.unwrap_or(d.clearing_out),
        mean_value: r.mean_value.unwrap_or(d.mean_value),
        oracle: r.oracle.unwrap_or(d.oracle),
        compare_asymptotic: r.compare_asymptotic.unwrap_or(d.compare_asymptotic),
        zeta: r.zeta.unwrap_or(d.zeta),
    };
    if !(opts.zeta > 0.0) {
        return Err(err_at(text, span, "zeta must be positive"));
    }
    Ok(opts)
}

fn toml_error(text: &str, e: toml::de::Error) -> ConfigError {
    let line = e.span().map_or(1, |s| line_of(text, s.start));
    let message = e.message().to_string();
    if message.starts_with("unknown field") {
        ConfigError::UnknownKey { line, message }
    } else {
        ConfigError::Parse { line, message }
    }
}

/// Parses and fully resolves a run configuration. Unknown sections and
/// keys are errors.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| toml_error(text, e))?;
    let potential = resolve_potential(text, raw.potential)?;
    let inhomogeneity = resolve_inhomogeneity(text, raw.inhomogeneity)?;
    let (solver, deterministic) = resolve_solver(text, raw.solver)?;
    let out = raw.output.unwrap_or_default();
    let output = OutputPaths {
        profile_csv: out.profile_csv.unwrap_or_else(|| "profile.csv".into()).into(),
        report_json: out.report_json.unwrap_or_else(|| "report.json".into()).into(),
        plotdata: out.plotdata.unwrap_or_else(|| "profile.dat".into()).into(),
    };
    let diagnostics = resolve_diagnostics(text, raw.diagnostics)?;
    Ok(RunConfig {
        potential,
        inhomogeneity,
        solver,
        output,
        diagnostics,
        deterministic,
    })
}

fn spanned<T>(v: T) -> Option<Spanned<T>> {
    Some(Spanned::new(0..0, v))
}

/// Canonical TOML for `cfg` with every key written out;
/// `parse_config(&serialize_config(c)) == c`.
pub fn serialize_config(cfg: &RunConfig) -> String {
    let (kind, a_minus, a_plus, terms) = match &cfg.potential.choice {
        PotentialChoice::Quartic => ("quartic", None, None, None),
        PotentialChoice::Product { a_minus, a_plus } => ("product", Some(a_minus.clone()), Some(a_plus.clone()), None),
        PotentialChoice::Polynomial { terms, a_minus, a_plus } => (
            "polynomial",
            Some(a_minus.clone()),
            Some(a_plus.clone()),
            Some(
                terms
                    .iter()
                    .map(|t| RawMonomial {
                        coef: t.coef,
                        exponents: t.exponents.clone(),
                    })
                    .collect(),
            ),
        ),
    };
    let s = &cfg.solver;
    let d = &cfg.diagnostics;
    let raw = RawConfig {
        potential: spanned(RawPotential {
            kind: kind.into(),
            delta: cfg.potential.delta,
            a_minus,
            a_plus,
            terms,
        }),
        inhomogeneity: spanned(RawInhomogeneity {
            h: Some(cfg.inhomogeneity.to_string()),
            ..Default::default()
        }),
        solver: spanned(RawSolver {
            l: Some(s.l),
            radius: Some(s.radius),
            node_count: Some(s.node_count),
            grad_tol: Some(s.grad_tol),
            max_iters: Some(s.max_iters),
            step_rule: Some(
                match s.step_rule {
                    StepRule::Armijo => "armijo",
                    StepRule::BarzilaiBorwein => "bb",
                }
                .into(),
            ),
            l_growth_factor: Some(s.l_growth_factor),
            max_l_doublings: Some(s.max_l_doublings),
            newton_polish: Some(s.newton_polish),
            polish_switch_tol: Some(s.polish_switch_tol),
            polish_after: Some(s.polish_after),
            deterministic: Some(cfg.deterministic),
        }),
        output: Some(RawOutput {
            profile_csv: Some(cfg.output.profile_csv.display().to_string()),
            report_json: Some(cfg.output.report_json.display().to_string()),
            plotdata: Some(cfg.output.plotdata.display().to_string()),
        }),
        diagnostics: spanned(RawDiagnostics {
            first_integral: Some(d.first_integral),
            equipartition: Some(d.equipartition),
            energy_identity: Some(d.energy_identity),
            modica: Some(d.modica),
            clearing_out: Some(d.clearing_out),
            mean_value: Some(d.mean_value),
            oracle: Some(d.oracle),
            compare_asymptotic: Some(d.compare_asymptotic),
            zeta: Some(d.zeta),
        }),
    };
    toml::to_string(&raw).expect("config serializes")
}

/// Applies `section.key=value` overrides to the TOML text. Values that do
/// not parse as TOML are taken as strings.
pub fn apply_overrides(text: &str, overrides: &[String]) -> Result<String, ConfigError> {
    if overrides.is_empty() {
        return Ok(text.to_string());
    }
    let mut doc: toml::Table = toml::from_str(text).map_err(|e| toml_error(text, e))?;
    for o in overrides {
        let (path, value) = o.split_once('=').ok_or_else(|| ConfigError::Override(o.clone()))?;
        let (section, key) = path.trim().split_once('.').ok_or_else(|| ConfigError::Override(o.clone()))?;
        let value = value.trim();
        let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(value.to_string()));
        let table = doc
            .entry(section.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| ConfigError::Override(o.clone()))?;
        table.insert(key.to_string(), parsed);
    }
    Ok(toml::to_string(&doc).expect("table serializes"))
}
