//! Run descriptions in TOML.
//!
//! ```toml
//! kind = "regularity"          # solve | ensemble | constants-scan | regularity | acceptance
//! seed = 7
//!
//! [problem]
//! preset = "section4"          # or spell the problem out, see below
//! n = 64
//! horizon = 1.0
//! sigma = 0.3                  # beta, sigma, delta, delta1 override preset values
//!
//! [grid]
//! steps = 1024
//! substeps_per_unit = 1024
//! scheme = "frozen-exponential" # or "implicit-euler"
//!
//! [ensemble]
//! paths = 200
//!
//! [regularity]
//! p = 2.0
//! lag_min = 0.00390625         # defaults: 4 steps and horizon/8
//! lag_max = 0.125
//! cutoff = 0.1                 # AX windows start at cutoff * horizon
//! thetas = [0.0, 0.5, 1.0]
//!
//! [acceptance]
//! scale = "full"               # or "quick"
//! ```
//!
//! An explicit problem replaces `preset` with
//!
//! ```toml
//! [problem]
//! n = 32
//! horizon = 1.0
//! mu = 1.0
//! beta = 1.0
//! sigma = 0.3
//! delta = 0.7
//! delta1 = 0.9
//! a0 = 1.0
//! b0 = 0.0
//! a = { form = "affine-in-time", offset = 1.0, slope = 0.5 }
//! b = { form = "constant", value = 0.0 }
//! forcing = { time = { form = "constant", value = 1.0 }, space = { form = "sine-mode", mode = 1, amplitude = 1.0 } }
//! noise = { time = { form = "power", offset = 1.0, scale = 1.0, exponent = 0.3 }, space = { form = "bubble", amplitude = 1.0 } }
//! initial = { form = "sine-mode", mode = 2, amplitude = 0.5 }
//! ```

use std::path::Path;

use parabolic_core::coefficients::{Coefficient, CoefficientField, SpaceFn, TimeFn};
use parabolic_core::evolution::SchemeKind;
use parabolic_core::grid::Grid;
use parabolic_core::operator::OperatorFamily;
use parabolic_core::presets::{Exponents, Preset};
use parabolic_core::regularity::{dyadic_lags, MIN_FIT_LAGS};
use parabolic_core::stochastic::NoiseMap;
use parabolic_core::strict::{Forcing, ProblemSpec};
use serde::{Deserialize, Serialize};

use crate::error::{Issue, LabError, ValidationReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Solve,
    Ensemble,
    ConstantsScan,
    Regularity,
    Acceptance,
}

impl ExperimentKind {
    pub fn label(self) -> &'static str {
        match self {
            ExperimentKind::Solve => "solve",
            ExperimentKind::Ensemble => "ensemble",
            ExperimentKind::ConstantsScan => "constants-scan",
            ExperimentKind::Regularity => "regularity",
            ExperimentKind::Acceptance => "acceptance",
        }
    }

    fn needs_problem(self) -> bool {
        self != ExperimentKind::Acceptance
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    /// Sample sizes of the acceptance criteria.
    #[default]
    Full,
    /// Small sizes for smoke runs; results are not acceptance evidence.
    Quick,
}

/// `time(t)·space(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeparableSpec {
    pub time: TimeFn,
    pub space: SpaceFn,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<Coefficient>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<Coefficient>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub forcing: Option<SeparableSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise: Option<SeparableSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial: Option<SpaceFn>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub substeps_per_unit: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<SchemeKind>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularitySection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lag_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lag_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thetas: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcceptanceSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<Scale>,
}

/// The file as written, before defaults and validation.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<ExperimentKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regularity: Option<RegularitySection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub acceptance: Option<AcceptanceSection>,
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub kind: Option<ExperimentKind>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, LabError> {
        toml::from_str(text).map_err(|e| LabError::Parse(e.to_string()))
    }

    pub fn apply(&mut self, overrides: &Overrides) {
        if let Some(seed) = overrides.seed {
            self.seed = Some(seed);
        }
        if let Some(kind) = overrides.kind {
            self.kind = Some(kind);
        }
        if let Some(paths) = overrides.paths {
            self.ensemble.get_or_insert_with(Default::default).paths = Some(paths);
        }
    }

    /// Applies defaults and checks every precondition, collecting all
    /// violations before failing.
    pub fn validate(self) -> Result<RunConfig, LabError> {
        let mut report = ValidationReport::default();
        let kind = self.kind;
        if kind.is_none() {
            report.push(Issue::new(
                "required",
                "kind",
                "missing; one of solve, ensemble, constants-scan, regularity, acceptance",
            ));
        }
        let needs_problem = kind.is_none_or(ExperimentKind::needs_problem);
        let problem = match (&self.problem, needs_problem) {
            (Some(section), true) => build_problem(section, &mut report),
            (None, true) => {
                report.push(Issue::new(
                    "required",
                    "problem",
                    "missing; give problem.preset or the explicit fields n, a, b, a0, b0, beta, sigma, delta, delta1",
                ));
                None
            }
            (_, false) => None,
        };
        let horizon = problem.as_ref().map_or(1.0, ProblemSpec::horizon);

        let grid = self.grid.clone().unwrap_or_default();
        let steps = grid.steps.unwrap_or(1024);
        if steps == 0 {
            report.push(Issue::new("grid", "grid.steps", "must be at least 1"));
        }
        let substeps_per_unit = grid
            .substeps_per_unit
            .unwrap_or_else(|| ((steps as f64 / horizon).ceil() as usize).max(1));
        if substeps_per_unit == 0 {
            report.push(Issue::new("grid", "grid.substeps_per_unit", "must be at least 1"));
        }
        let scheme = grid.scheme.unwrap_or(SchemeKind::FrozenExponential);

        let paths = self.ensemble.as_ref().and_then(|e| e.paths).unwrap_or(200);
        let min_paths = if kind == Some(ExperimentKind::Regularity) { 2 } else { 1 };
        if paths < min_paths {
            report.push(Issue::new("ensemble", "ensemble.paths", format!("must be at least {min_paths}")));
        }

        let regularity = validate_regularity(self.regularity.clone().unwrap_or_default(), problem.as_ref(), steps, &mut report);
        if kind == Some(ExperimentKind::Regularity) && report.is_empty() {
            check_lag_count(&regularity, problem.as_ref(), steps, &mut report);
        }
        let scale = self.acceptance.as_ref().and_then(|a| a.scale).unwrap_or_default();

        report.into_result()?;
        Ok(RunConfig {
            kind: kind.expect("validated"),
            seed: self.seed.unwrap_or(0),
            problem,
            steps,
            substeps_per_unit,
            scheme,
            paths,
            regularity,
            scale,
            raw: self,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegularitySettings {
    pub p: f64,
    /// `None` keeps the default `[4Δt, T/8]`.
    pub lag_min: Option<f64>,
    pub lag_max: Option<f64>,
    pub cutoff: f64,
    pub thetas: Vec<f64>,
}

/// Validated run description.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub problem: Option<ProblemSpec>,
    pub steps: usize,
    pub substeps_per_unit: usize,
    pub scheme: SchemeKind,
    pub paths: usize,
    pub regularity: RegularitySettings,
    pub scale: Scale,
    /// The file contents after command-line overrides, echoed into manifests.
    pub raw: RawConfig,
}

impl RunConfig {
    pub fn problem(&self) -> Result<&ProblemSpec, LabError> {
        self.problem.as_ref().ok_or_else(|| {
            let mut r = ValidationReport::default();
            r.push(Issue::new("required", "problem", "this experiment needs a problem"));
            LabError::Validation(r)
        })
    }
}

pub fn parse_config(text: &str, overrides: &Overrides) -> Result<RunConfig, LabError> {
    let mut raw = RawConfig::parse(text)?;
    raw.apply(overrides);
    raw.validate()
}

pub fn load_config(path: &Path, overrides: &Overrides) -> Result<RunConfig, LabError> {
    let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
    parse_config(&text, overrides)
}

fn validate_regularity(
    section: RegularitySection,
    problem: Option<&ProblemSpec>,
    steps: usize,
    report: &mut ValidationReport,
) -> RegularitySettings {
    let p = section.p.unwrap_or(2.0);
    if !(1.0..=8.0).contains(&p) {
        report.push(Issue::new("regularity", "regularity.p", format!("{p} not in [1, 8]")));
    }
    let cutoff = section.cutoff.unwrap_or(0.1);
    if !(0.0..1.0).contains(&cutoff) {
        report.push(Issue::new("regularity", "regularity.cutoff", format!("{cutoff} not in [0, 1)")));
    }
    let horizon = problem.map_or(1.0, ProblemSpec::horizon);
    let dt = horizon / steps.max(1) as f64;
    if let Some(lo) = section.lag_min {
        if !(lo >= dt * (1.0 - 1e-9)) {
            report.push(Issue::new("regularity", "regularity.lag_min", format!("{lo} is below the time step {dt}")));
        }
    }
    if let (Some(lo), Some(hi)) = (section.lag_min, section.lag_max) {
        if !(hi > lo) {
            report.push(Issue::new("regularity", "regularity.lag_max", "must exceed lag_min"));
        }
    }
    let default_thetas = problem.map_or(vec![0.0, 1.0], |p| vec![0.0, p.beta()]);
    let thetas = section.thetas.unwrap_or(default_thetas);
    if let Some(bad) = thetas.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        report.push(Issue::new("regularity", "regularity.thetas", format!("{bad} not in [0, 1]")));
    }
    RegularitySettings {
        p,
        lag_min: section.lag_min,
        lag_max: section.lag_max,
        cutoff,
        thetas,
    }
}

/// Exponent fits need `MIN_FIT_LAGS` dyadic lags inside `[lag_min, lag_max]`.
fn check_lag_count(settings: &RegularitySettings, problem: Option<&ProblemSpec>, steps: usize, report: &mut ValidationReport) {
    let horizon = problem.map_or(1.0, ProblemSpec::horizon);
    let dt = horizon / steps as f64;
    let lags = dyadic_lags(settings.lag_min.unwrap_or(4.0 * dt), settings.lag_max.unwrap_or(horizon / 8.0));
    if lags.len() < MIN_FIT_LAGS {
        report.push(Issue::new(
            "regularity",
            "grid.steps",
            format!("{} dyadic lags in the lag range, fits need {MIN_FIT_LAGS}; refine the grid or widen the range", lags.len()),
        ));
    }
}

/// Named-condition checks on the exponents, shared by presets and explicit
/// problems. `mu + nu - 1` equals `mu` for every family here (`nu = 1`).
fn check_exponents(ex: &Exponents, mu: f64, report: &mut ValidationReport) {
    if !(ex.beta > 0.0 && ex.beta <= 1.0) {
        report.push(Issue::new("(F1)", "problem.beta", format!("{} not in (0, 1]", ex.beta)));
    }
    let cap = ex.beta.min(mu);
    if !(ex.sigma > 0.0 && ex.sigma < cap) {
        report.push(Issue::new(
            "(F1)",
            "problem.sigma",
            format!("{} must satisfy 0 < sigma < min(beta, mu) = {cap}", ex.sigma),
        ));
    }
    if !(ex.delta > 0.5) {
        report.push(Issue::new("(G1)", "problem.delta", format!("{} must exceed 1/2", ex.delta)));
    }
    if !(ex.delta < ex.delta1 && ex.delta1 <= 1.0) {
        report.push(Issue::new(
            "(G2)",
            "problem.delta1",
            format!("need delta < delta1 <= 1, got delta = {}, delta1 = {}", ex.delta, ex.delta1),
        ));
    }
}

fn condition_of(err: &parabolic_core::Error) -> &'static str {
    use parabolic_core::Error as E;
    match err {
        E::Hypothesis { condition, .. } => condition,
        E::Coefficient(_) | E::Spectral(_) | E::Singular { .. } => "(A1)",
        _ => "problem",
    }
}

fn core_issue(field: &str, err: parabolic_core::Error) -> Issue {
    Issue::new(condition_of(&err), field, err.to_string())
}

fn build_problem(section: &ProblemSection, report: &mut ValidationReport) -> Option<ProblemSpec> {
    let horizon = section.horizon.unwrap_or(1.0);
    if !(horizon > 0.0 && horizon.is_finite()) {
        report.push(Issue::new("grid", "problem.horizon", format!("{horizon} must be positive")));
        return None;
    }
    match &section.preset {
        Some(name) => build_preset(name, section, horizon, report),
        None => build_explicit(section, horizon, report),
    }
}

fn build_preset(name: &str, section: &ProblemSection, horizon: f64, report: &mut ValidationReport) -> Option<ProblemSpec> {
    let preset = match Preset::from_name(name) {
        Ok(p) => p,
        Err(_) => {
            let names: Vec<&str> = Preset::ALL.iter().map(|p| p.name()).collect();
            report.push(Issue::new(
                "problem",
                "problem.preset",
                format!("unknown preset {name:?}; expected one of {}", names.join(", ")),
            ));
            return None;
        }
    };
    let explicit = [
        ("mu", section.mu.is_some()),
        ("a", section.a.is_some()),
        ("b", section.b.is_some()),
        ("a0", section.a0.is_some()),
        ("b0", section.b0.is_some()),
        ("forcing", section.forcing.is_some()),
        ("noise", section.noise.is_some()),
        ("initial", section.initial.is_some()),
    ];
    for (field, set) in explicit {
        if set {
            report.push(Issue::new(
                "problem",
                format!("problem.{field}"),
                "cannot be combined with a preset",
            ));
        }
    }
    let defaults = preset.exponents();
    let ex = Exponents {
        beta: section.beta.unwrap_or(defaults.beta),
        sigma: section.sigma.unwrap_or(defaults.sigma),
        delta: section.delta.unwrap_or(defaults.delta),
        delta1: section.delta1.unwrap_or(defaults.delta1),
    };
    let before = report.issues.len();
    check_exponents(&ex, 1.0, report);
    let n = section.n.unwrap_or(preset.default_n());
    if n == 0 {
        report.push(Issue::new("grid", "problem.n", "must be at least 1"));
    }
    if report.issues.len() > before {
        return None;
    }
    match preset.build_with(n, horizon, ex) {
        Ok(p) => Some(p),
        Err(e) => {
            report.push(core_issue("problem", e));
            None
        }
    }
}

fn require<T: Clone>(value: &Option<T>, field: &str, missing: &mut Vec<String>) -> Option<T> {
    if value.is_none() {
        missing.push(field.to_string());
    }
    value.clone()
}

/// `c` as a function of time is `mu`-Hölder on `[0, horizon]`.
fn coefficient_is_holder(c: &Coefficient, mu: f64, horizon: f64) -> bool {
    match c {
        Coefficient::Constant { .. } | Coefficient::AffineInTime { .. } => true,
        Coefficient::Separable { time, .. } => time.holder_constant(mu, horizon).is_some(),
    }
}

/// Sampled check of `c(x, t) >= floor` on a 65 × 17 lattice of `[0,1] × [0, T]`.
fn coefficient_floor_violation(c: &Coefficient, floor: f64, horizon: f64) -> Option<(f64, f64, f64)> {
    for i in 0..=16 {
        let t = horizon * i as f64 / 16.0;
        for j in 0..=64 {
            let u = j as f64 / 64.0;
            let v = c.eval(u, t);
            if !(v >= floor) {
                return Some((u, t, v));
            }
        }
    }
    None
}

fn build_explicit(section: &ProblemSection, horizon: f64, report: &mut ValidationReport) -> Option<ProblemSpec> {
    let mut missing = Vec::new();
    let n = require(&section.n, "n", &mut missing);
    let a = require(&section.a, "a", &mut missing);
    let b = require(&section.b, "b", &mut missing);
    let a0 = require(&section.a0, "a0", &mut missing);
    let b0 = require(&section.b0, "b0", &mut missing);
    let beta = require(&section.beta, "beta", &mut missing);
    let sigma = require(&section.sigma, "sigma", &mut missing);
    let delta = require(&section.delta, "delta", &mut missing);
    let delta1 = require(&section.delta1, "delta1", &mut missing);
    for field in &missing {
        report.push(Issue::new("required", format!("problem.{field}"), "missing (or set problem.preset)"));
    }
    let mu = section.mu.unwrap_or(1.0);
    let before = report.issues.len();
    if !(mu > 0.0 && mu <= 1.0) {
        report.push(Issue::new("(A3)", "problem.mu", format!("{mu} not in (0, 1]")));
    }
    if let Some(n) = n {
        if n == 0 {
            report.push(Issue::new("grid", "problem.n", "must be at least 1"));
        }
    }
    if let Some(a0) = a0 {
        if !(a0 > 0.0) {
            report.push(Issue::new("(A1)", "problem.a0", format!("ellipticity bound {a0} must be positive")));
        }
    }
    if let Some(b0) = b0 {
        if !(b0 >= 0.0) {
            report.push(Issue::new("(A1)", "problem.b0", format!("reaction bound {b0} must be non-negative")));
        }
    }
    for (field, coeff, floor) in [("a", &a, a0), ("b", &b, b0)] {
        let (Some(c), Some(floor)) = (coeff, floor) else { continue };
        if let Some((u, t, v)) = coefficient_floor_violation(c, floor, horizon) {
            report.push(Issue::new(
                "(A1)",
                format!("problem.{field}"),
                format!("{field}(x = {u}, t = {t}) = {v} is below the declared bound {floor}"),
            ));
        }
        if mu > 0.0 && mu <= 1.0 && !coefficient_is_holder(c, mu, horizon) {
            report.push(Issue::new(
                "(A3)",
                format!("problem.{field}"),
                format!("time dependence is not {mu}-Hölder on [0, {horizon}]"),
            ));
        }
    }
    if let (Some(beta), Some(sigma), Some(delta), Some(delta1)) = (beta, sigma, delta, delta1) {
        let ex = Exponents { beta, sigma, delta, delta1 };
        check_exponents(&ex, mu, report);
        if let Some(f) = &section.forcing {
            if f.time.holder_constant(sigma, horizon).is_none() {
                report.push(Issue::new(
                    "(F1)",
                    "problem.forcing.time",
                    format!("not {sigma}-Hölder on [0, {horizon}]"),
                ));
            }
        }
        if let Some(g) = &section.noise {
            if g.time.holder_constant(sigma, horizon).is_none() {
                report.push(Issue::new(
                    "(G2)",
                    "problem.noise.time",
                    format!("not {sigma}-Hölder on [0, {horizon}]"),
                ));
            }
        }
    }
    if report.issues.len() > before || !missing.is_empty() {
        return None;
    }
    let (n, a, b, a0, b0) = (n?, a?, b?, a0?, b0?);
    let ex = Exponents {
        beta: beta?,
        sigma: sigma?,
        delta: delta?,
        delta1: delta1?,
    };
    let built = (|| {
        let grid = Grid::unit(n)?;
        let coeffs = CoefficientField::new(a, b, a0, b0)?;
        let family = OperatorFamily::stencil(grid, coeffs, horizon, mu)?;
        let forcing = match &section.forcing {
            Some(f) => Forcing {
                time: f.time.clone(),
                profile: f.space.sample(&grid),
            },
            None => Forcing::zero(n),
        };
        let noise = match &section.noise {
            Some(g) => NoiseMap::separable(g.time.clone(), g.space.sample(&grid), "configured")?,
            None => NoiseMap::zero(n, 1),
        };
        let xi = section
            .initial
            .as_ref()
            .map_or_else(|| nalgebra::DVector::zeros(n), |s| s.sample(&grid));
        ProblemSpec::new(family, forcing, ex.beta, ex.sigma, noise, ex.delta, ex.delta1, xi)
    })();
    match built {
        Ok(p) => Some(p),
        Err(e) => {
            report.push(core_issue("problem", e));
            None
        }
    }
}
