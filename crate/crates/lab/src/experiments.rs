//! The experiment kinds behind `run_experiment`.

use parabolic_core::evolution::{evolution_constants_scan, EvolutionConstants, EvolutionScheme, SchemeKind, Trajectory};
use parabolic_core::grid::TimeGrid;
use parabolic_core::operator::{dyadic_pairs, resolvent_scan, temporal_holder_scan, SectorialReport, TemporalHolderReport};
use parabolic_core::regularity::{
    dyadic_lags, estimate_holder_exponent, mean_curve, moment_bound_from_curve, path_structure, path_weighted_sq,
    FitReport, MomentBoundReport, StructureSpec, StructureTable,
};
use parabolic_core::stats::MeanSe;
use parabolic_core::stochastic::{noise_condition_check, sample_brownian_path, NoiseConditionReport, OperatorPowers};
use parabolic_core::strict::{solve_report, ProblemSpec, SolveReport, StrictSolver};
use serde::Serialize;

use crate::acceptance::{run_suite, SuiteReport};
use crate::config::{ExperimentKind, RegularitySettings, RunConfig};
use crate::error::{Context, LabError};
use crate::output::{fmt_f64, RunArtifacts};
use crate::plot::{LineChart, Series};
use crate::workers::Workers;

pub struct RunOutcome {
    pub artifacts: RunArtifacts,
    /// Present for acceptance runs.
    pub suite: Option<SuiteReport>,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.suite.as_ref().is_none_or(SuiteReport::all_passed)
    }
}

pub fn run_experiment(config: &RunConfig, workers: &Workers) -> Result<RunOutcome, LabError> {
    let mut artifacts = RunArtifacts::default();
    let mut suite = None;
    match config.kind {
        ExperimentKind::Solve => run_solve(config, &mut artifacts)?,
        ExperimentKind::Ensemble => run_ensemble(config, workers, &mut artifacts)?,
        ExperimentKind::ConstantsScan => run_constants_scan(config, workers, &mut artifacts)?,
        ExperimentKind::Regularity => run_regularity(config, workers, &mut artifacts)?,
        ExperimentKind::Acceptance => {
            let (report, files) = run_suite(config.seed, config.scale, workers)?;
            artifacts = files;
            suite = Some(report);
        }
    }
    Ok(RunOutcome { artifacts, suite })
}

#[derive(Clone, Debug, Serialize)]
pub struct ProblemSummary {
    pub preset: Option<String>,
    pub n: usize,
    pub horizon: f64,
    pub mu: f64,
    pub beta: f64,
    pub sigma: f64,
    pub delta: f64,
    pub delta1: f64,
    pub autonomous: bool,
    pub fingerprint: String,
}

impl ProblemSummary {
    pub fn of(p: &ProblemSpec) -> Self {
        Self {
            preset: p.preset().map(str::to_string),
            n: p.family().dim(),
            horizon: p.horizon(),
            mu: p.family().mu(),
            beta: p.beta(),
            sigma: p.sigma(),
            delta: p.delta(),
            delta1: p.delta1(),
            autonomous: p.family().is_autonomous(),
            fingerprint: format!("{:016x}", p.fingerprint()),
        }
    }
}

/// Solver on the configured grid and scheme.
pub fn build_solver(problem: &ProblemSpec, steps: usize, spu: usize, kind: SchemeKind) -> Result<StrictSolver, LabError> {
    let grid = TimeGrid::uniform(problem.horizon(), steps).context("time grid")?;
    let scheme = EvolutionScheme::new(kind, spu, problem.family().clone()).context("evolution scheme")?;
    StrictSolver::new(problem, &scheme, &grid).context("solver setup")
}

fn noise_dim(problem: &ProblemSpec) -> usize {
    problem.noise().d()
}

/// `A(t_k)X(t_k)` along a solution.
pub fn apply_operator(solver: &StrictSolver, x: &Trajectory) -> Result<Trajectory, LabError> {
    x.map_states(x.piece(), |k, s| Ok(solver.operator_at(k) * s)).context("A X")
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    problem: ProblemSummary,
    seed: u64,
    path_index: u64,
    report: &'a SolveReport,
}

fn run_solve(config: &RunConfig, artifacts: &mut RunArtifacts) -> Result<(), LabError> {
    let problem = config.problem()?;
    let solver = build_solver(problem, config.steps, config.substeps_per_unit, config.scheme)?;
    let path = sample_brownian_path(noise_dim(problem), solver.grid(), config.seed, 0).context("noise path")?;
    let sol = solver.solve(&path).context("solve")?;
    let report = solve_report(&solver, &sol).context("solve report")?;
    let norm = &sol.norm;
    let ax = apply_operator(&solver, &sol.x)?;

    let n = problem.family().dim();
    let mut header = vec!["t".to_string(), "x_norm".into(), "ax_norm".into()];
    header.extend((0..n).map(|i| format!("x_{i}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = sol.times().iter().enumerate().map(|(k, &t)| {
        let x = sol.x.state(k);
        let mut row = vec![fmt_f64(t), fmt_f64(norm.norm(x)), fmt_f64(norm.norm(ax.state(k)))];
        row.extend(x.iter().map(|&v| fmt_f64(v)));
        row
    });
    artifacts.csv("trajectory.csv", &header, rows)?;
    artifacts.json(
        "report.json",
        &SolveOutput {
            problem: ProblemSummary::of(problem),
            seed: config.seed,
            path_index: 0,
            report: &report,
        },
    )?;
    let curve = |t: &Trajectory| -> Vec<(f64, f64)> {
        t.times().iter().zip(t.states()).map(|(&s, v)| (s, norm.norm(v))).collect()
    };
    let chart = LineChart::new("Solution norm", "t", format!("{} norm", norm.label()))
        .with(Series::new("X", curve(&sol.x)))
        .with(Series::new("deterministic part", curve(&sol.i1)).dashed());
    artifacts.svg("trajectory.svg", chart.render());
    Ok(())
}

/// `E∥A(t)^θX(t)∥²` for every θ, plus the `θ = β` curve for the moment bound.
pub struct MomentCurves {
    pub times: Vec<f64>,
    pub thetas: Vec<f64>,
    pub curves: Vec<Vec<MeanSe>>,
    pub beta_curve: Vec<MeanSe>,
}

pub fn moment_curves(
    solver: &StrictSolver,
    thetas: &[f64],
    paths: usize,
    seed: u64,
    workers: &Workers,
) -> Result<MomentCurves, LabError> {
    let problem = solver.problem();
    let times = solver.grid().times().to_vec();
    let powers: Vec<OperatorPowers> = thetas
        .iter()
        .chain(std::iter::once(&problem.beta()))
        .map(|&th| OperatorPowers::new(problem.family(), &times, th).context("operator powers"))
        .collect::<Result<_, _>>()?;
    let norm = problem.family().norm_kind();
    let per_path = workers.map(paths, |i| {
        let path = sample_brownian_path(noise_dim(problem), solver.grid(), seed, i).context("noise path")?;
        let sol = solver.solve(&path).context("solve")?;
        Ok(powers.iter().map(|p| path_weighted_sq(&sol.x, p, &norm)).collect::<Vec<_>>())
    })?;
    let mut curves = Vec::with_capacity(powers.len());
    for j in 0..powers.len() {
        let column: Vec<Vec<f64>> = per_path.iter().map(|c| c[j].clone()).collect();
        curves.push(mean_curve(&column).context("moment curve")?);
    }
    let beta_curve = curves.pop().expect("beta curve appended");
    Ok(MomentCurves {
        times,
        thetas: thetas.to_vec(),
        curves,
        beta_curve,
    })
}

pub fn moment_bound_artifacts(report: &MomentBoundReport, artifacts: &mut RunArtifacts, prefix: &str) -> Result<(), LabError> {
    artifacts.json(&format!("{prefix}moment_bound.json"), report)?;
    artifacts.csv(
        &format!("{prefix}moment_bound.csv"),
        &["t", "mean", "se", "envelope", "scaled_envelope"],
        report.curve.iter().map(|&(t, m, se, env)| {
            vec![fmt_f64(t), fmt_f64(m), fmt_f64(se), fmt_f64(env), fmt_f64(report.c_hat * env)]
        }),
    )?;
    let chart = LineChart::new("Moment bound", "t", "E|A^beta X(t)|^2")
        .with(Series::new("mean", report.curve.iter().map(|c| (c.0, c.1)).collect()))
        .with(Series::new("C * envelope", report.curve.iter().map(|c| (c.0, report.c_hat * c.3)).collect()).dashed());
    artifacts.svg(&format!("{prefix}moment_bound.svg"), chart.render());
    Ok(())
}

#[derive(Serialize)]
struct EnsembleOutput {
    problem: ProblemSummary,
    seed: u64,
    paths: usize,
    thetas: Vec<f64>,
    final_means: Vec<MeanSe>,
}

fn run_ensemble(config: &RunConfig, workers: &Workers, artifacts: &mut RunArtifacts) -> Result<(), LabError> {
    let problem = config.problem()?;
    let solver = build_solver(problem, config.steps, config.substeps_per_unit, config.scheme)?;
    let m = moment_curves(&solver, &config.regularity.thetas, config.paths, config.seed, workers)?;
    let mut header = vec!["t".to_string()];
    for th in &m.thetas {
        header.push(format!("mean_theta_{}", fmt_f64(*th)));
        header.push(format!("se_theta_{}", fmt_f64(*th)));
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = m.times.iter().enumerate().map(|(k, &t)| {
        let mut row = vec![fmt_f64(t)];
        for c in &m.curves {
            row.push(fmt_f64(c[k].mean));
            row.push(fmt_f64(c[k].se));
        }
        row
    });
    artifacts.csv("moments.csv", &header, rows)?;
    let bound = moment_bound_from_curve(problem, &m.times, &m.beta_curve).context("moment bound")?;
    moment_bound_artifacts(&bound, artifacts, "")?;
    artifacts.json(
        "summary.json",
        &EnsembleOutput {
            problem: ProblemSummary::of(problem),
            seed: config.seed,
            paths: config.paths,
            thetas: m.thetas.clone(),
            final_means: m.curves.iter().map(|c| *c.last().expect("non-empty")).collect(),
        },
    )?;
    let mut chart = LineChart::new("Weighted second moments", "t", "E|A^theta X(t)|^2");
    for (th, c) in m.thetas.iter().zip(&m.curves) {
        chart = chart.with(Series::new(
            format!("theta = {th}"),
            m.times.iter().zip(c).map(|(&t, v)| (t, v.mean)).collect(),
        ));
    }
    artifacts.svg("moments.svg", chart.render());
    Ok(())
}

#[derive(Serialize)]
struct ConstantsOutput {
    problem: ProblemSummary,
    scheme: String,
    constants: EvolutionConstants,
    sector: SectorialReport,
    operator_holder: Option<TemporalHolderReport>,
    noise: NoiseConditionReport,
}

pub const SCAN_THETAS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

/// Smoothing constants maximised over dyadic pairs, one pair per task.
pub fn constants_scan(
    scheme: &EvolutionScheme,
    thetas: &[f64],
    pairs: &[(f64, f64)],
    workers: &Workers,
) -> Result<EvolutionConstants, LabError> {
    let per_pair = workers.map(pairs.len(), |i| {
        let p = pairs[i as usize];
        evolution_constants_scan(scheme, thetas, &[p]).context("evolution constants")
    })?;
    let mut iter = per_pair.into_iter();
    let first = iter.next().ok_or_else(|| LabError::Output("no pairs to scan".into()))?;
    Ok(iter.fold(first, |acc, c| acc.merge(&c)))
}

/// 17 evenly spaced times on `[0, horizon]`.
pub fn coarse_times(horizon: f64) -> Vec<f64> {
    (0..=16).map(|i| horizon * i as f64 / 16.0).collect()
}

fn run_constants_scan(config: &RunConfig, workers: &Workers, artifacts: &mut RunArtifacts) -> Result<(), LabError> {
    let problem = config.problem()?;
    let family = problem.family();
    let scheme = EvolutionScheme::new(config.scheme, config.substeps_per_unit, family.clone()).context("scheme")?;
    let pairs = dyadic_pairs(problem.horizon(), 8);
    let constants = constants_scan(&scheme, &SCAN_THETAS, &pairs, workers)?;
    let sector = resolvent_scan(family, 0.0, 3.0 * std::f64::consts::PI / 4.0, 32).context("resolvent scan")?;
    let operator_holder = if family.is_autonomous() {
        None
    } else {
        Some(temporal_holder_scan(family, family.nu(), &pairs).context("operator Hölder scan")?)
    };
    let noise = noise_condition_check(
        problem.noise(),
        family,
        problem.delta(),
        problem.delta1(),
        problem.sigma(),
        &coarse_times(problem.horizon()),
    )
    .context("noise conditions")?;
    let mut rows = Vec::new();
    for c in &constants.iota {
        rows.push(vec!["iota".to_string(), fmt_f64(c.theta), String::new(), fmt_f64(c.value)]);
    }
    for c in &constants.kappa {
        rows.push(vec!["kappa".to_string(), fmt_f64(c.theta1), fmt_f64(c.theta2), fmt_f64(c.value)]);
    }
    rows.push(vec!["c_mu_nu".to_string(), String::new(), String::new(), fmt_f64(constants.c_mu_nu)]);
    artifacts.csv("constants.csv", &["constant", "theta1", "theta2", "value"], rows)?;
    let chart = LineChart::new("Smoothing constants", "theta", "iota")
        .with(Series::new("measured", constants.iota.iter().map(|c| (c.theta, c.value)).collect()))
        .with(
            Series::new(
                "theta^theta e^-theta",
                constants.iota.iter().map(|c| (c.theta, c.theta.powf(c.theta) * (-c.theta).exp())).collect(),
            )
            .dashed(),
        );
    artifacts.svg("constants.svg", chart.render());
    artifacts.json(
        "constants.json",
        &ConstantsOutput {
            problem: ProblemSummary::of(problem),
            scheme: scheme.tag(),
            constants,
            sector,
            operator_holder,
            noise,
        },
    )?;
    Ok(())
}

/// Structure-function tables for `X` over the whole horizon and for `AX`
/// after the cutoff.
pub struct RegularityTables {
    pub x: StructureTable,
    pub ax: StructureTable,
    pub x_spec: StructureSpec,
    pub ax_spec: StructureSpec,
}

pub fn structure_specs(times: &[f64], horizon: f64, settings: &RegularitySettings) -> Result<(StructureSpec, StructureSpec), LabError> {
    let mut x_spec = StructureSpec::default_for(times, settings.p).context("lags")?;
    if settings.lag_min.is_some() || settings.lag_max.is_some() {
        let dt = horizon / (times.len() - 1) as f64;
        x_spec.lags = dyadic_lags(settings.lag_min.unwrap_or(4.0 * dt), settings.lag_max.unwrap_or(horizon / 8.0))
            .into_iter()
            .map(|l| (l / dt).round() * dt)
            .collect();
    }
    let ax_spec = StructureSpec {
        window: (settings.cutoff * horizon, horizon),
        ..x_spec.clone()
    };
    Ok((x_spec, ax_spec))
}

pub fn regularity_tables(
    solver: &StrictSolver,
    settings: &RegularitySettings,
    paths: usize,
    seed: u64,
    workers: &Workers,
) -> Result<RegularityTables, LabError> {
    let problem = solver.problem();
    let norm = problem.family().norm_kind();
    let (x_spec, ax_spec) = structure_specs(solver.grid().times(), problem.horizon(), settings)?;
    let per_path = workers.map(paths, |i| {
        let path = sample_brownian_path(noise_dim(problem), solver.grid(), seed, i).context("noise path")?;
        let sol = solver.solve(&path).context("solve")?;
        let ax = apply_operator(solver, &sol.x)?;
        Ok((
            path_structure(&sol.x, &norm, &x_spec).context("structure of X")?,
            path_structure(&ax, &norm, &ax_spec).context("structure of AX")?,
        ))
    })?;
    let (xs, axs): (Vec<Vec<f64>>, Vec<Vec<f64>>) = per_path.into_iter().unzip();
    Ok(RegularityTables {
        x: StructureTable::from_path_means(&x_spec, &xs, norm.label()).context("X table")?,
        ax: StructureTable::from_path_means(&ax_spec, &axs, norm.label()).context("AX table")?,
        x_spec,
        ax_spec,
    })
}

#[derive(Serialize)]
pub struct RegularityOutput {
    pub problem: ProblemSummary,
    pub paths: usize,
    pub x: FitReport,
    pub ax: FitReport,
    pub ax_window: (f64, f64),
    /// Exponent ceilings `min(β, 1/2)` for `X` and `min(δ − 1/2, σ)` for `AX`.
    pub x_ceiling: f64,
    pub ax_ceiling: f64,
}

pub fn structure_artifacts(name: &str, table: &StructureTable, fit: &FitReport, artifacts: &mut RunArtifacts) -> Result<(), LabError> {
    artifacts.csv(
        &format!("{name}.csv"),
        &["lag", "moment", "se"],
        table.lags.iter().zip(&table.moments).zip(&table.se).map(|((l, m), s)| vec![fmt_f64(*l), fmt_f64(*m), fmt_f64(*s)]),
    )?;
    let mut chart = LineChart::new(format!("Structure function ({name})"), "lag", "moment")
        .log_log()
        .with(Series::new("measured", table.lags.iter().copied().zip(table.moments.iter().copied()).collect()));
    if let (Some(eps), Some(c)) = (fit.epsilon_hat, fit.c_hat) {
        chart = chart.with(Series::new(format!("fit, slope {eps:.3}"), table.lags.iter().map(|&l| (l, c * l.powf(eps))).collect()).dashed());
    }
    artifacts.svg(&format!("{name}.svg"), chart.render());
    Ok(())
}

pub fn regularity_fits(problem: &ProblemSpec, tables: &RegularityTables, paths: usize) -> Result<RegularityOutput, LabError> {
    Ok(RegularityOutput {
        problem: ProblemSummary::of(problem),
        paths,
        x: estimate_holder_exponent(&tables.x).context("X exponent fit")?,
        ax: estimate_holder_exponent(&tables.ax).context("AX exponent fit")?,
        ax_window: tables.ax_spec.window,
        x_ceiling: problem.beta().min(0.5),
        ax_ceiling: (problem.delta() - 0.5).min(problem.sigma()),
    })
}

fn run_regularity(config: &RunConfig, workers: &Workers, artifacts: &mut RunArtifacts) -> Result<(), LabError> {
    let problem = config.problem()?;
    let solver = build_solver(problem, config.steps, config.substeps_per_unit, config.scheme)?;
    let tables = regularity_tables(&solver, &config.regularity, config.paths, config.seed, workers)?;
    let out = regularity_fits(problem, &tables, config.paths)?;
    structure_artifacts("structure_x", &tables.x, &out.x, artifacts)?;
    structure_artifacts("structure_ax", &tables.ax, &out.ax, artifacts)?;
    artifacts.json("fits.json", &out)?;
    Ok(())
}
