//! Strict solutions `X = I₁ + W₀` and the checks that they satisfy the
//! integrated equation, the stochastic Fubini identity, and agree across
//! independent schemes.

#[allow(unused_imports)]
use nalgebra::ComplexField;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::coefficients::TimeFn;
use crate::error::{Error, Result};
use crate::evolution::{
    deterministic_solve_with, EvolutionScheme, Piece, SchemeKind, StepPropagators, Trajectory,
};
use crate::grid::TimeGrid;
use crate::holder::{SampledPath, WeightedHolderParams};
use crate::operator::{NormKind, OperatorFamily};
use crate::stochastic::{
    stochastic_convolution_with, weight_trajectory, BrownianPath, NoiseMap, OperatorPowers,
};

/// `F(t) = time(t)·profile`.
#[derive(Clone, Debug, PartialEq)]
pub struct Forcing {
    pub time: TimeFn,
    pub profile: DVector<f64>,
}

impl Forcing {
    pub fn zero(n: usize) -> Self {
        Self {
            time: TimeFn::constant(0.0),
            profile: DVector::zeros(n),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.profile.iter().all(|x| *x == 0.0) || (self.time.is_constant() && self.time.eval(0.0) == 0.0)
    }

    pub fn at(&self, t: f64) -> DVector<f64> {
        &self.profile * self.time.eval(t)
    }

    pub fn sample(&self, grid: &TimeGrid) -> Result<SampledPath> {
        let values: Vec<DVector<f64>> = grid.times().iter().map(|&t| self.at(t)).collect();
        if values.iter().any(|v| v.iter().any(|x| !x.is_finite())) {
            return Err(Error::Numeric("forcing is not finite on the grid".into()));
        }
        SampledPath::new(grid.times().to_vec(), values, NormKind::Euclidean)
    }
}

/// Data of the stochastic Cauchy problem together with its regularity
/// parameters.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    family: OperatorFamily,
    forcing: Forcing,
    forcing_params: WeightedHolderParams,
    noise: NoiseMap,
    delta: f64,
    delta1: f64,
    xi: DVector<f64>,
    preset: Option<String>,
}

fn hypothesis(condition: &'static str, detail: String) -> Error {
    Error::Hypothesis { condition, detail }
}

impl ProblemSpec {
    /// Validates the structural hypotheses; failures name the condition.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        family: OperatorFamily,
        forcing: Forcing,
        beta: f64,
        sigma: f64,
        noise: NoiseMap,
        delta: f64,
        delta1: f64,
        xi: DVector<f64>,
    ) -> Result<Self> {
        let n = family.dim();
        if forcing.profile.len() != n || noise.dim() != n || xi.len() != n {
            return Err(Error::Shape(format!(
                "family dimension {n}, forcing {}, noise {}, initial value {}",
                forcing.profile.len(),
                noise.dim(),
                xi.len()
            )));
        }
        let horizon = family.horizon();
        let bound = family.mu() + family.nu() - 1.0;
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(hypothesis("(F1)", format!("beta = {beta} not in (0, 1]")));
        }
        if !(sigma > 0.0 && sigma < beta.min(bound)) {
            return Err(hypothesis(
                "(F1)",
                format!("sigma = {sigma} must satisfy 0 < sigma < min(beta, mu + nu - 1) = {}", beta.min(bound)),
            ));
        }
        // A bounded σ-Hölder time factor lies in every F^{β,σ} with β > σ.
        if !forcing.is_zero() && forcing.time.holder_constant(sigma, horizon).is_none() {
            return Err(hypothesis(
                "(F1)",
                format!("forcing time factor {:?} is not sigma-Hölder on [0, {horizon}]", forcing.time),
            ));
        }
        if !(delta > 0.5) {
            return Err(hypothesis("(G1)", format!("delta = {delta} must exceed 1/2")));
        }
        if !(delta < delta1 && delta1 <= 1.0) {
            return Err(hypothesis(
                "(G2)",
                format!("need delta < delta1 <= 1, got delta = {delta}, delta1 = {delta1}"),
            ));
        }
        if noise.holder_constant(sigma, horizon).is_none() {
            return Err(hypothesis(
                "(G2)",
                format!("noise time factor is not sigma-Hölder for sigma = {sigma}"),
            ));
        }
        let weighted_xi = family.reference().apply(|l| l.powf(beta), &xi);
        if weighted_xi.iter().any(|x| !x.is_finite()) {
            return Err(hypothesis("(X0)", "initial value is not in D(A(0)^beta)".into()));
        }
        Ok(Self {
            family,
            forcing,
            forcing_params: WeightedHolderParams { beta, sigma },
            noise,
            delta,
            delta1,
            xi,
            preset: None,
        })
    }

    pub fn with_preset(mut self, tag: impl Into<String>) -> Self {
        self.preset = Some(tag.into());
        self
    }

    pub fn family(&self) -> &OperatorFamily {
        &self.family
    }

    pub fn forcing(&self) -> &Forcing {
        &self.forcing
    }

    pub fn noise(&self) -> &NoiseMap {
        &self.noise
    }

    pub fn xi(&self) -> &DVector<f64> {
        &self.xi
    }

    pub fn beta(&self) -> f64 {
        self.forcing_params.beta
    }

    pub fn sigma(&self) -> f64 {
        self.forcing_params.sigma
    }

    pub fn forcing_params(&self) -> WeightedHolderParams {
        self.forcing_params
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn delta1(&self) -> f64 {
        self.delta1
    }

    pub fn horizon(&self) -> f64 {
        self.family.horizon()
    }

    pub fn preset(&self) -> Option<&str> {
        self.preset.as_deref()
    }

    /// Same problem with a different noise map (validated again).
    pub fn with_noise(&self, noise: NoiseMap) -> Result<Self> {
        let mut p = Self::new(
            self.family.clone(),
            self.forcing.clone(),
            self.beta(),
            self.sigma(),
            noise,
            self.delta,
            self.delta1,
            self.xi.clone(),
        )?;
        p.preset = self.preset.clone();
        Ok(p)
    }

    /// Stable 64-bit fingerprint of the numerical data (FNV-1a over the bits).
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |x: f64| {
            for b in x.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        let a0 = self.family.at(0.0).expect("A(0) assembles");
        let a_end = self.family.at(self.horizon()).expect("A(T) assembles");
        a0.iter().chain(a_end.iter()).for_each(|&x| eat(x));
        eat(self.horizon());
        eat(self.family.mu());
        self.forcing.profile.iter().for_each(|&x| eat(x));
        for t in [0.0, 0.25, 0.5, 1.0] {
            eat(self.forcing.time.eval(t * self.horizon()));
        }
        for c in self.noise.columns() {
            c.profile.iter().for_each(|&x| eat(x));
            for t in [0.0, 0.25, 0.5, 1.0] {
                eat(c.time.eval(t * self.horizon()));
            }
        }
        self.xi.iter().for_each(|&x| eat(x));
        for x in [self.beta(), self.sigma(), self.delta, self.delta1] {
            eat(x);
        }
        h
    }
}

/// One realisation of the solution and its pieces.
#[derive(Clone, Debug)]
pub struct SolutionPath {
    pub x: Trajectory,
    pub i1: Arc<Trajectory>,
    pub w0: Trajectory,
    pub w1: Trajectory,
    /// Raw left-point sums `Σ_{k<m} G(t_k)Δw_k`.
    pub ito_sum: Trajectory,
    pub driving: BrownianPath,
    pub scheme_tag: String,
    pub norm: NormKind,
}

impl SolutionPath {
    pub fn times(&self) -> &[f64] {
        self.x.times()
    }
}

/// Solver with everything that does not depend on the noise path precomputed.
#[derive(Clone, Debug)]
pub struct StrictSolver {
    problem: ProblemSpec,
    scheme: EvolutionScheme,
    grid: TimeGrid,
    steps: StepPropagators,
    a_powers: OperatorPowers,
    i1: Arc<Trajectory>,
}

impl StrictSolver {
    pub fn new(problem: &ProblemSpec, scheme: &EvolutionScheme, grid: &TimeGrid) -> Result<Self> {
        if scheme.family().dim() != problem.family().dim() {
            return Err(Error::Shape("scheme and problem families differ in dimension".into()));
        }
        if (grid.end() - problem.horizon()).abs() > 1e-12 * problem.horizon() || grid.start() != 0.0 {
            return Err(Error::Grid(format!(
                "solver grid [{}, {}] must span [0, {}]",
                grid.start(),
                grid.end(),
                problem.horizon()
            )));
        }
        let steps = StepPropagators::new(scheme, grid)?;
        let forcing = problem.forcing().sample(grid)?;
        let i1 = deterministic_solve_with(&steps, scheme, problem.xi(), &forcing, grid)?;
        let a_powers = OperatorPowers::new(problem.family(), grid.times(), 1.0)?;
        Ok(Self {
            problem: problem.clone(),
            scheme: scheme.clone(),
            grid: grid.clone(),
            steps,
            a_powers,
            i1: Arc::new(i1),
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn problem(&self) -> &ProblemSpec {
        &self.problem
    }

    pub fn scheme(&self) -> &EvolutionScheme {
        &self.scheme
    }

    /// `A(t_k)` on the solver grid.
    pub fn operator_at(&self, k: usize) -> &DMatrix<f64> {
        self.a_powers.at(k)
    }

    pub fn deterministic_part(&self) -> &Trajectory {
        &self.i1
    }

    pub fn solve(&self, path: &BrownianPath) -> Result<SolutionPath> {
        let driving = path.on_grid(&self.grid)?;
        let tag = self.scheme.tag();
        let w0 = stochastic_convolution_with(&self.steps, self.problem.noise(), &driving, &self.grid, tag.clone())?;
        let w1 = weight_trajectory(&w0, &self.a_powers)?;
        let x = self.i1.sum(&w0, Piece::Full)?;
        let noise = self.problem.noise();
        let times = self.grid.times();
        let mut acc = DVector::zeros(noise.dim());
        let mut sums = Vec::with_capacity(times.len());
        sums.push(acc.clone());
        for (k, &t) in times[..self.grid.steps()].iter().enumerate() {
            acc += noise.apply(t, driving.increment(k));
            sums.push(acc.clone());
        }
        let ito_sum = Trajectory::new(times.to_vec(), sums, tag.clone(), Piece::Stochastic)?;
        Ok(SolutionPath {
            x,
            i1: Arc::clone(&self.i1),
            w0,
            w1,
            ito_sum,
            driving,
            scheme_tag: tag,
            norm: self.problem.family().norm_kind(),
        })
    }

    /// Definition residual `max_m ∥X(t_m) − ξ + Σ A(t_k)X(t_k)Δt − Σ F(t_k)Δt − Σ G(t_k)Δw_k∥`.
    pub fn residual(&self, sol: &SolutionPath) -> Result<f64> {
        let times = self.grid.times();
        if sol.times() != times {
            return Err(Error::Shape("solution lives on another grid".into()));
        }
        let norm = &sol.norm;
        let forcing = self.problem.forcing();
        let xi = self.problem.xi();
        let mut drift = DVector::zeros(xi.len());
        let mut worst = norm.norm(&(sol.x.state(0) - xi - sol.ito_sum.state(0)));
        for m in 1..times.len() {
            let k = m - 1;
            let dt = self.grid.dt(k);
            drift += (self.operator_at(k) * sol.x.state(k) - forcing.at(times[k])) * dt;
            let defect = sol.x.state(m) - xi + &drift - sol.ito_sum.state(m);
            worst = worst.max(norm.norm(&defect));
        }
        Ok(worst)
    }
}

/// Solves on the driving path's own grid.
pub fn strict_solve(problem: &ProblemSpec, path: &BrownianPath, scheme: &EvolutionScheme) -> Result<SolutionPath> {
    let grid = TimeGrid::from_times(path.times().to_vec())?;
    StrictSolver::new(problem, scheme, &grid)?.solve(path)
}

/// Dual-norm defect of the integrated equation on the solution grid.
pub fn strict_residual(problem: &ProblemSpec, sol: &SolutionPath) -> Result<f64> {
    let grid = TimeGrid::from_times(sol.times().to_vec())?;
    let family = problem.family();
    let forcing = problem.forcing();
    let times = grid.times();
    let mut drift = DVector::zeros(problem.xi().len());
    let mut worst = sol.norm.norm(&(sol.x.state(0) - problem.xi()));
    for m in 1..times.len() {
        let k = m - 1;
        let dt = grid.dt(k);
        drift += (family.at(times[k])? * sol.x.state(k) - forcing.at(times[k])) * dt;
        let defect = sol.x.state(m) - problem.xi() + &drift - sol.ito_sum.state(m);
        worst = worst.max(sol.norm.norm(&defect));
    }
    Ok(worst)
}

/// `max_m ∥W₀(t_m) + Σ_{k<m} W₁(t_k)Δt − Σ_{k<m} G(t_k)Δw_k∥`.
pub fn fubini_defect(sol: &SolutionPath) -> f64 {
    let times = sol.times();
    let mut integral = DVector::zeros(sol.w0.dim());
    let mut worst = sol.norm.norm(&(sol.w0.state(0) - sol.ito_sum.state(0)));
    for m in 1..times.len() {
        let k = m - 1;
        integral += sol.w1.state(k) * (times[m] - times[k]);
        worst = worst.max(sol.norm.norm(&(sol.w0.state(m) + &integral - sol.ito_sum.state(m))));
    }
    worst
}

/// `sup_t ∥X(t) − Y(t)∥` in the state norm for two solutions on one grid.
pub fn solution_distance(a: &SolutionPath, b: &SolutionPath) -> Result<f64> {
    if a.times() != b.times() {
        return Err(Error::Shape("solutions live on different grids".into()));
    }
    Ok(a
        .x
        .states()
        .iter()
        .zip(b.x.states())
        .map(|(x, y)| a.norm.norm(&(x - y)))
        .fold(0.0, f64::max))
}

/// Distance between frozen-exponential and implicit-Euler solutions driven by
/// the same noise path on `grid`.
pub fn cross_scheme_distance(
    problem: &ProblemSpec,
    path: &BrownianPath,
    substeps_per_unit: usize,
    grid: &TimeGrid,
) -> Result<f64> {
    let solve = |kind: SchemeKind| -> Result<SolutionPath> {
        let scheme = EvolutionScheme::new(kind, substeps_per_unit, problem.family().clone())?;
        StrictSolver::new(problem, &scheme, grid)?.solve(path)
    };
    solution_distance(&solve(SchemeKind::FrozenExponential)?, &solve(SchemeKind::ImplicitEuler)?)
}

/// Summary of a single solve for reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub scheme: String,
    pub steps: usize,
    pub residual: f64,
    pub fubini_defect: f64,
    pub decomposition_defect: f64,
    pub w1_defect: f64,
    pub sup_norm: f64,
}

/// Residual, Fubini defect and the two pathwise identities `X = I₁ + W₀`,
/// `W₁ = A W₀`.
pub fn solve_report(solver: &StrictSolver, sol: &SolutionPath) -> Result<SolveReport> {
    let mut decomposition: f64 = 0.0;
    let mut w1_defect: f64 = 0.0;
    let mut sup: f64 = 0.0;
    for k in 0..sol.times().len() {
        let x = sol.x.state(k);
        decomposition = decomposition.max((x - sol.i1.state(k) - sol.w0.state(k)).amax());
        let aw0 = solver.operator_at(k) * sol.w0.state(k);
        w1_defect = w1_defect.max((sol.w1.state(k) - &aw0).amax() / (1.0 + aw0.amax()));
        sup = sup.max(sol.norm.norm(x));
    }
    Ok(SolveReport {
        scheme: sol.scheme_tag.clone(),
        steps: sol.times().len() - 1,
        residual: solver.residual(sol)?,
        fubini_defect: fubini_defect(sol),
        decomposition_defect: decomposition,
        w1_defect,
        sup_norm: sup,
    })
}
