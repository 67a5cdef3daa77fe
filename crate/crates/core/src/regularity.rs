//! Structure functions, Hölder exponent fits and moment-bound envelopes over
//! Monte Carlo ensembles.
//!
//! Every ensemble statistic is built from per-path summaries reduced in path
//! order, so a parallel driver that collects summaries by index reproduces the
//! serial result bit for bit.

#[allow(unused_imports)]
use nalgebra::ComplexField;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::Trajectory;
use crate::grid::TimeGrid;
use crate::holder::weighted_holder_norm;
use crate::operator::{NormKind, OperatorFamily};
use crate::stats::{linear_fit, MeanSe};
use crate::stochastic::{noise_condition_check, OperatorPowers};
use crate::strict::ProblemSpec;

/// Trajectories sharing one grid, with the keys that generated them.
#[derive(Clone, Debug)]
pub struct Ensemble {
    times: Vec<f64>,
    paths: Vec<Trajectory>,
    seeds: Vec<(u64, u64)>,
    problem_hash: Option<u64>,
    norm: NormKind,
}

impl Ensemble {
    pub fn new(
        paths: Vec<Trajectory>,
        seeds: Vec<(u64, u64)>,
        problem_hash: Option<u64>,
        norm: NormKind,
    ) -> Result<Self> {
        let first = paths
            .first()
            .ok_or_else(|| Error::InsufficientData("ensemble is empty".into()))?;
        let times = first.times().to_vec();
        let dim = first.dim();
        if paths.iter().any(|p| p.times() != times.as_slice() || p.dim() != dim) {
            return Err(Error::Shape("ensemble paths differ in grid or dimension".into()));
        }
        if seeds.len() != paths.len() {
            return Err(Error::Shape(format!("{} seeds for {} paths", seeds.len(), paths.len())));
        }
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Parameter("ensemble seeds must be distinct".into()));
        }
        Ok(Self {
            times,
            paths,
            seeds,
            problem_hash,
            norm,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn paths(&self) -> &[Trajectory] {
        &self.paths
    }

    pub fn seeds(&self) -> &[(u64, u64)] {
        &self.seeds
    }

    pub fn problem_hash(&self) -> Option<u64> {
        self.problem_hash
    }

    pub fn norm(&self) -> &NormKind {
        &self.norm
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// Every path multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let paths = self
            .paths
            .iter()
            .map(|p| p.map_states(p.piece(), |_, s| Ok(s * factor)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(paths, self.seeds.clone(), self.problem_hash, self.norm.clone())
    }
}

/// Lags and the time window over which increments are averaged.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureSpec {
    pub p: f64,
    pub lags: Vec<f64>,
    /// Increments `ζ(t+τ) − ζ(t)` are used when both ends lie in the window.
    pub window: (f64, f64),
}

/// Lag `τ` as a whole number of steps of a uniform grid.
fn lag_steps(times: &[f64], lag: f64) -> Result<usize> {
    let grid = TimeGrid::from_times(times.to_vec())?;
    let dt = grid
        .uniform_dt()
        .ok_or_else(|| Error::Grid("structure functions need a uniform grid".into()))?;
    if !(lag > 0.0) || lag < dt * (1.0 - 1e-9) {
        return Err(Error::Lag(format!("lag {lag} is below the grid resolution {dt}")));
    }
    let k = (lag / dt).round();
    if (k * dt - lag).abs() > 1e-9 * lag {
        return Err(Error::Lag(format!("lag {lag} is not a multiple of the step {dt}")));
    }
    Ok(k as usize)
}

impl StructureSpec {
    /// Dyadic lags `4Δt·2^j` up to `T/8` over the whole horizon.
    pub fn default_for(times: &[f64], p: f64) -> Result<Self> {
        let grid = TimeGrid::from_times(times.to_vec())?;
        let dt = grid
            .uniform_dt()
            .ok_or_else(|| Error::Grid("structure functions need a uniform grid".into()))?;
        Ok(Self {
            p,
            lags: dyadic_lags(4.0 * dt, (grid.end() - grid.start()) / 8.0),
            window: (grid.start(), grid.end()),
        })
    }

    fn validate(&self, times: &[f64]) -> Result<Vec<usize>> {
        if !(self.p >= 1.0) {
            return Err(Error::Parameter(format!("moment order p = {} must be at least 1", self.p)));
        }
        if self.lags.is_empty() {
            return Err(Error::Lag("no lags requested".into()));
        }
        if self.lags.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Lag("lags must be strictly increasing".into()));
        }
        let steps: Vec<usize> = self.lags.iter().map(|&l| lag_steps(times, l)).collect::<Result<_>>()?;
        let (lo, hi) = self.window;
        let admissible = times.iter().filter(|&&t| t >= lo - 1e-12 && t <= hi + 1e-12).count();
        if let Some(&k) = steps.iter().find(|&&k| k >= admissible) {
            return Err(Error::Lag(format!("lag of {k} steps does not fit the window [{lo}, {hi}]")));
        }
        Ok(steps)
    }
}

/// `base·2^j` for every `j ≥ 0` with `base·2^j ≤ max`.
pub fn dyadic_lags(base: f64, max: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut l = base;
    while l <= max * (1.0 + 1e-12) {
        out.push(l);
        l *= 2.0;
    }
    out
}

/// Mean over admissible `t` of `∥ζ(t+τ) − ζ(t)∥^p` for each lag, for one path.
pub fn path_structure(path: &Trajectory, norm: &NormKind, spec: &StructureSpec) -> Result<Vec<f64>> {
    let steps = spec.validate(path.times())?;
    let coords: Vec<DVector<f64>> = path.states().iter().map(|s| norm.transform(s)).collect();
    Ok(structure_from_coords(path.times(), &coords, spec.p, &steps, spec.window))
}

fn structure_from_coords(times: &[f64], coords: &[DVector<f64>], p: f64, steps: &[usize], window: (f64, f64)) -> Vec<f64> {
    let (lo, hi) = window;
    let start = times.iter().position(|&t| t >= lo - 1e-12).unwrap_or(times.len());
    let end = times.iter().rposition(|&t| t <= hi + 1e-12).map_or(0, |i| i + 1);
    steps
        .iter()
        .map(|&k| {
            let mut sum = 0.0;
            let mut count = 0usize;
            for i in start..end.saturating_sub(k) {
                let d = (&coords[i + k] - &coords[i]).norm();
                sum += if p == 2.0 { d * d } else { d.powf(p) };
                count += 1;
            }
            sum / count.max(1) as f64
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureTable {
    pub lags: Vec<f64>,
    /// Mean over paths of the per-path lag averages.
    pub moments: Vec<f64>,
    /// Standard error across independent paths.
    pub se: Vec<f64>,
    pub p: f64,
    pub norm_kind: String,
    pub paths: usize,
}

impl StructureTable {
    /// Reduces per-path lag averages in the order given.
    pub fn from_path_means(spec: &StructureSpec, per_path: &[Vec<f64>], norm_kind: &str) -> Result<Self> {
        if per_path.is_empty() {
            return Err(Error::InsufficientData("no paths".into()));
        }
        let nl = spec.lags.len();
        if per_path.iter().any(|v| v.len() != nl) {
            return Err(Error::Shape("per-path structure vectors differ in length".into()));
        }
        let mut moments = Vec::with_capacity(nl);
        let mut se = Vec::with_capacity(nl);
        for l in 0..nl {
            let vals: Vec<f64> = per_path.iter().map(|v| v[l]).collect();
            let m = MeanSe::of(&vals);
            moments.push(m.mean);
            se.push(m.se);
        }
        Ok(Self {
            lags: spec.lags.clone(),
            moments,
            se,
            p: spec.p,
            norm_kind: norm_kind.into(),
            paths: per_path.len(),
        })
    }
}

/// Structure function of an ensemble.
pub fn structure_function(ensemble: &Ensemble, spec: &StructureSpec) -> Result<StructureTable> {
    let per_path = ensemble
        .paths()
        .iter()
        .map(|p| path_structure(p, ensemble.norm(), spec))
        .collect::<Result<Vec<_>>>()?;
    StructureTable::from_path_means(spec, &per_path, ensemble.norm().label())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// Fitted scaling exponent of `E∥Δζ∥^p ≈ C τ^ε`; `None` for degenerate tables.
    pub epsilon_hat: Option<f64>,
    /// 95% interval for `epsilon_hat`.
    pub epsilon_ci: Option<(f64, f64)>,
    /// `ε̂/p`: the Hölder exponent implied by the moment scaling.
    pub holder_hat: Option<f64>,
    /// `(ε̂ − 1)/p`: the Kolmogorov exponent with `1 + ε₂ = ε̂`, `ε₁ = p`.
    pub kolmogorov_hat: Option<f64>,
    pub c_hat: Option<f64>,
    pub window: (f64, f64),
    pub p: f64,
    pub degenerate: bool,
}

pub const MIN_FIT_LAGS: usize = 4;

/// Weighted least squares of `ln E∥Δζ∥^p` against `ln τ`.
pub fn estimate_holder_exponent(table: &StructureTable) -> Result<FitReport> {
    let usable = table.se.iter().filter(|s| s.is_finite()).count();
    if table.lags.len() < MIN_FIT_LAGS || usable < MIN_FIT_LAGS {
        return Err(Error::InsufficientData(format!(
            "exponent fits need at least {MIN_FIT_LAGS} lags with finite errors, got {usable}"
        )));
    }
    let window = (table.lags[0], *table.lags.last().expect("non-empty"));
    let degenerate = FitReport {
        epsilon_hat: None,
        epsilon_ci: None,
        holder_hat: None,
        kolmogorov_hat: None,
        c_hat: None,
        window,
        p: table.p,
        degenerate: true,
    };
    if table.moments.iter().any(|m| !(*m > 0.0)) {
        return Ok(degenerate);
    }
    let xs: Vec<f64> = table.lags.iter().map(|l| l.ln()).collect();
    let ys: Vec<f64> = table.moments.iter().map(|m| m.ln()).collect();
    // Var(ln m) ≈ (se/m)²; exact tables carry equal weights.
    let weights: Option<Vec<f64>> = if table.se.iter().all(|s| *s > 0.0) {
        Some(table.moments.iter().zip(&table.se).map(|(m, s)| (m / s).powi(2)).collect())
    } else {
        None
    };
    let Some(fit) = linear_fit(&xs, &ys, weights.as_deref()) else {
        return Ok(degenerate);
    };
    let eps = fit.slope;
    let half = 1.96 * fit.slope_se;
    Ok(FitReport {
        epsilon_hat: Some(eps),
        epsilon_ci: Some((eps - half, eps + half)),
        holder_hat: Some(eps / table.p),
        kolmogorov_hat: Some((eps - 1.0) / table.p),
        c_hat: Some(fit.intercept.exp()),
        window,
        p: table.p,
        degenerate: false,
    })
}

/// `∥A(t_k)^θ ζ(t_k)∥²` along one path.
pub fn path_weighted_sq(path: &Trajectory, powers: &OperatorPowers, norm: &NormKind) -> Vec<f64> {
    path.states()
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let v = if powers.theta() == 0.0 {
                norm.norm(s)
            } else {
                norm.norm(&(powers.at(k) * s))
            };
            v * v
        })
        .collect()
}

/// Pointwise mean and standard error of per-path curves, reduced in order.
pub fn mean_curve(per_path: &[Vec<f64>]) -> Result<Vec<MeanSe>> {
    let first = per_path
        .first()
        .ok_or_else(|| Error::InsufficientData("no paths".into()))?;
    if per_path.iter().any(|c| c.len() != first.len()) {
        return Err(Error::Shape("curves differ in length".into()));
    }
    Ok((0..first.len())
        .map(|k| {
            let vals: Vec<f64> = per_path.iter().map(|c| c[k]).collect();
            MeanSe::of(&vals)
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MomentRegime {
    /// `β ≥ δ`: noise terms scale as `t^{1−2(β−δ)}`.
    BetaAtLeastDelta,
    /// `β < δ`: noise terms scale as `t`.
    BetaBelowDelta,
}

/// Ingredient norms of the moment envelope.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeTerms {
    /// `∥A(0)^β ξ∥²`
    pub initial: f64,
    /// `∥F∥²` in `F^{β,σ}`
    pub forcing: f64,
    /// `∥A(0)^δ G(0)∥²`
    pub noise_origin: f64,
    /// `ζ̂²`, the measured (G1) constant squared.
    pub noise_holder: f64,
    /// Exponent of the `noise_origin` term.
    pub exponent: f64,
    pub sigma: f64,
}

impl EnvelopeTerms {
    pub fn eval(&self, t: f64) -> f64 {
        let pow = |e: f64| if t == 0.0 { if e == 0.0 { 1.0 } else { 0.0 } } else { t.powf(e) };
        self.initial
            + self.forcing
            + self.noise_origin * pow(self.exponent)
            + self.noise_holder * pow(self.exponent + 2.0 * self.sigma)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentBoundReport {
    /// Smallest `C` with `E∥A^βX(t)∥² ≤ C·envelope(t)` at every grid time.
    pub c_hat: f64,
    pub binding_time: f64,
    pub regime: MomentRegime,
    pub terms: EnvelopeTerms,
    /// `(t, mean, se, envelope)`
    pub curve: Vec<(f64, f64, f64, f64)>,
    pub dominated: bool,
}

/// Envelope ingredients for `problem` measured on `times`.
pub fn envelope_terms(problem: &ProblemSpec, times: &[f64]) -> Result<EnvelopeTerms> {
    let family = problem.family();
    let norm = family.norm_kind();
    let (beta, delta, sigma) = (problem.beta(), problem.delta(), problem.sigma());
    let initial = family.dual_norm(&family.reference().apply(|l| l.powf(beta), problem.xi()))?.powi(2);
    let grid = TimeGrid::from_times(times.to_vec())?;
    let forcing = if problem.forcing().is_zero() {
        0.0
    } else {
        let sampled = problem.forcing().sample(&grid)?;
        let sampled = crate::holder::SampledPath::new(sampled.times().to_vec(), sampled.values().to_vec(), norm)?;
        weighted_holder_norm(&sampled, &problem.forcing_params())?.norm.powi(2)
    };
    let noise_origin = family
        .state_map_norm(&(family.reference().power(delta) * problem.noise().at(0.0)))
        .powi(2);
    let noise_holder = if problem.noise().is_zero() {
        0.0
    } else {
        // The (G1) constant on at most 17 evenly spaced sample times.
        let stride = (times.len() - 1).div_ceil(16).max(1);
        let mut coarse: Vec<f64> = times.iter().step_by(stride).copied().collect();
        if *coarse.last().expect("non-empty") != *times.last().expect("non-empty") {
            coarse.push(*times.last().expect("non-empty"));
        }
        let r = noise_condition_check(problem.noise(), family, delta, problem.delta1(), sigma, &coarse)?;
        r.zeta_hat.powi(2)
    };
    let regime_exp = if beta >= delta { 1.0 - 2.0 * (beta - delta) } else { 1.0 };
    Ok(EnvelopeTerms {
        initial,
        forcing,
        noise_origin,
        noise_holder,
        exponent: regime_exp,
        sigma,
    })
}

/// Fits the moment-bound constant from per-time means of `∥A(t)^βX(t)∥²`.
pub fn moment_bound_from_curve(
    problem: &ProblemSpec,
    times: &[f64],
    curve: &[MeanSe],
) -> Result<MomentBoundReport> {
    if curve.len() != times.len() {
        return Err(Error::Shape("curve and times differ in length".into()));
    }
    let terms = envelope_terms(problem, times)?;
    let regime = if problem.beta() >= problem.delta() {
        MomentRegime::BetaAtLeastDelta
    } else {
        MomentRegime::BetaBelowDelta
    };
    let mut c_hat = 0.0_f64;
    let mut binding_time = times[0];
    let mut rows = Vec::with_capacity(times.len());
    for (&t, m) in times.iter().zip(curve) {
        let env = terms.eval(t);
        let ratio = if m.mean == 0.0 {
            0.0
        } else if env > 0.0 {
            m.mean / env
        } else {
            f64::INFINITY
        };
        if ratio > c_hat {
            c_hat = ratio;
            binding_time = t;
        }
        rows.push((t, m.mean, m.se, env));
    }
    let dominated = c_hat.is_finite() && rows.iter().all(|&(_, m, _, env)| m <= c_hat * env * (1.0 + 1e-12));
    Ok(MomentBoundReport {
        c_hat,
        binding_time,
        regime,
        terms,
        curve: rows,
        dominated,
    })
}

/// Fits `Ĉ` so that the regime-appropriate envelope dominates `E∥A^βX(t)∥²`.
pub fn moment_bound_check(ensemble: &Ensemble, problem: &ProblemSpec) -> Result<MomentBoundReport> {
    if let Some(h) = ensemble.problem_hash() {
        if h != problem.fingerprint() {
            return Err(Error::Parameter("ensemble was generated from a different problem".into()));
        }
    }
    let powers = OperatorPowers::new(problem.family(), ensemble.times(), problem.beta())?;
    let per_path: Vec<Vec<f64>> = ensemble
        .paths()
        .iter()
        .map(|p| path_weighted_sq(p, &powers, ensemble.norm()))
        .collect();
    moment_bound_from_curve(problem, ensemble.times(), &mean_curve(&per_path)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub times: Vec<f64>,
    pub thetas: Vec<f64>,
    /// `curves[i][k]` summarises `E∥A(t_k)^{θ_i}X(t_k)∥²`.
    pub curves: Vec<Vec<MeanSe>>,
    pub paths: usize,
}

/// Mean curves `E∥A(t)^θX(t)∥²` with standard errors for each θ.
pub fn summarize_ensemble(ensemble: &Ensemble, family: &OperatorFamily, thetas: &[f64]) -> Result<EnsembleSummary> {
    let curves = thetas
        .iter()
        .map(|&theta| {
            if !(0.0..=1.0).contains(&theta) {
                return Err(Error::Parameter(format!("theta = {theta} not in [0, 1]")));
            }
            let powers = OperatorPowers::new(family, ensemble.times(), theta)?;
            let per_path: Vec<Vec<f64>> = ensemble
                .paths()
                .iter()
                .map(|p| path_weighted_sq(p, &powers, ensemble.norm()))
                .collect();
            mean_curve(&per_path)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EnsembleSummary {
        times: ensemble.times().to_vec(),
        thetas: thetas.to_vec(),
        curves,
        paths: ensemble.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{EvolutionScheme, Piece, SchemeKind};
    use crate::coefficients::TimeFn;
    use crate::stochastic::{sample_brownian_path, NoiseMap};
    use crate::strict::{Forcing, StrictSolver};
    use alloc::vec;
    use nalgebra::DMatrix;

    fn scalar_traj(times: &[f64], vals: &[f64]) -> Trajectory {
        Trajectory::new(
            times.to_vec(),
            vals.iter().map(|&v| DVector::from_element(1, v)).collect(),
            "test".into(),
            Piece::Full,
        )
        .unwrap()
    }

    fn brownian_ensemble(paths: usize, steps: usize, seed: u64) -> Ensemble {
        let grid = TimeGrid::uniform(1.0, steps).unwrap();
        let trajs: Vec<Trajectory> = (0..paths as u64)
            .map(|i| {
                let p = sample_brownian_path(1, &grid, seed, i).unwrap();
                let vals: Vec<f64> = p.values().iter().map(|v| v[0]).collect();
                scalar_traj(grid.times(), &vals)
            })
            .collect();
        let seeds = (0..paths as u64).map(|i| (seed, i)).collect();
        Ensemble::new(trajs, seeds, None, NormKind::Euclidean).unwrap()
    }

    #[test]
    fn constant_process_is_degenerate() {
        let grid = TimeGrid::uniform(1.0, 256).unwrap();
        let e = Ensemble::new(
            vec![scalar_traj(grid.times(), &vec![2.0; 257])],
            vec![(0, 0)],
            None,
            NormKind::Euclidean,
        )
        .unwrap();
        let spec = StructureSpec::default_for(grid.times(), 2.0).unwrap();
        let t = structure_function(&e, &spec).unwrap();
        assert!(t.moments.iter().all(|m| *m == 0.0));
        let f = estimate_holder_exponent(&t).unwrap();
        assert!(f.degenerate && f.holder_hat.is_none());
    }

    #[test]
    fn linear_path_has_exponent_two() {
        let grid = TimeGrid::uniform(1.0, 256).unwrap();
        let vals: Vec<f64> = grid.times().to_vec();
        let e = Ensemble::new(vec![scalar_traj(grid.times(), &vals)], vec![(0, 0)], None, NormKind::Euclidean).unwrap();
        let spec = StructureSpec::default_for(grid.times(), 2.0).unwrap();
        let f = estimate_holder_exponent(&structure_function(&e, &spec).unwrap()).unwrap();
        assert!((f.epsilon_hat.unwrap() - 2.0).abs() < 1e-10);
        assert!((f.holder_hat.unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn brownian_structure_function() {
        let e = brownian_ensemble(400, 1024, 21);
        let spec = StructureSpec::default_for(e.times(), 2.0).unwrap();
        let t = structure_function(&e, &spec).unwrap();
        for ((lag, m), se) in t.lags.iter().zip(&t.moments).zip(&t.se) {
            assert!((m - lag).abs() <= 3.0 * se, "{lag}: {m} ± {se}");
        }
        let f = estimate_holder_exponent(&t).unwrap();
        assert!((f.holder_hat.unwrap() - 0.5).abs() <= 0.05, "{f:?}");
        let (lo, hi) = f.epsilon_ci.unwrap();
        assert!(lo <= f.epsilon_hat.unwrap() && f.epsilon_hat.unwrap() <= hi);
    }

    #[test]
    fn scaling_leaves_exponent_unchanged() {
        let e = brownian_ensemble(50, 256, 3);
        let spec = StructureSpec::default_for(e.times(), 2.0).unwrap();
        let a = estimate_holder_exponent(&structure_function(&e, &spec).unwrap()).unwrap();
        let b = estimate_holder_exponent(&structure_function(&e.scaled(3.0).unwrap(), &spec).unwrap()).unwrap();
        assert!((a.epsilon_hat.unwrap() - b.epsilon_hat.unwrap()).abs() < 1e-10);
        assert!((b.c_hat.unwrap() / a.c_hat.unwrap() - 9.0).abs() < 1e-8);
    }

    #[test]
    fn lag_validation() {
        let grid = TimeGrid::uniform(1.0, 64).unwrap();
        let e = Ensemble::new(vec![scalar_traj(grid.times(), &vec![0.0; 65])], vec![(0, 0)], None, NormKind::Euclidean)
            .unwrap();
        let bad = StructureSpec { p: 2.0, lags: vec![1.0 / 128.0], window: (0.0, 1.0) };
        assert!(matches!(structure_function(&e, &bad), Err(Error::Lag(_))));
        let odd = StructureSpec { p: 2.0, lags: vec![1.5 / 64.0], window: (0.0, 1.0) };
        assert!(matches!(structure_function(&e, &odd), Err(Error::Lag(_))));
        assert!(Ensemble::new(
            vec![scalar_traj(grid.times(), &vec![0.0; 65]); 2],
            vec![(0, 0), (0, 0)],
            None,
            NormKind::Euclidean
        )
        .is_err());
    }

    fn ou_problem() -> ProblemSpec {
        let fam = OperatorFamily::autonomous(DMatrix::from_element(1, 1, 1.0), 1.0).unwrap();
        let noise = NoiseMap::separable(TimeFn::constant(1.0), DVector::from_element(1, 1.0), "ou").unwrap();
        ProblemSpec::new(fam, Forcing::zero(1), 0.5, 0.3, noise, 0.7, 0.9, DVector::zeros(1)).unwrap()
    }

    fn ou_ensemble(p: &ProblemSpec, paths: usize, steps: usize) -> Ensemble {
        let grid = TimeGrid::uniform(1.0, steps).unwrap();
        let scheme = EvolutionScheme::new(SchemeKind::FrozenExponential, steps, p.family().clone()).unwrap();
        let solver = StrictSolver::new(p, &scheme, &grid).unwrap();
        let trajs = (0..paths as u64)
            .map(|i| solver.solve(&sample_brownian_path(1, &grid, 77, i).unwrap()).unwrap().x)
            .collect();
        Ensemble::new(trajs, (0..paths as u64).map(|i| (77, i)).collect(), Some(p.fingerprint()), p.family().norm_kind())
            .unwrap()
    }

    #[test]
    fn ou_summary_matches_closed_form() {
        let p = ou_problem();
        let e = ou_ensemble(&p, 2000, 100);
        let s = summarize_ensemble(&e, p.family(), &[0.0]).unwrap();
        for (k, &t) in e.times().iter().enumerate().skip(1).step_by(10) {
            // Left-point sums of the exact variance integrand.
            let exact = (1.0 - (-2.0 * t).exp()) / 2.0;
            let m = s.curves[0][k];
            assert!((m.mean - exact).abs() <= 3.0 * m.se + 0.01 * exact, "t={t}: {m:?} vs {exact}");
        }
    }

    #[test]
    fn moment_bound_for_ou_is_finite_and_dominating() {
        let p = ou_problem();
        let e = ou_ensemble(&p, 500, 64);
        let r = moment_bound_check(&e, &p).unwrap();
        assert!(r.c_hat.is_finite() && r.c_hat > 0.0);
        assert!(r.dominated);
        assert_eq!(r.regime, MomentRegime::BetaBelowDelta);
        let other = ProblemSpec::new(
            p.family().clone(), Forcing::zero(1), 0.5, 0.3, NoiseMap::zero(1, 1), 0.7, 0.9, DVector::zeros(1),
        )
        .unwrap();
        assert!(matches!(moment_bound_check(&e, &other), Err(Error::Parameter(_))));
    }

    #[test]
    fn zero_problem_has_zero_constant() {
        let fam = OperatorFamily::autonomous(DMatrix::from_element(1, 1, 1.0), 1.0).unwrap();
        let p = ProblemSpec::new(fam, Forcing::zero(1), 1.0, 0.3, NoiseMap::zero(1, 1), 0.7, 0.9, DVector::zeros(1))
            .unwrap();
        let e = ou_ensemble(&p, 3, 16);
        let r = moment_bound_check(&e, &p).unwrap();
        assert_eq!(r.c_hat, 0.0);
    }

    #[test]
    fn pooled_means_are_weighted_averages() {
        let e = brownian_ensemble(30, 32, 5);
        let curves: Vec<Vec<f64>> = e.paths().iter().map(|p| p.states().iter().map(|s| s[0] * s[0]).collect()).collect();
        let all = mean_curve(&curves).unwrap();
        let a = mean_curve(&curves[..10]).unwrap();
        let b = mean_curve(&curves[10..]).unwrap();
        for k in 0..all.len() {
            let pooled = (10.0 * a[k].mean + 20.0 * b[k].mean) / 30.0;
            assert!((pooled - all[k].mean).abs() < 1e-14);
        }
    }

    /// Exact AR(1) sampling of the stationary OU process `dX = −X dt + dw`.
    fn stationary_ou(paths: usize, steps: usize, horizon: f64, seed: u64) -> Ensemble {
        use rand_distr::{Distribution, StandardNormal};
        let grid = TimeGrid::uniform(horizon, steps).unwrap();
        let dt = horizon / steps as f64;
        let decay = (-dt).exp();
        let kick = ((1.0 - decay * decay) / 2.0).sqrt();
        let trajs = (0..paths as u64)
            .map(|i| {
                let mut rng = crate::stochastic::path_rng(seed, i);
                let mut x: f64 = StandardNormal.sample(&mut rng);
                x *= 0.5f64.sqrt();
                let mut vals = vec![x];
                for _ in 0..steps {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    x = decay * x + kick * z;
                    vals.push(x);
                }
                scalar_traj(grid.times(), &vals)
            })
            .collect();
        Ensemble::new(trajs, (0..paths as u64).map(|i| (seed, i)).collect(), None, NormKind::Euclidean).unwrap()
    }

    #[test]
    fn stationary_ou_structure_function() {
        let e = stationary_ou(400, 512, 2.0, 8);
        let spec = StructureSpec::default_for(e.times(), 2.0).unwrap();
        let t = structure_function(&e, &spec).unwrap();
        for ((lag, m), se) in t.lags.iter().zip(&t.moments).zip(&t.se) {
            let exact = 1.0 - (-lag).exp();
            assert!((m - exact).abs() <= 3.0 * se, "{lag}: {m} ± {se} vs {exact}");
        }
    }

    #[test]
    fn stationary_structure_is_translation_invariant() {
        let e = stationary_ou(400, 512, 2.0, 9);
        let lags = dyadic_lags(4.0 * 2.0 / 512.0, 0.25);
        let early = StructureSpec { p: 2.0, lags: lags.clone(), window: (0.0, 1.0) };
        let late = StructureSpec { p: 2.0, lags, window: (1.0, 2.0) };
        let a = structure_function(&e, &early).unwrap();
        let b = structure_function(&e, &late).unwrap();
        for l in 0..a.lags.len() {
            let joint = (a.se[l].powi(2) + b.se[l].powi(2)).sqrt();
            assert!((a.moments[l] - b.moments[l]).abs() <= 3.0 * joint, "lag {}", a.lags[l]);
        }
    }

    #[test]
    fn single_constant_path_has_zero_bands() {
        let grid = TimeGrid::uniform(1.0, 8).unwrap();
        let e = Ensemble::new(vec![scalar_traj(grid.times(), &[1.5; 9])], vec![(0, 0)], None, NormKind::Euclidean)
            .unwrap();
        let fam = OperatorFamily::autonomous(DMatrix::from_element(1, 1, 1.0), 1.0).unwrap();
        let s = summarize_ensemble(&e, &fam, &[0.0, 1.0]).unwrap();
        assert!(s.curves.iter().flatten().all(|m| m.se == 0.0 && (m.mean - 2.25).abs() < 1e-12));
    }

    #[test]
    fn eigenvector_decay_curve() {
        let base = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0]);
        let fam = OperatorFamily::autonomous(base, 1.0).unwrap();
        let lambda = fam.reference().eigenvalues[1];
        let xi = fam.reference().eigenvectors.column(1).into_owned();
        let beta = 0.8;
        let p = ProblemSpec::new(fam, Forcing::zero(3), beta, 0.3, NoiseMap::zero(3, 1), 0.7, 0.9, xi).unwrap();
        let e = ou_ensemble(&p, 1, 64);
        let r = moment_bound_check(&e, &p).unwrap();
        for &(t, m, _, _) in &r.curve {
            // ∥ξ∥_E² = ∥A^{-1/2}ξ∥² = 1/λ
            let exact = lambda.powf(2.0 * beta) * (-2.0 * lambda * t).exp() / lambda;
            assert!((m - exact).abs() <= 1e-10 * exact.max(1e-300), "t={t}: {m} vs {exact}");
        }
        assert!(r.c_hat.is_finite() && r.c_hat <= 1.0 + 1e-12 && r.dominated);
        assert_eq!(r.binding_time, 0.0);
    }

    proptest::proptest! {
        #[test]
        fn scaling_changes_only_the_prefactor(factor in 0.05f64..20.0, seed in 0u64..50) {
            let e = brownian_ensemble(8, 256, seed);
            let spec = StructureSpec::default_for(e.times(), 2.0).unwrap();
            let a = estimate_holder_exponent(&structure_function(&e, &spec).unwrap()).unwrap();
            let b = estimate_holder_exponent(&structure_function(&e.scaled(factor).unwrap(), &spec).unwrap()).unwrap();
            proptest::prop_assert!((a.epsilon_hat.unwrap() - b.epsilon_hat.unwrap()).abs() < 1e-9);
            let ratio = b.c_hat.unwrap() / a.c_hat.unwrap();
            proptest::prop_assert!((ratio / (factor * factor) - 1.0).abs() < 1e-8);
        }
    }
}
