//! Brownian drivers, left-point Itô sums, stochastic convolutions and the
//! noise-regularity conditions.

#[allow(unused_imports)]
use nalgebra::ComplexField;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::coefficients::TimeFn;
use crate::error::{Error, Result};
use crate::evolution::{check_same_grid, EvolutionScheme, Piece, StepPropagators, Trajectory};
use crate::grid::TimeGrid;
use crate::operator::{all_pairs, fractional_difference_constant, OperatorFamily};
use crate::stats::{batch_means, MeanSe};

/// Real `d`-dimensional Brownian increments on a time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct BrownianPath {
    d: usize,
    times: Vec<f64>,
    /// Row-major `steps × d`.
    increments: Vec<f64>,
    seed: u64,
    path_index: u64,
}

/// Generator for path `path_index` under `seed`; each path owns a stream.
pub fn path_rng(seed: u64, path_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_index);
    rng
}

impl BrownianPath {
    pub fn from_increments(d: usize, grid: &TimeGrid, increments: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(Error::Parameter("driver dimension must be at least 1".into()));
        }
        if increments.len() != grid.steps() * d {
            return Err(Error::Shape(format!(
                "{} increments for {} steps of dimension {d}",
                increments.len(),
                grid.steps()
            )));
        }
        Ok(Self {
            d,
            times: grid.times().to_vec(),
            increments,
            seed: 0,
            path_index: 0,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path_index(&self) -> u64 {
        self.path_index
    }

    /// `Δw_k` as a slice of length `d`.
    pub fn increment(&self, k: usize) -> &[f64] {
        &self.increments[k * self.d..(k + 1) * self.d]
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// `w(t_k)` for every grid time, starting from zero.
    pub fn values(&self) -> Vec<DVector<f64>> {
        let mut w = DVector::zeros(self.d);
        let mut out = Vec::with_capacity(self.times.len());
        out.push(w.clone());
        for k in 0..self.steps() {
            for (j, dw) in self.increment(k).iter().enumerate() {
                w[j] += dw;
            }
            out.push(w.clone());
        }
        out
    }

    /// Sums increments over blocks of `factor` steps, giving the same path on
    /// the coarser grid.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !self.steps().is_multiple_of(factor) {
            return Err(Error::Grid(format!(
                "factor {factor} does not divide {} steps",
                self.steps()
            )));
        }
        let coarse_steps = self.steps() / factor;
        let mut increments = alloc::vec![0.0; coarse_steps * self.d];
        for k in 0..self.steps() {
            let c = k / factor;
            for j in 0..self.d {
                increments[c * self.d + j] += self.increments[k * self.d + j];
            }
        }
        Ok(Self {
            d: self.d,
            times: self.times.iter().step_by(factor).copied().collect(),
            increments,
            seed: self.seed,
            path_index: self.path_index,
        })
    }

    /// This path restricted to `grid`, which must be a coarsening of its own grid.
    pub fn on_grid(&self, grid: &TimeGrid) -> Result<Self> {
        let own = TimeGrid::from_times(self.times.clone())?;
        let factor = own.refinement_factor_over(grid).ok_or_else(|| {
            Error::Shape(format!(
                "solver grid with {} steps is not a coarsening of the path grid with {} steps",
                grid.steps(),
                self.steps()
            ))
        })?;
        if factor == 1 {
            Ok(self.clone())
        } else {
            self.coarsen(factor)
        }
    }
}

/// Independent `N(0, Δt)` increments; path 0 of the seed's stream family.
pub fn sample_brownian(d: usize, grid: &TimeGrid, seed: u64) -> Result<BrownianPath> {
    sample_brownian_path(d, grid, seed, 0)
}

/// Path `path_index` of an ensemble keyed by `seed`.
pub fn sample_brownian_path(d: usize, grid: &TimeGrid, seed: u64, path_index: u64) -> Result<BrownianPath> {
    if d == 0 {
        return Err(Error::Parameter("driver dimension must be at least 1".into()));
    }
    let mut rng = path_rng(seed, path_index);
    let mut increments = Vec::with_capacity(grid.steps() * d);
    for k in 0..grid.steps() {
        let sd = grid.dt(k).sqrt();
        for _ in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            increments.push(z * sd);
        }
    }
    Ok(BrownianPath {
        d,
        times: grid.times().to_vec(),
        increments,
        seed,
        path_index,
    })
}

/// `Σ_k φ(t_k)Δw_k` for per-step `n×d` integrands.
pub fn ito_integral(phi: &[DMatrix<f64>], path: &BrownianPath) -> Result<DVector<f64>> {
    if phi.len() != path.steps() {
        return Err(Error::Shape(format!(
            "{} integrand samples for {} steps",
            phi.len(),
            path.steps()
        )));
    }
    let n = phi.first().map_or(0, |m| m.nrows());
    let mut acc = DVector::zeros(n);
    for (k, m) in phi.iter().enumerate() {
        if m.ncols() != path.d() || m.nrows() != n {
            return Err(Error::Shape(format!(
                "integrand {k} is {}×{}, expected {n}×{}",
                m.nrows(),
                m.ncols(),
                path.d()
            )));
        }
        acc += m * DVector::from_column_slice(path.increment(k));
    }
    Ok(acc)
}

/// Running scalar Itô sums `M(t_k) = Σ_{j<k} φ_j Δw_j` for a one-dimensional driver.
pub fn ito_running_scalar(phi: &[f64], path: &BrownianPath) -> Result<Vec<f64>> {
    if path.d() != 1 || phi.len() != path.steps() {
        return Err(Error::Shape(format!(
            "scalar integral needs d = 1 and {} samples (got d = {}, {} samples)",
            path.steps(),
            path.d(),
            phi.len()
        )));
    }
    let mut out = Vec::with_capacity(phi.len() + 1);
    let mut m = 0.0;
    out.push(m);
    for (k, p) in phi.iter().enumerate() {
        m += p * path.increments[k];
        out.push(m);
    }
    Ok(out)
}

/// One column of `G(t)`: `time(t)·profile`.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseColumn {
    pub time: TimeFn,
    pub profile: DVector<f64>,
}

/// `G(t) ∈ L(ℝ^d; ℝ^n)` built from separable columns.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseMap {
    columns: Vec<NoiseColumn>,
    description: String,
}

impl NoiseMap {
    pub fn new(columns: Vec<NoiseColumn>, description: impl Into<String>) -> Result<Self> {
        let first = columns
            .first()
            .ok_or_else(|| Error::Parameter("noise needs at least one column".into()))?;
        let n = first.profile.len();
        if columns.iter().any(|c| c.profile.len() != n) {
            return Err(Error::Shape("noise columns differ in dimension".into()));
        }
        if columns.iter().any(|c| c.profile.iter().any(|x| !x.is_finite())) {
            return Err(Error::Numeric("noise profile is not finite".into()));
        }
        Ok(Self {
            columns,
            description: description.into(),
        })
    }

    pub fn separable(time: TimeFn, profile: DVector<f64>, description: impl Into<String>) -> Result<Self> {
        Self::new(alloc::vec![NoiseColumn { time, profile }], description)
    }

    pub fn zero(n: usize, d: usize) -> Self {
        Self {
            columns: (0..d.max(1))
                .map(|_| NoiseColumn {
                    time: TimeFn::constant(0.0),
                    profile: DVector::zeros(n),
                })
                .collect(),
            description: "zero".into(),
        }
    }

    pub fn dim(&self) -> usize {
        self.columns[0].profile.len()
    }

    pub fn d(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[NoiseColumn] {
        &self.columns
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn is_zero(&self) -> bool {
        self.columns.iter().all(|c| {
            c.profile.iter().all(|x| *x == 0.0) || (c.time.is_constant() && c.time.eval(0.0) == 0.0)
        })
    }

    /// `G(t)` as an `n×d` matrix.
    pub fn at(&self, t: f64) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(self.dim(), self.d());
        for (j, c) in self.columns.iter().enumerate() {
            g.set_column(j, &(&c.profile * c.time.eval(t)));
        }
        g
    }

    /// `G(t)·dw` without forming the matrix.
    pub fn apply(&self, t: f64, dw: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        for (c, w) in self.columns.iter().zip(dw) {
            out.axpy(c.time.eval(t) * w, &c.profile, 1.0);
        }
        out
    }

    /// Sum of the columns' σ-Hölder constants, or `None` if a non-zero column
    /// has a time factor that is not σ-Hölder.
    pub fn holder_constant(&self, sigma: f64, horizon: f64) -> Option<f64> {
        let mut total = 0.0;
        for c in &self.columns {
            if c.profile.iter().all(|x| *x == 0.0) {
                continue;
            }
            total += c.time.holder_constant(sigma, horizon)?;
        }
        Some(total)
    }
}

/// `A(t_m)^θ` on each grid time; a single matrix for autonomous families.
#[derive(Clone, Debug)]
pub struct OperatorPowers {
    theta: f64,
    mats: Vec<DMatrix<f64>>,
}

impl OperatorPowers {
    pub fn new(family: &OperatorFamily, times: &[f64], theta: f64) -> Result<Self> {
        let power = |t: f64| -> Result<DMatrix<f64>> {
            if theta == 1.0 {
                family.at(t)
            } else {
                Ok(family.spectral_at(t)?.power(theta))
            }
        };
        let mats = if family.is_autonomous() {
            alloc::vec![power(0.0)?]
        } else {
            times.iter().map(|&t| power(t)).collect::<Result<Vec<_>>>()?
        };
        Ok(Self { theta, mats })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn at(&self, k: usize) -> &DMatrix<f64> {
        if self.mats.len() == 1 {
            &self.mats[0]
        } else {
            &self.mats[k]
        }
    }
}

/// `W₀(t_m) = Σ_{k<m} U(t_m,t_k)G(t_k)Δw_k` with precomputed step propagators.
pub fn stochastic_convolution_with(
    steps: &StepPropagators,
    noise: &NoiseMap,
    path: &BrownianPath,
    grid: &TimeGrid,
    scheme_tag: String,
) -> Result<Trajectory> {
    check_same_grid(steps.times(), grid, "step propagators")?;
    if noise.d() != path.d() {
        return Err(Error::Shape(format!(
            "noise has {} columns, driver has dimension {}",
            noise.d(),
            path.d()
        )));
    }
    let path = path.on_grid(grid)?;
    let n = noise.dim();
    if noise.is_zero() {
        return Ok(Trajectory::zeros(grid.times(), n, scheme_tag, Piece::Stochastic));
    }
    let times = grid.times();
    let states = steps.accumulate(DVector::zeros(n), |k| Some(noise.apply(times[k], path.increment(k))));
    Trajectory::new(times.to_vec(), states, scheme_tag, Piece::Stochastic)
}

/// `W_θ(t) = A(t)^θ W₀(t)` pointwise.
pub fn weight_trajectory(w0: &Trajectory, powers: &OperatorPowers) -> Result<Trajectory> {
    let piece = if powers.theta() == 0.0 {
        Piece::Stochastic
    } else {
        Piece::Weighted {
            theta: powers.theta(),
        }
    };
    w0.map_states(piece, |k, s| Ok(powers.at(k) * s))
}

/// `W_θ(t_m) = Σ_{k<m} A(t_m)^θ U(t_m,t_k)G(t_k)Δw_k`.
pub fn stochastic_convolution(
    scheme: &EvolutionScheme,
    noise: &NoiseMap,
    path: &BrownianPath,
    theta: f64,
    grid: &TimeGrid,
) -> Result<Trajectory> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::Parameter(format!("theta = {theta} not in [0, 1]")));
    }
    if noise.dim() != scheme.family().dim() {
        return Err(Error::Shape(format!(
            "noise dimension {} differs from family dimension {}",
            noise.dim(),
            scheme.family().dim()
        )));
    }
    let steps = StepPropagators::new(scheme, grid)?;
    let w0 = stochastic_convolution_with(&steps, noise, path, grid, scheme.tag())?;
    if theta == 0.0 {
        return Ok(w0);
    }
    let powers = OperatorPowers::new(scheme.family(), grid.times(), theta)?;
    weight_trajectory(&w0, &powers)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseConditionReport {
    pub delta: f64,
    pub delta1: f64,
    pub sigma: f64,
    /// `sup ∥A(t)^δG(t) − A(s)^δG(s)∥/(t−s)^σ` over sampled pairs.
    pub zeta_hat: f64,
    /// `sup ∥A(0)^{δ₁}[G(t) − G(s)]∥/(t−s)^σ` over sampled pairs.
    pub zeta_bar_hat: f64,
    pub g1_holds: bool,
    pub g2_holds: bool,
    /// Bound on `zeta_hat` assembled from `zeta_bar_hat` and the measured
    /// fractional-difference constants.
    pub derived_g1_constant: f64,
    /// The part of the derived constant carried by `[A(t)^δ − A(s)^δ]`.
    pub fractional_term: f64,
    /// `Σ_j C_j·max_i |(A(0)^{δ₁}φ_j)_i|` for separable noise with σ-Hölder factors.
    pub separable_bound: Option<f64>,
    /// `max_t ∥A(0)^{δ₁}G(t)∥`.
    pub weighted_sup: f64,
}

/// Measures (G1) and (G2) on the sampled times and assembles the (G1)
/// constant implied by (G2) via the fractional-difference bound.
pub fn noise_condition_check(
    noise: &NoiseMap,
    family: &OperatorFamily,
    delta: f64,
    delta1: f64,
    sigma: f64,
    times: &[f64],
) -> Result<NoiseConditionReport> {
    if !(0.5 < delta && delta < delta1 && delta1 <= 1.0) {
        return Err(Error::Parameter(format!(
            "need 1/2 < delta < delta1 <= 1, got delta = {delta}, delta1 = {delta1}"
        )));
    }
    if !(sigma > 0.0 && sigma <= family.mu()) {
        return Err(Error::Parameter(format!(
            "sigma = {sigma} must lie in (0, mu = {}]",
            family.mu()
        )));
    }
    if noise.dim() != family.dim() {
        return Err(Error::Shape(format!(
            "noise dimension {} differs from family dimension {}",
            noise.dim(),
            family.dim()
        )));
    }
    let grid = TimeGrid::from_times(times.to_vec())?;
    if grid.start() != 0.0 {
        return Err(Error::Grid("condition scans must start at t = 0".into()));
    }
    let horizon = grid.end();
    let ref_dec = family.reference();
    let a0_delta1 = ref_dec.power(delta1);

    let g: Vec<DMatrix<f64>> = times.iter().map(|&t| noise.at(t)).collect();
    let direct: Vec<DMatrix<f64>> = times
        .iter()
        .zip(&g)
        .map(|(&t, gt)| Ok(family.spectral_at(t)?.power(delta) * gt))
        .collect::<Result<Vec<_>>>()?;
    let frozen: Vec<DMatrix<f64>> = g.iter().map(|gt| &a0_delta1 * gt).collect();

    let mut zeta_hat = 0.0_f64;
    let mut zeta_bar_hat = 0.0_f64;
    for (i, j) in index_pairs(times.len()) {
        let w = (times[j] - times[i]).powf(sigma);
        zeta_hat = zeta_hat.max(family.state_map_norm(&(&direct[j] - &direct[i])) / w);
        zeta_bar_hat = zeta_bar_hat.max(family.state_map_norm(&(&frozen[j] - &frozen[i])) / w);
    }
    let weighted_sup = frozen
        .iter()
        .map(|m| family.state_map_norm(m))
        .fold(0.0, f64::max);

    // ∥[A(t)^δ−A(s)^δ]G(s)∥ and ∥A(t)^δ[G(t)−G(s)]∥ split through A(0)^{−δ₁};
    // every α is a sup over the same sampled pairs, s = 0 included.
    let mu = family.mu();
    let delta_mid = 0.5 * (delta + delta1);
    let norm_a0 = |theta: f64| family.state_operator_norm(&ref_dec.power(theta));
    let pairs = all_pairs(times);
    let (alpha_d_d1, alpha_d_mid, alpha_mid_d1) = if family.is_autonomous() {
        (0.0, 0.0, 0.0)
    } else {
        (
            fractional_difference_constant(family, delta, delta1, &pairs)?,
            fractional_difference_constant(family, delta, delta_mid, &pairs)?,
            fractional_difference_constant(family, delta_mid, delta1, &pairs)?,
        )
    };
    let t_mu = horizon.powf(mu);
    let first = (alpha_d_d1 * t_mu + norm_a0(delta - delta1)) * zeta_bar_hat;
    let fractional_term = alpha_d_mid
        * (alpha_mid_d1 * t_mu + norm_a0(delta_mid - delta1))
        * weighted_sup
        * horizon.powf(mu - sigma);
    let derived = first + fractional_term;

    let holder = noise.holder_constant(sigma, horizon);
    let separable_bound = holder.map(|_| {
        noise
            .columns()
            .iter()
            .filter(|c| c.profile.iter().any(|x| *x != 0.0))
            .map(|c| {
                let c1 = c.time.holder_constant(sigma, horizon).unwrap_or(f64::INFINITY);
                c1 * (&a0_delta1 * &c.profile).amax()
            })
            .sum()
    });
    let g2_holds = holder.is_some() && zeta_bar_hat.is_finite() && weighted_sup.is_finite();
    let g1_holds = g2_holds && zeta_hat.is_finite() && derived.is_finite();
    Ok(NoiseConditionReport {
        delta,
        delta1,
        sigma,
        zeta_hat,
        zeta_bar_hat,
        g1_holds,
        g2_holds,
        derived_g1_constant: derived,
        fractional_term,
        separable_bound,
        weighted_sup,
    })
}

fn index_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
}

/// Per-path ingredients of the moment diagnostics for a scalar integrand.
#[derive(Clone, Debug, PartialEq)]
pub struct PathMoments {
    /// `|∫₀ᵀ φ dw|²`
    pub terminal_sq: f64,
    /// `∫₀ᵀ φ² ds`
    pub quadratic_variation: f64,
    /// `sup_t |∫₀ᵗ φ dw|^p`
    pub sup_p: f64,
    /// `(∫₀ᵀ φ² ds)^{p/2}`
    pub qv_p: f64,
    /// `∫₀ᵗ φ dw` at the checkpoints.
    pub checkpoints: Vec<f64>,
}

impl PathMoments {
    /// `phi(t_k, w(t_k))` is evaluated at left endpoints, so the integrand is
    /// adapted by construction.
    pub fn of<F>(phi: &F, path: &BrownianPath, p: f64, checkpoints: &[usize]) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64,
    {
        if path.d() != 1 {
            return Err(Error::Shape("moment diagnostics use a scalar driver".into()));
        }
        let times = path.times();
        let mut w = 0.0;
        let mut m = 0.0_f64;
        let mut qv = 0.0;
        let mut sup = 0.0_f64;
        let mut running = Vec::with_capacity(times.len());
        running.push(0.0);
        for k in 0..path.steps() {
            let v = phi(times[k], w);
            let dw = path.increments[k];
            m += v * dw;
            qv += v * v * (times[k + 1] - times[k]);
            w += dw;
            sup = sup.max(m.abs());
            running.push(m);
        }
        let checkpoints = checkpoints
            .iter()
            .map(|&k| {
                running
                    .get(k)
                    .copied()
                    .ok_or_else(|| Error::Parameter(format!("checkpoint {k} beyond the grid")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            terminal_sq: m * m,
            quadratic_variation: qv,
            sup_p: sup.powf(p),
            qv_p: qv.powf(p / 2.0),
            checkpoints,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentDiagnostics {
    pub p: f64,
    pub paths: usize,
    /// `E|∫φdw|²`
    pub lhs_isometry: MeanSe,
    /// `E∫φ²ds`
    pub rhs_isometry: MeanSe,
    /// `E|∫φdw|² / E∫φ²ds`; the fitted `c(E)`.
    pub isometry_ratio: f64,
    /// Batch-means standard error of the isometry ratio.
    pub isometry_se: f64,
    /// `E sup|∫φdw|^p / E(∫φ²)^{p/2}`
    pub bdg_ratio: f64,
    pub bdg_se: f64,
    /// `bdg_ratio / (p/(p−1))^p`; the fitted `c_p(E)`.
    pub c_p: f64,
    /// `(t, mean, se)` of `∫₀ᵗφdw` at each checkpoint.
    pub martingale: Vec<(f64, f64, f64)>,
    /// Every checkpoint mean is within 3 standard errors of zero.
    pub martingale_ok: bool,
    /// The integrand vanished on every path.
    pub exact_zero: bool,
}

pub const MIN_DIAGNOSTIC_PATHS: usize = 1000;
const DIAGNOSTIC_BATCHES: usize = 20;

impl MomentDiagnostics {
    pub fn from_samples(samples: &[PathMoments], times: &[f64], checkpoints: &[usize], p: f64) -> Result<Self> {
        if samples.len() < MIN_DIAGNOSTIC_PATHS {
            return Err(Error::Statistics(format!(
                "moment diagnostics need at least {MIN_DIAGNOSTIC_PATHS} paths, got {}",
                samples.len()
            )));
        }
        let col = |f: fn(&PathMoments) -> f64| -> Vec<f64> { samples.iter().map(f).collect() };
        let lhs = col(|s| s.terminal_sq);
        let rhs = col(|s| s.quadratic_variation);
        let sup = col(|s| s.sup_p);
        let qv = col(|s| s.qv_p);
        let lhs_m = MeanSe::of(&lhs);
        let rhs_m = MeanSe::of(&rhs);
        let exact_zero = rhs.iter().all(|v| *v == 0.0);
        let ratio = |a: &[f64], b: &[f64]| -> (f64, f64) {
            let (ma, mb) = (mean(a), mean(b));
            if mb == 0.0 {
                return (0.0, 0.0);
            }
            let ba = batch_means(a, DIAGNOSTIC_BATCHES);
            let bb = batch_means(b, DIAGNOSTIC_BATCHES);
            let per: Vec<f64> = ba.iter().zip(&bb).map(|(x, y)| if *y == 0.0 { 0.0 } else { x / y }).collect();
            (ma / mb, MeanSe::of(&per).se)
        };
        let (iso, iso_se) = ratio(&lhs, &rhs);
        let (bdg, bdg_se) = ratio(&sup, &qv);
        let martingale: Vec<(f64, f64, f64)> = checkpoints
            .iter()
            .enumerate()
            .map(|(c, &k)| {
                let vals: Vec<f64> = samples.iter().map(|s| s.checkpoints[c]).collect();
                let m = MeanSe::of(&vals);
                (times[k], m.mean, m.se)
            })
            .collect();
        let martingale_ok = martingale.iter().all(|&(_, m, se)| m.abs() <= 3.0 * se);
        Ok(Self {
            p,
            paths: samples.len(),
            lhs_isometry: lhs_m,
            rhs_isometry: rhs_m,
            isometry_ratio: iso,
            isometry_se: iso_se,
            bdg_ratio: bdg,
            bdg_se,
            c_p: bdg / (p / (p - 1.0)).powf(p),
            martingale,
            martingale_ok,
            exact_zero,
        })
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

/// Evenly spaced checkpoint indices `1..=steps`.
pub fn checkpoint_indices(steps: usize, count: usize) -> Vec<usize> {
    let count = count.clamp(1, steps.max(1));
    (1..=count).map(|c| c * steps / count).collect()
}

/// Monte Carlo estimates of both sides of the isometry bound and the
/// maximal inequality for a scalar adapted integrand.
pub fn moment_diagnostics<F>(phi: &F, grid: &TimeGrid, paths: usize, p: f64, seed: u64) -> Result<MomentDiagnostics>
where
    F: Fn(f64, f64) -> f64,
{
    if !(p > 1.0) {
        return Err(Error::Parameter(format!("p = {p} must exceed 1")));
    }
    if paths < MIN_DIAGNOSTIC_PATHS {
        return Err(Error::Statistics(format!(
            "moment diagnostics need at least {MIN_DIAGNOSTIC_PATHS} paths, got {paths}"
        )));
    }
    let checkpoints = checkpoint_indices(grid.steps(), 8);
    let samples = (0..paths as u64)
        .map(|i| {
            let path = sample_brownian_path(1, grid, seed, i)?;
            PathMoments::of(phi, &path, p, &checkpoints)
        })
        .collect::<Result<Vec<_>>>()?;
    MomentDiagnostics::from_samples(&samples, grid.times(), &checkpoints, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{Coefficient, CoefficientField, SpaceFn};
    use crate::evolution::SchemeKind;
    use crate::grid::Grid;
    use alloc::vec;

    fn stencil(n: usize, slope: f64) -> OperatorFamily {
        let c = CoefficientField::new(Coefficient::affine(1.0, slope), Coefficient::affine(1.0, slope), 1.0, 0.0)
            .unwrap();
        OperatorFamily::stencil(Grid::unit(n).unwrap(), c, 1.0, 1.0).unwrap()
    }

    #[test]
    fn brownian_basics() {
        let grid = TimeGrid::uniform(1.0, 64).unwrap();
        let a = sample_brownian(2, &grid, 7).unwrap();
        let b = sample_brownian(2, &grid, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.values()[0], DVector::zeros(2));
        assert_ne!(a.increments(), sample_brownian_path(2, &grid, 7, 1).unwrap().increments());
        assert!(sample_brownian(0, &grid, 7).is_err());
        assert!(TimeGrid::from_times(vec![0.0, 0.2, 0.1]).is_err());
    }

    #[test]
    fn gaussian_increment_statistics() {
        let dt: f64 = 1e-3;
        let grid = TimeGrid::uniform(100.0, 100_000).unwrap();
        let path = sample_brownian(1, &grid, 11).unwrap();
        let m = MeanSe::of(path.increments());
        assert!(m.mean.abs() <= 3.0 * (dt / 1e5).sqrt());
        // Var of the sample variance of N(0, dt) is 2dt²/(N−1).
        let var = path.increments().iter().map(|x| (x - m.mean).powi(2)).sum::<f64>() / (1e5 - 1.0);
        assert!((var - dt).abs() <= 3.0 * dt * (2.0f64 / (1e5 - 1.0)).sqrt());
    }

    #[test]
    fn coarsening_preserves_values() {
        let grid = TimeGrid::uniform(1.0, 64).unwrap();
        let path = sample_brownian(1, &grid, 3).unwrap();
        let coarse = path.coarsen(8).unwrap();
        let fine_vals = path.values();
        for (k, v) in coarse.values().iter().enumerate() {
            assert!((v[0] - fine_vals[8 * k][0]).abs() < 1e-14);
        }
        assert!(path.coarsen(5).is_err());
    }

    #[test]
    fn constant_integrand_telescopes() {
        let grid = TimeGrid::uniform(1.0, 50).unwrap();
        let path = sample_brownian(1, &grid, 5).unwrap();
        let phi = vec![DMatrix::from_element(1, 1, 2.5); 50];
        let got = ito_integral(&phi, &path).unwrap()[0];
        let w_t = path.values()[50][0];
        assert!((got - 2.5 * w_t).abs() < 1e-12);
        assert!(ito_integral(&phi[..10], &path).is_err());
    }

    #[test]
    fn ito_linearity_is_exact() {
        let grid = TimeGrid::uniform(1.0, 40).unwrap();
        let path = sample_brownian(2, &grid, 9).unwrap();
        let phi: Vec<DMatrix<f64>> = (0..40).map(|k| DMatrix::from_fn(3, 2, |i, j| (k + i + 2 * j) as f64 * 0.1)).collect();
        let psi: Vec<DMatrix<f64>> = (0..40).map(|k| DMatrix::from_fn(3, 2, |i, j| ((k * i) as f64).sin() - j as f64)).collect();
        let combo: Vec<DMatrix<f64>> = phi.iter().zip(&psi).map(|(a, b)| a * 3.0 + b).collect();
        let lhs = ito_integral(&combo, &path).unwrap();
        let rhs = ito_integral(&phi, &path).unwrap() * 3.0 + ito_integral(&psi, &path).unwrap();
        assert!((lhs - rhs).amax() < 1e-12);
    }

    #[test]
    fn zero_noise_gives_zero_convolution() {
        let fam = stencil(6, 0.5);
        let scheme = EvolutionScheme::new(SchemeKind::FrozenExponential, 32, fam).unwrap();
        let grid = TimeGrid::uniform(1.0, 16).unwrap();
        let path = sample_brownian(1, &grid, 1).unwrap();
        let w = stochastic_convolution(&scheme, &NoiseMap::zero(6, 1), &path, 0.5, &grid).unwrap();
        assert!(w.states().iter().all(|s| s.iter().all(|x| *x == 0.0)));
        assert!(stochastic_convolution(&scheme, &NoiseMap::zero(6, 1), &path, 1.5, &grid).is_err());
    }

    #[test]
    fn weighted_convolution_commutes() {
        let fam = stencil(8, 0.5);
        let grid8 = Grid::unit(8).unwrap();
        let scheme = EvolutionScheme::new(SchemeKind::FrozenExponential, 64, fam.clone()).unwrap();
        let grid = TimeGrid::uniform(1.0, 32).unwrap();
        let path = sample_brownian(1, &TimeGrid::uniform(1.0, 128).unwrap(), 2).unwrap();
        let noise = NoiseMap::separable(
            TimeFn::Power { offset: 1.0, scale: 1.0, exponent: 0.3 },
            SpaceFn::sine(1).sample(&grid8),
            "test",
        )
        .unwrap();
        let w0 = stochastic_convolution(&scheme, &noise, &path, 0.0, &grid).unwrap();
        for theta in [0.5, 1.0] {
            let wt = stochastic_convolution(&scheme, &noise, &path, theta, &grid).unwrap();
            for (k, &t) in grid.times().iter().enumerate() {
                let direct = crate::linalg::fractional_power(&fam.at(t).unwrap(), theta).unwrap() * w0.state(k);
                assert!((wt.state(k) - &direct).norm() <= 1e-10 * (1.0 + w0.state(k).norm() * fam.at(t).unwrap().norm()));
            }
        }
    }

    #[test]
    fn zero_noise_conditions() {
        let fam = stencil(8, 0.5);
        let times: Vec<f64> = (0..=8).map(|k| k as f64 / 8.0).collect();
        let r = noise_condition_check(&NoiseMap::zero(8, 1), &fam, 0.7, 0.9, 0.3, &times).unwrap();
        assert_eq!(r.zeta_hat, 0.0);
        assert_eq!(r.zeta_bar_hat, 0.0);
        assert!(r.g1_holds && r.g2_holds);
        assert!(noise_condition_check(&NoiseMap::zero(8, 1), &fam, 0.4, 0.9, 0.3, &times).is_err());
        assert!(noise_condition_check(&NoiseMap::zero(8, 1), &fam, 0.9, 0.7, 0.3, &times).is_err());
    }

    #[test]
    fn derived_constant_dominates_direct_measurement() {
        let n = 16;
        let fam = stencil(n, 0.5);
        let noise = NoiseMap::separable(
            TimeFn::Power { offset: 1.0, scale: 1.0, exponent: 0.3 },
            SpaceFn::sine(1).sample(&Grid::unit(n).unwrap()),
            "sec4",
        )
        .unwrap();
        let times: Vec<f64> = (0..=16).map(|k| k as f64 / 16.0).collect();
        let r = noise_condition_check(&noise, &fam, 0.7, 0.9, 0.3, &times).unwrap();
        assert!(r.derived_g1_constant.is_finite());
        assert!(r.derived_g1_constant >= r.zeta_hat, "{r:?}");
        assert!(r.zeta_bar_hat <= r.separable_bound.unwrap());
        assert!(r.fractional_term > 0.0);

        // Growth bound along the sampled grid, pairs from the origin.
        let g0 = fam.state_map_norm(&(fam.reference().power(0.7) * noise.at(0.0)));
        for &t in &times[1..] {
            let gt = fam.state_map_norm(&(fam.spectral_at(t).unwrap().power(0.7) * noise.at(t)));
            assert!(gt <= g0 + r.zeta_hat * t.powf(0.3) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn autonomous_derived_constant_is_frozen_bound() {
        let n = 12;
        let fam = stencil(n, 0.0);
        let noise = NoiseMap::separable(
            TimeFn::Cosine { offset: 2.0, amplitude: 1.0, frequency: 3.0 },
            SpaceFn::Bubble { amplitude: 1.0 }.sample(&Grid::unit(n).unwrap()),
            "bubble",
        )
        .unwrap();
        let times: Vec<f64> = (0..=12).map(|k| k as f64 / 12.0).collect();
        let r = noise_condition_check(&noise, &fam, 0.6, 0.8, 0.5, &times).unwrap();
        assert_eq!(r.fractional_term, 0.0);
        let frozen = fam.state_operator_norm(&fam.reference().power(0.6 - 0.8)) * r.zeta_bar_hat;
        assert!((r.derived_g1_constant - frozen).abs() <= 1e-12 * frozen);
        assert!(r.derived_g1_constant >= r.zeta_hat * (1.0 - 1e-12));
    }

    #[test]
    fn moment_diagnostics_zero_and_deterministic() {
        let grid = TimeGrid::uniform(1.0, 50).unwrap();
        let zero = moment_diagnostics(&|_, _| 0.0, &grid, 1000, 2.0, 1).unwrap();
        assert!(zero.exact_zero);
        assert_eq!(zero.isometry_ratio, 0.0);
        let det = moment_diagnostics(&|t: f64, _| 1.0 + t, &grid, 4000, 2.0, 2).unwrap();
        assert!((det.isometry_ratio - 1.0).abs() <= 3.0 * det.isometry_se, "{det:?}");
        assert!(det.martingale_ok);
        assert!(moment_diagnostics(&|_, _| 1.0, &grid, 10, 2.0, 1).is_err());
        assert!(moment_diagnostics(&|_, _| 1.0, &grid, 1000, 1.0, 1).is_err());
    }

    #[test]
    fn doob_bound_for_linear_integrand() {
        let grid = TimeGrid::uniform(1.0, 200).unwrap();
        let d = moment_diagnostics(&|t: f64, _| t, &grid, 4000, 2.0, 3).unwrap();
        assert!(d.bdg_ratio <= 4.0 * d.c_p + 1e-12);
        assert!(d.c_p <= 1.0 + 3.0 * d.bdg_se / 4.0, "{d:?}");
    }

    #[test]
    fn ito_convention_mean_zero() {
        // ∫w dw = (w_T² − T)/2 has mean zero under left-point sums.
        let grid = TimeGrid::uniform(1.0, 100).unwrap();
        let d = moment_diagnostics(&|_, w| w, &grid, 5000, 2.0, 4).unwrap();
        assert!(d.martingale_ok, "{:?}", d.martingale);
    }
}
