//! Evolution operators `U(t,s)` for a family `A(t)`: piecewise-frozen
//! exponentials and an implicit-Euler cross-check, the deterministic Cauchy
//! solution, and the measured smoothing constants.

#[allow(unused_imports)]
use nalgebra::ComplexField;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::holder::SampledPath;
use crate::operator::OperatorFamily;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    /// Product of `exp(−δ·A(τ_j))` with `A` frozen at the left endpoint.
    FrozenExponential,
    /// Product of `(I + δ·A(τ_{j+1}))⁻¹`.
    ImplicitEuler,
}

impl SchemeKind {
    pub fn label(&self) -> &'static str {
        match self {
            SchemeKind::FrozenExponential => "frozen-exponential",
            SchemeKind::ImplicitEuler => "implicit-euler",
        }
    }
}

/// Scalar symbol of `U(t,s)` when the family is autonomous.
#[derive(Clone, Copy, Debug)]
enum Symbol {
    Exp { tau: f64 },
    Resolvent { delta: f64, m: i32 },
}

impl Symbol {
    fn eval(&self, lambda: f64) -> f64 {
        match *self {
            Symbol::Exp { tau } => (-tau * lambda).exp(),
            Symbol::Resolvent { delta, m } => (1.0 + delta * lambda).powi(-m),
        }
    }
}

#[derive(Clone, Debug)]
pub struct EvolutionScheme {
    kind: SchemeKind,
    substeps_per_unit: usize,
    family: OperatorFamily,
}

impl EvolutionScheme {
    pub fn new(kind: SchemeKind, substeps_per_unit: usize, family: OperatorFamily) -> Result<Self> {
        if substeps_per_unit == 0 {
            return Err(Error::Parameter("substeps_per_unit must be at least 1".into()));
        }
        Ok(Self {
            kind,
            substeps_per_unit,
            family,
        })
    }

    pub fn kind(&self) -> SchemeKind {
        self.kind
    }

    pub fn substeps_per_unit(&self) -> usize {
        self.substeps_per_unit
    }

    pub fn family(&self) -> &OperatorFamily {
        &self.family
    }

    pub fn with_kind(&self, kind: SchemeKind) -> Self {
        Self {
            kind,
            ..self.clone()
        }
    }

    pub fn with_substeps(&self, substeps_per_unit: usize) -> Result<Self> {
        Self::new(self.kind, substeps_per_unit, self.family.clone())
    }

    pub fn tag(&self) -> String {
        format!("{}/{}", self.kind.label(), self.substeps_per_unit)
    }

    /// Substeps used on `[s, t]`.
    pub fn substep_count(&self, s: f64, t: f64) -> usize {
        let raw = (t - s) * self.substeps_per_unit as f64;
        ((raw - 1e-9).ceil() as usize).max(1)
    }

    fn check_interval(&self, s: f64, t: f64) -> Result<()> {
        if t < s {
            return Err(Error::Ordering { s, t });
        }
        let horizon = self.family.horizon() * (1.0 + 1e-12);
        if !(s >= 0.0 && t <= horizon) {
            return Err(Error::Range(format!(
                "[{s}, {t}] outside [0, {}]",
                self.family.horizon()
            )));
        }
        Ok(())
    }

    fn symbol(&self, s: f64, t: f64) -> Option<Symbol> {
        if !self.family.is_autonomous() {
            return None;
        }
        Some(match self.kind {
            SchemeKind::FrozenExponential => Symbol::Exp { tau: t - s },
            SchemeKind::ImplicitEuler => {
                let m = self.substep_count(s, t);
                Symbol::Resolvent {
                    delta: (t - s) / m as f64,
                    m: m as i32,
                }
            }
        })
    }

    /// `U(t,s)·v`.
    pub fn propagate(&self, s: f64, t: f64, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_interval(s, t)?;
        if v.len() != self.family.dim() {
            return Err(Error::Shape(format!(
                "vector of length {} for dimension {}",
                v.len(),
                self.family.dim()
            )));
        }
        if s == t {
            return Ok(v.clone());
        }
        if let Some(sym) = self.symbol(s, t) {
            return Ok(self.family.reference().apply(|l| sym.eval(l), v));
        }
        let m = self.substep_count(s, t);
        let delta = (t - s) / m as f64;
        let mut x = v.clone();
        for j in 0..m {
            x = match self.kind {
                SchemeKind::FrozenExponential => {
                    let dec = self.family.spectral_at(s + j as f64 * delta)?;
                    dec.apply(|l| (-delta * l).exp(), &x)
                }
                SchemeKind::ImplicitEuler => {
                    let tau = if j + 1 == m { t } else { s + (j + 1) as f64 * delta };
                    implicit_step(&self.family.at(tau)?, delta)?.solve(&x)
                }
            };
        }
        Ok(x)
    }

    /// `U(t,s)` as a dense matrix.
    pub fn propagator_matrix(&self, s: f64, t: f64) -> Result<DMatrix<f64>> {
        self.check_interval(s, t)?;
        let n = self.family.dim();
        if s == t {
            return Ok(DMatrix::identity(n, n));
        }
        if let Some(sym) = self.symbol(s, t) {
            return Ok(self.family.reference().map(|l| sym.eval(l)));
        }
        let m = self.substep_count(s, t);
        let delta = (t - s) / m as f64;
        let mut u = DMatrix::identity(n, n);
        for j in 0..m {
            u = match self.kind {
                SchemeKind::FrozenExponential => {
                    let dec = self.family.spectral_at(s + j as f64 * delta)?;
                    dec.map(|l| (-delta * l).exp()) * u
                }
                SchemeKind::ImplicitEuler => {
                    let tau = if j + 1 == m { t } else { s + (j + 1) as f64 * delta };
                    implicit_step(&self.family.at(tau)?, delta)?.solve(&u)
                }
            };
        }
        Ok(u)
    }

    /// `∥U(t,r)v − U(t,s)U(s,r)v∥₂ / ∥v∥₂`.
    pub fn cocycle_defect(&self, r: f64, s: f64, t: f64, v: &DVector<f64>) -> Result<f64> {
        if !(r <= s && s <= t) {
            return Err(Error::Ordering { s: r, t });
        }
        let direct = self.propagate(r, t, v)?;
        let split = self.propagate(s, t, &self.propagate(r, s, v)?)?;
        let scale = v.norm();
        Ok(if scale == 0.0 { 0.0 } else { (direct - split).norm() / scale })
    }
}

fn implicit_step(a: &DMatrix<f64>, delta: f64) -> Result<nalgebra::linalg::Cholesky<f64, nalgebra::Dyn>> {
    let n = a.nrows();
    let m = DMatrix::identity(n, n) + a * delta;
    m.cholesky()
        .ok_or_else(|| Error::Numeric("implicit step matrix is not positive definite".into()))
}

/// One-step propagators `P_k = U(t_{k+1}, t_k)` on a time grid.
#[derive(Clone, Debug)]
pub struct StepPropagators {
    times: Vec<f64>,
    /// A single entry when every step shares the same propagator.
    steps: Vec<DMatrix<f64>>,
}

impl StepPropagators {
    pub fn new(scheme: &EvolutionScheme, grid: &TimeGrid) -> Result<Self> {
        let times = grid.times().to_vec();
        let shared = scheme.family().is_autonomous() && grid.uniform_dt().is_some();
        let steps = if shared {
            alloc::vec![scheme.propagator_matrix(times[0], times[1])?]
        } else {
            (0..grid.steps())
                .map(|k| scheme.propagator_matrix(times[k], times[k + 1]))
                .collect::<Result<Vec<_>>>()?
        };
        Ok(Self { times, steps })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn step(&self, k: usize) -> &DMatrix<f64> {
        if self.steps.len() == 1 {
            &self.steps[0]
        } else {
            &self.steps[k]
        }
    }

    /// `x_{k+1} = P_k(x_k + input(k))`, `x_0 = initial`.
    pub fn accumulate<F>(&self, initial: DVector<f64>, mut input: F) -> Vec<DVector<f64>>
    where
        F: FnMut(usize) -> Option<DVector<f64>>,
    {
        let mut states = Vec::with_capacity(self.times.len());
        let mut x = initial;
        for k in 0..self.times.len() - 1 {
            let next = match input(k) {
                Some(u) => self.step(k) * (&x + u),
                None => self.step(k) * &x,
            };
            states.push(core::mem::replace(&mut x, next));
        }
        states.push(x);
        states
    }
}

/// Which part of the solution a trajectory holds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "piece")]
pub enum Piece {
    Full,
    Deterministic,
    Stochastic,
    Weighted { theta: f64 },
}

impl Piece {
    pub fn label(&self) -> String {
        match self {
            Piece::Full => "X".into(),
            Piece::Deterministic => "I1".into(),
            Piece::Stochastic => "W0".into(),
            Piece::Weighted { theta } => format!("W{theta}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<DVector<f64>>,
    scheme_tag: String,
    piece: Piece,
}

impl Trajectory {
    pub fn new(
        times: Vec<f64>,
        states: Vec<DVector<f64>>,
        scheme_tag: String,
        piece: Piece,
    ) -> Result<Self> {
        if times.len() != states.len() {
            return Err(Error::Shape(format!(
                "{} times but {} states",
                times.len(),
                states.len()
            )));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Grid("trajectory times must be increasing".into()));
        }
        if let Some(first) = states.first() {
            if states.iter().any(|s| s.len() != first.len()) {
                return Err(Error::Shape("trajectory states differ in dimension".into()));
            }
        }
        Ok(Self {
            times,
            states,
            scheme_tag,
            piece,
        })
    }

    pub fn zeros(times: &[f64], dim: usize, scheme_tag: String, piece: Piece) -> Self {
        Self {
            times: times.to_vec(),
            states: alloc::vec![DVector::zeros(dim); times.len()],
            scheme_tag,
            piece,
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[DVector<f64>] {
        &self.states
    }

    pub fn state(&self, k: usize) -> &DVector<f64> {
        &self.states[k]
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, |s| s.len())
    }

    pub fn scheme_tag(&self) -> &str {
        &self.scheme_tag
    }

    pub fn piece(&self) -> Piece {
        self.piece
    }

    /// Pointwise sum with another trajectory on the same grid.
    pub fn sum(&self, other: &Trajectory, piece: Piece) -> Result<Self> {
        if self.times != other.times || self.dim() != other.dim() {
            return Err(Error::Shape("trajectories live on different grids".into()));
        }
        let states = self
            .states
            .iter()
            .zip(&other.states)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Self {
            times: self.times.clone(),
            states,
            scheme_tag: self.scheme_tag.clone(),
            piece,
        })
    }

    /// Applies `f(k)` to each state.
    pub fn map_states<F>(&self, piece: Piece, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, &DVector<f64>) -> Result<DVector<f64>>,
    {
        let states = self
            .states
            .iter()
            .enumerate()
            .map(|(k, s)| f(k, s))
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.times.clone(), states, self.scheme_tag.clone(), piece)
    }

    pub fn as_sampled(&self, norm: crate::operator::NormKind) -> Result<SampledPath> {
        SampledPath::new(self.times.clone(), self.states.clone(), norm)
    }

    /// Samples at every `factor`-th time.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !(self.len() - 1).is_multiple_of(factor) {
            return Err(Error::Grid(format!(
                "factor {factor} does not divide {} steps",
                self.len().saturating_sub(1)
            )));
        }
        Ok(Self {
            times: self.times.iter().step_by(factor).copied().collect(),
            states: self.states.iter().step_by(factor).cloned().collect(),
            scheme_tag: self.scheme_tag.clone(),
            piece: self.piece,
        })
    }
}

pub(crate) fn check_same_grid(times: &[f64], grid: &TimeGrid, what: &str) -> Result<()> {
    let same = times.len() == grid.len()
        && times
            .iter()
            .zip(grid.times())
            .all(|(a, b)| (a - b).abs() <= 1e-12 * (1.0 + b.abs()));
    if !same {
        return Err(Error::Shape(format!(
            "{what} is sampled on {} times, grid has {}",
            times.len(),
            grid.len()
        )));
    }
    Ok(())
}

/// `X(t) = U(t,0)ξ + ∫₀ᵗ U(t,s)F(s)ds` with left-endpoint quadrature.
pub fn deterministic_solve(
    scheme: &EvolutionScheme,
    xi: &DVector<f64>,
    forcing: &SampledPath,
    grid: &TimeGrid,
) -> Result<Trajectory> {
    let steps = StepPropagators::new(scheme, grid)?;
    deterministic_solve_with(&steps, scheme, xi, forcing, grid)
}

/// As [`deterministic_solve`] with precomputed step propagators.
pub fn deterministic_solve_with(
    steps: &StepPropagators,
    scheme: &EvolutionScheme,
    xi: &DVector<f64>,
    forcing: &SampledPath,
    grid: &TimeGrid,
) -> Result<Trajectory> {
    check_same_grid(forcing.times(), grid, "forcing")?;
    check_same_grid(steps.times(), grid, "step propagators")?;
    let n = scheme.family().dim();
    if xi.len() != n || forcing.dim() != n {
        return Err(Error::Shape(format!(
            "initial value ({}) and forcing ({}) must have dimension {n}",
            xi.len(),
            forcing.dim()
        )));
    }
    let values = forcing.values();
    let states = steps.accumulate(xi.clone(), |k| {
        let f = &values[k];
        (f.iter().any(|x| *x != 0.0)).then(|| f * grid.dt(k))
    });
    Trajectory::new(grid.times().to_vec(), states, scheme.tag(), Piece::Deterministic)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaConstant {
    pub theta: f64,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KappaConstant {
    pub theta1: f64,
    pub theta2: f64,
    pub value: f64,
}

/// Measured constants of the smoothing estimates over a set of time pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConstants {
    /// `max (t−s)^θ∥A(t)^θU(t,s)∥`
    pub iota: Vec<ThetaConstant>,
    /// `max (t−s)^{θ₁}∥A(t)^{θ₂}U(t,s)A(s)^{θ₁−θ₂}∥`
    pub kappa: Vec<KappaConstant>,
    /// `max (t−s)^{1−μ−ν}∥A(t)U(t,s) − e^{−(t−s)A(s)}A(s)∥`
    pub c_mu_nu: f64,
    pub scan_grid: Vec<(f64, f64)>,
}

impl EvolutionConstants {
    pub fn iota(&self, theta: f64) -> Option<f64> {
        self.iota.iter().find(|c| c.theta == theta).map(|c| c.value)
    }

    /// Entry-wise maximum; both operands must come from the same θ list.
    pub fn merge(mut self, other: &EvolutionConstants) -> Self {
        for (a, b) in self.iota.iter_mut().zip(&other.iota) {
            a.value = a.value.max(b.value);
        }
        for (a, b) in self.kappa.iter_mut().zip(&other.kappa) {
            a.value = a.value.max(b.value);
        }
        self.c_mu_nu = self.c_mu_nu.max(other.c_mu_nu);
        self.scan_grid.extend_from_slice(&other.scan_grid);
        self
    }

    pub fn all_finite(&self) -> bool {
        self.iota.iter().all(|c| c.value.is_finite())
            && self.kappa.iter().all(|c| c.value.is_finite())
            && self.c_mu_nu.is_finite()
    }
}

/// `(θ₁, θ₂)` pairs with `θ₁ ≤ min(θ₂, 1)` drawn from the θ list.
pub fn kappa_pairs(thetas: &[f64]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for &t1 in thetas {
        for &t2 in thetas {
            if t1 <= t2 && t1 <= 1.0 {
                out.push((t1, t2));
            }
        }
    }
    out
}

fn check_thetas(scheme: &EvolutionScheme, thetas: &[f64]) -> Result<()> {
    let limit = scheme.family().mu() + scheme.family().nu();
    if let Some(&bad) = thetas.iter().find(|&&th| !(th >= 0.0 && th < limit)) {
        return Err(Error::Parameter(format!(
            "theta = {bad} outside [0, mu + nu) = [0, {limit})"
        )));
    }
    Ok(())
}

/// Constants for a single pair `(s, t)`; scans are the maximum over pairs.
pub fn pair_constants(scheme: &EvolutionScheme, thetas: &[f64], s: f64, t: f64) -> Result<EvolutionConstants> {
    check_thetas(scheme, thetas)?;
    if !(t > s) {
        return Err(Error::Ordering { s, t });
    }
    let family = scheme.family();
    let tau = t - s;
    let c_power = 1.0 - family.mu() - family.nu();
    let kp = kappa_pairs(thetas);

    let (iota, kappa, c) = if let Some(sym) = scheme.symbol(s, t) {
        // Every operator is a function of A(0); its state norm is the largest
        // absolute value of the symbol on the spectrum.
        let lambdas = &family.reference().eigenvalues;
        let sup = |f: &dyn Fn(f64) -> f64| lambdas.iter().map(|&l| f(l).abs()).fold(0.0, f64::max);
        let iota: Vec<f64> = thetas
            .iter()
            .map(|&th| tau.powf(th) * sup(&|l| l.powf(th) * sym.eval(l)))
            .collect();
        let kappa: Vec<f64> = kp
            .iter()
            .map(|&(t1, _)| tau.powf(t1) * sup(&|l| l.powf(t1) * sym.eval(l)))
            .collect();
        let c = tau.powf(c_power) * sup(&|l| l * sym.eval(l) - (-tau * l).exp() * l);
        (iota, kappa, c)
    } else {
        let u = scheme.propagator_matrix(s, t)?;
        let dec_t = family.spectral_at(t)?;
        let dec_s = family.spectral_at(s)?;
        let iota: Vec<f64> = thetas
            .iter()
            .map(|&th| tau.powf(th) * family.state_operator_norm(&(dec_t.power(th) * &u)))
            .collect();
        let kappa: Vec<f64> = kp
            .iter()
            .map(|&(t1, t2)| {
                let m = dec_t.power(t2) * &u * dec_s.power(t1 - t2);
                tau.powf(t1) * family.state_operator_norm(&m)
            })
            .collect();
        let a_t = family.at(t)?;
        let semigroup_a = dec_s.map(|l| (-tau * l).exp() * l);
        let c = tau.powf(c_power) * family.state_operator_norm(&(a_t * &u - semigroup_a));
        (iota, kappa, c)
    };

    Ok(EvolutionConstants {
        iota: thetas
            .iter()
            .zip(iota)
            .map(|(&theta, value)| ThetaConstant { theta, value })
            .collect(),
        kappa: kp
            .iter()
            .zip(kappa)
            .map(|(&(theta1, theta2), value)| KappaConstant {
                theta1,
                theta2,
                value,
            })
            .collect(),
        c_mu_nu: c,
        scan_grid: alloc::vec![(s, t)],
    })
}

/// Maximises the smoothing constants over `pairs`.
pub fn evolution_constants_scan(
    scheme: &EvolutionScheme,
    thetas: &[f64],
    pairs: &[(f64, f64)],
) -> Result<EvolutionConstants> {
    check_thetas(scheme, thetas)?;
    if pairs.is_empty() {
        return Err(Error::InsufficientData("no time pairs to scan".into()));
    }
    let mut acc: Option<EvolutionConstants> = None;
    for &(s, t) in pairs {
        let c = pair_constants(scheme, thetas, s, t)?;
        acc = Some(match acc {
            None => c,
            Some(a) => a.merge(&c),
        });
    }
    Ok(acc.expect("pairs is non-empty"))
}
