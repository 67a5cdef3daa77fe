//! The discretised elliptic family `A(t)`: assembly, spectral calculus,
//! sectoriality and temporal-regularity scans, and the discrete `H⁻¹` norm.

#[allow(unused_imports)]
use nalgebra::ComplexField;
use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::coefficients::{CoefficientField, TimeFn};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::linalg::{self, SpectralDecomposition};
use crate::stats::linear_fit;

/// Defects below this are treated as exact zeros by the temporal scans.
pub const ZERO_DEFECT: f64 = 1e-14;

/// Conservative three-point flux discretisation of `−∂ₓ(a ∂ₓ·) + b` with
/// homogeneous Dirichlet conditions; `a` is sampled at cell midpoints and `b`
/// at the nodes.
pub fn assemble_operator(coeffs: &CoefficientField, t: f64, grid: &Grid) -> Result<DMatrix<f64>> {
    if !t.is_finite() || t < 0.0 {
        return Err(Error::Range(format!("time {t} is not in [0, T]")));
    }
    let n = grid.n();
    let h = grid.h();
    let inv_h2 = 1.0 / (h * h);
    let (left, right) = grid.domain();
    let unit = |x: f64| (x - left) / (right - left);
    // a at the n+1 faces x_{i-1/2}, i = 0..=n
    let mut faces = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let x = left + (i as f64 + 0.5) * h;
        let a = coeffs.a.eval(unit(x), t);
        if !(a > 0.0) || a < coeffs.a0 {
            return Err(Error::Coefficient(format!(
                "a({x}, {t}) = {a} violates a >= a0 = {} > 0",
                coeffs.a0
            )));
        }
        faces.push(a);
    }
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        let x = grid.point(i);
        let b = coeffs.b.eval(unit(x), t);
        if !(b >= 0.0) || b < coeffs.b0 {
            return Err(Error::Coefficient(format!(
                "b({x}, {t}) = {b} violates b >= b0 = {} >= 0",
                coeffs.b0
            )));
        }
        m[(i, i)] = (faces[i] + faces[i + 1]) * inv_h2 + b;
        if i + 1 < n {
            m[(i, i + 1)] = -faces[i + 1] * inv_h2;
            m[(i + 1, i)] = -faces[i + 1] * inv_h2;
        }
    }
    Ok(m)
}

/// How an operator family produces `A(t)`.
#[derive(Clone, Debug)]
pub enum FamilySource {
    /// Finite-difference realisation of the Dirichlet problem on a grid.
    Stencil { grid: Grid, coeffs: CoefficientField },
    /// `A(t) = profile(t)·base` for a fixed symmetric positive definite `base`.
    Scaled { base: DMatrix<f64>, profile: TimeFn },
}

/// Time-indexed symmetric positive definite family on `[0, T]`.
///
/// The state space carries the norm `∥A(0)^{-1/2} u∥₂·√w` where `w` is the
/// mesh width for stencil families and 1 otherwise.
#[derive(Clone, Debug)]
pub struct OperatorFamily {
    source: FamilySource,
    horizon: f64,
    nu: f64,
    mu: f64,
    n_hat: Option<f64>,
    reference: SpectralDecomposition,
    dual: DMatrix<f64>,
    dual_inv: DMatrix<f64>,
}

impl OperatorFamily {
    pub fn stencil(grid: Grid, coeffs: CoefficientField, horizon: f64, mu: f64) -> Result<Self> {
        Self::build(FamilySource::Stencil { grid, coeffs }, horizon, mu)
    }

    pub fn scaled(base: DMatrix<f64>, profile: TimeFn, horizon: f64, mu: f64) -> Result<Self> {
        Self::build(FamilySource::Scaled { base, profile }, horizon, mu)
    }

    pub fn autonomous(base: DMatrix<f64>, horizon: f64) -> Result<Self> {
        Self::scaled(base, TimeFn::constant(1.0), horizon, 1.0)
    }

    fn build(source: FamilySource, horizon: f64, mu: f64) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::Parameter(format!("horizon {horizon} must be positive")));
        }
        if !(mu > 0.0 && mu <= 1.0) {
            return Err(Error::Parameter(format!("Hölder exponent mu = {mu} not in (0, 1]")));
        }
        let a0 = Self::assemble(&source, 0.0)?;
        let reference = SpectralDecomposition::positive_definite(&a0)?;
        let weight = match &source {
            FamilySource::Stencil { grid, .. } => grid.h(),
            FamilySource::Scaled { .. } => 1.0,
        };
        let sw = weight.sqrt();
        let dual = reference.map(|l| l.powf(-0.5)) * sw;
        let dual_inv = reference.map(|l| l.sqrt()) / sw;
        Ok(Self {
            source,
            horizon,
            nu: 1.0,
            mu,
            n_hat: None,
            reference,
            dual,
            dual_inv,
        })
    }

    fn assemble(source: &FamilySource, t: f64) -> Result<DMatrix<f64>> {
        match source {
            FamilySource::Stencil { grid, coeffs } => assemble_operator(coeffs, t, grid),
            FamilySource::Scaled { base, profile } => {
                let c = profile.eval(t);
                if !(c > 0.0) {
                    return Err(Error::Coefficient(format!(
                        "scale profile {c} at t = {t} is not positive"
                    )));
                }
                Ok(base * c)
            }
        }
    }

    /// Records a measured (A3) constant.
    pub fn with_n_hat(mut self, n_hat: f64) -> Self {
        self.n_hat = Some(n_hat);
        self
    }

    pub fn source(&self) -> &FamilySource {
        &self.source
    }

    pub fn grid(&self) -> Option<&Grid> {
        match &self.source {
            FamilySource::Stencil { grid, .. } => Some(grid),
            FamilySource::Scaled { .. } => None,
        }
    }

    pub fn dim(&self) -> usize {
        self.reference.dim()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn n_hat(&self) -> Option<f64> {
        self.n_hat
    }

    pub fn is_autonomous(&self) -> bool {
        match &self.source {
            FamilySource::Stencil { coeffs, .. } => coeffs.is_time_independent(),
            FamilySource::Scaled { profile, .. } => profile.is_constant(),
        }
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(t >= 0.0 && t <= self.horizon * (1.0 + 1e-12)) {
            return Err(Error::Range(format!(
                "time {t} outside [0, {}]",
                self.horizon
            )));
        }
        Ok(())
    }

    /// `A(t)` as a dense matrix.
    pub fn at(&self, t: f64) -> Result<DMatrix<f64>> {
        self.check_time(t)?;
        Self::assemble(&self.source, t)
    }

    pub fn spectral_at(&self, t: f64) -> Result<SpectralDecomposition> {
        if t == 0.0 || self.is_autonomous() {
            self.check_time(t)?;
            return Ok(self.reference.clone());
        }
        SpectralDecomposition::positive_definite(&self.at(t)?)
    }

    /// Spectral decomposition of `A(0)`.
    pub fn reference(&self) -> &SpectralDecomposition {
        &self.reference
    }

    pub fn lambda_min(&self, t: f64) -> Result<f64> {
        Ok(self.spectral_at(t)?.lambda_min())
    }

    /// `A(0)^{-1/2}·√w`, the map whose Euclidean norm is the state norm.
    pub fn dual_transform(&self) -> &DMatrix<f64> {
        &self.dual
    }

    pub fn norm_kind(&self) -> NormKind {
        NormKind::Dual(self.dual.clone())
    }

    /// State-space (discrete `H⁻¹`) norm.
    pub fn dual_norm(&self, u: &DVector<f64>) -> Result<f64> {
        if u.len() != self.dim() {
            return Err(Error::Shape(format!(
                "vector of length {} for a family of dimension {}",
                u.len(),
                self.dim()
            )));
        }
        Ok((&self.dual * u).norm())
    }

    /// Induced norm of `M` as an operator on the state space.
    pub fn state_operator_norm(&self, m: &DMatrix<f64>) -> f64 {
        linalg::operator_norm(&(&self.dual * m * &self.dual_inv))
    }

    /// Norm of `M ∈ L(ℝ^d; E)` for an `n×d` matrix.
    pub fn state_map_norm(&self, m: &DMatrix<f64>) -> f64 {
        linalg::operator_norm(&(&self.dual * m))
    }
}

/// Norm used to measure states.
#[derive(Clone, Debug, PartialEq)]
pub enum NormKind {
    Euclidean,
    /// Euclidean norm after applying the contained matrix.
    Dual(DMatrix<f64>),
}

impl NormKind {
    pub fn norm(&self, v: &DVector<f64>) -> f64 {
        match self {
            NormKind::Euclidean => v.norm(),
            NormKind::Dual(r) => (r * v).norm(),
        }
    }

    /// Maps a state to coordinates in which the norm is Euclidean.
    pub fn transform(&self, v: &DVector<f64>) -> DVector<f64> {
        match self {
            NormKind::Euclidean => v.clone(),
            NormKind::Dual(r) => r * v,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            NormKind::Euclidean => "l2",
            NormKind::Dual(_) => "dual",
        }
    }
}

/// Free-function form of [`OperatorFamily::dual_norm`].
pub fn dual_norm(u: &DVector<f64>, family: &OperatorFamily) -> Result<f64> {
    family.dual_norm(u)
}

/// One sample of a resolvent scan.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolventSample {
    pub re: f64,
    pub im: f64,
    /// `|λ|·∥(λ − A)⁻¹∥`
    pub product: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectorialReport {
    pub varpi: f64,
    pub m_hat: f64,
    pub scan: Vec<ResolventSample>,
}

/// Samples `|λ|·∥(λ−A(t))⁻¹∥₂` along the rays `λ = r·e^{±i·ray_angle}`.
///
/// For real symmetric `A`, `∥(λ−A)⁻¹∥₂⁻² = λ_min((A − x)² + y²)` with
/// `λ = x + iy`, which avoids complex arithmetic.
pub fn resolvent_scan(
    family: &OperatorFamily,
    t: f64,
    ray_angle: f64,
    ray_points: usize,
) -> Result<SectorialReport> {
    if !(ray_angle > PI / 2.0 && ray_angle <= PI) {
        return Err(Error::Parameter(format!(
            "ray angle {ray_angle} not in (pi/2, pi]"
        )));
    }
    if ray_points < 8 {
        return Err(Error::Parameter(format!("need at least 8 ray points, got {ray_points}")));
    }
    let a = family.at(t)?;
    let dec = family.spectral_at(t)?;
    let n = a.nrows();
    let r_lo = dec.lambda_min() * 1e-2;
    let r_hi = dec.lambda_max() * 1e2;
    let mut scan = Vec::with_capacity(2 * ray_points);
    let mut m_hat = 0.0_f64;
    for k in 0..ray_points {
        let frac = k as f64 / (ray_points - 1) as f64;
        let r = r_lo * (r_hi / r_lo).powf(frac);
        for sign in [1.0, -1.0] {
            let (re, im) = (r * ray_angle.cos(), sign * r * ray_angle.sin());
            let shifted = &a - DMatrix::<f64>::identity(n, n) * re;
            let gram = &shifted * &shifted + DMatrix::<f64>::identity(n, n) * (im * im);
            let smallest = SpectralDecomposition::symmetric(&gram)?.lambda_min();
            if !(smallest > f64::EPSILON * r * r) {
                return Err(Error::Singular { re, im });
            }
            let product = r / smallest.sqrt();
            m_hat = m_hat.max(product);
            scan.push(ResolventSample { re, im, product });
        }
    }
    Ok(SectorialReport {
        varpi: PI / 4.0,
        m_hat,
        scan,
    })
}

/// Pairs `(s, s+τ)` with dyadic lags `τ = T·2^{-j}`, `j = 1..=levels`, anchored
/// at the start, middle and end of the admissible range.
pub fn dyadic_pairs(horizon: f64, levels: u32) -> Vec<(f64, f64)> {
    let mut pairs = Vec::new();
    for j in 1..=levels {
        let tau = horizon * 0.5_f64.powi(j as i32);
        for s in [0.0, (horizon - tau) / 2.0, horizon - tau] {
            pairs.push((s, s + tau));
        }
    }
    pairs
}

/// Every ordered pair `s < t` drawn from `times`.
pub fn all_pairs(times: &[f64]) -> Vec<(f64, f64)> {
    let mut pairs = Vec::new();
    for (i, &s) in times.iter().enumerate() {
        for &t in &times[i + 1..] {
            pairs.push((s, t));
        }
    }
    pairs
}

fn check_pairs(pairs: &[(f64, f64)], min: usize) -> Result<()> {
    if pairs.len() < min {
        return Err(Error::InsufficientData(format!(
            "need at least {min} time pairs, got {}",
            pairs.len()
        )));
    }
    if let Some(&(s, t)) = pairs.iter().find(|(s, t)| !(t > s)) {
        return Err(Error::Ordering { s, t });
    }
    Ok(())
}

/// Caches spectral decompositions for repeated time lookups within one scan.
struct SpectralCache<'a> {
    family: &'a OperatorFamily,
    entries: Vec<(u64, SpectralDecomposition)>,
}

impl<'a> SpectralCache<'a> {
    fn new(family: &'a OperatorFamily) -> Self {
        Self {
            family,
            entries: Vec::new(),
        }
    }

    fn get(&mut self, t: f64) -> Result<&SpectralDecomposition> {
        let key = t.to_bits();
        if let Some(pos) = self.entries.iter().position(|(k, _)| *k == key) {
            return Ok(&self.entries[pos].1);
        }
        let dec = self.family.spectral_at(t)?;
        self.entries.push((key, dec));
        Ok(&self.entries.last().expect("just pushed").1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemporalHolderReport {
    /// Fitted log-log slope; `None` for autonomous families.
    pub mu_hat: Option<f64>,
    /// `exp(intercept)` of the log-log fit.
    pub n_hat_fit: f64,
    /// `sup defect/(t−s)^μ` with the family's declared μ.
    pub n_hat: f64,
    pub samples: Vec<(f64, f64, f64)>,
}

/// Measures `∥A(t)^ν[A(t)⁻¹ − A(s)⁻¹]∥` over time pairs.
pub fn temporal_holder_scan(
    family: &OperatorFamily,
    nu: f64,
    pairs: &[(f64, f64)],
) -> Result<TemporalHolderReport> {
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(Error::Parameter(format!("nu = {nu} not in (0, 1]")));
    }
    check_pairs(pairs, 8)?;
    let mut cache = SpectralCache::new(family);
    let mut samples = Vec::with_capacity(pairs.len());
    for &(s, t) in pairs {
        let inv_s = cache.get(s)?.power(-1.0);
        let dec_t = cache.get(t)?;
        let defect_op = dec_t.power(nu) * (dec_t.power(-1.0) - inv_s);
        samples.push((s, t, family.state_operator_norm(&defect_op)));
    }
    Ok(summarise_defects(samples, family.mu()))
}

fn summarise_defects(samples: Vec<(f64, f64, f64)>, mu: f64) -> TemporalHolderReport {
    let mut n_hat = 0.0_f64;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for &(s, t, d) in &samples {
        n_hat = n_hat.max(d / (t - s).powf(mu));
        if d > ZERO_DEFECT {
            xs.push((t - s).ln());
            ys.push(d.ln());
        }
    }
    if xs.len() < 2 {
        return TemporalHolderReport {
            mu_hat: None,
            n_hat_fit: 0.0,
            n_hat: if samples.iter().all(|s| s.2 <= ZERO_DEFECT) { 0.0 } else { n_hat },
            samples,
        };
    }
    let fit = linear_fit(&xs, &ys, None);
    TemporalHolderReport {
        mu_hat: fit.map(|f| f.slope),
        n_hat_fit: fit.map_or(0.0, |f| f.intercept.exp()),
        n_hat,
        samples,
    }
}

/// `sup ∥[A(t)^{θ₁} − A(s)^{θ₁}]A(s)^{−θ₂}∥/(t−s)^μ` over the given pairs.
pub fn fractional_difference_constant(
    family: &OperatorFamily,
    theta1: f64,
    theta2: f64,
    pairs: &[(f64, f64)],
) -> Result<f64> {
    if !(0.0 < theta1 && theta1 < theta2 && theta2 <= 1.0) {
        return Err(Error::Parameter(format!(
            "need 0 < theta1 < theta2 <= 1, got {theta1}, {theta2}"
        )));
    }
    check_pairs(pairs, 1)?;
    let mu = family.mu();
    let mut cache = SpectralCache::new(family);
    let mut sup = 0.0_f64;
    for &(s, t) in pairs {
        let (ps, ps_inv) = {
            let dec = cache.get(s)?;
            (dec.power(theta1), dec.power(-theta2))
        };
        let pt = cache.get(t)?.power(theta1);
        let op = (pt - ps) * ps_inv;
        sup = sup.max(family.state_operator_norm(&op) / (t - s).powf(mu));
    }
    Ok(sup)
}
