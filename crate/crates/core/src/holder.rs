//! Weighted Hölder norms `F^{β,σ}((0,T];E)` and plain Hölder norms on sampled
//! functions. Suprema over continuum pairs are replaced by suprema over all
//! sampled pairs, so every quantity here is monotone under grid refinement.

#[allow(unused_imports)]
use nalgebra::ComplexField;
use alloc::format;
use alloc::vec::Vec;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::NormKind;

/// Number of samples nearest the origin used by the Cauchy-tail test.
pub const CAUCHY_TAIL: usize = 8;
/// Spread allowed within the Cauchy tail, relative to the sup term.
pub const CAUCHY_TOL: f64 = 0.1;
/// Modulus tail threshold relative to the maximal modulus.
pub const MODULUS_TAIL_RATIO: f64 = 0.1;
/// Minimum sample count for membership diagnostics.
pub const MEMBERSHIP_MIN_SAMPLES: usize = 8;

/// A function sampled on a strictly increasing time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledPath {
    times: Vec<f64>,
    values: Vec<DVector<f64>>,
    norm: NormKind,
}

impl SampledPath {
    pub fn new(times: Vec<f64>, values: Vec<DVector<f64>>, norm: NormKind) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Shape(format!(
                "{} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(Error::Grid("sample times must be finite and non-negative".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Grid("sample times must be strictly increasing".into()));
        }
        if let Some(first) = values.first() {
            if values.iter().any(|v| v.len() != first.len()) {
                return Err(Error::Shape("sampled values differ in dimension".into()));
            }
        }
        Ok(Self {
            times,
            values,
            norm,
        })
    }

    /// Scalar-valued samples measured by absolute value.
    pub fn scalar(times: Vec<f64>, values: &[f64]) -> Result<Self> {
        let values = values.iter().map(|&v| DVector::from_element(1, v)).collect();
        Self::new(times, values, NormKind::Euclidean)
    }

    pub fn from_fn<F: Fn(f64) -> f64>(times: Vec<f64>, f: F) -> Result<Self> {
        let values: Vec<f64> = times.iter().map(|&t| f(t)).collect();
        Self::scalar(times, &values)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[DVector<f64>] {
        &self.values
    }

    pub fn norm_kind(&self) -> &NormKind {
        &self.norm
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.values.first().map_or(0, |v| v.len())
    }

    /// Keeps the samples at the given (sorted, distinct) indices.
    pub fn restrict(&self, indices: &[usize]) -> Result<Self> {
        let times = indices.iter().map(|&i| self.times[i]).collect();
        let values = indices.iter().map(|&i| self.values[i].clone()).collect();
        Self::new(times, values, self.norm.clone())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            times: self.times.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
            norm: self.norm.clone(),
        }
    }

    fn transformed(&self) -> Vec<DVector<f64>> {
        self.values.iter().map(|v| self.norm.transform(v)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedHolderParams {
    pub beta: f64,
    pub sigma: f64,
}

impl WeightedHolderParams {
    pub fn new(beta: f64, sigma: f64) -> Result<Self> {
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::Parameter(format!("beta = {beta} not in (0, 1]")));
        }
        if !(sigma > 0.0 && sigma < beta) {
            return Err(Error::Parameter(format!("sigma = {sigma} not in (0, beta)")));
        }
        Ok(Self { beta, sigma })
    }

    /// Also enforces `σ < μ + ν − 1` for an attached family.
    pub fn for_family(beta: f64, sigma: f64, mu: f64, nu: f64) -> Result<Self> {
        let p = Self::new(beta, sigma)?;
        if !(sigma < mu + nu - 1.0) {
            return Err(Error::Parameter(format!(
                "sigma = {sigma} must be below mu + nu - 1 = {}",
                mu + nu - 1.0
            )));
        }
        Ok(p)
    }

    fn weight_exponent(&self) -> f64 {
        1.0 - self.beta + self.sigma
    }
}

/// Outcome of the three membership properties.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Membership {
    /// `t^{1−β} f(t)` converges as `t → 0`.
    pub limit_at_origin: bool,
    /// Finite weighted Hölder seminorm that is stable under refinement.
    pub weighted_holder: bool,
    /// `w_f(t) → 0` as `t → 0`.
    pub vanishing_modulus: bool,
}

impl Membership {
    pub fn all(&self) -> bool {
        self.limit_at_origin && self.weighted_holder && self.vanishing_modulus
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeightedHolderReport {
    pub norm: f64,
    pub sup_term: f64,
    pub holder_term: f64,
    /// Sampled `(t, w_f(t))`.
    pub modulus: Vec<(f64, f64)>,
    /// `None` when there are too few samples for membership diagnostics.
    pub passes: Option<Membership>,
    /// Sampled data cannot tell continuity on `(0,T]` from `[0,T]`.
    pub caveat: &'static str,
}

const ONE_SIDED_CAVEAT: &str = "sampled suprema cannot distinguish continuity on (0,T] from [0,T]";

fn sup_term(times: &[f64], values: &[DVector<f64>], beta: f64) -> f64 {
    times
        .iter()
        .zip(values)
        .filter(|(t, _)| **t > 0.0 || beta == 1.0)
        .map(|(&t, v)| t.powf(1.0 - beta) * v.norm())
        .fold(0.0, f64::max)
}

/// `w_f(t_i)` for every sample `i`.
fn modulus_curve(times: &[f64], values: &[DVector<f64>], params: &WeightedHolderParams) -> Vec<f64> {
    let exp = params.weight_exponent();
    (0..times.len())
        .map(|i| {
            let t = times[i];
            (0..i)
                .filter(|&j| times[j] > 0.0)
                .map(|j| {
                    let s = times[j];
                    s.powf(exp) * (&values[i] - &values[j]).norm() / (t - s).powf(params.sigma)
                })
                .fold(0.0, f64::max)
        })
        .collect()
}

/// `F^{β,σ}` norm: `sup t^{1−β}∥f(t)∥ + sup s^{1−β+σ}∥f(t)−f(s)∥/(t−s)^σ`.
pub fn weighted_holder_norm(
    path: &SampledPath,
    params: &WeightedHolderParams,
) -> Result<WeightedHolderReport> {
    if path.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "weighted norm needs at least 2 samples, got {}",
            path.len()
        )));
    }
    let values = path.transformed();
    let sup = sup_term(&path.times, &values, params.beta);
    let curve = modulus_curve(&path.times, &values, params);
    let holder = curve.iter().copied().fold(0.0, f64::max);
    let passes = if path.len() >= MEMBERSHIP_MIN_SAMPLES {
        Some(membership_from(path, &values, &curve, holder, params))
    } else {
        None
    };
    Ok(WeightedHolderReport {
        norm: sup + holder,
        sup_term: sup,
        holder_term: holder,
        modulus: path.times.iter().copied().zip(curve).collect(),
        passes,
        caveat: ONE_SIDED_CAVEAT,
    })
}

/// `w_f(t) = sup_{s<t} s^{1−β+σ}∥f(t)−f(s)∥/(t−s)^σ`; `t` must be a sample time.
pub fn weighted_modulus(path: &SampledPath, params: &WeightedHolderParams, t: f64) -> Result<f64> {
    let first = *path
        .times
        .first()
        .ok_or_else(|| Error::InsufficientData("empty path".into()))?;
    if t < first {
        return Err(Error::InsufficientData(format!(
            "t = {t} precedes the first sample {first}"
        )));
    }
    let i = path
        .times
        .iter()
        .position(|&s| (s - t).abs() <= 1e-12 * (1.0 + t.abs()))
        .ok_or_else(|| Error::Parameter(format!("t = {t} is not a sample time")))?;
    let exp = params.weight_exponent();
    let ft = path.norm.transform(&path.values[i]);
    Ok((0..i)
        .filter(|&j| path.times[j] > 0.0)
        .map(|j| {
            let s = path.times[j];
            let fs = path.norm.transform(&path.values[j]);
            s.powf(exp) * (&ft - fs).norm() / (t - s).powf(params.sigma)
        })
        .fold(0.0, f64::max))
}

fn membership_from(
    path: &SampledPath,
    values: &[DVector<f64>],
    curve: &[f64],
    holder: f64,
    params: &WeightedHolderParams,
) -> Membership {
    let times = &path.times;

    let limit_at_origin = if params.beta == 1.0 {
        true
    } else {
        let tail: Vec<DVector<f64>> = times
            .iter()
            .zip(values)
            .filter(|(t, _)| **t > 0.0)
            .take(CAUCHY_TAIL)
            .map(|(&t, v)| v * t.powf(1.0 - params.beta))
            .collect();
        // Spread is measured against the global sup term so that tails
        // converging to zero are accepted.
        let scale = sup_term(times, values, params.beta);
        let mut spread = 0.0_f64;
        for (i, a) in tail.iter().enumerate() {
            for b in &tail[i + 1..] {
                spread = spread.max((a - b).norm());
            }
        }
        tail.len() == CAUCHY_TAIL && spread <= CAUCHY_TOL * scale
    };

    // Every other sample; a σ-Hölder function keeps its seminorm, a jump
    // inflates it by 2^σ under each halving of the spacing.
    let coarse: Vec<usize> = (0..times.len()).step_by(2).collect();
    let coarse_times: Vec<f64> = coarse.iter().map(|&i| times[i]).collect();
    let coarse_values: Vec<DVector<f64>> = coarse.iter().map(|&i| values[i].clone()).collect();
    let coarse_holder = modulus_curve(&coarse_times, &coarse_values, params)
        .into_iter()
        .fold(0.0, f64::max);
    let weighted_holder = holder.is_finite()
        && holder <= coarse_holder * 2.0_f64.powf(params.sigma / 2.0) + f64::MIN_POSITIVE;

    let max_w = curve.iter().copied().fold(0.0, f64::max);
    let first_eligible = times
        .iter()
        .position(|&t| t > 0.0)
        .map(|first_positive| first_positive + 1);
    let vanishing_modulus = if max_w == 0.0 {
        true
    } else {
        first_eligible
            .filter(|&i| i < curve.len())
            .is_some_and(|i| curve[i] < MODULUS_TAIL_RATIO * max_w)
    };

    Membership {
        limit_at_origin,
        weighted_holder,
        vanishing_modulus,
    }
}

/// Membership diagnostics for properties (i)–(iii) of `F^{β,σ}`.
pub fn check_weighted_membership(
    path: &SampledPath,
    params: &WeightedHolderParams,
) -> Result<Membership> {
    if path.len() < MEMBERSHIP_MIN_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "membership needs at least {MEMBERSHIP_MIN_SAMPLES} samples, got {}",
            path.len()
        )));
    }
    let values = path.transformed();
    let curve = modulus_curve(&path.times, &values, params);
    let holder = curve.iter().copied().fold(0.0, f64::max);
    Ok(membership_from(path, &values, &curve, holder, params))
}

fn interval_indices(path: &SampledPath, interval: (f64, f64)) -> Result<Vec<usize>> {
    let (a, b) = interval;
    if !(b > a) {
        return Err(Error::Parameter(format!("empty interval [{a}, {b}]")));
    }
    let idx: Vec<usize> = (0..path.len())
        .filter(|&i| path.times[i] >= a && path.times[i] <= b)
        .collect();
    if idx.is_empty() {
        return Err(Error::Parameter(format!("no samples inside [{a}, {b}]")));
    }
    Ok(idx)
}

/// `sup ∥f(t)−f(s)∥/(t−s)^γ` over sampled pairs in the interval.
pub fn holder_seminorm(path: &SampledPath, gamma: f64, interval: (f64, f64)) -> Result<f64> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::Parameter(format!("gamma = {gamma} not in (0, 1]")));
    }
    let idx = interval_indices(path, interval)?;
    let values: Vec<DVector<f64>> = idx.iter().map(|&i| path.norm.transform(&path.values[i])).collect();
    let mut sup = 0.0_f64;
    for (a, &i) in idx.iter().enumerate() {
        for (b, &j) in idx.iter().enumerate().skip(a + 1) {
            let dt = path.times[j] - path.times[i];
            sup = sup.max((&values[b] - &values[a]).norm() / dt.powf(gamma));
        }
    }
    Ok(sup)
}

/// `C^γ([a,b])` norm: sup norm plus Hölder seminorm over sampled points.
pub fn holder_norm(path: &SampledPath, gamma: f64, interval: (f64, f64)) -> Result<f64> {
    let semi = holder_seminorm(path, gamma, interval)?;
    let idx = interval_indices(path, interval)?;
    let sup = idx
        .iter()
        .map(|&i| path.norm.norm(&path.values[i]))
        .fold(0.0, f64::max);
    Ok(sup + semi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn uniform(n: usize, t_end: f64) -> Vec<f64> {
        (0..=n).map(|k| t_end * k as f64 / n as f64).collect()
    }

    fn dyadic(levels: i32) -> Vec<f64> {
        (0..=levels).rev().map(|j| 0.5_f64.powi(j)).collect()
    }

    #[test]
    fn constant_function() {
        let p = WeightedHolderParams::new(1.0, 0.5).unwrap();
        let path = SampledPath::from_fn(uniform(16, 1.0), |_| -3.0).unwrap();
        let rep = weighted_holder_norm(&path, &p).unwrap();
        assert_eq!(rep.holder_term, 0.0);
        assert_eq!(rep.norm, 3.0);
        assert!(rep.passes.unwrap().all());
        for &t in path.times() {
            assert_eq!(weighted_modulus(&path, &p, t).unwrap(), 0.0);
        }
    }

    #[test]
    fn singular_power_sup_term() {
        // t^{1−β}·t^{β−1} = 1 at every positive sample.
        let p = WeightedHolderParams::new(0.5, 0.2).unwrap();
        let path = SampledPath::from_fn(dyadic(20), |t| t.powf(-0.5)).unwrap();
        let rep = weighted_holder_norm(&path, &p).unwrap();
        assert!((rep.sup_term - 1.0).abs() < 1e-12);
    }

    #[test]
    fn linear_function_holder_term() {
        // Dense-grid oracle: sup s^{1/2}(t−s)^{1/2} on 0 ≤ s < t ≤ 1 is 1/2 at (1/2, 1).
        let p = WeightedHolderParams::new(1.0, 0.5).unwrap();
        let times = uniform(64, 1.0);
        let mut oracle = 0.0_f64;
        for (i, &s) in times.iter().enumerate() {
            for &t in &times[i + 1..] {
                oracle = oracle.max(s.sqrt() * (t - s).sqrt());
            }
        }
        assert!((oracle - 0.5).abs() < 1e-15);
        let path = SampledPath::from_fn(times, |t| t).unwrap();
        let rep = weighted_holder_norm(&path, &p).unwrap();
        assert!((rep.holder_term - oracle).abs() < 1e-14);
    }

    #[test]
    fn power_singularity_has_scale_invariant_modulus() {
        // Under s = u·t the modulus of t^{β−1} does not depend on t, so it
        // cannot vanish at the origin on a dyadic grid.
        let p = WeightedHolderParams::new(0.5, 0.2).unwrap();
        let path = SampledPath::from_fn(dyadic(24), |t| t.powf(-0.5)).unwrap();
        let rep = weighted_holder_norm(&path, &p).unwrap();
        let late: Vec<f64> = rep.modulus.iter().skip(8).map(|m| m.1).collect();
        let (lo, hi) = late
            .iter()
            .fold((f64::INFINITY, 0.0_f64), |(lo, hi), &w| (lo.min(w), hi.max(w)));
        assert!(hi - lo < 1e-12 * hi);
        let m = rep.passes.unwrap();
        assert!(m.limit_at_origin);
        assert!(m.weighted_holder);
        assert!(!m.vanishing_modulus);
    }

    #[test]
    fn softened_singularity_is_a_member() {
        // f(t) = t^{β−1+ε}: t^{1−β}f → 0 and w_f(t) = O(t^ε).
        let p = WeightedHolderParams::new(0.5, 0.2).unwrap();
        let path = SampledPath::from_fn(dyadic(24), |t| t.powf(-0.5 + 0.25)).unwrap();
        let m = check_weighted_membership(&path, &p).unwrap();
        assert!(m.all(), "{m:?}");
        let w_small = weighted_modulus(&path, &p, path.times()[3]).unwrap();
        let w_large = weighted_modulus(&path, &p, 1.0).unwrap();
        assert!(w_small < w_large);
    }

    #[test]
    fn jump_fails_holder_property() {
        let p = WeightedHolderParams::new(1.0, 0.3).unwrap();
        let path = SampledPath::from_fn(uniform(256, 1.0), |t| if t < 0.5 + 1e-9 { -1.0 } else { 1.0 }).unwrap();
        let m = check_weighted_membership(&path, &p).unwrap();
        assert!(!m.weighted_holder);

        // Modulus right after the jump grows as the spacing shrinks.
        let mut last = 0.0;
        for n in [64, 128, 256, 512] {
            let path = SampledPath::from_fn(uniform(n, 1.0), |t| if t <= 0.5 { -1.0 } else { 1.0 }).unwrap();
            let t = path.times()[n / 2 + 1];
            let w = weighted_modulus(&path, &p, t).unwrap();
            assert!(w > last);
            last = w;
        }
    }

    #[test]
    fn membership_rejects_short_paths() {
        let p = WeightedHolderParams::new(1.0, 0.3).unwrap();
        let path = SampledPath::from_fn(uniform(4, 1.0), |t| t).unwrap();
        assert!(weighted_holder_norm(&path, &p).unwrap().passes.is_none());
        assert!(matches!(
            check_weighted_membership(&path, &p),
            Err(Error::InsufficientData(_))
        ));
        let single = SampledPath::from_fn(vec![0.5], |t| t).unwrap();
        assert!(weighted_holder_norm(&single, &p).is_err());
        assert!(weighted_modulus(&path, &p, -1.0).is_err());
    }

    #[test]
    fn plain_holder_norms() {
        let path = SampledPath::from_fn(uniform(32, 1.0), |t| t).unwrap();
        assert!((holder_seminorm(&path, 1.0, (0.0, 1.0)).unwrap() - 1.0).abs() < 1e-12);
        assert!((holder_norm(&path, 1.0, (0.0, 1.0)).unwrap() - 2.0).abs() < 1e-12);
        let c = SampledPath::from_fn(uniform(32, 1.0), |_| 2.0).unwrap();
        assert_eq!(holder_seminorm(&c, 0.5, (0.0, 1.0)).unwrap(), 0.0);
        assert!(matches!(holder_norm(&c, 0.5, (0.5, 0.5)), Err(Error::Parameter(_))));
    }

    #[test]
    fn params_validation() {
        assert!(WeightedHolderParams::new(0.5, 0.5).is_err());
        assert!(WeightedHolderParams::new(1.5, 0.5).is_err());
        assert!(WeightedHolderParams::for_family(1.0, 0.6, 0.5, 1.0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn path_strategy() -> impl Strategy<Value = SampledPath> {
            proptest::collection::vec(-2.0f64..2.0, 12).prop_map(|vals| {
                let times: Vec<f64> = (1..=12).map(|k| k as f64 / 12.0).collect();
                SampledPath::scalar(times, &vals).unwrap()
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]
            #[test]
            fn homogeneity(path in path_strategy(), lambda in -3.0f64..3.0) {
                let p = WeightedHolderParams::new(0.7, 0.3).unwrap();
                let base = weighted_holder_norm(&path, &p).unwrap();
                let scaled = weighted_holder_norm(&path.scaled(lambda), &p).unwrap();
                let l = lambda.abs();
                prop_assert!((scaled.norm - l * base.norm).abs() <= 1e-12 * (1.0 + base.norm));
                prop_assert!((scaled.sup_term - l * base.sup_term).abs() <= 1e-12 * (1.0 + base.sup_term));
                prop_assert!((scaled.holder_term - l * base.holder_term).abs() <= 1e-12 * (1.0 + base.holder_term));
            }

            #[test]
            fn restriction_never_increases(path in path_strategy(), mask in proptest::collection::vec(any::<bool>(), 12)) {
                let p = WeightedHolderParams::new(0.7, 0.3).unwrap();
                let idx: Vec<usize> = (0..12).filter(|&i| mask[i] || i == 0 || i == 11).collect();
                let full = weighted_holder_norm(&path, &p).unwrap();
                let sub = weighted_holder_norm(&path.restrict(&idx).unwrap(), &p).unwrap();
                prop_assert!(sub.sup_term <= full.sup_term);
                prop_assert!(sub.holder_term <= full.holder_term);
            }

            #[test]
            fn sampled_bounds_hold(path in path_strategy()) {
                let p = WeightedHolderParams::new(0.7, 0.3).unwrap();
                let rep = weighted_holder_norm(&path, &p).unwrap();
                let t = path.times();
                let v = path.values();
                for i in 0..t.len() {
                    prop_assert!(v[i].norm() <= rep.norm * t[i].powf(p.beta - 1.0) * (1.0 + 1e-12));
                    for j in 0..i {
                        let bound = rep.norm * (t[i] - t[j]).powf(p.sigma) * t[j].powf(p.beta - p.sigma - 1.0);
                        prop_assert!((&v[i] - &v[j]).norm() <= bound * (1.0 + 1e-12));
                    }
                }
            }

            #[test]
            fn beta_one_dominates_sup_norm(path in path_strategy()) {
                let p = WeightedHolderParams::new(1.0, 0.4).unwrap();
                let rep = weighted_holder_norm(&path, &p).unwrap();
                let sup = path.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
                prop_assert!(rep.norm >= sup);
            }
        }
    }
}
