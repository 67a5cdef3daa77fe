//! Named problem setups used by the experiment driver and the acceptance
//! suite. Every number here is an implementation choice that satisfies the
//! structural hypotheses with margin.

use alloc::format;
use alloc::string::{String, ToString};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::coefficients::{Coefficient, CoefficientField, SpaceFn, TimeFn};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::operator::OperatorFamily;
use crate::stochastic::NoiseMap;
use crate::strict::{Forcing, ProblemSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Diffusion–reaction on `(0, 1)` with `a = b = 1 + t/2`, forcing `sin πx`
    /// and noise `(1 + t^0.3) sin πx`.
    Section4,
    /// Same coefficients with `β = 1/2 < δ`.
    BetaBelowDelta,
    /// Constant-coefficient 8-point stencil, `a = 0.1`, `b = 1`.
    Autonomous8,
    /// `dX + X dt = dw` in one dimension.
    ScalarOu,
}

impl Preset {
    pub const ALL: [Preset; 4] = [
        Preset::Section4,
        Preset::BetaBelowDelta,
        Preset::Autonomous8,
        Preset::ScalarOu,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Section4 => "section4",
            Preset::BetaBelowDelta => "beta-below-delta",
            Preset::Autonomous8 => "autonomous8",
            Preset::ScalarOu => "scalar-ou",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == name)
            .ok_or_else(|| Error::Parameter(format!("unknown preset {name:?}")))
    }

    /// Spatial size used when a configuration does not override it.
    pub fn default_n(self) -> usize {
        match self {
            Preset::Section4 => 64,
            Preset::BetaBelowDelta => 32,
            Preset::Autonomous8 => 8,
            Preset::ScalarOu => 1,
        }
    }

    pub fn exponents(self) -> Exponents {
        match self {
            Preset::BetaBelowDelta => Exponents { beta: 0.5, ..Exponents::DEFAULT },
            _ => Exponents::DEFAULT,
        }
    }

    pub fn build(self, n: usize, horizon: f64) -> Result<ProblemSpec> {
        self.build_with(n, horizon, self.exponents())
    }

    pub fn build_with(self, n: usize, horizon: f64, ex: Exponents) -> Result<ProblemSpec> {
        let problem = match self {
            Preset::Section4 | Preset::BetaBelowDelta => section4(n, horizon, ex)?,
            Preset::Autonomous8 => {
                if n != 8 {
                    return Err(Error::Parameter(format!("autonomous8 has n = 8, got {n}")));
                }
                autonomous8(horizon, ex)?
            }
            Preset::ScalarOu => {
                if n != 1 {
                    return Err(Error::Parameter(format!("scalar-ou has n = 1, got {n}")));
                }
                scalar_ou(1.0, 1.0, horizon, ex)?
            }
        };
        Ok(problem.with_preset(self.name().to_string()))
    }
}

/// Regularity exponents of a problem.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exponents {
    pub beta: f64,
    pub sigma: f64,
    pub delta: f64,
    pub delta1: f64,
}

impl Exponents {
    pub const DEFAULT: Exponents = Exponents {
        beta: 1.0,
        sigma: 0.3,
        delta: 0.7,
        delta1: 0.9,
    };
}

fn sine_profile(grid: &Grid) -> DVector<f64> {
    SpaceFn::sine(1).sample(grid)
}

/// Time-dependent diffusion–reaction problem with `ξ = 0`.
pub fn section4(n: usize, horizon: f64, ex: Exponents) -> Result<ProblemSpec> {
    let grid = Grid::unit(n)?;
    let coeffs = CoefficientField::new(Coefficient::affine(1.0, 0.5), Coefficient::affine(1.0, 0.5), 1.0, 1.0)?;
    let family = OperatorFamily::stencil(grid, coeffs, horizon, 1.0)?;
    let profile = sine_profile(&grid);
    // With β = 1 the weighted forcing class admits bounded Hölder factors.
    let forcing = Forcing {
        time: TimeFn::constant(1.0),
        profile: profile.clone(),
    };
    let noise_time = TimeFn::Power {
        offset: 1.0,
        scale: 1.0,
        exponent: 0.3,
    };
    let noise = NoiseMap::separable(noise_time, profile, "(1 + t^0.3) sin(pi x)")?;
    ProblemSpec::new(family, forcing, ex.beta, ex.sigma, noise, ex.delta, ex.delta1, DVector::zeros(n))
}

/// Autonomous 8×8 stencil with smallest eigenvalue close to 2.
pub fn autonomous8(horizon: f64, ex: Exponents) -> Result<ProblemSpec> {
    let grid = Grid::unit(8)?;
    let coeffs = CoefficientField::new(Coefficient::constant(0.1), Coefficient::constant(1.0), 0.1, 1.0)?;
    let family = OperatorFamily::stencil(grid, coeffs, horizon, 1.0)?;
    let profile = sine_profile(&grid);
    let noise = NoiseMap::separable(TimeFn::constant(1.0), profile.clone(), "sin(pi x)")?;
    ProblemSpec::new(family, Forcing::zero(8), ex.beta, ex.sigma, noise, ex.delta, ex.delta1, profile)
}

/// `dX + aX dt = g dw`, `X(0) = 0`.
pub fn scalar_ou(a: f64, g: f64, horizon: f64, ex: Exponents) -> Result<ProblemSpec> {
    let family = OperatorFamily::autonomous(DMatrix::from_element(1, 1, a), horizon)?;
    let noise = NoiseMap::separable(TimeFn::constant(g), DVector::from_element(1, 1.0), String::from("constant"))?;
    ProblemSpec::new(family, Forcing::zero(1), ex.beta, ex.sigma, noise, ex.delta, ex.delta1, DVector::zeros(1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_build_and_round_trip_names() {
        for p in Preset::ALL {
            let spec = p.build(p.default_n(), 1.0).unwrap();
            assert_eq!(spec.preset(), Some(p.name()));
            assert_eq!(Preset::from_name(p.name()).unwrap(), p);
        }
        assert!(Preset::from_name("nope").is_err());
    }

    #[test]
    fn autonomy_flags() {
        assert!(!section4(16, 1.0, Exponents::DEFAULT).unwrap().family().is_autonomous());
        assert!(autonomous8(1.0, Exponents::DEFAULT).unwrap().family().is_autonomous());
        assert!(scalar_ou(1.0, 1.0, 1.0, Exponents::DEFAULT).unwrap().family().is_autonomous());
    }

    #[test]
    fn autonomous8_spectrum_starts_near_two() {
        let l = autonomous8(1.0, Exponents::DEFAULT).unwrap().family().reference().lambda_min();
        assert!((1.8..2.2).contains(&l), "{l}");
    }

    #[test]
    fn overrides_go_through_hypothesis_checks() {
        let ex = Exponents { sigma: 1.0, ..Exponents::DEFAULT };
        let err = Preset::Section4.build_with(8, 1.0, ex).unwrap_err();
        assert!(matches!(err, Error::Hypothesis { condition: "(F1)", .. }));
    }

    #[test]
    fn regimes() {
        let s = Preset::BetaBelowDelta.build(32, 1.0).unwrap();
        assert!(s.beta() < s.delta());
        let s = Preset::Section4.build(16, 1.0).unwrap();
        assert!(s.beta() >= s.delta());
    }
}
