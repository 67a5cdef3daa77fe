//! Closed vocabulary of coefficient forms. Every form has a known Hölder
//! behaviour in time, which keeps problem descriptions checkable without an
//! expression interpreter.

#[allow(unused_imports)]
use nalgebra::ComplexField;
use alloc::format;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Scalar function of time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TimeFn {
    Constant { value: f64 },
    /// `offset + slope·t`
    Affine { offset: f64, slope: f64 },
    /// `offset + scale·t^exponent`; singular at `t = 0` when `exponent < 0`.
    Power {
        offset: f64,
        scale: f64,
        exponent: f64,
    },
    /// `offset + amplitude·cos(frequency·t)`
    Cosine {
        offset: f64,
        amplitude: f64,
        frequency: f64,
    },
}

impl TimeFn {
    pub fn constant(value: f64) -> Self {
        TimeFn::Constant { value }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            TimeFn::Constant { value } => value,
            TimeFn::Affine { offset, slope } => offset + slope * t,
            TimeFn::Power {
                offset,
                scale,
                exponent,
            } => {
                if exponent == 0.0 {
                    offset + scale
                } else {
                    offset + scale * t.powf(exponent)
                }
            }
            TimeFn::Cosine {
                offset,
                amplitude,
                frequency,
            } => offset + amplitude * (frequency * t).cos(),
        }
    }

    pub fn is_constant(&self) -> bool {
        match *self {
            TimeFn::Constant { .. } => true,
            TimeFn::Affine { slope, .. } => slope == 0.0,
            TimeFn::Power {
                scale, exponent, ..
            } => scale == 0.0 || exponent == 0.0,
            TimeFn::Cosine {
                amplitude,
                frequency,
                ..
            } => amplitude == 0.0 || frequency == 0.0,
        }
    }

    /// A constant `C` with `|f(t) − f(s)| ≤ C (t−s)^σ` on `[0, horizon]`,
    /// or `None` when the form is not σ-Hölder there.
    pub fn holder_constant(&self, sigma: f64, horizon: f64) -> Option<f64> {
        if !(sigma > 0.0 && sigma <= 1.0) {
            return None;
        }
        if self.is_constant() {
            return Some(0.0);
        }
        match *self {
            TimeFn::Constant { .. } => Some(0.0),
            TimeFn::Affine { slope, .. } => Some(slope.abs() * horizon.powf(1.0 - sigma)),
            TimeFn::Power {
                scale, exponent, ..
            } => {
                if exponent >= 1.0 {
                    // Lipschitz with constant e·T^(e−1).
                    Some(scale.abs() * exponent * horizon.powf(exponent - 1.0) * horizon.powf(1.0 - sigma))
                } else if exponent >= sigma {
                    Some(scale.abs() * horizon.powf(exponent - sigma))
                } else {
                    None
                }
            }
            TimeFn::Cosine {
                amplitude,
                frequency,
                ..
            } => Some(amplitude.abs() * 2.0_f64.powf(1.0 - sigma) * frequency.abs().powf(sigma)),
        }
    }
}

/// Scalar function of position.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SpaceFn {
    Constant { value: f64 },
    /// `amplitude·sin(mode·π·u)` with `u` the unit coordinate.
    SineMode { mode: u32, amplitude: f64 },
    /// `amplitude·4u(1−u)`
    Bubble { amplitude: f64 },
}

impl SpaceFn {
    pub fn sine(mode: u32) -> Self {
        SpaceFn::SineMode {
            mode,
            amplitude: 1.0,
        }
    }

    /// Evaluates at unit coordinate `u ∈ [0, 1]`.
    pub fn eval_unit(&self, u: f64) -> f64 {
        match *self {
            SpaceFn::Constant { value } => value,
            SpaceFn::SineMode { mode, amplitude } => {
                amplitude * (mode as f64 * core::f64::consts::PI * u).sin()
            }
            SpaceFn::Bubble { amplitude } => amplitude * 4.0 * u * (1.0 - u),
        }
    }

    pub fn sample(&self, grid: &Grid) -> DVector<f64> {
        DVector::from_iterator(
            grid.n(),
            grid.points()
                .into_iter()
                .map(|x| self.eval_unit(grid.unit_coordinate(x))),
        )
    }
}

/// Coefficient of the elliptic operator as a function of `(x, t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Coefficient {
    Constant { value: f64 },
    AffineInTime { offset: f64, slope: f64 },
    /// `time(t)·space(x)`
    Separable { time: TimeFn, space: SpaceFn },
}

impl Coefficient {
    pub fn constant(value: f64) -> Self {
        Coefficient::Constant { value }
    }

    pub fn affine(offset: f64, slope: f64) -> Self {
        Coefficient::AffineInTime { offset, slope }
    }

    pub fn eval(&self, u: f64, t: f64) -> f64 {
        match self {
            Coefficient::Constant { value } => *value,
            Coefficient::AffineInTime { offset, slope } => offset + slope * t,
            Coefficient::Separable { time, space } => time.eval(t) * space.eval_unit(u),
        }
    }

    pub fn is_time_independent(&self) -> bool {
        match self {
            Coefficient::Constant { .. } => true,
            Coefficient::AffineInTime { slope, .. } => *slope == 0.0,
            Coefficient::Separable { time, .. } => time.is_constant(),
        }
    }
}

/// Diffusion `a(x,t)` and reaction `b(x,t)` with their declared lower bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientField {
    pub a: Coefficient,
    pub b: Coefficient,
    pub a0: f64,
    pub b0: f64,
}

impl CoefficientField {
    pub fn new(a: Coefficient, b: Coefficient, a0: f64, b0: f64) -> Result<Self> {
        if !(a0 > 0.0) || !(b0 >= 0.0) {
            return Err(Error::Coefficient(format!(
                "lower bounds must satisfy a0 > 0, b0 >= 0 (got {a0}, {b0})"
            )));
        }
        Ok(Self { a, b, a0, b0 })
    }

    pub fn is_time_independent(&self) -> bool {
        self.a.is_time_independent() && self.b.is_time_independent()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_form_at_origin() {
        let f = TimeFn::Power {
            offset: 0.0,
            scale: 1.0,
            exponent: 0.0,
        };
        assert_eq!(f.eval(0.0), 1.0);
        let g = TimeFn::Power {
            offset: 1.0,
            scale: 1.0,
            exponent: 0.3,
        };
        assert_eq!(g.eval(0.0), 1.0);
        assert_eq!(g.holder_constant(0.3, 1.0), Some(1.0));
        assert_eq!(g.holder_constant(0.5, 1.0), None);
    }

    #[test]
    fn sine_profile_vanishes_at_boundary() {
        let s = SpaceFn::sine(1);
        assert!(s.eval_unit(0.0).abs() < 1e-15);
        assert!((s.eval_unit(0.5) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn serde_shape() {
        let c: Coefficient =
            serde_json::from_str(r#"{"form":"affine-in-time","offset":1.0,"slope":0.5}"#).unwrap();
        assert_eq!(c, Coefficient::affine(1.0, 0.5));
        assert!(serde_json::from_str::<Coefficient>(r#"{"form":"constant","value":1.0,"x":2}"#).is_err());
    }
}
