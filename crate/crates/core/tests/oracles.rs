//! Public-API checks against closed forms computed independently of the
//! library's own numerics.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use parabolic_core::coefficients::{Coefficient, CoefficientField};
use parabolic_core::grid::{Grid, TimeGrid};
use parabolic_core::linalg::{fractional_power, matrix_exponential};
use parabolic_core::operator::OperatorFamily;
use parabolic_core::presets::Preset;
use parabolic_core::stochastic::{ito_running_scalar, sample_brownian_path};

fn laplacian(n: usize, a: f64, b: f64) -> OperatorFamily {
    let coeffs = CoefficientField::new(Coefficient::constant(a), Coefficient::constant(b), a, 0.0).unwrap();
    OperatorFamily::stencil(Grid::unit(n).unwrap(), coeffs, 1.0, 1.0).unwrap()
}

#[test]
fn stencil_spectrum_matches_the_discrete_sine_basis() {
    let (n, a, b) = (12, 0.7, 0.3);
    let family = laplacian(n, a, b);
    let h = 1.0 / (n + 1) as f64;
    let mut exact: Vec<f64> = (1..=n)
        .map(|k| a * 4.0 / (h * h) * (k as f64 * PI * h / 2.0).sin().powi(2) + b)
        .collect();
    exact.sort_by(f64::total_cmp);
    let spec = family.reference();
    assert!((spec.lambda_min() - exact[0]).abs() < 1e-10 * exact[0]);
    assert!((spec.lambda_max() - exact[n - 1]).abs() < 1e-10 * exact[n - 1]);
}

#[test]
fn exponential_of_a_rotation_generator() {
    let t = 0.9;
    let gen = DMatrix::from_row_slice(2, 2, &[0.0, -t, t, 0.0]);
    let e = matrix_exponential(&gen).unwrap();
    let exact = DMatrix::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()]);
    assert!((e - exact).amax() < 1e-14);
}

#[test]
fn square_roots_compose() {
    let a = laplacian(6, 1.0, 1.0).at(0.0).unwrap();
    let r = fractional_power(&a, 0.5).unwrap();
    let scale = a.amax();
    assert!((&r * &r - &a).amax() < 1e-11 * scale);
    let inv = fractional_power(&a, -1.0).unwrap();
    assert!((&inv * &a - DMatrix::identity(6, 6)).amax() < 1e-11);
}

#[test]
fn seeded_paths_are_reproducible_and_streams_differ() {
    let grid = TimeGrid::uniform(1.0, 64).unwrap();
    let p = sample_brownian_path(2, &grid, 5, 3).unwrap();
    let q = sample_brownian_path(2, &grid, 5, 3).unwrap();
    let r = sample_brownian_path(2, &grid, 5, 4).unwrap();
    assert_eq!(p.increments(), q.increments());
    assert_ne!(p.increments(), r.increments());
    let last = p.values().pop().unwrap();
    let sum: f64 = p.increments().iter().step_by(2).sum();
    assert!((last[0] - sum).abs() < 1e-14);
}

#[test]
fn constant_integrand_integrates_to_the_endpoint() {
    let grid = TimeGrid::uniform(2.0, 100).unwrap();
    let path = sample_brownian_path(1, &grid, 9, 0).unwrap();
    let m = ito_running_scalar(&vec![1.5; 100], &path).unwrap();
    let w = path.values();
    for (k, mk) in m.iter().enumerate() {
        assert!((mk - 1.5 * w[k][0]).abs() < 1e-13);
    }
}

#[test]
fn presets_round_trip_by_name() {
    for p in Preset::ALL {
        assert_eq!(Preset::from_name(p.name()).unwrap(), p);
        let spec = p.build(p.default_n(), 1.0).unwrap();
        assert_eq!(spec.family().dim(), p.default_n());
        assert!(spec.xi().iter().all(|v| v.is_finite()));
    }
}
