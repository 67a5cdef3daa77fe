//! Dense linear algebra used by the operator and evolution modules: symmetric
//! spectral calculus, the matrix exponential and operator norms.

#[allow(unused_imports)]
use nalgebra::ComplexField;
use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative tolerance for spectral reconstructions.
pub const TOL_SPEC: f64 = 1e-10;

/// Symmetry tolerance relative to the largest entry.
const SYMMETRY_TOL: f64 = 1e-13;

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

pub fn is_symmetric(m: &DMatrix<f64>) -> bool {
    if !m.is_square() {
        return false;
    }
    let scale = max_abs(m).max(f64::MIN_POSITIVE);
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOL * scale {
                return false;
            }
        }
    }
    true
}

fn check_finite(m: &DMatrix<f64>) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric(format!(
            "matrix of size {}x{} has non-finite entries",
            m.nrows(),
            m.ncols()
        )))
    }
}

/// Eigenvalues in ascending order with matching orthonormal eigenvector columns.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl SpectralDecomposition {
    /// Decomposes a symmetric matrix without a definiteness requirement.
    pub fn symmetric(a: &DMatrix<f64>) -> Result<Self> {
        check_finite(a)?;
        if !is_symmetric(a) {
            return Err(Error::Spectral("matrix is not symmetric".into()));
        }
        let n = a.nrows();
        let eig = SymmetricEigen::new(a.clone());
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
        let mut eigenvectors = DMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
        }
        Ok(Self {
            eigenvalues,
            eigenvectors,
        })
    }

    /// Decomposes a symmetric positive definite matrix.
    pub fn positive_definite(a: &DMatrix<f64>) -> Result<Self> {
        let dec = Self::symmetric(a)?;
        let lmin = dec.lambda_min();
        if !(lmin > 0.0) {
            return Err(Error::Spectral(format!(
                "matrix is not positive definite (smallest eigenvalue {lmin:e})"
            )));
        }
        Ok(dec)
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues[self.dim() - 1]
    }

    /// `V f(Λ) Vᵀ`.
    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> DMatrix<f64> {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= f(self.eigenvalues[j]);
        }
        scaled * v.transpose()
    }

    /// `V f(Λ) Vᵀ x` without forming the matrix.
    pub fn apply<F: Fn(f64) -> f64>(&self, f: F, x: &DVector<f64>) -> DVector<f64> {
        let mut coeffs = self.eigenvectors.tr_mul(x);
        for (c, &l) in coeffs.iter_mut().zip(self.eigenvalues.iter()) {
            *c *= f(l);
        }
        &self.eigenvectors * coeffs
    }

    pub fn power(&self, theta: f64) -> DMatrix<f64> {
        self.map(|l| l.powf(theta))
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        self.map(|l| l)
    }

    /// ∥VΛVᵀ − A∥_max / ∥A∥_max.
    pub fn reconstruction_error(&self, a: &DMatrix<f64>) -> f64 {
        let scale = max_abs(a).max(f64::MIN_POSITIVE);
        max_abs(&(self.reconstruct() - a)) / scale
    }
}

/// `A^θ` for symmetric positive definite `A` and `θ ∈ [−2, 2]`.
pub fn fractional_power(a: &DMatrix<f64>, theta: f64) -> Result<DMatrix<f64>> {
    if !theta.is_finite() || theta.abs() > 2.0 {
        return Err(Error::Range(format!("exponent {theta} outside [-2, 2]")));
    }
    let dec = SpectralDecomposition::positive_definite(a)?;
    let err = dec.reconstruction_error(a);
    if err > TOL_SPEC {
        return Err(Error::Spectral(format!(
            "reconstruction error {err:e} exceeds tolerance"
        )));
    }
    Ok(dec.power(theta))
}

/// Largest singular value.
pub fn operator_norm(m: &DMatrix<f64>) -> f64 {
    if m.ncols() == 1 || m.nrows() == 1 {
        return m.norm();
    }
    let gram = if m.ncols() <= m.nrows() {
        m.tr_mul(m)
    } else {
        m * m.transpose()
    };
    let eig = SymmetricEigen::new(gram);
    eig.eigenvalues
        .iter()
        .fold(0.0_f64, |acc, &l| acc.max(l))
        .max(0.0)
        .sqrt()
}

/// Induced 1-norm (maximum absolute column sum).
pub fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Coefficients of the degree-13 diagonal Padé approximant to `exp`.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

const THETA_13: f64 = 5.371920351148152;

/// Scaling and squaring with a degree-13 Padé core, valid for any square matrix.
pub fn expm_pade(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_finite(a)?;
    if !a.is_square() {
        return Err(Error::Shape(format!(
            "exponential of a {}x{} matrix",
            a.nrows(),
            a.ncols()
        )));
    }
    let n = a.nrows();
    let norm = one_norm(a);
    let squarings = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a * 2.0_f64.powi(-squarings);
    let ident = DMatrix::<f64>::identity(n, n);
    let a2 = &scaled * &scaled;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = &PADE13;
    let inner_u = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]);
    let u = &scaled * (inner_u + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &ident * b[1]);
    let inner_v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]);
    let v = inner_v + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &ident * b[0];
    let mut r = (&v - &u)
        .lu()
        .solve(&(&v + &u))
        .ok_or_else(|| Error::Numeric("singular Padé denominator".into()))?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    check_finite(&r)?;
    Ok(r)
}

/// `exp(A)`: spectral route for symmetric input, Padé route otherwise.
pub fn matrix_exponential(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_finite(a)?;
    if is_symmetric(a) {
        let dec = SpectralDecomposition::symmetric(a)?;
        Ok(dec.map(f64::exp))
    } else {
        expm_pade(a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize) -> DMatrix<f64> {
        let h = 1.0 / (n as f64 + 1.0);
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                2.0 / (h * h)
            } else if i.abs_diff(j) == 1 {
                -1.0 / (h * h)
            } else {
                0.0
            }
        })
    }

    fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let e = matrix_exponential(&DMatrix::zeros(4, 4)).unwrap();
        assert_eq!(e, DMatrix::identity(4, 4));
    }

    #[test]
    fn exp_of_diagonal() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(alloc::vec![-1.0, 0.5, 2.0]));
        let e = matrix_exponential(&d).unwrap();
        for i in 0..3 {
            assert!((e[(i, i)] - d[(i, i)].exp()).abs() < 1e-14 * d[(i, i)].exp());
        }
        let ep = expm_pade(&d).unwrap();
        assert!(rel_err(&ep, &e) < 1e-13);
    }

    #[test]
    fn exp_of_nilpotent_terminates() {
        let n = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let e = matrix_exponential(&n).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!((e - expected).norm() < 1e-15);
    }

    #[test]
    fn spectral_and_pade_routes_agree_on_symmetric_input() {
        for scale in [1e-3, 0.1, 1.0] {
            let a = laplacian(8) * (-scale);
            let spectral = matrix_exponential(&a).unwrap();
            let pade = expm_pade(&a).unwrap();
            assert!(rel_err(&pade, &spectral) < 1e-11, "scale {scale}");
        }
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let mut a = DMatrix::<f64>::identity(2, 2);
        a[(0, 1)] = f64::NAN;
        assert!(matches!(matrix_exponential(&a), Err(Error::Numeric(_))));
    }

    #[test]
    fn fractional_power_special_exponents() {
        let a = laplacian(6) + DMatrix::identity(6, 6);
        let p0 = fractional_power(&a, 0.0).unwrap();
        assert!((p0 - DMatrix::identity(6, 6)).norm() < 1e-12);
        let p1 = fractional_power(&a, 1.0).unwrap();
        assert!(rel_err(&p1, &a) < TOL_SPEC);
        let half = fractional_power(&a, 0.5).unwrap();
        assert!(rel_err(&(&half * &half), &a) < 1e-10);
    }

    #[test]
    fn fractional_power_rejects_bad_input() {
        let a = laplacian(4);
        assert!(matches!(fractional_power(&a, 2.5), Err(Error::Range(_))));
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            fractional_power(&indefinite, 0.5),
            Err(Error::Spectral(_))
        ));
        let skew = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(fractional_power(&skew, 0.5), Err(Error::Spectral(_))));
    }

    #[test]
    fn operator_norm_matches_largest_eigenvalue() {
        let a = laplacian(5);
        let dec = SpectralDecomposition::positive_definite(&a).unwrap();
        assert!((operator_norm(&a) - dec.lambda_max()).abs() < 1e-10 * dec.lambda_max());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn group_law_on_shared_eigenbasis(t1 in -1.0f64..1.0, t2 in -1.0f64..1.0, shift in 0.5f64..5.0) {
                let a = laplacian(5) * 0.01 + DMatrix::identity(5, 5) * shift;
                let lhs = fractional_power(&a, t1).unwrap() * fractional_power(&a, t2).unwrap();
                let rhs = fractional_power(&a, t1 + t2).unwrap();
                prop_assert!(rel_err(&lhs, &rhs) < TOL_SPEC);
            }
        }
    }
}
