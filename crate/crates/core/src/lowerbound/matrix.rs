use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Largest dimension accepted by [`spectral_norm`].
pub const MAX_DIM: usize = 2000;

/// Relative tolerance of the symmetry check.
const SYMMETRY_TOL: f64 = 1e-12;

pub fn all_ones(n: usize) -> DMatrix<f64> {
    DMatrix::from_element(n, n, 1.0)
}

pub fn hadamard(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.component_mul(b)
}

pub fn check_symmetric(a: &DMatrix<f64>) -> Result<()> {
    if !a.is_square() {
        return Err(Error::Data(format!(
            "matrix is {}x{}, not square",
            a.nrows(),
            a.ncols()
        )));
    }
    let scale = a.amax().max(1.0);
    for i in 0..a.nrows() {
        for j in i + 1..a.ncols() {
            if (a[(i, j)] - a[(j, i)]).abs() > SYMMETRY_TOL * scale {
                return Err(Error::Data(format!(
                    "matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    Ok(())
}

/// Largest absolute eigenvalue of a real symmetric matrix.
pub fn spectral_norm(a: &DMatrix<f64>) -> Result<f64> {
    check_symmetric(a)?;
    if a.nrows() > MAX_DIM {
        return Err(Error::Size(format!(
            "dimension {} exceeds {MAX_DIM}",
            a.nrows()
        )));
    }
    if a.nrows() == 0 {
        return Ok(0.0);
    }
    let eig = a.clone().symmetric_eigen();
    Ok(eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs())))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;
    use proptest::prelude::*;

    /// Power iteration on A², an eigensolver independent of nalgebra's.
    pub(crate) fn power_norm(a: &DMatrix<f64>) -> f64 {
        let n = a.nrows();
        let a2 = a * a;
        let mut v = DVector::from_fn(n, |i, _| 1.0 + (i as f64 * 0.7).sin() * 0.5);
        let mut lambda = 0.0;
        for _ in 0..20_000 {
            let w = &a2 * &v;
            let norm = w.norm();
            if norm == 0.0 {
                return 0.0;
            }
            let next = norm / v.norm();
            v = w / norm;
            if (next - lambda).abs() <= 1e-14 * next.max(1.0) {
                lambda = next;
                break;
            }
            lambda = next;
        }
        lambda.sqrt()
    }

    #[test]
    fn known_norms() {
        for n in 1..20 {
            assert_abs_diff_eq!(
                spectral_norm(&all_ones(n)).unwrap(),
                n as f64,
                epsilon = 1e-10
            );
            assert_abs_diff_eq!(
                spectral_norm(&DMatrix::identity(n, n)).unwrap(),
                1.0,
                epsilon = 1e-12
            );
        }
        let neg = DMatrix::from_row_slice(2, 2, &[-3.0, 0.0, 0.0, 1.0]);
        assert_abs_diff_eq!(spectral_norm(&neg).unwrap(), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn asymmetric_input_is_a_data_error() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 2.0, 0.0]);
        assert!(matches!(spectral_norm(&a), Err(Error::Data(_))));
        let rect = DMatrix::<f64>::zeros(2, 3);
        assert!(matches!(spectral_norm(&rect), Err(Error::Data(_))));
    }

    #[test]
    fn oversized_input_is_a_size_error() {
        let a = DMatrix::<f64>::zeros(MAX_DIM + 1, MAX_DIM + 1);
        assert!(matches!(spectral_norm(&a), Err(Error::Size(_))));
    }

    proptest! {
        #[test]
        fn eigensolver_agrees_with_power_iteration(
            n in 1usize..12,
            entries in proptest::collection::vec(-1.0f64..1.0, 144),
        ) {
            let a = DMatrix::from_fn(n, n, |i, j| {
                let (lo, hi) = (i.min(j), i.max(j));
                entries[lo * 12 + hi]
            });
            let expected = power_norm(&a);
            let got = spectral_norm(&a).unwrap();
            prop_assert!((expected - got).abs() < 1e-6 * got.max(1.0), "{expected} vs {got}");
        }
    }
}
