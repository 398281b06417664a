//! Small dense helpers.

/// Solve a tridiagonal system in place (Thomas algorithm).
///
/// `lower[i]` couples row i to i-1 (`lower[0]` unused), `upper[i]` couples row i to
/// i+1 (last entry unused). `rhs` is overwritten with the solution. Returns `false`
/// if a pivot vanishes.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) -> bool {
    let n = diag.len();
    debug_assert!(lower.len() == n && upper.len() == n && rhs.len() == n);
    let mut c = vec![0.0; n];
    let mut b = diag[0];
    if b == 0.0 {
        return false;
    }
    rhs[0] /= b;
    for i in 1..n {
        c[i - 1] = upper[i - 1] / b;
        b = diag[i] - lower[i] * c[i - 1];
        if b == 0.0 || !b.is_finite() {
            return false;
        }
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / b;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_dense_solution() {
        let lower = [0.0, -1.0, 0.5, -0.3];
        let diag = [4.0, 3.0, 5.0, 2.0];
        let upper = [1.0, 0.7, -1.0, 0.0];
        let x = [1.0, -2.0, 0.5, 3.0];
        let mut rhs = [0.0; 4];
        for i in 0..4 {
            rhs[i] = diag[i] * x[i];
            if i > 0 {
                rhs[i] += lower[i] * x[i - 1];
            }
            if i < 3 {
                rhs[i] += upper[i] * x[i + 1];
            }
        }
        assert!(solve_tridiagonal(&lower, &diag, &upper, &mut rhs));
        for i in 0..4 {
            assert!((rhs[i] - x[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn zero_pivot_reported() {
        let mut rhs = [1.0, 1.0];
        assert!(!solve_tridiagonal(&[0.0, 1.0], &[0.0, 1.0], &[1.0, 0.0], &mut rhs));
    }
}
