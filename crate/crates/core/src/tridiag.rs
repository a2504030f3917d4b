//! Tridiagonal solves (Thomas algorithm).

/// Solves `A x = d` in place for a tridiagonal `A` given by its sub-diagonal
/// `lower` (entry `i` couples row `i` to column `i - 1`, `lower[0]` unused),
/// `diag`, and super-diagonal `upper` (`upper[n - 1]` unused).
///
/// No pivoting: callers only pass diagonally dominant systems.
pub fn solve_in_place(lower: &[f64], diag: &[f64], upper: &[f64], d: &mut [f64]) {
    let n = diag.len();
    debug_assert!(lower.len() == n && upper.len() == n && d.len() == n);
    if n == 0 {
        return;
    }
    let mut c_prime = vec![0.0; n];
    let mut beta = diag[0];
    c_prime[0] = upper[0] / beta;
    d[0] /= beta;
    for i in 1..n {
        beta = diag[i] - lower[i] * c_prime[i - 1];
        c_prime[i] = upper[i] / beta;
        d[i] = (d[i] - lower[i] * d[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c_prime[i] * d[i + 1];
    }
}

/// Constant-coefficient symmetric variant: `a` on the diagonal and `b` on both
/// off-diagonals.
pub fn solve_constant_in_place(a: f64, b: f64, d: &mut [f64]) {
    let n = d.len();
    if n == 0 {
        return;
    }
    let mut c_prime = vec![0.0; n];
    let mut beta = a;
    c_prime[0] = b / beta;
    d[0] /= beta;
    for i in 1..n {
        beta = a - b * c_prime[i - 1];
        c_prime[i] = b / beta;
        d[i] = (d[i] - b * d[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c_prime[i] * d[i + 1];
    }
}
