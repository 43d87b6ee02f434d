//! Deliberately slow reference solver for the graphical lasso.
//!
//! Shares no code with the production ADMM solver: matrices are plain
//! `Vec<Vec<f64>>`, determinants come from a hand-written Cholesky, and the
//! optimizer is cyclic coordinate descent with a golden-section line search on
//! every (symmetric) entry. Only meant for `D <= 4` in tests.

use std::fmt;

pub type Matrix = Vec<Vec<f64>>;

pub const MAX_DIM: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub enum OracleError {
    TooLarge(usize),
    NotSquare,
    NotPositiveDefinite,
}

impl fmt::Display for OracleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleError::TooLarge(d) => write!(f, "oracle supports D <= {MAX_DIM}, got {d}"),
            OracleError::NotSquare => f.write_str("matrix is not square"),
            OracleError::NotPositiveDefinite => f.write_str("matrix is not positive definite"),
        }
    }
}

impl std::error::Error for OracleError {}

/// `log det(a)` for symmetric positive definite `a`, `None` otherwise.
pub fn log_det(a: &Matrix) -> Option<f64> {
    let d = a.len();
    let mut l = vec![vec![0.0; d]; d];
    let mut acc = 0.0;
    for i in 0..d {
        for j in 0..=i {
            let mut sum = a[i][j];
            for k in 0..j {
                sum -= l[i][k] * l[j][k];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return None;
                }
                l[i][i] = sum.sqrt();
                acc += l[i][i].ln();
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    Some(2.0 * acc)
}

/// `-logdet(Θ) + tr(SΘ) + λ Σ_{i≠j} |Θ_ij|`, or `+∞` outside the PD cone.
pub fn objective(theta: &Matrix, s: &Matrix, lambda: f64) -> f64 {
    let Some(ld) = log_det(theta) else {
        return f64::INFINITY;
    };
    let d = theta.len();
    let mut trace = 0.0;
    let mut l1 = 0.0;
    for i in 0..d {
        for j in 0..d {
            trace += s[i][j] * theta[j][i];
            if i != j {
                l1 += theta[i][j].abs();
            }
        }
    }
    -ld + trace + lambda * l1
}

fn shifted(theta: &Matrix, i: usize, j: usize, t: f64) -> Matrix {
    let mut m = theta.clone();
    m[i][j] += t;
    if i != j {
        m[j][i] += t;
    }
    m
}

/// Largest step in direction `sign` (capped at 1e3) keeping the matrix PD.
fn feasible_extent(theta: &Matrix, i: usize, j: usize, sign: f64) -> f64 {
    let mut t = 1.0;
    if log_det(&shifted(theta, i, j, sign * t)).is_some() {
        while t < 1e3 && log_det(&shifted(theta, i, j, sign * 2.0 * t)).is_some() {
            t *= 2.0;
        }
        t
    } else {
        while t > 1e-300 && log_det(&shifted(theta, i, j, sign * t)).is_none() {
            t *= 0.5;
        }
        t
    }
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    // The kink of |·| sits at zero; prefer it when it is at least as good.
    [mid, a, b]
        .into_iter()
        .min_by(|x, y| f(*x).total_cmp(&f(*y)))
        .unwrap()
}

/// Minimizes the graphical lasso objective by cyclic coordinate descent.
pub fn oracle_solve(s: &Matrix, lambda: f64) -> Result<Matrix, OracleError> {
    let d = s.len();
    if d > MAX_DIM {
        return Err(OracleError::TooLarge(d));
    }
    if s.iter().any(|row| row.len() != d) {
        return Err(OracleError::NotSquare);
    }
    let mut theta: Matrix = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| if i == j { 1.0 / s[i][i].max(1e-3) } else { 0.0 })
                .collect()
        })
        .collect();

    // Near the optimum f is flat to rounding, so steps jitter at about 1e-8;
    // the sweep ends once the objective stops moving instead.
    for _sweep in 0..200_000 {
        let start = objective(&theta, s, lambda);
        for i in 0..d {
            for j in i..d {
                let lo = -feasible_extent(&theta, i, j, -1.0) * (1.0 - 1e-12);
                let hi = feasible_extent(&theta, i, j, 1.0) * (1.0 - 1e-12);
                let f = |t: f64| objective(&shifted(&theta, i, j, t), s, lambda);
                let mut t = golden_section(f, lo, hi, 1e-13);
                // Snap an off-diagonal entry onto zero when that is no worse.
                if i != j {
                    let to_zero = -theta[i][j];
                    if f(to_zero) <= f(t) {
                        t = to_zero;
                    }
                }
                if f(t) <= f(0.0) {
                    theta = shifted(&theta, i, j, t);
                }
            }
        }
        if start - objective(&theta, s, lambda) < 1e-15 {
            break;
        }
    }
    if log_det(&theta).is_none() {
        return Err(OracleError::NotPositiveDefinite);
    }
    Ok(theta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity(d: usize) -> Matrix {
        (0..d)
            .map(|i| (0..d).map(|j| f64::from(u8::from(i == j))).collect())
            .collect()
    }

    #[test]
    fn identity_input() {
        let theta = oracle_solve(&identity(3), 0.1).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((theta[i][j] - expected).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn unpenalized_solution_is_the_inverse() {
        let s = vec![vec![1.0, 0.5], vec![0.5, 1.0]];
        let theta = oracle_solve(&s, 0.0).unwrap();
        let det = 0.75;
        let inv = [[1.0 / det, -0.5 / det], [-0.5 / det, 1.0 / det]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((theta[i][j] - inv[i][j]).abs() < 1e-4, "{theta:?}");
            }
        }
    }

    #[test]
    fn two_variable_shrinkage() {
        let s = vec![vec![1.0, 0.8], vec![0.8, 1.0]];
        let theta = oracle_solve(&s, 0.1).unwrap();
        assert!((theta[0][0] - 1.0 / 0.51).abs() < 1e-4);
        assert!((theta[0][1] + 0.7 / 0.51).abs() < 1e-4);
        let theta = oracle_solve(&s, 0.9).unwrap();
        assert_eq!(theta[0][1], 0.0);
    }

    #[test]
    fn rejects_large_input() {
        assert_eq!(
            oracle_solve(&identity(5), 0.1),
            Err(OracleError::TooLarge(5))
        );
    }
}
