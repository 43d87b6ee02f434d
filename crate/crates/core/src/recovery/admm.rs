//! ADMM for the graphical lasso
//!
//! ```text
//! minimize  -logdet(Θ) + tr(SΘ) + λ Σ_{i≠j} |Θ_ij|   over Θ ≻ 0
//! ```
//!
//! using the split `X = Z`: the `X` step is a closed-form eigenvalue map, the
//! `Z` step soft-thresholds the off-diagonal entries (the diagonal is not
//! penalized) and `U` is the scaled dual. The penalty starts at
//! `admm_penalty` and is rebalanced whenever the primal and dual residuals
//! drift more than a factor 10 apart. Besides the usual residual test the
//! solver also requires the KKT residual to fall below `abs_tol / ‖Θ‖²`.

use nalgebra::{DMatrix, SymmetricEigen};

use super::SolverSettings;
use crate::error::{Error, Result};

/// `|Θ_ij|` above this counts as an edge.
pub const EDGE_THRESHOLD: f64 = 1e-6;

const SYMMETRY_TOL: f64 = 1e-9;
const BALANCE_RATIO: f64 = 10.0;
const BALANCE_STEP: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct GlassoSolution {
    pub precision: DMatrix<f64>,
    pub iterations: usize,
    /// False when `max_iterations` ran out before the tolerances were met.
    pub converged: bool,
}

pub(crate) fn check_input(s: &DMatrix<f64>, lambda: f64) -> Result<()> {
    if !s.is_square() {
        return Err(Error::NotSymmetric(format!(
            "{}x{} is not square",
            s.nrows(),
            s.ncols()
        )));
    }
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotSymmetric("non-finite entry".into()));
    }
    let asym = (s - s.transpose()).abs().max();
    if asym > SYMMETRY_TOL * s.abs().max().max(1.0) {
        return Err(Error::NotSymmetric(format!("asymmetry {asym:e}")));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::NegativePenalty(lambda));
    }
    Ok(())
}

fn soft_threshold(v: f64, k: f64) -> f64 {
    v.signum() * (v.abs() - k).max(0.0)
}

fn log_det_spd(theta: &DMatrix<f64>) -> Option<f64> {
    let chol = theta.clone().cholesky()?;
    Some(
        2.0 * chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|v| v.ln())
            .sum::<f64>(),
    )
}

fn off_diagonal_l1(theta: &DMatrix<f64>) -> f64 {
    let d = theta.nrows();
    let mut sum = 0.0;
    for i in 0..d {
        for j in 0..d {
            if i != j {
                sum += theta[(i, j)].abs();
            }
        }
    }
    sum
}

/// Value of the graphical lasso objective at `theta`.
pub fn glasso_objective(theta: &DMatrix<f64>, s: &DMatrix<f64>, lambda: f64) -> Result<f64> {
    let log_det = log_det_spd(theta).ok_or(Error::NotPositiveDefinite)?;
    let trace = (s * theta).trace();
    Ok(-log_det + trace + lambda * off_diagonal_l1(theta))
}

/// Largest violation of the off-diagonal optimality conditions at `theta`.
///
/// With `W = Θ⁻¹`, an edge needs `W_ij - S_ij = λ·sign(Θ_ij)`; an absent edge
/// needs `|W_ij - S_ij| ≤ λ`.
pub fn kkt_residual(theta: &DMatrix<f64>, s: &DMatrix<f64>, lambda: f64) -> Result<f64> {
    let w = theta
        .clone()
        .cholesky()
        .ok_or(Error::NotPositiveDefinite)?
        .inverse();
    let d = theta.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            if i == j {
                continue;
            }
            let g = w[(i, j)] - s[(i, j)];
            let t = theta[(i, j)];
            let r = if t.abs() > EDGE_THRESHOLD {
                (g - lambda * t.signum()).abs()
            } else {
                (g.abs() - lambda).max(0.0)
            };
            worst = worst.max(r);
        }
    }
    Ok(worst)
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let d = m.nrows();
    for i in 0..d {
        for j in (i + 1)..d {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Solves the graphical lasso for one matrix `s` at penalty `lambda`.
///
/// Iterates until the primal/dual residuals meet `abs_tol`/`rel_tol` and the
/// optimality residual is at most `abs_tol / ‖Θ‖²`, or `max_iterations` is hit.
pub fn glasso_solve(
    s: &DMatrix<f64>,
    lambda: f64,
    settings: &SolverSettings,
) -> Result<GlassoSolution> {
    check_input(s, lambda)?;
    Ok(admm(s, Penalty::Uniform(lambda), settings))
}

/// Unpenalized maximum likelihood over precisions whose off-diagonal
/// nonzeros are confined to the pattern of `support` (`|Θ_ij| > EDGE_THRESHOLD`).
pub fn refit_on_support(
    s: &DMatrix<f64>,
    support: &DMatrix<f64>,
    settings: &SolverSettings,
) -> Result<GlassoSolution> {
    check_input(s, 0.0)?;
    if support.shape() != s.shape() {
        return Err(Error::LengthMismatch {
            left: s.nrows(),
            right: support.nrows(),
        });
    }
    let mask = support.map(|v| v.abs() > EDGE_THRESHOLD);
    Ok(admm(s, Penalty::Support(&mask), settings))
}

#[derive(Clone, Copy)]
enum Penalty<'a> {
    Uniform(f64),
    Support(&'a DMatrix<bool>),
}

impl Penalty<'_> {
    fn shrink(self, i: usize, j: usize, v: f64, rho: f64) -> f64 {
        match self {
            Penalty::Uniform(lambda) => soft_threshold(v, lambda / rho),
            Penalty::Support(mask) if mask[(i, j)] => v,
            Penalty::Support(_) => 0.0,
        }
    }

    fn residual(self, theta: &DMatrix<f64>, s: &DMatrix<f64>) -> Result<f64> {
        match self {
            Penalty::Uniform(lambda) => kkt_residual(theta, s, lambda),
            Penalty::Support(mask) => {
                let w = theta
                    .clone()
                    .cholesky()
                    .ok_or(Error::NotPositiveDefinite)?
                    .inverse();
                let d = theta.nrows();
                let mut worst: f64 = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        if i != j && mask[(i, j)] {
                            worst = worst.max((w[(i, j)] - s[(i, j)]).abs());
                        }
                    }
                }
                Ok(worst)
            }
        }
    }
}

fn admm(s: &DMatrix<f64>, penalty: Penalty<'_>, settings: &SolverSettings) -> GlassoSolution {
    let d = s.nrows();
    let mut rho = settings.admm_penalty;
    let scale = d as f64;

    let mut z = DMatrix::<f64>::identity(d, d);
    let mut u = DMatrix::<f64>::zeros(d, d);
    let mut x = z.clone();
    let mut converged = false;
    let mut iterations = 0;

    for it in 1..=settings.max_iterations {
        iterations = it;

        let mut a = (&z - &u) * rho - s;
        symmetrize(&mut a);
        let eig = SymmetricEigen::new(a);
        let mapped = eig
            .eigenvalues
            .map(|l| (l + (l * l + 4.0 * rho).sqrt()) / (2.0 * rho));
        x = &eig.eigenvectors * DMatrix::from_diagonal(&mapped) * eig.eigenvectors.transpose();
        symmetrize(&mut x);

        let z_prev = std::mem::replace(&mut z, &x + &u);
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    z[(i, j)] = penalty.shrink(i, j, z[(i, j)], rho);
                }
            }
        }
        u += &x - &z;

        let primal = (&x - &z).norm();
        let dual = rho * (&z - &z_prev).norm();
        let eps_primal = scale * settings.abs_tol + settings.rel_tol * x.norm().max(z.norm());
        let eps_dual = scale * settings.abs_tol + settings.rel_tol * rho * u.norm();
        if primal <= eps_primal && dual <= eps_dual {
            // Errors in Θ⁻¹ reach Θ amplified by roughly ‖Θ‖².
            let kkt_target = settings.abs_tol / z.norm_squared().max(1.0);
            if let Ok(r) = penalty.residual(&z, s) {
                if r <= kkt_target {
                    converged = true;
                    break;
                }
            }
        }

        // Residual balancing; the scaled dual must follow the penalty.
        if primal > BALANCE_RATIO * dual {
            rho *= BALANCE_STEP;
            u /= BALANCE_STEP;
        } else if dual > BALANCE_RATIO * primal {
            rho /= BALANCE_STEP;
            u *= BALANCE_STEP;
        }
    }

    // Z carries the exact zeros; fall back to X only if Z lost definiteness.
    let precision = if z.clone().cholesky().is_some() { z } else { x };
    if !converged {
        log::debug!("admm did not converge in {iterations} iterations");
    }
    GlassoSolution {
        precision,
        iterations,
        converged,
    }
}
