//! Augmented Lagrangian solver for the simplex-constrained quadratic program
//! of the feature-weight step: minimize `t'Qt - t'g` subject to `t'1 = 1`,
//! `t >= 0`.
//!
//! The nonnegativity constraint is handled by variable splitting `t = u`,
//! `u >= 0`; the sum constraint and the split both get multiplier plus
//! quadratic-penalty terms. Each t-step is a small SPD solve, the u-step is
//! a clamp, and the multipliers follow the usual ascent updates with a
//! capped geometric penalty schedule. The final iterate is projected exactly
//! onto the simplex so the returned weights satisfy the constraints to
//! machine precision.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::Hyperparams;
use crate::optimizer::SimplexQP;

/// Penalty growth is capped here; beyond this the linear systems gain nothing.
const MU_CAP: f64 = 1e10;

/// Result of one simplex-QP solve.
#[derive(Debug, Clone)]
pub struct ThetaSolution {
    pub theta: DVector<f64>,
    /// False when the iteration cap was reached before both feasibility
    /// residuals dropped below `alm_tol`; the returned weights are still the
    /// exact simplex projection of the best iterate.
    pub converged: bool,
    pub iterations: usize,
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &DVector<f64>) -> DVector<f64> {
    let d = v.len();
    let mut sorted: Vec<f64> = v.iter().cloned().collect();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite weights"));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if u - t > 0.0 {
            tau = t;
        }
    }
    DVector::from_fn(d, |i, _| (v[i] - tau).max(0.0))
}

fn qp_objective(qp: &SimplexQP, t: &DVector<f64>) -> f64 {
    t.dot(&(&qp.q_mat * t)) - t.dot(&qp.g_vec)
}

/// Solves the simplex QP starting from a feasible `theta0`.
///
/// The returned weights sum to one, are nonnegative, and their objective
/// never exceeds the objective at `theta0` (the start is kept whenever the
/// solver fails to improve on it).
pub fn solve_theta_alm(
    qp: &SimplexQP,
    theta0: &DVector<f64>,
    hp: &Hyperparams,
) -> Result<ThetaSolution> {
    let d = qp.q_mat.nrows();
    if qp.q_mat.ncols() != d || qp.g_vec.len() != d || theta0.len() != d {
        return Err(Error::ShapeMismatch(format!(
            "simplex qp expects Q {d}x{d}, g and theta0 of length {d}"
        )));
    }
    if d == 1 {
        return Ok(ThetaSolution {
            theta: DVector::from_element(1, 1.0),
            converged: true,
            iterations: 0,
        });
    }

    let mut theta = theta0.clone();
    let mut u = theta.map(|x| x.max(0.0));
    let mut nu = 0.0;
    let mut mult: DVector<f64> = DVector::zeros(d);
    let mut mu = hp.alm_mu0;

    let mut converged = false;
    let mut iterations = 0;
    for it in 0..hp.alm_max_iter {
        iterations = it + 1;

        // (2Q + mu(11' + I)) t = g - nu 1 + mu 1 + mu u - mult
        let mut a = DMatrix::from_fn(d, d, |i, j| 2.0 * qp.q_mat[(i, j)] + mu);
        for i in 0..d {
            a[(i, i)] += mu;
        }
        let rhs = DVector::from_fn(d, |i, _| {
            qp.g_vec[i] - nu + mu + mu * u[i] - mult[i]
        });
        theta = match Cholesky::new(a.clone()) {
            Some(chol) => chol.solve(&rhs),
            None => a
                .lu()
                .solve(&rhs)
                .ok_or_else(|| Error::Numerical("singular system in theta step".into()))?,
        };

        u = DVector::from_fn(d, |i, _| (theta[i] + mult[i] / mu).max(0.0));

        let sum_residual = (theta.sum() - 1.0).abs();
        let split_residual = (&theta - &u).amax();
        if sum_residual.max(split_residual) < hp.alm_tol {
            converged = true;
            break;
        }

        nu += mu * (theta.sum() - 1.0);
        mult += mu * (&theta - &u);
        mu = (mu * hp.alm_rho).min(MU_CAP);
    }

    let projected = project_simplex(&theta);
    // The QP is convex, so the solve should always land at or below the
    // start; keep the start if projection round-off says otherwise.
    let theta = if qp_objective(qp, &projected) <= qp_objective(qp, theta0) {
        projected
    } else {
        theta0.clone()
    };
    Ok(ThetaSolution {
        theta,
        converged,
        iterations,
    })
}
