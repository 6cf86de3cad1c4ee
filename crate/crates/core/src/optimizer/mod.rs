//! Alternating solver: a polar fixed-point iteration for each channel's
//! orthogonal projection, an augmented Lagrangian simplex QP for each
//! channel's feature weights, and a closed-form update for the global
//! channel weights, looped until the objective stalls.
//!
//! The bias term of the regression is eliminated analytically before
//! optimization (see [`compute_h`]) and recovered afterwards with
//! [`recover_bias`].

mod alm;
mod gpi;

pub use alm::{project_simplex, solve_theta_alm, ThetaSolution};
pub use gpi::solve_w_gpi;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ChannelView, Hyperparams, ModelState, MultiChannelDataset};
use crate::redundancy::{redundancy_matrix, RedundancyMatrix};

// ---------------------------------------------------------------------------
// Subproblem types
// ---------------------------------------------------------------------------

/// Data of one channel's projection subproblem: minimize
/// `Tr(W'CW - 2W'D)` over orthonormal-column `W`.
#[derive(Debug, Clone, PartialEq)]
pub struct WSubproblem {
    /// Symmetric PSD quadratic term, d x d.
    pub c_mat: DMatrix<f64>,
    /// Linear term, d x c.
    pub d_mat: DMatrix<f64>,
}

/// Data of one channel's feature-weight subproblem: minimize
/// `t'Qt - t'g` over the probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexQP {
    /// Symmetric quadratic term, d x d.
    pub q_mat: DMatrix<f64>,
    /// Linear term, length d.
    pub g_vec: DVector<f64>,
}

/// Result of the closed-form channel-weight update.
#[derive(Debug, Clone)]
pub struct AlphaUpdate {
    pub alpha: DVector<f64>,
    /// True when every per-channel cost was zero and the weights fell back
    /// to uniform.
    pub degenerate: bool,
}

// ---------------------------------------------------------------------------
// Masked centering
// ---------------------------------------------------------------------------

/// The n x n operator that right-multiplies a row-block to center its
/// observed columns: `H = I - (1/m) 1 s'`, where `s` is the 0/1 indicator
/// column and `m` the observed count.
///
/// For a matrix `G` with absent columns already zeroed, `G S H` subtracts
/// the mean of the observed columns from each observed column and leaves
/// absent columns zero, which is exactly the residual structure left after
/// eliminating the bias term at its stationary point.
pub fn compute_h(present: &[bool]) -> Result<DMatrix<f64>> {
    let n = present.len();
    let m = present.iter().filter(|&&p| p).count();
    if m == 0 {
        return Err(Error::NoObservedSamples);
    }
    let inv_m = 1.0 / m as f64;
    Ok(DMatrix::from_fn(n, n, |i, j| {
        let eye = if i == j { 1.0 } else { 0.0 };
        let s_j = if present[j] { 1.0 } else { 0.0 };
        eye - s_j * inv_m
    }))
}

// ---------------------------------------------------------------------------
// Per-view precomputation
// ---------------------------------------------------------------------------

/// Quantities of one view that stay fixed across sweeps: the masked-centered
/// feature and label blocks and their Gram products.
pub(crate) struct ViewContext {
    /// `X S H`, d x n: observed columns centered, absent columns zero.
    xsh: DMatrix<f64>,
    /// `Y S H` for this view's mask, c x n.
    ysh: DMatrix<f64>,
    /// `O = (XSH)(XSH)'`, d x d.
    o_mat: DMatrix<f64>,
    /// `T = (XSH)(YSH)'`, d x c.
    t_mat: DMatrix<f64>,
}

pub(crate) fn view_context(view: &ChannelView, labels: &DMatrix<f64>) -> ViewContext {
    let x = view.features();
    let (d, n) = x.shape();
    let c = labels.nrows();
    let m = view.n_present() as f64;

    let mut x_mean = vec![0.0; d];
    let mut y_mean = vec![0.0; c];
    for j in 0..n {
        if view.present()[j] {
            for i in 0..d {
                x_mean[i] += x[(i, j)];
            }
            for r in 0..c {
                y_mean[r] += labels[(r, j)];
            }
        }
    }
    for v in x_mean.iter_mut() {
        *v /= m;
    }
    for v in y_mean.iter_mut() {
        *v /= m;
    }

    let mut xsh = DMatrix::zeros(d, n);
    let mut ysh = DMatrix::zeros(c, n);
    for j in 0..n {
        if view.present()[j] {
            for i in 0..d {
                xsh[(i, j)] = x[(i, j)] - x_mean[i];
            }
            for r in 0..c {
                ysh[(r, j)] = labels[(r, j)] - y_mean[r];
            }
        }
    }

    let o_mat = &xsh * xsh.transpose();
    let t_mat = &xsh * ysh.transpose();
    ViewContext {
        xsh,
        ysh,
        o_mat,
        t_mat,
    }
}

/// `|| W' Theta (XSH) - YSH ||_F^2` for one view.
fn fit_residual_sq(ctx: &ViewContext, w: &DMatrix<f64>, theta: &DVector<f64>) -> f64 {
    let mut scaled = ctx.xsh.clone();
    for i in 0..scaled.nrows() {
        let t = theta[i];
        for j in 0..scaled.ncols() {
            scaled[(i, j)] *= t;
        }
    }
    let diff = w.transpose() * scaled - &ctx.ysh;
    diff.norm_squared()
}

fn u_value_from(ctx: &ViewContext, r: &RedundancyMatrix, w: &DMatrix<f64>, theta: &DVector<f64>, lambda: f64) -> f64 {
    fit_residual_sq(ctx, w, theta) + lambda * theta.dot(&(r.matrix() * theta))
}

fn u_values_from(
    ctxs: &[ViewContext],
    r: &[RedundancyMatrix],
    w: &[DMatrix<f64>],
    theta: &[DVector<f64>],
    lambda: f64,
) -> Vec<f64> {
    (0..ctxs.len())
        .map(|v| u_value_from(&ctxs[v], &r[v], &w[v], &theta[v], lambda))
        .collect()
}

fn weighted_objective(u: &[f64], alpha: &DVector<f64>, gamma: f64) -> f64 {
    u.iter()
        .zip(alpha.iter())
        .map(|(&uv, &av)| av.powf(gamma) * uv)
        .sum()
}

fn w_subproblem_from(
    ctx: &ViewContext,
    theta: &DVector<f64>,
    alpha_v: f64,
    gamma: f64,
) -> WSubproblem {
    let d = ctx.o_mat.nrows();
    let c = ctx.t_mat.ncols();
    let weight = alpha_v.powf(gamma);
    let mut c_mat = DMatrix::from_fn(d, d, |i, j| weight * theta[i] * ctx.o_mat[(i, j)] * theta[j]);
    // Scrub round-off asymmetry.
    for i in 0..d {
        for j in (i + 1)..d {
            let s = 0.5 * (c_mat[(i, j)] + c_mat[(j, i)]);
            c_mat[(i, j)] = s;
            c_mat[(j, i)] = s;
        }
    }
    let d_mat = DMatrix::from_fn(d, c, |i, k| weight * theta[i] * ctx.t_mat[(i, k)]);
    WSubproblem { c_mat, d_mat }
}

fn theta_subproblem_from(
    ctx: &ViewContext,
    r: &RedundancyMatrix,
    w: &DMatrix<f64>,
    alpha_v: f64,
    gamma: f64,
    lambda: f64,
) -> SimplexQP {
    let d = ctx.o_mat.nrows();
    let weight = alpha_v.powf(gamma);
    let wwt = w * w.transpose();
    let mut q_mat = DMatrix::from_fn(d, d, |i, j| {
        weight * (lambda * r.matrix()[(i, j)] + ctx.o_mat[(i, j)] * wwt[(i, j)])
    });
    for i in 0..d {
        for j in (i + 1)..d {
            let s = 0.5 * (q_mat[(i, j)] + q_mat[(j, i)]);
            q_mat[(i, j)] = s;
            q_mat[(j, i)] = s;
        }
    }
    let g_vec = DVector::from_fn(d, |i, _| {
        let mut acc = 0.0;
        for k in 0..ctx.t_mat.ncols() {
            acc += ctx.t_mat[(i, k)] * w[(i, k)];
        }
        2.0 * weight * acc
    });
    SimplexQP { q_mat, g_vec }
}

// ---------------------------------------------------------------------------
// Public per-operation entry points
// ---------------------------------------------------------------------------

/// Assembles the projection subproblem of one view from the current feature
/// and channel weights.
pub fn build_w_subproblem(
    view: &ChannelView,
    labels: &DMatrix<f64>,
    theta: &DVector<f64>,
    alpha_v: f64,
    gamma: f64,
) -> Result<WSubproblem> {
    check_view_labels(view, labels)?;
    if theta.len() != view.dim() {
        return Err(Error::ShapeMismatch(format!(
            "theta has {} entries for {} features",
            theta.len(),
            view.dim()
        )));
    }
    Ok(w_subproblem_from(
        &view_context(view, labels),
        theta,
        alpha_v,
        gamma,
    ))
}

/// Assembles the feature-weight simplex QP of one view from the current
/// projection and channel weight.
pub fn build_theta_subproblem(
    view: &ChannelView,
    labels: &DMatrix<f64>,
    w: &DMatrix<f64>,
    r: &RedundancyMatrix,
    alpha_v: f64,
    gamma: f64,
    lambda: f64,
) -> Result<SimplexQP> {
    check_view_labels(view, labels)?;
    if w.nrows() != view.dim() || w.ncols() != labels.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "w is {:?}, expected {}x{}",
            w.shape(),
            view.dim(),
            labels.nrows()
        )));
    }
    if r.dim() != view.dim() {
        return Err(Error::ShapeMismatch(format!(
            "redundancy matrix is {}x{} for {} features",
            r.dim(),
            r.dim(),
            view.dim()
        )));
    }
    Ok(theta_subproblem_from(
        &view_context(view, labels),
        r,
        w,
        alpha_v,
        gamma,
        lambda,
    ))
}

fn check_view_labels(view: &ChannelView, labels: &DMatrix<f64>) -> Result<()> {
    if labels.ncols() != view.n_samples() {
        return Err(Error::ShapeMismatch(format!(
            "labels have {} columns for {} samples",
            labels.ncols(),
            view.n_samples()
        )));
    }
    Ok(())
}

/// Per-channel cost `||W' Theta XSH - YSH||_F^2 + lambda t'Rt`, the bracketed
/// quantity the channel weights are computed from.
pub fn compute_u_values(
    ds: &MultiChannelDataset,
    r: &[RedundancyMatrix],
    state: &ModelState,
    hp: &Hyperparams,
) -> Result<Vec<f64>> {
    check_state_shapes(ds, r, state)?;
    Ok((0..ds.n_channels())
        .map(|v| {
            let ctx = view_context(ds.view(v), ds.labels());
            u_value_from(&ctx, &r[v], &state.w[v], &state.theta[v], hp.lambda)
        })
        .collect())
}

/// Full objective: channel costs weighted by the channel weights raised to
/// `gamma`.
pub fn objective(
    ds: &MultiChannelDataset,
    r: &[RedundancyMatrix],
    state: &ModelState,
    hp: &Hyperparams,
) -> Result<f64> {
    let u = compute_u_values(ds, r, state, hp)?;
    Ok(weighted_objective(&u, &state.alpha, hp.gamma))
}

fn check_state_shapes(
    ds: &MultiChannelDataset,
    r: &[RedundancyMatrix],
    state: &ModelState,
) -> Result<()> {
    let ch = ds.n_channels();
    if r.len() != ch || state.w.len() != ch || state.theta.len() != ch || state.alpha.len() != ch {
        return Err(Error::ShapeMismatch(format!(
            "state/redundancy sized for {} channels, dataset has {ch}",
            state.w.len()
        )));
    }
    Ok(())
}

/// Closed-form channel weights from nonnegative per-channel costs: smaller
/// cost means larger weight. Channels with exactly zero cost absorb the whole
/// mass (split uniformly among them), which is the limit of the formula.
pub fn update_alpha(u_values: &[f64], gamma: f64) -> Result<AlphaUpdate> {
    if u_values.is_empty() {
        return Err(Error::ShapeMismatch("no channels".into()));
    }
    if !(gamma > 1.0) {
        return Err(Error::InvalidHyperparam(format!(
            "gamma must be > 1, got {gamma}"
        )));
    }
    if let Some(&bad) = u_values.iter().find(|&&u| !(u >= 0.0)) {
        return Err(Error::Numerical(format!(
            "channel costs must be nonnegative, got {bad}"
        )));
    }
    let ch = u_values.len();
    let zeros: Vec<usize> = (0..ch).filter(|&v| u_values[v] == 0.0).collect();
    if !zeros.is_empty() {
        let mass = 1.0 / zeros.len() as f64;
        let mut alpha = DVector::zeros(ch);
        for &v in &zeros {
            alpha[v] = mass;
        }
        return Ok(AlphaUpdate {
            alpha,
            degenerate: zeros.len() == ch,
        });
    }

    // alpha_v proportional to u_v^(1/(1-gamma)); normalize by the smallest
    // cost so every power stays in (0, 1] and nothing overflows.
    let exponent = 1.0 / (1.0 - gamma);
    let u_min = u_values.iter().cloned().fold(f64::INFINITY, f64::min);
    let powers: Vec<f64> = u_values.iter().map(|&u| (u / u_min).powf(exponent)).collect();
    let total: f64 = powers.iter().sum();
    let alpha = DVector::from_iterator(ch, powers.iter().map(|&p| p / total));
    Ok(AlphaUpdate {
        alpha,
        degenerate: false,
    })
}

/// Bias vector at the stationary point of the original objective in the bias:
/// the mean over observed samples of `y_j - W' Theta x_j`. Substituting it
/// back reproduces the bias-free masked-centered residual exactly.
pub fn recover_bias(
    view: &ChannelView,
    labels: &DMatrix<f64>,
    w: &DMatrix<f64>,
    theta: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_view_labels(view, labels)?;
    bias_from(view.features(), view.present(), labels, w, theta)
}

fn bias_from(
    x: &DMatrix<f64>,
    present: &[bool],
    labels: &DMatrix<f64>,
    w: &DMatrix<f64>,
    theta: &DVector<f64>,
) -> Result<DVector<f64>> {
    let m = present.iter().filter(|&&p| p).count();
    if m == 0 {
        return Err(Error::NoObservedSamples);
    }
    let c = labels.nrows();
    let mut scaled = x.clone();
    for i in 0..scaled.nrows() {
        for j in 0..scaled.ncols() {
            scaled[(i, j)] *= theta[i];
        }
    }
    let predicted = w.transpose() * scaled;
    let mut bias = DVector::zeros(c);
    for j in 0..present.len() {
        if present[j] {
            for r in 0..c {
                bias[r] += labels[(r, j)] - predicted[(r, j)];
            }
        }
    }
    bias /= m as f64;
    Ok(bias)
}

// ---------------------------------------------------------------------------
// Outer loop
// ---------------------------------------------------------------------------

/// Switches for [`fit_with_options`].
#[derive(Debug, Clone, Default)]
pub struct FitOptions {
    /// Keep the channel weights uniform and skip their update (the
    /// channel-weight ablation).
    pub freeze_alpha: bool,
    /// Evaluate the objective around every block update and fail if any
    /// block increased it beyond round-off slack.
    pub check_monotone: bool,
}

/// One line of the per-sweep debug trace.
#[derive(Debug, Clone, Serialize)]
pub struct SweepTrace {
    pub sweep: usize,
    pub objective_before: f64,
    pub objective_after_w: f64,
    pub objective_after_theta: f64,
    pub objective_after_alpha: f64,
    pub max_orthogonality_residual: f64,
    pub max_theta_negativity: f64,
    pub max_theta_sum_residual: f64,
    pub alpha_sum_residual: f64,
}

/// Runs the alternating solver with default options.
pub fn fit(ds: &MultiChannelDataset, hp: &Hyperparams) -> Result<ModelState> {
    fit_with_options(ds, hp, &FitOptions::default())
}

/// Runs the alternating solver with explicit options.
pub fn fit_with_options(
    ds: &MultiChannelDataset,
    hp: &Hyperparams,
    opts: &FitOptions,
) -> Result<ModelState> {
    fit_traced(ds, hp, opts, |_| {})
}

/// Runs the alternating solver, invoking `on_sweep` with a trace record
/// after every full sweep.
pub fn fit_traced(
    ds: &MultiChannelDataset,
    hp: &Hyperparams,
    opts: &FitOptions,
    mut on_sweep: impl FnMut(&SweepTrace),
) -> Result<ModelState> {
    hp.validate()?;
    let ch = ds.n_channels();
    let c = ds.n_classes();
    for view in ds.views() {
        if view.dim() < c {
            return Err(Error::StiefelInfeasible {
                rows: view.dim(),
                cols: c,
            });
        }
    }

    let r: Vec<RedundancyMatrix> = ds
        .views()
        .iter()
        .map(|v| redundancy_matrix(v, true))
        .collect::<Result<_>>()?;
    let ctxs: Vec<ViewContext> = ds
        .views()
        .iter()
        .map(|v| view_context(v, ds.labels()))
        .collect();

    let mut w: Vec<DMatrix<f64>> = ds
        .views()
        .iter()
        .map(|v| DMatrix::identity(v.dim(), c))
        .collect();
    let mut theta: Vec<DVector<f64>> = ds
        .views()
        .iter()
        .map(|v| DVector::from_element(v.dim(), 1.0 / v.dim() as f64))
        .collect();
    let mut alpha = DVector::from_element(ch, 1.0 / ch as f64);

    let track_blocks = opts.check_monotone;
    let objective_of = |w: &[DMatrix<f64>], theta: &[DVector<f64>], alpha: &DVector<f64>| {
        weighted_objective(&u_values_from(&ctxs, &r, w, theta, hp.lambda), alpha, hp.gamma)
    };

    let mut objective_history = vec![objective_of(&w, &theta, &alpha)];
    let mut converged = false;
    let mut iterations_run = 0;

    for sweep in 1..=hp.outer_max_iter {
        iterations_run = sweep;
        let before = *objective_history.last().expect("non-empty history");

        for v in 0..ch {
            let sub = w_subproblem_from(&ctxs[v], &theta[v], alpha[v], hp.gamma);
            w[v] = solve_w_gpi(&sub, &w[v], hp.gpi_tol, hp.gpi_max_iter)?;
        }
        let after_w = if track_blocks {
            objective_of(&w, &theta, &alpha)
        } else {
            f64::NAN
        };

        for v in 0..ch {
            let qp = theta_subproblem_from(&ctxs[v], &r[v], &w[v], alpha[v], hp.gamma, hp.lambda);
            theta[v] = solve_theta_alm(&qp, &theta[v], hp)?.theta;
        }
        let after_theta = if track_blocks {
            objective_of(&w, &theta, &alpha)
        } else {
            f64::NAN
        };

        let u = u_values_from(&ctxs, &r, &w, &theta, hp.lambda);
        if !opts.freeze_alpha {
            alpha = update_alpha(&u, hp.gamma)?.alpha;
        }
        let after_alpha = weighted_objective(&u, &alpha, hp.gamma);

        if opts.check_monotone {
            for (block, prev, next) in [
                ("w", before, after_w),
                ("theta", after_w, after_theta),
                ("alpha", after_theta, after_alpha),
            ] {
                if next > prev + 1e-9 * prev.abs().max(1.0) {
                    return Err(Error::Numerical(format!(
                        "{block} block increased the objective: {prev} -> {next} at sweep {sweep}"
                    )));
                }
            }
        }

        on_sweep(&SweepTrace {
            sweep,
            objective_before: before,
            objective_after_w: after_w,
            objective_after_theta: after_theta,
            objective_after_alpha: after_alpha,
            max_orthogonality_residual: (0..ch)
                .map(|v| {
                    let gram = w[v].transpose() * &w[v];
                    (gram - DMatrix::identity(c, c)).norm()
                })
                .fold(0.0, f64::max),
            max_theta_negativity: theta
                .iter()
                .map(|t| t.iter().cloned().fold(f64::INFINITY, f64::min).min(0.0))
                .fold(0.0, f64::min)
                .abs(),
            max_theta_sum_residual: theta
                .iter()
                .map(|t| (t.sum() - 1.0).abs())
                .fold(0.0, f64::max),
            alpha_sum_residual: (alpha.sum() - 1.0).abs(),
        });

        objective_history.push(after_alpha);
        let change = (before - after_alpha).abs();
        if change / before.max(1e-12) < hp.outer_tol {
            converged = true;
            break;
        }
    }

    let bias: Vec<DVector<f64>> = (0..ch)
        .map(|v| recover_bias(ds.view(v), ds.labels(), &w[v], &theta[v]))
        .collect::<Result<_>>()?;

    Ok(ModelState {
        w,
        theta,
        alpha,
        bias,
        objective_history,
        converged,
        iterations_run,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::one_hot;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_dataset(seed: u64, dims: &[usize], n: usize, c: usize) -> MultiChannelDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let views = dims
            .iter()
            .enumerate()
            .map(|(v, &d)| {
                let x = DMatrix::from_fn(d, n, |_, _| rng.gen_range(-1.0..1.0));
                ChannelView::complete(v, x).unwrap()
            })
            .collect();
        let labels: Vec<usize> = (0..n).map(|j| j % c).collect();
        MultiChannelDataset::new(views, one_hot(&labels, c).unwrap()).unwrap()
    }

    #[test]
    fn h_reduces_to_centering_when_all_present() {
        let h = compute_h(&[true, true, true]).unwrap();
        let z = crate::redundancy::centering_matrix(3).unwrap();
        assert!((h - z).norm() < 1e-15);
    }

    #[test]
    fn h_with_one_absent_sample() {
        let h = compute_h(&[true, false]).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, -1.0, 1.0]);
        assert_eq!(h, expected);
    }

    #[test]
    fn h_rejects_empty_indicator() {
        assert!(matches!(
            compute_h(&[false, false]),
            Err(Error::NoObservedSamples)
        ));
    }

    #[test]
    fn masked_centering_matches_explicit_h_product() {
        // The cached XSH block must equal the literal X*S*H chain.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 7;
        let present = vec![true, false, true, true, false, true, true];
        let x_raw = DMatrix::from_fn(4, n, |_, j| {
            if present[j] {
                rng.gen_range(-2.0..2.0)
            } else {
                0.0
            }
        });
        let view = ChannelView::new(0, x_raw.clone(), present.clone(),
            (0..4).map(|i| format!("f{i}")).collect()).unwrap();
        let y = one_hot(&[0, 1, 0, 1, 0, 1, 0], 2).unwrap();
        let ctx = view_context(&view, &y);

        let s = DMatrix::from_fn(n, n, |i, j| {
            if i == j && present[i] {
                1.0
            } else {
                0.0
            }
        });
        let h = compute_h(&present).unwrap();
        let xsh = &x_raw * &s * &h;
        let ysh = &y * &s * &h;
        assert!((ctx.xsh.clone() - xsh).norm() < 1e-12);
        assert!((ctx.ysh.clone() - ysh).norm() < 1e-12);
    }

    #[test]
    fn objective_zero_at_perfect_fit() {
        // d = c, W = I, theta uniform, X = d * Y: W' Theta X = Y exactly.
        let c = 2;
        let y = one_hot(&[0, 1, 1, 0], c).unwrap();
        let x = y.clone() * c as f64;
        let view = ChannelView::complete(0, x).unwrap();
        let ds = MultiChannelDataset::new(vec![view], y).unwrap();
        let r = vec![redundancy_matrix(ds.view(0), true).unwrap()];
        let state = ModelState {
            w: vec![DMatrix::identity(c, c)],
            theta: vec![DVector::from_element(c, 1.0 / c as f64)],
            alpha: DVector::from_element(1, 1.0),
            bias: vec![DVector::zeros(c)],
            objective_history: vec![],
            converged: true,
            iterations_run: 0,
        };
        let mut hp = Hyperparams::default();
        hp.lambda = 0.0;
        let obj = objective(&ds, &r, &state, &hp).unwrap();
        assert!(obj < 1e-24, "objective = {obj}");
    }

    #[test]
    fn zero_channel_weight_annihilates_its_view() {
        let ds = random_dataset(5, &[3, 4], 8, 2);
        let r: Vec<_> = ds
            .views()
            .iter()
            .map(|v| redundancy_matrix(v, true).unwrap())
            .collect();
        let mut hp = Hyperparams::default();
        hp.gamma = 2.0;
        let state = ModelState {
            w: vec![DMatrix::identity(3, 2), DMatrix::identity(4, 2)],
            theta: vec![
                DVector::from_element(3, 1.0 / 3.0),
                DVector::from_element(4, 0.25),
            ],
            alpha: DVector::from_vec(vec![1.0, 0.0]),
            bias: vec![DVector::zeros(2), DVector::zeros(2)],
            objective_history: vec![],
            converged: true,
            iterations_run: 0,
        };
        let u = compute_u_values(&ds, &r, &state, &hp).unwrap();
        let obj = objective(&ds, &r, &state, &hp).unwrap();
        assert!((obj - u[0]).abs() < 1e-12 * u[0].abs().max(1.0));
    }

    #[test]
    fn objective_is_weighted_sum_of_channel_costs() {
        let ds = random_dataset(9, &[4, 5], 10, 2);
        let r: Vec<_> = ds
            .views()
            .iter()
            .map(|v| redundancy_matrix(v, true).unwrap())
            .collect();
        let hp = Hyperparams::default();
        let state = ModelState {
            w: vec![DMatrix::identity(4, 2), DMatrix::identity(5, 2)],
            theta: vec![
                DVector::from_element(4, 0.25),
                DVector::from_element(5, 0.2),
            ],
            alpha: DVector::from_vec(vec![0.3, 0.7]),
            bias: vec![DVector::zeros(2), DVector::zeros(2)],
            objective_history: vec![],
            converged: true,
            iterations_run: 0,
        };
        let u = compute_u_values(&ds, &r, &state, &hp).unwrap();
        let expected: f64 = u
            .iter()
            .zip(state.alpha.iter())
            .map(|(&uv, &av)| av.powf(hp.gamma) * uv)
            .sum();
        let obj = objective(&ds, &r, &state, &hp).unwrap();
        assert!((obj - expected).abs() < 1e-10);
    }

    #[test]
    fn zero_theta_or_weight_gives_zero_w_subproblem() {
        let ds = random_dataset(2, &[4], 6, 2);
        let zero_theta = DVector::zeros(4);
        let sub =
            build_w_subproblem(ds.view(0), ds.labels(), &zero_theta, 0.5, 2.0).unwrap();
        assert_eq!(sub.c_mat.norm(), 0.0);
        assert_eq!(sub.d_mat.norm(), 0.0);

        let theta = DVector::from_element(4, 0.25);
        let sub = build_w_subproblem(ds.view(0), ds.labels(), &theta, 0.0, 2.0).unwrap();
        assert_eq!(sub.c_mat.norm(), 0.0);
        assert_eq!(sub.d_mat.norm(), 0.0);
    }

    #[test]
    fn unit_weight_contributes_factor_one() {
        let ds = random_dataset(4, &[4], 6, 2);
        let theta = DVector::from_vec(vec![0.1, 0.2, 0.3, 0.4]);
        let r = redundancy_matrix(ds.view(0), true).unwrap();
        let w = DMatrix::identity(4, 2);
        let a = build_theta_subproblem(ds.view(0), ds.labels(), &w, &r, 1.0, 2.0, 0.7).unwrap();
        let b = build_theta_subproblem(ds.view(0), ds.labels(), &w, &r, 1.0, 9.0, 0.7).unwrap();
        assert!((a.q_mat.clone() - b.q_mat).norm() < 1e-15);
        assert!((a.g_vec.clone() - b.g_vec).norm() < 1e-15);
        let sub = build_w_subproblem(ds.view(0), ds.labels(), &theta, 1.0, 5.0).unwrap();
        assert!(sub.c_mat.norm() > 0.0);
    }

    #[test]
    fn zero_projection_and_lambda_give_zero_theta_subproblem() {
        let ds = random_dataset(6, &[3], 6, 2);
        let r = redundancy_matrix(ds.view(0), true).unwrap();
        let w = DMatrix::zeros(3, 2);
        let qp = build_theta_subproblem(ds.view(0), ds.labels(), &w, &r, 1.0, 2.0, 0.0).unwrap();
        assert_eq!(qp.q_mat.norm(), 0.0);
        assert_eq!(qp.g_vec.norm(), 0.0);
    }

    #[test]
    fn alpha_direct_substitution() {
        let res = update_alpha(&[1.0, 3.0], 2.0).unwrap();
        assert!((res.alpha[0] - 0.75).abs() < 1e-12);
        assert!((res.alpha[1] - 0.25).abs() < 1e-12);
        assert!(!res.degenerate);
    }

    #[test]
    fn alpha_uniform_for_equal_costs() {
        for gamma in [2.0, 3.5, 9.0] {
            let res = update_alpha(&[5.0, 5.0, 5.0], gamma).unwrap();
            for v in 0..3 {
                assert!((res.alpha[v] - 1.0 / 3.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn alpha_zero_cost_cases() {
        let res = update_alpha(&[0.0, 0.0], 2.0).unwrap();
        assert!(res.degenerate);
        assert!((res.alpha[0] - 0.5).abs() < 1e-15);

        let res = update_alpha(&[0.0, 2.0, 3.0], 2.0).unwrap();
        assert!(!res.degenerate);
        assert_eq!(res.alpha[0], 1.0);
        assert_eq!(res.alpha[1], 0.0);
    }

    #[test]
    fn alpha_monotone_in_cost() {
        let res = update_alpha(&[0.5, 2.0, 1.0], 3.0).unwrap();
        assert!(res.alpha[0] > res.alpha[2]);
        assert!(res.alpha[2] > res.alpha[1]);
        assert!((res.alpha.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bias_zero_at_perfect_fit() {
        let c = 2;
        let y = one_hot(&[0, 1, 1, 0], c).unwrap();
        let x = y.clone() * c as f64;
        let view = ChannelView::complete(0, x).unwrap();
        let w = DMatrix::identity(c, c);
        let theta = DVector::from_element(c, 1.0 / c as f64);
        let b = recover_bias(&view, &y, &w, &theta).unwrap();
        assert!(b.norm() < 1e-14);
    }

    #[test]
    fn bias_single_observed_sample_is_its_residual() {
        // Exercised through the internal form; the public constructor
        // requires two observed samples.
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 2.0, 0.0]);
        let present = [true, false];
        let y = one_hot(&[0, 1], 2).unwrap();
        let w = DMatrix::identity(2, 2);
        let theta = DVector::from_vec(vec![0.5, 0.5]);
        let b = bias_from(&x, &present, &y, &w, &theta).unwrap();
        // Residual of sample 0: y_0 - W' Theta x_0 = (1,0) - (0.5,1.0).
        assert!((b[0] - 0.5).abs() < 1e-15);
        assert!((b[1] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn fit_degenerate_single_class_reaches_zero() {
        // One class, more features than samples: the projection can fall in
        // the null space of the centered features, so the objective hits 0.
        let n = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x = DMatrix::from_fn(4, n, |_, _| rng.gen_range(-1.0..1.0));
        let view = ChannelView::complete(0, x).unwrap();
        let y = one_hot(&[0, 0, 0], 1).unwrap();
        let ds = MultiChannelDataset::new(vec![view], y).unwrap();
        let mut hp = Hyperparams::default();
        hp.lambda = 0.0;
        let state = fit(&ds, &hp).unwrap();
        let last = *state.objective_history.last().unwrap();
        assert!(last < 1e-12, "objective = {last}");
    }

    #[test]
    fn fit_history_non_increasing() {
        let ds = random_dataset(31, &[5, 6, 4], 24, 3);
        let mut hp = Hyperparams::default();
        hp.lambda = 0.5;
        hp.gamma = 4.0;
        let opts = FitOptions {
            check_monotone: true,
            ..Default::default()
        };
        let state = fit_with_options(&ds, &hp, &opts).unwrap();
        for pair in state.objective_history.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-9 * pair[0].abs().max(1.0));
        }
        assert!(state.converged);
    }

    #[test]
    fn fit_is_deterministic() {
        let ds = random_dataset(77, &[4, 5], 16, 2);
        let hp = Hyperparams::default();
        let a = fit(&ds, &hp).unwrap();
        let b = fit(&ds, &hp).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fit_constraints_hold() {
        let ds = random_dataset(13, &[5, 7], 20, 2);
        let hp = Hyperparams::default();
        let state = fit(&ds, &hp).unwrap();
        for v in 0..2 {
            assert!(state.orthogonality_residual(v) <= 1e-10);
            let (neg, sum) = state.theta_residual(v);
            assert!(neg >= -1e-10);
            assert!(sum <= 1e-8);
        }
        let (neg, sum) = state.alpha_residual();
        assert!(neg >= -1e-10);
        assert!(sum <= 1e-8);
    }

    #[test]
    fn fit_rejects_narrow_views() {
        let ds = random_dataset(1, &[2, 5], 12, 3);
        assert!(matches!(
            fit(&ds, &Hyperparams::default()),
            Err(Error::StiefelInfeasible { rows: 2, cols: 3 })
        ));
    }

    #[test]
    fn frozen_alpha_stays_uniform() {
        let ds = random_dataset(21, &[4, 6], 18, 2);
        let opts = FitOptions {
            freeze_alpha: true,
            ..Default::default()
        };
        let state = fit_with_options(&ds, &Hyperparams::default(), &opts).unwrap();
        for v in 0..2 {
            assert_eq!(state.alpha[v], 0.5);
        }
    }

    #[test]
    fn trace_reports_every_sweep() {
        let ds = random_dataset(41, &[4, 4], 14, 2);
        let mut hp = Hyperparams::default();
        hp.outer_max_iter = 5;
        hp.outer_tol = 1e-15;
        let mut sweeps = Vec::new();
        let opts = FitOptions {
            check_monotone: true,
            ..Default::default()
        };
        let state = fit_traced(&ds, &hp, &opts, |t| sweeps.push(t.sweep)).unwrap();
        assert_eq!(sweeps, vec![1, 2, 3, 4, 5]);
        assert_eq!(state.objective_history.len(), 6);
        assert!(!state.converged);
    }
}
