//! Domain types shared by every module: channel views with presence
//! indicators, the multi-channel dataset, hyperparameters, and the fitted
//! model state.
//!
//! All types are immutable after construction; constructors enforce the shape
//! and constraint invariants so downstream code never re-validates.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// ChannelView
// ---------------------------------------------------------------------------

/// One channel's feature matrix (features x samples) plus the per-sample
/// presence indicator, i.e. the diagonal of the channel's 0/1 indicator
/// matrix. Columns of absent samples are stored as zeros so masked algebra
/// never propagates stale content.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelView {
    channel_index: usize,
    features: DMatrix<f64>,
    present: Vec<bool>,
    feature_names: Vec<String>,
}

impl ChannelView {
    /// Builds a view, validating finiteness of observed columns and zeroing
    /// the columns of absent samples.
    ///
    /// Requires at least two observed samples; with fewer, the centering
    /// operator for this channel is degenerate.
    pub fn new(
        channel_index: usize,
        mut features: DMatrix<f64>,
        present: Vec<bool>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let (d, n) = features.shape();
        if present.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "channel {channel_index}: {n} feature columns but {} presence flags",
                present.len()
            )));
        }
        if feature_names.len() != d {
            return Err(Error::ShapeMismatch(format!(
                "channel {channel_index}: {d} feature rows but {} names",
                feature_names.len()
            )));
        }
        let observed = present.iter().filter(|&&p| p).count();
        if observed < 2 {
            return Err(Error::TooFewObservedSamples {
                channel: channel_index,
                observed,
            });
        }
        for (j, &p) in present.iter().enumerate() {
            if p {
                for i in 0..d {
                    if !features[(i, j)].is_finite() {
                        return Err(Error::NonFinite(format!(
                            "channel {channel_index}, feature {i}, sample {j}"
                        )));
                    }
                }
            } else {
                for i in 0..d {
                    features[(i, j)] = 0.0;
                }
            }
        }
        Ok(Self {
            channel_index,
            features,
            present,
            feature_names,
        })
    }

    /// View with every sample observed and default feature names.
    pub fn complete(channel_index: usize, features: DMatrix<f64>) -> Result<Self> {
        let n = features.ncols();
        let names = (0..features.nrows()).map(|i| format!("f{i}")).collect();
        Self::new(channel_index, features, vec![true; n], names)
    }

    pub fn channel_index(&self) -> usize {
        self.channel_index
    }

    /// Feature matrix, features x samples.
    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    /// Number of features on this channel.
    pub fn dim(&self) -> usize {
        self.features.nrows()
    }

    /// Number of samples (observed or not).
    pub fn n_samples(&self) -> usize {
        self.features.ncols()
    }

    pub fn present(&self) -> &[bool] {
        &self.present
    }

    pub fn n_present(&self) -> usize {
        self.present.iter().filter(|&&p| p).count()
    }

    /// Indices of observed samples, ascending.
    pub fn present_indices(&self) -> Vec<usize> {
        (0..self.present.len()).filter(|&j| self.present[j]).collect()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }
}

// ---------------------------------------------------------------------------
// MultiChannelDataset
// ---------------------------------------------------------------------------

/// All channel views plus the one-hot label matrix (classes x samples).
#[derive(Debug, Clone, PartialEq)]
pub struct MultiChannelDataset {
    views: Vec<ChannelView>,
    labels: DMatrix<f64>,
    sample_ids: Vec<String>,
}

impl MultiChannelDataset {
    /// Validates shape agreement across views, the one-hot property of every
    /// label column, and that each sample is observed on at least one view.
    pub fn new(views: Vec<ChannelView>, labels: DMatrix<f64>) -> Result<Self> {
        if views.is_empty() {
            return Err(Error::ShapeMismatch("dataset needs at least one view".into()));
        }
        let n = views[0].n_samples();
        for view in &views {
            if view.n_samples() != n {
                return Err(Error::ShapeMismatch(format!(
                    "view {} has {} samples, expected {n}",
                    view.channel_index(),
                    view.n_samples()
                )));
            }
        }
        if labels.ncols() != n {
            return Err(Error::ShapeMismatch(format!(
                "label matrix has {} columns, expected {n}",
                labels.ncols()
            )));
        }
        if labels.nrows() == 0 {
            return Err(Error::ShapeMismatch("label matrix has zero rows".into()));
        }
        for j in 0..n {
            let mut ones = 0usize;
            for i in 0..labels.nrows() {
                let y = labels[(i, j)];
                if y == 1.0 {
                    ones += 1;
                } else if y != 0.0 {
                    return Err(Error::NonOneHotLabel { sample: j });
                }
            }
            if ones != 1 {
                return Err(Error::NonOneHotLabel { sample: j });
            }
        }
        for j in 0..n {
            if !views.iter().any(|v| v.present()[j]) {
                return Err(Error::OrphanSample { sample: j });
            }
        }
        let sample_ids = (0..n).map(|j| format!("sample_{j}")).collect();
        Ok(Self {
            views,
            labels,
            sample_ids,
        })
    }

    /// Replaces the auto-generated sample ids.
    pub fn with_sample_ids(mut self, sample_ids: Vec<String>) -> Result<Self> {
        if sample_ids.len() != self.n_samples() {
            return Err(Error::ShapeMismatch(format!(
                "{} sample ids for {} samples",
                sample_ids.len(),
                self.n_samples()
            )));
        }
        self.sample_ids = sample_ids;
        Ok(self)
    }

    pub fn views(&self) -> &[ChannelView] {
        &self.views
    }

    pub fn view(&self, v: usize) -> &ChannelView {
        &self.views[v]
    }

    /// One-hot label matrix, classes x samples.
    pub fn labels(&self) -> &DMatrix<f64> {
        &self.labels
    }

    pub fn n_samples(&self) -> usize {
        self.labels.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.labels.nrows()
    }

    pub fn n_channels(&self) -> usize {
        self.views.len()
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    /// Integer class of each sample (the row index of the 1 in its column).
    pub fn class_of(&self, sample: usize) -> usize {
        (0..self.n_classes())
            .find(|&i| self.labels[(i, sample)] == 1.0)
            .expect("validated one-hot column")
    }

    /// Total feature count across all views.
    pub fn total_features(&self) -> usize {
        self.views.iter().map(|v| v.dim()).sum()
    }
}

/// Encodes integer labels as a one-hot matrix with `n_classes` rows; column
/// `j` has a single 1 at row `labels[j]`.
pub fn one_hot(labels: &[usize], n_classes: usize) -> Result<DMatrix<f64>> {
    if n_classes == 0 {
        return Err(Error::ShapeMismatch("n_classes must be at least 1".into()));
    }
    let mut y = DMatrix::zeros(n_classes, labels.len());
    for (j, &label) in labels.iter().enumerate() {
        if label >= n_classes {
            return Err(Error::LabelOutOfRange {
                sample: j,
                label,
                n_classes,
            });
        }
        y[(label, j)] = 1.0;
    }
    Ok(y)
}

// ---------------------------------------------------------------------------
// Hyperparams
// ---------------------------------------------------------------------------

/// Solver hyperparameters. `lambda` weighs the redundancy penalty, `gamma`
/// (> 1) shapes the channel weights; the rest control the three nested
/// iterations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    pub lambda: f64,
    pub gamma: f64,
    pub outer_tol: f64,
    pub outer_max_iter: usize,
    pub gpi_tol: f64,
    pub gpi_max_iter: usize,
    pub alm_tol: f64,
    pub alm_max_iter: usize,
    pub alm_mu0: f64,
    pub alm_rho: f64,
    pub rng_seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            gamma: 3.0,
            outer_tol: 1e-6,
            outer_max_iter: 100,
            gpi_tol: 1e-10,
            gpi_max_iter: 500,
            alm_tol: 1e-9,
            alm_max_iter: 2000,
            alm_mu0: 1.0,
            alm_rho: 1.1,
            rng_seed: 0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) {
            return Err(Error::InvalidHyperparam(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if !(self.gamma > 1.0) {
            return Err(Error::InvalidHyperparam(format!(
                "gamma must be > 1 (the channel-weight exponent 1/(1-gamma) is undefined at 1), got {}",
                self.gamma
            )));
        }
        for (name, tol) in [
            ("outer_tol", self.outer_tol),
            ("gpi_tol", self.gpi_tol),
            ("alm_tol", self.alm_tol),
        ] {
            if !(tol > 0.0) {
                return Err(Error::InvalidHyperparam(format!(
                    "{name} must be > 0, got {tol}"
                )));
            }
        }
        for (name, cap) in [
            ("outer_max_iter", self.outer_max_iter),
            ("gpi_max_iter", self.gpi_max_iter),
            ("alm_max_iter", self.alm_max_iter),
        ] {
            if cap < 1 {
                return Err(Error::InvalidHyperparam(format!("{name} must be >= 1")));
            }
        }
        if !(self.alm_mu0 > 0.0) || !(self.alm_rho > 1.0) {
            return Err(Error::InvalidHyperparam(format!(
                "penalty schedule needs mu0 > 0 and rho > 1, got mu0={} rho={}",
                self.alm_mu0, self.alm_rho
            )));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// ModelState
// ---------------------------------------------------------------------------

/// Output of the alternating solver: per-channel projection matrices and
/// feature weights, global channel weights, recovered biases, and the
/// objective trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    /// Per-channel orthogonal projection matrices, each d_v x c.
    pub w: Vec<DMatrix<f64>>,
    /// Per-channel feature weight vectors on the simplex, each length d_v.
    pub theta: Vec<DVector<f64>>,
    /// Channel weight vector on the simplex, length = number of channels.
    pub alpha: DVector<f64>,
    /// Per-channel bias vectors (length = number of classes), recovered
    /// after the solve from the stationarity condition that eliminated them.
    pub bias: Vec<DVector<f64>>,
    /// Objective value at initialization and after every full sweep.
    pub objective_history: Vec<f64>,
    pub converged: bool,
    pub iterations_run: usize,
}

impl ModelState {
    /// Frobenius residual of the orthonormality constraint for channel `v`.
    pub fn orthogonality_residual(&self, v: usize) -> f64 {
        let w = &self.w[v];
        let gram = w.transpose() * w;
        let eye = DMatrix::identity(gram.nrows(), gram.ncols());
        (gram - eye).norm()
    }

    /// `(most negative coordinate, |sum - 1|)` of channel `v`'s feature weights.
    pub fn theta_residual(&self, v: usize) -> (f64, f64) {
        simplex_residual(&self.theta[v])
    }

    /// `(most negative coordinate, |sum - 1|)` of the channel weights.
    pub fn alpha_residual(&self) -> (f64, f64) {
        simplex_residual(&self.alpha)
    }
}

fn simplex_residual(x: &DVector<f64>) -> (f64, f64) {
    let min = x.iter().cloned().fold(f64::INFINITY, f64::min);
    (min.min(0.0), (x.sum() - 1.0).abs())
}

// ---------------------------------------------------------------------------
// SelectionResult
// ---------------------------------------------------------------------------

/// One scored feature in a global ranking.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub channel: usize,
    pub feature: usize,
    pub score: f64,
}

/// Globally ranked features. The ranking is a permutation of all
/// (channel, feature) pairs, sorted by score descending with lexicographic
/// (channel, feature) tie-breaking.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub ranked: Vec<RankedFeature>,
    pub scores_per_view: Vec<Vec<f64>>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_view_parts() -> (Vec<ChannelView>, DMatrix<f64>) {
        let x0 = DMatrix::from_row_slice(3, 4, &[1., 2., 3., 4., 5., 6., 7., 8., 9., 10., 11., 12.]);
        let x1 = DMatrix::from_fn(5, 4, |i, j| (i * 4 + j) as f64 * 0.5);
        let views = vec![
            ChannelView::complete(0, x0).unwrap(),
            ChannelView::complete(1, x1).unwrap(),
        ];
        let y = one_hot(&[0, 1, 0, 1], 2).unwrap();
        (views, y)
    }

    #[test]
    fn dataset_constructor_echo() {
        let (views, y) = two_view_parts();
        let ds = MultiChannelDataset::new(views, y).unwrap();
        assert_eq!(ds.n_channels(), 2);
        assert_eq!(ds.n_samples(), 4);
        assert_eq!(ds.n_classes(), 2);
        assert_eq!(ds.total_features(), 8);
        assert_eq!(ds.class_of(3), 1);
    }

    #[test]
    fn non_one_hot_label_rejected() {
        let (views, _) = two_view_parts();
        let y = DMatrix::from_row_slice(2, 4, &[0.5, 1., 1., 0., 0.5, 0., 0., 1.]);
        match MultiChannelDataset::new(views, y) {
            Err(Error::NonOneHotLabel { sample: 0 }) => {}
            other => panic!("expected NonOneHotLabel, got {other:?}"),
        }
    }

    #[test]
    fn orphan_sample_rejected() {
        let present = vec![true, true, true, false];
        let x = DMatrix::from_element(2, 4, 1.0);
        let names = vec!["a".into(), "b".into()];
        let views = vec![
            ChannelView::new(0, x.clone(), present.clone(), names.clone()).unwrap(),
            ChannelView::new(1, x, present, names).unwrap(),
        ];
        let y = one_hot(&[0, 1, 0, 1], 2).unwrap();
        match MultiChannelDataset::new(views, y) {
            Err(Error::OrphanSample { sample: 3 }) => {}
            other => panic!("expected OrphanSample, got {other:?}"),
        }
    }

    #[test]
    fn absent_columns_are_zeroed() {
        let x = DMatrix::from_row_slice(2, 3, &[1., 99., 3., 4., -7., 6.]);
        let view =
            ChannelView::new(0, x, vec![true, false, true], vec!["a".into(), "b".into()]).unwrap();
        assert_eq!(view.features()[(0, 1)], 0.0);
        assert_eq!(view.features()[(1, 1)], 0.0);
        assert_eq!(view.features()[(0, 0)], 1.0);
        assert_eq!(view.n_present(), 2);
    }

    #[test]
    fn nan_in_observed_column_rejected() {
        let x = DMatrix::from_row_slice(1, 3, &[1., f64::NAN, 3.]);
        let res = ChannelView::new(0, x, vec![true, true, true], vec!["a".into()]);
        assert!(matches!(res, Err(Error::NonFinite(_))));
    }

    #[test]
    fn nan_in_absent_column_is_discarded() {
        let x = DMatrix::from_row_slice(1, 3, &[1., f64::NAN, 3.]);
        let view = ChannelView::new(0, x, vec![true, false, true], vec!["a".into()]).unwrap();
        assert_eq!(view.features()[(0, 1)], 0.0);
    }

    #[test]
    fn too_few_observed_rejected() {
        let x = DMatrix::from_element(1, 3, 1.0);
        let res = ChannelView::new(0, x, vec![false, true, false], vec!["a".into()]);
        assert!(matches!(
            res,
            Err(Error::TooFewObservedSamples { channel: 0, observed: 1 })
        ));
    }

    #[test]
    fn one_hot_basic() {
        let y = one_hot(&[0, 1, 1], 2).unwrap();
        assert_eq!(y, DMatrix::from_row_slice(2, 3, &[1., 0., 0., 0., 1., 1.]));
    }

    #[test]
    fn one_hot_single_class() {
        assert_eq!(one_hot(&[0], 1).unwrap(), DMatrix::from_element(1, 1, 1.0));
    }

    #[test]
    fn one_hot_out_of_range() {
        assert!(matches!(
            one_hot(&[2], 2),
            Err(Error::LabelOutOfRange { sample: 0, label: 2, n_classes: 2 })
        ));
    }

    #[test]
    fn hyperparams_validation() {
        assert!(Hyperparams::default().validate().is_ok());
        let mut hp = Hyperparams::default();
        hp.gamma = 1.0;
        assert!(matches!(hp.validate(), Err(Error::InvalidHyperparam(_))));
        let mut hp = Hyperparams::default();
        hp.lambda = -0.1;
        assert!(hp.validate().is_err());
        let mut hp = Hyperparams::default();
        hp.outer_tol = 0.0;
        assert!(hp.validate().is_err());
    }
}
