//! Per-view global redundancy matrix: squared cosine similarities between
//! centered feature vectors. Penalizing `theta' R theta` discourages putting
//! weight on mutually redundant features.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::ChannelView;

/// Symmetric matrix of squared cosines between centered features of one view.
/// Entries lie in [0, 1]; rows and columns of constant features are zero
/// (including the diagonal) so they carry no redundancy signal.
#[derive(Debug, Clone, PartialEq)]
pub struct RedundancyMatrix {
    r: DMatrix<f64>,
    channel_index: usize,
}

impl RedundancyMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn channel_index(&self) -> usize {
        self.channel_index
    }

    pub fn dim(&self) -> usize {
        self.r.nrows()
    }
}

/// The n x n centering operator `Z = I - (1/n) 1 1'`; `Z x` subtracts the
/// mean of `x` from every entry. Idempotent and symmetric.
pub fn centering_matrix(n: usize) -> Result<DMatrix<f64>> {
    if n == 0 {
        return Err(Error::ShapeMismatch("centering matrix needs n >= 1".into()));
    }
    let mut z = DMatrix::from_element(n, n, -1.0 / n as f64);
    for i in 0..n {
        z[(i, i)] += 1.0;
    }
    Ok(z)
}

/// Squared-cosine redundancy between centered features of `view`.
///
/// With `observed_only` (the default everywhere in this crate) the centering
/// and inner products run over the samples observed on this channel, since
/// absent columns hold synthetic zeros rather than data. A feature that is
/// constant across the used samples gets an all-zero row and column.
pub fn redundancy_matrix(view: &ChannelView, observed_only: bool) -> Result<RedundancyMatrix> {
    let cols: Vec<usize> = if observed_only {
        view.present_indices()
    } else {
        (0..view.n_samples()).collect()
    };
    if cols.len() < 2 {
        return Err(Error::TooFewObservedSamples {
            channel: view.channel_index(),
            observed: cols.len(),
        });
    }

    let d = view.dim();
    let x = view.features();
    let m = cols.len();

    // Centered feature vectors over the used samples.
    let mut centered = vec![vec![0.0; m]; d];
    let mut sum_sq = vec![0.0; d];
    let mut constant = vec![false; d];
    for i in 0..d {
        let mut mean = 0.0;
        for (k, &j) in cols.iter().enumerate() {
            centered[i][k] = x[(i, j)];
            mean += x[(i, j)];
        }
        mean /= m as f64;
        let mut ss = 0.0;
        let mut raw = 0.0;
        for v in centered[i].iter_mut() {
            raw += *v * *v;
            *v -= mean;
            ss += *v * *v;
        }
        sum_sq[i] = ss;
        // Zero centered norm up to rounding noise marks a constant feature.
        constant[i] = ss == 0.0 || ss <= 1e-24 * raw;
    }

    let mut r = DMatrix::zeros(d, d);
    for i in 0..d {
        if constant[i] {
            continue;
        }
        r[(i, i)] = 1.0;
        for j in (i + 1)..d {
            if constant[j] {
                continue;
            }
            let dot: f64 = centered[i].iter().zip(&centered[j]).map(|(a, b)| a * b).sum();
            let value = ((dot * dot) / (sum_sq[i] * sum_sq[j])).clamp(0.0, 1.0);
            r[(i, j)] = value;
            r[(j, i)] = value;
        }
    }

    Ok(RedundancyMatrix {
        r,
        channel_index: view.channel_index(),
    })
}
