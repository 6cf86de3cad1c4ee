//! Turns a fitted model into a global feature ranking and top-k subsets.

use crate::error::{Error, Result};
use crate::model::{ModelState, RankedFeature, SelectionResult};

/// How the per-feature score combines the channel and feature weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreMode {
    /// `alpha_v * theta_vj` (default).
    #[default]
    Product,
    /// `alpha_v^gamma * theta_vj`, mirroring how the objective weights
    /// view-v features.
    ProductGamma,
}

/// Ranks every (channel, feature) pair by `alpha_v * theta_vj`, descending,
/// with ties broken by (channel, feature) ascending.
pub fn rank_features(state: &ModelState) -> SelectionResult {
    rank_features_with(state, ScoreMode::Product, f64::NAN)
}

/// Ranking with an explicit score mode; `gamma` is only read in
/// [`ScoreMode::ProductGamma`].
pub fn rank_features_with(state: &ModelState, mode: ScoreMode, gamma: f64) -> SelectionResult {
    let mut scores_per_view = Vec::with_capacity(state.theta.len());
    let mut ranked = Vec::new();
    for (v, theta) in state.theta.iter().enumerate() {
        let channel_weight = match mode {
            ScoreMode::Product => state.alpha[v],
            ScoreMode::ProductGamma => state.alpha[v].powf(gamma),
        };
        let scores: Vec<f64> = theta.iter().map(|&t| channel_weight * t.max(0.0)).collect();
        for (j, &score) in scores.iter().enumerate() {
            ranked.push(RankedFeature {
                channel: v,
                feature: j,
                score,
            });
        }
        scores_per_view.push(scores);
    }
    ranked.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .expect("finite scores")
            .then(a.channel.cmp(&b.channel))
            .then(a.feature.cmp(&b.feature))
    });
    SelectionResult {
        ranked,
        scores_per_view,
    }
}

/// First `k` entries of the ranking as (channel, feature) pairs.
pub fn select_top_k(res: &SelectionResult, k: usize) -> Result<Vec<(usize, usize)>> {
    let total = res.ranked.len();
    if k == 0 || k > total {
        return Err(Error::KOutOfRange { k, total });
    }
    Ok(res.ranked[..k].iter().map(|f| (f.channel, f.feature)).collect())
}
