//! Error type shared by all modules of the crate.

use std::fmt;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors reported by constructors, solvers, and the evaluation harness.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Matrix/vector dimensions do not agree.
    ShapeMismatch(String),
    /// A label column is not a valid one-hot encoding.
    NonOneHotLabel { sample: usize },
    /// A sample is absent on every channel.
    OrphanSample { sample: usize },
    /// An integer label lies outside `[0, n_classes)`.
    LabelOutOfRange {
        sample: usize,
        label: usize,
        n_classes: usize,
    },
    /// A NaN or infinity appeared where finite data is required.
    NonFinite(String),
    /// A channel view has fewer than two observed samples.
    TooFewObservedSamples { channel: usize, observed: usize },
    /// An indicator vector has no observed samples at all.
    NoObservedSamples,
    /// Orthonormal columns are impossible: fewer rows than columns.
    StiefelInfeasible { rows: usize, cols: usize },
    /// Requested subset size is outside `[1, total]`.
    KOutOfRange { k: usize, total: usize },
    /// A hyperparameter violates its constraint.
    InvalidHyperparam(String),
    /// A configuration value (evaluation, generator, missing plan) is invalid.
    InvalidConfig(String),
    /// The synthetic generator cannot plant class structure for this feature.
    UnsupportedInformativeTarget { channel: usize, feature: usize },
    /// A classifier was asked to train on zero features.
    EmptyFeatureSet,
    /// A numerical guarantee was violated at runtime.
    Numerical(String),
}

impl Error {
    /// Stable machine-readable code, used by the CLI error JSON.
    pub fn code(&self) -> &'static str {
        match self {
            Error::ShapeMismatch(_) => "shape_mismatch",
            Error::NonOneHotLabel { .. } => "non_one_hot_label",
            Error::OrphanSample { .. } => "orphan_sample",
            Error::LabelOutOfRange { .. } => "label_out_of_range",
            Error::NonFinite(_) => "non_finite",
            Error::TooFewObservedSamples { .. } => "too_few_observed_samples",
            Error::NoObservedSamples => "no_observed_samples",
            Error::StiefelInfeasible { .. } => "stiefel_infeasible",
            Error::KOutOfRange { .. } => "k_out_of_range",
            Error::InvalidHyperparam(_) => "invalid_hyperparam",
            Error::InvalidConfig(_) => "invalid_config",
            Error::UnsupportedInformativeTarget { .. } => "unsupported_informative_target",
            Error::EmptyFeatureSet => "empty_feature_set",
            Error::Numerical(_) => "numerical",
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ShapeMismatch(msg) => write!(f, "shape mismatch: {msg}"),
            Error::NonOneHotLabel { sample } => {
                write!(f, "label column {sample} is not one-hot")
            }
            Error::OrphanSample { sample } => {
                write!(f, "sample {sample} is absent on every channel")
            }
            Error::LabelOutOfRange {
                sample,
                label,
                n_classes,
            } => write!(
                f,
                "label {label} of sample {sample} is outside [0, {n_classes})"
            ),
            Error::NonFinite(ctx) => write!(f, "non-finite value in {ctx}"),
            Error::TooFewObservedSamples { channel, observed } => write!(
                f,
                "channel {channel} has {observed} observed samples, need at least 2"
            ),
            Error::NoObservedSamples => write!(f, "indicator has no observed samples"),
            Error::StiefelInfeasible { rows, cols } => write!(
                f,
                "cannot build {rows}x{cols} matrix with orthonormal columns (rows < cols)"
            ),
            Error::KOutOfRange { k, total } => {
                write!(f, "subset size {k} outside [1, {total}]")
            }
            Error::InvalidHyperparam(msg) => write!(f, "invalid hyperparameter: {msg}"),
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            Error::UnsupportedInformativeTarget { channel, feature } => write!(
                f,
                "cannot plant class structure for feature {feature} on channel {channel}; \
                 only mean, variance, band powers, band entropies, and the band-power ratio \
                 can be planted"
            ),
            Error::EmptyFeatureSet => write!(f, "empty feature set"),
            Error::Numerical(msg) => write!(f, "numerical failure: {msg}"),
        }
    }
}

impl std::error::Error for Error {}
