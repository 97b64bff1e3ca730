use thiserror::Error;

use crate::catalog::ContentId;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("feature range {index} is degenerate (min == max == {value})")]
    RangeDegenerate { index: usize, value: f64 },
    #[error("feature vector is empty")]
    EmptyFeatures,
    #[error("feature vector has {got} components, expected {expected}")]
    FeatureArity { expected: usize, got: usize },
    #[error("library of {0} items is too small (need at least 2)")]
    LibraryTooSmall(usize),
    #[error("library is empty")]
    EmptyLibrary,
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter {
        name: &'static str,
        reason: &'static str,
    },
    #[error("uniform variate {0} outside [0, 1)")]
    BadUniform(f64),
    #[error("content {0} belongs to the other popularity regime")]
    WrongRegime(ContentId),
    #[error("content {0} is not in the catalog")]
    UnknownContent(ContentId),
    #[error("allocation window holds no requests")]
    EmptyWindow,
    #[error("bad knapsack input: {0}")]
    BadInput(&'static str),
    #[error("exact knapsack needs integer sizes and capacity")]
    NeedsIntegerSizes,
    #[error("content {0} has never been cached")]
    ColdStart(ContentId),
    #[error("content {0} was not cached this slot")]
    NotCached(ContentId),
    #[error("unknown policy `{0}`")]
    UnknownPolicy(alloc::string::String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
}
