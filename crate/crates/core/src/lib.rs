//! Double ensemble training for noisy, high-dimensional tabular data.
//!
//! Sub-models are trained one after another. Before each new sub-model the
//! training samples are reweighted from the previous sub-model's loss curves
//! and the ensemble's current loss ([`reweight`]), and a new feature subset
//! is drawn from shuffling-based importance scores ([`featsel`]). The final
//! prediction is the average of all sub-models ([`ensemble`]).

pub mod dataset;
pub mod ensemble;
pub mod error;
pub mod featsel;
pub mod harness;
pub mod learners;
pub mod metrics;
pub mod reweight;
pub mod seed;

pub use dataset::{Dataset, FeatureOrigin, SamplePopulation, SampleTag, TaskKind};
pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/learners.md")]
    mod learners {}
    #[doc = include_str!("../../../book/src/reweighting.md")]
    mod reweighting {}
    #[doc = include_str!("../../../book/src/feature-selection.md")]
    mod feature_selection {}
    #[doc = include_str!("../../../book/src/ensemble.md")]
    mod ensemble {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
