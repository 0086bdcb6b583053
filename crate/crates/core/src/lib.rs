//! Real estate appraisal with multi-source urban graphs.
//!
//! The pipeline runs from a synthetic city ([`synth`]) through feature
//! assembly ([`features`]), event and community graphs ([`graph`]) and the
//! attention model ([`model`]) to training, baselines and ablations
//! ([`train`]). [`appraisal`] serves single-property valuations from a
//! trained checkpoint.

pub mod appraisal;
pub mod autodiff;
pub mod data;
pub mod error;
pub mod features;
pub mod geo;
pub mod graph;
pub mod model;
pub mod spatial;
pub mod synth;
pub mod train;

pub use error::{MugrepError, Result};

// Book chapters run as doc-tests so their snippets stay current.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/synthetic_city.md")]
    mod synthetic_city {}
    #[doc = include_str!("../../../book/src/features.md")]
    mod features {}
    #[doc = include_str!("../../../book/src/event_graph.md")]
    mod event_graph {}
    #[doc = include_str!("../../../book/src/community_graphs.md")]
    mod community_graphs {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/ablation.md")]
    mod ablation {}
    #[doc = include_str!("../../../book/src/appraisal.md")]
    mod appraisal {}
}
