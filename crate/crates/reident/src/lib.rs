//! Similarity-based re-identification attacks on multi-modal wearable
//! time-series data.
//!
//! An attacker holding a short snippet of a person's physiological signals
//! (blood volume pulse, electrodermal activity, skin temperature, and
//! three-axis acceleration) aligns it against every record in an anonymized
//! collection with Dynamic Time Warping, converts alignment distances to
//! similarities, and ranks the candidates. The library provides the full
//! pipeline — ingest, preprocessing, alignment, attack, ranking,
//! evaluation — plus a deterministic synthetic data generator, and the
//! `reident` binary exposes it as a CLI.
//!
//! The narrative guide lives in `book/` (mdBook); its code snippets are
//! compiled and run as doctests via the [`guide`] module, so the book cannot
//! drift from the library.
//!
//! # Quick start
//!
//! ```
//! use reident::dtw::{dtw_distance, DtwConfig};
//!
//! let x = [0.0, 1.0, 2.0];
//! let y = [0.0, 1.0, 1.0, 2.0];
//! let d = dtw_distance(&x, &y, &DtwConfig::default()).unwrap();
//! assert_eq!(d, 0.0); // warping absorbs the repeated sample
//! ```

pub mod attack;
pub mod dtw;
pub mod eval;
pub mod ingest;
pub mod pipeline;
pub mod preprocess;
pub mod ranking;
pub mod synth;
pub mod types;

/// The mdBook guide, embedded chapter by chapter so every fenced Rust block
/// in the book runs as a doctest.
pub mod guide {
    #[doc = include_str!("../../../book/src/alignment.md")]
    pub mod alignment {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    pub mod pipeline {}
    #[doc = include_str!("../../../book/src/ranking.md")]
    pub mod ranking {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    pub mod evaluation {}
    #[doc = include_str!("../../../book/src/synthetic.md")]
    pub mod synthetic {}
}
