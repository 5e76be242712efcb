//! Road-user classification from clustered automotive radar targets.
//!
//! The crate covers the whole training and evaluation chain:
//!
//! 1. [`data_model`]: detections in a common vehicle frame, ego-motion
//!    compensated Doppler, 150 ms cluster samples and drop augmentation.
//! 2. [`clustering`]: DBSCAN in space, time and Doppler.
//! 3. [`geometry`] and [`features`]: a frozen 50-entry feature registry
//!    with hull, rectangle, ellipse, circle and occupancy fits plus
//!    range/angle/Doppler profile ratios.
//! 4. [`classifier`]: CART trees and random forests with sample weights.
//! 5. [`imbalance`]: random under/oversampling, Tomek links, SMOTE.
//! 6. [`ensemble`]: one-vs-all and one-vs-one binarisation with the
//!    pairwise coupling family (PWC-1..5, PWC-OVA, PWC-OVA2) and the
//!    two-stage truck correction.
//! 7. [`selection`]: backward elimination and subset sweeps.
//! 8. [`evaluation`]: grouped folds, nested cross-validation, macro-F1.
//! 9. [`synthgen`]: a seeded synthetic scene generator standing in for
//!    recorded data.
//! 10. [`pipeline`]: the config-driven, resumable end-to-end run used by
//!     the `radarclass` binary.

// Validation uses `!(x > 0.0)` so that NaN is rejected as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classifier;
pub mod clustering;
pub mod data_model;
pub mod dataset;
pub mod ensemble;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod geometry;
pub mod imbalance;
pub mod pipeline;
pub mod selection;
pub mod synthgen;

pub use error::{Error, Result};
