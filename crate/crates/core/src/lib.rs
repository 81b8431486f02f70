//! Accessibility maps from monocular drone flights: 2D detections are lifted
//! into metric 3D volumes, merged across frames, and rendered top-down.

// `!(a > b)` comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod geometry;
pub mod ingest;
pub mod mapgen;
pub mod refine;
pub mod pipeline;
pub mod scale;
pub mod synth;
pub mod volumes;
