//! Normalized-cut image segmentation with edge-preserving filters as the
//! eigensolver's matrix-vector product.
//!
//! The normalized cut asks for the second eigenvector of `D^{-1} W`. For
//! Gaussian pixel affinities, multiplying by `D^{-1} W` is a joint bilateral
//! filter guided by the input image, so the eigensolver never needs `W`: the
//! [`grid::GridOperator`] applies it approximately in near-linear time, and
//! [`nlm::NlmOperator`] does the same exactly for patch affinities. The dense
//! oracle in [`affinity`] is the reference everything is checked against.

// `!(x > 0.0)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod affinity;
pub mod eigen;
pub mod error;
pub mod grid;
pub mod image;
pub mod io;
pub mod nlm;
pub mod operator;
pub mod segment;
pub mod synth;

pub use affinity::{
    brute_bilateral, brute_nlm, build_dense_affinity, build_dense_affinity_capped, dense_apply,
    dense_ncut_solve, patch_weight, pixel_weight, random_sparsify, rayleigh_quotient,
    AffinityConfig, DenseAffinity, PatchConfig, Radius, Weighting, WindowedBilateral,
    DENSE_PIXEL_CAP,
};
pub use eigen::{
    lanczos, ncut_eigs, power_iterate, symmetric_apply, EigenResult, Mode, SolverConfig,
};
pub use error::{Error, Result};
pub use grid::{grid_apply, grid_dims, grid_filter, GridConfig, GridOperator};
pub use image::{Image, LabelMap};
pub use io::{load_image, save_image};
pub use nlm::{nlm_apply, nlm_build, nlm_degree, NlmOperator};
pub use operator::{CutOperator, Restricted};
pub use segment::{
    build_operator, discretize_kmeans, discretize_twoway, ncut_cost, recursive_split, segment,
    segment_with, Discretization, KmeansConfig, Pipeline, SegmentConfig, SegmentationResult,
    SplitLog, Timings,
};
