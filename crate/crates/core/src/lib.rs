//! Change detection between two images of the same terrain.
//!
//! The workflow mirrors a manual image-editor procedure: adjust tone, run an
//! edge operator with a low threshold, invert the edge map and lay it over
//! the original so landform outlines stand out, then compare the two epochs.
//! On top of the visual overlay, [`displacement`] measures how far a feature
//! moved by normalized cross-correlation and converts it to meters and
//! meters per year.
//!
//! [`synthgen`] renders crescent-dune scenes with known motion for testing.

pub mod compose;
pub mod displacement;
pub mod filters;
pub mod pipeline;
pub mod raster;
pub mod register;
pub mod synthgen;
pub mod tone;

pub use compose::{blend, BlendMode};
pub use displacement::{ncc_match, to_physical, MatchResult, SearchSpec, TemplateSpec};
pub use filters::{
    convolve, edge_response, gaussian_blur, threshold_edges, EdgeMap, EdgeOperator, Kernel,
};
pub use raster::{BoundaryPolicy, ByteGrid, Field, Raster, SubpixelPoint};
pub use register::{
    estimate_similarity, warp, ControlPointPair, Interpolation, SimilarityTransform,
};
pub use synthgen::{generate_pair, Barchan, SceneParams, SceneTruth};
pub use tone::{adjust, invert, stretch, ToneParams};
