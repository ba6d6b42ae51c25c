//! Attention allow-lists for temporal query sequences.
//!
//! A sequence holds `N2` global queries followed by `T * N1` object queries
//! laid out frame by frame. Each family (window, dilated window, random,
//! global, shift window) decides which `(query, key)` pairs may interact; an
//! [`AllowList`] stores the permitted keys of every query row and is the sparse
//! equivalent of the additive `{0, -inf}` mask.

mod allow;
mod build;
mod fixture;
mod geometry;
mod spec;
mod verify;

pub use allow::AllowList;
pub use build::{
    build_dilated, build_global, build_random, build_shift_window, build_window, compose_union,
    random_frames, realize,
};
pub use fixture::{parse_allow_list, write_allow_list};
pub use geometry::Geometry;
pub use spec::{MaskSpec, LTCA_DEFAULTS};
pub use verify::{verify_against_formula, Predicate};
