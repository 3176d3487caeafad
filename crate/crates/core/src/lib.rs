//! Ideophone recommendation for photos.
//!
//! Detection labels and ideophone definitions are embedded in a shared
//! word-vector space; the nearest definitions give candidate terms, and the
//! chosen term is drawn into the quadrant of the photo least covered by its
//! dominant region.

pub mod compositor;
pub mod embedding;
pub mod layout;
pub mod lexicon;
pub mod matcher;
pub mod perception;
pub mod pipeline;
pub mod raster;

use thiserror::Error;

pub use compositor::{composite, render_text, GlyphPatch, RenderError, StyleConfig, Typeface};
pub use embedding::{
    cosine_distance, mean_vector, tokenize, weighted_vector, EmbeddingError, EmbeddingTable,
    SemanticVector, WeightedLabel,
};
pub use layout::{
    largest_contour, plan_placement, select_quadrant, ContourMask, LayoutError, PlacementBox,
    Quadrant, QuadrantTag, Rect,
};
pub use lexicon::{
    build_index, load_index, parse_lexicon, save_index, IdeophoneEntry, IdeophoneIndex,
    LexiconError,
};
pub use matcher::{
    photo_vectors, recommend, top_k, MatchCandidate, MatchError, Neighbor, Recommendation,
};
pub use perception::{
    load_detections, normalize_expression, run_external_detector, Classifier, Detection,
    DetectionSet, PerceptionError,
};
pub use pipeline::{annotate_photo, Annotation};
pub use raster::{OutputFormat, RasterError, RasterImage};

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error(transparent)]
    Perception(#[from] PerceptionError),
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

/// Coarse failure classes, used by front ends to pick exit statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Unreadable or malformed input.
    Input,
    /// Nothing usable was detected or matched.
    Unmatchable,
    /// The annotation cannot be placed.
    Layout,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Perception(PerceptionError::NothingDetected) => ErrorClass::Unmatchable,
            Error::Match(MatchError::Unmatchable | MatchError::DegenerateQuery) => {
                ErrorClass::Unmatchable
            }
            Error::Layout(LayoutError::TooSmall { .. }) => ErrorClass::Layout,
            _ => ErrorClass::Input,
        }
    }
}
