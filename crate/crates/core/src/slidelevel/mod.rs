//! Slide-level prediction: patch probabilities are laid out as a heatmap,
//! connected regions above two thresholds are summarized geometrically, and
//! a logistic model turns those features into a slide probability.

mod classifier;
mod components;
mod features;
mod heatmap;

pub use classifier::{predict_slide, train_slide_classifier, SlideClassifier, SlideClassifierConfig};
pub use components::{connected_components, Region};
pub use features::{extract_features, RegionFeatures, FEATURE_COUNT, THRESHOLDS};
pub use heatmap::{heatmap_from_patches, PatchPrediction, SlideGrid};
