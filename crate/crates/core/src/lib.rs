//! Non-neural machinery around a text-promptable biomedical segmentation
//! model: prompt validity testing, shape irregularity metrics, shape-map
//! ensembling, multi-target recognition, evaluation metrics, the object
//! ontology, and dataset tooling.

pub mod cli;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod ontology;
pub mod recognition;
pub mod registry;
pub mod shapemap;
pub mod split;
pub mod validity;

pub use error::{Error, ErrorKind, Result};
pub use geometry::{box_ratio, convex_ratio, iri, shape_metrics, BoundingBox, ShapeMetrics};
pub use grid::{BinaryMask, LabelMap, ProbabilityMap, RealGrid, RgbImage};
pub use ontology::{normalize, Ontology, PromptResolution};
pub use recognition::{nms, recognize, RecognitionResult, ScoredBox, TargetMaps};
pub use shapemap::{cross_correlate_argmax, ensemble_shapes, shift_map, Shift};
pub use split::{split_grouped, SplitAssignment};
pub use validity::{fit_validity_model, test_image, ValidityModel, ValidityReport};
