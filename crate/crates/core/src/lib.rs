//! Morphometry and segmentation-evaluation toolkit for neuron instance masks.
//!
//! The crate is organized bottom-up:
//!
//! * [`image_io`]: PGM/PNG decoding, min-max normalization to 8 bits, resizing.
//! * [`annotations`]: polygon / RLE annotation parsing and rasterization.
//! * [`masks`]: binary-mask primitives (components, bounding boxes, area, IoU).
//! * [`morphometry`]: per-cell length, width, area and intensity statistics.
//! * [`matching`]: IoU matching of predicted to ground-truth instances.
//! * [`metrics`]: precision, recall, F1, SQ, RQ, PQ and pixel accuracy.
//! * [`accuracy`]: measurement agreement between matched cells.
//! * [`synth`]: seeded synthetic scenes and prediction perturbations.

pub mod accuracy;
pub mod annotations;
pub mod error;
pub mod image_io;
pub mod masks;
pub mod matching;
pub mod metrics;
pub mod morphometry;
pub mod synth;

pub use error::{Error, Result};
