//! Coarse-to-fine extraction of reconstructible image descriptions.
//!
//! The pipeline squeezes an 8-bit grayscale image into a pyramid
//! ([`pyramid`]), segments the small top level and walks back down,
//! refining the inherited label map at each level ([`segmenter`]). Every
//! region at every level is registered with its size, position, intensity
//! and relations ([`registry`]); together with a run-length encoding of the
//! label maps this forms an [`description::ImageDescription`] that repaints
//! each level exactly from its region means. [`semantics`] matches such
//! descriptions against an externally supplied lexicon.

mod canonical;

pub mod description;
pub mod pyramid;
pub mod raster;
pub mod registry;
pub mod segmenter;
pub mod semantics;
pub mod synth;

pub use canonical::quantize;
pub use description::{describe, deserialize, reconstruct, serialize, ImageDescription};
pub use raster::{load_image, save_image, Raster};
pub use segmenter::SegParams;
