//! The hierarchical image description: per-level region descriptors plus
//! run-length region supports, enough to repaint every level.

mod codec;
mod density;
mod support;

pub use codec::{deserialize, serialize};
pub use density::{density_profile, LevelDensity};
pub use support::{RegionSupport, Run};

use std::collections::HashMap;

use thiserror::Error;

use crate::canonical::quantize;
use crate::raster::Raster;
use crate::registry::{
    compute_relations, register_level, RegionDescriptor, RegionId, RelationParams,
};
use crate::segmenter::{extract_segments, SegParams, SegmentError};

/// Version tag written to and required from description files.
pub const FORMAT_VERSION: &str = "pid-1";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DescriptionError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("unsupported description version {0:?}")]
    Version(String),
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    #[error("unknown level {0}")]
    UnknownLevel(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DescriptionMeta {
    pub width: usize,
    pub height: usize,
    pub params: SegParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelDescription {
    /// Pyramid index, 0 = original resolution.
    pub level: usize,
    pub width: usize,
    pub height: usize,
    /// In label order.
    pub regions: Vec<RegionDescriptor>,
    pub support: RegionSupport,
}

impl LevelDescription {
    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn region(&self, id: RegionId) -> Option<&RegionDescriptor> {
        if id.level != self.level {
            return None;
        }
        self.regions
            .binary_search_by_key(&id.label, |d| d.id.label)
            .ok()
            .map(|i| &self.regions[i])
    }
}

/// Description of an image. Levels run from the pyramid top down to level 0.
///
/// Every real inside is rounded to 6 decimals, which makes
/// `deserialize(serialize(d)) == d` hold exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageDescription {
    meta: DescriptionMeta,
    levels: Vec<LevelDescription>,
    density: Option<Vec<LevelDensity>>,
}

impl ImageDescription {
    pub fn meta(&self) -> &DescriptionMeta {
        &self.meta
    }

    /// Top level first.
    pub fn levels(&self) -> &[LevelDescription] {
        &self.levels
    }

    pub fn level(&self, index: usize) -> Option<&LevelDescription> {
        let top = self.levels.len().checked_sub(1)?;
        self.levels.get(top.checked_sub(index)?)
    }

    /// The level-0 (full resolution) description.
    pub fn finest(&self) -> &LevelDescription {
        self.levels
            .last()
            .expect("a description has at least one level")
    }

    pub fn region(&self, id: RegionId) -> Option<&RegionDescriptor> {
        self.level(id.level)?.region(id)
    }

    pub fn density(&self) -> Option<&[LevelDensity]> {
        self.density.as_deref()
    }

    /// Attaches the density profile computed from the stored levels.
    pub fn with_density(mut self) -> Self {
        self.density = Some(density_profile(&self));
        self
    }

    pub fn without_density(mut self) -> Self {
        self.density = None;
        self
    }
}

fn quantize_descriptor(mut d: RegionDescriptor) -> RegionDescriptor {
    d.area_fraction = quantize(d.area_fraction);
    d.centroid = (quantize(d.centroid.0), quantize(d.centroid.1));
    d.mean_intensity = quantize(d.mean_intensity);
    for r in &mut d.relations {
        r.strength = quantize(r.strength);
    }
    d
}

/// Runs the full pipeline and registers every level.
pub fn describe(r: &Raster, p: &SegParams) -> Result<ImageDescription, SegmentError> {
    let segments = extract_segments(r, p)?;
    let relation_params = RelationParams::default();
    let mut levels = Vec::with_capacity(segments.len());
    for (k, seg) in segments.iter().enumerate() {
        let coarse = k.checked_sub(1).map(|c| &segments[c].labels);
        let regions = register_level(seg.level, &seg.labels, &seg.stats, coarse);
        let regions = compute_relations(regions, &seg.labels, &relation_params)
            .into_iter()
            .map(quantize_descriptor)
            .collect();
        levels.push(LevelDescription {
            level: seg.level,
            width: seg.labels.width(),
            height: seg.labels.height(),
            regions,
            support: RegionSupport::encode(&seg.labels),
        });
    }
    Ok(ImageDescription {
        meta: DescriptionMeta {
            width: r.width(),
            height: r.height(),
            params: *p,
        },
        levels,
        density: None,
    })
}

/// Paints every pixel of `level` with its region's rounded mean intensity.
pub fn reconstruct(d: &ImageDescription, level: usize) -> Result<Raster, DescriptionError> {
    let lvl = d
        .level(level)
        .ok_or(DescriptionError::UnknownLevel(level))?;
    let paint: HashMap<_, u8> = lvl
        .regions
        .iter()
        .map(|r| (r.id.label, r.mean_intensity.round().clamp(0.0, 255.0) as u8))
        .collect();
    let mut pixels = Vec::with_capacity(lvl.pixel_count());
    for run in lvl.support.runs() {
        let v = paint.get(&run.label).copied().ok_or_else(|| {
            DescriptionError::InvariantViolation(format!("label {} has no descriptor", run.label))
        })?;
        pixels.extend(std::iter::repeat_n(v, run.length));
    }
    Raster::new(lvl.width, lvl.height, pixels)
        .map_err(|e| DescriptionError::InvariantViolation(e.to_string()))
}
