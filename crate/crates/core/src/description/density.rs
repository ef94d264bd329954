//! Specific information density: description bytes per pixel at each level.

use super::codec::wire_level;
use super::ImageDescription;
use crate::canonical::quantize;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelDensity {
    pub level: usize,
    pub width: usize,
    pub height: usize,
    /// Canonical byte length of the level's `regions` and `support` arrays.
    pub bytes: usize,
    /// `bytes / (width * height)`, rounded to 6 decimals.
    pub density: f64,
}

/// Density of every stored level, top first. Each value depends only on
/// its own level.
pub fn density_profile(d: &ImageDescription) -> Vec<LevelDensity> {
    d.levels()
        .iter()
        .map(|lvl| {
            let wire = wire_level(lvl);
            let bytes = serde_json::to_string(&wire.regions)
                .expect("finite reals")
                .len()
                + serde_json::to_string(&wire.support)
                    .expect("integers")
                    .len();
            LevelDensity {
                level: lvl.level,
                width: lvl.width,
                height: lvl.height,
                bytes,
                density: quantize(bytes as f64 / lvl.pixel_count() as f64),
            }
        })
        .collect()
}
