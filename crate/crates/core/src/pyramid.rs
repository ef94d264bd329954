//! Bottom-up squeezing: 2x2 block averaging until the top level is small.

use crate::raster::Raster;

pub const DEFAULT_TOP_MAX_PIXELS: usize = 100;

/// Stack of rasters, index 0 = original, last = top.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pyramid {
    levels: Vec<Raster>,
    top_max_pixels: usize,
}

impl Pyramid {
    pub fn levels(&self) -> &[Raster] {
        &self.levels
    }

    pub fn level(&self, index: usize) -> Option<&Raster> {
        self.levels.get(index)
    }

    pub fn top(&self) -> &Raster {
        self.levels.last().expect("pyramid has at least one level")
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn top_max_pixels(&self) -> usize {
        self.top_max_pixels
    }

    pub fn into_levels(self) -> Vec<Raster> {
        self.levels
    }
}

#[inline]
pub fn halve(n: usize) -> usize {
    n.div_ceil(2)
}

/// Halves a raster by averaging 2x2 blocks, `floor((a + b + c + d + 2) / 4)`.
///
/// Odd trailing columns and rows are replicated before blocking.
pub fn squeeze_once(r: &Raster) -> Raster {
    let (w, h) = r.dims();
    let (ow, oh) = (halve(w), halve(h));
    let src = r.pixels();
    let mut out = Vec::with_capacity(ow * oh);
    for oy in 0..oh {
        let y0 = 2 * oy;
        let y1 = (y0 + 1).min(h - 1);
        let row0 = &src[y0 * w..(y0 + 1) * w];
        let row1 = &src[y1 * w..(y1 + 1) * w];
        for ox in 0..ow {
            let x0 = 2 * ox;
            let x1 = (x0 + 1).min(w - 1);
            let sum = u32::from(row0[x0])
                + u32::from(row0[x1])
                + u32::from(row1[x0])
                + u32::from(row1[x1]);
            out.push(((sum + 2) / 4) as u8);
        }
    }
    Raster::new(ow, oh, out).expect("halved dimensions are positive")
}

/// Dimensions of every level, bottom to top, for an image of the given size.
pub fn level_dims(width: usize, height: usize, top_max_pixels: usize) -> Vec<(usize, usize)> {
    let top_max = top_max_pixels.max(1);
    let mut dims = vec![(width, height)];
    let (mut w, mut h) = (width, height);
    while w * h > top_max {
        w = halve(w);
        h = halve(h);
        dims.push((w, h));
    }
    dims
}

/// Squeezes `r` repeatedly until the level holds at most `top_max_pixels`.
///
/// A `top_max_pixels` of 0 is treated as 1.
pub fn build_pyramid(r: &Raster, top_max_pixels: usize) -> Pyramid {
    let top_max = top_max_pixels.max(1);
    let mut levels = vec![r.clone()];
    loop {
        let last = levels.last().expect("non-empty");
        if last.pixel_count() <= top_max {
            break;
        }
        let next = squeeze_once(last);
        levels.push(next);
    }
    Pyramid {
        levels,
        top_max_pixels: top_max,
    }
}
