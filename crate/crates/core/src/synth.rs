//! Synthetic test scenes with known structure.
//!
//! Every generator is seeded through ChaCha8 so the same seed yields the
//! same bytes on every platform.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::raster::Raster;

/// Gray levels 50 apart, so any two distinct palette entries differ by more than 40.
pub const PATCH_PALETTE: [u8; 6] = [5, 55, 105, 155, 205, 255];

pub fn uniform(width: usize, height: usize, value: u8) -> Raster {
    Raster::filled(width, height, value)
}

pub fn checkerboard(size: usize, cell: usize, dark: u8, light: u8) -> Raster {
    let cell = cell.max(1);
    Raster::from_fn(size, size, |x, y| {
        if (x / cell + y / cell).is_multiple_of(2) {
            dark
        } else {
            light
        }
    })
}

/// A `side`-pixel bright square with its top-left corner at `(x0, y0)`.
pub fn square_on_ground(
    size: usize,
    x0: usize,
    y0: usize,
    side: usize,
    ground: u8,
    square: u8,
) -> Raster {
    Raster::from_fn(size, size, |x, y| {
        if (x0..x0 + side).contains(&x) && (y0..y0 + side).contains(&y) {
            square
        } else {
            ground
        }
    })
}

/// Two discs on a dark ground: a bright one upper-left, a mid-gray one lower-right.
pub fn two_blobs(width: usize, height: usize) -> Raster {
    let (w, h) = (width as f64, height as f64);
    let r = 0.18 * w.min(h);
    let discs = [(0.3 * w, 0.32 * h, 220u8), (0.7 * w, 0.68 * h, 130u8)];
    Raster::from_fn(width, height, |x, y| {
        let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
        discs
            .iter()
            .find(|(cx, cy, _)| (px - cx).powi(2) + (py - cy).powi(2) <= r * r)
            .map_or(30, |d| d.2)
    })
}

/// Bright upper half over a dark lower half.
pub fn sky_ground(width: usize, height: usize) -> Raster {
    Raster::from_fn(width, height, |_, y| if y < height / 2 { 230 } else { 40 })
}

/// Uniform noise blurred `passes` times with a 5x5 box, then stretched to
/// the full gray range.
pub fn smoothed_noise(width: usize, height: usize, seed: u64, passes: usize) -> Raster {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut field: Vec<f64> = (0..width * height)
        .map(|_| rng.gen_range(0.0..256.0))
        .collect();
    for _ in 0..passes {
        field = box_blur(&field, width, height, 2);
    }
    let lo = field.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = field.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = (hi - lo).max(1e-9);
    let pixels = field
        .iter()
        .map(|v| ((v - lo) / span * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    Raster::new(width, height, pixels).expect("dimensions match")
}

fn box_blur(field: &[f64], w: usize, h: usize, radius: usize) -> Vec<f64> {
    let mut out = vec![0.0; field.len()];
    for y in 0..h {
        for x in 0..w {
            let (x0, x1) = (x.saturating_sub(radius), (x + radius).min(w - 1));
            let (y0, y1) = (y.saturating_sub(radius), (y + radius).min(h - 1));
            let mut sum = 0.0;
            for yy in y0..=y1 {
                sum += field[yy * w + x0..=yy * w + x1].iter().sum::<f64>();
            }
            out[y * w + x] = sum / ((x1 - x0 + 1) * (y1 - y0 + 1)) as f64;
        }
    }
    out
}

/// A piecewise-constant image together with its ground-truth patch map.
#[derive(Debug, Clone)]
pub struct PatchScene {
    pub raster: Raster,
    /// Patch id per pixel, row-major, starting at 1.
    pub truth: Vec<u32>,
    pub patch_count: usize,
}

#[derive(Debug, Clone, Copy)]
struct Rect {
    x: usize,
    y: usize,
    w: usize,
    h: usize,
}

impl Rect {
    fn touches(&self, o: &Rect) -> bool {
        let overlap = |a0: usize, a1: usize, b0: usize, b1: usize| a0.max(b0) < a1.min(b1);
        let side_by_side = (self.x + self.w == o.x || o.x + o.w == self.x)
            && overlap(self.y, self.y + self.h, o.y, o.y + o.h);
        let stacked = (self.y + self.h == o.y || o.y + o.h == self.y)
            && overlap(self.x, self.x + self.w, o.x, o.x + o.w);
        side_by_side || stacked
    }
}

/// Guillotine partition of a 32..=64 pixel canvas into `2..=10` rectangles
/// (each side at least `min_side`), colored from [`PATCH_PALETTE`] so that
/// touching rectangles differ.
pub fn piecewise_constant(seed: u64, min_side: usize) -> PatchScene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let width = rng.gen_range(32..=64);
        let height = rng.gen_range(32..=64);
        let target = rng.gen_range(2..=10);
        let mut rects = vec![Rect {
            x: 0,
            y: 0,
            w: width,
            h: height,
        }];
        while rects.len() < target {
            let splittable: Vec<usize> = (0..rects.len())
                .filter(|&i| rects[i].w >= 2 * min_side || rects[i].h >= 2 * min_side)
                .collect();
            let Some(&i) = splittable.choose(&mut rng) else {
                break;
            };
            let r = rects[i];
            let vertical = if r.w >= 2 * min_side && r.h >= 2 * min_side {
                rng.gen_bool(0.5)
            } else {
                r.w >= 2 * min_side
            };
            let (a, b) = if vertical {
                let cut = rng.gen_range(min_side..=r.w - min_side);
                (
                    Rect { w: cut, ..r },
                    Rect {
                        x: r.x + cut,
                        w: r.w - cut,
                        ..r
                    },
                )
            } else {
                let cut = rng.gen_range(min_side..=r.h - min_side);
                (
                    Rect { h: cut, ..r },
                    Rect {
                        y: r.y + cut,
                        h: r.h - cut,
                        ..r
                    },
                )
            };
            rects[i] = a;
            rects.push(b);
        }
        if rects.len() < 2 {
            continue;
        }
        let mut colors: Vec<Option<u8>> = vec![None; rects.len()];
        let mut ok = true;
        for i in 0..rects.len() {
            let mut palette = PATCH_PALETTE;
            palette.shuffle(&mut rng);
            let pick = palette.iter().copied().find(|&c| {
                (0..rects.len())
                    .all(|j| j == i || colors[j] != Some(c) || !rects[i].touches(&rects[j]))
            });
            match pick {
                Some(c) => colors[i] = Some(c),
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }
        let mut truth = vec![0u32; width * height];
        let mut pixels = vec![0u8; width * height];
        for (k, r) in rects.iter().enumerate() {
            for y in r.y..r.y + r.h {
                for x in r.x..r.x + r.w {
                    truth[y * width + x] = k as u32 + 1;
                    pixels[y * width + x] = colors[k].expect("colored");
                }
            }
        }
        return PatchScene {
            raster: Raster::new(width, height, pixels).expect("dimensions match"),
            truth,
            patch_count: rects.len(),
        };
    }
}

/// True when two label buffers describe the same partition up to renaming.
pub fn same_partition(a: &[u32], b: &[u32]) -> bool {
    use std::collections::HashMap;
    if a.len() != b.len() {
        return false;
    }
    let mut fwd = HashMap::new();
    let mut back = HashMap::new();
    a.iter()
        .zip(b)
        .all(|(&x, &y)| *fwd.entry(x).or_insert(y) == y && *back.entry(y).or_insert(x) == x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_reproducible() {
        assert_eq!(smoothed_noise(20, 17, 9, 3), smoothed_noise(20, 17, 9, 3));
        let a = piecewise_constant(4, 8);
        let b = piecewise_constant(4, 8);
        assert_eq!(a.raster, b.raster);
        assert_eq!(a.truth, b.truth);
    }

    #[test]
    fn patches_respect_contrast() {
        for seed in 0..30 {
            let s = piecewise_constant(seed, 8);
            assert!((2..=10).contains(&s.patch_count));
            let (w, h) = s.raster.dims();
            for y in 0..h {
                for x in 0..w {
                    let i = y * w + x;
                    for j in [(x + 1 < w).then(|| i + 1), (y + 1 < h).then(|| i + w)]
                        .into_iter()
                        .flatten()
                    {
                        if s.truth[i] != s.truth[j] {
                            let d = s.raster.pixels()[i].abs_diff(s.raster.pixels()[j]);
                            assert!(d > 40, "seed {seed}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn partition_comparison_ignores_names() {
        assert!(same_partition(&[1, 1, 2], &[7, 7, 3]));
        assert!(!same_partition(&[1, 1, 2], &[7, 7, 7]));
        assert!(!same_partition(&[1, 2, 2], &[7, 7, 3]));
    }
}
