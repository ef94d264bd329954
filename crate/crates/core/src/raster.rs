//! 8-bit grayscale rasters and binary PGM/PPM I/O.
//!
//! Only the binary Netpbm variants with `maxval` 255 are accepted: `P5`
//! passes through unchanged, `P6` collapses to luminance on load
//! (`round(0.299 R + 0.587 G + 0.114 B)`, evaluated in exact integers).

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RasterError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("invalid raster: {width}x{height} with {len} pixels")]
    InvalidDimensions {
        width: usize,
        height: usize,
        len: usize,
    },
}

/// Row-major 8-bit grayscale image. Width and height are at least 1.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Raster {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl std::fmt::Debug for Raster {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Raster({}x{})", self.width, self.height)
    }
}

impl Raster {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, RasterError> {
        let ok = width >= 1
            && height >= 1
            && width.checked_mul(height).is_some_and(|n| n == pixels.len());
        if !ok {
            return Err(RasterError::InvalidDimensions {
                width,
                height,
                len: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// A raster with every pixel set to `value`.
    ///
    /// Panics if either dimension is zero.
    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self::new(width, height, vec![value; width * height]).expect("non-zero dimensions")
    }

    /// Builds a raster by evaluating `f(x, y)` for every pixel.
    ///
    /// Panics if either dimension is zero.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        assert!(
            width >= 1 && height >= 1,
            "raster dimensions must be positive"
        );
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixel_count(&self) -> usize {
        self.pixels.len()
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn mean(&self) -> f64 {
        let sum: u64 = self.pixels.iter().map(|&p| u64::from(p)).sum();
        sum as f64 / self.pixels.len() as f64
    }
}

/// BT.601 luma, rounded half up. Exact: every term is a whole number of thousandths.
pub fn luminance(r: u8, g: u8, b: u8) -> u8 {
    let weighted = 299 * u32::from(r) + 587 * u32::from(g) + 114 * u32::from(b);
    ((weighted + 500) / 1000).min(255) as u8
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderCursor<'a> {
    fn skip_whitespace_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn read_number(&mut self, what: &str) -> Result<usize, RasterError> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(RasterError::MalformedHeader(format!("missing {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| RasterError::MalformedHeader(format!("{what} out of range")))
    }
}

/// Decodes a binary PGM (`P5`) or PPM (`P6`) image with `maxval` 255.
pub fn load_image(bytes: &[u8]) -> Result<Raster, RasterError> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        Some(m) => {
            return Err(RasterError::MalformedHeader(format!(
                "unsupported magic {:?}",
                String::from_utf8_lossy(m)
            )))
        }
        None => return Err(RasterError::MalformedHeader("missing magic".into())),
    };
    let mut cursor = HeaderCursor { bytes, pos: 2 };
    if !cursor
        .bytes
        .get(2)
        .is_some_and(|b| b.is_ascii_whitespace() || *b == b'#')
    {
        return Err(RasterError::MalformedHeader(
            "magic not followed by whitespace".into(),
        ));
    }
    let width = cursor.read_number("width")?;
    let height = cursor.read_number("height")?;
    let maxval = cursor.read_number("maxval")?;
    if width == 0 || height == 0 {
        return Err(RasterError::MalformedHeader(format!(
            "zero dimension {width}x{height}"
        )));
    }
    if maxval != 255 {
        return Err(RasterError::MalformedHeader(format!(
            "maxval {maxval} is not 255"
        )));
    }
    // Exactly one whitespace byte separates the header from the payload.
    match bytes.get(cursor.pos) {
        Some(b) if b.is_ascii_whitespace() => cursor.pos += 1,
        _ => {
            return Err(RasterError::MalformedHeader(
                "maxval not followed by whitespace".into(),
            ))
        }
    }
    let pixel_count = width
        .checked_mul(height)
        .ok_or_else(|| RasterError::MalformedHeader("dimensions overflow".into()))?;
    let expected = pixel_count
        .checked_mul(channels)
        .ok_or_else(|| RasterError::MalformedHeader("dimensions overflow".into()))?;
    let payload = &bytes[cursor.pos..];
    if payload.len() < expected {
        return Err(RasterError::TruncatedPayload {
            expected,
            found: payload.len(),
        });
    }
    let payload = &payload[..expected];
    let pixels = if channels == 1 {
        payload.to_vec()
    } else {
        payload
            .chunks_exact(3)
            .map(|rgb| luminance(rgb[0], rgb[1], rgb[2]))
            .collect()
    };
    Raster::new(width, height, pixels).map_err(|e| RasterError::MalformedHeader(e.to_string()))
}

/// Encodes `raster` as binary PGM (`P5`, `maxval` 255).
pub fn save_image(raster: &Raster) -> Vec<u8> {
    let header = format!("P5\n{} {}\n255\n", raster.width, raster.height);
    let mut out = Vec::with_capacity(header.len() + raster.pixels.len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(&raster.pixels);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn p5_passes_through() {
        let mut bytes = b"P5 2 2 255\n".to_vec();
        bytes.extend_from_slice(&[0, 64, 128, 255]);
        let r = load_image(&bytes).unwrap();
        assert_eq!(r.dims(), (2, 2));
        assert_eq!(r.pixels(), &[0, 64, 128, 255]);
    }

    #[test]
    fn p6_white_is_white() {
        let mut bytes = b"P6\n1 1\n255\n".to_vec();
        bytes.extend_from_slice(&[255, 255, 255]);
        assert_eq!(load_image(&bytes).unwrap().pixels(), &[255]);
    }

    #[test]
    fn p6_luminance_rounds() {
        // 0.299*200 + 0.587*100 + 0.114*50 = 59.8 + 58.7 + 5.7 = 124.2
        let mut bytes = b"P6\n1 1\n255\n".to_vec();
        bytes.extend_from_slice(&[200, 100, 50]);
        assert_eq!(load_image(&bytes).unwrap().pixels(), &[124]);
    }

    #[test]
    fn luminance_matches_float_formula() {
        for r in (0..=255u32).step_by(5) {
            for g in (0..=255u32).step_by(5) {
                for b in (0..=255u32).step_by(17) {
                    let f = 0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64;
                    let expected = (f + 1e-9).round().clamp(0.0, 255.0) as u8;
                    assert_eq!(
                        luminance(r as u8, g as u8, b as u8),
                        expected,
                        "{r},{g},{b}"
                    );
                }
            }
        }
    }

    #[test]
    fn rejects_unsupported_magic() {
        let bytes = b"P4\n1 1\n\x00".to_vec();
        assert!(matches!(
            load_image(&bytes),
            Err(RasterError::MalformedHeader(_))
        ));
    }

    #[test]
    fn rejects_bad_headers() {
        for bad in [
            &b""[..],
            b"P5",
            b"P5\n",
            b"P5\n4\n",
            b"P5\n4 4\n65535\n",
            b"P5\n0 4\n255\n",
            b"P5\n4 4 255",
            b"P54 4 255\n",
            b"P5\n-1 4 255\n",
        ] {
            assert!(
                matches!(load_image(bad), Err(RasterError::MalformedHeader(_))),
                "{:?}",
                String::from_utf8_lossy(bad)
            );
        }
    }

    #[test]
    fn rejects_truncated_payload() {
        let mut bytes = b"P6\n2 2\n255\n".to_vec();
        bytes.extend_from_slice(&[1; 11]);
        assert_eq!(
            load_image(&bytes),
            Err(RasterError::TruncatedPayload {
                expected: 12,
                found: 11
            })
        );
    }

    #[test]
    fn header_comments_are_skipped() {
        let mut bytes = b"P5 # made by hand\n# another\n3\t1\r\n#c\n255\n".to_vec();
        bytes.extend_from_slice(&[9, 8, 7]);
        assert_eq!(load_image(&bytes).unwrap().pixels(), &[9, 8, 7]);
    }

    #[test]
    fn save_smallest() {
        let r = Raster::new(1, 1, vec![7]).unwrap();
        assert_eq!(save_image(&r), b"P5\n1 1\n255\n\x07".to_vec());
    }

    #[test]
    fn save_is_row_major() {
        let r = Raster::new(2, 1, vec![0, 255]).unwrap();
        let bytes = save_image(&r);
        assert_eq!(&bytes[bytes.len() - 2..], &[0, 255]);
    }

    #[test]
    fn new_rejects_inconsistent_lengths() {
        assert!(Raster::new(0, 3, vec![]).is_err());
        assert!(Raster::new(2, 2, vec![0; 3]).is_err());
    }

    fn arb_raster() -> impl Strategy<Value = Raster> {
        (1usize..24, 1usize..24).prop_flat_map(|(w, h)| {
            proptest::collection::vec(any::<u8>(), w * h)
                .prop_map(move |px| Raster::new(w, h, px).unwrap())
        })
    }

    proptest! {
        #[test]
        fn round_trip_is_identity(r in arb_raster()) {
            prop_assert_eq!(load_image(&save_image(&r)).unwrap(), r);
        }

        #[test]
        fn grayscale_conversion_commutes_with_shuffles(
            rgb in proptest::collection::vec(any::<(u8, u8, u8)>(), 1..40),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let encode = |px: &[(u8, u8, u8)]| {
                let mut b = format!("P6\n{} 1\n255\n", px.len()).into_bytes();
                for &(r, g, bl) in px {
                    b.extend_from_slice(&[r, g, bl]);
                }
                load_image(&b).unwrap().into_pixels()
            };
            let mut order: Vec<usize> = (0..rgb.len()).collect();
            order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let shuffled: Vec<_> = order.iter().map(|&i| rgb[i]).collect();
            let converted = encode(&rgb);
            let expected: Vec<u8> = order.iter().map(|&i| converted[i]).collect();
            prop_assert_eq!(encode(&shuffled), expected);
        }
    }
}
