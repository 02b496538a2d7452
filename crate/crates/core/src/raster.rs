//! Grayscale rasters with normalized luminance, boundary-aware sampling and
//! 8-bit quantization.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RasterError {
    #[error("raster dimensions must be at least 1x1, got {width}x{height}")]
    EmptyDimensions { width: usize, height: usize },
    #[error("expected {expected} samples for the given dimensions, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("sample {index} is {value}, outside [0, 1]")]
    SampleOutOfRange { index: usize, value: f64 },
    #[error("pixel scale must be positive and finite, got {0}")]
    InvalidPixelScale(f64),
}

/// Rule for reading samples that fall outside the image.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryPolicy {
    /// Replicate the nearest edge pixel.
    #[default]
    Clamp,
    /// Periodic continuation.
    Wrap,
    /// Mirror about the image edge, repeating the edge pixel (`cba|abc|cba`).
    Reflect,
    /// Everything outside reads as 0.
    Zero,
}

impl BoundaryPolicy {
    pub const ALL: [BoundaryPolicy; 4] = [
        BoundaryPolicy::Clamp,
        BoundaryPolicy::Wrap,
        BoundaryPolicy::Reflect,
        BoundaryPolicy::Zero,
    ];

    /// Maps a possibly out-of-range index onto `0..len`. Returns `None` for
    /// `Zero` when the index is outside.
    #[inline]
    pub fn map_index(self, i: isize, len: usize) -> Option<usize> {
        let n = len as isize;
        if (0..n).contains(&i) {
            return Some(i as usize);
        }
        match self {
            BoundaryPolicy::Clamp => Some(i.clamp(0, n - 1) as usize),
            BoundaryPolicy::Wrap => Some(i.rem_euclid(n) as usize),
            BoundaryPolicy::Reflect => {
                let period = 2 * n;
                let m = i.rem_euclid(period);
                Some(if m >= n { period - 1 - m } else { m } as usize)
            }
            BoundaryPolicy::Zero => None,
        }
    }
}

impl std::str::FromStr for BoundaryPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "clamp" => Ok(BoundaryPolicy::Clamp),
            "wrap" => Ok(BoundaryPolicy::Wrap),
            "reflect" => Ok(BoundaryPolicy::Reflect),
            "zero" => Ok(BoundaryPolicy::Zero),
            other => Err(format!(
                "unknown boundary policy '{other}' (expected clamp|wrap|reflect|zero)"
            )),
        }
    }
}

/// A point with fractional pixel coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubpixelPoint {
    pub x: f64,
    pub y: f64,
}

impl SubpixelPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Row-major grid of luminance samples in `[0, 1]`, optionally carrying its
/// ground resolution in meters per pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    samples: Vec<f64>,
    pixel_scale: Option<f64>,
}

impl Raster {
    pub fn new(width: usize, height: usize, samples: Vec<f64>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::EmptyDimensions { width, height });
        }
        let expected = width * height;
        if samples.len() != expected {
            return Err(RasterError::LengthMismatch {
                expected,
                actual: samples.len(),
            });
        }
        if let Some((index, &value)) = samples
            .iter()
            .enumerate()
            .find(|(_, s)| !(0.0..=1.0).contains(*s))
        {
            return Err(RasterError::SampleOutOfRange { index, value });
        }
        Ok(Self {
            width,
            height,
            samples,
            pixel_scale: None,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self, RasterError> {
        Self::new(width, height, vec![value; width * height])
    }

    /// Builds a raster by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self, RasterError> {
        let mut samples = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                samples.push(f(x, y));
            }
        }
        Self::new(width, height, samples)
    }

    /// Clamps every value into `[0, 1]`. NaN becomes 0.
    pub(crate) fn from_clamped(width: usize, height: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), width * height);
        let samples = values
            .into_iter()
            .map(|v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) })
            .collect();
        Self {
            width,
            height,
            samples,
            pixel_scale: None,
        }
    }

    pub fn with_pixel_scale(mut self, scale: Option<f64>) -> Result<Self, RasterError> {
        if let Some(s) = scale {
            if !(s.is_finite() && s > 0.0) {
                return Err(RasterError::InvalidPixelScale(s));
            }
        }
        self.pixel_scale = scale;
        Ok(self)
    }

    pub(crate) fn set_pixel_scale_unchecked(&mut self, scale: Option<f64>) {
        self.pixel_scale = scale;
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn pixel_scale(&self) -> Option<f64> {
        self.pixel_scale
    }

    /// In-bounds access. Panics when `(x, y)` lies outside the raster.
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        assert!(
            x < self.width && y < self.height,
            "pixel ({x}, {y}) out of bounds"
        );
        self.samples[y * self.width + x]
    }

    /// Reads the sample at an integer coordinate, resolving out-of-range
    /// coordinates through `policy`.
    #[inline]
    pub fn sample(&self, ix: isize, iy: isize, policy: BoundaryPolicy) -> f64 {
        match (
            policy.map_index(ix, self.width),
            policy.map_index(iy, self.height),
        ) {
            (Some(x), Some(y)) => self.samples[y * self.width + x],
            _ => 0.0,
        }
    }

    /// Bilinear interpolation between the four neighbors of `p`.
    pub fn bilinear_sample(&self, p: SubpixelPoint, policy: BoundaryPolicy) -> f64 {
        let x0 = p.x.floor();
        let y0 = p.y.floor();
        let fx = p.x - x0;
        let fy = p.y - y0;
        let (ix, iy) = (x0 as isize, y0 as isize);
        let s00 = self.sample(ix, iy, policy);
        if fx == 0.0 && fy == 0.0 {
            return s00;
        }
        let s10 = self.sample(ix + 1, iy, policy);
        let s01 = self.sample(ix, iy + 1, policy);
        let s11 = self.sample(ix + 1, iy + 1, policy);
        let top = s00 * (1.0 - fx) + s10 * fx;
        let bottom = s01 * (1.0 - fx) + s11 * fx;
        top * (1.0 - fy) + bottom * fy
    }

    /// Nearest-neighbor lookup (ties round half away from zero).
    pub fn nearest_sample(&self, p: SubpixelPoint, policy: BoundaryPolicy) -> f64 {
        self.sample(p.x.round() as isize, p.y.round() as isize, policy)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Raster {
        let mut out = Raster::from_clamped(
            self.width,
            self.height,
            self.samples.iter().map(|&s| f(s)).collect(),
        );
        out.pixel_scale = self.pixel_scale;
        out
    }

    pub fn transpose(&self) -> Raster {
        let mut samples = Vec::with_capacity(self.samples.len());
        for x in 0..self.width {
            for y in 0..self.height {
                samples.push(self.samples[y * self.width + x]);
            }
        }
        Raster {
            width: self.height,
            height: self.width,
            samples,
            pixel_scale: self.pixel_scale,
        }
    }

    /// Rotates the image a quarter turn counter-clockwise on screen.
    /// Output pixel `(x, y)` takes input pixel `(W - 1 - y, x)`.
    pub fn rotate90(&self) -> Raster {
        let (w, h) = (self.width, self.height);
        let mut samples = Vec::with_capacity(self.samples.len());
        for y in 0..w {
            for x in 0..h {
                samples.push(self.samples[x * w + (w - 1 - y)]);
            }
        }
        Raster {
            width: h,
            height: w,
            samples,
            pixel_scale: self.pixel_scale,
        }
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.samples
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| {
                (lo.min(s), hi.max(s))
            })
    }

    pub fn quantize(&self) -> ByteGrid {
        ByteGrid {
            width: self.width,
            height: self.height,
            bytes: self.samples.iter().map(|&s| quantize_sample(s)).collect(),
        }
    }
}

/// `round(s * 255)`, half away from zero.
#[inline]
pub fn quantize_sample(s: f64) -> u8 {
    (s.clamp(0.0, 1.0) * 255.0).round() as u8
}

#[inline]
pub fn dequantize_sample(b: u8) -> f64 {
    f64::from(b) / 255.0
}

/// 8-bit grayscale pixels, the on-disk representation of a [`Raster`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ByteGrid {
    width: usize,
    height: usize,
    bytes: Vec<u8>,
}

impl ByteGrid {
    pub fn new(width: usize, height: usize, bytes: Vec<u8>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::EmptyDimensions { width, height });
        }
        if bytes.len() != width * height {
            return Err(RasterError::LengthMismatch {
                expected: width * height,
                actual: bytes.len(),
            });
        }
        Ok(Self {
            width,
            height,
            bytes,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn dequantize(&self) -> Raster {
        Raster {
            width: self.width,
            height: self.height,
            samples: self.bytes.iter().map(|&b| dequantize_sample(b)).collect(),
            pixel_scale: None,
        }
    }
}

/// Unclamped signed values on a raster grid; the output of a convolution.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl Field {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![0.0; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    #[inline]
    pub(crate) fn sample(&self, ix: isize, iy: isize, policy: BoundaryPolicy) -> f64 {
        match (
            policy.map_index(ix, self.width),
            policy.map_index(iy, self.height),
        ) {
            (Some(x), Some(y)) => self.values[y * self.width + x],
            _ => 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn clamp_replicates_edge() {
        let r = Raster::filled(3, 3, 0.5).unwrap();
        assert_eq!(r.sample(-1, 0, BoundaryPolicy::Clamp), 0.5);
    }

    #[test]
    fn zero_policy_outside_is_zero() {
        let r = Raster::filled(3, 3, 0.7).unwrap();
        assert_eq!(r.sample(-1, 0, BoundaryPolicy::Zero), 0.0);
        assert_eq!(r.sample(1, 3, BoundaryPolicy::Zero), 0.0);
        assert_eq!(r.sample(1, 1, BoundaryPolicy::Zero), 0.7);
    }

    #[test]
    fn wrap_is_modular() {
        let r = Raster::new(4, 1, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_eq!(r.sample(4, 0, BoundaryPolicy::Wrap), 0.1);
        assert_eq!(r.sample(-1, 0, BoundaryPolicy::Wrap), 0.4);
    }

    #[test]
    fn reflect_repeats_edge_pixel() {
        let r = Raster::new(3, 1, vec![0.1, 0.2, 0.3]).unwrap();
        let got: Vec<f64> = (-4..7)
            .map(|i| r.sample(i, 0, BoundaryPolicy::Reflect))
            .collect();
        assert_eq!(
            got,
            vec![0.3, 0.3, 0.2, 0.1, 0.1, 0.2, 0.3, 0.3, 0.2, 0.1, 0.1]
        );
        let single = Raster::new(1, 1, vec![0.6]).unwrap();
        assert_eq!(single.sample(-5, 9, BoundaryPolicy::Reflect), 0.6);
    }

    #[test]
    fn rejects_invalid_rasters() {
        assert_eq!(
            Raster::new(0, 2, vec![]),
            Err(RasterError::EmptyDimensions {
                width: 0,
                height: 2
            })
        );
        assert!(matches!(
            Raster::new(2, 2, vec![0.0; 3]),
            Err(RasterError::LengthMismatch { .. })
        ));
        assert!(matches!(
            Raster::new(1, 2, vec![0.0, 1.5]),
            Err(RasterError::SampleOutOfRange { index: 1, .. })
        ));
        assert!(Raster::new(1, 1, vec![f64::NAN]).is_err());
        let r = Raster::filled(1, 1, 0.0).unwrap();
        assert!(r.clone().with_pixel_scale(Some(0.0)).is_err());
        assert!(r.clone().with_pixel_scale(Some(f64::INFINITY)).is_err());
        assert!(r.with_pixel_scale(Some(0.25)).is_ok());
    }

    #[test]
    fn bilinear_examples() {
        let c = Raster::filled(4, 3, 0.37).unwrap();
        for p in [(0.3, 0.9), (-2.5, 1.25), (3.75, 2.5)] {
            let v = c.bilinear_sample(SubpixelPoint::new(p.0, p.1), BoundaryPolicy::Clamp);
            assert!((v - 0.37).abs() < 1e-15);
        }
        let r = Raster::new(2, 1, vec![0.0, 1.0]).unwrap();
        assert_eq!(
            r.bilinear_sample(SubpixelPoint::new(0.5, 0.0), BoundaryPolicy::Clamp),
            0.5
        );
        let r = Raster::new(2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(
            r.bilinear_sample(SubpixelPoint::new(0.5, 0.5), BoundaryPolicy::Clamp),
            0.5
        );
    }

    #[test]
    fn quantize_endpoints() {
        assert_eq!(quantize_sample(1.0), 255);
        assert_eq!(quantize_sample(0.0), 0);
        assert_eq!(quantize_sample(0.5), 128);
        assert_eq!(dequantize_sample(255), 1.0);
        assert!((dequantize_sample(128) - 0.50196).abs() < 1e-5);
        assert_eq!(quantize_sample(dequantize_sample(128)), 128);
    }

    #[test]
    fn byte_round_trip_is_exhaustive() {
        for b in 0..=255u8 {
            assert_eq!(quantize_sample(dequantize_sample(b)), b);
        }
        let grid = ByteGrid::new(16, 16, (0..=255u8).collect()).unwrap();
        assert_eq!(grid.dequantize().quantize(), grid);
    }

    #[test]
    fn rotate_and_transpose_shapes() {
        let r = Raster::new(3, 2, vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5]).unwrap();
        let t = r.transpose();
        assert_eq!(t.dimensions(), (2, 3));
        assert_eq!(t.get(1, 2), r.get(2, 1));
        let q = r.rotate90();
        assert_eq!(q.dimensions(), (2, 3));
        // top-right corner moves to top-left
        assert_eq!(q.get(0, 0), r.get(2, 0));
        assert_eq!(r.rotate90().rotate90().rotate90().rotate90(), r);
    }

    fn raster_strategy() -> impl Strategy<Value = Raster> {
        (1usize..12, 1usize..12).prop_flat_map(|(w, h)| {
            proptest::collection::vec(0.0f64..=1.0, w * h)
                .prop_map(move |s| Raster::new(w, h, s).unwrap())
        })
    }

    proptest! {
        #[test]
        fn bilinear_matches_sample_at_integers(r in raster_strategy(), policy_idx in 0usize..4) {
            let policy = BoundaryPolicy::ALL[policy_idx];
            for y in 0..r.height() {
                for x in 0..r.width() {
                    let p = SubpixelPoint::new(x as f64, y as f64);
                    prop_assert_eq!(r.bilinear_sample(p, policy), r.sample(x as isize, y as isize, policy));
                }
            }
        }

        #[test]
        fn clamp_in_bounds_is_direct_access(r in raster_strategy()) {
            for y in 0..r.height() {
                for x in 0..r.width() {
                    prop_assert_eq!(r.sample(x as isize, y as isize, BoundaryPolicy::Clamp), r.get(x, y));
                }
            }
        }

        #[test]
        fn mapped_indices_stay_in_range(i in -100isize..100, len in 1usize..9, policy_idx in 0usize..3) {
            let policy = BoundaryPolicy::ALL[policy_idx];
            let m = policy.map_index(i, len).unwrap();
            prop_assert!(m < len);
        }
    }
}
