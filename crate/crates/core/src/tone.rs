//! Brightness/contrast, inversion and contrast stretch.

use std::f64::consts::FRAC_PI_4;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::Raster;

pub const MAX_CONTRAST: f64 = 0.99;

#[derive(Debug, Error, PartialEq)]
pub enum ToneError {
    #[error("brightness must be in [-1, 1], got {0}")]
    Brightness(f64),
    #[error("contrast must be in [-1, 0.99], got {0}")]
    Contrast(f64),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ToneParams {
    pub brightness: f64,
    pub contrast: f64,
}

impl ToneParams {
    pub fn new(brightness: f64, contrast: f64) -> Result<Self, ToneError> {
        let p = Self {
            brightness,
            contrast,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ToneError> {
        if !(-1.0..=1.0).contains(&self.brightness) {
            return Err(ToneError::Brightness(self.brightness));
        }
        if !(-1.0..=MAX_CONTRAST).contains(&self.contrast) {
            return Err(ToneError::Contrast(self.contrast));
        }
        Ok(())
    }

    /// `tan((contrast + 1) · π/4)`; exactly 1 at zero contrast.
    pub fn slope(&self) -> f64 {
        if self.contrast == 0.0 {
            1.0
        } else {
            ((self.contrast + 1.0) * FRAC_PI_4).tan()
        }
    }
}

/// `clamp((in − 0.5)·slope + 0.5 + brightness, 0, 1)` pixelwise.
pub fn adjust(r: &Raster, p: ToneParams) -> Result<Raster, ToneError> {
    p.validate()?;
    let slope = p.slope();
    Ok(r.map(|s| (s - 0.5) * slope + 0.5 + p.brightness))
}

/// `1 − s`. Applying it twice is exact on multiples of 2⁻⁵³ and exact after
/// re-quantization; for arbitrary doubles below 0.5 it can be off by one ulp.
pub fn invert(r: &Raster) -> Raster {
    r.map(|s| 1.0 - s)
}

/// Maps `[min, max]` affinely onto `[0, 1]`. Flat images come back unchanged.
pub fn stretch(r: &Raster) -> Raster {
    let (lo, hi) = r.min_max();
    let span = hi - lo;
    if span < 1e-12 {
        return r.clone();
    }
    r.map(|s| (s - lo) / span)
}
