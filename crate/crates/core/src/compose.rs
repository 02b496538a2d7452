//! Two-layer blending used to lay an inverted edge map over its base image.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::Raster;

#[derive(Debug, Error, PartialEq)]
pub enum ComposeError {
    #[error("layer is {layer_w}x{layer_h} but base is {base_w}x{base_h}")]
    DimensionMismatch {
        base_w: usize,
        base_h: usize,
        layer_w: usize,
        layer_h: usize,
    },
    #[error("opacity must be in [0, 1], got {0}")]
    Opacity(f64),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlendMode {
    #[default]
    Multiply,
    Additive,
    Darken,
}

impl BlendMode {
    #[inline]
    fn apply(self, base: f64, layer: f64) -> f64 {
        match self {
            BlendMode::Multiply => base * layer,
            BlendMode::Additive => (base + layer).min(1.0),
            BlendMode::Darken => base.min(layer),
        }
    }
}

impl std::str::FromStr for BlendMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "multiply" => Ok(BlendMode::Multiply),
            "additive" => Ok(BlendMode::Additive),
            "darken" => Ok(BlendMode::Darken),
            other => Err(format!(
                "unknown blend mode '{other}' (expected multiply|additive|darken)"
            )),
        }
    }
}

/// `(1 − opacity)·base + opacity·mode(base, layer)`, pixelwise.
pub fn blend(
    base: &Raster,
    layer: &Raster,
    mode: BlendMode,
    opacity: f64,
) -> Result<Raster, ComposeError> {
    if base.dimensions() != layer.dimensions() {
        return Err(ComposeError::DimensionMismatch {
            base_w: base.width(),
            base_h: base.height(),
            layer_w: layer.width(),
            layer_h: layer.height(),
        });
    }
    if !(0.0..=1.0).contains(&opacity) {
        return Err(ComposeError::Opacity(opacity));
    }
    let keep = 1.0 - opacity;
    let values = base
        .samples()
        .iter()
        .zip(layer.samples())
        .map(|(&b, &l)| keep * b + opacity * mode.apply(b, l))
        .collect();
    let mut out = Raster::from_clamped(base.width(), base.height(), values);
    out.set_pixel_scale_unchecked(base.pixel_scale());
    Ok(out)
}
