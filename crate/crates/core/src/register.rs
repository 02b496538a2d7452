//! Similarity-transform registration: least-squares fitting from control
//! points and inverse-mapped warping.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{BoundaryPolicy, Raster, SubpixelPoint};

#[derive(Debug, Error)]
pub enum RegisterError {
    #[error("need at least 2 control point pairs, got {0}")]
    TooFewPairs(usize),
    #[error("source control points are coincident")]
    DegeneratePoints,
    #[error("control point {0} has a non-finite coordinate")]
    NonFinitePoint(usize),
    #[error("transform is not invertible (scale {0})")]
    NonInvertible(f64),
    #[error("output dimensions must be at least 1x1, got {0}x{1}")]
    EmptyOutput(usize, usize),
    #[error("control point file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("reading control points: {0}")]
    Io(#[from] std::io::Error),
}

/// `q = scale · R(rotation) · p + translation`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityTransform {
    pub scale: f64,
    /// Radians, counter-clockwise in a y-up frame (clockwise on screen).
    pub rotation: f64,
    pub translation: (f64, f64),
}

impl Default for SimilarityTransform {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl SimilarityTransform {
    pub const IDENTITY: Self = Self {
        scale: 1.0,
        rotation: 0.0,
        translation: (0.0, 0.0),
    };

    pub fn new(scale: f64, rotation: f64, translation: (f64, f64)) -> Self {
        Self {
            scale,
            rotation,
            translation,
        }
    }

    pub fn is_invertible(&self) -> bool {
        self.scale.is_finite()
            && self.scale > 1e-12
            && self.rotation.is_finite()
            && self.translation.0.is_finite()
            && self.translation.1.is_finite()
    }

    pub fn apply(&self, p: SubpixelPoint) -> SubpixelPoint {
        let (sin, cos) = self.rotation.sin_cos();
        let (s, (tx, ty)) = (self.scale, self.translation);
        SubpixelPoint::new(
            s * (cos * p.x - sin * p.y) + tx,
            s * (sin * p.x + cos * p.y) + ty,
        )
    }

    /// `p = R(−rotation) · (q − translation) / scale`.
    pub fn apply_inverse(&self, q: SubpixelPoint) -> SubpixelPoint {
        let (sin, cos) = self.rotation.sin_cos();
        let dx = q.x - self.translation.0;
        let dy = q.y - self.translation.1;
        SubpixelPoint::new(
            (cos * dx + sin * dy) / self.scale,
            (-sin * dx + cos * dy) / self.scale,
        )
    }

    pub fn inverse(&self) -> Result<Self, RegisterError> {
        if !self.is_invertible() {
            return Err(RegisterError::NonInvertible(self.scale));
        }
        let origin = self.apply_inverse(SubpixelPoint::new(0.0, 0.0));
        Ok(Self {
            scale: 1.0 / self.scale,
            rotation: -self.rotation,
            translation: (origin.x, origin.y),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlPointPair {
    pub source: SubpixelPoint,
    pub target: SubpixelPoint,
}

impl ControlPointPair {
    pub fn new(sx: f64, sy: f64, tx: f64, ty: f64) -> Self {
        Self {
            source: SubpixelPoint::new(sx, sy),
            target: SubpixelPoint::new(tx, ty),
        }
    }
}

/// Closed-form least-squares similarity (Procrustes with scale) taking
/// sources onto targets.
pub fn estimate_similarity(
    pairs: &[ControlPointPair],
) -> Result<SimilarityTransform, RegisterError> {
    if pairs.len() < 2 {
        return Err(RegisterError::TooFewPairs(pairs.len()));
    }
    if let Some(i) = pairs
        .iter()
        .position(|p| !(p.source.is_finite() && p.target.is_finite()))
    {
        return Err(RegisterError::NonFinitePoint(i));
    }
    let n = pairs.len() as f64;
    let (mut psx, mut psy, mut qsx, mut qsy) = (0.0, 0.0, 0.0, 0.0);
    for p in pairs {
        psx += p.source.x;
        psy += p.source.y;
        qsx += p.target.x;
        qsy += p.target.y;
    }
    let (pcx, pcy, qcx, qcy) = (psx / n, psy / n, qsx / n, qsy / n);

    let (mut dot, mut cross, mut spread, mut extent) = (0.0, 0.0, 0.0, 0.0f64);
    for p in pairs {
        let (px, py) = (p.source.x - pcx, p.source.y - pcy);
        let (qx, qy) = (p.target.x - qcx, p.target.y - qcy);
        dot += px * qx + py * qy;
        cross += px * qy - py * qx;
        spread += px * px + py * py;
        extent = extent
            .max(px.abs())
            .max(py.abs())
            .max(pcx.abs())
            .max(pcy.abs());
    }
    if spread <= (1e-12 * extent.max(1.0)).powi(2) * n {
        return Err(RegisterError::DegeneratePoints);
    }
    let a = dot / spread;
    let b = cross / spread;
    let scale = a.hypot(b);
    if scale <= 1e-12 {
        return Err(RegisterError::NonInvertible(scale));
    }
    let rotation = b.atan2(a);
    // scale·R = [[a, −b], [b, a]]
    let translation = (qcx - (a * pcx - b * pcy), qcy - (b * pcx + a * pcy));
    Ok(SimilarityTransform {
        scale,
        rotation,
        translation,
    })
}

/// Sum of squared distances between mapped sources and their targets.
pub fn residual_sum_squares(xf: &SimilarityTransform, pairs: &[ControlPointPair]) -> f64 {
    pairs
        .iter()
        .map(|p| {
            let m = xf.apply(p.source);
            (m.x - p.target.x).powi(2) + (m.y - p.target.y).powi(2)
        })
        .sum()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    #[default]
    Bilinear,
    Nearest,
}

/// Resamples `r` into an `out_width × out_height` frame: each output pixel
/// `q` reads the input at `xf⁻¹(q)`.
pub fn warp(
    r: &Raster,
    xf: &SimilarityTransform,
    out_width: usize,
    out_height: usize,
    policy: BoundaryPolicy,
    interpolation: Interpolation,
) -> Result<Raster, RegisterError> {
    if !xf.is_invertible() {
        return Err(RegisterError::NonInvertible(xf.scale));
    }
    if out_width == 0 || out_height == 0 {
        return Err(RegisterError::EmptyOutput(out_width, out_height));
    }
    let mut values = Vec::with_capacity(out_width * out_height);
    for y in 0..out_height {
        for x in 0..out_width {
            let p = xf.apply_inverse(SubpixelPoint::new(x as f64, y as f64));
            values.push(match interpolation {
                Interpolation::Bilinear => r.bilinear_sample(p, policy),
                Interpolation::Nearest => r.nearest_sample(p, policy),
            });
        }
    }
    let mut out = Raster::from_clamped(out_width, out_height, values);
    out.set_pixel_scale_unchecked(r.pixel_scale().map(|s| s / xf.scale));
    Ok(out)
}

/// Parses `sx sy tx ty` lines. Blank lines and `#` comments are skipped.
pub fn parse_control_points(text: &str) -> Result<Vec<ControlPointPair>, RegisterError> {
    let mut pairs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let nums = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>().map_err(|_| RegisterError::Parse {
                    line: idx + 1,
                    message: format!("'{tok}' is not a number"),
                })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        if nums.len() != 4 {
            return Err(RegisterError::Parse {
                line: idx + 1,
                message: format!("expected 4 values (sx sy tx ty), got {}", nums.len()),
            });
        }
        if nums.iter().any(|v| !v.is_finite()) {
            return Err(RegisterError::NonFinitePoint(pairs.len()));
        }
        pairs.push(ControlPointPair::new(nums[0], nums[1], nums[2], nums[3]));
    }
    Ok(pairs)
}

pub fn read_control_points(path: &Path) -> Result<Vec<ControlPointPair>, RegisterError> {
    parse_control_points(&std::fs::read_to_string(path)?)
}
