//! Convolution engine and the edge-operator family.
//!
//! Convolution here is the correlation form used by most image tools:
//! `out(x, y) = Σ w(i, j) · in(x + i − ax, y + j − ay)` with `(ax, ay)` the
//! kernel anchor. Kernels are not flipped.
//!
//! Edge magnitudes are divided by a fixed per-operator gain rather than the
//! image's own maximum, so the same threshold means the same thing on two
//! different images.

use std::f64::consts::SQRT_2;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{BoundaryPolicy, Field, Raster};

pub const MAX_KERNEL_DIM: usize = 15;
pub const MAX_BLUR_RADIUS: f64 = 50.0;

#[derive(Debug, Error, PartialEq)]
pub enum FilterError {
    #[error("kernel size {width}x{height} not allowed (odd sizes 1..=15, or 2x2)")]
    InvalidKernelSize { width: usize, height: usize },
    #[error("kernel of size {width}x{height} needs {expected} weights, got {actual}")]
    KernelLength {
        width: usize,
        height: usize,
        expected: usize,
        actual: usize,
    },
    #[error("kernel weight {0} is not finite")]
    NonFiniteWeight(f64),
    #[error(
        "difference of Gaussians needs 0 < small radius < large radius, got {small} and {large}"
    )]
    InvalidDogRadii { small: f64, large: f64 },
    #[error("blur radius must be in (0, 50], got {0}")]
    InvalidBlurRadius(f64),
    #[error("threshold must be in [0, 1], got {0}")]
    ThresholdOutOfRange(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    width: usize,
    height: usize,
    weights: Vec<f64>,
    anchor: (usize, usize),
    // (column, row) factors when the kernel is their outer product
    factors: Option<(Vec<f64>, Vec<f64>)>,
}

impl Kernel {
    /// Builds a kernel from row-major weights. Odd kernels are anchored at
    /// their center, 2×2 kernels at the top-left.
    pub fn new(width: usize, height: usize, weights: Vec<f64>) -> Result<Self, FilterError> {
        let odd_ok = |d: usize| d % 2 == 1 && d <= MAX_KERNEL_DIM;
        let two_by_two = width == 2 && height == 2;
        if !(two_by_two || (odd_ok(width) && odd_ok(height))) {
            return Err(FilterError::InvalidKernelSize { width, height });
        }
        if weights.len() != width * height {
            return Err(FilterError::KernelLength {
                width,
                height,
                expected: width * height,
                actual: weights.len(),
            });
        }
        if let Some(&w) = weights.iter().find(|w| !w.is_finite()) {
            return Err(FilterError::NonFiniteWeight(w));
        }
        let anchor = if two_by_two {
            (0, 0)
        } else {
            (width / 2, height / 2)
        };
        Ok(Self {
            width,
            height,
            weights,
            anchor,
            factors: None,
        })
    }

    /// Outer product `column ⊗ row`. Convolution with such a kernel runs as
    /// two 1-D passes.
    pub fn separable(column: Vec<f64>, row: Vec<f64>) -> Result<Self, FilterError> {
        let weights = column
            .iter()
            .flat_map(|&c| row.iter().map(move |&r| c * r))
            .collect();
        let mut k = Self::new(row.len(), column.len(), weights)?;
        if k.width == 2 {
            // 2x2 anchors top-left, which the two-pass path does not model
            return Ok(k);
        }
        k.factors = Some((column, row));
        Ok(k)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn anchor(&self) -> (usize, usize) {
        self.anchor
    }

    pub fn is_separable(&self) -> bool {
        self.factors.is_some()
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[j * self.width + i]
    }

    pub fn sobel_x() -> Self {
        Self::separable(vec![1.0, 2.0, 1.0], vec![-1.0, 0.0, 1.0]).unwrap()
    }

    pub fn sobel_y() -> Self {
        Self::separable(vec![-1.0, 0.0, 1.0], vec![1.0, 2.0, 1.0]).unwrap()
    }

    pub fn prewitt_x() -> Self {
        Self::separable(vec![1.0, 1.0, 1.0], vec![-1.0, 0.0, 1.0]).unwrap()
    }

    pub fn prewitt_y() -> Self {
        Self::separable(vec![-1.0, 0.0, 1.0], vec![1.0, 1.0, 1.0]).unwrap()
    }

    pub fn roberts_pos() -> Self {
        Self::new(2, 2, vec![1.0, 0.0, 0.0, -1.0]).unwrap()
    }

    pub fn roberts_neg() -> Self {
        Self::new(2, 2, vec![0.0, 1.0, -1.0, 0.0]).unwrap()
    }

    pub fn laplace4() -> Self {
        Self::new(3, 3, vec![0.0, 1.0, 0.0, 1.0, -4.0, 1.0, 0.0, 1.0, 0.0]).unwrap()
    }
}

/// Convolves `r` with `k`, reading outside pixels through `policy`.
///
/// Separable kernels take a two-pass route; everything else uses a direct
/// sum with a bounds-check-free interior.
pub fn convolve(r: &Raster, k: &Kernel, policy: BoundaryPolicy) -> Field {
    match &k.factors {
        Some((column, row)) => convolve_separable(r, column, row, k.anchor, policy),
        None => convolve_general(r, k, policy),
    }
}

fn convolve_general(r: &Raster, k: &Kernel, policy: BoundaryPolicy) -> Field {
    let (w, h) = r.dimensions();
    let (ax, ay) = k.anchor;
    let (kw, kh) = (k.width, k.height);
    let src = r.samples();
    let mut out = Field::zeros(w, h);

    // interior: every tap lands in bounds
    let x_lo = ax;
    let y_lo = ay;
    let x_hi = w.saturating_sub(kw - 1 - ax);
    let y_hi = h.saturating_sub(kh - 1 - ay);

    for y in 0..h {
        let row_interior = y >= y_lo && y < y_hi;
        for x in 0..w {
            let mut acc = 0.0;
            if row_interior && x >= x_lo && x < x_hi {
                for j in 0..kh {
                    let base = (y + j - ay) * w + x - ax;
                    let taps = &k.weights[j * kw..(j + 1) * kw];
                    for (i, &wt) in taps.iter().enumerate() {
                        acc += wt * src[base + i];
                    }
                }
            } else {
                for j in 0..kh {
                    let sy = y as isize + j as isize - ay as isize;
                    for i in 0..kw {
                        let sx = x as isize + i as isize - ax as isize;
                        acc += k.weight(i, j) * r.sample(sx, sy, policy);
                    }
                }
            }
            out.values[y * w + x] = acc;
        }
    }
    out
}

fn convolve_separable(
    r: &Raster,
    column: &[f64],
    row: &[f64],
    anchor: (usize, usize),
    policy: BoundaryPolicy,
) -> Field {
    let (w, h) = r.dimensions();
    let (ax, ay) = (anchor.0 as isize, anchor.1 as isize);

    let mut horizontal = Field::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, &wt) in row.iter().enumerate() {
                acc += wt * r.sample(x as isize + i as isize - ax, y as isize, policy);
            }
            horizontal.values[y * w + x] = acc;
        }
    }

    let mut out = Field::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (j, &wt) in column.iter().enumerate() {
                acc += wt * horizontal.sample(x as isize, y as isize + j as isize - ay, policy);
            }
            out.values[y * w + x] = acc;
        }
    }
    out
}

/// Named edge operators.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EdgeOperator {
    Sobel,
    Prewitt,
    Roberts,
    #[serde(rename = "laplace")]
    Laplace4,
    #[serde(rename = "dog")]
    DoG {
        radius_small: f64,
        radius_large: f64,
    },
}

impl EdgeOperator {
    /// Largest response the operator can produce on `[0, 1]` input; used to
    /// normalize magnitudes.
    pub fn gain(&self) -> f64 {
        match self {
            EdgeOperator::Sobel => 4.0 * SQRT_2,
            EdgeOperator::Prewitt => 3.0 * SQRT_2,
            EdgeOperator::Roberts => SQRT_2,
            EdgeOperator::Laplace4 => 4.0,
            EdgeOperator::DoG { .. } => 1.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EdgeOperator::Sobel => "sobel",
            EdgeOperator::Prewitt => "prewitt",
            EdgeOperator::Roberts => "roberts",
            EdgeOperator::Laplace4 => "laplace",
            EdgeOperator::DoG { .. } => "dog",
        }
    }

    /// The (x, y) kernel pair for gradient operators.
    pub fn gradient_kernels(&self) -> Option<(Kernel, Kernel)> {
        match self {
            EdgeOperator::Sobel => Some((Kernel::sobel_x(), Kernel::sobel_y())),
            EdgeOperator::Prewitt => Some((Kernel::prewitt_x(), Kernel::prewitt_y())),
            EdgeOperator::Roberts => Some((Kernel::roberts_pos(), Kernel::roberts_neg())),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), FilterError> {
        if let EdgeOperator::DoG {
            radius_small,
            radius_large,
        } = *self
        {
            if !(radius_small > 0.0 && radius_small < radius_large) || !radius_large.is_finite() {
                return Err(FilterError::InvalidDogRadii {
                    small: radius_small,
                    large: radius_large,
                });
            }
            validate_blur_radius(radius_large)?;
        }
        Ok(())
    }
}

impl fmt::Display for EdgeOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EdgeOperator::DoG {
                radius_small,
                radius_large,
            } => write!(f, "dog({radius_small}, {radius_large})"),
            other => f.write_str(other.name()),
        }
    }
}

/// Normalized edge magnitudes together with how they were produced.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeMap {
    pub magnitude: Raster,
    pub operator: EdgeOperator,
    pub threshold_applied: Option<f64>,
}

/// Runs `op` over `r` and returns magnitudes normalized into `[0, 1]`.
pub fn edge_response(
    r: &Raster,
    op: EdgeOperator,
    policy: BoundaryPolicy,
) -> Result<EdgeMap, FilterError> {
    op.validate()?;
    let (w, h) = r.dimensions();
    let mut magnitude = match op {
        EdgeOperator::Sobel | EdgeOperator::Prewitt | EdgeOperator::Roberts => {
            let (kx, ky) = op.gradient_kernels().expect("gradient operator");
            let gx = convolve(r, &kx, policy);
            let gy = convolve(r, &ky, policy);
            let gain = op.gain();
            let values = gx
                .values
                .iter()
                .zip(&gy.values)
                .map(|(&a, &b)| a.hypot(b) / gain)
                .collect();
            Raster::from_clamped(w, h, values)
        }
        EdgeOperator::Laplace4 => {
            let resp = convolve(r, &Kernel::laplace4(), policy);
            let gain = op.gain();
            Raster::from_clamped(w, h, resp.values.iter().map(|v| v.abs() / gain).collect())
        }
        EdgeOperator::DoG {
            radius_small,
            radius_large,
        } => {
            let small = gaussian_blur(r, radius_small, policy)?;
            let large = gaussian_blur(r, radius_large, policy)?;
            let values = small
                .samples()
                .iter()
                .zip(large.samples())
                .map(|(a, b)| (a - b).abs())
                .collect();
            Raster::from_clamped(w, h, values)
        }
    };
    magnitude.set_pixel_scale_unchecked(r.pixel_scale());
    Ok(EdgeMap {
        magnitude,
        operator: op,
        threshold_applied: None,
    })
}

fn validate_blur_radius(radius: f64) -> Result<(), FilterError> {
    if radius > 0.0 && radius <= MAX_BLUR_RADIUS {
        Ok(())
    } else {
        Err(FilterError::InvalidBlurRadius(radius))
    }
}

/// Discrete Gaussian with σ = radius / 3, truncated at ±ceil(3σ) and
/// normalized to unit sum.
pub fn gaussian_weights(radius: f64) -> Result<Vec<f64>, FilterError> {
    validate_blur_radius(radius)?;
    let sigma = radius / 3.0;
    let half = (3.0 * sigma).ceil() as isize;
    let raw: Vec<f64> = (-half..=half)
        .map(|k| {
            let t = k as f64 / sigma;
            (-0.5 * t * t).exp()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|v| v / total).collect())
}

/// One 1-D pass of a unit-sum, odd-length kernel along x or y, written as
/// `center + Σ w·(neighbor − center)` so flat regions come out bit-exact.
fn unit_sum_pass(
    src: &[f64],
    width: usize,
    height: usize,
    weights: &[f64],
    vertical: bool,
    policy: BoundaryPolicy,
) -> Vec<f64> {
    let half = (weights.len() / 2) as isize;
    let field = Field {
        width,
        height,
        values: src.to_vec(),
    };
    let mut out = vec![0.0; src.len()];
    for y in 0..height {
        for x in 0..width {
            let center = src[y * width + x];
            let mut acc = 0.0;
            for (k, &wt) in weights.iter().enumerate() {
                let d = k as isize - half;
                let v = if vertical {
                    field.sample(x as isize, y as isize + d, policy)
                } else {
                    field.sample(x as isize + d, y as isize, policy)
                };
                acc += wt * (v - center);
            }
            out[y * width + x] = center + acc;
        }
    }
    out
}

/// Separable Gaussian blur; output clamped to `[0, 1]`.
pub fn gaussian_blur(
    r: &Raster,
    radius: f64,
    policy: BoundaryPolicy,
) -> Result<Raster, FilterError> {
    let weights = gaussian_weights(radius)?;
    let (w, h) = r.dimensions();
    // wide radii exceed the Kernel size cap, so the passes run directly
    let horizontal = unit_sum_pass(r.samples(), w, h, &weights, false, policy);
    let both = unit_sum_pass(&horizontal, w, h, &weights, true, policy);
    let mut blurred = Raster::from_clamped(w, h, both);
    blurred.set_pixel_scale_unchecked(r.pixel_scale());
    Ok(blurred)
}

/// Zeroes magnitudes below `t`. With `binarize`, survivors become 1.
pub fn threshold_edges(e: &EdgeMap, t: f64, binarize: bool) -> Result<EdgeMap, FilterError> {
    if !(0.0..=1.0).contains(&t) {
        return Err(FilterError::ThresholdOutOfRange(t));
    }
    let magnitude = e.magnitude.map(|s| {
        if s < t {
            0.0
        } else if binarize {
            1.0
        } else {
            s
        }
    });
    Ok(EdgeMap {
        magnitude,
        operator: e.operator,
        threshold_applied: Some(t),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(width: usize, height: usize, at: usize) -> Raster {
        Raster::from_fn(width, height, |x, _| if x >= at { 1.0 } else { 0.0 }).unwrap()
    }

    #[test]
    fn kernel_size_rules() {
        assert!(Kernel::new(1, 1, vec![1.0]).is_ok());
        assert!(Kernel::new(15, 15, vec![0.0; 225]).is_ok());
        assert_eq!(
            Kernel::new(4, 3, vec![0.0; 12]),
            Err(FilterError::InvalidKernelSize {
                width: 4,
                height: 3
            })
        );
        assert!(matches!(
            Kernel::new(17, 1, vec![0.0; 17]),
            Err(FilterError::InvalidKernelSize { .. })
        ));
        assert!(matches!(
            Kernel::new(2, 1, vec![0.0; 2]),
            Err(FilterError::InvalidKernelSize { .. })
        ));
        assert!(matches!(
            Kernel::new(3, 3, vec![0.0; 8]),
            Err(FilterError::KernelLength { .. })
        ));
        assert!(matches!(
            Kernel::new(1, 1, vec![f64::NAN]),
            Err(FilterError::NonFiniteWeight(_))
        ));
        assert_eq!(Kernel::roberts_pos().anchor(), (0, 0));
        assert_eq!(Kernel::laplace4().anchor(), (1, 1));
    }

    #[test]
    fn identity_kernel_is_identity() {
        let r = Raster::from_fn(5, 4, |x, y| ((x * 7 + y * 3) % 11) as f64 / 10.0).unwrap();
        let k = Kernel::new(1, 1, vec![1.0]).unwrap();
        for policy in BoundaryPolicy::ALL {
            assert_eq!(convolve(&r, &k, policy).values, r.samples());
        }
    }

    #[test]
    fn zero_sum_kernel_on_constant_is_zero() {
        let r = Raster::filled(6, 6, 0.42).unwrap();
        for k in [
            Kernel::sobel_x(),
            Kernel::prewitt_y(),
            Kernel::laplace4(),
            Kernel::roberts_neg(),
        ] {
            let out = convolve(&r, &k, BoundaryPolicy::Clamp);
            assert!(out.values.iter().all(|&v| v.abs() < 1e-15));
        }
    }

    #[test]
    fn sobel_x_on_vertical_step() {
        // columns 0,0,1,1: the pixel just left of the step sees 1+2+1
        let r = Raster::new(4, 3, [0.0, 0.0, 1.0, 1.0].repeat(3)).unwrap();
        let gx = convolve(&r, &Kernel::sobel_x(), BoundaryPolicy::Clamp);
        assert_eq!(gx.get(1, 1), 4.0);
        let gy = convolve(&r, &Kernel::sobel_y(), BoundaryPolicy::Clamp);
        assert_eq!(gy.get(1, 1), 0.0);
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn sobel_step_magnitude() {
        let r = step(8, 8, 4);
        let e = edge_response(&r, EdgeOperator::Sobel, BoundaryPolicy::Clamp).unwrap();
        for y in 1..7 {
            assert!((e.magnitude.get(3, y) - 0.70711).abs() < 1e-5);
            assert!((e.magnitude.get(4, y) - 0.70711).abs() < 1e-5);
            assert_eq!(e.magnitude.get(1, y), 0.0);
        }
        assert_eq!(e.threshold_applied, None);
    }

    #[test]
    fn roberts_output_lands_on_anchor() {
        let r = step(4, 3, 2);
        let e = edge_response(&r, EdgeOperator::Roberts, BoundaryPolicy::Clamp).unwrap();
        // anchor (1, y) pairs with (2, y+1) across the step
        assert!((e.magnitude.get(1, 0) - 1.0).abs() < 1e-12);
        assert_eq!(e.magnitude.get(2, 0), 0.0);
        assert_eq!(e.magnitude.get(0, 0), 0.0);
    }

    #[test]
    fn flat_field_has_no_edges() {
        let r = Raster::filled(9, 7, 0.3).unwrap();
        let ops = [
            EdgeOperator::Sobel,
            EdgeOperator::Prewitt,
            EdgeOperator::Roberts,
            EdgeOperator::Laplace4,
            EdgeOperator::DoG {
                radius_small: 1.0,
                radius_large: 3.0,
            },
        ];
        for op in ops {
            let e = edge_response(&r, op, BoundaryPolicy::Clamp).unwrap();
            assert!(e.magnitude.samples().iter().all(|&s| s == 0.0), "{op}");
        }
    }

    #[test]
    fn dog_radius_validation() {
        let r = Raster::filled(4, 4, 0.5).unwrap();
        for (small, large) in [(0.0, 2.0), (3.0, 2.0), (2.0, 2.0), (1.0, 60.0), (-1.0, 1.0)] {
            let op = EdgeOperator::DoG {
                radius_small: small,
                radius_large: large,
            };
            assert!(edge_response(&r, op, BoundaryPolicy::Clamp).is_err());
        }
    }

    #[test]
    fn blur_radius_limits() {
        let r = Raster::filled(4, 4, 0.5).unwrap();
        assert!(gaussian_blur(&r, 0.0, BoundaryPolicy::Clamp).is_err());
        assert!(gaussian_blur(&r, -1.0, BoundaryPolicy::Clamp).is_err());
        assert!(gaussian_blur(&r, 50.5, BoundaryPolicy::Clamp).is_err());
        let out = gaussian_blur(&r, 50.0, BoundaryPolicy::Clamp).unwrap();
        assert!(out.samples().iter().all(|&s| (s - 0.5).abs() < 1e-12));
    }

    #[test]
    fn blur_of_delta_is_center_weight() {
        // σ = 1, taps −3..=3: w0 = 1 / Σ exp(−k²/2); the 2-D center is w0²
        let oracle_w0 = 1.0
            / (-3i32..=3)
                .map(|k| (-(k * k) as f64 / 2.0).exp())
                .sum::<f64>();
        assert!((oracle_w0 - 0.3990502796524549).abs() < 1e-15);
        let r = Raster::from_fn(31, 31, |x, y| if x == 15 && y == 15 { 1.0 } else { 0.0 }).unwrap();
        let out = gaussian_blur(&r, 3.0, BoundaryPolicy::Clamp).unwrap();
        assert!((out.get(15, 15) - oracle_w0 * oracle_w0).abs() < 1e-15);
        let total: f64 = out.samples().iter().sum();
        assert!((total - 1.0).abs() < 1e-6);
        assert!((out.get(13, 15) - out.get(17, 15)).abs() < 1e-15);
        assert!((out.get(15, 12) - out.get(12, 15)).abs() < 1e-15);
    }

    #[test]
    fn threshold_examples() {
        let m = Raster::new(3, 1, vec![0.1, 0.3, 0.7]).unwrap();
        let e = EdgeMap {
            magnitude: m.clone(),
            operator: EdgeOperator::Sobel,
            threshold_applied: None,
        };
        let t0 = threshold_edges(&e, 0.0, false).unwrap();
        assert_eq!(t0.magnitude, m);
        assert_eq!(t0.threshold_applied, Some(0.0));
        let b = threshold_edges(&e, 0.3, true).unwrap();
        assert_eq!(b.magnitude.samples(), &[0.0, 1.0, 1.0]);
        let k = threshold_edges(&e, 0.3, false).unwrap();
        assert_eq!(k.magnitude.samples(), &[0.0, 0.3, 0.7]);

        let capped = EdgeMap {
            magnitude: Raster::new(2, 1, vec![0.9, 0.2]).unwrap(),
            ..e.clone()
        };
        let t1 = threshold_edges(&capped, 1.0, false).unwrap();
        assert!(t1.magnitude.samples().iter().all(|&s| s == 0.0));

        assert_eq!(
            threshold_edges(&e, 1.5, false),
            Err(FilterError::ThresholdOutOfRange(1.5))
        );
        assert!(threshold_edges(&e, -0.1, true).is_err());
    }

    #[test]
    fn operator_serde_shape() {
        let json = serde_json::to_string(&EdgeOperator::DoG {
            radius_small: 1.0,
            radius_large: 3.0,
        })
        .unwrap();
        assert_eq!(
            json,
            r#"{"kind":"dog","radius_small":1.0,"radius_large":3.0}"#
        );
        let back: EdgeOperator = serde_json::from_str(r#"{"kind":"laplace"}"#).unwrap();
        assert_eq!(back, EdgeOperator::Laplace4);
    }
}
