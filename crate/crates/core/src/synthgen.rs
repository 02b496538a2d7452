//! Synthetic two-epoch barchan scenes with known displacement.
//!
//! Ground is `ground_level` plus uniform noise in `±noise_amplitude`, drawn
//! once per pixel in row-major order from a ChaCha8 stream seeded with
//! `seed`. The same noise field is used for both epochs. Each barchan is a
//! disc of radius `r` minus a disc of radius `0.8r` whose center sits `0.5r`
//! away along `orientation`; the crescent is filled at `albedo` with edges
//! anti-aliased from 4×4 supersampled coverage. Epoch B moves every barchan
//! by its displacement and leaves the ground alone.

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{Raster, RasterError, SubpixelPoint};

const SUPERSAMPLE: usize = 4;
const INNER_RADIUS_RATIO: f64 = 0.8;
const INNER_OFFSET_RATIO: f64 = 0.5;
pub const MAX_NOISE: f64 = 0.2;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("scene dimensions must be at least 1x1")]
    EmptyScene,
    #[error("noise amplitude must be in [0, 0.2], got {0}")]
    Noise(f64),
    #[error("{field} must be in [0, 1], got {value}")]
    Luminance { field: &'static str, value: f64 },
    #[error("barchan {index}: radius must be positive and finite, got {radius}")]
    Radius { index: usize, radius: f64 },
    #[error("barchan {index} leaves the frame in epoch {epoch}")]
    OutOfFrame { index: usize, epoch: char },
    #[error("{barchans} barchans but {displacements} displacements")]
    DisplacementCount {
        barchans: usize,
        displacements: usize,
    },
    #[error("displacement of barchan {0} is not finite")]
    NonFiniteDisplacement(usize),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Barchan {
    pub center: SubpixelPoint,
    pub radius: f64,
    /// Direction from the outer disc center to the cut-out disc center,
    /// radians (screen coordinates, y down).
    pub orientation: f64,
    pub albedo: f64,
}

impl Barchan {
    /// Fraction of the unit pixel at `(px, py)` covered by the crescent when
    /// the barchan sits at `center`.
    fn coverage(&self, center: SubpixelPoint, px: usize, py: usize) -> f64 {
        let r = self.radius;
        let (sin, cos) = self.orientation.sin_cos();
        let inner = (INNER_OFFSET_RATIO * r * cos, INNER_OFFSET_RATIO * r * sin);
        let r_outer2 = r * r;
        let r_inner2 = (INNER_RADIUS_RATIO * r).powi(2);
        // pixel-relative offsets keep integer shifts exact
        let base_x = px as f64 - center.x;
        let base_y = py as f64 - center.y;
        let step = 1.0 / SUPERSAMPLE as f64;
        let mut hits = 0usize;
        for j in 0..SUPERSAMPLE {
            let dy = base_y + (j as f64 + 0.5) * step - 0.5;
            for i in 0..SUPERSAMPLE {
                let dx = base_x + (i as f64 + 0.5) * step - 0.5;
                let in_outer = dx * dx + dy * dy <= r_outer2;
                let (ix, iy) = (dx - inner.0, dy - inner.1);
                let in_inner = ix * ix + iy * iy <= r_inner2;
                if in_outer && !in_inner {
                    hits += 1;
                }
            }
        }
        hits as f64 / (SUPERSAMPLE * SUPERSAMPLE) as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneParams {
    pub width: usize,
    pub height: usize,
    pub seed: u64,
    pub noise_amplitude: f64,
    pub ground_level: f64,
    pub barchans: Vec<Barchan>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneTruth {
    /// One `(dx, dy)` per barchan, in pixels.
    pub displacement_px: Vec<(f64, f64)>,
    pub pixel_scale: f64,
    pub date_a: NaiveDate,
    pub date_b: NaiveDate,
}

impl SceneParams {
    /// One barchan at the frame center on mid-gray ground.
    pub fn single_barchan(width: usize, height: usize, radius: f64, seed: u64) -> Self {
        Self {
            width,
            height,
            seed,
            noise_amplitude: 0.02,
            ground_level: 0.6,
            barchans: vec![Barchan {
                center: SubpixelPoint::new(width as f64 / 2.0, height as f64 / 2.0),
                radius,
                orientation: 0.0,
                albedo: 0.25,
            }],
        }
    }

    fn validate(&self, truth: &SceneTruth) -> Result<(), SynthError> {
        if self.width == 0 || self.height == 0 {
            return Err(SynthError::EmptyScene);
        }
        if !(0.0..=MAX_NOISE).contains(&self.noise_amplitude) {
            return Err(SynthError::Noise(self.noise_amplitude));
        }
        if !(0.0..=1.0).contains(&self.ground_level) {
            return Err(SynthError::Luminance {
                field: "ground_level",
                value: self.ground_level,
            });
        }
        if truth.displacement_px.len() != self.barchans.len() {
            return Err(SynthError::DisplacementCount {
                barchans: self.barchans.len(),
                displacements: truth.displacement_px.len(),
            });
        }
        for (index, (b, d)) in self.barchans.iter().zip(&truth.displacement_px).enumerate() {
            if !(b.radius.is_finite() && b.radius > 0.0) {
                return Err(SynthError::Radius {
                    index,
                    radius: b.radius,
                });
            }
            if !(0.0..=1.0).contains(&b.albedo) {
                return Err(SynthError::Luminance {
                    field: "albedo",
                    value: b.albedo,
                });
            }
            if !(d.0.is_finite() && d.1.is_finite()) {
                return Err(SynthError::NonFiniteDisplacement(index));
            }
            let moved = SubpixelPoint::new(b.center.x + d.0, b.center.y + d.1);
            for (epoch, c) in [('A', b.center), ('B', moved)] {
                let inside = c.is_finite()
                    && c.x - b.radius >= 0.0
                    && c.y - b.radius >= 0.0
                    && c.x + b.radius <= self.width as f64 - 1.0
                    && c.y + b.radius <= self.height as f64 - 1.0;
                if !inside {
                    return Err(SynthError::OutOfFrame { index, epoch });
                }
            }
        }
        Ok(())
    }
}

fn ground_field(p: &SceneParams) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    (0..p.width * p.height)
        .map(|_| {
            let n: f64 = rng.random_range(-1.0..=1.0);
            (p.ground_level + p.noise_amplitude * n).clamp(0.0, 1.0)
        })
        .collect()
}

fn render(p: &SceneParams, ground: &[f64], centers: &[SubpixelPoint]) -> Vec<f64> {
    let mut img = ground.to_vec();
    for (b, &c) in p.barchans.iter().zip(centers) {
        let reach = b.radius + 1.0;
        let x_lo = (c.x - reach).floor().max(0.0) as usize;
        let y_lo = (c.y - reach).floor().max(0.0) as usize;
        let x_hi = ((c.x + reach).ceil() as usize).min(p.width - 1);
        let y_hi = ((c.y + reach).ceil() as usize).min(p.height - 1);
        for y in y_lo..=y_hi {
            for x in x_lo..=x_hi {
                let cov = b.coverage(c, x, y);
                if cov > 0.0 {
                    let px = &mut img[y * p.width + x];
                    *px = (1.0 - cov) * *px + cov * b.albedo;
                }
            }
        }
    }
    img
}

/// Renders epoch A and epoch B of the scene. Both rasters carry
/// `truth.pixel_scale`.
pub fn generate_pair(
    p: &SceneParams,
    truth: &SceneTruth,
) -> Result<(Raster, Raster, SceneTruth), SynthError> {
    p.validate(truth)?;
    let ground = ground_field(p);
    let centers_a: Vec<_> = p.barchans.iter().map(|b| b.center).collect();
    let centers_b: Vec<_> = p
        .barchans
        .iter()
        .zip(&truth.displacement_px)
        .map(|(b, d)| SubpixelPoint::new(b.center.x + d.0, b.center.y + d.1))
        .collect();
    let scale = Some(truth.pixel_scale);
    let a =
        Raster::new(p.width, p.height, render(p, &ground, &centers_a))?.with_pixel_scale(scale)?;
    let b =
        Raster::new(p.width, p.height, render(p, &ground, &centers_b))?.with_pixel_scale(scale)?;
    Ok((a, b, truth.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn truth(d: (f64, f64)) -> SceneTruth {
        SceneTruth {
            displacement_px: vec![d],
            pixel_scale: 0.25,
            date_a: "1999-03-11".parse().unwrap(),
            date_b: "2007-10-13".parse().unwrap(),
        }
    }

    #[test]
    fn zero_displacement_gives_identical_epochs() {
        let p = SceneParams::single_barchan(96, 96, 20.0, 7);
        let (a, b, _) = generate_pair(&p, &truth((0.0, 0.0))).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn deterministic_per_seed() {
        let p = SceneParams::single_barchan(80, 64, 15.0, 99);
        let t = truth((3.0, -2.0));
        let first = generate_pair(&p, &t).unwrap();
        let second = generate_pair(&p, &t).unwrap();
        assert_eq!(first, second);
        let other = SceneParams { seed: 100, ..p };
        assert_ne!(generate_pair(&other, &t).unwrap().0, first.0);
    }

    #[test]
    fn ground_is_static_away_from_dunes() {
        let p = SceneParams::single_barchan(128, 128, 18.0, 3);
        let d = (9.0, -4.0);
        let (a, b, _) = generate_pair(&p, &truth(d)).unwrap();
        let c = p.barchans[0].center;
        let r = p.barchans[0].radius;
        let mut checked = 0;
        for y in 0..128 {
            for x in 0..128 {
                let (fx, fy) = (x as f64, y as f64);
                let far_a = (fx - c.x).hypot(fy - c.y) > 2.0 * r;
                let far_b = (fx - c.x - d.0).hypot(fy - c.y - d.1) > 2.0 * r;
                if far_a && far_b {
                    assert_eq!(a.get(x, y), b.get(x, y));
                    checked += 1;
                }
            }
        }
        assert!(checked > 5000);
    }

    #[test]
    fn crescent_is_dark_with_hollow() {
        let p = SceneParams::single_barchan(100, 100, 30.0, 1);
        let (a, _, _) = generate_pair(&p, &truth((0.0, 0.0))).unwrap();
        // opposite the cut-out: inside the crescent body
        assert_eq!(a.get(50 - 25, 50), 0.25);
        // inside the cut-out disc: ground
        assert!((a.get(50 + 15, 50) - 0.6).abs() <= 0.02 + 1e-12);
        // partial coverage on the rim lies between albedo and ground
        let rim = (0..100)
            .map(|x| a.get(x, 50))
            .filter(|&v| v > 0.26 && v < 0.57)
            .count();
        assert!(rim >= 1);
        assert!(a.samples().iter().all(|s| (0.0..=1.0).contains(s)));
    }

    #[test]
    fn integer_shift_moves_crescent_exactly() {
        let p = SceneParams {
            noise_amplitude: 0.0,
            ..SceneParams::single_barchan(120, 120, 25.0, 5)
        };
        let (a, b, _) = generate_pair(&p, &truth((7.0, -3.0))).unwrap();
        for y in 10..100 {
            for x in 10..100 {
                assert_eq!(a.get(x, y), b.get(x + 7, y - 3));
            }
        }
    }

    #[test]
    fn rejects_bad_scenes() {
        let p = SceneParams::single_barchan(64, 64, 20.0, 0);
        assert_eq!(
            generate_pair(&p, &truth((20.0, 0.0))),
            Err(SynthError::OutOfFrame {
                index: 0,
                epoch: 'B'
            })
        );
        let big = SceneParams::single_barchan(64, 64, 40.0, 0);
        assert!(matches!(
            generate_pair(&big, &truth((0.0, 0.0))),
            Err(SynthError::OutOfFrame { epoch: 'A', .. })
        ));
        let noisy = SceneParams {
            noise_amplitude: 0.3,
            ..p.clone()
        };
        assert_eq!(
            generate_pair(&noisy, &truth((0.0, 0.0))),
            Err(SynthError::Noise(0.3))
        );
        let t = SceneTruth {
            displacement_px: vec![],
            ..truth((0.0, 0.0))
        };
        assert!(matches!(
            generate_pair(&p, &t),
            Err(SynthError::DisplacementCount { .. })
        ));
        assert!(matches!(
            generate_pair(&p, &truth((f64::NAN, 0.0))),
            Err(SynthError::NonFiniteDisplacement(0))
        ));
    }
}
