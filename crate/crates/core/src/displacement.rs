//! Feature displacement between two epochs by normalized cross-correlation,
//! with parabolic sub-pixel refinement and conversion to physical units.
//!
//! Offsets are B-position minus A-position: a feature at `c` in image A is
//! found at `c + offset` in image B.

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::Raster;

pub const DAYS_PER_YEAR: f64 = 365.25;

/// Peaks at or above this score are treated as exact integer matches and
/// skip sub-pixel refinement.
pub const EXACT_MATCH_SCORE: f64 = 1.0 - 1e-9;

// windows whose RMS deviation from their mean is below this count as flat
const FLAT_RMS: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum MatchError {
    #[error("template half size must be at least 2, got {0}")]
    TemplateTooSmall(usize),
    #[error("template window centered at ({x}, {y}) with half size {half} does not fit inside image A ({width}x{height})")]
    TemplateOutOfBounds {
        x: usize,
        y: usize,
        half: usize,
        width: usize,
        height: usize,
    },
    #[error("search radius must be at least 1")]
    SearchTooSmall,
    #[error("search windows (radius {max_shift}) around ({x}, {y}) do not fit inside image B ({width}x{height})")]
    SearchOutOfBounds {
        x: usize,
        y: usize,
        max_shift: usize,
        width: usize,
        height: usize,
    },
    #[error("template window has zero variance")]
    FlatTemplate,
    #[error("every candidate window in image B has zero variance")]
    AllCandidatesFlat,
    #[error("pixel scale must be positive and finite, got {0}")]
    InvalidPixelScale(f64),
    #[error("second date {date_b} must be after first date {date_a}")]
    NonIncreasingDates {
        date_a: NaiveDate,
        date_b: NaiveDate,
    },
}

/// Square template window of side `2·half_size + 1` centered in image A.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateSpec {
    pub center_x: usize,
    pub center_y: usize,
    pub half_size: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchSpec {
    pub max_shift: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub offset_px: (f64, f64),
    pub peak_score: f64,
    pub offset_m: Option<(f64, f64)>,
    pub rate_m_per_yr: Option<f64>,
    pub interval_yr: Option<f64>,
}

impl MatchResult {
    pub fn distance_px(&self) -> f64 {
        self.offset_px.0.hypot(self.offset_px.1)
    }

    pub fn distance_m(&self) -> Option<f64> {
        self.offset_m.map(|(x, y)| x.hypot(y))
    }
}

/// NCC scores over the whole integer search grid. Degenerate candidate
/// windows hold `-inf`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreGrid {
    pub max_shift: usize,
    pub scores: Vec<f64>,
}

impl ScoreGrid {
    fn side(&self) -> usize {
        2 * self.max_shift + 1
    }

    pub fn get(&self, u: isize, v: isize) -> f64 {
        let m = self.max_shift as isize;
        self.scores[((v + m) as usize) * self.side() + (u + m) as usize]
    }

    /// Integer argmax. Ties go to the smallest `(v, u)` in lexicographic order.
    pub fn peak(&self) -> Option<(isize, isize, f64)> {
        let m = self.max_shift as isize;
        let mut best: Option<(isize, isize, f64)> = None;
        for v in -m..=m {
            for u in -m..=m {
                let s = self.get(u, v);
                if s == f64::NEG_INFINITY {
                    continue;
                }
                if best.is_none_or(|(_, _, b)| s > b) {
                    best = Some((u, v, s));
                }
            }
        }
        best
    }
}

fn validate(
    a: &Raster,
    b: &Raster,
    tpl: &TemplateSpec,
    search: &SearchSpec,
) -> Result<(), MatchError> {
    let h = tpl.half_size;
    if h < 2 {
        return Err(MatchError::TemplateTooSmall(h));
    }
    let (cx, cy) = (tpl.center_x, tpl.center_y);
    if cx < h || cy < h || cx + h >= a.width() || cy + h >= a.height() {
        return Err(MatchError::TemplateOutOfBounds {
            x: cx,
            y: cy,
            half: h,
            width: a.width(),
            height: a.height(),
        });
    }
    let m = search.max_shift;
    if m < 1 {
        return Err(MatchError::SearchTooSmall);
    }
    let reach = h + m;
    if cx < reach || cy < reach || cx + reach >= b.width() || cy + reach >= b.height() {
        return Err(MatchError::SearchOutOfBounds {
            x: cx,
            y: cy,
            max_shift: m,
            width: b.width(),
            height: b.height(),
        });
    }
    Ok(())
}

/// Computes the NCC score for every integer offset in the search window.
pub fn ncc_scores(
    a: &Raster,
    b: &Raster,
    tpl: &TemplateSpec,
    search: &SearchSpec,
) -> Result<ScoreGrid, MatchError> {
    validate(a, b, tpl, search)?;
    let h = tpl.half_size;
    let side = 2 * h + 1;
    let n = (side * side) as f64;

    // zero-mean template, extracted once
    let (x0, y0) = (tpl.center_x - h, tpl.center_y - h);
    let mut centered = Vec::with_capacity(side * side);
    for y in y0..y0 + side {
        let row = &a.samples()[y * a.width() + x0..y * a.width() + x0 + side];
        centered.extend_from_slice(row);
    }
    let mean = centered.iter().sum::<f64>() / n;
    centered.iter_mut().for_each(|v| *v -= mean);
    let tpl_energy: f64 = centered.iter().map(|v| v * v).sum();
    let flat_energy = n * FLAT_RMS * FLAT_RMS;
    if tpl_energy <= flat_energy {
        return Err(MatchError::FlatTemplate);
    }

    let m = search.max_shift as isize;
    let grid_side = 2 * search.max_shift + 1;
    let bw = b.width();
    let bs = b.samples();

    let score_at = |u: isize, v: isize| -> f64 {
        let bx0 = (x0 as isize + u) as usize;
        let by0 = (y0 as isize + v) as usize;
        let mut sum = 0.0;
        for y in 0..side {
            let start = (by0 + y) * bw + bx0;
            sum += bs[start..start + side].iter().sum::<f64>();
        }
        let b_mean = sum / n;
        let (mut cross, mut energy) = (0.0, 0.0);
        for y in 0..side {
            let start = (by0 + y) * bw + bx0;
            let window = &bs[start..start + side];
            let t = &centered[y * side..(y + 1) * side];
            for (&bv, &tv) in window.iter().zip(t) {
                let d = bv - b_mean;
                cross += tv * d;
                energy += d * d;
            }
        }
        if energy <= flat_energy {
            return f64::NEG_INFINITY;
        }
        (cross / (tpl_energy * energy).sqrt()).clamp(-1.0, 1.0)
    };

    let scores: Vec<f64> = (0..grid_side * grid_side)
        .into_par_iter()
        .map(|k| {
            let v = (k / grid_side) as isize - m;
            let u = (k % grid_side) as isize - m;
            score_at(u, v)
        })
        .collect();

    Ok(ScoreGrid {
        max_shift: search.max_shift,
        scores,
    })
}

/// Vertex offset of the parabola through `(−1, before)`, `(0, peak)`,
/// `(1, after)`; 0 when the curvature is too small to trust.
fn parabolic_offset(before: f64, peak: f64, after: f64) -> f64 {
    if !(before.is_finite() && after.is_finite()) {
        return 0.0;
    }
    let denom = 2.0 * (before - 2.0 * peak + after);
    if denom.abs() < 1e-12 {
        return 0.0;
    }
    ((before - after) / denom).clamp(-0.5, 0.5)
}

/// Finds where the template from image A reappears in image B.
pub fn ncc_match(
    a: &Raster,
    b: &Raster,
    tpl: &TemplateSpec,
    search: &SearchSpec,
) -> Result<MatchResult, MatchError> {
    let grid = ncc_scores(a, b, tpl, search)?;
    let (u, v, peak) = grid.peak().ok_or(MatchError::AllCandidatesFlat)?;
    let m = search.max_shift as isize;
    let refine = peak < EXACT_MATCH_SCORE;

    let dx = if refine && u > -m && u < m {
        parabolic_offset(grid.get(u - 1, v), peak, grid.get(u + 1, v))
    } else {
        0.0
    };
    let dy = if refine && v > -m && v < m {
        parabolic_offset(grid.get(u, v - 1), peak, grid.get(u, v + 1))
    } else {
        0.0
    };

    Ok(MatchResult {
        offset_px: (u as f64 + dx, v as f64 + dy),
        peak_score: peak,
        offset_m: None,
        rate_m_per_yr: None,
        interval_yr: None,
    })
}

/// Whole days from `date_a` to `date_b` over Earth years of 365.25 days.
pub fn interval_years(date_a: NaiveDate, date_b: NaiveDate) -> Result<f64, MatchError> {
    if date_b <= date_a {
        return Err(MatchError::NonIncreasingDates { date_a, date_b });
    }
    Ok((date_b - date_a).num_days() as f64 / DAYS_PER_YEAR)
}

/// Attaches the metric offset, and the migration rate when both dates are
/// given.
pub fn to_physical(
    m: &MatchResult,
    meters_per_pixel: f64,
    dates: Option<(NaiveDate, NaiveDate)>,
) -> Result<MatchResult, MatchError> {
    if !(meters_per_pixel.is_finite() && meters_per_pixel > 0.0) {
        return Err(MatchError::InvalidPixelScale(meters_per_pixel));
    }
    let offset_m = (
        m.offset_px.0 * meters_per_pixel,
        m.offset_px.1 * meters_per_pixel,
    );
    let mut out = MatchResult {
        offset_m: Some(offset_m),
        rate_m_per_yr: None,
        interval_yr: None,
        ..*m
    };
    if let Some((date_a, date_b)) = dates {
        let years = interval_years(date_a, date_b)?;
        out.interval_yr = Some(years);
        out.rate_m_per_yr = Some(offset_m.0.hypot(offset_m.1) / years);
    }
    Ok(out)
}
