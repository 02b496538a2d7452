use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::compose::BlendMode;
use crate::displacement::{SearchSpec, TemplateSpec};
use crate::filters::EdgeOperator;
use crate::raster::BoundaryPolicy;
use crate::register::{Interpolation, SimilarityTransform};
use crate::tone::ToneParams;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// The JSON schema `report.json` conforms to.
pub const REPORT_SCHEMA: &str = include_str!("../../schema/report.schema.json");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputInfo {
    pub path: String,
    pub width: usize,
    pub height: usize,
    pub pixel_scale: Option<f64>,
    pub date: Option<NaiveDate>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Inputs {
    pub a: InputInfo,
    pub b: InputInfo,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegistrationSource {
    None,
    ControlPoints,
    PixelScale,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegistrationEcho {
    pub source: RegistrationSource,
    pub control_points: Option<String>,
    pub pairs: usize,
    /// Maps image B coordinates into image A's frame.
    pub transform: SimilarityTransform,
    pub rms_residual_px: Option<f64>,
    pub interpolation: Interpolation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub registration: RegistrationEcho,
    pub tone: ToneParams,
    pub operator: EdgeOperator,
    pub boundary: BoundaryPolicy,
    pub threshold: f64,
    pub binarize: bool,
    pub blend: BlendMode,
    pub opacity: f64,
    pub template: Option<TemplateSpec>,
    pub search: Option<SearchSpec>,
    pub measurement_pixel_scale: Option<f64>,
}

/// Contents of `report.json`. Artifact paths are relative to the report's
/// directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: String,
    pub inputs: Inputs,
    pub parameters: Parameters,
    pub offset_px: Option<(f64, f64)>,
    pub peak_score: Option<f64>,
    pub offset_m: Option<(f64, f64)>,
    pub interval_yr: Option<f64>,
    pub rate_m_per_yr: Option<f64>,
    pub artifacts: Vec<String>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// First non-finite number in the report, if any (`serde_json` would
    /// silently write it as null).
    pub fn non_finite_field(&self) -> Option<&'static str> {
        let pairs = [("offset_px", self.offset_px), ("offset_m", self.offset_m)];
        for (name, v) in pairs {
            if let Some((x, y)) = v {
                if !(x.is_finite() && y.is_finite()) {
                    return Some(name);
                }
            }
        }
        let singles = [
            ("peak_score", self.peak_score),
            ("interval_yr", self.interval_yr),
            ("rate_m_per_yr", self.rate_m_per_yr),
            (
                "parameters.registration.rms_residual_px",
                self.parameters.registration.rms_residual_px,
            ),
            (
                "parameters.measurement_pixel_scale",
                self.parameters.measurement_pixel_scale,
            ),
        ];
        for (name, v) in singles {
            if v.is_some_and(|x| !x.is_finite()) {
                return Some(name);
            }
        }
        let xf = &self.parameters.registration.transform;
        if ![xf.scale, xf.rotation, xf.translation.0, xf.translation.1]
            .iter()
            .all(|v| v.is_finite())
        {
            return Some("parameters.registration.transform");
        }
        None
    }
}
