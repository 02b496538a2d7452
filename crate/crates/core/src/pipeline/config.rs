use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::compose::BlendMode;
use crate::displacement::{SearchSpec, TemplateSpec};
use crate::filters::EdgeOperator;
use crate::raster::BoundaryPolicy;
use crate::register::Interpolation;
use crate::tone::ToneParams;

use super::io::ImageFormat;
use super::PipelineError;

/// Default edge threshold: low, so faint ground texture survives next to
/// the dune outline.
pub const DEFAULT_THRESHOLD: f64 = 0.1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorKind {
    #[default]
    Sobel,
    Prewitt,
    Roberts,
    Laplace,
    Dog,
}

impl std::str::FromStr for OperatorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sobel" => Ok(OperatorKind::Sobel),
            "prewitt" => Ok(OperatorKind::Prewitt),
            "roberts" => Ok(OperatorKind::Roberts),
            "laplace" => Ok(OperatorKind::Laplace),
            "dog" => Ok(OperatorKind::Dog),
            other => Err(format!(
                "unknown operator '{other}' (expected sobel|prewitt|roberts|laplace|dog)"
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Png,
    Pgm,
}

impl From<OutputFormat> for ImageFormat {
    fn from(f: OutputFormat) -> Self {
        match f {
            OutputFormat::Png => ImageFormat::Png,
            OutputFormat::Pgm => ImageFormat::Pgm,
        }
    }
}

/// Everything `run` needs. JSON keys match the field names; every CLI flag
/// overrides the key of the same name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub input_a: Option<PathBuf>,
    pub input_b: Option<PathBuf>,
    pub pixel_scale_a: Option<f64>,
    pub pixel_scale_b: Option<f64>,
    pub date_a: Option<NaiveDate>,
    pub date_b: Option<NaiveDate>,
    pub tone: ToneParams,
    pub operator: OperatorKind,
    pub dog_radius_small: f64,
    pub dog_radius_large: f64,
    pub boundary: BoundaryPolicy,
    pub threshold: f64,
    pub binarize: bool,
    pub blend: BlendMode,
    pub opacity: f64,
    pub interpolation: Interpolation,
    pub control_points: Option<PathBuf>,
    pub template: Option<TemplateSpec>,
    pub search: Option<SearchSpec>,
    pub output_dir: Option<PathBuf>,
    pub image_format: OutputFormat,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            input_a: None,
            input_b: None,
            pixel_scale_a: None,
            pixel_scale_b: None,
            date_a: None,
            date_b: None,
            tone: ToneParams::default(),
            operator: OperatorKind::Sobel,
            dog_radius_small: 1.0,
            dog_radius_large: 3.0,
            boundary: BoundaryPolicy::Clamp,
            threshold: DEFAULT_THRESHOLD,
            binarize: false,
            blend: BlendMode::Multiply,
            opacity: 1.0,
            interpolation: Interpolation::Bilinear,
            control_points: None,
            template: None,
            search: None,
            output_dir: None,
            image_format: OutputFormat::Png,
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        serde_json::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    /// Reads a JSON config. Relative paths inside it are taken relative to
    /// the config file's directory.
    pub fn from_file(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        if let Some(base) = path.parent() {
            cfg.rebase(base);
        }
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(inner) = p.as_mut() {
                if inner.is_relative() {
                    *inner = base.join(&*inner);
                }
            }
        };
        fix(&mut self.input_a);
        fix(&mut self.input_b);
        fix(&mut self.control_points);
        fix(&mut self.output_dir);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn edge_operator(&self) -> EdgeOperator {
        match self.operator {
            OperatorKind::Sobel => EdgeOperator::Sobel,
            OperatorKind::Prewitt => EdgeOperator::Prewitt,
            OperatorKind::Roberts => EdgeOperator::Roberts,
            OperatorKind::Laplace => EdgeOperator::Laplace4,
            OperatorKind::Dog => EdgeOperator::DoG {
                radius_small: self.dog_radius_small,
                radius_large: self.dog_radius_large,
            },
        }
    }

    /// Checks everything that can be checked without touching the filesystem.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let cfg = |m: String| Err(PipelineError::Config(m));
        if self.input_a.is_none() || self.input_b.is_none() {
            return cfg("both input_a and input_b are required".into());
        }
        if self.output_dir.is_none() {
            return cfg("output_dir is required".into());
        }
        for (name, v) in [
            ("pixel_scale_a", self.pixel_scale_a),
            ("pixel_scale_b", self.pixel_scale_b),
        ] {
            if let Some(s) = v {
                if !(s.is_finite() && s > 0.0) {
                    return cfg(format!("{name} must be positive, got {s}"));
                }
            }
        }
        match (self.date_a, self.date_b) {
            (Some(a), Some(b)) if b <= a => {
                return cfg(format!("date_b ({b}) must be after date_a ({a})"))
            }
            (Some(_), None) | (None, Some(_)) => {
                return cfg("date_a and date_b must be given together".into())
            }
            _ => {}
        }
        if let Err(e) = self.tone.validate() {
            return cfg(format!("tone: {e}"));
        }
        if let Err(e) = self.edge_operator().validate() {
            return cfg(format!("operator: {e}"));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return cfg(format!(
                "threshold must be in [0, 1], got {}",
                self.threshold
            ));
        }
        if !(0.0..=1.0).contains(&self.opacity) {
            return cfg(format!("opacity must be in [0, 1], got {}", self.opacity));
        }
        if self.template.is_some() != self.search.is_some() {
            return cfg("template and search must be given together".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_from_empty_object() {
        let cfg = PipelineConfig::from_json("{}").unwrap();
        assert_eq!(cfg, PipelineConfig::default());
        assert_eq!(cfg.edge_operator(), EdgeOperator::Sobel);
        assert_eq!(cfg.blend, BlendMode::Multiply);
        assert_eq!(cfg.boundary, BoundaryPolicy::Clamp);
    }

    #[test]
    fn parses_full_config() {
        let text = r#"{
            "input_a": "a.pgm", "input_b": "b.png",
            "pixel_scale_a": 0.25, "date_a": "1999-03-11", "date_b": "2007-10-13",
            "tone": {"brightness": 0.1, "contrast": 0.2},
            "operator": "dog", "dog_radius_small": 2, "dog_radius_large": 5,
            "boundary": "reflect", "threshold": 0.05, "blend": "darken", "opacity": 0.5,
            "template": {"center_x": 10, "center_y": 12, "half_size": 4},
            "search": {"max_shift": 3}, "output_dir": "out"
        }"#;
        let cfg = PipelineConfig::from_json(text).unwrap();
        assert_eq!(
            cfg.edge_operator(),
            EdgeOperator::DoG {
                radius_small: 2.0,
                radius_large: 5.0
            }
        );
        assert_eq!(cfg.boundary, BoundaryPolicy::Reflect);
        assert_eq!(
            cfg.date_b,
            Some(NaiveDate::from_ymd_opt(2007, 10, 13).unwrap())
        );
        cfg.validate().unwrap();
        let again = PipelineConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(PipelineConfig::from_json(r#"{"treshold": 0.2}"#).is_err());
        assert!(PipelineConfig::from_json(r#"{"operator": "canny"}"#).is_err());
        assert!(PipelineConfig::from_json(r#"{"date_a": "1999/03/11"}"#).is_err());

        let base = PipelineConfig {
            input_a: Some("a.pgm".into()),
            input_b: Some("b.pgm".into()),
            output_dir: Some("out".into()),
            ..Default::default()
        };
        base.validate().unwrap();
        let bad = [
            PipelineConfig {
                input_b: None,
                ..base.clone()
            },
            PipelineConfig {
                output_dir: None,
                ..base.clone()
            },
            PipelineConfig {
                threshold: 1.5,
                ..base.clone()
            },
            PipelineConfig {
                opacity: -0.1,
                ..base.clone()
            },
            PipelineConfig {
                pixel_scale_a: Some(0.0),
                ..base.clone()
            },
            PipelineConfig {
                date_a: NaiveDate::from_ymd_opt(2001, 1, 1),
                ..base.clone()
            },
            PipelineConfig {
                date_a: NaiveDate::from_ymd_opt(2001, 1, 1),
                date_b: NaiveDate::from_ymd_opt(2000, 1, 1),
                ..base.clone()
            },
            PipelineConfig {
                search: Some(SearchSpec { max_shift: 3 }),
                ..base.clone()
            },
            PipelineConfig {
                operator: OperatorKind::Dog,
                dog_radius_small: 4.0,
                dog_radius_large: 2.0,
                ..base.clone()
            },
            PipelineConfig {
                tone: ToneParams {
                    brightness: 2.0,
                    contrast: 0.0,
                },
                ..base.clone()
            },
        ];
        for cfg in bad {
            let err = cfg.validate().unwrap_err();
            assert_eq!(err.exit_code(), 2, "{err}");
        }
    }

    #[test]
    fn relative_paths_follow_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(
            &path,
            r#"{"input_a": "a.pgm", "input_b": "/abs/b.pgm", "output_dir": "run"}"#,
        )
        .unwrap();
        let cfg = PipelineConfig::from_file(&path).unwrap();
        assert_eq!(cfg.input_a, Some(dir.path().join("a.pgm")));
        assert_eq!(cfg.input_b, Some(PathBuf::from("/abs/b.pgm")));
        assert_eq!(cfg.output_dir, Some(dir.path().join("run")));
    }
}
