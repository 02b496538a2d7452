use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::displacement::{interval_years, SearchSpec, TemplateSpec};
use crate::filters::EdgeOperator;
use crate::synthgen::{generate_pair, SceneParams, SceneTruth};

use super::config::{OutputFormat, PipelineConfig};
use super::io::{save_image, ImageFormat};
use super::report::{
    InputInfo, Inputs, Parameters, RegistrationEcho, RegistrationSource, RunReport, VERSION,
};
use super::run::write_report;
use super::PipelineError;
use crate::register::SimilarityTransform;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthOutputs {
    pub image_a: PathBuf,
    pub image_b: PathBuf,
    /// Ground truth in the run-report layout, for diffing against a run.
    pub truth: PathBuf,
    /// Scene parameters and full per-barchan truth.
    pub scene: PathBuf,
    /// A ready-to-run pipeline config pointing at the pair.
    pub config: PathBuf,
}

#[derive(Serialize)]
struct SceneFile<'a> {
    params: &'a SceneParams,
    truth: &'a SceneTruth,
}

/// Template and search window suggested for tracking the first barchan.
fn suggested_window(
    params: &SceneParams,
    truth: &SceneTruth,
) -> Option<(TemplateSpec, SearchSpec)> {
    let b = params.barchans.first()?;
    let d = truth.displacement_px.first()?;
    let half = (1.2 * b.radius).ceil().max(2.0) as usize;
    let shift = (d.0.abs().max(d.1.abs()).ceil() as usize + 4).max(1);
    Some((
        TemplateSpec {
            center_x: b.center.x.round().max(0.0) as usize,
            center_y: b.center.y.round().max(0.0) as usize,
            half_size: half,
        },
        SearchSpec { max_shift: shift },
    ))
}

/// Renders the scene and writes `a`, `b`, `truth.json`, `scene.json` and
/// `config.json` into `out_dir`.
pub fn write_synthetic_scene(
    params: &SceneParams,
    truth: &SceneTruth,
    out_dir: &Path,
    format: OutputFormat,
) -> Result<SynthOutputs, PipelineError> {
    let (a, b, truth) =
        generate_pair(params, truth).map_err(|e| PipelineError::stage("synth", e))?;
    fs::create_dir_all(out_dir)
        .map_err(|e| PipelineError::io("synth", format!("{}: {e}", out_dir.display())))?;

    let ext = ImageFormat::from(format).extension();
    let name_a = format!("a.{ext}");
    let name_b = format!("b.{ext}");
    let image_a = out_dir.join(&name_a);
    let image_b = out_dir.join(&name_b);
    save_image(&a, &image_a).map_err(|e| PipelineError::io("synth", e))?;
    save_image(&b, &image_b).map_err(|e| PipelineError::io("synth", e))?;

    let window = suggested_window(params, &truth);
    let config = PipelineConfig {
        input_a: Some(name_a.clone().into()),
        input_b: Some(name_b.clone().into()),
        pixel_scale_a: Some(truth.pixel_scale),
        pixel_scale_b: Some(truth.pixel_scale),
        date_a: Some(truth.date_a),
        date_b: Some(truth.date_b),
        template: window.map(|w| w.0),
        search: window.map(|w| w.1),
        output_dir: Some("run".into()),
        image_format: format,
        ..PipelineConfig::default()
    };

    let interval = interval_years(truth.date_a, truth.date_b).ok();
    let first = truth.displacement_px.first().copied();
    let offset_m = first.map(|(dx, dy)| (dx * truth.pixel_scale, dy * truth.pixel_scale));
    let rate = offset_m
        .zip(interval)
        .map(|((mx, my), yr)| mx.hypot(my) / yr);
    let input = |path: &str, date| InputInfo {
        path: path.to_string(),
        width: params.width,
        height: params.height,
        pixel_scale: Some(truth.pixel_scale),
        date: Some(date),
    };
    let report = RunReport {
        version: VERSION.to_string(),
        inputs: Inputs {
            a: input(&name_a, truth.date_a),
            b: input(&name_b, truth.date_b),
        },
        parameters: Parameters {
            registration: RegistrationEcho {
                source: RegistrationSource::None,
                control_points: None,
                pairs: 0,
                transform: SimilarityTransform::IDENTITY,
                rms_residual_px: None,
                interpolation: config.interpolation,
            },
            tone: config.tone,
            operator: EdgeOperator::Sobel,
            boundary: config.boundary,
            threshold: config.threshold,
            binarize: config.binarize,
            blend: config.blend,
            opacity: config.opacity,
            template: config.template,
            search: config.search,
            measurement_pixel_scale: Some(truth.pixel_scale),
        },
        offset_px: first,
        peak_score: first.map(|_| 1.0),
        offset_m,
        interval_yr: interval,
        rate_m_per_yr: rate,
        artifacts: vec![name_a, name_b],
    };

    let truth_path = out_dir.join("truth.json");
    let mut written = vec![image_a.clone(), image_b.clone()];
    if let Err(e) = write_report(&report, &truth_path, &mut written) {
        for p in &written {
            let _ = fs::remove_file(p);
        }
        return Err(e);
    }

    let scene_path = out_dir.join("scene.json");
    let scene_json = serde_json::to_string_pretty(&SceneFile {
        params,
        truth: &truth,
    })
    .expect("scene serializes");
    fs::write(&scene_path, scene_json + "\n").map_err(|e| PipelineError::io("synth", e))?;
    let config_path = out_dir.join("config.json");
    fs::write(&config_path, config.to_json() + "\n").map_err(|e| PipelineError::io("synth", e))?;

    Ok(SynthOutputs {
        image_a,
        image_b,
        truth: truth_path,
        scene: scene_path,
        config: config_path,
    })
}
