use std::fs;
use std::path::{Path, PathBuf};

use crate::compose::blend;
use crate::displacement::{interval_years, ncc_match, to_physical, MatchResult};
use crate::filters::{edge_response, threshold_edges, EdgeMap, EdgeOperator};
use crate::raster::{BoundaryPolicy, Raster};
use crate::register::{
    estimate_similarity, read_control_points, residual_sum_squares, warp, RegisterError,
    SimilarityTransform,
};
use crate::tone::{adjust, invert};

use super::config::PipelineConfig;
use super::io::{load_image, save_image, ImageFormat};
use super::report::{
    InputInfo, Inputs, Parameters, RegistrationEcho, RegistrationSource, RunReport, REPORT_SCHEMA,
    VERSION,
};
use super::{schema, PipelineError};

pub const REPORT_FILE: &str = "report.json";

/// Thresholded edge map and its inverted layer (dark edges on white).
pub fn edge_layer(
    r: &Raster,
    op: EdgeOperator,
    policy: BoundaryPolicy,
    threshold: f64,
    binarize: bool,
) -> Result<(EdgeMap, Raster), PipelineError> {
    let raw = edge_response(r, op, policy).map_err(|e| PipelineError::stage("edge", e))?;
    let kept = threshold_edges(&raw, threshold, binarize)
        .map_err(|e| PipelineError::stage("threshold", e))?;
    let layer = invert(&kept.magnitude);
    Ok((kept, layer))
}

/// Decides how image B is brought into image A's frame. Control points win;
/// otherwise differing pixel scales give a pure scaling about the origin.
pub fn registration_for(
    config: &PipelineConfig,
) -> Result<(Option<SimilarityTransform>, RegistrationEcho), PipelineError> {
    let mut echo = RegistrationEcho {
        source: RegistrationSource::None,
        control_points: None,
        pairs: 0,
        transform: SimilarityTransform::IDENTITY,
        rms_residual_px: None,
        interpolation: config.interpolation,
    };
    if let Some(path) = &config.control_points {
        let pairs = read_control_points(path).map_err(|e| match e {
            RegisterError::Io(io) => {
                PipelineError::io("register", format!("{}: {io}", path.display()))
            }
            other => PipelineError::Config(format!("{}: {other}", path.display())),
        })?;
        let xf = estimate_similarity(&pairs).map_err(|e| PipelineError::stage("register", e))?;
        echo.source = RegistrationSource::ControlPoints;
        echo.control_points = Some(path.display().to_string());
        echo.pairs = pairs.len();
        echo.transform = xf;
        echo.rms_residual_px =
            Some((residual_sum_squares(&xf, &pairs) / pairs.len() as f64).sqrt());
        return Ok((Some(xf), echo));
    }
    if let (Some(sa), Some(sb)) = (config.pixel_scale_a, config.pixel_scale_b) {
        let ratio = sb / sa;
        if (ratio - 1.0).abs() > 1e-12 {
            let xf = SimilarityTransform::new(ratio, 0.0, (0.0, 0.0));
            echo.source = RegistrationSource::PixelScale;
            echo.transform = xf;
            return Ok((Some(xf), echo));
        }
    }
    Ok((None, echo))
}

/// Runs the whole comparison and writes images plus `report.json` into the
/// output directory. On failure, files this run created are removed.
pub fn run(config: &PipelineConfig) -> Result<RunReport, PipelineError> {
    config.validate()?;
    let out_dir = config.output_dir.clone().expect("validated");
    fs::create_dir_all(&out_dir)
        .map_err(|e| PipelineError::io("write", format!("{}: {e}", out_dir.display())))?;
    let mut written = Vec::new();
    let result = run_stages(config, &out_dir, &mut written);
    if result.is_err() {
        for path in &written {
            let _ = fs::remove_file(path);
        }
    }
    result
}

fn load(path: &Path, scale: Option<f64>) -> Result<Raster, PipelineError> {
    load_image(path)
        .map_err(|e| PipelineError::io("load", e))?
        .with_pixel_scale(scale)
        .map_err(|e| PipelineError::Config(e.to_string()))
}

fn run_stages(
    config: &PipelineConfig,
    out_dir: &Path,
    written: &mut Vec<PathBuf>,
) -> Result<RunReport, PipelineError> {
    let path_a = config.input_a.as_deref().expect("validated");
    let path_b = config.input_b.as_deref().expect("validated");
    let image_a = load(path_a, config.pixel_scale_a)?;
    let image_b = load(path_b, config.pixel_scale_b)?;

    let (xf, registration) = registration_for(config)?;
    let image_b = match xf {
        Some(xf) => warp(
            &image_b,
            &xf,
            image_a.width(),
            image_a.height(),
            config.boundary,
            config.interpolation,
        )
        .map_err(|e| PipelineError::stage("register", e))?,
        None => image_b,
    };

    let toned_a = adjust(&image_a, config.tone).map_err(|e| PipelineError::stage("tone", e))?;
    let toned_b = adjust(&image_b, config.tone).map_err(|e| PipelineError::stage("tone", e))?;

    let op = config.edge_operator();
    let (edges_a, layer_a) = edge_layer(
        &toned_a,
        op,
        config.boundary,
        config.threshold,
        config.binarize,
    )?;
    let (edges_b, layer_b) = edge_layer(
        &toned_b,
        op,
        config.boundary,
        config.threshold,
        config.binarize,
    )?;

    let composite_a = blend(&toned_a, &layer_a, config.blend, config.opacity)
        .map_err(|e| PipelineError::stage("compose", e))?;
    let composite_b = blend(&toned_b, &layer_b, config.blend, config.opacity)
        .map_err(|e| PipelineError::stage("compose", e))?;

    let measurement_scale = image_a.pixel_scale().or(image_b.pixel_scale());
    let dates = config.date_a.zip(config.date_b);
    let measured: Option<MatchResult> = match (config.template, config.search) {
        (Some(tpl), Some(search)) => {
            let m = ncc_match(&toned_a, &toned_b, &tpl, &search)
                .map_err(|e| PipelineError::stage("measure", e))?;
            Some(match measurement_scale {
                Some(mpp) => {
                    to_physical(&m, mpp, dates).map_err(|e| PipelineError::stage("physical", e))?
                }
                None => m,
            })
        }
        _ => None,
    };
    let interval_yr = match dates {
        Some((a, b)) => {
            Some(interval_years(a, b).map_err(|e| PipelineError::stage("physical", e))?)
        }
        None => None,
    };

    let ext = ImageFormat::from(config.image_format).extension();
    let images = [
        (format!("edge_a.{ext}"), &edges_a.magnitude),
        (format!("edge_b.{ext}"), &edges_b.magnitude),
        (format!("composite_a.{ext}"), &composite_a),
        (format!("composite_b.{ext}"), &composite_b),
    ];
    let mut artifacts = Vec::with_capacity(images.len());
    for (name, raster) in images {
        let path = out_dir.join(&name);
        save_image(raster, &path).map_err(|e| PipelineError::io("write", e))?;
        written.push(path);
        artifacts.push(name);
    }

    let report = RunReport {
        version: VERSION.to_string(),
        inputs: Inputs {
            a: InputInfo {
                path: path_a.display().to_string(),
                width: image_a.width(),
                height: image_a.height(),
                pixel_scale: config.pixel_scale_a,
                date: config.date_a,
            },
            b: InputInfo {
                path: path_b.display().to_string(),
                width: image_b.width(),
                height: image_b.height(),
                pixel_scale: config.pixel_scale_b,
                date: config.date_b,
            },
        },
        parameters: Parameters {
            registration,
            tone: config.tone,
            operator: op,
            boundary: config.boundary,
            threshold: config.threshold,
            binarize: config.binarize,
            blend: config.blend,
            opacity: config.opacity,
            template: config.template,
            search: config.search,
            measurement_pixel_scale: measurement_scale,
        },
        offset_px: measured.map(|m| m.offset_px),
        peak_score: measured.map(|m| m.peak_score),
        offset_m: measured.and_then(|m| m.offset_m),
        interval_yr,
        rate_m_per_yr: measured.and_then(|m| m.rate_m_per_yr),
        artifacts,
    };
    write_report(&report, &out_dir.join(REPORT_FILE), written)?;
    Ok(report)
}

pub(crate) fn write_report(
    report: &RunReport,
    path: &Path,
    written: &mut Vec<PathBuf>,
) -> Result<(), PipelineError> {
    if let Some(field) = report.non_finite_field() {
        return Err(PipelineError::stage(
            "report",
            format!("{field} is not finite"),
        ));
    }
    let json = report.to_json();
    let schema: serde_json::Value =
        serde_json::from_str(REPORT_SCHEMA).expect("bundled schema parses");
    let value: serde_json::Value = serde_json::from_str(&json).expect("report round-trips");
    let violations = schema::validate(&schema, &value);
    if !violations.is_empty() {
        return Err(PipelineError::stage("report", violations.join("; ")));
    }
    fs::write(path, json)
        .map_err(|e| PipelineError::io("write", format!("{}: {e}", path.display())))?;
    written.push(path.to_path_buf());
    Ok(())
}
