use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use serde_json::Value;

use duneshift_core::pipeline::{
    run, schema, write_synthetic_scene, OutputFormat, PipelineConfig, RegistrationSource,
    REPORT_FILE, REPORT_SCHEMA,
};
use duneshift_core::synthgen::{SceneParams, SceneTruth};

fn truth(dx: f64, dy: f64) -> SceneTruth {
    SceneTruth {
        displacement_px: vec![(dx, dy)],
        pixel_scale: 0.5,
        date_a: NaiveDate::from_ymd_opt(2000, 1, 1).unwrap(),
        date_b: NaiveDate::from_ymd_opt(2008, 1, 1).unwrap(),
    }
}

fn scene_config(dir: &Path, dx: f64, dy: f64) -> PipelineConfig {
    let params = SceneParams::single_barchan(200, 160, 24.0, 9);
    let out = write_synthetic_scene(&params, &truth(dx, dy), dir, OutputFormat::Pgm).unwrap();
    PipelineConfig::from_file(&out.config).unwrap()
}

fn read(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn zero_displacement_reports_zero_offset() {
    let dir = tempfile::tempdir().unwrap();
    let report = run(&scene_config(dir.path(), 0.0, 0.0)).unwrap();
    assert_eq!(report.offset_px, Some((0.0, 0.0)));
    assert!(report.peak_score.unwrap() >= 0.999);
    assert_eq!(report.rate_m_per_yr, Some(0.0));
}

#[test]
fn shifted_scene_within_half_pixel_and_rate_follows() {
    let dir = tempfile::tempdir().unwrap();
    let report = run(&scene_config(dir.path(), 6.0, -8.0)).unwrap();
    let (dx, dy) = report.offset_px.unwrap();
    assert!(
        (dx - 6.0).abs() <= 0.5 && (dy + 8.0).abs() <= 0.5,
        "({dx}, {dy})"
    );
    assert_eq!(report.interval_yr, Some(8.0));
    let (mx, my) = report.offset_m.unwrap();
    assert_eq!(report.rate_m_per_yr, Some(mx.hypot(my) / 8.0));
}

#[test]
fn report_and_truth_validate_against_schema() {
    let dir = tempfile::tempdir().unwrap();
    let config = scene_config(dir.path(), 2.0, 1.0);
    run(&config).unwrap();
    let schema: Value = serde_json::from_str(REPORT_SCHEMA).unwrap();
    for path in [
        dir.path().join("run").join(REPORT_FILE),
        dir.path().join("truth.json"),
    ] {
        let errors = schema::validate(&schema, &read(&path));
        assert!(errors.is_empty(), "{}: {errors:?}", path.display());
    }
    let mut bad = read(&dir.path().join("truth.json"));
    bad["peak_score"] = Value::from(2.0);
    assert!(!schema::validate(&schema, &bad).is_empty());
}

#[test]
fn artifacts_are_written_next_to_report() {
    let dir = tempfile::tempdir().unwrap();
    let report = run(&scene_config(dir.path(), 1.0, 1.0)).unwrap();
    let run_dir = dir.path().join("run");
    assert_eq!(report.artifacts.len(), 4);
    for name in &report.artifacts {
        assert!(run_dir.join(name).is_file(), "{name}");
    }
    assert!(report
        .artifacts
        .iter()
        .any(|a| a.starts_with("composite_a")));
    assert!(report.artifacts.iter().any(|a| a.starts_with("edge_b")));
}

#[test]
fn differing_pixel_scales_register_by_scaling() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = scene_config(dir.path(), 0.0, 0.0);
    config.pixel_scale_b = Some(1.0);
    config.template = None;
    config.search = None;
    let report = run(&config).unwrap();
    let reg = &report.parameters.registration;
    assert_eq!(reg.source, RegistrationSource::PixelScale);
    assert_eq!(reg.transform.scale, 2.0);
}

#[test]
fn control_points_take_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = scene_config(dir.path(), 0.0, 0.0);
    let cps = dir.path().join("cps.txt");
    fs::write(&cps, "0 0 1 0\n10 0 11 0\n0 10 1 10\n10 10 11 10\n").unwrap();
    config.control_points = Some(cps);
    let report = run(&config).unwrap();
    let reg = &report.parameters.registration;
    assert_eq!(reg.source, RegistrationSource::ControlPoints);
    assert_eq!(reg.pairs, 4);
    assert!(reg.rms_residual_px.unwrap() < 1e-12);
    assert!((reg.transform.translation.0 - 1.0).abs() < 1e-12);
}

#[test]
fn unknown_config_key_is_rejected() {
    let err = PipelineConfig::from_json(r#"{"input_a": "a.pgm", "treshold": 0.2}"#).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn config_paths_resolve_against_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = scene_config(dir.path(), 0.0, 0.0);
    assert_eq!(
        config.input_a.as_deref(),
        Some(dir.path().join("a.pgm").as_path())
    );
    assert_eq!(
        config.output_dir.as_deref(),
        Some(dir.path().join("run").as_path())
    );
}

#[test]
fn measurement_without_pixel_scale_stays_in_pixels() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = scene_config(dir.path(), 3.0, 0.0);
    config.pixel_scale_a = None;
    config.pixel_scale_b = None;
    let report = run(&config).unwrap();
    assert!(report.offset_px.is_some());
    assert_eq!(report.offset_m, None);
    assert_eq!(report.rate_m_per_yr, None);
    assert_eq!(report.interval_yr, Some(8.0));
}

#[test]
fn failed_run_leaves_no_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = scene_config(dir.path(), 0.0, 0.0);
    config.search = Some(duneshift_core::displacement::SearchSpec { max_shift: 500 });
    let err = run(&config).unwrap_err();
    assert_eq!(err.exit_code(), 4);
    let left = fs::read_dir(dir.path().join("run")).unwrap().count();
    assert_eq!(left, 0);
}
