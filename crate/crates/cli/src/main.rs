use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

use duneshift_core::compose::{blend, BlendMode};
use duneshift_core::displacement::{ncc_match, to_physical, SearchSpec, TemplateSpec};
use duneshift_core::pipeline::{
    self, edge_layer, load_image, save_image, write_synthetic_scene, OperatorKind, OutputFormat,
    PipelineConfig, PipelineError,
};
use duneshift_core::raster::{BoundaryPolicy, SubpixelPoint};
use duneshift_core::register::{
    estimate_similarity, read_control_points, warp, Interpolation, SimilarityTransform,
};
use duneshift_core::synthgen::{Barchan, SceneParams, SceneTruth};

#[derive(Parser, Debug)]
#[command(
    name = "duneshift",
    version,
    about = "Edge overlays and displacement measurement for two-epoch imagery"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Full comparison: register, tone, edges, overlay, measure, report.
    Run(Box<RunArgs>),
    /// Edge map of a single image.
    Edge(EdgeArgs),
    /// Blend a layer over a base image.
    Compose(ComposeArgs),
    /// Warp an image with a similarity transform.
    Register(RegisterArgs),
    /// Measure feature displacement between two images.
    Measure(MeasureArgs),
    /// Render a synthetic two-epoch dune scene with known motion.
    Synth(SynthArgs),
}

#[derive(Args, Debug, Default)]
struct OperatorArgs {
    /// sobel | prewitt | roberts | laplace | dog
    #[arg(long)]
    operator: Option<OperatorKind>,
    #[arg(long)]
    dog_small: Option<f64>,
    #[arg(long)]
    dog_large: Option<f64>,
    /// clamp | wrap | reflect | zero
    #[arg(long)]
    boundary: Option<BoundaryPolicy>,
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// JSON config; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input_a: Option<PathBuf>,
    #[arg(long)]
    input_b: Option<PathBuf>,
    #[command(flatten)]
    operator: OperatorArgs,
    #[arg(long)]
    binarize: bool,
    #[arg(long)]
    brightness: Option<f64>,
    #[arg(long)]
    contrast: Option<f64>,
    /// multiply | additive | darken
    #[arg(long)]
    blend: Option<BlendMode>,
    #[arg(long)]
    opacity: Option<f64>,
    #[arg(long)]
    control_points: Option<PathBuf>,
    #[arg(long)]
    nearest: bool,
    #[arg(long)]
    template_x: Option<usize>,
    #[arg(long)]
    template_y: Option<usize>,
    #[arg(long)]
    template_half: Option<usize>,
    #[arg(long)]
    search: Option<usize>,
    #[arg(long)]
    mpp_a: Option<f64>,
    #[arg(long)]
    mpp_b: Option<f64>,
    #[arg(long)]
    date_a: Option<NaiveDate>,
    #[arg(long)]
    date_b: Option<NaiveDate>,
    /// png | pgm
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EdgeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    operator: OperatorArgs,
    #[arg(long)]
    binarize: bool,
    /// Write the inverted layer (dark edges on white).
    #[arg(long)]
    invert: bool,
}

#[derive(Args, Debug)]
struct ComposeArgs {
    #[arg(long)]
    base: PathBuf,
    #[arg(long)]
    layer: PathBuf,
    #[arg(long, default_value = "multiply")]
    blend: BlendMode,
    #[arg(long, default_value_t = 1.0)]
    opacity: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct RegisterArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// `sx sy tx ty` per line; fitted instead of the explicit parameters.
    #[arg(long)]
    control_points: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    rotation_deg: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    tx: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    ty: f64,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long, default_value = "clamp")]
    boundary: BoundaryPolicy,
    #[arg(long)]
    nearest: bool,
}

#[derive(Args, Debug)]
struct MeasureArgs {
    #[arg(long)]
    input_a: PathBuf,
    #[arg(long)]
    input_b: PathBuf,
    #[arg(long)]
    template_x: usize,
    #[arg(long)]
    template_y: usize,
    #[arg(long)]
    template_half: usize,
    #[arg(long)]
    search: usize,
    /// Meters per pixel of the (shared) image frame.
    #[arg(long)]
    mpp: Option<f64>,
    #[arg(long, requires = "date_b")]
    date_a: Option<NaiveDate>,
    #[arg(long, requires = "date_a")]
    date_b: Option<NaiveDate>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 512)]
    width: usize,
    #[arg(long, default_value_t = 512)]
    height: usize,
    #[arg(long, default_value_t = 40.0)]
    radius: f64,
    #[arg(long, default_value_t = 12.0, allow_hyphen_values = true)]
    dx: f64,
    #[arg(long, default_value_t = -5.0, allow_hyphen_values = true)]
    dy: f64,
    #[arg(long, default_value_t = 0.02)]
    noise: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 0.6)]
    ground: f64,
    #[arg(long, default_value_t = 0.25)]
    albedo: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    orientation_deg: f64,
    #[arg(long, default_value_t = 0.25)]
    mpp: f64,
    #[arg(long, default_value = "1999-03-11")]
    date_a: NaiveDate,
    #[arg(long, default_value = "2007-10-13")]
    date_b: NaiveDate,
    #[arg(long, default_value = "pgm")]
    format: String,
}

fn parse_format(s: &str) -> Result<OutputFormat, PipelineError> {
    match s.to_ascii_lowercase().as_str() {
        "png" => Ok(OutputFormat::Png),
        "pgm" => Ok(OutputFormat::Pgm),
        other => Err(PipelineError::Config(format!(
            "unknown format '{other}' (expected png|pgm)"
        ))),
    }
}

fn apply_operator(cfg: &mut PipelineConfig, args: &OperatorArgs) {
    if let Some(op) = args.operator {
        cfg.operator = op;
    }
    if let Some(v) = args.dog_small {
        cfg.dog_radius_small = v;
    }
    if let Some(v) = args.dog_large {
        cfg.dog_radius_large = v;
    }
    if let Some(b) = args.boundary {
        cfg.boundary = b;
    }
    if let Some(t) = args.threshold {
        cfg.threshold = t;
    }
}

fn build_run_config(args: &RunArgs) -> Result<PipelineConfig, PipelineError> {
    let mut cfg = match &args.config {
        Some(path) => PipelineConfig::from_file(path)?,
        None => PipelineConfig::default(),
    };
    let set = |slot: &mut Option<PathBuf>, v: &Option<PathBuf>| {
        if v.is_some() {
            slot.clone_from(v);
        }
    };
    set(&mut cfg.input_a, &args.input_a);
    set(&mut cfg.input_b, &args.input_b);
    set(&mut cfg.control_points, &args.control_points);
    set(&mut cfg.output_dir, &args.out);
    apply_operator(&mut cfg, &args.operator);
    if args.binarize {
        cfg.binarize = true;
    }
    if let Some(b) = args.brightness {
        cfg.tone.brightness = b;
    }
    if let Some(c) = args.contrast {
        cfg.tone.contrast = c;
    }
    if let Some(b) = args.blend {
        cfg.blend = b;
    }
    if let Some(o) = args.opacity {
        cfg.opacity = o;
    }
    if args.nearest {
        cfg.interpolation = Interpolation::Nearest;
    }
    if args.mpp_a.is_some() {
        cfg.pixel_scale_a = args.mpp_a;
    }
    if args.mpp_b.is_some() {
        cfg.pixel_scale_b = args.mpp_b;
    }
    if args.date_a.is_some() {
        cfg.date_a = args.date_a;
    }
    if args.date_b.is_some() {
        cfg.date_b = args.date_b;
    }
    if let Some(f) = &args.format {
        cfg.image_format = parse_format(f)?;
    }
    if args.template_x.is_some() || args.template_y.is_some() || args.template_half.is_some() {
        let current = cfg.template;
        let pick = |flag: Option<usize>, existing: Option<usize>, name: &str| {
            flag.or(existing).ok_or_else(|| {
                PipelineError::Config(format!(
                    "--{name} is required with the other template flags"
                ))
            })
        };
        cfg.template = Some(TemplateSpec {
            center_x: pick(args.template_x, current.map(|t| t.center_x), "template-x")?,
            center_y: pick(args.template_y, current.map(|t| t.center_y), "template-y")?,
            half_size: pick(
                args.template_half,
                current.map(|t| t.half_size),
                "template-half",
            )?,
        });
    }
    if let Some(m) = args.search {
        cfg.search = Some(SearchSpec { max_shift: m });
    }
    Ok(cfg)
}

fn load(path: &Path) -> Result<duneshift_core::raster::Raster, PipelineError> {
    load_image(path).map_err(|e| PipelineError::Io {
        stage: "load",
        message: e.to_string(),
    })
}

fn save(r: &duneshift_core::raster::Raster, path: &Path) -> Result<(), PipelineError> {
    save_image(r, path).map_err(|e| PipelineError::Io {
        stage: "write",
        message: e.to_string(),
    })
}

fn stage_err(stage: &'static str, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Stage {
        stage,
        message: e.to_string(),
    }
}

fn cmd_run(args: &RunArgs) -> Result<(), PipelineError> {
    let cfg = build_run_config(args)?;
    let report = pipeline::run(&cfg)?;
    let out = cfg.output_dir.as_deref().expect("validated");
    println!("{}", out.join(pipeline::REPORT_FILE).display());
    if let Some((dx, dy)) = report.offset_px {
        eprintln!(
            "offset ({dx:.3}, {dy:.3}) px, score {:.4}",
            report.peak_score.unwrap_or(f64::NAN)
        );
    }
    if let Some(rate) = report.rate_m_per_yr {
        eprintln!("rate {rate:.4} m/yr");
    }
    Ok(())
}

fn cmd_edge(args: &EdgeArgs) -> Result<(), PipelineError> {
    let mut cfg = PipelineConfig::default();
    apply_operator(&mut cfg, &args.operator);
    let op = cfg.edge_operator();
    op.validate()
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    if !(0.0..=1.0).contains(&cfg.threshold) {
        return Err(PipelineError::Config(format!(
            "threshold must be in [0, 1], got {}",
            cfg.threshold
        )));
    }
    let image = load(&args.input)?;
    let (edges, layer) = edge_layer(&image, op, cfg.boundary, cfg.threshold, args.binarize)?;
    save(
        if args.invert {
            &layer
        } else {
            &edges.magnitude
        },
        &args.out,
    )
}

fn cmd_compose(args: &ComposeArgs) -> Result<(), PipelineError> {
    if !(0.0..=1.0).contains(&args.opacity) {
        return Err(PipelineError::Config(format!(
            "opacity must be in [0, 1], got {}",
            args.opacity
        )));
    }
    let base = load(&args.base)?;
    let layer = load(&args.layer)?;
    let out =
        blend(&base, &layer, args.blend, args.opacity).map_err(|e| stage_err("compose", e))?;
    save(&out, &args.out)
}

fn cmd_register(args: &RegisterArgs) -> Result<(), PipelineError> {
    let image = load(&args.input)?;
    let xf = match &args.control_points {
        Some(path) => {
            let pairs = read_control_points(path)
                .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
            estimate_similarity(&pairs).map_err(|e| stage_err("register", e))?
        }
        None => SimilarityTransform::new(
            args.scale,
            args.rotation_deg.to_radians(),
            (args.tx, args.ty),
        ),
    };
    let interpolation = if args.nearest {
        Interpolation::Nearest
    } else {
        Interpolation::Bilinear
    };
    let out = warp(
        &image,
        &xf,
        args.width.unwrap_or(image.width()),
        args.height.unwrap_or(image.height()),
        args.boundary,
        interpolation,
    )
    .map_err(|e| stage_err("register", e))?;
    save(&out, &args.out)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&xf).expect("serializable")
    );
    Ok(())
}

fn cmd_measure(args: &MeasureArgs) -> Result<(), PipelineError> {
    let a = load(&args.input_a)?;
    let b = load(&args.input_b)?;
    let tpl = TemplateSpec {
        center_x: args.template_x,
        center_y: args.template_y,
        half_size: args.template_half,
    };
    let search = SearchSpec {
        max_shift: args.search,
    };
    let mut result = ncc_match(&a, &b, &tpl, &search).map_err(|e| stage_err("measure", e))?;
    if let Some(mpp) = args.mpp {
        result = to_physical(&result, mpp, args.date_a.zip(args.date_b))
            .map_err(|e| stage_err("physical", e))?;
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&result).expect("serializable")
    );
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> Result<(), PipelineError> {
    let params = SceneParams {
        width: args.width,
        height: args.height,
        seed: args.seed,
        noise_amplitude: args.noise,
        ground_level: args.ground,
        barchans: vec![Barchan {
            center: SubpixelPoint::new(args.width as f64 / 2.0, args.height as f64 / 2.0),
            radius: args.radius,
            orientation: args.orientation_deg.to_radians(),
            albedo: args.albedo,
        }],
    };
    if !(args.mpp.is_finite() && args.mpp > 0.0) {
        return Err(PipelineError::Config(format!(
            "--mpp must be positive, got {}",
            args.mpp
        )));
    }
    if args.date_b <= args.date_a {
        return Err(PipelineError::Config(
            "--date-b must be after --date-a".into(),
        ));
    }
    let truth = SceneTruth {
        displacement_px: vec![(args.dx, args.dy)],
        pixel_scale: args.mpp,
        date_a: args.date_a,
        date_b: args.date_b,
    };
    let outputs = write_synthetic_scene(&params, &truth, &args.out, parse_format(&args.format)?)?;
    println!("{}", outputs.config.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Edge(a) => cmd_edge(a),
        Command::Compose(a) => cmd_compose(a),
        Command::Register(a) => cmd_register(a),
        Command::Measure(a) => cmd_measure(a),
        Command::Synth(a) => cmd_synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
