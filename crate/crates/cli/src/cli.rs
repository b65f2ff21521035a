//! Command-line front end.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use blendpal::anneal::{AnnealSchedule, SearchSpace};
use blendpal::color::Srgb8;
use blendpal::composite::BlendSpace;
use blendpal::names::{convert_survey_export, NameModelFile, SimilarityMeasure};
use blendpal::objective::{ObjectiveConfig, SeparabilityScale};
use blendpal::render::{region_color_map, render_svg, SvgMode, SvgOptions};
use blendpal::report::SolutionDocument;
use blendpal::stimulus::{corpus_params, Smoothness, StimulusParams};
use clap::{Args, Parser, Subcommand};

use crate::engine::{self, OptimizeRequest, ScoreRequest};
use crate::error::ApiError;
use crate::io::{load_model, load_scene, read_text, write_png, write_text, LoadedScene};
use crate::service::{self, AppState, ServiceConfig};

#[derive(Debug, Parser)]
#[command(name = "blendpal", version, about = "Palettes, opacities and draw order for overlapping semi-transparent charts")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Search for a palette, opacities and render order.
    Optimize(OptimizeArgs),
    /// Score the solution stored in a document against a scene.
    Score(ScoreArgs),
    /// Draw a solution as SVG (histograms) or a region PNG (mask scenes).
    Render(RenderArgs),
    /// Generate synthetic histogram stimuli.
    GenStimuli(StimuliArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Convert a color-term survey export into a name-model file.
    ConvertNameModel(ConvertArgs),
}

#[derive(Debug, Args)]
pub struct ModelArg {
    /// Name-model file; the built-in prototype model when omitted.
    #[arg(long)]
    pub name_model: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ObjectiveArgs {
    /// ω1,ω2,ω3 for name association, name disassociation and separability.
    #[arg(long, value_parser = parse_weights)]
    pub weights: Option<[f64; 3]>,
    /// Minimum ΔE00 between region colors (η).
    #[arg(long)]
    pub eta: Option<f64>,
    /// Minimum |ΔL| of every region against the background (σ).
    #[arg(long)]
    pub sigma: Option<f64>,
    /// name, luminance, hue or color.
    #[arg(long)]
    pub similarity: Option<SimilarityMeasure>,
    /// normalized or raw.
    #[arg(long)]
    pub separability_scale: Option<SeparabilityScale>,
    /// linear or gamma.
    #[arg(long)]
    pub blend_space: Option<BlendSpace>,
}

impl ObjectiveArgs {
    fn apply(&self, mut cfg: ObjectiveConfig) -> ObjectiveConfig {
        if let Some(w) = self.weights {
            cfg.weights = w;
        }
        if let Some(v) = self.eta {
            cfg.jnd_threshold = v;
        }
        if let Some(v) = self.sigma {
            cfg.bg_contrast = v;
        }
        if let Some(v) = self.similarity {
            cfg.similarity = v;
        }
        if let Some(v) = self.separability_scale {
            cfg.separability_scale = v;
        }
        if let Some(v) = self.blend_space {
            cfg.blend_space = v;
        }
        cfg
    }
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    /// RNG seed; 0 when neither flag nor config sets it.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub t_start: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Cooling factor per iteration.
    #[arg(long)]
    pub cooling: Option<f64>,
    #[arg(long)]
    pub rgb_step: Option<u8>,
    #[arg(long)]
    pub alpha_step: Option<f64>,
    #[arg(long)]
    pub retries: Option<u32>,
}

impl ScheduleArgs {
    fn apply(&self, mut s: AnnealSchedule) -> AnnealSchedule {
        if let Some(v) = self.seed {
            s.seed = v;
        }
        if let Some(v) = self.t_start {
            s.t_start = v;
        }
        if let Some(v) = self.t_end {
            s.t_end = v;
        }
        if let Some(v) = self.cooling {
            s.gamma = v;
        }
        if let Some(v) = self.rgb_step {
            s.rgb_step = v;
        }
        if let Some(v) = self.alpha_step {
            s.alpha_step = v;
        }
        if let Some(v) = self.retries {
            s.max_candidate_retries = v;
        }
        s
    }
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    /// Histogram spec, mask manifest or scene structure (JSON).
    #[arg(long)]
    pub scene: PathBuf,
    #[command(flatten)]
    pub model: ModelArg,
    /// JSON with optional `objective`, `schedule` and `search` sections;
    /// flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub objective: ObjectiveArgs,
    #[command(flatten)]
    pub schedule: ScheduleArgs,
    /// Comma-separated colors per class; `-` leaves a class free.
    #[arg(long, value_parser = parse_fixed_palette)]
    pub fixed_palette: Option<FixedPalette>,
    /// Solution document to write.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// SVG for histogram scenes, PNG for mask scenes.
    #[arg(long)]
    pub render: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub scene: PathBuf,
    /// Solution document to score.
    #[arg(long)]
    pub solution: PathBuf,
    #[command(flatten)]
    pub model: ModelArg,
    /// Overrides of the settings stored in the document.
    #[command(flatten)]
    pub objective: ObjectiveArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long)]
    pub solution: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// layered or flattened.
    #[arg(long, default_value = "layered")]
    pub mode: SvgMode,
    #[arg(long, default_value_t = 640)]
    pub width: u32,
    #[arg(long, default_value_t = 400)]
    pub height: u32,
    #[arg(long)]
    pub no_legend: bool,
}

#[derive(Debug, Args)]
pub struct StimuliArgs {
    #[arg(long, default_value_t = 3)]
    pub classes: usize,
    /// smooth, moderate or unsmooth.
    #[arg(long, default_value = "moderate")]
    pub smoothness: Smoothness,
    #[arg(long, default_value_t = 25)]
    pub bins: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Histogram spec to write; stdout when omitted.
    #[arg(long, conflicts_with = "corpus")]
    pub out: Option<PathBuf>,
    /// Write the full 18-stimulus corpus into this directory instead.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub bind: SocketAddr,
    #[command(flatten)]
    pub model: ModelArg,
    #[arg(long, default_value_t = 2)]
    pub workers: usize,
    /// Seconds a finished job stays retrievable.
    #[arg(long, default_value_t = 3600)]
    pub ttl_secs: u64,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    /// Survey export JSON (`color`, `terms`, `T`).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FixedPalette(pub Vec<Option<Srgb8>>);

fn parse_weights(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated weights, got {s:?}"));
    }
    let mut w = [0.0; 3];
    for (slot, p) in w.iter_mut().zip(parts) {
        *slot = p.parse().map_err(|_| format!("bad weight {p:?}"))?;
    }
    Ok(w)
}

fn parse_fixed_palette(s: &str) -> Result<FixedPalette, String> {
    s.split(',')
        .map(str::trim)
        .map(|p| match p {
            "" | "-" => Ok(None),
            hex => hex.parse::<Srgb8>().map(Some).map_err(|e| e.to_string()),
        })
        .collect::<Result<_, _>>()
        .map(FixedPalette)
}

#[derive(Debug, Default, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    objective: ObjectiveConfig,
    #[serde(default)]
    schedule: Option<AnnealSchedule>,
    #[serde(default)]
    search: SearchSpace,
}

/// The request the service would receive for the same flags.
pub fn optimize_request(args: &OptimizeArgs, scene: &LoadedScene) -> Result<OptimizeRequest, ApiError> {
    let file: ConfigFile = match &args.config {
        Some(p) => ApiError::parse_json(&read_text(p)?).map_err(|e| e.under("config"))?,
        None => ConfigFile::default(),
    };
    let schedule = args.schedule.apply(file.schedule.unwrap_or_default());
    let mut search = file.search;
    if let Some(FixedPalette(p)) = &args.fixed_palette {
        search.fixed_palette = Some(p.clone());
    }
    Ok(OptimizeRequest {
        scene: scene.input(),
        objective: args.objective.apply(file.objective),
        schedule,
        search,
    })
}

fn cmd_optimize(args: &OptimizeArgs) -> Result<(), ApiError> {
    let scene = load_scene(&args.scene)?;
    let model = load_model(args.model.name_model.as_deref())?;
    let req = optimize_request(args, &scene)?;
    let structure = engine::prepare(&req)?;
    let (doc, trace) = engine::run_optimize(&structure, &model, &req)?;
    write_text(&args.out, &doc.to_json())?;
    if let Some(path) = &args.trace {
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).map_err(|e| ApiError::internal(e.to_string()))?;
        std::fs::write(path, buf).map_err(|e| ApiError::internal(format!("cannot write {}: {e}", path.display())))?;
    }
    if let Some(path) = &args.render {
        render_to(&scene, &doc, path, &SvgOptions { blend_space: req.objective.blend_space, ..Default::default() })?;
    }
    let b = &doc.breakdown;
    eprintln!(
        "total {:.6}  e_wa {:.6}  e_bd {:.6}  e_cs {:.6}  feasible {}",
        b.total, b.e_wa, b.e_bd, b.e_cs, b.constraints_ok
    );
    Ok(())
}

fn render_to(scene: &LoadedScene, doc: &SolutionDocument, path: &std::path::Path, opts: &SvgOptions) -> Result<(), ApiError> {
    if let Some(spec) = &scene.histogram {
        write_text(path, &render_svg(spec, &doc.solution, opts)?)
    } else if let Some(raster) = &scene.raster {
        eprintln!("note: mask scene, writing a region-color PNG instead of SVG");
        let rgb = region_color_map(raster, &doc.solution, doc.objective.blend_space)?;
        write_png(path, raster.width, raster.height, rgb)
    } else {
        Err(ApiError::bad_input("unrenderable_scene", "scene structure files carry no geometry to draw").at("scene"))
    }
}

fn cmd_score(args: &ScoreArgs) -> Result<(), ApiError> {
    let scene = load_scene(&args.scene)?;
    let model = load_model(args.model.name_model.as_deref())?;
    let doc = SolutionDocument::from_json(&read_text(&args.solution)?)?;
    let req = ScoreRequest {
        scene: scene.input(),
        solution: doc.solution.clone(),
        objective: args.objective.apply(doc.objective.clone()),
    };
    let breakdown = engine::run_score(&model, &req)?;
    let text = serde_json::to_string_pretty(&breakdown).expect("serializable") + "\n";
    match &args.out {
        Some(p) => write_text(p, &text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_render(args: &RenderArgs) -> Result<(), ApiError> {
    let scene = load_scene(&args.scene)?;
    let doc = SolutionDocument::from_json(&read_text(&args.solution)?)?;
    if doc.solution.m() != scene.structure.m {
        return Err(ApiError::bad_input(
            "invalid_solution",
            format!("document has {} classes, scene has {}", doc.solution.m(), scene.structure.m),
        )
        .at("solution"));
    }
    let opts = SvgOptions {
        width: args.width,
        height: args.height,
        mode: args.mode,
        blend_space: doc.objective.blend_space,
        legend: !args.no_legend,
        ..Default::default()
    };
    render_to(&scene, &doc, &args.out, &opts)
}

fn cmd_stimuli(args: &StimuliArgs) -> Result<(), ApiError> {
    if let Some(dir) = &args.corpus {
        std::fs::create_dir_all(dir).map_err(|e| ApiError::internal(format!("{}: {e}", dir.display())))?;
        for p in corpus_params(args.seed) {
            let stim = engine::run_stimulus(&StimulusParams { bins: args.bins, ..p })?;
            let name = format!("m{}_{}_seed{}.json", stim.params.classes, stim.params.smoothness, stim.params.seed);
            write_text(&dir.join(name), &(serde_json::to_string_pretty(&stim.spec).expect("serializable") + "\n"))?;
        }
        return Ok(());
    }
    let stim = engine::run_stimulus(&StimulusParams {
        classes: args.classes,
        smoothness: args.smoothness,
        bins: args.bins,
        seed: args.seed,
    })?;
    let text = serde_json::to_string_pretty(&stim.spec).expect("serializable") + "\n";
    eprintln!("KL per class: {:?}", stim.kl);
    match &args.out {
        Some(p) => write_text(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_serve(args: &ServeArgs) -> Result<(), ApiError> {
    let model = load_model(args.model.name_model.as_deref())?;
    let state = AppState::new(
        model,
        ServiceConfig {
            workers: args.workers,
            ttl: Duration::from_secs(args.ttl_secs),
        },
    );
    let rt = tokio::runtime::Runtime::new().map_err(|e| ApiError::internal(e.to_string()))?;
    rt.block_on(service::serve(args.bind, state))
}

fn cmd_convert(args: &ConvertArgs) -> Result<(), ApiError> {
    let (model, stats) = convert_survey_export(&read_text(&args.input)?)
        .map_err(|e| ApiError::bad_input("invalid_name_model", e.to_string()))?;
    write_text(&args.out, &NameModelFile::from_model(&model).to_json())?;
    eprintln!(
        "{} bins, {} terms ({} empty bins dropped)",
        stats.bins, stats.terms, stats.dropped_empty_bins
    );
    Ok(())
}

pub fn run(cli: &Cli) -> Result<(), ApiError> {
    match &cli.command {
        Command::Optimize(a) => cmd_optimize(a),
        Command::Score(a) => cmd_score(a),
        Command::Render(a) => cmd_render(a),
        Command::GenStimuli(a) => cmd_stimuli(a),
        Command::Serve(a) => cmd_serve(a),
        Command::ConvertNameModel(a) => cmd_convert(a),
    }
}
