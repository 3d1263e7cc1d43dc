//! Command-line front end.
//!
//! Every command reads an optional TOML run configuration with the sections
//! `[train]`, `[sampler]` and `[tileability]` (field names as in
//! [`TrainConfig`], [`SamplerConfig`] and [`TileabilityConfig`]). Values can
//! be overridden with `--set section.field=value` and with the dedicated
//! flags, which take precedence. Texture stacks are addressed by a path
//! prefix `P`, meaning the pair `P_albedo.png` / `P_normals.png`.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 missing input
//! or checkpoint, 4 runtime failure.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::losses::{ConvExtractor, FeatureExtractor};
use crate::metrics::{compare_to_exemplar, consistency_probe, seam_closure, MetricReport, ProbeRow, SeamStats};
use crate::net::checkpoint::{load_checkpoint, save_checkpoint};
use crate::net::DecoderMode;
use crate::sampler::{sample_textures, GanPipeline, SamplerConfig, SamplerReport};
use crate::stack_io::{load_named, save_named, stack_paths, tile_stack, BitDepth, MapKind, TextureStack};
use crate::tileability::{save_heatmap, TileabilityConfig};
use crate::trainer::{train_with, AblationMask, LossTerm, TrainConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_MISSING: i32 = 3;
pub const EXIT_RUNTIME: i32 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn missing(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_MISSING,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::FileMissing(_) => EXIT_MISSING,
            Error::InvalidConfig(_)
            | Error::InvalidTrainConfig(_)
            | Error::CropRangeInvalid(_)
            | Error::InvalidSplitLevel { .. }
            | Error::SizeNotDivisible(_)
            | Error::ShiftTooLarge { .. }
            | Error::StackTooSmall { .. }
            | Error::CropTooLarge { .. } => EXIT_USAGE,
            _ => EXIT_RUNTIME,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Error::from(e).into()
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Error::from(e).into()
    }
}

type CliResult<T = ()> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "tilesynth", version, about = "Tileable albedo + normal texture synthesis from a single exemplar")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a generator/discriminator pair on one exemplar stack.
    Train(TrainArgs),
    /// Expand an input stack with a trained generator.
    Synthesize(SynthesizeArgs),
    /// Search input crops for tileable outputs.
    Sample(SampleArgs),
    /// Compare synthesized stacks with their exemplars.
    Evaluate(EvaluateArgs),
    /// Discriminator scores for normals shifted against the albedo.
    Probe(ProbeArgs),
    /// Tile a stack into a grid preview and report seam statistics.
    Preview(PreviewArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a configuration value, e.g. `train.generator.base_channels=8`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Exemplar stack prefix.
    #[arg(long)]
    pub exemplar: PathBuf,
    /// Output directory for logs and checkpoints.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub eval_interval: Option<usize>,
    /// Comma-separated loss terms to disable: adv, l1_albedo, l1_normals, style.
    #[arg(long, value_delimiter = ',')]
    pub ablate: Vec<String>,
    /// Decoder layout: joint or split.
    #[arg(long)]
    pub decoder: Option<String>,
    #[arg(long)]
    pub base_channels: Option<usize>,
    #[arg(long)]
    pub residual_blocks: Option<usize>,
    #[arg(long)]
    pub disc_channels: Option<usize>,
    /// Keep a checkpoint file for every evaluation.
    #[arg(long)]
    pub save_all: bool,
}

#[derive(Debug, Args)]
pub struct SynthesizeArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Input stack prefix; sides must be multiples of 4.
    #[arg(long)]
    pub input: PathBuf,
    /// Output stack prefix.
    #[arg(long)]
    pub out: PathBuf,
    /// Use latent tiling; also writes `<out>_precrop`.
    #[arg(long)]
    pub seamless: bool,
    #[arg(long)]
    pub split_level: Option<usize>,
    #[arg(long)]
    pub sixteen_bit: bool,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub exemplar: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub c_min: Option<usize>,
    #[arg(long)]
    pub c_max: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub size_step: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_candidates: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub band_fraction: Option<f64>,
    #[arg(long)]
    pub split_level: Option<usize>,
    #[arg(long)]
    pub parallel: bool,
    /// Write a discriminator heat map per attempt.
    #[arg(long)]
    pub heatmaps: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Synthesized stack prefix.
    #[arg(long, requires = "exemplar", conflicts_with = "manifest")]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub exemplar: Option<PathBuf>,
    /// TOML file with `[[pairs]]` entries holding `exemplar` and `output` prefixes.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// JSON report destination; printed to stdout either way.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub stack: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0usize, 5, 100])]
    pub shifts: Vec<usize>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PreviewArgs {
    /// Tile stack prefix.
    #[arg(long)]
    pub tile: PathBuf,
    /// Rows x columns, e.g. `3x2`.
    #[arg(long, default_value = "2x2")]
    pub grid: String,
    /// Output prefix; defaults to `<tile>_preview`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Run configuration file layout.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub sampler: SamplerConfig,
    pub tileability: TileabilityConfig,
}

fn parse_override_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn apply_override(table: &mut toml::Table, spec: &str) -> CliResult {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::usage(format!("override {spec:?} is not KEY=VALUE")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    let (last, parents) = parts.split_last().expect("split yields one part");
    let mut node = table;
    for p in parents {
        let entry = node
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| CliError::usage(format!("override key {key:?}: {p} is not a section")))?;
    }
    node.insert(last.to_string(), parse_override_value(raw.trim()));
    Ok(())
}

/// Reads the configuration file (if any) and applies `--set` overrides.
pub fn load_run_config(args: &ConfigArgs) -> CliResult<RunConfig> {
    let mut table = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::usage(format!("cannot read config file {}: {e}", path.display())))?;
            toml::from_str::<toml::Table>(&text)
                .map_err(|e| CliError::usage(format!("invalid config file {}: {e}", path.display())))?
        }
        None => toml::Table::new(),
    };
    for o in &args.overrides {
        apply_override(&mut table, o)?;
    }
    toml::Value::Table(table)
        .try_into()
        .map_err(|e| CliError::usage(format!("invalid configuration: {e}")))
}

fn require_stack(prefix: &Path) -> CliResult<TextureStack> {
    let (a, n) = stack_paths(prefix);
    for p in [&a, &n] {
        if !p.exists() {
            return Err(CliError::missing(format!("input file not found: {}", p.display())));
        }
    }
    Ok(load_named(prefix)?)
}

fn require_file(path: &Path, what: &str) -> CliResult {
    if !path.is_file() {
        return Err(CliError::missing(format!("{what} not found: {}", path.display())));
    }
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Parses `3x2` into `(3, 2)`.
pub fn parse_grid(s: &str) -> CliResult<(usize, usize)> {
    let bad = || CliError::usage(format!("grid {s:?} must look like ROWSxCOLS with positive counts"));
    let (r, c) = s.to_ascii_lowercase().split_once('x').map(|(a, b)| (a.to_string(), b.to_string())).ok_or_else(bad)?;
    let r: usize = r.trim().parse().map_err(|_| bad())?;
    let c: usize = c.trim().parse().map_err(|_| bad())?;
    if r == 0 || c == 0 {
        return Err(bad());
    }
    Ok((r, c))
}

#[derive(Debug, Serialize)]
struct LogRecord {
    iteration: usize,
    lr: f64,
    adv: f64,
    l1_albedo: f64,
    l1_normals: f64,
    style: f64,
    total: f64,
    non_adversarial: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BestMarker {
    pub checkpoint: String,
    pub iteration: usize,
    /// Absent for the untrained initialization.
    pub non_adversarial_score: Option<f64>,
}

fn cmd_train(args: TrainArgs) -> CliResult {
    let mut run = load_run_config(&args.config)?;
    let cfg = &mut run.train;
    if let Some(v) = args.iterations {
        cfg.iterations = v;
    }
    if let Some(v) = args.k {
        cfg.k = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.lr {
        cfg.lr = v;
    }
    if let Some(v) = args.eval_interval {
        cfg.eval_interval = v;
    }
    if !args.ablate.is_empty() {
        let terms = args
            .ablate
            .iter()
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.parse::<LossTerm>())
            .collect::<Result<Vec<_>, _>>()?;
        cfg.ablation = AblationMask::without(&terms);
    }
    if let Some(d) = &args.decoder {
        cfg.generator.decoder_mode = match d.to_ascii_lowercase().as_str() {
            "joint" => DecoderMode::Joint,
            "split" => DecoderMode::Split,
            other => return Err(CliError::usage(format!("unknown decoder {other:?}; use joint or split"))),
        };
    }
    if let Some(v) = args.base_channels {
        cfg.generator.base_channels = v;
    }
    if let Some(v) = args.residual_blocks {
        cfg.generator.num_residual_blocks = v;
    }
    if let Some(v) = args.disc_channels {
        cfg.discriminator.base_channels = v;
    }
    cfg.validate()?;
    let stack = require_stack(&args.exemplar)?;

    let out = &args.out;
    std::fs::create_dir_all(out)?;
    std::fs::write(
        out.join("config.toml"),
        toml::to_string(&run).map_err(|e| CliError::usage(format!("cannot serialize config: {e}")))?,
    )?;
    let cfg = run.train;
    let extractor: Arc<dyn FeatureExtractor> = Arc::new(ConvExtractor::from_env_or_random(cfg.seed));
    let mut log_file = BufWriter::new(File::create(out.join("train_log.jsonl"))?);
    let ckpt_dir = out.join("checkpoints");
    if args.save_all {
        std::fs::create_dir_all(&ckpt_dir)?;
    }
    println!(
        "training {} iterations on {}x{} exemplar, k = {}",
        cfg.iterations,
        stack.height(),
        stack.width(),
        cfg.k
    );
    let outcome = train_with(&stack, cfg.clone(), extractor, |record, models| {
        let m = &record.window_mean;
        let line = LogRecord {
            iteration: record.iteration,
            lr: record.lr,
            adv: m.adv,
            l1_albedo: m.l1_albedo,
            l1_normals: m.l1_normals,
            style: m.style,
            total: m.total,
            non_adversarial: m.non_adversarial,
        };
        writeln!(log_file, "{}", serde_json::to_string(&line)?)?;
        log_file.flush()?;
        println!(
            "iter {:>6}  non-adv {:.5}  adv {:.4}  l1a {:.4}  l1n {:.4}  style {:.5}  lr {:.2e}",
            record.iteration, m.non_adversarial, m.adv, m.l1_albedo, m.l1_normals, m.style, record.lr
        );
        if args.save_all {
            save_checkpoint(
                ckpt_dir.join(format!("iter_{:06}.safetensors", record.iteration)),
                &models.generator,
                &models.discriminator,
                record.iteration,
                record.non_adversarial_score,
            )?;
        }
        Ok(())
    })?;
    let best = &outcome.best;
    save_checkpoint(
        out.join("best.safetensors"),
        &best.models.generator,
        &best.models.discriminator,
        best.iteration,
        best.non_adversarial_score,
    )?;
    write_json(
        &out.join("best.json"),
        &BestMarker {
            checkpoint: "best.safetensors".into(),
            iteration: best.iteration,
            non_adversarial_score: best.non_adversarial_score.is_finite().then_some(best.non_adversarial_score),
        },
    )?;
    println!(
        "best checkpoint: iteration {} (non-adversarial {:.5}) -> {}",
        best.iteration,
        best.non_adversarial_score,
        out.join("best.safetensors").display()
    );
    Ok(())
}

fn cmd_synthesize(args: SynthesizeArgs) -> CliResult {
    require_file(&args.checkpoint, "checkpoint")?;
    let input = require_stack(&args.input)?;
    let (generator, _, _) = load_checkpoint(&args.checkpoint)?;
    let depth = if args.sixteen_bit { BitDepth::Sixteen } else { BitDepth::Eight };
    if args.seamless {
        let level = args.split_level.unwrap_or(generator.config().split_level);
        let (pre, tile) = generator.generate_seamless(&input, level)?;
        let mut pre_prefix = args.out.clone().into_os_string();
        pre_prefix.push("_precrop");
        save_named(&pre, PathBuf::from(pre_prefix), depth)?;
        save_named(&tile, &args.out, depth)?;
        println!("wrote {}x{} tileable stack", tile.height(), tile.width());
    } else {
        let out = generator.forward(&input)?;
        save_named(&out, &args.out, depth)?;
        println!("wrote {}x{} stack", out.height(), out.width());
    }
    Ok(())
}

fn cmd_sample(args: SampleArgs) -> CliResult {
    let mut run = load_run_config(&args.config)?;
    let s = &mut run.sampler;
    macro_rules! set {
        ($($field:ident),*) => {$(if let Some(v) = args.$field { s.$field = v; })*};
    }
    set!(n, c_min, m, size_step, seed);
    if args.c_max.is_some() {
        s.c_max = args.c_max;
    }
    if args.max_candidates.is_some() {
        s.max_candidates = args.max_candidates;
    }
    s.parallel |= args.parallel;
    if let Some(v) = args.gamma {
        run.tileability.gamma = v;
    }
    if let Some(v) = args.band_fraction {
        run.tileability.band_fraction = v;
    }
    run.tileability.validate()?;
    if let Some(c_max) = s.c_max {
        if s.c_min > c_max {
            return Err(Error::CropRangeInvalid(format!("c_min = {} exceeds c_max = {c_max}", s.c_min)).into());
        }
    }
    require_file(&args.checkpoint, "checkpoint")?;
    let stack = require_stack(&args.exemplar)?;
    run.sampler.resolve_range(&stack)?;
    let (generator, discriminator, _) = load_checkpoint(&args.checkpoint)?;
    let mut pipeline = GanPipeline::new(&generator, &discriminator, run.tileability);
    if let Some(level) = args.split_level {
        pipeline.split_level = level;
    }
    let report = sample_textures(&stack, &pipeline, &run.sampler)?;

    std::fs::create_dir_all(&args.out)?;
    for tile in &report.accepted {
        save_named(&tile.tile, args.out.join(SamplerReport::tile_stem(tile)), BitDepth::Eight)?;
    }
    if args.heatmaps {
        for (i, a) in report.attempts.iter().enumerate() {
            save_heatmap(
                &a.verdict.map,
                run.tileability.band_fraction,
                a.verdict.map.downsample_factor(),
                args.out.join("heatmaps").join(format!("attempt_{i:04}_c{}.png", a.crop.size)),
            )?;
        }
    }
    write_json(&args.out.join("sampler_report.json"), &report.summary())?;
    println!(
        "{:?}: {} accepted of {} candidates",
        report.stopped_reason,
        report.accepted.len(),
        report.attempts.len()
    );
    Ok(())
}

#[derive(Debug, Deserialize)]
struct EvalManifest {
    pairs: Vec<EvalPair>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EvalPair {
    exemplar: PathBuf,
    output: PathBuf,
}

#[derive(Debug, Serialize)]
struct EvalEntry {
    exemplar: PathBuf,
    output: PathBuf,
    report: MetricReport,
}

fn cmd_evaluate(args: EvaluateArgs) -> CliResult {
    let pairs = match (&args.manifest, &args.output, &args.exemplar) {
        (Some(manifest), _, _) => {
            let text = std::fs::read_to_string(manifest)
                .map_err(|e| CliError::missing(format!("cannot read manifest {}: {e}", manifest.display())))?;
            let m: EvalManifest = toml::from_str(&text)
                .map_err(|e| CliError::usage(format!("invalid manifest {}: {e}", manifest.display())))?;
            m.pairs
        }
        (None, Some(output), Some(exemplar)) => vec![EvalPair {
            exemplar: exemplar.clone(),
            output: output.clone(),
        }],
        _ => return Err(CliError::usage("pass --output and --exemplar, or --manifest")),
    };
    let stacks = pairs
        .iter()
        .map(|p| Ok((require_stack(&p.exemplar)?, require_stack(&p.output)?)))
        .collect::<CliResult<Vec<_>>>()?;
    let backbone = std::env::var_os(crate::losses::BACKBONE_ENV)
        .map(ConvExtractor::load)
        .transpose()?;
    let extractor = backbone.as_ref().map(|e| e as &dyn FeatureExtractor);
    let entries = pairs
        .into_iter()
        .zip(&stacks)
        .map(|(p, (ex, out))| {
            Ok(EvalEntry {
                report: compare_to_exemplar(out, ex, extractor)?,
                exemplar: p.exemplar,
                output: p.output,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let text = if args.manifest.is_some() {
        serde_json::to_string_pretty(&entries)?
    } else {
        serde_json::to_string_pretty(&entries[0].report)?
    };
    println!("{text}");
    if let Some(path) = &args.report {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, text + "\n")?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct ProbeReport {
    rows: Vec<ProbeRow>,
    /// Scores never increase as the shift grows.
    monotone_non_increasing: bool,
}

fn cmd_probe(args: ProbeArgs) -> CliResult {
    require_file(&args.checkpoint, "checkpoint")?;
    let stack = require_stack(&args.stack)?;
    let (_, discriminator, _) = load_checkpoint(&args.checkpoint)?;
    let mut rows = consistency_probe(&discriminator, &stack, &args.shifts)?;
    rows.sort_by_key(|r| r.shift);
    let monotone_non_increasing = rows.windows(2).all(|w| w[1].mean_score <= w[0].mean_score);
    println!("{:>8}  {:>10}", "shift", "mean D");
    for r in &rows {
        println!("{:>8}  {:>10.5}", r.shift, r.mean_score);
    }
    println!("monotone non-increasing: {monotone_non_increasing}");
    let report = ProbeReport {
        rows,
        monotone_non_increasing,
    };
    if let Some(path) = &args.report {
        write_json(path, &report)?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct PreviewStats {
    albedo: SeamStats,
    normals: SeamStats,
}

fn cmd_preview(args: PreviewArgs) -> CliResult {
    let (rows, cols) = parse_grid(&args.grid)?;
    let tile = require_stack(&args.tile)?;
    let out = args.out.clone().unwrap_or_else(|| {
        let mut p = args.tile.clone().into_os_string();
        p.push("_preview");
        PathBuf::from(p)
    });
    let preview = tile_stack(&tile, rows, cols);
    save_named(&preview, &out, BitDepth::Eight)?;
    let stats = PreviewStats {
        albedo: seam_closure(&tile, MapKind::Albedo)?,
        normals: seam_closure(&tile, MapKind::Normals)?,
    };
    println!(
        "wrote {}x{} preview ({rows}x{cols} grid) to {}_{{albedo,normals}}.png",
        preview.height(),
        preview.width(),
        out.display()
    );
    println!("{}", serde_json::to_string_pretty(&stats)?);
    Ok(())
}

/// Parses arguments and runs a command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Synthesize(a) => cmd_synthesize(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Probe(a) => cmd_probe(a),
        Command::Preview(a) => cmd_preview(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}
