//! Command-line front end. `run` parses arguments, resolves the run
//! configuration and dispatches to one subcommand.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::control::{ControlBranch, ControlBundle, ControlStageKind};
use crate::diffusion::{make_linear_schedule, NoiseSchedule};
use crate::error::{Error, Result};
use crate::evalkit::{evaluate_model, TemplateBank};
use crate::freqbalance::{sweep_csv, sweep_grid, sweep_params, FreqEnhanceParams};
use crate::glyphdata::{
    dataset_stats, filter_sample, parse_json, read_dataset, render_sample, validate_lines, write_dataset, write_json,
    Orientation, TextLine, MAX_LINES,
};
use crate::pgm;
use crate::pipeline::{
    capture_spectra, image_seeds, load_base, load_branch, run_probes, save_base, save_branch, single_glyph_probes,
    spectra_csv, write_manifest, Models,
};
use crate::stager::{ControlWindow, Request, Sampler};
use crate::tensor::Grid;
use crate::train::{train_base, train_control, TrainLog};
use crate::unet::{ConditionEmbedding, UNet};

pub const SEED_ENV: &str = "GLYPHFORGE_SEED";

#[derive(Parser, Debug)]
#[command(name = "glyphforge", version, about = "Controllable glyph diffusion on toy glyph scenes")]
pub struct Cli {
    /// Run configuration file (key = value lines with [section] headers).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Corpus generation, filtering and statistics.
    #[command(subcommand)]
    Dataset(DatasetCmd),
    /// Train the base model and the control branches.
    Train(TrainArgs),
    /// Sample images of requested text.
    Generate(GenerateArgs),
    /// Replace text inside boxes of an existing image.
    Edit(EditArgs),
    /// Score generations with the template recognizer.
    Eval(EvalArgs),
    /// Radial spectra of decoder inputs.
    Spectrum(SpectrumArgs),
    /// Grid search over enhancement parameters.
    Sweep(SweepArgs),
    /// Restrict control to a timestep window.
    Ablate(AblateArgs),
}

#[derive(Subcommand, Debug)]
pub enum DatasetCmd {
    Gen {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    Filter {
        #[arg(long)]
        data: Option<PathBuf>,
        /// Per-sample decisions CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Stats {
        #[arg(long)]
        data: Option<PathBuf>,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum StageArg {
    Base,
    Global,
    Detail,
    Both,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long, value_enum, default_value = "both")]
    pub stage: StageArg,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct SamplingArgs {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub split_frac: Option<f64>,
    #[arg(long)]
    pub edit_noise_frac: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long)]
    pub r_thresh: Option<f64>,
    /// Sample without Fourier enhancement.
    #[arg(long)]
    pub no_enhance: bool,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub sampling: SamplingArgs,
    /// One text line per flag.
    #[arg(long, required = true)]
    pub text: Vec<String>,
    /// JSON list of {"x", "y", "scale", "vertical"} boxes, one per line.
    #[arg(long)]
    pub boxes: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    #[arg(long, default_value = "generated.pgm")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EditArgs {
    #[command(flatten)]
    pub sampling: SamplingArgs,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, required = true)]
    pub text: Vec<String>,
    #[arg(long, required = true)]
    pub boxes: String,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "edited.pgm")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    pub sampling: SamplingArgs,
    /// Corpus to regenerate; single-glyph probes are used when omitted.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub limit: Option<usize>,
    /// Number of single-glyph probes.
    #[arg(long, default_value_t = 128)]
    pub probe: usize,
    #[arg(long, default_value = crate::glyphdata::font::TOY16_ALPHABET)]
    pub alphabet: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub sampling: SamplingArgs,
    /// Decoder layer, 0 = deepest.
    #[arg(long, default_value_t = 1)]
    pub layer: usize,
    #[arg(long, default_value_t = 200)]
    pub timestep: usize,
    #[arg(long, default_value_t = 16)]
    pub probe: usize,
    /// γ-modulate the control feature before measuring it.
    #[arg(long)]
    pub apply_gamma: bool,
    #[arg(long, default_value = "spectrum.csv")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub sampling: SamplingArgs,
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 1.2, 1.4])]
    pub alphas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 1.2])]
    pub betas: Vec<f64>,
    #[arg(long = "s-values", value_delimiter = ',', default_values_t = [0.2, 1.0])]
    pub s_values: Vec<f64>,
    #[arg(long, default_value_t = 32)]
    pub probe: usize,
    #[arg(long, default_value = "sweep.csv")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct AblateArgs {
    #[command(flatten)]
    pub sampling: SamplingArgs,
    /// `full`, `none`, `late-off` (no control for t <= T/4), `early-off`
    /// (no control for t > T/2) or an inclusive range `LO:HI`.
    #[arg(long, default_value = "late-off")]
    pub window: String,
    #[arg(long, default_value_t = 64)]
    pub probe: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Box placement for one text line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxSpec {
    pub x: usize,
    pub y: usize,
    #[serde(default = "one")]
    pub scale: usize,
    #[serde(default)]
    pub vertical: bool,
}

fn one() -> usize {
    1
}

/// Parses arguments from the process and runs the command.
pub fn main_with_env() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error code={} {}", e.exit_code(), e.to_string().replace('\n', " "));
            e.exit_code()
        }
    }
}

/// Loads the configuration, applies the seed override and echoes the result to stderr.
pub fn resolve_config(path: Option<&Path>, seed_override: Option<&str>) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = seed_override {
        cfg.seed = s
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("{SEED_ENV} must be an unsigned integer, got {s:?}")))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: Cli) -> Result<()> {
    let env_seed = std::env::var(SEED_ENV).ok();
    let mut cfg = resolve_config(cli.config.as_deref(), env_seed.as_deref())?;
    if let Some(s) = sampling_args(&cli.command) {
        apply_sampling(&mut cfg, s)?;
    }
    eprint!("# resolved config\n{}", cfg.to_text());
    match cli.command {
        Command::Dataset(d) => cmd_dataset(&cfg, d),
        Command::Train(a) => cmd_train(&cfg, a),
        Command::Generate(a) => cmd_generate(&cfg, a),
        Command::Edit(a) => cmd_edit(&cfg, a),
        Command::Eval(a) => cmd_eval(&cfg, a),
        Command::Spectrum(a) => cmd_spectrum(&cfg, a),
        Command::Sweep(a) => cmd_sweep(&cfg, a),
        Command::Ablate(a) => cmd_ablate(&cfg, a),
    }
}

fn sampling_args(c: &Command) -> Option<&SamplingArgs> {
    match c {
        Command::Generate(a) => Some(&a.sampling),
        Command::Edit(a) => Some(&a.sampling),
        Command::Eval(a) => Some(&a.sampling),
        Command::Spectrum(a) => Some(&a.sampling),
        Command::Sweep(a) => Some(&a.sampling),
        Command::Ablate(a) => Some(&a.sampling),
        _ => None,
    }
}

fn apply_sampling(cfg: &mut RunConfig, a: &SamplingArgs) -> Result<()> {
    if let Some(c) = &a.checkpoint {
        cfg.paths.checkpoints = c.clone();
    }
    if let Some(v) = a.steps {
        cfg.sampler.steps = v;
    }
    if let Some(v) = a.split_frac {
        cfg.stages.split_frac = v;
    }
    if let Some(v) = a.edit_noise_frac {
        cfg.stages.edit_noise_frac = v;
    }
    if let Some(v) = a.alpha {
        cfg.enhance.alpha = v;
    }
    if let Some(v) = a.beta {
        cfg.enhance.beta = v;
    }
    if let Some(v) = a.s {
        cfg.enhance.s = v;
    }
    if let Some(v) = a.r_thresh {
        cfg.enhance.r_thresh = v;
    }
    if a.no_enhance {
        cfg.sampler.enhance = false;
    }
    cfg.validate()
}

fn noise_schedule(cfg: &RunConfig) -> Result<NoiseSchedule> {
    make_linear_schedule(cfg.stages.t_max, 1e-4, 0.02)
}

fn sampler<'a>(cfg: &RunConfig, models: &'a Models, noise: &'a NoiseSchedule) -> Sampler<'a> {
    let mut s = models.sampler(noise).with_enhance(cfg.enhance_params());
    s.stages = cfg.stages;
    s.steps = cfg.sampler.steps;
    s
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    ensure_parent(path)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_image(path: &Path, img: &Grid) -> Result<()> {
    ensure_parent(path)?;
    pgm::write(path, img)
}

fn cmd_dataset(cfg: &RunConfig, cmd: DatasetCmd) -> Result<()> {
    match cmd {
        DatasetCmd::Gen { out, count, seed } => {
            let dir = out.unwrap_or_else(|| cfg.paths.dataset.clone());
            let n = count.unwrap_or(cfg.dataset.count);
            let seed = seed.unwrap_or(cfg.seed);
            let samples = (0..n as u64)
                .map(|i| render_sample(corpus_seed(seed, i), &cfg.render))
                .collect::<Result<Vec<_>>>()?;
            write_dataset(&dir, &samples)?;
            write_text(&dir.join("run.cfg"), &cfg.to_text())?;
            println!("wrote {n} samples to {}", dir.display());
        }
        DatasetCmd::Filter { data, out } => {
            let dir = data.unwrap_or_else(|| cfg.paths.dataset.clone());
            let samples = read_dataset(&dir)?;
            let mut csv = String::from("id,accept,reason\n");
            let mut kept = 0;
            for (i, s) in samples.iter().enumerate() {
                let d = filter_sample(&s.meta(), &cfg.filter);
                kept += d.accept as usize;
                csv.push_str(&format!("{i},{},{}\n", d.accept, d.reason.map_or("", |r| r.id())));
            }
            match out {
                Some(p) => write_text(&p, &csv)?,
                None => print!("{csv}"),
            }
            eprintln!("accepted {kept} of {}", samples.len());
        }
        DatasetCmd::Stats { data } => {
            let dir = data.unwrap_or_else(|| cfg.paths.dataset.clone());
            let metas: Vec<_> = read_dataset(&dir)?.iter().map(|s| s.meta()).collect();
            println!("{}", serde_json::to_string_pretty(&dataset_stats(&metas)).expect("stats serialize"));
        }
    }
    Ok(())
}

/// Render seed of the `i`-th sample of a corpus generated with `seed`.
pub fn corpus_seed(seed: u64, i: u64) -> u64 {
    seed.wrapping_mul(1_000_003).wrapping_add(i)
}

fn cmd_train(cfg: &RunConfig, a: TrainArgs) -> Result<()> {
    let data_dir = a.data.unwrap_or_else(|| cfg.paths.dataset.clone());
    if !data_dir.join("manifest.json").exists() {
        return Err(Error::Missing(format!(
            "dataset {} (run `glyphforge dataset gen` first)",
            data_dir.display()
        )));
    }
    let corpus = read_dataset(&data_dir)?;
    let out = a.out.unwrap_or_else(|| cfg.paths.checkpoints.clone());
    let noise = noise_schedule(cfg)?;
    let tcfg = cfg.train_config();
    if a.stage == StageArg::Detail && !tcfg.cold_start_detail && !out.join("global").join("manifest.json").exists() {
        return Err(Error::Missing(format!(
            "global control checkpoint under {} (run `train --stage global` first)",
            out.display()
        )));
    }
    let mut log = TrainLog::default();
    let base = match load_base(&out) {
        Ok(b) if b.cfg == cfg.unet => {
            eprintln!("loaded base from {}", out.display());
            b
        }
        _ => {
            write_manifest(&out, &cfg.unet, &cfg.control)?;
            let mut b = UNet::new(cfg.unet.clone(), tcfg.seed)?;
            train_base(&mut b, &corpus, &noise, &tcfg, &mut log)?;
            save_base(&out, &b)?;
            b
        }
    };
    let mut fingerprints = vec![("base", base.params.fingerprint())];
    let train_stage = |kind: ControlStageKind, log: &mut TrainLog| -> Result<ControlBranch> {
        let mut branch = match kind {
            ControlStageKind::Global => ControlBranch::from_unet(kind, cfg.control.clone(), &base, tcfg.seed + 1)?,
            ControlStageKind::Detail if tcfg.cold_start_detail => {
                ControlBranch::from_unet(kind, cfg.control.clone(), &base, tcfg.seed + 2)?
            }
            ControlStageKind::Detail => {
                let global = load_branch(&out, ControlStageKind::Global).map_err(|e| match e {
                    Error::Missing(m) => Error::Missing(format!("{m} (run `train --stage global` first)")),
                    other => other,
                })?;
                ControlBranch::warm_start_detail(&global, tcfg.seed + 2)?
            }
        };
        train_control(&mut branch, &base, &corpus, &noise, &cfg.stages, &tcfg, log)?;
        save_branch(&out, &branch)?;
        Ok(branch)
    };
    if matches!(a.stage, StageArg::Global | StageArg::Both) {
        let g = train_stage(ControlStageKind::Global, &mut log)?;
        fingerprints.push(("global", g.params.fingerprint()));
    }
    if matches!(a.stage, StageArg::Detail | StageArg::Both) {
        let d = train_stage(ControlStageKind::Detail, &mut log)?;
        fingerprints.push(("detail", d.params.fingerprint()));
    }
    let stage_name = format!("{:?}", a.stage).to_lowercase();
    write_text(&out.join(format!("loss_{stage_name}.csv")), &log.to_csv())?;
    write_text(&out.join("run.cfg"), &cfg.to_text())?;
    for (name, fp) in fingerprints {
        println!("{name} {fp:016x}");
    }
    Ok(())
}

/// Lays out text lines from explicit boxes, or stacks them from the top-left.
pub fn layout_lines(texts: &[String], boxes: Option<&str>, canvas: usize) -> Result<Vec<TextLine>> {
    if texts.len() > MAX_LINES {
        return Err(Error::invalid(format!("at most {MAX_LINES} text lines allowed, got {}", texts.len())));
    }
    let specs: Vec<BoxSpec> = match boxes {
        Some(b) => parse_json(b, Path::new("--boxes"))?,
        None => {
            let fits = |scale: usize| texts.len() * (crate::glyphdata::font::GLYPH_HEIGHT + 1) * scale < canvas;
            let scale = if fits(2) { 2 } else { 1 };
            (0..texts.len())
                .map(|i| BoxSpec { x: 1, y: 1 + i * (crate::glyphdata::font::GLYPH_HEIGHT + 1) * scale, scale, vertical: false })
                .collect()
        }
    };
    if specs.len() != texts.len() {
        return Err(Error::invalid(format!("{} boxes given for {} text lines", specs.len(), texts.len())));
    }
    let lines = texts
        .iter()
        .zip(&specs)
        .map(|(t, b)| {
            let o = if b.vertical { Orientation::Vertical } else { Orientation::Horizontal };
            let l = TextLine::layout(t, b.x, b.y, b.scale, o)?;
            if !l.bbox.fits(canvas, canvas) {
                return Err(Error::Size(format!("line {t:?} does not fit the {canvas}px canvas at ({}, {})", b.x, b.y)));
            }
            Ok(l)
        })
        .collect::<Result<Vec<_>>>()?;
    validate_lines(&lines)?;
    Ok(lines)
}

fn request_for(lines: &[TextLine], canvas: usize) -> Result<Request> {
    Ok(Request {
        cond: ConditionEmbedding::new(lines.iter().map(TextLine::class_ids).collect())?,
        bundle: ControlBundle::from_lines(lines, canvas, canvas),
    })
}

#[derive(Serialize)]
struct Provenance<'a> {
    command: &'a str,
    seeds: Vec<u64>,
    lines: &'a [TextLine],
    steps: usize,
    split_t: usize,
    edit_t: Option<usize>,
    enhance: Option<FreqEnhanceParams>,
    fingerprints: [String; 3],
    config: String,
}

fn provenance<'a>(cmd: &'a str, cfg: &RunConfig, models: &Models, seeds: Vec<u64>, lines: &'a [TextLine], edit: bool) -> Provenance<'a> {
    Provenance {
        command: cmd,
        seeds,
        lines,
        steps: cfg.sampler.steps,
        split_t: cfg.stages.split_t(),
        edit_t: edit.then(|| cfg.stages.edit_t()),
        enhance: cfg.enhance_params(),
        fingerprints: models.fingerprints().map(|f| format!("{f:016x}")),
        config: cfg.to_text(),
    }
}

fn numbered(path: &Path, i: usize, count: usize) -> PathBuf {
    if count == 1 {
        return path.to_path_buf();
    }
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("image");
    path.with_file_name(format!("{stem}_{i:03}.pgm"))
}

fn cmd_generate(cfg: &RunConfig, a: GenerateArgs) -> Result<()> {
    let canvas = cfg.render.canvas;
    let lines = layout_lines(&a.text, a.boxes.as_deref(), canvas)?;
    let models = Models::load(&cfg.paths.checkpoints)?;
    let noise = noise_schedule(cfg)?;
    let seeds = image_seeds(a.seed.unwrap_or(cfg.seed), a.count.max(1));
    let reqs = vec![request_for(&lines, canvas)?; seeds.len()];
    let images = sampler(cfg, &models, &noise).generate(&reqs, &seeds)?;
    for (i, img) in images.iter().enumerate() {
        let p = numbered(&a.out, i, images.len());
        write_image(&p, img)?;
        println!("{}", p.display());
    }
    write_json(&a.out.with_extension("json"), &provenance("generate", cfg, &models, seeds, &lines, false))
}

fn cmd_edit(cfg: &RunConfig, a: EditArgs) -> Result<()> {
    let canvas = cfg.render.canvas;
    let original = pgm::read(&a.input)?;
    if original.shape() != [1, canvas, canvas] {
        return Err(Error::Size(format!("input must be {canvas}x{canvas}, got {:?}", original.shape())));
    }
    let lines = layout_lines(&a.text, Some(&a.boxes), canvas)?;
    if lines.is_empty() {
        return Err(Error::invalid("edit needs at least one box"));
    }
    let models = Models::load(&cfg.paths.checkpoints)?;
    let noise = noise_schedule(cfg)?;
    let seeds = image_seeds(a.seed.unwrap_or(cfg.seed), 1);
    let req = request_for(&lines, canvas)?;
    let edited = sampler(cfg, &models, &noise).edit(std::slice::from_ref(&original), &[req], &seeds)?.remove(0);
    write_image(&a.out, &edited)?;
    let diff = edited.zip_map(&original, |x, y| (x - y).abs())?;
    let stem = a.out.file_stem().and_then(|s| s.to_str()).unwrap_or("edited");
    write_image(&a.out.with_file_name(format!("{stem}_diff.pgm")), &diff)?;
    write_json(&a.out.with_extension("json"), &provenance("edit", cfg, &models, seeds, &lines, true))?;
    println!("{}", a.out.display());
    Ok(())
}

fn cmd_eval(cfg: &RunConfig, a: EvalArgs) -> Result<()> {
    let models = Models::load(&cfg.paths.checkpoints)?;
    let noise = noise_schedule(cfg)?;
    let s = sampler(cfg, &models, &noise);
    let report = match &a.data {
        Some(dir) => {
            let mut corpus = read_dataset(dir)?;
            corpus.truncate(a.limit.unwrap_or(corpus.len()));
            let bank = TemplateBank::for_alphabet(&cfg.render.alphabet)?;
            let seeds = image_seeds(cfg.seed, corpus.len());
            evaluate_model(
                |i, sample| {
                    let req = request_for(&sample.lines, sample.width())?;
                    Ok(s.generate(&[req], &seeds[i..=i])?.remove(0))
                },
                &corpus,
                &bank,
            )?
        }
        None => {
            let bank = TemplateBank::for_alphabet(&a.alphabet)?;
            let probes = single_glyph_probes(&a.alphabet, a.probe, cfg.render.canvas, cfg.seed)?;
            let seeds = image_seeds(cfg.seed, probes.len());
            run_probes(&probes, &seeds, 32, &bank, |r, sd| s.generate(r, sd))?.0
        }
    };
    if let Some(out) = &a.out {
        report.write(out)?;
    }
    println!("acc {:.4} ned {:.4} lines {}", report.acc, report.ned, report.n());
    Ok(())
}

fn cmd_spectrum(cfg: &RunConfig, a: SpectrumArgs) -> Result<()> {
    let models = Models::load(&cfg.paths.checkpoints)?;
    let noise = noise_schedule(cfg)?;
    let probes = single_glyph_probes(crate::glyphdata::font::TOY16_ALPHABET, a.probe, cfg.render.canvas, cfg.seed)?;
    let gamma = a.apply_gamma.then_some(cfg.enhance);
    let curves = capture_spectra(&models, &noise, &cfg.stages, &probes, a.layer, a.timestep, cfg.seed, gamma.as_ref())?;
    write_text(&a.out, &spectra_csv(&curves))?;
    println!("{}", a.out.display());
    Ok(())
}

fn cmd_sweep(cfg: &RunConfig, a: SweepArgs) -> Result<()> {
    let models = Models::load(&cfg.paths.checkpoints)?;
    let noise = noise_schedule(cfg)?;
    let alphabet = crate::glyphdata::font::TOY16_ALPHABET;
    let bank = TemplateBank::for_alphabet(alphabet)?;
    let probes = single_glyph_probes(alphabet, a.probe, cfg.render.canvas, cfg.seed)?;
    let seeds = image_seeds(cfg.seed, probes.len());
    let grid = sweep_grid(&a.alphas, &a.betas, &a.s_values, cfg.enhance.r_thresh);
    let rows = sweep_params(&grid, |p| {
        let s = sampler(cfg, &models, &noise).with_enhance(Some(*p));
        let (r, _) = run_probes(&probes, &seeds, 32, &bank, |q, sd| s.generate(q, sd))?;
        eprintln!("alpha {} beta {} s {}: acc {:.4}", p.alpha, p.beta, p.s, r.acc);
        Ok((r.acc, r.ned))
    })?;
    write_text(&a.out, &sweep_csv(&rows))?;
    println!("{}", a.out.display());
    Ok(())
}

/// Parses an ablation window name or `LO:HI` range against `T`.
pub fn parse_window(spec: &str, t_max: usize) -> Result<ControlWindow> {
    Ok(match spec {
        "full" => ControlWindow::Always,
        "none" => ControlWindow::Never,
        "late-off" => ControlWindow::Only(t_max / 4 + 1..=t_max),
        "early-off" => ControlWindow::Only(1..=t_max / 2),
        other => {
            let (lo, hi) = other
                .split_once(':')
                .and_then(|(l, h)| Some((l.trim().parse::<usize>().ok()?, h.trim().parse::<usize>().ok()?)))
                .ok_or_else(|| Error::invalid(format!("unknown control window {other:?}")))?;
            ControlWindow::Only(lo..=hi)
        }
    })
}

fn cmd_ablate(cfg: &RunConfig, a: AblateArgs) -> Result<()> {
    let window = parse_window(&a.window, cfg.stages.t_max)?;
    let models = Models::load(&cfg.paths.checkpoints)?;
    let noise = noise_schedule(cfg)?;
    let alphabet = crate::glyphdata::font::TOY16_ALPHABET;
    let bank = TemplateBank::for_alphabet(alphabet)?;
    let probes = single_glyph_probes(alphabet, a.probe, cfg.render.canvas, cfg.seed)?;
    let seeds = image_seeds(cfg.seed, probes.len());
    let s = sampler(cfg, &models, &noise);
    let (full, _) = run_probes(&probes, &seeds, 32, &bank, |q, sd| s.generate(q, sd))?;
    let (ablated, _) = run_probes(&probes, &seeds, 32, &bank, |q, sd| s.ablate_control_window(q, sd, window.clone()))?;
    let csv = format!("window,acc\nfull,{:.6}\n{},{:.6}\n", full.acc, a.window, ablated.acc);
    match &a.out {
        Some(p) => write_text(p, &csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}
