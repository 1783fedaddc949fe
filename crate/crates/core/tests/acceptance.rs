//! Acceptance harness: one PASS/FAIL line per criterion.
//!
//! Trained models are cached under the cargo target tmpdir, keyed by the run
//! configuration, so only the first run pays for training. Set
//! `GLYPHFORGE_ACCEPTANCE=quick` to skip the criteria that need trained models,
//! and `GLYPHFORGE_ACCEPTANCE_STRICT=1` to exit non-zero when any criterion fails.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Parser;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use glyphforge::cli::{self, corpus_seed, Cli};
use glyphforge::config::RunConfig;
use glyphforge::control::{ControlBranch, ControlConfig, ControlInputs, ControlStageKind};
use glyphforge::diffusion::default_schedule;
use glyphforge::evalkit::{levenshtein, ned, recognize_line, relative_log_amplitude, TemplateBank};
use glyphforge::freqbalance::{fuse, gamma_modulate, gamma_modulate_var, FreqEnhanceParams};
use glyphforge::glyphdata::font::{COMPLEX_ALPHABET, TOY16_ALPHABET};
use glyphforge::glyphdata::{filter_sample, load_filter_fixtures, render_sample, FilterConfig, GlyphSample, RenderConfig, TextLine};
use glyphforge::nn::Bound;
use glyphforge::pipeline::{capture_spectra, image_seeds, run_probes, single_glyph_probes, GlyphProbe, Models};
use glyphforge::stager::{route, sample_training_timestep, ControlWindow, Request, Sampler, StageSchedule};
use glyphforge::tensor::{fft2, gradcheck, ifft2, Grid};
use glyphforge::train::{TrainConfig, TrainLog};
use glyphforge::unet::{ConditionEmbedding, UNet, UNetConfig};
use glyphforge::{Error, Result};

const CACHE_VERSION: u32 = 1;
const TRAIN_BUDGET_SECS: f64 = 1800.0;
const EVAL_SEEDS: [u64; 3] = [11, 22, 33];
const CHUNK: usize = 32;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Result<Verdict> {
    Ok(Verdict { pass, detail: detail.into() })
}

fn small_unet(mults: Vec<usize>) -> UNetConfig {
    UNetConfig {
        image_size: 16,
        base_channels: 4,
        channel_mults: mults,
        time_embed_dim: 8,
        cond_embed_dim: 8,
        norm_groups: 2,
        ..UNetConfig::default()
    }
}

fn small_control() -> ControlConfig {
    ControlConfig {
        hint_channels: 4,
        min_masked_size: 8,
        ..ControlConfig::default()
    }
}

/// Randomizes the zero-initialized output projections so control features are non-trivial.
fn perturb_outputs(b: &mut ControlBranch, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names: Vec<String> = b.params.iter().map(|(n, _)| n.to_string()).filter(|n| n.starts_with("out")).collect();
    for n in names {
        let id = b.params.id(&n).expect("listed name");
        let shape = b.params.get(id).shape().to_vec();
        *b.params.get_mut(id) = Grid::randn(&shape, &mut rng).scale(0.2);
    }
}

fn numeric_core() -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut rt, mut pv) = (0.0f64, 0.0f64);
    for &(c, h, w) in &[(3, 32, 32), (2, 16, 8), (1, 64, 64)] {
        let x = Grid::randn(&[c, h, w], &mut rng);
        let spec = fft2(&x)?;
        rt = rt.max(ifft2(&spec)?.max_abs_diff(&x));
        let e_time = x.sum_sq();
        pv = pv.max((spec.energy() / (h * w) as f64 - e_time).abs() / e_time);
    }

    let x = Grid::randn(&[2, 3, 8, 8], &mut rng);
    let wt = Grid::randn(&[4, 3, 3, 3], &mut rng);
    let b = Grid::randn(&[4], &mut rng);
    let conv = gradcheck::check(&[x.clone(), wt, b], None, |_, v| {
        let y = v[0].conv2d(&v[1], Some(&v[2]), 2, 1)?;
        Ok(y.mul(&y)?.sum())
    })?
    .max_rel_error;

    let branch = ControlBranch::new(ControlStageKind::Global, small_control(), &small_unet(vec![1, 2]), 3)?;
    let mut inputs = vec![Grid::uniform(&[1, 1, 8, 8], 0.0, 1.0, &mut rng)];
    inputs.extend(branch.params.iter().map(|(_, g)| g.clone()));
    let fec = gradcheck::check(&inputs, Some(8), |_, v| {
        let p = Bound::from_vars(v[1..].to_vec());
        let lifted = branch.fec().forward(&p, &v[0])?;
        let y = branch.fec().freq_branch(&p, &lifted)?.ok_or_else(|| Error::Missing("frequency branch".into()))?;
        Ok(y.mul(&y)?.sum())
    })?
    .max_rel_error;

    let c = Grid::randn(&[2, 3, 8, 8], &mut rng);
    let target = Grid::randn(&[2, 3, 8, 8], &mut rng);
    let gamma = gradcheck::check(&[c], None, |tape, v| {
        gamma_modulate_var(&v[0], &FreqEnhanceParams::default())?.mse(&tape.constant(target.clone()))
    })?
    .max_rel_error;

    let net = UNet::new(small_unet(vec![1, 2]), 4)?;
    let cond = ConditionEmbedding::batch(&[ConditionEmbedding::new(vec![vec![2, 5]])?], net.cfg.num_classes)?;
    let xin = Grid::randn(&[1, 1, 16, 16], &mut rng);
    let ytarget = Grid::randn(&[1, 1, 16, 16], &mut rng);
    let mut inputs = vec![xin];
    inputs.extend(net.params.iter().map(|(_, g)| g.clone()));
    let unet = gradcheck::check(&inputs, Some(6), |tape, v| {
        let p = Bound::from_vars(v[1..].to_vec());
        net.forward(&p, &v[0], &[123], &cond, None, None)?.mse(&tape.constant(ytarget.clone()))
    })?
    .max_rel_error;

    let worst_grad = conv.max(fec).max(gamma).max(unet);
    verdict(
        rt < 1e-6 && pv < 1e-6 && worst_grad < 1e-4,
        format!("fft round-trip {rt:.1e}, parseval {pv:.1e}; grad rel err conv {conv:.1e} fec-freq {fec:.1e} gamma {gamma:.1e} unet {unet:.1e}"),
    )
}

/// Direct DFT of one plane; the oracle for the FFT-based paths.
fn direct_dft(x: &[f64], h: usize, w: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(h * w);
    for ky in 0..h {
        for kx in 0..w {
            let (mut re, mut im) = (0.0, 0.0);
            for y in 0..h {
                for xx in 0..w {
                    let a = -2.0 * std::f64::consts::PI * ((ky * y) as f64 / h as f64 + (kx * xx) as f64 / w as f64);
                    re += x[y * w + xx] * a.cos();
                    im += x[y * w + xx] * a.sin();
                }
            }
            out.push((re, im));
        }
    }
    out
}

fn enhancement_semantics() -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let c = Grid::randn(&[1, 4, 16, 16], &mut rng);
    let identity = FreqEnhanceParams { s: 1.0, ..FreqEnhanceParams::default() };
    let id_err = gamma_modulate(&c, &identity)?.max_abs_diff(&c);

    let s = FreqEnhanceParams::default().s;
    let konst = Grid::full(&[1, 1, 8, 8], 0.7);
    let out = gamma_modulate(&konst, &FreqEnhanceParams::default())?;
    let d_in = direct_dft(konst.values(), 8, 8);
    let d_out = direct_dft(out.values(), 8, 8);
    let dc_ratio = d_out[0].0 / d_in[0].0;
    let rest = d_out[1..].iter().map(|(r, i)| r.abs().max(i.abs())).fold(0.0, f64::max);

    let net = UNet::new(small_unet(vec![1, 2]), 5)?;
    let cond = ConditionEmbedding::batch(&[ConditionEmbedding::unconditional()], net.cfg.num_classes)?;
    let x = Grid::randn(&[1, 1, 16, 16], &mut rng);
    let controls: Vec<Grid> = [(8, 8), (4, 16)].iter().map(|&(ch, sz)| Grid::randn(&[1, ch, sz, sz], &mut rng)).collect();
    let (snaps, plain) = net.capture_decoder_features(&x, &[300], &cond, Some(&controls))?;
    let neutral = FreqEnhanceParams::neutral();
    let mut fuse_equal = true;
    for snap in &snaps {
        let c = snap.control.as_ref().expect("controls given");
        let fused = fuse(&snap.base, &snap.skip, c, &neutral)?;
        let n = snap.skip.shape()[1];
        let manual_first = snap.skip.add(c)?;
        let f = fused.values();
        let plane = snap.skip.len();
        fuse_equal &= f[..plane] == *manual_first.values() && f[plane..plane + snap.base.len()] == *snap.base.values();
        fuse_equal &= fused.shape()[1] == n + snap.base.shape()[1];
    }
    let (skips, mid) = net.encode_grids(&x, &[300], &cond)?;
    let enhanced = net.replay_decoder(&skips, &mid, &[300], &cond, Some(&controls), Some(&neutral))?;
    fuse_equal &= enhanced == plain;

    let d = FreqEnhanceParams::default();
    let defaults = (d.alpha, d.beta, d.s) == (1.4, 1.2, 0.2);
    verdict(
        id_err < 1e-6 && (dc_ratio - s).abs() < 1e-12 && rest < 1e-9 && fuse_equal && defaults,
        format!(
            "identity err {id_err:.1e}, DC ratio {dc_ratio} (s = {s}), off-DC {rest:.1e}, neutral fuse bit-equal {fuse_equal}, defaults ({}, {}, {})",
            d.alpha, d.beta, d.s
        ),
    )
}

fn fresh_models(seed: u64) -> Result<Models> {
    Models::untrained(UNetConfig::default(), ControlConfig::default(), seed)
}

fn zero_init_equivalence() -> Result<Verdict> {
    let models = fresh_models(30)?;
    let noise = default_schedule();
    let probes = single_glyph_probes(TOY16_ALPHABET, 4, 32, 3)?;
    let reqs: Vec<Request> = probes.iter().map(|p| p.request.clone()).collect();
    let seeds = image_seeds(3, 4);
    let plain = Sampler::new(&models.base, &noise).generate(&reqs, &seeds)?;
    let ctl = models.sampler(&noise).generate(&reqs, &seeds)?;
    let worst = plain.iter().zip(&ctl).map(|(a, b)| a.max_abs_diff(b)).fold(0.0, f64::max);
    verdict(worst <= 1e-7, format!("max per-pixel difference {worst:.1e} over 4 images x 50 steps"))
}

fn stage_discipline() -> Result<Verdict> {
    let ss = StageSchedule::new(1000);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let g: Vec<usize> = (0..10_000).map(|_| sample_training_timestep(ControlStageKind::Global, &ss, &mut rng)).collect();
    let d: Vec<usize> = (0..10_000).map(|_| sample_training_timestep(ControlStageKind::Detail, &ss, &mut rng)).collect();
    let (gmin, gmax) = (*g.iter().min().unwrap(), *g.iter().max().unwrap());
    let (dmin, dmax) = (*d.iter().min().unwrap(), *d.iter().max().unwrap());
    let ranges = gmin > 500 && gmax <= 1000 && dmin >= 1 && dmax <= 500;
    let transitions = (2..=1000).filter(|&t| route(t, &ss) != route(t - 1, &ss)).count();
    let partition = transitions == 1 && route(1000, &ss) == ControlStageKind::Global && route(1, &ss) == ControlStageKind::Detail;

    let dir = tempfile::tempdir().map_err(|e| Error::Io { path: "tempdir".into(), source: e })?;
    let cfg_text = format!(
        "[paths]\ncheckpoints = {}\n[render]\ncanvas = 16\n[unet]\nimage_size = 16\nbase_channels = 4\nchannel_mults = 1,2\ntime_embed_dim = 8\ncond_embed_dim = 8\nnorm_groups = 2\n[control]\nhint_channels = 4\nmin_masked_size = 8\n[sampler]\nsteps = 10\n",
        dir.path().join("ckpt").display()
    );
    let cfg_path = dir.path().join("tiny.cfg");
    std::fs::write(&cfg_path, &cfg_text).map_err(|e| Error::Io { path: cfg_path.clone(), source: e })?;
    let cfg = RunConfig::load(&cfg_path)?;
    let base = UNet::new(cfg.unet.clone(), 0)?;
    let global = ControlBranch::from_unet(ControlStageKind::Global, cfg.control.clone(), &base, 1)?;
    let detail = ControlBranch::warm_start_detail(&global, 2)?;
    Models { base, global, detail }.save(&cfg.paths.checkpoints)?;
    let input = dir.path().join("in.pgm");
    glyphforge::pgm::write(&input, &Grid::full(&[1, 16, 16], 0.2))?;
    let out = dir.path().join("edited.pgm");
    let args = [
        "glyphforge",
        "--config",
        cfg_path.to_str().unwrap(),
        "edit",
        "--input",
        input.to_str().unwrap(),
        "--text",
        "K",
        "--boxes",
        r#"[{"x": 2, "y": 1, "scale": 2}]"#,
        "--out",
        out.to_str().unwrap(),
    ];
    cli::run(Cli::try_parse_from(args).map_err(|e| Error::Invalid(e.to_string()))?)?;
    let prov: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.with_extension("json")).unwrap()).unwrap();
    let t_star = prov["edit_t"].as_u64().unwrap_or(0);
    verdict(
        ranges && partition && t_star == 800,
        format!("global draws [{gmin}, {gmax}], detail draws [{dmin}, {dmax}], route transitions {transitions}, edit provenance t* = {t_star}"),
    )
}

fn mask_locality() -> Result<Verdict> {
    let base = UNet::new(UNetConfig::default(), 50)?;
    let mut detail = ControlBranch::from_unet(ControlStageKind::Detail, ControlConfig::default(), &base, 51)?;
    perturb_outputs(&mut detail, 52);
    let mut unmasked = detail.clone();
    unmasked.cfg.min_masked_size = usize::MAX;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let probe = &single_glyph_probes(TOY16_ALPHABET, 1, 32, 5)?[0];
    let mut bundle = probe.request.bundle.clone().with_masked(&Grid::uniform(&[1, 32, 32], 0.0, 1.0, &mut rng))?;
    bundle.position = Grid::zeros(&[1, 32, 32]);
    bundle.masked_image = Some(Grid::uniform(&[1, 32, 32], 0.0, 1.0, &mut rng));
    let inputs = ControlInputs::stack(&[&bundle])?;
    let x = Grid::randn(&[1, 1, 32, 32], &mut rng);
    let cond = ConditionEmbedding::batch(std::slice::from_ref(&probe.request.cond), base.cfg.num_classes)?;
    let masked = detail.predict(&inputs, &x, &[200], &cond)?;
    let raw = unmasked.predict(&inputs, &x, &[200], &cond)?;
    let (snaps, _) = base.capture_decoder_features(&x, &[200], &cond, Some(&masked))?;
    let at_fusion: Vec<&Grid> = snaps.iter().map(|s| s.control.as_ref().expect("controls given")).collect();
    let n = at_fusion.len();
    let last_two_zero = at_fusion[n - 2..].iter().all(|c| c.max_abs() == 0.0);
    let raw_nonzero = raw[n - 2..].iter().all(|c| c.max_abs() > 0.0);
    let deepest_same = *at_fusion[0] == raw[0] && raw[0].max_abs() > 0.0;
    let sizes: Vec<usize> = at_fusion.iter().map(|c| c.shape()[2]).collect();
    verdict(
        last_two_zero && raw_nonzero && deepest_same,
        format!("decoder sizes {sizes:?}: last two zero {last_two_zero} (unmasked non-zero {raw_nonzero}), deepest unchanged {deepest_same}"),
    )
}

/// Plain dynamic-programming edit distance, written independently of evalkit.
fn oracle_distance(a: &[char], b: &[char]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.iter().enumerate() {
        let mut cur = vec![i + 1];
        for (j, cb) in b.iter().enumerate() {
            cur.push((prev[j] + (ca != cb) as usize).min(prev[j + 1] + 1).min(cur[j] + 1));
        }
        prev = cur;
    }
    prev[b.len()]
}

fn all_strings(max_len: usize) -> Vec<String> {
    let mut out = vec![String::new()];
    let mut frontier = vec![String::new()];
    for _ in 0..max_len {
        frontier = frontier.iter().flat_map(|s| ['A', 'B', 'C'].map(|c| format!("{s}{c}"))).collect();
        out.extend(frontier.iter().cloned());
    }
    out
}

fn metrics_and_filters() -> Result<Verdict> {
    let strings = all_strings(3);
    let mut mismatches = 0;
    for a in &strings {
        for b in &strings {
            let (ac, bc): (Vec<char>, Vec<char>) = (a.chars().collect(), b.chars().collect());
            let d = oracle_distance(&ac, &bc);
            let denom = ac.len().max(bc.len());
            let expect = if denom == 0 { 1.0 } else { 1.0 - d as f64 / denom as f64 };
            if levenshtein(a, b) != d || (ned(a, b) - expect).abs() > 1e-12 {
                mismatches += 1;
            }
        }
    }
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data/filter_fixtures.json");
    let fixtures = load_filter_fixtures(&path)?;
    let wrong: Vec<&str> = fixtures
        .iter()
        .filter(|f| filter_sample(&f.meta, &FilterConfig::default()) != f.expected())
        .map(|f| f.name.as_str())
        .collect();
    verdict(
        mismatches == 0 && wrong.is_empty() && !fixtures.is_empty(),
        format!(
            "{} string pairs, {mismatches} ned mismatches; {} filter fixtures, wrong: {wrong:?}",
            strings.len() * strings.len(),
            fixtures.len()
        ),
    )
}

fn spectrum_tool(trained: Option<&Trained>) -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let noise_curve = relative_log_amplitude(&Grid::randn(&[8, 32, 32], &mut rng))?;
    let lo = noise_curve.log_amp.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = noise_curve.log_amp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let flat = hi - lo;

    let mut models = fresh_models(110)?;
    perturb_outputs(&mut models.global, 111);
    let noise = default_schedule();
    let ss = StageSchedule::new(1000);
    let probes = single_glyph_probes(TOY16_ALPHABET, 8, 32, 11)?;
    let params = FreqEnhanceParams::default();
    let expected = (1.0 / params.s).ln();
    let mut worst = 0.0f64;
    let mut bins_checked = 0;
    for layer in 0..models.base.decoder_layers() {
        let raw = capture_spectra(&models, &noise, &ss, &probes, layer, 800, 11, None)?;
        let mod_ = capture_spectra(&models, &noise, &ss, &probes, layer, 800, 11, Some(&params))?;
        let (r, m) = (&raw[2].1, &mod_[2].1);
        for b in (0..r.len()).filter(|&b| r.bin_upper(b) <= params.r_thresh) {
            worst = worst.max(((r.log_amp[b] - m.log_amp[b]) - expected).abs());
            bins_checked += 1;
        }
    }
    let ordering = match trained {
        Some(t) => {
            let curves = capture_spectra(&t.models, &noise, &ss, &probes, t.models.base.decoder_layers() - 1, 200, 11, None)?;
            let n = curves[0].1.len();
            let high = n / 2..n;
            let above = high.clone().filter(|&b| curves[1].1.rel_log_amp[b] > curves[0].1.rel_log_amp[b]).count();
            format!("; trained model, finest layer: skip above base in {above}/{} high-frequency bins (reported only)", high.len())
        }
        None => String::new(),
    };
    verdict(
        flat <= 0.5 && bins_checked > 0 && worst <= 0.05,
        format!("white-noise spread {flat:.3}; γ shift error {worst:.1e} over {bins_checked} suppressed bins (expected ln(1/s) = {expected:.4}){ordering}"),
    )
}

struct Trained {
    models: Models,
    spatial: Models,
    train_secs: f64,
}

fn cache_dir(tcfg: &TrainConfig) -> PathBuf {
    let key = format!(
        "v{CACHE_VERSION}|{:?}|{:?}|{:?}|{:?}",
        UNetConfig::default(),
        ControlConfig::default(),
        tcfg,
        RenderConfig::toy16()
    );
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in key.bytes() {
        h = (h ^ b as u64).wrapping_mul(0x100_0000_01b3);
    }
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance-cache").join(format!("{h:016x}"))
}

fn toy_corpus() -> Result<Vec<GlyphSample>> {
    (0..2000).map(|i| render_sample(corpus_seed(0, i), &RenderConfig::toy16())).collect()
}

fn load_or_train() -> Result<Trained> {
    let tcfg = TrainConfig::default();
    let dir = cache_dir(&tcfg);
    let timing = dir.join("train_secs.txt");
    let noise = default_schedule();
    let ss = StageSchedule::new(1000);
    let mut corpus = None;
    let (models, train_secs) = match (Models::load(&dir.join("full")), std::fs::read_to_string(&timing)) {
        (Ok(m), Ok(t)) => (m, t.trim().parse().unwrap_or(f64::INFINITY)),
        _ => {
            eprintln!("training toy models into {}", dir.display());
            let data = corpus.insert(toy_corpus()?);
            let start = Instant::now();
            let mut log = TrainLog::default();
            let m = Models::train(data, UNetConfig::default(), ControlConfig::default(), &tcfg, &noise, &ss, &mut log)?;
            let secs = start.elapsed().as_secs_f64();
            m.save(&dir.join("full"))?;
            std::fs::write(dir.join("loss.csv"), log.to_csv()).map_err(|e| Error::Io { path: dir.clone(), source: e })?;
            std::fs::write(&timing, format!("{secs}\n")).map_err(|e| Error::Io { path: timing.clone(), source: e })?;
            (m, secs)
        }
    };
    let spatial = match Models::load(&dir.join("spatial")) {
        Ok(m) => m,
        Err(_) => {
            eprintln!("training spatial-only control branches");
            let data = match corpus.as_ref() {
                Some(c) => c,
                None => corpus.insert(toy_corpus()?),
            };
            let cfg = ControlConfig { freq_branch: false, ..ControlConfig::default() };
            let m = Models::train_controls(models.base.clone(), data, cfg, &tcfg, &noise, &ss, &mut TrainLog::default())?;
            m.save(&dir.join("spatial"))?;
            m
        }
    };
    Ok(Trained { models, spatial, train_secs })
}

fn probe_acc(s: &Sampler, probes: &[GlyphProbe], seed: u64, bank: &TemplateBank, window: Option<ControlWindow>) -> Result<f64> {
    let seeds = image_seeds(seed, probes.len());
    let (report, _) = run_probes(probes, &seeds, CHUNK, bank, |r, sd| match &window {
        Some(w) => s.ablate_control_window(r, sd, w.clone()),
        None => s.generate(r, sd),
    })?;
    Ok(report.acc)
}

struct EnhanceRuns {
    full: Vec<f64>,
}

fn controllability(t: &Trained) -> Result<(Verdict, EnhanceRuns)> {
    let noise = default_schedule();
    let bank = TemplateBank::toy16();
    let full = t.models.sampler(&noise).with_enhance(Some(FreqEnhanceParams::default()));
    let plain = Sampler::new(&t.models.base, &noise);
    let (mut ctl, mut unc) = (Vec::new(), Vec::new());
    for &seed in &EVAL_SEEDS {
        let probes = single_glyph_probes(TOY16_ALPHABET, 128, 32, seed)?;
        ctl.push(probe_acc(&full, &probes, seed, &bank, None)?);
        unc.push(probe_acc(&plain, &probes, seed, &bank, None)?);
    }
    let passing = ctl.iter().zip(&unc).filter(|(c, u)| **c >= 0.80 && **u <= 0.17).count();
    let in_budget = t.train_secs <= TRAIN_BUDGET_SECS;
    let v = Verdict {
        pass: passing >= 2 && in_budget,
        detail: format!(
            "controlled ACC {} / uncontrolled ACC {} over 3 seeds x 128 probes; {passing}/3 seeds pass; training {:.0}s (budget {TRAIN_BUDGET_SECS:.0}s)",
            fmt_accs(&ctl),
            fmt_accs(&unc),
            t.train_secs
        ),
    };
    Ok((v, EnhanceRuns { full: ctl }))
}

fn fmt_accs(v: &[f64]) -> String {
    format!("[{}]", v.iter().map(|a| format!("{a:.3}")).collect::<Vec<_>>().join(", "))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn ablation_direction(t: &Trained, runs: &EnhanceRuns) -> Result<Verdict> {
    let noise = default_schedule();
    let bank = TemplateBank::toy16();
    let neutral_sampler = t.models.sampler(&noise).with_enhance(Some(FreqEnhanceParams::neutral()));
    let mut neutral = Vec::new();
    for &seed in &EVAL_SEEDS {
        let probes = single_glyph_probes(TOY16_ALPHABET, 128, 32, seed)?;
        neutral.push(probe_acc(&neutral_sampler, &probes, seed, &bank, None)?);
    }
    let enhance_delta = mean(&runs.full) - mean(&neutral);

    let complex_bank = TemplateBank::for_alphabet(&format!("{TOY16_ALPHABET}{COMPLEX_ALPHABET}"))?;
    let with_freq = t.models.sampler(&noise).with_enhance(Some(FreqEnhanceParams::default()));
    let spatial = t.spatial.sampler(&noise).with_enhance(Some(FreqEnhanceParams::default()));
    let (mut f, mut s) = (Vec::new(), Vec::new());
    for &seed in &EVAL_SEEDS {
        let probes = single_glyph_probes(COMPLEX_ALPHABET, 64, 32, seed + 100)?;
        f.push(probe_acc(&with_freq, &probes, seed + 100, &complex_bank, None)?);
        s.push(probe_acc(&spatial, &probes, seed + 100, &complex_bank, None)?);
    }
    let fec_delta = mean(&f) - mean(&s);
    let enhance_ok = enhance_delta >= -0.02;
    let fec_ok = fec_delta >= 0.02;
    let mut detail = format!(
        "enhancement: defaults {} vs neutral {} (mean delta {enhance_delta:+.3}, floor -0.02); complex glyphs: FEC {} vs spatial-only {} (mean delta {fec_delta:+.3}, need +0.02)",
        fmt_accs(&runs.full),
        fmt_accs(&neutral),
        fmt_accs(&f),
        fmt_accs(&s)
    );
    if !fec_ok {
        detail.push_str(&format!(
            "; DIAGNOSTIC: frequency branch did not improve complex-glyph ACC at this scale{}",
            if mean(&s) >= 0.95 { " (spatial-only already at ceiling)" } else { "" }
        ));
    }
    verdict(enhance_ok && fec_ok, detail)
}

fn editing(t: &Trained) -> Result<Verdict> {
    let noise = default_schedule();
    let s = t.models.sampler(&noise).with_enhance(Some(FreqEnhanceParams::default()));
    let bank = TemplateBank::toy16();
    let rc = RenderConfig {
        alphabet: TOY16_ALPHABET.into(),
        min_lines: 1,
        max_lines: 1,
        max_chars: 1,
        scales: vec![2],
        vertical_prob: 0.0,
        ..RenderConfig::toy16()
    };
    let sources: Vec<GlyphSample> = (0..64).map(|i| render_sample(90_000 + i, &rc)).collect::<Result<_>>()?;
    let alphabet: Vec<char> = TOY16_ALPHABET.chars().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut identity_reqs = Vec::new();
    let mut content_reqs = Vec::new();
    let mut new_lines = Vec::new();
    for src in &sources {
        let line = &src.lines[0];
        identity_reqs.push(Request {
            cond: ConditionEmbedding::new(vec![line.class_ids()])?,
            bundle: glyphforge::control::ControlBundle::from_lines(&src.lines, 32, 32),
        });
        let old = line.content.chars().next().unwrap();
        let new = loop {
            let c = alphabet[rng.random_range(0..alphabet.len())];
            if c != old {
                break c;
            }
        };
        let nl = TextLine { content: new.to_string(), ..line.clone() };
        content_reqs.push(Request {
            cond: ConditionEmbedding::new(vec![nl.class_ids()])?,
            bundle: glyphforge::control::ControlBundle::from_lines(std::slice::from_ref(&nl), 32, 32),
        });
        new_lines.push(nl);
    }
    let originals: Vec<Grid> = sources.iter().map(|s| s.image.clone()).collect();
    let seeds = image_seeds(8, sources.len());
    let mut outside = Vec::new();
    let mut hits = 0;
    for start in (0..sources.len()).step_by(CHUNK) {
        let end = (start + CHUNK).min(sources.len());
        let same = s.edit(&originals[start..end], &identity_reqs[start..end], &seeds[start..end])?;
        for (k, img) in same.iter().enumerate() {
            let src = &sources[start + k];
            let (mut se, mut n) = (0.0, 0.0);
            for ((a, b), p) in img.values().iter().zip(src.image.values()).zip(src.position_map.values()) {
                if *p == 0.0 {
                    se += (a - b) * (a - b);
                    n += 1.0;
                }
            }
            outside.push(se / n);
        }
        let changed = s.edit(&originals[start..end], &content_reqs[start..end], &seeds[start..end])?;
        for (k, img) in changed.iter().enumerate() {
            let nl = &new_lines[start + k];
            hits += (recognize_line(img, nl, &bank)? == nl.content) as usize;
        }
    }
    let mse = mean(&outside);
    let worst = outside.iter().cloned().fold(0.0, f64::max);
    let rate = hits as f64 / sources.len() as f64;
    verdict(
        mse < 0.05 && rate >= 0.70,
        format!("identity edits: mean out-of-mask MSE {mse:.4} (worst {worst:.4}); content edits read as new glyph {hits}/{} = {rate:.3}", sources.len()),
    )
}

fn control_window(t: &Trained) -> Result<Verdict> {
    let noise = default_schedule();
    let s = t.models.sampler(&noise).with_enhance(Some(FreqEnhanceParams::default()));
    let bank = TemplateBank::toy16();
    let probes = single_glyph_probes(TOY16_ALPHABET, 64, 32, 99)?;
    let full = probe_acc(&s, &probes, 99, &bank, None)?;
    let late_off = probe_acc(&s, &probes, 99, &bank, Some(ControlWindow::Only(251..=1000)))?;
    verdict(late_off < full, format!("full control ACC {full:.3}, control removed for t <= 250: ACC {late_off:.3}"))
}

struct Runner {
    passed: usize,
    failed: usize,
    skipped: usize,
}

impl Runner {
    fn report(&mut self, id: u32, name: &str, start: Instant, result: Result<Verdict>) {
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(v) => {
                if v.pass {
                    self.passed += 1;
                } else {
                    self.failed += 1;
                }
                println!("{} {id:>2} {name}: {} ({secs:.1}s)", if v.pass { "PASS" } else { "FAIL" }, v.detail);
            }
            Err(e) => {
                self.failed += 1;
                println!("FAIL {id:>2} {name}: error: {e} ({secs:.1}s)");
            }
        }
    }

    fn skip(&mut self, id: u32, name: &str, why: &str) {
        self.skipped += 1;
        println!("SKIP {id:>2} {name}: {why}");
    }
}

fn main() {
    let quick = std::env::var("GLYPHFORGE_ACCEPTANCE").is_ok_and(|v| v == "quick");
    let mut r = Runner { passed: 0, failed: 0, skipped: 0 };
    let timed = |f: fn() -> Result<Verdict>| (Instant::now(), f);

    let (t, f) = timed(numeric_core);
    r.report(1, "numeric core", t, f());
    let (t, f) = timed(enhancement_semantics);
    r.report(2, "enhancement semantics", t, f());
    let (t, f) = timed(zero_init_equivalence);
    r.report(3, "zero-init equivalence", t, f());
    let (t, f) = timed(stage_discipline);
    r.report(4, "stage discipline", t, f());
    let (t, f) = timed(mask_locality);
    r.report(5, "mask locality", t, f());

    let trained = if quick {
        None
    } else {
        match load_or_train() {
            Ok(t) => Some(t),
            Err(e) => {
                println!("FAIL  6 end-to-end controllability: training failed: {e}");
                r.failed += 1;
                None
            }
        }
    };
    match &trained {
        Some(tr) => {
            let t = Instant::now();
            match controllability(tr) {
                Ok((v, runs)) => {
                    r.report(6, "end-to-end controllability", t, Ok(v));
                    let t = Instant::now();
                    r.report(7, "ablation direction", t, ablation_direction(tr, &runs));
                }
                Err(e) => {
                    r.report(6, "end-to-end controllability", t, Err(e));
                    r.skip(7, "ablation direction", "needs the controllability runs");
                }
            }
            let t = Instant::now();
            r.report(8, "editing paradigm", t, editing(tr));
            let t = Instant::now();
            r.report(9, "control-window ablation", t, control_window(tr));
        }
        None => {
            for (id, name) in [(6, "end-to-end controllability"), (7, "ablation direction"), (8, "editing paradigm"), (9, "control-window ablation")] {
                if quick {
                    r.skip(id, name, "quick mode");
                }
            }
        }
    }

    let (t, f) = timed(metrics_and_filters);
    r.report(10, "metrics and filters", t, f());
    let t = Instant::now();
    r.report(11, "spectrum tool", t, spectrum_tool(trained.as_ref()));

    println!("acceptance: {} passed, {} failed, {} skipped", r.passed, r.failed, r.skipped);
    let strict = std::env::var("GLYPHFORGE_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && r.failed > 0 {
        std::process::exit(1);
    }
}

