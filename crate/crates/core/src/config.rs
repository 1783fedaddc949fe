//! Run configuration as plain `key = value` lines under `[section]` headers.
//!
//! ```text
//! seed = 7
//! [unet]
//! base_channels = 16
//! channel_mults = 1,2,2
//! ```
//!
//! Every field has a default, so a file only lists what it changes. Lists are
//! comma separated; `#` starts a comment line.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::control::ControlConfig;
use crate::error::{Error, Result};
use crate::freqbalance::FreqEnhanceParams;
use crate::glyphdata::{FilterConfig, RenderConfig};
use crate::stager::StageSchedule;
use crate::train::TrainConfig;
use crate::unet::UNetConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Paths {
    pub dataset: PathBuf,
    pub checkpoints: PathBuf,
    pub outputs: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            dataset: "data/toy16".into(),
            checkpoints: "runs/toy16".into(),
            outputs: "out".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSettings {
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerSettings {
    pub steps: usize,
    /// Fourier enhancement during controlled steps.
    pub enhance: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub paths: Paths,
    pub dataset: DatasetSettings,
    pub render: RenderConfig,
    pub filter: FilterConfig,
    pub unet: UNetConfig,
    pub control: ControlConfig,
    pub stages: StageSchedule,
    pub sampler: SamplerSettings,
    pub enhance: FreqEnhanceParams,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            paths: Paths::default(),
            dataset: DatasetSettings { count: 2000 },
            render: RenderConfig::toy16(),
            filter: FilterConfig::scaled(8),
            unet: UNetConfig::default(),
            control: ControlConfig::default(),
            stages: StageSchedule::new(1000),
            sampler: SamplerSettings { steps: 50, enhance: true },
            enhance: FreqEnhanceParams::default(),
            train: TrainConfig::default(),
        }
    }
}

const SECTIONS: [&str; 10] = [
    "paths", "dataset", "render", "filter", "unet", "control", "stages", "sampler", "enhance", "train",
];

fn to_obj<T: Serialize>(v: &T) -> Map<String, Value> {
    match serde_json::to_value(v).expect("config sections serialize") {
        Value::Object(m) => m,
        _ => unreachable!("config sections are structs"),
    }
}

fn render_value(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Array(a) => a.iter().map(render_value).collect::<Vec<_>>().join(","),
        other => other.to_string(),
    }
}

fn parse_like(template: &Value, raw: &str) -> Option<Value> {
    let raw = raw.trim();
    match template {
        Value::Bool(_) => raw.parse().ok().map(Value::Bool),
        Value::Number(n) if n.is_f64() => raw.parse::<f64>().ok().and_then(serde_json::Number::from_f64).map(Value::Number),
        Value::Number(_) => raw.parse::<u64>().ok().map(Value::from),
        Value::String(_) => Some(Value::String(raw.to_string())),
        Value::Array(items) => {
            let elem = items.first()?;
            if raw.is_empty() {
                return Some(Value::Array(vec![]));
            }
            raw.split(',').map(|p| parse_like(elem, p)).collect::<Option<Vec<_>>>().map(Value::Array)
        }
        _ => None,
    }
}

impl RunConfig {
    fn sections(&self) -> Vec<(&'static str, Map<String, Value>)> {
        let mut train = to_obj(&self.train);
        train.remove("seed");
        vec![
            ("paths", to_obj(&self.paths)),
            ("dataset", to_obj(&self.dataset)),
            ("render", to_obj(&self.render)),
            ("filter", to_obj(&self.filter)),
            ("unet", to_obj(&self.unet)),
            ("control", to_obj(&self.control)),
            ("stages", to_obj(&self.stages)),
            ("sampler", to_obj(&self.sampler)),
            ("enhance", to_obj(&self.enhance)),
            ("train", train),
        ]
    }

    /// Full text form; parsing it back yields an equal config.
    pub fn to_text(&self) -> String {
        let mut out = format!("seed = {}\n", self.seed);
        for (name, fields) in self.sections() {
            out.push_str(&format!("\n[{name}]\n"));
            for (k, v) in fields {
                out.push_str(&format!("{k} = {}\n", render_value(&v)));
            }
        }
        out
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let base = RunConfig::default();
        let mut seed = base.seed;
        let mut sections = base.sections();
        let mut current: Option<usize> = None;
        let mut offset = 0;
        for line in text.split_inclusive('\n') {
            let at = offset;
            offset += line.len();
            let l = line.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            if let Some(name) = l.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
                let idx = SECTIONS
                    .iter()
                    .position(|s| *s == name.trim())
                    .ok_or_else(|| Error::parse(origin, at, format!("unknown section [{name}]")))?;
                current = Some(idx);
                continue;
            }
            let (key, raw) = l
                .split_once('=')
                .ok_or_else(|| Error::parse(origin, at, "expected key = value"))?;
            let key = key.trim();
            let Some(idx) = current else {
                if key != "seed" {
                    return Err(Error::parse(origin, at, format!("unknown top-level key {key:?}")));
                }
                seed = raw.trim().parse().map_err(|_| Error::parse(origin, at, "seed must be an unsigned integer"))?;
                continue;
            };
            let fields = &mut sections[idx].1;
            let template = fields
                .get(key)
                .ok_or_else(|| Error::parse(origin, at, format!("unknown key {key:?} in [{}]", SECTIONS[idx])))?;
            let value = parse_like(template, raw)
                .ok_or_else(|| Error::parse(origin, at, format!("bad value {:?} for {key}", raw.trim())))?;
            fields.insert(key.to_string(), value);
        }
        let mut it = sections.into_iter().map(|(name, m)| (name, Value::Object(m)));
        let mut next = |name: &str| it.next().filter(|(n, _)| *n == name).map(|(_, v)| v).expect("section order");
        fn take<T: DeserializeOwned>(v: Value, name: &str, origin: &Path) -> Result<T> {
            serde_json::from_value(v).map_err(|e| Error::parse(origin, 0, format!("[{name}]: {e}")))
        }
        let cfg = RunConfig {
            seed,
            paths: take(next("paths"), "paths", origin)?,
            dataset: take(next("dataset"), "dataset", origin)?,
            render: take(next("render"), "render", origin)?,
            filter: take(next("filter"), "filter", origin)?,
            unet: take(next("unet"), "unet", origin)?,
            control: take(next("control"), "control", origin)?,
            stages: take(next("stages"), "stages", origin)?,
            sampler: take(next("sampler"), "sampler", origin)?,
            enhance: take(next("enhance"), "enhance", origin)?,
            train: take(next("train"), "train", origin)?,
        };
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn validate(&self) -> Result<()> {
        self.render.validate()?;
        self.filter.validate()?;
        self.unet.validate()?;
        self.control.validate()?;
        self.stages.validate()?;
        self.enhance.validate()?;
        self.train.validate()?;
        if self.unet.image_size != self.render.canvas {
            return Err(Error::invalid(format!(
                "unet.image_size {} must equal render.canvas {}",
                self.unet.image_size, self.render.canvas
            )));
        }
        Ok(())
    }

    /// Training settings with the run seed applied.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig { seed: self.seed, ..self.train.clone() }
    }

    pub fn enhance_params(&self) -> Option<FreqEnhanceParams> {
        self.sampler.enhance.then_some(self.enhance)
    }
}
