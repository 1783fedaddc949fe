use serde::{Deserialize, Serialize};

use std::path::Path;

use super::{read_json, Orientation, SampleMeta};

/// Thresholds of the dataset filter cascade.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub min_width: usize,
    pub aspect_min: f64,
    pub aspect_max: f64,
    pub max_lines: usize,
    pub max_small_lines: usize,
    pub small_extent_px: f64,
    pub min_rec_score: f64,
    pub max_low_score_lines: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            min_width: 256,
            aspect_min: 0.5,
            aspect_max: 2.0,
            max_lines: 10,
            max_small_lines: 3,
            small_extent_px: 30.0,
            min_rec_score: 0.7,
            max_low_score_lines: 3,
        }
    }
}

impl FilterConfig {
    /// Pixel thresholds divided by `factor`; ratios and counts unchanged.
    /// Toy 32 px canvases use a factor of 8.
    pub fn scaled(factor: usize) -> Self {
        let d = Self::default();
        FilterConfig {
            min_width: d.min_width / factor,
            small_extent_px: d.small_extent_px / factor as f64,
            ..d
        }
    }

    pub fn validate(&self) -> crate::Result<()> {
        let positive = self.min_width > 0
            && self.aspect_min > 0.0
            && self.small_extent_px > 0.0
            && self.min_rec_score > 0.0;
        if !positive || self.aspect_min >= self.aspect_max {
            return Err(crate::Error::invalid("filter thresholds must be positive with aspect_min < aspect_max"));
        }
        Ok(())
    }
}

/// Filter rules in evaluation order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterRule {
    MinWidth,
    Aspect,
    MaxLines,
    SmallText,
    LowScore,
}

impl FilterRule {
    pub fn id(&self) -> &'static str {
        match self {
            FilterRule::MinWidth => "min_width",
            FilterRule::Aspect => "aspect",
            FilterRule::MaxLines => "max_lines",
            FilterRule::SmallText => "small_text",
            FilterRule::LowScore => "low_score",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterDecision {
    pub accept: bool,
    pub reason: Option<FilterRule>,
}

impl FilterDecision {
    fn reject(rule: FilterRule) -> Self {
        FilterDecision {
            accept: false,
            reason: Some(rule),
        }
    }
}

/// Applies the cascade and reports the first rule that fires.
pub fn filter_sample(meta: &SampleMeta, cfg: &FilterConfig) -> FilterDecision {
    if meta.width < cfg.min_width {
        return FilterDecision::reject(FilterRule::MinWidth);
    }
    let aspect = meta.width as f64 / meta.height as f64;
    if aspect > cfg.aspect_max || aspect < cfg.aspect_min {
        return FilterDecision::reject(FilterRule::Aspect);
    }
    if meta.lines.len() > cfg.max_lines {
        return FilterDecision::reject(FilterRule::MaxLines);
    }
    let small = meta
        .lines
        .iter()
        .filter(|l| match Orientation::from_bbox(&l.bbox) {
            Orientation::Horizontal => (l.bbox.h as f64) < cfg.small_extent_px,
            Orientation::Vertical => (l.bbox.w as f64) < cfg.small_extent_px,
        })
        .count();
    if small > cfg.max_small_lines {
        return FilterDecision::reject(FilterRule::SmallText);
    }
    let low = meta
        .lines
        .iter()
        .filter(|l| l.recognition_score < cfg.min_rec_score)
        .count();
    if low > cfg.max_low_score_lines {
        return FilterDecision::reject(FilterRule::LowScore);
    }
    FilterDecision {
        accept: true,
        reason: None,
    }
}

/// A filter input with its documented decision.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterFixture {
    pub name: String,
    /// The rule being exercised, in words.
    pub rule: String,
    pub meta: SampleMeta,
    pub accept: bool,
    pub reason: Option<FilterRule>,
}

impl FilterFixture {
    pub fn expected(&self) -> FilterDecision {
        FilterDecision {
            accept: self.accept,
            reason: self.reason,
        }
    }
}

pub fn load_filter_fixtures(path: &Path) -> crate::Result<Vec<FilterFixture>> {
    read_json(path)
}
