//! Procedural glyph-scene corpus: rendering, annotation, filtering, and
//! on-disk layout.

mod corpus;
mod filter;
pub mod font;
mod render;

pub(crate) use corpus::{parse_json, read_json, write_json};
pub use corpus::{dataset_stats, read_dataset, write_dataset, DatasetStats, SampleMeta};
pub use filter::{filter_sample, load_filter_fixtures, FilterConfig, FilterDecision, FilterFixture, FilterRule};
pub use render::{
    char_cells, render_glyph_map, render_position_map, render_sample, render_sample_with,
    Background, RenderConfig,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Grid;

/// Longest permitted text line, in characters.
pub const MAX_LINE_CHARS: usize = 20;
/// Most text lines permitted in one image.
pub const MAX_LINES: usize = 5;

/// Axis-aligned pixel box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BBox {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl BBox {
    pub fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        BBox { x, y, w, h }
    }

    pub fn aspect(&self) -> f64 {
        self.w as f64 / self.h as f64
    }

    pub fn contains(&self, px: usize, py: usize) -> bool {
        px >= self.x && px < self.x + self.w && py >= self.y && py < self.y + self.h
    }

    /// True when the boxes, each grown by `margin`, intersect.
    pub fn overlaps(&self, other: &BBox, margin: usize) -> bool {
        self.x < other.x + other.w + margin
            && other.x < self.x + self.w + margin
            && self.y < other.y + other.h + margin
            && other.y < self.y + self.h + margin
    }

    pub fn fits(&self, width: usize, height: usize) -> bool {
        self.w > 0 && self.h > 0 && self.x + self.w <= width && self.y + self.h <= height
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Horizontal,
    Vertical,
}

impl Orientation {
    /// Boxes narrower than half their height read as vertical text.
    pub fn from_bbox(b: &BBox) -> Self {
        if b.aspect() < 0.5 {
            Orientation::Vertical
        } else {
            Orientation::Horizontal
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TextLine {
    pub content: String,
    pub bbox: BBox,
    pub orientation: Orientation,
    #[serde(rename = "score")]
    pub recognition_score: f64,
}

impl TextLine {
    /// Lays out `content` at `(x, y)` with an integer pixel scale. The box is
    /// the tight extent of the glyph cells (one scaled pixel between glyphs).
    pub fn layout(
        content: &str,
        x: usize,
        y: usize,
        scale: usize,
        orientation: Orientation,
    ) -> Result<Self> {
        validate_content(content)?;
        if scale == 0 {
            return Err(Error::invalid("glyph scale must be positive"));
        }
        let n = content.chars().count();
        let widths: Vec<usize> = content.chars().map(font::glyph_width).collect();
        let (w, h) = match orientation {
            Orientation::Horizontal => (
                widths.iter().sum::<usize>() * scale + (n - 1) * scale,
                font::GLYPH_HEIGHT * scale,
            ),
            Orientation::Vertical => (
                widths.iter().copied().max().unwrap_or(0) * scale,
                n * font::GLYPH_HEIGHT * scale + (n - 1) * scale,
            ),
        };
        let bbox = BBox::new(x, y, w, h);
        if Orientation::from_bbox(&bbox) != orientation {
            return Err(Error::invalid(format!(
                "{orientation:?} layout of {content:?} has aspect {:.2}, inconsistent with orientation rule",
                bbox.aspect()
            )));
        }
        Ok(TextLine {
            content: content.to_string(),
            bbox,
            orientation,
            recognition_score: 1.0,
        })
    }

    /// Integer pixel scale implied by the box.
    pub fn scale(&self) -> usize {
        match self.orientation {
            Orientation::Horizontal => self.bbox.h / font::GLYPH_HEIGHT,
            Orientation::Vertical => {
                let maxw = self.content.chars().map(font::glyph_width).max().unwrap_or(1);
                self.bbox.w / maxw
            }
        }
        .max(1)
    }

    pub fn class_ids(&self) -> Vec<usize> {
        self.content.chars().filter_map(font::class_id).collect()
    }
}

pub fn validate_content(content: &str) -> Result<()> {
    let n = content.chars().count();
    if n == 0 || n > MAX_LINE_CHARS {
        return Err(Error::invalid(format!(
            "text line must have 1..={MAX_LINE_CHARS} characters, got {n}"
        )));
    }
    if let Some(bad) = content.chars().find(|&c| !font::is_supported(c)) {
        return Err(Error::invalid(format!("unsupported character {bad:?}")));
    }
    Ok(())
}

pub fn validate_lines(lines: &[TextLine]) -> Result<()> {
    if lines.len() > MAX_LINES {
        return Err(Error::invalid(format!(
            "at most {MAX_LINES} text lines allowed, got {}",
            lines.len()
        )));
    }
    lines.iter().try_for_each(|l| validate_content(&l.content))
}

/// One rendered scene with its annotations and control maps.
#[derive(Clone, Debug, PartialEq)]
pub struct GlyphSample {
    pub seed: u64,
    pub image: Grid,
    pub lines: Vec<TextLine>,
    pub glyph_map: Grid,
    pub position_map: Grid,
    pub class_sequences: Vec<Vec<usize>>,
}

impl GlyphSample {
    pub fn height(&self) -> usize {
        self.image.shape()[1]
    }

    pub fn width(&self) -> usize {
        self.image.shape()[2]
    }

    pub fn meta(&self) -> SampleMeta {
        SampleMeta {
            width: self.width(),
            height: self.height(),
            lines: self.lines.clone(),
        }
    }
}

/// Scores a rendered line; the corpus uses it to fill `recognition_score`.
pub trait LineScorer {
    fn score(&self, image: &Grid, line: &TextLine) -> f64;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_extents() {
        let l = TextLine::layout("AB", 3, 4, 2, Orientation::Horizontal).unwrap();
        assert_eq!(l.bbox, BBox::new(3, 4, 22, 14));
        assert_eq!(l.scale(), 2);
        let v = TextLine::layout("AB", 0, 0, 1, Orientation::Vertical).unwrap();
        assert_eq!(v.bbox, BBox::new(0, 0, 5, 15));
        assert_eq!(v.scale(), 1);
        assert!(TextLine::layout("A", 0, 0, 1, Orientation::Vertical).is_err());
        assert!(TextLine::layout("", 0, 0, 1, Orientation::Horizontal).is_err());
        assert!(TextLine::layout(&"A".repeat(21), 0, 0, 1, Orientation::Horizontal).is_err());
    }

    #[test]
    fn orientation_rule() {
        assert_eq!(Orientation::from_bbox(&BBox::new(0, 0, 4, 10)), Orientation::Vertical);
        assert_eq!(Orientation::from_bbox(&BBox::new(0, 0, 5, 10)), Orientation::Horizontal);
    }

    #[test]
    fn line_limits() {
        let l = TextLine::layout("A", 0, 0, 1, Orientation::Horizontal).unwrap();
        assert!(validate_lines(&vec![l.clone(); 5]).is_ok());
        assert!(validate_lines(&vec![l; 6]).is_err());
    }
}
