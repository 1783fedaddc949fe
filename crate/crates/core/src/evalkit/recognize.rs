//! Template-matching glyph recognizer.

use crate::error::{Error, Result};
use crate::glyphdata::{char_cells, font, LineScorer, TextLine};
use crate::tensor::Grid;

/// A zero-mean, unit-norm glyph template.
#[derive(Clone, Debug, PartialEq)]
pub struct Template {
    pub ch: char,
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

/// Centers and L2-normalizes; `None` for a constant input.
fn normalize(v: &[f64]) -> Option<Vec<f64>> {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let centered: Vec<f64> = v.iter().map(|x| x - mean).collect();
    let norm = centered.iter().map(|x| x * x).sum::<f64>().sqrt();
    (norm > 1e-12 * (1.0 + mean.abs())).then(|| centered.into_iter().map(|x| x / norm).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct TemplateBank {
    templates: Vec<Template>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Classification {
    pub ch: char,
    pub class_id: usize,
    /// Correlation mapped from `[-1, 1]` to `[0, 1]`.
    pub score: f64,
}

impl TemplateBank {
    pub fn for_alphabet(alphabet: &str) -> Result<Self> {
        let mut templates = Vec::new();
        for ch in alphabet.chars() {
            if templates.iter().any(|t: &Template| t.ch == ch) {
                continue;
            }
            let bm = font::glyph(ch).ok_or_else(|| Error::invalid(format!("no glyph for {ch:?}")))?;
            let values = normalize(&bm.to_f64()).expect("glyphs are not constant");
            templates.push(Template {
                ch,
                width: bm.width,
                height: bm.height,
                values,
            });
        }
        if templates.is_empty() {
            return Err(Error::invalid("template bank needs at least one class"));
        }
        Ok(TemplateBank { templates })
    }

    /// Every glyph the font defines.
    pub fn full() -> Self {
        Self::for_alphabet(&format!("{}{}", font::STANDARD_ALPHABET, font::COMPLEX_ALPHABET))
            .expect("font alphabet")
    }

    pub fn toy16() -> Self {
        Self::for_alphabet(font::TOY16_ALPHABET).expect("toy alphabet")
    }

    pub fn templates(&self) -> &[Template] {
        &self.templates
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn contains(&self, ch: char) -> bool {
        self.templates.iter().any(|t| t.ch == ch)
    }
}

fn plane(crop: &Grid) -> Result<(usize, usize)> {
    let s = crop.shape();
    match s {
        [h, w] | [1, h, w] | [1, 1, h, w] => Ok((*h, *w)),
        _ => Err(Error::Size(format!("crop must be a single plane, got {s:?}"))),
    }
}

/// Best-correlating template for a crop, after nearest resampling to each
/// template's size.
pub fn classify_crop(crop: &Grid, bank: &TemplateBank) -> Result<Classification> {
    let (h, w) = plane(crop)?;
    let src = crop.values();
    let mut best: Option<(usize, f64)> = None;
    for (k, t) in bank.templates.iter().enumerate() {
        let resampled: Vec<f64> = (0..t.height * t.width)
            .map(|i| {
                let (y, x) = (i / t.width, i % t.width);
                src[(y * h / t.height) * w + x * w / t.width]
            })
            .collect();
        let Some(v) = normalize(&resampled) else {
            return Err(Error::invalid("empty crop: no intensity variation"));
        };
        let corr: f64 = v.iter().zip(&t.values).map(|(a, b)| a * b).sum();
        if best.is_none_or(|(_, c)| corr > c) {
            best = Some((k, corr));
        }
    }
    let (k, corr) = best.expect("non-empty bank");
    let ch = bank.templates[k].ch;
    Ok(Classification {
        ch,
        class_id: font::class_id(ch).expect("bank glyphs are in the font"),
        score: ((corr + 1.0) / 2.0).clamp(0.0, 1.0),
    })
}

fn crop_box(image: &Grid, x: usize, y: usize, w: usize, h: usize) -> Result<Grid> {
    let (ih, iw) = plane(image)?;
    if x + w > iw || y + h > ih || w == 0 || h == 0 {
        return Err(Error::Size(format!("crop {w}x{h}+{x}+{y} outside {iw}x{ih} image")));
    }
    let v = image.values();
    Ok(Grid::from_fn(&[h, w], |i| v[(y + i / w) * iw + x + i % w]))
}

/// Per-character classification of a line's cells.
pub fn read_line(image: &Grid, line: &TextLine, bank: &TemplateBank) -> Result<Vec<Option<Classification>>> {
    char_cells(line)
        .into_iter()
        .map(|(_, b)| {
            let crop = crop_box(image, b.x, b.y, b.w, b.h)?;
            match classify_crop(&crop, bank) {
                Ok(c) => Ok(Some(c)),
                Err(Error::Invalid(_)) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect()
}

/// Recognized text of a line; blank cells read as `?`.
pub fn recognize_line(image: &Grid, line: &TextLine, bank: &TemplateBank) -> Result<String> {
    Ok(read_line(image, line, bank)?
        .into_iter()
        .map(|c| c.map_or('?', |c| c.ch))
        .collect())
}

impl LineScorer for TemplateBank {
    /// Mean over characters of the match score, zero where the read is wrong.
    fn score(&self, image: &Grid, line: &TextLine) -> f64 {
        let Ok(reads) = read_line(image, line, self) else { return 0.0 };
        let n = reads.len().max(1) as f64;
        line.content
            .chars()
            .zip(reads)
            .map(|(gt, r)| match r {
                Some(c) if c.ch == gt => c.score,
                _ => 0.0,
            })
            .sum::<f64>()
            / n
    }
}
