use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::font::{self, GLYPH_HEIGHT};
use super::{BBox, GlyphSample, LineScorer, Orientation, TextLine};
use crate::error::{Error, Result};
use crate::evalkit::TemplateBank;
use crate::pgm::quantize;
use crate::tensor::Grid;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenderConfig {
    pub canvas: usize,
    /// Characters lines are drawn from.
    pub alphabet: String,
    pub min_lines: usize,
    pub max_lines: usize,
    pub max_chars: usize,
    pub scales: Vec<usize>,
    pub vertical_prob: f64,
    pub text_level: (f64, f64),
    pub background_level: (f64, f64),
    pub noise_amplitude: f64,
    pub max_retries: usize,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            canvas: 32,
            alphabet: font::STANDARD_ALPHABET.to_string(),
            min_lines: 1,
            max_lines: 3,
            max_chars: 4,
            scales: vec![1, 2],
            vertical_prob: 0.15,
            text_level: (0.75, 1.0),
            background_level: (0.0, 0.4),
            noise_amplitude: 0.05,
            max_retries: 64,
        }
    }
}

impl RenderConfig {
    /// The 16 standard classes plus the complex-glyph subset.
    pub fn toy16() -> Self {
        RenderConfig {
            alphabet: format!("{}{}", font::TOY16_ALPHABET, font::COMPLEX_ALPHABET),
            max_lines: 2,
            max_chars: 3,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !crate::tensor::fft::is_pow2(self.canvas) || self.canvas < 8 {
            return Err(Error::invalid(format!(
                "canvas must be a power of two >= 8, got {}",
                self.canvas
            )));
        }
        if self.alphabet.is_empty() || !self.alphabet.chars().all(font::is_supported) {
            return Err(Error::invalid("alphabet must be non-empty and supported by the font"));
        }
        if self.min_lines == 0 || self.min_lines > self.max_lines || self.max_lines > super::MAX_LINES {
            return Err(Error::invalid("line count range invalid"));
        }
        if self.scales.is_empty() || self.scales.contains(&0) || self.max_chars == 0 {
            return Err(Error::invalid("scales and max_chars must be positive"));
        }
        Ok(())
    }
}

/// Background texture of a scene.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Background {
    Solid(f64),
    Gradient { from: f64, to: f64, vertical: bool },
    Noise { level: f64, amplitude: f64 },
}

impl Background {
    fn random(rng: &mut ChaCha8Rng, cfg: &RenderConfig) -> Self {
        let (lo, hi) = cfg.background_level;
        match rng.random_range(0..3) {
            0 => Background::Solid(rng.random_range(lo..=hi)),
            1 => Background::Gradient {
                from: rng.random_range(lo..=hi),
                to: rng.random_range(lo..=hi),
                vertical: rng.random_bool(0.5),
            },
            _ => Background::Noise {
                level: rng.random_range(lo + cfg.noise_amplitude..=hi - cfg.noise_amplitude),
                amplitude: cfg.noise_amplitude,
            },
        }
    }

    fn paint(&self, rng: &mut ChaCha8Rng, h: usize, w: usize) -> Vec<f64> {
        (0..h * w)
            .map(|i| {
                let (y, x) = (i / w, i % w);
                match *self {
                    Background::Solid(v) => v,
                    Background::Gradient { from, to, vertical } => {
                        let t = if vertical { y as f64 / (h - 1) as f64 } else { x as f64 / (w - 1) as f64 };
                        from + (to - from) * t
                    }
                    Background::Noise { level, amplitude } => {
                        level + rng.random_range(-amplitude..=amplitude)
                    }
                }
            })
            .collect()
    }
}

/// Per-character cells of a line, in reading order.
pub fn char_cells(line: &TextLine) -> Vec<(char, BBox)> {
    let s = line.scale();
    let mut cells = Vec::with_capacity(line.content.len());
    let (mut x, mut y) = (line.bbox.x, line.bbox.y);
    for ch in line.content.chars() {
        let w = font::glyph_width(ch) * s;
        cells.push((ch, BBox::new(x, y, w, GLYPH_HEIGHT * s)));
        match line.orientation {
            Orientation::Horizontal => x += w + s,
            Orientation::Vertical => y += (GLYPH_HEIGHT + 1) * s,
        }
    }
    cells
}

fn for_each_stroke(line: &TextLine, mut f: impl FnMut(usize, usize)) {
    let s = line.scale();
    for (ch, cell) in char_cells(line) {
        let Some(bm) = font::glyph(ch) else { continue };
        for py in 0..cell.h {
            for px in 0..cell.w {
                if bm.at(px / s, py / s) {
                    f(cell.x + px, cell.y + py);
                }
            }
        }
    }
}

/// Standard-font rendering of every line at its box, white strokes on black.
pub fn render_glyph_map(lines: &[TextLine], height: usize, width: usize) -> Grid {
    let mut g = Grid::zeros(&[1, height, width]);
    for line in lines {
        for_each_stroke(line, |x, y| {
            if x < width && y < height {
                g.set(&[0, y, x], 1.0);
            }
        });
    }
    g
}

/// Binary union of line boxes.
pub fn render_position_map(lines: &[TextLine], height: usize, width: usize) -> Grid {
    let mut g = Grid::zeros(&[1, height, width]);
    for line in lines {
        let b = line.bbox;
        for y in b.y..(b.y + b.h).min(height) {
            for x in b.x..(b.x + b.w).min(width) {
                g.set(&[0, y, x], 1.0);
            }
        }
    }
    g
}

fn random_line(
    rng: &mut ChaCha8Rng,
    cfg: &RenderConfig,
    alphabet: &[char],
) -> Option<TextLine> {
    let canvas = cfg.canvas;
    let scale = cfg.scales[rng.random_range(0..cfg.scales.len())];
    let vertical = rng.random_bool(cfg.vertical_prob);
    let pitch = (GLYPH_HEIGHT + 1) * scale;
    let max_fit = match vertical {
        true => (canvas + scale) / pitch,
        false => (canvas + scale) / ((font::STANDARD_WIDTH + 1) * scale),
    };
    let min_n = if vertical { 2 } else { 1 };
    let max_n = cfg.max_chars.min(max_fit);
    if max_n < min_n {
        return None;
    }
    let n = rng.random_range(min_n..=max_n);
    let content: String = (0..n).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect();
    let orientation = if vertical { Orientation::Vertical } else { Orientation::Horizontal };
    let mut line = TextLine::layout(&content, 0, 0, scale, orientation).ok()?;
    if line.bbox.w > canvas || line.bbox.h > canvas {
        return None;
    }
    line.bbox.x = rng.random_range(0..=canvas - line.bbox.w);
    line.bbox.y = rng.random_range(0..=canvas - line.bbox.h);
    Some(line)
}

/// Deterministic scene for `seed`, scored with the full template bank.
pub fn render_sample(seed: u64, cfg: &RenderConfig) -> Result<GlyphSample> {
    render_sample_with(seed, cfg, &TemplateBank::full())
}

pub fn render_sample_with(
    seed: u64,
    cfg: &RenderConfig,
    scorer: &dyn LineScorer,
) -> Result<GlyphSample> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alphabet: Vec<char> = cfg.alphabet.chars().collect();
    let target = rng.random_range(cfg.min_lines..=cfg.max_lines);
    let mut lines: Vec<TextLine> = Vec::with_capacity(target);
    for idx in 0..target {
        let mut placed = None;
        for _ in 0..cfg.max_retries {
            if let Some(l) = random_line(&mut rng, cfg, &alphabet) {
                if lines.iter().all(|o| !o.bbox.overlaps(&l.bbox, 1)) {
                    placed = Some(l);
                    break;
                }
            }
        }
        match placed {
            Some(l) => lines.push(l),
            None if idx < cfg.min_lines => {
                return Err(Error::invalid(format!(
                    "seed {seed}: could not place line {idx} after {} retries",
                    cfg.max_retries
                )))
            }
            None => break,
        }
    }

    let (h, w) = (cfg.canvas, cfg.canvas);
    let bg = Background::random(&mut rng, cfg);
    let mut pixels = bg.paint(&mut rng, h, w);
    for line in &lines {
        let (lo, hi) = cfg.text_level;
        let level = rng.random_range(lo..=hi);
        for_each_stroke(line, |x, y| pixels[y * w + x] = level);
    }
    let image = Grid::from_parts(vec![1, h, w], pixels.into_iter().map(quantize).collect());
    for line in &mut lines {
        line.recognition_score = scorer.score(&image, line);
    }
    let class_sequences = lines.iter().map(TextLine::class_ids).collect();
    Ok(GlyphSample {
        seed,
        glyph_map: render_glyph_map(&lines, h, w),
        position_map: render_position_map(&lines, h, w),
        image,
        lines,
        class_sequences,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let cfg = RenderConfig::default();
        assert_eq!(render_sample(7, &cfg).unwrap(), render_sample(7, &cfg).unwrap());
        assert_ne!(render_sample(7, &cfg).unwrap().image, render_sample(8, &cfg).unwrap().image);
    }

    #[test]
    fn glyph_map_stays_inside_boxes() {
        let cfg = RenderConfig::default();
        for seed in 0..50 {
            let s = render_sample(seed, &cfg).unwrap();
            assert!(!s.lines.is_empty() && s.lines.len() <= cfg.max_lines);
            let outside = s
                .glyph_map
                .zip_map(&s.position_map, |g, p| g * (1.0 - p))
                .unwrap();
            assert_eq!(outside.max_abs(), 0.0);
            assert!(s.position_map.values().iter().all(|&v| v == 0.0 || v == 1.0));
            for l in &s.lines {
                assert_eq!(Orientation::from_bbox(&l.bbox), l.orientation);
                assert!(l.bbox.fits(32, 32));
                assert!((0.0..=1.0).contains(&l.recognition_score));
            }
            assert_eq!(render_glyph_map(&s.lines, 32, 32), s.glyph_map);
        }
    }

    #[test]
    fn letter_a_matches_font_table() {
        let line = TextLine::layout("A", 5, 9, 1, Orientation::Horizontal).unwrap();
        let g = render_glyph_map(&[line], 32, 32);
        let bm = font::glyph('A').unwrap();
        for y in 0..32 {
            for x in 0..32 {
                let inside = (5..10).contains(&x) && (9..16).contains(&y);
                let expected = inside && bm.at(x - 5, y - 9);
                assert_eq!(g.get(&[0, y, x]) == 1.0, expected, "pixel ({x},{y})");
            }
        }
    }

    #[test]
    fn rendered_text_scores_high() {
        let cfg = RenderConfig::toy16();
        let mut total = 0.0;
        let mut n = 0.0;
        for seed in 0..30 {
            for l in render_sample(seed, &cfg).unwrap().lines {
                total += l.recognition_score;
                n += 1.0;
            }
        }
        assert!(total / n > 0.8, "mean score {}", total / n);
    }

    #[test]
    fn impossible_placement_errors() {
        let cfg = RenderConfig {
            canvas: 8,
            scales: vec![2],
            ..RenderConfig::default()
        };
        assert!(render_sample(1, &cfg).is_err());
    }
}
