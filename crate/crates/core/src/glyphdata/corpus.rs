//! Corpus layout: `manifest.json`, then per sample one PGM image and one JSON
//! sidecar holding the line annotations. Control maps are re-rendered from
//! the annotations on load.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{render_glyph_map, render_position_map, GlyphSample, TextLine};
use crate::error::{Error, Result};
use crate::pgm;

/// What the filter cascade and the sidecar files see of a sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub width: usize,
    pub height: usize,
    pub lines: Vec<TextLine>,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    seed: u64,
    width: usize,
    height: usize,
    lines: Vec<TextLine>,
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    id: usize,
    image: String,
    meta: String,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    format: String,
    count: usize,
    samples: Vec<ManifestEntry>,
}

const FORMAT: &str = "glyphforge-corpus/1";

fn json_offset(text: &str, err: &serde_json::Error) -> usize {
    if err.line() == 0 {
        return 0;
    }
    let line_start: usize = text
        .split_inclusive('\n')
        .take(err.line() - 1)
        .map(str::len)
        .sum();
    (line_start + err.column().saturating_sub(1)).min(text.len())
}

pub(crate) fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_json(&text, path)
}

/// Parses JSON text; errors carry the byte offset within `text`.
pub(crate) fn parse_json<T: DeserializeOwned>(text: &str, origin: &Path) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::parse(origin, json_offset(text, &e), e.to_string()))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable value");
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_dataset(dir: &Path, samples: &[GlyphSample]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(samples.len());
    for (id, s) in samples.iter().enumerate() {
        let image = format!("{id:06}.pgm");
        let meta = format!("{id:06}.json");
        pgm::write(&dir.join(&image), &s.image)?;
        write_json(
            &dir.join(&meta),
            &Sidecar {
                seed: s.seed,
                width: s.width(),
                height: s.height(),
                lines: s.lines.clone(),
            },
        )?;
        entries.push(ManifestEntry { id, image, meta });
    }
    write_json(
        &dir.join("manifest.json"),
        &Manifest {
            format: FORMAT.into(),
            count: entries.len(),
            samples: entries,
        },
    )
}

pub fn read_dataset(dir: &Path) -> Result<Vec<GlyphSample>> {
    let manifest_path = dir.join("manifest.json");
    let manifest: Manifest = read_json(&manifest_path)?;
    if manifest.format != FORMAT || manifest.count != manifest.samples.len() {
        return Err(Error::parse(&manifest_path, 0, "unrecognized manifest format or count"));
    }
    manifest
        .samples
        .iter()
        .map(|e| {
            let meta_path = dir.join(&e.meta);
            let side: Sidecar = read_json(&meta_path)?;
            let image = pgm::read(&dir.join(&e.image))?;
            if image.shape() != [1, side.height, side.width] {
                return Err(Error::parse(&meta_path, 0, "sidecar size disagrees with image"));
            }
            super::validate_lines(&side.lines)
                .map_err(|err| Error::parse(&meta_path, 0, err.to_string()))?;
            Ok(GlyphSample {
                seed: side.seed,
                glyph_map: render_glyph_map(&side.lines, side.height, side.width),
                position_map: render_position_map(&side.lines, side.height, side.width),
                class_sequences: side.lines.iter().map(TextLine::class_ids).collect(),
                image,
                lines: side.lines,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub image_count: usize,
    pub line_count: usize,
    pub mean_chars_per_line: f64,
    /// Fraction of lines shorter than 20 characters.
    pub frac_lines_under_20: f64,
}

pub fn dataset_stats<'a>(metas: impl IntoIterator<Item = &'a SampleMeta>) -> DatasetStats {
    let (mut images, mut lines, mut chars, mut short) = (0usize, 0usize, 0usize, 0usize);
    for m in metas {
        images += 1;
        for l in &m.lines {
            let n = l.content.chars().count();
            lines += 1;
            chars += n;
            if n < 20 {
                short += 1;
            }
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    DatasetStats {
        image_count: images,
        line_count: lines,
        mean_chars_per_line: ratio(chars, lines),
        frac_lines_under_20: ratio(short, lines),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glyphdata::{render_sample, Orientation, RenderConfig};

    #[test]
    fn stats_on_small_inputs() {
        assert_eq!(
            dataset_stats(&[]),
            DatasetStats {
                image_count: 0,
                line_count: 0,
                mean_chars_per_line: 0.0,
                frac_lines_under_20: 0.0
            }
        );
        let mk = |s: &str| SampleMeta {
            width: 32,
            height: 32,
            lines: vec![TextLine::layout(s, 0, 0, 1, Orientation::Horizontal).unwrap()],
        };
        let st = dataset_stats(&[mk("AB"), mk("ABCD")]);
        assert_eq!(st.mean_chars_per_line, 3.0);
        assert_eq!(st.line_count, 2);
        assert_eq!(st.frac_lines_under_20, 1.0);
    }

    #[test]
    fn round_trip_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RenderConfig::default();
        let samples: Vec<_> = (0..12).map(|s| render_sample(s, &cfg).unwrap()).collect();
        write_dataset(dir.path(), &samples).unwrap();
        assert_eq!(read_dataset(dir.path()).unwrap(), samples);
    }

    #[test]
    fn malformed_sidecar_reports_location() {
        let dir = tempfile::tempdir().unwrap();
        let samples = vec![render_sample(1, &RenderConfig::default()).unwrap()];
        write_dataset(dir.path(), &samples).unwrap();
        let p = dir.path().join("000000.json");
        let text = fs::read_to_string(&p).unwrap();
        fs::write(&p, &text[..text.len() / 2]).unwrap();
        match read_dataset(dir.path()).unwrap_err() {
            Error::Parse { file, .. } => assert_eq!(file, p),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn truncated_image_is_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let samples = vec![render_sample(2, &RenderConfig::default()).unwrap()];
        write_dataset(dir.path(), &samples).unwrap();
        let p = dir.path().join("000000.pgm");
        let bytes = fs::read(&p).unwrap();
        fs::write(&p, &bytes[..bytes.len() - 10]).unwrap();
        assert!(matches!(read_dataset(dir.path()), Err(Error::Parse { .. })));
    }
}
