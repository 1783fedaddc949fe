use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{ned, sentence_acc};
use super::recognize::{recognize_line, TemplateBank};
use crate::error::{Error, Result};
use crate::glyphdata::{GlyphSample, TextLine};
use crate::tensor::Grid;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinePrediction {
    pub line_id: usize,
    pub gt: String,
    pub pred: String,
}

impl LinePrediction {
    pub fn correct(&self) -> bool {
        self.gt == self.pred
    }

    pub fn ned(&self) -> f64 {
        ned(&self.pred, &self.gt)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub lines: Vec<LinePrediction>,
    pub acc: f64,
    pub ned: f64,
    /// Character confusion counts keyed by `(truth, prediction)`.
    pub confusion: BTreeMap<(char, char), usize>,
}

impl EvalReport {
    pub fn from_predictions(lines: Vec<LinePrediction>) -> Result<Self> {
        let gt: Vec<&str> = lines.iter().map(|l| l.gt.as_str()).collect();
        let pred: Vec<&str> = lines.iter().map(|l| l.pred.as_str()).collect();
        let acc = sentence_acc(&pred, &gt)?;
        let ned = super::metrics::mean_ned(&pred, &gt)?;
        let mut confusion = BTreeMap::new();
        for l in &lines {
            for (g, p) in l.gt.chars().zip(l.pred.chars()) {
                *confusion.entry((g, p)).or_insert(0) += 1;
            }
        }
        Ok(EvalReport { lines, acc, ned, confusion })
    }

    pub fn n(&self) -> usize {
        self.lines.len()
    }

    pub fn lines_csv(&self) -> String {
        let mut s = String::from("line_id,gt,pred,line_acc,ned\n");
        for l in &self.lines {
            let _ = writeln!(s, "{},{},{},{},{:.6}", l.line_id, l.gt, l.pred, u8::from(l.correct()), l.ned());
        }
        s
    }

    pub fn summary_csv(&self) -> String {
        format!("acc,ned,n\n{:.6},{:.6},{}\n", self.acc, self.ned, self.n())
    }

    pub fn confusion_csv(&self) -> String {
        let mut s = String::from("gt,pred,count\n");
        for ((g, p), n) in &self.confusion {
            let _ = writeln!(s, "{g},{p},{n}");
        }
        s
    }

    /// Writes `lines.csv`, `summary.csv` and `confusion.csv` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, body) in [
            ("lines.csv", self.lines_csv()),
            ("summary.csv", self.summary_csv()),
            ("confusion.csv", self.confusion_csv()),
        ] {
            let p = dir.join(name);
            fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }
}

/// Reads every requested line back out of its image.
pub fn evaluate_images(images: &[Grid], requests: &[Vec<TextLine>], bank: &TemplateBank) -> Result<EvalReport> {
    if images.len() != requests.len() {
        return Err(Error::Shape {
            axis: "image count",
            expected: requests.len(),
            got: images.len(),
        });
    }
    let mut lines = Vec::new();
    for (img, req) in images.iter().zip(requests) {
        for l in req {
            lines.push(LinePrediction {
                line_id: lines.len(),
                gt: l.content.clone(),
                pred: recognize_line(img, l, bank)?,
            });
        }
    }
    EvalReport::from_predictions(lines)
}

/// Runs `generate` on each corpus sample (with its index) and scores the
/// outputs against the sample's annotations.
pub fn evaluate_model<G>(mut generate: G, corpus: &[GlyphSample], bank: &TemplateBank) -> Result<EvalReport>
where
    G: FnMut(usize, &GlyphSample) -> Result<Grid>,
{
    let images = corpus
        .iter()
        .enumerate()
        .map(|(i, s)| generate(i, s))
        .collect::<Result<Vec<_>>>()?;
    let requests: Vec<Vec<TextLine>> = corpus.iter().map(|s| s.lines.clone()).collect();
    evaluate_images(&images, &requests, bank)
}
