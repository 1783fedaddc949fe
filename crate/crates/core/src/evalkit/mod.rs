//! Recognition oracle, text metrics, spectrum analysis and evaluation reports.

mod metrics;
mod recognize;
mod report;
mod spectrum;

pub use metrics::{levenshtein, mean_ned, ned, sentence_acc};
pub use recognize::{classify_crop, read_line, recognize_line, Classification, Template, TemplateBank};
pub use report::{evaluate_images, evaluate_model, EvalReport, LinePrediction};
pub use spectrum::{relative_log_amplitude, SpectrumCurve, LOG_FLOOR};
