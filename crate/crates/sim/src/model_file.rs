//! Versioned JSON container for a trained net and its companions.
//!
//! Floats are written in shortest round-trip form and parsed with exact
//! rounding, so a save/load cycle reproduces every weight bit for bit.

use std::path::Path;

use crossbar_core::nn::{InputRange, Mlp, QuantizationCache};
use crossbar_core::pca::PcaModel;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

pub const FORMAT: &str = "crossbar-mlp";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub model: Mlp,
    /// Projection applied to raw inputs before the first layer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pca: Option<PcaModel>,
    /// Per-layer input ranges for crossbar inference.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<Vec<InputRange>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantization: Option<QuantizationCache>,
}

#[derive(Serialize)]
struct Envelope<'a> {
    format: &'static str,
    version: u32,
    #[serde(flatten)]
    body: &'a ModelFile,
}

#[derive(Deserialize)]
struct Header {
    format: String,
    version: u32,
}

#[derive(Deserialize)]
struct Body {
    #[serde(flatten)]
    body: ModelFile,
}

impl ModelFile {
    pub fn new(model: Mlp) -> Self {
        Self { model, pca: None, calibration: None, quantization: None }
    }

    pub fn to_json(&self) -> String {
        let env = Envelope { format: FORMAT, version: VERSION, body: self };
        let mut s = serde_json::to_string_pretty(&env).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let header: Header = serde_json::from_str(text).map_err(|e| parse_error(text, &e))?;
        if header.format != FORMAT || header.version != VERSION {
            return Err(SimError::VersionMismatch {
                format: header.format,
                found: header.version,
                expected_format: FORMAT,
                supported: VERSION,
            });
        }
        let body: Body = serde_json::from_str(text).map_err(|e| parse_error(text, &e))?;
        // re-validate invariants that deserialization bypasses
        let model = Mlp::new(body.body.model.layers().to_vec())?;
        Ok(ModelFile { model, ..body.body })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(SimError::io(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(SimError::io(path))?;
        Self::from_json(&text)
    }
}

fn parse_error(text: &str, e: &serde_json::Error) -> SimError {
    let context = text.lines().nth(e.line().saturating_sub(1)).unwrap_or("").trim().to_string();
    SimError::Parse { line: e.line(), column: e.column(), message: e.to_string(), context }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crossbar_core::nn::Activation;
    use crossbar_core::rng;
    use rand::Rng;

    fn net() -> Mlp {
        Mlp::glorot(&[5, 4, 3], &[Activation::Relu, Activation::Sigmoid], &mut rng::root(1)).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let file = ModelFile { calibration: Some(vec![InputRange::UNIT; 2]), ..ModelFile::new(net()) };
        let back = ModelFile::from_json(&file.to_json()).unwrap();
        assert_eq!(back, file);
        let mut r = rng::root(2);
        for _ in 0..100 {
            let x: Vec<f64> = (0..5).map(|_| r.random_range(-3.0..3.0)).collect();
            let (a, b) = (file.model.forward(&x).unwrap(), back.model.forward(&x).unwrap());
            assert!(a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
    }

    #[test]
    fn future_version_is_rejected() {
        let text = ModelFile::new(net()).to_json().replace("\"version\": 1", "\"version\": 2");
        assert!(matches!(ModelFile::from_json(&text), Err(SimError::VersionMismatch { found: 2, .. })));
        let text = ModelFile::new(net()).to_json().replace(FORMAT, "other");
        assert!(matches!(ModelFile::from_json(&text), Err(SimError::VersionMismatch { .. })));
    }

    #[test]
    fn corrupt_file_reports_line() {
        let good = ModelFile::new(net()).to_json();
        let mut lines: Vec<&str> = good.lines().collect();
        lines[5] = "    \"weights\" [[oops";
        let text = lines.join("\n");
        match ModelFile::from_json(&text) {
            Err(SimError::Parse { line, context, .. }) => {
                assert_eq!(line, 6);
                assert!(context.contains("oops"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
