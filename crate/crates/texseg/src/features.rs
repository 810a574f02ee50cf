//! Feature-vector plumbing shared by the four extractors.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which texture measure produced a feature vector. `GlcmAveraged` is the
/// direction-averaged variant of the co-occurrence features (8-dim instead
/// of the concatenated 32-dim).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extractor {
    Glcm,
    GlcmAveraged,
    Rlm,
    Gmrf,
    Gabor,
}

impl Extractor {
    /// The four measures compared by the pipeline's `all` mode.
    pub const COMPARED: [Extractor; 4] =
        [Extractor::Glcm, Extractor::Rlm, Extractor::Gmrf, Extractor::Gabor];

    /// Feature dimension produced per window.
    pub fn dim(self) -> usize {
        match self {
            Extractor::Glcm => 32,
            Extractor::GlcmAveraged => 8,
            Extractor::Rlm => 20,
            Extractor::Gmrf => 7,
            Extractor::Gabor => 20,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Extractor::Glcm => "glcm",
            Extractor::GlcmAveraged => "glcm_averaged",
            Extractor::Rlm => "rlm",
            Extractor::Gmrf => "gmrf",
            Extractor::Gabor => "gabor",
        }
    }

    /// CSV column names in the documented order.
    ///
    /// GLCM and RLM are direction-major (0, 45, 90, 135 degrees) with the
    /// per-direction features minor; Gabor is frequency-major with
    /// orientation minor; GMRF is the six interaction weights then the
    /// residual variance.
    pub fn column_names(self) -> Vec<String> {
        const ANGLES: [&str; 4] = ["0", "45", "90", "135"];
        const GLCM_FEATURES: [&str; 8] = [
            "contrast",
            "correlation",
            "energy",
            "entropy",
            "homogeneity",
            "dissimilarity",
            "inverse_difference_moment",
            "maximum_probability",
        ];
        const RLM_FEATURES: [&str; 5] = ["sre", "lre", "gln", "rln", "rp"];
        match self {
            Extractor::Glcm => ANGLES
                .iter()
                .flat_map(|a| GLCM_FEATURES.iter().map(move |f| format!("d{a}_{f}")))
                .collect(),
            Extractor::GlcmAveraged => {
                GLCM_FEATURES.iter().map(|f| format!("avg_{f}")).collect()
            }
            Extractor::Rlm => ANGLES
                .iter()
                .flat_map(|a| RLM_FEATURES.iter().map(move |f| format!("d{a}_{f}")))
                .collect(),
            Extractor::Gmrf => (1..=6)
                .map(|i| format!("alpha{i}"))
                .chain(std::iter::once("sigma2".to_string()))
                .collect(),
            Extractor::Gabor => (1..=5)
                .flat_map(|f| ANGLES.iter().map(move |a| format!("f{f}_o{a}")))
                .collect(),
        }
    }
}

impl fmt::Display for Extractor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Extractor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "glcm" => Ok(Extractor::Glcm),
            "glcm_averaged" | "glcm-averaged" => Ok(Extractor::GlcmAveraged),
            "rlm" => Ok(Extractor::Rlm),
            "gmrf" => Ok(Extractor::Gmrf),
            "gabor" => Ok(Extractor::Gabor),
            other => Err(Error::Invalid(format!(
                "unknown extractor '{other}' (expected glcm, glcm_averaged, rlm, gmrf or gabor)"
            ))),
        }
    }
}

/// Fixed-length real feature vector produced by one extractor for one window.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub extractor: Extractor,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(extractor: Extractor, values: Vec<f64>) -> Result<Self> {
        if values.len() != extractor.dim() {
            return Err(Error::Invalid(format!(
                "{} feature vector must have {} components, got {}",
                extractor.name(),
                extractor.dim(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "{} feature vector contains non-finite components",
                extractor.name()
            )));
        }
        Ok(Self { extractor, values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// A feature vector tied to the window center it was extracted at.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSample {
    pub row: usize,
    pub col: usize,
    pub values: Vec<f64>,
}

/// Writes feature samples as CSV with a `row,col` prefix and the extractor's
/// documented column order.
pub fn write_features_csv(
    path: impl AsRef<Path>,
    extractor: Extractor,
    samples: &[FeatureSample],
) -> Result<()> {
    let mut out = String::new();
    out.push_str("row,col,");
    out.push_str(&extractor.column_names().join(","));
    out.push('\n');
    for s in samples {
        out.push_str(&format!("{},{}", s.row, s.col));
        for v in &s.values {
            out.push_str(&format!(",{}", fmt_f64(*v)));
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Round-trip-exact float formatting used by every CSV writer in the crate.
pub(crate) fn fmt_f64(v: f64) -> String {
    let mut s = format!("{v:e}");
    // `{:e}` prints "1e0" for 1.0; keep it parseable and compact.
    if !s.contains('e') {
        s = format!("{v}");
    }
    s
}
