//! JSON model specifications for the three engines.
//!
//! The file format is strict: unknown keys are rejected with the offending
//! key named. The discriminating key decides the engine: `family` (count
//! model), `siaf` (point-process model), `epidemicColumns` (SIR model).

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{SpatialKernel, TemporalKernel};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeasonSpecFile {
    #[serde(rename = "S")]
    pub s: u32,
    pub period: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct WeightsSpecFile {
    /// "firstOrder" | "powerLaw" | "orderWeights"
    pub kind: String,
    pub maxlag: Option<u32>,
    pub normalize: Option<bool>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct ComponentSpecFile {
    #[serde(default = "default_true")]
    pub intercept: bool,
    #[serde(default)]
    pub formula_terms: Vec<String>,
    /// Named offset grid: "population" or a covariate file key.
    pub offset: Option<String>,
    pub season: Option<SeasonSpecFile>,
    pub weights: Option<WeightsSpecFile>,
}

fn default_true() -> bool {
    true
}

impl Default for SeasonSpecFile {
    fn default() -> Self {
        SeasonSpecFile { s: 1, period: 52.0 }
    }
}

/// Count-model spec file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hhh4SpecFile {
    pub family: String,
    pub endemic: Option<ComponentSpecFile>,
    pub ar: Option<ComponentSpecFile>,
    pub ne: Option<ComponentSpecFile>,
    /// 1-based inclusive [from, to] fitted time range; default [2, T].
    pub subset: Option<[usize; 2]>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwinstimEndemicFile {
    #[serde(default = "default_true")]
    pub intercept: bool,
    #[serde(default)]
    pub covariates: Vec<String>,
    /// stgrid column used as multiplicative offset (entering as log).
    pub offset: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwinstimEpidemicFile {
    #[serde(default = "default_true")]
    pub intercept: bool,
    #[serde(default)]
    pub covariates: Vec<String>,
}

/// Point-process model spec file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct TwinstimSpecFile {
    #[serde(default)]
    pub endemic: TwinstimEndemicFile,
    /// Absent means endemic-only.
    pub epidemic: Option<TwinstimEpidemicFile>,
    pub siaf: SpatialKernel,
    pub tiaf: Option<TemporalKernel>,
    /// Optional start values keyed by coefficient name.
    pub start: Option<BTreeMap<String, f64>>,
    /// Disc approximation order for influence regions (default 16).
    pub n_circle_poly: Option<usize>,
}

/// SIR model spec file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct TwinsirSpecFile {
    pub epidemic_columns: Vec<String>,
    #[serde(default)]
    pub endemic_columns: Vec<String>,
    #[serde(default = "default_true")]
    pub endemic_intercept: bool,
    /// Distance knots for rebuilding step-kernel epidemic terms (also the
    /// generative basis for simulation from a table-loaded history).
    pub distance_knots: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub enum ParsedSpec {
    Hhh4(Hhh4SpecFile),
    Twinstim(TwinstimSpecFile),
    Twinsir(TwinsirSpecFile),
}

/// Parse a model spec from JSON text, deciding the engine from the
/// discriminating key.
pub fn parse_model_spec_str(text: &str) -> Result<ParsedSpec> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::Invalid("model spec must be a JSON object".into()))?;
    if obj.contains_key("family") {
        Ok(ParsedSpec::Hhh4(serde_json::from_value(value)?))
    } else if obj.contains_key("siaf") {
        Ok(ParsedSpec::Twinstim(serde_json::from_value(value)?))
    } else if obj.contains_key("epidemicColumns") {
        Ok(ParsedSpec::Twinsir(serde_json::from_value(value)?))
    } else {
        let keys: Vec<&str> = obj.keys().map(|k| k.as_str()).collect();
        Err(Error::Invalid(format!(
            "model spec needs one of the keys family/siaf/epidemicColumns; found [{}]",
            keys.join(", ")
        )))
    }
}

/// Parse a model spec file.
pub fn parse_model_spec(path: &Path) -> Result<ParsedSpec> {
    let text = std::fs::read_to_string(path)?;
    parse_model_spec_str(&text)
}
