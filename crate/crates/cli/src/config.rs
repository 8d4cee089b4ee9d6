//! Experiment configuration files.
//!
//! A config is one JSON object:
//!
//! ```json
//! { "kind": "contraction", "seed": 7, "parameters": { ... } }
//! ```
//!
//! `parameters` is checked against the schema of `kind`; every error
//! carries the line and column it refers to.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use sha2::{Digest, Sha256};

use crate::params::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Subcheck,
    Moments,
    Picard,
    Contraction,
    Invariant,
    HarnackLog,
    HarnackPower,
    Entropy,
    FpkeCorrespond,
    FpkeStability,
}

impl Kind {
    pub const ALL: [Kind; 10] = [
        Kind::Subcheck,
        Kind::Moments,
        Kind::Picard,
        Kind::Contraction,
        Kind::Invariant,
        Kind::HarnackLog,
        Kind::HarnackPower,
        Kind::Entropy,
        Kind::FpkeCorrespond,
        Kind::FpkeStability,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::Subcheck => "subcheck",
            Kind::Moments => "moments",
            Kind::Picard => "picard",
            Kind::Contraction => "contraction",
            Kind::Invariant => "invariant",
            Kind::HarnackLog => "harnack_log",
            Kind::HarnackPower => "harnack_power",
            Kind::Entropy => "entropy",
            Kind::FpkeCorrespond => "fpke_correspond",
            Kind::FpkeStability => "fpke_stability",
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            Kind::Subcheck => "Laplace transform of a subordinator against e^{-tφ(r)}",
            Kind::Moments => "sup-moment estimate and its stability when paths double",
            Kind::Picard => "Picard iteration decay",
            Kind::Contraction => "Wasserstein contraction against exp[½∫(κ₁+κ₂)]",
            Kind::Invariant => "invariant measure by long-time simulation and its fixed-point check",
            Kind::HarnackLog => "log-Harnack inequality by coupling",
            Kind::HarnackPower => "power-Harnack inequality by coupling",
            Kind::Entropy => "entropy-cost bound, Girsanov normalisation and coupling success",
            Kind::FpkeCorrespond => "grid Fokker-Planck solution against particle marginals",
            Kind::FpkeStability => "Wasserstein stability of the grid Fokker-Planck solution",
        }
    }
}

#[derive(Clone, Debug)]
pub enum Parameters {
    Subcheck(SubcheckParams),
    Moments(MomentsParams),
    Picard(PicardParams),
    Contraction(ContractionParams),
    Invariant(InvariantParams),
    Harnack(HarnackParams),
    FpkeCorrespond(CorrespondParams),
    FpkeStability(StabilityParams),
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub seed: u64,
    pub parameters: Parameters,
    /// sha256 of the canonical (sorted-key, compact) JSON of the file
    pub digest: String,
    /// the file text, for locating keys in diagnostics
    pub source: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ConfigError {
    pub fn at(line: usize, column: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            column,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: {}", self.line, self.column, self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Envelope<'a> {
    kind: Kind,
    seed: u64,
    #[serde(borrow)]
    parameters: &'a RawValue,
}

fn from_serde(e: serde_json::Error) -> ConfigError {
    ConfigError::at(e.line(), e.column(), strip_position(&e.to_string()))
}

// serde_json appends " at line L column C"; the position is reported separately
fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(offset, |i| offset - i - 1) + 1;
    (line, col)
}

/// Line and column of the first occurrence of `"key"` in the source, or of
/// the start of the file.
pub fn locate_key(text: &str, key: &str) -> (usize, usize) {
    let pat = format!("\"{key}\"");
    text.find(&pat).map_or((1, 1), |i| line_col(text, i))
}

/// sha256 over the sorted-key compact serialisation.
pub fn digest(text: &str) -> Result<String, ConfigError> {
    let v: serde_json::Value = serde_json::from_str(text).map_err(from_serde)?;
    let canonical = serde_json::to_string(&v).expect("a parsed value serialises");
    Ok(hex::encode(Sha256::digest(canonical.as_bytes())))
}

fn typed<'de, T: Deserialize<'de>>(text: &str, raw: &'de RawValue) -> Result<T, ConfigError> {
    let frag = raw.get();
    let offset = frag.as_ptr() as usize - text.as_ptr() as usize;
    let (line0, col0) = line_col(text, offset);
    serde_json::from_str(frag).map_err(|e| {
        let (line, col) = if e.line() <= 1 {
            (line0, col0 + e.column().saturating_sub(1))
        } else {
            (line0 + e.line() - 1, e.column())
        };
        ConfigError::at(line, col, format!("parameters: {}", strip_position(&e.to_string())))
    })
}

/// Parse and schema-check a config file.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let env: Envelope<'_> = serde_json::from_str(text).map_err(from_serde)?;
    let p = env.parameters;
    let parameters = match env.kind {
        Kind::Subcheck => Parameters::Subcheck(typed(text, p)?),
        Kind::Moments => Parameters::Moments(typed(text, p)?),
        Kind::Picard => Parameters::Picard(typed(text, p)?),
        Kind::Contraction => Parameters::Contraction(typed(text, p)?),
        Kind::Invariant => Parameters::Invariant(typed(text, p)?),
        Kind::HarnackLog | Kind::HarnackPower | Kind::Entropy => Parameters::Harnack(typed(text, p)?),
        Kind::FpkeCorrespond => Parameters::FpkeCorrespond(typed(text, p)?),
        Kind::FpkeStability => Parameters::FpkeStability(typed(text, p)?),
    };
    let cfg = ExperimentConfig {
        kind: env.kind,
        seed: env.seed,
        parameters,
        digest: digest(text)?,
        source: text.to_string(),
    };
    crate::params::validate(&cfg)?;
    Ok(cfg)
}
