//! Run-configuration files: `key = value` lines grouped under
//! `[coupling]`, `[protocol]`, `[noise]` and `[output]` sections.
//!
//! Parsing is total and strict: every failure names the offending line,
//! duplicate and unknown keys are rejected, and values are range-checked
//! at parse time. Command-line flags override configured values.

use thiserror::Error;

use crate::detection::DetectorSemantics;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {0}: malformed line `{1}` (expected `key = value` or `[section]`)")]
    Malformed(usize, String),
    #[error("line {0}: unknown section `{1}`")]
    UnknownSection(usize, String),
    #[error("line {0}: key `{1}` appears before any section header")]
    KeyOutsideSection(usize, String),
    #[error("line {0}: unknown key `{1}` in section [{2}]")]
    UnknownKey(usize, String, &'static str),
    #[error("line {0}: duplicate key `{1}`")]
    DuplicateKey(usize, String),
    #[error("line {0}: value `{1}` for `{2}` is not valid: {3}")]
    BadValue(usize, String, String, &'static str),
}

/// Parsed configuration. Unset fields fall back to the built-in defaults
/// at the point of use.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    pub lambda_l: Option<f64>,
    pub lambda_r: Option<f64>,
    pub theta: Option<f64>,
    pub semantics: Option<DetectorSemantics>,
    pub keep_vacuum: Option<bool>,
    pub bs_transmittance: Option<f64>,
    pub p_excitation: Option<f64>,
    pub p_collect: Option<f64>,
    pub p_detect: Option<f64>,
    pub dark_rate: Option<f64>,
    pub p_window: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<String>,
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Coupling,
    Protocol,
    Noise,
    Output,
}

impl Section {
    fn name(self) -> &'static str {
        match self {
            Section::Coupling => "coupling",
            Section::Protocol => "protocol",
            Section::Noise => "noise",
            Section::Output => "output",
        }
    }
}

fn parse_positive(lineno: usize, key: &str, value: &str) -> Result<f64, ConfigError> {
    let v: f64 = value.parse().map_err(|_| {
        ConfigError::BadValue(lineno, value.to_string(), key.to_string(), "not a number")
    })?;
    if !(v > 0.0) || !v.is_finite() {
        return Err(ConfigError::BadValue(
            lineno,
            value.to_string(),
            key.to_string(),
            "must be a positive finite number",
        ));
    }
    Ok(v)
}

fn parse_probability(lineno: usize, key: &str, value: &str) -> Result<f64, ConfigError> {
    let v: f64 = value.parse().map_err(|_| {
        ConfigError::BadValue(lineno, value.to_string(), key.to_string(), "not a number")
    })?;
    if !(0.0..=1.0).contains(&v) {
        return Err(ConfigError::BadValue(
            lineno,
            value.to_string(),
            key.to_string(),
            "must lie in [0, 1]",
        ));
    }
    Ok(v)
}

fn parse_finite(lineno: usize, key: &str, value: &str) -> Result<f64, ConfigError> {
    let v: f64 = value.parse().map_err(|_| {
        ConfigError::BadValue(lineno, value.to_string(), key.to_string(), "not a number")
    })?;
    if !v.is_finite() {
        return Err(ConfigError::BadValue(
            lineno,
            value.to_string(),
            key.to_string(),
            "must be finite",
        ));
    }
    Ok(v)
}

fn parse_bool(lineno: usize, key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(ConfigError::BadValue(
            lineno,
            value.to_string(),
            key.to_string(),
            "expected a boolean (true/false)",
        )),
    }
}

/// Parses a configuration document. Deterministic; later duplicates of a
/// key are errors rather than overrides.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    let mut section: Option<Section> = None;
    let mut seen: Vec<String> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = match raw.split_once('#') {
            Some((head, _)) => head.trim(),
            None => raw.trim(),
        };
        if line.is_empty() {
            continue;
        }
        if let Some(inner) = line.strip_prefix('[') {
            let name = inner
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::Malformed(lineno, raw.trim().to_string()))?
                .trim();
            section = Some(match name {
                "coupling" => Section::Coupling,
                "protocol" => Section::Protocol,
                "noise" => Section::Noise,
                "output" => Section::Output,
                _ => return Err(ConfigError::UnknownSection(lineno, name.to_string())),
            });
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| ConfigError::Malformed(lineno, raw.trim().to_string()))?;
        let key = key.trim();
        let value = value.trim();
        let section = section
            .ok_or_else(|| ConfigError::KeyOutsideSection(lineno, key.to_string()))?;
        let qualified = format!("{}.{}", section.name(), key);
        if seen.contains(&qualified) {
            return Err(ConfigError::DuplicateKey(lineno, key.to_string()));
        }
        seen.push(qualified);

        match (section, key) {
            (Section::Coupling, "lambda_l") => {
                cfg.lambda_l = Some(parse_positive(lineno, key, value)?)
            }
            (Section::Coupling, "lambda_r") => {
                cfg.lambda_r = Some(parse_positive(lineno, key, value)?)
            }
            (Section::Coupling, "theta") => cfg.theta = Some(parse_finite(lineno, key, value)?),
            (Section::Protocol, "semantics") => {
                cfg.semantics = Some(match value {
                    "exact1" => DetectorSemantics::NumberResolvingExactlyOne,
                    "threshold" => DetectorSemantics::ThresholdAtLeastOne,
                    _ => {
                        return Err(ConfigError::BadValue(
                            lineno,
                            value.to_string(),
                            key.to_string(),
                            "expected `exact1` or `threshold`",
                        ))
                    }
                })
            }
            (Section::Protocol, "keep_vacuum") => {
                cfg.keep_vacuum = Some(parse_bool(lineno, key, value)?)
            }
            (Section::Protocol, "bs_transmittance") => {
                let v = parse_probability(lineno, key, value)?;
                if v <= 0.0 || v >= 1.0 {
                    return Err(ConfigError::BadValue(
                        lineno,
                        value.to_string(),
                        key.to_string(),
                        "must lie strictly between 0 and 1",
                    ));
                }
                cfg.bs_transmittance = Some(v);
            }
            (Section::Noise, "p_excitation") => {
                cfg.p_excitation = Some(parse_probability(lineno, key, value)?)
            }
            (Section::Noise, "p_collect") => {
                cfg.p_collect = Some(parse_probability(lineno, key, value)?)
            }
            (Section::Noise, "p_detect") => {
                cfg.p_detect = Some(parse_probability(lineno, key, value)?)
            }
            (Section::Noise, "dark_rate") => {
                let v = parse_finite(lineno, key, value)?;
                if v < 0.0 {
                    return Err(ConfigError::BadValue(
                        lineno,
                        value.to_string(),
                        key.to_string(),
                        "must be non-negative",
                    ));
                }
                cfg.dark_rate = Some(v);
            }
            (Section::Noise, "p_window") => {
                cfg.p_window = Some(parse_probability(lineno, key, value)?)
            }
            (Section::Noise, "seed") => {
                cfg.seed = Some(value.parse().map_err(|_| {
                    ConfigError::BadValue(
                        lineno,
                        value.to_string(),
                        key.to_string(),
                        "expected an unsigned 64-bit integer",
                    )
                })?)
            }
            (Section::Output, "out") => cfg.out = Some(value.to_string()),
            (s, _) => return Err(ConfigError::UnknownKey(lineno, key.to_string(), s.name())),
        }
    }
    Ok(cfg)
}
