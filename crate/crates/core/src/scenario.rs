//! Experiment configuration: radio parameters, room geometry and the
//! per-DFR detector error rates.
//!
//! Scenario files are TOML (or the equivalent JSON document) with three
//! sections, `[params]`, `[geometry]` and `[errors]`, plus an optional
//! top-level `seed`. Powers may be written as raw watts or as strings with a
//! unit suffix (`"10 mW"`, `"-50 dBm"`); ratios as linear numbers or
//! `"30 dB"`. Everything is converted to linear units at load time and
//! [`write_scenario`] always emits plain linear numbers.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const DEFAULT_FILE: &str = include_str!("../scenarios/default.toml");

/// Two devices closer than this are treated as co-located.
const COLOCATION_TOL_M: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed scenario: {0}")]
    MalformedScenario(String),
    #[error("invalid scenario field `{field}`: {reason}")]
    InvalidScenario { field: String, reason: String },
}

impl ScenarioError {
    fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ScenarioError::InvalidScenario {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

/// Radio and propagation parameters, all in linear units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Number of DFRs (K).
    pub dfr_count: usize,
    /// Transmit antennas per DFR (M).
    pub antennas: usize,
    /// Per-DFR power cap P_T in watts.
    pub max_power: f64,
    /// Total power budget P_sum in watts.
    pub sum_power: f64,
    /// Noise power sigma^2 in watts.
    pub noise_power: f64,
    /// Sensing-SINR threshold gamma (linear).
    pub sinr_threshold: f64,
    /// Carrier wavelength in meters.
    pub wavelength: f64,
    pub pathloss_exponent: f64,
    /// Reference distance for the path-loss model in meters.
    pub ref_distance: f64,
    /// Linear power gain at `ref_distance`.
    pub ref_loss: f64,
    /// Magnitude of the target reflection coefficient.
    pub echo_gain: f64,
}

/// Axis-aligned room box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoomBounds {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl RoomBounds {
    pub fn contains(&self, p: &[f64; 3]) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub dfr_positions: Vec<[f64; 3]>,
    pub target_position: [f64; 3],
    pub receiver_position: [f64; 3],
    pub room_bounds: RoomBounds,
}

/// Per-DFR detector error rates.
///
/// `false_negative[i]` is the probability that DFR `i` reports "abnormal"
/// when the target is normal; `false_positive[i]` is the probability that it
/// reports "normal" when the target is abnormal. These are the two rates the
/// voting model consumes (see [`crate::fusion`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorProfile {
    pub false_negative: Vec<f64>,
    pub false_positive: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub params: SystemParams,
    pub geometry: Geometry,
    pub errors: ErrorProfile,
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        validate(self)
    }

    /// Copy of this scenario with a different total power budget.
    pub fn with_sum_power(&self, sum_power: f64) -> Result<Scenario, ScenarioError> {
        let mut out = self.clone();
        out.params.sum_power = sum_power;
        out.validate()?;
        Ok(out)
    }
}

/// Built-in six-DFR conference-room scenario (shipped as
/// `scenarios/default.toml`).
pub fn default_scenario() -> Scenario {
    parse_scenario(DEFAULT_FILE, Format::Toml).expect("shipped default scenario is valid")
}

/// Source text of the shipped default scenario.
pub fn default_scenario_source() -> &'static str {
    DEFAULT_FILE
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Toml,
    Json,
}

impl Format {
    fn sniff(text: &str) -> Format {
        if text.trim_start().starts_with('{') {
            Format::Json
        } else {
            Format::Toml
        }
    }
}

/// Load and validate a scenario file. JSON is detected by a `.json`
/// extension or a leading `{`.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let format = match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("json") => Format::Json,
        _ => Format::sniff(&text),
    };
    parse_scenario(&text, format)
}

pub fn parse_scenario(text: &str, format: Format) -> Result<Scenario, ScenarioError> {
    let doc: ScenarioDoc = match format {
        Format::Toml => {
            toml::from_str(text).map_err(|e| ScenarioError::MalformedScenario(e.to_string()))?
        }
        Format::Json => serde_json::from_str(text)
            .map_err(|e| ScenarioError::MalformedScenario(e.to_string()))?,
    };
    let scenario = doc.into_scenario()?;
    validate(&scenario)?;
    Ok(scenario)
}

/// Render a scenario in linear units.
pub fn write_scenario(scenario: &Scenario, format: Format) -> String {
    let doc = ScenarioDoc::from(scenario);
    match format {
        Format::Toml => toml::to_string(&doc).expect("scenario document serializes"),
        Format::Json => serde_json::to_string_pretty(&doc).expect("scenario document serializes"),
    }
}

// ---------------------------------------------------------------------------
// Quantities with units

/// A numeric field that may carry a unit suffix in the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Quantity {
    Number(f64),
    Text(String),
}

impl From<f64> for Quantity {
    fn from(v: f64) -> Self {
        Quantity::Number(v)
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Quantity::Number(v) => write!(f, "{v}"),
            Quantity::Text(s) => write!(f, "{s:?}"),
        }
    }
}

fn split_unit(s: &str) -> Result<(f64, String), String> {
    let s = s.trim();
    let idx = s
        .char_indices()
        .find(|&(i, c)| {
            c.is_ascii_alphabetic()
                && !(matches!(c, 'e' | 'E')
                    && s[i + 1..].starts_with(|d: char| d.is_ascii_digit() || d == '-' || d == '+'))
        })
        .map(|(i, _)| i)
        .unwrap_or(s.len());
    let (num, unit) = s.split_at(idx);
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| format!("cannot parse number in `{s}`"))?;
    Ok((value, unit.trim().to_string()))
}

/// Parse a power in watts. Accepts bare numbers (watts) or
/// `W`/`mW`/`uW`/`nW`/`dBm`/`dBW` suffixes.
pub fn parse_power(s: &str) -> Result<f64, String> {
    let (v, unit) = split_unit(s)?;
    let watts = match unit.as_str() {
        "" | "W" => v,
        "mW" => v * 1e-3,
        "uW" | "µW" => v * 1e-6,
        "nW" => v * 1e-9,
        "dBm" => 10f64.powf((v - 30.0) / 10.0),
        "dBW" => 10f64.powf(v / 10.0),
        other => return Err(format!("unknown power unit `{other}`")),
    };
    Ok(watts)
}

/// Parse a dimensionless ratio: bare linear number or `dB` suffix.
pub fn parse_ratio(s: &str) -> Result<f64, String> {
    let (v, unit) = split_unit(s)?;
    match unit.as_str() {
        "" => Ok(v),
        "dB" => Ok(10f64.powf(v / 10.0)),
        other => Err(format!("unknown ratio unit `{other}`")),
    }
}

fn power_of(field: &str, q: &Quantity) -> Result<f64, ScenarioError> {
    match q {
        Quantity::Number(v) => Ok(*v),
        Quantity::Text(s) => {
            parse_power(s).map_err(|e| ScenarioError::MalformedScenario(format!("{field}: {e}")))
        }
    }
}

fn ratio_of(field: &str, q: &Quantity) -> Result<f64, ScenarioError> {
    match q {
        Quantity::Number(v) => Ok(*v),
        Quantity::Text(s) => {
            parse_ratio(s).map_err(|e| ScenarioError::MalformedScenario(format!("{field}: {e}")))
        }
    }
}

// ---------------------------------------------------------------------------
// File document

fn default_echo_gain() -> Quantity {
    Quantity::Number(1.0)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsDoc {
    #[serde(alias = "K")]
    dfr_count: usize,
    #[serde(alias = "M")]
    antennas: usize,
    #[serde(alias = "P_T")]
    max_power: Quantity,
    #[serde(alias = "P_sum")]
    sum_power: Quantity,
    #[serde(alias = "sigma2")]
    noise_power: Quantity,
    #[serde(alias = "gamma")]
    sinr_threshold: Quantity,
    wavelength: f64,
    pathloss_exponent: f64,
    ref_distance: f64,
    ref_loss: Quantity,
    #[serde(default = "default_echo_gain")]
    echo_gain: Quantity,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeometryDoc {
    room_min: [f64; 3],
    room_max: [f64; 3],
    dfr_positions: Vec<[f64; 3]>,
    target: [f64; 3],
    receiver: [f64; 3],
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ErrorsDoc {
    #[serde(alias = "P")]
    false_negative: Vec<f64>,
    #[serde(alias = "Q")]
    false_positive: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    #[serde(default)]
    seed: u64,
    params: ParamsDoc,
    geometry: GeometryDoc,
    errors: ErrorsDoc,
}

impl ScenarioDoc {
    fn into_scenario(self) -> Result<Scenario, ScenarioError> {
        let p = &self.params;
        let params = SystemParams {
            dfr_count: p.dfr_count,
            antennas: p.antennas,
            max_power: power_of("max_power", &p.max_power)?,
            sum_power: power_of("sum_power", &p.sum_power)?,
            noise_power: power_of("noise_power", &p.noise_power)?,
            sinr_threshold: ratio_of("sinr_threshold", &p.sinr_threshold)?,
            wavelength: p.wavelength,
            pathloss_exponent: p.pathloss_exponent,
            ref_distance: p.ref_distance,
            ref_loss: ratio_of("ref_loss", &p.ref_loss)?,
            echo_gain: ratio_of("echo_gain", &p.echo_gain)?,
        };
        let g = self.geometry;
        Ok(Scenario {
            params,
            geometry: Geometry {
                dfr_positions: g.dfr_positions,
                target_position: g.target,
                receiver_position: g.receiver,
                room_bounds: RoomBounds {
                    min: g.room_min,
                    max: g.room_max,
                },
            },
            errors: ErrorProfile {
                false_negative: self.errors.false_negative,
                false_positive: self.errors.false_positive,
            },
            seed: self.seed,
        })
    }
}

impl From<&Scenario> for ScenarioDoc {
    fn from(s: &Scenario) -> Self {
        let p = &s.params;
        ScenarioDoc {
            seed: s.seed,
            params: ParamsDoc {
                dfr_count: p.dfr_count,
                antennas: p.antennas,
                max_power: p.max_power.into(),
                sum_power: p.sum_power.into(),
                noise_power: p.noise_power.into(),
                sinr_threshold: p.sinr_threshold.into(),
                wavelength: p.wavelength,
                pathloss_exponent: p.pathloss_exponent,
                ref_distance: p.ref_distance,
                ref_loss: p.ref_loss.into(),
                echo_gain: p.echo_gain.into(),
            },
            geometry: GeometryDoc {
                room_min: s.geometry.room_bounds.min,
                room_max: s.geometry.room_bounds.max,
                dfr_positions: s.geometry.dfr_positions.clone(),
                target: s.geometry.target_position,
                receiver: s.geometry.receiver_position,
            },
            errors: ErrorsDoc {
                false_negative: s.errors.false_negative.clone(),
                false_positive: s.errors.false_positive.clone(),
            },
        }
    }
}

// ---------------------------------------------------------------------------
// Validation

fn finite(field: &str, v: f64) -> Result<(), ScenarioError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(ScenarioError::invalid(
            field,
            format!("must be finite, got {v}"),
        ))
    }
}

fn positive(field: &str, v: f64) -> Result<(), ScenarioError> {
    finite(field, v)?;
    if v > 0.0 {
        Ok(())
    } else {
        Err(ScenarioError::invalid(
            field,
            format!("must be > 0, got {v}"),
        ))
    }
}

fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn validate(s: &Scenario) -> Result<(), ScenarioError> {
    let p = &s.params;
    let k = p.dfr_count;
    if k < 1 {
        return Err(ScenarioError::invalid("dfr_count", "need at least one DFR"));
    }
    if p.antennas < k + 1 {
        return Err(ScenarioError::invalid(
            "antennas",
            format!(
                "zero-forcing needs antennas >= dfr_count + 1 = {}, got {}",
                k + 1,
                p.antennas
            ),
        ));
    }
    positive("max_power", p.max_power)?;
    positive("sum_power", p.sum_power)?;
    positive("noise_power", p.noise_power)?;
    positive("sinr_threshold", p.sinr_threshold)?;
    positive("wavelength", p.wavelength)?;
    finite("pathloss_exponent", p.pathloss_exponent)?;
    if p.pathloss_exponent < 0.0 {
        return Err(ScenarioError::invalid("pathloss_exponent", "must be >= 0"));
    }
    positive("ref_distance", p.ref_distance)?;
    positive("ref_loss", p.ref_loss)?;
    positive("echo_gain", p.echo_gain)?;

    let g = &s.geometry;
    for (name, v) in [
        ("room_min", g.room_bounds.min),
        ("room_max", g.room_bounds.max),
    ] {
        for c in v {
            finite(name, c)?;
        }
    }
    if (0..3).any(|d| g.room_bounds.min[d] >= g.room_bounds.max[d]) {
        return Err(ScenarioError::invalid(
            "room_max",
            "room box must have positive extent",
        ));
    }
    if g.dfr_positions.len() != k {
        return Err(ScenarioError::invalid(
            "dfr_positions",
            format!("expected {k} positions, got {}", g.dfr_positions.len()),
        ));
    }
    let check_point = |name: String, pt: &[f64; 3]| -> Result<(), ScenarioError> {
        for c in pt {
            finite(&name, *c)?;
        }
        if !g.room_bounds.contains(pt) {
            return Err(ScenarioError::invalid(name, "position outside the room"));
        }
        Ok(())
    };
    for (i, pos) in g.dfr_positions.iter().enumerate() {
        check_point(format!("dfr_positions[{i}]"), pos)?;
    }
    check_point("target".into(), &g.target_position)?;
    check_point("receiver".into(), &g.receiver_position)?;
    for i in 0..k {
        for j in i + 1..k {
            if distance(&g.dfr_positions[i], &g.dfr_positions[j]) < COLOCATION_TOL_M {
                return Err(ScenarioError::invalid(
                    format!("dfr_positions[{j}]"),
                    format!("co-located with DFR {i}"),
                ));
            }
        }
        if distance(&g.dfr_positions[i], &g.target_position) < COLOCATION_TOL_M {
            return Err(ScenarioError::invalid(
                "target",
                format!("co-located with DFR {i}"),
            ));
        }
        if distance(&g.dfr_positions[i], &g.receiver_position) < COLOCATION_TOL_M {
            return Err(ScenarioError::invalid(
                "receiver",
                format!("co-located with DFR {i}"),
            ));
        }
    }

    let e = &s.errors;
    for (name, rates) in [
        ("false_negative", &e.false_negative),
        ("false_positive", &e.false_positive),
    ] {
        if rates.len() != k {
            return Err(ScenarioError::invalid(
                name,
                format!("expected {k} rates, got {}", rates.len()),
            ));
        }
        for (i, &r) in rates.iter().enumerate() {
            let field = format!("{name}[{i}]");
            finite(&field, r)?;
            if !(0.0..1.0).contains(&r) {
                return Err(ScenarioError::invalid(
                    field,
                    format!("rate must lie in [0, 1), got {r}"),
                ));
            }
        }
    }
    Ok(())
}
