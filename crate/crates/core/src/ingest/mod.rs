//! Surface weather from the NASA POWER point endpoint: queries, response
//! parsing into SI units, a disk cache, offline fixtures, and conversion to
//! flight-level columns.

mod client;
mod fixtures;

pub use client::{offline_from_env, HttpReply, IngestConfig, PowerClient, ReqwestTransport, Transport, DEFAULT_BASE_URL, DEFAULT_TTL_S, OFFLINE_ENV};
pub use fixtures::{climatology, climatology_json, fixture_file_name, fixture_json, FIXTURE_POINTS};

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::atmos::{blended_column, AtmosphericState, SurfaceAnchor, SEA_LEVEL_PRESSURE_PA, SEA_LEVEL_TEMPERATURE_K};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IngestError {
    #[error("transport error: {message}")]
    Transport { message: String, retry_after_s: Option<f64> },
    #[error("malformed response: {message} near `{fragment}`")]
    Parse { message: String, fragment: String },
    #[error("response lacks parameters: {}", missing.join(", "))]
    Partial { missing: Vec<String> },
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("cache error: {0}")]
    Cache(String),
}

/// Surface parameters requested from POWER.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Param {
    /// Temperature at 2 m.
    T2m,
    /// Surface pressure.
    Ps,
    /// Wind speed at 10 m.
    Ws10m,
}

impl Param {
    pub const ALL: [Param; 3] = [Param::T2m, Param::Ps, Param::Ws10m];

    pub fn code(self) -> &'static str {
        match self {
            Param::T2m => "T2M",
            Param::Ps => "PS",
            Param::Ws10m => "WS10M",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.code() == code)
    }

    /// Converts a reported value to SI (K, Pa, m/s).
    fn to_si(self, value: f64, units: &str) -> Result<f64, IngestError> {
        let u = units.trim();
        let v = match (self, u) {
            (Param::T2m, "C" | "°C" | "degC") => value + 273.15,
            (Param::T2m, "K") => value,
            (Param::Ps, "kPa") => value * 1_000.0,
            (Param::Ps, "hPa" | "mb") => value * 100.0,
            (Param::Ps, "Pa") => value,
            (Param::Ws10m, "m/s" | "m s-1") => value,
            _ => {
                return Err(IngestError::Parse {
                    message: format!("unknown units for {}", self.code()),
                    fragment: u.to_string(),
                })
            }
        };
        Ok(v)
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Grid spacing of the POWER product; cache keys round to it.
pub const NATIVE_RESOLUTION_DEG: f64 = 0.5;

fn valid_date(d: u32) -> bool {
    let (y, m, day) = (d / 10_000, d / 100 % 100, d % 100);
    (1981..=2100).contains(&y) && (1..=12).contains(&m) && (1..=31).contains(&day)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherQuery {
    pub latitude_deg: f64,
    pub longitude_deg: f64,
    pub params: Vec<Param>,
    /// Inclusive window, `YYYYMMDD`.
    pub start: u32,
    pub end: u32,
}

impl WeatherQuery {
    pub const DEFAULT_DATE: u32 = 20240115;

    /// All three parameters for one day.
    pub fn point(latitude_deg: f64, longitude_deg: f64) -> Self {
        Self {
            latitude_deg,
            longitude_deg,
            params: Param::ALL.to_vec(),
            start: Self::DEFAULT_DATE,
            end: Self::DEFAULT_DATE,
        }
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        if !(-90.0..=90.0).contains(&self.latitude_deg) || !(-180.0..=180.0).contains(&self.longitude_deg) {
            return Err(IngestError::InvalidQuery(format!(
                "coordinates ({}, {}) outside [-90, 90] x [-180, 180]",
                self.latitude_deg, self.longitude_deg
            )));
        }
        if self.params.is_empty() {
            return Err(IngestError::InvalidQuery("no parameters requested".into()));
        }
        if !valid_date(self.start) || !valid_date(self.end) || self.start > self.end {
            return Err(IngestError::InvalidQuery(format!("bad date window {}..{}", self.start, self.end)));
        }
        Ok(())
    }

    /// Coordinates snapped to the native grid.
    pub fn rounded(&self) -> (f64, f64) {
        let snap = |x: f64| (x / NATIVE_RESOLUTION_DEG).round() * NATIVE_RESOLUTION_DEG + 0.0;
        (snap(self.latitude_deg), snap(self.longitude_deg))
    }

    fn param_list(&self) -> String {
        let mut p = self.params.clone();
        p.sort();
        p.dedup();
        p.iter().map(|p| p.code()).collect::<Vec<_>>().join(",")
    }

    pub fn cache_key(&self) -> String {
        let (lat, lon) = self.rounded();
        format!("lat{lat:+06.1}_lon{lon:+07.1}_{}_{}_{}", self.start, self.end, self.param_list().replace(',', "-"))
    }

    pub fn url(&self, base: &str) -> String {
        let (lat, lon) = self.rounded();
        format!(
            "{base}?parameters={}&community=RE&longitude={lon}&latitude={lat}&start={}&end={}&format=JSON&time-standard=UTC",
            self.param_list(),
            self.start,
            self.end
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Live,
    Cache,
    Fixture,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Live => "live",
            Source::Cache => "cache",
            Source::Fixture => "fixture",
        })
    }
}

/// Hourly samples of one parameter in SI units; fill values dropped.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Series {
    /// `YYYYMMDDHH` stamps.
    pub times: Vec<String>,
    pub values: Vec<f64>,
}

impl Series {
    pub fn last(&self) -> Option<f64> {
        self.values.last().copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherResponse {
    pub latitude_deg: f64,
    pub longitude_deg: f64,
    pub series: BTreeMap<Param, Series>,
    /// Requested parameters with no valid sample.
    pub missing: Vec<Param>,
    pub source: Source,
    /// Unix seconds.
    pub fetched_at: u64,
}

fn fragment(v: &Value) -> String {
    let s = v.to_string();
    if s.len() > 80 {
        format!("{}...", &s[..s.char_indices().nth(77).map_or(s.len(), |(i, _)| i)])
    } else {
        s
    }
}

fn parse_err(message: impl Into<String>, at: &Value) -> IngestError {
    IngestError::Parse { message: message.into(), fragment: fragment(at) }
}

/// Parses a POWER point-endpoint JSON body into SI series.
pub fn parse_power_json(text: &str, query: &WeatherQuery, source: Source, fetched_at: u64) -> Result<WeatherResponse, IngestError> {
    let root: Value = serde_json::from_str(text).map_err(|e| IngestError::Parse {
        message: e.to_string(),
        fragment: text.chars().take(80).collect(),
    })?;
    let params = root
        .pointer("/properties/parameter")
        .and_then(Value::as_object)
        .ok_or_else(|| parse_err("missing properties.parameter", &root))?;
    let fill = root.pointer("/header/fill_value").and_then(Value::as_f64).unwrap_or(-999.0);
    let mut series = BTreeMap::new();
    let mut missing = Vec::new();
    for &p in &query.params {
        let Some(raw) = params.get(p.code()) else {
            missing.push(p);
            continue;
        };
        let obj = raw.as_object().ok_or_else(|| parse_err(format!("{p} is not an object"), raw))?;
        let units = root
            .pointer(&format!("/parameters/{}/units", p.code()))
            .and_then(Value::as_str)
            .ok_or_else(|| parse_err(format!("no units for {p}"), &root["parameters"]))?;
        let mut s = Series::default();
        for (t, v) in obj {
            let x = v.as_f64().ok_or_else(|| parse_err(format!("{p} value at {t} is not numeric"), v))?;
            if x == fill || !x.is_finite() {
                continue;
            }
            s.times.push(t.clone());
            s.values.push(p.to_si(x, units)?);
        }
        if s.values.is_empty() {
            missing.push(p);
        } else {
            series.insert(p, s);
        }
    }
    let coords = root.pointer("/geometry/coordinates").and_then(Value::as_array);
    let coord = |i: usize, fallback: f64| coords.and_then(|c| c.get(i)).and_then(Value::as_f64).unwrap_or(fallback);
    let (lat, lon) = query.rounded();
    Ok(WeatherResponse {
        latitude_deg: coord(1, lat),
        longitude_deg: coord(0, lon),
        series,
        missing,
        source,
        fetched_at,
    })
}

impl WeatherResponse {
    pub fn require_complete(&self) -> Result<(), IngestError> {
        if self.missing.is_empty() {
            Ok(())
        } else {
            Err(IngestError::Partial { missing: self.missing.iter().map(|p| p.code().to_string()).collect() })
        }
    }

    /// Latest surface sample as a column anchor. Missing parameters fall
    /// back to ISA sea level only when `allow_isa_fill` is set.
    pub fn surface(&self, allow_isa_fill: bool) -> Result<SurfaceAnchor, IngestError> {
        let get = |p: Param, isa: f64| match self.series.get(&p).and_then(Series::last) {
            Some(v) => Ok(v),
            None if allow_isa_fill => Ok(isa),
            None => Err(IngestError::Partial { missing: vec![p.code().to_string()] }),
        };
        if !allow_isa_fill {
            self.require_complete()?;
        }
        Ok(SurfaceAnchor {
            temperature_anomaly_k: get(Param::T2m, SEA_LEVEL_TEMPERATURE_K)? - SEA_LEVEL_TEMPERATURE_K,
            pressure_ratio: get(Param::Ps, SEA_LEVEL_PRESSURE_PA)? / SEA_LEVEL_PRESSURE_PA,
            wind10_mps: get(Param::Ws10m, 0.0)?.max(0.0),
            latitude_deg: self.latitude_deg,
        })
    }
}

/// ISA-anchored column at the requested altitudes.
pub fn to_state_column(
    resp: &WeatherResponse,
    levels: &[f64],
    allow_isa_fill: bool,
) -> crate::Result<Vec<AtmosphericState>> {
    let surface = resp.surface(allow_isa_fill)?;
    blended_column(levels, &surface, |_| 0.0)
}
