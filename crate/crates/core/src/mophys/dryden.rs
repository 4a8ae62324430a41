//! Dryden gust intensities: low-altitude closed forms below 600 m and a
//! severity-indexed altitude-band table above, blended across 600–900 m.

use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TABLE_VERSION: u32 = 1;
/// Top of the low-altitude closed-form layer (m).
pub const LOW_ALTITUDE_TOP_M: f64 = 600.0;
/// Width of the blend band above the low-altitude layer (m).
pub const BLEND_WIDTH_M: f64 = 300.0;
const FT_PER_M: f64 = 1.0 / 0.3048;

const SHIPPED_TABLE: &str = include_str!("../../data/dryden_bands.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Severity {
    Light,
    Moderate,
    Severe,
}

impl Severity {
    pub fn name(self) -> &'static str {
        match self {
            Severity::Light => "light",
            Severity::Moderate => "moderate",
            Severity::Severe => "severe",
        }
    }
}

impl FromStr for Severity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "light" => Ok(Severity::Light),
            "moderate" => Ok(Severity::Moderate),
            "severe" => Ok(Severity::Severe),
            other => Err(Error::Config(format!("unknown Dryden severity '{other}'"))),
        }
    }
}

/// Per-axis gust standard deviations (m/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GustSigma {
    pub u: f64,
    pub v: f64,
    pub w: f64,
}

impl GustSigma {
    /// Turbulence kinetic energy `(σu² + σv² + σw²) / 2`.
    pub fn tke(&self) -> f64 {
        0.5 * (self.u * self.u + self.v * self.v + self.w * self.w)
    }

    fn lerp(a: GustSigma, b: GustSigma, t: f64) -> GustSigma {
        GustSigma {
            u: a.u + (b.u - a.u) * t,
            v: a.v + (b.v - a.v) * t,
            w: a.w + (b.w - a.w) * t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Band {
    altitude_m: f64,
    sigma: GustSigma,
}

/// Altitude-band table loaded from the versioned text fixture.
#[derive(Debug, Clone, PartialEq)]
pub struct DrydenTable {
    light: Vec<Band>,
    moderate: Vec<Band>,
    severe: Vec<Band>,
    checksum: u32,
}

impl DrydenTable {
    /// The table shipped with the crate, parsed and verified once.
    pub fn shipped() -> &'static DrydenTable {
        static TABLE: OnceLock<DrydenTable> = OnceLock::new();
        TABLE.get_or_init(|| DrydenTable::parse(SHIPPED_TABLE).expect("shipped Dryden table is valid"))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Parses the fixture. The final line must be `checksum <crc32 hex>`
    /// covering every preceding byte.
    pub fn parse(text: &str) -> Result<Self> {
        let body_end = text
            .trim_end_matches('\n')
            .rfind('\n')
            .map(|i| i + 1)
            .ok_or_else(|| Error::Corrupt("Dryden table has no checksum line".into()))?;
        let (body, trailer) = text.split_at(body_end);
        let stored = trailer
            .trim()
            .strip_prefix("checksum ")
            .and_then(|h| u32::from_str_radix(h.trim(), 16).ok())
            .ok_or_else(|| Error::Corrupt("Dryden table checksum line malformed".into()))?;
        let computed = crc32fast::hash(body.as_bytes());
        if stored != computed {
            return Err(Error::Checksum { stored, computed });
        }

        let mut version = None;
        let mut table = DrydenTable { light: vec![], moderate: vec![], severe: vec![], checksum: stored };
        for (lineno, line) in body.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(v) = line.strip_prefix("version ") {
                version = Some(v.trim().parse::<u32>().map_err(|e| Error::Corrupt(e.to_string()))?);
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 5 {
                return Err(Error::Corrupt(format!("Dryden table line {}: expected 5 columns", lineno + 1)));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::Corrupt(format!("Dryden table line {}: {e}", lineno + 1)))
            };
            let band = Band {
                altitude_m: num(cols[0])?,
                sigma: GustSigma { u: num(cols[2])?, v: num(cols[3])?, w: num(cols[4])? },
            };
            match cols[1].parse::<Severity>()? {
                Severity::Light => table.light.push(band),
                Severity::Moderate => table.moderate.push(band),
                Severity::Severe => table.severe.push(band),
            }
        }
        match version {
            Some(TABLE_VERSION) => {}
            Some(v) => return Err(Error::Version { found: v as u16, expected: TABLE_VERSION as u16 }),
            None => return Err(Error::Corrupt("Dryden table missing version line".into())),
        }
        for bands in [&table.light, &table.moderate, &table.severe] {
            if bands.is_empty() || bands.windows(2).any(|w| w[1].altitude_m <= w[0].altitude_m) {
                return Err(Error::Corrupt("Dryden bands must be non-empty and increasing in altitude".into()));
            }
        }
        Ok(table)
    }

    pub fn checksum(&self) -> u32 {
        self.checksum
    }

    fn bands(&self, severity: Severity) -> &[Band] {
        match severity {
            Severity::Light => &self.light,
            Severity::Moderate => &self.moderate,
            Severity::Severe => &self.severe,
        }
    }

    /// Linear interpolation in altitude, clamped at both ends of the table.
    pub fn band_sigma(&self, altitude_m: f64, severity: Severity) -> GustSigma {
        let bands = self.bands(severity);
        let first = bands[0];
        let last = bands[bands.len() - 1];
        if altitude_m <= first.altitude_m {
            return first.sigma;
        }
        if altitude_m >= last.altitude_m {
            return last.sigma;
        }
        let i = bands.partition_point(|b| b.altitude_m <= altitude_m);
        let (a, b) = (bands[i - 1], bands[i]);
        GustSigma::lerp(a.sigma, b.sigma, (altitude_m - a.altitude_m) / (b.altitude_m - a.altitude_m))
    }

    /// Gust intensities for an altitude, 20 ft wind and severity.
    pub fn sigma(&self, altitude_m: f64, wind20ft_mps: f64, severity: Severity) -> GustSigma {
        let h = altitude_m.max(0.0);
        if h <= LOW_ALTITUDE_TOP_M {
            return low_altitude_sigma(h, wind20ft_mps);
        }
        let high = self.band_sigma(h, severity);
        if h >= LOW_ALTITUDE_TOP_M + BLEND_WIDTH_M {
            return high;
        }
        let low = low_altitude_sigma(LOW_ALTITUDE_TOP_M, wind20ft_mps);
        let top = self.band_sigma(LOW_ALTITUDE_TOP_M + BLEND_WIDTH_M, severity);
        GustSigma::lerp(low, top, (h - LOW_ALTITUDE_TOP_M) / BLEND_WIDTH_M)
    }
}

/// Low-altitude closed forms: `σ_w = 0.1 W20`,
/// `σ_u = σ_v = σ_w / (0.177 + 0.000823 h_ft)^0.4`.
pub fn low_altitude_sigma(altitude_m: f64, wind20ft_mps: f64) -> GustSigma {
    let h_ft = (altitude_m * FT_PER_M).max(10.0);
    let w = 0.1 * wind20ft_mps.max(0.0);
    let uv = w / (0.177 + 0.000823 * h_ft).powf(0.4);
    GustSigma { u: uv, v: uv, w }
}

/// Dryden intensities from the shipped table.
pub fn dryden_sigma(altitude_m: f64, wind20ft_mps: f64, severity: Severity) -> GustSigma {
    DrydenTable::shipped().sigma(altitude_m, wind20ft_mps, severity)
}

/// Converts a 10 m wind to the 20 ft reference with the neutral log law.
pub fn wind_at_20ft(wind10_mps: f64) -> f64 {
    let z0 = super::ROUGHNESS_LENGTH_M;
    wind10_mps * (6.096f64 / z0).ln() / (super::WIND_REF_HEIGHT_M / z0).ln()
}
