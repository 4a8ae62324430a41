//! Offline data: committed point fixtures and a deterministic synthetic
//! climatology, both in the POWER response schema.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use serde_json::json;

/// Committed fixtures: rounded coordinates and file contents.
pub const FIXTURE_POINTS: [(f64, f64, &str); 4] = [
    (0.0, 0.0, include_str!("../../fixtures/power/lat+000.0_lon+0000.0.json")),
    (51.5, 0.0, include_str!("../../fixtures/power/lat+051.5_lon+0000.0.json")),
    (-33.5, 151.0, include_str!("../../fixtures/power/lat-033.5_lon+0151.0.json")),
    (70.0, -150.0, include_str!("../../fixtures/power/lat+070.0_lon-0150.0.json")),
];

/// File name a committed fixture is stored under.
pub fn fixture_file_name(lat: f64, lon: f64) -> String {
    format!("lat{lat:+06.1}_lon{lon:+07.1}.json")
}

pub fn fixture_json(lat: f64, lon: f64) -> Option<&'static str> {
    FIXTURE_POINTS.iter().find(|p| p.0 == lat && p.1 == lon).map(|p| p.2)
}

fn days_in_month(y: u32, m: u32) -> u32 {
    match m {
        2 if (y % 4 == 0 && y % 100 != 0) || y % 400 == 0 => 29,
        2 => 28,
        4 | 6 | 9 | 11 => 30,
        _ => 31,
    }
}

fn next_day(d: u32) -> u32 {
    let (y, m, day) = (d / 10_000, d / 100 % 100, d % 100);
    if day < days_in_month(y, m) {
        d + 1
    } else if m < 12 {
        y * 10_000 + (m + 1) * 100 + 1
    } else {
        (y + 1) * 10_000 + 101
    }
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Hourly surface climatology: warm humid tropics, cold polar air, and
/// mid-latitude wind maxima, with a local-solar-time diurnal cycle.
/// Returns (°C, kPa, m/s).
pub fn climatology(lat: f64, lon: f64, hour_utc: f64) -> (f64, f64, f64) {
    let (phi, lam) = (lat.to_radians(), lon.to_radians());
    let local = hour_utc + lon / 15.0;
    let diurnal = (TAU * (local - 9.0) / 24.0).sin();
    let t = 27.0 - 0.007 * lat * lat + 3.0 * (2.0 * lam).sin() * phi.cos() + 4.0 * phi.cos() * diurnal;
    let p = 100.9 + 0.9 * phi.sin().powi(2) - 0.3 * lam.cos();
    let w = 3.0 + 6.0 * (2.0 * phi).sin().powi(2) + 0.75 * (1.0 + (2.0 * lam).sin()) + 0.8 * (diurnal * PI / 2.0).sin();
    (t, p, w)
}

/// Synthetic POWER-format body for a point and date window.
pub fn climatology_json(lat: f64, lon: f64, start: u32, end: u32) -> String {
    let mut series: [BTreeMap<String, f64>; 3] = Default::default();
    let mut day = start;
    while day <= end {
        for h in 0..24 {
            let (t, p, w) = climatology(lat, lon, f64::from(h));
            let stamp = format!("{day}{h:02}");
            series[0].insert(stamp.clone(), round2(t));
            series[1].insert(stamp.clone(), round2(p));
            series[2].insert(stamp, round2(w));
        }
        day = next_day(day);
    }
    let body = json!({
        "type": "Feature",
        "geometry": {"type": "Point", "coordinates": [lon, lat, 0.0]},
        "properties": {"parameter": {"T2M": series[0], "PS": series[1], "WS10M": series[2]}},
        "header": {
            "title": "NASA/POWER hourly point data (synthetic fixture)",
            "fill_value": -999.0,
            "start": start.to_string(),
            "end": end.to_string()
        },
        "messages": [],
        "parameters": {
            "T2M": {"units": "C", "longname": "Temperature at 2 Meters"},
            "PS": {"units": "kPa", "longname": "Surface Pressure"},
            "WS10M": {"units": "m/s", "longname": "Wind Speed at 10 Meters"}
        }
    });
    serde_json::to_string_pretty(&body).expect("serialisable")
}
