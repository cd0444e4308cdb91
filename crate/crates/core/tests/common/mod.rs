//! Independent oracles shared by the integration and acceptance tests.
//!
//! Solar positions come from NREL's SPA (via the `solar-positioning` crate),
//! never from the crate under test. Expected values in tables were frozen from
//! the published orientation table for Cambridge, MA.

#![allow(dead_code)]

use chrono::Datelike;
use solar_positioning::{Location, SolarPositions};
use sunglare::fixtures::SkylineScenario;
use sunglare::geo::GeoPosition;
use sunglare::time::{day_samples, DaySpan, Instant};

/// SPA elevation and azimuth (geometric, no refraction), degrees.
pub fn spa(site: GeoPosition, t: &Instant) -> (f64, f64) {
    let utc = t.utc();
    let delta_t = solar_positioning::delta_t::estimate_from_date(utc.year(), utc.month()).expect("delta T");
    let p = SolarPositions::new()
        .at(
            &utc,
            Location {
                latitude: site.lat(),
                longitude: site.lon(),
            },
            0.0,
            delta_t,
            None,
        )
        .expect("SPA position");
    (p.elevation_angle(), p.azimuth())
}

/// Circular difference of two angles, degrees in [0, 180].
pub fn circular_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

/// Haversine distance on the same mean sphere the sampler documents, written
/// out independently of the crate.
pub fn haversine_m(a: GeoPosition, b: GeoPosition) -> f64 {
    const R: f64 = 6_371_008.8;
    let (p1, p2) = (a.lat().to_radians(), b.lat().to_radians());
    let dp = p2 - p1;
    let dl = (b.lon() - a.lon()).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * R * h.sqrt().asin()
}

/// One entry of the published Cambridge table: date month, local clock hour,
/// and the range endpoints.
#[derive(Debug, Clone, Copy)]
pub struct TableEntry {
    pub month: u32,
    pub hour: u32,
    pub low: f64,
    pub high: f64,
}

const fn e(month: u32, hour: u32, low: f64, high: f64) -> TableEntry {
    TableEntry { month, hour, low, high }
}

/// Every (hour, range) cell of the published table, 20th of each month 2018.
pub const CAMBRIDGE_TABLE: &[TableEntry] = &[
    e(1, 8, 100.87, 150.87),
    e(1, 9, 112.51, 162.51),
    e(1, 10, 125.72, 175.72),
    e(1, 14, 186.47, 236.47),
    e(1, 15, 199.44, 249.44),
    e(1, 16, 210.87, 260.87),
    e(2, 7, 83.46, 133.46),
    e(2, 8, 94.29, 144.29),
    e(2, 9, 106.58, 156.58),
    e(2, 15, 204.39, 254.39),
    e(2, 16, 216.58, 266.58),
    e(2, 17, 227.36, 277.36),
    e(3, 8, 76.74, 126.74),
    e(3, 9, 87.93, 137.93),
    e(3, 17, 225.43, 275.43),
    e(3, 18, 236.31, 286.31),
    e(4, 7, 59.16, 109.16),
    e(4, 8, 69.24, 119.24),
    e(4, 18, 246.62, 296.62),
    e(4, 19, 256.53, 306.53),
    e(5, 6, 43.47, 93.47),
    e(5, 7, 52.95, 102.95),
    e(5, 18, 253.74, 303.74),
    e(5, 19, 263.17, 313.17),
    e(6, 6, 40.15, 90.15),
    e(6, 7, 49.40, 99.40),
    e(6, 18, 255.77, 305.77),
    e(6, 19, 264.92, 314.92),
    e(6, 20, 274.40, 324.40),
    e(7, 6, 41.43, 91.43),
    e(7, 7, 50.93, 100.93),
    e(7, 18, 252.54, 302.54),
    e(7, 19, 261.93, 311.93),
    e(8, 7, 57.82, 107.82),
    e(8, 8, 67.84, 117.84),
    e(8, 18, 246.25, 296.25),
    e(8, 19, 256.14, 306.14),
    e(9, 7, 68.01, 118.01),
    e(9, 8, 78.45, 128.45),
    e(9, 17, 228.65, 278.65),
    e(9, 18, 239.27, 289.27),
    e(10, 8, 88.26, 138.26),
    e(10, 9, 99.75, 149.75),
    e(10, 16, 210.60, 260.60),
    e(10, 17, 222.02, 272.02),
    e(11, 7, 94.54, 144.54),
    e(11, 8, 105.44, 155.44),
    e(11, 9, 117.76, 167.76),
    e(11, 10, 131.72, 181.32),
    e(11, 13, 178.34, 228.34),
    e(11, 14, 192.28, 242.28),
    e(11, 15, 204.57, 254.57),
    e(11, 16, 215.45, 265.45),
    e(12, 8, 105.45, 155.45),
    e(12, 9, 117.08, 167.08),
    e(12, 10, 130.15, 180.15),
    e(12, 11, 144.52, 194.52),
    e(12, 12, 159.55, 209.55),
    e(12, 13, 174.28, 224.28),
    e(12, 14, 187.92, 237.92),
    e(12, 15, 200.11, 250.11),
];

/// The published November 10 am cell whose width is 49.6 rather than 50.
pub fn is_width_anomaly(t: &TableEntry) -> bool {
    t.month == 11 && t.hour == 10
}

/// Analytic obstruction transitions for a skyline scene: the sun is hidden
/// when its SPA elevation is below the skyline at its SPA azimuth. Daylight is
/// scanned every 30 s and each sign change bisected to 0.1 s.
pub fn analytic_transitions(sc: &SkylineScenario) -> Vec<(Instant, bool)> {
    let hidden = |t: &Instant| {
        let (el, az) = spa(sc.site, t);
        el < sc.skyline.elevation_at(az)
    };
    let up = |t: &Instant| spa(sc.site, t).0 > 0.0;
    let mut out = Vec::new();
    let mut prev: Option<(Instant, bool)> = None;
    for t in day_samples(sc.date, &sc.zone, DaySpan::full_day(), 30.0).unwrap() {
        if !up(&t) {
            prev = None;
            continue;
        }
        let state = hidden(&t);
        if let Some((pt, ps)) = prev {
            if ps != state {
                let (mut lo, mut hi) = (pt, t);
                while lo.seconds_until(&hi) > 0.1 {
                    let mid = lo.plus_seconds(lo.seconds_until(&hi) / 2.0);
                    if hidden(&mid) == ps {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                out.push((lo.plus_seconds(lo.seconds_until(&hi) / 2.0), state));
            }
        }
        prev = Some((t, state));
    }
    out
}
