//! Synthetic scenes with known geometry: analytic skylines, the masks and
//! panoramas they induce, and a small offline city for end-to-end runs.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate};
use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::acquisition::{write_fixture_panorama, PanoMetadataRecord};
use crate::error::{Error, Result};
use crate::geo::{destination, normalize_degrees, GeoPosition};
use crate::panorama::{MaskSource, ObstructionMask, PanoramaFrame, OBSTRUCTION_LABEL, SKY_LABEL};
use crate::sampler::{parse_road_network, sample_network, RoadSegment, SampleSite, DEFAULT_SPACING_M};
use crate::time::Zone;

/// Skyline elevation as a function of azimuth. Sectors are half-open
/// `[from, to)` clockwise and may wrap through north.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Skyline {
    Uniform(f64),
    Sector {
        from_deg: f64,
        to_deg: f64,
        inside_deg: f64,
        outside_deg: f64,
    },
    /// Linear from `start_deg` at `from` to `end_deg` at `to`.
    Ramp {
        from_deg: f64,
        to_deg: f64,
        start_deg: f64,
        end_deg: f64,
        outside_deg: f64,
    },
}

fn sector_offset(az: f64, from: f64, to: f64) -> Option<(f64, f64)> {
    let span = normalize_degrees(to - from);
    let off = normalize_degrees(az - from);
    (off < span).then_some((off, span))
}

impl Skyline {
    pub fn elevation_at(&self, azimuth_deg: f64) -> f64 {
        match *self {
            Skyline::Uniform(e) => e,
            Skyline::Sector {
                from_deg,
                to_deg,
                inside_deg,
                outside_deg,
            } => match sector_offset(azimuth_deg, from_deg, to_deg) {
                Some(_) => inside_deg,
                None => outside_deg,
            },
            Skyline::Ramp {
                from_deg,
                to_deg,
                start_deg,
                end_deg,
                outside_deg,
            } => match sector_offset(azimuth_deg, from_deg, to_deg) {
                Some((off, span)) => start_deg + (end_deg - start_deg) * off / span,
                None => outside_deg,
            },
        }
    }

    /// Mask for `frame`: a pixel is sky when its lower edge clears the skyline
    /// at the column center. Skylines whose breaks fall on pixel edges are
    /// reproduced exactly under nearest-pixel lookup.
    pub fn mask(&self, frame: &PanoramaFrame) -> Result<ObstructionMask> {
        frame.validate()?;
        let cols: Vec<f64> = (0..frame.width)
            .map(|c| self.elevation_at(frame.azimuth_at_column(f64::from(c) + 0.5)))
            .collect();
        let mask = ObstructionMask::from_fn(frame.width, frame.height, MaskSource::Model, |c, r| {
            if frame.elevation_at_row(f64::from(r) + 1.0) >= cols[c as usize] - 1e-9 {
                SKY_LABEL
            } else {
                OBSTRUCTION_LABEL
            }
        })?;
        Ok(mask.with_pano_id(frame.pano_id.clone()))
    }

    /// Street-view-like raster: blue sky above the skyline, gray facade below.
    pub fn render(&self, frame: &PanoramaFrame) -> Result<RgbImage> {
        let mask = self.mask(frame)?;
        Ok(RgbImage::from_fn(frame.width, frame.height, |c, r| {
            if mask.is_sky(c, r) {
                Rgb([96, 150, 225])
            } else {
                Rgb([92, 88, 84])
            }
        }))
    }
}

/// A site, day and skyline whose obstruction transitions are known analytically.
#[derive(Debug, Clone)]
pub struct SkylineScenario {
    pub name: &'static str,
    pub site: GeoPosition,
    pub date: NaiveDate,
    pub zone: Zone,
    pub yaw_deg: f64,
    pub tilt_deg: f64,
    pub height: u32,
    pub skyline: Skyline,
}

impl SkylineScenario {
    pub fn frame(&self) -> Result<PanoramaFrame> {
        PanoramaFrame::new(
            self.name,
            self.site,
            self.yaw_deg,
            self.tilt_deg,
            self.date.year(),
            self.date.month(),
            self.height * 2,
            self.height,
        )
    }
}

fn pos(lon: f64, lat: f64) -> GeoPosition {
    GeoPosition::new(lon, lat).expect("fixture coordinates are valid")
}

fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("fixture date is valid")
}

fn tz(name: &str) -> Zone {
    name.parse().expect("fixture zone is valid")
}

/// Scenes covering building edges, a notch between towers, a sloped ridge,
/// an equatorial and a southern-hemisphere site, and a tilted camera.
pub fn skyline_scenarios() -> Vec<SkylineScenario> {
    let cambridge = pos(-71.136095, 42.399143);
    vec![
        SkylineScenario {
            name: "west-building-edge-july",
            site: cambridge,
            date: ymd(2018, 7, 5),
            zone: Zone::us_eastern(),
            yaw_deg: 270.0,
            tilt_deg: 0.0,
            height: 360,
            skyline: Skyline::Sector {
                from_deg: 240.0,
                to_deg: 320.0,
                inside_deg: 16.0,
                outside_deg: 0.0,
            },
        },
        SkylineScenario {
            name: "gap-between-towers-december",
            site: cambridge,
            date: ymd(2018, 12, 20),
            zone: Zone::us_eastern(),
            yaw_deg: 180.0,
            tilt_deg: 0.0,
            height: 360,
            skyline: Skyline::Sector {
                from_deg: 200.0,
                to_deg: 220.0,
                inside_deg: 0.0,
                outside_deg: 30.0,
            },
        },
        SkylineScenario {
            name: "east-step-equinox",
            site: cambridge,
            date: ymd(2018, 3, 20),
            zone: Zone::us_eastern(),
            yaw_deg: 90.0,
            tilt_deg: 0.0,
            height: 360,
            skyline: Skyline::Sector {
                from_deg: 60.0,
                to_deg: 120.0,
                inside_deg: 20.0,
                outside_deg: 5.0,
            },
        },
        SkylineScenario {
            name: "equatorial-tower",
            site: pos(-78.4678, -0.1807),
            date: ymd(2018, 3, 20),
            zone: tz("America/Guayaquil"),
            yaw_deg: 90.0,
            tilt_deg: 0.0,
            height: 360,
            skyline: Skyline::Sector {
                from_deg: 80.0,
                to_deg: 100.0,
                inside_deg: 45.0,
                outside_deg: 0.0,
            },
        },
        SkylineScenario {
            name: "southern-sloped-ridge",
            site: pos(151.2093, -33.8688),
            date: ymd(2018, 12, 20),
            zone: tz("Australia/Sydney"),
            yaw_deg: 270.0,
            tilt_deg: 0.0,
            height: 2160,
            skyline: Skyline::Ramp {
                from_deg: 240.0,
                to_deg: 300.0,
                start_deg: 30.0,
                end_deg: 5.0,
                outside_deg: 0.0,
            },
        },
        SkylineScenario {
            name: "tilted-camera-winter",
            site: pos(-71.117, 42.376),
            date: ymd(2018, 1, 20),
            zone: Zone::us_eastern(),
            yaw_deg: 37.5,
            tilt_deg: 1.0,
            height: 360,
            skyline: Skyline::Sector {
                from_deg: 150.0,
                to_deg: 170.0,
                inside_deg: 24.0,
                outside_deg: 10.0,
            },
        },
    ]
}

/// Paths written by [`write_fixture_city`].
#[derive(Debug, Clone)]
pub struct FixtureCity {
    pub roads: PathBuf,
    pub panoramas: PathBuf,
    pub records: Vec<PanoMetadataRecord>,
    pub sites: Vec<SampleSite>,
}

pub const FIXTURE_CITY_ORIGIN: (f64, f64) = (-71.12, 42.37);
pub const FIXTURE_PANORAMA_HEIGHT: u32 = 128;
pub const FIXTURE_ZOOM: u32 = 1;

/// Writes a deterministic synthetic city under `dir`: `roads.geojson`, a
/// rotated street grid sampled into exactly `rows * cols * 20` sites, and a
/// `panoramas/` tree with one leaf-on and one leaf-off capture per site.
pub fn write_fixture_city(dir: &Path, seed: u64) -> Result<FixtureCity> {
    const STREETS: usize = 10;
    const STREET_LEN_M: f64 = 780.0;
    const BLOCK_M: f64 = 90.0;
    const GRID_ROTATION_DEG: f64 = 20.0;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let origin = pos(FIXTURE_CITY_ORIGIN.0, FIXTURE_CITY_ORIGIN.1);

    let mut features = Vec::new();
    for i in 0..STREETS {
        // half the streets run along the rotated grid axis, half across it
        let along = i < STREETS / 2;
        let k = (i % (STREETS / 2)) as f64;
        let (axis, offset_dir) = if along {
            (90.0 + GRID_ROTATION_DEG, GRID_ROTATION_DEG)
        } else {
            (GRID_ROTATION_DEG, 90.0 + GRID_ROTATION_DEG)
        };
        let start = destination(origin, offset_dir, k * BLOCK_M + if along { 0.0 } else { 45.0 });
        let mid = destination(start, axis, STREET_LEN_M / 2.0);
        let end = destination(mid, axis + rng.gen_range(-3.0..3.0), STREET_LEN_M / 2.0);
        let line: Vec<[f64; 2]> = [start, mid, end]
            .iter()
            .map(|p| [round7(p.lon()), round7(p.lat())])
            .collect();
        features.push(json!({
            "type": "Feature",
            "properties": { "id": format!("street-{i:02}"), "oneway": rng.gen_bool(0.3) },
            "geometry": { "type": "LineString", "coordinates": line },
        }));
    }
    let roads_doc = json!({ "type": "FeatureCollection", "features": features });
    let roads_text = serde_json::to_string_pretty(&roads_doc)?;

    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let roads = dir.join("roads.geojson");
    fs::write(&roads, &roads_text).map_err(|e| Error::io(&roads, e))?;

    // sample from the text as written so coordinates match what the CLI sees
    let segments: Vec<RoadSegment> = parse_road_network(&roads_text)?;
    let sites = sample_network(&segments, DEFAULT_SPACING_M)?;

    let panoramas = dir.join("panoramas");
    let mut records = Vec::new();
    for (n, site) in sites.iter().enumerate() {
        let at = destination(site.position, rng.gen_range(0.0..360.0), rng.gen_range(0.0..4.0));
        let yaw = round6(normalize_degrees(site.heading_deg + rng.gen_range(-2.0..2.0)));
        for (leaf_on, year, month) in [(true, 2017, 7), (false, 2015, 2)] {
            let rec = PanoMetadataRecord {
                panoid: format!("fx{n:04}{}", if leaf_on { 'a' } else { 'b' }),
                lon: round7(at.lon()),
                lat: round7(at.lat()),
                year,
                month,
                yaw_deg: yaw,
            };
            let frame = rec.to_frame(FIXTURE_PANORAMA_HEIGHT * 2, FIXTURE_PANORAMA_HEIGHT)?;
            let raster = random_skyline(&mut rng).render(&frame)?;
            write_fixture_panorama(
                &panoramas,
                std::slice::from_ref(&rec),
                &rec.panoid,
                FIXTURE_ZOOM,
                &raster,
            )?;
            records.push(rec);
        }
    }
    Ok(FixtureCity {
        roads,
        panoramas,
        records,
        sites,
    })
}

/// Random street canyon: open sky, a uniform wall, or a wall with one gap.
pub fn random_skyline(rng: &mut impl Rng) -> Skyline {
    let wall = f64::from(rng.gen_range(2u32..60));
    match rng.gen_range(0..4) {
        0 => Skyline::Uniform(0.0),
        1 => Skyline::Uniform(wall),
        _ => {
            let from = f64::from(rng.gen_range(0u32..72)) * 5.0;
            Skyline::Sector {
                from_deg: from,
                to_deg: normalize_degrees(from + f64::from(rng.gen_range(4u32..24)) * 5.0),
                inside_deg: 0.0,
                outside_deg: wall,
            }
        }
    }
}

fn round7(v: f64) -> f64 {
    (v * 1e7).round() / 1e7
}

fn round6(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}
