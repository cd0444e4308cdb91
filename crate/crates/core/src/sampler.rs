//! Road network ingestion, fixed-interval sample sites, and season classification.

use std::fmt;
use std::str::FromStr;

use geojson::{GeoJson, Geometry, GeometryValue as GeoValue};
use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{bearing, distance_m, interpolate, normalize_degrees, GeoPosition};
use crate::panorama::PanoramaFrame;

pub const DEFAULT_SPACING_M: f64 = 40.0;

/// Slack for floating-point length sums when counting sites.
const LENGTH_EPS_M: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct RoadSegment {
    pub id: String,
    polyline: Vec<GeoPosition>,
    pub bidirectional: bool,
}

impl RoadSegment {
    /// Consecutive duplicate vertices are dropped; at least two vertices must be given.
    pub fn new(id: impl Into<String>, polyline: Vec<GeoPosition>, bidirectional: bool) -> Result<Self> {
        let id = id.into();
        if polyline.len() < 2 {
            return Err(Error::invalid(format!(
                "segment {id}: polyline needs at least 2 vertices"
            )));
        }
        let mut clean: Vec<GeoPosition> = Vec::with_capacity(polyline.len());
        for p in polyline {
            if clean.last() != Some(&p) {
                clean.push(p);
            }
        }
        Ok(Self {
            id,
            polyline: clean,
            bidirectional,
        })
    }

    pub fn polyline(&self) -> &[GeoPosition] {
        &self.polyline
    }

    pub fn length_m(&self) -> f64 {
        self.polyline.windows(2).map(|w| distance_m(w[0], w[1])).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Reverse,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Forward => "forward",
            Direction::Reverse => "reverse",
        })
    }
}

impl FromStr for Direction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forward" => Ok(Direction::Forward),
            "reverse" => Ok(Direction::Reverse),
            other => Err(Error::invalid(format!("direction {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSite {
    pub site_id: String,
    pub position: GeoPosition,
    pub heading_deg: f64,
    pub reverse_heading_deg: Option<f64>,
    pub segment_id: String,
    pub chainage_m: f64,
}

impl SampleSite {
    /// Driving directions evaluated at this site.
    pub fn headings(&self) -> Vec<(Direction, f64)> {
        let mut out = vec![(Direction::Forward, self.heading_deg)];
        if let Some(r) = self.reverse_heading_deg {
            out.push((Direction::Reverse, r));
        }
        out
    }
}

pub fn site_id(segment_id: &str, chainage_m: f64) -> String {
    format!("{segment_id}@{chainage_m:.1}")
}

/// Places sites every `spacing_m` meters of geodesic chainage, starting at the
/// first vertex. Each heading is the initial bearing of the sub-segment holding
/// the site; a site on a vertex takes the outgoing sub-segment (the last vertex
/// takes the incoming one). Zero-length segments yield no sites.
pub fn sample_segment(segment: &RoadSegment, spacing_m: f64) -> Result<Vec<SampleSite>> {
    if !(spacing_m.is_finite() && spacing_m > 0.0) {
        return Err(Error::invalid(format!("spacing must be positive, got {spacing_m}")));
    }
    let verts = &segment.polyline;
    let lengths: Vec<f64> = verts.windows(2).map(|w| distance_m(w[0], w[1])).collect();
    let total: f64 = lengths.iter().sum();
    if verts.len() < 2 || total <= LENGTH_EPS_M {
        warn!("skipping zero-length segment {}", segment.id);
        return Ok(Vec::new());
    }

    let count = ((total + LENGTH_EPS_M) / spacing_m).floor() as usize + 1;
    let mut sites = Vec::with_capacity(count);
    let mut sub = 0usize;
    let mut sub_start = 0.0;
    for k in 0..count {
        let chainage = (k as f64 * spacing_m).min(total);
        while sub + 1 < lengths.len() && chainage >= sub_start + lengths[sub] {
            sub_start += lengths[sub];
            sub += 1;
        }
        let fraction = ((chainage - sub_start) / lengths[sub]).clamp(0.0, 1.0);
        let position = interpolate(verts[sub], verts[sub + 1], fraction);
        let heading = bearing(verts[sub], verts[sub + 1])?;
        sites.push(SampleSite {
            site_id: site_id(&segment.id, chainage),
            position,
            heading_deg: heading,
            reverse_heading_deg: segment.bidirectional.then(|| normalize_degrees(heading + 180.0)),
            segment_id: segment.id.clone(),
            chainage_m: chainage,
        });
    }
    Ok(sites)
}

/// Samples every segment; site order follows segment order then chainage.
pub fn sample_network(segments: &[RoadSegment], spacing_m: f64) -> Result<Vec<SampleSite>> {
    let mut out = Vec::new();
    for s in segments {
        out.extend(sample_segment(s, spacing_m)?);
    }
    Ok(out)
}

/// Reads line features (`LineString` or `MultiLineString`) from a GeoJSON text.
///
/// Feature properties: `id` (string or number; falls back to the feature id or
/// its index) and optional `oneway` (bool, or "yes"/"true"/"1"). Each part of a
/// multi-line becomes its own segment with a `#k` suffix.
pub fn parse_road_network(text: &str) -> Result<Vec<RoadSegment>> {
    let gj: GeoJson = text.parse().map_err(|e: geojson::Error| Error::Parse {
        source_ref: "road network".into(),
        reason: e.to_string(),
    })?;
    let features = match gj {
        GeoJson::FeatureCollection(fc) => fc.features,
        GeoJson::Feature(f) => vec![f],
        GeoJson::Geometry(_) => {
            return Err(Error::Parse {
                source_ref: "road network".into(),
                reason: "expected features, found a bare geometry".into(),
            })
        }
    };

    let mut segments = Vec::new();
    for (idx, f) in features.into_iter().enumerate() {
        let id = f
            .property("id")
            .and_then(json_id)
            .or_else(|| {
                f.id.as_ref().map(|i| match i {
                    geojson::feature::Id::String(s) => s.clone(),
                    geojson::feature::Id::Number(n) => n.to_string(),
                })
            })
            .unwrap_or_else(|| format!("seg{idx}"));
        let oneway = f.property("oneway").map(truthy).unwrap_or(false);
        let Some(Geometry { value, .. }) = f.geometry else {
            warn!("feature {id} has no geometry; skipped");
            continue;
        };
        let parts = match value {
            GeoValue::LineString { coordinates } => vec![coordinates],
            GeoValue::MultiLineString { coordinates } => coordinates,
            _ => {
                warn!("feature {id} is not a line; skipped");
                continue;
            }
        };
        let multi = parts.len() > 1;
        for (k, part) in parts.into_iter().enumerate() {
            let poly = part
                .iter()
                .map(|c| match c.as_slice() {
                    [lon, lat, ..] => GeoPosition::new(*lon, *lat),
                    _ => Err(Error::Parse {
                        source_ref: format!("road {id}"),
                        reason: "coordinate with fewer than 2 values".into(),
                    }),
                })
                .collect::<Result<Vec<_>>>()?;
            let seg_id = if multi { format!("{id}#{k}") } else { id.clone() };
            segments.push(RoadSegment::new(seg_id, poly, !oneway)?);
        }
    }
    Ok(segments)
}

fn json_id(v: &serde_json::Value) -> Option<String> {
    match v {
        serde_json::Value::String(s) => Some(s.clone()),
        serde_json::Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn truthy(v: &serde_json::Value) -> bool {
    match v {
        serde_json::Value::Bool(b) => *b,
        serde_json::Value::Number(n) => n.as_i64() == Some(1),
        serde_json::Value::String(s) => matches!(s.to_ascii_lowercase().as_str(), "yes" | "true" | "1"),
        _ => false,
    }
}

#[derive(Serialize, Deserialize)]
struct SiteCollection {
    #[serde(rename = "type")]
    kind: String,
    features: Vec<SiteFeature>,
}

#[derive(Serialize, Deserialize)]
struct SiteFeature {
    #[serde(rename = "type")]
    kind: String,
    geometry: PointGeometry,
    properties: SiteProperties,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct PointGeometry {
    #[serde(rename = "type")]
    pub(crate) kind: String,
    pub(crate) coordinates: [f64; 2],
}

impl PointGeometry {
    pub(crate) fn at(p: GeoPosition) -> Self {
        Self::from_coordinates([p.lon(), p.lat()])
    }

    pub(crate) fn from_coordinates(coordinates: [f64; 2]) -> Self {
        Self {
            kind: "Point".into(),
            coordinates,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct SiteProperties {
    site_id: String,
    heading_deg: f64,
    reverse_heading_deg: Option<f64>,
    segment_id: String,
    chainage_m: f64,
}

/// Serializes sites as a GeoJSON point FeatureCollection.
pub fn sites_to_geojson(sites: &[SampleSite]) -> Result<String> {
    let doc = SiteCollection {
        kind: "FeatureCollection".into(),
        features: sites
            .iter()
            .map(|s| SiteFeature {
                kind: "Feature".into(),
                geometry: PointGeometry::at(s.position),
                properties: SiteProperties {
                    site_id: s.site_id.clone(),
                    heading_deg: s.heading_deg,
                    reverse_heading_deg: s.reverse_heading_deg,
                    segment_id: s.segment_id.clone(),
                    chainage_m: s.chainage_m,
                },
            })
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

pub fn sites_from_geojson(text: &str) -> Result<Vec<SampleSite>> {
    let doc: SiteCollection = serde_json::from_str(text)?;
    doc.features
        .into_iter()
        .map(|f| {
            let [lon, lat] = f.geometry.coordinates;
            Ok(SampleSite {
                site_id: f.properties.site_id,
                position: GeoPosition::new(lon, lat)?,
                heading_deg: f.properties.heading_deg,
                reverse_heading_deg: f.properties.reverse_heading_deg,
                segment_id: f.properties.segment_id,
                chainage_m: f.properties.chainage_m,
            })
        })
        .collect()
}

/// Leaf-on iff the capture month is May through October.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeasonTag {
    pub leaf_on: bool,
}

impl SeasonTag {
    pub fn from_month(month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::invalid(format!("month {month}")));
        }
        Ok(Self {
            leaf_on: (5..=10).contains(&month),
        })
    }
}

/// Anything with a capture month and an identifier.
pub trait Captured {
    fn capture_id(&self) -> &str;
    fn capture_month(&self) -> u32;
}

impl Captured for PanoramaFrame {
    fn capture_id(&self) -> &str {
        &self.pano_id
    }
    fn capture_month(&self) -> u32 {
        self.capture_month
    }
}

#[derive(Debug)]
pub struct SeasonPartition<T> {
    pub leaf_on: Vec<T>,
    pub leaf_off: Vec<T>,
    /// Items whose month is invalid, with the error for each.
    pub rejected: Vec<(T, Error)>,
}

impl<T> SeasonPartition<T> {
    pub fn counts(&self) -> (usize, usize, usize) {
        (self.leaf_on.len(), self.leaf_off.len(), self.rejected.len())
    }
}

pub fn classify_season<T: Captured + Clone>(items: &[T]) -> SeasonPartition<T> {
    let mut part = SeasonPartition {
        leaf_on: Vec::new(),
        leaf_off: Vec::new(),
        rejected: Vec::new(),
    };
    for item in items {
        match SeasonTag::from_month(item.capture_month()) {
            Ok(tag) if tag.leaf_on => part.leaf_on.push(item.clone()),
            Ok(_) => part.leaf_off.push(item.clone()),
            Err(_) => {
                let err = Error::InvalidMetadata {
                    pano_id: item.capture_id().to_string(),
                    reason: format!("capture month {} outside 1-12", item.capture_month()),
                };
                part.rejected.push((item.clone(), err));
            }
        }
    }
    part
}
