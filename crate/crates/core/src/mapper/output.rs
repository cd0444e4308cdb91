use std::collections::HashMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{MaskProvenance, SiteGlareResult};
use crate::error::Result;
use crate::glare::{GlareKind, GlareWindow};
use crate::sampler::{Direction, PointGeometry, SampleSite};

/// One site and driving direction on a glare map.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapFeature {
    pub site_id: String,
    pub segment_id: String,
    pub direction: Direction,
    pub heading_deg: f64,
    /// Glare after obstruction (equal to `geometric_glare` without a mask).
    pub glare: bool,
    pub geometric_glare: bool,
    pub window_count: usize,
    pub glare_minutes: f64,
    pub geometric_minutes: f64,
    pub windows: Vec<GlareWindow>,
    pub pano_id: Option<String>,
    pub mask_source: MaskProvenance,
    pub error: Option<String>,
    #[serde(skip)]
    pub coordinates: [f64; 2],
}

/// A glare map for one date and one kind of glare, written as a GeoJSON
/// FeatureCollection of points.
#[derive(Debug, Clone, PartialEq)]
pub struct GlareMapDocument {
    pub date: NaiveDate,
    pub kind: GlareKind,
    pub features: Vec<MapFeature>,
}

#[derive(Serialize)]
struct Collection<'a> {
    #[serde(rename = "type")]
    kind: &'static str,
    properties: CollectionProperties,
    features: Vec<Feature<'a>>,
}

#[derive(Serialize)]
struct CollectionProperties {
    date: NaiveDate,
    kind: GlareKind,
    sites: usize,
    glare_features: usize,
}

#[derive(Serialize)]
struct Feature<'a> {
    #[serde(rename = "type")]
    kind: &'static str,
    geometry: PointGeometry,
    properties: &'a MapFeature,
}

impl GlareMapDocument {
    pub fn build(sites: &[SampleSite], results: &[SiteGlareResult], date: NaiveDate, kind: GlareKind) -> Self {
        let by_id: HashMap<&str, &SampleSite> = sites.iter().map(|s| (s.site_id.as_str(), s)).collect();
        let features = results
            .iter()
            .filter(|r| r.date == date)
            .filter_map(|r| {
                let site = by_id.get(r.site_id.as_str())?;
                let windows: Vec<GlareWindow> = r.windows.iter().filter(|w| w.kind == kind).copied().collect();
                let minutes = |ws: &[GlareWindow]| {
                    ws.iter()
                        .filter(|w| w.kind == kind)
                        .map(GlareWindow::duration_s)
                        .sum::<f64>()
                        / 60.0
                };
                Some(MapFeature {
                    site_id: r.site_id.clone(),
                    segment_id: site.segment_id.clone(),
                    direction: r.direction,
                    heading_deg: r.heading_deg,
                    glare: !windows.is_empty(),
                    geometric_glare: r.has(kind, false),
                    window_count: windows.len(),
                    glare_minutes: minutes(&r.windows),
                    geometric_minutes: minutes(&r.geometric_windows),
                    windows,
                    pano_id: r.pano_id.clone(),
                    mask_source: r.mask_source,
                    error: r.error.clone(),
                    coordinates: [site.position.lon(), site.position.lat()],
                })
            })
            .collect();
        Self { date, kind, features }
    }

    pub fn glare_count(&self) -> usize {
        self.features.iter().filter(|f| f.glare).count()
    }

    /// Pretty-printed GeoJSON. Output is a pure function of the document.
    pub fn to_geojson(&self) -> Result<String> {
        let sites = {
            let mut ids: Vec<&str> = self.features.iter().map(|f| f.site_id.as_str()).collect();
            ids.dedup();
            ids.len()
        };
        let doc = Collection {
            kind: "FeatureCollection",
            properties: CollectionProperties {
                date: self.date,
                kind: self.kind,
                sites,
                glare_features: self.glare_count(),
            },
            features: self
                .features
                .iter()
                .map(|f| Feature {
                    kind: "Feature",
                    geometry: PointGeometry::from_coordinates(f.coordinates),
                    properties: f,
                })
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&doc)?;
        s.push('\n');
        Ok(s)
    }
}

/// All windows of a run as CSV, one row per window and layer
/// (`geometric` or `obstructed`).
pub fn windows_csv(results: &[SiteGlareResult]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "site_id",
        "direction",
        "date",
        "kind",
        "layer",
        "start",
        "end",
        "duration_min",
    ])?;
    for r in results {
        for (layer, ws) in [("geometric", &r.geometric_windows), ("obstructed", &r.windows)] {
            for win in ws {
                w.write_record([
                    r.site_id.clone(),
                    r.direction.to_string(),
                    r.date.to_string(),
                    win.kind.to_string(),
                    layer.to_string(),
                    win.start.to_string(),
                    win.end.to_string(),
                    format!("{:.1}", win.duration_s() / 60.0),
                ])?;
            }
        }
    }
    let bytes = w
        .into_inner()
        .map_err(|e| crate::error::Error::invalid(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Summary of a run, written next to its outputs. Timing lives here rather
/// than in the map so map files stay byte-identical across runs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub sites: usize,
    pub evaluations: usize,
    pub with_mask: usize,
    pub without_mask: usize,
    pub site_errors: usize,
    pub requests: u64,
    pub retries: u64,
    pub warnings: Vec<String>,
    pub elapsed_s: f64,
}

impl RunManifest {
    pub fn tally(&mut self, results: &[SiteGlareResult]) {
        self.evaluations = results.len();
        self.with_mask = results.iter().filter(|r| r.mask_source != MaskProvenance::None).count();
        self.without_mask = self.evaluations - self.with_mask;
        self.site_errors = results.iter().filter(|r| r.error.is_some()).count();
    }
}
