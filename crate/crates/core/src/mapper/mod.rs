//! City-scale orchestration: per-site glare evaluation, map documents,
//! orientation tables and obstruction-boundary validation.

mod output;
mod table;

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use chrono::NaiveDate;
use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use output::{windows_csv, GlareMapDocument, MapFeature, RunManifest};
pub use table::{build_glare_table, clock_label, format_glare_table, GlareTableRow};

use crate::acquisition::{select_record, PanoMetadataRecord, SelectionPolicy, DEFAULT_MATCH_RADIUS_M};
use crate::error::{Error, Result};
use crate::geo::GeoPosition;
use crate::glare::{scan_day, DriverPose, GlareCriteria, GlareKind, GlareWindow, ObstructionOracle};
use crate::panorama::{MaskSource, ObstructionMask, PanoramaObstruction};
use crate::sampler::{Direction, SampleSite};
use crate::solar::solar_position;
use crate::time::{day_samples, DaySpan, Instant, Zone};

/// Where a site's obstruction information came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskProvenance {
    Model,
    Heuristic,
    None,
}

impl From<MaskSource> for MaskProvenance {
    fn from(s: MaskSource) -> Self {
        match s {
            MaskSource::Model => MaskProvenance::Model,
            MaskSource::Heuristic => MaskProvenance::Heuristic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SiteGlareResult {
    pub site_id: String,
    pub date: NaiveDate,
    pub direction: Direction,
    pub heading_deg: f64,
    pub windows: Vec<GlareWindow>,
    pub geometric_windows: Vec<GlareWindow>,
    pub pano_id: Option<String>,
    pub mask_source: MaskProvenance,
    pub error: Option<String>,
}

impl SiteGlareResult {
    pub fn has(&self, kind: GlareKind, obstructed: bool) -> bool {
        let ws = if obstructed {
            &self.windows
        } else {
            &self.geometric_windows
        };
        ws.iter().any(|w| w.kind == kind)
    }

    pub fn duration_s(&self, kind: Option<GlareKind>, obstructed: bool) -> f64 {
        let ws = if obstructed {
            &self.windows
        } else {
            &self.geometric_windows
        };
        ws.iter()
            .filter(|w| kind.is_none_or(|k| w.kind == k))
            .map(GlareWindow::duration_s)
            .sum()
    }
}

/// Resolves the panorama and mask used to judge obstruction at a site.
pub trait MaskStore: Sync {
    /// `Ok(None)` means no panorama within reach; errors are recorded per site.
    fn resolve(&self, site: &SampleSite) -> Result<Option<PanoramaObstruction>>;
}

impl MaskStore for HashMap<String, PanoramaObstruction> {
    fn resolve(&self, site: &SampleSite) -> Result<Option<PanoramaObstruction>> {
        Ok(self.get(&site.site_id).cloned())
    }
}

/// Masks on disk (`{dir}/{panoid}.png` plus sidecar) matched to sites through
/// panorama metadata records.
pub struct DirectoryMaskStore {
    dir: PathBuf,
    records: Vec<PanoMetadataRecord>,
    pub radius_m: f64,
    pub policy: SelectionPolicy,
    loaded: Mutex<HashMap<String, Arc<ObstructionMask>>>,
}

impl DirectoryMaskStore {
    /// Only records that have a mask file take part in matching.
    pub fn new(dir: impl Into<PathBuf>, records: Vec<PanoMetadataRecord>) -> Self {
        let dir = dir.into();
        let records = records
            .into_iter()
            .filter(|r| dir.join(format!("{}.png", r.panoid)).is_file())
            .collect();
        Self {
            dir,
            records,
            radius_m: DEFAULT_MATCH_RADIUS_M,
            policy: SelectionPolicy::default(),
            loaded: Mutex::new(HashMap::new()),
        }
    }

    pub fn record_count(&self) -> usize {
        self.records.len()
    }

    fn mask(&self, panoid: &str) -> Result<Arc<ObstructionMask>> {
        if let Some(m) = self.loaded.lock().expect("mask cache poisoned").get(panoid) {
            return Ok(Arc::clone(m));
        }
        let m = Arc::new(ObstructionMask::load(&self.dir.join(format!("{panoid}.png")))?);
        self.loaded
            .lock()
            .expect("mask cache poisoned")
            .insert(panoid.to_string(), Arc::clone(&m));
        Ok(m)
    }
}

impl MaskStore for DirectoryMaskStore {
    fn resolve(&self, site: &SampleSite) -> Result<Option<PanoramaObstruction>> {
        let Some(rec) = select_record(&self.records, site.position, self.radius_m, self.policy) else {
            return Ok(None);
        };
        let mask = self.mask(&rec.panoid)?;
        if let Some(id) = &mask.pano_id {
            if id != &rec.panoid {
                return Err(Error::InvalidMask(format!(
                    "mask for {} claims pano id {id}",
                    rec.panoid
                )));
            }
        }
        let frame = rec.to_frame(mask.width(), mask.height())?;
        PanoramaObstruction::new(frame, mask).map(Some)
    }
}

/// Shared settings of a mapping run.
#[derive(Debug, Clone, Copy)]
pub struct MapSettings {
    pub zone: Zone,
    pub step_s: f64,
    pub criteria: GlareCriteria,
}

impl MapSettings {
    pub fn new(zone: Zone) -> Self {
        Self {
            zone,
            step_s: crate::glare::DEFAULT_STEP_S,
            criteria: GlareCriteria::default(),
        }
    }
}

/// Evaluates every site and driving direction on `date`. Results are sorted by
/// `(site_id, direction)`; per-site failures degrade to geometric-only results
/// carrying the error text.
pub fn evaluate_sites(
    sites: &[SampleSite],
    date: NaiveDate,
    settings: &MapSettings,
    store: Option<&dyn MaskStore>,
) -> Result<Vec<SiteGlareResult>> {
    let per_site: Vec<Result<Vec<SiteGlareResult>>> = sites
        .par_iter()
        .map(|site| evaluate_site(site, date, settings, store))
        .collect();
    let mut out = Vec::with_capacity(sites.len() * 2);
    for r in per_site {
        out.extend(r?);
    }
    out.sort_by(|a, b| (&a.site_id, a.direction).cmp(&(&b.site_id, b.direction)));
    Ok(out)
}

fn evaluate_site(
    site: &SampleSite,
    date: NaiveDate,
    settings: &MapSettings,
    store: Option<&dyn MaskStore>,
) -> Result<Vec<SiteGlareResult>> {
    let (obstruction, error) = match store.map(|s| s.resolve(site)) {
        None | Some(Ok(None)) => (None, None),
        Some(Ok(Some(o))) => (Some(o), None),
        Some(Err(e)) => {
            warn!("site {}: {e}; evaluating without obstruction", site.site_id);
            (None, Some(e.to_string()))
        }
    };
    let (pano_id, mask_source) = match &obstruction {
        Some(o) => (Some(o.frame().pano_id.clone()), o.mask().source.into()),
        None => (None, MaskProvenance::None),
    };

    site.headings()
        .into_iter()
        .map(|(direction, heading)| {
            let pose = DriverPose::flat(site.position, heading)?;
            let oracle = obstruction.as_ref().map(|o| o as &dyn ObstructionOracle);
            // errors in the ephemeris (epoch) are run-level, not per-site
            let scan = scan_day(&pose, date, &settings.zone, settings.step_s, &settings.criteria, oracle)?;
            Ok(SiteGlareResult {
                site_id: site.site_id.clone(),
                date,
                direction,
                heading_deg: pose.heading_deg(),
                windows: scan.windows,
                geometric_windows: scan.geometric,
                pano_id: pano_id.clone(),
                mask_source,
                error: error.clone(),
            })
        })
        .collect()
}

/// Map of geometric (unobstructed) glare of one kind.
pub fn map_geometric_glare(
    sites: &[SampleSite],
    date: NaiveDate,
    kind: GlareKind,
    settings: &MapSettings,
) -> Result<GlareMapDocument> {
    if sites.is_empty() {
        return Err(Error::invalid("no sample sites to map"));
    }
    let results = evaluate_sites(sites, date, settings, None)?;
    Ok(GlareMapDocument::build(sites, &results, date, kind))
}

/// Map of glare with obstruction; sites without a panorama fall back to
/// geometric evaluation with `mask_source = none`.
pub fn map_obstructed_glare(
    sites: &[SampleSite],
    date: NaiveDate,
    kind: GlareKind,
    settings: &MapSettings,
    store: &dyn MaskStore,
) -> Result<(GlareMapDocument, Vec<SiteGlareResult>)> {
    if sites.is_empty() {
        return Err(Error::invalid("no sample sites to map"));
    }
    let results = evaluate_sites(sites, date, settings, Some(store))?;
    let doc = GlareMapDocument::build(sites, &results, date, kind);
    Ok((doc, results))
}

/// Instant at which the obstruction state along the sun path changes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObstructionTransition {
    pub instant: Instant,
    /// State after the transition.
    pub obstructed: bool,
}

pub const MAX_VALIDATION_STEP_S: f64 = 60.0;

/// Daylight instants where the sun passes between sky and obstruction pixels.
///
/// The day is scanned at `step_s`, then each bracketing pair is bisected to one
/// second. Sunrise and sunset themselves are not transitions.
pub fn validate_boundary(
    obstruction: &PanoramaObstruction,
    site: GeoPosition,
    date: NaiveDate,
    zone: &Zone,
    step_s: f64,
) -> Result<Vec<ObstructionTransition>> {
    if !(step_s > 0.0 && step_s <= MAX_VALIDATION_STEP_S) {
        return Err(Error::invalid(format!(
            "validation step must be in (0, {MAX_VALIDATION_STEP_S}] s, got {step_s}"
        )));
    }
    let mut out = Vec::new();
    let mut prev: Option<(Instant, bool)> = None;
    for t in day_samples(date, zone, DaySpan::full_day(), step_s)? {
        let sun = solar_position(site, &t)?;
        if !sun.is_up() {
            prev = None;
            continue;
        }
        let blocked = obstruction.obstructed(&sun);
        if let Some((pt, pb)) = prev {
            if pb != blocked {
                let instant = bisect_transition(obstruction, site, pt, t, pb)?;
                out.push(ObstructionTransition {
                    instant: zone.at(instant.utc()),
                    obstructed: blocked,
                });
            }
        }
        prev = Some((t, blocked));
    }
    Ok(out)
}

fn bisect_transition(
    obstruction: &PanoramaObstruction,
    site: GeoPosition,
    mut lo: Instant,
    mut hi: Instant,
    lo_state: bool,
) -> Result<Instant> {
    while lo.seconds_until(&hi) > 1.0 {
        let mid = lo.plus_seconds(lo.seconds_until(&hi) / 2.0);
        let sun = solar_position(site, &mid)?;
        let state = sun.is_up() && obstruction.obstructed(&sun);
        if state == lo_state {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo.plus_seconds(lo.seconds_until(&hi) / 2.0))
}

/// Reads metadata records saved by the fetch step (tab-separated).
pub fn load_metadata_file(path: &Path) -> Result<Vec<PanoMetadataRecord>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    crate::acquisition::parse_metadata(&bytes, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::destination;
    use crate::panorama::{PanoramaFrame, OBSTRUCTION_LABEL, SKY_LABEL};
    use crate::sampler::{sample_segment, RoadSegment};

    fn cambridge() -> GeoPosition {
        GeoPosition::new(-71.117, 42.376).unwrap()
    }

    fn date(m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2018, m, d).unwrap()
    }

    fn road(heading: f64, bidirectional: bool) -> Vec<SampleSite> {
        let a = cambridge();
        let seg = RoadSegment::new(
            format!("h{heading}"),
            vec![a, destination(a, heading, 80.0)],
            bidirectional,
        )
        .unwrap();
        sample_segment(&seg, 40.0).unwrap()
    }

    fn uniform_store(sites: &[SampleSite], label: u8) -> HashMap<String, PanoramaObstruction> {
        let mask = Arc::new(ObstructionMask::uniform(128, 64, label, MaskSource::Model).unwrap());
        sites
            .iter()
            .map(|s| {
                let f = PanoramaFrame::new(
                    format!("p-{}", s.site_id),
                    s.position,
                    s.heading_deg,
                    0.0,
                    2018,
                    7,
                    128,
                    64,
                )
                .unwrap();
                (
                    s.site_id.clone(),
                    PanoramaObstruction::new(f, Arc::clone(&mask)).unwrap(),
                )
            })
            .collect()
    }

    #[test]
    fn north_heading_has_no_december_glare() {
        let sites = road(0.0, false);
        let s = MapSettings::new(Zone::us_eastern());
        for kind in [GlareKind::Sunrise, GlareKind::Sunset] {
            let doc = map_geometric_glare(&sites, date(12, 20), kind, &s).unwrap();
            assert!(doc.features.iter().all(|f| !f.glare));
        }
    }

    #[test]
    fn empty_sites_rejected() {
        let s = MapSettings::new(Zone::utc());
        assert!(map_geometric_glare(&[], date(1, 1), GlareKind::Sunrise, &s).is_err());
    }

    #[test]
    fn sky_store_matches_geometric_and_wall_store_blocks_all() {
        let mut sites = road(135.0, true);
        sites.extend(road(225.0, true));
        let s = MapSettings::new(Zone::us_eastern());
        let sky = uniform_store(&sites, SKY_LABEL);
        let wall = uniform_store(&sites, OBSTRUCTION_LABEL);
        for kind in [GlareKind::Sunrise, GlareKind::Sunset] {
            let geo = map_geometric_glare(&sites, date(12, 20), kind, &s).unwrap();
            let (obs, _) = map_obstructed_glare(&sites, date(12, 20), kind, &s, &sky).unwrap();
            let flags = |d: &GlareMapDocument| {
                d.features
                    .iter()
                    .map(|f| (f.site_id.clone(), f.direction, f.glare))
                    .collect::<Vec<_>>()
            };
            assert_eq!(flags(&geo), flags(&obs));
            assert!(geo.features.iter().any(|f| f.glare));
            let (blocked, _) = map_obstructed_glare(&sites, date(12, 20), kind, &s, &wall).unwrap();
            assert!(blocked.features.iter().all(|f| !f.glare));
            assert!(blocked.features.iter().all(|f| f.mask_source == MaskProvenance::Model));
        }
    }

    #[test]
    fn missing_masks_degrade_to_geometric() {
        let sites = road(135.0, false);
        let s = MapSettings::new(Zone::us_eastern());
        let empty: HashMap<String, PanoramaObstruction> = HashMap::new();
        let (doc, results) = map_obstructed_glare(&sites, date(12, 20), GlareKind::Sunrise, &s, &empty).unwrap();
        assert!(results
            .iter()
            .all(|r| r.mask_source == MaskProvenance::None && r.windows == r.geometric_windows));
        assert!(doc.features.iter().all(|f| f.glare == f.geometric_glare));
    }

    #[test]
    fn all_sky_has_no_transitions() {
        let f = PanoramaFrame::new("p", cambridge(), 270.0, 0.0, 2018, 7, 256, 128).unwrap();
        let o = PanoramaObstruction::new(
            f,
            ObstructionMask::uniform(256, 128, SKY_LABEL, MaskSource::Model).unwrap(),
        )
        .unwrap();
        let tr = validate_boundary(&o, cambridge(), date(7, 5), &Zone::us_eastern(), 60.0).unwrap();
        assert!(tr.is_empty());
        assert!(validate_boundary(&o, cambridge(), date(7, 5), &Zone::us_eastern(), 120.0).is_err());
    }
}
