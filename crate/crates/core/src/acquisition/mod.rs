//! Panorama metadata and tile acquisition, stitching, and caching.

mod cache;
mod transport;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use image::{GenericImage, RgbImage};
use log::{debug, warn};
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use cache::{encode_png, PanoramaCache};
#[cfg(feature = "live")]
pub use transport::HttpTransport;
pub use transport::{tile_path, EndpointTemplates, FixtureTransport, Request, Transport};

use crate::error::{Error, Result};
use crate::geo::{distance_m, normalize_degrees, GeoPosition};
use crate::panorama::PanoramaFrame;
use crate::sampler::{Captured, SampleSite, SeasonTag};

pub const MAX_ZOOM: u32 = 5;
pub const DEFAULT_RATE_LIMIT_PER_S: f64 = 5.0;
/// Radius for matching panoramas to a sample site.
pub const DEFAULT_MATCH_RADIUS_M: f64 = 25.0;

/// One historical panorama record: `panoid lon lat year month yaw`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanoMetadataRecord {
    pub panoid: String,
    pub lon: f64,
    pub lat: f64,
    pub year: i32,
    pub month: u32,
    #[serde(alias = "yaw")]
    pub yaw_deg: f64,
}

impl PanoMetadataRecord {
    pub fn position(&self) -> Result<GeoPosition> {
        GeoPosition::new(self.lon, self.lat)
    }

    fn validated(mut self) -> Result<Self> {
        let bad = |reason: String| Error::InvalidMetadata {
            pano_id: self.panoid.clone(),
            reason,
        };
        if self.panoid.trim().is_empty() {
            return Err(bad("empty panoid".into()));
        }
        self.position().map_err(|e| bad(e.to_string()))?;
        if !(1..=12).contains(&self.month) {
            return Err(bad(format!("month {}", self.month)));
        }
        if !self.yaw_deg.is_finite() {
            return Err(bad("non-finite yaw".into()));
        }
        self.yaw_deg = normalize_degrees(self.yaw_deg);
        Ok(self)
    }

    pub fn leaf_on(&self) -> bool {
        SeasonTag::from_month(self.month).map(|s| s.leaf_on).unwrap_or(false)
    }

    /// Frame for this record at the given raster size; tilt defaults to 0.
    pub fn to_frame(&self, width: u32, height: u32) -> Result<PanoramaFrame> {
        PanoramaFrame::new(
            self.panoid.clone(),
            self.position()?,
            self.yaw_deg,
            0.0,
            self.year,
            self.month,
            width,
            height,
        )
    }
}

impl Captured for PanoMetadataRecord {
    fn capture_id(&self) -> &str {
        &self.panoid
    }
    fn capture_month(&self) -> u32 {
        self.month
    }
}

/// Parses a metadata payload: tab-separated text with a
/// `panoid lon lat year month yaw` header, or a JSON array of such objects.
/// An empty payload is an empty list.
pub fn parse_metadata(bytes: &[u8], source_ref: &str) -> Result<Vec<PanoMetadataRecord>> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Parse {
        source_ref: source_ref.to_string(),
        reason: e.to_string(),
    })?;
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Ok(Vec::new());
    }
    let parse_err = |reason: String| Error::Parse {
        source_ref: source_ref.to_string(),
        reason,
    };
    let records: Vec<PanoMetadataRecord> = if trimmed.starts_with('[') {
        serde_json::from_str(trimmed).map_err(|e| parse_err(e.to_string()))?
    } else {
        let mut rdr = csv::ReaderBuilder::new()
            .delimiter(b'\t')
            .trim(csv::Trim::All)
            .from_reader(trimmed.as_bytes());
        let headers = rdr.headers().map_err(|e| parse_err(e.to_string()))?.clone();
        let expected = ["panoid", "lon", "lat", "year", "month", "yaw"];
        if headers.iter().take(6).ne(expected.iter().copied()) {
            return Err(parse_err(format!("unexpected header {:?}", headers)));
        }
        let mut out = Vec::new();
        for row in rdr.records() {
            let row = row.map_err(|e| parse_err(e.to_string()))?;
            let field = |i: usize| row.get(i).unwrap_or("");
            let num = |i: usize| -> Result<f64> {
                field(i)
                    .parse::<f64>()
                    .map_err(|e| parse_err(format!("column {} {:?}: {e}", expected[i], field(i))))
            };
            out.push(PanoMetadataRecord {
                panoid: field(0).to_string(),
                lon: num(1)?,
                lat: num(2)?,
                year: field(3)
                    .parse()
                    .map_err(|e| parse_err(format!("year {:?}: {e}", field(3))))?,
                month: field(4)
                    .parse()
                    .map_err(|e| parse_err(format!("month {:?}: {e}", field(4))))?,
                yaw_deg: num(5)?,
            });
        }
        out
    };
    records.into_iter().map(PanoMetadataRecord::validated).collect()
}

/// Tab-separated rendering with the same header `parse_metadata` expects.
pub fn format_metadata(records: &[PanoMetadataRecord]) -> String {
    let mut s = String::from("panoid\tlon\tlat\tyear\tmonth\tyaw\n");
    for r in records {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{:02}\t{}",
            r.panoid, r.lon, r.lat, r.year, r.month, r.yaw_deg
        );
    }
    s
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TileAddress {
    pub panoid: String,
    pub x: u32,
    pub y: u32,
    pub zoom: u32,
}

impl TileAddress {
    pub fn new(panoid: impl Into<String>, x: u32, y: u32, zoom: u32) -> Result<Self> {
        let (cols, rows) = tile_grid(zoom)?;
        if x >= cols || y >= rows {
            return Err(Error::invalid(format!(
                "tile ({x},{y}) outside {cols}x{rows} grid at zoom {zoom}"
            )));
        }
        Ok(Self {
            panoid: panoid.into(),
            x,
            y,
            zoom,
        })
    }
}

/// Columns and rows of the 2:1 tile grid at `zoom`.
pub fn tile_grid(zoom: u32) -> Result<(u32, u32)> {
    if zoom > MAX_ZOOM {
        return Err(Error::invalid(format!("zoom {zoom} outside 0..={MAX_ZOOM}")));
    }
    Ok(if zoom == 0 {
        (1, 1)
    } else {
        (1 << zoom, 1 << (zoom - 1))
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    /// Attempts per request, including the first.
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
    /// Total retries allowed across the whole run.
    pub budget: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 4,
            base_delay: Duration::from_millis(250),
            max_delay: Duration::from_secs(8),
            budget: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct AcquisitionStats {
    pub requests: u64,
    pub retries: u64,
}

/// Which historical record represents a site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionPolicy {
    /// Most recent leaf-on capture, falling back to the most recent of any season.
    #[default]
    MostRecentLeafOn,
    MostRecent,
}

impl std::str::FromStr for SelectionPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "most-recent-leaf-on" => Ok(Self::MostRecentLeafOn),
            "most-recent" => Ok(Self::MostRecent),
            other => Err(Error::invalid(format!("selection policy {other:?}"))),
        }
    }
}

/// Picks the record for `site` among those within `radius_m`.
pub fn select_record(
    records: &[PanoMetadataRecord],
    site: GeoPosition,
    radius_m: f64,
    policy: SelectionPolicy,
) -> Option<&PanoMetadataRecord> {
    records
        .iter()
        .filter_map(|r| {
            let d = distance_m(r.position().ok()?, site);
            (d <= radius_m).then_some((r, d))
        })
        .max_by(|(a, da), (b, db)| {
            let season = |r: &PanoMetadataRecord| match policy {
                SelectionPolicy::MostRecentLeafOn => r.leaf_on(),
                SelectionPolicy::MostRecent => true,
            };
            (season(a), a.year, a.month)
                .cmp(&(season(b), b.year, b.month))
                .then(db.total_cmp(da))
                .then(b.panoid.cmp(&a.panoid))
        })
        .map(|(r, _)| r)
}

struct RateLimiter {
    interval: Option<Duration>,
    next: Mutex<std::time::Instant>,
}

impl RateLimiter {
    fn new(per_second: f64) -> Self {
        let interval = (per_second.is_finite() && per_second > 0.0).then(|| Duration::from_secs_f64(1.0 / per_second));
        Self {
            interval,
            next: Mutex::new(std::time::Instant::now()),
        }
    }

    fn acquire(&self) {
        let Some(interval) = self.interval else { return };
        let wait = {
            let mut next = self.next.lock().expect("rate limiter poisoned");
            let now = std::time::Instant::now();
            let slot = (*next).max(now);
            *next = slot + interval;
            slot - now
        };
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }
}

/// Fetches metadata and panoramas through a transport, applying the shared
/// rate limit, retry budget and optional cache.
pub struct Acquirer<T: Transport> {
    transport: T,
    limiter: RateLimiter,
    retry: RetryPolicy,
    retries_left: AtomicU32,
    requests: AtomicU64,
    retries: AtomicU64,
    cache: Option<PanoramaCache>,
    pub match_radius_m: f64,
}

impl<T: Transport> Acquirer<T> {
    pub fn new(transport: T) -> Self {
        Self::with_settings(transport, DEFAULT_RATE_LIMIT_PER_S, RetryPolicy::default())
    }

    pub fn with_settings(transport: T, rate_limit_per_s: f64, retry: RetryPolicy) -> Self {
        Self {
            transport,
            limiter: RateLimiter::new(rate_limit_per_s),
            retries_left: AtomicU32::new(retry.budget),
            retry,
            requests: AtomicU64::new(0),
            retries: AtomicU64::new(0),
            cache: None,
            match_radius_m: DEFAULT_MATCH_RADIUS_M,
        }
    }

    pub fn with_cache(mut self, cache: PanoramaCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn stats(&self) -> AcquisitionStats {
        AcquisitionStats {
            requests: self.requests.load(Ordering::Relaxed),
            retries: self.retries.load(Ordering::Relaxed),
        }
    }

    fn request(&self, req: &Request) -> Result<Vec<u8>> {
        let mut attempt = 1;
        loop {
            if !self.transport.is_local() {
                self.limiter.acquire();
            }
            self.requests.fetch_add(1, Ordering::Relaxed);
            match self.transport.fetch(req) {
                Ok(bytes) => return Ok(bytes),
                Err(e) if e.is_retriable() && attempt < self.retry.max_attempts && self.take_retry() => {
                    let exp = self.retry.base_delay.saturating_mul(1 << (attempt - 1).min(16));
                    let capped = exp.min(self.retry.max_delay);
                    let jitter = rand::thread_rng().gen_range(0.5..=1.0);
                    debug!("retrying {} after {e}", req.describe());
                    std::thread::sleep(capped.mul_f64(jitter));
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn take_retry(&self) -> bool {
        let ok = self
            .retries_left
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
            .is_ok();
        if ok {
            self.retries.fetch_add(1, Ordering::Relaxed);
        } else {
            warn!("retry budget exhausted");
        }
        ok
    }

    /// Historical records near the site, sorted by (year, month, panoid).
    pub fn fetch_metadata(&self, site: &SampleSite) -> Result<Vec<PanoMetadataRecord>> {
        let req = Request::Metadata {
            position: site.position,
            radius_m: self.match_radius_m,
        };
        let bytes = self.request(&req)?;
        let mut records = parse_metadata(&bytes, &req.describe())?;
        records.sort_by(|a, b| (a.year, a.month, &a.panoid).cmp(&(b.year, b.month, &b.panoid)));
        Ok(records)
    }

    /// Downloads and stitches every tile of `panoid` at `zoom` into one 2:1 raster.
    /// Nothing is cached unless the full grid succeeds.
    pub fn fetch_panorama(&self, panoid: &str, zoom: u32) -> Result<RgbImage> {
        let (cols, rows) = tile_grid(zoom)?;
        if let Some(cache) = &self.cache {
            if let Some(img) = cache.lookup(panoid, zoom)? {
                return Ok(img);
            }
        }
        let mut tiles = Vec::with_capacity((cols * rows) as usize);
        for y in 0..rows {
            for x in 0..cols {
                let addr = TileAddress::new(panoid, x, y, zoom)?;
                let bytes = self.request(&Request::Tile(addr)).map_err(|e| {
                    debug!("tile fetch failed: {e}");
                    Error::IncompletePanorama {
                        pano_id: panoid.to_string(),
                        x,
                        y,
                        zoom,
                    }
                })?;
                let tile = image::load_from_memory(&bytes)
                    .map_err(|e| Error::Stitch {
                        pano_id: panoid.to_string(),
                        reason: format!("tile ({x},{y}) does not decode: {e}"),
                    })?
                    .into_rgb8();
                tiles.push(tile);
            }
        }
        let raster = stitch(panoid, &tiles, cols, rows)?;
        if let Some(cache) = &self.cache {
            cache.store(panoid, zoom, &raster)?;
        }
        Ok(raster)
    }
}

/// Places row-major `tiles` on a `cols` x `rows` grid. Tile size is taken from
/// the first tile and must be uniform; the result must be 2:1.
pub fn stitch(panoid: &str, tiles: &[RgbImage], cols: u32, rows: u32) -> Result<RgbImage> {
    let err = |reason: String| Error::Stitch {
        pano_id: panoid.to_string(),
        reason,
    };
    if tiles.len() != (cols * rows) as usize {
        return Err(err(format!("{} tiles for a {cols}x{rows} grid", tiles.len())));
    }
    let (tw, th) = tiles[0].dimensions();
    if let Some((i, t)) = tiles.iter().enumerate().find(|(_, t)| t.dimensions() != (tw, th)) {
        return Err(err(format!("tile {i} is {:?}, expected {tw}x{th}", t.dimensions())));
    }
    let (w, h) = (tw * cols, th * rows);
    if w != 2 * h {
        return Err(err(format!("stitched raster {w}x{h} is not 2:1")));
    }
    let mut out = RgbImage::new(w, h);
    for (i, t) in tiles.iter().enumerate() {
        let (x, y) = (i as u32 % cols, i as u32 / cols);
        out.copy_from(t, x * tw, y * th).map_err(|e| err(e.to_string()))?;
    }
    Ok(out)
}

/// Writes a panorama into a fixture tree: its metadata rows and the tile grid at `zoom`.
pub fn write_fixture_panorama(
    root: &Path,
    records: &[PanoMetadataRecord],
    panoid: &str,
    zoom: u32,
    raster: &RgbImage,
) -> Result<()> {
    let (cols, rows) = tile_grid(zoom)?;
    let (w, h) = raster.dimensions();
    if w % cols != 0 || h % rows != 0 {
        return Err(Error::invalid(format!(
            "{w}x{h} raster does not split into {cols}x{rows} tiles"
        )));
    }
    let (tw, th) = (w / cols, h / rows);
    let pano_dir = root.join(panoid);
    let zoom_dir = pano_dir.join(zoom.to_string());
    fs::create_dir_all(&zoom_dir).map_err(|e| Error::io(&zoom_dir, e))?;
    let meta = pano_dir.join("metadata");
    fs::write(&meta, format_metadata(records)).map_err(|e| Error::io(&meta, e))?;
    for y in 0..rows {
        for x in 0..cols {
            let tile = image::imageops::crop_imm(raster, x * tw, y * th, tw, th).to_image();
            let path = tile_path(root, &TileAddress::new(panoid, x, y, zoom)?);
            fs::write(&path, encode_png(&tile)?).map_err(|e| Error::io(&path, e))?;
        }
    }
    Ok(())
}
