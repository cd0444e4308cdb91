//! Equirectangular panoramas, sky/obstruction masks, and sun projection onto them.
//!
//! Pixel convention: column `W/2` faces the capture vehicle's yaw and `x` grows
//! with clockwise azimuth, so a sun 90 deg right of the heading lands at `3W/4`.
//! Rows span the full 180 deg of elevation with `y = 0` at the zenith and the
//! horizon (less tilt) at `H/2`.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::NaiveDate;
use image::{GrayImage, Luma, Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{normalize_degrees, GeoPosition};
use crate::glare::ObstructionOracle;
use crate::solar::{sun_path, SolarPosition};
use crate::time::{DaySpan, Instant, Zone};

/// Vertical angular span of the panorama in degrees.
pub const VERTICAL_SPAN_DEG: f64 = 180.0;
pub const SKY_LABEL: u8 = 0;
pub const OBSTRUCTION_LABEL: u8 = 255;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanoramaFrame {
    pub pano_id: String,
    pub position: GeoPosition,
    pub yaw_deg: f64,
    #[serde(default)]
    pub tilt_deg: f64,
    pub capture_year: i32,
    pub capture_month: u32,
    pub width: u32,
    pub height: u32,
}

impl PanoramaFrame {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        pano_id: impl Into<String>,
        position: GeoPosition,
        yaw_deg: f64,
        tilt_deg: f64,
        capture_year: i32,
        capture_month: u32,
        width: u32,
        height: u32,
    ) -> Result<Self> {
        let frame = Self {
            pano_id: pano_id.into(),
            position,
            yaw_deg: normalize_degrees(yaw_deg),
            tilt_deg,
            capture_year,
            capture_month,
            width,
            height,
        };
        frame.validate()?;
        Ok(frame)
    }

    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width != 2 * self.height {
            return Err(Error::InvalidFrame(format!(
                "{}: {}x{} is not a 2:1 equirectangular raster",
                self.pano_id, self.width, self.height
            )));
        }
        if !(1..=12).contains(&self.capture_month) {
            return Err(Error::InvalidFrame(format!(
                "{}: capture month {}",
                self.pano_id, self.capture_month
            )));
        }
        if !(self.yaw_deg.is_finite() && self.tilt_deg.is_finite()) {
            return Err(Error::InvalidFrame(format!("{}: non-finite yaw/tilt", self.pano_id)));
        }
        Ok(())
    }

    pub fn center(&self) -> (f64, f64) {
        (f64::from(self.width) / 2.0, f64::from(self.height) / 2.0)
    }

    /// Azimuth seen at column `x`; inverse of the horizontal projection.
    pub fn azimuth_at_column(&self, x: f64) -> f64 {
        let w = f64::from(self.width);
        normalize_degrees(self.yaw_deg + (x - w / 2.0) / w * 360.0)
    }

    /// Elevation seen at row `y`; inverse of the vertical projection.
    pub fn elevation_at_row(&self, y: f64) -> f64 {
        let h = f64::from(self.height);
        self.tilt_deg + (h / 2.0 - y) / h * VERTICAL_SPAN_DEG
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelPoint {
    pub x: f64,
    pub y: f64,
}

/// Incidence point of the sun on the panorama, or `None` when it falls outside
/// the vertical field (only possible with a large tilt).
pub fn project_sun(frame: &PanoramaFrame, sun: &SolarPosition) -> Result<Option<PixelPoint>> {
    frame.validate()?;
    let (cx, cy) = frame.center();
    let w = f64::from(frame.width);
    let h = f64::from(frame.height);

    let mut x = ((sun.azimuth_deg - frame.yaw_deg) / 360.0 * w + cx).rem_euclid(w);
    if x >= w {
        x = 0.0;
    }
    let y = cy - (sun.elevation_deg - frame.tilt_deg) / VERTICAL_SPAN_DEG * h;
    if !(0.0..=h).contains(&y) {
        return Ok(None);
    }
    Ok(Some(PixelPoint { x, y }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskSource {
    Model,
    Heuristic,
}

/// Per-pixel class labels for a panorama; labels in `sky_labels` are open sky.
#[derive(Debug, Clone, PartialEq)]
pub struct ObstructionMask {
    width: u32,
    height: u32,
    labels: Vec<u8>,
    sky_labels: BTreeSet<u8>,
    pub pano_id: Option<String>,
    pub source: MaskSource,
}

impl ObstructionMask {
    pub fn new(width: u32, height: u32, labels: Vec<u8>, sky_labels: BTreeSet<u8>, source: MaskSource) -> Result<Self> {
        if height == 0 || width != 2 * height {
            return Err(Error::InvalidMask(format!("{width}x{height} is not 2:1")));
        }
        if labels.len() != width as usize * height as usize {
            return Err(Error::InvalidMask(format!(
                "raster has {} labels, expected {}",
                labels.len(),
                width as usize * height as usize
            )));
        }
        Ok(Self {
            width,
            height,
            labels,
            sky_labels,
            pano_id: None,
            source,
        })
    }

    /// Mask whose label at each pixel comes from `f(column, row)`; sky is [`SKY_LABEL`].
    pub fn from_fn(width: u32, height: u32, source: MaskSource, f: impl Fn(u32, u32) -> u8) -> Result<Self> {
        let mut labels = Vec::with_capacity(width as usize * height as usize);
        for row in 0..height {
            for col in 0..width {
                labels.push(f(col, row));
            }
        }
        Self::new(width, height, labels, BTreeSet::from([SKY_LABEL]), source)
    }

    pub fn uniform(width: u32, height: u32, label: u8, source: MaskSource) -> Result<Self> {
        Self::from_fn(width, height, source, |_, _| label)
    }

    pub fn with_pano_id(mut self, pano_id: impl Into<String>) -> Self {
        self.pano_id = Some(pano_id.into());
        self
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn sky_labels(&self) -> &BTreeSet<u8> {
        &self.sky_labels
    }

    pub fn label(&self, col: u32, row: u32) -> u8 {
        self.labels[row as usize * self.width as usize + col as usize]
    }

    pub fn is_sky(&self, col: u32, row: u32) -> bool {
        self.sky_labels.contains(&self.label(col, row))
    }

    pub fn sky_fraction(&self) -> f64 {
        let sky = self.labels.iter().filter(|l| self.sky_labels.contains(l)).count();
        sky as f64 / self.labels.len() as f64
    }

    /// Nearest-neighbour upscaling by an integer factor.
    pub fn upscale(&self, factor: u32) -> Result<Self> {
        if factor == 0 {
            return Err(Error::invalid("upscale factor must be positive"));
        }
        let mut out = Self::from_fn(self.width * factor, self.height * factor, self.source, |c, r| {
            self.label(c / factor, r / factor)
        })?;
        out.sky_labels = self.sky_labels.clone();
        out.pano_id = self.pano_id.clone();
        Ok(out)
    }

    pub fn to_image(&self) -> GrayImage {
        GrayImage::from_raw(self.width, self.height, self.labels.clone()).expect("raster length checked")
    }

    /// Writes the label raster as an 8-bit grayscale PNG plus a JSON sidecar
    /// (`<stem>.json`) holding the pano id, sky labels and source.
    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_image().save(path)?;
        let meta = MaskSidecar {
            pano_id: self.pano_id.clone(),
            sky_labels: self.sky_labels.iter().copied().collect(),
            source: self.source,
        };
        let sidecar = sidecar_path(path);
        fs::write(&sidecar, serde_json::to_vec_pretty(&meta)?).map_err(|e| Error::io(sidecar, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let img = image::open(path)?.into_luma8();
        let sidecar = sidecar_path(path);
        let meta: MaskSidecar = match fs::read(&sidecar) {
            Ok(bytes) => serde_json::from_slice(&bytes)?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => MaskSidecar {
                pano_id: None,
                sky_labels: vec![SKY_LABEL],
                source: MaskSource::Model,
            },
            Err(e) => return Err(Error::io(sidecar, e)),
        };
        let (w, h) = img.dimensions();
        let mut mask = Self::new(w, h, img.into_raw(), meta.sky_labels.into_iter().collect(), meta.source)?;
        mask.pano_id = meta.pano_id;
        Ok(mask)
    }
}

pub fn sidecar_path(mask_path: &Path) -> PathBuf {
    mask_path.with_extension("json")
}

#[derive(Debug, Serialize, Deserialize)]
struct MaskSidecar {
    pano_id: Option<String>,
    sky_labels: Vec<u8>,
    source: MaskSource,
}

/// Whether the sun is hidden behind a non-sky pixel. A sun at or below the
/// horizon counts as obstructed.
pub fn is_obstructed(frame: &PanoramaFrame, mask: &ObstructionMask, sun: &SolarPosition) -> Result<bool> {
    if mask.height == 0 || mask.width != 2 * mask.height {
        return Err(Error::InvalidMask(format!("{}x{} is not 2:1", mask.width, mask.height)));
    }
    if sun.elevation_deg <= 0.0 {
        return Ok(true);
    }
    let Some(p) = project_sun(frame, sun)? else {
        return Ok(true);
    };
    let (col, row) = mask_cell(frame, mask, p);
    Ok(!mask.is_sky(col, row))
}

fn mask_cell(frame: &PanoramaFrame, mask: &ObstructionMask, p: PixelPoint) -> (u32, u32) {
    let sx = f64::from(mask.width) / f64::from(frame.width);
    let sy = f64::from(mask.height) / f64::from(frame.height);
    let col = ((p.x * sx).floor() as i64).clamp(0, i64::from(mask.width) - 1) as u32;
    let row = ((p.y * sy).floor() as i64).clamp(0, i64::from(mask.height) - 1) as u32;
    (col, row)
}

/// A frame paired with its mask, usable as an obstruction oracle for glare scans.
#[derive(Debug, Clone)]
pub struct PanoramaObstruction {
    frame: PanoramaFrame,
    mask: Arc<ObstructionMask>,
}

impl PanoramaObstruction {
    pub fn new(frame: PanoramaFrame, mask: impl Into<Arc<ObstructionMask>>) -> Result<Self> {
        let mask = mask.into();
        frame.validate()?;
        if mask.height == 0 || mask.width != 2 * mask.height {
            return Err(Error::InvalidMask(format!("{}x{} is not 2:1", mask.width, mask.height)));
        }
        Ok(Self { frame, mask })
    }

    pub fn frame(&self) -> &PanoramaFrame {
        &self.frame
    }

    pub fn mask(&self) -> &ObstructionMask {
        &self.mask
    }

    pub fn obstructed(&self, sun: &SolarPosition) -> bool {
        is_obstructed(&self.frame, &self.mask, sun).expect("validated at construction")
    }
}

impl ObstructionOracle for PanoramaObstruction {
    fn is_obstructed(&self, _t: &Instant, sun: &SolarPosition) -> bool {
        self.obstructed(sun)
    }
}

/// One sun position drawn on an overlay.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlayMarker {
    pub date: NaiveDate,
    pub instant: Instant,
    pub sun: SolarPosition,
    pub point: PixelPoint,
}

#[derive(Debug, Clone)]
pub struct Overlay {
    pub image: RgbImage,
    pub markers: Vec<OverlayMarker>,
}

const PALETTE: [[u8; 3]; 6] = [
    [230, 25, 75],
    [255, 165, 0],
    [60, 180, 75],
    [0, 130, 200],
    [145, 30, 180],
    [240, 50, 230],
];

/// Draws each date's daylight sun path onto the panorama.
///
/// With a mask the background is the binary rendering (white sky, black
/// obstruction); otherwise `base` is copied, or a neutral gray canvas is used.
pub fn sun_path_overlay(
    frame: &PanoramaFrame,
    base: Option<&RgbImage>,
    mask: Option<&ObstructionMask>,
    site: GeoPosition,
    dates: &[NaiveDate],
    zone: &Zone,
    step_s: f64,
) -> Result<Overlay> {
    frame.validate()?;
    if dates.is_empty() {
        return Err(Error::invalid("sun path overlay needs at least one date"));
    }
    let mut image = match (mask, base) {
        (Some(m), _) => {
            let mut img = RgbImage::new(frame.width, frame.height);
            for (c, r, px) in img.enumerate_pixels_mut() {
                let p = PixelPoint {
                    x: f64::from(c) + 0.5,
                    y: f64::from(r) + 0.5,
                };
                let (mc, mr) = mask_cell(frame, m, p);
                *px = if m.is_sky(mc, mr) {
                    Rgb([255, 255, 255])
                } else {
                    Rgb([0, 0, 0])
                };
            }
            img
        }
        (None, Some(b)) => {
            if b.dimensions() != (frame.width, frame.height) {
                return Err(Error::InvalidFrame(format!(
                    "base raster {:?} does not match frame {}x{}",
                    b.dimensions(),
                    frame.width,
                    frame.height
                )));
            }
            b.clone()
        }
        (None, None) => RgbImage::from_pixel(frame.width, frame.height, Rgb([128, 128, 128])),
    };

    let radius = (frame.width / 256).max(2) as i64;
    let mut markers = Vec::new();
    for (i, date) in dates.iter().enumerate() {
        let color = Rgb(PALETTE[i % PALETTE.len()]);
        for (t, sun) in sun_path(site, *date, zone, DaySpan::full_day(), step_s)? {
            if !sun.is_up() {
                continue;
            }
            if let Some(p) = project_sun(frame, &sun)? {
                draw_disc(&mut image, p, radius, color);
                markers.push(OverlayMarker {
                    date: *date,
                    instant: t,
                    sun,
                    point: p,
                });
            }
        }
    }
    Ok(Overlay { image, markers })
}

fn draw_disc(img: &mut RgbImage, p: PixelPoint, radius: i64, color: Rgb<u8>) {
    let (w, h) = (i64::from(img.width()), i64::from(img.height()));
    let (cx, cy) = (p.x.floor() as i64, p.y.floor() as i64);
    for dy in -radius..=radius {
        for dx in -radius..=radius {
            if dx * dx + dy * dy > radius * radius {
                continue;
            }
            let y = cy + dy;
            if !(0..h).contains(&y) {
                continue;
            }
            let x = (cx + dx).rem_euclid(w);
            img.put_pixel(x as u32, y as u32, color);
        }
    }
}

/// Mean channel brightness a pixel needs to be considered sky.
pub const HEURISTIC_MIN_BRIGHTNESS: f64 = 110.0;
/// Margin by which blue must exceed red to be considered sky.
pub const HEURISTIC_BLUE_MARGIN: i32 = 20;
/// Near-white pixels (overcast sky) above this brightness are also sky.
pub const HEURISTIC_WHITE_BRIGHTNESS: f64 = 235.0;

/// Crude color-threshold sky classifier for fixtures and demos only; not a
/// substitute for a trained segmentation model.
pub fn heuristic_sky_mask(image: &RgbImage) -> Result<ObstructionMask> {
    let (w, h) = image.dimensions();
    if h == 0 || w != 2 * h {
        return Err(Error::invalid(format!("heuristic mask input {w}x{h} is not 2:1")));
    }
    let labels = image
        .pixels()
        .map(|Rgb([r, g, b])| {
            let (r, g, b) = (i32::from(*r), i32::from(*g), i32::from(*b));
            let brightness = f64::from(r + g + b) / 3.0;
            let blue = brightness >= HEURISTIC_MIN_BRIGHTNESS && b >= r + HEURISTIC_BLUE_MARGIN && b >= g;
            if blue || brightness >= HEURISTIC_WHITE_BRIGHTNESS {
                SKY_LABEL
            } else {
                OBSTRUCTION_LABEL
            }
        })
        .collect();
    ObstructionMask::new(w, h, labels, BTreeSet::from([SKY_LABEL]), MaskSource::Heuristic)
}

/// Grayscale rendering helper used by the CLI: sky white, obstruction black.
pub fn render_mask(mask: &ObstructionMask) -> GrayImage {
    let mut img = GrayImage::new(mask.width, mask.height);
    for (c, r, px) in img.enumerate_pixels_mut() {
        *px = Luma([if mask.is_sky(c, r) { 255 } else { 0 }]);
    }
    img
}
