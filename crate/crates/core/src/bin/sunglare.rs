//! sunglare CLI - sample roads, acquire panoramas, build masks and glare maps

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant as Clock;

use chrono::NaiveDate;
use clap::{Parser, Subcommand, ValueEnum};
use image::ImageFormat;
use log::{info, warn};
use serde_json::json;

use sunglare::acquisition::{
    format_metadata, select_record, Acquirer, FixtureTransport, PanoMetadataRecord, PanoramaCache, Transport,
};
use sunglare::config::Config;
use sunglare::error::{Error, Result};
use sunglare::fixtures::write_fixture_city;
use sunglare::geo::GeoPosition;
use sunglare::glare::{GlareCriteria, GlareKind};
use sunglare::mapper::{
    build_glare_table, evaluate_sites, format_glare_table, load_metadata_file, map_obstructed_glare, validate_boundary,
    windows_csv, DirectoryMaskStore, GlareMapDocument, MapSettings, RunManifest,
};
use sunglare::panorama::{heuristic_sky_mask, sun_path_overlay, ObstructionMask, PanoramaObstruction};
use sunglare::sampler::{parse_road_network, sample_network, sites_from_geojson, sites_to_geojson, SampleSite};
use sunglare::time::Zone;

// ─── CLI structure ──────────────────────────────────────────────────────

#[derive(Parser)]
#[command(
    name = "sunglare",
    version,
    about = "Predict sun glare for drivers from solar geometry and street panoramas"
)]
struct Cli {
    /// TOML configuration file; flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Time zone: UTC, +HH:MM or an IANA name such as America/New_York
    #[arg(long, global = true)]
    tz: Option<String>,

    /// Sampling step for glare scans, seconds
    #[arg(long, global = true)]
    step: Option<f64>,

    /// Glare threshold on both relative angles, degrees
    #[arg(long, global = true)]
    threshold: Option<f64>,

    /// Minimum sun elevation counted as glare, degrees
    #[arg(long, global = true)]
    min_elevation: Option<f64>,

    /// Verbose logging
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Commands,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Sunrise,
    Sunset,
}

impl From<KindArg> for GlareKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Sunrise => GlareKind::Sunrise,
            KindArg::Sunset => GlareKind::Sunset,
        }
    }
}

#[derive(Subcommand)]
enum Commands {
    /// Sample a GeoJSON road network into evenly spaced sites
    Sample {
        /// Road network GeoJSON (LineString / MultiLineString features)
        #[arg(long)]
        roads: PathBuf,
        /// Spacing between sites along each road, meters
        #[arg(long)]
        spacing: Option<f64>,
        /// Output GeoJSON of sample sites
        #[arg(long)]
        out: PathBuf,
    },
    /// Fetch metadata and stitched panoramas for sample sites
    Fetch {
        /// Sample sites GeoJSON from `sample`
        #[arg(long)]
        sites: PathBuf,
        /// Serve requests from a local fixture tree instead of the network
        #[arg(long, conflicts_with = "live")]
        fixture: Option<PathBuf>,
        /// Use the configured HTTP endpoints (requires the `live` feature)
        #[arg(long)]
        live: bool,
        /// Tile zoom level for stitched panoramas
        #[arg(long)]
        zoom: Option<u32>,
        /// On-disk cache for metadata and tiles
        #[arg(long)]
        cache: Option<PathBuf>,
        /// Output directory: metadata.tsv and panoramas/{panoid}.png
        #[arg(long)]
        out: PathBuf,
    },
    /// Build color-threshold sky masks for a directory of panoramas
    Mask {
        /// Directory of stitched panoramas ({panoid}.png)
        #[arg(long)]
        panoramas: PathBuf,
        /// Output directory for masks and their sidecars
        #[arg(long)]
        out: PathBuf,
    },
    /// Hourly orientation ranges prone to glare at one location
    GlareTable {
        /// Latitude, degrees north
        #[arg(long, allow_hyphen_values = true)]
        lat: f64,
        /// Longitude, degrees east
        #[arg(long, allow_hyphen_values = true)]
        lon: f64,
        /// Local date (YYYY-MM-DD); repeatable
        #[arg(long = "date", required = true)]
        dates: Vec<NaiveDate>,
        /// Emit JSON rows instead of a tab-separated table
        #[arg(long)]
        json: bool,
    },
    /// Glare map for every sample site on one date
    Map {
        /// Sample sites GeoJSON from `sample`
        #[arg(long)]
        sites: PathBuf,
        /// Local date (YYYY-MM-DD)
        #[arg(long)]
        date: NaiveDate,
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Directory of masks named {panoid}.png; omit for geometry only
        #[arg(long, requires = "metadata")]
        masks: Option<PathBuf>,
        /// Panorama metadata (TSV) matching the masks
        #[arg(long)]
        metadata: Option<PathBuf>,
        /// Output GeoJSON glare map
        #[arg(long)]
        out: PathBuf,
        /// Per-window CSV output
        #[arg(long)]
        windows: Option<PathBuf>,
        /// Run summary JSON (counts, requests, timing)
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Draw sun paths onto a panorama or its mask
    Overlay {
        /// Panorama metadata (TSV)
        #[arg(long)]
        metadata: PathBuf,
        /// Panorama to draw on
        #[arg(long)]
        panoid: String,
        /// Panorama image; defaults to a neutral gray canvas
        #[arg(long)]
        panorama: Option<PathBuf>,
        /// Draw on the binary rendering of this mask instead of the panorama
        #[arg(long)]
        mask: Option<PathBuf>,
        /// Local date (YYYY-MM-DD); repeatable
        #[arg(long = "date", required = true)]
        dates: Vec<NaiveDate>,
        /// Output PNG
        #[arg(long)]
        out: PathBuf,
    },
    /// Report instants where the sun crosses between sky and obstruction
    Validate {
        /// Panorama metadata (TSV)
        #[arg(long)]
        metadata: PathBuf,
        /// Panorama the mask belongs to
        #[arg(long)]
        panoid: String,
        /// Obstruction mask PNG
        #[arg(long)]
        mask: PathBuf,
        /// Local date (YYYY-MM-DD)
        #[arg(long)]
        date: NaiveDate,
    },
    /// Write a deterministic synthetic city (roads plus panorama fixture tree)
    FixtureCity {
        /// Output directory
        #[arg(long)]
        out: PathBuf,
        /// Random seed for street layout and skylines
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

// ─── Settings ───────────────────────────────────────────────────────────

struct Settings {
    config: Config,
    zone: Zone,
    step_s: f64,
    criteria: GlareCriteria,
}

impl Settings {
    fn resolve(cli: &Cli) -> Result<Self> {
        let config = match &cli.config {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        };
        let zone = match &cli.tz {
            Some(z) => z.parse()?,
            None => config.zone()?,
        };
        let mut criteria = config.criteria()?;
        if let Some(t) = cli.threshold {
            criteria.threshold_deg = t;
        }
        if let Some(m) = cli.min_elevation {
            criteria.min_elevation_deg = m;
        }
        criteria.validate()?;
        let step_s = cli.step.unwrap_or_else(|| config.step_s());
        if !(step_s.is_finite() && step_s > 0.0) {
            return Err(Error::invalid(format!("step must be positive, got {step_s}")));
        }
        Ok(Self {
            config,
            zone,
            step_s,
            criteria,
        })
    }

    fn map_settings(&self) -> MapSettings {
        MapSettings {
            zone: self.zone,
            step_s: self.step_s,
            criteria: self.criteria,
        }
    }
}

// ─── Commands ───────────────────────────────────────────────────────────

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn load_sites(path: &Path) -> Result<Vec<SampleSite>> {
    sites_from_geojson(&read_text(path)?)
}

fn find_record<'a>(records: &'a [PanoMetadataRecord], panoid: &str) -> Result<&'a PanoMetadataRecord> {
    records
        .iter()
        .find(|r| r.panoid == panoid)
        .ok_or_else(|| Error::invalid(format!("panorama {panoid} is not in the metadata file")))
}

fn run(cli: Cli) -> Result<()> {
    let s = Settings::resolve(&cli)?;
    match cli.command {
        Commands::Sample { roads, spacing, out } => {
            let segments = parse_road_network(&read_text(&roads)?)?;
            let spacing = spacing
                .or(s.config.spacing_m)
                .unwrap_or(sunglare::sampler::DEFAULT_SPACING_M);
            let sites = sample_network(&segments, spacing)?;
            write_text(&out, &sites_to_geojson(&sites)?)?;
            info!("{} segments -> {} sites", segments.len(), sites.len());
            println!("{}", json!({ "segments": segments.len(), "sites": sites.len() }));
        }
        Commands::Fetch {
            sites,
            fixture,
            live,
            zoom,
            cache,
            out,
        } => {
            let sites = load_sites(&sites)?;
            let acq = &s.config.acquisition;
            let zoom = zoom.or(acq.zoom).unwrap_or(1);
            let cache = cache.or_else(|| acq.cache_dir.clone());
            match (fixture, live) {
                (Some(root), _) => fetch(&s, FixtureTransport::new(root)?, &sites, zoom, cache, &out)?,
                (None, true) => fetch_live(&s, &sites, zoom, cache, &out)?,
                (None, false) => return Err(Error::invalid("fetch needs --fixture DIR or --live")),
            }
        }
        Commands::Mask { panoramas, out } => {
            let mut inputs: Vec<PathBuf> = fs::read_dir(&panoramas)
                .map_err(|e| Error::io(&panoramas, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| {
                    p.extension()
                        .is_some_and(|x| x.eq_ignore_ascii_case("png") || x.eq_ignore_ascii_case("jpg"))
                })
                .collect();
            inputs.sort();
            fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            for p in &inputs {
                let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
                let img = image::open(p)?.into_rgb8();
                let mask = heuristic_sky_mask(&img)?.with_pano_id(stem.clone());
                mask.save(&out.join(format!("{stem}.png")))?;
            }
            println!("{}", json!({ "masks": inputs.len(), "source": "heuristic" }));
        }
        Commands::GlareTable { lat, lon, dates, json } => {
            let site = GeoPosition::new(lon, lat)?;
            let rows = build_glare_table(site, &dates, &s.zone, &s.criteria)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&rows)?);
            } else {
                print!("{}", format_glare_table(&rows));
            }
        }
        Commands::Map {
            sites: sites_path,
            date,
            kind,
            masks,
            metadata,
            out,
            windows,
            manifest,
        } => {
            let started = Clock::now();
            let sites = load_sites(&sites_path)?;
            let settings = s.map_settings();
            let mut run = RunManifest {
                command: "map".into(),
                sites: sites.len(),
                ..RunManifest::default()
            };
            let (doc, results) = match (masks, metadata) {
                (Some(dir), Some(meta)) => {
                    let mut store = DirectoryMaskStore::new(dir, load_metadata_file(&meta)?);
                    store.radius_m = s.config.acquisition.match_radius_m();
                    store.policy = s.config.acquisition.policy()?;
                    if store.record_count() == 0 {
                        run.warnings
                            .push("no metadata record has a mask; map is geometry only".into());
                    }
                    map_obstructed_glare(&sites, date, kind.into(), &settings, &store)?
                }
                _ => {
                    if sites.is_empty() {
                        return Err(Error::invalid("no sample sites to map"));
                    }
                    let results = evaluate_sites(&sites, date, &settings, None)?;
                    (GlareMapDocument::build(&sites, &results, date, kind.into()), results)
                }
            };
            run.tally(&results);
            if run.without_mask > 0 && run.with_mask > 0 {
                run.warnings.push(format!(
                    "{} evaluations had no panorama and used geometry only",
                    run.without_mask
                ));
            }
            write_text(&out, &doc.to_geojson()?)?;
            if let Some(w) = windows {
                write_text(&w, &windows_csv(&results)?)?;
            }
            run.elapsed_s = started.elapsed().as_secs_f64();
            for w in &run.warnings {
                warn!("{w}");
            }
            if let Some(m) = manifest {
                write_text(&m, &serde_json::to_string_pretty(&run)?)?;
            }
            println!(
                "{}",
                json!({ "features": doc.features.len(), "glare": doc.glare_count(), "with_mask": run.with_mask })
            );
        }
        Commands::Overlay {
            metadata,
            panoid,
            panorama,
            mask,
            dates,
            out,
        } => {
            let records = load_metadata_file(&metadata)?;
            let rec = find_record(&records, &panoid)?;
            let base = panorama.map(|p| image::open(&p).map(|i| i.into_rgb8())).transpose()?;
            let mask = mask.map(|p| ObstructionMask::load(&p)).transpose()?;
            let (w, h) = match (&base, &mask) {
                (Some(b), _) => b.dimensions(),
                (None, Some(m)) => (m.width(), m.height()),
                (None, None) => (2048, 1024),
            };
            let frame = rec.to_frame(w, h)?;
            let overlay = sun_path_overlay(
                &frame,
                base.as_ref(),
                mask.as_ref(),
                rec.position()?,
                &dates,
                &s.zone,
                s.step_s,
            )?;
            overlay.image.save_with_format(&out, ImageFormat::Png)?;
            println!("{}", json!({ "markers": overlay.markers.len() }));
        }
        Commands::Validate {
            metadata,
            panoid,
            mask,
            date,
        } => {
            let records = load_metadata_file(&metadata)?;
            let rec = find_record(&records, &panoid)?;
            let mask = ObstructionMask::load(&mask)?;
            let frame = rec.to_frame(mask.width(), mask.height())?;
            let site = rec.position()?;
            let obstruction = PanoramaObstruction::new(frame, mask)?;
            let step = s.step_s.min(sunglare::mapper::MAX_VALIDATION_STEP_S);
            let transitions = validate_boundary(&obstruction, site, date, &s.zone, step)?;
            println!("{}", serde_json::to_string_pretty(&transitions)?);
        }
        Commands::FixtureCity { out, seed } => {
            let city = write_fixture_city(&out, seed)?;
            let meta = out.join("metadata.tsv");
            write_text(&meta, &format_metadata(&city.records))?;
            println!(
                "{}",
                json!({ "sites": city.sites.len(), "panoramas": city.records.len() })
            );
        }
    }
    Ok(())
}

fn fetch<T: Transport>(
    s: &Settings,
    transport: T,
    sites: &[SampleSite],
    zoom: u32,
    cache: Option<PathBuf>,
    out: &Path,
) -> Result<()> {
    let acq = &s.config.acquisition;
    let mut acquirer = Acquirer::with_settings(transport, acq.rate_limit_per_s(), acq.retry());
    acquirer.match_radius_m = acq.match_radius_m();
    if let Some(dir) = cache {
        acquirer = acquirer.with_cache(PanoramaCache::open(dir)?);
    }
    let policy = acq.policy()?;
    let started = Clock::now();
    let mut run = RunManifest {
        command: "fetch".into(),
        sites: sites.len(),
        ..RunManifest::default()
    };

    let mut all: BTreeMap<String, PanoMetadataRecord> = BTreeMap::new();
    let mut chosen: BTreeMap<String, PanoMetadataRecord> = BTreeMap::new();
    for site in sites {
        let records = match acquirer.fetch_metadata(site) {
            Ok(r) => r,
            Err(e) => {
                run.warnings.push(format!("{}: metadata: {e}", site.site_id));
                continue;
            }
        };
        if let Some(rec) = select_record(&records, site.position, acquirer.match_radius_m, policy) {
            chosen.insert(rec.panoid.clone(), rec.clone());
        } else {
            run.warnings.push(format!(
                "{}: no panorama within {} m",
                site.site_id, acquirer.match_radius_m
            ));
        }
        for r in records {
            all.insert(r.panoid.clone(), r);
        }
    }

    let pano_dir = out.join("panoramas");
    fs::create_dir_all(&pano_dir).map_err(|e| Error::io(&pano_dir, e))?;
    let mut fetched = Vec::new();
    for rec in chosen.values() {
        match acquirer.fetch_panorama(&rec.panoid, zoom) {
            Ok(img) => {
                let p = pano_dir.join(format!("{}.png", rec.panoid));
                img.save_with_format(&p, ImageFormat::Png)?;
                fetched.push(rec.clone());
            }
            Err(e) => run.warnings.push(format!("{}: {e}", rec.panoid)),
        }
    }
    let all: Vec<_> = all.into_values().collect();
    write_text(&out.join("metadata.tsv"), &format_metadata(&all))?;

    let stats = acquirer.stats();
    run.requests = stats.requests;
    run.retries = stats.retries;
    run.elapsed_s = started.elapsed().as_secs_f64();
    for w in &run.warnings {
        warn!("{w}");
    }
    write_text(&out.join("fetch_manifest.json"), &serde_json::to_string_pretty(&run)?)?;
    println!(
        "{}",
        json!({ "records": all.len(), "panoramas": fetched.len(), "requests": stats.requests, "warnings": run.warnings.len() })
    );
    Ok(())
}

#[cfg(feature = "live")]
fn fetch_live(s: &Settings, sites: &[SampleSite], zoom: u32, cache: Option<PathBuf>, out: &Path) -> Result<()> {
    use sunglare::acquisition::{EndpointTemplates, HttpTransport};
    let acq = &s.config.acquisition;
    let (Some(metadata_url), Some(tile_url)) = (acq.metadata_url.clone(), acq.tile_url.clone()) else {
        return Err(Error::Config(
            "live fetch needs acquisition.metadata_url and acquisition.tile_url".into(),
        ));
    };
    let transport = HttpTransport::new(EndpointTemplates {
        metadata_url,
        tile_url,
        api_key: acq.api_key.clone(),
    });
    fetch(s, transport, sites, zoom, cache, out)
}

#[cfg(not(feature = "live"))]
fn fetch_live(_: &Settings, _: &[SampleSite], _: u32, _: Option<PathBuf>, _: &Path) -> Result<()> {
    Err(Error::Config(
        "this build has no network transport; rebuild with --features live".into(),
    ))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "debug" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!(
                "{}",
                json!({ "error": { "category": e.category(), "message": e.to_string() } })
            );
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
