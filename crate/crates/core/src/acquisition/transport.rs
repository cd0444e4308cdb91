use std::fs;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::geo::{distance_m, GeoPosition};

use super::{parse_metadata, PanoMetadataRecord, TileAddress};

/// What the acquisition layer asks of a transport.
#[derive(Debug, Clone, PartialEq)]
pub enum Request {
    /// Historical panorama records near a position.
    Metadata {
        position: GeoPosition,
        radius_m: f64,
    },
    Tile(TileAddress),
}

impl Request {
    pub fn describe(&self) -> String {
        match self {
            Request::Metadata { position, radius_m } => {
                format!("metadata lat={} lon={} r={radius_m}", position.lat(), position.lon())
            }
            Request::Tile(t) => format!("tile {} x={} y={} zoom={}", t.panoid, t.x, t.y, t.zoom),
        }
    }
}

/// Request oracle: either a live endpoint or a local fixture tree.
pub trait Transport: Send + Sync {
    fn fetch(&self, request: &Request) -> Result<Vec<u8>>;

    /// Local transports bypass the network rate limiter.
    fn is_local(&self) -> bool {
        false
    }
}

/// Serves requests from a directory laid out as
/// `{panoid}/metadata` (tab-separated `panoid lon lat year month yaw`) and
/// `{panoid}/{zoom}/{x}_{y}.png` tiles. The metadata index is read once, on
/// the first metadata request.
#[derive(Debug, Clone)]
pub struct FixtureTransport {
    root: PathBuf,
    index: OnceLock<Vec<PanoMetadataRecord>>,
}

impl FixtureTransport {
    pub fn new(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        if !root.is_dir() {
            return Err(Error::Config(format!(
                "fixture directory {} does not exist",
                root.display()
            )));
        }
        Ok(Self {
            root,
            index: OnceLock::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn tile_path(&self, t: &TileAddress) -> PathBuf {
        tile_path(&self.root, t)
    }

    fn all_records(&self) -> Result<&[PanoMetadataRecord]> {
        if let Some(index) = self.index.get() {
            return Ok(index);
        }
        let records = self.read_index()?;
        Ok(self.index.get_or_init(|| records))
    }

    fn read_index(&self) -> Result<Vec<PanoMetadataRecord>> {
        let mut dirs: Vec<PathBuf> = fs::read_dir(&self.root)
            .map_err(|e| Error::io(&self.root, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join("metadata").is_file())
            .collect();
        dirs.sort();
        let mut out = Vec::new();
        for d in dirs {
            let path = d.join("metadata");
            let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            out.extend(parse_metadata(&bytes, &path.display().to_string())?);
        }
        Ok(out)
    }
}

pub fn tile_path(root: &Path, t: &TileAddress) -> PathBuf {
    root.join(&t.panoid)
        .join(t.zoom.to_string())
        .join(format!("{}_{}.png", t.x, t.y))
}

impl Transport for FixtureTransport {
    fn fetch(&self, request: &Request) -> Result<Vec<u8>> {
        match request {
            Request::Metadata { position, radius_m } => {
                let records: Vec<_> = self
                    .all_records()?
                    .iter()
                    .filter(|r| {
                        r.position()
                            .map(|p| distance_m(p, *position) <= *radius_m)
                            .unwrap_or(false)
                    })
                    .cloned()
                    .collect();
                Ok(super::format_metadata(&records).into_bytes())
            }
            Request::Tile(t) => {
                let path = self.tile_path(t);
                fs::read(&path).map_err(|e| Error::Transport {
                    url: path.display().to_string(),
                    reason: e.to_string(),
                    retriable: false,
                })
            }
        }
    }

    fn is_local(&self) -> bool {
        true
    }
}

/// URL templates for a live endpoint. Placeholders: `{lat}`, `{lon}`,
/// `{radius}`, `{panoid}`, `{x}`, `{y}`, `{zoom}`, `{key}`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EndpointTemplates {
    pub metadata_url: String,
    pub tile_url: String,
    pub api_key: Option<String>,
}

impl EndpointTemplates {
    pub fn url_for(&self, request: &Request) -> String {
        let key = self.api_key.as_deref().unwrap_or("");
        match request {
            Request::Metadata { position, radius_m } => self
                .metadata_url
                .replace("{lat}", &position.lat().to_string())
                .replace("{lon}", &position.lon().to_string())
                .replace("{radius}", &radius_m.to_string())
                .replace("{key}", key),
            Request::Tile(t) => self
                .tile_url
                .replace("{panoid}", &t.panoid)
                .replace("{x}", &t.x.to_string())
                .replace("{y}", &t.y.to_string())
                .replace("{zoom}", &t.zoom.to_string())
                .replace("{key}", key),
        }
    }
}

#[cfg(feature = "live")]
pub use live::HttpTransport;

#[cfg(feature = "live")]
mod live {
    use std::io::Read;
    use std::time::Duration;

    use super::{EndpointTemplates, Request, Transport};
    use crate::error::{Error, Result};

    /// Blocking HTTP transport over configured URL templates.
    pub struct HttpTransport {
        templates: EndpointTemplates,
        agent: ureq::Agent,
    }

    impl HttpTransport {
        pub fn new(templates: EndpointTemplates) -> Self {
            let agent = ureq::AgentBuilder::new().timeout(Duration::from_secs(30)).build();
            Self { templates, agent }
        }
    }

    impl Transport for HttpTransport {
        fn fetch(&self, request: &Request) -> Result<Vec<u8>> {
            let url = self.templates.url_for(request);
            match self.agent.get(&url).call() {
                Ok(resp) => {
                    let mut buf = Vec::new();
                    resp.into_reader().read_to_end(&mut buf).map_err(|e| Error::Transport {
                        url: url.clone(),
                        reason: e.to_string(),
                        retriable: true,
                    })?;
                    Ok(buf)
                }
                Err(ureq::Error::Status(code, _)) => Err(Error::Transport {
                    url,
                    reason: format!("HTTP {code}"),
                    retriable: code == 429 || code >= 500,
                }),
                Err(e) => Err(Error::Transport {
                    url,
                    reason: e.to_string(),
                    retriable: true,
                }),
            }
        }
    }
}
