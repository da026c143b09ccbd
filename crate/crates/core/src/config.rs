//! Deployment configuration (TOML).
//!
//! ```toml
//! [archive]
//! root = "/srv/archive"
//!
//! [data]
//! dir = "/var/lib/ctf-vault"
//!
//! [runtime]
//! driver = "oci"          # or "local"
//! base_image = "ghcr.io/example/ctf-base:latest"
//! binary = "docker"
//! quota = 1
//!
//! [server]
//! listen = "127.0.0.1:8080"
//!
//! [auth.tokens]
//! "s3cret-token" = "alice"
//! ```

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;

use crate::sandbox::{LocalDriver, OciDriver, RuntimeDriver, DEFAULT_QUOTA};
use crate::store::SOLVE_LOG_FILE;

pub const DEFAULT_BASE_IMAGE: &str = "ghcr.io/ctf-vault/base:latest";
pub const LOCAL_DRIVER_LEDGER: &str = "local-driver.log";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Parse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DriverKind {
    #[default]
    Oci,
    Local,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub archive: ArchiveConfig,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub runtime: RuntimeConfig,
    #[serde(default)]
    pub server: ServerConfig,
    #[serde(default)]
    pub auth: AuthConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchiveConfig {
    pub root: PathBuf,
}

impl Default for ArchiveConfig {
    fn default() -> Self {
        ArchiveConfig {
            root: PathBuf::from("archive"),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub dir: PathBuf,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            dir: PathBuf::from("data"),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RuntimeConfig {
    pub driver: DriverKind,
    pub base_image: String,
    pub binary: PathBuf,
    pub quota: usize,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        RuntimeConfig {
            driver: DriverKind::default(),
            base_image: DEFAULT_BASE_IMAGE.to_string(),
            binary: PathBuf::from("docker"),
            quota: DEFAULT_QUOTA,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServerConfig {
    pub listen: SocketAddr,
    /// Static files for the browser UI, served under `/` when set.
    pub ui_dir: Option<PathBuf>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            listen: SocketAddr::from(([127, 0, 0, 1], 8080)),
            ui_dir: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct AuthConfig {
    /// Bearer token to user id.
    #[serde(default)]
    pub tokens: BTreeMap<String, String>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Config::parse(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn parse(text: &str) -> Result<Config, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn solve_log_path(&self) -> PathBuf {
        self.data.dir.join(SOLVE_LOG_FILE)
    }

    pub fn driver(&self) -> Arc<dyn RuntimeDriver> {
        match self.runtime.driver {
            DriverKind::Oci => Arc::new(OciDriver::new(&self.runtime.binary)),
            DriverKind::Local => Arc::new(LocalDriver::with_ledger(self.data.dir.join(LOCAL_DRIVER_LEDGER))),
        }
    }
}
