//! On-disk challenge archive: ingest, validation, indexing and queries.
//!
//! The archive layout is
//!
//! ```text
//! <root>/<event>-<year>/<challenge-slug>/challenge.manifest
//! <root>/<event>-<year>/<challenge-slug>/REHOST.md
//! <root>/<event>-<year>/<challenge-slug>/dist/...
//! <root>/<event>-<year>/<challenge-slug>/src/...
//! ```

mod category;
mod manifest;
mod stats;
mod validate;

use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};

pub use category::{Category, UnknownCategory, ALIASES};
pub use manifest::{
    is_hex_digest, is_slug, normalize_rel_path, parse_manifest, ChallengeManifest, EndpointKind,
    EndpointSpec, FlagSpec, ManifestError, DEFAULT_REHOST_DOC, MANIFEST_FILE,
};
pub use stats::{category_stats, CategoryRow, CategoryStats, Totals};
pub use validate::{
    validate_challenge, Finding, Severity, ValidationReport, ARTIFACT_MISSING, EMPTY_DESCRIPTION,
    NO_ENDPOINT_NO_ARTIFACT, REHOST_MISSING,
};

pub const NO_MANIFEST: &str = "NO_MANIFEST";
pub const MANIFEST_INVALID: &str = "MANIFEST_INVALID";

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("duplicate challenge id `{id}` in {} and {}", first.display(), second.display())]
    DuplicateId {
        id: String,
        first: PathBuf,
        second: PathBuf,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegistryEntry {
    pub manifest: ChallengeManifest,
    pub dir: PathBuf,
}

/// Immutable index of an ingested archive. Iteration is in id order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Registry {
    root: PathBuf,
    entries: BTreeMap<String, RegistryEntry>,
    by_event: BTreeMap<String, Vec<String>>,
}

/// A finding raised while walking the archive, tied to the directory that
/// produced it rather than to a parsed challenge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestFinding {
    /// `<event-dir>/<challenge-dir>` relative to the archive root.
    pub location: String,
    pub finding: Finding,
}

#[derive(Debug, Clone, Default)]
pub struct Ingest {
    pub registry: Registry,
    pub findings: Vec<IngestFinding>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Filter {
    pub event: Option<String>,
    pub year: Option<u16>,
    pub category: Option<Category>,
}

impl Filter {
    pub fn matches(&self, m: &ChallengeManifest) -> bool {
        self.event.as_ref().is_none_or(|e| *e == m.event)
            && self.year.is_none_or(|y| y == m.year)
            && self.category.is_none_or(|c| c == m.category)
    }
}

impl Registry {
    /// Builds a registry from already-parsed manifests. Input order does not
    /// matter; the first duplicate id (in directory order) is reported.
    pub fn from_entries(
        root: impl Into<PathBuf>,
        entries: impl IntoIterator<Item = RegistryEntry>,
    ) -> Result<Self, RegistryError> {
        let mut entries: Vec<RegistryEntry> = entries.into_iter().collect();
        entries.sort_by(|a, b| a.dir.cmp(&b.dir));
        let mut reg = Registry {
            root: root.into(),
            ..Default::default()
        };
        for entry in entries {
            if let Some(existing) = reg.entries.get(&entry.manifest.id) {
                return Err(RegistryError::DuplicateId {
                    id: entry.manifest.id.clone(),
                    first: existing.dir.clone(),
                    second: entry.dir,
                });
            }
            reg.by_event
                .entry(entry.manifest.event.clone())
                .or_default()
                .push(entry.manifest.id.clone());
            reg.entries.insert(entry.manifest.id.clone(), entry);
        }
        for ids in reg.by_event.values_mut() {
            ids.sort();
        }
        Ok(reg)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&RegistryEntry> {
        self.entries.get(id)
    }

    pub fn manifest(&self, id: &str) -> Option<&ChallengeManifest> {
        self.entries.get(id).map(|e| &e.manifest)
    }

    pub fn entries(&self) -> impl Iterator<Item = &RegistryEntry> {
        self.entries.values()
    }

    pub fn manifests(&self) -> impl Iterator<Item = &ChallengeManifest> {
        self.entries.values().map(|e| &e.manifest)
    }

    /// Event name to sorted challenge ids.
    pub fn events(&self) -> &BTreeMap<String, Vec<String>> {
        &self.by_event
    }

    /// Manifests matching every set filter field, sorted by (event, year, id).
    pub fn query(&self, filter: &Filter) -> Vec<&ChallengeManifest> {
        let mut out: Vec<_> = self.manifests().filter(|m| filter.matches(m)).collect();
        out.sort_by(|a, b| (&a.event, a.year, &a.id).cmp(&(&b.event, b.year, &b.id)));
        out
    }

    /// Canonical dump used to compare registries byte for byte. Directory
    /// paths are written relative to the root with `/` separators.
    pub fn canonical_dump(&self) -> String {
        let mut out = String::new();
        for entry in self.entries.values() {
            out.push_str("--- ");
            out.push_str(&location(&self.root, &entry.dir));
            out.push('\n');
            out.push_str(&entry.manifest.to_canonical());
        }
        out
    }
}

fn sorted_subdirs(dir: &Path) -> Result<Vec<PathBuf>, RegistryError> {
    let io_err = |source| RegistryError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io_err)? {
        let entry = entry.map_err(io_err)?;
        if entry.file_type().map_err(io_err)?.is_dir() {
            out.push(entry.path());
        }
    }
    out.sort();
    Ok(out)
}

fn location(root: &Path, dir: &Path) -> String {
    let rel = dir.strip_prefix(root).unwrap_or(dir);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

/// Walks `<root>/<event-dir>/<challenge-dir>/challenge.manifest`.
///
/// Challenge directories without a manifest, and manifests that fail to
/// parse, are reported as findings and skipped. Two manifests sharing an id
/// abort the ingest.
pub fn ingest_archive(root: &Path) -> Result<Ingest, RegistryError> {
    let mut entries = Vec::new();
    let mut findings = Vec::new();

    for event_dir in sorted_subdirs(root)? {
        for chal_dir in sorted_subdirs(&event_dir)? {
            let manifest_path = chal_dir.join(MANIFEST_FILE);
            let text = match std::fs::read_to_string(&manifest_path) {
                Ok(t) => t,
                Err(e) if e.kind() == io::ErrorKind::NotFound => {
                    findings.push(IngestFinding {
                        location: location(root, &chal_dir),
                        finding: Finding::warning(
                            NO_MANIFEST,
                            format!("no {MANIFEST_FILE}; directory skipped"),
                            None,
                        ),
                    });
                    continue;
                }
                Err(source) => {
                    return Err(RegistryError::Io {
                        path: manifest_path,
                        source,
                    })
                }
            };
            match parse_manifest(&text) {
                Ok(manifest) => entries.push(RegistryEntry {
                    manifest,
                    dir: chal_dir,
                }),
                Err(e) => findings.push(IngestFinding {
                    location: location(root, &chal_dir),
                    finding: Finding::error(MANIFEST_INVALID, e.to_string(), Some(MANIFEST_FILE.into())),
                }),
            }
        }
    }

    Ok(Ingest {
        registry: Registry::from_entries(root, entries)?,
        findings,
    })
}
