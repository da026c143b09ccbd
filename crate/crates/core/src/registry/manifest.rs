//! The `challenge.manifest` document: a flat, line-oriented `key: value`
//! format with a fixed key set.
//!
//! ```text
//! # comment
//! id: baby-rsa
//! event: ExampleCTF
//! year: 2021
//! category: crypto
//! points: 100
//! title: Baby RSA
//! description: Small exponent, big problems.
//! artifact: dist/output.txt
//! endpoint: tcp/1337
//! flag_digest: <64 lowercase hex>
//! platform_flag: pwn.college{...}
//! ```
//!
//! `artifact` and `endpoint` may repeat; every other key may appear at most
//! once. Values are taken verbatim after the first `": "`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::category::Category;

pub const MANIFEST_FILE: &str = "challenge.manifest";
pub const DEFAULT_REHOST_DOC: &str = "REHOST.md";

const KEYS: &[&str] = &[
    "id",
    "event",
    "year",
    "category",
    "points",
    "title",
    "description",
    "artifact",
    "endpoint",
    "flag",
    "flag_digest",
    "platform_flag",
    "rehost_doc",
];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ManifestError {
    #[error("line {line}: {reason}")]
    MalformedDocument { line: usize, reason: String },
    #[error("line {line}: unknown category `{value}`")]
    UnknownCategory { line: usize, value: String },
    #[error("bad slug `{0}`: expected [a-z0-9][a-z0-9-]*, 1-64 characters")]
    BadSlug(String),
    #[error("line {line}: flag_digest must be 64 lowercase hex characters")]
    BadDigest { line: usize },
    #[error("missing required field `{0}`")]
    MissingField(&'static str),
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: invalid {key}: {reason}")]
    InvalidValue {
        line: usize,
        key: &'static str,
        reason: String,
    },
    #[error("path `{path}` {reason}")]
    BadPath { path: String, reason: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EndpointKind {
    Tcp,
    Http,
    Ssh,
}

impl EndpointKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EndpointKind::Tcp => "tcp",
            EndpointKind::Http => "http",
            EndpointKind::Ssh => "ssh",
        }
    }
}

impl fmt::Display for EndpointKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A declared network entry point, `<kind>/<port>` in the manifest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EndpointSpec {
    pub kind: EndpointKind,
    pub port: u16,
}

impl fmt::Display for EndpointSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.kind, self.port)
    }
}

impl FromStr for EndpointSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, port) = s
            .split_once('/')
            .ok_or_else(|| format!("expected <kind>/<port>, got `{s}`"))?;
        let kind = match kind {
            "tcp" => EndpointKind::Tcp,
            "http" => EndpointKind::Http,
            "ssh" => EndpointKind::Ssh,
            other => return Err(format!("unknown endpoint kind `{other}`")),
        };
        let port: u16 = port
            .parse()
            .map_err(|_| format!("port `{port}` is not in 1-65535"))?;
        if port == 0 {
            return Err("port 0 is not allowed".to_string());
        }
        Ok(EndpointSpec { kind, port })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FlagSpec {
    Plaintext { flag: String },
    Hashed { digest: String, platform_flag: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChallengeManifest {
    pub id: String,
    pub event: String,
    pub year: u16,
    pub category: Category,
    pub points: u64,
    pub title: String,
    pub description: String,
    pub artifacts: Vec<String>,
    pub endpoints: Vec<EndpointSpec>,
    pub flag_spec: FlagSpec,
    pub rehost_doc: String,
}

pub fn is_slug(s: &str) -> bool {
    let bytes = s.as_bytes();
    (1..=64).contains(&bytes.len())
        && (bytes[0].is_ascii_lowercase() || bytes[0].is_ascii_digit())
        && bytes
            .iter()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || *b == b'-')
}

pub fn is_hex_digest(s: &str) -> bool {
    s.len() == 64 && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
}

/// Normalizes a challenge-relative path to `/`-separated form.
///
/// Backslashes are treated as separators and `.` segments are dropped, so the
/// same manifest yields the same path on every platform. Absolute paths,
/// drive prefixes and `..` segments are rejected.
pub fn normalize_rel_path(raw: &str) -> Result<String, ManifestError> {
    let bad = |reason| ManifestError::BadPath {
        path: raw.to_string(),
        reason,
    };
    let unified = raw.replace('\\', "/");
    if unified.starts_with('/') {
        return Err(bad("is absolute"));
    }
    if unified.len() >= 2 && unified.as_bytes()[1] == b':' {
        return Err(bad("has a drive prefix"));
    }
    let mut parts = Vec::new();
    for seg in unified.split('/') {
        match seg {
            "" | "." => continue,
            ".." => return Err(bad("escapes the challenge directory")),
            s => parts.push(s),
        }
    }
    if parts.is_empty() {
        return Err(bad("is empty"));
    }
    Ok(parts.join("/"))
}

#[derive(Default)]
struct Fields {
    id: Option<String>,
    event: Option<String>,
    year: Option<u16>,
    category: Option<Category>,
    points: Option<u64>,
    title: Option<String>,
    description: Option<String>,
    artifacts: Vec<String>,
    endpoints: Vec<EndpointSpec>,
    flag: Option<String>,
    flag_digest: Option<String>,
    platform_flag: Option<String>,
    rehost_doc: Option<String>,
}

fn set_once<T>(slot: &mut Option<T>, value: T, key: &str, line: usize) -> Result<(), ManifestError> {
    if slot.is_some() {
        return Err(ManifestError::MalformedDocument {
            line,
            reason: format!("key `{key}` given more than once"),
        });
    }
    *slot = Some(value);
    Ok(())
}

/// Parses a manifest document. Unknown keys and non-repeatable duplicate keys
/// are errors; `title` defaults to the id, `description` to empty and
/// `rehost_doc` to `REHOST.md`.
pub fn parse_manifest(text: &str) -> Result<ChallengeManifest, ManifestError> {
    let mut f = Fields::default();

    for (idx, raw_line) in text.split('\n').enumerate() {
        let line = idx + 1;
        if raw_line.contains('\r') {
            return Err(ManifestError::MalformedDocument {
                line,
                reason: "carriage return found; manifests use LF line endings".into(),
            });
        }
        if raw_line.is_empty() || raw_line.starts_with('#') {
            continue;
        }
        let (key, value) = match raw_line.split_once(": ") {
            Some(kv) => kv,
            None => match raw_line.strip_suffix(':') {
                Some(k) if !k.contains(':') => (k, ""),
                _ => {
                    return Err(ManifestError::MalformedDocument {
                        line,
                        reason: "expected `key: value`".into(),
                    })
                }
            },
        };
        if !KEYS.contains(&key) {
            return Err(ManifestError::UnknownKey {
                line,
                key: key.to_string(),
            });
        }
        match key {
            "id" => {
                if !is_slug(value) {
                    return Err(ManifestError::BadSlug(value.to_string()));
                }
                set_once(&mut f.id, value.to_string(), key, line)?;
            }
            "event" => set_once(&mut f.event, value.to_string(), key, line)?,
            "year" => {
                let year: u16 = value.parse().map_err(|_| ManifestError::InvalidValue {
                    line,
                    key: "year",
                    reason: format!("`{value}` is not an integer"),
                })?;
                if !(2000..=2100).contains(&year) {
                    return Err(ManifestError::InvalidValue {
                        line,
                        key: "year",
                        reason: format!("{year} is outside 2000-2100"),
                    });
                }
                set_once(&mut f.year, year, key, line)?;
            }
            "category" => {
                let cat = Category::parse(value).ok_or_else(|| ManifestError::UnknownCategory {
                    line,
                    value: value.to_string(),
                })?;
                set_once(&mut f.category, cat, key, line)?;
            }
            "points" => {
                let points: u64 = value.parse().map_err(|_| ManifestError::InvalidValue {
                    line,
                    key: "points",
                    reason: format!("`{value}` is not a non-negative integer"),
                })?;
                set_once(&mut f.points, points, key, line)?;
            }
            "title" => set_once(&mut f.title, value.to_string(), key, line)?,
            "description" => set_once(&mut f.description, value.to_string(), key, line)?,
            "artifact" => f.artifacts.push(normalize_rel_path(value)?),
            "endpoint" => {
                let ep = value.parse().map_err(|reason| ManifestError::InvalidValue {
                    line,
                    key: "endpoint",
                    reason,
                })?;
                f.endpoints.push(ep);
            }
            "flag" => {
                if crate::flagcheck::normalize_flag(value).is_empty() {
                    return Err(ManifestError::InvalidValue {
                        line,
                        key: "flag",
                        reason: "flag is empty".into(),
                    });
                }
                set_once(&mut f.flag, value.to_string(), key, line)?;
            }
            "flag_digest" => {
                if !is_hex_digest(value) {
                    return Err(ManifestError::BadDigest { line });
                }
                set_once(&mut f.flag_digest, value.to_string(), key, line)?;
            }
            "platform_flag" => set_once(&mut f.platform_flag, value.to_string(), key, line)?,
            "rehost_doc" => set_once(&mut f.rehost_doc, normalize_rel_path(value)?, key, line)?,
            _ => unreachable!("key set checked above"),
        }
    }

    let flag_spec = match (f.flag, f.flag_digest, f.platform_flag) {
        (Some(flag), None, None) => FlagSpec::Plaintext { flag },
        (None, Some(digest), Some(platform_flag)) => FlagSpec::Hashed {
            digest,
            platform_flag,
        },
        (None, Some(_), None) => return Err(ManifestError::MissingField("platform_flag")),
        (None, None, Some(_)) => return Err(ManifestError::MissingField("flag_digest")),
        (None, None, None) => return Err(ManifestError::MissingField("flag")),
        (Some(_), _, _) => {
            return Err(ManifestError::MalformedDocument {
                line: 0,
                reason: "`flag` cannot be combined with `flag_digest`/`platform_flag`".into(),
            })
        }
    };

    let id = f.id.ok_or(ManifestError::MissingField("id"))?;
    Ok(ChallengeManifest {
        title: f.title.unwrap_or_else(|| id.clone()),
        id,
        event: f.event.ok_or(ManifestError::MissingField("event"))?,
        year: f.year.ok_or(ManifestError::MissingField("year"))?,
        category: f.category.ok_or(ManifestError::MissingField("category"))?,
        points: f.points.ok_or(ManifestError::MissingField("points"))?,
        description: f.description.unwrap_or_default(),
        artifacts: f.artifacts,
        endpoints: f.endpoints,
        flag_spec,
        rehost_doc: f.rehost_doc.unwrap_or_else(|| DEFAULT_REHOST_DOC.to_string()),
    })
}

impl ChallengeManifest {
    /// Canonical document: fixed key order, canonical category name, every
    /// defaulted field written out.
    pub fn to_canonical(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: &str| {
            out.push_str(k);
            out.push_str(": ");
            out.push_str(v);
            out.push('\n');
        };
        put("id", &self.id);
        put("event", &self.event);
        put("year", &self.year.to_string());
        put("category", self.category.as_str());
        put("points", &self.points.to_string());
        put("title", &self.title);
        put("description", &self.description);
        for a in &self.artifacts {
            put("artifact", a);
        }
        for e in &self.endpoints {
            put("endpoint", &e.to_string());
        }
        match &self.flag_spec {
            FlagSpec::Plaintext { flag } => put("flag", flag),
            FlagSpec::Hashed {
                digest,
                platform_flag,
            } => {
                put("flag_digest", digest);
                put("platform_flag", platform_flag);
            }
        }
        put("rehost_doc", &self.rehost_doc);
        out
    }
}

impl FromStr for ChallengeManifest {
    type Err = ManifestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_manifest(s)
    }
}
