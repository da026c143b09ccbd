use std::fmt;
use std::io;
use std::path::Path;

use serde::Serialize;

use super::manifest::ChallengeManifest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "ERROR",
            Severity::Warning => "WARNING",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub severity: Severity,
    pub code: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

impl Finding {
    pub fn error(code: &'static str, message: impl Into<String>, path: Option<String>) -> Self {
        Finding {
            severity: Severity::Error,
            code,
            message: message.into(),
            path,
        }
    }

    pub fn warning(code: &'static str, message: impl Into<String>, path: Option<String>) -> Self {
        Finding {
            severity: Severity::Warning,
            code,
            message: message.into(),
            path,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub challenge: String,
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_passing(&self) -> bool {
        self.error_count() == 0
    }

    pub fn error_count(&self) -> usize {
        self.findings
            .iter()
            .filter(|f| f.severity == Severity::Error)
            .count()
    }
}

pub const REHOST_MISSING: &str = "REHOST_MISSING";
pub const ARTIFACT_MISSING: &str = "ARTIFACT_MISSING";
pub const EMPTY_DESCRIPTION: &str = "EMPTY_DESCRIPTION";
pub const NO_ENDPOINT_NO_ARTIFACT: &str = "NO_ENDPOINT_NO_ARTIFACT";

/// Checks a challenge directory against its manifest. Only reads metadata;
/// the directory is never modified.
pub fn validate_challenge(manifest: &ChallengeManifest, dir: &Path) -> io::Result<ValidationReport> {
    let meta = std::fs::metadata(dir)?;
    if !meta.is_dir() {
        return Err(io::Error::new(
            io::ErrorKind::NotADirectory,
            format!("{} is not a directory", dir.display()),
        ));
    }

    let mut findings = Vec::new();

    if !is_file(&dir.join(&manifest.rehost_doc))? {
        findings.push(Finding::error(
            REHOST_MISSING,
            format!("rehosting notes `{}` not found", manifest.rehost_doc),
            Some(manifest.rehost_doc.clone()),
        ));
    }

    for artifact in &manifest.artifacts {
        if !is_file(&dir.join(artifact))? {
            findings.push(Finding::error(
                ARTIFACT_MISSING,
                format!("artifact `{artifact}` not found"),
                Some(artifact.clone()),
            ));
        }
    }

    if manifest.endpoints.is_empty() && manifest.artifacts.is_empty() {
        findings.push(Finding::error(
            NO_ENDPOINT_NO_ARTIFACT,
            "challenge declares neither endpoints nor artifacts and is unreachable",
            None,
        ));
    }

    if manifest.description.is_empty() {
        findings.push(Finding::warning(EMPTY_DESCRIPTION, "description is empty", None));
    }

    Ok(ValidationReport {
        challenge: manifest.id.clone(),
        findings,
    })
}

fn is_file(path: &Path) -> io::Result<bool> {
    match std::fs::metadata(path) {
        Ok(m) => Ok(m.is_file()),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(false),
        Err(e) if e.kind() == io::ErrorKind::NotADirectory => Ok(false),
        Err(e) => Err(e),
    }
}
