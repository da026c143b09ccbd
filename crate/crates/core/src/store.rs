//! Append-only solve log.
//!
//! One record per line, `<unix_ts> <user_id> <challenge_id>\n`. The file is
//! the source of truth; the in-memory pair index is rebuilt on load. A final
//! line without its terminating newline is a torn write: it is dropped on
//! load and cut off the file before the next append.

use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

pub const SOLVE_LOG_FILE: &str = "solves.log";

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct SolveRecord {
    pub user_id: String,
    pub challenge_id: String,
    pub timestamp: u64,
}

impl SolveRecord {
    pub fn new(user_id: impl Into<String>, challenge_id: impl Into<String>, timestamp: u64) -> Self {
        SolveRecord {
            user_id: user_id.into(),
            challenge_id: challenge_id.into(),
            timestamp,
        }
    }

    fn is_valid(&self) -> bool {
        let token_ok = |s: &str| !s.is_empty() && !s.chars().any(char::is_whitespace);
        token_ok(&self.user_id) && token_ok(&self.challenge_id)
    }

    fn to_line(&self) -> String {
        format!("{} {} {}\n", self.timestamp, self.user_id, self.challenge_id)
    }

    fn parse_line(line: &str) -> Option<SolveRecord> {
        let mut fields = line.split(' ');
        let (ts, user, chal) = (fields.next()?, fields.next()?, fields.next()?);
        if fields.next().is_some() || !ts.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let rec = SolveRecord::new(user, chal, ts.parse().ok()?);
        rec.is_valid().then_some(rec)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{}: line {line} is malformed", path.display())]
    CorruptLog { path: PathBuf, line: usize },
    #[error("invalid solve record: user and challenge ids must be non-empty without whitespace")]
    InvalidRecord,
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LoadWarning {
    /// The final line had no terminating newline and was dropped.
    TornTail { line: usize, bytes: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AppendOutcome {
    Appended,
    Duplicate,
}

/// In-memory view of the log: records in append order plus the pair index.
#[derive(Debug, Clone, Default)]
pub struct SolveLog {
    records: Vec<SolveRecord>,
    pairs: HashSet<(String, String)>,
}

impl SolveLog {
    pub fn records(&self) -> &[SolveRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }

    pub fn has_solved(&self, user: &str, challenge: &str) -> bool {
        self.pairs.contains(&(user.to_string(), challenge.to_string()))
    }

    pub fn solves_by(&self, user: &str) -> impl Iterator<Item = &SolveRecord> {
        let user = user.to_string();
        self.records.iter().filter(move |r| r.user_id == user)
    }

    fn push(&mut self, rec: SolveRecord) -> bool {
        let fresh = self.pairs.insert((rec.user_id.clone(), rec.challenge_id.clone()));
        if fresh {
            self.records.push(rec);
        }
        fresh
    }
}

#[derive(Debug)]
pub struct Loaded {
    pub log: SolveLog,
    pub warnings: Vec<LoadWarning>,
    /// Byte length of the complete-line prefix of the file.
    pub valid_len: u64,
}

/// Reads a solve log without modifying it. An absent file is an empty log.
pub fn load_solves(path: &Path) -> Result<Loaded, StoreError> {
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
        Err(source) => {
            return Err(StoreError::Io {
                path: path.to_path_buf(),
                source,
            })
        }
    };

    let mut log = SolveLog::default();
    let mut warnings = Vec::new();
    let mut offset = 0usize;
    let mut line_no = 0usize;
    while offset < bytes.len() {
        line_no += 1;
        let rest = &bytes[offset..];
        let Some(nl) = rest.iter().position(|&b| b == b'\n') else {
            log::warn!("{}: dropping torn final line {line_no} ({} bytes)", path.display(), rest.len());
            warnings.push(LoadWarning::TornTail {
                line: line_no,
                bytes: rest.len(),
            });
            break;
        };
        let corrupt = || StoreError::CorruptLog {
            path: path.to_path_buf(),
            line: line_no,
        };
        let line = std::str::from_utf8(&rest[..nl]).map_err(|_| corrupt())?;
        let rec = SolveRecord::parse_line(line).ok_or_else(corrupt)?;
        // a hand-edited log may repeat a pair; the first occurrence wins
        log.push(rec);
        offset += nl + 1;
    }

    Ok(Loaded {
        log,
        warnings,
        valid_len: offset as u64,
    })
}

/// Single-writer handle on a solve log file.
#[derive(Debug)]
pub struct SolveStore {
    path: PathBuf,
    file: File,
    log: SolveLog,
}

impl SolveStore {
    /// Loads the log, truncates any torn tail and opens it for appending.
    pub fn open(path: impl Into<PathBuf>) -> Result<(Self, Vec<LoadWarning>), StoreError> {
        let path = path.into();
        let loaded = load_solves(&path)?;
        let io_err = |source| StoreError::Io {
            path: path.clone(),
            source,
        };
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(io_err)?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io_err)?;
        if !loaded.warnings.is_empty() {
            file.set_len(loaded.valid_len).map_err(io_err)?;
            file.sync_all().map_err(io_err)?;
        }
        Ok((
            SolveStore {
                path,
                file,
                log: loaded.log,
            },
            loaded.warnings,
        ))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn log(&self) -> &SolveLog {
        &self.log
    }

    pub fn has_solved(&self, user: &str, challenge: &str) -> bool {
        self.log.has_solved(user, challenge)
    }

    /// Appends unless the (user, challenge) pair is already present. The line
    /// is synced to disk before `Appended` is returned.
    pub fn append_solve(&mut self, record: SolveRecord) -> Result<AppendOutcome, StoreError> {
        if !record.is_valid() {
            return Err(StoreError::InvalidRecord);
        }
        if self.log.has_solved(&record.user_id, &record.challenge_id) {
            return Ok(AppendOutcome::Duplicate);
        }
        let io_err = |source| StoreError::Io {
            path: self.path.clone(),
            source,
        };
        self.file
            .write_all(record.to_line().as_bytes())
            .and_then(|_| self.file.sync_data())
            .map_err(io_err)?;
        self.log.push(record);
        Ok(AppendOutcome::Appended)
    }
}
