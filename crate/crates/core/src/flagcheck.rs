//! Hashed flag verification.
//!
//! A [`CheckRecord`] stores the SHA-256 digest of a challenge's real flag and
//! the platform flag handed out when a submission matches. The real flag is
//! never stored. Plaintext flags go through the same digest comparison.
//!
//! ```
//! use ctf_vault::flagcheck::{generate_check, verify, Verdict};
//!
//! let record = generate_check("flag{test}", "pwn{release}", "chal-1").unwrap();
//! assert_eq!(
//!     verify(&record, "flag{test}\n"),
//!     Verdict::Accept { platform_flag: "pwn{release}".into() }
//! );
//! assert_eq!(verify(&record, "flag{Test}"), Verdict::Reject);
//! ```

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::registry::{is_hex_digest, is_slug, FlagSpec};

pub const ALGORITHM: &str = "sha256";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FlagCheckError {
    #[error("flag is empty after stripping trailing line endings")]
    EmptyFlag,
    #[error("platform flag must be non-empty and fit on one line")]
    BadPlatformFlag,
    #[error("bad challenge id `{0}`")]
    BadChallengeId(String),
    #[error("malformed check record: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "lowercase")]
pub enum Verdict {
    Accept { platform_flag: String },
    Reject,
}

impl Verdict {
    pub fn is_accept(&self) -> bool {
        matches!(self, Verdict::Accept { .. })
    }
}

/// Portable flag-check artifact. The algorithm is always `sha256`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckRecord {
    challenge_id: String,
    digest: String,
    platform_flag: String,
}

/// Strips trailing `\n` and `\r`. Nothing else is touched.
pub fn normalize_flag(raw: &str) -> &str {
    raw.trim_end_matches(['\n', '\r'])
}

/// Lowercase hex SHA-256 of the UTF-8 bytes.
pub fn digest_flag(normalized: &str) -> String {
    hex::encode(Sha256::digest(normalized.as_bytes()))
}

/// Equality over two digest strings that inspects every byte regardless of
/// where the first difference is.
fn digests_equal(a: &str, b: &str) -> bool {
    let (a, b) = (a.as_bytes(), b.as_bytes());
    if a.len() != b.len() {
        return false;
    }
    let diff = a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y));
    std::hint::black_box(diff) == 0
}

fn valid_platform_flag(p: &str) -> bool {
    !p.is_empty() && !p.contains(['\n', '\r'])
}

impl CheckRecord {
    /// Builds a record from an existing digest, e.g. a manifest's
    /// `flag_digest`.
    pub fn from_digest(
        challenge_id: &str,
        digest: &str,
        platform_flag: &str,
    ) -> Result<Self, FlagCheckError> {
        if !is_slug(challenge_id) {
            return Err(FlagCheckError::BadChallengeId(challenge_id.to_string()));
        }
        if !is_hex_digest(digest) {
            return Err(FlagCheckError::Malformed(format!("digest `{digest}` is not 64 lowercase hex")));
        }
        if !valid_platform_flag(platform_flag) {
            return Err(FlagCheckError::BadPlatformFlag);
        }
        Ok(CheckRecord {
            challenge_id: challenge_id.to_string(),
            digest: digest.to_string(),
            platform_flag: platform_flag.to_string(),
        })
    }

    pub fn algorithm(&self) -> &'static str {
        ALGORITHM
    }

    pub fn challenge_id(&self) -> &str {
        &self.challenge_id
    }

    pub fn digest(&self) -> &str {
        &self.digest
    }

    pub fn platform_flag(&self) -> &str {
        &self.platform_flag
    }
}

/// Four LF-terminated lines: algorithm, challenge, digest, platform_flag.
impl fmt::Display for CheckRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "algorithm: {ALGORITHM}\nchallenge: {}\ndigest: {}\nplatform_flag: {}\n",
            self.challenge_id, self.digest, self.platform_flag
        )
    }
}

impl FromStr for CheckRecord {
    type Err = FlagCheckError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let body = s
            .strip_suffix('\n')
            .ok_or_else(|| FlagCheckError::Malformed("missing final newline".into()))?;
        let lines: Vec<&str> = body.split('\n').collect();
        let [alg, chal, digest, pflag] = lines[..] else {
            return Err(FlagCheckError::Malformed(format!("expected 4 lines, found {}", lines.len())));
        };
        let field = |line: &'_ str, key: &str| -> Result<String, FlagCheckError> {
            line.strip_prefix(key)
                .and_then(|rest| rest.strip_prefix(": "))
                .map(str::to_string)
                .ok_or_else(|| FlagCheckError::Malformed(format!("expected `{key}: ...`")))
        };
        let alg = field(alg, "algorithm")?;
        if alg != ALGORITHM {
            return Err(FlagCheckError::Malformed(format!("unsupported algorithm `{alg}`")));
        }
        CheckRecord::from_digest(&field(chal, "challenge")?, &field(digest, "digest")?, &field(pflag, "platform_flag")?)
    }
}

pub fn generate_check(
    actual_flag: &str,
    platform_flag: &str,
    challenge_id: &str,
) -> Result<CheckRecord, FlagCheckError> {
    let normalized = normalize_flag(actual_flag);
    if normalized.is_empty() {
        return Err(FlagCheckError::EmptyFlag);
    }
    CheckRecord::from_digest(challenge_id, &digest_flag(normalized), platform_flag)
}

pub fn verify(record: &CheckRecord, submission: &str) -> Verdict {
    verify_against(&record.digest, &record.platform_flag, submission)
}

fn verify_against(digest: &str, platform_flag: &str, submission: &str) -> Verdict {
    let submitted = digest_flag(normalize_flag(submission));
    if digests_equal(&submitted, digest) {
        Verdict::Accept {
            platform_flag: platform_flag.to_string(),
        }
    } else {
        Verdict::Reject
    }
}

/// Compares a submission against a known plaintext flag. On success the
/// released flag is the (normalized) expected flag itself.
pub fn verify_plaintext(expected: &str, submission: &str) -> Verdict {
    let expected = normalize_flag(expected);
    if expected.is_empty() {
        return Verdict::Reject;
    }
    verify_against(&digest_flag(expected), expected, submission)
}

/// Dispatches on a manifest's flag entry.
pub fn verify_spec(spec: &FlagSpec, submission: &str) -> Verdict {
    match spec {
        FlagSpec::Plaintext { flag } => verify_plaintext(flag, submission),
        FlagSpec::Hashed {
            digest,
            platform_flag,
        } => verify_against(digest, platform_flag, submission),
    }
}
