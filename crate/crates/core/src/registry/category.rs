use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Challenge category. The declaration order is the reporting order used by
/// the statistics table (Cryptography first, Misc last).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Category {
    Cryptography,
    BinaryExploitation,
    ReverseEngineering,
    WebExploitation,
    Forensics,
    #[serde(rename = "osint")]
    OSINT,
    Blockchain,
    RadioFrequency,
    SocialEngineering,
    Steganography,
    Misc,
}

/// Short names accepted in manifests in addition to the canonical names.
pub const ALIASES: &[(&str, Category)] = &[
    ("crypto", Category::Cryptography),
    ("pwn", Category::BinaryExploitation),
    ("rev", Category::ReverseEngineering),
    ("web", Category::WebExploitation),
    ("osint", Category::OSINT),
    ("stego", Category::Steganography),
    ("rf", Category::RadioFrequency),
];

impl Category {
    pub const ALL: [Category; 11] = [
        Category::Cryptography,
        Category::BinaryExploitation,
        Category::ReverseEngineering,
        Category::WebExploitation,
        Category::Forensics,
        Category::OSINT,
        Category::Blockchain,
        Category::RadioFrequency,
        Category::SocialEngineering,
        Category::Steganography,
        Category::Misc,
    ];

    /// Canonical manifest spelling, written back on serialization.
    pub fn as_str(self) -> &'static str {
        match self {
            Category::Cryptography => "cryptography",
            Category::BinaryExploitation => "binary-exploitation",
            Category::ReverseEngineering => "reverse-engineering",
            Category::WebExploitation => "web-exploitation",
            Category::Forensics => "forensics",
            Category::OSINT => "osint",
            Category::Blockchain => "blockchain",
            Category::RadioFrequency => "radio-frequency",
            Category::SocialEngineering => "social-engineering",
            Category::Steganography => "steganography",
            Category::Misc => "misc",
        }
    }

    /// Human label used in the statistics table.
    pub fn label(self) -> &'static str {
        match self {
            Category::Cryptography => "Cryptography",
            Category::BinaryExploitation => "Binary Exploitation (PWN)",
            Category::ReverseEngineering => "Reverse Engineering",
            Category::WebExploitation => "Web Exploitation",
            Category::Forensics => "Forensics",
            Category::OSINT => "OSINT",
            Category::Blockchain => "Blockchain",
            Category::RadioFrequency => "Radio Frequency",
            Category::SocialEngineering => "Social Engineering",
            Category::Steganography => "Steganography",
            Category::Misc => "MISC",
        }
    }

    /// Case-insensitive lookup over canonical names and [`ALIASES`].
    pub fn parse(name: &str) -> Option<Category> {
        let lower = name.to_ascii_lowercase();
        Category::ALL
            .iter()
            .copied()
            .find(|c| c.as_str() == lower)
            .or_else(|| {
                ALIASES
                    .iter()
                    .find(|(alias, _)| *alias == lower)
                    .map(|(_, c)| *c)
            })
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown category `{0}`")]
pub struct UnknownCategory(pub String);

impl FromStr for Category {
    type Err = UnknownCategory;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::parse(s).ok_or_else(|| UnknownCategory(s.to_string()))
    }
}
