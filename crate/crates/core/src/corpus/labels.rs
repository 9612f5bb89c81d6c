use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::CorpusError;

/// User-level C-SSRS severity, ordered by increasing risk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeverityLabel {
    Supportive,
    Ideation,
    Behavior,
    Attempt,
}

impl SeverityLabel {
    pub const ALL: [SeverityLabel; 4] = [
        SeverityLabel::Supportive,
        SeverityLabel::Ideation,
        SeverityLabel::Behavior,
        SeverityLabel::Attempt,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SeverityLabel::Supportive => "supportive",
            SeverityLabel::Ideation => "ideation",
            SeverityLabel::Behavior => "behavior",
            SeverityLabel::Attempt => "attempt",
        }
    }

    /// One-letter code (S, I, B, A).
    pub fn code(self) -> char {
        match self {
            SeverityLabel::Supportive => 'S',
            SeverityLabel::Ideation => 'I',
            SeverityLabel::Behavior => 'B',
            SeverityLabel::Attempt => 'A',
        }
    }
}

impl fmt::Display for SeverityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl From<SeverityLabel> for PostLabel {
    fn from(l: SeverityLabel) -> Self {
        match l {
            SeverityLabel::Supportive => PostLabel::Supportive,
            SeverityLabel::Ideation => PostLabel::Ideation,
            SeverityLabel::Behavior => PostLabel::Behavior,
            SeverityLabel::Attempt => PostLabel::Attempt,
        }
    }
}

/// Post-level label: the four severity levels plus `Uninformative`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PostLabel {
    Supportive,
    Ideation,
    Behavior,
    Attempt,
    Uninformative,
}

impl PostLabel {
    /// Class order of the post classifier's output layer.
    pub const ALL: [PostLabel; 5] = [
        PostLabel::Supportive,
        PostLabel::Ideation,
        PostLabel::Behavior,
        PostLabel::Attempt,
        PostLabel::Uninformative,
    ];

    /// Argmax tie-break priority: highest severity first, `Uninformative` last.
    pub const TIE_BREAK_ORDER: [PostLabel; 5] = [
        PostLabel::Attempt,
        PostLabel::Behavior,
        PostLabel::Ideation,
        PostLabel::Supportive,
        PostLabel::Uninformative,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn severity(self) -> Option<SeverityLabel> {
        match self {
            PostLabel::Supportive => Some(SeverityLabel::Supportive),
            PostLabel::Ideation => Some(SeverityLabel::Ideation),
            PostLabel::Behavior => Some(SeverityLabel::Behavior),
            PostLabel::Attempt => Some(SeverityLabel::Attempt),
            PostLabel::Uninformative => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PostLabel::Uninformative => "uninformative",
            other => other.severity().map(SeverityLabel::as_str).unwrap_or_default(),
        }
    }
}

impl fmt::Display for PostLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A label string as it may appear in a source file, including the removed
/// "suicide indication" category.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceLabel {
    Post(PostLabel),
    Indication,
}

pub const ALLOWED_LABELS: &str = "supportive, ideation, behavior, attempt, uninformative, indication";

impl FromStr for SourceLabel {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let label = match s.trim().to_lowercase().as_str() {
            "supportive" => SourceLabel::Post(PostLabel::Supportive),
            "ideation" => SourceLabel::Post(PostLabel::Ideation),
            "behavior" => SourceLabel::Post(PostLabel::Behavior),
            "attempt" => SourceLabel::Post(PostLabel::Attempt),
            "uninformative" => SourceLabel::Post(PostLabel::Uninformative),
            "indication" => SourceLabel::Indication,
            _ => {
                return Err(CorpusError::UnknownLabel {
                    label: s.to_string(),
                    allowed: ALLOWED_LABELS,
                })
            }
        };
        Ok(label)
    }
}

impl FromStr for SeverityLabel {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.parse::<SourceLabel>()? {
            SourceLabel::Post(p) => p.severity().ok_or_else(|| CorpusError::UnknownLabel {
                label: s.to_string(),
                allowed: "supportive, ideation, behavior, attempt",
            }),
            SourceLabel::Indication => Err(CorpusError::UnknownLabel {
                label: s.to_string(),
                allowed: "supportive, ideation, behavior, attempt",
            }),
        }
    }
}

impl FromStr for PostLabel {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.parse::<SourceLabel>()? {
            SourceLabel::Post(p) => Ok(p),
            SourceLabel::Indication => Err(CorpusError::UnknownLabel {
                label: s.to_string(),
                allowed: "supportive, ideation, behavior, attempt, uninformative",
            }),
        }
    }
}
