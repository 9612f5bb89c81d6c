//! Clinical lexicons, word embeddings and embedding-similarity normalization
//! (MedNorm) of informal post text.

mod embeddings;
mod matching;
mod tokenize;

use std::collections::HashSet;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::corpus::PostLabel;

pub use embeddings::{load_embeddings, EmbeddingTable};
pub use matching::{
    cosine_similarity, match_concepts, mednorm, phrase_vector, resolve_negation, severity_score, ConceptMatch,
    MatchOptions, Matcher, CLAUSE_BOUNDARIES, NEGATION_CUES,
};
pub use tokenize::{tokenize, words, Token, TokenKind};

/// Default MedNorm similarity threshold.
pub const DEFAULT_THRESHOLD: f64 = 0.6;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("embeddings line {line}: {message}")]
    Embedding { line: usize, message: String },
    #[error("lexicon `{name}` line {line}: {message}")]
    Lexicon { name: String, line: usize, message: String },
    #[error("undefined similarity: zero vector")]
    ZeroVector,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConceptEntry {
    pub concept_id: String,
    /// Tokenized surface form; never empty.
    pub surface: Vec<String>,
    pub severity_category: Option<PostLabel>,
    pub source: String,
}

impl ConceptEntry {
    /// The natural-language replacement emitted by normalization.
    pub fn canonical_surface(&self) -> String {
        self.surface.join(" ")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    pub name: String,
    pub concepts: Vec<ConceptEntry>,
}

#[derive(Deserialize)]
struct LexiconRow {
    concept_id: String,
    surface: String,
    #[serde(default)]
    severity_category: Option<String>,
    #[serde(default)]
    source: Option<String>,
}

impl Lexicon {
    pub fn new(name: impl Into<String>, concepts: Vec<ConceptEntry>) -> Result<Self, LexiconError> {
        let name = name.into();
        let mut ids = HashSet::new();
        for (i, c) in concepts.iter().enumerate() {
            let err = |message: String| LexiconError::Lexicon {
                name: name.clone(),
                line: i + 2,
                message,
            };
            if c.surface.is_empty() {
                return Err(err(format!("concept `{}` has an empty surface", c.concept_id)));
            }
            if !ids.insert(c.concept_id.as_str()) {
                return Err(err(format!("duplicate concept_id `{}`", c.concept_id)));
            }
        }
        Ok(Lexicon { name, concepts })
    }

    /// Parses `concept_id,surface,severity_category,source` CSV (header required;
    /// the last two columns may be empty or absent).
    pub fn parse_csv(name: impl Into<String>, text: &str) -> Result<Self, LexiconError> {
        let name = name.into();
        let mut reader = csv::ReaderBuilder::new()
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut concepts = Vec::new();
        for (i, row) in reader.deserialize::<LexiconRow>().enumerate() {
            let line = i + 2;
            let err = |message: String| LexiconError::Lexicon {
                name: name.clone(),
                line,
                message,
            };
            let row = row.map_err(|e| err(e.to_string()))?;
            let severity_category = match row.severity_category.as_deref() {
                None | Some("") => None,
                Some(s) => Some(s.parse::<PostLabel>().map_err(|e| err(e.to_string()))?),
            };
            concepts.push(ConceptEntry {
                concept_id: row.concept_id,
                surface: words(&row.surface),
                severity_category,
                source: row.source.unwrap_or_default(),
            });
        }
        Lexicon::new(name, concepts)
    }

    pub fn load(path: &Path) -> Result<Self, LexiconError> {
        let text = std::fs::read_to_string(path).map_err(|source| LexiconError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Lexicon::parse_csv(name, &text)
    }

    /// Severity lexicons assign a category to every entry.
    pub fn is_severity_lexicon(&self) -> bool {
        self.concepts.iter().all(|c| c.severity_category.is_some())
    }

    pub fn get(&self, concept_id: &str) -> Option<&ConceptEntry> {
        self.concepts.iter().find(|c| c.concept_id == concept_id)
    }
}
