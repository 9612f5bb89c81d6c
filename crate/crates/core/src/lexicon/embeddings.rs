use std::collections::HashMap;
use std::path::Path;

use super::LexiconError;

/// Word-vector table loaded from a whitespace-separated text file.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dimension: usize,
    tokens: Vec<String>,
    vectors: Vec<f64>,
    index: HashMap<String, usize>,
    lowercased: bool,
}

impl EmbeddingTable {
    /// Builds a table from `(token, vector)` pairs. Later duplicates win.
    pub fn from_entries(
        dimension: usize,
        entries: impl IntoIterator<Item = (String, Vec<f64>)>,
    ) -> Result<Self, LexiconError> {
        if dimension == 0 {
            return Err(LexiconError::Embedding {
                line: 0,
                message: "dimension must be positive".into(),
            });
        }
        let mut table = EmbeddingTable {
            dimension,
            tokens: Vec::new(),
            vectors: Vec::new(),
            index: HashMap::new(),
            lowercased: true,
        };
        for (i, (token, vector)) in entries.into_iter().enumerate() {
            table.insert(token, &vector, i + 1)?;
        }
        Ok(table)
    }

    fn insert(&mut self, token: String, vector: &[f64], line: usize) -> Result<bool, LexiconError> {
        if vector.len() != self.dimension {
            return Err(LexiconError::Embedding {
                line,
                message: format!(
                    "token `{token}` has {} components, expected {}",
                    vector.len(),
                    self.dimension
                ),
            });
        }
        if let Some(bad) = vector.iter().find(|v| !v.is_finite()) {
            return Err(LexiconError::Embedding {
                line,
                message: format!("token `{token}` has non-finite component {bad}"),
            });
        }
        if token.to_lowercase() != token {
            self.lowercased = false;
        }
        match self.index.get(&token) {
            Some(&row) => {
                self.vectors[row * self.dimension..(row + 1) * self.dimension].copy_from_slice(vector);
                Ok(true)
            }
            None => {
                self.index.insert(token.clone(), self.tokens.len());
                self.tokens.push(token);
                self.vectors.extend_from_slice(vector);
                Ok(false)
            }
        }
    }

    /// Parses `token v1 .. vd` lines. An optional leading `count dim` header is
    /// accepted and its dimension enforced.
    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut dimension: Option<usize> = None;
        let mut table: Option<EmbeddingTable> = None;
        let mut duplicates = 0usize;
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if table.is_none()
                && dimension.is_none()
                && fields.len() == 2
                && fields.iter().all(|f| f.parse::<usize>().is_ok())
            {
                dimension = fields[1].parse().ok();
                continue;
            }
            let values: Vec<f64> = fields[1..]
                .iter()
                .map(|f| {
                    f.parse::<f64>().map_err(|_| LexiconError::Embedding {
                        line: lineno,
                        message: format!("unparseable float `{f}`"),
                    })
                })
                .collect::<Result<_, _>>()?;
            let t = match table.as_mut() {
                Some(t) => t,
                None => {
                    let dim = dimension.unwrap_or(values.len());
                    table = Some(EmbeddingTable::from_entries(dim, std::iter::empty()).map_err(|_| {
                        LexiconError::Embedding {
                            line: lineno,
                            message: "row has no vector components".into(),
                        }
                    })?);
                    table.as_mut().expect("just set")
                }
            };
            if t.insert(fields[0].to_string(), &values, lineno)? {
                duplicates += 1;
            }
        }
        if duplicates > 0 {
            log::warn!("{duplicates} duplicate embedding tokens; last occurrence kept");
        }
        table.ok_or(LexiconError::Embedding {
            line: 0,
            message: "no embedding rows".into(),
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn is_lowercased(&self) -> bool {
        self.lowercased
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// `None` for absent tokens. Lowercased tables are queried case-insensitively.
    pub fn get(&self, token: &str) -> Option<&[f64]> {
        let row = match self.index.get(token) {
            Some(&r) => r,
            None if self.lowercased => *self.index.get(&token.to_lowercase())?,
            None => return None,
        };
        Some(&self.vectors[row * self.dimension..(row + 1) * self.dimension])
    }

    pub fn contains(&self, token: &str) -> bool {
        self.get(token).is_some()
    }
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingTable, LexiconError> {
    let text = std::fs::read_to_string(path).map_err(|source| LexiconError::Io {
        path: path.display().to_string(),
        source,
    })?;
    EmbeddingTable::parse(&text)
}
