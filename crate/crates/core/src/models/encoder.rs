use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::lexicon::EmbeddingTable;
use crate::nn::{NnError, ParameterSet, RowRef, Tensor};

/// Parameter holding the trainable embedding rows.
pub(crate) const TABLE_PARAM: &str = "embedding.trainable";
const OOV_ROW: usize = 0;
const SEP_ROW: usize = 1;
const SPECIAL_ROWS: usize = 2;
const LEARNED_INIT_BOUND: f64 = 0.25;

#[derive(Debug, Clone, Copy)]
pub enum EmbeddingSource<'a> {
    /// Frozen rows copied from a pre-trained table.
    Pretrained(&'a EmbeddingTable),
    /// Every row is a trainable parameter of the given width.
    Learned { dim: usize },
}

/// Token-to-row mapping for one model.
///
/// Row layout of the trainable table: OOV, SEP, then learned tokens. In
/// pre-trained mode only the OOV and SEP rows are trainable; the frozen
/// matrix holds the pre-trained vectors of tokens seen in training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "EncoderRepr", into = "EncoderRepr")]
pub struct TextEncoder {
    dim: usize,
    frozen_tokens: Vec<String>,
    frozen: Option<Tensor>,
    learned_tokens: Vec<String>,
    index: HashMap<String, RowRef>,
}

#[derive(Serialize, Deserialize)]
struct EncoderRepr {
    dim: usize,
    frozen_tokens: Vec<String>,
    frozen: Option<Tensor>,
    learned_tokens: Vec<String>,
}

impl From<EncoderRepr> for TextEncoder {
    fn from(r: EncoderRepr) -> Self {
        TextEncoder::assemble(r.dim, r.frozen_tokens, r.frozen, r.learned_tokens)
    }
}

impl From<TextEncoder> for EncoderRepr {
    fn from(e: TextEncoder) -> Self {
        EncoderRepr {
            dim: e.dim,
            frozen_tokens: e.frozen_tokens,
            frozen: e.frozen,
            learned_tokens: e.learned_tokens,
        }
    }
}

impl TextEncoder {
    fn assemble(dim: usize, frozen_tokens: Vec<String>, frozen: Option<Tensor>, learned_tokens: Vec<String>) -> Self {
        let mut index = HashMap::with_capacity(frozen_tokens.len() + learned_tokens.len());
        for (i, t) in frozen_tokens.iter().enumerate() {
            index.insert(t.clone(), RowRef::Frozen(i));
        }
        for (i, t) in learned_tokens.iter().enumerate() {
            index.insert(t.clone(), RowRef::Trainable(SPECIAL_ROWS + i));
        }
        TextEncoder {
            dim,
            frozen_tokens,
            frozen,
            learned_tokens,
            index,
        }
    }

    /// Builds the vocabulary from training token streams and registers the
    /// trainable table in `params`.
    pub fn build<'t, I>(streams: I, source: EmbeddingSource<'_>, params: &mut ParameterSet) -> Self
    where
        I: IntoIterator<Item = &'t [String]>,
    {
        let vocab: BTreeSet<&str> = streams.into_iter().flatten().map(String::as_str).collect();
        let encoder = match source {
            EmbeddingSource::Pretrained(table) => {
                let frozen_tokens: Vec<String> = vocab
                    .iter()
                    .filter(|t| table.contains(t))
                    .map(|t| t.to_string())
                    .collect();
                let frozen = (!frozen_tokens.is_empty()).then(|| {
                    let data = frozen_tokens
                        .iter()
                        .flat_map(|t| table.get(t).expect("filtered on contains").to_vec())
                        .collect();
                    Tensor::new(vec![frozen_tokens.len(), table.dimension()], data).expect("row width")
                });
                TextEncoder::assemble(table.dimension(), frozen_tokens, frozen, Vec::new())
            }
            EmbeddingSource::Learned { dim } => {
                let learned = vocab.iter().map(|t| t.to_string()).collect();
                TextEncoder::assemble(dim, Vec::new(), None, learned)
            }
        };
        params.init_uniform(
            TABLE_PARAM,
            &[encoder.trainable_rows(), encoder.dim],
            LEARNED_INIT_BOUND,
        );
        encoder
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocabulary_size(&self) -> usize {
        self.frozen_tokens.len() + self.learned_tokens.len()
    }

    pub fn trainable_rows(&self) -> usize {
        SPECIAL_ROWS + self.learned_tokens.len()
    }

    pub fn frozen(&self) -> Option<&Tensor> {
        self.frozen.as_ref()
    }

    pub fn row(&self, token: &str) -> RowRef {
        self.index.get(token).copied().unwrap_or(RowRef::Trainable(OOV_ROW))
    }

    pub fn is_known(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<RowRef> {
        tokens.iter().map(|t| self.row(t.as_ref())).collect()
    }

    pub fn separator() -> RowRef {
        RowRef::Trainable(SEP_ROW)
    }

    pub fn oov() -> RowRef {
        RowRef::Trainable(OOV_ROW)
    }

    pub(crate) fn check_params(&self, params: &ParameterSet) -> Result<(), NnError> {
        let t = params.get(TABLE_PARAM)?;
        if t.shape() != [self.trainable_rows(), self.dim] {
            return Err(NnError::Shape(format!(
                "embedding table {:?} does not match encoder ({} rows × {})",
                t.shape(),
                self.trainable_rows(),
                self.dim
            )));
        }
        Ok(())
    }
}
