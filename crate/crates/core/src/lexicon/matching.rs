use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::corpus::PostLabel;

use super::tokenize::{tokenize, Token};
use super::{ConceptEntry, EmbeddingTable, Lexicon, LexiconError, DEFAULT_THRESHOLD};

/// Tokens that negate a following concept. Any token ending in `n't` also counts.
pub const NEGATION_CUES: &[&str] = &[
    "no", "not", "never", "don't", "dont", "won't", "wont", "can't", "cant", "n't",
];

/// Tokens that stop the backwards negation scan.
pub const CLAUSE_BOUNDARIES: &[&str] = &[".", ",", ";", "but"];

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64, LexiconError> {
    if a.len() != b.len() {
        return Err(LexiconError::DimensionMismatch(a.len(), b.len()));
    }
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(LexiconError::ZeroVector);
    }
    // sqrt of the product keeps cos(v, v) exactly 1.
    Ok((dot / (na * nb).sqrt()).clamp(-1.0, 1.0))
}

/// Unweighted mean of the in-vocabulary token vectors; `None` when every token
/// is out of vocabulary.
pub fn phrase_vector<S: AsRef<str>>(tokens: &[S], table: &EmbeddingTable) -> Option<Vec<f64>> {
    let mut sum = vec![0.0; table.dimension()];
    let mut n = 0usize;
    for t in tokens {
        if let Some(v) = table.get(t.as_ref()) {
            sum.iter_mut().zip(v).for_each(|(s, x)| *s += x);
            n += 1;
        }
    }
    if n == 0 {
        return None;
    }
    let inv = 1.0 / n as f64;
    sum.iter_mut().for_each(|s| *s *= inv);
    Some(sum)
}

fn is_negation_cue(token: &str) -> bool {
    NEGATION_CUES.contains(&token) || token.ends_with("n't")
}

/// True iff a negation cue occurs within `window` tokens before `span.0`
/// with no clause boundary in between.
pub fn resolve_negation(tokens: &[Token], span: (usize, usize), window: usize) -> bool {
    let start = span.0.min(tokens.len());
    for t in tokens[..start].iter().rev().take(window) {
        if CLAUSE_BOUNDARIES.contains(&t.text.as_str()) {
            return false;
        }
        if is_negation_cue(&t.text) {
            return true;
        }
    }
    false
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchOptions {
    pub threshold: f64,
    pub max_ngram: usize,
    pub negation_window: usize,
}

impl Default for MatchOptions {
    fn default() -> Self {
        MatchOptions {
            threshold: DEFAULT_THRESHOLD,
            max_ngram: 4,
            negation_window: 3,
        }
    }
}

impl MatchOptions {
    pub fn with_threshold(threshold: f64) -> Self {
        MatchOptions {
            threshold,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConceptMatch {
    pub concept_id: String,
    /// Token index range `[start, end)` into [`tokenize`] output.
    pub span: (usize, usize),
    pub similarity: f64,
    pub negated: bool,
    pub surface: String,
    pub severity_category: Option<PostLabel>,
}

/// Concept vectors precomputed against one embedding table.
pub struct Matcher<'a> {
    table: &'a EmbeddingTable,
    concepts: Vec<(&'a ConceptEntry, Vec<f64>)>,
    options: MatchOptions,
}

impl<'a> Matcher<'a> {
    /// Concepts with no in-vocabulary token (or a zero mean vector) are skipped.
    pub fn new(lexicons: &[&'a Lexicon], table: &'a EmbeddingTable, options: MatchOptions) -> Self {
        let mut concepts = Vec::new();
        let mut skipped = 0usize;
        for lex in lexicons {
            for c in &lex.concepts {
                match phrase_vector(&c.surface, table) {
                    Some(v) if v.iter().any(|x| *x != 0.0) => concepts.push((c, v)),
                    _ => skipped += 1,
                }
            }
        }
        if skipped > 0 {
            log::warn!("{skipped} lexicon concepts have no embedding and will never match");
        }
        Matcher {
            table,
            concepts,
            options,
        }
    }

    pub fn options(&self) -> MatchOptions {
        self.options
    }

    pub fn match_text(&self, text: &str) -> Vec<ConceptMatch> {
        self.match_tokens(&tokenize(text))
    }

    /// Scores every word n-gram against every concept and keeps the best
    /// non-overlapping candidates (similarity, then length, then leftmost).
    ///
    /// Candidate n-grams never contain punctuation and must begin and end on
    /// in-vocabulary words.
    pub fn match_tokens(&self, tokens: &[Token]) -> Vec<ConceptMatch> {
        let opts = self.options;
        let vecs: Vec<Option<&[f64]>> = tokens
            .iter()
            .map(|t| if t.is_word() { self.table.get(&t.text) } else { None })
            .collect();
        let dim = self.table.dimension();
        let mut candidates: Vec<(usize, usize, f64, usize)> = Vec::new();
        for start in 0..tokens.len() {
            if vecs[start].is_none() {
                continue;
            }
            let mut sum = vec![0.0; dim];
            let mut n_vec = 0usize;
            for end in start + 1..=(start + opts.max_ngram).min(tokens.len()) {
                let last = end - 1;
                if !tokens[last].is_word() {
                    break;
                }
                let Some(v) = vecs[last] else { continue };
                sum.iter_mut().zip(v).for_each(|(s, x)| *s += x);
                n_vec += 1;
                let mean: Vec<f64> = sum.iter().map(|s| s / n_vec as f64).collect();
                let mut best: Option<(f64, usize)> = None;
                for (ci, (_, cv)) in self.concepts.iter().enumerate() {
                    let Ok(sim) = cosine_similarity(&mean, cv) else {
                        continue;
                    };
                    if best.is_none_or(|(b, _)| sim > b) {
                        best = Some((sim, ci));
                    }
                }
                if let Some((sim, ci)) = best {
                    if sim >= opts.threshold {
                        candidates.push((start, end, sim, ci));
                    }
                }
            }
        }
        candidates.sort_by(|a, b| {
            b.2.partial_cmp(&a.2)
                .unwrap_or(Ordering::Equal)
                .then((b.1 - b.0).cmp(&(a.1 - a.0)))
                .then(a.0.cmp(&b.0))
        });
        let mut taken = vec![false; tokens.len()];
        let mut out = Vec::new();
        for (start, end, sim, ci) in candidates {
            if taken[start..end].iter().any(|&t| t) {
                continue;
            }
            taken[start..end].iter_mut().for_each(|t| *t = true);
            let entry = self.concepts[ci].0;
            out.push(ConceptMatch {
                concept_id: entry.concept_id.clone(),
                span: (start, end),
                similarity: sim,
                negated: resolve_negation(tokens, (start, end), opts.negation_window),
                surface: entry.canonical_surface(),
                severity_category: entry.severity_category,
            });
        }
        out.sort_by_key(|m| m.span.0);
        out
    }

    /// Replaces every non-negated match with its concept's canonical surface;
    /// everything else is copied verbatim.
    pub fn normalize(&self, text: &str) -> String {
        let tokens = tokenize(text);
        let mut out = String::with_capacity(text.len());
        let mut cursor = 0usize;
        for m in self.match_tokens(&tokens) {
            if m.negated {
                continue;
            }
            let from = tokens[m.span.0].start;
            let to = tokens[m.span.1 - 1].end;
            out.push_str(&text[cursor..from]);
            out.push_str(&m.surface);
            cursor = to;
        }
        out.push_str(&text[cursor..]);
        out
    }

    /// Non-negated match counts per severity category (all five keys present).
    pub fn severity_counts(&self, text: &str) -> BTreeMap<PostLabel, usize> {
        let mut counts: BTreeMap<PostLabel, usize> = PostLabel::ALL.iter().map(|&l| (l, 0)).collect();
        for m in self.match_text(text) {
            if let (false, Some(cat)) = (m.negated, m.severity_category) {
                *counts.entry(cat).or_default() += 1;
            }
        }
        counts
    }
}

pub fn match_concepts(
    text: &str,
    lexicon: &Lexicon,
    table: &EmbeddingTable,
    threshold: f64,
    max_ngram: usize,
) -> Vec<ConceptMatch> {
    let opts = MatchOptions {
        threshold,
        max_ngram,
        ..Default::default()
    };
    Matcher::new(&[lexicon], table, opts).match_text(text)
}

pub fn mednorm(text: &str, norm_lexicons: &[&Lexicon], table: &EmbeddingTable, threshold: f64) -> String {
    Matcher::new(norm_lexicons, table, MatchOptions::with_threshold(threshold)).normalize(text)
}

pub fn severity_score(
    text: &str,
    severity_lexicon: &Lexicon,
    table: &EmbeddingTable,
    threshold: f64,
) -> BTreeMap<PostLabel, usize> {
    Matcher::new(&[severity_lexicon], table, MatchOptions::with_threshold(threshold)).severity_counts(text)
}
