//! Deterministic keyword-separable corpora for smoke tests and demos.
//!
//! Every class owns a disjoint keyword set. A post of class `c` carries two
//! of its keywords among filler words; an uninformative post is filler only.
//! A user's label equals the label of the majority of their posts.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::{PostLabel, PostRecord, SeverityLabel, UserRecord};
use crate::lexicon::{EmbeddingTable, LexiconError};
use crate::seed;

pub const KEYWORDS: [(PostLabel, [&str; 4]); 4] = [
    (PostLabel::Supportive, ["hugs", "listen", "recovery", "proud"]),
    (PostLabel::Ideation, ["disappear", "pointless", "wish", "burden"]),
    (PostLabel::Behavior, ["pills", "razor", "bridge", "rope"]),
    (PostLabel::Attempt, ["overdosed", "hospitalized", "survived", "icu"]),
];

pub const FILLER: [&str; 16] = [
    "today", "really", "feel", "my", "the", "and", "work", "just", "life", "again", "people", "time", "know", "going",
    "home", "night",
];

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpec {
    pub users_per_class: usize,
    pub min_posts: usize,
    pub max_posts: usize,
    /// Probability that a user gets one extra uninformative post.
    pub uninformative_rate: f64,
    /// Every n-th user gets a throwaway username; 0 disables.
    pub throwaway_every: usize,
}

impl Default for CorpusSpec {
    /// 40 users, 10 per severity level.
    fn default() -> Self {
        CorpusSpec {
            users_per_class: 10,
            min_posts: 3,
            max_posts: 6,
            uninformative_rate: 0.3,
            throwaway_every: 4,
        }
    }
}

impl CorpusSpec {
    /// 12 users, 3 per severity level.
    pub fn small() -> Self {
        CorpusSpec {
            users_per_class: 3,
            min_posts: 2,
            max_posts: 4,
            ..CorpusSpec::default()
        }
    }
}

fn keywords(label: PostLabel) -> &'static [&'static str; 4] {
    &KEYWORDS
        .iter()
        .find(|(l, _)| *l == label)
        .expect("every severity has keywords")
        .1
}

fn post_text<R: Rng>(label: PostLabel, rng: &mut R) -> String {
    let n_filler = rng.gen_range(4..=6);
    let mut words: Vec<&str> = (0..n_filler).map(|_| *FILLER.choose(rng).expect("non-empty")).collect();
    if label != PostLabel::Uninformative {
        let kw = keywords(label);
        for _ in 0..2 {
            let pos = rng.gen_range(0..=words.len());
            words.insert(pos, kw.choose(rng).expect("non-empty"));
        }
    }
    words.join(" ")
}

/// Generates `4 · users_per_class` users, interleaving classes.
pub fn keyword_corpus(spec: &CorpusSpec, master_seed: u64) -> Vec<UserRecord> {
    let mut rng = seed::rng(master_seed, "synthetic/keyword-corpus");
    let n = spec.users_per_class * SeverityLabel::ALL.len();
    (0..n)
        .map(|i| {
            let label = SeverityLabel::ALL[i % SeverityLabel::ALL.len()];
            let user_id = format!("u{i:03}");
            let username = if spec.throwaway_every > 0 && i % spec.throwaway_every == spec.throwaway_every - 1 {
                format!("Throwaway_{i}")
            } else {
                format!("user_{i}")
            };
            let mut labels = vec![PostLabel::from(label); rng.gen_range(spec.min_posts..=spec.max_posts)];
            if rng.gen_bool(spec.uninformative_rate.clamp(0.0, 1.0)) {
                let pos = rng.gen_range(0..=labels.len());
                labels.insert(pos, PostLabel::Uninformative);
            }
            let posts = labels
                .iter()
                .enumerate()
                .map(|(j, &l)| PostRecord {
                    post_id: format!("{user_id}_p{j}"),
                    user_id: user_id.clone(),
                    timestamp: 1_400_000_000 + (i as i64) * 100_000 + (j as i64) * 3_600,
                    subreddit: "SuicideWatch".into(),
                    text: post_text(l, &mut rng),
                    normalized_text: None,
                    label: l,
                })
                .collect();
            UserRecord::new(user_id, Some(username), posts, label)
        })
        .collect()
}

/// Every word the generator can emit, sorted.
pub fn vocabulary() -> Vec<&'static str> {
    let mut v: Vec<&str> = KEYWORDS
        .iter()
        .flat_map(|(_, k)| k.iter().copied())
        .chain(FILLER)
        .collect();
    v.sort_unstable();
    v
}

/// Random unit-scale vectors for `vocabulary()`.
pub fn random_embeddings(dim: usize, master_seed: u64) -> Result<EmbeddingTable, LexiconError> {
    let mut rng = seed::rng(master_seed, "synthetic/embeddings");
    let entries: Vec<(String, Vec<f64>)> = vocabulary()
        .into_iter()
        .map(|w| (w.to_string(), (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()))
        .collect();
    EmbeddingTable::from_entries(dim, entries)
}
