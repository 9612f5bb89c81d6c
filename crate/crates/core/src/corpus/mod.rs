//! Annotated Reddit corpus: loading, validation, statistics and ablation slices.

mod labels;
mod load;
mod sentences;
mod zipf;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use labels::{PostLabel, SeverityLabel, SourceLabel, ALLOWED_LABELS};
pub use load::{load_dataset, parse_csv, parse_jsonl, write_jsonl, DatasetFormat};
pub use sentences::SentenceSplitter;
pub use zipf::{candidate_user_filter, fit_zipf_mandelbrot, zipf_cutoff, ZipfFit, ZipfParams};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("no records")]
    Empty,
    #[error("line {line}: field `{field}`: {message}")]
    Malformed {
        line: usize,
        field: String,
        message: String,
    },
    #[error("unknown label `{label}` (allowed: {allowed})")]
    UnknownLabel { label: String, allowed: &'static str },
    #[error("duplicate post_id `{0}`")]
    DuplicatePost(String),
    #[error("insufficient corpus for rank fit: {0} users (need at least 10)")]
    InsufficientCorpus(usize),
}

/// One post. The content-type flags are derived from `label`, never stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostRecord {
    pub post_id: String,
    pub user_id: String,
    pub timestamp: i64,
    pub subreddit: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalized_text: Option<String>,
    pub label: PostLabel,
}

impl PostRecord {
    pub fn is_supportive_content(&self) -> bool {
        self.label == PostLabel::Supportive
    }

    pub fn is_uninformative_content(&self) -> bool {
        self.label == PostLabel::Uninformative
    }

    /// Text fed to the classifiers: the normalized form when requested and present.
    pub fn model_text(&self, prefer_normalized: bool) -> &str {
        match (&self.normalized_text, prefer_normalized) {
            (Some(n), true) => n,
            _ => &self.text,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserRecord {
    pub user_id: String,
    pub username: Option<String>,
    /// Sorted by `(timestamp, post_id)`.
    pub posts: Vec<PostRecord>,
    pub user_label: SeverityLabel,
    pub is_throwaway: bool,
}

impl UserRecord {
    /// Builds a user, sorting posts and deriving the throwaway flag from the
    /// username (or the user id when no username is known).
    pub fn new(
        user_id: impl Into<String>,
        username: Option<String>,
        mut posts: Vec<PostRecord>,
        user_label: SeverityLabel,
    ) -> Self {
        let user_id = user_id.into();
        sort_posts(&mut posts);
        let is_throwaway = detect_throwaway(username.as_deref().unwrap_or(&user_id));
        UserRecord {
            user_id,
            username,
            posts,
            user_label,
            is_throwaway,
        }
    }
}

pub(crate) fn sort_posts(posts: &mut [PostRecord]) {
    posts.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.post_id.cmp(&b.post_id)));
}

/// True iff the case-folded username contains `throwaway`.
pub fn detect_throwaway(username: &str) -> bool {
    username.to_lowercase().contains("throwaway")
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThrowawaySplit {
    pub throwaway: usize,
    pub non_throwaway: usize,
}

impl ThrowawaySplit {
    pub fn total(&self) -> usize {
        self.throwaway + self.non_throwaway
    }

    fn add(&mut self, throwaway: bool) {
        if throwaway {
            self.throwaway += 1;
        } else {
            self.non_throwaway += 1;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_users: usize,
    pub n_posts: usize,
    pub n_sentences: usize,
    pub avg_posts_per_user: f64,
    pub avg_sentences_per_post: f64,
    pub per_label_user_counts: BTreeMap<SeverityLabel, ThrowawaySplit>,
    /// Observed post counts per content type, split by account type. Reported,
    /// never checked against reference figures.
    pub supportive_posts: ThrowawaySplit,
    pub uninformative_posts: ThrowawaySplit,
}

pub fn dataset_stats(users: &[UserRecord], splitter: &SentenceSplitter) -> CorpusStats {
    let mut per_label: BTreeMap<SeverityLabel, ThrowawaySplit> = SeverityLabel::ALL
        .iter()
        .map(|&l| (l, ThrowawaySplit::default()))
        .collect();
    let mut n_posts = 0;
    let mut n_sentences = 0;
    let mut supportive_posts = ThrowawaySplit::default();
    let mut uninformative_posts = ThrowawaySplit::default();
    for user in users {
        per_label.entry(user.user_label).or_default().add(user.is_throwaway);
        for post in &user.posts {
            n_posts += 1;
            n_sentences += splitter.count(&post.text);
            if post.is_supportive_content() {
                supportive_posts.add(user.is_throwaway);
            }
            if post.is_uninformative_content() {
                uninformative_posts.add(user.is_throwaway);
            }
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    CorpusStats {
        n_users: users.len(),
        n_posts,
        n_sentences,
        avg_posts_per_user: ratio(n_posts, users.len()),
        avg_sentences_per_post: ratio(n_sentences, n_posts),
        per_label_user_counts: per_label,
        supportive_posts,
        uninformative_posts,
    }
}

/// Inclusion flags of one ablation experiment: throwaway accounts (TA),
/// uninformative posts (UI) and supportive posts/users (SU).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AblationFlags {
    pub include_throwaway: bool,
    pub include_uninformative: bool,
    pub include_supportive: bool,
}

impl AblationFlags {
    pub const ALL_INCLUDED: AblationFlags = AblationFlags {
        include_throwaway: true,
        include_uninformative: true,
        include_supportive: true,
    };

    pub fn new(include_throwaway: bool, include_uninformative: bool, include_supportive: bool) -> Self {
        AblationFlags {
            include_throwaway,
            include_uninformative,
            include_supportive,
        }
    }
}

/// Applies an ablation slice. Removing supportive content removes supportive
/// posts and supportive-labeled users; users left without posts are dropped.
pub fn ablation_slice(users: &[UserRecord], flags: AblationFlags) -> Vec<UserRecord> {
    let mut emptied = 0usize;
    let out: Vec<UserRecord> = users
        .iter()
        .filter(|u| flags.include_throwaway || !u.is_throwaway)
        .filter(|u| flags.include_supportive || u.user_label != SeverityLabel::Supportive)
        .filter_map(|u| {
            let posts: Vec<PostRecord> = u
                .posts
                .iter()
                .filter(|p| flags.include_uninformative || !p.is_uninformative_content())
                .filter(|p| flags.include_supportive || !p.is_supportive_content())
                .cloned()
                .collect();
            if posts.is_empty() {
                emptied += 1;
                None
            } else {
                Some(UserRecord { posts, ..u.clone() })
            }
        })
        .collect();
    if emptied > 0 {
        log::info!("ablation slice dropped {emptied} users left without posts");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn post(user: &str, id: &str, ts: i64, label: PostLabel, text: &str) -> PostRecord {
        PostRecord {
            post_id: id.into(),
            user_id: user.into(),
            timestamp: ts,
            subreddit: "SuicideWatch".into(),
            text: text.into(),
            normalized_text: None,
            label,
        }
    }

    fn user(id: &str, label: SeverityLabel, posts: Vec<PostRecord>) -> UserRecord {
        UserRecord::new(id, None, posts, label)
    }

    #[test]
    fn throwaway_detection() {
        assert!(detect_throwaway("ThrowawayAcct99"));
        assert!(!detect_throwaway("deep_thoughts"));
        assert!(detect_throwaway("THROWAWAY_user"));
        assert!(detect_throwaway("my_throwaway"));
        assert!(!detect_throwaway("throw_away"));
    }

    #[test]
    fn posts_sorted_with_id_tiebreak() {
        let u = user(
            "u",
            SeverityLabel::Ideation,
            vec![
                post("u", "p3", 20, PostLabel::Ideation, "c"),
                post("u", "p2", 10, PostLabel::Ideation, "b"),
                post("u", "p1", 10, PostLabel::Ideation, "a"),
            ],
        );
        let ids: Vec<_> = u.posts.iter().map(|p| p.post_id.as_str()).collect();
        assert_eq!(ids, ["p1", "p2", "p3"]);
    }

    #[test]
    fn single_post_stats() {
        let users = vec![user(
            "u",
            SeverityLabel::Ideation,
            vec![post("u", "p", 1, PostLabel::Ideation, "One. Two.")],
        )];
        let s = dataset_stats(&users, &SentenceSplitter::default());
        assert_eq!(s.n_sentences, 2);
        assert_eq!(s.avg_posts_per_user, 1.0);
        assert_eq!(s.avg_sentences_per_post, 2.0);
        assert_eq!(s.per_label_user_counts.values().map(|c| c.total()).sum::<usize>(), 1);
    }

    fn five_users() -> Vec<UserRecord> {
        use PostLabel as P;
        use SeverityLabel as S;
        vec![
            user(
                "a",
                S::Supportive,
                vec![
                    post("a", "a1", 1, P::Supportive, "x"),
                    post("a", "a2", 2, P::Ideation, "y"),
                ],
            ),
            user("b", S::Supportive, vec![post("b", "b1", 1, P::Supportive, "x")]),
            user(
                "throwaway_c",
                S::Ideation,
                vec![
                    post("throwaway_c", "c1", 1, P::Ideation, "x"),
                    post("throwaway_c", "c2", 2, P::Uninformative, "y"),
                ],
            ),
            user("d", S::Behavior, vec![post("d", "d1", 1, P::Uninformative, "x")]),
            user(
                "e",
                S::Attempt,
                vec![
                    post("e", "e1", 1, P::Supportive, "x"),
                    post("e", "e2", 3, P::Attempt, "z"),
                ],
            ),
        ]
    }

    #[test]
    fn slice_identity() {
        let users = five_users();
        assert_eq!(ablation_slice(&users, AblationFlags::ALL_INCLUDED), users);
    }

    #[test]
    fn slice_without_supportive_drops_users_and_posts() {
        let users = five_users();
        let out = ablation_slice(&users, AblationFlags::new(true, true, false));
        assert_eq!(out.len(), 3);
        let e = out.iter().find(|u| u.user_id == "e").unwrap();
        assert_eq!(e.posts.len(), 1);
        assert!(out.iter().all(|u| u.posts.iter().all(|p| !p.is_supportive_content())));
    }

    #[test]
    fn slice_drops_emptied_users() {
        let users = five_users();
        let out = ablation_slice(&users, AblationFlags::new(true, false, true));
        // d had only an uninformative post.
        assert_eq!(out.len(), 4);
        assert!(out.iter().all(|u| u.user_id != "d"));
        let out = ablation_slice(&users, AblationFlags::new(false, true, true));
        assert_eq!(out.len(), 4);
        assert!(out.iter().all(|u| !u.is_throwaway));
    }
}
