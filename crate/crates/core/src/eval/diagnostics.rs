use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::corpus::{SeverityLabel, UserRecord};
use crate::lexicon::words;

/// Reads a `token,score` CSV. A first row whose score does not parse is
/// treated as a header.
pub fn parse_score_lexicon(text: &str) -> Result<HashMap<String, f64>, EvalError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = HashMap::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| EvalError::Malformed {
            what: "score lexicon".into(),
            message: e.to_string(),
        })?;
        let (Some(token), Some(score)) = (record.get(0), record.get(1)) else {
            return Err(EvalError::Malformed {
                what: "score lexicon".into(),
                message: format!("line {}: expected token,score", i + 1),
            });
        };
        match score.parse::<f64>() {
            Ok(v) if v.is_finite() => {
                out.insert(token.to_lowercase(), v);
            }
            _ if i == 0 => {}
            _ => {
                return Err(EvalError::Malformed {
                    what: "score lexicon".into(),
                    message: format!("line {}: bad score `{score}`", i + 1),
                })
            }
        }
    }
    Ok(out)
}

pub fn load_score_lexicon(path: &Path) -> Result<HashMap<String, f64>, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|e| EvalError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_score_lexicon(&text)
}

/// Mean score of the post's tokens found in `lexicon`; 0 when none match.
pub fn post_score(text: &str, lexicon: &HashMap<String, f64>) -> f64 {
    let scores: Vec<f64> = words(text).iter().filter_map(|w| lexicon.get(w).copied()).collect();
    if scores.is_empty() {
        0.0
    } else {
        scores.iter().sum::<f64>() / scores.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub mean: f64,
    /// Sample standard deviation; 0 for fewer than two posts.
    pub stddev: f64,
    pub n: usize,
}

/// One-way analysis of variance across severity groups.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnovaSummary {
    pub ss_between: f64,
    pub ss_within: f64,
    pub df_between: usize,
    pub df_within: usize,
    /// `None` when either degree of freedom is zero or the within-group
    /// variance vanishes.
    pub f_statistic: Option<f64>,
    /// Share of total variance explained by the grouping.
    pub eta_squared: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconDiagnostics {
    pub groups: BTreeMap<SeverityLabel, GroupSummary>,
    pub anova: AnovaSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentimentReport {
    pub valence: LexiconDiagnostics,
    pub happiness: LexiconDiagnostics,
}

fn summarize(samples: &BTreeMap<SeverityLabel, Vec<f64>>) -> LexiconDiagnostics {
    let mut groups = BTreeMap::new();
    let all: Vec<f64> = samples.values().flatten().copied().collect();
    let grand = if all.is_empty() {
        0.0
    } else {
        all.iter().sum::<f64>() / all.len() as f64
    };
    let (mut ss_between, mut ss_within, mut k) = (0.0, 0.0, 0usize);
    for label in SeverityLabel::ALL {
        let xs = samples.get(&label).map(Vec::as_slice).unwrap_or(&[]);
        let n = xs.len();
        let mean = if n == 0 { 0.0 } else { xs.iter().sum::<f64>() / n as f64 };
        let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
        let stddev = if n < 2 { 0.0 } else { (ss / (n - 1) as f64).sqrt() };
        if n > 0 {
            k += 1;
            ss_between += n as f64 * (mean - grand).powi(2);
            ss_within += ss;
        }
        groups.insert(label, GroupSummary { mean, stddev, n });
    }
    let df_between = k.saturating_sub(1);
    let df_within = all.len().saturating_sub(k);
    let f_statistic = (df_between > 0 && df_within > 0 && ss_within > 0.0)
        .then(|| (ss_between / df_between as f64) / (ss_within / df_within as f64));
    let total = ss_between + ss_within;
    LexiconDiagnostics {
        groups,
        anova: AnovaSummary {
            ss_between,
            ss_within,
            df_between,
            df_within,
            f_statistic,
            eta_squared: (total > 0.0).then(|| ss_between / total),
        },
    }
}

/// Per-post valence and happiness scores grouped by the author's severity level.
pub fn sentiment_diagnostics(
    users: &[UserRecord],
    valence: &HashMap<String, f64>,
    happiness: &HashMap<String, f64>,
) -> SentimentReport {
    let mut v: BTreeMap<SeverityLabel, Vec<f64>> = BTreeMap::new();
    let mut h: BTreeMap<SeverityLabel, Vec<f64>> = BTreeMap::new();
    for u in users {
        for p in &u.posts {
            v.entry(u.user_label).or_default().push(post_score(&p.text, valence));
            h.entry(u.user_label).or_default().push(post_score(&p.text, happiness));
        }
    }
    SentimentReport {
        valence: summarize(&v),
        happiness: summarize(&h),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{PostLabel, PostRecord};

    fn user(id: &str, label: SeverityLabel, texts: &[&str]) -> UserRecord {
        let posts = texts
            .iter()
            .enumerate()
            .map(|(i, t)| PostRecord {
                post_id: format!("{id}-{i}"),
                user_id: id.into(),
                timestamp: i as i64,
                subreddit: "s".into(),
                text: t.to_string(),
                normalized_text: None,
                label: PostLabel::from(label),
            })
            .collect();
        UserRecord::new(id, None, posts, label)
    }

    #[test]
    fn lexicon_csv_with_and_without_header() {
        let a = parse_score_lexicon("token,score\nhappy,3\nsad,-2\n").unwrap();
        assert_eq!(a.len(), 2);
        assert_eq!(a["sad"], -2.0);
        let b = parse_score_lexicon("Happy,3\n").unwrap();
        assert_eq!(b["happy"], 3.0);
        assert!(parse_score_lexicon("a,1\nb,x\n").is_err());
    }

    #[test]
    fn single_token_posts_average_by_hand() {
        let lex: HashMap<String, f64> = [("good".to_string(), 2.0), ("bad".to_string(), -3.0)].into();
        let users = [
            user("a", SeverityLabel::Ideation, &["good", "bad"]),
            user("b", SeverityLabel::Ideation, &["good"]),
            user("c", SeverityLabel::Attempt, &["bad", "nothing here"]),
        ];
        let r = sentiment_diagnostics(&users, &lex, &lex);
        let i = r.valence.groups[&SeverityLabel::Ideation];
        // (2 − 3 + 2) / 3
        assert!((i.mean - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(i.n, 3);
        let a = r.valence.groups[&SeverityLabel::Attempt];
        assert_eq!((a.mean, a.n), (-1.5, 2));
        assert_eq!(r.valence.groups[&SeverityLabel::Supportive].n, 0);
        assert_eq!(r.valence.anova.df_between, 1);
        assert_eq!(r.valence.anova.df_within, 3);
        assert_eq!(post_score("good bad good", &lex), 1.0 / 3.0);
    }

    #[test]
    fn no_lexicon_tokens_gives_zero_means() {
        let lex: HashMap<String, f64> = [("zzz".to_string(), 5.0)].into();
        let users = [
            user("a", SeverityLabel::Ideation, &["hello there"]),
            user("b", SeverityLabel::Behavior, &["same words", "more"]),
        ];
        let r = sentiment_diagnostics(&users, &lex, &lex);
        for g in r.happiness.groups.values() {
            assert_eq!(g.mean, 0.0);
        }
        assert_eq!(r.happiness.groups[&SeverityLabel::Behavior].n, 2);
        assert_eq!(r.happiness.anova.f_statistic, None);
    }

    #[test]
    fn identical_text_gives_identical_means() {
        let lex: HashMap<String, f64> = [("calm".to_string(), 1.5), ("storm".to_string(), -0.5)].into();
        let users: Vec<UserRecord> = SeverityLabel::ALL
            .iter()
            .enumerate()
            .map(|(i, &l)| user(&format!("u{i}"), l, &["calm storm calm"]))
            .collect();
        let r = sentiment_diagnostics(&users, &lex, &lex);
        let means: Vec<f64> = r.valence.groups.values().map(|g| g.mean).collect();
        assert!(means.windows(2).all(|w| w[0] == w[1]));
        assert_eq!(r.valence.anova.ss_between, 0.0);
    }
}
