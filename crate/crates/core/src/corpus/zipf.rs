//! Candidate-user pre-filtering on an unlabeled corpus.
//!
//! Users are ranked by their number of non-negated severity-lexicon matches and
//! a Zipf-Mandelbrot curve `f(r) = C / (r + b)^a` is fitted to the rank-frequency
//! profile by least squares in log-log space (grid over `b`, closed form for
//! `a` and `C`). The cutoff is the first rank whose observed frequency falls
//! below `tau` times the fitted value; users ranked before it are kept.
//!
//! This is an approximation of the original filtering procedure, which also
//! combined negation resolution with the rank fit in ways not fully documented.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{CorpusError, PostRecord};
use crate::lexicon::{EmbeddingTable, Lexicon, MatchOptions, Matcher};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZipfParams {
    pub tau: f64,
    pub match_options: MatchOptionsConfig,
    /// Upper end of the offset grid searched for `b`.
    pub max_offset: f64,
    pub offset_step: f64,
}

/// Serializable mirror of [`MatchOptions`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchOptionsConfig {
    pub threshold: f64,
    pub max_ngram: usize,
    pub negation_window: usize,
}

impl From<MatchOptionsConfig> for MatchOptions {
    fn from(c: MatchOptionsConfig) -> Self {
        MatchOptions {
            threshold: c.threshold,
            max_ngram: c.max_ngram,
            negation_window: c.negation_window,
        }
    }
}

impl Default for ZipfParams {
    fn default() -> Self {
        let m = MatchOptions::default();
        ZipfParams {
            tau: 0.5,
            match_options: MatchOptionsConfig {
                threshold: m.threshold,
                max_ngram: m.max_ngram,
                negation_window: m.negation_window,
            },
            max_offset: 20.0,
            offset_step: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZipfFit {
    pub c: f64,
    pub a: f64,
    pub b: f64,
    /// Sum of squared log residuals.
    pub sse: f64,
}

impl ZipfFit {
    pub fn predict(&self, rank: usize) -> f64 {
        self.c / (rank as f64 + self.b).powf(self.a)
    }
}

/// Fits `ln f = ln C − a ln(r + b)` to positive frequencies at ranks `1..=n`.
/// Returns `None` for fewer than three points.
pub fn fit_zipf_mandelbrot(freqs: &[f64], max_offset: f64, step: f64) -> Option<ZipfFit> {
    if freqs.len() < 3 || freqs.iter().any(|&f| f <= 0.0) {
        return None;
    }
    let ys: Vec<f64> = freqs.iter().map(|f| f.ln()).collect();
    let n = ys.len() as f64;
    let steps = (max_offset / step).round() as usize;
    let mut best: Option<ZipfFit> = None;
    for k in 0..=steps {
        let b = k as f64 * step;
        let xs: Vec<f64> = (1..=freqs.len()).map(|r| (r as f64 + b).ln()).collect();
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let sse: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (y - intercept - slope * x).powi(2))
            .sum();
        if best.is_none_or(|f| sse < f.sse) {
            best = Some(ZipfFit {
                c: intercept.exp(),
                a: -slope,
                b,
                sse,
            });
        }
    }
    best
}

/// Number of leading ranks kept: the first 1-based rank whose observed
/// frequency drops below `tau · fit(rank)`, minus one; all ranks when none do.
pub fn zipf_cutoff(freqs: &[f64], fit: &ZipfFit, tau: f64) -> usize {
    freqs
        .iter()
        .enumerate()
        .position(|(i, &f)| f < tau * fit.predict(i + 1))
        .unwrap_or(freqs.len())
}

/// Returns the user ids above the fitted knee, ordered by rank.
pub fn candidate_user_filter(
    raw_posts: &[PostRecord],
    severity_lexicon: &Lexicon,
    table: &EmbeddingTable,
    params: &ZipfParams,
) -> Result<Vec<String>, CorpusError> {
    let matcher = Matcher::new(&[severity_lexicon], table, params.match_options.into());
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for post in raw_posts {
        let n = matcher.match_text(&post.text).iter().filter(|m| !m.negated).count();
        *counts.entry(post.user_id.as_str()).or_default() += n;
    }
    if counts.len() < 10 {
        return Err(CorpusError::InsufficientCorpus(counts.len()));
    }
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().filter(|(_, c)| *c > 0).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let freqs: Vec<f64> = ranked.iter().map(|(_, c)| *c as f64).collect();
    let keep = match fit_zipf_mandelbrot(&freqs, params.max_offset, params.offset_step) {
        Some(fit) => zipf_cutoff(&freqs, &fit, params.tau),
        None => freqs.len(),
    };
    Ok(ranked[..keep].iter().map(|(u, _)| u.to_string()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law_is_recovered() {
        let freqs: Vec<f64> = (1..=40).map(|r| 500.0 / (r as f64 + 2.0).powf(1.3)).collect();
        let fit = fit_zipf_mandelbrot(&freqs, 20.0, 0.05).unwrap();
        assert!((fit.b - 2.0).abs() < 1e-9, "{fit:?}");
        assert!((fit.a - 1.3).abs() < 1e-9);
        assert!((fit.c - 500.0).abs() < 1e-6);
        assert_eq!(zipf_cutoff(&freqs, &fit, 0.5), 40);
    }

    #[test]
    fn too_few_points() {
        assert!(fit_zipf_mandelbrot(&[3.0, 1.0], 5.0, 0.1).is_none());
    }

    /// Grid over `b` with the 2×2 normal equations solved by Cramer's rule on
    /// raw sums, then a scan for the first rank under `tau` times the fit.
    fn oracle_cutoff(freqs: &[f64], max_offset: f64, step: f64, tau: f64) -> usize {
        let mut best = (f64::INFINITY, 0.0, 0.0, 0.0);
        let steps = (max_offset / step).round() as usize;
        for k in 0..=steps {
            let b = k as f64 * step;
            let (mut n, mut sx, mut sxx, mut sy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for (i, f) in freqs.iter().enumerate() {
                let x = ((i + 1) as f64 + b).ln();
                let y = f.ln();
                n += 1.0;
                sx += x;
                sxx += x * x;
                sy += y;
                sxy += x * y;
            }
            let det = n * sxx - sx * sx;
            let intercept = (sy * sxx - sx * sxy) / det;
            let slope = (n * sxy - sx * sy) / det;
            let sse: f64 = freqs
                .iter()
                .enumerate()
                .map(|(i, f)| (f.ln() - intercept - slope * ((i + 1) as f64 + b).ln()).powi(2))
                .sum();
            if sse < best.0 {
                best = (sse, intercept, slope, b);
            }
        }
        let (_, intercept, slope, b) = best;
        for (i, f) in freqs.iter().enumerate() {
            let fitted = (intercept + slope * ((i + 1) as f64 + b).ln()).exp();
            if *f < tau * fitted {
                return i;
            }
        }
        freqs.len()
    }

    #[test]
    fn planted_knee_matches_brute_force_oracle() {
        // Integer power-law head, then a flat tail of single matches.
        let mut freqs: Vec<f64> = (1..=30).map(|r| (600.0 / (r as f64 + 1.5).powf(1.2)).round()).collect();
        freqs.extend(std::iter::repeat_n(1.0, 15));
        let fit = fit_zipf_mandelbrot(&freqs, 20.0, 0.05).unwrap();
        let cut = zipf_cutoff(&freqs, &fit, 0.5);
        assert_eq!(cut, oracle_cutoff(&freqs, 20.0, 0.05, 0.5));
        assert!(cut < freqs.len());
        for tau in [0.2, 0.8] {
            let fit = fit_zipf_mandelbrot(&freqs, 10.0, 0.1).unwrap();
            assert_eq!(zipf_cutoff(&freqs, &fit, tau), oracle_cutoff(&freqs, 10.0, 0.1, tau));
        }
    }

    fn table() -> EmbeddingTable {
        EmbeddingTable::parse("pills 1 0\nrazor 0 1\n").unwrap()
    }

    fn severity() -> Lexicon {
        Lexicon::parse_csv(
            "sev",
            "concept_id,surface,severity_category\nC1,pills,behavior\nC2,razor,behavior\n",
        )
        .unwrap()
    }

    fn raw(user: usize, text: &str) -> PostRecord {
        PostRecord {
            post_id: format!("p{user}-{}", text.len()),
            user_id: format!("u{user:02}"),
            timestamp: 0,
            subreddit: "SuicideWatch".into(),
            text: text.into(),
            normalized_text: None,
            label: crate::corpus::PostLabel::Uninformative,
        }
    }

    #[test]
    fn single_matching_user_is_returned() {
        let mut posts: Vec<PostRecord> = (0..12).map(|u| raw(u, "nothing relevant today")).collect();
        posts.push(raw(7, "took the pills again"));
        let kept = candidate_user_filter(&posts, &severity(), &table(), &ZipfParams::default()).unwrap();
        assert_eq!(kept, ["u07"]);
    }

    #[test]
    fn no_matches_gives_empty_result() {
        let posts: Vec<PostRecord> = (0..12).map(|u| raw(u, "a quiet walk")).collect();
        let kept = candidate_user_filter(&posts, &severity(), &table(), &ZipfParams::default()).unwrap();
        assert!(kept.is_empty());
    }

    #[test]
    fn negated_matches_do_not_count() {
        let mut posts: Vec<PostRecord> = (0..12).map(|u| raw(u, "a quiet walk")).collect();
        posts.push(raw(3, "never the razor"));
        posts.push(raw(4, "the razor"));
        let kept = candidate_user_filter(&posts, &severity(), &table(), &ZipfParams::default()).unwrap();
        assert_eq!(kept, ["u04"]);
    }

    #[test]
    fn fewer_than_ten_users_is_an_error() {
        let posts: Vec<PostRecord> = (0..9).map(|u| raw(u, "pills")).collect();
        assert!(matches!(
            candidate_user_filter(&posts, &severity(), &table(), &ZipfParams::default()),
            Err(CorpusError::InsufficientCorpus(9))
        ));
    }
}
