use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::Value;
use suicide_risk::corpus::{dataset_stats, load_dataset, CorpusStats, SentenceSplitter};
use suicide_risk::eval::{
    cross_validate, load_score_lexicon, parse_annotations_csv, report, run_ablation, sentiment_diagnostics,
    AgreementReport, CvResult, MetricsReport,
};
use suicide_risk::lexicon::{load_embeddings, EmbeddingTable, Lexicon, MatchOptions, Matcher};
use suicide_risk::models::{train_method, TrainedModel};
use suicide_risk::{SeverityLabel, UserRecord};

use crate::config::RunConfig;
use crate::failure::{Classify, CliResult, ExitClass, Failure};
use crate::manifest::{Manifest, RunOutput};

pub fn require_file(path: &Path) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::usage(format!("input file not found: {}", path.display())))
    }
}

fn read_text(path: &Path) -> CliResult<String> {
    require_file(path)?;
    std::fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))
        .or_class(ExitClass::Data)
}

fn embeddings(cfg: &RunConfig) -> CliResult<Option<EmbeddingTable>> {
    Ok(cfg.embeddings.as_deref().map(load_embeddings).transpose()?)
}

fn lexicons(cfg: &RunConfig) -> CliResult<Vec<Lexicon>> {
    Ok(cfg
        .lexicons
        .iter()
        .map(|p| Lexicon::load(p))
        .collect::<Result<_, _>>()?)
}

/// Fills `normalized_text` for posts that lack it when lexicons are configured.
fn normalize_users(users: &mut [UserRecord], lexicons: &[Lexicon], table: Option<&EmbeddingTable>, threshold: f64) {
    let (false, Some(table)) = (lexicons.is_empty(), table) else {
        return;
    };
    let refs: Vec<&Lexicon> = lexicons.iter().collect();
    let matcher = Matcher::new(&refs, table, MatchOptions::with_threshold(threshold));
    for post in users.iter_mut().flat_map(|u| u.posts.iter_mut()) {
        if post.normalized_text.is_none() {
            post.normalized_text = Some(matcher.normalize(&post.text));
        }
    }
}

/// Loads the dataset and embeddings and applies normalization.
fn prepare(cfg: &RunConfig, out: &mut RunOutput) -> CliResult<(Vec<UserRecord>, Option<EmbeddingTable>)> {
    let path = cfg.dataset()?;
    out.record_input(path)?;
    for p in cfg.embeddings.iter().chain(&cfg.lexicons) {
        out.record_input(p)?;
    }
    let mut users = load_dataset(path, cfg.dataset_format())?;
    let table = embeddings(cfg)?;
    normalize_users(&mut users, &lexicons(cfg)?, table.as_ref(), cfg.threshold);
    Ok((users, table))
}

fn json_bytes<T: serde::Serialize>(value: &T) -> Vec<u8> {
    report::to_json_pretty(value).into_bytes()
}

fn summary_line(m: &MetricsReport<SeverityLabel>) -> String {
    format!(
        "accuracy {:.4}  macro precision {:.4}  recall {:.4}  f1 {:.4}",
        m.accuracy, m.macro_avg.avg_precision, m.macro_avg.avg_recall, m.macro_avg.f1
    )
}

pub fn stats_text(s: &CorpusStats) -> String {
    let mut out = format!(
        "users: {}\nposts: {}\nsentences: {}\navg_posts_per_user: {:.2}\navg_sentences_per_post: {:.2}\n",
        s.n_users, s.n_posts, s.n_sentences, s.avg_posts_per_user, s.avg_sentences_per_post
    );
    for (label, split) in &s.per_label_user_counts {
        out.push_str(&format!(
            "users[{label}]: {} (throwaway {}, non-throwaway {})\n",
            split.total(),
            split.throwaway,
            split.non_throwaway
        ));
    }
    out.push_str(&format!(
        "supportive_posts: {} (throwaway {}, non-throwaway {})\n",
        s.supportive_posts.total(),
        s.supportive_posts.throwaway,
        s.supportive_posts.non_throwaway
    ));
    out.push_str(&format!(
        "uninformative_posts: {} (throwaway {}, non-throwaway {})\n",
        s.uninformative_posts.total(),
        s.uninformative_posts.throwaway,
        s.uninformative_posts.non_throwaway
    ));
    out
}

pub fn stats(cfg: &RunConfig, json: bool) -> CliResult<()> {
    let users = load_dataset(cfg.dataset()?, cfg.dataset_format())?;
    let s = dataset_stats(&users, &SentenceSplitter::default());
    if json {
        print!("{}", report::to_json_pretty(&s));
    } else {
        print!("{}", stats_text(&s));
    }
    Ok(())
}

/// Adds `normalized_text` next to `text`, either on the record itself or on
/// every entry of its `posts` array.
fn normalize_record(record: &mut Value, matcher: &Matcher<'_>) -> Result<(), String> {
    let obj = record.as_object_mut().ok_or("expected a JSON object")?;
    if let Some(posts) = obj.get_mut("posts") {
        let posts = posts.as_array_mut().ok_or("`posts` is not an array")?;
        for (i, p) in posts.iter_mut().enumerate() {
            normalize_record(p, matcher).map_err(|e| format!("posts[{i}]: {e}"))?;
        }
        return Ok(());
    }
    let text = obj
        .get("text")
        .and_then(Value::as_str)
        .ok_or("missing string field `text`")?;
    let normalized = matcher.normalize(text);
    obj.insert("normalized_text".into(), Value::String(normalized));
    Ok(())
}

pub fn normalize(cfg: &RunConfig, input: &Path, output: &Path) -> CliResult<()> {
    if cfg.lexicons.is_empty() {
        return Err(Failure::usage("normalize needs at least one --lexicon"));
    }
    let stdin = input == Path::new("-");
    if !stdin {
        require_file(input)?;
    }
    let table = embeddings(cfg)?.ok_or_else(|| Failure::usage("normalize needs --embeddings"))?;
    let lexicons = lexicons(cfg)?;
    let refs: Vec<&Lexicon> = lexicons.iter().collect();
    let matcher = Matcher::new(&refs, &table, MatchOptions::with_threshold(cfg.threshold));

    let reader: Box<dyn BufRead> = if stdin {
        Box::new(std::io::stdin().lock())
    } else {
        let f = std::fs::File::open(input).or_class(ExitClass::Data)?;
        Box::new(std::io::BufReader::new(f))
    };
    let writer: Box<dyn Write> = if output == Path::new("-") {
        Box::new(std::io::stdout().lock())
    } else {
        Box::new(std::fs::File::create(output).or_class(ExitClass::Internal)?)
    };
    let mut writer = BufWriter::new(writer);
    let mut skipped = 0usize;
    for (i, line) in reader.lines().enumerate() {
        let line = line.or_class(ExitClass::Data)?;
        if line.trim().is_empty() {
            continue;
        }
        let result = serde_json::from_str::<Value>(&line)
            .map_err(|e| e.to_string())
            .and_then(|mut v| normalize_record(&mut v, &matcher).map(|()| v));
        match result {
            Ok(v) => {
                serde_json::to_writer(&mut writer, &v).or_class(ExitClass::Internal)?;
                writer.write_all(b"\n").or_class(ExitClass::Internal)?;
            }
            Err(e) => {
                eprintln!("warning: line {}: skipped: {e}", i + 1);
                skipped += 1;
            }
        }
    }
    writer.flush().or_class(ExitClass::Internal)?;
    if skipped > 0 {
        return Err(Failure::data(format!("{skipped} records skipped")));
    }
    Ok(())
}

pub fn train(cfg: &RunConfig, argv: &[String]) -> CliResult<Manifest> {
    let mut out = RunOutput::new("train", argv, cfg)?;
    let (users, table) = prepare(cfg, &mut out)?;
    let model = train_method(cfg.method, &users, table.as_ref(), &cfg.train)?;
    out.write("model.json", &model.to_json_bytes())?;
    eprintln!("trained {} on {} users", cfg.method, users.len());
    out.finish()
}

pub fn predict(cfg: &RunConfig, argv: &[String], model_path: &Path) -> CliResult<Manifest> {
    require_file(model_path)?;
    let mut out = RunOutput::new("predict", argv, cfg)?;
    out.record_input(model_path)?;
    let model = TrainedModel::load(model_path)?;
    let (users, _) = prepare(cfg, &mut out)?;
    let mut lines = Vec::new();
    for u in &users {
        let p = model.predict(u)?;
        serde_json::to_writer(&mut lines, &p).or_class(ExitClass::Internal)?;
        lines.push(b'\n');
    }
    out.write("predictions.jsonl", &lines)?;
    eprintln!("predicted {} users with {}", users.len(), model.method());
    out.finish()
}

fn roc_outputs(
    out: &mut RunOutput,
    series: &[(String, Vec<suicide_risk::eval::RocCurve<SeverityLabel>>)],
) -> CliResult<()> {
    out.write("roc.csv", report::roc_csv(series).as_bytes())?;
    for (name, curves) in series {
        let svg = report::roc_svg(&format!("{name} one-vs-rest ROC"), curves);
        out.write(&format!("roc_{}.svg", name.to_lowercase()), svg.as_bytes())?;
    }
    Ok(())
}

pub fn cv(cfg: &RunConfig, argv: &[String]) -> CliResult<Manifest> {
    let mut out = RunOutput::new("cv", argv, cfg)?;
    let (users, table) = prepare(cfg, &mut out)?;
    let result = cross_validate(&users, cfg.method, cfg.folds, table.as_ref(), &cfg.train)?;
    out.write("cv.json", &json_bytes(&result))?;
    out.write("metrics.csv", report::category_csv(&result.metrics).as_bytes())?;
    roc_outputs(&mut out, &[(cfg.method.to_string(), result.roc.clone())])?;
    println!("{} {}-fold: {}", cfg.method, cfg.folds, summary_line(&result.metrics));
    out.finish()
}

pub fn ablate(cfg: &RunConfig, argv: &[String]) -> CliResult<Manifest> {
    let mut out = RunOutput::new("ablate", argv, cfg)?;
    let (users, table) = prepare(cfg, &mut out)?;
    let rows = run_ablation(&users, cfg.folds, table.as_ref(), &cfg.train);
    for r in rows.iter().filter(|r| r.error.is_some()) {
        eprintln!(
            "warning: {} failed: {}",
            r.experiment_id,
            r.error.as_deref().unwrap_or_default()
        );
    }
    let csv = report::ablation_csv(&rows);
    out.write("ablation.json", &json_bytes(&rows))?;
    out.write("ablation.csv", csv.as_bytes())?;
    print!("{csv}");
    out.finish()
}

pub fn agreement(cfg: &RunConfig, argv: &[String], annotations: &Path) -> CliResult<Manifest> {
    let text = read_text(annotations)?;
    let mut out = RunOutput::new("agreement", argv, cfg)?;
    out.record_input(annotations)?;
    let matrix = parse_annotations_csv(&text)?;
    let r = AgreementReport::compute(&matrix)?;
    out.write("agreement.json", &json_bytes(&r))?;
    println!(
        "annotators: {}  items: {}  alpha: {:.4}",
        r.annotators.len(),
        r.items,
        r.groupwise
    );
    if let Some(best) = r.max_pairwise {
        println!("max pairwise alpha: {best:.4}");
    }
    out.finish()
}

pub fn roc(cfg: &RunConfig, argv: &[String], cv_files: &[PathBuf]) -> CliResult<Manifest> {
    if cv_files.is_empty() {
        return Err(Failure::usage("roc needs at least one --cv result file"));
    }
    let mut out = RunOutput::new("roc", argv, cfg)?;
    let mut series: Vec<(String, Vec<_>)> = Vec::new();
    for path in cv_files {
        let text = read_text(path)?;
        out.record_input(path)?;
        let result: CvResult = serde_json::from_str(&text)
            .map_err(|e| Failure::data(format!("{}: not a cross-validation result: {e}", path.display())))?;
        let base = result.method.to_string();
        let taken = series.iter().filter(|(n, _)| n.starts_with(&base)).count();
        let name = if taken == 0 {
            base
        } else {
            format!("{base}-{}", taken + 1)
        };
        series.push((name, result.roc));
    }
    roc_outputs(&mut out, &series)?;
    for (name, curves) in &series {
        let aucs: Vec<String> = curves
            .iter()
            .map(|c| format!("{} {:.3}", c.positive_class, c.auc))
            .collect();
        println!("{name}: {}", aucs.join(", "));
    }
    out.finish()
}

pub fn diagnostics(cfg: &RunConfig, argv: &[String], valence: &Path, happiness: &Path) -> CliResult<Manifest> {
    require_file(valence)?;
    require_file(happiness)?;
    let mut out = RunOutput::new("diagnostics", argv, cfg)?;
    out.record_input(valence)?;
    out.record_input(happiness)?;
    let (users, _) = prepare(cfg, &mut out)?;
    let r = sentiment_diagnostics(&users, &load_score_lexicon(valence)?, &load_score_lexicon(happiness)?);
    out.write("diagnostics.json", &json_bytes(&r))?;
    for (name, d) in [("valence", &r.valence), ("happiness", &r.happiness)] {
        let means: Vec<String> = d
            .groups
            .iter()
            .map(|(l, g)| format!("{l} {:.3} (n={})", g.mean, g.n))
            .collect();
        println!("{name}: {}", means.join(", "));
    }
    out.finish()
}
