use std::collections::{HashMap, HashSet};
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{CorpusError, PostLabel, PostRecord, SeverityLabel, SourceLabel, UserRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    Jsonl,
    Csv,
}

impl DatasetFormat {
    /// Guesses the format from the file extension, defaulting to JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => DatasetFormat::Csv,
            _ => DatasetFormat::Jsonl,
        }
    }
}

impl FromStr for DatasetFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_lowercase().as_str() {
            "jsonl" | "json" => Ok(DatasetFormat::Jsonl),
            "csv" => Ok(DatasetFormat::Csv),
            other => Err(format!("unknown dataset format `{other}` (expected jsonl or csv)")),
        }
    }
}

pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<Vec<UserRecord>, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    match format {
        DatasetFormat::Jsonl => parse_jsonl(&text),
        DatasetFormat::Csv => parse_csv(&text),
    }
}

/// Accumulates users, enforcing post-id uniqueness and dropping indication users.
#[derive(Default)]
struct Assembler {
    users: Vec<UserRecord>,
    seen_posts: HashSet<String>,
    dropped_indication: usize,
    dropped_indication_posts: usize,
}

struct PendingUser {
    user_id: String,
    username: Option<String>,
    label: SourceLabel,
    posts: Vec<(PostRecord, SourceLabel)>,
}

impl Assembler {
    fn push(&mut self, pending: PendingUser, line: usize) -> Result<(), CorpusError> {
        for (post, _) in &pending.posts {
            if !self.seen_posts.insert(post.post_id.clone()) {
                return Err(CorpusError::DuplicatePost(post.post_id.clone()));
            }
        }
        let user_label = match pending.label {
            SourceLabel::Indication => {
                self.dropped_indication += 1;
                return Ok(());
            }
            SourceLabel::Post(p) => p.severity().ok_or_else(|| CorpusError::Malformed {
                line,
                field: "label".into(),
                message: format!("`{p}` is a post-level label, not a user label"),
            })?,
        };
        let mut posts = Vec::with_capacity(pending.posts.len());
        for (post, label) in pending.posts {
            match label {
                SourceLabel::Post(_) => posts.push(post),
                SourceLabel::Indication => self.dropped_indication_posts += 1,
            }
        }
        if posts.is_empty() {
            return Err(CorpusError::Malformed {
                line,
                field: "posts".into(),
                message: format!("user `{}` has no posts", pending.user_id),
            });
        }
        self.users
            .push(UserRecord::new(pending.user_id, pending.username, posts, user_label));
        Ok(())
    }

    fn finish(self, saw_records: bool) -> Result<Vec<UserRecord>, CorpusError> {
        if !saw_records {
            return Err(CorpusError::Empty);
        }
        if self.dropped_indication > 0 {
            log::info!("dropped {} users labeled indication", self.dropped_indication);
        }
        if self.dropped_indication_posts > 0 {
            log::warn!("dropped {} posts labeled indication", self.dropped_indication_posts);
        }
        Ok(self.users)
    }
}

fn str_field<'a>(obj: &'a Map<String, Value>, field: &str, line: usize) -> Result<&'a str, CorpusError> {
    match obj.get(field) {
        Some(Value::String(s)) => Ok(s),
        Some(_) => Err(malformed(line, field, "expected a string")),
        None => Err(malformed(line, field, "missing")),
    }
}

fn malformed(line: usize, field: &str, message: &str) -> CorpusError {
    CorpusError::Malformed {
        line,
        field: field.to_string(),
        message: message.to_string(),
    }
}

fn parse_label(s: &str, line: usize, field: &str) -> Result<SourceLabel, CorpusError> {
    s.parse::<SourceLabel>()
        .map_err(|e| malformed(line, field, &e.to_string()))
}

fn checked_text(text: &str, line: usize, field: &str) -> Result<String, CorpusError> {
    if text.trim().is_empty() {
        return Err(malformed(line, field, "text is empty"));
    }
    Ok(text.to_string())
}

/// One user per line; the schema is in the README.
pub fn parse_jsonl(text: &str) -> Result<Vec<UserRecord>, CorpusError> {
    let mut asm = Assembler::default();
    let mut saw = false;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        saw = true;
        let value: Value =
            serde_json::from_str(raw).map_err(|e| malformed(line, "<record>", &format!("invalid JSON: {e}")))?;
        let obj = value
            .as_object()
            .ok_or_else(|| malformed(line, "<record>", "expected a JSON object"))?;
        let user_id = str_field(obj, "user_id", line)?.to_string();
        let label = parse_label(str_field(obj, "label", line)?, line, "label")?;
        let username = match obj.get("username") {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => return Err(malformed(line, "username", "expected a string")),
        };
        let raw_posts = obj
            .get("posts")
            .and_then(Value::as_array)
            .ok_or_else(|| malformed(line, "posts", "missing or not an array"))?;
        let mut posts = Vec::with_capacity(raw_posts.len());
        for (k, rp) in raw_posts.iter().enumerate() {
            let field = |name: &str| format!("posts[{k}].{name}");
            let po = rp
                .as_object()
                .ok_or_else(|| malformed(line, &format!("posts[{k}]"), "expected an object"))?;
            let get = |name: &str| -> Result<&str, CorpusError> {
                match po.get(name) {
                    Some(Value::String(s)) => Ok(s),
                    Some(_) => Err(malformed(line, &field(name), "expected a string")),
                    None => Err(malformed(line, &field(name), "missing")),
                }
            };
            let timestamp = po
                .get("timestamp")
                .and_then(Value::as_i64)
                .ok_or_else(|| malformed(line, &field("timestamp"), "missing or not an integer"))?;
            let post_label = parse_label(get("label")?, line, &field("label"))?;
            let normalized_text = po.get("normalized_text").and_then(Value::as_str).map(str::to_string);
            posts.push((
                PostRecord {
                    post_id: get("post_id")?.to_string(),
                    user_id: user_id.clone(),
                    timestamp,
                    subreddit: get("subreddit")?.to_string(),
                    text: checked_text(get("text")?, line, &field("text"))?,
                    normalized_text,
                    label: match post_label {
                        SourceLabel::Post(p) => p,
                        SourceLabel::Indication => PostLabel::Uninformative,
                    },
                },
                post_label,
            ));
        }
        asm.push(
            PendingUser {
                user_id,
                username,
                label,
                posts,
            },
            line,
        )?;
    }
    asm.finish(saw)
}

#[derive(Deserialize)]
struct CsvRow {
    user_id: String,
    #[serde(default)]
    username: Option<String>,
    user_label: String,
    post_id: String,
    timestamp: String,
    subreddit: String,
    post_label: String,
    text: String,
}

/// One post per row: `user_id,username,user_label,post_id,timestamp,subreddit,post_label,text`.
/// Rows of one user need not be contiguous; users keep first-appearance order.
pub fn parse_csv(text: &str) -> Result<Vec<UserRecord>, CorpusError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let mut order: Vec<String> = Vec::new();
    let mut pending: HashMap<String, (PendingUser, usize)> = HashMap::new();
    let mut saw = false;
    let headers = reader
        .headers()
        .map_err(|e| malformed(1, "<header>", &e.to_string()))?
        .clone();
    let mut record = csv::StringRecord::new();
    loop {
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
                return Err(malformed(line, "<row>", &e.to_string()));
            }
        }
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let row: CsvRow = record.deserialize(Some(&headers)).map_err(|e| {
            let field = match e.kind() {
                csv::ErrorKind::Deserialize { err, .. } => err
                    .field()
                    .and_then(|i| headers.get(i as usize))
                    .unwrap_or("<row>")
                    .to_string(),
                _ => "<row>".to_string(),
            };
            malformed(line, &field, &e.to_string())
        })?;
        saw = true;
        let timestamp: i64 = row
            .timestamp
            .trim()
            .parse()
            .map_err(|_| malformed(line, "timestamp", "not an integer"))?;
        let user_label = parse_label(&row.user_label, line, "user_label")?;
        let post_label = parse_label(&row.post_label, line, "post_label")?;
        let username = row.username.filter(|u| !u.is_empty());
        let post = PostRecord {
            post_id: row.post_id,
            user_id: row.user_id.clone(),
            timestamp,
            subreddit: row.subreddit,
            text: checked_text(&row.text, line, "text")?,
            normalized_text: None,
            label: match post_label {
                SourceLabel::Post(p) => p,
                SourceLabel::Indication => PostLabel::Uninformative,
            },
        };
        match pending.get_mut(&row.user_id) {
            Some((p, _)) => {
                if p.label != user_label {
                    return Err(malformed(
                        line,
                        "user_label",
                        "conflicts with an earlier row of the same user",
                    ));
                }
                if p.username != username {
                    return Err(malformed(
                        line,
                        "username",
                        "conflicts with an earlier row of the same user",
                    ));
                }
                p.posts.push((post, post_label));
            }
            None => {
                order.push(row.user_id.clone());
                pending.insert(
                    row.user_id.clone(),
                    (
                        PendingUser {
                            user_id: row.user_id,
                            username,
                            label: user_label,
                            posts: vec![(post, post_label)],
                        },
                        line,
                    ),
                );
            }
        }
    }
    let mut asm = Assembler::default();
    for id in order {
        let (p, line) = pending.remove(&id).expect("user recorded in order");
        asm.push(p, line)?;
    }
    asm.finish(saw)
}

#[derive(Serialize)]
struct JsonPost<'a> {
    post_id: &'a str,
    timestamp: i64,
    subreddit: &'a str,
    text: &'a str,
    label: PostLabel,
    #[serde(skip_serializing_if = "Option::is_none")]
    normalized_text: Option<&'a str>,
}

#[derive(Serialize)]
struct JsonUser<'a> {
    user_id: &'a str,
    label: SeverityLabel,
    #[serde(skip_serializing_if = "Option::is_none")]
    username: Option<&'a str>,
    posts: Vec<JsonPost<'a>>,
}

/// Writes users in the JSONL dataset schema.
pub fn write_jsonl<W: Write>(users: &[UserRecord], mut out: W) -> std::io::Result<()> {
    for u in users {
        let record = JsonUser {
            user_id: &u.user_id,
            label: u.user_label,
            username: u.username.as_deref(),
            posts: u
                .posts
                .iter()
                .map(|p| JsonPost {
                    post_id: &p.post_id,
                    timestamp: p.timestamp,
                    subreddit: &p.subreddit,
                    text: &p.text,
                    label: p.label,
                    normalized_text: p.normalized_text.as_deref(),
                })
                .collect(),
        };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
