/// Rule-based sentence counter.
///
/// A sentence ends at a run of `.`, `!` or `?` followed by whitespace or end of
/// text, unless the word carrying the terminator is a guarded abbreviation.
/// Segments without any alphanumeric character are not counted.
#[derive(Debug, Clone)]
pub struct SentenceSplitter {
    abbreviations: Vec<String>,
}

const DEFAULT_ABBREVIATIONS: &[&str] = &[
    "e.g.", "i.e.", "dr.", "mr.", "mrs.", "ms.", "vs.", "st.", "jr.", "sr.", "prof.", "approx.",
];

impl Default for SentenceSplitter {
    fn default() -> Self {
        Self::with_abbreviations(DEFAULT_ABBREVIATIONS.iter().map(|s| s.to_string()))
    }
}

impl SentenceSplitter {
    pub fn with_abbreviations(abbrevs: impl IntoIterator<Item = String>) -> Self {
        SentenceSplitter {
            abbreviations: abbrevs.into_iter().map(|a| a.to_lowercase()).collect(),
        }
    }

    pub fn split<'a>(&self, text: &'a str) -> Vec<&'a str> {
        let mut out = Vec::new();
        let chars: Vec<(usize, char)> = text.char_indices().collect();
        let mut start = 0usize;
        let mut i = 0usize;
        while i < chars.len() {
            let (_, c) = chars[i];
            if !matches!(c, '.' | '!' | '?') {
                i += 1;
                continue;
            }
            let mut j = i;
            while j < chars.len() && matches!(chars[j].1, '.' | '!' | '?') {
                j += 1;
            }
            let at_boundary = j == chars.len() || chars[j].1.is_whitespace();
            let end = if j == chars.len() { text.len() } else { chars[j].0 };
            if at_boundary && !self.is_abbreviation(&text[start..end]) {
                push_segment(&mut out, &text[start..end]);
                start = end;
            }
            i = j;
        }
        push_segment(&mut out, &text[start..]);
        out
    }

    pub fn count(&self, text: &str) -> usize {
        self.split(text).len()
    }

    fn is_abbreviation(&self, segment: &str) -> bool {
        let last = segment
            .rsplit(char::is_whitespace)
            .next()
            .unwrap_or("")
            .trim_start_matches(|c: char| !c.is_alphanumeric())
            .to_lowercase();
        self.abbreviations.contains(&last)
    }
}

fn push_segment<'a>(out: &mut Vec<&'a str>, seg: &'a str) {
    let seg = seg.trim();
    if seg.chars().any(char::is_alphanumeric) {
        out.push(seg);
    }
}
