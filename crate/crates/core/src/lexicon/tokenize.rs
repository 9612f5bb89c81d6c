/// Token kinds produced by [`tokenize`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Word,
    Punct,
}

/// A lowercased token with its byte span in the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
    pub kind: TokenKind,
}

impl Token {
    pub fn is_word(&self) -> bool {
        self.kind == TokenKind::Word
    }
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

/// Lowercases and splits on Unicode whitespace and punctuation. Letters, digits
/// and intra-word apostrophes (`don't`) form words; every other non-space
/// character becomes a single-character punctuation token. Curly apostrophes are
/// folded to `'`.
pub fn tokenize(text: &str) -> Vec<Token> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let byte_end = |i: usize| chars.get(i).map(|c| c.0).unwrap_or(text.len());
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (start, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_alphanumeric() {
            let mut j = i + 1;
            while j < chars.len() {
                let cj = chars[j].1;
                let intra_apostrophe = is_apostrophe(cj) && chars.get(j + 1).is_some_and(|n| n.1.is_alphanumeric());
                if cj.is_alphanumeric() || intra_apostrophe {
                    j += 1;
                } else {
                    break;
                }
            }
            let word: String = text[start..byte_end(j)]
                .chars()
                .map(|c| if is_apostrophe(c) { '\'' } else { c })
                .flat_map(char::to_lowercase)
                .collect();
            tokens.push(Token {
                text: word,
                start,
                end: byte_end(j),
                kind: TokenKind::Word,
            });
            i = j;
        } else {
            tokens.push(Token {
                text: c.to_string(),
                start,
                end: byte_end(i + 1),
                kind: TokenKind::Punct,
            });
            i += 1;
        }
    }
    tokens
}

/// Lowercased word tokens only.
pub fn words(text: &str) -> Vec<String> {
    tokenize(text)
        .into_iter()
        .filter(Token::is_word)
        .map(|t| t.text)
        .collect()
}
