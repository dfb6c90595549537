//! Token normalization.
//!
//! Both modes share one rule sequence: lowercase, split `.`/`?`/`!` into
//! their own tokens, drop every character outside `a-z`, digits and those
//! three marks, collapse numbers to `0`, and fold any `*exception`/`*error`
//! word onto `exception`/`error`. Training mode keeps the context tokens
//! (punctuation, `0`, `<code>`); classification mode drops them.

use serde::{Deserialize, Serialize};

/// Sentinel that replaces code blocks in stripped post text.
pub const CODE_TOKEN: &str = "<code>";
pub const NUMBER_TOKEN: &str = "0";

const SENTENCE_MARKS: [char; 3] = ['.', '?', '!'];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Training,
    Classification,
}

impl std::str::FromStr for Mode {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "training" => Ok(Mode::Training),
            "classification" => Ok(Mode::Classification),
            other => Err(crate::Error::Config(format!("unknown normalization mode `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenStream {
    pub tokens: Vec<String>,
    pub mode: Mode,
}

impl TokenStream {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn join(&self) -> String {
        self.tokens.join(" ")
    }
}

/// True for the tokens that only carry context during embedding training.
pub fn is_context_token(token: &str) -> bool {
    token == CODE_TOKEN || token == NUMBER_TOKEN || is_sentence_mark(token)
}

fn is_sentence_mark(token: &str) -> bool {
    let mut chars = token.chars();
    matches!((chars.next(), chars.next()), (Some(c), None) if SENTENCE_MARKS.contains(&c))
}

pub fn normalize(text: &str, mode: Mode) -> TokenStream {
    let lowered = text.to_lowercase();
    let spaced = separate_and_filter(&lowered);
    let tokens = spaced
        .split_whitespace()
        .filter_map(canonical_token)
        .filter(|t| mode == Mode::Training || !is_context_token(t))
        .collect();
    TokenStream { tokens, mode }
}

/// Steps 2 and 3: isolate sentence marks and the code sentinel, and blank out
/// every other disallowed character. A `.` or `,` between two digits stays
/// attached so that `3.14` and `1,000` survive as single numbers.
fn separate_and_filter(lowered: &str) -> String {
    let chars: Vec<char> = lowered.chars().collect();
    let sentinel: Vec<char> = CODE_TOKEN.chars().collect();
    let mut out = String::with_capacity(lowered.len() + 8);
    let mut i = 0;
    while i < chars.len() {
        if chars[i..].starts_with(&sentinel) {
            out.push(' ');
            out.push_str(CODE_TOKEN);
            out.push(' ');
            i += sentinel.len();
            continue;
        }
        let c = chars[i];
        let digit_flanked = i > 0
            && chars[i - 1].is_ascii_digit()
            && chars.get(i + 1).is_some_and(|n| n.is_ascii_digit());
        match c {
            'a'..='z' | '0'..='9' => out.push(c),
            '.' | ',' if digit_flanked => out.push(c),
            '.' | '?' | '!' => {
                out.push(' ');
                out.push(c);
                out.push(' ');
            }
            _ => out.push(' '),
        }
        i += 1;
    }
    out
}

/// Steps 5 and 6 for one whitespace-delimited token.
fn canonical_token(raw: &str) -> Option<String> {
    if raw == CODE_TOKEN || is_sentence_mark(raw) {
        return Some(raw.to_string());
    }
    let has_letter = raw.chars().any(|c| c.is_ascii_lowercase());
    if !has_letter {
        // digits with interior separators only
        return raw
            .chars()
            .any(|c| c.is_ascii_digit())
            .then(|| NUMBER_TOKEN.to_string());
    }
    let word: String = raw.chars().filter(|c| c.is_ascii_lowercase()).collect();
    Some(if word.ends_with("exception") {
        "exception".to_string()
    } else if word.ends_with("error") {
        "error".to_string()
    } else {
        word
    })
}
