//! Five-step normalization of CHAT main-tier text into ASR word tokens.
//!
//! 1. Retracing/repetition scopes, fillers (`&-um`), fragments (`&+fr`) and
//!    `@u` forms keep their words and lose the markers.
//! 2. Laughter events (`&=laughs`) become [`LAUGHTER_TOKEN`].
//! 3. Pre/postcodes, punctuation, comments, explanations, terminators and
//!    special-form suffixes are deleted.
//! 4. Error codes, interruptions, paralinguistics, pauses, overlaps, local
//!    events, gestures and unintelligible words are deleted.
//! 5. Utterances with no tokens left are dropped.
//!
//! Every `[...]` code is removed whole, whatever it is.

use serde::{Deserialize, Serialize};

use super::parse::{ChatDocument, RawUtterance};

pub const LAUGHTER_TOKEN: &str = "<LAU>";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanUtterance {
    #[serde(rename = "speaker")]
    pub speaker_code: String,
    pub tokens: Vec<String>,
    pub start_ms: Option<u64>,
    pub end_ms: Option<u64>,
}

impl CleanUtterance {
    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }

    pub fn duration_s(&self) -> Option<f64> {
        match (self.start_ms, self.end_ms) {
            (Some(s), Some(e)) if e > s => Some((e - s) as f64 / 1000.0),
            _ => None,
        }
    }
}

const PUNCTUATION: &[char] = &['.', '?', '!', ',', ';'];

/// Prosodic, CA and tag-marker symbols that may sit inside a word.
const STRIPPED_SYMBOLS: &[char] = &[
    ':', '^', '\u{2191}', '\u{2193}', '\u{02C8}', '\u{02CC}', '\u{2260}', '\u{2021}', '\u{201E}',
    '"', '\u{201C}', '\u{201D}', '\u{2308}', '\u{2309}', '\u{230A}', '\u{230B}', '\u{2248}',
    '\u{2206}', '\u{2207}', '\u{00B0}', '\u{2581}', '\u{2594}', '\u{263A}', '\u{264B}', '\u{204E}',
    '\u{00A7}', '\u{222C}', '\u{03AB}', '\u{2232}', '\u{21D7}', '\u{2197}', '\u{2192}', '\u{2198}',
    '\u{21D8}', '\u{221E}', '\u{224B}', '\u{21AB}', '\u{2047}', '\u{2219}', '/', '~',
];

const MARKER_CHARS: &[char] = &['[', ']', '<', '>', '&', '%', '@'];

const UNINTELLIGIBLE: &[&str] = &["xxx", "yyy", "www", "xx", "yy"];

#[derive(Debug, PartialEq)]
enum Piece {
    Word(String),
    Laughter,
}

fn is_boundary(c: Option<char>) -> bool {
    match c {
        None => true,
        Some(c) => c.is_whitespace() || c == '[',
    }
}

/// Splits main-tier text into raw words, dropping bracketed codes and
/// angle-bracket scope delimiters. The literal laughter token survives.
fn scan(text: &str) -> Vec<Piece> {
    let mut out = Vec::new();
    let mut word = String::new();
    let flush = |word: &mut String, out: &mut Vec<Piece>| {
        if !word.is_empty() {
            out.push(Piece::Word(std::mem::take(word)));
        }
    };
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        match c {
            '[' => {
                flush(&mut word, &mut out);
                for (_, d) in chars.by_ref() {
                    if d == ']' {
                        break;
                    }
                }
            }
            '<' if word.is_empty()
                && text[i..].starts_with(LAUGHTER_TOKEN)
                && is_boundary(text[i + LAUGHTER_TOKEN.len()..].chars().next()) =>
            {
                out.push(Piece::Laughter);
                for _ in 1..LAUGHTER_TOKEN.len() {
                    chars.next();
                }
            }
            '\u{2022}' | '\u{15}' => {
                flush(&mut word, &mut out);
                for (_, d) in chars.by_ref() {
                    if d == c {
                        break;
                    }
                }
            }
            '<' | '>' => flush(&mut word, &mut out),
            c if c.is_whitespace() => flush(&mut word, &mut out),
            c => word.push(c),
        }
    }
    flush(&mut word, &mut out);
    out
}

fn is_laughter_event(event: &str) -> bool {
    let e = event.to_ascii_lowercase();
    ["laugh", "giggl", "chuckl"]
        .iter()
        .any(|p| e.starts_with(p))
}

/// Drops `(...)` segments (pauses, unspoken completions) including their
/// content.
fn drop_parenthesized(word: &str) -> String {
    let mut out = String::with_capacity(word.len());
    let mut depth = 0usize;
    for c in word.chars() {
        match c {
            '(' => depth += 1,
            ')' => depth = depth.saturating_sub(1),
            c if depth == 0 => out.push(c),
            _ => {}
        }
    }
    out
}

fn clean_word(raw: &str) -> Option<Piece> {
    let mut w: &str = raw;
    if let Some(rest) = w.strip_prefix('&') {
        match rest.chars().next() {
            Some('=') => {
                return is_laughter_event(&rest[1..]).then_some(Piece::Laughter);
            }
            Some('-' | '+' | '~') => w = &rest[1..],
            Some(c) if c.is_alphabetic() => w = rest,
            // &*SPK:word interpositions, &{ / &} long events, stray &
            _ => return None,
        }
    }
    let w = match w.find('@') {
        Some(at) => &w[..at],
        None => w,
    };
    let w = drop_parenthesized(w);
    let w: String = w
        .chars()
        .filter(|c| !STRIPPED_SYMBOLS.contains(c))
        .collect();
    let w = w.trim_matches(PUNCTUATION);

    if w.is_empty()
        || w.starts_with(['+', '0'])
        || w.contains(MARKER_CHARS)
        || UNINTELLIGIBLE.iter().any(|u| w.eq_ignore_ascii_case(u))
    {
        return None;
    }
    Some(Piece::Word(w.to_string()))
}

/// Normalized tokens for one main-tier text.
pub fn clean_text(text: &str) -> Vec<String> {
    scan(text)
        .into_iter()
        .filter_map(|p| match p {
            Piece::Laughter => Some(Piece::Laughter),
            Piece::Word(w) => clean_word(&w),
        })
        .map(|p| match p {
            Piece::Laughter => LAUGHTER_TOKEN.to_string(),
            Piece::Word(w) => w,
        })
        .collect()
}

pub fn clean_utterance(raw: &RawUtterance) -> Option<CleanUtterance> {
    let tokens = clean_text(&raw.text);
    if tokens.is_empty() {
        return None;
    }
    Some(CleanUtterance {
        speaker_code: raw.speaker_code.clone(),
        tokens,
        start_ms: raw.start_ms,
        end_ms: raw.end_ms,
    })
}

pub fn clean_document(doc: &ChatDocument) -> Vec<CleanUtterance> {
    doc.utterances.iter().filter_map(clean_utterance).collect()
}
