use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use crate::ctc::BLANK;
use crate::error::{Error, Result};
use crate::io::write_atomic;

pub const BLANK_TOKEN: &str = "<blank>";
pub const SOS_EOS_TOKEN: &str = "<sos/eos>";
pub const UNK_TOKEN: &str = "<unk>";
pub const APH_TAG: &str = "[APH]";
pub const NONAPH_TAG: &str = "[NONAPH]";

pub const SOS_EOS: usize = 1;
pub const UNK: usize = 2;
pub const APH: usize = 3;
pub const NONAPH: usize = 4;
const FIRST_WORD: usize = 5;

/// Output vocabulary: `<blank>`, `<sos/eos>`, `<unk>`, the two detection
/// tags, then words in sorted order.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self::with_tags(words, APH_TAG, NONAPH_TAG)
    }

    /// Custom tag strings, e.g. for a dementia corpus.
    pub fn with_tags<I, S>(words: I, positive: &str, negative: &str) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let reserved = [BLANK_TOKEN, SOS_EOS_TOKEN, UNK_TOKEN, positive, negative];
        let words: BTreeSet<String> = words
            .into_iter()
            .map(|w| w.as_ref().to_string())
            .filter(|w| !reserved.contains(&w.as_str()))
            .collect();
        let tokens: Vec<String> = reserved
            .iter()
            .map(|s| s.to_string())
            .chain(words)
            .collect();
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Self { tokens, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn num_words(&self) -> usize {
        self.tokens.len() - FIRST_WORD
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Id of `token`, or `<unk>`.
    pub fn id_or_unk(&self, token: &str) -> usize {
        self.id(token).unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.id_or_unk(t.as_ref())).collect()
    }

    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter().map(|&i| self.tokens[i].clone()).collect()
    }

    pub fn is_tag(&self, id: usize) -> bool {
        id == APH || id == NONAPH
    }

    pub fn is_special(&self, id: usize) -> bool {
        id < FIRST_WORD
    }

    pub fn tag_for(&self, aphasia: bool) -> usize {
        if aphasia {
            APH
        } else {
            NONAPH
        }
    }

    pub fn blank(&self) -> usize {
        BLANK
    }

    pub fn to_text(&self) -> String {
        let mut s = self.tokens.join("\n");
        s.push('\n');
        s
    }

    /// Inverse of [`Vocabulary::to_text`].
    pub fn from_text(text: &str) -> Result<Self> {
        let lines: Vec<&str> = text.lines().collect();
        if lines.len() < FIRST_WORD
            || lines[0] != BLANK_TOKEN
            || lines[1] != SOS_EOS_TOKEN
            || lines[2] != UNK_TOKEN
        {
            return Err(Error::Config(
                "vocabulary file lacks reserved header".into(),
            ));
        }
        let v = Self::with_tags(&lines[FIRST_WORD..], lines[APH], lines[NONAPH]);
        if v.len() != lines.len() {
            return Err(Error::Config(
                "vocabulary words must be unique and sorted".into(),
            ));
        }
        Ok(v)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_text().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}
