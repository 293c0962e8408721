//! Detection-tag insertion into ASR targets and extraction from
//! hypotheses.

use serde::{Deserialize, Serialize};

use super::vocab::Vocabulary;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TagMode {
    None,
    Prepend,
    Append,
    #[default]
    Both,
}

pub fn insert_tags(
    tokens: &[usize],
    aphasia: bool,
    mode: TagMode,
    vocab: &Vocabulary,
) -> Result<Vec<usize>> {
    if tokens.iter().any(|&t| vocab.is_tag(t)) {
        return Err(Error::AlreadyTagged);
    }
    let tag = vocab.tag_for(aphasia);
    let mut out = Vec::with_capacity(tokens.len() + 2);
    if matches!(mode, TagMode::Prepend | TagMode::Both) {
        out.push(tag);
    }
    out.extend_from_slice(tokens);
    if matches!(mode, TagMode::Append | TagMode::Both) {
        out.push(tag);
    }
    Ok(out)
}

/// Splits a sequence into its non-tag tokens and its tags, each in order.
pub fn strip_tags(tokens: &[usize], vocab: &Vocabulary) -> (Vec<usize>, Vec<usize>) {
    tokens.iter().partition(|&&t| !vocab.is_tag(t))
}
