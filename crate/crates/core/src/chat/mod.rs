//! CHAT transcript parsing and cleaning.

mod clean;
mod parse;

pub use clean::{clean_document, clean_text, clean_utterance, CleanUtterance, LAUGHTER_TOKEN};
pub use parse::{parse_chat, ChatDocument, DiagnosisGroup, Participant, RawUtterance};

use rayon::prelude::*;

use crate::error::Result;

/// Parses and cleans many transcripts in parallel; output order follows
/// the input order.
pub fn clean_files<S: AsRef<str> + Sync>(
    contents: &[S],
) -> Result<Vec<(ChatDocument, Vec<CleanUtterance>)>> {
    contents
        .par_iter()
        .map(|c| {
            let doc = parse_chat(c.as_ref())?;
            let clean = clean_document(&doc);
            Ok((doc, clean))
        })
        .collect()
}
