//! Locating and loading feature files for manifest records.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;

use aphasr::corpus::{FeatureMatrix, UtteranceRecord};
use aphasr::model::{Example, Vocabulary};

/// Directory holding `{utt_id}.feat` for records without a feature path.
pub const FEATURE_CACHE_ENV: &str = "APHASR_FEATURE_CACHE";

fn manifest_dir(manifest: &Path) -> &Path {
    match manifest.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    }
}

fn feature_file(record: &UtteranceRecord, base: &Path) -> Result<PathBuf> {
    if let Some(rel) = &record.feature_path {
        return Ok(base.join(rel));
    }
    match std::env::var_os(FEATURE_CACHE_ENV) {
        Some(dir) => Ok(PathBuf::from(dir).join(format!("{}.feat", record.utt_id))),
        None => bail!(
            "{}: no feature_path and {FEATURE_CACHE_ENV} is not set",
            record.utt_id
        ),
    }
}

/// Reads the features of every record; paths are relative to the
/// manifest's directory.
pub fn load_examples(
    records: &[UtteranceRecord],
    manifest: &Path,
    vocab: &Vocabulary,
) -> Result<Vec<Example>> {
    let base = manifest_dir(manifest);
    records
        .par_iter()
        .map(|r| {
            let path = feature_file(r, base)?;
            let features =
                FeatureMatrix::read(&path).with_context(|| format!("features for {}", r.utt_id))?;
            Ok(Example::from_record(r, vocab, features))
        })
        .collect()
}

/// Keeps relative feature paths valid when split manifests are written to a
/// different directory than their source.
pub fn rebase_feature_paths(
    records: &mut [UtteranceRecord],
    manifest: &Path,
    out_dir: &Path,
) -> Result<()> {
    let src = manifest_dir(manifest)
        .canonicalize()
        .with_context(|| format!("resolving {}", manifest.display()))?;
    if out_dir.canonicalize().is_ok_and(|d| d == src) {
        return Ok(());
    }
    for r in records.iter_mut() {
        if let Some(p) = &mut r.feature_path {
            if Path::new(p).is_relative() {
                *p = src.join(&*p).to_string_lossy().into_owned();
            }
        }
    }
    Ok(())
}
