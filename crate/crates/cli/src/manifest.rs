//! Utterance lists for the batch commands.
//!
//! A manifest is a JSON object with an `utterances` array, or one entry per
//! line. Relative paths resolve against the manifest's directory.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use anyhow::Result;
use serde::{Deserialize, Serialize};

use crate::{read_input, InputError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub utt_id: String,
    pub audio: PathBuf,
    /// TextGrid with word and phone tiers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alignment: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub singer: String,
    /// UTF-8 transcript file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript: Option<PathBuf>,
    /// Speaker embedding, one float per line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    utterances: Vec<ManifestEntry>,
}

fn bad(path: &Path, msg: impl std::fmt::Display) -> anyhow::Error {
    InputError(format!("manifest {}: {msg}", path.display())).into()
}

pub fn parse_manifest(text: &str, origin: &Path) -> Result<Vec<ManifestEntry>> {
    let trimmed = text.trim_start_matches('\u{feff}').trim();
    let is_document = matches!(
        serde_json::from_str::<serde_json::Value>(trimmed),
        Ok(serde_json::Value::Object(ref o)) if o.contains_key("utterances")
    );
    let mut entries = if is_document {
        serde_json::from_str::<Document>(trimmed).map_err(|e| bad(origin, e))?.utterances
    } else {
        trimmed
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| bad(origin, format!("line {}: {e}", i + 1))))
            .collect::<Result<Vec<ManifestEntry>>>()?
    };
    let base = origin.parent().unwrap_or(Path::new(""));
    let mut seen = HashSet::new();
    for e in &mut entries {
        if e.utt_id.is_empty() {
            return Err(bad(origin, "empty utt_id"));
        }
        if !seen.insert(e.utt_id.clone()) {
            return Err(bad(origin, format!("duplicate utt_id `{}`", e.utt_id)));
        }
        for p in [Some(&mut e.audio), e.alignment.as_mut(), e.transcript.as_mut(), e.embedding.as_mut()]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
    Ok(entries)
}

pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    parse_manifest(&read_input(path)?, path)
}

/// One float per line; blank lines and `#` comments are skipped.
pub fn parse_embedding(text: &str) -> Result<Vec<f64>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.parse::<f64>().map_err(|e| InputError(format!("embedding value `{l}`: {e}")).into()))
        .collect()
}
