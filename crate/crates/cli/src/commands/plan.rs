//! Voice-conversion job planning.
//!
//! The target table holds one singer per line as `singer_id voice_part`,
//! separated by whitespace or a comma; `#` starts a comment.

use anyhow::Result;
use serde::Serialize;
use svsprep::formats::{build_job_manifest, read_manifest, ConversionJob, TargetSinger};

use crate::InputError;

#[derive(Debug, Serialize)]
pub struct JobManifest {
    pub jobs: Vec<ConversionJob>,
}

pub fn parse_targets(text: &str) -> Result<Vec<TargetSinger>> {
    let mut targets = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|f| !f.is_empty()).collect();
        let [singer, part] = fields[..] else {
            return Err(InputError(format!("targets line {}: expected `singer_id voice_part`", i + 1)).into());
        };
        let voice_part = part.parse().map_err(|e| InputError(format!("targets line {}: {e}", i + 1)))?;
        targets.push(TargetSinger { singer_id: singer.to_string(), voice_part });
    }
    Ok(targets)
}

pub fn run(sources: &str, targets: &str) -> Result<JobManifest> {
    let sources = read_manifest(sources)?;
    let targets = parse_targets(targets)?;
    Ok(JobManifest { jobs: build_job_manifest(&sources, &targets)? })
}

impl JobManifest {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}
