//! Batch pseudo-singing generation.
//!
//! Every utterance gets `<utt_id>.wav` and `<utt_id>.json` under the output
//! directory; `summary.json` lists the melody used for each file and any
//! failures. Results depend only on the seed and the inputs.

use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use svsprep::dsp::{read_wav, resample, write_wav_bytes, Downmix};
use svsprep::formats::{read_textgrid, write_annotation};
use svsprep::pseudo::{choose_melody, make_pseudo_singing, MelodyBank, UtteranceInfo};

use super::write_output;
use crate::config::PipelineConfig;
use crate::manifest::ManifestEntry;
use crate::{check_file_stem, parallel_map, utterance_seed, InputError};

pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum FileOutcome {
    Ok { utt_id: String, melody: String, audio: String, annotation: String, duration: f64 },
    Failed { utt_id: String, error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub seed: u64,
    pub processed: usize,
    pub failed: usize,
    pub files: Vec<FileOutcome>,
}

struct Generated {
    melody: String,
    wav: Vec<u8>,
    annotation: String,
    duration: f64,
}

fn generate(entry: &ManifestEntry, bank: &MelodyBank, forced: Option<&str>, cfg: &PipelineConfig) -> Result<Generated> {
    check_file_stem(&entry.utt_id)?;
    let alignment = entry
        .alignment
        .as_deref()
        .ok_or_else(|| InputError(format!("{}: manifest entry has no alignment", entry.utt_id)))?;
    let mut wave = read_wav(&entry.audio, Downmix::Average).with_context(|| format!("reading {}", entry.audio.display()))?;
    if wave.sample_rate != cfg.sample_rate {
        wave = resample(&wave, cfg.sample_rate)?;
    }
    let grid = read_textgrid(alignment).with_context(|| format!("reading {}", alignment.display()))?;

    let seed = utterance_seed(cfg.seed, &entry.utt_id);
    let melody = match forced {
        Some(id) => bank.get(id).ok_or_else(|| InputError(format!("melody `{id}` is not in the bank")))?,
        None => choose_melody(bank, seed)?,
    };
    let info = UtteranceInfo {
        utterance_id: entry.utt_id.clone(),
        audio_path: format!("{}.wav", entry.utt_id),
        singer_id: entry.singer.clone(),
    };
    let (out, record) = make_pseudo_singing(&wave, &grid.tiers, melody, seed, &info, &cfg.pseudo())?;
    Ok(Generated {
        melody: melody.id().to_string(),
        wav: write_wav_bytes(&out)?,
        annotation: write_annotation(&record)?,
        duration: out.duration(),
    })
}

/// Generate every utterance and write the outputs. Per-file failures are
/// recorded in the summary rather than aborting the batch.
pub fn run(entries: &[ManifestEntry], out_dir: &Path, melody: Option<&str>, cfg: &PipelineConfig) -> Result<Summary> {
    let bank = cfg.melody_bank()?;
    if let Some(id) = melody {
        if bank.get(id).is_none() {
            return Err(InputError(format!("melody `{id}` is not in the bank")).into());
        }
    }
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;

    let results = parallel_map(entries, cfg.workers, |entry| {
        let generated = generate(entry, &bank, melody, cfg)?;
        write_output(&out_dir.join(format!("{}.wav", entry.utt_id)), &generated.wav)?;
        write_output(&out_dir.join(format!("{}.json", entry.utt_id)), generated.annotation.as_bytes())?;
        Ok::<_, anyhow::Error>(generated)
    })?;

    let mut files = Vec::with_capacity(entries.len());
    for (entry, result) in entries.iter().zip(results) {
        files.push(match result {
            Ok(g) => {
                log::info!("{}: melody {}", entry.utt_id, g.melody);
                FileOutcome::Ok {
                    utt_id: entry.utt_id.clone(),
                    melody: g.melody,
                    audio: format!("{}.wav", entry.utt_id),
                    annotation: format!("{}.json", entry.utt_id),
                    duration: g.duration,
                }
            }
            Err(e) => {
                log::error!("{}: {e:#}", entry.utt_id);
                FileOutcome::Failed { utt_id: entry.utt_id.clone(), error: format!("{e:#}") }
            }
        });
    }
    let failed = files.iter().filter(|f| matches!(f, FileOutcome::Failed { .. })).count();
    let summary = Summary { seed: cfg.seed, processed: files.len() - failed, failed, files };
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    write_output(&out_dir.join(SUMMARY_FILE), text.as_bytes())?;
    Ok(summary)
}
