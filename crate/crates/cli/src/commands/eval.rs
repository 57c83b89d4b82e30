//! Objective evaluation of hypothesis audio against references.
//!
//! Utterances pair up by id. Each row carries whatever metrics its inputs
//! allow: audio metrics always, WER when both transcripts exist, SIM when
//! both embeddings exist.

use std::collections::HashMap;
use std::path::Path;

use anyhow::{Context, Result};
use svsprep::dsp::{read_wav, resample, Downmix, Waveform};
use svsprep::metrics::{audio_metrics, cosine_sim, tokenize_transcript, wer, EvalReport, UtteranceMetrics, UtteranceReport};

use crate::config::PipelineConfig;
use crate::manifest::{parse_embedding, ManifestEntry};
use crate::{parallel_map, read_input, InputError};

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TABLE: &str = "report.txt";

fn load_audio(path: &Path, rate: u32) -> Result<Waveform> {
    let w = read_wav(path, Downmix::Average).with_context(|| format!("reading {}", path.display()))?;
    Ok(if w.sample_rate == rate { w } else { resample(&w, rate)? })
}

/// A side input that may legitimately be absent. Unreadable or missing files
/// yield `None` so the metric is omitted rather than failing the row.
fn optional<T>(path: Option<&Path>, what: &str, parse: impl Fn(&str) -> Result<T>) -> Option<T> {
    let path = path?;
    match read_input(path).and_then(|t| parse(&t)) {
        Ok(v) => Some(v),
        Err(e) => {
            log::warn!("{what} {}: {e:#}; omitting", path.display());
            None
        }
    }
}

fn score_pair(reference: &ManifestEntry, hypothesis: &ManifestEntry, cfg: &PipelineConfig) -> Result<UtteranceMetrics> {
    let r = load_audio(&reference.audio, cfg.sample_rate)?;
    let h = load_audio(&hypothesis.audio, cfg.sample_rate)?;
    let mut m = audio_metrics(&r, &h, &cfg.mcep(), &cfg.f0())?;

    let transcript = |e: &ManifestEntry| optional(e.transcript.as_deref(), "transcript", |t| Ok(tokenize_transcript(t)));
    if let (Some(rt), Some(ht)) = (transcript(reference), transcript(hypothesis)) {
        m.wer = wer(&rt, &ht);
    }
    let embedding = |e: &ManifestEntry| optional(e.embedding.as_deref(), "embedding", parse_embedding);
    if let (Some(re), Some(he)) = (embedding(reference), embedding(hypothesis)) {
        match cosine_sim(&re, &he) {
            Ok(s) => m.sim = Some(s),
            Err(e) => log::warn!("{}: similarity: {e}", reference.utt_id),
        }
    }
    Ok(m)
}

pub fn run(references: &[ManifestEntry], hypotheses: &[ManifestEntry], cfg: &PipelineConfig) -> Result<EvalReport> {
    if references.is_empty() {
        return Err(InputError("reference manifest is empty".into()).into());
    }
    let by_id: HashMap<&str, &ManifestEntry> = hypotheses.iter().map(|e| (e.utt_id.as_str(), e)).collect();
    for h in hypotheses {
        if !references.iter().any(|r| r.utt_id == h.utt_id) {
            log::warn!("hypothesis `{}` has no reference; ignored", h.utt_id);
        }
    }
    let rows = parallel_map(references, cfg.workers, |r| {
        let result = match by_id.get(r.utt_id.as_str()) {
            Some(h) => score_pair(r, h, cfg),
            None => Err(InputError("no hypothesis with this id".into()).into()),
        };
        match result {
            Ok(metrics) => UtteranceReport { utt_id: r.utt_id.clone(), metrics, error: None },
            Err(e) => {
                log::error!("{}: {e:#}", r.utt_id);
                UtteranceReport { utt_id: r.utt_id.clone(), metrics: UtteranceMetrics::default(), error: Some(format!("{e:#}")) }
            }
        }
    })?;
    Ok(EvalReport::new(rows))
}
