//! Pinyin-unit annotations to CMU-phone annotations.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use serde_json::Value;
use svsprep::formats::{find_tier, read_manifest, read_textgrid, write_annotation, write_manifest, AnnotationRecord};
use svsprep::lexicon::Lexicon;
use svsprep::pseudo::PHONE_TIER_NAMES;
use svsprep::score::{adapt_average, adapt_proportional, extract_ratios, is_silence, note_onsets, PhonemeEvent, RatioTable};

use crate::config::Strategy;
use crate::{read_input, InputError};

/// Aligner frame length; aligned phones shorter than this are floored to it.
const ALIGNER_FRAME: f64 = 0.01;
/// Relative tolerance of the conservation check.
const CONSERVATION_TOL: f64 = 1e-9;

#[derive(Debug, Default, Clone, Copy)]
pub struct RatioSources<'a> {
    /// Directory of `<utt_id>.TextGrid` files with a CMU phone tier.
    pub alignments: Option<&'a Path>,
    /// JSON object mapping each unit to its weights.
    pub ratios: Option<&'a Path>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conservation {
    pub utt_id: String,
    pub events_in: usize,
    pub events_out: usize,
    pub total_in: f64,
    pub total_out: f64,
    pub notes: usize,
    /// Largest note-onset displacement, relative to the total duration.
    pub max_onset_error: f64,
    pub conserved: bool,
}

impl Conservation {
    fn measure(utt_id: &str, before: &[PhonemeEvent], after: &[PhonemeEvent]) -> Self {
        let total_in: f64 = before.iter().map(|e| e.ph_dur).sum();
        let total_out: f64 = after.iter().map(|e| e.ph_dur).sum();
        let scale = total_in.abs().max(f64::MIN_POSITIVE);
        let (a, b) = (note_onsets(before), note_onsets(after));
        let max_onset_error = if a.len() == b.len() {
            a.iter().zip(&b).map(|(x, y)| (x - y).abs() / scale).fold(0.0, f64::max)
        } else {
            f64::INFINITY
        };
        let total_error = (total_in - total_out).abs() / scale;
        Conservation {
            utt_id: utt_id.to_string(),
            events_in: before.len(),
            events_out: after.len(),
            total_in,
            total_out,
            notes: a.len(),
            max_onset_error,
            conserved: total_error <= CONSERVATION_TOL && max_onset_error <= CONSERVATION_TOL,
        }
    }
}

pub struct AdaptOutput {
    pub records: Vec<AnnotationRecord>,
    /// The input held one bare record rather than a manifest.
    pub single: bool,
    pub report: Vec<Conservation>,
}

impl AdaptOutput {
    pub fn to_json(&self) -> Result<String> {
        Ok(if self.single { write_annotation(&self.records[0])? } else { write_manifest(&self.records)? })
    }

    pub fn report_table(&self, strategy: Strategy) -> String {
        let mut out = format!("conservation ({strategy}):\n");
        let width = self.report.iter().map(|r| r.utt_id.chars().count()).max().unwrap_or(0).max(6);
        out.push_str(&format!(
            "{:<width$}  {:>6}  {:>6}  {:>10}  {:>10}  {:>5}  {:>10}  status\n",
            "utt_id", "in", "out", "total_in", "total_out", "notes", "onset_err"
        ));
        for r in &self.report {
            out.push_str(&format!(
                "{:<width$}  {:>6}  {:>6}  {:>10.6}  {:>10.6}  {:>5}  {:>10.2e}  {}\n",
                r.utt_id,
                r.events_in,
                r.events_out,
                r.total_in,
                r.total_out,
                r.notes,
                r.max_onset_error,
                if r.conserved { "ok" } else { "VIOLATED" }
            ));
        }
        out
    }
}

fn parse_input(text: &str) -> Result<(Vec<AnnotationRecord>, bool)> {
    let single = matches!(
        serde_json::from_str::<Value>(text.trim_start_matches('\u{feff}')),
        Ok(Value::Object(ref o)) if !o.contains_key("records")
    );
    let records = read_manifest(text)?;
    if records.is_empty() {
        return Err(InputError("annotation input holds no records".into()).into());
    }
    Ok((records, single))
}

/// Load `{"unit": [w1, w2, ...]}` against the lexicon's expansions.
pub fn load_ratio_file(path: &Path, lexicon: &Lexicon) -> Result<RatioTable> {
    let raw: BTreeMap<String, Vec<f64>> = serde_json::from_str(&read_input(path)?)
        .map_err(|e| InputError(format!("ratios {}: {e}", path.display())))?;
    let mut table = RatioTable::new();
    for (unit, weights) in raw {
        let expansion = lexicon
            .pinyin_unit(&unit)
            .ok_or_else(|| InputError(format!("ratios {}: unknown unit `{unit}`", path.display())))?;
        table.insert(&unit, expansion, &weights).with_context(|| format!("ratios {}", path.display()))?;
    }
    Ok(table)
}

fn passes_through(e: &PhonemeEvent) -> bool {
    e.note_midi == 0 || is_silence(&e.phoneme)
}

/// The units an aligner sees: every sung unit once, slur repeats folded in.
fn aligned_units(events: &[PhonemeEvent], lexicon: &Lexicon) -> Result<Vec<(String, Vec<String>)>> {
    let mut units = Vec::new();
    let mut prev: Option<&PhonemeEvent> = None;
    for e in events {
        if passes_through(e) {
            prev = None;
            continue;
        }
        let repeat = e.is_slur && prev.is_some_and(|p| p.phoneme == e.phoneme);
        if !repeat {
            let expansion = lexicon
                .pinyin_unit(&e.phoneme)
                .ok_or_else(|| InputError(format!("unknown Pinyin unit `{}`", e.phoneme)))?;
            units.push((e.phoneme.clone(), expansion.to_vec()));
        }
        prev = Some(e);
    }
    Ok(units)
}

fn alignment_ratios(record: &AnnotationRecord, dir: &Path, lexicon: &Lexicon) -> Result<Option<RatioTable>> {
    let path = dir.join(format!("{}.TextGrid", record.utterance_id));
    if !path.exists() {
        log::warn!("{}: no alignment at {}", record.utterance_id, path.display());
        return Ok(None);
    }
    let grid = read_textgrid(&path).with_context(|| format!("reading {}", path.display()))?;
    let tier = find_tier(&grid.tiers, &PHONE_TIER_NAMES)
        .ok_or_else(|| InputError(format!("{}: no phone tier", path.display())))?;
    Ok(Some(extract_ratios(tier, &aligned_units(&record.events, lexicon)?, ALIGNER_FRAME)))
}

pub fn run(text: &str, strategy: Strategy, sources: RatioSources, lexicon: &Lexicon) -> Result<AdaptOutput> {
    let (records, single) = parse_input(text)?;
    let tables: Vec<RatioTable> = match strategy {
        Strategy::Average => Vec::new(),
        Strategy::Proportional => {
            if sources.alignments.is_none() && sources.ratios.is_none() {
                return Err(InputError(
                    "proportional adaptation needs an alignment directory or a ratio file".into(),
                )
                .into());
            }
            let own: Vec<Option<RatioTable>> = match sources.alignments {
                Some(dir) => records.iter().map(|r| alignment_ratios(r, dir, lexicon)).collect::<Result<_>>()?,
                None => vec![None; records.len()],
            };
            let corpus = match sources.ratios {
                Some(path) => load_ratio_file(path, lexicon)?,
                None => RatioTable::average(own.iter().flatten()),
            };
            own.into_iter().map(|t| t.map_or_else(|| corpus.clone(), |t| t.or_else(&corpus))).collect()
        }
    };

    let mut adapted = Vec::with_capacity(records.len());
    let mut report = Vec::with_capacity(records.len());
    for (i, record) in records.iter().enumerate() {
        let events = match strategy {
            Strategy::Average => adapt_average(&record.events, lexicon),
            Strategy::Proportional => adapt_proportional(&record.events, lexicon, &tables[i]),
        }
        .with_context(|| format!("adapting `{}`", record.utterance_id))?;
        report.push(Conservation::measure(&record.utterance_id, &record.events, &events));
        adapted.push(AnnotationRecord { events, ..record.clone() });
    }
    Ok(AdaptOutput { records: adapted, single, report })
}
