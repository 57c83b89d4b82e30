//! Score transcoding and phoneme-level annotation adaptation.
//!
//! [`transform_score`] expands a syllable-level score into per-phone
//! sequences, repeating each unit's note pitch and note duration across its
//! phones. [`adapt_average`] and [`adapt_proportional`] rewrite
//! Pinyin-unit annotations (M4Singer style) into CMU-phone annotations.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formats::AlignmentTier;
use crate::lexicon::{is_cmu_vowel, Language, Lexicon, LexiconError, LyricToken};

/// Labels that mark silence or breath rather than a phone.
pub const SILENCE_LABELS: [&str; 8] = ["", "SP", "AP", "sil", "sp", "spn", "SIL", "<eps>"];

pub fn is_silence(label: &str) -> bool {
    SILENCE_LABELS.contains(&label)
}

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error("slur at event {0} has no preceding lyric")]
    OrphanSlur(usize),
    #[error("unknown pinyin unit `{0}`")]
    UnknownUnit(String),
    #[error("phoneme `{0}` is outside the inventory and has no substitute")]
    NoSubstitute(String),
    #[error("invalid ratio weights for `{unit}`: {reason}")]
    BadRatio { unit: String, reason: String },
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, ScoreError>;

/// Style token: 0 speech, 1 singing, 2 pseudo-singing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Style {
    Speech = 0,
    Singing = 1,
    PseudoSinging = 2,
}

impl Style {
    pub fn token(self) -> u8 {
        self as u8
    }

    pub fn from_token(token: u8) -> Option<Self> {
        match token {
            0 => Some(Style::Speech),
            1 => Some(Style::Singing),
            2 => Some(Style::PseudoSinging),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LyricUnit {
    Token(LyricToken),
    /// Continue the previous unit on a new note.
    Slur,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreEvent {
    pub unit: LyricUnit,
    /// MIDI note number, 0 for a rest.
    pub note_midi: u8,
    /// Seconds.
    pub note_dur: f64,
}

impl ScoreEvent {
    pub fn lyric(token: LyricToken, note_midi: u8, note_dur: f64) -> Self {
        ScoreEvent { unit: LyricUnit::Token(token), note_midi, note_dur }
    }

    pub fn slur(note_midi: u8, note_dur: f64) -> Self {
        ScoreEvent { unit: LyricUnit::Slur, note_midi, note_dur }
    }

    pub fn is_slur(&self) -> bool {
        matches!(self.unit, LyricUnit::Slur)
    }
}

/// One row of a phone-level annotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhonemeEvent {
    pub phoneme: String,
    pub ph_dur: f64,
    pub note_midi: u8,
    pub note_dur: f64,
    pub is_slur: bool,
    pub language: Language,
    pub style: Style,
}

impl PhonemeEvent {
    fn with_phone(&self, phoneme: &str, ph_dur: f64) -> Self {
        PhonemeEvent { phoneme: phoneme.to_string(), ph_dur, ..self.clone() }
    }

    fn passes_through(&self) -> bool {
        self.note_midi == 0 || is_silence(&self.phoneme)
    }
}

/// Phone-level output of the transformation processor: four equal-length lists.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TransformedScore {
    pub phonemes: Vec<String>,
    pub language_tokens: Vec<u8>,
    pub note_pitches: Vec<u8>,
    pub note_durs: Vec<f64>,
}

impl TransformedScore {
    pub fn len(&self) -> usize {
        self.phonemes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phonemes.is_empty()
    }

    fn push(&mut self, phone: &str, language: Language, note: u8, dur: f64) {
        self.phonemes.push(phone.to_string());
        self.language_tokens.push(language.token());
        self.note_pitches.push(note);
        self.note_durs.push(dur);
    }
}

/// The phone a slur sustains: the last vowel of the unit, or its last phone
/// when the unit has no vowel.
fn sustained_phone(phones: &[String]) -> &str {
    phones
        .iter()
        .rev()
        .find(|p| is_cmu_vowel(p))
        .or(phones.last())
        .map(String::as_str)
        .unwrap_or_default()
}

/// Expand a syllable-level score to phone level.
///
/// Every phone of a lyric unit repeats that unit's note and note duration.
/// A slur re-emits the sustained vowel of the preceding lyric with the slur's
/// own note.
pub fn transform_score(score: &[ScoreEvent], lexicon: &Lexicon) -> Result<TransformedScore> {
    let mut out = TransformedScore::default();
    let mut antecedent: Option<(String, Language)> = None;
    for (idx, event) in score.iter().enumerate() {
        match &event.unit {
            LyricUnit::Token(token) => {
                let phones = lexicon.token_phones(token)?;
                for p in &phones {
                    out.push(p, token.language, event.note_midi, event.note_dur);
                }
                antecedent = Some((sustained_phone(&phones).to_string(), token.language));
            }
            LyricUnit::Slur => {
                let (phone, language) = antecedent.as_ref().ok_or(ScoreError::OrphanSlur(idx))?;
                out.push(phone, *language, event.note_midi, event.note_dur);
            }
        }
    }
    Ok(out)
}

fn expansion<'a>(lexicon: &'a Lexicon, unit: &str) -> Result<&'a [String]> {
    lexicon.pinyin_unit(unit).ok_or_else(|| ScoreError::UnknownUnit(unit.to_string()))
}

/// Split every Pinyin unit into its CMU phones, dividing the unit's duration
/// equally. Notes, note durations, slur flags and tokens are copied.
pub fn adapt_average(events: &[PhonemeEvent], lexicon: &Lexicon) -> Result<Vec<PhonemeEvent>> {
    let mut out = Vec::with_capacity(events.len() * 2);
    for event in events {
        if event.passes_through() {
            out.push(event.clone());
            continue;
        }
        let phones = expansion(lexicon, &event.phoneme)?;
        let share = event.ph_dur / phones.len() as f64;
        out.extend(phones.iter().map(|p| event.with_phone(p, share)));
    }
    Ok(out)
}

/// Per-unit duration ratios over a unit's CMU expansion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioEntry {
    pub expansion: Vec<String>,
    /// `None` marks a unit whose alignment could not be trusted; consumers
    /// fall back to an equal split.
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RatioTable {
    pub entries: BTreeMap<String, RatioEntry>,
}

fn normalized(unit: &str, expansion: &[String], weights: &[f64]) -> Result<Vec<f64>> {
    let bad = |reason: String| ScoreError::BadRatio { unit: unit.to_string(), reason };
    if weights.len() != expansion.len() {
        return Err(bad(format!("{} weights for {} phones", weights.len(), expansion.len())));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(bad("weights must be finite and nonnegative".into()));
    }
    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 {
        return Err(bad("weights sum to zero".into()));
    }
    Ok(weights.iter().map(|w| w / sum).collect())
}

impl RatioTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert weights for `unit`, normalizing them to sum to one.
    pub fn insert(&mut self, unit: &str, expansion: &[String], weights: &[f64]) -> Result<()> {
        let weights = normalized(unit, expansion, weights)?;
        self.entries.insert(
            unit.to_string(),
            RatioEntry { expansion: expansion.to_vec(), weights: Some(weights) },
        );
        Ok(())
    }

    pub fn mark_fallback(&mut self, unit: &str, expansion: &[String]) {
        self.entries
            .entry(unit.to_string())
            .or_insert(RatioEntry { expansion: expansion.to_vec(), weights: None });
    }

    /// Weights for `unit` if present, trusted, and recorded for the same expansion.
    pub fn weights(&self, unit: &str, expansion: &[String]) -> Option<&[f64]> {
        self.entries
            .get(unit)
            .filter(|e| e.expansion == expansion)
            .and_then(|e| e.weights.as_deref())
    }

    /// Entries of `self`, with units missing or marked as fallback filled from `other`.
    pub fn or_else(&self, other: &RatioTable) -> RatioTable {
        let mut out = other.clone();
        for (unit, entry) in &self.entries {
            if entry.weights.is_some() || !out.entries.contains_key(unit) {
                out.entries.insert(unit.clone(), entry.clone());
            }
        }
        out
    }

    /// Corpus-level table: per unit, the mean of the trusted weights across tables.
    pub fn average<'a>(tables: impl IntoIterator<Item = &'a RatioTable>) -> RatioTable {
        let mut acc: BTreeMap<String, (Vec<String>, Vec<f64>, usize)> = BTreeMap::new();
        for table in tables {
            for (unit, entry) in &table.entries {
                let Some(w) = &entry.weights else { continue };
                let slot = acc
                    .entry(unit.clone())
                    .or_insert_with(|| (entry.expansion.clone(), vec![0.0; w.len()], 0));
                if slot.0 != entry.expansion {
                    continue;
                }
                for (s, x) in slot.1.iter_mut().zip(w) {
                    *s += x;
                }
                slot.2 += 1;
            }
        }
        let mut out = RatioTable::new();
        for (unit, (expansion, sum, n)) in acc {
            let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
            out.entries.insert(unit, RatioEntry { expansion, weights: Some(mean) });
        }
        out
    }
}

fn weights_or_equal(ratios: &RatioTable, unit: &str, phones: &[String]) -> Vec<f64> {
    match ratios.weights(unit, phones) {
        Some(w) => w.to_vec(),
        None => {
            log::warn!("no duration ratio for `{unit}`; splitting equally");
            vec![1.0 / phones.len() as f64; phones.len()]
        }
    }
}

/// Cut points along `[0, total]` from normalized weights; the last is exactly `total`.
fn cumulative_edges(total: f64, weights: &[f64]) -> Vec<f64> {
    let mut edges = Vec::with_capacity(weights.len() + 1);
    let mut acc = 0.0;
    edges.push(0.0);
    for w in &weights[..weights.len() - 1] {
        acc += w;
        edges.push(total * acc);
    }
    edges.push(total);
    edges
}

/// Split Pinyin units into CMU phones using alignment-derived duration ratios.
///
/// Initials keep their total duration, spread over their phones by ratio.
/// A final together with its following slur repetitions forms one span; the
/// span is spread over the final's phones by ratio and then cut at the
/// original note boundaries. The piece of a phone that continues past a
/// boundary is flagged as a slur and carries the next note. Total duration
/// and every note-boundary time are preserved.
pub fn adapt_proportional(
    events: &[PhonemeEvent],
    lexicon: &Lexicon,
    ratios: &RatioTable,
) -> Result<Vec<PhonemeEvent>> {
    let mut out = Vec::with_capacity(events.len() * 2);
    let mut i = 0;
    while i < events.len() {
        let head = &events[i];
        if head.passes_through() {
            out.push(head.clone());
            i += 1;
            continue;
        }
        let phones = expansion(lexicon, &head.phoneme)?;
        let weights = weights_or_equal(ratios, &head.phoneme, phones);

        if lexicon.is_initial(&head.phoneme) {
            let edges = cumulative_edges(head.ph_dur, &weights);
            for (k, p) in phones.iter().enumerate() {
                out.push(head.with_phone(p, edges[k + 1] - edges[k]));
            }
            i += 1;
            continue;
        }

        let mut j = i + 1;
        while j < events.len()
            && events[j].is_slur
            && events[j].phoneme == head.phoneme
            && !events[j].passes_through()
        {
            j += 1;
        }
        let group = &events[i..j];
        out.extend(split_final_span(group, phones, &weights)?);
        i = j;
    }
    Ok(out)
}

fn split_final_span(
    group: &[PhonemeEvent],
    phones: &[String],
    weights: &[f64],
) -> Result<Vec<PhonemeEvent>> {
    // note boundaries, relative to the span start
    let mut bounds = Vec::with_capacity(group.len() + 1);
    let mut acc = 0.0;
    bounds.push(0.0);
    for e in group {
        acc += e.ph_dur;
        bounds.push(acc);
    }
    let total = acc;
    let eps = 1e-12 * total.max(1e-300);
    let edges = cumulative_edges(total, weights);

    let mut pieces = Vec::with_capacity(phones.len() + group.len());
    for (k, phone) in phones.iter().enumerate() {
        let (start, end) = (edges[k], edges[k + 1]);
        let mut cuts = vec![start];
        cuts.extend(bounds[1..group.len()].iter().copied().filter(|&b| b > start + eps && b < end - eps));
        cuts.push(end);
        for (n, w) in cuts.windows(2).enumerate() {
            let dur = w[1] - w[0];
            if dur < -eps {
                return Err(ScoreError::Internal(format!(
                    "negative piece of `{phone}` ({dur}) while cutting at note boundaries"
                )));
            }
            if dur <= eps && end - start > eps {
                continue;
            }
            let mid = 0.5 * (w[0] + w[1]);
            let owner = bounds[1..].iter().position(|&b| mid < b).unwrap_or(group.len() - 1);
            let src = &group[owner];
            let mut piece = src.with_phone(phone, dur);
            piece.is_slur = if n > 0 { true } else if owner == 0 { src.is_slur } else { false };
            pieces.push(piece);
        }
    }
    Ok(pieces)
}

/// Derive per-unit ratios from an aligned CMU phone tier.
///
/// `expected` lists the Pinyin units of the utterance in order with their
/// CMU expansions. Silence labels are ignored. When the aligned phone count
/// differs from the expected total, every unit is marked as fallback; when
/// counts agree, only units whose labels differ are. Aligned phones shorter
/// than `frame` are floored to one frame before normalizing. Units that
/// occur several times get the mean of their per-occurrence ratios.
pub fn extract_ratios(
    alignment: &AlignmentTier,
    expected: &[(String, Vec<String>)],
    frame: f64,
) -> RatioTable {
    let aligned: Vec<(&str, f64)> = alignment
        .intervals
        .iter()
        .filter(|iv| !is_silence(&iv.label))
        .map(|iv| (iv.label.as_str(), iv.end - iv.start))
        .collect();
    let total: usize = expected.iter().map(|(_, e)| e.len()).sum();

    let mut table = RatioTable::new();
    if aligned.len() != total {
        log::warn!(
            "tier `{}`: {} aligned phones, {} expected; using fallback ratios",
            alignment.name,
            aligned.len(),
            total
        );
        for (unit, exp) in expected {
            table.mark_fallback(unit, exp);
        }
        return table;
    }

    let mut per_unit: HashMap<&str, Vec<Vec<f64>>> = HashMap::new();
    let mut rejected: HashSet<&str> = HashSet::new();
    let mut pos = 0;
    for (unit, exp) in expected {
        let slice = &aligned[pos..pos + exp.len()];
        pos += exp.len();
        let matches = slice
            .iter()
            .zip(exp)
            .all(|((label, _), want)| label.trim_end_matches(|c: char| c.is_ascii_digit()).eq_ignore_ascii_case(want));
        if !matches {
            rejected.insert(unit);
            continue;
        }
        let durs: Vec<f64> = slice.iter().map(|(_, d)| d.max(frame)).collect();
        let sum: f64 = durs.iter().sum();
        per_unit.entry(unit).or_default().push(durs.iter().map(|d| d / sum).collect());
    }

    for (unit, exp) in expected {
        if rejected.contains(unit.as_str()) {
            table.mark_fallback(unit, exp);
            continue;
        }
        if table.entries.contains_key(unit) {
            continue;
        }
        let samples = &per_unit[unit.as_str()];
        let n = samples.len() as f64;
        let mean: Vec<f64> = (0..exp.len()).map(|k| samples.iter().map(|s| s[k]).sum::<f64>() / n).collect();
        table.entries.insert(unit.clone(), RatioEntry { expansion: exp.clone(), weights: Some(mean) });
    }
    table
}

/// Substitutions for English phones that Mandarin lacks.
pub fn default_substitutions() -> HashMap<String, String> {
    [("TH", "S"), ("DH", "D"), ("V", "W"), ("OY", "AO"), ("IH", "IY"), ("Y", "IY"), ("ZH", "R")]
        .into_iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Substitution {
    pub index: usize,
    pub from: String,
    pub to: String,
}

/// Replace phones outside `inventory` using `table`; durations and notes are kept.
pub fn substitute_missing(
    events: &[PhonemeEvent],
    table: &HashMap<String, String>,
    inventory: &HashSet<String>,
) -> Result<(Vec<PhonemeEvent>, Vec<Substitution>)> {
    let mut log = Vec::new();
    let mut out = Vec::with_capacity(events.len());
    for (index, event) in events.iter().enumerate() {
        if inventory.contains(&event.phoneme) || event.passes_through() {
            out.push(event.clone());
            continue;
        }
        let to = table.get(&event.phoneme).ok_or_else(|| ScoreError::NoSubstitute(event.phoneme.clone()))?;
        log.push(Substitution { index, from: event.phoneme.clone(), to: to.clone() });
        out.push(PhonemeEvent { phoneme: to.clone(), ..event.clone() });
    }
    Ok((out, log))
}

/// Start times of the notes in a phone sequence.
///
/// A note starts where the (pitch, note duration) pair changes or where the
/// running note has used up its duration.
pub fn note_onsets(events: &[PhonemeEvent]) -> Vec<f64> {
    let mut onsets = Vec::new();
    let mut t = 0.0;
    let mut current: Option<(u8, f64, f64)> = None;
    for e in events {
        let starts = match current {
            None => true,
            Some((midi, dur, start)) => {
                midi != e.note_midi || dur != e.note_dur || t >= start + dur - 1e-9 * dur.max(1.0)
            }
        };
        if starts {
            onsets.push(t);
            current = Some((e.note_midi, e.note_dur, t));
        }
        t += e.ph_dur;
    }
    onsets
}

/// Round half away from zero to `places` decimals.
pub fn round_to(value: f64, places: i32) -> f64 {
    let scale = 10f64.powi(places);
    (value * scale).round() / scale
}
