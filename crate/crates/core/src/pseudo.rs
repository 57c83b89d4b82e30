//! Pseudo-singing: aligned speech resynthesized on a melody, plus the
//! matching singing-style annotation. Also plain speech annotation.

use std::collections::HashSet;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::{
    analyze, average_f0_by_segments, extract_f0, hz_from_midi, replace_f0, synthesize, DspError, F0Contour,
    NoteSegment, VocoderConfig, Waveform,
};
use crate::formats::{find_tier, AlignmentTier, AnnotationRecord, FormatError, Interval};
use crate::lexicon::{is_han, Language};
use crate::score::{is_silence, PhonemeEvent, Style};

const DEFAULT_BANK: &str = include_str!("../data/melodies.json");

pub const WORD_TIER_NAMES: [&str; 2] = ["words", "word"];
pub const PHONE_TIER_NAMES: [&str; 2] = ["phones", "phone"];

#[derive(Debug, Error)]
pub enum PseudoError {
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("melody bank is empty")]
    EmptyBank,
    #[error("melody `{id}`: {reason}")]
    InvalidTemplate { id: String, reason: String },
    #[error("duplicate melody id `{0}`")]
    DuplicateMelody(String),
    #[error("alignment ends at {alignment:.3} s but audio lasts {audio:.3} s")]
    DurationMismatch { alignment: f64, audio: f64 },
    #[error("alignment has no `{0}` tier")]
    MissingTier(&'static str),
    #[error("melody bank: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, PseudoError>;

/// A melody as (MIDI note, relative length) steps; note 0 is a rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTemplate", into = "RawTemplate")]
pub struct MelodyTemplate {
    id: String,
    steps: Vec<(u8, f64)>,
}

#[derive(Serialize, Deserialize)]
struct RawTemplate {
    id: String,
    steps: Vec<(u8, f64)>,
}

impl TryFrom<RawTemplate> for MelodyTemplate {
    type Error = PseudoError;

    fn try_from(raw: RawTemplate) -> Result<Self> {
        MelodyTemplate::new(raw.id, raw.steps)
    }
}

impl From<MelodyTemplate> for RawTemplate {
    fn from(t: MelodyTemplate) -> Self {
        RawTemplate { id: t.id, steps: t.steps }
    }
}

impl MelodyTemplate {
    /// Relative lengths are rescaled to sum to one.
    pub fn new(id: impl Into<String>, steps: Vec<(u8, f64)>) -> Result<Self> {
        let id = id.into();
        let invalid = |reason: String| PseudoError::InvalidTemplate { id: id.clone(), reason };
        if steps.is_empty() {
            return Err(invalid("no steps".into()));
        }
        if let Some((note, len)) = steps.iter().find(|(n, l)| *n > 127 || !(*l > 0.0 && l.is_finite())) {
            return Err(invalid(format!("bad step ({note}, {len})")));
        }
        let total: f64 = steps.iter().map(|s| s.1).sum();
        let steps = if (total - 1.0).abs() < 1e-12 {
            steps
        } else {
            steps.into_iter().map(|(n, l)| (n, l / total)).collect()
        };
        Ok(MelodyTemplate { id, steps })
    }

    /// A melody that reproduces per-segment notes over `[0, total)`; gaps
    /// between segments become rests.
    pub fn from_segments(id: impl Into<String>, segments: &[NoteSegment], total: f64) -> Result<Self> {
        let mut steps = Vec::new();
        let mut t = 0.0;
        for s in segments {
            if s.segment.start > t {
                steps.push((0, s.segment.start - t));
            }
            steps.push((s.note, s.segment.duration()));
            t = s.segment.end;
        }
        if total > t {
            steps.push((0, total - t));
        }
        MelodyTemplate::new(id, steps)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn steps(&self) -> &[(u8, f64)] {
        &self.steps
    }

    /// Step index for each of `n_frames` frames.
    fn step_frames(&self, n_frames: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(n_frames);
        let last = self.steps.len() - 1;
        for (i, &(_, len)) in self.steps.iter().enumerate() {
            let count = if i == last {
                n_frames.saturating_sub(out.len())
            } else {
                ((len * n_frames as f64).round() as usize).min(n_frames - out.len())
            };
            out.extend(std::iter::repeat(i).take(count));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MelodyBank {
    pub templates: Vec<MelodyTemplate>,
}

impl MelodyBank {
    pub fn new(templates: Vec<MelodyTemplate>) -> Result<Self> {
        let mut seen = HashSet::new();
        for t in &templates {
            if !seen.insert(t.id.as_str()) {
                return Err(PseudoError::DuplicateMelody(t.id.clone()));
            }
        }
        Ok(MelodyBank { templates })
    }

    /// `{"templates": [{"id": .., "steps": [[midi, length], ..]}, ..]}`
    pub fn from_json(text: &str) -> Result<Self> {
        let bank: MelodyBank = serde_json::from_str(text)?;
        MelodyBank::new(bank.templates)
    }

    pub fn load(path: &Path) -> Result<Self> {
        MelodyBank::from_json(&std::fs::read_to_string(path)?)
    }

    /// The ten shipped templates.
    pub fn default_bank() -> Self {
        MelodyBank::from_json(DEFAULT_BANK).expect("bundled melody bank is valid")
    }

    pub fn get(&self, id: &str) -> Option<&MelodyTemplate> {
        self.templates.iter().find(|t| t.id == id)
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }
}

/// Step `i` spans `round(len_i * n_frames)` frames; the last step takes
/// whatever remains.
pub fn render_melody(template: &MelodyTemplate, n_frames: usize, hop: f64) -> F0Contour {
    let values = template
        .step_frames(n_frames)
        .into_iter()
        .map(|i| match template.steps[i].0 {
            0 => 0.0,
            note => hz_from_midi(note as f64),
        })
        .collect();
    F0Contour::new(hop, values)
}

/// MIDI note of the melody step active at each frame.
fn melody_notes(template: &MelodyTemplate, n_frames: usize) -> Vec<u8> {
    template.step_frames(n_frames).into_iter().map(|i| template.steps[i].0).collect()
}

/// Keep `melody` only where `source` is voiced.
pub fn mask_by_voicing(melody: &F0Contour, source: &F0Contour) -> F0Contour {
    let values = melody
        .values
        .iter()
        .zip(&source.values)
        .map(|(&m, &s)| if s > 0.0 { m } else { 0.0 })
        .collect();
    F0Contour::new(melody.hop, values)
}

pub fn choose_melody(bank: &MelodyBank, seed: u64) -> Result<&MelodyTemplate> {
    if bank.is_empty() {
        return Err(PseudoError::EmptyBank);
    }
    let i = ChaCha8Rng::seed_from_u64(seed).gen_range(0..bank.len());
    Ok(&bank.templates[i])
}

/// Identity fields copied onto generated records.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct UtteranceInfo {
    pub utterance_id: String,
    pub audio_path: String,
    pub singer_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PseudoConfig {
    pub vocoder: VocoderConfig,
    /// Largest tolerated gap between alignment end and audio duration.
    pub max_misalignment: f64,
}

impl Default for PseudoConfig {
    fn default() -> Self {
        PseudoConfig { vocoder: VocoderConfig::default(), max_misalignment: 0.05 }
    }
}

/// A non-silent phone and the word it belongs to.
struct AlignedPhone {
    phone: Interval,
    word: usize,
}

struct Alignment {
    words: Vec<Interval>,
    phones: Vec<AlignedPhone>,
}

fn strip_stress(label: &str) -> String {
    label.trim().trim_end_matches(|c: char| c.is_ascii_digit()).to_uppercase()
}

fn word_language(word: &str) -> Language {
    if word.chars().any(is_han) {
        Language::Mandarin
    } else {
        Language::English
    }
}

fn prepare_alignment(waveform: &Waveform, tiers: &[AlignmentTier], max_gap: f64) -> Result<Alignment> {
    let word_tier = find_tier(tiers, &WORD_TIER_NAMES).ok_or(PseudoError::MissingTier("words"))?;
    let phone_tier = find_tier(tiers, &PHONE_TIER_NAMES).ok_or(PseudoError::MissingTier("phones"))?;
    word_tier.validate()?;
    phone_tier.validate()?;
    let end = word_tier.end_time().max(phone_tier.end_time());
    if (end - waveform.duration()).abs() > max_gap {
        return Err(PseudoError::DurationMismatch { alignment: end, audio: waveform.duration() });
    }

    let mut words: Vec<Interval> = word_tier.intervals.iter().filter(|iv| !is_silence(iv.label.trim())).cloned().collect();
    let mut phones = Vec::new();
    for iv in phone_tier.intervals.iter().filter(|iv| !is_silence(iv.label.trim())) {
        let mid = iv.midpoint();
        let word = match words.iter().position(|w| w.start <= mid && mid < w.end) {
            Some(w) => w,
            None => {
                log::warn!("phone `{}` at {:.3}s lies outside every word; treating it as its own word", iv.label, iv.start);
                words.push(Interval { start: iv.start, end: iv.end, label: iv.label.clone() });
                words.len() - 1
            }
        };
        phones.push(AlignedPhone { phone: Interval { label: strip_stress(&iv.label), ..iv.clone() }, word });
    }
    Ok(Alignment { words, phones })
}

fn finish_record(info: &UtteranceInfo, events: Vec<PhonemeEvent>) -> Result<AnnotationRecord> {
    let record = AnnotationRecord {
        utterance_id: info.utterance_id.clone(),
        audio_path: info.audio_path.clone(),
        singer_id: info.singer_id.clone(),
        voice_part: None,
        events,
    };
    record.validate()?;
    Ok(record)
}

/// Speech-style annotation: one event per aligned phone, each carrying its
/// word's averaged pitch and duration.
pub fn annotate_speech(
    waveform: &Waveform,
    tiers: &[AlignmentTier],
    info: &UtteranceInfo,
    cfg: &PseudoConfig,
) -> Result<AnnotationRecord> {
    let alignment = prepare_alignment(waveform, tiers, cfg.max_misalignment)?;
    let f0 = extract_f0(waveform, &cfg.vocoder.f0)?;
    let notes = average_f0_by_segments(&f0, &alignment.words);
    let events = alignment
        .phones
        .iter()
        .map(|p| {
            let word = &notes[p.word];
            PhonemeEvent {
                phoneme: p.phone.label.clone(),
                ph_dur: p.phone.duration(),
                note_midi: word.note,
                note_dur: word.segment.duration(),
                is_slur: false,
                language: word_language(&word.segment.label),
                style: Style::Speech,
            }
        })
        .collect();
    finish_record(info, events)
}

/// Resynthesize `waveform` on `melody` and annotate the result.
///
/// The melody is rendered over every analysis frame and applied only where
/// the source is voiced. Each phone takes the melody note at its midpoint;
/// consecutive phones of one word sharing a note share its duration.
pub fn make_pseudo_singing(
    waveform: &Waveform,
    tiers: &[AlignmentTier],
    melody: &MelodyTemplate,
    seed: u64,
    info: &UtteranceInfo,
    cfg: &PseudoConfig,
) -> Result<(Waveform, AnnotationRecord)> {
    let alignment = prepare_alignment(waveform, tiers, cfg.max_misalignment)?;
    let analysis = analyze(waveform, &cfg.vocoder)?;
    let n_frames = analysis.n_frames();
    let rendered = render_melody(melody, n_frames, analysis.f0.hop);
    let target = mask_by_voicing(&rendered, &analysis.f0);
    let mut out = synthesize(&replace_f0(&analysis, &target)?, waveform.sample_rate, seed)?;
    out.samples.resize(waveform.len(), 0.0);
    let peak = out.samples.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    if peak > 0.99 {
        log::debug!("{}: scaling output down from peak {peak:.3}", info.utterance_id);
        out.samples.iter_mut().for_each(|s| *s *= 0.99 / peak);
    }

    let frame_notes = melody_notes(melody, n_frames);
    let mut events: Vec<PhonemeEvent> = alignment
        .phones
        .iter()
        .map(|p| PhonemeEvent {
            phoneme: p.phone.label.clone(),
            ph_dur: p.phone.duration(),
            note_midi: frame_notes[rendered.frame_at(p.phone.midpoint())],
            note_dur: 0.0,
            is_slur: false,
            language: word_language(&alignment.words[p.word].label),
            style: Style::PseudoSinging,
        })
        .collect();

    let mut start = 0;
    while start < events.len() {
        let key = (alignment.phones[start].word, events[start].note_midi);
        let mut end = start + 1;
        while end < events.len() && (alignment.phones[end].word, events[end].note_midi) == key {
            end += 1;
        }
        let span: f64 = events[start..end].iter().map(|e| e.ph_dur).sum();
        events[start..end].iter_mut().for_each(|e| e.note_dur = span);
        start = end;
    }
    Ok((out, finish_record(info, events)?))
}
