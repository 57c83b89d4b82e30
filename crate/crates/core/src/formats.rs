//! On-disk formats: Praat TextGrids, annotation JSON, dataset manifests and
//! voice-conversion job planning.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::lexicon::Language;
use crate::score::{PhonemeEvent, Style};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("TextGrid: {0}")]
    TextGrid(String),
    #[error("TextGrid tier `{tier}`: {message}")]
    Tier { tier: String, message: String },
    #[error("annotation validation failed:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),
    #[error("unknown voice part `{0}`")]
    UnknownVoicePart(String),
    #[error("record `{0}` has no voice part")]
    MissingVoicePart(String),
    #[error("duplicate utterance id `{0}`")]
    DuplicateId(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, FormatError>;

// ---------------------------------------------------------------------------
// TextGrid

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
    pub label: String,
}

impl Interval {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.start + self.end)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentTier {
    pub name: String,
    pub intervals: Vec<Interval>,
}

impl AlignmentTier {
    /// Sorted, non-overlapping, each interval with start < end.
    pub fn validate(&self) -> Result<()> {
        let err = |message: String| FormatError::Tier { tier: self.name.clone(), message };
        for (i, iv) in self.intervals.iter().enumerate() {
            if !(iv.start < iv.end) {
                return Err(err(format!("interval {} has start {} >= end {}", i + 1, iv.start, iv.end)));
            }
            if i > 0 && iv.start < self.intervals[i - 1].end - 1e-9 {
                return Err(err(format!("interval {} overlaps its predecessor", i + 1)));
            }
        }
        Ok(())
    }

    pub fn end_time(&self) -> f64 {
        self.intervals.last().map_or(0.0, |iv| iv.end)
    }
}

pub fn find_tier<'a>(tiers: &'a [AlignmentTier], names: &[&str]) -> Option<&'a AlignmentTier> {
    names.iter().find_map(|n| tiers.iter().find(|t| t.name.eq_ignore_ascii_case(n)))
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Str(String),
    Flag,
}

/// Decode raw TextGrid bytes: UTF-16 (either order) when a BOM says so,
/// UTF-8 otherwise.
pub fn decode_text(bytes: &[u8]) -> Result<String> {
    let utf16 = |le: bool| {
        let units: Vec<u16> = bytes[2..]
            .chunks_exact(2)
            .map(|c| if le { u16::from_le_bytes([c[0], c[1]]) } else { u16::from_be_bytes([c[0], c[1]]) })
            .collect();
        String::from_utf16(&units).map_err(|e| FormatError::TextGrid(format!("bad UTF-16: {e}")))
    };
    match bytes {
        [0xFF, 0xFE, ..] => utf16(true),
        [0xFE, 0xFF, ..] => utf16(false),
        [0xEF, 0xBB, 0xBF, rest @ ..] => {
            String::from_utf8(rest.to_vec()).map_err(|e| FormatError::TextGrid(format!("bad UTF-8: {e}")))
        }
        _ => String::from_utf8(bytes.to_vec()).map_err(|e| FormatError::TextGrid(format!("bad UTF-8: {e}"))),
    }
}

/// Praat reads text files as a stream of numbers, quoted strings and
/// `<flags>`; everything else (keys, `=`, `[n]:` indices) is decoration.
fn tokenize(text: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '"' {
            let mut s = String::new();
            i += 1;
            loop {
                match chars.get(i) {
                    None => return Err(FormatError::TextGrid("unterminated string".into())),
                    Some('"') if chars.get(i + 1) == Some(&'"') => {
                        s.push('"');
                        i += 2;
                    }
                    Some('"') => {
                        i += 1;
                        break;
                    }
                    Some(&ch) => {
                        s.push(ch);
                        i += 1;
                    }
                }
            }
            tokens.push(Token::Str(s));
        } else if c == '<' {
            while i < chars.len() && chars[i] != '>' {
                i += 1;
            }
            i += 1;
            tokens.push(Token::Flag);
        } else if c == '[' {
            while i < chars.len() && chars[i] != ']' {
                i += 1;
            }
            i += 1;
        } else if c == '!' {
            // comment to end of line
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
        } else if c.is_ascii_digit() || ((c == '-' || c == '+' || c == '.') && chars.get(i + 1).is_some_and(|n| n.is_ascii_digit() || *n == '.')) {
            let start = i;
            while i < chars.len() && !chars[i].is_whitespace() {
                i += 1;
            }
            let raw: String = chars[start..i].iter().collect();
            let value = raw
                .parse::<f64>()
                .map_err(|_| FormatError::TextGrid(format!("bad number `{raw}`")))?;
            tokens.push(Token::Num(value));
        } else {
            while i < chars.len() && !chars[i].is_whitespace() && chars[i] != '"' {
                i += 1;
            }
        }
    }
    Ok(tokens)
}

struct Cursor {
    tokens: Vec<Token>,
    pos: usize,
}

impl Cursor {
    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn num(&mut self, what: &str) -> std::result::Result<f64, String> {
        match self.next() {
            Some(Token::Num(v)) => Ok(v),
            Some(other) => Err(format!("expected {what}, found {other:?}")),
            None => Err(format!("unexpected end of file reading {what}")),
        }
    }

    fn string(&mut self, what: &str) -> std::result::Result<String, String> {
        match self.next() {
            Some(Token::Str(s)) => Ok(s),
            Some(other) => Err(format!("expected {what}, found {other:?}")),
            None => Err(format!("unexpected end of file reading {what}")),
        }
    }
}

/// Parsed TextGrid: global extent and its interval tiers.
#[derive(Debug, Clone, PartialEq)]
pub struct TextGrid {
    pub xmin: f64,
    pub xmax: f64,
    pub tiers: Vec<AlignmentTier>,
}

impl FromStr for TextGrid {
    type Err = FormatError;

    fn from_str(text: &str) -> Result<Self> {
        let mut cur = Cursor { tokens: tokenize(text)?, pos: 0 };
        let head = |m: String| FormatError::TextGrid(m);
        let file_type = cur.string("file type").map_err(head)?;
        let object = cur.string("object class").map_err(head)?;
        if file_type != "ooTextFile" || object != "TextGrid" {
            return Err(FormatError::TextGrid(format!("not a TextGrid (`{file_type}` / `{object}`)")));
        }
        let xmin = cur.num("xmin").map_err(head)?;
        let xmax = cur.num("xmax").map_err(head)?;
        if xmin > xmax {
            return Err(FormatError::TextGrid(format!("xmin {xmin} > xmax {xmax}")));
        }
        let mut tiers = Vec::new();
        match cur.next() {
            Some(Token::Flag) => {}
            _ => return Ok(TextGrid { xmin, xmax, tiers }),
        }
        let n_tiers = cur.num("tier count").map_err(head)? as usize;
        for t in 0..n_tiers {
            let class = cur.string("tier class").map_err(head)?;
            let name = cur.string("tier name").map_err(head)?;
            let err = |message: String| FormatError::Tier { tier: name.clone(), message };
            let t_min = cur.num("tier xmin").map_err(err)?;
            let t_max = cur.num("tier xmax").map_err(err)?;
            if t_min > t_max {
                return Err(err(format!("xmin {t_min} > xmax {t_max}")));
            }
            let count = cur.num("element count").map_err(err)?;
            if count < 0.0 || count.fract() != 0.0 {
                return Err(err(format!("invalid element count {count}")));
            }
            let count = count as usize;
            match class.as_str() {
                "IntervalTier" => {
                    let mut intervals = Vec::with_capacity(count);
                    for k in 0..count {
                        let what = |f: &str| format!("interval {} {f}", k + 1);
                        let start = cur.num(&what("xmin")).map_err(|m| err(format!("count mismatch: {m}")))?;
                        let end = cur.num(&what("xmax")).map_err(|m| err(format!("count mismatch: {m}")))?;
                        let label = cur.string(&what("text")).map_err(|m| err(format!("count mismatch: {m}")))?;
                        intervals.push(Interval { start, end, label });
                    }
                    let tier = AlignmentTier { name: name.clone(), intervals };
                    tier.validate()?;
                    tiers.push(tier);
                }
                "TextTier" => {
                    log::warn!("skipping point tier `{name}` (tier {})", t + 1);
                    for k in 0..count {
                        cur.num(&format!("point {} time", k + 1)).map_err(err)?;
                        cur.string(&format!("point {} mark", k + 1)).map_err(err)?;
                    }
                }
                other => return Err(err(format!("unknown tier class `{other}`"))),
            }
        }
        if cur.pos < cur.tokens.len() {
            return Err(FormatError::TextGrid(format!(
                "{} trailing values after the declared {n_tiers} tiers",
                cur.tokens.len() - cur.pos
            )));
        }
        Ok(TextGrid { xmin, xmax, tiers })
    }
}

/// Interval tiers of a long- or short-form TextGrid.
pub fn parse_textgrid(text: &str) -> Result<Vec<AlignmentTier>> {
    Ok(text.parse::<TextGrid>()?.tiers)
}

pub fn read_textgrid(path: &Path) -> Result<TextGrid> {
    decode_text(&fs::read(path)?)?.parse()
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

impl TextGrid {
    pub fn from_tiers(tiers: Vec<AlignmentTier>) -> Self {
        let xmin = tiers.iter().filter_map(|t| t.intervals.first()).map(|iv| iv.start).fold(0.0, f64::min);
        let xmax = tiers.iter().map(AlignmentTier::end_time).fold(0.0, f64::max);
        TextGrid { xmin, xmax, tiers }
    }

    /// Long ("text") form, as Praat writes it.
    pub fn to_long_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "File type = \"ooTextFile\"\nObject class = \"TextGrid\"\n");
        let _ = writeln!(s, "xmin = {}\nxmax = {}\ntiers? <exists>\nsize = {}\nitem []:", self.xmin, self.xmax, self.tiers.len());
        for (t, tier) in self.tiers.iter().enumerate() {
            let t_min = tier.intervals.first().map_or(self.xmin, |iv| iv.start);
            let t_max = tier.intervals.last().map_or(self.xmax, |iv| iv.end);
            let _ = writeln!(s, "    item [{}]:", t + 1);
            let _ = writeln!(s, "        class = \"IntervalTier\"\n        name = {}", quote(&tier.name));
            let _ = writeln!(s, "        xmin = {t_min}\n        xmax = {t_max}");
            let _ = writeln!(s, "        intervals: size = {}", tier.intervals.len());
            for (k, iv) in tier.intervals.iter().enumerate() {
                let _ = writeln!(s, "        intervals [{}]:", k + 1);
                let _ = writeln!(s, "            xmin = {}\n            xmax = {}", iv.start, iv.end);
                let _ = writeln!(s, "            text = {}", quote(&iv.label));
            }
        }
        s
    }
}

// ---------------------------------------------------------------------------
// Voice parts and conversion planning

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VoicePart {
    Bass,
    Baritone,
    Tenor,
    Alto,
    Soprano,
}

impl VoicePart {
    pub const ALL: [VoicePart; 5] =
        [VoicePart::Bass, VoicePart::Baritone, VoicePart::Tenor, VoicePart::Alto, VoicePart::Soprano];

    fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            VoicePart::Bass => "Bass",
            VoicePart::Baritone => "Baritone",
            VoicePart::Tenor => "Tenor",
            VoicePart::Alto => "Alto",
            VoicePart::Soprano => "Soprano",
        }
    }
}

impl FromStr for VoicePart {
    type Err = FormatError;

    /// Full names in any case, plus the dataset abbreviations S, A, T, B1 (bass), B2 (baritone).
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "bass" | "b1" => VoicePart::Bass,
            "baritone" | "b2" => VoicePart::Baritone,
            "tenor" | "t" => VoicePart::Tenor,
            "alto" | "a" => VoicePart::Alto,
            "soprano" | "s" => VoicePart::Soprano,
            _ => return Err(FormatError::UnknownVoicePart(s.to_string())),
        })
    }
}

/// Semitone shifts, rows = source part, columns = target part, in
/// Bass, Baritone, Tenor, Alto, Soprano order.
pub const PITCH_SHIFT_TABLE: [[i32; 5]; 5] = [
    [0, 4, 8, 12, 12],
    [-4, 0, 4, 8, 8],
    [-8, -4, 0, 4, 8],
    [-12, -8, -4, 0, 4],
    [-12, -8, -8, -4, 0],
];

pub fn plan_conversion(source: VoicePart, target: VoicePart) -> i32 {
    PITCH_SHIFT_TABLE[source.index()][target.index()]
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetSinger {
    pub singer_id: String,
    pub voice_part: VoicePart,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversionJob {
    pub source_utterance: String,
    pub source_audio: String,
    pub source_part: VoicePart,
    pub target_part: VoicePart,
    pub target_singer: String,
    pub pitch_shift_semitones: i32,
}

/// Every source utterance paired with every target singer.
pub fn build_job_manifest(sources: &[AnnotationRecord], targets: &[TargetSinger]) -> Result<Vec<ConversionJob>> {
    let mut jobs = Vec::with_capacity(sources.len() * targets.len());
    for src in sources {
        let part = src.voice_part.ok_or_else(|| FormatError::MissingVoicePart(src.utterance_id.clone()))?;
        for target in targets {
            jobs.push(ConversionJob {
                source_utterance: src.utterance_id.clone(),
                source_audio: src.audio_path.clone(),
                source_part: part,
                target_part: target.voice_part,
                target_singer: target.singer_id.clone(),
                pitch_shift_semitones: plan_conversion(part, target.voice_part),
            });
        }
    }
    Ok(jobs)
}

// ---------------------------------------------------------------------------
// Annotation records

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationRecord {
    pub utterance_id: String,
    pub audio_path: String,
    pub singer_id: String,
    pub voice_part: Option<VoicePart>,
    pub events: Vec<PhonemeEvent>,
}

impl AnnotationRecord {
    pub fn total_duration(&self) -> f64 {
        self.events.iter().map(|e| e.ph_dur).sum()
    }

    /// Invariant check without a round trip through JSON.
    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        if self.utterance_id.is_empty() {
            errors.push("utt_id: must be nonempty".to_string());
        }
        if self.events.is_empty() {
            errors.push("phs: record has no events".to_string());
        }
        for (i, e) in self.events.iter().enumerate() {
            if !(e.ph_dur > 0.0 && e.ph_dur.is_finite()) {
                errors.push(format!("ph_dur[{i}]: {} is not a positive duration", e.ph_dur));
            }
            if !(e.note_dur > 0.0 && e.note_dur.is_finite()) {
                errors.push(format!("notes_dur[{i}]: {} is not a positive duration", e.note_dur));
            }
            if e.note_midi > 127 {
                errors.push(format!("notes[{i}]: {} is not a MIDI note", e.note_midi));
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(FormatError::Validation(errors))
        }
    }

    pub fn to_json_value(&self) -> Value {
        let col = |f: &dyn Fn(&PhonemeEvent) -> Value| Value::Array(self.events.iter().map(f).collect());
        json!({
            "utt_id": self.utterance_id,
            "audio": self.audio_path,
            "singer": self.singer_id,
            "voice_part": self.voice_part.map(VoicePart::name),
            "phs": col(&|e| json!(e.phoneme)),
            "is_slur": col(&|e| json!(u8::from(e.is_slur))),
            "ph_dur": col(&|e| json!(e.ph_dur)),
            "notes": col(&|e| json!(e.note_midi)),
            "notes_dur": col(&|e| json!(e.note_dur)),
            "lang": col(&|e| json!(e.language.token())),
            "style": col(&|e| json!(e.style.token())),
        })
    }

    /// Validate a JSON object and build a record, reporting every problem at once.
    pub fn from_json_value(value: &Value) -> Result<Self> {
        let mut errors = Vec::new();
        let Some(obj) = value.as_object() else {
            return Err(FormatError::Validation(vec!["record is not a JSON object".into()]));
        };
        let text = |key: &str, errors: &mut Vec<String>| -> String {
            match obj.get(key) {
                Some(Value::String(s)) => s.clone(),
                Some(_) => {
                    errors.push(format!("{key}: expected a string"));
                    String::new()
                }
                None => {
                    errors.push(format!("{key}: missing field"));
                    String::new()
                }
            }
        };
        let utterance_id = text("utt_id", &mut errors);
        if obj.contains_key("utt_id") && utterance_id.is_empty() {
            errors.push("utt_id: must be nonempty".into());
        }
        let audio_path = text("audio", &mut errors);
        let singer_id = text("singer", &mut errors);
        let voice_part = match obj.get("voice_part") {
            None => {
                errors.push("voice_part: missing field".into());
                None
            }
            Some(Value::Null) => None,
            Some(Value::String(s)) => match s.parse::<VoicePart>() {
                Ok(p) => Some(p),
                Err(_) => {
                    errors.push(format!("voice_part: unknown voice part `{s}`"));
                    None
                }
            },
            Some(_) => {
                errors.push("voice_part: expected a string or null".into());
                None
            }
        };

        let array = |key: &str, errors: &mut Vec<String>| -> Option<&Vec<Value>> {
            match obj.get(key) {
                Some(Value::Array(a)) => Some(a),
                Some(_) => {
                    errors.push(format!("{key}: expected an array"));
                    None
                }
                None => {
                    errors.push(format!("{key}: missing field"));
                    None
                }
            }
        };
        let phs = array("phs", &mut errors);
        let is_slur = array("is_slur", &mut errors);
        let ph_dur = array("ph_dur", &mut errors);
        let notes = array("notes", &mut errors);
        let notes_dur = array("notes_dur", &mut errors);
        let lang = array("lang", &mut errors);
        let style = array("style", &mut errors);

        let columns = [("phs", phs), ("is_slur", is_slur), ("ph_dur", ph_dur), ("notes", notes), ("notes_dur", notes_dur), ("lang", lang), ("style", style)];
        let n = phs.map_or(0, Vec::len);
        let mut shape_ok = columns.iter().all(|(_, c)| c.is_some()) && n > 0;
        if phs.is_some() && n == 0 {
            errors.push("phs: record has no events".into());
        }
        for (key, col) in &columns {
            if let Some(col) = col {
                if col.len() != n {
                    shape_ok = false;
                    errors.push(format!("{key}: length {} differs from phs length {n}", col.len()));
                }
            }
        }

        let mut events = Vec::new();
        if shape_ok {
            let (phs, is_slur, ph_dur, notes, notes_dur, lang, style) = (
                phs.unwrap(),
                is_slur.unwrap(),
                ph_dur.unwrap(),
                notes.unwrap(),
                notes_dur.unwrap(),
                lang.unwrap(),
                style.unwrap(),
            );
            for i in 0..n {
                let phoneme = phs[i].as_str().map(String::from).unwrap_or_else(|| {
                    errors.push(format!("phs[{i}]: expected a string"));
                    String::new()
                });
                let slur = match is_slur[i].as_u64() {
                    Some(0) => false,
                    Some(1) => true,
                    _ => {
                        errors.push(format!("is_slur[{i}]: expected 0 or 1"));
                        false
                    }
                };
                let positive = |v: &Value, key: &str, errors: &mut Vec<String>| -> f64 {
                    match v.as_f64() {
                        Some(d) if d > 0.0 && d.is_finite() => d,
                        Some(d) => {
                            errors.push(format!("{key}[{i}]: {d} is not a positive duration"));
                            d
                        }
                        None => {
                            errors.push(format!("{key}[{i}]: expected a number"));
                            0.0
                        }
                    }
                };
                let dur = positive(&ph_dur[i], "ph_dur", &mut errors);
                let note_dur = positive(&notes_dur[i], "notes_dur", &mut errors);
                let note = match notes[i].as_u64() {
                    Some(m) if m <= 127 => m as u8,
                    _ => {
                        errors.push(format!("notes[{i}]: expected a MIDI note 0..=127"));
                        0
                    }
                };
                let language = lang[i].as_u64().and_then(|t| u8::try_from(t).ok()).and_then(Language::from_token);
                if language.is_none() {
                    errors.push(format!("lang[{i}]: expected 0 or 1"));
                }
                let st = style[i].as_u64().and_then(|t| u8::try_from(t).ok()).and_then(Style::from_token);
                if st.is_none() {
                    errors.push(format!("style[{i}]: expected 0, 1 or 2"));
                }
                events.push(PhonemeEvent {
                    phoneme,
                    ph_dur: dur,
                    note_midi: note,
                    note_dur,
                    is_slur: slur,
                    language: language.unwrap_or(Language::English),
                    style: st.unwrap_or(Style::Speech),
                });
            }
        }
        if !errors.is_empty() {
            return Err(FormatError::Validation(errors));
        }
        Ok(AnnotationRecord { utterance_id, audio_path, singer_id, voice_part, events })
    }
}

pub fn read_annotation(text: &str) -> Result<AnnotationRecord> {
    AnnotationRecord::from_json_value(&serde_json::from_str(text)?)
}

/// Pretty JSON with shortest round-trip float formatting.
pub fn write_annotation(record: &AnnotationRecord) -> Result<String> {
    record.validate()?;
    let mut s = serde_json::to_string_pretty(&record.to_json_value())?;
    s.push('\n');
    Ok(s)
}

/// Read a manifest: a JSON document with a `records` array, a single record
/// object, or one record per line.
pub fn read_manifest(text: &str) -> Result<Vec<AnnotationRecord>> {
    let trimmed = text.trim_start_matches('\u{feff}').trim();
    let values: Vec<Value> = match serde_json::from_str::<Value>(trimmed) {
        Ok(Value::Object(obj)) if obj.contains_key("records") => match obj.get("records") {
            Some(Value::Array(a)) => a.clone(),
            _ => return Err(FormatError::Validation(vec!["records: expected an array".into()])),
        },
        Ok(v @ Value::Object(_)) => vec![v],
        Ok(_) => return Err(FormatError::Validation(vec!["manifest: expected an object".into()])),
        Err(_) => trimmed
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<std::result::Result<_, _>>()?,
    };
    let mut errors = Vec::new();
    let mut records = Vec::with_capacity(values.len());
    for (i, v) in values.iter().enumerate() {
        match AnnotationRecord::from_json_value(v) {
            Ok(r) => records.push(r),
            Err(FormatError::Validation(errs)) => errors.extend(errs.into_iter().map(|e| format!("record {i}: {e}"))),
            Err(e) => return Err(e),
        }
    }
    if !errors.is_empty() {
        return Err(FormatError::Validation(errors));
    }
    let mut seen = HashSet::new();
    for r in &records {
        if !seen.insert(r.utterance_id.as_str()) {
            return Err(FormatError::DuplicateId(r.utterance_id.clone()));
        }
    }
    Ok(records)
}

pub fn write_manifest(records: &[AnnotationRecord]) -> Result<String> {
    let mut arr = Vec::with_capacity(records.len());
    for r in records {
        r.validate()?;
        arr.push(r.to_json_value());
    }
    let mut doc = Map::new();
    doc.insert("records".into(), Value::Array(arr));
    let mut s = serde_json::to_string_pretty(&Value::Object(doc))?;
    s.push('\n');
    Ok(s)
}

/// One record per line.
pub fn write_manifest_lines(records: &[AnnotationRecord]) -> Result<String> {
    let mut s = String::new();
    for r in records {
        r.validate()?;
        s.push_str(&serde_json::to_string(&r.to_json_value())?);
        s.push('\n');
    }
    Ok(s)
}
