//! Syllable-level score JSON to phone-level lists.
//!
//! Input is `{"events": [...]}` or a bare array. Each event is
//! `{"lyric": "我", "note": 56, "dur": 0.63}` or `{"slur": true, "note": 60, "dur": 0.16}`.

use anyhow::Result;
use serde::Deserialize;
use svsprep::lexicon::{segment_lyrics, Lexicon};
use svsprep::score::{transform_score, ScoreEvent, TransformedScore};

use crate::InputError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEvent {
    #[serde(default)]
    lyric: Option<String>,
    #[serde(default)]
    slur: bool,
    note: u8,
    dur: f64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawScore {
    Wrapped { events: Vec<RawEvent> },
    Bare(Vec<RawEvent>),
}

pub fn parse_score(text: &str) -> Result<Vec<ScoreEvent>> {
    let raw: RawScore = serde_json::from_str(text).map_err(|e| InputError(format!("score: {e}")))?;
    let events = match raw {
        RawScore::Wrapped { events } | RawScore::Bare(events) => events,
    };
    let mut problems = Vec::new();
    let mut score = Vec::with_capacity(events.len());
    for (i, e) in events.into_iter().enumerate() {
        if !(e.dur > 0.0 && e.dur.is_finite()) {
            problems.push(format!("event {i}: dur {} is not a positive duration", e.dur));
        }
        if e.note > 127 {
            problems.push(format!("event {i}: note {} is not a MIDI note", e.note));
        }
        match (e.slur, e.lyric) {
            (true, None) => score.push(ScoreEvent::slur(e.note, e.dur)),
            (true, Some(_)) => problems.push(format!("event {i}: a slur carries no lyric")),
            (false, None) => problems.push(format!("event {i}: lyric missing")),
            (false, Some(lyric)) => match segment_lyrics(&lyric)?.as_slice() {
                [token] => score.push(ScoreEvent::lyric(token.clone(), e.note, e.dur)),
                other => problems.push(format!("event {i}: `{lyric}` holds {} lyric tokens, expected 1", other.len())),
            },
        }
    }
    if problems.is_empty() {
        Ok(score)
    } else {
        Err(InputError(format!("score validation failed:\n  {}", problems.join("\n  "))).into())
    }
}

pub fn run(text: &str, lexicon: &Lexicon) -> Result<TransformedScore> {
    Ok(transform_score(&parse_score(text)?, lexicon)?)
}
