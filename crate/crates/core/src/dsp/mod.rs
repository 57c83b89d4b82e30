//! Signal engine: waveform I/O, resampling, F0 estimation, source-filter
//! analysis/synthesis and pitch arithmetic.

mod f0;
mod pitch;
mod resample;
mod vocoder;
mod wav;

pub use f0::{extract_f0, F0Config};
pub use pitch::{average_f0_by_segments, hz_from_midi, midi_from_hz, transpose_f0, NoteSegment};
pub use resample::resample;
pub use vocoder::{analyze, replace_f0, synthesize, AnalysisResult, VocoderConfig};
pub use wav::{read_wav, read_wav_bytes, write_wav, write_wav_bytes, Downmix};

use thiserror::Error;

/// Working sample rate of the pipeline.
pub const DEFAULT_SAMPLE_RATE: u32 = 24_000;
/// Analysis hop in seconds.
pub const DEFAULT_HOP: f64 = 0.005;

#[derive(Debug, Error)]
pub enum DspError {
    #[error("wav: {0}")]
    Wav(String),
    #[error("invalid sample rate {0}")]
    InvalidRate(u32),
    #[error("signal too short: {got} samples, need at least {need}")]
    TooShort { got: usize, need: usize },
    #[error("length mismatch: {got} frames, expected {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error("frequency must be positive, got {0}")]
    NonPositiveFrequency(f64),
    #[error("analysis has no frames")]
    Empty,
    #[error("analysis cache: {0}")]
    Cache(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DspError>;

#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Self {
        Waveform { samples, sample_rate }
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Scale down so that no sample exceeds full scale.
    pub fn normalize_peak(&mut self) {
        let peak = self.samples.iter().fold(0.0f64, |m, s| m.max(s.abs()));
        if peak > 1.0 {
            self.samples.iter_mut().for_each(|s| *s /= peak);
        }
    }
}

/// Frame-rate pitch track; 0.0 marks an unvoiced frame.
#[derive(Debug, Clone, PartialEq)]
pub struct F0Contour {
    pub hop: f64,
    pub values: Vec<f64>,
}

impl F0Contour {
    pub fn new(hop: f64, values: Vec<f64>) -> Self {
        F0Contour { hop, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_voiced(&self, frame: usize) -> bool {
        self.values.get(frame).is_some_and(|&f| f > 0.0)
    }

    pub fn voiced_count(&self) -> usize {
        self.values.iter().filter(|&&f| f > 0.0).count()
    }

    /// Frame index nearest to `t` seconds, clamped to the contour.
    pub fn frame_at(&self, t: f64) -> usize {
        let idx = (t / self.hop).round().max(0.0) as usize;
        idx.min(self.values.len().saturating_sub(1))
    }

    pub fn duration(&self) -> f64 {
        self.values.len() as f64 * self.hop
    }
}

/// Number of analysis frames for `n_samples` at `hop_samples`; frame `i` is
/// centred on sample `i * hop_samples`.
pub fn frame_count(n_samples: usize, hop_samples: usize) -> usize {
    n_samples / hop_samples + 1
}

pub(crate) fn hop_samples(hop: f64, sample_rate: u32) -> usize {
    ((hop * sample_rate as f64).round() as usize).max(1)
}
