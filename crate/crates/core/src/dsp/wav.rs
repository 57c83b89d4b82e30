use std::io::Cursor;
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::{DspError, Result, Waveform};

/// What to do with multichannel input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Downmix {
    /// Multichannel files are an error.
    #[default]
    Reject,
    /// Average all channels.
    Average,
}

fn wav_err(e: hound::Error) -> DspError {
    DspError::Wav(e.to_string())
}

fn decode<R: std::io::Read>(reader: WavReader<R>, downmix: Downmix) -> Result<Waveform> {
    let spec = reader.spec();
    if spec.sample_format != SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(DspError::Wav(format!(
            "unsupported encoding: {:?} {}-bit (PCM 16-bit required)",
            spec.sample_format, spec.bits_per_sample
        )));
    }
    let channels = spec.channels as usize;
    if channels != 1 && downmix == Downmix::Reject {
        return Err(DspError::Wav(format!("{channels} channels; mono required")));
    }
    let expected = reader.len() as usize;
    let raw: Vec<i16> = reader.into_samples::<i16>().collect::<std::result::Result<_, _>>().map_err(wav_err)?;
    if raw.len() != expected {
        return Err(DspError::Wav(format!("truncated data: {} of {expected} samples", raw.len())));
    }
    let samples = raw
        .chunks_exact(channels)
        .map(|frame| frame.iter().map(|&s| s as f64 / 32768.0).sum::<f64>() / channels as f64)
        .collect();
    Ok(Waveform { samples, sample_rate: spec.sample_rate })
}

pub fn read_wav(path: &Path, downmix: Downmix) -> Result<Waveform> {
    let reader = WavReader::open(path).map_err(wav_err)?;
    decode(reader, downmix)
}

pub fn read_wav_bytes(bytes: &[u8], downmix: Downmix) -> Result<Waveform> {
    let reader = WavReader::new(Cursor::new(bytes)).map_err(wav_err)?;
    decode(reader, downmix)
}

fn quantize(x: f64) -> i16 {
    (x * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

fn spec(sample_rate: u32) -> WavSpec {
    WavSpec { channels: 1, sample_rate, bits_per_sample: 16, sample_format: SampleFormat::Int }
}

/// 16-bit PCM mono. Samples are clipped to full scale.
pub fn write_wav(waveform: &Waveform, path: &Path) -> Result<()> {
    let mut writer = WavWriter::create(path, spec(waveform.sample_rate)).map_err(wav_err)?;
    for &s in &waveform.samples {
        writer.write_sample(quantize(s)).map_err(wav_err)?;
    }
    writer.finalize().map_err(wav_err)
}

pub fn write_wav_bytes(waveform: &Waveform) -> Result<Vec<u8>> {
    let mut buf = Cursor::new(Vec::new());
    {
        let mut writer = WavWriter::new(&mut buf, spec(waveform.sample_rate)).map_err(wav_err)?;
        for &s in &waveform.samples {
            writer.write_sample(quantize(s)).map_err(wav_err)?;
        }
        writer.finalize().map_err(wav_err)?;
    }
    Ok(buf.into_inner())
}
