//! Objective evaluation: mel-cepstral distortion over a DTW path, log-F0
//! RMSE, voicing error, semitone accuracy, WER and cosine similarity.

use std::collections::BTreeMap;
use std::f64::consts::{LN_10, PI};

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::{extract_f0, frame_count, hop_samples, midi_from_hz, DspError, F0Config, F0Contour, Waveform};
use crate::lexicon::is_han;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error("input of {got} samples is shorter than one {need}-sample analysis window")]
    TooShort { got: usize, need: usize },
    #[error("no frames to compare")]
    Empty,
    #[error("vectors differ in length: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("zero-norm vector")]
    ZeroNorm,
    #[error("sample rates differ: {0} vs {1}")]
    RateMismatch(u32, u32),
}

pub type Result<T> = std::result::Result<T, MetricsError>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McepConfig {
    pub order: usize,
    pub window: f64,
    pub hop: f64,
    pub fft_size: usize,
    pub n_mels: usize,
}

impl Default for McepConfig {
    fn default() -> Self {
        McepConfig { order: 13, window: 0.05, hop: 0.0125, fft_size: 2048, n_mels: 40 }
    }
}

/// Coefficients `c_1..c_K` per frame; `c_0` is dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct McepFrames {
    pub hop: f64,
    pub order: usize,
    pub frames: Vec<Vec<f64>>,
}

impl McepFrames {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular filters evenly spaced on the mel scale from 0 Hz to Nyquist.
fn mel_filterbank(n_mels: usize, nfft: usize, sample_rate: u32) -> Vec<Vec<(usize, f64)>> {
    let top = hz_to_mel(sample_rate as f64 / 2.0);
    let edges: Vec<f64> = (0..n_mels + 2).map(|i| mel_to_hz(top * i as f64 / (n_mels + 1) as f64)).collect();
    let bin_hz = sample_rate as f64 / nfft as f64;
    (0..n_mels)
        .map(|m| {
            let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            (0..=nfft / 2)
                .filter_map(|k| {
                    let f = k as f64 * bin_hz;
                    let w = if f > lo && f <= mid {
                        (f - lo) / (mid - lo)
                    } else if f > mid && f < hi {
                        (hi - f) / (hi - mid)
                    } else {
                        0.0
                    };
                    (w > 0.0).then_some((k, w))
                })
                .collect()
        })
        .collect()
}

/// Power spectrum, mel filterbank, natural log, DCT-II; keep `c_1..c_K`.
/// Frame `i` is centred on sample `i * hop`.
pub fn mcep(waveform: &Waveform, cfg: &McepConfig) -> Result<McepFrames> {
    let sr = waveform.sample_rate;
    let win = (cfg.window * sr as f64).round() as usize;
    if waveform.len() < win {
        return Err(MetricsError::TooShort { got: waveform.len(), need: win });
    }
    let hop = hop_samples(cfg.hop, sr);
    let nfft = cfg.fft_size.max(win.next_power_of_two());
    let window: Vec<f64> = (0..win).map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / win as f64).cos()).collect();
    let bank = mel_filterbank(cfg.n_mels, nfft, sr);
    let fft = FftPlanner::new().plan_fft_forward(nfft);
    let m = cfg.n_mels as f64;
    let dct: Vec<Vec<f64>> =
        (1..=cfg.order).map(|k| (0..cfg.n_mels).map(|j| (PI * k as f64 * (j as f64 + 0.5) / m).cos() / m).collect()).collect();

    let mut buf = vec![Complex::default(); nfft];
    let x = &waveform.samples;
    let n_frames = frame_count(x.len(), hop);
    let mut frames = Vec::with_capacity(n_frames);
    for i in 0..n_frames {
        let start = (i * hop) as i64 - (win / 2) as i64;
        for (k, b) in buf.iter_mut().enumerate() {
            let j = start + k as i64;
            let s = if k < win && j >= 0 && (j as usize) < x.len() { x[j as usize] * window[k] } else { 0.0 };
            *b = Complex::new(s, 0.0);
        }
        fft.process(&mut buf);
        let log_mel: Vec<f64> = bank
            .iter()
            .map(|filter| filter.iter().map(|&(k, w)| w * buf[k].norm_sqr()).sum::<f64>().max(1e-12).ln())
            .collect();
        frames.push(dct.iter().map(|row| row.iter().zip(&log_mel).map(|(c, v)| c * v).sum()).collect());
    }
    Ok(McepFrames { hop: cfg.hop, order: cfg.order, frames })
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DtwPath {
    pub pairs: Vec<(usize, usize)>,
    /// Summed Euclidean distance along the path.
    pub cost: f64,
}

/// Monotone, continuous alignment with steps (1,0), (0,1), (1,1), from
/// `(0,0)` to both ends. Ties go to the diagonal.
pub fn dtw_align(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<DtwPath> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::Empty);
    }
    let (n, m) = (a.len(), b.len());
    let mut acc = vec![f64::INFINITY; n * m];
    for i in 0..n {
        for j in 0..m {
            let d = euclid(&a[i], &b[j]);
            let best = if i == 0 && j == 0 {
                0.0
            } else {
                let diag = if i > 0 && j > 0 { acc[(i - 1) * m + j - 1] } else { f64::INFINITY };
                let up = if i > 0 { acc[(i - 1) * m + j] } else { f64::INFINITY };
                let left = if j > 0 { acc[i * m + j - 1] } else { f64::INFINITY };
                diag.min(up).min(left)
            };
            acc[i * m + j] = best + d;
        }
    }
    let mut pairs = vec![(n - 1, m - 1)];
    let (mut i, mut j) = (n - 1, m - 1);
    while i > 0 || j > 0 {
        (i, j) = if i == 0 {
            (0, j - 1)
        } else if j == 0 {
            (i - 1, 0)
        } else {
            let diag = acc[(i - 1) * m + j - 1];
            let up = acc[(i - 1) * m + j];
            let left = acc[i * m + j - 1];
            if diag <= up && diag <= left {
                (i - 1, j - 1)
            } else if up <= left {
                (i - 1, j)
            } else {
                (i, j - 1)
            }
        };
        pairs.push((i, j));
    }
    pairs.reverse();
    Ok(DtwPath { pairs, cost: acc[n * m - 1] })
}

/// Mean over the path of `(10 / ln 10) * sqrt(2 * sum_d (c_d - c'_d)^2)`.
pub fn mcd_over_path(a: &McepFrames, b: &McepFrames, path: &DtwPath) -> f64 {
    let scale = 10.0 / LN_10 * 2f64.sqrt();
    let total: f64 = path.pairs.iter().map(|&(i, j)| scale * euclid(&a.frames[i], &b.frames[j])).sum();
    total / path.pairs.len() as f64
}

/// MCD between two cepstral sequences after DTW alignment.
pub fn mcd_frames(a: &McepFrames, b: &McepFrames) -> Result<(f64, DtwPath)> {
    let path = dtw_align(&a.frames, &b.frames)?;
    Ok((mcd_over_path(a, b, &path), path))
}

pub fn mcd(reference: &Waveform, hypothesis: &Waveform, cfg: &McepConfig) -> Result<f64> {
    Ok(mcd_frames(&mcep(reference, cfg)?, &mcep(hypothesis, cfg)?)?.0)
}

fn path_values<'a>(
    reference: &'a F0Contour,
    hypothesis: &'a F0Contour,
    path: &'a DtwPath,
) -> impl Iterator<Item = (f64, f64)> + 'a {
    let at = |c: &F0Contour, i: usize| c.values.get(i).copied().unwrap_or(0.0);
    path.pairs.iter().map(move |&(i, j)| (at(reference, i), at(hypothesis, j)))
}

/// RMSE of natural-log F0 over path pairs voiced on both sides; `None`
/// when no pair is.
pub fn f0_rmse(reference: &F0Contour, hypothesis: &F0Contour, path: &DtwPath) -> Option<f64> {
    let (sum, n) = path_values(reference, hypothesis, path)
        .filter(|&(r, h)| r > 0.0 && h > 0.0)
        .fold((0.0, 0usize), |(s, n), (r, h)| (s + (r.ln() - h.ln()).powi(2), n + 1));
    (n > 0).then(|| (sum / n as f64).sqrt())
}

/// Fraction of path pairs whose voicing flags differ.
pub fn vuv_error(reference: &F0Contour, hypothesis: &F0Contour, path: &DtwPath) -> f64 {
    if path.pairs.is_empty() {
        return 0.0;
    }
    let wrong = path_values(reference, hypothesis, path).filter(|&(r, h)| (r > 0.0) != (h > 0.0)).count();
    wrong as f64 / path.pairs.len() as f64
}

/// Fraction of co-voiced pairs whose rounded MIDI notes agree.
pub fn semitone_accuracy(reference: &F0Contour, hypothesis: &F0Contour, path: &DtwPath) -> Option<f64> {
    let note = |f: f64| midi_from_hz(f).map(f64::round).unwrap_or(f64::NAN);
    let (hits, n) = path_values(reference, hypothesis, path)
        .filter(|&(r, h)| r > 0.0 && h > 0.0)
        .fold((0usize, 0usize), |(hits, n), (r, h)| (hits + usize::from(note(r) == note(h)), n + 1));
    (n > 0).then(|| hits as f64 / n as f64)
}

/// Minimum substitutions + deletions + insertions.
pub fn edit_distance<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=hypothesis.len()).collect();
    let mut row = vec![0; hypothesis.len() + 1];
    for (i, r) in reference.iter().enumerate() {
        row[0] = i + 1;
        for (j, h) in hypothesis.iter().enumerate() {
            let sub = prev[j] + usize::from(r != h);
            row[j + 1] = sub.min(prev[j + 1] + 1).min(row[j] + 1);
        }
        std::mem::swap(&mut prev, &mut row);
    }
    prev[hypothesis.len()]
}

/// Edit distance over reference length; `None` for an empty reference.
pub fn wer<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> Option<f64> {
    (!reference.is_empty()).then(|| edit_distance(reference, hypothesis) as f64 / reference.len() as f64)
}

/// Han characters are one token each; other text splits on whitespace.
/// Lowercased, with punctuation removed.
pub fn tokenize_transcript(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    let flush = |word: &mut String, tokens: &mut Vec<String>| {
        if !word.is_empty() {
            tokens.push(std::mem::take(word));
        }
    };
    for ch in text.chars() {
        if is_han(ch) {
            flush(&mut word, &mut tokens);
            tokens.push(ch.to_string());
        } else if ch.is_alphanumeric() || ch == '\'' {
            word.extend(ch.to_lowercase());
        } else {
            flush(&mut word, &mut tokens);
        }
    }
    flush(&mut word, &mut tokens);
    tokens
}

pub fn cosine_sim(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(MetricsError::DimensionMismatch(a.len(), b.len()));
    }
    let na = a.iter().map(|x| x * x).sum::<f64>();
    let nb = b.iter().map(|x| x * x).sum::<f64>();
    if na == 0.0 || nb == 0.0 {
        return Err(MetricsError::ZeroNorm);
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb).sqrt()).clamp(-1.0, 1.0))
}

/// Audio metrics for one reference/hypothesis pair. F0 is extracted at the
/// cepstral hop so the DTW path indexes both streams.
pub fn audio_metrics(reference: &Waveform, hypothesis: &Waveform, cfg: &McepConfig, f0: &F0Config) -> Result<UtteranceMetrics> {
    if reference.sample_rate != hypothesis.sample_rate {
        return Err(MetricsError::RateMismatch(reference.sample_rate, hypothesis.sample_rate));
    }
    let (a, b) = (mcep(reference, cfg)?, mcep(hypothesis, cfg)?);
    let (mcd_db, path) = mcd_frames(&a, &b)?;
    let f0_cfg = F0Config { hop: cfg.hop, ..*f0 };
    let (fr, fh) = (extract_f0(reference, &f0_cfg)?, extract_f0(hypothesis, &f0_cfg)?);
    Ok(UtteranceMetrics {
        mcd_db: Some(mcd_db),
        f0_rmse: f0_rmse(&fr, &fh, &path),
        vuv_e: Some(vuv_error(&fr, &fh, &path)),
        semitone_accuracy: semitone_accuracy(&fr, &fh, &path),
        ..UtteranceMetrics::default()
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UtteranceMetrics {
    pub mcd_db: Option<f64>,
    pub f0_rmse: Option<f64>,
    pub vuv_e: Option<f64>,
    pub semitone_accuracy: Option<f64>,
    pub wer: Option<f64>,
    pub sim: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceReport {
    pub utt_id: String,
    #[serde(flatten)]
    pub metrics: UtteranceMetrics,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub utterances: Vec<UtteranceReport>,
    /// Mean of each metric over the utterances that define it.
    pub aggregate: UtteranceMetrics,
    /// How many utterances contributed to each aggregate.
    pub counts: BTreeMap<String, usize>,
}

const METRIC_NAMES: [&str; 6] = ["mcd_db", "f0_rmse", "vuv_e", "semitone_accuracy", "wer", "sim"];

impl UtteranceMetrics {
    fn values(&self) -> [Option<f64>; 6] {
        [self.mcd_db, self.f0_rmse, self.vuv_e, self.semitone_accuracy, self.wer, self.sim]
    }

    fn from_values(v: [Option<f64>; 6]) -> Self {
        UtteranceMetrics { mcd_db: v[0], f0_rmse: v[1], vuv_e: v[2], semitone_accuracy: v[3], wer: v[4], sim: v[5] }
    }
}

impl EvalReport {
    pub fn new(utterances: Vec<UtteranceReport>) -> Self {
        let mut sums = [0.0; 6];
        let mut counts = [0usize; 6];
        for u in &utterances {
            for (k, v) in u.metrics.values().into_iter().enumerate() {
                if let Some(v) = v {
                    sums[k] += v;
                    counts[k] += 1;
                }
            }
        }
        let means = std::array::from_fn(|k| (counts[k] > 0).then(|| sums[k] / counts[k] as f64));
        EvalReport {
            utterances,
            aggregate: UtteranceMetrics::from_values(means),
            counts: METRIC_NAMES.iter().zip(counts).map(|(n, c)| (n.to_string(), c)).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// Aligned plain-text table, one row per utterance plus a mean row.
    pub fn to_table(&self) -> String {
        let headers = ["utt_id", "MCD(dB)", "F0_RMSE", "VUV_E", "SA", "WER", "SIM"];
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"));
        let mut rows: Vec<Vec<String>> = self
            .utterances
            .iter()
            .map(|u| {
                let mut row = vec![u.utt_id.clone()];
                if u.error.is_some() {
                    row.extend(std::iter::repeat("ERR".to_string()).take(6));
                } else {
                    row.extend(u.metrics.values().into_iter().map(fmt));
                }
                row
            })
            .collect();
        let mut mean = vec!["MEAN".to_string()];
        mean.extend(self.aggregate.values().into_iter().map(fmt));
        rows.push(mean);
        let widths: Vec<usize> = (0..headers.len())
            .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0).max(headers[c].len()))
            .collect();
        let line = |cells: Vec<String>| {
            cells
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(c, (s, w))| if c == 0 { format!("{s:<w$}") } else { format!("{s:>w$}") })
                .collect::<Vec<_>>()
                .join("  ")
                .trim_end()
                .to_string()
        };
        let mut out = line(headers.iter().map(|h| h.to_string()).collect()) + "\n";
        out += &(widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  ") + "\n");
        let n = rows.len();
        for (i, r) in rows.into_iter().enumerate() {
            if i == n - 1 {
                out += &(widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  ") + "\n");
            }
            out += &(line(r) + "\n");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_distr::StandardNormal;

    fn noise(seed: u64, n: usize, gain: f64) -> Waveform {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Waveform::new((0..n).map(|_| gain * rng.sample::<f64, _>(StandardNormal)).collect(), 24_000)
    }

    #[test]
    fn mcep_shape_and_determinism() {
        let w = noise(1, 24_000, 0.1);
        let a = mcep(&w, &McepConfig::default()).unwrap();
        assert_eq!(a.len(), 24_000 / 300 + 1);
        assert!(a.frames.iter().all(|f| f.len() == 13));
        assert_eq!(a, mcep(&w, &McepConfig::default()).unwrap());
        assert!(matches!(mcep(&noise(1, 100, 0.1), &McepConfig::default()), Err(MetricsError::TooShort { .. })));
    }

    #[test]
    fn gain_only_moves_c0() {
        let w = noise(2, 12_000, 0.1);
        let louder = Waveform::new(w.samples.iter().map(|s| 2.0 * s).collect(), 24_000);
        let (a, b) = (mcep(&w, &McepConfig::default()).unwrap(), mcep(&louder, &McepConfig::default()).unwrap());
        let worst = a.frames.iter().flatten().zip(b.frames.iter().flatten()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn silence_gives_constant_frames() {
        let a = mcep(&Waveform::new(vec![0.0; 12_000], 24_000), &McepConfig::default()).unwrap();
        let first = &a.frames[0];
        assert!(a.frames.iter().all(|f| euclid(f, first) < 1e-9));
    }

    #[test]
    fn dtw_identity_and_duplicate() {
        let a: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let p = dtw_align(&a, &a).unwrap();
        assert_eq!(p.pairs, (0..6).map(|i| (i, i)).collect::<Vec<_>>());
        assert_eq!(p.cost, 0.0);

        let mut b = a.clone();
        b.insert(3, a[3].clone());
        let p = dtw_align(&a, &b).unwrap();
        assert_eq!(p.pairs.len(), a.len() + 1);
        assert_eq!(p.cost, 0.0);
        assert!(dtw_align(&a, &[]).is_err());
    }

    /// Minimum path cost by exhaustive recursion over all monotone paths.
    fn brute_dtw(a: &[Vec<f64>], b: &[Vec<f64>], i: usize, j: usize) -> f64 {
        let d = euclid(&a[i], &b[j]);
        if i == 0 && j == 0 {
            return d;
        }
        let mut best = f64::INFINITY;
        if i > 0 {
            best = best.min(brute_dtw(a, b, i - 1, j));
        }
        if j > 0 {
            best = best.min(brute_dtw(a, b, i, j - 1));
        }
        if i > 0 && j > 0 {
            best = best.min(brute_dtw(a, b, i - 1, j - 1));
        }
        best + d
    }

    proptest! {
        #[test]
        fn dtw_matches_exhaustive_search(
            a in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 2), 1..8),
            b in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 2), 1..8),
        ) {
            let p = dtw_align(&a, &b).unwrap();
            let oracle = brute_dtw(&a, &b, a.len() - 1, b.len() - 1);
            prop_assert!((p.cost - oracle).abs() < 1e-9);
            prop_assert_eq!(p.pairs[0], (0, 0));
            prop_assert_eq!(*p.pairs.last().unwrap(), (a.len() - 1, b.len() - 1));
            for w in p.pairs.windows(2) {
                let (di, dj) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
                prop_assert!(di <= 1 && dj <= 1 && di + dj >= 1);
            }
            let path_cost: f64 = p.pairs.iter().map(|&(i, j)| euclid(&a[i], &b[j])).sum();
            prop_assert!((path_cost - p.cost).abs() < 1e-9);
            if a.len() == b.len() {
                let diagonal: f64 = a.iter().zip(&b).map(|(x, y)| euclid(x, y)).sum();
                prop_assert!(p.cost <= diagonal + 1e-12);
            }
        }
    }

    #[test]
    fn mcd_closed_forms() {
        let w = noise(3, 12_000, 0.1);
        assert_eq!(mcd(&w, &w, &McepConfig::default()).unwrap(), 0.0);

        let a = mcep(&w, &McepConfig::default()).unwrap();
        let delta = 0.37;
        let shifted = McepFrames { frames: a.frames.iter().map(|f| f.iter().map(|c| c + delta).collect()).collect(), ..a.clone() };
        let (d, _) = mcd_frames(&a, &shifted).unwrap();
        let expected = 10.0 / LN_10 * (2.0 * 13.0 * delta * delta).sqrt();
        assert!((d - expected).abs() < 1e-6, "{d} vs {expected}");

        let v = noise(4, 12_000, 0.1);
        let (ab, ba) = (mcd(&w, &v, &McepConfig::default()).unwrap(), mcd(&v, &w, &McepConfig::default()).unwrap());
        assert!((ab - ba).abs() < 1e-9);
    }

    fn diag(n: usize) -> DtwPath {
        DtwPath { pairs: (0..n).map(|i| (i, i)).collect(), cost: 0.0 }
    }

    #[test]
    fn f0_metrics() {
        let r = F0Contour::new(0.01, vec![110.0, 220.0, 0.0, 330.0, 440.0]);
        let p = diag(5);
        assert_eq!(f0_rmse(&r, &r, &p), Some(0.0));
        assert_eq!(vuv_error(&r, &r, &p), 0.0);
        assert_eq!(semitone_accuracy(&r, &r, &p), Some(1.0));

        let up = crate::dsp::transpose_f0(&r, 12.0, 1e9);
        assert!((f0_rmse(&r, &up, &p).unwrap() - 2f64.ln()).abs() < 1e-9);

        let a = F0Contour::new(0.01, vec![100.0, 0.0, 100.0, 0.0]);
        let b = F0Contour::new(0.01, vec![0.0, 100.0, 0.0, 100.0]);
        assert_eq!(f0_rmse(&a, &b, &diag(4)), None);
        assert_eq!(semitone_accuracy(&a, &b, &diag(4)), None);
        assert_eq!(vuv_error(&a, &b, &diag(4)), 1.0);

        let half_a = F0Contour::new(0.01, vec![100.0; 10]);
        let half_b = F0Contour::new(0.01, (0..10).map(|i| if i % 2 == 0 { 100.0 } else { 0.0 }).collect());
        assert_eq!(vuv_error(&half_a, &half_b, &diag(10)), 0.5);
    }

    #[test]
    fn semitone_rounding() {
        let notes = [57.0, 60.0, 64.0, 69.0];
        let r = F0Contour::new(0.01, notes.iter().map(|&m| crate::dsp::hz_from_midi(m)).collect());
        let semi = F0Contour::new(0.01, notes.iter().map(|&m| crate::dsp::hz_from_midi(m + 1.0)).collect());
        let cents40 = F0Contour::new(0.01, notes.iter().map(|&m| crate::dsp::hz_from_midi(m + 0.4)).collect());
        assert_eq!(semitone_accuracy(&r, &semi, &diag(4)), Some(0.0));
        assert_eq!(semitone_accuracy(&r, &cents40, &diag(4)), Some(1.0));
    }

    /// Fewest edits over every alignment of the two sequences.
    fn brute_edits(r: &[&str], h: &[&str]) -> usize {
        match (r.split_first(), h.split_first()) {
            (None, _) => h.len(),
            (_, None) => r.len(),
            (Some((a, rs)), Some((b, hs))) => {
                let sub = brute_edits(rs, hs) + usize::from(a != b);
                sub.min(brute_edits(rs, h) + 1).min(brute_edits(r, hs) + 1)
            }
        }
    }

    #[test]
    fn wer_examples_and_oracle() {
        assert_eq!(wer(&["a", "b", "c"], &["a", "b", "c"]), Some(0.0));
        assert_eq!(wer(&["a", "b", "c"], &["a", "x", "c"]), Some(1.0 / 3.0));
        assert_eq!(wer::<&str>(&[], &["a"]), None);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let vocab = ["a", "b", "c", "d"];
        for _ in 0..300 {
            let r: Vec<&str> = (0..rng.gen_range(1..=8)).map(|_| vocab[rng.gen_range(0..4)]).collect();
            let h: Vec<&str> = (0..rng.gen_range(0..=8)).map(|_| vocab[rng.gen_range(0..4)]).collect();
            assert_eq!(edit_distance(&r, &h), brute_edits(&r, &h), "{r:?} / {h:?}");
        }
    }

    #[test]
    fn transcript_tokens() {
        assert_eq!(tokenize_transcript("我和你 from One world!"), vec!["我", "和", "你", "from", "one", "world"]);
        assert_eq!(tokenize_transcript("don't, stop"), vec!["don't", "stop"]);
        assert_eq!(tokenize_transcript("你好，世界"), vec!["你", "好", "世", "界"]);
    }

    #[test]
    fn cosine_examples() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(cosine_sim(&a, &a).unwrap(), 1.0);
        assert_eq!(cosine_sim(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((cosine_sim(&a, &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(cosine_sim(&a, &[0.0; 3]), Err(MetricsError::ZeroNorm)));
        assert!(cosine_sim(&a, &[1.0]).is_err());
    }

    #[test]
    fn report_aggregates_defined_values() {
        let u = |id: &str, mcd: Option<f64>, sim: Option<f64>| UtteranceReport {
            utt_id: id.into(),
            metrics: UtteranceMetrics { mcd_db: mcd, sim, ..Default::default() },
            error: None,
        };
        let r = EvalReport::new(vec![u("a", Some(2.0), None), u("b", Some(4.0), Some(0.5))]);
        assert_eq!(r.aggregate.mcd_db, Some(3.0));
        assert_eq!(r.aggregate.sim, Some(0.5));
        assert_eq!(r.aggregate.wer, None);
        assert_eq!(r.counts["sim"], 1);
        let table = r.to_table();
        assert!(table.lines().next().unwrap().starts_with("utt_id"));
        assert!(table.contains("MEAN"));
        let back: EvalReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn identical_audio_scores_perfectly() {
        let fs = 24_000;
        let w = Waveform::new(
            (0..fs).map(|i| 0.3 * (2.0 * PI * 180.0 * i as f64 / fs as f64).sin()).collect(),
            fs as u32,
        );
        let m = audio_metrics(&w, &w, &McepConfig::default(), &F0Config::default()).unwrap();
        assert_eq!(m.mcd_db, Some(0.0));
        assert_eq!(m.f0_rmse, Some(0.0));
        assert_eq!(m.vuv_e, Some(0.0));
        assert_eq!(m.semitone_accuracy, Some(1.0));
    }
}
