//! Source-filter analysis and synthesis.
//!
//! Analysis yields, per frame, the F0, a pitch-adaptive smoothed power
//! spectrum (the harmonic envelope) and band aperiodicity. The envelope
//! uses a three-period Hann window, rectangular smoothing one F0 wide and
//! cepstral liftering. Aperiodicity is one minus the band-limited
//! normalized autocorrelation at the pitch period.
//!
//! Synthesis places one excitation event per pitch period (fixed spacing in
//! unvoiced stretches). Each event mixes a minimum-phase pulse shaped by
//! `sqrt(envelope * (1 - ap) * period)` with a noise burst shaped by
//! `sqrt(envelope * ap)`.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::Arc;

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{extract_f0, hop_samples, DspError, F0Config, F0Contour, Result, Waveform};

/// F0 assumed for unvoiced frames when sizing the analysis window.
const UNVOICED_F0: f64 = 500.0;
/// Cepstral recovery lifter weight.
const LIFTER_Q1: f64 = -0.15;
const SPECTRUM_FLOOR: f64 = 1e-16;
/// Relative half-width of the per-band lag search around the pitch period.
const LAG_SEARCH: f64 = 0.03;
const LAG_STEPS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VocoderConfig {
    pub f0: F0Config,
    pub fft_size: usize,
    pub ap_bands: usize,
}

impl Default for VocoderConfig {
    fn default() -> Self {
        VocoderConfig { f0: F0Config::default(), fft_size: 1024, ap_bands: 5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisResult {
    pub sample_rate: u32,
    pub fft_size: usize,
    pub f0: F0Contour,
    /// Per frame, `fft_size / 2 + 1` linear power values.
    pub envelope: Vec<Vec<f64>>,
    /// Per frame, one ratio in [0, 1] per band; see [`band_edges`].
    pub aperiodicity: Vec<Vec<f64>>,
}

impl AnalysisResult {
    pub fn n_frames(&self) -> usize {
        self.f0.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.f0.len();
        if n == 0 {
            return Err(DspError::Empty);
        }
        if self.envelope.len() != n {
            return Err(DspError::LengthMismatch { got: self.envelope.len(), expected: n });
        }
        if self.aperiodicity.len() != n {
            return Err(DspError::LengthMismatch { got: self.aperiodicity.len(), expected: n });
        }
        let bins = self.fft_size / 2 + 1;
        if let Some(bad) = self.envelope.iter().find(|e| e.len() != bins) {
            return Err(DspError::LengthMismatch { got: bad.len(), expected: bins });
        }
        Ok(())
    }
}

/// Upper band edges in Hz: octave bands below Nyquist, lowest band from 0.
pub fn band_edges(sample_rate: u32, bands: usize) -> Vec<f64> {
    let nyquist = sample_rate as f64 / 2.0;
    (0..bands).map(|b| nyquist / 2f64.powi((bands - 1 - b) as i32)).collect()
}

struct Spectral {
    nfft: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    buf: Vec<Complex<f64>>,
}

impl Spectral {
    fn new(planner: &mut FftPlanner<f64>, nfft: usize) -> Self {
        Spectral {
            nfft,
            fwd: planner.plan_fft_forward(nfft),
            inv: planner.plan_fft_inverse(nfft),
            buf: vec![Complex::default(); nfft],
        }
    }

    /// `|FFT(x)|^2` for the first `nfft/2 + 1` bins; `x` is zero padded.
    fn power(&mut self, x: &[f64]) -> Vec<f64> {
        for (k, b) in self.buf.iter_mut().enumerate() {
            *b = Complex::new(x.get(k).copied().unwrap_or(0.0), 0.0);
        }
        self.fwd.process(&mut self.buf);
        self.buf[..=self.nfft / 2].iter().map(|c| c.norm_sqr()).collect()
    }

    /// Real cepstrum of a half spectrum of log values.
    fn cepstrum(&mut self, log_half: &[f64]) -> Vec<f64> {
        let n = self.nfft;
        for k in 0..n {
            let v = if k <= n / 2 { log_half[k] } else { log_half[n - k] };
            self.buf[k] = Complex::new(v, 0.0);
        }
        self.inv.process(&mut self.buf);
        self.buf.iter().map(|c| c.re / n as f64).collect()
    }

    /// Half spectrum from a symmetric cepstrum (real part of its FFT).
    fn from_cepstrum(&mut self, cep: &[f64]) -> Vec<f64> {
        for (b, &c) in self.buf.iter_mut().zip(cep) {
            *b = Complex::new(c, 0.0);
        }
        self.fwd.process(&mut self.buf);
        self.buf[..=self.nfft / 2].iter().map(|c| c.re).collect()
    }

    /// Minimum-phase full spectrum for a half spectrum of amplitudes.
    fn min_phase(&mut self, amplitude: &[f64]) -> Vec<Complex<f64>> {
        let n = self.nfft;
        let log_amp: Vec<f64> = amplitude.iter().map(|a| a.max(1e-12).ln()).collect();
        let cep = self.cepstrum(&log_amp);
        for k in 0..n {
            let v = if k == 0 || k == n / 2 {
                cep[k]
            } else if k < n / 2 {
                2.0 * cep[k]
            } else {
                0.0
            };
            self.buf[k] = Complex::new(v, 0.0);
        }
        self.fwd.process(&mut self.buf);
        self.buf.iter().map(|c| c.exp()).collect()
    }
}

fn segment(x: &[f64], center: i64, half: i64) -> Vec<f64> {
    (-half..=half)
        .map(|k| {
            let j = center + k;
            if j >= 0 && (j as usize) < x.len() {
                x[j as usize]
            } else {
                0.0
            }
        })
        .collect()
}

/// Analyze a waveform into F0, harmonic envelope and band aperiodicity.
pub fn analyze(waveform: &Waveform, cfg: &VocoderConfig) -> Result<AnalysisResult> {
    let f0 = extract_f0(waveform, &cfg.f0)?;
    let fs = waveform.sample_rate as f64;
    let hop = hop_samples(cfg.f0.hop, waveform.sample_rate);
    let mut planner = FftPlanner::new();
    let mut env_fft = Spectral::new(&mut planner, cfg.fft_size);
    let edges = band_edges(waveform.sample_rate, cfg.ap_bands);

    let mut envelope = Vec::with_capacity(f0.len());
    let mut aperiodicity = Vec::with_capacity(f0.len());
    let mut ap_ffts: std::collections::HashMap<usize, Spectral> = std::collections::HashMap::new();
    for (i, &f) in f0.values.iter().enumerate() {
        let center = (i * hop) as i64;
        let frame_f0 = if f > 0.0 { f } else { UNVOICED_F0 };
        envelope.push(frame_envelope(&waveform.samples, center, frame_f0, fs, &mut env_fft));
        if f > 0.0 {
            let half = (2.0 * fs / f).round() as i64;
            let nfft = ((4 * half + 2) as usize).next_power_of_two();
            let spec = ap_ffts.entry(nfft).or_insert_with(|| Spectral::new(&mut planner, nfft));
            aperiodicity.push(band_aperiodicity(&waveform.samples, center, half, f, fs, &edges, spec));
        } else {
            aperiodicity.push(vec![1.0; cfg.ap_bands]);
        }
    }
    Ok(AnalysisResult { sample_rate: waveform.sample_rate, fft_size: cfg.fft_size, f0, envelope, aperiodicity })
}

fn frame_envelope(x: &[f64], center: i64, f0: f64, fs: f64, sp: &mut Spectral) -> Vec<f64> {
    let nfft = sp.nfft;
    let half = ((1.5 * fs / f0).round() as i64).min((nfft / 2 - 1) as i64);
    let seg = segment(x, center, half);
    let mut window: Vec<f64> = (-half..=half)
        .map(|k| 0.5 + 0.5 * (PI * k as f64 / (1.5 * fs / f0)).cos())
        .collect();
    let norm = window.iter().map(|w| w * w).sum::<f64>().sqrt();
    window.iter_mut().for_each(|w| *w /= norm);
    let weighted: Vec<f64> = seg.iter().zip(&window).map(|(s, w)| s * w).collect();
    let mean = weighted.iter().sum::<f64>() / window.iter().sum::<f64>();
    let windowed: Vec<f64> = weighted.iter().zip(&window).map(|(v, w)| v - w * mean).collect();
    let power = sp.power(&windowed);

    let smoothed = smooth_over_f0(&power, f0, fs, nfft);
    let log_half: Vec<f64> = smoothed.iter().map(|p| p.max(SPECTRUM_FLOOR).ln()).collect();
    let mut cep = sp.cepstrum(&log_half);
    for (n, c) in cep.iter_mut().enumerate().skip(1) {
        let q = n.min(nfft - n) as f64 / fs;
        let arg = PI * f0 * q;
        let smoothing = arg.sin() / arg;
        let recovery = 1.0 - 2.0 * LIFTER_Q1 + 2.0 * LIFTER_Q1 * (2.0 * PI * q * f0).cos();
        *c *= smoothing * recovery;
    }
    sp.from_cepstrum(&cep).into_iter().map(f64::exp).collect()
}

/// Mean of the power spectrum over `[f - f0/2, f + f0/2]`, mirrored at 0 and Nyquist.
fn smooth_over_f0(power: &[f64], f0: f64, fs: f64, nfft: usize) -> Vec<f64> {
    let bins = power.len();
    let df = fs / nfft as f64;
    let width = f0 / df;
    let margin = (width / 2.0).ceil() as usize + 2;
    // extended spectrum indexed from -margin to bins-1+margin
    let ext: Vec<f64> = (0..bins + 2 * margin)
        .map(|k| {
            let i = k as i64 - margin as i64;
            let last = (bins - 1) as i64;
            let j = if i < 0 {
                -i
            } else if i > last {
                2 * last - i
            } else {
                i
            };
            power[j.clamp(0, last) as usize]
        })
        .collect();
    // integral of the step-interpolated spectrum; bin k covers [k - 0.5, k + 0.5)
    let mut cum = Vec::with_capacity(ext.len() + 1);
    cum.push(0.0);
    for p in &ext {
        cum.push(cum.last().unwrap() + p);
    }
    let integral = |pos: f64| {
        // pos in extended-bin coordinates, shifted so bin k starts at k
        let p = pos.clamp(0.0, ext.len() as f64);
        let i = p.floor() as usize;
        if i >= ext.len() {
            return cum[ext.len()];
        }
        cum[i] + (p - i as f64) * ext[i]
    };
    (0..bins)
        .map(|k| {
            let c = k as f64 + margin as f64 + 0.5;
            (integral(c + width / 2.0) - integral(c - width / 2.0)) / width
        })
        .collect()
}

fn band_aperiodicity(
    x: &[f64],
    center: i64,
    half: i64,
    f0: f64,
    fs: f64,
    edges: &[f64],
    sp: &mut Spectral,
) -> Vec<f64> {
    let seg = segment(x, center, half);
    let len = seg.len() as f64;
    let window: Vec<f64> = (0..seg.len()).map(|k| 0.5 - 0.5 * (2.0 * PI * (k as f64 + 0.5) / len).cos()).collect();
    let windowed: Vec<f64> = seg.iter().zip(&window).map(|(s, w)| s * w).collect();
    let power = sp.power(&windowed);
    let win_power = sp.power(&window);
    let nfft = sp.nfft as f64;
    let lag = fs / f0;

    // autocorrelation at a fractional lag from a one-sided power spectrum
    let autocorr = |p: &[f64], lo: usize, hi: usize, lag: f64| -> (f64, f64) {
        let mut at_zero = 0.0;
        let mut at_lag = 0.0;
        for (k, &v) in p.iter().enumerate().take(hi + 1).skip(lo) {
            let weight = if k == 0 || k == p.len() - 1 { 1.0 } else { 2.0 };
            at_zero += weight * v;
            at_lag += weight * v * (2.0 * PI * k as f64 * lag / nfft).cos();
        }
        (at_zero, at_lag)
    };
    let window_corr = |lag: f64| {
        let (w0, wl) = autocorr(&win_power, 0, win_power.len() - 1, lag);
        (wl / w0).max(1e-3)
    };

    let bin_of = |hz: f64| ((hz / fs * nfft).round() as usize).min(power.len() - 1);
    let mut lo = 0usize;
    let mut lo_hz = 0.0;
    edges
        .iter()
        .map(|&hi_hz| {
            let hi = bin_of(hi_hz);
            // F0 drift inside the window shifts the best lag; search a
            // neighbourhood no wider than a quarter cycle of the band centre
            let centre = if lo_hz > 0.0 { (lo_hz * hi_hz).sqrt() } else { hi_hz / 2.0 };
            let reach = (LAG_SEARCH * lag).min(0.25 * fs / centre);
            let band_lo = lo;
            lo = hi + 1;
            lo_hz = hi_hz;
            let best = (0..=2 * LAG_STEPS)
                .map(|s| {
                    let l = lag + reach * (s as f64 - LAG_STEPS as f64) / LAG_STEPS as f64;
                    let (r0, rl) = autocorr(&power, band_lo, hi, l);
                    if r0 <= 0.0 {
                        0.0
                    } else {
                        rl / r0 / window_corr(l)
                    }
                })
                .fold(f64::NEG_INFINITY, f64::max);
            1.0 - best.clamp(0.0, 1.0)
        })
        .collect()
}

/// Swap in a new F0 track; envelope and aperiodicity are untouched.
pub fn replace_f0(analysis: &AnalysisResult, target: &F0Contour) -> Result<AnalysisResult> {
    if target.len() != analysis.f0.len() {
        return Err(DspError::LengthMismatch { got: target.len(), expected: analysis.f0.len() });
    }
    Ok(AnalysisResult { f0: F0Contour { hop: analysis.f0.hop, values: target.values.clone() }, ..analysis.clone() })
}

/// Per-bin aperiodicity by linear interpolation between band centres on a
/// log-frequency axis.
fn expand_aperiodicity(bands: &[f64], edges: &[f64], fs: f64, nfft: usize) -> Vec<f64> {
    let centers: Vec<f64> = edges
        .iter()
        .enumerate()
        .map(|(b, &hi)| {
            let lo = if b == 0 { hi / 2.0 } else { edges[b - 1] };
            (lo * hi).sqrt()
        })
        .collect();
    (0..=nfft / 2)
        .map(|k| {
            let f = (k as f64 * fs / nfft as f64).max(1.0);
            if f <= centers[0] {
                return bands[0];
            }
            if f >= centers[centers.len() - 1] {
                return bands[bands.len() - 1];
            }
            let b = centers.iter().position(|&c| c > f).unwrap();
            let (c0, c1) = (centers[b - 1].ln(), centers[b].ln());
            let t = (f.ln() - c0) / (c1 - c0);
            bands[b - 1] * (1.0 - t) + bands[b] * t
        })
        .collect()
}

/// Render a waveform of `n_frames * hop` samples from an analysis.
/// Noise excitation is drawn from a generator seeded with `seed`.
pub fn synthesize(analysis: &AnalysisResult, sample_rate: u32, seed: u64) -> Result<Waveform> {
    analysis.validate()?;
    if sample_rate != analysis.sample_rate {
        return Err(DspError::InvalidRate(sample_rate));
    }
    let fs = sample_rate as f64;
    let nfft = analysis.fft_size;
    let hop = hop_samples(analysis.f0.hop, sample_rate);
    let n_frames = analysis.n_frames();
    let out_len = n_frames * hop;
    let edges = band_edges(sample_rate, analysis.aperiodicity[0].len());
    let f0 = &analysis.f0.values;

    let f0_at = |t: f64| -> f64 {
        let p = t / hop as f64;
        let i = (p.floor() as usize).min(n_frames - 1);
        let j = (i + 1).min(n_frames - 1);
        let frac = p - i as f64;
        if f0[i] > 0.0 && f0[j] > 0.0 {
            f0[i] * (1.0 - frac) + f0[j] * frac
        } else if frac < 0.5 {
            f0[i]
        } else {
            f0[j]
        }
    };

    // excitation events: (position in samples, f0 or 0 for unvoiced)
    let mut events = Vec::new();
    let mut t = 0.0;
    while t < out_len as f64 {
        let f = f0_at(t);
        events.push((t, f));
        t += if f > 0.0 { fs / f } else { hop as f64 };
    }

    let mut planner = FftPlanner::new();
    let mut sp = Spectral::new(&mut planner, nfft);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![0.0; out_len + nfft];
    let mut noise = vec![Complex::default(); nfft];
    let lerp = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + (y - x) * t).collect() };

    for (e, &(pos, f)) in events.iter().enumerate() {
        // spectral parameters interpolated between the two neighbouring frames
        let p = pos / hop as f64;
        let i = (p.floor() as usize).min(n_frames - 1);
        let j = (i + 1).min(n_frames - 1);
        let frac = (p - i as f64).clamp(0.0, 1.0);
        let env = lerp(&analysis.envelope[i], &analysis.envelope[j], frac);
        let bands = lerp(&analysis.aperiodicity[i], &analysis.aperiodicity[j], frac);
        let ap = expand_aperiodicity(&bands, &edges, fs, nfft);
        let start = pos.floor() as usize;
        let delay = pos - start as f64;
        let next = events.get(e + 1).map_or(out_len as f64, |n| n.0);
        let seg_len = ((next.floor() as usize).saturating_sub(start)).clamp(1, nfft);

        let mut spectrum = vec![Complex::default(); nfft];
        if f > 0.0 {
            let period = fs / f;
            let amp: Vec<f64> =
                env.iter().zip(&ap).map(|(p, a)| (p * (1.0 - a).max(0.0) * period).sqrt()).collect();
            let h = sp.min_phase(&amp);
            for (k, s) in spectrum.iter_mut().enumerate() {
                let kk = if k <= nfft / 2 { k as f64 } else { k as f64 - nfft as f64 };
                let shift = Complex::from_polar(1.0, -2.0 * PI * kk * delay / nfft as f64);
                *s += h[k] * shift;
            }
        }
        let noise_amp: Vec<f64> = env
            .iter()
            .zip(&ap)
            .map(|(p, a)| (p * if f > 0.0 { *a } else { 1.0 }).sqrt())
            .collect();
        let hn = sp.min_phase(&noise_amp);
        for (k, n) in noise.iter_mut().enumerate() {
            *n = if k < seg_len { Complex::new(StandardNormal.sample(&mut rng), 0.0) } else { Complex::default() };
        }
        sp.fwd.process(&mut noise);
        for (k, s) in spectrum.iter_mut().enumerate() {
            *s += hn[k] * noise[k];
        }

        sp.inv.process(&mut spectrum);
        for (k, s) in spectrum.iter().enumerate() {
            if let Some(o) = out.get_mut(start + k) {
                *o += s.re / nfft as f64;
            }
        }
    }
    out.truncate(out_len);
    Ok(Waveform { samples: out, sample_rate })
}

const CACHE_MAGIC: &[u8; 4] = b"SVSA";
const CACHE_VERSION: u16 = 1;

impl AnalysisResult {
    /// Binary cache layout, all little-endian:
    ///
    /// | bytes | field |
    /// |---|---|
    /// | 4 | magic `SVSA` |
    /// | 2 | version (1) |
    /// | 2 | reserved, zero |
    /// | 4 | sample rate (u32) |
    /// | 8 | hop seconds (f64) |
    /// | 4 | frame count N (u32) |
    /// | 4 | FFT size (u32) |
    /// | 4 | band count B (u32) |
    /// | 8·N | F0 (f64) |
    /// | 8·N·(FFT/2+1) | envelope, frame-major (f64) |
    /// | 8·N·B | aperiodicity, frame-major (f64) |
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        self.validate()?;
        let bands = self.aperiodicity[0].len();
        w.write_all(CACHE_MAGIC)?;
        w.write_all(&CACHE_VERSION.to_le_bytes())?;
        w.write_all(&0u16.to_le_bytes())?;
        w.write_all(&self.sample_rate.to_le_bytes())?;
        w.write_all(&self.f0.hop.to_le_bytes())?;
        for v in [self.n_frames(), self.fft_size, bands] {
            w.write_all(&(v as u32).to_le_bytes())?;
        }
        let values = self.f0.values.iter().chain(self.envelope.iter().flatten()).chain(self.aperiodicity.iter().flatten());
        for v in values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != CACHE_MAGIC {
            return Err(DspError::Cache("bad magic".into()));
        }
        let mut b2 = [0u8; 2];
        r.read_exact(&mut b2)?;
        let version = u16::from_le_bytes(b2);
        if version != CACHE_VERSION {
            return Err(DspError::Cache(format!("unsupported version {version}")));
        }
        r.read_exact(&mut b2)?;
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        let mut u32_field = |r: &mut R| -> Result<u32> {
            r.read_exact(&mut b4)?;
            Ok(u32::from_le_bytes(b4))
        };
        let sample_rate = u32_field(&mut r)?;
        r.read_exact(&mut b8)?;
        let hop = f64::from_le_bytes(b8);
        let n = u32_field(&mut r)? as usize;
        let fft_size = u32_field(&mut r)? as usize;
        let bands = u32_field(&mut r)? as usize;
        let mut f64s = |count: usize| -> Result<Vec<f64>> {
            let mut out = Vec::with_capacity(count);
            for _ in 0..count {
                r.read_exact(&mut b8)?;
                out.push(f64::from_le_bytes(b8));
            }
            Ok(out)
        };
        let f0 = f64s(n)?;
        let bins = fft_size / 2 + 1;
        let envelope = f64s(n * bins)?.chunks(bins).map(<[f64]>::to_vec).collect();
        let aperiodicity = f64s(n * bands)?.chunks(bands).map(<[f64]>::to_vec).collect();
        let result = AnalysisResult { sample_rate, fft_size, f0: F0Contour { hop, values: f0 }, envelope, aperiodicity };
        result.validate()?;
        Ok(result)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    const FS: u32 = 24_000;

    /// Two-pole resonator coefficients for a formant at `freq` with bandwidth `bw`.
    fn resonator(freq: f64, bw: f64) -> (f64, f64) {
        let r = (-PI * bw / FS as f64).exp();
        (2.0 * r * (2.0 * PI * freq / FS as f64).cos(), -r * r)
    }

    fn vowel(f0: f64, formants: &[(f64, f64)], secs: f64) -> Waveform {
        let n = (FS as f64 * secs) as usize;
        let period = FS as f64 / f0;
        let mut x: Vec<f64> = (0..n).map(|i| if (i as f64 % period) < 1.0 { 1.0 } else { 0.0 }).collect();
        for &(f, bw) in formants {
            let (a1, a2) = resonator(f, bw);
            let (mut y1, mut y2) = (0.0, 0.0);
            for s in x.iter_mut() {
                let y = *s + a1 * y1 + a2 * y2;
                y2 = y1;
                y1 = y;
                *s = y;
            }
        }
        let peak = x.iter().fold(0.0f64, |m, s| m.max(s.abs()));
        Waveform::new(x.iter().map(|s| 0.5 * s / peak).collect(), FS)
    }

    fn local_maxima(env: &[f64]) -> Vec<usize> {
        (1..env.len() - 1).filter(|&k| env[k] > env[k - 1] && env[k] >= env[k + 1]).collect()
    }

    #[test]
    fn envelope_peaks_at_formants() {
        // F0 125 Hz, formants on harmonics 5, 13 and 21
        let formants = [(625.0, 60.0), (1625.0, 80.0), (2625.0, 100.0)];
        let w = vowel(125.0, &formants, 0.6);
        let a = analyze(&w, &VocoderConfig::default()).unwrap();
        let bin = FS as f64 / 1024.0;
        let mid = a.n_frames() / 2;
        for frame in [mid - 10, mid, mid + 10] {
            let env = &a.envelope[frame];
            let peaks = local_maxima(env);
            for &(f, _) in &formants {
                let nearest = peaks
                    .iter()
                    .map(|&k| k as f64 * bin)
                    .min_by(|x, y| (x - f).abs().total_cmp(&(y - f).abs()))
                    .unwrap();
                assert!((nearest - f).abs() <= bin, "frame {frame}: formant {f} nearest peak {nearest}");
            }
        }
    }

    #[test]
    fn stream_lengths_agree_and_values_in_range() {
        let w = vowel(150.0, &[(700.0, 80.0)], 0.3);
        let a = analyze(&w, &VocoderConfig::default()).unwrap();
        assert_eq!(a.envelope.len(), a.f0.len());
        assert_eq!(a.aperiodicity.len(), a.f0.len());
        assert!(a.envelope.iter().flatten().all(|&v| v > 0.0));
        assert!(a.aperiodicity.iter().flatten().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn pulse_train_is_periodic_noise_is_not() {
        let w = vowel(125.0, &[(625.0, 60.0), (1625.0, 80.0)], 0.5);
        let a = analyze(&w, &VocoderConfig::default()).unwrap();
        let mid = a.n_frames() / 2;
        assert!(a.aperiodicity[mid].iter().all(|&v| v < 0.2), "{:?}", a.aperiodicity[mid]);

        // force the periodicity measure onto white noise
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let noise: Vec<f64> = (0..12_000).map(|_| { let z: f64 = StandardNormal.sample(&mut rng); 0.2 * z }).collect();
        let edges = band_edges(FS, 5);
        let mut planner = FftPlanner::new();
        let mut sp = Spectral::new(&mut planner, 1024);
        let mut mean = vec![0.0; 5];
        let frames = 40;
        for i in 0..frames {
            let ap = band_aperiodicity(&noise, 2000 + 200 * i, 192, 125.0, FS as f64, &edges, &mut sp);
            for (m, v) in mean.iter_mut().zip(ap) {
                *m += v / frames as f64;
            }
        }
        assert!(mean.iter().all(|&m| m > 0.5), "{mean:?}");

        let white = Waveform::new(noise, FS);
        let a = analyze(&white, &VocoderConfig::default()).unwrap();
        let mean_ap: f64 = a.aperiodicity.iter().flatten().sum::<f64>() / (a.n_frames() * 5) as f64;
        assert!(mean_ap > 0.9, "{mean_ap}");
    }

    #[test]
    fn replace_f0_swaps_only_pitch() {
        let w = vowel(150.0, &[(700.0, 80.0)], 0.3);
        let a = analyze(&w, &VocoderConfig::default()).unwrap();
        let same = replace_f0(&a, &a.f0).unwrap();
        assert_eq!(same, a);
        let target = F0Contour::new(a.f0.hop, a.f0.values.iter().map(|&f| if f > 0.0 { 220.0 } else { 0.0 }).collect());
        let b = replace_f0(&a, &target).unwrap();
        assert!(b.f0.values.iter().all(|&f| f == 0.0 || f == 220.0));
        assert_eq!(b.envelope, a.envelope);
        assert_eq!(b.aperiodicity, a.aperiodicity);
        let short = F0Contour::new(a.f0.hop, vec![0.0; 3]);
        assert!(matches!(replace_f0(&a, &short), Err(DspError::LengthMismatch { .. })));
    }

    #[test]
    fn resynthesis_keeps_pitch() {
        let w = vowel(140.0, &[(700.0, 80.0), (1200.0, 90.0), (2600.0, 120.0)], 0.5);
        let a = analyze(&w, &VocoderConfig::default()).unwrap();
        let y = synthesize(&a, FS, 0).unwrap();
        assert_eq!(y.len(), a.n_frames() * 120);
        let c = extract_f0(&y, &F0Config::default()).unwrap();
        let inner = &c.values[10..c.len() - 10];
        let good = inner.iter().filter(|&&f| (1200.0 * (f / 140.0).log2()).abs() < 20.0).count();
        assert!(good as f64 > 0.9 * inner.len() as f64, "{good}/{}", inner.len());
    }

    #[test]
    fn unvoiced_analysis_synthesizes_flat_noise() {
        let frames = 100;
        let a = AnalysisResult {
            sample_rate: FS,
            fft_size: 1024,
            f0: F0Contour::new(0.005, vec![0.0; frames]),
            envelope: vec![vec![1e-3; 513]; frames],
            aperiodicity: vec![vec![1.0; 5]; frames],
        };
        let y = synthesize(&a, FS, 9).unwrap();
        // spectral flatness of the whole output (geometric / arithmetic mean of power)
        let mut planner = FftPlanner::new();
        let mut sp = Spectral::new(&mut planner, 8192);
        let p: Vec<f64> = sp.power(&y.samples[..8192]).into_iter().skip(1).collect();
        let smoothed: Vec<f64> = p.chunks(32).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
        let geo = (smoothed.iter().map(|v| v.ln()).sum::<f64>() / smoothed.len() as f64).exp();
        let arith = smoothed.iter().sum::<f64>() / smoothed.len() as f64;
        assert!(geo / arith > 0.8, "flatness {}", geo / arith);
        let rms = (y.samples.iter().map(|s| s * s).sum::<f64>() / y.len() as f64).sqrt();
        assert!((rms - 1e-3f64.sqrt()).abs() < 0.2 * 1e-3f64.sqrt(), "rms {rms}");
    }

    #[test]
    fn zero_frames_rejected() {
        let a = AnalysisResult {
            sample_rate: FS,
            fft_size: 1024,
            f0: F0Contour::new(0.005, vec![]),
            envelope: vec![],
            aperiodicity: vec![],
        };
        assert!(matches!(synthesize(&a, FS, 0), Err(DspError::Empty)));
    }

    #[test]
    fn cache_round_trip() {
        let w = vowel(150.0, &[(700.0, 80.0)], 0.2);
        let a = analyze(&w, &VocoderConfig::default()).unwrap();
        let mut bytes = Vec::new();
        a.write_to(&mut bytes).unwrap();
        assert_eq!(&bytes[..4], b"SVSA");
        let back = AnalysisResult::read_from(bytes.as_slice()).unwrap();
        assert_eq!(back, a);
        bytes[4] = 9;
        assert!(AnalysisResult::read_from(bytes.as_slice()).is_err());
    }
}
