//! YIN-style F0 estimation: cumulative-mean-normalized difference function,
//! absolute threshold, parabolic refinement.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{frame_count, hop_samples, DspError, F0Contour, Result, Waveform, DEFAULT_HOP};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F0Config {
    pub hop: f64,
    pub fmin: f64,
    pub fmax: f64,
    /// The first lag whose normalized difference dips below this wins.
    pub threshold: f64,
    /// Failing that, the global minimum is accepted when below this.
    pub fallback_threshold: f64,
    /// Frames quieter than this RMS are unvoiced without further analysis.
    pub silence_rms: f64,
    /// Frames this many dB below the loudest frame are unvoiced.
    pub relative_silence_db: f64,
    /// Clean the raw track: see [`clean_contour`].
    pub clean: bool,
}

impl Default for F0Config {
    fn default() -> Self {
        F0Config { hop: DEFAULT_HOP, fmin: 65.0, fmax: 1047.0, threshold: 0.2, fallback_threshold: 0.35, silence_rms: 1e-4, relative_silence_db: -40.0, clean: true }
    }
}

struct Geometry {
    tau_min: usize,
    tau_max: usize,
    /// Integration window length.
    window: usize,
}

impl Geometry {
    fn new(sample_rate: u32, cfg: &F0Config) -> Self {
        let fs = sample_rate as f64;
        let tau_min = ((fs / cfg.fmax).floor() as usize).max(2);
        let tau_max = (fs / cfg.fmin).ceil() as usize + 1;
        Geometry { tau_min, tau_max, window: tau_max }
    }

    fn span(&self) -> usize {
        self.window + self.tau_max + 1
    }
}

/// F0 contour with one frame per `cfg.hop`, frame `i` centred at `i * hop`.
pub fn extract_f0(waveform: &Waveform, cfg: &F0Config) -> Result<F0Contour> {
    if waveform.sample_rate == 0 || (waveform.sample_rate as f64) < 4.0 * cfg.fmax {
        return Err(DspError::InvalidRate(waveform.sample_rate));
    }
    let geo = Geometry::new(waveform.sample_rate, cfg);
    let span = geo.span();
    if waveform.samples.len() < 2 * span {
        return Err(DspError::TooShort { got: waveform.samples.len(), need: 2 * span });
    }
    let hop = hop_samples(cfg.hop, waveform.sample_rate);
    let n_frames = frame_count(waveform.samples.len(), hop);

    let nfft = (span + geo.window).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(nfft);
    let inv = planner.plan_fft_inverse(nfft);
    let mut est = FrameEstimator {
        geo: &geo,
        cfg,
        fs: waveform.sample_rate as f64,
        seg: vec![0.0; span],
        head: vec![Complex::default(); nfft],
        full: vec![Complex::default(); nfft],
        diff: vec![0.0; geo.tau_max + 2],
        fwd,
        inv,
    };

    let x = &waveform.samples;
    let mut values = Vec::with_capacity(n_frames);
    let mut levels = Vec::with_capacity(n_frames);
    for i in 0..n_frames {
        let start = (i * hop) as i64 - (span / 2) as i64;
        for (k, s) in est.seg.iter_mut().enumerate() {
            let j = start + k as i64;
            *s = if j >= 0 && (j as usize) < x.len() { x[j as usize] } else { 0.0 };
        }
        levels.push(est.rms());
        values.push(est.frame_f0());
    }
    let loudest = levels.iter().copied().fold(0.0, f64::max);
    let floor = loudest * 10f64.powf(cfg.relative_silence_db / 20.0);
    for (v, level) in values.iter_mut().zip(&levels) {
        if *level < floor {
            *v = 0.0;
        }
    }
    if cfg.clean {
        clean_contour(&mut values);
    }
    Ok(F0Contour { hop: cfg.hop, values })
}

/// Half-width of the median window used to spot outliers.
const MEDIAN_REACH: usize = 8;
/// Frames further than this from the local median are replaced by it.
const OUTLIER_SEMITONES: f64 = 3.0;
/// Unvoiced gaps up to this many frames between voiced frames are bridged.
const MAX_GAP: usize = 2;
/// Voiced runs shorter than this are dropped.
const MIN_RUN: usize = 3;

/// Repair the usual frame-wise estimator slips in place:
/// values far from the local median of voiced frames are pulled onto it,
/// short unvoiced gaps inside voiced stretches are bridged log-linearly,
/// and isolated voiced islands are removed.
pub fn clean_contour(values: &mut [f64]) {
    let n = values.len();
    let raw = values.to_vec();
    for i in 0..n {
        if raw[i] <= 0.0 {
            continue;
        }
        let lo = i.saturating_sub(MEDIAN_REACH);
        let hi = (i + MEDIAN_REACH + 1).min(n);
        let mut window: Vec<f64> = raw[lo..hi].iter().copied().filter(|&f| f > 0.0).collect();
        if window.len() < 3 {
            continue;
        }
        window.sort_by(f64::total_cmp);
        let median = window[window.len() / 2];
        if (12.0 * (raw[i] / median).log2()).abs() > OUTLIER_SEMITONES {
            values[i] = median;
        }
    }

    let mut i = 0;
    while i < n {
        if values[i] > 0.0 {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && values[i] <= 0.0 {
            i += 1;
        }
        if start > 0 && i < n && i - start <= MAX_GAP {
            let (a, b) = (values[start - 1].ln(), values[i].ln());
            let span = (i - start + 1) as f64;
            for (k, v) in values[start..i].iter_mut().enumerate() {
                let t = (k + 1) as f64 / span;
                *v = (a + (b - a) * t).exp();
            }
        }
    }

    let mut i = 0;
    while i < n {
        if values[i] <= 0.0 {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && values[i] > 0.0 {
            i += 1;
        }
        if i - start < MIN_RUN {
            values[start..i].iter_mut().for_each(|v| *v = 0.0);
        }
    }
}

struct FrameEstimator<'a> {
    geo: &'a Geometry,
    cfg: &'a F0Config,
    fs: f64,
    seg: Vec<f64>,
    head: Vec<Complex<f64>>,
    full: Vec<Complex<f64>>,
    diff: Vec<f64>,
    fwd: std::sync::Arc<dyn rustfft::Fft<f64>>,
    inv: std::sync::Arc<dyn rustfft::Fft<f64>>,
}

impl FrameEstimator<'_> {
    fn rms(&self) -> f64 {
        (self.seg.iter().map(|s| s * s).sum::<f64>() / self.seg.len() as f64).sqrt()
    }

    fn frame_f0(&mut self) -> f64 {
        let w = self.geo.window;
        let tau_max = self.geo.tau_max;
        if self.rms() < self.cfg.silence_rms {
            return 0.0;
        }

        // r(tau) = sum_{j<w} x[j] x[j+tau] via FFT cross-correlation
        let n = self.head.len();
        for k in 0..n {
            self.head[k] = Complex::new(if k < w { self.seg[k] } else { 0.0 }, 0.0);
            self.full[k] = Complex::new(self.seg.get(k).copied().unwrap_or(0.0), 0.0);
        }
        self.fwd.process(&mut self.head);
        self.fwd.process(&mut self.full);
        for (f, h) in self.full.iter_mut().zip(&self.head) {
            *f *= h.conj();
        }
        self.inv.process(&mut self.full);
        let scale = 1.0 / n as f64;

        // d(tau) = e(0) + e(tau) - 2 r(tau), with windowed energies from a running sum
        let mut prefix = Vec::with_capacity(self.seg.len() + 1);
        prefix.push(0.0);
        for s in &self.seg {
            prefix.push(prefix.last().unwrap() + s * s);
        }
        let e0 = prefix[w];
        self.diff[0] = 0.0;
        for tau in 1..=tau_max {
            let e_tau = prefix[tau + w] - prefix[tau];
            self.diff[tau] = (e0 + e_tau - 2.0 * self.full[tau].re * scale).max(0.0);
        }

        // cumulative mean normalization
        let mut running = 0.0;
        let mut cmnd = vec![1.0; tau_max + 1];
        for tau in 1..=tau_max {
            running += self.diff[tau];
            cmnd[tau] = if running > 0.0 { self.diff[tau] * tau as f64 / running } else { 1.0 };
        }

        let mut tau = self.geo.tau_min;
        let found = loop {
            if tau >= tau_max {
                break None;
            }
            if cmnd[tau] < self.cfg.threshold {
                while tau + 1 < tau_max && cmnd[tau + 1] < cmnd[tau] {
                    tau += 1;
                }
                break Some(tau);
            }
            tau += 1;
        };
        let found = found.or_else(|| {
            (self.geo.tau_min..tau_max)
                .min_by(|&a, &b| cmnd[a].total_cmp(&cmnd[b]))
                .filter(|&t| cmnd[t] < self.cfg.fallback_threshold)
        });
        let Some(tau) = found else { return 0.0 };

        let refined = if tau > 1 && tau < tau_max {
            let (a, b, c) = (cmnd[tau - 1], cmnd[tau], cmnd[tau + 1]);
            let denom = a - 2.0 * b + c;
            if denom.abs() > 1e-12 {
                tau as f64 + 0.5 * (a - c) / denom
            } else {
                tau as f64
            }
        } else {
            tau as f64
        };
        let f0 = self.fs / refined;
        if f0 < self.cfg.fmin || f0 > self.cfg.fmax {
            0.0
        } else {
            f0
        }
    }
}
