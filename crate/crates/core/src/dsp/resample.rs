use super::{DspError, Result, Waveform};

/// Zero crossings of the sinc on each side of the kernel centre.
const HALF_ZEROS: f64 = 16.0;
/// Cutoff as a fraction of the lower Nyquist frequency.
const ROLLOFF: f64 = 0.95;
const KAISER_BETA: f64 = 8.6;
/// Above this many phases the kernel is evaluated per output sample.
const MAX_TABLE_PHASES: u64 = 2048;

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half = x / 2.0;
    for k in 1..64 {
        term *= (half / k as f64).powi(2);
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

struct Kernel {
    cutoff: f64,
    half_width: f64,
    norm: f64,
}

impl Kernel {
    fn new(ratio: f64) -> Self {
        let cutoff = ROLLOFF * ratio.min(1.0);
        Kernel { cutoff, half_width: HALF_ZEROS / cutoff, norm: bessel_i0(KAISER_BETA) }
    }

    /// Windowed-sinc value at `x` input samples from the centre.
    fn at(&self, x: f64) -> f64 {
        let r = x / self.half_width;
        if r.abs() >= 1.0 {
            return 0.0;
        }
        let window = bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / self.norm;
        let arg = std::f64::consts::PI * self.cutoff * x;
        let sinc = if arg.abs() < 1e-12 { 1.0 } else { arg.sin() / arg };
        self.cutoff * sinc * window
    }
}

/// Windowed-sinc polyphase resampling to `target_rate`.
///
/// Output has `round(n * target / source)` samples. The rate ratio is reduced
/// to `up / down`; output sample `n` sits at input position `n * down / up`
/// and uses phase `(n * down) mod up` of the kernel.
pub fn resample(waveform: &Waveform, target_rate: u32) -> Result<Waveform> {
    if target_rate == 0 {
        return Err(DspError::InvalidRate(target_rate));
    }
    if waveform.sample_rate == 0 {
        return Err(DspError::InvalidRate(waveform.sample_rate));
    }
    if target_rate == waveform.sample_rate {
        return Ok(waveform.clone());
    }
    let src = waveform.sample_rate as u64;
    let dst = target_rate as u64;
    let g = gcd(src, dst);
    let (up, down) = (dst / g, src / g);
    let kernel = Kernel::new(dst as f64 / src as f64);
    let reach = kernel.half_width.ceil() as i64;
    let taps = (2 * reach + 1) as usize;

    let n_in = waveform.samples.len();
    let n_out = ((n_in as u128 * dst as u128 + src as u128 / 2) / src as u128) as usize;
    let x = &waveform.samples;

    // table[p][k] = kernel(frac_p + reach - k) with frac_p = p / up
    let table: Option<Vec<Vec<f64>>> = (up <= MAX_TABLE_PHASES).then(|| {
        (0..up)
            .map(|p| {
                let frac = p as f64 / up as f64;
                (0..taps).map(|k| kernel.at(frac + reach as f64 - k as f64)).collect()
            })
            .collect()
    });

    let mut out = Vec::with_capacity(n_out);
    let mut scratch = vec![0.0; taps];
    for n in 0..n_out as u64 {
        let pos = n * down;
        let base = (pos / up) as i64;
        let phase = pos % up;
        let coeffs: &[f64] = match &table {
            Some(t) => &t[phase as usize],
            None => {
                let frac = phase as f64 / up as f64;
                for (k, c) in scratch.iter_mut().enumerate() {
                    *c = kernel.at(frac + reach as f64 - k as f64);
                }
                &scratch
            }
        };
        let mut acc = 0.0;
        for (k, c) in coeffs.iter().enumerate() {
            let j = base - reach + k as i64;
            if j >= 0 && (j as usize) < n_in {
                acc += c * x[j as usize];
            }
        }
        out.push(acc);
    }
    Ok(Waveform { samples: out, sample_rate: target_rate })
}
