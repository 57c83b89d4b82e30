use super::{DspError, F0Contour, Result};
use crate::formats::Interval;

pub fn midi_from_hz(f: f64) -> Result<f64> {
    if !(f > 0.0) {
        return Err(DspError::NonPositiveFrequency(f));
    }
    Ok(69.0 + 12.0 * (f / 440.0).log2())
}

pub fn hz_from_midi(m: f64) -> f64 {
    440.0 * ((m - 69.0) / 12.0).exp2()
}

/// Scale voiced frames by `2^(semitones/12)`. Values that would exceed
/// `max_hz` are clamped there.
pub fn transpose_f0(contour: &F0Contour, semitones: f64, max_hz: f64) -> F0Contour {
    let factor = (semitones / 12.0).exp2();
    let mut clamped = 0usize;
    let values = contour
        .values
        .iter()
        .map(|&f| {
            if f <= 0.0 {
                return 0.0;
            }
            let g = f * factor;
            if g > max_hz {
                clamped += 1;
                max_hz
            } else {
                g
            }
        })
        .collect();
    if clamped > 0 {
        log::warn!("transpose by {semitones} st: {clamped} frames clamped to {max_hz} Hz");
    }
    F0Contour { hop: contour.hop, values }
}

/// A segment with its averaged pitch, `note == 0` for a rest.
#[derive(Debug, Clone, PartialEq)]
pub struct NoteSegment {
    pub segment: Interval,
    pub note: u8,
}

/// Per segment: log-domain mean of the voiced frames whose centres fall
/// inside it, rounded to the nearest MIDI note. No voiced frame → rest.
pub fn average_f0_by_segments(contour: &F0Contour, segments: &[Interval]) -> Vec<NoteSegment> {
    segments
        .iter()
        .map(|seg| {
            let first = (seg.start / contour.hop).ceil().max(0.0) as usize;
            let mut sum = 0.0;
            let mut n = 0usize;
            for (i, &f) in contour.values.iter().enumerate().skip(first) {
                let t = i as f64 * contour.hop;
                if t >= seg.end {
                    break;
                }
                if f > 0.0 {
                    sum += f.log2();
                    n += 1;
                }
            }
            let note = if n == 0 {
                0
            } else {
                let hz = (sum / n as f64).exp2();
                midi_from_hz(hz).map_or(0, |m| m.round().clamp(1.0, 127.0) as u8)
            };
            NoteSegment { segment: seg.clone(), note }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn anchors() {
        assert_eq!(midi_from_hz(440.0).unwrap(), 69.0);
        assert!((midi_from_hz(220.0).unwrap() - 57.0).abs() < 1e-12);
        assert!(midi_from_hz(0.0).is_err());
        assert!(midi_from_hz(-3.0).is_err());
    }

    #[test]
    fn transpose_examples() {
        let c = F0Contour::new(0.005, vec![220.0, 0.0, 440.0]);
        assert_eq!(transpose_f0(&c, 12.0, 12_000.0).values, vec![440.0, 0.0, 880.0]);
        assert_eq!(transpose_f0(&c, 0.0, 12_000.0), c);
        let up8 = transpose_f0(&F0Contour::new(0.005, vec![440.0]), 8.0, 12_000.0);
        assert!((up8.values[0] - 698.456_462_866_008).abs() < 1e-9);
        let clamped = transpose_f0(&c, 24.0, 1000.0);
        assert_eq!(clamped.values, vec![880.0, 0.0, 1000.0]);
    }

    fn seg(start: f64, end: f64) -> Interval {
        Interval { start, end, label: "w".into() }
    }

    #[test]
    fn segment_averages() {
        let c = F0Contour::new(0.01, vec![220.0; 100]);
        assert_eq!(average_f0_by_segments(&c, &[seg(0.0, 1.0)])[0].note, 57);
        let silent = F0Contour::new(0.01, vec![0.0; 100]);
        assert_eq!(average_f0_by_segments(&silent, &[seg(0.2, 0.5)])[0].note, 0);
        // geometric mean of 220 and 440 is 311.13 Hz → MIDI 63
        let mut v = vec![220.0; 50];
        v.extend(vec![440.0; 50]);
        let mixed = F0Contour::new(0.01, v);
        assert_eq!(average_f0_by_segments(&mixed, &[seg(0.0, 1.0)])[0].note, 63);
    }

    proptest! {
        #[test]
        fn midi_hz_inverse(f in 1.0f64..20_000.0) {
            let back = hz_from_midi(midi_from_hz(f).unwrap());
            prop_assert!((back - f).abs() <= 1e-9 * f);
        }

        #[test]
        fn midi_monotone(a in 1.0f64..20_000.0, b in 1.0f64..20_000.0) {
            prop_assume!(a < b);
            prop_assert!(midi_from_hz(a).unwrap() < midi_from_hz(b).unwrap());
        }

        #[test]
        fn transpose_round_trip(values in prop::collection::vec(prop_oneof![Just(0.0), 50.0f64..1000.0], 1..64), s in -24.0f64..24.0) {
            let c = F0Contour::new(0.005, values);
            let back = transpose_f0(&transpose_f0(&c, s, 1e9), -s, 1e9);
            for (a, b) in c.values.iter().zip(&back.values) {
                prop_assert_eq!(*a == 0.0, *b == 0.0);
                prop_assert!((a - b).abs() <= 1e-9 * a.abs());
            }
        }
    }
}
