//! Acceptance criteria 1 to 10, one PASS/FAIL line each on stderr.

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use svsprep::dsp::{
    analyze, extract_f0, midi_from_hz, read_wav, synthesize, transpose_f0, Downmix, F0Config, F0Contour, VocoderConfig,
    Waveform,
};
use svsprep::formats::{find_tier, plan_conversion, read_textgrid, AlignmentTier, VoicePart, PITCH_SHIFT_TABLE};
use svsprep::lexicon::{g2p_text, Language, Lexicon};
use svsprep::metrics::{audio_metrics, cosine_sim, mcd_over_path, wer, DtwPath, McepConfig, McepFrames};
use svsprep::pseudo::{make_pseudo_singing, render_melody, MelodyBank, PseudoConfig, UtteranceInfo, PHONE_TIER_NAMES};
use svsprep::score::{adapt_average, adapt_proportional, is_silence, note_onsets, PhonemeEvent, RatioTable, Style};
use svsprep_cli::commands::adapt::{self, RatioSources};
use svsprep_cli::config::Strategy;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn core_fixture(name: &str) -> (Waveform, Vec<AlignmentTier>) {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures");
    let wav = read_wav(&dir.join(format!("{name}.wav")), Downmix::Reject).unwrap();
    (wav, read_textgrid(&dir.join(format!("{name}.TextGrid"))).unwrap().tiers)
}

fn cli_fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn cents(a: f64, b: f64) -> f64 {
    1200.0 * (a / b).log2()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn unit_mappings() -> Outcome {
    let lex = Lexicon::bundled();
    let golden = [
        ("rang", "让", "R AE NG"),
        ("wo", "我", "W AO"),
        ("nuan", "暖", "N UW AE N"),
        ("yang", "阳", "Y AE NG"),
        ("zhui", "追", "JH UW IY"),
        ("cat", "cat", "K AE T"),
        ("fan", "fan", "F AE N"),
        ("song", "song", "S AO NG"),
        ("total", "total", "T OW T AH L"),
        ("story", "story", "S T AO R IY"),
    ];
    for (unit, text, want) in golden {
        let seq = g2p_text(text, lex).map_err(|e| format!("{text}: {e}"))?;
        ensure(seq.phonemes.join(" ") == want, || format!("{text}: {:?} != {want}", seq.phonemes))?;
        if unit != text {
            let direct = lex.syllable_phones(unit).map_err(|e| format!("{unit}: {e}"))?;
            ensure(direct.join(" ") == want, || format!("{unit}: {direct:?} != {want}"))?;
        }
    }
    Ok("10/10 mappings".into())
}

fn mixed_lyric_tokens() -> Outcome {
    let seq = g2p_text("我和你 from one world", Lexicon::bundled()).map_err(|e| e.to_string())?;
    let mut want = vec![1u8; 6];
    want.extend([0u8; 11]);
    ensure(seq.phonemes.len() == seq.language_tokens.len(), || "length mismatch".into())?;
    ensure(seq.language_tokens == want, || format!("tokens {:?}", seq.language_tokens))?;
    Ok(format!("17 phones: {}", seq.phonemes.join(" ")))
}

fn cun_adaptation() -> Outcome {
    let lex = Lexicon::bundled();
    let input = std::fs::read_to_string(cli_fixture("cun.json")).unwrap();
    let rounded = |events: &[PhonemeEvent]| -> Vec<(String, f64)> {
        events.iter().map(|e| (e.phoneme.clone(), (e.ph_dur * 1e4).round() / 1e4)).collect()
    };
    let rows = |spec: &[(&str, f64)]| -> Vec<(String, f64)> { spec.iter().map(|&(p, d)| (p.to_string(), d)).collect() };

    let avg = adapt::run(&input, Strategy::Average, RatioSources::default(), lex).map_err(|e| e.to_string())?;
    let want = rows(&[("T", 0.09), ("S", 0.09), ("UW", 0.0817), ("AH", 0.0817), ("N", 0.0817), ("UW", 0.0983), ("AH", 0.0983), ("N", 0.0983)]);
    ensure(rounded(&avg.records[0].events) == want, || format!("average {:?}", rounded(&avg.records[0].events)))?;

    let ratios = cli_fixture("cun_ratios.json");
    let sources = RatioSources { alignments: None, ratios: Some(&ratios) };
    let prop = adapt::run(&input, Strategy::Proportional, sources, lex).map_err(|e| e.to_string())?;
    let events = &prop.records[0].events;
    let want = rows(&[("T", 0.036), ("S", 0.144), ("UW", 0.18), ("AH", 0.065), ("AH", 0.115), ("N", 0.18)]);
    ensure(rounded(events) == want, || format!("proportional {:?}", rounded(events)))?;
    // the AH split falls on the note boundary 0.245 into the final
    let into_final: f64 = events[2..4].iter().map(|e| e.ph_dur).sum();
    ensure((into_final - 0.245).abs() < 1e-12, || format!("boundary at {into_final}"))?;
    ensure(events[4].is_slur && events[4].note_midi == 62, || "second AH does not carry the slur note".into())?;
    Ok("average 8 rows, proportional 6 rows".into())
}

fn random_annotation(rng: &mut ChaCha8Rng, syllables: &[String], lex: &Lexicon) -> Vec<PhonemeEvent> {
    let ev = |phoneme: &str, ph_dur: f64, note_midi: u8, note_dur: f64, is_slur: bool| PhonemeEvent {
        phoneme: phoneme.to_string(),
        ph_dur,
        note_midi,
        note_dur,
        is_slur,
        language: Language::Mandarin,
        style: Style::Singing,
    };
    let mut events = Vec::new();
    for _ in 0..rng.gen_range(1..=12) {
        if rng.gen_bool(0.1) {
            let d = rng.gen_range(0.05..0.6);
            events.push(ev("SP", d, 0, d, false));
            continue;
        }
        let syllable = &syllables[rng.gen_range(0..syllables.len())];
        let units = lex.syllable_units(syllable).unwrap();
        let note = rng.gen_range(48..=76);
        let durs: Vec<f64> = units.iter().map(|_| rng.gen_range(0.01..0.5)).collect();
        let span: f64 = durs.iter().sum();
        for (u, d) in units.iter().zip(&durs) {
            events.push(ev(u, *d, note, span, false));
        }
        let last = units.last().unwrap();
        for _ in 0..rng.gen_range(0..=2) {
            let d = rng.gen_range(0.02..0.8);
            events.push(ev(last, d, rng.gen_range(48..=76), d, true));
        }
    }
    events
}

fn duration_conservation() -> Outcome {
    let lex = Lexicon::bundled();
    let syllables: Vec<String> =
        lex.syllable_inventory().into_iter().filter(|s| lex.syllable_units(s).is_ok()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for case in 0..1000 {
        let events = random_annotation(&mut rng, &syllables, lex);
        let mut ratios = RatioTable::new();
        for e in events.iter().filter(|e| !is_silence(&e.phoneme)) {
            let exp = lex.pinyin_unit(&e.phoneme).unwrap();
            if rng.gen_bool(0.7) {
                let w: Vec<f64> = exp.iter().map(|_| rng.gen_range(0.05..1.0)).collect();
                ratios.insert(&e.phoneme, exp, &w).unwrap();
            }
        }
        let total: f64 = events.iter().map(|e| e.ph_dur).sum();
        let onsets = note_onsets(&events);
        let outputs = [
            ("average", adapt_average(&events, lex).map_err(|e| format!("case {case}: {e}"))?),
            ("proportional", adapt_proportional(&events, lex, &ratios).map_err(|e| format!("case {case}: {e}"))?),
        ];
        for (name, out) in outputs {
            let t: f64 = out.iter().map(|e| e.ph_dur).sum();
            let rel = (t - total).abs() / total;
            ensure(rel <= 1e-9, || format!("case {case} {name}: total off by {rel:e}"))?;
            let got = note_onsets(&out);
            ensure(got.len() == onsets.len(), || format!("case {case} {name}: {} notes, expected {}", got.len(), onsets.len()))?;
            for (a, b) in onsets.iter().zip(&got) {
                let rel = (a - b).abs() / total;
                worst = worst.max(rel);
                ensure(rel <= 1e-9, || format!("case {case} {name}: onset {a} moved to {b}"))?;
            }
        }
    }
    Ok(format!("2000 adaptations, worst relative onset error {worst:.1e}"))
}

fn shift_matrix() -> Outcome {
    let golden = [
        [0, 4, 8, 12, 12],
        [-4, 0, 4, 8, 8],
        [-8, -4, 0, 4, 8],
        [-12, -8, -4, 0, 4],
        [-12, -8, -8, -4, 0],
    ];
    for (i, &from) in VoicePart::ALL.iter().enumerate() {
        for (j, &to) in VoicePart::ALL.iter().enumerate() {
            let shift = plan_conversion(from, to);
            ensure(shift == golden[i][j], || format!("{} -> {}: {shift}", from.name(), to.name()))?;
            ensure(shift == -plan_conversion(to, from), || format!("{} <-> {} not antisymmetric", from.name(), to.name()))?;
        }
        ensure(PITCH_SHIFT_TABLE[i][i] == 0, || format!("diagonal {i} nonzero"))?;
    }
    ensure(plan_conversion(VoicePart::Bass, VoicePart::Tenor) == 8, || "Bass -> Tenor".into())?;
    Ok("25 entries, antisymmetric, zero diagonal".into())
}

fn dsp_tones() -> Outcome {
    let sr = 24_000;
    let tone = Waveform::new((0..sr).map(|n| 0.5 * (2.0 * std::f64::consts::PI * 220.0 * n as f64 / sr as f64).sin()).collect(), sr as u32);
    let f0 = extract_f0(&tone, &F0Config::default()).map_err(|e| e.to_string())?;
    let interior = &f0.values[10..f0.len() - 10];
    let good = interior.iter().filter(|&&f| (f - 220.0).abs() <= 2.2).count();
    let rate = good as f64 / interior.len() as f64;
    ensure(rate >= 0.95, || format!("{good}/{} frames within 1%", interior.len()))?;

    let up = transpose_f0(&f0, 12.0, f64::INFINITY);
    let exact = f0.values.iter().zip(&up.values).all(|(a, b)| if *a > 0.0 { *b == 2.0 * a } else { *b == 0.0 });
    ensure(exact, || "transpose +12 is not an exact doubling".into())?;
    let m = midi_from_hz(440.0).map_err(|e| e.to_string())?;
    ensure(m == 69.0, || format!("midi(440) = {m}"))?;
    Ok(format!("{:.1}% of interior frames within 1%", 100.0 * rate))
}

fn vocoder_round_trip() -> Outcome {
    let (w, _) = core_fixture("speech_mixed");
    let a = analyze(&w, &VocoderConfig::default()).map_err(|e| e.to_string())?;
    let y = synthesize(&a, w.sample_rate, 0).map_err(|e| e.to_string())?;
    let f0 = extract_f0(&Waveform::new(y.samples[..w.len()].to_vec(), w.sample_rate), &F0Config::default())
        .map_err(|e| e.to_string())?;
    let src = &a.f0.values;
    let agree = src.iter().zip(&f0.values).filter(|(a, b)| (**a > 0.0) == (**b > 0.0)).count() as f64 / src.len() as f64;
    let shift = cents(
        median(f0.values.iter().copied().filter(|&f| f > 0.0).collect()),
        median(src.iter().copied().filter(|&f| f > 0.0).collect()),
    );
    ensure(shift.abs() <= 20.0, || format!("median moved {shift:.1} cents"))?;
    ensure(agree >= 0.9, || format!("VUV agreement {agree:.3}"))?;
    Ok(format!("median shift {shift:+.1} cents, VUV agreement {:.1}%", 100.0 * agree))
}

fn pseudo_singing() -> Outcome {
    let (w, tiers) = core_fixture("speech_mixed");
    let span: f64 = find_tier(&tiers, &PHONE_TIER_NAMES)
        .unwrap()
        .intervals
        .iter()
        .filter(|iv| !is_silence(iv.label.trim()))
        .map(|iv| iv.duration())
        .sum();
    let cfg = PseudoConfig::default();
    let info = UtteranceInfo { utterance_id: "speech_mixed".into(), audio_path: "speech_mixed.wav".into(), singer_id: "fx".into() };
    let mut worst = (String::new(), 1.0f64);
    for melody in &MelodyBank::default_bank().templates {
        let (out, rec) = make_pseudo_singing(&w, &tiers, melody, 7, &info, &cfg).map_err(|e| e.to_string())?;
        let f0 = extract_f0(&out, &cfg.vocoder.f0).map_err(|e| e.to_string())?;
        let target: F0Contour = render_melody(melody, f0.len(), f0.hop);
        let voiced: Vec<usize> = (0..f0.len()).filter(|&i| f0.values[i] > 0.0).collect();
        let close = voiced
            .iter()
            .filter(|&&i| target.values[i] > 0.0 && cents(f0.values[i], target.values[i]).abs() <= 50.0)
            .count();
        let rate = close as f64 / voiced.len() as f64;
        if rate < worst.1 {
            worst = (melody.id().to_string(), rate);
        }
        ensure(rate >= 0.85, || format!("{}: {:.1}% of voiced frames within 50 cents", melody.id(), 100.0 * rate))?;
        ensure(rec.events.iter().all(|e| e.style == Style::PseudoSinging), || format!("{}: style token not 2", melody.id()))?;
        let total = rec.total_duration();
        ensure((total - span).abs() <= 1e-6, || format!("{}: durations sum to {total}, span {span}", melody.id()))?;
    }
    Ok(format!("10 melodies, weakest {} at {:.1}%", worst.0, 100.0 * worst.1))
}

/// Exhaustive search over every alignment of the two sequences.
fn oracle_edits(r: &[u8], h: &[u8]) -> usize {
    match (r.split_first(), h.split_first()) {
        (None, _) => h.len(),
        (_, None) => r.len(),
        (Some((a, rr)), Some((b, hh))) => {
            let sub = oracle_edits(rr, hh) + usize::from(a != b);
            let del = oracle_edits(rr, h) + 1;
            let ins = oracle_edits(r, hh) + 1;
            sub.min(del).min(ins)
        }
    }
}

fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for case in 0..500 {
        let r: Vec<u8> = (0..rng.gen_range(1..=8)).map(|_| rng.gen_range(0..4)).collect();
        let h: Vec<u8> = (0..rng.gen_range(0..=8)).map(|_| rng.gen_range(0..4)).collect();
        let want = oracle_edits(&r, &h) as f64 / r.len() as f64;
        let got = wer(&r, &h).unwrap();
        ensure(got == want, || format!("case {case}: wer {got} vs oracle {want} for {r:?} / {h:?}"))?;
    }

    let order = 13;
    let c = 0.37;
    let frames: Vec<Vec<f64>> = (0..40).map(|_| (0..order).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
    let shifted: Vec<Vec<f64>> = frames.iter().map(|f| f.iter().map(|x| x + c).collect()).collect();
    let a = McepFrames { hop: 0.0125, order, frames };
    let b = McepFrames { hop: 0.0125, order, frames: shifted };
    let diagonal = DtwPath { pairs: (0..40).map(|i| (i, i)).collect(), cost: 0.0 };
    let closed = 10.0 / std::f64::consts::LN_10 * (2.0 * order as f64 * c * c).sqrt();
    let got = mcd_over_path(&a, &b, &diagonal);
    ensure((got - closed).abs() <= 1e-6, || format!("MCD {got} vs closed form {closed}"))?;

    let f0 = F0Contour::new(0.005, (0..200).map(|i| if i % 17 < 3 { 0.0 } else { 110.0 + i as f64 }).collect());
    let up = transpose_f0(&f0, 12.0, f64::INFINITY);
    let path = DtwPath { pairs: (0..200).map(|i| (i, i)).collect(), cost: 0.0 };
    let rmse = svsprep::metrics::f0_rmse(&f0, &up, &path).unwrap();
    ensure((rmse - std::f64::consts::LN_2).abs() <= 1e-9, || format!("f0_rmse {rmse} vs ln 2"))?;

    let (w, _) = core_fixture("speech_song");
    let m = audio_metrics(&w, &w, &McepConfig::default(), &F0Config::default()).map_err(|e| e.to_string())?;
    let identity = m.mcd_db == Some(0.0) && m.f0_rmse == Some(0.0) && m.vuv_e == Some(0.0) && m.semitone_accuracy == Some(1.0);
    ensure(identity, || format!("identity audio metrics {m:?}"))?;
    let words = ["我", "和", "你", "from", "one", "world"];
    ensure(wer(&words, &words) == Some(0.0), || "identity WER".into())?;
    let v = [0.3, -1.2, 0.7, 2.5];
    ensure(cosine_sim(&v, &v).ok() == Some(1.0), || "identity SIM".into())?;
    Ok(format!("500 WER pairs exact, MCD {got:.6} dB, f0_rmse {rmse:.12}"))
}

fn pseudo_run(out: &Path, workers: &str) -> Result<(), String> {
    let manifest = cli_fixture("speech.json");
    let o = Command::new(env!("CARGO_BIN_EXE_svsprep"))
        .args(["pseudo", manifest.to_str().unwrap(), "--out-dir", out.to_str().unwrap(), "--seed", "11", "--workers", workers])
        .output()
        .map_err(|e| e.to_string())?;
    ensure(o.status.success(), || format!("workers {workers}: {}", String::from_utf8_lossy(&o.stderr)))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let runs = [("w1a", "1"), ("w1b", "1"), ("w4", "4")];
    for (name, workers) in runs {
        pseudo_run(&dir.path().join(name), workers)?;
    }
    let mut compared = 0;
    for file in ["speech_mixed.json", "speech_song.json", "speech_mixed.wav", "speech_song.wav", "summary.json"] {
        let bytes: Vec<Vec<u8>> = runs.iter().map(|(name, _)| std::fs::read(dir.path().join(name).join(file)).unwrap()).collect();
        ensure(bytes[0] == bytes[1], || format!("{file} differs between identical runs"))?;
        ensure(bytes[0] == bytes[2], || format!("{file} differs between 1 and 4 workers"))?;
        compared += 1;
    }
    Ok(format!("{compared} files identical over 3 runs"))
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("unit-to-CMU mappings", unit_mappings),
        ("mixed lyric language tokens", mixed_lyric_tokens),
        ("average and proportional adaptation", cun_adaptation),
        ("duration and note-boundary conservation", duration_conservation),
        ("pitch-shift matrix", shift_matrix),
        ("F0 of tones, transpose, MIDI", dsp_tones),
        ("vocoder round trip", vocoder_round_trip),
        ("pseudo-singing follows every melody", pseudo_singing),
        ("metric oracles", metric_oracles),
        ("pseudo determinism across runs and workers", determinism),
    ];
    let mut failed = Vec::new();
    let mut err = std::io::stderr().lock();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d.as_str()),
            Err(e) => ("FAIL", e.as_str()),
        };
        writeln!(err, "{tag} {:>2} {name}: {detail} ({secs:.2} s)", i + 1).unwrap();
        if outcome.is_err() {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
