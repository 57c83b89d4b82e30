#!/usr/bin/env python3
"""Formant-synthesized speech clips with exact word/phone alignments.

Writes `<name>.wav` (24 kHz PCM-16 mono) and `<name>.TextGrid` (words and
phones tiers) for each utterance below. Output is deterministic.

    python3 scripts/make_speech_fixture.py crates/core/tests/fixtures
"""

import sys
from pathlib import Path

import numpy as np
from scipy import signal
from scipy.io import wavfile

FS = 24_000
PAUSE = 0.15

# (F1, F2, F3) in Hz and relative voicing amplitude
VOICED = {
    "AA": (730, 1090, 2440, 1.0), "AE": (660, 1720, 2410, 1.0), "AH": (640, 1190, 2390, 1.0),
    "AO": (570, 840, 2410, 1.0), "EH": (530, 1840, 2480, 1.0), "ER": (490, 1350, 1690, 0.9),
    "IH": (390, 1990, 2550, 0.9), "IY": (270, 2290, 3010, 0.85), "UW": (300, 870, 2240, 0.85),
    "OW": (450, 900, 2400, 1.0), "W": (300, 610, 2200, 0.5), "R": (310, 1060, 1380, 0.55),
    "L": (360, 1300, 2700, 0.55), "Y": (260, 2100, 3000, 0.5), "M": (250, 1100, 2300, 0.35),
    "N": (250, 1700, 2600, 0.35), "NG": (250, 2000, 2700, 0.35),
}
# fricatives: (band low, band high, amplitude); HH is aspiration through the tract
FRICATIVE = {"S": (4000, 9000, 0.12), "SH": (2000, 6000, 0.12), "F": (1500, 10000, 0.05), "HH": (None, None, 0.08)}
STOP = {"D", "T", "K", "P", "B", "G"}

UTTERANCES = {
    "speech_mixed": [
        ("我", [("W", 0.07), ("AO", 0.16)]),
        ("和", [("HH", 0.07), ("ER", 0.15)]),
        ("你", [("N", 0.07), ("IY", 0.17)]),
        None,
        ("from", [("F", 0.09), ("R", 0.06), ("AH", 0.10), ("M", 0.08)]),
        ("one", [("W", 0.07), ("AH", 0.13), ("N", 0.09)]),
        ("world", [("W", 0.07), ("ER", 0.16), ("L", 0.08), ("D", 0.07)]),
    ],
    "speech_song": [
        ("sing", [("S", 0.12), ("IH", 0.14), ("NG", 0.09)]),
        ("a", [("AH", 0.10)]),
        ("long", [("L", 0.07), ("AO", 0.20), ("NG", 0.09)]),
        None,
        ("song", [("S", 0.12), ("AO", 0.22), ("NG", 0.10)]),
    ],
}


def layout(words):
    """Word and phone intervals, with leading, trailing and marked pauses."""
    t = PAUSE
    word_iv, phone_iv = [("", 0.0, PAUSE)], [("", 0.0, PAUSE)]
    for item in words:
        if item is None:
            word_iv.append(("", t, t + PAUSE))
            phone_iv.append(("", t, t + PAUSE))
            t += PAUSE
            continue
        label, phones = item
        start = t
        for ph, dur in phones:
            phone_iv.append((ph, t, t + dur))
            t += dur
        word_iv.append((label, start, t))
    word_iv.append(("", t, t + PAUSE))
    phone_iv.append(("", t, t + PAUSE))
    return word_iv, phone_iv, t + PAUSE


def track(phone_iv, n, key, default, smooth_ms=15):
    """Per-sample parameter track from per-phone targets, smoothed."""
    out = np.full(n, default, dtype=float)
    for ph, s, e in phone_iv:
        v = key(ph)
        if v is not None:
            out[int(round(s * FS)):int(round(e * FS))] = v
    width = int(FS * smooth_ms / 1000)
    kernel = np.hanning(2 * width + 1)
    kernel /= kernel.sum()
    padded = np.pad(out, width, mode="edge")
    return np.convolve(padded, kernel, mode="valid")


def resonate(x, freq, bw):
    y = np.zeros_like(x)
    y1 = y2 = 0.0
    for i in range(len(x)):
        r = np.exp(-np.pi * bw / FS)
        a1 = 2 * r * np.cos(2 * np.pi * freq[i] / FS)
        a2 = -r * r
        v = (1 - r) * x[i] + a1 * y1 + a2 * y2
        y2, y1 = y1, v
        y[i] = v
    return y


def synth(words, seed):
    rng = np.random.default_rng(seed)
    word_iv, phone_iv, total = layout(words)
    n = int(round(total * FS))
    t = np.arange(n) / FS

    # declining intonation with a rise on each word onset
    f0 = 135 - 28 * t / total
    for label, s, e in word_iv:
        if label:
            f0 += 10 * np.exp(-((t - s - 0.05) / 0.08) ** 2)
    f0 *= 1 + 0.003 * rng.standard_normal(n).cumsum() / np.sqrt(np.arange(1, n + 1))

    phase = np.cumsum(f0 / FS)
    pulses = np.diff(np.floor(phase), prepend=0.0)
    # glottal spectral tilt
    source = signal.lfilter([1.0], [1.0, -0.96], pulses)
    source -= signal.lfilter([1.0], [1.0, -0.995], source) * 0.005

    voicing = track(phone_iv, n, lambda p: VOICED.get(p, (0, 0, 0, 0.0))[3] if p else 0.0, 0.0)
    aspiration = track(phone_iv, n, lambda p: FRICATIVE["HH"][2] if p == "HH" else 0.0, 0.0, smooth_ms=8)
    formants = [
        track(phone_iv, n, lambda p, k=k: VOICED[p][k] if p in VOICED else None, [500, 1500, 2500][k], smooth_ms=25)
        for k in range(3)
    ]
    excitation = voicing * source * 6 + aspiration * rng.standard_normal(n)
    tract = excitation
    for k, bw in enumerate([80, 100, 140]):
        tract = resonate(tract, formants[k], bw) * 4

    noise = np.zeros(n)
    for ph, s, e in phone_iv:
        i0, i1 = int(round(s * FS)), int(round(e * FS))
        if ph in FRICATIVE and ph != "HH":
            lo, hi, amp = FRICATIVE[ph]
            sos = signal.butter(4, [lo, min(hi, FS / 2 - 100)], btype="band", fs=FS, output="sos")
            burst = signal.sosfilt(sos, rng.standard_normal(i1 - i0)) * amp
            noise[i0:i1] += burst * np.hanning(i1 - i0)
        elif ph in STOP:
            b0 = i0 + int(0.7 * (i1 - i0))
            sos = signal.butter(2, 2500, btype="high", fs=FS, output="sos")
            burst = signal.sosfilt(sos, rng.standard_normal(i1 - b0)) * 0.15
            noise[b0:i1] += burst * np.exp(-np.arange(i1 - b0) / (0.004 * FS))

    y = tract + noise
    y += 1e-4 * rng.standard_normal(n)
    y *= 0.5 / np.abs(y).max()
    return y, word_iv, phone_iv, total


def textgrid(tiers, total):
    lines = ['File type = "ooTextFile"', 'Object class = "TextGrid"', "", "xmin = 0", f"xmax = {total:.6f}",
             "tiers? <exists>", f"size = {len(tiers)}", "item []:"]
    for k, (name, ivs) in enumerate(tiers, 1):
        lines += [f"    item [{k}]:", '        class = "IntervalTier"', f'        name = "{name}"', "        xmin = 0",
                  f"        xmax = {total:.6f}", f"        intervals: size = {len(ivs)}"]
        for j, (label, s, e) in enumerate(ivs, 1):
            lines += [f"        intervals [{j}]:", f"            xmin = {s:.6f}", f"            xmax = {e:.6f}",
                      f'            text = "{label}"']
    return "\n".join(lines) + "\n"


def main(out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for seed, (name, words) in enumerate(sorted(UTTERANCES.items())):
        y, word_iv, phone_iv, total = synth(words, seed)
        pcm = np.clip(np.round(y * 32768), -32768, 32767).astype(np.int16)
        wavfile.write(out / f"{name}.wav", FS, pcm)
        (out / f"{name}.TextGrid").write_text(textgrid([("words", word_iv), ("phones", phone_iv)], total),
                                              encoding="utf-8")
        print(f"{name}: {total:.3f} s")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "crates/core/tests/fixtures")
