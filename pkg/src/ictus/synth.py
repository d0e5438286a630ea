"""Deterministic synthetic EEG generator for desk-scale runs.

Each channel carries pink-like background noise everywhere.  In the
preictal stretch before each seizure onset an 18-22 Hz component is added
with per-channel frequency and phase (low cross-channel coherence); during
the seizure a high-amplitude ~3 Hz oscillation, synchronous across
channels, dominates.  Everything is a pure function of the config,
including its seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfigError
from .recordings import Recording, SeizureAnnotations

PREICTAL_BAND_HZ = (18.0, 22.0)
ICTAL_FREQ_HZ = 3.0
PREICTAL_GAIN = 0.8
ICTAL_GAIN = 5.0


@dataclass(frozen=True)
class SynthConfig:
    duration_s: float
    seizure_onsets_s: tuple[float, ...] = ()
    seizure_duration_s: float = 40.0
    channel_count: int = 22
    sample_rate_hz: float = 256.0
    background_noise_scale: float = 10.0
    preictal_shift_minutes: float = 10.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "seizure_onsets_s", tuple(float(t) for t in self.seizure_onsets_s))
        if self.duration_s <= 0 or self.seizure_duration_s <= 0:
            raise InvalidConfigError("durations must be positive")
        if self.preictal_shift_minutes <= 0:
            raise InvalidConfigError("preictal_shift_minutes must be positive")
        if self.channel_count < 1:
            raise InvalidConfigError("channel_count must be >= 1")
        if self.sample_rate_hz <= 0:
            raise InvalidConfigError("sample_rate_hz must be positive")
        if self.background_noise_scale <= 0:
            raise InvalidConfigError("background_noise_scale must be positive")
        if self.seed < 0:
            raise InvalidConfigError("seed must be an unsigned integer")
        onsets = self.seizure_onsets_s
        if list(onsets) != sorted(onsets):
            raise InvalidConfigError("seizure onsets must be sorted")
        min_gap = 2 * self.preictal_shift_minutes * 60.0
        for a, b in zip(onsets, onsets[1:]):
            if b - a < min_gap:
                raise InvalidConfigError(
                    f"onsets {a} and {b} closer than 2 x preictal shift ({min_gap} s)"
                )
        for t in onsets:
            if t <= 0 or t + self.seizure_duration_s > self.duration_s:
                raise InvalidConfigError(f"seizure at {t} s does not fit the recording")


def _pink_noise(rng: np.random.Generator, n: int, rate: float) -> np.ndarray:
    """Unit-variance noise with ~1/f amplitude above 1 Hz."""
    white = rng.standard_normal(n)
    spectrum = np.fft.rfft(white)
    freqs = np.fft.rfftfreq(n, d=1.0 / rate)
    spectrum /= np.sqrt(np.maximum(freqs, 1.0))
    x = np.fft.irfft(spectrum, n)
    return x / x.std()


def synth_recording(cfg: SynthConfig, rec_id: str | None = None) -> Recording:
    """Generate a Recording from cfg; bit-identical for identical configs."""
    rng = np.random.default_rng(cfg.seed)
    rate = cfg.sample_rate_hz
    n = int(round(cfg.duration_s * rate))
    t = np.arange(n) / rate
    scale = cfg.background_noise_scale

    events = tuple((onset, onset + cfg.seizure_duration_s) for onset in cfg.seizure_onsets_s)
    ictal_phases = rng.uniform(0, 2 * np.pi, size=len(events))

    samples = np.empty((cfg.channel_count, n))
    shift_s = cfg.preictal_shift_minutes * 60.0
    for c in range(cfg.channel_count):
        x = _pink_noise(rng, n, rate) * scale
        for k, (onset, offset) in enumerate(events):
            i0 = max(0, int(round((onset - shift_s) * rate)))
            i1 = int(round(onset * rate))
            freq = rng.uniform(*PREICTAL_BAND_HZ)
            phase = rng.uniform(0, 2 * np.pi)
            x[i0:i1] += PREICTAL_GAIN * scale * np.sin(2 * np.pi * freq * t[i0:i1] + phase)

            j1 = min(n, int(round(offset * rate)))
            x[i1:j1] += ICTAL_GAIN * scale * np.sin(
                2 * np.pi * ICTAL_FREQ_HZ * t[i1:j1] + ictal_phases[k]
            )
        samples[c] = x

    return Recording(
        id=rec_id if rec_id is not None else f"synth-{cfg.seed}",
        sample_rate_hz=rate,
        channels=tuple(f"CH{c + 1:02d}" for c in range(cfg.channel_count)),
        samples=samples,
        annotations=SeizureAnnotations(events),
    )
