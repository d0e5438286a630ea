"""Signal path: 2:1 resampling, per-window Mexican-hat CWT, normalization.

The deployment unit is one second of 128 Hz signal.  Each window is
reflection-padded and correlated with scaled Mexican-hat wavelets over a
dyadic scale bank, giving a 128 (time) x 10 (scales) coefficient matrix per
channel.  The transform is a plain matrix product against a precomputed
kernel, so a window's tensor is a pure function of its own samples and the
whole pipeline replays bit-identically.

Coefficients are z-scored per (channel, scale) with statistics fitted on
training windows; raw magnitudes vary by orders of magnitude across scales.
"""

from __future__ import annotations

import enum
import struct
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    BadLengthError,
    BadMagicError,
    EmptyInputError,
    EmptySignalError,
    TooShortError,
    TruncatedFileError,
    VersionUnsupportedError,
)
from .recordings import Recording

WINDOW_SAMPLES = 128          # one second at the working rate
WORK_RATE_HZ = 128.0
RAW_RATE_HZ = 256.0
CWT_PAD = 192                 # reflection pad on each side of a window
STD_FLOOR = 1e-8

# Anti-alias FIR for 2:1 decimation: 63-tap Hamming windowed sinc,
# cutoff 0.45 x 64 Hz at a 256 Hz input rate, coefficients summing to 1.
FIR_TAPS = 63
FIR_CUTOFF_HZ = 0.45 * 64.0


def _design_lowpass() -> np.ndarray:
    m = FIR_TAPS - 1
    k = np.arange(FIR_TAPS)
    fc = FIR_CUTOFF_HZ / RAW_RATE_HZ  # cycles per input sample
    h = 2 * fc * np.sinc(2 * fc * (k - m / 2))
    h *= 0.54 - 0.46 * np.cos(2 * np.pi * k / m)
    return h / h.sum()


_LOWPASS = _design_lowpass()


class Label(enum.Enum):
    INTERICTAL = "interictal"
    PREICTAL = "preictal"
    ICTAL = "ictal"
    UNLABELED = "unlabeled"


PREICTAL_CLASS = (Label.PREICTAL, Label.ICTAL)


@dataclass(frozen=True)
class ScaleBank:
    """Strictly increasing CWT scales; default is dyadic 1..512."""

    scales: tuple[float, ...] = (1, 2, 4, 8, 16, 32, 64, 128, 256, 512)

    def __post_init__(self):
        scales = tuple(float(a) for a in self.scales)
        if not scales or any(a <= 0 for a in scales):
            raise ValueError("scales must be positive")
        if any(b <= a for a, b in zip(scales, scales[1:])):
            raise ValueError("scales must be strictly increasing")
        object.__setattr__(self, "scales", scales)

    def __len__(self) -> int:
        return len(self.scales)


DEFAULT_BANK = ScaleBank()


@dataclass
class WindowTensor:
    """Wavelet coefficients for one 1-second window: channels x 128 x 10."""

    values: np.ndarray
    t_start_s: float
    label: Label = Label.UNLABELED
    source_id: str | None = None

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 3 or v.shape[1] != WINDOW_SAMPLES or v.shape[2] != len(DEFAULT_BANK):
            raise ValueError(f"expected (channels, 128, 10) values, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("window tensor contains non-finite values")
        self.values = v

    @property
    def channels(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class NormStats:
    """Per-(channel, scale) mean and std fitted on training windows."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        std = np.maximum(np.asarray(self.std, dtype=np.float64), STD_FLOOR)
        if mean.shape != std.shape or mean.ndim != 2:
            raise ValueError("mean/std must share a (channels, scales) shape")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)


def mexican_hat(x):
    """Mexican-hat mother wavelet, unit L2 norm: even, zero-mean."""
    x = np.asarray(x, dtype=np.float64)
    c = 2.0 / (np.sqrt(3.0) * np.pi ** 0.25)
    return c * (1.0 - x * x) * np.exp(-x * x / 2.0)


def resample_2to1(signal) -> np.ndarray:
    """Decimate a 256 Hz signal to 128 Hz after zero-phase anti-alias filtering.

    Odd-length inputs lose their trailing sample (reported via warnings).
    """
    x = np.asarray(signal, dtype=np.float64).ravel()
    if x.size == 0:
        raise EmptySignalError("cannot resample an empty signal")
    if x.size % 2 == 1:
        warnings.warn("odd-length signal: trailing sample dropped before decimation")
        x = x[:-1]
    if x.size == 0:
        raise EmptySignalError("signal had a single sample")
    half = FIR_TAPS // 2
    padded = np.pad(x, half, mode="reflect")
    filtered = np.convolve(padded, _LOWPASS, mode="valid")
    return filtered[::2]


def resample_recording(rec: Recording) -> Recording:
    """Return rec at the working rate, resampling 2:1 when needed."""
    if rec.sample_rate_hz == WORK_RATE_HZ:
        return rec
    if rec.sample_rate_hz != RAW_RATE_HZ:
        raise ValueError(
            f"can only resample {RAW_RATE_HZ:g} Hz to {WORK_RATE_HZ:g} Hz, "
            f"got {rec.sample_rate_hz} Hz"
        )
    rows = [resample_2to1(rec.samples[c]) for c in range(rec.samples.shape[0])]
    return replace(rec, sample_rate_hz=WORK_RATE_HZ, samples=np.vstack(rows))


_KERNEL_CACHE: dict[tuple[float, ...], np.ndarray] = {}


def _kernel_matrix(bank: ScaleBank) -> np.ndarray:
    """(padded_len, 128 * n_scales) correlation kernels, float64."""
    key = bank.scales
    cached = _KERNEL_CACHE.get(key)
    if cached is not None:
        return cached
    padded_len = WINDOW_SAMPLES + 2 * CWT_PAD
    u = np.arange(padded_len)[:, None]
    t = np.arange(WINDOW_SAMPLES)[None, :]
    blocks = []
    for a in bank.scales:
        blocks.append(mexican_hat((u - t - CWT_PAD) / a) / np.sqrt(a))
    kernel = np.stack(blocks, axis=2).reshape(padded_len, WINDOW_SAMPLES * len(bank))
    _KERNEL_CACHE[key] = kernel
    return kernel


def cwt_window(window, bank: ScaleBank = DEFAULT_BANK) -> np.ndarray:
    """CWT of one 128-sample window: (128, n_scales) float64.

    coefficient[t][j] = sum_u padded[u] * psi((u - t) / a_j) / sqrt(a_j),
    with the window reflection-padded by CWT_PAD samples per side.
    """
    x = np.asarray(window, dtype=np.float64).ravel()
    if x.size != WINDOW_SAMPLES:
        raise BadLengthError(f"window must have {WINDOW_SAMPLES} samples, got {x.size}")
    padded = np.pad(x, CWT_PAD, mode="reflect")
    return (padded @ _kernel_matrix(bank)).reshape(WINDOW_SAMPLES, len(bank))


def cwt_windows(windows: np.ndarray, bank: ScaleBank = DEFAULT_BANK) -> np.ndarray:
    """Batched cwt_window over an (n, 128) array -> (n, 128, n_scales) float64."""
    w = np.asarray(windows, dtype=np.float64)
    if w.ndim != 2 or w.shape[1] != WINDOW_SAMPLES:
        raise BadLengthError(f"expected (n, {WINDOW_SAMPLES}) windows, got {w.shape}")
    padded = np.pad(w, ((0, 0), (CWT_PAD, CWT_PAD)), mode="reflect")
    out = padded @ _kernel_matrix(bank)
    return out.reshape(w.shape[0], WINDOW_SAMPLES, len(bank))


def tensorize_array(samples: np.ndarray, bank: ScaleBank = DEFAULT_BANK) -> np.ndarray:
    """CWT every whole window of a (channels, n) signal -> (n//128, C, 128, S) float32."""
    samples = np.asarray(samples)
    n_windows = samples.shape[1] // WINDOW_SAMPLES
    if n_windows < 1:
        raise TooShortError(f"{samples.shape[1]} samples < one window of {WINDOW_SAMPLES}")
    out = np.empty(
        (n_windows, samples.shape[0], WINDOW_SAMPLES, len(bank)), dtype=np.float32
    )
    for c in range(samples.shape[0]):
        trimmed = samples[c, : n_windows * WINDOW_SAMPLES]
        coeffs = cwt_windows(trimmed.reshape(n_windows, WINDOW_SAMPLES), bank)
        out[:, c] = coeffs.astype(np.float32)
    return out


def tensorize(rec: Recording, bank: ScaleBank = DEFAULT_BANK) -> list[WindowTensor]:
    """Cut a 128 Hz Recording into unlabeled per-second WindowTensors.

    Yields exactly floor(n_samples / 128) tensors; the remainder is dropped.
    """
    if rec.sample_rate_hz != WORK_RATE_HZ:
        raise ValueError(f"tensorize expects a {WORK_RATE_HZ:g} Hz recording")
    values = tensorize_array(rec.samples, bank)
    return [
        WindowTensor(values[i], t_start_s=rec.start_offset_s + float(i), source_id=rec.id)
        for i in range(values.shape[0])
    ]


def _stack(tensors) -> np.ndarray:
    if isinstance(tensors, np.ndarray):
        arr = tensors
    else:
        arr = np.stack([t.values for t in tensors]) if len(tensors) else np.empty((0, 1, 1, 1))
    if arr.shape[0] == 0:
        raise EmptyInputError("need at least one window")
    return arr


def fit_norm_stats(tensors) -> NormStats:
    """Fit per-(channel, scale) mean/std over all windows and time steps."""
    arr = _stack(tensors).astype(np.float64)
    mean = arr.mean(axis=(0, 2))
    std = arr.std(axis=(0, 2))
    return NormStats(mean=mean, std=std)


def apply_norm_values(values: np.ndarray, stats: NormStats) -> np.ndarray:
    """Z-score an (..., C, 128, S) array; dtype preserved."""
    v = np.asarray(values)
    return ((v - stats.mean[:, None, :]) / stats.std[:, None, :]).astype(v.dtype)


def apply_norm(tensor: WindowTensor, stats: NormStats) -> WindowTensor:
    return WindowTensor(
        values=apply_norm_values(tensor.values, stats),
        t_start_s=tensor.t_start_s,
        label=tensor.label,
        source_id=tensor.source_id,
    )


# --- tensor cache ("ICT1") ---------------------------------------------------

_CACHE_MAGIC = b"ICT1"
_CACHE_VERSION = 1


def write_tensor_cache(tensors) -> bytes:
    """Pack windows into the versioned ICT1 container.

    Header: magic, u32 version, u32 channels, u32 windows, u32 scales; then
    float32 little-endian payload in (window, channel, time, scale) order.
    """
    arr = _stack(tensors).astype("<f4")
    n_windows, channels, _, scales = arr.shape
    header = _CACHE_MAGIC + struct.pack("<III I", _CACHE_VERSION, channels, n_windows, scales)
    return header + arr.tobytes()


def read_tensor_cache(data: bytes) -> np.ndarray:
    """Unpack an ICT1 container -> (windows, channels, 128, scales) float32."""
    if len(data) < 4 or data[:4] != _CACHE_MAGIC:
        raise BadMagicError("not an ICT1 tensor cache")
    if len(data) < 20:
        raise TruncatedFileError("tensor cache header incomplete")
    version, channels, n_windows, scales = struct.unpack("<IIII", data[4:20])
    if version != _CACHE_VERSION:
        raise VersionUnsupportedError(f"tensor cache version {version}")
    expected = 20 + 4 * n_windows * channels * WINDOW_SAMPLES * scales
    if len(data) < expected:
        raise TruncatedFileError(f"{len(data)} bytes < declared {expected}")
    flat = np.frombuffer(data, dtype="<f4", count=expected // 4 - 5, offset=20)
    return flat.reshape(n_windows, channels, WINDOW_SAMPLES, scales).copy()
