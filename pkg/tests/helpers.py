"""Independent oracles shared by the test modules.

Everything here recomputes expected values from first principles (direct
summation, finite differences, explicit recurrences) without touching the
production code paths it checks.
"""

from __future__ import annotations

import numpy as np

from ictus.model.network import embed_batch, head_logits
from ictus.model.layers import sigmoid
from ictus.model.training import bce_loss


def mexican_hat_reference(x):
    """Textbook Mexican-hat formula, written out independently."""
    x = np.asarray(x, dtype=np.float64)
    return (2.0 / (np.sqrt(3.0) * np.pi ** 0.25)) * (1.0 - x ** 2) * np.exp(-(x ** 2) / 2.0)


def cwt_oracle(windows: np.ndarray, scales, pad: int) -> np.ndarray:
    """Brute-force direct-summation CWT over reflection-padded windows.

    windows: (n, 128).  Returns (n, 128, n_scales).  One kernel vector is
    rebuilt per (time, scale) pair from the wavelet formula and dotted with
    every padded window.
    """
    windows = np.atleast_2d(np.asarray(windows, dtype=np.float64))
    n, width = windows.shape
    padded = np.pad(windows, ((0, 0), (pad, pad)), mode="reflect")
    u = np.arange(padded.shape[1], dtype=np.float64)
    out = np.empty((n, width, len(scales)))
    for t in range(width):
        for j, a in enumerate(scales):
            kernel = mexican_hat_reference((u - t - pad) / a) / np.sqrt(a)
            out[:, t, j] = padded @ kernel
    return out


def band_power_dft(signal: np.ndarray, rate: float, f_lo: float, f_hi: float) -> float:
    """Mean periodogram power inside [f_lo, f_hi], via an explicit DFT sum."""
    x = np.asarray(signal, dtype=np.float64)
    n = x.size
    freqs = np.arange(n // 2 + 1) * rate / n
    keep = (freqs >= f_lo) & (freqs <= f_hi)
    k = np.nonzero(keep)[0]
    angles = -2j * np.pi * np.outer(k, np.arange(n)) / n
    coeffs = np.exp(angles) @ x
    power = (np.abs(coeffs) ** 2) / n
    return float(power.mean())


def pair_loss(params, xa, xb, y):
    """Train-mode mean BCE of the similarity head (dropout assumed 0)."""
    n = xa.shape[0]
    emb, _ = embed_batch(params, np.concatenate([xa, xb]), True, None)
    diff = np.abs(emb[:n] - emb[n:])
    logits = head_logits(params, diff, True, None)
    return float(bce_loss(sigmoid(logits), y).mean())


def window_loss(params, x, y):
    """Train-mode mean BCE of the classifier head (dropout assumed 0)."""
    emb, _ = embed_batch(params, x, True, None)
    logits = head_logits(params, emb, True, None)
    return float(bce_loss(sigmoid(logits), y).mean())


def fd_gradients(params, loss_fn, h: float = 1e-4) -> dict[str, np.ndarray]:
    """Central finite differences of loss_fn() over every parameter tensor.

    Mutates each tensor in place and restores it, so loss_fn can close over
    params directly.
    """
    out = {}
    for name, tensor in params.tensors.items():
        flat = tensor.ravel()
        grad = np.zeros_like(flat)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            lp = loss_fn()
            flat[i] = orig - h
            lm = loss_fn()
            flat[i] = orig
            grad[i] = (lp - lm) / (2.0 * h)
        out[name] = grad.reshape(tensor.shape)
    return out


def grad_rel_error(fd: np.ndarray, analytic: np.ndarray, floor: float = 1e-6) -> float:
    """Norm-relative error with a floor for genuinely zero gradients."""
    denom = max(np.linalg.norm(fd) + np.linalg.norm(analytic), floor)
    return float(np.linalg.norm(fd - analytic) / denom)


def simulate_alarm_stream(scores_p, scores_i, policy):
    """Explicit EMA/threshold recurrence; returns (decisions, alarm indices).

    Independent re-statement of the streaming rules for cross-checking the
    production step function (1-based window indices in the result).
    """
    smoothed_p, smoothed_i, ema = 0.5, 0.5, 0.0
    last_alarm = None
    decisions, alarms = [], []
    for n, (sp, si) in enumerate(zip(scores_p, scores_i), start=1):
        smoothed_p = policy.score_alpha * smoothed_p + (1 - policy.score_alpha) * sp
        smoothed_i = policy.score_alpha * smoothed_i + (1 - policy.score_alpha) * si
        d = 1 if smoothed_p - smoothed_i > policy.decision_threshold else 0
        ema = policy.decision_alpha * ema + (1 - policy.decision_alpha) * d
        decisions.append(d)
        if ema >= policy.alarm_threshold and (
            last_alarm is None or n - last_alarm >= policy.refractory_s
        ):
            alarms.append(n)
            last_alarm = n
    return decisions, alarms
