"""Streaming inference: support-set scoring, smoothing, decisions, alarms.

Every incoming one-second window is similarity-scored against the stored
interictal and preictal support examples; the two averaged score streams
are exponentially smoothed, their gap thresholded into a binary decision,
and the decision stream smoothed again.  An alarm fires when the decision
average crosses its threshold, with a refractory period so one event can
raise at most one alarm.

Smoothed scores start at the neutral 0.5 and the decision average at 0,
which avoids spurious startup alarms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dsp import (
    DEFAULT_BANK,
    NormStats,
    RAW_RATE_HZ,
    ScaleBank,
    WINDOW_SAMPLES,
    WORK_RATE_HZ,
    apply_norm_values,
    resample_recording,
    tensorize_array,
)
from .errors import (
    EmptySupportError,
    InvalidConfigError,
    NonMonotonicTimeError,
    TrainingLeakageError,
    WrongHeadError,
)
from .model import (
    HEAD_CLASSIFIER,
    HEAD_SIAMESE,
    ModelParams,
    embed_batch,
    head_logits,
    siamese_score,
)
from .model.layers import sigmoid
from .recordings import Recording
from .segments import SupportSet

TRACE_SCHEMA = "# ictus-trace v1"
REPLAY_CHUNK_WINDOWS = 1024


@dataclass(frozen=True)
class SmoothingPolicy:
    score_alpha: float = 0.9          # weight on the previous smoothed score
    decision_threshold: float = 0.2   # required gap between smoothed scores
    decision_alpha: float = 0.95      # weight on the previous decision average
    alarm_threshold: float = 0.8
    refractory_s: float = 3600.0

    def __post_init__(self):
        if not 0 < self.score_alpha < 1 or not 0 < self.decision_alpha < 1:
            raise InvalidConfigError("smoothing weights must be in (0, 1)")
        if not 0 < self.alarm_threshold < 1:
            raise InvalidConfigError("alarm_threshold must be in (0, 1)")
        if self.refractory_s < 0:
            raise InvalidConfigError("refractory_s must be >= 0")


@dataclass(frozen=True)
class PredictorState:
    smoothed_p: float = 0.5
    smoothed_i: float = 0.5
    decision_ema: float = 0.0
    last_alarm_t: float | None = None
    last_t: float | None = None


@dataclass(frozen=True)
class TraceRecord:
    t: float
    s_p: float
    s_i: float
    smoothed_p: float
    smoothed_i: float
    decision: int
    ema: float
    alarm: bool


@dataclass
class AlarmTrace:
    records: list[TraceRecord] = field(default_factory=list)
    alarms: list[float] = field(default_factory=list)
    recording_id: str = ""

    def __len__(self) -> int:
        return len(self.records)


def _alarm_allowed(state: PredictorState, policy: SmoothingPolicy, t: float) -> bool:
    return state.last_alarm_t is None or t - state.last_alarm_t >= policy.refractory_s


def step(state: PredictorState, policy: SmoothingPolicy, s_p: float, s_i: float,
         t: float):
    """Advance the smoothing/alarm machinery by one window.

    Returns (new state, decision in {0, 1}, alarm flag).  Timestamps must be
    strictly increasing across successive calls.
    """
    if state.last_t is not None and t <= state.last_t:
        raise NonMonotonicTimeError(f"t={t} after t={state.last_t}")
    a = policy.score_alpha
    smoothed_p = a * state.smoothed_p + (1 - a) * s_p
    smoothed_i = a * state.smoothed_i + (1 - a) * s_i
    decision = 1 if smoothed_p - smoothed_i > policy.decision_threshold else 0
    ad = policy.decision_alpha
    ema = ad * state.decision_ema + (1 - ad) * decision
    alarm = ema >= policy.alarm_threshold and _alarm_allowed(state, policy, t)
    new_state = PredictorState(
        smoothed_p=smoothed_p,
        smoothed_i=smoothed_i,
        decision_ema=ema,
        last_alarm_t=t if alarm else state.last_alarm_t,
        last_t=t,
    )
    return new_state, decision, alarm


def run_scores(scores_p, scores_i, times, policy: SmoothingPolicy,
               state: PredictorState | None = None, recording_id: str = ""):
    """Feed precomputed score streams through step(); returns (trace, state)."""
    state = state or PredictorState()
    trace = AlarmTrace(recording_id=recording_id)
    for s_p, s_i, t in zip(scores_p, scores_i, times):
        state, decision, alarm = step(state, policy, float(s_p), float(s_i), float(t))
        if alarm:
            trace.alarms.append(float(t))
        trace.records.append(TraceRecord(float(t), float(s_p), float(s_i),
                                         state.smoothed_p, state.smoothed_i,
                                         decision, state.decision_ema, alarm))
    return trace, state


def score_window(params: ModelParams, support: SupportSet, x):
    """Mean similarity of a window to each side of the support set."""
    if not support.s_preictal or not support.s_interictal:
        raise EmptySupportError("support set has an empty side")
    s_p = float(np.mean([siamese_score(params, x, s) for s in support.s_preictal]))
    s_i = float(np.mean([siamese_score(params, x, s) for s in support.s_interictal]))
    return s_p, s_i


def _prepare_recording(rec: Recording) -> Recording:
    if rec.sample_rate_hz == WORK_RATE_HZ:
        return rec
    if rec.sample_rate_hz == RAW_RATE_HZ:
        return resample_recording(rec)
    raise ValueError(f"recording rate {rec.sample_rate_hz} Hz is not supported")


def _support_embeddings(params, support: SupportSet, stats: NormStats):
    stacked = np.stack([w.values for w in support.s_interictal + support.s_preictal])
    normed = apply_norm_values(stacked, stats).astype(params.spec.np_dtype)
    emb, _ = embed_batch(params, normed, False, None)
    k = len(support.s_interictal)
    return emb[:k], emb[k:]


def _batch_scores(params, emb_windows, emb_support):
    """(W, E) x (K, E) -> per-window mean similarity against the support side."""
    w, k = emb_windows.shape[0], emb_support.shape[0]
    diff = np.abs(emb_windows[:, None, :] - emb_support[None, :, :])
    logits = head_logits(params, diff.reshape(w * k, -1), False, None)
    return sigmoid(logits.astype(np.float64)).reshape(w, k).mean(axis=1)


def replay(rec: Recording, params: ModelParams, support: SupportSet,
           policy: SmoothingPolicy, stats: NormStats,
           bank: ScaleBank = DEFAULT_BANK) -> AlarmTrace:
    """Replay a held-out recording through the similarity predictor.

    tensorize -> normalize -> support scoring -> step, one record per
    window.  Refuses recordings that contributed training windows.
    """
    if params.spec.head != HEAD_SIAMESE:
        raise WrongHeadError("replay requires similarity weights")
    if rec.id in support.source_recording_ids:
        raise TrainingLeakageError(f"recording {rec.id} was used for training")
    work = _prepare_recording(rec)
    emb_i, emb_p = _support_embeddings(params, support, stats)

    trace = AlarmTrace(recording_id=rec.id)
    state = PredictorState()
    n_windows = work.samples.shape[1] // WINDOW_SAMPLES
    for lo in range(0, n_windows, REPLAY_CHUNK_WINDOWS):
        hi = min(lo + REPLAY_CHUNK_WINDOWS, n_windows)
        seg = work.samples[:, lo * WINDOW_SAMPLES: hi * WINDOW_SAMPLES]
        values = apply_norm_values(tensorize_array(seg, bank), stats)
        emb, _ = embed_batch(params, values.astype(params.spec.np_dtype), False, None)
        s_p = _batch_scores(params, emb, emb_p)
        s_i = _batch_scores(params, emb, emb_i)
        for j in range(hi - lo):
            t = work.start_offset_s + float(lo + j)
            state, decision, alarm = step(state, policy, float(s_p[j]), float(s_i[j]), t)
            if alarm:
                trace.alarms.append(t)
            trace.records.append(TraceRecord(t, float(s_p[j]), float(s_i[j]),
                                             state.smoothed_p, state.smoothed_i,
                                             decision, state.decision_ema, alarm))
    return trace


def replay_classifier(rec: Recording, params: ModelParams, policy: SmoothingPolicy,
                      stats: NormStats, bank: ScaleBank = DEFAULT_BANK) -> AlarmTrace:
    """Replay with the plain classifier: smoothed probability vs 0.5 + delta/2."""
    if params.spec.head != HEAD_CLASSIFIER:
        raise WrongHeadError("replay_classifier requires classifier weights")
    work = _prepare_recording(rec)

    trace = AlarmTrace(recording_id=rec.id)
    smoothed = 0.5
    ema = 0.0
    last_alarm: float | None = None
    threshold = 0.5 + policy.decision_threshold / 2.0
    n_windows = work.samples.shape[1] // WINDOW_SAMPLES
    for lo in range(0, n_windows, REPLAY_CHUNK_WINDOWS):
        hi = min(lo + REPLAY_CHUNK_WINDOWS, n_windows)
        seg = work.samples[:, lo * WINDOW_SAMPLES: hi * WINDOW_SAMPLES]
        values = apply_norm_values(tensorize_array(seg, bank), stats)
        emb, _ = embed_batch(params, values.astype(params.spec.np_dtype), False, None)
        probs = sigmoid(head_logits(params, emb, False, None).astype(np.float64))
        for j in range(hi - lo):
            t = work.start_offset_s + float(lo + j)
            p = float(probs[j])
            smoothed = policy.score_alpha * smoothed + (1 - policy.score_alpha) * p
            decision = 1 if smoothed > threshold else 0
            ema = policy.decision_alpha * ema + (1 - policy.decision_alpha) * decision
            alarm = ema >= policy.alarm_threshold and (
                last_alarm is None or t - last_alarm >= policy.refractory_s
            )
            if alarm:
                last_alarm = t
                trace.alarms.append(t)
            trace.records.append(TraceRecord(t, p, 1.0 - p, smoothed, 1.0 - smoothed,
                                             decision, ema, alarm))
    return trace


def trace_csv(trace: AlarmTrace) -> str:
    lines = [TRACE_SCHEMA, "t_s,s_p,s_i,smoothed_p,smoothed_i,decision,ema,alarm"]
    for r in trace.records:
        lines.append(
            f"{r.t!r},{r.s_p:.9g},{r.s_i:.9g},{r.smoothed_p:.9g},"
            f"{r.smoothed_i:.9g},{r.decision},{r.ema:.9g},{int(r.alarm)}"
        )
    return "\n".join(lines) + "\n"


def trace_from_csv(text: str, recording_id: str = "") -> AlarmTrace:
    trace = AlarmTrace(recording_id=recording_id)
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith("t_s,"):
            continue
        f = line.split(",")
        rec = TraceRecord(float(f[0]), float(f[1]), float(f[2]), float(f[3]),
                          float(f[4]), int(f[5]), float(f[6]), bool(int(f[7])))
        trace.records.append(rec)
        if rec.alarm:
            trace.alarms.append(rec.t)
    return trace
