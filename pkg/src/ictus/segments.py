"""Offline replay of the real-time preictal/interictal collection procedure.

The collector walks an annotated timeline the way an on-body device would:
it banks t minutes of candidate interictal signal, waits for the next
seizure onset, and accepts the candidate only when more than m hours
separate the two; otherwise it re-collects after that seizure.  The
accepted interictal span becomes D_I and the t minutes ending at the onset
become D_P (optionally extended past onset by an ictal tail).

Also here: preictal/interictal labeling for the multi-seizure classifier
baseline, balanced similar/dissimilar pair construction, seeded train/val
splits, and support-set selection for streaming inference.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dsp import (
    Label,
    ScaleBank,
    DEFAULT_BANK,
    NormStats,
    WindowTensor,
    WINDOW_SAMPLES,
    WORK_RATE_HZ,
    apply_norm,
    tensorize_array,
)
from .errors import (
    ExhaustedError,
    InvalidConfigError,
    NoQualifyingSeizureError,
    TooFewError,
)
from .recordings import Recording

SEGMENT_MANIFEST_SCHEMA = "# ictus-segments v1"


@dataclass(frozen=True)
class CollectionConfig:
    t_minutes: float = 10.0
    m_hours: float = 4.0
    include_ictal_tail_s: float = 0.0
    prediction_horizon_minutes: float = 60.0
    methodA_preictal_minutes: float = 15.0

    def __post_init__(self):
        if not 0 < self.t_minutes <= 60:
            raise InvalidConfigError("t_minutes must be in (0, 60]")
        if self.m_hours < 1:
            raise InvalidConfigError("m_hours must be >= 1")
        if self.include_ictal_tail_s < 0:
            raise InvalidConfigError("include_ictal_tail_s must be >= 0")
        if self.prediction_horizon_minutes < self.t_minutes:
            raise InvalidConfigError("prediction horizon must cover t_minutes")
        if self.methodA_preictal_minutes <= 0:
            raise InvalidConfigError("methodA_preictal_minutes must be positive")

    @property
    def t_seconds(self) -> float:
        return self.t_minutes * 60.0

    @property
    def m_seconds(self) -> float:
        return self.m_hours * 3600.0


@dataclass
class SegmentStore:
    """Balanced interictal (d_interictal) and preictal+ictal (d_preictal) windows."""

    d_interictal: list[WindowTensor]
    d_preictal: list[WindowTensor]
    source_seizure: tuple[str, float]
    source_recording_ids: frozenset[str] = field(default_factory=frozenset)


@dataclass
class PairExample:
    a: WindowTensor
    b: WindowTensor
    similar: bool


@dataclass
class SupportSet:
    """k interictal and k preictal windows drawn from a training store."""

    s_interictal: list[WindowTensor]
    s_preictal: list[WindowTensor]
    k: int
    source_recording_ids: frozenset[str] = field(default_factory=frozenset)


def _check_timeline(recs) -> list[Recording]:
    recs = list(recs)
    if not recs:
        raise NoQualifyingSeizureError("empty timeline")
    for rec in recs:
        if rec.sample_rate_hz != WORK_RATE_HZ:
            raise ValueError(f"timeline recordings must be at {WORK_RATE_HZ:g} Hz")
    recs.sort(key=lambda r: r.start_offset_s)
    return recs


def _abs_events(recs) -> list[tuple[float, float, Recording]]:
    events = []
    for rec in recs:
        for onset, offset in rec.annotations.events:
            events.append((rec.start_offset_s + onset, rec.start_offset_s + offset, rec))
    events.sort(key=lambda e: e[0])
    return events


def _covering(recs, start_s: float, end_s: float) -> Recording | None:
    for rec in recs:
        if rec.start_offset_s <= start_s + 1e-9 and end_s <= rec.end_offset_s + 1e-9:
            return rec
    return None


def _cut_windows(rec: Recording, start_abs_s: float, n_windows: int, bank: ScaleBank,
                 label_fn) -> list[WindowTensor]:
    rel = start_abs_s - rec.start_offset_s
    i0 = int(round(rel * WORK_RATE_HZ))
    seg = rec.samples[:, i0: i0 + n_windows * WINDOW_SAMPLES]
    values = tensorize_array(seg, bank)
    out = []
    for i in range(values.shape[0]):
        t_start = start_abs_s + float(i)
        out.append(WindowTensor(values[i], t_start_s=t_start,
                                label=label_fn(t_start), source_id=rec.id))
    return out


def collect_segments(recs, cfg: CollectionConfig,
                     bank: ScaleBank = DEFAULT_BANK) -> SegmentStore:
    """Replay the one-seizure collection loop over an annotated timeline.

    Returns tensorized, labeled D_I and D_P for the first onset whose gap
    from the banked interictal candidate exceeds m hours.  Raises
    NoQualifyingSeizureError when no onset qualifies.
    """
    recs = _check_timeline(recs)
    events = _abs_events(recs)
    if not events:
        raise NoQualifyingSeizureError("timeline has no seizure annotations")

    span_s = cfg.t_seconds + cfg.include_ictal_tail_s
    n_windows = int(round(span_s))
    cursor = recs[0].start_offset_s

    while True:
        rec_i = _covering(recs, cursor, cursor + span_s)
        if rec_i is None:
            nxt = [r.start_offset_s for r in recs if r.start_offset_s > cursor]
            if not nxt:
                raise NoQualifyingSeizureError("ran out of recording before a qualifying seizure")
            cursor = min(nxt)
            continue
        t1 = cursor + span_s
        upcoming = [e for e in events if e[0] > t1]
        if not upcoming:
            raise NoQualifyingSeizureError("no seizure after the interictal candidate")
        onset, offset, rec_p = upcoming[0]
        if onset - t1 > cfg.m_seconds:
            p_start = onset - cfg.t_seconds
            if _covering([rec_p], p_start, onset + cfg.include_ictal_tail_s) is None:
                cursor = offset  # preictal span not fully recorded; skip this seizure
                continue
            break
        cursor = offset  # gap too small: re-collect after this seizure

    d_i = _cut_windows(rec_i, cursor, n_windows, bank, lambda t: Label.INTERICTAL)
    d_p = _cut_windows(
        rec_p, onset - cfg.t_seconds, n_windows, bank,
        lambda t: Label.PREICTAL if t < onset else Label.ICTAL,
    )
    return SegmentStore(
        d_interictal=d_i,
        d_preictal=d_p,
        source_seizure=(rec_p.id, onset - rec_p.start_offset_s),
        source_recording_ids=frozenset({rec_i.id, rec_p.id}),
    )


def label_windows_methodA(recs, cfg: CollectionConfig, seed: int = 0,
                          bank: ScaleBank = DEFAULT_BANK) -> list[WindowTensor]:
    """Label windows for the multi-seizure classifier baseline.

    Preictal: the configured minutes before every onset.  Interictal:
    windows at least m hours from any onset on either side, under-sampled
    uniformly (seeded) to match the preictal count.
    """
    recs = _check_timeline(recs)
    events = _abs_events(recs)
    if not events:
        raise NoQualifyingSeizureError("no seizures to label against")
    onsets = [e[0] for e in events]

    pre_s = cfg.methodA_preictal_minutes * 60.0
    preictal: list[WindowTensor] = []
    for onset, _, rec in events:
        start = max(onset - pre_s, rec.start_offset_s)
        n = int(onset - start)
        if n >= 1:
            preictal += _cut_windows(rec, onset - n, n, bank, lambda t: Label.PREICTAL)
    if not preictal:
        raise NoQualifyingSeizureError("no preictal windows available")

    candidates: list[tuple[Recording, float]] = []
    for rec in recs:
        n_win = int(rec.samples.shape[1] // WINDOW_SAMPLES)
        starts = rec.start_offset_s + np.arange(n_win, dtype=np.float64)
        clear = np.ones(n_win, dtype=bool)
        for onset in onsets:
            clear &= (starts + 1.0 <= onset - cfg.m_seconds) | (starts >= onset + cfg.m_seconds)
        candidates += [(rec, float(t)) for t in starts[clear]]
    if not candidates:
        raise NoQualifyingSeizureError("no interictal windows clear the exclusion zone")

    rng = np.random.default_rng(seed)
    n_inter = min(len(candidates), len(preictal))
    if n_inter < len(preictal):
        keep = rng.choice(len(preictal), size=n_inter, replace=False)
        preictal = [preictal[int(i)] for i in sorted(keep)]
    picked = rng.choice(len(candidates), size=n_inter, replace=False)
    interictal: list[WindowTensor] = []
    for idx in sorted(int(i) for i in picked):
        rec, t_start = candidates[idx]
        interictal += _cut_windows(rec, t_start, 1, bank, lambda t: Label.INTERICTAL)
    return interictal + preictal


def _unrank_pair(k: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Map combination indices to (i < j) pairs over range(n)."""
    counts = n - 1 - np.arange(n - 1)
    cum = np.concatenate(([0], np.cumsum(counts)))
    i = np.searchsorted(cum, k, side="right") - 1
    j = k - cum[i] + i + 1
    return i, j


def make_pairs(store: SegmentStore, n_pairs: int, seed: int = 0) -> list[PairExample]:
    """Sample a balanced, duplicate-free pair dataset from a segment store.

    Half the pairs are similar (split between interictal-interictal and
    preictal-preictal), half dissimilar (interictal-preictal); sampling is
    without replacement inside each stratum and reproducible per seed.
    """
    if n_pairs <= 0 or n_pairs % 2 != 0:
        raise ValueError("n_pairs must be a positive even integer")
    n_i, n_p = len(store.d_interictal), len(store.d_preictal)
    if n_i < 2 or n_p < 2:
        raise TooFewError("need at least two windows on each side")

    n_similar = n_pairs // 2
    n_ii = n_similar // 2
    n_pp = n_similar - n_ii
    n_ip = n_pairs - n_similar
    cap_ii = n_i * (n_i - 1) // 2
    cap_pp = n_p * (n_p - 1) // 2
    cap_ip = n_i * n_p
    for want, cap, name in ((n_ii, cap_ii, "interictal-interictal"),
                            (n_pp, cap_pp, "preictal-preictal"),
                            (n_ip, cap_ip, "interictal-preictal")):
        if want > cap:
            raise ExhaustedError(f"{want} {name} pairs requested, only {cap} distinct exist")

    rng = np.random.default_rng(seed)
    pairs: list[PairExample] = []
    ii_i, ii_j = _unrank_pair(rng.choice(cap_ii, size=n_ii, replace=False), n_i)
    pairs += [PairExample(store.d_interictal[int(a)], store.d_interictal[int(b)], True)
              for a, b in zip(ii_i, ii_j)]
    pp_i, pp_j = _unrank_pair(rng.choice(cap_pp, size=n_pp, replace=False), n_p)
    pairs += [PairExample(store.d_preictal[int(a)], store.d_preictal[int(b)], True)
              for a, b in zip(pp_i, pp_j)]
    flat = rng.choice(cap_ip, size=n_ip, replace=False)
    pairs += [PairExample(store.d_interictal[int(k // n_p)],
                          store.d_preictal[int(k % n_p)], False) for k in flat]
    order = rng.permutation(len(pairs))
    return [pairs[int(i)] for i in order]


def split_train_val(items, fraction: float = 0.85, seed: int = 0):
    """Seeded shuffle then split; the floor goes to train, remainder to val."""
    items = list(items)
    if len(items) < 2:
        raise TooFewError("need at least two items to split")
    if not 0 < fraction < 1:
        raise ValueError("fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(items))
    n_train = max(1, min(int(len(items) * fraction), len(items) - 1))
    train = [items[int(i)] for i in order[:n_train]]
    val = [items[int(i)] for i in order[n_train:]]
    return train, val


def select_support(store: SegmentStore, k: int = 5, seed: int = 0) -> SupportSet:
    """Uniformly sample k windows per class from the store, without replacement."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(store.d_interictal) < k or len(store.d_preictal) < k:
        raise TooFewError(
            f"k={k} exceeds store sizes ({len(store.d_interictal)}, {len(store.d_preictal)})"
        )
    rng = np.random.default_rng(seed)
    pick_i = rng.choice(len(store.d_interictal), size=k, replace=False)
    pick_p = rng.choice(len(store.d_preictal), size=k, replace=False)
    return SupportSet(
        s_interictal=[store.d_interictal[int(i)] for i in pick_i],
        s_preictal=[store.d_preictal[int(i)] for i in pick_p],
        k=k,
        source_recording_ids=store.source_recording_ids,
    )


def normalize_store(store: SegmentStore, stats: NormStats) -> SegmentStore:
    return SegmentStore(
        d_interictal=[apply_norm(t, stats) for t in store.d_interictal],
        d_preictal=[apply_norm(t, stats) for t in store.d_preictal],
        source_seizure=store.source_seizure,
        source_recording_ids=store.source_recording_ids,
    )


def segment_manifest(windows) -> str:
    """Render (recording id, t_start, label) lines for audit of training windows."""
    lines = [SEGMENT_MANIFEST_SCHEMA]
    for w in windows:
        lines.append(f"{w.source_id or '?'}\t{w.t_start_s!r}\t{w.label.value}")
    return "\n".join(lines) + "\n"
