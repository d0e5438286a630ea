"""Event-based scoring of alarm traces and the per-patient harnesses.

A seizure counts as predicted when at least one alarm falls inside the
prediction horizon before its onset; an alarm is false when no onset
follows it within the horizon.  False-alarm rates are normalized by the
evaluated hours, which exclude ictal spans (and, by default, a post-ictal
settling window is exempt from false-alarm counting).

The table renderer truncates sensitivity to one decimal rather than
rounding, matching the convention of event-based seizure-prediction
reporting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .dsp import WindowTensor
from .errors import (
    TimeBaseMismatchError,
    TooFewSeizuresError,
    ZeroHoursError,
    ZeroSeizuresError,
)
from .predictor import AlarmTrace, run_scores
from .recordings import Recording, SeizureAnnotations

DEFAULT_HORIZON_MINUTES = 60.0
POSTICTAL_EXCLUSION_S = 1800.0
WINDOW_S = 1.0


@dataclass(frozen=True)
class AlarmScore:
    predicted_flags: tuple[bool, ...]
    false_alarm_count: int
    evaluated_hours: float


def score_alarms(trace: AlarmTrace, truth: SeizureAnnotations,
                 horizon_minutes: float = DEFAULT_HORIZON_MINUTES,
                 postictal_exclusion_s: float = POSTICTAL_EXCLUSION_S) -> AlarmScore:
    """Score one trace against ground-truth seizure events.

    A seizure is predicted iff an alarm lies in (onset - horizon, onset];
    an alarm is false iff no onset occurs within the horizon after it.
    Alarms inside an ictal span or within postictal_exclusion_s after an
    offset are exempt from false-alarm counting (set 0 to disable).
    """
    horizon_s = horizon_minutes * 60.0
    if not trace.records:
        if truth.events:
            raise TimeBaseMismatchError("empty trace cannot cover any seizure")
        return AlarmScore((), 0, 0.0)
    t0 = trace.records[0].t
    t_end = trace.records[-1].t + WINDOW_S
    for onset, _ in truth.events:
        if onset < t0 - WINDOW_S or onset > t_end + horizon_s:
            raise TimeBaseMismatchError(
                f"onset {onset} outside trace span [{t0}, {t_end}]"
            )

    predicted = tuple(
        any(onset - horizon_s < a <= onset for a in trace.alarms)
        for onset, _ in truth.events
    )

    false_alarms = 0
    for a in trace.alarms:
        if any(a <= onset < a + horizon_s for onset, _ in truth.events):
            continue
        if any(onset <= a < offset for onset, offset in truth.events):
            continue
        if postictal_exclusion_s > 0 and any(
            offset <= a < offset + postictal_exclusion_s for _, offset in truth.events
        ):
            continue
        false_alarms += 1

    ictal_s = sum(
        max(0.0, min(offset, t_end) - max(onset, t0)) for onset, offset in truth.events
    )
    hours = (len(trace.records) * WINDOW_S - ictal_s) / 3600.0
    return AlarmScore(predicted, false_alarms, hours)


def sensitivity(n_predicted: int, n_seizures: int) -> float:
    """Percentage of seizures predicted."""
    if n_seizures < 1:
        raise ZeroSeizuresError("sensitivity needs at least one seizure")
    return 100.0 * n_predicted / n_seizures


def fpr_per_hour(false_alarms: int, evaluated_hours: float) -> float:
    if evaluated_hours <= 0:
        raise ZeroHoursError("false-prediction rate needs positive evaluated hours")
    return false_alarms / evaluated_hours


@dataclass
class PatientResult:
    patient: str
    n_seizures: int
    n_predicted: int
    false_alarms: int
    hours: float
    note: str = ""

    @property
    def sensitivity_pct(self) -> float:
        return sensitivity(self.n_predicted, self.n_seizures)

    @property
    def fpr(self) -> float:
        return fpr_per_hour(self.false_alarms, self.hours)


@dataclass
class EvalReport:
    rows: list[PatientResult] = field(default_factory=list)

    def aggregate(self) -> PatientResult:
        """Totals re-derived from the rows, never stored independently."""
        return PatientResult(
            patient="all",
            n_seizures=sum(r.n_seizures for r in self.rows),
            n_predicted=sum(r.n_predicted for r in self.rows),
            false_alarms=sum(r.false_alarms for r in self.rows),
            hours=sum(r.hours for r in self.rows),
        )


@dataclass
class SeizureCase:
    """One seizure's training windows plus its held-out test recording."""

    seizure_id: str
    train_windows: list[WindowTensor]
    test_recording: Recording


def _timeline_truth(rec: Recording) -> SeizureAnnotations:
    """Recording annotations shifted onto the absolute replay time base."""
    return SeizureAnnotations(tuple(
        (onset + rec.start_offset_s, offset + rec.start_offset_s)
        for onset, offset in rec.annotations.events
    ))


def leave_one_out(cases, train_fn, replay_fn,
                  horizon_minutes: float = DEFAULT_HORIZON_MINUTES,
                  patient: str = ""):
    """Per-patient harness: each fold trains on all other seizures.

    train_fn(windows) -> model (opaque); replay_fn(model, recording) ->
    AlarmTrace.  Returns (PatientResult, fold summaries); folds partition
    the seizure set and a fold's test recording never feeds its training.
    """
    cases = list(cases)
    if len(cases) < 2:
        raise TooFewSeizuresError(f"{len(cases)} seizure(s); need at least 2")
    totals = PatientResult(patient, 0, 0, 0, 0.0)
    folds = []
    for i, case in enumerate(cases):
        train_windows = [w for j, c in enumerate(cases) if j != i for w in c.train_windows]
        model = train_fn(train_windows)
        trace = replay_fn(model, case.test_recording)
        score = score_alarms(trace, _timeline_truth(case.test_recording), horizon_minutes)
        totals.n_seizures += len(score.predicted_flags)
        totals.n_predicted += sum(score.predicted_flags)
        totals.false_alarms += score.false_alarm_count
        totals.hours += score.evaluated_hours
        folds.append({
            "fold": i,
            "test_seizure": case.seizure_id,
            "train_seizures": tuple(c.seizure_id for j, c in enumerate(cases) if j != i),
            "predicted": tuple(score.predicted_flags),
            "false_alarms": score.false_alarm_count,
            "hours": score.evaluated_hours,
        })
    return totals, folds


def run_transfer(fine_tuned_model, test_recordings, replay_fn,
                 horizon_minutes: float = DEFAULT_HORIZON_MINUTES,
                 patient: str = "", source_patient: str = "") -> PatientResult:
    """Score a transfer-learned classifier over a patient's test recordings.

    The model is typically produced by fine-tuning weights learned on
    source_patient with the target's single-seizure data; the result row
    carries the source for provenance.
    """
    result = PatientResult(patient, 0, 0, 0, 0.0, note=f"source={source_patient}")
    for rec in test_recordings:
        trace = replay_fn(fine_tuned_model, rec)
        score = score_alarms(trace, _timeline_truth(rec), horizon_minutes)
        result.n_seizures += len(score.predicted_flags)
        result.n_predicted += sum(score.predicted_flags)
        result.false_alarms += score.false_alarm_count
        result.hours += score.evaluated_hours
    return result


def run_methodB(source_params, target_windows, test_recordings, train_cfg, policy,
                stats, horizon_minutes: float = DEFAULT_HORIZON_MINUTES,
                patient: str = "", source_patient: str = "",
                val_fraction: float = 0.85):
    """Fine-tune a source patient's classifier on one seizure and score it.

    target_windows are the target patient's labeled one-seizure windows;
    they are split into train/val with the config seed, the source weights
    are fine-tuned (zero epochs degrades to direct cross-patient transfer),
    and the result is pooled over the target's test recordings.  Returns
    (PatientResult carrying source provenance, fine-tuned params).
    """
    from .model import fine_tune
    from .predictor import replay_classifier
    from .segments import split_train_val

    train_items, val_items = split_train_val(target_windows, val_fraction, train_cfg.seed)
    params, _ = fine_tune(source_params, train_items, val_items, train_cfg)
    row = run_transfer(
        params, test_recordings,
        lambda model, rec: replay_classifier(rec, model, policy, stats),
        horizon_minutes, patient, source_patient,
    )
    return row, params


def truncate_pct(value: float) -> str:
    """Truncate (not round) a percentage to one decimal: 93.877 -> '93.8'."""
    return f"{math.floor(value * 10.0 + 1e-9) / 10.0:.1f}"


REPORT_SCHEMA = "# ictus-report v1"
_COLUMNS = ("patient", "seizures", "predicted", "sensitivity_pct", "fpr_per_hour", "hours")


def render_report(report: EvalReport) -> tuple[str, str]:
    """Render (text table, CSV) with the aggregate row recomputed."""
    rows = list(report.rows)
    if rows:
        rows.append(report.aggregate())
    text_lines = ["patient | seizures | predicted | sensitivity | fpr/h | hours"]
    csv_lines = [REPORT_SCHEMA, ",".join(_COLUMNS)]
    for r in rows:
        sens = truncate_pct(r.sensitivity_pct)
        text_lines.append(
            f"{r.patient} | {r.n_seizures} | {r.n_predicted} | {sens} | "
            f"{r.fpr:.3f} | {r.hours:.2f}"
            + (f" | {r.note}" if r.note else "")
        )
        csv_lines.append(
            f"{r.patient},{r.n_seizures},{r.n_predicted},{sens},{r.fpr:.4f},{r.hours:.4f}"
        )
    return "\n".join(text_lines) + "\n", "\n".join(csv_lines) + "\n"


def policy_sweep(streams, policy_base, deltas, alarm_thresholds,
                 horizon_minutes: float = DEFAULT_HORIZON_MINUTES):
    """Grid-search decision thresholds over recorded score streams.

    streams: iterables of (scores_p, scores_i, times, truth).  Returns one
    dict per (delta, alarm_threshold) with pooled sensitivity and fpr/h,
    sorted by sensitivity then ascending fpr.
    """
    from dataclasses import replace as _replace

    results = []
    for delta in deltas:
        for thr in alarm_thresholds:
            policy = _replace(policy_base, decision_threshold=delta, alarm_threshold=thr)
            n_seiz = n_pred = n_false = 0
            hours = 0.0
            for s_p, s_i, times, truth in streams:
                trace, _ = run_scores(s_p, s_i, times, policy)
                score = score_alarms(trace, truth, horizon_minutes)
                n_seiz += len(score.predicted_flags)
                n_pred += sum(score.predicted_flags)
                n_false += score.false_alarm_count
                hours += score.evaluated_hours
            results.append({
                "delta": delta,
                "alarm_threshold": thr,
                "sensitivity_pct": sensitivity(n_pred, n_seiz) if n_seiz else 0.0,
                "fpr_per_hour": fpr_per_hour(n_false, hours) if hours > 0 else 0.0,
            })
    return sorted(results, key=lambda r: (-r["sensitivity_pct"], r["fpr_per_hour"]))
