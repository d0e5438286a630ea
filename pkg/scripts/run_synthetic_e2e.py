#!/usr/bin/env python3
"""Single-seizure end-to-end run on synthetic patients.

For each synthetic patient: generate one training recording, collect the
balanced one-seizure segment stores, train the similarity model on pair
combinations, then replay held-out recordings (4 h interictal context plus
one seizure each) against a small support set and pool sensitivity and
false predictions per hour over all patients.

Example:
    python scripts/run_synthetic_e2e.py --patients 3 --test-recordings 5
"""

import argparse
import sys
import time

import numpy as np

from ictus import (
    ArchitectureSpec,
    CollectionConfig,
    SmoothingPolicy,
    SynthConfig,
    TrainConfig,
    collect_segments,
    fit_norm_stats,
    make_pairs,
    render_report,
    replay,
    resample_recording,
    score_alarms,
    select_support,
    split_train_val,
    synth_recording,
    train,
)
from ictus.evaluate import EvalReport, PatientResult
from ictus.segments import normalize_store

TRAIN_DURATION_S = 15900.0
TRAIN_ONSET_S = 15600.0
TEST_DURATION_S = 15150.0
TEST_ONSET_S = 15000.0


def patient_seed(base: int, patient: int, recording: int) -> int:
    return int(np.random.SeedSequence((base, patient, recording)).generate_state(1)[0])


def run_patient(patient: int, *, channels=4, pairs=1600, max_epochs=7, patience=2,
                test_recordings=5, seed=0, log=print) -> PatientResult:
    t0 = time.time()
    train_rec = resample_recording(synth_recording(
        SynthConfig(
            duration_s=TRAIN_DURATION_S,
            seizure_onsets_s=(TRAIN_ONSET_S,),
            channel_count=channels,
            seed=patient_seed(seed, patient, 0),
        ),
        rec_id=f"p{patient}-train",
    ))
    collection = CollectionConfig()
    store = collect_segments([train_rec], collection)
    stats = fit_norm_stats(store.d_interictal + store.d_preictal)
    pair_set = make_pairs(normalize_store(store, stats), pairs, seed=seed + patient)
    train_pairs, val_pairs = split_train_val(pair_set, 0.85, seed=seed + patient)
    spec = ArchitectureSpec(input_channels=channels)
    cfg = TrainConfig(batch_size=32, max_epochs=max_epochs,
                      early_stop_patience=patience, seed=seed + patient)
    params, history = train(train_pairs, val_pairs, spec, cfg)
    support = select_support(store, k=5, seed=seed + patient)
    best = min(history, key=lambda h: h.val_loss)
    log(f"patient {patient}: trained {len(history)} epochs, "
        f"val acc {best.val_accuracy:.3f} ({time.time() - t0:.0f}s)")

    policy = SmoothingPolicy()
    row = PatientResult(f"p{patient}", 0, 0, 0, 0.0)
    for r in range(test_recordings):
        test_rec = resample_recording(synth_recording(
            SynthConfig(
                duration_s=TEST_DURATION_S,
                seizure_onsets_s=(TEST_ONSET_S,),
                channel_count=channels,
                seed=patient_seed(seed, patient, 1 + r),
            ),
            rec_id=f"p{patient}-test{r}",
        ))
        trace = replay(test_rec, params, support, policy, stats)
        score = score_alarms(trace, test_rec.annotations,
                             collection.prediction_horizon_minutes)
        row.n_seizures += len(score.predicted_flags)
        row.n_predicted += sum(score.predicted_flags)
        row.false_alarms += score.false_alarm_count
        row.hours += score.evaluated_hours
        log(f"  test {r}: predicted={list(score.predicted_flags)} "
            f"false={score.false_alarm_count} alarms={len(trace.alarms)}")
    return row


def run(patients=3, test_recordings=5, channels=4, pairs=1600, max_epochs=7,
        patience=2, seed=0, log=print) -> EvalReport:
    rows = [
        run_patient(p, channels=channels, pairs=pairs, max_epochs=max_epochs,
                    patience=patience, test_recordings=test_recordings,
                    seed=seed, log=log)
        for p in range(patients)
    ]
    return EvalReport(rows=rows)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--patients", type=int, default=3)
    ap.add_argument("--test-recordings", type=int, default=5)
    ap.add_argument("--channels", type=int, default=4)
    ap.add_argument("--pairs", type=int, default=1600)
    ap.add_argument("--max-epochs", type=int, default=7)
    ap.add_argument("--patience", type=int, default=2)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    def log(msg):
        print(msg, flush=True)

    t0 = time.time()
    report = run(args.patients, args.test_recordings, args.channels, args.pairs,
                 args.max_epochs, args.patience, args.seed, log=log)
    text, _ = render_report(report)
    print()
    print(text)
    total = report.aggregate()
    print(f"pooled sensitivity: {total.sensitivity_pct:.1f}%  "
          f"fpr: {total.fpr:.3f}/h  wall: {time.time() - t0:.0f}s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
