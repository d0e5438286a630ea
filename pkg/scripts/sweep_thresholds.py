#!/usr/bin/env python3
"""Grid-search the decision threshold and alarm threshold on synthetic data.

Trains the similarity model on one synthetic seizure, replays validation
recordings once to capture the raw per-window score streams, then re-runs
only the cheap smoothing/alarm machinery for every (delta, alarm_threshold)
combination and prints the grid sorted by pooled sensitivity then fpr/h.

Example:
    python scripts/sweep_thresholds.py --val-recordings 2
"""

import argparse
import sys

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
    replay,
    resample_recording,
    select_support,
    split_train_val,
    synth_recording,
    train,
)
from ictus.evaluate import policy_sweep
from ictus.segments import normalize_store


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--val-recordings", type=int, default=2)
    ap.add_argument("--channels", type=int, default=4)
    ap.add_argument("--pairs", type=int, default=1600)
    ap.add_argument("--max-epochs", type=int, default=7)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--deltas", default="0.1,0.2,0.3,0.4")
    ap.add_argument("--alarm-thresholds", default="0.6,0.7,0.8,0.9")
    args = ap.parse_args(argv)

    train_rec = resample_recording(synth_recording(SynthConfig(
        duration_s=15900.0, seizure_onsets_s=(15600.0,),
        channel_count=args.channels, seed=args.seed), rec_id="sweep-train"))
    collection = CollectionConfig()
    store = collect_segments([train_rec], collection)
    stats = fit_norm_stats(store.d_interictal + store.d_preictal)
    pairs = make_pairs(normalize_store(store, stats), args.pairs, seed=args.seed)
    train_pairs, val_pairs = split_train_val(pairs, 0.85, seed=args.seed)
    spec = ArchitectureSpec(input_channels=args.channels)
    params, _ = train(train_pairs, val_pairs, spec,
                      TrainConfig(max_epochs=args.max_epochs,
                                  early_stop_patience=2, seed=args.seed))
    support = select_support(store, 5, seed=args.seed)

    base = SmoothingPolicy()
    streams = []
    for r in range(args.val_recordings):
        rec = resample_recording(synth_recording(SynthConfig(
            duration_s=15150.0, seizure_onsets_s=(15000.0,),
            channel_count=args.channels, seed=args.seed + 1000 + r),
            rec_id=f"sweep-val{r}"))
        trace = replay(rec, params, support, base, stats)
        streams.append((
            np.array([rec_.s_p for rec_ in trace.records]),
            np.array([rec_.s_i for rec_ in trace.records]),
            np.array([rec_.t for rec_ in trace.records]),
            rec.annotations,
        ))
        print(f"captured score stream {r} ({len(trace)} windows)", flush=True)

    deltas = tuple(float(v) for v in args.deltas.split(","))
    thresholds = tuple(float(v) for v in args.alarm_thresholds.split(","))
    results = policy_sweep(streams, base, deltas, thresholds,
                           collection.prediction_horizon_minutes)
    print("\ndelta  alarm_thr  sensitivity  fpr/h")
    for r in results:
        print(f"{r['delta']:>5.2f}  {r['alarm_threshold']:>9.2f}  "
              f"{r['sensitivity_pct']:>10.1f}  {r['fpr_per_hour']:.3f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
