"""Command-line pipeline driver.

Commands: synth | ingest | train-siamese | train-cnn | fine-tune | replay |
evaluate | loo.  Every command takes --config (key = value file), --seed and
--out overrides, and writes a run manifest (config hash + seeds) next to its
artifacts so a run is reproducible from its outputs.

Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import dsp, evaluate, segments
from .config import RunConfig, describe_defaults, resolve_config
from .edf import parse_edf, write_edf
from .errors import (
    BadSpecError,
    ConfigError,
    DivergedError,
    IctusError,
    InvalidConfigError,
    TooFewSeizuresError,
    TrainingLeakageError,
)
from .model import (
    HEAD_CLASSIFIER,
    HEAD_SIAMESE,
    fine_tune,
    history_csv,
    load_params,
    save_params,
    train,
)
from .predictor import replay, replay_classifier, trace_csv, trace_from_csv
from .recordings import Recording, parse_annotations, render_annotations
from .segments import SupportSet
from .synth import SynthConfig, synth_recording

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

WEIGHTS_FILE = "weights.ictw"
SUPPORT_I_FILE = "support_interictal.ict1"
SUPPORT_P_FILE = "support_preictal.ict1"
NORM_FILE = "norm_stats.json"
HISTORY_FILE = "history.csv"
MANIFEST_FILE = "segments.manifest"
RUN_FILE = "run.json"


def _load_recording(spec: str) -> Recording:
    """Load 'file.edf' or 'file.edf:file.ann' (native annotation format)."""
    if ":" in spec:
        edf_path, ann_path = spec.split(":", 1)
        ann = parse_annotations(Path(ann_path).read_text())
    else:
        edf_path, ann = spec, None
    rec = parse_edf(Path(edf_path).read_bytes())
    rec = Recording(
        id=Path(edf_path).stem,
        sample_rate_hz=rec.sample_rate_hz,
        channels=rec.channels,
        samples=rec.samples,
        annotations=ann if ann is not None else rec.annotations,
        dropped_channels=rec.dropped_channels,
    )
    return rec


def _load_timeline(specs) -> list[Recording]:
    """Load recordings and place them back-to-back on one timeline."""
    recs = []
    offset = 0.0
    for spec in specs:
        rec = _load_recording(spec)
        rec.start_offset_s = offset
        offset = rec.end_offset_s
        recs.append(rec)
    return recs


def _resampled(recs) -> list[Recording]:
    return [dsp.resample_recording(r) for r in recs]


def _write_run_manifest(out_dir: Path, command: str, cfg: RunConfig, method: str,
                        inputs, training_ids, outputs) -> None:
    manifest = {
        "schema": "ictus-run v1",
        "command": command,
        "config_hash": cfg.hash(),
        "seed": cfg.seed,
        "method": method,
        "inputs": list(inputs),
        "training_recording_ids": sorted(training_ids),
        "outputs": sorted(outputs),
    }
    (out_dir / RUN_FILE).write_text(json.dumps(manifest, indent=2) + "\n")


def _write_norm_stats(path: Path, stats: dsp.NormStats) -> None:
    payload = {
        "schema": "ictus-norm v1",
        "mean": stats.mean.tolist(),
        "std": stats.std.tolist(),
    }
    path.write_text(json.dumps(payload) + "\n")


def _read_norm_stats(path: Path) -> dsp.NormStats:
    payload = json.loads(path.read_text())
    return dsp.NormStats(mean=np.array(payload["mean"]), std=np.array(payload["std"]))


def _model_dir_artifacts(model_dir: Path):
    params = load_params((model_dir / WEIGHTS_FILE).read_bytes())
    stats = _read_norm_stats(model_dir / NORM_FILE)
    run = json.loads((model_dir / RUN_FILE).read_text())
    return params, stats, run


def cmd_synth(cfg: RunConfig, out_dir: Path) -> int:
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = []
    for p in range(cfg["synth.patients"]):
        patient_dir = out_dir / f"patient{p:02d}"
        patient_dir.mkdir(exist_ok=True)
        for r in range(cfg["synth.recordings_per_patient"]):
            seed = int(np.random.SeedSequence((cfg.seed, p, r)).generate_state(1)[0])
            synth_cfg = SynthConfig(
                duration_s=cfg["synth.duration_s"],
                seizure_onsets_s=(cfg["synth.onset_s"],),
                seizure_duration_s=cfg["synth.seizure_duration_s"],
                channel_count=cfg["synth.channels"],
                sample_rate_hz=cfg["synth.sample_rate_hz"],
                background_noise_scale=cfg["synth.noise_scale"],
                preictal_shift_minutes=cfg["synth.preictal_minutes"],
                seed=seed,
            )
            rec = synth_recording(synth_cfg, rec_id=f"p{p:02d}r{r:02d}")
            edf_path = patient_dir / f"rec{r:02d}.edf"
            ann_path = patient_dir / f"rec{r:02d}.ann"
            edf_path.write_bytes(write_edf(rec))
            ann_path.write_text(render_annotations(rec.annotations))
            outputs += [str(edf_path), str(ann_path)]
    _write_run_manifest(out_dir, "synth", cfg, "synth", [], [], outputs)
    print(f"wrote {len(outputs)} files under {out_dir}")
    return EXIT_OK


def cmd_ingest(cfg: RunConfig, recording_specs, summary: Path | None) -> int:
    if summary is not None:
        from .recordings import parse_chbmit_summary

        mapping = parse_chbmit_summary(summary.read_text())
        for name, ann in mapping.items():
            print(f"{name}: {len(ann)} seizure(s) {list(ann.events)}")
    for spec in recording_specs:
        rec = _load_recording(spec)
        print(
            f"{rec.id}: {len(rec.channels)} channels @ {rec.sample_rate_hz:g} Hz, "
            f"{rec.duration_s:.1f} s, {len(rec.annotations)} seizure(s), "
            f"dropped={list(rec.dropped_channels)}"
        )
    return EXIT_OK


def cmd_train_siamese(cfg: RunConfig, recording_specs, out_dir: Path) -> int:
    out_dir.mkdir(parents=True, exist_ok=True)
    recs = _resampled(_load_timeline(recording_specs))
    bank = cfg.scale_bank()
    store = segments.collect_segments(recs, cfg.collection(), bank)
    stats = dsp.fit_norm_stats(store.d_interictal + store.d_preictal)
    normed = segments.normalize_store(store, stats)
    pairs = segments.make_pairs(normed, cfg["train.pairs"], cfg.seed)
    train_pairs, val_pairs = segments.split_train_val(
        pairs, cfg["train.val_fraction"], cfg.seed
    )
    spec = cfg.architecture(len(recs[0].channels), HEAD_SIAMESE)
    params, history = train(train_pairs, val_pairs, spec, cfg.train_config())
    support = segments.select_support(store, cfg["train.support_k"], cfg.seed)

    (out_dir / WEIGHTS_FILE).write_bytes(save_params(params))
    (out_dir / SUPPORT_I_FILE).write_bytes(dsp.write_tensor_cache(support.s_interictal))
    (out_dir / SUPPORT_P_FILE).write_bytes(dsp.write_tensor_cache(support.s_preictal))
    _write_norm_stats(out_dir / NORM_FILE, stats)
    (out_dir / HISTORY_FILE).write_text(history_csv(history))
    (out_dir / MANIFEST_FILE).write_text(
        segments.segment_manifest(store.d_interictal + store.d_preictal)
    )
    _write_run_manifest(
        out_dir, "train-siamese", cfg, "siamese", recording_specs,
        store.source_recording_ids,
        [WEIGHTS_FILE, SUPPORT_I_FILE, SUPPORT_P_FILE, NORM_FILE, HISTORY_FILE, MANIFEST_FILE],
    )
    best = min(history, key=lambda h: h.val_loss)
    print(f"trained {len(history)} epochs; best val loss {best.val_loss:.4f} "
          f"(accuracy {best.val_accuracy:.3f}) -> {out_dir}")
    return EXIT_OK


def cmd_train_cnn(cfg: RunConfig, recording_specs, out_dir: Path) -> int:
    out_dir.mkdir(parents=True, exist_ok=True)
    recs = _resampled(_load_timeline(recording_specs))
    n_seizures = sum(len(r.annotations) for r in recs)
    if n_seizures < 2:
        raise TooFewSeizuresError(
            f"multi-seizure training needs >= 2 seizures, got {n_seizures}"
        )
    bank = cfg.scale_bank()
    windows = segments.label_windows_methodA(recs, cfg.collection(), cfg.seed, bank)
    stats = dsp.fit_norm_stats(windows)
    windows = [dsp.apply_norm(w, stats) for w in windows]
    train_set, val_set = segments.split_train_val(windows, cfg["train.val_fraction"], cfg.seed)
    spec = cfg.architecture(len(recs[0].channels), HEAD_CLASSIFIER)
    params, history = train(train_set, val_set, spec, cfg.train_config())

    (out_dir / WEIGHTS_FILE).write_bytes(save_params(params))
    _write_norm_stats(out_dir / NORM_FILE, stats)
    (out_dir / HISTORY_FILE).write_text(history_csv(history))
    (out_dir / MANIFEST_FILE).write_text(segments.segment_manifest(windows))
    _write_run_manifest(
        out_dir, "train-cnn", cfg, "methodA", recording_specs,
        {r.id for r in recs}, [WEIGHTS_FILE, NORM_FILE, HISTORY_FILE, MANIFEST_FILE],
    )
    print(f"trained {len(history)} epochs on {n_seizures} seizures -> {out_dir}")
    return EXIT_OK


def cmd_fine_tune(cfg: RunConfig, from_dir: Path, recording_specs, out_dir: Path) -> int:
    out_dir.mkdir(parents=True, exist_ok=True)
    source_params, stats, source_run = _model_dir_artifacts(from_dir)
    recs = _resampled(_load_timeline(recording_specs))
    bank = cfg.scale_bank()
    store = segments.collect_segments(recs, cfg.collection(), bank)
    windows = [dsp.apply_norm(w, stats)
               for w in store.d_interictal + store.d_preictal]
    train_set, val_set = segments.split_train_val(windows, cfg["train.val_fraction"], cfg.seed)
    params, history = fine_tune(source_params, train_set, val_set, cfg.train_config())

    (out_dir / WEIGHTS_FILE).write_bytes(save_params(params))
    _write_norm_stats(out_dir / NORM_FILE, stats)
    (out_dir / HISTORY_FILE).write_text(history_csv(history))
    (out_dir / MANIFEST_FILE).write_text(segments.segment_manifest(windows))
    _write_run_manifest(
        out_dir, "fine-tune", cfg, "methodB", recording_specs,
        set(source_run.get("training_recording_ids", [])) | store.source_recording_ids,
        [WEIGHTS_FILE, NORM_FILE, HISTORY_FILE, MANIFEST_FILE],
    )
    print(f"fine-tuned from {from_dir} ({len(history)} epochs) -> {out_dir}")
    return EXIT_OK


def cmd_replay(cfg: RunConfig, model_dir: Path, recording_spec: str, mode: str,
               out_path: Path) -> int:
    params, stats, run = _model_dir_artifacts(model_dir)
    rec = _load_recording(recording_spec)
    training_ids = frozenset(run.get("training_recording_ids", []))
    bank = cfg.scale_bank()
    if mode == "siamese":
        s_i = dsp.read_tensor_cache((model_dir / SUPPORT_I_FILE).read_bytes())
        s_p = dsp.read_tensor_cache((model_dir / SUPPORT_P_FILE).read_bytes())
        support = SupportSet(
            s_interictal=[dsp.WindowTensor(v, 0.0) for v in s_i],
            s_preictal=[dsp.WindowTensor(v, 0.0) for v in s_p],
            k=s_i.shape[0],
            source_recording_ids=training_ids,
        )
        trace = replay(rec, params, support, cfg.policy(), stats, bank)
    else:
        if rec.id in training_ids:
            raise TrainingLeakageError(f"recording {rec.id} was used for training")
        trace = replay_classifier(rec, params, cfg.policy(), stats, bank)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(trace_csv(trace))
    print(f"{len(trace)} windows, {len(trace.alarms)} alarm(s) -> {out_path}")
    return EXIT_OK


def cmd_evaluate(cfg: RunConfig, triples, out_path: Path | None) -> int:
    """triples: PATIENT:TRACE_CSV:ANN_FILE entries, pooled per patient."""
    horizon = cfg["collection.horizon_minutes"]
    by_patient: dict[str, evaluate.PatientResult] = {}
    for triple in triples:
        try:
            patient, trace_path, ann_path = triple.split(":", 2)
        except ValueError:
            raise ConfigError(f"expected PATIENT:TRACE:ANN, got {triple!r}") from None
        trace = trace_from_csv(Path(trace_path).read_text())
        truth = parse_annotations(Path(ann_path).read_text())
        score = evaluate.score_alarms(trace, truth, horizon)
        row = by_patient.setdefault(patient, evaluate.PatientResult(patient, 0, 0, 0, 0.0))
        row.n_seizures += len(score.predicted_flags)
        row.n_predicted += sum(score.predicted_flags)
        row.false_alarms += score.false_alarm_count
        row.hours += score.evaluated_hours
    report = evaluate.EvalReport(rows=list(by_patient.values()))
    text, csv_text = evaluate.render_report(report)
    print(text, end="")
    if out_path is not None:
        out_path.parent.mkdir(parents=True, exist_ok=True)
        out_path.write_text(csv_text)
    return EXIT_OK


def cmd_loo(cfg: RunConfig, recording_specs, out_path: Path | None) -> int:
    """Leave-one-out over recordings, one seizure case per recording."""
    recs = _resampled(_load_timeline(recording_specs))
    bank = cfg.scale_bank()
    collection = cfg.collection()
    spec = cfg.architecture(len(recs[0].channels), HEAD_CLASSIFIER)
    train_cfg = cfg.train_config()
    policy = cfg.policy()

    cases = []
    for rec in recs:
        windows = segments.label_windows_methodA([rec], collection, cfg.seed, bank)
        cases.append(evaluate.SeizureCase(rec.id, windows, rec))

    def train_fn(windows):
        stats = dsp.fit_norm_stats(windows)
        normed = [dsp.apply_norm(w, stats) for w in windows]
        train_set, val_set = segments.split_train_val(
            normed, cfg["train.val_fraction"], cfg.seed
        )
        params, _ = train(train_set, val_set, spec, train_cfg)
        return params, stats

    def replay_fn(model, rec):
        params, stats = model
        return replay_classifier(rec, params, policy, stats, bank)

    row, folds = evaluate.leave_one_out(
        cases, train_fn, replay_fn, cfg["collection.horizon_minutes"], patient="loo"
    )
    report = evaluate.EvalReport(rows=[row])
    text, csv_text = evaluate.render_report(report)
    print(text, end="")
    for fold in folds:
        print(f"fold {fold['fold']}: test={fold['test_seizure']} "
              f"predicted={fold['predicted']} false={fold['false_alarms']}")
    if out_path is not None:
        out_path.write_text(csv_text)
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ictus", description=__doc__)
    parser.add_argument("--print-defaults", action="store_true",
                        help="print the documented configuration defaults and exit")
    sub = parser.add_subparsers(dest="command")

    def common(p):
        p.add_argument("--config", type=Path, help="key = value configuration file")
        p.add_argument("--seed", type=int, help="override the global seed")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a single config key")

    p = sub.add_parser("synth", help="write synthetic EDF + annotation files")
    common(p)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("ingest", help="parse recordings and print a summary")
    common(p)
    p.add_argument("recordings", nargs="*", metavar="EDF[:ANN]")
    p.add_argument("--summary", type=Path, help="dataset patient-summary file")

    p = sub.add_parser("train-siamese", help="train the similarity model on one seizure")
    common(p)
    p.add_argument("recordings", nargs="+", metavar="EDF[:ANN]")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("train-cnn", help="train the multi-seizure classifier")
    common(p)
    p.add_argument("recordings", nargs="+", metavar="EDF[:ANN]")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("fine-tune", help="fine-tune classifier weights on one seizure")
    common(p)
    p.add_argument("recordings", nargs="+", metavar="EDF[:ANN]")
    p.add_argument("--from", dest="from_dir", type=Path, required=True,
                   help="model directory holding the source weights")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("replay", help="stream one recording through a trained model")
    common(p)
    p.add_argument("--model-dir", type=Path, required=True)
    p.add_argument("--recording", required=True, metavar="EDF[:ANN]")
    p.add_argument("--mode", choices=("siamese", "classifier"), default="siamese")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("evaluate", help="score traces against annotations")
    common(p)
    p.add_argument("triples", nargs="+", metavar="PATIENT:TRACE:ANN")
    p.add_argument("--out", type=Path)

    p = sub.add_parser("loo", help="leave-one-out classifier harness")
    common(p)
    p.add_argument("recordings", nargs="+", metavar="EDF[:ANN]")
    p.add_argument("--out", type=Path)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.print_defaults:
        print(describe_defaults(), end="")
        return EXIT_OK
    if args.command is None:
        parser.print_help()
        return EXIT_CONFIG
    try:
        overrides = {}
        for item in getattr(args, "set", []):
            if "=" not in item:
                raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
            key, value = item.split("=", 1)
            overrides[key.strip()] = value.strip()
        if args.seed is not None:
            overrides["seed"] = str(args.seed)
        file_text = args.config.read_text() if args.config else None
        cfg = resolve_config(file_text, overrides)

        if args.command == "synth":
            return cmd_synth(cfg, args.out)
        if args.command == "ingest":
            return cmd_ingest(cfg, args.recordings, args.summary)
        if args.command == "train-siamese":
            return cmd_train_siamese(cfg, args.recordings, args.out)
        if args.command == "train-cnn":
            return cmd_train_cnn(cfg, args.recordings, args.out)
        if args.command == "fine-tune":
            return cmd_fine_tune(cfg, args.from_dir, args.recordings, args.out)
        if args.command == "replay":
            return cmd_replay(cfg, args.model_dir, args.recording, args.mode, args.out)
        if args.command == "evaluate":
            return cmd_evaluate(cfg, args.triples, args.out)
        if args.command == "loo":
            return cmd_loo(cfg, args.recordings, args.out)
        raise AssertionError(f"unhandled command {args.command}")
    except (ConfigError, InvalidConfigError, BadSpecError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergedError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (IctusError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
