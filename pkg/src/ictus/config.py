"""Plain-text run configuration: "key = value" lines with dotted sections.

Unknown keys are rejected; every key has a documented default, so a run is
fully described by its overrides.  Command-line flags override file values.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from .dsp import ScaleBank
from .errors import ConfigError
from .model import ArchitectureSpec, TrainConfig
from .predictor import SmoothingPolicy
from .segments import CollectionConfig


def _parse_int_tuple(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _parse_float_tuple(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


# key -> (default, parser, description)
SCHEMA: dict[str, tuple[str, object, str]] = {
    "seed": ("0", int, "global seed; all randomness derives from it"),
    "synth.patients": ("1", int, "patients generated by the synth command"),
    "synth.recordings_per_patient": ("1", int, "recordings per synthetic patient"),
    "synth.duration_s": ("16200", float, "synthetic recording length, seconds"),
    "synth.onset_s": ("15600", float, "seizure onset inside each synthetic recording"),
    "synth.seizure_duration_s": ("40", float, "synthetic seizure length, seconds"),
    "synth.channels": ("22", int, "synthetic channel count"),
    "synth.sample_rate_hz": ("256", float, "synthetic sample rate"),
    "synth.noise_scale": ("10", float, "background noise scale, microvolts"),
    "synth.preictal_minutes": ("10", float, "synthetic preictal signature length"),
    "collection.t_minutes": ("10", float, "collected interictal/preictal minutes"),
    "collection.m_hours": ("4", float, "required interictal distance from onsets"),
    "collection.ictal_tail_s": ("0", float, "seconds of ictal tail kept in D_P"),
    "collection.horizon_minutes": ("60", float, "prediction horizon"),
    "collection.methodA_preictal_minutes": ("15", float, "classifier preictal length"),
    "dsp.scales": ("1,2,4,8,16,32,64,128,256,512", _parse_float_tuple, "CWT scales"),
    "train.batch_size": ("32", int, "minibatch size"),
    "train.max_epochs": ("50", int, "epoch cap"),
    "train.lr": ("0.001", float, "Adam learning rate"),
    "train.patience": ("10", int, "early-stopping patience, epochs"),
    "train.pairs": ("20000", int, "pair examples sampled for similarity training"),
    "train.val_fraction": ("0.85", float, "training fraction of the split"),
    "train.support_k": ("5", int, "support examples per class"),
    "arch.conv_filters": ("16,16,32,32,64,64", _parse_int_tuple, "conv filter counts"),
    "arch.pool_after": ("2,4,6", _parse_int_tuple, "1-based conv layers followed by pooling"),
    "arch.embed_dim": ("128", int, "embedding width"),
    "arch.g_hidden": ("250,100", _parse_int_tuple, "similarity-head hidden sizes"),
    "arch.dropout": ("0.1", float, "dropout rate"),
    "policy.score_alpha": ("0.9", float, "score smoothing weight"),
    "policy.delta": ("0.2", float, "decision threshold on the smoothed gap"),
    "policy.decision_alpha": ("0.95", float, "decision smoothing weight"),
    "policy.alarm_threshold": ("0.8", float, "alarm threshold on the decision average"),
    "policy.refractory_s": ("3600", float, "minimum spacing between alarms"),
}


def parse_config_text(text: str) -> dict[str, str]:
    """Parse overrides from key = value lines; '#' starts a comment."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        out[key] = value
    return out


@dataclass
class RunConfig:
    values: dict[str, object]

    def __getitem__(self, key: str):
        return self.values[key]

    @property
    def seed(self) -> int:
        return self.values["seed"]

    def collection(self) -> CollectionConfig:
        return CollectionConfig(
            t_minutes=self.values["collection.t_minutes"],
            m_hours=self.values["collection.m_hours"],
            include_ictal_tail_s=self.values["collection.ictal_tail_s"],
            prediction_horizon_minutes=self.values["collection.horizon_minutes"],
            methodA_preictal_minutes=self.values["collection.methodA_preictal_minutes"],
        )

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            batch_size=self.values["train.batch_size"],
            max_epochs=self.values["train.max_epochs"],
            lr=self.values["train.lr"],
            early_stop_patience=self.values["train.patience"],
            seed=self.seed,
        )

    def policy(self) -> SmoothingPolicy:
        return SmoothingPolicy(
            score_alpha=self.values["policy.score_alpha"],
            decision_threshold=self.values["policy.delta"],
            decision_alpha=self.values["policy.decision_alpha"],
            alarm_threshold=self.values["policy.alarm_threshold"],
            refractory_s=self.values["policy.refractory_s"],
        )

    def scale_bank(self) -> ScaleBank:
        return ScaleBank(self.values["dsp.scales"])

    def architecture(self, channels: int, head: str) -> ArchitectureSpec:
        return ArchitectureSpec(
            input_channels=channels,
            conv_filters=self.values["arch.conv_filters"],
            pool_after=self.values["arch.pool_after"],
            embed_dim=self.values["arch.embed_dim"],
            head=head,
            g_hidden=self.values["arch.g_hidden"],
            dropout_rate=self.values["arch.dropout"],
            input_scales=len(self.values["dsp.scales"]),
        )

    def hash(self) -> str:
        lines = sorted(f"{k} = {self.values[k]!r}" for k in self.values)
        return hashlib.sha256("\n".join(lines).encode()).hexdigest()[:16]


def resolve_config(file_text: str | None = None,
                   overrides: dict[str, str] | None = None) -> RunConfig:
    """Apply file then CLI overrides on top of the documented defaults."""
    raw = {key: default for key, (default, _, _) in SCHEMA.items()}
    if file_text is not None:
        raw.update(parse_config_text(file_text))
    for key, value in (overrides or {}).items():
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}")
        raw[key] = value
    values: dict[str, object] = {}
    for key, text in raw.items():
        parser = SCHEMA[key][1]
        try:
            values[key] = parser(text)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{key}: cannot parse {text!r}") from exc
    return RunConfig(values)


def describe_defaults() -> str:
    lines = ["# ictus run configuration (defaults)"]
    for key, (default, _, desc) in SCHEMA.items():
        lines.append(f"{key} = {default}  # {desc}")
    return "\n".join(lines) + "\n"
