"""Recording and seizure-annotation types plus text annotation parsers.

A Recording is a multi-channel EEG signal in physical units (microvolts)
with a sample rate, ordered channel labels, an offset placing it on an
absolute timeline, and validated seizure annotations.  Annotations come
either from the native line format ("seizure <onset_s> <offset_s>") or
from a dataset patient-summary file.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    MalformedBlockError,
    MalformedLineError,
    OverlappingEventsError,
)

ANNOTATION_SCHEMA = "# ictus-annotations v1"


@dataclass(frozen=True)
class SeizureAnnotations:
    """Sorted, non-overlapping (onset_s, offset_s) seizure intervals."""

    events: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        events = tuple(sorted((float(a), float(b)) for a, b in self.events))
        for onset, offset in events:
            if not onset < offset:
                raise ValueError(f"event onset {onset} must precede offset {offset}")
        for (_, off_a), (on_b, _) in zip(events, events[1:]):
            if on_b < off_a:
                raise OverlappingEventsError(
                    f"event starting at {on_b} overlaps event ending at {off_a}"
                )
        object.__setattr__(self, "events", events)

    def __len__(self) -> int:
        return len(self.events)

    def onsets(self) -> tuple[float, ...]:
        return tuple(onset for onset, _ in self.events)


@dataclass
class Recording:
    """One continuous multi-channel EEG recording in microvolts.

    samples has shape (n_channels, n_samples).  start_offset_s places the
    first sample on a shared timeline; annotation times are relative to the
    start of this recording.
    """

    id: str
    sample_rate_hz: float
    channels: tuple[str, ...]
    samples: np.ndarray
    start_offset_s: float = 0.0
    annotations: SeizureAnnotations = field(default_factory=SeizureAnnotations)
    dropped_channels: tuple[str, ...] = ()

    def __post_init__(self):
        self.channels = tuple(self.channels)
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 2:
            raise ValueError("samples must be a channels x n_samples matrix")
        if len(self.channels) < 1 or self.samples.shape[0] != len(self.channels):
            raise ValueError(
                f"{len(self.channels)} channel labels for {self.samples.shape[0]} rows"
            )
        if self.samples.shape[1] < 1:
            raise ValueError("recording must contain at least one sample")
        if not self.sample_rate_hz > 0:
            raise ValueError("sample_rate_hz must be positive")
        for onset, offset in self.annotations.events:
            if onset < 0 or offset > self.duration_s + 1e-9:
                raise ValueError(
                    f"event ({onset}, {offset}) outside recording of {self.duration_s} s"
                )

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration_s(self) -> float:
        return self.samples.shape[1] / self.sample_rate_hz

    @property
    def end_offset_s(self) -> float:
        return self.start_offset_s + self.duration_s

    def with_annotations(self, annotations: SeizureAnnotations) -> "Recording":
        return replace(self, annotations=annotations)


def parse_annotations(text: str) -> SeizureAnnotations:
    """Parse the native annotation format: one "seizure <onset> <offset>" per line.

    Blank lines and lines starting with "#" are ignored.
    """
    events = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if len(tokens) != 3 or tokens[0] != "seizure":
            raise MalformedLineError(f"line {lineno}: expected 'seizure <onset> <offset>'")
        try:
            onset, offset = float(tokens[1]), float(tokens[2])
        except ValueError as exc:
            raise MalformedLineError(f"line {lineno}: non-numeric field") from exc
        if not np.isfinite(onset) or not np.isfinite(offset):
            raise MalformedLineError(f"line {lineno}: non-finite time")
        if onset >= offset:
            raise MalformedLineError(f"line {lineno}: onset {onset} >= offset {offset}")
        events.append((onset, offset))
    return SeizureAnnotations(tuple(events))


def render_annotations(annotations: SeizureAnnotations) -> str:
    lines = [ANNOTATION_SCHEMA]
    lines += [f"seizure {onset!r} {offset!r}" for onset, offset in annotations.events]
    return "\n".join(lines) + "\n"


_FILE_NAME = re.compile(r"^File Name:\s*(\S+)", re.MULTILINE)
_N_SEIZURES = re.compile(r"^Number of Seizures in File:\s*(\d+)", re.MULTILINE)
_SEIZURE_START = re.compile(
    r"^Seizure(?:\s+\d+)?\s+Start\s+Time:\s*([0-9.]+)\s*sec", re.MULTILINE | re.IGNORECASE
)
_SEIZURE_END = re.compile(
    r"^Seizure(?:\s+\d+)?\s+End\s+Time:\s*([0-9.]+)\s*sec", re.MULTILINE | re.IGNORECASE
)


def parse_chbmit_summary(text: str) -> dict[str, SeizureAnnotations]:
    """Parse a CHB-MIT patient summary file into per-file annotations.

    Every "File Name:" block yields an entry; files declaring zero seizures
    map to empty annotations.  Raises MalformedBlockError when the declared
    seizure count disagrees with the listed start/end times.
    """
    out: dict[str, SeizureAnnotations] = {}
    matches = list(_FILE_NAME.finditer(text))
    for i, m in enumerate(matches):
        block_end = matches[i + 1].start() if i + 1 < len(matches) else len(text)
        block = text[m.start():block_end]
        name = m.group(1)
        count_m = _N_SEIZURES.search(block)
        if count_m is None:
            raise MalformedBlockError(f"{name}: missing seizure count")
        declared = int(count_m.group(1))
        starts = [float(v) for v in _SEIZURE_START.findall(block)]
        ends = [float(v) for v in _SEIZURE_END.findall(block)]
        if len(starts) != declared or len(ends) != declared:
            raise MalformedBlockError(
                f"{name}: declared {declared} seizures, "
                f"found {len(starts)} starts / {len(ends)} ends"
            )
        try:
            out[name] = SeizureAnnotations(tuple(zip(starts, ends)))
        except (ValueError, OverlappingEventsError) as exc:
            raise MalformedBlockError(f"{name}: {exc}") from exc
    return out
