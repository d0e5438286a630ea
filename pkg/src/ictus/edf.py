"""Reader and writer for base-format EDF byte streams.

Layout: a 256-byte ASCII fixed header, then 256 bytes of per-signal header
fields (label 16, transducer 80, dimension 8, physical min/max 8+8,
digital min/max 8+8, prefiltering 80, samples-per-record 8, reserved 32,
stored field-by-field across all signals), then data records of 16-bit
little-endian two's-complement samples.

Physical values are recovered per signal as

    phys = (dig - dig_min) * (phys_max - phys_min) / (dig_max - dig_min) + phys_min

Only the base format is handled: no EDF+ TAL decoding, no BDF.  Channels
whose label starts with "-", duplicates of an earlier label, and
"EDF Annotations" channels are dropped and reported on
Recording.dropped_channels.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import (
    InconsistentRatesError,
    MalformedHeaderError,
    RangeOverflowError,
    TruncatedFileError,
)
from .recordings import Recording, SeizureAnnotations

_HEADER_LEN = 256
_SIGNAL_HEADER_LEN = 256
# (field width, count-per-signal) in on-disk order
_SIGNAL_FIELDS = (16, 80, 8, 8, 8, 8, 8, 80, 8, 32)

DEFAULT_DIGITAL_RANGE = (-32767, 32767)


def _ascii(field: bytes) -> str:
    return field.decode("ascii", errors="replace").strip()


def _int_field(field: bytes, what: str) -> int:
    try:
        return int(_ascii(field))
    except ValueError as exc:
        raise MalformedHeaderError(f"non-numeric {what}: {field!r}") from exc


def _float_field(field: bytes, what: str) -> float:
    try:
        return float(_ascii(field))
    except ValueError as exc:
        raise MalformedHeaderError(f"non-numeric {what}: {field!r}") from exc


def parse_edf(data: bytes) -> Recording:
    """Parse a complete EDF byte stream into a Recording.

    Raises TruncatedFileError when the stream is shorter than the declared
    header plus data records, MalformedHeaderError for unparseable or
    degenerate header fields, and InconsistentRatesError when the kept
    signals disagree on samples per record.
    """
    if len(data) < _HEADER_LEN:
        raise TruncatedFileError(f"{len(data)} bytes < fixed header of {_HEADER_LEN}")

    rec_id = _ascii(data[88:168]) or "edf"
    n_records = _int_field(data[236:244], "record count")
    record_duration = _float_field(data[244:252], "record duration")
    n_signals = _int_field(data[252:256], "signal count")
    if n_signals <= 0:
        raise MalformedHeaderError(f"signal count must be positive, got {n_signals}")
    if record_duration <= 0:
        raise MalformedHeaderError(f"record duration must be positive, got {record_duration}")

    header_end = _HEADER_LEN + _SIGNAL_HEADER_LEN * n_signals
    if len(data) < header_end:
        raise TruncatedFileError(f"{len(data)} bytes < {header_end} of declared headers")

    # Per-signal fields are stored field-major: all labels, all transducers, ...
    fields: list[list[bytes]] = []
    pos = _HEADER_LEN
    for width in _SIGNAL_FIELDS:
        row = [data[pos + i * width: pos + (i + 1) * width] for i in range(n_signals)]
        fields.append(row)
        pos += width * n_signals
    labels = [_ascii(f) for f in fields[0]]
    phys_min = [_float_field(f, "physical min") for f in fields[3]]
    phys_max = [_float_field(f, "physical max") for f in fields[4]]
    dig_min = [_int_field(f, "digital min") for f in fields[5]]
    dig_max = [_int_field(f, "digital max") for f in fields[6]]
    spr = [_int_field(f, "samples per record") for f in fields[8]]
    for i, n in enumerate(spr):
        if n <= 0:
            raise MalformedHeaderError(f"signal {i}: samples per record {n} <= 0")

    keep: list[int] = []
    dropped: list[str] = []
    seen: set[str] = set()
    for i, label in enumerate(labels):
        if label.startswith("EDF Annotations") or label.startswith("-") or label in seen:
            dropped.append(label)
            continue
        seen.add(label)
        keep.append(i)
    if not keep:
        raise MalformedHeaderError("no data channels after dropping annotation/placeholder rows")

    kept_spr = {spr[i] for i in keep}
    if len(kept_spr) != 1:
        raise InconsistentRatesError(
            f"signals carry {sorted(kept_spr)} samples per {record_duration} s record"
        )
    for i in keep:
        if dig_max[i] == dig_min[i]:
            raise MalformedHeaderError(f"signal {i}: digital range is empty")

    record_samples = sum(spr)
    if n_records < 0:  # unknown count: infer whole records from the payload
        n_records = (len(data) - header_end) // (2 * record_samples)
    if n_records < 1:
        raise MalformedHeaderError("stream contains no data records")
    expected = header_end + 2 * record_samples * n_records
    if len(data) < expected:
        raise TruncatedFileError(f"{len(data)} bytes < declared {expected}")

    raw = np.frombuffer(data, dtype="<i2", count=record_samples * n_records, offset=header_end)
    raw = raw.reshape(n_records, record_samples)
    offsets = np.concatenate(([0], np.cumsum(spr)))

    rows = []
    for i in keep:
        dig = raw[:, offsets[i]:offsets[i + 1]].astype(np.float64).ravel()
        scale = (phys_max[i] - phys_min[i]) / (dig_max[i] - dig_min[i])
        rows.append((dig - dig_min[i]) * scale + phys_min[i])

    sample_rate = spr[keep[0]] / record_duration
    return Recording(
        id=rec_id,
        sample_rate_hz=sample_rate,
        channels=tuple(labels[i] for i in keep),
        samples=np.vstack(rows),
        annotations=SeizureAnnotations(),
        dropped_channels=tuple(dropped),
    )


def _fit8(value: float, direction: str) -> str:
    """Format a float into <= 8 ASCII chars whose parsed value bounds `value`.

    direction "le" keeps parsed <= value, "ge" keeps parsed >= value; this
    makes written physical ranges always contain the data they quantize.
    """
    if not math.isfinite(value):
        raise ValueError("cannot encode non-finite header value")
    x = value
    for _ in range(64):
        if x == int(x) and len(str(int(x))) <= 8:
            s = str(int(x))
        else:
            s = ""
            for prec in range(7, 0, -1):
                s = f"{x:.{prec}g}"
                if len(s) <= 8:
                    break
            if len(s) > 8:
                raise ValueError(f"value {value} does not fit an 8-char EDF field")
        parsed = float(s)
        if direction == "le" and parsed <= value:
            return s
        if direction == "ge" and parsed >= value:
            return s
        step = max(abs(value) * 1e-6, 1e-6)
        x = x - step if direction == "le" else x + step
    raise ValueError(f"could not bound {value} within 8 chars")


def _pad(text: str, width: int) -> bytes:
    cleaned = "".join(c if 32 <= ord(c) <= 126 else "_" for c in text)[:width]
    return cleaned.ljust(width).encode("ascii")


def write_edf(
    rec: Recording,
    phys_range: tuple[float, float] | None = None,
    digital_range: tuple[int, int] = DEFAULT_DIGITAL_RANGE,
) -> bytes:
    """Serialize a Recording to EDF bytes.

    With phys_range=None each channel is quantized against its own data
    range (degenerate ranges are widened by +/-1, so constant-zero channels
    round-trip exactly).  An explicit phys_range applies to every channel
    and raises RangeOverflowError when a sample falls outside it.

    Whole-second data records are used when the sample count divides into
    integer-rate seconds; otherwise a single record holds the signal and
    the record duration is quantized through its 8-char ASCII field, which
    may perturb the parsed sample rate (never the samples).
    """
    n_channels, n_samples = rec.samples.shape
    dig_min, dig_max = digital_range
    if not -32768 <= dig_min < dig_max <= 32767:
        raise ValueError(f"digital range {digital_range} not within int16")

    rate = rec.sample_rate_hz
    if rate == int(rate) and n_samples % int(rate) == 0:
        spr = int(rate)
        n_records = n_samples // spr
        duration_str = "1"
    else:
        spr = n_samples
        n_records = 1
        duration_str = _fit8(n_samples / rate, "ge")

    lo_strs, hi_strs = [], []
    for c in range(n_channels):
        if phys_range is not None:
            lo, hi = float(phys_range[0]), float(phys_range[1])
        else:
            lo = float(rec.samples[c].min())
            hi = float(rec.samples[c].max())
            if lo == hi:
                lo, hi = lo - 1.0, hi + 1.0
        lo_strs.append(_fit8(lo, "le"))
        hi_strs.append(_fit8(hi, "ge"))

    digital = np.empty((n_channels, n_samples), dtype="<i2")
    for c in range(n_channels):
        lo, hi = float(lo_strs[c]), float(hi_strs[c])
        x = rec.samples[c]
        if phys_range is not None and (x.min() < lo or x.max() > hi):
            raise RangeOverflowError(
                f"channel {rec.channels[c]}: values exceed physical range [{lo}, {hi}]"
            )
        scale = (hi - lo) / (dig_max - dig_min)
        dig = np.rint((x - lo) / scale) + dig_min
        digital[c] = np.clip(dig, dig_min, dig_max).astype("<i2")

    header = b"".join([
        _pad("0", 8),
        _pad("X", 80),
        _pad(rec.id, 80),
        _pad("01.01.00", 8),
        _pad("00.00.00", 8),
        _pad(str(_HEADER_LEN + _SIGNAL_HEADER_LEN * n_channels), 8),
        _pad("", 44),
        _pad(str(n_records), 8),
        _pad(duration_str, 8),
        _pad(str(n_channels), 4),
    ])

    def column(width: int, values: list[str]) -> bytes:
        return b"".join(_pad(v, width) for v in values)

    signal_header = b"".join([
        column(16, list(rec.channels)),
        column(80, [""] * n_channels),
        column(8, ["uV"] * n_channels),
        column(8, lo_strs),
        column(8, hi_strs),
        column(8, [str(dig_min)] * n_channels),
        column(8, [str(dig_max)] * n_channels),
        column(80, [""] * n_channels),
        column(8, [str(spr)] * n_channels),
        column(32, [""] * n_channels),
    ])

    payload = digital.reshape(n_channels, n_records, spr).transpose(1, 0, 2).tobytes()
    return header + signal_header + payload
