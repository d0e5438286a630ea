import numpy as np
import pytest

from ictus import (
    ArchitectureSpec,
    CollectionConfig,
    Recording,
    SeizureAnnotations,
    SynthConfig,
    collect_segments,
    fit_norm_stats,
    synth_recording,
)
from ictus.segments import normalize_store


def make_recording(n_seconds: float, rate: float = 128.0, channels: int = 1,
                   events=(), rec_id: str = "rec", offset: float = 0.0,
                   fill: float = 0.0) -> Recording:
    """Constant-valued recording; cheap stand-in where waveform is irrelevant."""
    n = int(round(n_seconds * rate))
    return Recording(
        id=rec_id,
        sample_rate_hz=rate,
        channels=tuple(f"C{i}" for i in range(channels)),
        samples=np.full((channels, n), fill, dtype=np.float64),
        start_offset_s=offset,
        annotations=SeizureAnnotations(tuple(events)),
    )


@pytest.fixture(scope="session")
def reduced_siamese_spec():
    """2-conv audit architecture: 4 channels, 16x10 input, 64-bit, no dropout."""
    return ArchitectureSpec(
        input_channels=4, input_time=16, input_scales=10,
        conv_filters=(4, 6), pool_after=(2,), embed_dim=6,
        head="siamese", g_hidden=(8, 6), dropout_rate=0.0, dtype="float64",
    )


@pytest.fixture(scope="session")
def reduced_classifier_spec():
    return ArchitectureSpec(
        input_channels=4, input_time=16, input_scales=10,
        conv_filters=(4, 6), pool_after=(2,), embed_dim=6,
        head="classifier", dropout_rate=0.0, dtype="float64",
    )


@pytest.fixture(scope="session")
def small_siamese_spec():
    """Small but real float32 architecture for behavioural tests."""
    return ArchitectureSpec(
        input_channels=2, conv_filters=(8, 8, 16), pool_after=(2, 3),
        embed_dim=32, head="siamese", g_hidden=(16, 8), dropout_rate=0.1,
    )


@pytest.fixture(scope="session")
def small_classifier_spec():
    return ArchitectureSpec(
        input_channels=2, conv_filters=(8, 8, 16), pool_after=(2, 3),
        embed_dim=32, head="classifier", dropout_rate=0.1,
    )


@pytest.fixture(scope="session")
def quick_collection():
    """Shrunk collection constants so fixtures stay around an hour of signal."""
    return CollectionConfig(t_minutes=2.0, m_hours=1.0)


@pytest.fixture(scope="session")
def synth_store(quick_collection):
    """Segment store collected from a small 2-channel synthetic recording."""
    rec = synth_recording(
        SynthConfig(duration_s=4500.0, seizure_onsets_s=(4200.0,),
                    channel_count=2, sample_rate_hz=128.0, seed=42),
        rec_id="unit-train",
    )
    return collect_segments([rec], quick_collection)


@pytest.fixture(scope="session")
def synth_store_normalized(synth_store):
    stats = fit_norm_stats(synth_store.d_interictal + synth_store.d_preictal)
    return normalize_store(synth_store, stats), stats
