import numpy as np
import pytest

from ictus import SynthConfig, synth_recording
from ictus.errors import InvalidConfigError

from helpers import band_power_dft


def small_cfg(**overrides):
    base = dict(duration_s=60.0, seizure_onsets_s=(), channel_count=2,
                sample_rate_hz=128.0, seed=3)
    base.update(overrides)
    return SynthConfig(**base)


class TestConfigValidation:
    def test_negative_duration(self):
        with pytest.raises(InvalidConfigError):
            small_cfg(duration_s=-1.0)

    def test_onsets_too_close(self):
        with pytest.raises(InvalidConfigError):
            SynthConfig(duration_s=4000.0, seizure_onsets_s=(1300.0, 1400.0),
                        preictal_shift_minutes=10.0)

    def test_seizure_past_end(self):
        with pytest.raises(InvalidConfigError):
            small_cfg(seizure_onsets_s=(50.0,), seizure_duration_s=30.0)

    def test_unsorted_onsets(self):
        with pytest.raises(InvalidConfigError):
            SynthConfig(duration_s=20000.0, seizure_onsets_s=(9000.0, 3000.0))


class TestGenerator:
    def test_deterministic(self):
        cfg = small_cfg()
        a = synth_recording(cfg)
        b = synth_recording(cfg)
        np.testing.assert_array_equal(a.samples, b.samples)
        assert a.id == b.id

    def test_seed_changes_output(self):
        a = synth_recording(small_cfg(seed=1))
        b = synth_recording(small_cfg(seed=2))
        assert np.abs(a.samples - b.samples).max() > 0.1

    def test_annotations_match_config(self):
        cfg = SynthConfig(duration_s=20000.0, seizure_onsets_s=(18000.0,),
                          seizure_duration_s=40.0, channel_count=1,
                          sample_rate_hz=128.0, seed=0)
        rec = synth_recording(cfg)
        assert rec.annotations.events == ((18000.0, 18040.0),)

    def test_shapes_and_rate(self):
        rec = synth_recording(small_cfg())
        assert rec.samples.shape == (2, 60 * 128)
        assert rec.sample_rate_hz == 128.0

    def test_ictal_3hz_power_dominates(self):
        # periodogram oracle computed with a direct DFT over 2.5-3.5 Hz
        cfg = SynthConfig(duration_s=2000.0, seizure_onsets_s=(1800.0,),
                          seizure_duration_s=40.0, channel_count=1,
                          sample_rate_hz=128.0, preictal_shift_minutes=10.0, seed=9)
        rec = synth_recording(cfg)
        rate = int(cfg.sample_rate_hz)
        ictal = rec.samples[0, 1800 * rate: 1808 * rate]
        inter = rec.samples[0, 100 * rate: 108 * rate]
        p_ictal = band_power_dft(ictal, cfg.sample_rate_hz, 2.5, 3.5)
        p_inter = band_power_dft(inter, cfg.sample_rate_hz, 2.5, 3.5)
        assert p_ictal >= 10.0 * p_inter

    def test_preictal_beta_power_elevated(self):
        cfg = SynthConfig(duration_s=2000.0, seizure_onsets_s=(1800.0,),
                          seizure_duration_s=40.0, channel_count=1,
                          sample_rate_hz=128.0, preictal_shift_minutes=10.0, seed=9)
        rec = synth_recording(cfg)
        rate = int(cfg.sample_rate_hz)
        pre = rec.samples[0, 1400 * rate: 1408 * rate]
        inter = rec.samples[0, 100 * rate: 108 * rate]
        p_pre = band_power_dft(pre, cfg.sample_rate_hz, 17.0, 23.0)
        p_inter = band_power_dft(inter, cfg.sample_rate_hz, 17.0, 23.0)
        assert p_pre >= 5.0 * p_inter
