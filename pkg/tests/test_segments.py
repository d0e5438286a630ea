import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ictus import CollectionConfig, collect_segments, make_pairs, select_support, split_train_val
from ictus.dsp import Label, WindowTensor
from ictus.errors import (
    ExhaustedError,
    InvalidConfigError,
    NoQualifyingSeizureError,
    TooFewError,
)
from ictus.segments import (
    SegmentStore,
    label_windows_methodA,
    normalize_store,
    segment_manifest,
)

from conftest import make_recording


def store_of(n_i: int, n_p: int, seed: int = 0) -> SegmentStore:
    rng = np.random.default_rng(seed)

    def window(i, label):
        return WindowTensor(rng.standard_normal((1, 128, 10)).astype(np.float32),
                            t_start_s=float(i), label=label, source_id="s")

    return SegmentStore(
        d_interictal=[window(i, Label.INTERICTAL) for i in range(n_i)],
        d_preictal=[window(1000 + i, Label.PREICTAL) for i in range(n_p)],
        source_seizure=("s", 1000.0),
        source_recording_ids=frozenset({"s"}),
    )


class TestCollectionConfig:
    def test_defaults(self):
        cfg = CollectionConfig()
        assert cfg.t_minutes == 10.0
        assert cfg.m_hours == 4.0
        assert cfg.prediction_horizon_minutes == 60.0
        assert cfg.methodA_preictal_minutes == 15.0

    def test_invalid(self):
        with pytest.raises(InvalidConfigError):
            CollectionConfig(t_minutes=61.0)
        with pytest.raises(InvalidConfigError):
            CollectionConfig(m_hours=0.5)
        with pytest.raises(InvalidConfigError):
            CollectionConfig(prediction_horizon_minutes=5.0)


class TestCollect:
    def test_single_seizure_at_five_hours(self):
        # default t=10 min, m=4 h; onset 5 h into a continuous recording
        rec = make_recording(5 * 3600 + 120.0, events=((18000.0, 18040.0),))
        store = collect_segments([rec], CollectionConfig())
        assert len(store.d_interictal) == 600
        assert len(store.d_preictal) == 600
        i_starts = [w.t_start_s for w in store.d_interictal]
        assert i_starts[0] == 0.0 and i_starts[-1] == 599.0
        p_starts = [w.t_start_s for w in store.d_preictal]
        assert p_starts[0] == 17400.0 and p_starts[-1] == 17999.0
        assert all(w.label is Label.INTERICTAL for w in store.d_interictal)
        assert all(w.label is Label.PREICTAL for w in store.d_preictal)
        assert store.source_seizure == ("rec", 18000.0)

    def test_early_seizure_rejected(self):
        # first onset at 2 h fails the m=4 h gap; the 9 h onset is selected
        rec = make_recording(9.1 * 3600, events=((7200.0, 7240.0), (32400.0, 32440.0)))
        store = collect_segments([rec], CollectionConfig())
        assert store.source_seizure[1] == 32400.0
        # interictal candidate was re-collected right after the first seizure
        assert store.d_interictal[0].t_start_s == 7240.0

    def test_no_seizure(self):
        with pytest.raises(NoQualifyingSeizureError):
            collect_segments([make_recording(4000.0)], CollectionConfig(t_minutes=2))

    def test_gap_never_qualifies(self):
        rec = make_recording(3600.0, events=((3000.0, 3040.0),))
        with pytest.raises(NoQualifyingSeizureError):
            collect_segments([rec], CollectionConfig(t_minutes=2, m_hours=1))

    def test_ictal_tail_extends_both_sides(self, quick_collection):
        rec = make_recording(4500.0, events=((4200.0, 4260.0),))
        cfg = CollectionConfig(t_minutes=2.0, m_hours=1.0, include_ictal_tail_s=30.0)
        store = collect_segments([rec], cfg)
        assert len(store.d_interictal) == len(store.d_preictal) == 150
        labels = [w.label for w in store.d_preictal]
        assert labels.count(Label.ICTAL) == 30
        assert labels.count(Label.PREICTAL) == 120

    def test_quick_fixture_balanced(self, synth_store):
        assert len(synth_store.d_interictal) == len(synth_store.d_preictal) == 120

    def test_interictal_precedes_onset_minus_m(self, synth_store, quick_collection):
        onset_abs = 4200.0
        for w in synth_store.d_interictal:
            assert w.t_start_s < onset_abs - quick_collection.m_seconds

    def test_stores_temporally_disjoint(self, synth_store):
        i_starts = {w.t_start_s for w in synth_store.d_interictal}
        p_starts = {w.t_start_s for w in synth_store.d_preictal}
        assert i_starts.isdisjoint(p_starts)

    def test_multi_recording_timeline(self):
        # interictal candidate from the first file, seizure in the second
        a = make_recording(600.0, rec_id="a")
        b = make_recording(4500.0, rec_id="b", offset=600.0,
                           events=((3900.0, 3940.0),))
        store = collect_segments([a, b], CollectionConfig(t_minutes=2, m_hours=1))
        assert store.source_recording_ids == frozenset({"a", "b"})
        assert store.d_interictal[0].source_id == "a"
        assert store.d_preictal[0].source_id == "b"


class TestMethodALabeling:
    def test_counts_balanced(self):
        # 3 seizures, 15-min preictal each -> 2700 + 2700 (m=1h exclusion)
        events = ((5400.0, 5440.0), (12600.0, 12640.0), (19800.0, 19840.0))
        rec = make_recording(25200.0, events=events)
        cfg = CollectionConfig(t_minutes=2.0, m_hours=1.0)
        windows = label_windows_methodA([rec], cfg, seed=0)
        pre = [w for w in windows if w.label is Label.PREICTAL]
        inter = [w for w in windows if w.label is Label.INTERICTAL]
        assert len(pre) == 3 * 900
        assert len(inter) == len(pre)

    def test_exclusion_rule(self):
        rec = make_recording(4 * 3600.0, events=((12600.0, 12640.0),))
        cfg = CollectionConfig(t_minutes=2.0, m_hours=1.0)
        windows = label_windows_methodA([rec], cfg, seed=1)
        onset = 12600.0
        for w in windows:
            if w.label is Label.INTERICTAL:
                clear = (w.t_start_s + 1.0 <= onset - 3600.0) or (
                    w.t_start_s >= onset + 3600.0)
                assert clear

    def test_no_clear_interictal(self):
        rec = make_recording(5400.0, events=((2700.0, 2740.0),))
        with pytest.raises(NoQualifyingSeizureError):
            label_windows_methodA([rec], CollectionConfig(t_minutes=2.0, m_hours=1.0))

    def test_deterministic(self):
        rec = make_recording(4 * 3600.0, events=((12600.0, 12640.0),))
        cfg = CollectionConfig(t_minutes=2.0, m_hours=1.0)
        a = label_windows_methodA([rec], cfg, seed=5)
        b = label_windows_methodA([rec], cfg, seed=5)
        assert [w.t_start_s for w in a] == [w.t_start_s for w in b]


class TestMakePairs:
    def test_capacity_arithmetic(self):
        # 600+600 windows: 360000 dissimilar, C(600,2)=179700 same-class pairs
        assert 600 * 600 == 360_000
        assert 600 * 599 // 2 == 179_700

    def test_small_exact(self):
        pairs = make_pairs(store_of(2, 2), 4, seed=0)
        assert len(pairs) == 4
        assert sum(p.similar for p in pairs) == 2
        labels = sorted((p.a.label.value, p.b.label.value) for p in pairs if p.similar)
        assert labels == [("interictal", "interictal"), ("preictal", "preictal")]

    def test_deterministic(self):
        a = make_pairs(store_of(10, 10), 20, seed=3)
        b = make_pairs(store_of(10, 10), 20, seed=3)
        assert [(p.a.t_start_s, p.b.t_start_s, p.similar) for p in a] == \
               [(p.a.t_start_s, p.b.t_start_s, p.similar) for p in b]

    def test_exhausted_stratum(self):
        store = store_of(4, 30)
        # interictal-interictal capacity C(4,2)=6; ask for 8 -> 32 total
        with pytest.raises(ExhaustedError):
            make_pairs(store, 32, seed=0)

    def test_large_request_within_capacity(self):
        store = store_of(30, 30)
        pairs = make_pairs(store, 800, seed=0)
        assert len(pairs) == 800
        assert sum(p.similar for p in pairs) == 400

    def test_no_duplicate_pairs_within_strata(self):
        pairs = make_pairs(store_of(12, 12), 100, seed=1)
        seen = set()
        for p in pairs:
            key = (p.similar, frozenset((id(p.a), id(p.b))) if p.similar
                   else (id(p.a), id(p.b)))
            assert key not in seen
            seen.add(key)

    def test_odd_n_rejected(self):
        with pytest.raises(ValueError):
            make_pairs(store_of(5, 5), 3, seed=0)

    def test_too_few_windows(self):
        with pytest.raises(TooFewError):
            make_pairs(store_of(1, 5), 4, seed=0)

    @given(n_i=st.integers(3, 8), n_p=st.integers(3, 8), seed=st.integers(0, 99))
    @settings(max_examples=25, deadline=None)
    def test_pair_labels_pure_function_of_window_labels(self, n_i, n_p, seed):
        limit = min(n_i * (n_i - 1) // 2, n_p * (n_p - 1) // 2, n_i * n_p)
        n_pairs = max(4, (min(4 * limit, 16) // 4) * 4)
        pairs = make_pairs(store_of(n_i, n_p, seed), n_pairs, seed=seed)
        for p in pairs:
            same_class = (p.a.label is Label.INTERICTAL) == (p.b.label is Label.INTERICTAL)
            assert p.similar == same_class


class TestSplit:
    def test_fraction(self):
        train, val = split_train_val(list(range(1000)), 0.85, seed=0)
        assert len(train) == 850 and len(val) == 150

    def test_two_items(self):
        train, val = split_train_val([1, 2], 0.85, seed=0)
        assert len(train) == 1 and len(val) == 1

    def test_too_few(self):
        with pytest.raises(TooFewError):
            split_train_val([1], 0.85, seed=0)

    @given(n=st.integers(2, 200), seed=st.integers(0, 99))
    @settings(max_examples=40, deadline=None)
    def test_disjoint_exhaustive(self, n, seed):
        items = list(range(n))
        train, val = split_train_val(items, 0.85, seed=seed)
        assert sorted(train + val) == items
        assert train and val


class TestSupport:
    def test_deterministic(self, synth_store):
        a = select_support(synth_store, 5, seed=1)
        b = select_support(synth_store, 5, seed=1)
        assert [w.t_start_s for w in a.s_interictal] == [w.t_start_s for w in b.s_interictal]
        assert a.k == 5 and len(a.s_preictal) == 5

    def test_seed_changes_selection(self, synth_store):
        a = select_support(synth_store, 5, seed=1)
        b = select_support(synth_store, 5, seed=2)
        assert [w.t_start_s for w in a.s_interictal + a.s_preictal] != \
               [w.t_start_s for w in b.s_interictal + b.s_preictal]

    def test_too_few(self):
        with pytest.raises(TooFewError):
            select_support(store_of(4, 10), k=5, seed=0)

    def test_source_ids_carried(self, synth_store):
        support = select_support(synth_store, 3, seed=0)
        assert support.source_recording_ids == synth_store.source_recording_ids


class TestManifest:
    def test_lines(self, synth_store):
        text = segment_manifest(synth_store.d_interictal[:2])
        lines = text.strip().splitlines()
        assert lines[0].startswith("#")
        assert lines[1].split("\t") == ["unit-train", "0.0", "interictal"]

    def test_normalize_store_keeps_structure(self, synth_store_normalized, synth_store):
        normed, stats = synth_store_normalized
        assert len(normed.d_interictal) == len(synth_store.d_interictal)
        assert normed.source_recording_ids == synth_store.source_recording_ids
        assert normed.d_preictal[0].label is Label.PREICTAL
