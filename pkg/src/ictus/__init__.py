"""Single-seizure EEG seizure prediction.

Pipeline: parse or synthesize recordings, resample to 128 Hz, turn each
one-second window into a wavelet tensor, collect balanced interictal and
preictal segments from one seizure, train a similarity model on pair
combinations (or the multi-seizure classifier baselines), then stream
held-out recordings against a small support set and score the raised
alarms event-by-event.
"""

from ._mem import tune_allocator as _tune_allocator

_tune_allocator()

from .dsp import (
    DEFAULT_BANK,
    Label,
    NormStats,
    ScaleBank,
    WindowTensor,
    apply_norm,
    cwt_window,
    fit_norm_stats,
    mexican_hat,
    resample_2to1,
    resample_recording,
    tensorize,
)
from .edf import parse_edf, write_edf
from .errors import IctusError
from .model import (
    ArchitectureSpec,
    ModelParams,
    TrainConfig,
    classify,
    embed_forward,
    fine_tune,
    init_params,
    load_params,
    save_params,
    siamese_score,
    train,
)
from .predictor import (
    AlarmTrace,
    PredictorState,
    SmoothingPolicy,
    replay,
    replay_classifier,
    score_window,
    step,
)
from .recordings import (
    Recording,
    SeizureAnnotations,
    parse_annotations,
    parse_chbmit_summary,
    render_annotations,
)
from .segments import (
    CollectionConfig,
    PairExample,
    SegmentStore,
    SupportSet,
    collect_segments,
    label_windows_methodA,
    make_pairs,
    select_support,
    split_train_val,
)
from .evaluate import (
    EvalReport,
    PatientResult,
    SeizureCase,
    fpr_per_hour,
    leave_one_out,
    render_report,
    score_alarms,
    sensitivity,
)
from .synth import SynthConfig, synth_recording

__version__ = "0.1.0"
