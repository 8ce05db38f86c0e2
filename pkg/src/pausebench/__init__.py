"""Pause detection and exertion classification for post-exercise speech.

Frame-level pause labels on a 50 Hz grid, GRU sequence models trained
with plain or distance-aware focal objectives, event-level scoring with
boundary tolerance, and an ordinal head for perceived-exertion levels.
"""

from .core import (
    PauseType,
    PAUSE_TYPES,
    N_CLASSES,
    FrameLabelSeq,
    PauseEvent,
    OverlapError,
    encode_labels,
    decode_events,
    RecordingMeta,
    ManifestRecord,
    DatasetManifest,
    load_manifest,
    save_manifest,
    load_labels,
    save_labels,
)
from .protocol import RATE_HZ, WINDOW_S, WINDOW_FRAMES, protocol_constants
from .losses import (
    DafParams,
    huber_loss,
    daf_loss,
    ce_loss,
    bce_loss,
    inverse_frequency_weights,
)
from .evaluation import MatchConfig, MatchResult, greedy_match, oracle_match, event_accuracy
from .postproc import (
    PostprocConfig,
    lowpass,
    regression_to_classes,
    merge_low_high,
    clean_classification,
    mask_tail,
    sweep_thresholds,
)
from .features import (
    AudioClip,
    FeatureMatrix,
    compute_mfb,
    compute_mfcc,
    resample_embedding,
    fuse,
    read_wav,
    write_wav,
    load_matrix,
    save_matrix,
)
from .dataprep import Window, SplitSpec, SynthConfig, segment_windows, split_by_subject, synth_generate
from .annotation import majority_vote, merged_label_doc, corpus_stats
from .exertion import (
    ExertionLabel,
    cluster_exertion,
    ordinal_targets,
    coral_loss,
    CoralHead,
    coral_predict,
    train_coral_head,
)
from .models import (
    ModelConfig,
    Model,
    TrainConfig,
    init_model,
    forward,
    forward_batch,
    train,
    save_checkpoint,
    load_checkpoint,
)
from .pipeline import PipelineConfig, PipelineError, run_pipeline

__version__ = "0.1.0"

__all__ = [
    "PauseType", "PAUSE_TYPES", "N_CLASSES", "FrameLabelSeq", "PauseEvent",
    "OverlapError", "encode_labels", "decode_events", "RecordingMeta",
    "ManifestRecord", "DatasetManifest", "load_manifest", "save_manifest",
    "load_labels", "save_labels",
    "RATE_HZ", "WINDOW_S", "WINDOW_FRAMES", "protocol_constants",
    "DafParams", "huber_loss", "daf_loss", "ce_loss", "bce_loss",
    "inverse_frequency_weights",
    "MatchConfig", "MatchResult", "greedy_match", "oracle_match", "event_accuracy",
    "PostprocConfig", "lowpass", "regression_to_classes", "merge_low_high",
    "clean_classification", "mask_tail", "sweep_thresholds",
    "AudioClip", "FeatureMatrix", "compute_mfb", "compute_mfcc",
    "resample_embedding", "fuse", "read_wav", "write_wav", "load_matrix", "save_matrix",
    "Window", "SplitSpec", "SynthConfig", "segment_windows", "split_by_subject",
    "synth_generate",
    "majority_vote", "merged_label_doc", "corpus_stats",
    "ExertionLabel", "cluster_exertion", "ordinal_targets", "coral_loss",
    "CoralHead", "coral_predict", "train_coral_head",
    "ModelConfig", "Model", "TrainConfig", "init_model", "forward",
    "forward_batch", "train", "save_checkpoint", "load_checkpoint",
    "PipelineConfig", "PipelineError", "run_pipeline",
]
