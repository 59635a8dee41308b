"""Aggregate-channel-feature multi-view detector: boosted soft cascades over
pooled color/gradient channels, with mirrored views and detection fusion."""

from .backend import available_backends, backend_name, get_backend
from .boosting import SoftCascadeModel, TrainConfig, adaboost_train, evaluate_cascade
from .channels import ChannelConfig, ChannelStack, compute_channels
from .config import RunConfig
from .detector import (
    MirrorRef,
    MultiViewModel,
    detect_multiview,
    detect_single_view,
    mirror_model,
)
from .errors import (
    AcfdetError,
    ConfigError,
    ModelChecksumError,
    ModelFormatError,
    ModelTruncatedError,
    ModelVersionError,
    ValidationError,
)
from .evaluation import EvalConfig, evaluate, load_annotations, load_detections, save_detections
from .geometry import Detection
from .modelio import load_model, save_model
from .postprocess import AdjustmentParams, FusionConfig, apply_fusion
from .pyramid import PyramidConfig, build_pyramid
from .synth import SynthConfig, load_synth_dataset, synth_generate
from .training import train_multiview

__version__ = "1.0.0"

__all__ = [
    "AcfdetError",
    "AdjustmentParams",
    "ChannelConfig",
    "ChannelStack",
    "ConfigError",
    "Detection",
    "EvalConfig",
    "FusionConfig",
    "MirrorRef",
    "ModelChecksumError",
    "ModelFormatError",
    "ModelTruncatedError",
    "ModelVersionError",
    "MultiViewModel",
    "PyramidConfig",
    "RunConfig",
    "SoftCascadeModel",
    "SynthConfig",
    "TrainConfig",
    "ValidationError",
    "adaboost_train",
    "apply_fusion",
    "available_backends",
    "backend_name",
    "build_pyramid",
    "compute_channels",
    "detect_multiview",
    "detect_single_view",
    "evaluate",
    "evaluate_cascade",
    "get_backend",
    "load_annotations",
    "load_detections",
    "load_model",
    "load_synth_dataset",
    "mirror_model",
    "save_detections",
    "save_model",
    "synth_generate",
    "train_multiview",
]
