"""Bearing fault diagnosis from multi-scale spectral images (MSSI) and a
small numpy convolutional network."""

from .estimator import MssiCnnClassifier
from .features import (
    FeatureConfig,
    MssiImage,
    MssiTransformer,
    Segment,
    Signal,
    build_mssi,
    featurize_dataset,
    multiscale_spectra,
    segment_signal,
    upscale_nearest,
)
from .pipeline import LabeledDataset, TrainConfig, TrialReport, evaluate, predict, run_trials, split_dataset, train

__version__ = "0.1.0"

__all__ = [
    "FeatureConfig",
    "LabeledDataset",
    "MssiCnnClassifier",
    "MssiImage",
    "MssiTransformer",
    "Segment",
    "Signal",
    "TrainConfig",
    "TrialReport",
    "build_mssi",
    "evaluate",
    "featurize_dataset",
    "multiscale_spectra",
    "predict",
    "run_trials",
    "segment_signal",
    "split_dataset",
    "train",
    "upscale_nearest",
]
