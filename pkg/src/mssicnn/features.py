"""Multi-scale spectral image (MSSI) features.

A vibration record is cut into non-overlapping segments. For each segment the
leading ``2**m`` samples are transformed for every ``m`` in
``[m_min, m_max]``, each one-sided magnitude spectrum is min-max normalised,
stretched to the longest row, and the stacked ``rows x 256`` matrix is
reshaped row-major to a 32 x 56 image.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_image_batch, check_positive_int, check_series
from .dsp import align_to_length, magnitude_spectrum, minmax_normalize, remove_mean

MSSI_SHAPE = (32, 56)
MSSI_SIZE = MSSI_SHAPE[0] * MSSI_SHAPE[1]
UPSCALED_SIZE = 128


@dataclass
class Signal:
    samples: np.ndarray
    sampling_rate: float
    label: Optional[str] = None
    source_id: str = ""

    def __post_init__(self):
        self.samples = check_series(self.samples, f"signal {self.source_id!r}")
        if not self.sampling_rate > 0:
            raise ValueError(f"signal {self.source_id!r}: sampling_rate must be positive")

    def __len__(self):
        return self.samples.shape[0]


@dataclass
class Segment:
    samples: np.ndarray
    label: Optional[str] = None


@dataclass
class MssiImage:
    pixels: np.ndarray
    label: Optional[str] = None
    source_id: str = field(default="", compare=False)


@dataclass(frozen=True)
class FeatureConfig:
    m_min: int = 3
    m_max: int = 9
    seg_len: int = 2048

    def __post_init__(self):
        check_positive_int(self.m_min, "m_min")
        check_positive_int(self.m_max, "m_max")
        check_positive_int(self.seg_len, "seg_len")
        if self.m_min > self.m_max:
            raise ValueError("m_min must not exceed m_max")
        if 2**self.m_max > self.seg_len:
            raise ValueError(f"seg_len {self.seg_len} is shorter than 2**m_max = {2**self.m_max}")

    @property
    def rows(self):
        return self.m_max - self.m_min + 1

    @property
    def row_len(self):
        return 2 ** (self.m_max - 1)


def segment_signal(signal, seg_len):
    """Split ``signal`` into ``len // seg_len`` mean-removed segments.

    The trailing remainder is dropped.
    """
    seg_len = check_positive_int(seg_len, "seg_len")
    n = len(signal)
    if n < seg_len:
        raise ValueError(f"signal too short: {n} samples < seg_len {seg_len}")
    count = n // seg_len
    return [
        Segment(remove_mean(signal.samples[i * seg_len : (i + 1) * seg_len]), signal.label)
        for i in range(count)
    ]


def _segment_samples(seg):
    return check_series(seg.samples if isinstance(seg, Segment) else seg, "segment")


def multiscale_spectra(seg, cfg=FeatureConfig()):
    """Normalised one-sided spectra of the segment head, ascending in ``m``."""
    x = _segment_samples(seg)
    if x.shape[0] < 2**cfg.m_max:
        raise ValueError(f"segment length {x.shape[0]} < 2**m_max = {2**cfg.m_max}")
    return [
        minmax_normalize(magnitude_spectrum(x[: 2**m]))
        for m in range(cfg.m_min, cfg.m_max + 1)
    ]


def build_mssi(seg, cfg=FeatureConfig()):
    """Return the 32 x 56 MSSI matrix of one segment."""
    if cfg.rows * cfg.row_len != MSSI_SIZE:
        raise ValueError("incompatible MSSI geometry")
    rows = [align_to_length(r, cfg.row_len) for r in multiscale_spectra(seg, cfg)]
    return np.stack(rows).reshape(MSSI_SHAPE)


def upscale_nearest(img, size=UPSCALED_SIZE):
    """Nearest-neighbour resize of a 32 x 56 image (or a stack of them) to ``size`` x ``size``."""
    img = np.asarray(img)
    if img.shape[-2:] != MSSI_SHAPE:
        raise ValueError(f"expected trailing shape {MSSI_SHAPE}, got {img.shape}")
    rows = (np.arange(size) * MSSI_SHAPE[0]) // size
    cols = (np.arange(size) * MSSI_SHAPE[1]) // size
    return img[..., rows[:, None], cols[None, :]]


def featurize_dataset(signals, cfg=FeatureConfig()):
    """MSSI images for every segment of every signal, in signal then segment order."""
    images = []
    for sig in signals:
        try:
            for seg in segment_signal(sig, cfg.seg_len):
                images.append(MssiImage(build_mssi(seg, cfg), sig.label, sig.source_id))
        except ValueError as exc:
            raise ValueError(f"{sig.source_id}: {exc}") from exc
    return images


class MssiTransformer(TransformerMixin, BaseEstimator):
    """Map fixed-length signal segments to flattened MSSI features.

    Each row of ``X`` is one raw segment; it is mean-removed before the
    spectra are taken. The output has 1792 columns (row-major 32 x 56).

    Parameters
    ----------
    m_min, m_max : int
        Range of FFT length exponents.
    """

    def __init__(self, m_min=3, m_max=9):
        self.m_min = m_min
        self.m_max = m_max

    def _config(self, n_samples):
        return FeatureConfig(self.m_min, self.m_max, seg_len=n_samples)

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2:
            raise ValueError(f"expected a 2-D array of segments, got shape {X.shape}")
        cfg = self._config(X.shape[1])
        if cfg.rows * cfg.row_len != MSSI_SIZE:
            raise ValueError("incompatible MSSI geometry")
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        if not hasattr(self, "n_features_in_"):
            from sklearn.exceptions import NotFittedError

            raise NotFittedError("MssiTransformer is not fitted yet")
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected shape (n, {self.n_features_in_}), got {X.shape}")
        cfg = self._config(X.shape[1])
        out = np.empty((X.shape[0], MSSI_SIZE))
        for i, row in enumerate(X):
            out[i] = build_mssi(remove_mean(row), cfg).ravel()
        return out


def as_image_stack(X):
    """Coerce flattened or 2-D MSSI input to an ``(n, 32, 56)`` array."""
    return check_image_batch(X, MSSI_SHAPE)
