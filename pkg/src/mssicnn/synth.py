"""Synthetic bearing vibration records for the five health states.

Healthy records are a shaft-rate sinusoid in white noise. Each fault class
adds a train of exponentially decaying resonance bursts repeating at a
class-specific multiple of the shaft rate. Amplitudes and frequencies are
illustrative only; no bearing kinematics are modelled.
"""

import math
from dataclasses import dataclass

import numpy as np

from .features import Signal
from .seeding import derive_seed

CLASSES = ("NM", "IR", "B", "OR", "CA")

# Impact rate as a multiple of shaft speed (mutually non-harmonic).
FAULT_ORDERS = {"IR": 5.4, "B": 4.7, "OR": 3.6, "CA": 0.4}
# Resonance excited by the impacts, as a fraction of the sampling rate.
CARRIER_FRACTIONS = {"IR": 0.12, "B": 0.21, "OR": 0.15, "CA": 0.27}
# Burst decay time constant as a fraction of the impact period.
DECAY_FRACTION = 0.5
SHAFT_AMPLITUDE = {"NM": 1.0}
FAULT_SHAFT_AMPLITUDE = 0.3


@dataclass(frozen=True)
class SynthSpec:
    class_id: str
    sampling_rate: float = 20_000.0
    shaft_hz: float = 18.0
    duration: float = 5.0
    snr_db: float = 20.0
    seed: int = 0

    def __post_init__(self):
        if self.class_id not in CLASSES:
            raise ValueError(f"unknown class {self.class_id!r}; expected one of {CLASSES}")
        if not self.sampling_rate > 0 or not self.shaft_hz > 0 or not self.duration > 0:
            raise ValueError("sampling_rate, shaft_hz and duration must be positive")
        if self.n_samples < 1:
            raise ValueError("duration is shorter than one sample")
        if not self.sampling_rate > 2 * self.highest_frequency:
            raise ValueError(
                f"sampling_rate {self.sampling_rate} Hz does not exceed twice the highest "
                f"generated frequency {self.highest_frequency} Hz"
            )
        if math.isnan(self.snr_db):
            raise ValueError("snr_db must be a number (use inf to disable noise)")

    @property
    def n_samples(self):
        return int(round(self.duration * self.sampling_rate))

    @property
    def fault_hz(self):
        order = FAULT_ORDERS.get(self.class_id)
        return None if order is None else order * self.shaft_hz

    @property
    def carrier_hz(self):
        frac = CARRIER_FRACTIONS.get(self.class_id)
        return None if frac is None else frac * self.sampling_rate

    @property
    def highest_frequency(self):
        return max(f for f in (self.shaft_hz, self.fault_hz, self.carrier_hz) if f is not None)


def _components(spec):
    rng = np.random.default_rng(spec.seed)
    n = spec.n_samples
    t = np.arange(n) / spec.sampling_rate
    phase = rng.uniform(0, 2 * np.pi)
    amp = SHAFT_AMPLITUDE.get(spec.class_id, FAULT_SHAFT_AMPLITUDE)
    clean = amp * np.sin(2 * np.pi * spec.shaft_hz * t + phase)
    impulses = np.empty(0, dtype=np.int64)
    if spec.fault_hz is not None:
        period = 1.0 / spec.fault_hz
        offset = rng.uniform(0, period)
        times = offset + period * np.arange(int((spec.duration - offset) / period) + 1)
        impulses = np.round(times * spec.sampling_rate).astype(np.int64)
        impulses = impulses[impulses < n]
        decay = DECAY_FRACTION * period
        length = min(n, int(math.ceil(8 * decay * spec.sampling_rate)))
        tau = np.arange(length) / spec.sampling_rate
        burst = np.exp(-tau / decay) * np.sin(2 * np.pi * spec.carrier_hz * tau)
        for i in impulses:
            seg = min(length, n - i)
            clean[i : i + seg] += burst[:seg]
    return clean, impulses, rng


def impulse_indices(spec):
    """Sample indices at which fault bursts start (empty for ``NM``)."""
    return _components(spec)[1]


def synth_bearing_signal(spec):
    """Generate one labelled record; identical specs give identical samples."""
    clean, _, rng = _components(spec)
    if math.isinf(spec.snr_db) and spec.snr_db > 0:
        samples = clean
    else:
        rms = np.sqrt(np.mean(clean**2))
        sigma = rms * 10 ** (-spec.snr_db / 20)
        samples = clean + rng.normal(0.0, sigma, size=clean.shape)
    return Signal(
        samples=samples,
        sampling_rate=spec.sampling_rate,
        label=spec.class_id,
        source_id=f"{spec.class_id}-{spec.seed}",
    )


def synth_dataset(classes=CLASSES, per_class=1, seed=0, **spec_kwargs):
    """``per_class`` records per class, each with its own derived seed."""
    signals = []
    for cls in classes:
        for i in range(per_class):
            spec = SynthSpec(cls, seed=derive_seed(seed, f"synth/{cls}/{i}"), **spec_kwargs)
            sig = synth_bearing_signal(spec)
            sig.source_id = f"{cls}_{i:03d}"
            signals.append(sig)
    return signals
