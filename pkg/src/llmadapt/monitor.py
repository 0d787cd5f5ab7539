"""Failure codes from tracking errors, and FFT-based oscillation detection."""
from __future__ import annotations

import enum
import threading
from collections import deque
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array

from .dynamics import VehicleState
from .mission import ReferencePoint

AXES = "xyz"


class FailureCode(enum.IntEnum):
    NO_ISSUE = 0
    FLYING_TOO_HIGH = 3
    FLYING_TOO_LOW = 4
    POS_ERR_POS_Y = 5
    POS_ERR_NEG_Y = 6
    POS_ERR_POS_X = 7
    POS_ERR_NEG_X = 8


CODE_AXIS = {
    FailureCode.FLYING_TOO_HIGH: "z",
    FailureCode.FLYING_TOO_LOW: "z",
    FailureCode.POS_ERR_POS_Y: "y",
    FailureCode.POS_ERR_NEG_Y: "y",
    FailureCode.POS_ERR_POS_X: "x",
    FailureCode.POS_ERR_NEG_X: "x",
}

# (axis, code when error is above +threshold, code when below -threshold);
# this order is also the order of the info string.
_AXIS_RULES = (
    ("z", FailureCode.FLYING_TOO_HIGH, FailureCode.FLYING_TOO_LOW),
    ("y", FailureCode.POS_ERR_POS_Y, FailureCode.POS_ERR_NEG_Y),
    ("x", FailureCode.POS_ERR_POS_X, FailureCode.POS_ERR_NEG_X),
)


@dataclass(frozen=True)
class Thresholds:
    x: float = 0.10
    y: float = 0.10
    z: float = 0.10

    def __post_init__(self):
        if min(self.x, self.y, self.z) <= 0:
            raise ValueError("thresholds must be positive")

    @classmethod
    def uniform(cls, value: float) -> "Thresholds":
        return cls(value, value, value)


@dataclass(frozen=True)
class FailureReport:
    codes: tuple[int, ...] = (0,)
    info: str = ""

    def __post_init__(self):
        codes = tuple(int(c) for c in self.codes)
        if not codes:
            raise ValueError("a report carries at least one code")
        if list(codes) != sorted(codes):
            raise ValueError("codes must be sorted ascending")
        if 0 in codes and len(codes) > 1:
            raise ValueError("NO_ISSUE cannot be combined with other codes")
        object.__setattr__(self, "codes", codes)

    @property
    def ok(self) -> bool:
        return self.codes == (0,)


def tracking_error(state: VehicleState, ref: ReferencePoint) -> np.ndarray:
    return np.asarray(state.position_w, dtype=float) - np.asarray(ref.position_ref, dtype=float)


def check_failures(state: VehicleState, ref: ReferencePoint, thresholds: Thresholds = Thresholds(),
                   extra: str | None = None) -> FailureReport:
    err = tracking_error(state, ref)
    codes = []
    info = ""
    for axis, high, low in _AXIS_RULES:
        e = float(err[AXES.index(axis)])
        thr = getattr(thresholds, axis)
        if e > thr:
            codes.append(int(high))
        elif e < -thr:
            codes.append(int(low))
        else:
            continue
        info += f"{axis} error is {e:.2f}, "
    if extra:
        info += extra
    return FailureReport(tuple(sorted(codes)) or (0,), info)


@dataclass(frozen=True)
class OscillationReport:
    axis: str
    frequency: float
    amplitude: float


def fft_radix2(x) -> np.ndarray:
    """Iterative radix-2 decimation-in-time FFT; ``len(x)`` must be a power of two."""
    a = np.asarray(x, dtype=complex).copy()
    n = a.shape[0]
    if n == 0 or n & (n - 1):
        raise ValueError(f"length must be a power of two, got {n}")
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=int)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    a = a[rev]
    size = 2
    while size <= n:
        half = size // 2
        tw = np.exp(-2j * np.pi * np.arange(half) / size)
        blocks = a.reshape(-1, size)
        even = blocks[:, :half].copy()
        odd = blocks[:, half:] * tw
        blocks[:, :half] = even + odd
        blocks[:, half:] = even - odd
        a = blocks.reshape(n)
        size *= 2
    return a


def hann(n: int) -> np.ndarray:
    """Periodic Hann window."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def _hann_response(delta: float) -> float:
    """Normalized Hann main-lobe gain at ``delta`` bins from a tone."""
    if abs(delta) < 1e-12:
        return 1.0
    return abs(np.sinc(delta) / (1.0 - delta * delta))


def amplitude_spectrum(samples, sample_dt: float) -> tuple[np.ndarray, np.ndarray]:
    """One-sided amplitude spectrum of a mean-removed, Hann-windowed buffer.

    Amplitude at bin k is ``2|X_k| / (N * window_gain)``, with
    ``window_gain`` the window mean, so a bin-centered tone reads its
    amplitude.
    """
    y = np.asarray(samples, dtype=float)
    n = y.shape[0]
    w = hann(n)
    spec = fft_radix2((y - y.mean()) * w)
    amps = 2.0 * np.abs(spec[: n // 2 + 1]) / (n * w.mean())
    freqs = np.arange(n // 2 + 1) / (n * sample_dt)
    return freqs, amps


def _peak(freqs, amps, lo: float, hi: float, df: float) -> tuple[float, float] | None:
    in_band = np.flatnonzero((freqs >= lo) & (freqs <= hi))
    if in_band.size == 0:
        return None
    k = int(in_band[np.argmax(amps[in_band])])
    if amps[k] <= 0.0:
        return None
    delta = 0.0
    if 0 < k < len(amps) - 1:
        a0, a1, a2 = amps[k - 1], amps[k], amps[k + 1]
        denom = a0 - 2.0 * a1 + a2
        if denom < 0.0:
            delta = float(np.clip(0.5 * (a0 - a2) / denom, -0.5, 0.5))
    # undo the scalloping loss of the window at the interpolated offset
    amplitude = float(amps[k] / _hann_response(delta))
    return (k + delta) * df, amplitude


def detect_oscillation(buffer, sample_dt: float, band: tuple[float, float] = (0.2, 2.0),
                       amp_threshold: float = 0.1, min_periods: float = 3.0,
                       axes: str = AXES) -> OscillationReport | None:
    """Largest in-band spectral peak across axes, if it exceeds ``amp_threshold``.

    ``buffer`` is (N,) or (N, n_axes). The lower band edge is raised so the
    buffer spans at least ``min_periods`` cycles; a buffer too short for any
    analyzable frequency yields ``None``.
    """
    data = np.asarray(buffer, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    n = data.shape[0]
    if n < 4 or n & (n - 1):
        return None
    span = n * sample_dt
    nyquist = 0.5 / sample_dt
    lo = max(band[0], min_periods / span)
    hi = min(band[1], nyquist)
    if lo > hi:
        return None

    best = None
    for col in range(data.shape[1]):
        freqs, amps = amplitude_spectrum(data[:, col], sample_dt)
        peak = _peak(freqs, amps, lo, hi, 1.0 / span)
        if peak is None:
            continue
        freq, amp = peak
        if amp > amp_threshold and (best is None or amp > best.amplitude):
            best = OscillationReport(axes[col], float(np.clip(freq, lo, hi)), amp)
    return best


class OscillationDetector(BaseEstimator, TransformerMixin):
    """Transformer view of the detector.

    ``transform`` maps an (N, n_axes) buffer to its (N/2 + 1, n_axes)
    amplitude spectrum; ``detect`` returns the strongest in-band peak.
    """

    def __init__(self, sample_dt=0.05, band=(0.2, 2.0), amp_threshold=0.1, min_periods=3.0):
        self.sample_dt = sample_dt
        self.band = band
        self.amp_threshold = amp_threshold
        self.min_periods = min_periods

    def fit(self, X=None, y=None):
        if not self.sample_dt > 0:
            raise ValueError("sample_dt must be positive")
        lo, hi = self.band
        if not 0 <= lo < hi:
            raise ValueError(f"invalid band {self.band}")
        return self

    def transform(self, X):
        X = check_array(X, ensure_min_samples=4)
        spectra = [amplitude_spectrum(X[:, j], self.sample_dt)[1] for j in range(X.shape[1])]
        return np.column_stack(spectra)

    def frequencies(self, n_samples: int) -> np.ndarray:
        return np.arange(n_samples // 2 + 1) / (n_samples * self.sample_dt)

    def detect(self, X) -> OscillationReport | None:
        return detect_oscillation(X, self.sample_dt, tuple(self.band), self.amp_threshold,
                                  self.min_periods)


class ErrorRingBuffer:
    """Fixed-length buffer of position-error samples.

    One writer (control loop) and one reader (advisor); readers get a copy.
    """

    def __init__(self, size: int = 256):
        self._data: deque = deque(maxlen=size)
        self._lock = threading.Lock()
        self.size = size

    def append(self, sample) -> None:
        with self._lock:
            self._data.append(np.asarray(sample, dtype=float).copy())

    def clear(self) -> None:
        with self._lock:
            self._data.clear()

    @property
    def full(self) -> bool:
        return len(self._data) == self.size

    def snapshot(self) -> np.ndarray:
        with self._lock:
            return np.array(self._data)

    def __len__(self) -> int:
        return len(self._data)
