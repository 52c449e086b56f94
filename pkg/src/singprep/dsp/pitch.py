"""F0 estimation and pitch arithmetic.

The estimator is a normalized-difference autocorrelation method: per frame,
the cumulative-mean-normalized difference function is searched for the first
dip under a voicing threshold, refined by parabolic interpolation. Frames
with no dip under the threshold (or with negligible energy) are unvoiced and
carry the value 0.0.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.fft import irfft, next_fast_len, rfft

from ..errors import InputError
from .audio import Waveform

log = logging.getLogger(__name__)

DEFAULT_HOP = 0.005
DEFAULT_FMIN = 65.0
DEFAULT_FMAX = 1047.0
DEFAULT_THRESHOLD = 0.35

_SILENCE_POWER = 1e-10  # mean-square floor below which a frame is silent
_SELECT_THRESHOLD = 0.1  # strict dip level for period-candidate selection


@dataclass(frozen=True)
class F0Contour:
    """Frame-rate pitch track; value 0.0 marks an unvoiced frame."""

    values: np.ndarray
    hop: float = DEFAULT_HOP

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if values.ndim != 1:
            raise InputError("F0 contour must be 1-D")
        if self.hop <= 0:
            raise InputError(f"hop must be positive, got {self.hop}")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise InputError("F0 values must be finite and nonnegative")

    def __len__(self) -> int:
        return self.values.size

    @property
    def voiced(self) -> np.ndarray:
        return self.values > 0.0


def frame_count(n_samples: int, hop_samples: int) -> int:
    """Frames with centers at i*hop inside the signal."""
    return 1 + (n_samples - 1) // hop_samples


def extract_f0(
    waveform: Waveform,
    hop: float = DEFAULT_HOP,
    fmin: float = DEFAULT_FMIN,
    fmax: float = DEFAULT_FMAX,
    threshold: float = DEFAULT_THRESHOLD,
) -> F0Contour:
    """Estimate the F0 contour of a mono waveform.

    Requires sample_rate >= 4*fmax and at least two analysis windows of
    audio (the integration window is one maximum pitch period).
    """
    sr = waveform.sample_rate
    if sr < 4 * fmax:
        raise InputError(f"sample rate {sr} too low for fmax {fmax} (need >= {4 * fmax:.0f})")
    if not 0 < fmin < fmax:
        raise InputError(f"need 0 < fmin < fmax, got {fmin}, {fmax}")
    x = waveform.samples
    lag_min = max(2, int(sr / fmax))
    lag_max = int(math.ceil(sr / fmin))
    w = lag_max  # integration window: one maximum period
    if x.size < 2 * w:
        raise InputError(
            f"waveform too short for F0 analysis: {x.size} samples < two "
            f"{w}-sample windows"
        )
    hop_samples = max(1, int(round(hop * sr)))
    n = frame_count(x.size, hop_samples)

    padded = np.pad(x, (w, w), mode="reflect")
    frames = sliding_window_view(padded, 2 * w)[::hop_samples][:n]
    half = frames[:, :w]

    # difference function d(tau) = sum_j (x_j - x_{j+tau})^2 for tau in 0..w,
    # via energies plus an FFT cross-correlation
    nfft = next_fast_len(3 * w)
    spec_full = rfft(frames, nfft, axis=1)
    spec_half = rfft(half, nfft, axis=1)
    cross = irfft(spec_full * np.conj(spec_half), nfft, axis=1)[:, :w + 1]
    csq = np.concatenate(
        [np.zeros((n, 1)), np.cumsum(frames * frames, axis=1)], axis=1
    )
    e_fixed = csq[:, w] - csq[:, 0]
    e_slide = csq[:, w:2 * w + 1] - csq[:, 0:w + 1]
    diff = np.maximum(e_fixed[:, None] + e_slide - 2.0 * cross, 0.0)

    # cumulative-mean normalization
    cum = np.cumsum(diff[:, 1:], axis=1)
    cmndf = np.ones_like(diff)
    taus = np.arange(1, w + 1, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        cmndf[:, 1:] = np.where(cum > 0, diff[:, 1:] * taus / cum, 1.0)

    values = np.zeros(n)
    silent = e_fixed / w < _SILENCE_POWER
    for i in range(n):
        if silent[i]:
            continue
        row = cmndf[i]
        seg = row[lag_min:lag_max + 1]
        is_min = (seg[1:-1] <= seg[:-2]) & (seg[1:-1] <= seg[2:])
        mins = np.flatnonzero(is_min) + 1
        if mins.size == 0:
            continue
        # smallest lag dipping under the strict selection threshold wins;
        # otherwise the global minimum, preferring shorter lags on near-ties
        # so a subharmonic never shadows the true period
        strict = mins[seg[mins] < _SELECT_THRESHOLD]
        if strict.size:
            tau = lag_min + int(strict[0])
        else:
            near = mins[seg[mins] <= float(np.min(seg[mins])) + 0.02]
            tau = lag_min + int(near[0])
        if row[tau] >= threshold:
            continue
        # parabolic refinement on the normalized difference
        if 1 <= tau < w:
            a, b, c = row[tau - 1], row[tau], row[tau + 1]
            denom = a - 2.0 * b + c
            delta = 0.5 * (a - c) / denom if denom > 0 else 0.0
            delta = float(np.clip(delta, -0.5, 0.5))
        else:
            delta = 0.0
        f0 = sr / (tau + delta)
        values[i] = min(max(f0, fmin), fmax)
    return F0Contour(values, hop)


def midi_from_hz(f: float) -> float:
    """MIDI note number for a frequency: 69 + 12*log2(f/440)."""
    if f <= 0:
        raise InputError(f"frequency must be positive, got {f}")
    return 69.0 + 12.0 * math.log2(f / 440.0)


def hz_from_midi(m: float) -> float:
    return 440.0 * 2.0 ** ((m - 69.0) / 12.0)


def nearest_midi(f: float) -> int:
    """Nearest integer MIDI note (half steps round up)."""
    return int(math.floor(midi_from_hz(f) + 0.5))


def transpose_f0(contour: F0Contour, semitones: float, max_hz: float | None = None) -> F0Contour:
    """Scale voiced values by 2^(semitones/12); unvoiced frames stay 0."""
    factor = 2.0 ** (semitones / 12.0)
    values = np.where(contour.voiced, contour.values * factor, 0.0)
    if max_hz is not None and np.any(values > max_hz):
        log.warning(
            "transpose by %+g semitones exceeds %g Hz on %d frames; clamping",
            semitones, max_hz, int(np.sum(values > max_hz)),
        )
        values = np.minimum(values, max_hz)
    return F0Contour(values, contour.hop)


def average_f0_by_segments(
    contour: F0Contour, segments: list[tuple[float, float]]
) -> list[tuple[tuple[float, float], int]]:
    """Per segment: geometric-mean pitch of voiced frames as an integer MIDI
    note, or 0 (rest) when the segment has no voiced frames."""
    out = []
    n = len(contour)
    for start, end in segments:
        i0 = max(0, int(math.ceil(start / contour.hop - 1e-9)))
        i1 = min(n, int(math.ceil(end / contour.hop - 1e-9)))
        chunk = contour.values[i0:i1]
        voiced = chunk[chunk > 0]
        if voiced.size == 0:
            out.append(((start, end), 0))
        else:
            mean_log = float(np.mean(np.log2(voiced)))
            out.append(((start, end), nearest_midi(2.0 ** mean_log)))
    return out
