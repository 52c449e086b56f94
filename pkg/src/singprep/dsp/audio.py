"""Waveform container, PCM-16 WAV I/O, and sample-rate conversion."""

from __future__ import annotations

import math
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import resample_poly

from ..errors import InputError


@dataclass(frozen=True)
class Waveform:
    """Mono audio in [-1, 1] at an integer sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 1 or samples.size == 0:
            raise InputError("waveform must be a nonempty 1-D array")
        if self.sample_rate <= 0:
            raise InputError(f"sample rate must be positive, got {self.sample_rate}")

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    def __len__(self) -> int:
        return self.samples.size


def read_wav(path, downmix: bool = False) -> Waveform:
    """Read a RIFF/WAVE file holding 16-bit PCM.

    Multichannel input is an error unless downmix=True (mean of channels).
    """
    try:
        with wave.open(str(path), "rb") as fh:
            nch = fh.getnchannels()
            width = fh.getsampwidth()
            comp = fh.getcomptype()
            rate = fh.getframerate()
            nframes = fh.getnframes()
            payload = fh.readframes(nframes)
    except (wave.Error, EOFError) as exc:
        raise InputError(f"{path}: not a readable WAV file: {exc}") from exc
    if comp != "NONE":
        raise InputError(f"{path}: compressed WAV ({comp}) not supported; PCM required")
    if width != 2:
        raise InputError(f"{path}: {8 * width}-bit samples not supported; 16-bit PCM required")
    if len(payload) < nframes * nch * 2:
        raise InputError(f"{path}: truncated WAV payload")
    data = np.frombuffer(payload, dtype="<i2").astype(np.float64) / 32768.0
    if nch > 1:
        if not downmix:
            raise InputError(f"{path}: {nch} channels; pass downmix=True for a mono mixdown")
        data = data.reshape(-1, nch).mean(axis=1)
    return Waveform(data, rate)


def write_wav(waveform: Waveform, path) -> None:
    """Write 16-bit PCM mono. Values are clipped to the representable range."""
    scaled = np.rint(waveform.samples * 32768.0)
    pcm = np.clip(scaled, -32768, 32767).astype("<i2")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(waveform.sample_rate)
        fh.writeframes(pcm.tobytes())


def resample(waveform: Waveform, target_rate: int) -> Waveform:
    """Windowed-sinc polyphase resampling to target_rate."""
    if target_rate <= 0:
        raise InputError(f"target rate must be positive, got {target_rate}")
    if target_rate == waveform.sample_rate:
        return waveform
    g = math.gcd(int(target_rate), int(waveform.sample_rate))
    up, down = target_rate // g, waveform.sample_rate // g
    out = resample_poly(waveform.samples, up, down)
    out = np.clip(out, -1.0, 1.0)
    return Waveform(out, int(target_rate))
