"""
Waveform I/O, RIR convolution and white-noise injection.

All functions are pure apart from the file system; noise is drawn from a
seeded generator so repeated calls are bit-identical.
"""

import logging
import math
import os
from typing import Tuple, Union

import numpy as np
import soundfile as sf
from scipy.signal import fftconvolve

from ..errors import (
    AudioFileNotFoundError,
    EmptyAudioError,
    SignalError,
    UnsupportedAudioError,
    UnwritablePathError,
)
from ..models.audio_models import Rir, TimeSignal

logger = logging.getLogger(__name__)

SUPPORTED_SUBTYPES = {"PCM_16", "FLOAT"}
PCM16_SCALE = 32768.0
PCM16_MAX = 1.0 - 1.0 / PCM16_SCALE

NO_NOISE = math.inf


def read_wav(path: str) -> Union[TimeSignal, Tuple[TimeSignal, TimeSignal]]:
    """
    Read a 16-bit PCM or 32-bit float WAV file.

    Returns a TimeSignal for mono files and a (left, right) pair for stereo.
    """
    if not os.path.isfile(path):
        raise AudioFileNotFoundError(f"Audio file not found: {path}")

    try:
        info = sf.info(path)
    except RuntimeError as e:
        raise UnsupportedAudioError(f"Cannot parse audio file {path}: {e}")

    if info.format != "WAV" or info.subtype not in SUPPORTED_SUBTYPES:
        raise UnsupportedAudioError(
            f"Unsupported encoding {info.format}/{info.subtype} in {path}; expected PCM_16 or FLOAT WAV"
        )
    if info.channels not in (1, 2):
        raise UnsupportedAudioError(f"Expected 1 or 2 channels in {path}, found {info.channels}")
    if info.frames == 0:
        raise EmptyAudioError(f"Audio file has no samples: {path}")

    data, sample_rate = sf.read(path, dtype="float64", always_2d=True)
    logger.debug(f"Read {path}: {data.shape[0]} samples x {data.shape[1]} channels at {sample_rate} Hz")

    if data.shape[1] == 1:
        return TimeSignal(data[:, 0], sample_rate)
    return TimeSignal(data[:, 0], sample_rate), TimeSignal(data[:, 1], sample_rate)


def _to_pcm16(samples: np.ndarray) -> np.ndarray:
    clipped = np.clip(samples, -1.0, PCM16_MAX)
    return np.round(clipped * PCM16_SCALE).astype("<i2")


def write_wav(path: str, signal: Union[TimeSignal, Tuple[TimeSignal, TimeSignal]]) -> None:
    """Write 16-bit PCM; samples are clipped to [-1, 1 - 2^-15] before quantization"""
    if isinstance(signal, tuple):
        left, right = signal
        if left.sample_rate != right.sample_rate or len(left) != len(right):
            raise SignalError("Stereo channels must share sample rate and length")
        data = np.stack([_to_pcm16(left.samples), _to_pcm16(right.samples)], axis=1)
        sample_rate = left.sample_rate
    else:
        data = _to_pcm16(signal.samples)
        sample_rate = signal.sample_rate

    directory = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(directory) or not os.access(directory, os.W_OK):
        raise UnwritablePathError(f"Cannot write audio to {path}")

    try:
        sf.write(path, data, sample_rate, subtype="PCM_16", format="WAV")
    except (RuntimeError, OSError) as e:
        raise UnwritablePathError(f"Failed to write {path}: {e}")


def convolve(signal: TimeSignal, rir: Rir) -> TimeSignal:
    """Full linear convolution; the reverberant tail is kept"""
    if signal.sample_rate != rir.sample_rate:
        raise SignalError(
            f"Sample-rate mismatch: signal {signal.sample_rate} Hz, RIR {rir.sample_rate} Hz"
        )
    return TimeSignal(fftconvolve(signal.samples, rir.taps, mode="full"), signal.sample_rate)


def add_noise(signal: TimeSignal, snr_db: float, seed: int) -> TimeSignal:
    """Add white Gaussian noise at a global SNR measured over the whole signal"""
    if math.isinf(snr_db) and snr_db > 0:
        return TimeSignal(signal.samples.copy(), signal.sample_rate)

    signal_power = np.mean(signal.samples ** 2)
    if signal_power == 0.0:
        raise SignalError("Cannot add noise at a target SNR to a zero-energy signal")

    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(len(signal))
    # Scale the drawn realization so the achieved SNR is exact
    noise *= np.sqrt(signal_power / (np.mean(noise ** 2) * 10.0 ** (snr_db / 10.0)))
    return TimeSignal(signal.samples + noise, signal.sample_rate)


def measured_snr(clean: TimeSignal, noisy: TimeSignal) -> float:
    noise = noisy.samples - clean.samples
    return float(10.0 * np.log10(np.sum(clean.samples ** 2) / np.sum(noise ** 2)))
