"""
Short-time Fourier analysis and weighted overlap-add synthesis.

Frames start at sample 0 with no centering; the last partial frame is
zero-padded so a signal of N samples gives 1 + ceil((N - L) / hop) frames.
"""

import logging

import numpy as np
from scipy import fft as sp_fft
from scipy.signal import windows

from ..errors import SignalError
from ..models.audio_models import ComplexSpectrogram, StftConfig, TimeSignal

logger = logging.getLogger(__name__)

WOLA_FLOOR = 1e-10


def hamming_window(length: int) -> np.ndarray:
    """Symmetric Hamming window, w(n) = 0.54 - 0.46 cos(2 pi n / (length - 1))"""
    if length < 2:
        raise SignalError(f"Window length must be at least 2, got {length}")
    return windows.hamming(length, sym=True)


def _frame_matrix(samples: np.ndarray, config: StftConfig) -> np.ndarray:
    num_frames = config.num_frames(len(samples))
    padded_len = (num_frames - 1) * config.hop + config.frame_len
    padded = np.zeros(padded_len)
    padded[:len(samples)] = samples
    starts = np.arange(num_frames) * config.hop
    index = starts[:, None] + np.arange(config.frame_len)[None, :]
    return padded[index]


def stft(signal: TimeSignal, config: StftConfig) -> ComplexSpectrogram:
    if len(signal) < config.frame_len:
        raise SignalError(
            f"Signal of {len(signal)} samples is shorter than one {config.frame_len}-sample frame"
        )
    frames = _frame_matrix(signal.samples, config) * hamming_window(config.frame_len)
    bins = sp_fft.rfft(frames, n=config.fft_len, axis=1).T
    return ComplexSpectrogram(bins, config, signal.sample_rate)


def istft(spec: ComplexSpectrogram) -> TimeSignal:
    """Weighted overlap-add; output length is (T - 1) * hop + frame_len"""
    config = spec.config
    num_frames = spec.shape[1]
    window = hamming_window(config.frame_len)
    out_len = (num_frames - 1) * config.hop + config.frame_len if num_frames else 0

    frames = sp_fft.irfft(spec.bins.T, n=config.fft_len, axis=1)[:, :config.frame_len]
    output = np.zeros(out_len)
    norm = np.zeros(out_len)
    for t in range(num_frames):
        start = t * config.hop
        output[start:start + config.frame_len] += frames[t] * window
        norm[start:start + config.frame_len] += window ** 2

    output /= np.maximum(norm, WOLA_FLOOR)
    return TimeSignal(output, spec.sample_rate)


def apply_mask(spec: ComplexSpectrogram, mask: np.ndarray) -> ComplexSpectrogram:
    return spec.with_bins(spec.bins * mask)
