import numpy as np
import pytest

from src.models.audio_models import Rir, TimeSignal

SR = 16000


def speech_like(seconds: float = 2.0, sample_rate: int = SR, seed: int = 0) -> TimeSignal:
    """Voiced syllables (harmonic stacks under a Hann envelope) separated by short pauses"""
    rng = np.random.default_rng(seed)
    total = int(round(seconds * sample_rate))
    samples = np.zeros(total)
    position = int(0.05 * sample_rate)
    while position < total:
        length = int(rng.uniform(0.15, 0.25) * sample_rate)
        f0 = rng.uniform(100.0, 220.0)
        t = np.arange(length) / sample_rate
        glide = f0 * (1.0 + 0.1 * t / t[-1])
        phase = 2.0 * np.pi * np.cumsum(glide) / sample_rate
        syllable = sum(np.sin(k * phase) / k for k in range(1, 16) if k * f0 < 0.45 * sample_rate)
        syllable *= np.hanning(length)
        end = min(total, position + length)
        samples[position:end] += syllable[:end - position]
        position = end + int(rng.uniform(0.05, 0.10) * sample_rate)
    samples += 1e-4 * rng.standard_normal(total)
    return TimeSignal(0.5 * samples / np.max(np.abs(samples)), sample_rate)


def fractional_delay(samples: np.ndarray, delay: float) -> np.ndarray:
    """Delay by a possibly fractional number of samples through a zero-padded FFT phase ramp"""
    n = len(samples)
    size = 2 * n
    spectrum = np.fft.rfft(samples, size)
    freqs = np.fft.rfftfreq(size)
    return np.fft.irfft(spectrum * np.exp(-2j * np.pi * freqs * delay), size)[:n]


def decaying_rir(rt60: float, length: int, seed: int = 0, sample_rate: int = SR) -> Rir:
    """Direct impulse followed by exponentially decaying Gaussian noise"""
    rng = np.random.default_rng(seed)
    t = np.arange(length) / sample_rate
    taps = 0.3 * rng.standard_normal(length) * 10.0 ** (-3.0 * t / rt60)
    taps[0] = 1.0
    return Rir(taps, sample_rate)


@pytest.fixture
def speech() -> TimeSignal:
    return speech_like(2.0)


@pytest.fixture
def short_speech() -> TimeSignal:
    return speech_like(1.0, seed=1)


@pytest.fixture
def stereo_pair(speech):
    """Right channel lags the left by 3 samples"""
    right = TimeSignal(fractional_delay(speech.samples, 3.0), speech.sample_rate)
    return speech, right
