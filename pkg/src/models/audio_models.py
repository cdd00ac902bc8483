import numpy as np
from dataclasses import dataclass, field
from typing import List, Optional

from ..errors import ShapeMismatchError, SignalError


@dataclass
class TimeSignal:
    """Sampled waveform; samples are float64, nominally in [-1, 1]"""
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise SignalError(f"TimeSignal expects 1-D samples, got shape {self.samples.shape}")
        if self.sample_rate <= 0:
            raise SignalError(f"Sample rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(self.samples)):
            raise SignalError("TimeSignal samples must be finite")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    @property
    def energy(self) -> float:
        return float(np.sum(self.samples ** 2))

    def fit_length(self, num_samples: int) -> "TimeSignal":
        """Trim or zero-pad to exactly num_samples"""
        out = np.zeros(num_samples)
        n = min(num_samples, len(self.samples))
        out[:n] = self.samples[:n]
        return TimeSignal(out, self.sample_rate)


@dataclass
class Rir:
    """Room impulse response"""
    taps: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.taps = np.asarray(self.taps, dtype=np.float64)
        if self.taps.ndim != 1 or len(self.taps) < 1:
            raise SignalError("Rir needs at least one tap")
        if not np.all(np.isfinite(self.taps)):
            raise SignalError("Rir taps must be finite")

    def __len__(self) -> int:
        return len(self.taps)


@dataclass(frozen=True)
class StftConfig:
    frame_len: int
    hop: int
    fft_len: int
    window: str = "hamming"

    def __post_init__(self):
        if not (0 < self.hop <= self.frame_len <= self.fft_len):
            raise SignalError(
                f"STFT config needs hop <= frame_len <= fft_len, got "
                f"{self.hop}/{self.frame_len}/{self.fft_len}"
            )
        if self.window != "hamming":
            raise SignalError(f"Unsupported window shape: {self.window}")

    @property
    def num_bins(self) -> int:
        return self.fft_len // 2 + 1

    def num_frames(self, num_samples: int) -> int:
        """Frames for a signal of num_samples; the final partial frame is zero-padded"""
        if num_samples < self.frame_len:
            return 0
        return 1 + int(np.ceil((num_samples - self.frame_len) / self.hop))

    def bin_frequencies(self, sample_rate: int) -> np.ndarray:
        return np.arange(self.num_bins) * sample_rate / self.fft_len


# Beamformer analysis and interaural analysis presets
BEAMFORMER = StftConfig(frame_len=400, hop=160, fft_len=512)
INTERAURAL = StftConfig(frame_len=1024, hop=256, fft_len=1024)


@dataclass
class ComplexSpectrogram:
    """F x T one-sided STFT"""
    bins: np.ndarray
    config: StftConfig
    sample_rate: int

    def __post_init__(self):
        self.bins = np.asarray(self.bins, dtype=np.complex128)
        if self.bins.ndim != 2 or self.bins.shape[0] != self.config.num_bins:
            raise ShapeMismatchError(
                f"Spectrogram shape {self.bins.shape} does not match {self.config.num_bins} bins"
            )
        if not np.all(np.isfinite(self.bins)):
            raise SignalError("Spectrogram entries must be finite")

    @property
    def shape(self):
        return self.bins.shape

    @property
    def frequencies(self) -> np.ndarray:
        return self.config.bin_frequencies(self.sample_rate)

    def with_bins(self, bins: np.ndarray) -> "ComplexSpectrogram":
        return ComplexSpectrogram(bins, self.config, self.sample_rate)


def check_aligned(*specs: ComplexSpectrogram) -> None:
    """Raise ShapeMismatchError unless all spectrograms share shape, config and rate"""
    first = specs[0]
    for other in specs[1:]:
        if other.shape != first.shape or other.config != first.config or other.sample_rate != first.sample_rate:
            raise ShapeMismatchError(
                f"Spectrograms not aligned: {first.shape}/{first.config} vs {other.shape}/{other.config}"
            )


@dataclass
class InterauralSpectrogram:
    ild_db: np.ndarray
    ipd: np.ndarray
    sample_rate: int
    config: StftConfig

    def __post_init__(self):
        if self.ild_db.shape != self.ipd.shape:
            raise ShapeMismatchError("ILD and IPD matrices must share a shape")


@dataclass(frozen=True)
class TauGrid:
    """Candidate ITDs in samples"""
    candidates: tuple

    @classmethod
    def default(cls) -> "TauGrid":
        # -15 .. +15 samples in 0.5-sample steps
        return cls.from_range(-15.0, 15.0, 0.5)

    @classmethod
    def from_range(cls, start: float, stop: float, step: float) -> "TauGrid":
        count = int(round((stop - start) / step)) + 1
        return cls(tuple(float(start + i * step) for i in range(count)))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.candidates, dtype=np.float64)

    def __len__(self) -> int:
        return len(self.candidates)

    def index_of(self, tau: float) -> int:
        return int(np.argmin(np.abs(self.as_array() - tau)))


@dataclass
class PhaseResidualTensor:
    """tau x F x T wrapped residuals"""
    residuals: np.ndarray
    grid: TauGrid


@dataclass
class TfMask:
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if np.any(self.values < 0.0) or np.any(self.values > 1.0):
            raise SignalError("Mask values must lie in [0, 1]")

    @property
    def shape(self):
        return self.values.shape

    @classmethod
    def ones(cls, shape) -> "TfMask":
        return cls(np.ones(shape))


@dataclass
class MleParams:
    """Direct-path Gaussian and garbage-source parameters over the tau grid"""
    xi: np.ndarray
    sigma2: np.ndarray
    psi: np.ndarray
    grid: TauGrid
    garbage_density: float = 1.0 / (2.0 * np.pi)
    held_cells: Optional[np.ndarray] = None

    @property
    def chi(self) -> np.ndarray:
        """Per-tau garbage weight, 1 - psi"""
        return 1.0 - self.psi

    @property
    def garbage_mass(self) -> float:
        return float(max(0.0, 1.0 - np.sum(self.psi)))


@dataclass
class Posteriors:
    nu: np.ndarray
    mu: np.ndarray


@dataclass
class MleResult:
    direct_mask: TfMask
    reverb_mask: TfMask
    params: MleParams
    likelihood_trace: List[float] = field(default_factory=list)
