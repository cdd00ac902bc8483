"""
Interaural cues: ILD/IPD spectrograms, PHAT delay estimation and per-delay
phase residuals.

Delays are in samples; a positive delay means the right channel lags the left.
"""

import logging
from typing import Tuple

import numpy as np

from ..errors import ShapeMismatchError, SignalError
from ..models.audio_models import (
    ComplexSpectrogram,
    InterauralSpectrogram,
    PhaseResidualTensor,
    TauGrid,
    check_aligned,
)

logger = logging.getLogger(__name__)

MAGNITUDE_FLOOR = 1e-8
SILENT_FRAME_DB = -80.0
# Bins this far below their frame's strongest cross-spectrum bin carry no phase
PHAT_BIN_FLOOR = 1e-6


def wrap_phase(phase):
    """Wrap to [-pi, pi)"""
    return np.mod(np.asarray(phase) + np.pi, 2.0 * np.pi) - np.pi


def interaural_spectrogram(left: ComplexSpectrogram, right: ComplexSpectrogram) -> InterauralSpectrogram:
    check_aligned(left, right)
    left_mag = np.maximum(np.abs(left.bins), MAGNITUDE_FLOOR)
    right_mag = np.maximum(np.abs(right.bins), MAGNITUDE_FLOOR)
    ild_db = 20.0 * np.log10(left_mag / right_mag)
    ipd = wrap_phase(np.angle(left.bins * np.conj(right.bins)))
    return InterauralSpectrogram(ild_db=ild_db, ipd=ipd, sample_rate=left.sample_rate, config=left.config)


def _delay_phases(freqs_hz: np.ndarray, sample_rate: int, grid: TauGrid) -> np.ndarray:
    """tau x F matrix of 2 pi f tau / fs"""
    return 2.0 * np.pi * grid.as_array()[:, None] * freqs_hz[None, :] / sample_rate


def phat_itd(left: ComplexSpectrogram, right: ComplexSpectrogram, grid: TauGrid,
             magnitude_weighted: bool = False) -> Tuple[float, np.ndarray]:
    """
    Frame-wise GCC-PHAT evaluated on the delay grid.

    Each non-silent frame votes for its correlation peak; with
    magnitude_weighted the vote is the peak correlation value instead of 1.
    Returns the histogram mode and the histogram.
    """
    check_aligned(left, right)
    cross = left.bins * np.conj(right.bins)
    magnitude = np.abs(cross)
    if not np.any(magnitude > 0.0):
        raise SignalError("PHAT needs non-zero input on both channels")

    frame_energy = np.sum(np.abs(left.bins) ** 2 + np.abs(right.bins) ** 2, axis=0)
    threshold = frame_energy.max() * 10.0 ** (SILENT_FRAME_DB / 10.0)
    frame_peak = magnitude.max(axis=0)
    active = (frame_energy > threshold) & (frame_peak > 0.0)

    usable = magnitude > PHAT_BIN_FLOOR * frame_peak[None, :]
    whitened = np.where(usable, cross / np.maximum(magnitude, MAGNITUDE_FLOOR ** 2), 0.0)
    steering = np.exp(-1j * _delay_phases(left.frequencies, left.sample_rate, grid))
    correlation = np.real(steering @ whitened[:, active])

    peaks = np.argmax(correlation, axis=0)
    votes = correlation[peaks, np.arange(len(peaks))] if magnitude_weighted else np.ones(len(peaks))
    histogram = np.bincount(peaks, weights=np.maximum(votes, 0.0), minlength=len(grid)).astype(float)

    tau_hat = grid.candidates[int(np.argmax(histogram))]
    logger.debug(f"PHAT: {int(active.sum())} active frames, tau_hat {tau_hat} samples")
    return tau_hat, histogram


def phase_residual_from_ipd(ipd: np.ndarray, freqs_hz: np.ndarray, sample_rate: int,
                            grid: TauGrid) -> PhaseResidualTensor:
    if ipd.shape[0] != len(freqs_hz):
        raise ShapeMismatchError(f"IPD has {ipd.shape[0]} bins, expected {len(freqs_hz)}")
    phases = _delay_phases(freqs_hz, sample_rate, grid)
    residuals = wrap_phase(ipd[None, :, :] - phases[:, :, None])
    return PhaseResidualTensor(residuals=residuals, grid=grid)


def phase_residual(left: ComplexSpectrogram, right: ComplexSpectrogram, grid: TauGrid) -> PhaseResidualTensor:
    cues = interaural_spectrogram(left, right)
    return phase_residual_from_ipd(cues.ipd, left.frequencies, left.sample_rate, grid)


def mirror_bins(one_sided: np.ndarray) -> np.ndarray:
    """One-sided F x T (F = N/2 + 1) to N x T by appending the mirrored interior bins"""
    return np.concatenate([one_sided, one_sided[-2:0:-1]], axis=0)


def fold_bins(full: np.ndarray) -> np.ndarray:
    """Inverse of mirror_bins; mirrored rows are averaged with their originals"""
    half = full.shape[0] // 2
    folded = full[:half + 1].copy()
    folded[1:half] = 0.5 * (folded[1:half] + full[:half:-1])
    return folded
