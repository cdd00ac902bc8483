"""
Objective quality scores: cepstral distance (CEP, lower is better),
frequency-weighted segmental SNR and SRMR (both higher is better).
"""

import logging
import math
from typing import Dict, Iterable, Optional

import librosa
import numpy as np
from scipy.linalg import LinAlgError, solve_toeplitz
from scipy.signal import butter, gammatone, hilbert, lfilter, sosfilt

from ..errors import SignalError
from ..models.audio_models import TimeSignal
from ..models.report_models import MetricName

logger = logging.getLogger(__name__)

# Cepstral distance
LPC_ORDER = 10
CEP_FRAME_SECONDS = 0.025
CEP_HOP_SECONDS = 0.010
CEP_ACTIVE_DB = -30.0
CEP_MAX = 10.0

# Frequency-weighted segmental SNR
FWSEG_BANDS = 25
FWSEG_GAMMA = 0.2
FWSEG_FRAME_SECONDS = 0.030
FWSEG_HOP_SECONDS = 0.0075
FWSEG_MIN_DB = -10.0
FWSEG_MAX_DB = 35.0
FWSEG_SILENT_DB = -60.0

# SRMR
SRMR_CHANNELS = 23
SRMR_LOW_HZ = 125.0
SRMR_MOD_BANDS = 8
SRMR_MOD_LOW_HZ = 4.0
SRMR_MOD_HIGH_HZ = 128.0
SRMR_MOD_Q = 2.0
SRMR_MIN_SECONDS = 1.0

EPS = 1e-12


def _check_pair(reference: TimeSignal, degraded: TimeSignal) -> TimeSignal:
    if reference.sample_rate != degraded.sample_rate:
        raise SignalError(
            f"Sample-rate mismatch: reference {reference.sample_rate} Hz, degraded {degraded.sample_rate} Hz"
        )
    if reference.energy == 0.0:
        raise SignalError("Reference signal is silent")
    return degraded.fit_length(len(reference))


def _frames(samples: np.ndarray, frame_len: int, hop: int) -> np.ndarray:
    if len(samples) < frame_len:
        samples = np.pad(samples, (0, frame_len - len(samples)))
    count = 1 + (len(samples) - frame_len) // hop
    index = np.arange(count)[:, None] * hop + np.arange(frame_len)[None, :]
    return samples[index]


def lpc_cepstrum(frame: np.ndarray, order: int = LPC_ORDER) -> np.ndarray:
    """Cepstral coefficients c_1..c_order of the all-pole model of one frame"""
    autocorr = np.correlate(frame, frame, mode="full")[len(frame) - 1:len(frame) + order]
    if autocorr[0] <= 0.0:
        return np.zeros(order)
    # Slight white-noise correction keeps the Toeplitz system positive definite
    column = autocorr[:order].copy()
    column[0] *= 1.0 + 1e-9
    try:
        a = solve_toeplitz(column, autocorr[1:order + 1])
    except LinAlgError:
        return np.zeros(order)

    cep = np.zeros(order)
    for n in range(1, order + 1):
        acc = a[n - 1]
        for k in range(1, n):
            acc += (k / n) * cep[k - 1] * a[n - k - 1]
        cep[n - 1] = acc
    return cep


def cepstral_distance(reference: TimeSignal, degraded: TimeSignal) -> float:
    degraded = _check_pair(reference, degraded)
    frame_len = int(round(CEP_FRAME_SECONDS * reference.sample_rate))
    hop = int(round(CEP_HOP_SECONDS * reference.sample_rate))
    window = np.hamming(frame_len)
    ref_frames = _frames(reference.samples, frame_len, hop) * window
    deg_frames = _frames(degraded.samples, frame_len, hop) * window

    energy = np.sum(ref_frames ** 2, axis=1)
    active = energy >= energy.max() * 10.0 ** (CEP_ACTIVE_DB / 10.0)

    distances = []
    for ref_frame, deg_frame in zip(ref_frames[active], deg_frames[active]):
        diff = lpc_cepstrum(ref_frame) - lpc_cepstrum(deg_frame)
        distance = (10.0 / math.log(10.0)) * math.sqrt(2.0 * float(np.sum(diff ** 2)))
        distances.append(min(max(distance, 0.0), CEP_MAX))
    return float(np.mean(distances))


def fwseg_snr(reference: TimeSignal, degraded: TimeSignal) -> float:
    """Band SNRs on mel-spaced magnitude bands, weighted by reference band magnitude ** 0.2"""
    degraded = _check_pair(reference, degraded)
    sr = reference.sample_rate
    frame_len = int(round(FWSEG_FRAME_SECONDS * sr))
    hop = int(round(FWSEG_HOP_SECONDS * sr))
    n_fft = int(2 ** math.ceil(math.log2(frame_len)))
    window = np.hanning(frame_len)

    ref_frames = _frames(reference.samples, frame_len, hop) * window
    deg_frames = _frames(degraded.samples, frame_len, hop) * window
    bank = librosa.filters.mel(sr=sr, n_fft=n_fft, n_mels=FWSEG_BANDS, fmin=0.0, fmax=sr / 2.0, norm=None)
    ref_bands = np.abs(np.fft.rfft(ref_frames, n=n_fft, axis=1)) @ bank.T
    deg_bands = np.abs(np.fft.rfft(deg_frames, n=n_fft, axis=1)) @ bank.T

    ref_energy = np.sum(ref_frames ** 2, axis=1)
    deg_energy = np.sum(deg_frames ** 2, axis=1)
    active = ref_energy > ref_energy.max() * 10.0 ** (FWSEG_SILENT_DB / 10.0)

    band_snr = 10.0 * np.log10((ref_bands ** 2 + EPS) / ((ref_bands - deg_bands) ** 2 + EPS))
    band_snr = np.clip(band_snr, FWSEG_MIN_DB, FWSEG_MAX_DB)
    weights = ref_bands ** FWSEG_GAMMA
    frame_snr = np.sum(weights * band_snr, axis=1) / np.maximum(np.sum(weights, axis=1), EPS)
    # An empty degraded frame carries no speech at all
    frame_snr = np.where(deg_energy > 0.0, frame_snr, FWSEG_MIN_DB)
    frame_snr = np.clip(frame_snr, FWSEG_MIN_DB, FWSEG_MAX_DB)
    return float(np.mean(frame_snr[active]))


def _erb_space(low: float, high: float, count: int) -> np.ndarray:
    # Glasberg and Moore ERB-rate scale
    def to_erb(hz):
        return 21.4 * np.log10(1.0 + 0.00437 * hz)

    def from_erb(erb):
        return (10.0 ** (erb / 21.4) - 1.0) / 0.00437

    return from_erb(np.linspace(to_erb(low), to_erb(high), count))


def srmr(signal: TimeSignal) -> float:
    """
    Signal-to-reverberation modulation energy ratio in dB.

    Gammatone analysis (23 ERB-spaced channels), Hilbert envelopes, then eight
    log-spaced modulation bands from 4 to 128 Hz; the ratio compares the
    energy of the four lowest bands with the four highest.
    """
    sr = signal.sample_rate
    if signal.duration < SRMR_MIN_SECONDS:
        raise SignalError(f"SRMR needs at least {SRMR_MIN_SECONDS} s, got {signal.duration:.3f} s")

    high = min(8000.0, 0.49 * sr)
    centers = _erb_space(SRMR_LOW_HZ, high, SRMR_CHANNELS)
    mod_centers = np.geomspace(SRMR_MOD_LOW_HZ, SRMR_MOD_HIGH_HZ, SRMR_MOD_BANDS)
    mod_filters = [
        butter(2, [fc * (1.0 - 0.5 / SRMR_MOD_Q), fc * (1.0 + 0.5 / SRMR_MOD_Q)],
               btype="bandpass", fs=sr, output="sos")
        for fc in mod_centers
    ]

    energies = np.zeros((SRMR_CHANNELS, SRMR_MOD_BANDS))
    for i, fc in enumerate(centers):
        b, a = gammatone(fc, "iir", fs=sr)
        envelope = np.abs(hilbert(lfilter(b, a, signal.samples)))
        for j, sos in enumerate(mod_filters):
            energies[i, j] = np.mean(sosfilt(sos, envelope) ** 2)

    half = SRMR_MOD_BANDS // 2
    low = energies[:, :half].sum()
    high_energy = energies[:, half:].sum()
    return float(10.0 * np.log10(max(low, EPS) / max(high_energy, EPS)))


def score_pair(reference: TimeSignal, degraded: TimeSignal,
               metrics: Optional[Iterable[MetricName]] = None) -> Dict[str, float]:
    """Selected metrics of degraded against reference, keyed by metric name"""
    metrics = list(metrics) if metrics is not None else list(MetricName)
    scores = {}
    if MetricName.CEP in metrics:
        scores[MetricName.CEP.value] = cepstral_distance(reference, degraded)
    if MetricName.FWSEG_SNR in metrics:
        scores[MetricName.FWSEG_SNR.value] = fwseg_snr(reference, degraded)
    if MetricName.SRMR in metrics:
        scores[MetricName.SRMR.value] = srmr(degraded.fit_length(len(reference)))
    return scores
