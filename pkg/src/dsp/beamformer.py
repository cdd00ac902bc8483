"""
MVDR beamforming over a linear array and reverberation extraction.

The residual X = Y_ref - BF keeps what the beamformer rejects: the part of
the reference channel that does not arrive from the look direction.
"""

import logging
from typing import Sequence

import numpy as np
from scipy import fft as sp_fft

from ..config.settings import settings
from ..errors import ShapeMismatchError, SingularCovarianceError
from ..models.audio_models import ComplexSpectrogram, Rir, StftConfig, check_aligned
from ..models.scenario_models import ArrayGeometry, SteeringSpec

logger = logging.getLogger(__name__)

DIAGONAL_LOADING = 1e-3
MAX_CONDITION = 1e12
RTF_FLOOR = 1e-6


def _array_offsets(geometry: ArrayGeometry) -> np.ndarray:
    """Signed distance of every mic from the reference along the array axis"""
    mics = geometry.as_array()
    relative = mics - mics[0]
    axis = relative[-1] / np.linalg.norm(relative[-1])
    return relative @ axis


def steering_vector(geometry: ArrayGeometry, angle: float, freq, c: float = None) -> np.ndarray:
    """
    Far-field steering vector for a look angle in degrees from broadside.

    Returns a P-vector for a scalar frequency, or F x P for an array of
    frequencies. Positive angles delay the mics further along the array.
    """
    c = c or settings.SPEED_OF_SOUND
    delays = _array_offsets(geometry) * np.sin(np.deg2rad(angle)) / c
    freq = np.asarray(freq, dtype=float)
    return np.exp(-2j * np.pi * freq[..., None] * delays)


def look_angle(geometry: ArrayGeometry, source) -> float:
    """Geometric angle of the source from broadside, seen from the reference mic"""
    mics = geometry.as_array()
    axis = mics[-1] - mics[0]
    axis = axis / np.linalg.norm(axis)
    to_source = np.asarray(source, dtype=float) - mics[0]
    sine = float(to_source @ axis) / float(np.linalg.norm(to_source))
    return float(np.rad2deg(np.arcsin(np.clip(sine, -1.0, 1.0))))


def steering_from_rirs(direct_rirs: Sequence[Rir], config: StftConfig, angle: float = 0.0) -> SteeringSpec:
    """Relative transfer function H_p / H_ref of direct-path RIRs, reference first; angle is recorded as the look angle"""
    longest = max(len(rir) for rir in direct_rirs)
    if longest > config.fft_len:
        logger.warning(f"Direct-path RIRs of {longest} taps truncated to {config.fft_len}")

    spectra = np.stack([sp_fft.rfft(rir.taps[:config.fft_len], n=config.fft_len) for rir in direct_rirs], axis=1)
    reference = spectra[:, :1]
    power = np.abs(reference) ** 2
    floor = RTF_FLOOR * power.max()
    vectors = spectra * np.conj(reference) / np.maximum(power, floor)
    vectors[:, 0] = 1.0
    return SteeringSpec(vectors=vectors, look_angle=angle)


def spatial_covariance(channel_specs: Sequence[ComplexSpectrogram]) -> np.ndarray:
    """Batch covariance per bin over all frames, shape F x P x P"""
    stacked = np.stack([spec.bins for spec in channel_specs], axis=0)
    num_frames = stacked.shape[2]
    return np.einsum("pft,qft->fpq", stacked, np.conj(stacked)) / max(num_frames, 1)


def mvdr_weights(covariance: np.ndarray, steering: np.ndarray) -> np.ndarray:
    """
    w = inv(Phi) d / (d^H inv(Phi) d) per bin with diagonal loading.

    Raises SingularCovarianceError when a bin stays ill-conditioned after
    loading; no further regularization is attempted.
    """
    num_bins, num_mics, _ = covariance.shape
    if steering.shape != (num_bins, num_mics):
        raise ShapeMismatchError(
            f"Steering shape {steering.shape} does not match covariance {covariance.shape}"
        )

    phi = 0.5 * (covariance + np.conj(np.transpose(covariance, (0, 2, 1))))
    trace = np.real(np.trace(phi, axis1=1, axis2=2))
    if np.any(trace <= 0.0):
        bad = np.nonzero(trace <= 0.0)[0]
        raise SingularCovarianceError(f"Zero-power covariance at {len(bad)} bins (first: {bad[0]})")

    loaded = phi + (DIAGONAL_LOADING * trace / num_mics)[:, None, None] * np.eye(num_mics)
    conditions = np.linalg.cond(loaded)
    if np.any(~np.isfinite(conditions)) or np.any(conditions > MAX_CONDITION):
        worst = int(np.nanargmax(np.where(np.isfinite(conditions), conditions, np.inf)))
        raise SingularCovarianceError(f"Covariance ill-conditioned at bin {worst}: cond {conditions[worst]:.3g}")

    numerator = np.linalg.solve(loaded, steering[..., None])[..., 0]
    denominator = np.sum(np.conj(steering) * numerator, axis=1)
    return numerator / denominator[:, None]


def mvdr_beamform(channel_specs: Sequence[ComplexSpectrogram], steering: SteeringSpec) -> ComplexSpectrogram:
    check_aligned(*channel_specs)
    logger.debug(f"MVDR over {len(channel_specs)} channels, look angle {steering.look_angle:.1f} deg")
    weights = mvdr_weights(spatial_covariance(channel_specs), steering.vectors)
    stacked = np.stack([spec.bins for spec in channel_specs], axis=0)
    output = np.einsum("fp,pft->ft", np.conj(weights), stacked)
    return channel_specs[0].with_bins(output)


def extract_reverberation(ref_spec: ComplexSpectrogram, beamformed: ComplexSpectrogram) -> ComplexSpectrogram:
    check_aligned(ref_spec, beamformed)
    return ref_spec.with_bins(ref_spec.bins - beamformed.bins)
