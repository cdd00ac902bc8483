"""
Image-source RIR synthesis for shoebox rooms.

Surfaces are ordered (x1, x2, y1, y2, floor, ceiling); x1 is the wall at x = 0
and x2 the wall at x = Lx. An image with per-axis indices (p, r) sits at
(1 - 2p) * s + 2 * r * L and meets x1 |r - p| times and x2 |r| times.

Pressure reflection coefficients are negative, -sqrt(1 - alpha), so images
alternate in sign with reflection order and the dense late field carries no
low-frequency build-up.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from ..config.settings import settings
from ..errors import ConfigError, DecayRangeError, GeometryError, SignalError
from ..models.audio_models import Rir
from ..models.scenario_models import RoomSpec, ScenarioSpec

logger = logging.getLogger(__name__)

SINC_TAPS = 81
SINC_HALF = SINC_TAPS // 2
RIR_COVERAGE = 1.2
MIN_SOURCE_MIC_DISTANCE = 1e-3
IMAGE_CHUNK = 200_000

# Absorption calibration: reference positions as fractions of the room size
CALIBRATION_SOURCE = (0.37, 0.29, 0.47)
CALIBRATION_MIC = (0.61, 0.68, 0.53)
CALIBRATION_SPAN = 1.5
CALIBRATION_HALVINGS = 8
DECAY_TARGET_DB = -60.0
ALPHA_CEILING = 1.0 - 1e-12


@dataclass
class ImageSources:
    """Images of one source as heard at one microphone"""
    distances: np.ndarray
    delays: np.ndarray
    hits: np.ndarray  # N x 6 reflection counts per surface

    def __len__(self) -> int:
        return len(self.distances)

    @property
    def orders(self) -> np.ndarray:
        return self.hits.sum(axis=1)

    def gains(self, betas: Sequence[float]) -> np.ndarray:
        """Product of beta_s ** hits_s over the six surfaces"""
        log_gain = np.zeros(len(self))
        flips = np.zeros(len(self), dtype=np.int64)
        for surface, beta in enumerate(np.asarray(betas, dtype=float)):
            counts = self.hits[:, surface]
            if beta == 0.0:
                log_gain[counts > 0] = -np.inf
                continue
            log_gain += counts * math.log(abs(beta))
            if beta < 0.0:
                flips += counts
        return np.where(flips % 2 == 1, -1.0, 1.0) * np.exp(log_gain)


def surface_areas(dimensions: Sequence[float]) -> np.ndarray:
    lx, ly, lz = dimensions
    return np.array([ly * lz, ly * lz, lx * lz, lx * lz, lx * ly, lx * ly])


def _check_position(room: RoomSpec, position, label: str) -> np.ndarray:
    if not room.contains(position):
        raise GeometryError(f"{label} {tuple(position)} lies outside room {room.dimensions}")
    return np.asarray(position, dtype=float)


def _axis_images(coord: float, length: float, order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Image coordinates along one axis with their (low wall, high wall) hit counts"""
    r = np.repeat(np.arange(-order, order + 1), 2)
    p = np.tile(np.array([0, 1]), 2 * order + 1)
    coords = (1 - 2 * p) * coord + 2 * r * length
    return coords, np.stack([np.abs(r - p), np.abs(r)], axis=1)


def image_sources(room: RoomSpec, source, mic, max_delay: float, sample_rate: int = None) -> ImageSources:
    """Every image whose sound reaches mic within max_delay samples"""
    sample_rate = sample_rate or settings.SAMPLE_RATE
    src = _check_position(room, source, "Source")
    mic_pos = _check_position(room, mic, "Microphone")
    c = room.speed_of_sound
    reach = max_delay / sample_rate * c

    (cx, hx), (cy, hy), (cz, hz) = (
        _axis_images(src[i], room.dimensions[i], int(math.ceil(reach / (2.0 * room.dimensions[i]))) + 1)
        for i in range(3)
    )
    # Iterate over x-images to bound memory
    yz_dist2 = ((cy - mic_pos[1]) ** 2)[:, None] + ((cz - mic_pos[2]) ** 2)[None, :]
    yz_dist2 = yz_dist2.ravel()
    yz_hits = np.concatenate([np.repeat(hy, len(cz), axis=0), np.tile(hz, (len(cy), 1))], axis=1)

    distances, hits = [], []
    for x_coord, x_hits in zip(cx, hx):
        dist = np.sqrt((x_coord - mic_pos[0]) ** 2 + yz_dist2)
        keep = dist <= reach
        if not np.any(keep):
            continue
        block = np.empty((int(keep.sum()), 6), dtype=np.int16)
        block[:, :2] = x_hits
        block[:, 2:] = yz_hits[keep]
        distances.append(dist[keep])
        hits.append(block)

    if not distances:
        return ImageSources(np.zeros(0), np.zeros(0), np.zeros((0, 6), dtype=np.int16))
    distances = np.concatenate(distances)
    return ImageSources(distances=distances, delays=distances / c * sample_rate, hits=np.concatenate(hits))


def _tail_level_db(taps: np.ndarray, start: int) -> float:
    """Energy from sample start onwards relative to the total, in dB"""
    energy = taps ** 2
    return float(10.0 * np.log10(max(energy[start:].sum(), 1e-300) / energy.sum()))


@lru_cache(maxsize=32)
def _absorption_scale(dimensions: Tuple[float, float, float], rt60: float,
                      abs_weights: Tuple[float, ...], speed_of_sound: float, sample_rate: int) -> float:
    """
    Common factor k with alpha_s = k * abs_weight_s for the target RT60.

    The Eyring absorption area 24 ln(10) V / (c RT60) gives the starting
    point. A shoebox image field decays more slowly than the diffuse-field
    formula predicts, so k is then adjusted until a reference RIR rendered in
    the room holds exactly 60 dB less energy after RT60 than in total.
    """
    room = RoomSpec(dimensions=dimensions, rt60=rt60, abs_weights=abs_weights, speed_of_sound=speed_of_sound)
    areas = surface_areas(dimensions)
    weights = np.asarray(abs_weights, dtype=float)
    volume = float(np.prod(dimensions))
    target_area = 24.0 * math.log(10.0) * volume / (speed_of_sound * rt60)
    upper = ALPHA_CEILING / weights.max()

    def eyring_excess(scale: float) -> float:
        return float(-np.sum(areas * np.log1p(-scale * weights)) - target_area)

    if eyring_excess(upper) <= 0.0:
        raise ConfigError(
            f"RT60 {rt60} s is out of reach in a {dimensions} m room with absorption weights {abs_weights}"
        )
    eyring = brentq(eyring_excess, 0.0, upper, xtol=1e-14)

    dims = np.asarray(dimensions, dtype=float)
    length = int(math.ceil(CALIBRATION_SPAN * rt60 * sample_rate))
    images = image_sources(room, dims * CALIBRATION_SOURCE, dims * CALIBRATION_MIC, length - 1, sample_rate)
    index = np.round(images.delays).astype(np.int64)
    spread = 1.0 / (4.0 * np.pi * images.distances)
    cut = int(round(rt60 * sample_rate))

    def decay_excess(scale: float) -> float:
        betas = -np.sqrt(1.0 - scale * weights)
        taps = np.bincount(index, weights=images.gains(betas) * spread, minlength=length)[:length]
        return _tail_level_db(taps, cut) - DECAY_TARGET_DB

    low = eyring
    for _ in range(CALIBRATION_HALVINGS):
        if decay_excess(low) > 0.0:
            break
        low *= 0.5
    else:
        raise DecayRangeError(f"No absorption slow enough for RT60 {rt60} s in a {dimensions} m room")
    if decay_excess(upper) > 0.0:
        raise ConfigError(
            f"RT60 {rt60} s is out of reach in a {dimensions} m room with absorption weights {abs_weights}"
        )

    scale = brentq(decay_excess, low, upper, rtol=1e-6)
    logger.info(f"Absorption for RT60 {rt60:.2f} s in {dimensions} m room: scale {scale:.4f} (Eyring {eyring:.4f})")
    return scale


def reflection_coefficients(room: RoomSpec, sample_rate: int = None) -> np.ndarray:
    """
    Pressure reflection coefficient per surface for the room's target RT60.

    Absorption is shared out in proportion to abs_weights and scaled so the
    rendered decay reaches -60 dB at RT60; results are cached per room.
    """
    if room.is_anechoic:
        return np.zeros(6)
    scale = _absorption_scale(
        tuple(float(d) for d in room.dimensions),
        float(room.rt60),
        tuple(float(w) for w in room.abs_weights),
        float(room.speed_of_sound),
        int(sample_rate or settings.SAMPLE_RATE),
    )
    return -np.sqrt(1.0 - scale * np.asarray(room.abs_weights, dtype=float))


def _rir_length(room: RoomSpec, direct_delay: float, sample_rate: int) -> int:
    direct_span = int(math.ceil(direct_delay)) + SINC_HALF + 1
    if room.is_anechoic:
        return direct_span
    return max(int(math.ceil(RIR_COVERAGE * room.rt60 * sample_rate)), direct_span)


def _accumulate(taps: np.ndarray, delays: np.ndarray, amplitudes: np.ndarray) -> None:
    """Add Hann-windowed sinc fractional-delay impulses into taps in place"""
    offsets = np.arange(-SINC_HALF, SINC_HALF + 1)
    centers = np.round(delays).astype(np.int64)
    index = centers[:, None] + offsets[None, :]
    x = index - delays[:, None]
    kernel = np.sinc(x) * 0.5 * (1.0 + np.cos(2.0 * np.pi * x / SINC_TAPS))
    values = kernel * amplitudes[:, None]
    valid = (index >= 0) & (index < len(taps))
    taps += np.bincount(index[valid], weights=values[valid], minlength=len(taps))[:len(taps)]


def image_source_rir(room: RoomSpec, source, mic, sample_rate: int = None) -> Rir:
    sample_rate = sample_rate or settings.SAMPLE_RATE
    src = _check_position(room, source, "Source")
    mic_pos = _check_position(room, mic, "Microphone")
    direct_distance = float(np.linalg.norm(src - mic_pos))
    if direct_distance < MIN_SOURCE_MIC_DISTANCE:
        raise GeometryError(f"Source and microphone coincide at {tuple(src)}")

    direct_delay = direct_distance / room.speed_of_sound * sample_rate
    length = _rir_length(room, direct_delay, sample_rate)
    taps = np.zeros(length)

    if room.is_anechoic:
        _accumulate(taps, np.array([direct_delay]), np.array([1.0 / (4.0 * np.pi * direct_distance)]))
        return Rir(taps, sample_rate)

    images = image_sources(room, src, mic_pos, length - 1 + SINC_HALF, sample_rate)
    amplitudes = images.gains(reflection_coefficients(room, sample_rate)) / (4.0 * np.pi * images.distances)
    audible = amplitudes != 0.0
    delays, amplitudes = images.delays[audible], amplitudes[audible]
    for start in range(0, len(delays), IMAGE_CHUNK):
        _accumulate(taps, delays[start:start + IMAGE_CHUNK], amplitudes[start:start + IMAGE_CHUNK])

    logger.debug(f"Rendered RIR with {len(delays)} image sources, {length} taps")
    return Rir(taps, sample_rate)


def rt60_estimate(rir: Rir) -> float:
    """Schroeder backward integration; T20 fit from -5 dB to -25 dB, extrapolated to 60 dB"""
    energy = rir.taps ** 2
    total = energy.sum()
    if total == 0.0:
        raise SignalError("Cannot estimate RT60 of an all-zero RIR")

    edc = np.cumsum(energy[::-1])[::-1] / total
    edc_db = 10.0 * np.log10(np.maximum(edc, 1e-300))
    below_5 = np.nonzero(edc_db <= -5.0)[0]
    below_25 = np.nonzero(edc_db <= -25.0)[0]
    if len(below_25) == 0:
        raise DecayRangeError(
            f"Energy decay only reaches {edc_db.min():.1f} dB; RIR too short for a -25 dB fit"
        )

    start, stop = below_5[0], below_25[0]
    if stop - start < 2:
        # Decay completes within a sample (single impulse)
        return 0.0

    t = np.arange(start, stop + 1) / rir.sample_rate
    slope, _ = np.polyfit(t, edc_db[start:stop + 1], 1)
    if slope >= 0.0:
        raise DecayRangeError("Energy decay curve is not decreasing")
    return float(-60.0 / slope)


def scenario_rirs(scenario: ScenarioSpec, mics, room: RoomSpec = None,
                  sample_rate: int = None) -> List[Rir]:
    """One RIR per microphone for the scenario's stationary source"""
    room = room or scenario.room
    source = scenario.source_position
    logger.info(f"Simulating {len(mics)} RIRs in {room.dimensions} m room, RT60 {room.rt60:.2f} s")
    return [image_source_rir(room, source, mic, sample_rate) for mic in mics]
