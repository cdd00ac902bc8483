import asyncio
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..config.settings import settings
from ..dsp import beamformer
from ..dsp.room_sim import scenario_rirs
from ..dsp.signal_io import convolve, write_wav
from ..dsp.spatial_cues import interaural_spectrogram
from ..dsp.stft import istft, stft
from ..errors import ConfigError, SignalError, UnwritablePathError
from ..integrations.corpus import split_clips
from ..integrations.matrix_store import load_matrix, save_matrix
from ..models.audio_models import BEAMFORMER, INTERAURAL, Rir, TimeSignal
from ..models.learning_models import DatasetEntry, DatasetManifest, MaskClass, MaskImage
from ..models.scenario_models import ScenarioSpec, SteeringSpec
from .ild_agent import ild_image, make_ground_truth

logger = logging.getLogger(__name__)

# (clean samples, reverberant samples) at 16 kHz keyed by RT60 in ms
CLIP_TABLE = {
    890: (16000, 26320),
    700: (15680, 24080),
    470: (16000, 21520),
    250: (16000, 18640),
}
TABLE_RATE = 16000
TAIL_SECONDS_PER_RT60 = 0.725


@dataclass(frozen=True)
class ClipPlan:
    clean_samples: int
    reverberant_samples: int
    width: int


def clip_plan(rt60: float, sample_rate: int = None) -> ClipPlan:
    """
    Clean and reverberant clip lengths so every training image has the same width.

    Tabulated RT60s use fixed lengths; others get a one-second clean clip
    plus 0.725 * RT60 of tail, grown to an even frame count.
    """
    sample_rate = sample_rate or settings.SAMPLE_RATE
    key = int(round(rt60 * 1000.0))
    if sample_rate == TABLE_RATE and key in CLIP_TABLE and abs(rt60 * 1000.0 - key) < 1e-6:
        clean, reverberant = CLIP_TABLE[key]
    else:
        clean = sample_rate
        reverberant = clean + int(math.ceil(TAIL_SECONDS_PER_RT60 * rt60 * sample_rate))
        frames = INTERAURAL.num_frames(reverberant)
        if frames % 2:
            reverberant = INTERAURAL.frame_len + frames * INTERAURAL.hop
    return ClipPlan(clean, reverberant, INTERAURAL.num_frames(reverberant))


def training_plan(rt60: float, clip_seconds: Optional[float] = None, sample_rate: int = None) -> ClipPlan:
    """clip_plan with the clean length replaced by clip_seconds; the reverberant tail is kept"""
    sample_rate = sample_rate or settings.SAMPLE_RATE
    plan = clip_plan(rt60, sample_rate)
    if not clip_seconds:
        return plan
    clean = int(round(clip_seconds * sample_rate))
    if clean <= 0:
        raise ConfigError(f"clip_seconds {clip_seconds} gives an empty clip")
    reverberant = plan.reverberant_samples - plan.clean_samples + clean
    return ClipPlan(clean, reverberant, INTERAURAL.num_frames(reverberant))


@dataclass
class RirBank:
    """Every impulse response one scenario needs for training data"""
    left_array: List[Rir]
    right_array: List[Rir]
    left_steering: SteeringSpec
    right_steering: SteeringSpec
    direct_binaural: List[Rir]


def build_rir_bank(scenario: ScenarioSpec, sample_rate: int = None) -> RirBank:
    anechoic = scenario.room.anechoic()
    left_mics = scenario.left_array.mic_positions
    right_mics = scenario.right_array.mic_positions
    return RirBank(
        left_array=scenario_rirs(scenario, left_mics, sample_rate=sample_rate),
        right_array=scenario_rirs(scenario, right_mics, sample_rate=sample_rate),
        left_steering=beamformer.steering_from_rirs(
            scenario_rirs(scenario, left_mics, room=anechoic, sample_rate=sample_rate), BEAMFORMER,
            beamformer.look_angle(scenario.left_array, scenario.source_position)),
        right_steering=beamformer.steering_from_rirs(
            scenario_rirs(scenario, right_mics, room=anechoic, sample_rate=sample_rate), BEAMFORMER,
            beamformer.look_angle(scenario.right_array, scenario.source_position)),
        direct_binaural=scenario_rirs(scenario, scenario.binaural_positions, room=anechoic,
                                      sample_rate=sample_rate),
    )


def reverberation_side(clean: TimeSignal, rirs: Sequence[Rir], steering: SteeringSpec,
                       length: int) -> TimeSignal:
    """Reference-mic reverberation left after MVDR removes the look-direction source"""
    channels = [convolve(clean, rir) for rir in rirs]
    common = max(len(channel) for channel in channels)
    specs = [stft(channel.fit_length(common), BEAMFORMER) for channel in channels]
    focused = beamformer.mvdr_beamform(specs, steering)
    residual = beamformer.extract_reverberation(specs[0], focused)
    return istft(residual).fit_length(length)


def render_clip(clean: TimeSignal, bank: RirBank, plan: ClipPlan) -> Tuple[Tuple[TimeSignal, TimeSignal],
                                                                            Tuple[TimeSignal, TimeSignal]]:
    """(REV left, REV right) and (DP left, DP right) renders of one clean clip"""
    if len(clean) < plan.clean_samples:
        raise SignalError(f"Clip of {len(clean)} samples is shorter than the required {plan.clean_samples}")
    clean = clean.fit_length(plan.clean_samples)
    if clean.energy == 0.0:
        raise SignalError("Silent clip rejected")

    rev = (
        reverberation_side(clean, bank.left_array, bank.left_steering, plan.reverberant_samples),
        reverberation_side(clean, bank.right_array, bank.right_steering, plan.reverberant_samples),
    )
    dp = tuple(convolve(clean, rir).fit_length(plan.reverberant_samples) for rir in bank.direct_binaural)
    return rev, dp


def _export_pair(pair: Tuple[TimeSignal, TimeSignal], stem: str, label: MaskClass,
                 scenario_id: str, source_id: str, plan: ClipPlan) -> DatasetEntry:
    left, right = pair
    cues = interaural_spectrogram(stft(left, INTERAURAL), stft(right, INTERAURAL))
    image = ild_image(cues)
    if image.shape[1] != plan.width:
        raise SignalError(f"{label.name} image for {source_id} is {image.shape[1]} frames wide, "
                          f"expected {plan.width}")
    save_matrix(f"{stem}_ild.mat", image, dtype=np.float32)
    save_matrix(f"{stem}_ipd.mat", cues.ipd, dtype=np.float32)
    write_wav(f"{stem}_left.wav", left)
    write_wav(f"{stem}_right.wav", right)
    return DatasetEntry(
        image_path=f"{stem}_ild.mat",
        label=label.name,
        scenario_id=scenario_id,
        source_id=source_id,
        ipd_path=f"{stem}_ipd.mat",
        left_audio_path=f"{stem}_left.wav",
        right_audio_path=f"{stem}_right.wav",
    )


def process_clip(source_id: str, clean: TimeSignal, bank: RirBank, plan: ClipPlan,
                 scenario_id: str, output_dir: str) -> List[DatasetEntry]:
    rev, dp = render_clip(clean, bank, plan)
    stem = os.path.join(output_dir, source_id)
    return [
        _export_pair(dp, f"{stem}_dp", MaskClass.DP, scenario_id, source_id, plan),
        _export_pair(rev, f"{stem}_rev", MaskClass.REV, scenario_id, source_id, plan),
    ]


def _prepare_output(output_dir: str) -> None:
    try:
        os.makedirs(output_dir, exist_ok=True)
    except OSError as e:
        raise UnwritablePathError(f"Cannot create dataset directory {output_dir}: {e}")


def _finish_manifest(scenario: ScenarioSpec, entries: List[DatasetEntry], plan: ClipPlan,
                     output_dir: str) -> DatasetManifest:
    manifest = DatasetManifest(scenario=scenario, entries=entries,
                               image_height=INTERAURAL.fft_len, image_width=plan.width)
    path = os.path.join(output_dir, "manifest.json")
    try:
        with open(path, "w") as handle:
            handle.write(manifest.model_dump_json(indent=2))
    except OSError as e:
        raise UnwritablePathError(f"Cannot write manifest {path}: {e}")
    return manifest


def generate_training_data(scenario: ScenarioSpec, corpus: Sequence[Tuple[str, TimeSignal]],
                           output_dir: str, clip_seconds: Optional[float] = None,
                           max_workers: Optional[int] = None) -> DatasetManifest:
    """
    Paired DP/REV ILD images, one pair per clip.

    clip_seconds overrides the clean length of the clip plan; the added
    reverberant tail still follows the room's RT60. Clips are rendered on
    max_workers threads against one shared RIR bank.
    """
    plan = training_plan(scenario.room.rt60, clip_seconds)
    _prepare_output(output_dir)
    bank = build_rir_bank(scenario)

    def render(item: Tuple[str, TimeSignal]) -> List[DatasetEntry]:
        source_id, clean = item
        return process_clip(source_id, clean, bank, plan, scenario.scenario_id, output_dir)

    with ThreadPoolExecutor(max_workers=max_workers or settings.MAX_WORKERS) as pool:
        entries = [entry for pair in pool.map(render, corpus) for entry in pair]
    return _finish_manifest(scenario, entries, plan, output_dir)


def corpus_clips(corpus: Sequence[Tuple[str, TimeSignal]], clean_samples: int) -> List[Tuple[str, TimeSignal]]:
    """Cut every corpus file into non-overlapping training clips; silent clips are skipped"""
    clips = []
    for file_id, signal in corpus:
        pieces = split_clips([signal], clean_samples / signal.sample_rate)
        clips.extend((f"{file_id}_{index:03d}", clip) for index, clip in enumerate(pieces) if clip.energy > 0.0)
    if not clips:
        raise ConfigError(f"Corpus yields no non-silent clips of {clean_samples} samples")
    return clips


def load_manifest(path: str) -> DatasetManifest:
    try:
        with open(path) as handle:
            return DatasetManifest.model_validate_json(handle.read())
    except FileNotFoundError:
        raise ConfigError(f"Dataset manifest not found: {path}")
    except ValueError as e:
        raise ConfigError(f"Invalid dataset manifest {path}: {e}")


def load_training_set(manifest: DatasetManifest, base_dir: str = "") -> Tuple[List[np.ndarray], List[MaskImage]]:
    images, masks = [], []
    for entry in manifest.entries:
        path = entry.image_path if os.path.isabs(entry.image_path) else os.path.join(base_dir, entry.image_path)
        image = load_matrix(path)
        images.append(image)
        masks.append(make_ground_truth(MaskClass[entry.label], image.shape))
    return images, masks


class DatasetAgent:
    """
    Dataset Agent - training data manufacture

    Responsibilities:
    - Simulate the two-array scene and the anechoic binaural scene once per scenario
    - Render REV (beamformer residual) and DP (direct path) pairs per clip
    - Export audio, ILD/IPD matrices and a balanced manifest
    """

    def __init__(self, max_workers: Optional[int] = None):
        self.max_workers = max_workers or settings.MAX_WORKERS
        self.name = "Dataset Agent"

    async def build_dataset(self, scenario: ScenarioSpec, corpus: Sequence[Tuple[str, TimeSignal]],
                            output_dir: str, images_per_class: Optional[int] = None,
                            clip_seconds: Optional[float] = None) -> DatasetManifest:
        try:
            clips = list(corpus)[:images_per_class] if images_per_class else list(corpus)
            logger.info(f"Generating {len(clips)} DP/REV pairs for scenario {scenario.scenario_id}")
            manifest = await asyncio.to_thread(generate_training_data, scenario, clips, output_dir,
                                               clip_seconds, self.max_workers)
            logger.info(f"Dataset completed - {manifest.counts} images of width {manifest.image_width}")
            return manifest

        except Exception as e:
            logger.error(f"Error generating training data: {str(e)}")
            raise
