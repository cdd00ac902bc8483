"""
Experiment harness: position shifts, near/far shifts, cross-room testing and
the beamformers-at-test comparison, scored against anechoic references.
"""

import asyncio
import logging
import os
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from ..config.settings import settings
from ..dsp import beamformer
from ..dsp.metrics import score_pair
from ..dsp.room_sim import scenario_rirs
from ..dsp.signal_io import add_noise, convolve, measured_snr, read_wav
from ..dsp.stft import istft, stft
from ..errors import ConfigError, GeometryError
from ..integrations.corpus import load_corpus
from ..models.audio_models import BEAMFORMER, Rir, TimeSignal
from ..models.report_models import ExperimentSpec, ScoreReport, ScoreRow
from ..models.scenario_models import Position, RoomSpec, ScenarioSpec, SteeringSpec, default_room
from ..integrations.report_writer import aggregate_rows
from .dereverb_agent import DereverbAgent

logger = logging.getLogger(__name__)

UNPROCESSED = "unprocessed"
BENET = "benet"
BENET_BEAMFORMERS = "benet_beamformers"

SHIFT_STEPS = (0.05, 0.10, 0.15)
NEAR_SHIFT = 0.05
FAR_SHIFT = 0.50


def position_shift_offsets() -> List[Position]:
    """Training position plus +-5, 10 and 15 cm along each axis"""
    offsets: List[Position] = [(0.0, 0.0, 0.0)]
    for axis in range(3):
        for step in SHIFT_STEPS:
            for sign in (1.0, -1.0):
                offset = [0.0, 0.0, 0.0]
                offset[axis] = sign * step
                offsets.append(tuple(offset))
    return offsets


def near_far_offsets() -> List[Position]:
    """Training position, a small and a large shift to the left"""
    return [(0.0, 0.0, 0.0), (-NEAR_SHIFT, 0.0, 0.0), (-FAR_SHIFT, 0.0, 0.0)]


def cross_room_rooms(rt60s: Sequence[float]) -> List[RoomSpec]:
    return [default_room(rt60) for rt60 in rt60s]


def condition_label(room: RoomSpec, offset: Position) -> str:
    dx, dy, dz = offset
    return f"rt{int(round(room.rt60 * 1000))}ms offset({dx:+.2f},{dy:+.2f},{dz:+.2f})"


@dataclass
class TestScene:
    """Impulse responses for one test condition"""
    label: str
    binaural: List[Rir]
    reference: Rir
    left_array: Optional[List[Rir]] = None
    right_array: Optional[List[Rir]] = None
    left_steering: Optional[SteeringSpec] = None
    right_steering: Optional[SteeringSpec] = None


def build_scene(scenario: ScenarioSpec, label: str, with_beamformers: bool) -> TestScene:
    anechoic = scenario.room.anechoic()
    scene = TestScene(
        label=label,
        binaural=scenario_rirs(scenario, scenario.binaural_positions),
        reference=scenario_rirs(scenario, scenario.binaural_positions[:1], room=anechoic)[0],
    )
    if with_beamformers:
        left_mics = scenario.left_array.mic_positions
        right_mics = scenario.right_array.mic_positions
        scene.left_array = scenario_rirs(scenario, left_mics)
        scene.right_array = scenario_rirs(scenario, right_mics)
        scene.left_steering = beamformer.steering_from_rirs(
            scenario_rirs(scenario, left_mics, room=anechoic), BEAMFORMER,
            beamformer.look_angle(scenario.left_array, scenario.source_position))
        scene.right_steering = beamformer.steering_from_rirs(
            scenario_rirs(scenario, right_mics, room=anechoic), BEAMFORMER,
            beamformer.look_angle(scenario.right_array, scenario.source_position))
    return scene


def _beamformed(clean: TimeSignal, rirs: List[Rir], steering: SteeringSpec, snr_db: float,
                seed: int) -> TimeSignal:
    channels = [add_noise(convolve(clean, rir), snr_db, seed + index) for index, rir in enumerate(rirs)]
    common = max(len(channel) for channel in channels)
    specs = [stft(channel.fit_length(common), BEAMFORMER) for channel in channels]
    return istft(beamformer.mvdr_beamform(specs, steering)).fit_length(common)


def score_file(scene: TestScene, file_id: str, clean: TimeSignal, agent: DereverbAgent,
               spec: ExperimentSpec, seed: int) -> List[ScoreRow]:
    """Unprocessed, dereverberated and (optionally) beamformed-input rows for one clip"""
    reference = convolve(clean, scene.reference)
    left, right = (convolve(clean, rir) for rir in scene.binaural)
    common = max(len(left), len(right))
    clean_left = left.fit_length(common)
    left = add_noise(clean_left, spec.snr_db, seed)
    logger.debug(f"{scene.label} {file_id}: input SNR {measured_snr(clean_left, left):.1f} dB")
    right = add_noise(right.fit_length(common), spec.snr_db, seed + 1)

    def row(system: str, degraded: TimeSignal) -> ScoreRow:
        scores = score_pair(reference, degraded, spec.metrics)
        return ScoreRow(condition=scene.label, system=system, file_id=file_id, **scores)

    rows = [row(UNPROCESSED, left), row(BENET, agent.process(left, right))]
    if spec.use_beamformers_at_test:
        bf_left = _beamformed(clean, scene.left_array, scene.left_steering, spec.snr_db, seed + 100)
        bf_right = _beamformed(clean, scene.right_array, scene.right_steering, spec.snr_db, seed + 200)
        common = max(len(bf_left), len(bf_right))
        rows.append(row(BENET_BEAMFORMERS, agent.process(bf_left.fit_length(common), bf_right.fit_length(common))))
    return rows


def load_test_files(spec: ExperimentSpec) -> List[Tuple[str, TimeSignal]]:
    """Explicit test files, or the last num_files corpus files held out from training"""
    if spec.test_files:
        files = []
        for path in spec.test_files:
            audio = read_wav(path)
            signal = audio[0] if isinstance(audio, tuple) else audio
            files.append((os.path.splitext(os.path.basename(path))[0], signal))
    else:
        files = load_corpus(spec.corpus_dir or settings.CORPUS_DIR)[-spec.num_files:]

    clip_len = int(round(spec.clip_seconds * settings.SAMPLE_RATE))
    return [(file_id, signal.fit_length(min(len(signal), clip_len))) for file_id, signal in files]


def scenarios_for(spec: ExperimentSpec) -> List[Tuple[str, ScenarioSpec]]:
    scenarios = []
    for room in spec.rooms():
        for offset in spec.offsets:
            try:
                scenario = spec.scenario.in_room(room).shifted(offset)
            except (GeometryError, ValueError) as e:
                raise ConfigError(f"Offset {offset} in room {room.dimensions} is not a valid scene: {e}")
            scenarios.append((condition_label(room, offset), scenario))
    return scenarios


class ExperimentAgent:
    """
    Experiment Agent - protocol runner

    Responsibilities:
    - Simulate every test condition (room x source offset)
    - Dereverberate noisy binaural test clips in parallel
    - Score outputs and unprocessed inputs against anechoic references
    """

    def __init__(self, max_workers: Optional[int] = None):
        self.max_workers = max_workers or settings.MAX_WORKERS
        self.name = "Experiment Agent"

    async def run(self, spec: ExperimentSpec, agent: Optional[DereverbAgent] = None) -> ScoreReport:
        try:
            logger.info(f"Running experiment {spec.name}")
            scenarios = scenarios_for(spec)
            if agent is None:
                if spec.dereverb.use_ild_mask and not os.path.isfile(spec.model_path):
                    raise ConfigError(f"Model checkpoint not found: {spec.model_path}")
                agent = DereverbAgent.from_checkpoint(spec.model_path, spec.dereverb)
            files = load_test_files(spec)

            semaphore = asyncio.Semaphore(self.max_workers)

            async def run_scene(label: str, scenario: ScenarioSpec) -> TestScene:
                async with semaphore:
                    return await asyncio.to_thread(build_scene, scenario, label, spec.use_beamformers_at_test)

            scenes = await asyncio.gather(*(run_scene(label, scenario) for label, scenario in scenarios))

            async def run_file(scene: TestScene, index: int, file_id: str, clean: TimeSignal) -> List[ScoreRow]:
                async with semaphore:
                    return await asyncio.to_thread(score_file, scene, file_id, clean, agent, spec,
                                                   spec.seed + 1000 * index)

            results = await asyncio.gather(*(
                run_file(scene, index, file_id, clean)
                for scene in scenes
                for index, (file_id, clean) in enumerate(files)
            ))
            rows = [row for file_rows in results for row in file_rows]
            report = ScoreReport(experiment=spec.name, rows=rows, aggregate=aggregate_rows(rows))
            logger.info(f"Experiment {spec.name} completed - {len(scenes)} conditions, {len(files)} files")
            return report

        except Exception as e:
            logger.error(f"Error in experiment {spec.name}: {str(e)}")
            raise


def run_experiment(spec: ExperimentSpec, agent: Optional[DereverbAgent] = None) -> ScoreReport:
    return asyncio.run(ExperimentAgent().run(spec, agent))
