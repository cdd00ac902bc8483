
from .audio_models import (
    TimeSignal,
    Rir,
    StftConfig,
    ComplexSpectrogram,
    InterauralSpectrogram,
    TauGrid,
    PhaseResidualTensor,
    TfMask,
    MleParams,
    Posteriors,
    MleResult,
    BEAMFORMER,
    INTERAURAL
)
from .scenario_models import RoomSpec, ArrayGeometry, SteeringSpec, ScenarioSpec
from .learning_models import NetConfig, TrainHyper, MaskImage, MaskClass, DatasetManifest
from .report_models import DereverbOptions, ExperimentSpec, ScoreReport, ScoreRow, BenetConfig

__all__ = [
    "TimeSignal",
    "Rir",
    "StftConfig",
    "ComplexSpectrogram",
    "InterauralSpectrogram",
    "TauGrid",
    "PhaseResidualTensor",
    "TfMask",
    "MleParams",
    "Posteriors",
    "MleResult",
    "BEAMFORMER",
    "INTERAURAL",
    "RoomSpec",
    "ArrayGeometry",
    "SteeringSpec",
    "ScenarioSpec",
    "NetConfig",
    "TrainHyper",
    "MaskImage",
    "MaskClass",
    "DatasetManifest",
    "DereverbOptions",
    "ExperimentSpec",
    "ScoreReport",
    "ScoreRow",
    "BenetConfig"
]
