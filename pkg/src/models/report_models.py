from enum import Enum
from pydantic import BaseModel, Field, field_validator
from typing import List, Optional

from .learning_models import NetConfig, TrainHyper
from .scenario_models import Position, RoomSpec, ScenarioSpec


class MetricName(str, Enum):
    CEP = "cep"
    FWSEG_SNR = "fwseg_snr"
    SRMR = "srmr"


class MleMode(str, Enum):
    EM = "em"
    SINGLE_PASS = "single_pass"


class DereverbOptions(BaseModel):
    output_scale: float = Field(0.5, gt=0.0)
    use_ild_mask: bool = True
    use_ipd_mask: bool = True
    mle_mode: MleMode = MleMode.EM
    max_iterations: int = Field(16, gt=0)
    tolerance: float = Field(1e-4, gt=0.0)
    magnitude_weighted_phat: bool = False


class ScoreRow(BaseModel):
    condition: str
    system: str
    file_id: Optional[str] = None
    cep: Optional[float] = None
    fwseg_snr: Optional[float] = None
    srmr: Optional[float] = None

    @field_validator("cep")
    @classmethod
    def _non_negative(cls, value):
        if value is not None and value < 0:
            raise ValueError("cepstral distance cannot be negative")
        return value


class ScoreReport(BaseModel):
    experiment: str = ""
    rows: List[ScoreRow] = []
    aggregate: List[ScoreRow] = []


class ExperimentSpec(BaseModel):
    name: str = "experiment"
    model_path: str
    scenario: ScenarioSpec
    test_rooms: List[RoomSpec] = []
    offsets: List[Position] = [(0.0, 0.0, 0.0)]
    snr_db: float = 20.0
    metrics: List[MetricName] = [MetricName.CEP, MetricName.FWSEG_SNR, MetricName.SRMR]
    corpus_dir: Optional[str] = None
    test_files: List[str] = []
    num_files: int = Field(5, gt=0)
    clip_seconds: float = Field(2.0, gt=0.0)
    use_beamformers_at_test: bool = False
    dereverb: DereverbOptions = Field(default_factory=DereverbOptions)
    seed: int = 0

    def rooms(self) -> List[RoomSpec]:
        return self.test_rooms or [self.scenario.room]


class BenetConfig(BaseModel):
    """Top-level JSON config consumed by the CLI"""
    scenario: ScenarioSpec = Field(default_factory=ScenarioSpec)
    net: Optional[NetConfig] = None
    train: Optional[TrainHyper] = None
    experiment: Optional[ExperimentSpec] = None
    images_per_class: int = Field(500, gt=0)
    clip_seconds: Optional[float] = None
    seed: int = 0
