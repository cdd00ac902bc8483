import numpy as np
from dataclasses import dataclass
from enum import IntEnum
from pydantic import BaseModel, Field, model_validator
from typing import Dict, List, Optional, Tuple

from .scenario_models import ScenarioSpec


class MaskClass(IntEnum):
    # Channel order of the network output
    DP = 0
    REV = 1


# Epoch counts keyed by RT60 in milliseconds
EPOCHS_BY_RT60_MS = {250: 30, 470: 13, 700: 10, 890: 5}


class NetConfig(BaseModel):
    height: int = Field(1024, gt=0)
    width: int = Field(82, gt=0)
    in_channels: int = 1
    encoder_depth: int = 1
    channels: Tuple[int, int] = (64, 128)
    num_classes: int = 2
    dropout: float = Field(0.5, ge=0.0, lt=1.0)

    @model_validator(mode="after")
    def _check_dims(self):
        factor = 2 ** self.encoder_depth
        if self.encoder_depth != 1:
            raise ValueError("only encoder depth 1 is supported")
        if self.height % factor or self.width % factor:
            raise ValueError(f"input dims {self.height}x{self.width} must be divisible by {factor}")
        if self.num_classes != 2:
            raise ValueError("the level network separates exactly two classes")
        return self


class TrainHyper(BaseModel):
    learning_rate: float = Field(0.01, gt=0.0)
    momentum: float = Field(0.95, gt=0.0, lt=1.0)
    l2: float = Field(1e-4, ge=0.0)
    batch_size: int = Field(8, gt=0)
    epochs: int = Field(13, gt=0)
    train_fraction: float = Field(0.98, gt=0.0, le=1.0)
    plateau_patience: Optional[int] = 3
    plateau_threshold: float = 1e-3

    @classmethod
    def for_rt60(cls, rt60: float, **overrides) -> "TrainHyper":
        key = min(EPOCHS_BY_RT60_MS, key=lambda ms: abs(ms - rt60 * 1000.0))
        return cls(epochs=EPOCHS_BY_RT60_MS[key], **overrides)


@dataclass
class MaskImage:
    """Ground-truth class map, constant per training image"""
    labels: np.ndarray
    mask_class: MaskClass


class EpochRecord(BaseModel):
    epoch: int
    loss: float
    accuracy: float
    validation_accuracy: Optional[float] = None


class TrainingMetadata(BaseModel):
    seed: int = 0
    epochs_run: int = 0
    final_accuracy: Optional[float] = None
    history: List[EpochRecord] = []


class DatasetEntry(BaseModel):
    image_path: str
    label: str
    scenario_id: str
    source_id: str
    ipd_path: Optional[str] = None
    left_audio_path: Optional[str] = None
    right_audio_path: Optional[str] = None


class DatasetManifest(BaseModel):
    scenario: ScenarioSpec
    entries: List[DatasetEntry] = []
    image_height: int = 1024
    image_width: int = 0

    @property
    def counts(self) -> Dict[str, int]:
        counts = {cls.name: 0 for cls in MaskClass}
        for entry in self.entries:
            counts[entry.label] = counts.get(entry.label, 0) + 1
        return counts

    @model_validator(mode="after")
    def _balanced(self):
        counts = self.counts
        if counts["DP"] != counts["REV"]:
            raise ValueError(f"class counts must match, got {counts}")
        return self
