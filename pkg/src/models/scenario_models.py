import numpy as np
from dataclasses import dataclass
from pydantic import BaseModel, Field, field_validator, model_validator
from typing import List, Optional, Tuple

from ..config.settings import settings

Position = Tuple[float, float, float]

# x1, x2, y1, y2, floor, ceiling
DEFAULT_ABS_WEIGHTS = (0.6, 0.9, 0.5, 0.6, 1.0, 0.8)
UNIFORM_ABS_WEIGHTS = (1.0, 1.0, 1.0, 1.0, 1.0, 1.0)

INTERAURAL_DISTANCE = 0.17


class RoomSpec(BaseModel):
    dimensions: Position = (5.0, 4.0, 3.0)
    rt60: float = Field(0.47, ge=0.0)
    abs_weights: Tuple[float, float, float, float, float, float] = DEFAULT_ABS_WEIGHTS
    speed_of_sound: float = Field(default_factory=lambda: settings.SPEED_OF_SOUND, gt=0.0)

    @field_validator("dimensions")
    @classmethod
    def _positive_dims(cls, value):
        if any(d <= 0 for d in value):
            raise ValueError(f"room dimensions must be positive, got {value}")
        return value

    @field_validator("abs_weights")
    @classmethod
    def _weights_in_range(cls, value):
        if any(not (0.0 < w <= 1.0) for w in value):
            raise ValueError(f"abs_weights must lie in (0, 1], got {value}")
        return value

    @property
    def is_anechoic(self) -> bool:
        return self.rt60 == 0.0

    def anechoic(self) -> "RoomSpec":
        """Same room rendered as direct path only"""
        return self.model_copy(update={"rt60": 0.0, "abs_weights": UNIFORM_ABS_WEIGHTS})

    def contains(self, position) -> bool:
        p = np.asarray(position, dtype=float)
        return bool(np.all(p > 0.0) and np.all(p < np.asarray(self.dimensions)))


def default_room(rt60: float) -> RoomSpec:
    """Shared 5x4x3 m layout, or the larger 8x6x3 m room for the 0.89 s condition"""
    dims = (8.0, 6.0, 3.0) if rt60 >= 0.8 else (5.0, 4.0, 3.0)
    return RoomSpec(dimensions=dims, rt60=rt60)


class ArrayGeometry(BaseModel):
    """Linear array; mic_positions[0] is the reference microphone"""
    mic_positions: List[Position]
    spacing: float = 0.05

    @property
    def num_mics(self) -> int:
        return len(self.mic_positions)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.mic_positions, dtype=float)

    @classmethod
    def linear(cls, reference: Position, direction: Position, num_mics: int = 8,
               spacing: float = 0.05) -> "ArrayGeometry":
        ref = np.asarray(reference, dtype=float)
        unit = np.asarray(direction, dtype=float)
        unit = unit / np.linalg.norm(unit)
        mics = [tuple(float(v) for v in ref + k * spacing * unit) for k in range(num_mics)]
        return cls(mic_positions=mics, spacing=spacing)


@dataclass
class SteeringSpec:
    """Per-bin steering vectors, shape F x P"""
    vectors: np.ndarray
    look_angle: float = 0.0


class ScenarioSpec(BaseModel):
    """Source in front of two 8-mic arrays whose reference mics form the binaural pair"""
    scenario_id: str = "desk"
    room: RoomSpec = Field(default_factory=RoomSpec)
    array_center: Position = (2.5, 1.5, 1.5)
    source_distance: float = Field(1.5, gt=0.0)
    source_offset: Position = (0.0, 0.0, 0.0)
    mics_per_array: int = Field(8, ge=2)
    mic_spacing: float = Field(0.05, gt=0.0)
    interaural_distance: float = Field(INTERAURAL_DISTANCE, gt=0.0)

    @model_validator(mode="after")
    def _inside_room(self):
        positions = [self.source_position, *self.binaural_positions]
        positions += self.left_array.mic_positions + self.right_array.mic_positions
        for position in positions:
            if not self.room.contains(position):
                raise ValueError(f"position {position} lies outside room {self.room.dimensions}")
        return self

    @property
    def source_position(self) -> Position:
        cx, cy, cz = self.array_center
        dx, dy, dz = self.source_offset
        return (cx + dx, cy + self.source_distance + dy, cz + dz)

    @property
    def binaural_positions(self) -> List[Position]:
        cx, cy, cz = self.array_center
        half = self.interaural_distance / 2.0
        return [(cx - half, cy, cz), (cx + half, cy, cz)]

    @property
    def left_array(self) -> ArrayGeometry:
        # Arrays extend outward from the binaural pair along the x axis
        return ArrayGeometry.linear(self.binaural_positions[0], (-1.0, 0.0, 0.0),
                                    self.mics_per_array, self.mic_spacing)

    @property
    def right_array(self) -> ArrayGeometry:
        return ArrayGeometry.linear(self.binaural_positions[1], (1.0, 0.0, 0.0),
                                    self.mics_per_array, self.mic_spacing)

    def shifted(self, offset: Position) -> "ScenarioSpec":
        total = tuple(a + b for a, b in zip(self.source_offset, offset))
        return ScenarioSpec.model_validate({**self.model_dump(), "source_offset": total})

    def in_room(self, room: RoomSpec) -> "ScenarioSpec":
        return ScenarioSpec.model_validate({**self.model_dump(), "room": room.model_dump()})


def default_scenario(rt60: float, scenario_id: Optional[str] = None) -> ScenarioSpec:
    room = default_room(rt60)
    center = (4.0, 2.0, 1.5) if room.dimensions[0] >= 8.0 else (2.5, 1.5, 1.5)
    return ScenarioSpec(
        scenario_id=scenario_id or f"rt{int(round(rt60 * 1000))}",
        room=room,
        array_center=center
    )
