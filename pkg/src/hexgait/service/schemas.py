"""Wire schemas for the teleoperation protocol.

JSON text frames over a WebSocket at /ws, plus a static snapshot at
GET /state. Field names are frozen (tests pin them); the `proto` field
versions the protocol.
"""

from __future__ import annotations

import math
from typing import Literal, Union

from pydantic import BaseModel, Field, field_validator

PROTO_VERSION = 1


def _require_finite(values):
    for v in values:
        if not math.isfinite(v):
            raise ValueError("components must be finite")
    return values


class VelocityCommand(BaseModel):
    type: Literal["velocity"]
    proto: int = PROTO_VERSION
    seq: int
    linear: list[float] = Field(min_length=3, max_length=3)
    angular: list[float] = Field(min_length=3, max_length=3)

    _finite_lin = field_validator("linear")(_require_finite)
    _finite_ang = field_validator("angular")(_require_finite)


class PoseVelocityCommand(BaseModel):
    type: Literal["pose_velocity"]
    proto: int = PROTO_VERSION
    seq: int
    linear: list[float] = Field(min_length=3, max_length=3)
    angular: list[float] = Field(min_length=3, max_length=3)

    _finite_lin = field_validator("linear")(_require_finite)
    _finite_ang = field_validator("angular")(_require_finite)


class GaitSelectCommand(BaseModel):
    type: Literal["gait_select"]
    proto: int = PROTO_VERSION
    seq: int
    gait: str


class ModeCommand(BaseModel):
    type: Literal["mode"]
    proto: int = PROTO_VERSION
    seq: int
    mode: Literal["startup", "shutdown"]


class LegipulateCommand(BaseModel):
    type: Literal["legipulate"]
    proto: int = PROTO_VERSION
    seq: int
    leg: int
    action: Literal["velocity", "pose", "off"]
    vector: list[float] | None = Field(default=None, min_length=3, max_length=3)
    frame: Literal["leg", "body"] = "leg"

    @field_validator("vector")
    @classmethod
    def _finite(cls, v):
        if v is not None:
            _require_finite(v)
        return v


class ParamsCommand(BaseModel):
    type: Literal["params"]
    proto: int = PROTO_VERSION
    seq: int
    params: dict[str, float]

    @field_validator("params")
    @classmethod
    def _finite(cls, v):
        _require_finite(v.values())
        return v


CommandMessage = Union[VelocityCommand, PoseVelocityCommand, GaitSelectCommand,
                       ModeCommand, LegipulateCommand, ParamsCommand]


class CommandEnvelope(BaseModel):
    """Discriminated wrapper used to parse incoming frames."""

    message: CommandMessage = Field(discriminator="type")


class Ack(BaseModel):
    type: Literal["ack"] = "ack"
    proto: int = PROTO_VERSION
    seq: int


class ErrorReply(BaseModel):
    type: Literal["error"] = "error"
    proto: int = PROTO_VERSION
    seq: int | None = None
    detail: str


class LegInfo(BaseModel):
    id: int
    joint_names: list[str]
    base_xy: list[float]
    default_tip: list[float]


class RobotInfo(BaseModel):
    name: str
    mass: float
    body_clearance: float
    step_clearance: float
    legs: list[LegInfo]


class Limits(BaseModel):
    max_linear_speed: float
    max_angular_speed: float
    max_translation: list[float]
    max_rotation: list[float]


class Hello(BaseModel):
    type: Literal["hello"] = "hello"
    proto: int = PROTO_VERSION
    robot: RobotInfo
    gaits: list[str]
    walkspace: list[list[float]]     # (bearing rad, radius m) pairs
    limits: Limits
    tick_rate: float
    stream_rate: float


class LegState(BaseModel):
    id: int
    joints: list[float]
    tip_body: list[float]
    tip_world: list[float]
    phase: str
    phase_t: float
    contact: bool
    clamped: bool


class BodyState(BaseModel):
    world_xyz: list[float]
    world_rpy: list[float]
    offsets: dict[str, list[float]]


class Metrics(BaseModel):
    power: float
    cot: float | None = None
    commanded_velocity: list[float]
    limited_velocity: list[float]
    speed: float
    distance: float


class StateMessage(BaseModel):
    type: Literal["state"] = "state"
    proto: int = PROTO_VERSION
    tick: int
    sim_time: float
    mode: str
    gait: str
    walk_state: str
    body: BodyState
    legs: list[LegState]
    metrics: Metrics
    legipulating: list[int] = Field(default_factory=list)


def parse_command(payload: dict) -> CommandMessage:
    """Validate a raw frame; raises pydantic.ValidationError."""
    return CommandEnvelope(message=payload).message
