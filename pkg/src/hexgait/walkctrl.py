"""Gait timing, stride vectors and foot tip trajectory generation.

A gait is a stance/swing split in integer phase units plus per-leg
offsets. The tip trajectory over one step cycle is built from three 4th
order Bezier curves: two position curves for the primary and secondary
halves of the swing, and one velocity curve for the stance. Driving the
stance by velocity (integrated at the tick rate) guarantees grounded feet
move at exactly the speed the commanded body velocity requires.

Swing control points are placed so that:
  * the swing starts at the liftoff point and ends at the touchdown point,
  * its highest point is exactly step_clearance above the default foot
    position (at the shared apex of the two curves),
  * velocity is continuous at liftoff, apex and touchdown (C1), matching
    the stance velocity at the ground ends.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .model import GaitSpec, LegSpec, RobotSpec
from .workspace import Walkspace, leg_stride_vectors


class LegState(Enum):
    STANCE = "stance"
    SWING = "swing"


def gait_timing(gait: GaitSpec, tick: int, leg_index: int) -> tuple[LegState, float]:
    """Leg state and normalized progress at a phase-unit counter value.

    The leg-local phase is the global counter shifted by the leg's offset,
    modulo the gait period; the first stance_phase units of it are stance.
    """
    offset = gait.leg_offset(leg_index)  # raises KeyError for unknown legs
    phase = (tick - offset) % gait.period
    if phase < gait.stance_phase:
        return LegState.STANCE, phase / gait.stance_phase
    return LegState.SWING, (phase - gait.stance_phase) / gait.swing_phase


@dataclass
class GaitTiming:
    """Tick-rate quantization of a gait.

    The tick counts per phase unit are integers, so leg state transitions
    land exactly on ticks: stance counts per tick are exact and the whole
    pattern repeats after exactly period_ticks ticks. The achieved step
    frequency is the closest such quantization of the requested one.
    """

    gait: GaitSpec
    tick_rate: float
    step_frequency: float

    def __post_init__(self):
        units = self.gait.period
        self.ticks_per_unit = max(1, round(self.tick_rate / (self.step_frequency * units)))
        self.period_ticks = self.ticks_per_unit * units
        self.stance_ticks = self.ticks_per_unit * self.gait.stance_phase
        self.swing_ticks = self.ticks_per_unit * self.gait.swing_phase
        self.offset_ticks = [self.gait.leg_offset(i) * self.ticks_per_unit
                             for i in range(len(self.gait.offset_multiplier))]
        self.actual_frequency = self.tick_rate / self.period_ticks

    @property
    def stance_duration(self) -> float:
        return self.stance_ticks / self.tick_rate

    @property
    def swing_duration(self) -> float:
        return self.swing_ticks / self.tick_rate

    def leg_state(self, tick: int, leg_index: int) -> tuple[LegState, float]:
        phase = (tick - self.offset_ticks[leg_index]) % self.period_ticks
        if phase < self.stance_ticks:
            return LegState.STANCE, phase / self.stance_ticks
        return LegState.SWING, (phase - self.stance_ticks) / self.swing_ticks

    def is_cycle_start(self, tick: int) -> bool:
        return tick % self.period_ticks == 0


def stride_vector(v_body, leg: LegSpec, gait: GaitSpec,
                  step_frequency: float) -> np.ndarray:
    """Planar stride for one leg under a planar twist (vx, vy, wz)."""
    v = np.asarray(v_body, dtype=float)
    r = leg.default_tip
    vel = np.array([v[0] - v[2] * r[1], v[1] + v[2] * r[0], 0.0])
    return vel * (gait.duty_factor / step_frequency)


def bezier(points: np.ndarray, t: float) -> np.ndarray:
    """4th order Bezier curve through 5 control points."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"curve parameter must be in [0, 1], got {t}")
    s = 1.0 - t
    return (s ** 4 * points[0] + 4 * t * s ** 3 * points[1]
            + 6 * s * s * t * t * points[2] + 4 * s * t ** 3 * points[3]
            + t ** 4 * points[4])


def bezier_derivative(points: np.ndarray, t: float) -> np.ndarray:
    """Derivative of :func:`bezier` with respect to the curve parameter."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"curve parameter must be in [0, 1], got {t}")
    s = 1.0 - t
    return (4 * s ** 3 * (points[1] - points[0])
            + 12 * s * s * t * (points[2] - points[1])
            + 12 * t * t * s * (points[3] - points[2])
            + 4 * t ** 3 * (points[4] - points[3]))


@dataclass
class StepCycle:
    """Control points for one leg's step cycle."""

    primary: np.ndarray          # (5, 3) swing positions, liftoff -> apex
    secondary: np.ndarray        # (5, 3) swing positions, apex -> touchdown
    stance_velocity: np.ndarray  # (5, 3) stance velocity control points (m/s)
    swing_duration: float        # s, both halves together
    stance_duration: float       # s
    stride: np.ndarray           # (3,) planar stride this cycle realizes

    def swing_position(self, t: float) -> np.ndarray:
        """Position on the swing path, t in [0, 1] across both halves."""
        if t < 0.5:
            return bezier(self.primary, 2.0 * t)
        return bezier(self.secondary, 2.0 * t - 1.0)

    def swing_velocity(self, t: float) -> np.ndarray:
        """Time derivative of the swing path (m/s)."""
        half = self.swing_duration / 2.0
        if t < 0.5:
            return bezier_derivative(self.primary, 2.0 * t) / half
        return bezier_derivative(self.secondary, 2.0 * t - 1.0) / half

    def stance_velocity_at(self, t: float) -> np.ndarray:
        return bezier(self.stance_velocity, t)


def build_step_cycle(stride, default_tip, step_clearance: float,
                     swing_duration: float, stance_duration: float,
                     liftoff=None, swing_width: float = 0.0,
                     swing_depth: float = 0.0) -> StepCycle:
    """Place the fifteen control points for one step cycle.

    ``liftoff`` is where the foot actually is when the swing begins (the
    stance ends there); by default the canonical point half a stride
    behind the default tip. Touchdown is half a stride ahead. The stance
    curve is a constant velocity profile, the exact ground speed needed to
    realize the stride over the stance duration.
    """
    stride = np.asarray(stride, dtype=float)
    tip0 = np.asarray(default_tip, dtype=float)
    touchdown = tip0 + 0.5 * stride + np.array([0.0, 0.0, -swing_depth])
    lift = np.asarray(liftoff, dtype=float) if liftoff is not None \
        else tip0 - 0.5 * stride
    apex = tip0 + np.array([0.0, 0.0, step_clearance])
    if swing_width != 0.0:
        norm = np.hypot(stride[0], stride[1])
        if norm > 1e-12:
            lateral = np.array([-stride[1] / norm, stride[0] / norm, 0.0])
            apex = apex + swing_width * lateral

    v_stance = -stride / stance_duration if stance_duration > 0 else np.zeros(3)
    half = swing_duration / 2.0

    # average horizontal speed across the swing, used as the apex tangent
    v_apex = (touchdown - lift) / swing_duration
    v_apex = np.array([v_apex[0], v_apex[1], 0.0])

    primary = np.empty((5, 3))
    primary[0] = lift
    primary[1] = lift + v_stance * (half / 4.0)       # C1 with stance
    primary[2] = 2.0 * primary[1] - primary[0]        # zero acceleration at liftoff
    primary[4] = apex
    primary[3] = apex - v_apex * (half / 4.0)         # horizontal tangent at apex

    secondary = np.empty((5, 3))
    secondary[0] = apex
    secondary[1] = apex + v_apex * (half / 4.0)       # C1 across the apex
    secondary[4] = touchdown
    secondary[3] = touchdown - v_stance * (half / 4.0)  # C1 with next stance
    secondary[2] = 2.0 * secondary[3] - secondary[4]  # zero acceleration at touchdown

    stance_cp = np.tile(v_stance, (5, 1))
    return StepCycle(primary, secondary, stance_cp, swing_duration,
                     stance_duration, stride.copy())


@dataclass
class TipTarget:
    kind: str                    # "position" or "velocity"
    vector: np.ndarray


def tip_target(cycle: StepCycle, state: LegState, t: float) -> TipTarget:
    """Sample the step cycle: swing yields positions, stance velocities."""
    if state is LegState.SWING:
        return TipTarget("position", cycle.swing_position(t))
    return TipTarget("velocity", cycle.stance_velocity_at(t))


# ---------------------------------------------------------------------------
# walk controller

class WalkState(Enum):
    STOPPED = "stopped"
    MOVING = "moving"
    STOPPING = "stopping"


@dataclass
class LegOverride:
    """Freegait override: drive one leg outside the cyclic gait."""

    kind: str                    # "velocity" or "pose"
    value: np.ndarray            # tip velocity (m/s) or target position
    max_speed: float = 0.15      # pose approach speed, m/s


@dataclass
class _LegRuntime:
    tip: np.ndarray
    cycle: StepCycle | None = None
    prev_state: LegState = LegState.STANCE
    holding: bool = True         # no real swing built yet (walk start)


class WalkController:
    """Owns the gait phase counter and per-leg tip targets.

    Velocity and gait changes are latched and take effect at the next
    full-cycle boundary so every leg's stance speed changes in lock-step.
    Tips are expressed in the default body frame (the frame the pose
    controller later maps into the actual body frame).
    """

    def __init__(self, robot: RobotSpec, gait: GaitSpec, tick_rate: float = 200.0,
                 step_frequency: float | None = None,
                 walkspace: Walkspace | None = None):
        self.robot = robot
        self.tick_rate = tick_rate
        self.step_frequency = step_frequency or robot.step_frequency
        self.walkspace = walkspace
        self.timing = GaitTiming(gait, tick_rate, self.step_frequency)
        self.tick_count = 0
        self.state = WalkState.STOPPED
        self.velocity = np.zeros(3)           # applied (vx, vy, wz)
        self.pending_velocity = np.zeros(3)
        self.pending_gait: GaitSpec | None = None
        self.pending_frequency: float | None = None
        self.legs = {leg.id: _LegRuntime(tip=leg.default_tip.copy())
                     for leg in robot.legs}
        self.overrides: dict[int, LegOverride] = {}

    # -- commands ----------------------------------------------------------

    def set_velocity(self, v_body):
        """Latch a planar twist (vx, vy, wz); applied at the cycle start."""
        self.pending_velocity = np.asarray(v_body, dtype=float).copy()

    def select_gait(self, gait: GaitSpec):
        self.pending_gait = gait

    def set_step_frequency(self, f_s: float):
        if f_s <= 0:
            raise ValueError(f"step frequency must be > 0, got {f_s}")
        self.pending_frequency = f_s

    def set_override(self, leg_id: int, override: LegOverride | None):
        if leg_id not in self.legs:
            raise KeyError(f"unknown leg id {leg_id}")
        if override is None:
            self.overrides.pop(leg_id, None)
        else:
            self.overrides[leg_id] = override

    # -- stepping ----------------------------------------------------------

    def _strides(self) -> dict[int, np.ndarray]:
        v = self.velocity
        planar = leg_stride_vectors(self.robot, v[:2], v[2],
                                    self.timing.gait.duty_factor,
                                    self.timing.actual_frequency)
        return {lid: np.array([s[0], s[1], 0.0]) for lid, s in planar.items()}

    def _at_cycle_start(self):
        if self.pending_gait is not None or self.pending_frequency is not None:
            gait = self.pending_gait or self.timing.gait
            freq = self.pending_frequency or self.step_frequency
            self.timing = GaitTiming(gait, self.tick_rate, freq)
            self.step_frequency = freq
            self.pending_gait = None
            self.pending_frequency = None
            self.tick_count = 0
        self.velocity = self.pending_velocity.copy()
        moving = bool(np.any(np.abs(self.velocity) > 1e-9))
        if moving:
            self.state = WalkState.MOVING
        elif self.state is WalkState.MOVING:
            self.state = WalkState.STOPPING
        elif self.state is WalkState.STOPPING and self._tips_at_default():
            self.state = WalkState.STOPPED

    def _tips_at_default(self) -> bool:
        return all(np.linalg.norm(rt.tip - leg.default_tip) < 1e-6
                   for leg, rt in ((leg, self.legs[leg.id]) for leg in self.robot.legs))

    def tick(self) -> dict[int, TipTarget]:
        """Advance one tick; returns per-leg position targets (swing and
        overridden legs) or integrated stance positions, default frame."""
        dt = 1.0 / self.tick_rate
        if self.timing.is_cycle_start(self.tick_count):
            self._at_cycle_start()

        strides = self._strides()
        out: dict[int, TipTarget] = {}
        for idx, leg in enumerate(self.robot.legs):
            rt = self.legs[leg.id]
            override = self.overrides.get(leg.id)
            if override is not None:
                self._apply_override(rt, override, dt)
                out[leg.id] = TipTarget("position", rt.tip.copy())
                continue
            if self.state is WalkState.STOPPED:
                out[leg.id] = TipTarget("position", rt.tip.copy())
                continue

            state, t = self.timing.leg_state(self.tick_count, idx)
            if state is LegState.SWING:
                if rt.prev_state is LegState.STANCE or rt.cycle is None:
                    touchdown = leg.default_tip + 0.5 * strides[leg.id]
                    if (self.state is WalkState.STOPPING
                            and np.linalg.norm(rt.tip - touchdown) < 1e-9):
                        # already parked on its touchdown point: skip the
                        # in-place bob while shutting the walk down
                        rt.tip = touchdown.copy()
                        rt.cycle = None
                        rt.holding = True
                    else:
                        # fresh swing: plan from the actual liftoff point
                        rt.cycle = build_step_cycle(
                            strides[leg.id], leg.default_tip,
                            self.robot.step_clearance,
                            self.timing.swing_duration,
                            self.timing.stance_duration,
                            liftoff=rt.tip,
                            swing_width=self.robot.swing_width,
                            swing_depth=self.robot.swing_depth)
                        rt.holding = False
                if rt.holding:
                    # joined mid-swing at walk start: hold until next cycle
                    out[leg.id] = TipTarget("position", rt.tip.copy())
                else:
                    # sample one tick ahead so the final swing tick lands
                    # exactly on the touchdown control point
                    t_eval = min(t + 1.0 / self.timing.swing_ticks, 1.0)
                    rt.tip = rt.cycle.swing_position(t_eval)
                    out[leg.id] = TipTarget("position", rt.tip.copy())
            else:
                if rt.prev_state is LegState.SWING:
                    rt.holding = False
                    if rt.cycle is not None:
                        # land exactly on the planned touchdown point; the
                        # last swing tick samples just short of it
                        rt.tip = rt.cycle.secondary[4].copy()
                if rt.holding or rt.cycle is None:
                    v = -strides[leg.id] / self.timing.stance_duration
                else:
                    v = rt.cycle.stance_velocity_at(t)
                rt.tip = rt.tip + v * dt
                out[leg.id] = TipTarget("position", rt.tip.copy())
            rt.prev_state = state
        self.tick_count += 1
        return out

    def _apply_override(self, rt: _LegRuntime, override: LegOverride, dt: float):
        if override.kind == "velocity":
            rt.tip = rt.tip + np.asarray(override.value, dtype=float) * dt
        else:  # pose: rate-limited approach to the target point
            delta = np.asarray(override.value, dtype=float) - rt.tip
            dist = float(np.linalg.norm(delta))
            step = override.max_speed * dt
            if dist <= step:
                rt.tip = np.asarray(override.value, dtype=float).copy()
            else:
                rt.tip = rt.tip + delta * (step / dist)

    def leg_phase(self, leg_id: int) -> tuple[LegState, float]:
        idx = self.robot.leg_index(leg_id)
        return self.timing.leg_state(self.tick_count, idx)

    def stance_count(self) -> int:
        return sum(1 for i in range(self.robot.leg_count)
                   if self.timing.leg_state(self.tick_count, i)[0] is LegState.STANCE)
