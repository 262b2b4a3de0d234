"""Body pose generation and composition.

Several independent posing sources each contribute a small transform:
manual operator posing, IMU levelling (a PID on roll/pitch), inclination
shifting (keeps the weight centred on slopes), an automatic cyclic poser
keyed to the gait phase, and a tip-align poser for constrained-tip legs.
They compose onto the walk-plane pose:

    body = tip_align * (imu | auto) * inclination * manual * walk_plane

with the combined offset clamped to the configured translation/rotation
envelope. Since walking tips are generated in the default body frame, the
inverse of the relative body pose maps them into the posed body frame.

The IMU and auto posers drive the same slot and are mutually exclusive;
switching between them cross-fades over a fixed blend time so the body
never jumps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import transforms
from .model import RobotSpec, SequenceSpec
from .workspace import Walkspace

BLEND_TIME = 0.5          # s, cross-fade when switching the imu/auto slot
WALK_PLANE_TAU = 1.0      # s, first-order filter on the plane estimate


def _pose_from_offset(offset6: np.ndarray) -> np.ndarray:
    return transforms.from_xyz_rpy(offset6[:3], offset6[3:])


@dataclass
class ManualPoser:
    """Integrates operator posing velocities within the configured box."""

    robot: RobotSpec
    offset: np.ndarray = None

    def __post_init__(self):
        if self.offset is None:
            self.offset = np.zeros(6)
        lim_t = np.asarray(self.robot.max_translation)
        lim_r = np.asarray(self.robot.max_rotation)
        self._limits = np.concatenate([lim_t, lim_r])

    def update(self, pose_velocity, dt: float) -> np.ndarray:
        if dt <= 0:
            raise ValueError(f"dt must be > 0, got {dt}")
        v = np.asarray(pose_velocity, dtype=float)
        self.offset = np.clip(self.offset + v * dt, -self._limits, self._limits)
        return _pose_from_offset(self.offset)

    def reset(self):
        self.offset = np.zeros(6)


@dataclass
class PIDAxis:
    kp: float
    ki: float
    kd: float
    output_limit: float
    derivative_tau: float = 0.2   # s, first-order filter on the D term
    integral: float = 0.0
    previous_error: float = 0.0
    derivative: float = 0.0

    def step(self, error: float, dt: float) -> float:
        self.integral += error * dt
        if self.ki > 0:  # anti-windup: keep the integral term inside the limit
            bound = self.output_limit / self.ki
            self.integral = float(np.clip(self.integral, -bound, bound))
        if dt > 0:
            raw = (error - self.previous_error) / dt
            alpha = dt / (self.derivative_tau + dt)
            self.derivative += alpha * (raw - self.derivative)
        self.previous_error = error
        out = self.kp * error + self.ki * self.integral + self.kd * self.derivative
        return float(np.clip(out, -self.output_limit, self.output_limit))

    def reset(self):
        self.integral = 0.0
        self.previous_error = 0.0
        self.derivative = 0.0


class ImuPoser:
    """Counter-rotates the body so its z axis tracks the gravity vector."""

    def __init__(self, robot: RobotSpec):
        g = robot.imu_pid
        self.roll = PIDAxis(g.kp, g.ki, g.kd, robot.max_rotation[0])
        self.pitch = PIDAxis(g.kp, g.ki, g.kd, robot.max_rotation[1])
        self.offset = np.zeros(2)

    def update(self, imu_roll: float, imu_pitch: float, dt: float) -> np.ndarray:
        self.offset = np.array([self.roll.step(-imu_roll, dt),
                                self.pitch.step(-imu_pitch, dt)])
        return _pose_from_offset(np.array([0, 0, 0,
                                           self.offset[0], self.offset[1], 0]))

    def reset(self):
        self.roll.reset()
        self.pitch.reset()
        self.offset = np.zeros(2)


def inclination_pose(imu_roll: float, imu_pitch: float,
                     body_clearance: float) -> np.ndarray:
    """Lateral shift moving the weight back over the support centre on an
    incline: the horizontal projection of the gravity vector, scaled by
    the body height (tan of the tilt), applied uphill."""
    if abs(imu_roll) >= np.pi / 2 or abs(imu_pitch) >= np.pi / 2:
        raise ValueError("inclination pose undefined at or beyond 90 degrees")
    r = (transforms.rot_y(imu_pitch) @ transforms.rot_x(imu_roll))[:3, :3]
    g_body = r.T @ np.array([0.0, 0.0, -1.0])
    shift = -body_clearance * g_body[:2] / abs(g_body[2])
    return transforms.translation([shift[0], shift[1], 0.0])


@dataclass
class WalkPlanePoser:
    """Least-squares plane through the stance contacts, low-pass filtered,
    turned into the walk-plane body pose (clearance kept along the plane
    normal)."""

    robot: RobotSpec
    coeffs: np.ndarray = None     # z = a x + b y + c
    initialized: bool = False

    def __post_init__(self):
        if self.coeffs is None:
            self.coeffs = np.zeros(3)

    def fit(self, contact_points) -> np.ndarray | None:
        pts = np.asarray(contact_points, dtype=float)
        if len(pts) < 3:
            return None
        a = np.column_stack([pts[:, 0], pts[:, 1], np.ones(len(pts))])
        try:
            sol, _, rank, _ = np.linalg.lstsq(a, pts[:, 2], rcond=None)
        except np.linalg.LinAlgError:
            return None
        if rank < 3:
            return None  # collinear contacts: keep the previous estimate
        return sol

    def update(self, contact_points, dt: float) -> np.ndarray:
        sol = self.fit(contact_points)
        if sol is not None:
            if not self.initialized:
                self.coeffs = sol
                self.initialized = True
            else:
                alpha = dt / (WALK_PLANE_TAU + dt)
                self.coeffs = self.coeffs + alpha * (sol - self.coeffs)
        return self.pose()

    def normal(self) -> np.ndarray:
        n = np.array([-self.coeffs[0], -self.coeffs[1], 1.0])
        return n / np.linalg.norm(n)

    def pose(self) -> np.ndarray:
        n = self.normal()
        t = transforms.align_z_to(n)
        t[:3, 3] = np.array([0.0, 0.0, self.coeffs[2]]) + self.robot.body_clearance * n
        return t

    def reset(self):
        self.coeffs = np.zeros(3)
        self.initialized = False


@dataclass
class AutoPoseSpec:
    """Cyclic body posing tied to the gait phase: six per-axis sinusoid
    amplitudes (x, y, z, roll, pitch, yaw) with per-axis phase fractions
    and a common number of cycles per gait period."""

    amplitudes: np.ndarray = field(default_factory=lambda: np.zeros(6))
    phases: np.ndarray = field(default_factory=lambda: np.zeros(6))
    cycles: int = 1

    @classmethod
    def from_dict(cls, doc: dict) -> "AutoPoseSpec":
        return cls(amplitudes=np.asarray(doc.get("amplitudes", np.zeros(6)), dtype=float),
                   phases=np.asarray(doc.get("phases", np.zeros(6)), dtype=float),
                   cycles=int(doc.get("cycles", 1)))


def auto_pose(spec: AutoPoseSpec, gait_phase_fraction: float) -> np.ndarray:
    arg = 2.0 * np.pi * (spec.cycles * gait_phase_fraction + spec.phases)
    return _pose_from_offset(spec.amplitudes * np.sin(arg))


@dataclass
class BodyPoseState:
    """All contributing sub-poses and the composed result, one tick."""

    manual: np.ndarray
    inclination: np.ndarray
    imu_auto: np.ndarray
    tip_align: np.ndarray
    walk_plane: np.ndarray
    body: np.ndarray
    offset6: np.ndarray           # combined (clamped) offset over the walk plane


class PoseController:
    """Owns the posing sub-systems and composes the body pose each tick."""

    def __init__(self, robot: RobotSpec):
        self.robot = robot
        self.manual = ManualPoser(robot)
        self.imu = ImuPoser(robot)
        self.walk_plane = WalkPlanePoser(robot)
        self.auto_spec = AutoPoseSpec()
        self.ai_mode = "imu"            # "imu" | "auto" | "none"
        self._blend = {"imu": 1.0, "auto": 0.0}
        self.tip_align = np.eye(4)
        self.default_pose = transforms.translation([0, 0, robot.body_clearance])
        lim_t = np.asarray(robot.max_translation)
        lim_r = np.asarray(robot.max_rotation)
        self._limits = np.concatenate([lim_t, lim_r])

    def set_ai_mode(self, mode: str):
        if mode not in ("imu", "auto", "none"):
            raise ValueError(f"unknown posing mode {mode!r}")
        self.ai_mode = mode

    def set_auto_pose(self, spec: AutoPoseSpec):
        self.auto_spec = spec

    def _blend_step(self, dt: float):
        step = dt / BLEND_TIME
        for name in ("imu", "auto"):
            target = 1.0 if self.ai_mode == name else 0.0
            b = self._blend[name]
            self._blend[name] = min(b + step, target) if b < target \
                else max(b - step, target)

    def update(self, pose_velocity, imu_reading, contact_points,
               gait_phase_fraction: float, dt: float) -> BodyPoseState:
        """Advance all sub-posers and compose the body pose.

        imu_reading is (roll, pitch) of the body relative to gravity;
        contact_points are current stance tip positions (default frame).
        """
        h_man = self.manual.update(pose_velocity, dt)
        h_inc = inclination_pose(imu_reading[0], imu_reading[1],
                                 self.robot.body_clearance)
        self._blend_step(dt)
        h_imu = self.imu.update(imu_reading[0], imu_reading[1], dt) \
            if self._blend["imu"] > 0 else np.eye(4)
        h_auto = auto_pose(self.auto_spec, gait_phase_fraction) \
            if self._blend["auto"] > 0 else np.eye(4)
        h_ai = _blend_pose(h_imu, self._blend["imu"]) @ \
            _blend_pose(h_auto, self._blend["auto"])
        p_walk = self.walk_plane.update(contact_points, dt) \
            if contact_points is not None else self.walk_plane.pose()
        return self.compose(h_man, h_inc, h_ai, p_walk)

    def compose(self, h_man, h_inc, h_ai, p_walk) -> BodyPoseState:
        combined = self.tip_align @ h_ai @ h_inc @ h_man
        xyz, rpy = transforms.to_xyz_rpy(combined)
        offset6 = np.concatenate([xyz, rpy])
        clamped = np.clip(offset6, -self._limits, self._limits)
        if not np.array_equal(clamped, offset6):
            combined = _pose_from_offset(clamped)
            offset6 = clamped
        body = combined @ p_walk
        return BodyPoseState(manual=h_man, inclination=h_inc, imu_auto=h_ai,
                             tip_align=self.tip_align, walk_plane=p_walk,
                             body=body, offset6=offset6)

    def reset(self):
        self.manual.reset()
        self.imu.reset()
        self.walk_plane.reset()


def _blend_pose(pose: np.ndarray, weight: float) -> np.ndarray:
    """Scale a pose offset toward identity (component-wise on xyz/rpy);
    exact at weights 0 and 1."""
    if weight >= 1.0:
        return pose
    if weight <= 0.0:
        return np.eye(4)
    xyz, rpy = transforms.to_xyz_rpy(pose)
    return _pose_from_offset(weight * np.concatenate([xyz, rpy]))


def combine_tip_pose(p_body: np.ndarray, p_default: np.ndarray, tip_default,
                     walkspace: Walkspace | None = None,
                     default_tip=None) -> np.ndarray:
    """Map a tip position from the default body frame into the actual
    (posed) body frame: the inverse of the body pose relative to the
    default pose. Optionally clamps the result into the leg's walkspace
    (radially, around the default tip)."""
    rel = transforms.invert(p_default) @ p_body
    tip = transforms.apply(transforms.invert(rel), np.asarray(tip_default, dtype=float))
    if walkspace is not None and default_tip is not None:
        off = tip[:2] - np.asarray(default_tip)[:2]
        clamped = walkspace.clamp(off)
        if not np.array_equal(clamped, off):
            tip = np.array([default_tip[0] + clamped[0],
                            default_tip[1] + clamped[1], tip[2]])
    return tip


class SequenceRunner:
    """Plays a joint-space keyframe sequence, stretching any keyframe that
    would exceed a joint's velocity limit."""

    def __init__(self, seq: SequenceSpec, robot: RobotSpec,
                 start_angles: dict[int, np.ndarray]):
        self.robot = robot
        self.frames = []           # (angles per leg, duration)
        prev = {lid: np.asarray(q, dtype=float) for lid, q in start_angles.items()}
        for angles, duration in seq.keyframes:
            target = {lid: np.asarray(vals, dtype=float)
                      for lid, vals in angles.items()}
            worst = duration
            for leg in robot.legs:
                delta = np.abs(target[leg.id] - prev[leg.id])
                worst = max(worst, float(np.max(delta / leg.velocity_limits())))
            self.frames.append((prev, target, worst))
            prev = target
        self.frame_index = 0
        self.elapsed = 0.0

    @property
    def done(self) -> bool:
        return self.frame_index >= len(self.frames)

    @property
    def total_duration(self) -> float:
        return sum(d for _, _, d in self.frames)

    def step(self, dt: float) -> dict[int, np.ndarray]:
        """Advance and return per-leg joint targets (linear interpolation)."""
        if self.done:
            _, target, _ = self.frames[-1]
            return {lid: q.copy() for lid, q in target.items()}
        start, target, duration = self.frames[self.frame_index]
        self.elapsed += dt
        u = min(self.elapsed / duration, 1.0)
        out = {lid: start[lid] + u * (target[lid] - start[lid])
               for lid in target}
        if u >= 1.0:
            self.frame_index += 1
            self.elapsed = 0.0
        return out
