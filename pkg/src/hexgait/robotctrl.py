"""Top-level per-tick control: walk and pose outputs are combined per leg,
passed through the admittance filter, and turned into joint commands that
respect position and per-tick velocity limits.

Foot force is estimated from joint torques through the transpose of the
6 x n tip Jacobian. For legs with fewer than six joints the system is
underdetermined; among the exact solutions we take the one with the
smallest tip moment (a point contact transmits force, not torque), which
also reproduces the plain lever-arm answer for single-joint chains. Near
singular configurations a damped pseudo-inverse is used instead and the
result flagged.

The admittance filter integrates a virtual mass-spring-damper along z per
leg (semi-implicit Euler, stable for stiff springs at control rates):
force pushing up on the foot yields a negative spring displacement, and
the adapted foot target is the reference minus that displacement.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import kinematics as kin
from . import posectrl, transforms
from .model import AdmittanceParams, GaitSpec, LegSpec, RobotSpec
from .walkctrl import LegOverride, LegState, TipTarget, WalkController, WalkState
from .workspace import Walkspace, limit_velocity


def tip_force_estimate(leg: LegSpec, q: np.ndarray, joint_torques,
                       lam: float = 0.05) -> tuple[np.ndarray, bool]:
    """Wrench (F, M) at the foot tip that explains the joint torques.

    Returns (wrench6, degraded): the torque balance J6^T w = tau is solved
    exactly, choosing the minimum-moment solution when underdetermined;
    `degraded` marks a rank-deficient (singular) configuration where only
    a damped least-squares estimate is available.
    """
    tau = np.asarray(joint_torques, dtype=float)
    a = kin.jacobian6(leg, q).T            # (n, 6)
    n = a.shape[0]
    u, s, vt = np.linalg.svd(a, full_matrices=True)
    tol = max(a.shape) * np.finfo(float).eps * (s[0] if len(s) else 1.0)
    rank = int(np.sum(s > tol)) if s[0] > 0 else 0
    if rank < n:
        # singular: no exact solution in general; damped fallback
        gram = a @ a.T
        gram.flat[:: n + 1] += lam * lam
        return a.T @ np.linalg.solve(gram, tau), True
    x0 = vt[:rank].T @ ((u.T @ tau)[:rank] / s[:rank])
    null = vt[rank:].T                     # (6, 6-n) orthonormal null basis
    if null.shape[1]:
        sm = null[3:]                      # moment rows of the null basis
        g = sm.T @ sm
        g.flat[:: g.shape[0] + 1] += 1e-12
        z = -np.linalg.solve(g, sm.T @ x0[3:])
        x0 = x0 + null @ z
    return x0, False


@dataclass
class AdmittanceState:
    """Virtual mass-spring-damper displacement along z for one leg."""

    params: AdmittanceParams
    delta_z: float = 0.0
    delta_z_dot: float = 0.0

    def update(self, force_z: float, dt: float) -> float:
        """One semi-implicit Euler step of -F = m a + b v + c x."""
        p = self.params
        accel = (-force_z - p.b_virt * self.delta_z_dot
                 - p.c_virt * self.delta_z) / p.m_virt
        self.delta_z_dot += accel * dt
        self.delta_z += self.delta_z_dot * dt
        return self.delta_z

    def reset(self):
        self.delta_z = 0.0
        self.delta_z_dot = 0.0


@dataclass
class TouchdownDetector:
    """Debounced contact detection on the vertical tip force."""

    threshold: float = 5.0      # N
    hold_ticks: int = 3
    release_fraction: float = 0.5
    contact: bool = False
    _count: int = 0

    def update(self, force_z: float) -> bool:
        level = abs(force_z)
        if not self.contact:
            if level > self.threshold:
                self._count += 1
                if self._count >= self.hold_ticks:
                    self.contact = True
                    self._count = 0
            else:
                self._count = 0
        else:
            if level < self.threshold * self.release_fraction:
                self._count += 1
                if self._count >= self.hold_ticks:
                    self.contact = False
                    self._count = 0
            else:
                self._count = 0
        return self.contact


@dataclass
class JointCommand:
    leg_id: int
    positions: np.ndarray
    velocities: np.ndarray        # realized rate (rad/s) this tick
    desired_velocities: np.ndarray  # rate the tracker asked for, pre-clamp
    clamped: bool                 # any joint rate saturated this tick
    ik_error: float               # residual tip error of the solve (m)


class LegDriver:
    """Joint-space state of one leg plus its per-tick command generation."""

    def __init__(self, leg: LegSpec, robot: RobotSpec):
        self.leg = leg
        self.robot = robot
        self.q = leg.home_angles()
        self.lo, self.hi = leg.position_limits()
        self.vmax = leg.velocity_limits()
        self.clamp_events = 0

    def command_tip(self, tip_body: np.ndarray, dt: float) -> JointCommand:
        """Track a tip position target (body frame) for one tick."""
        target_leg = transforms.apply(self.leg.base_frame_inv, tip_body)
        res = kin.solve_ik(self.leg, self.q, target_leg,
                           tolerance=1e-5, max_iters=8,
                           lam=self.robot.ik_lambda, jla=self.robot.jla,
                           max_step=0.05, restarts=0)
        return self._step_towards(res.q, dt, res.error)

    def command_angles(self, q_target: np.ndarray, dt: float) -> JointCommand:
        """Track a joint-space target (sequences) for one tick."""
        return self._step_towards(np.asarray(q_target, dtype=float), dt, 0.0)

    def _step_towards(self, q_target: np.ndarray, dt: float,
                      ik_error: float) -> JointCommand:
        q_target = np.clip(q_target, self.lo, self.hi)
        dq = q_target - self.q
        # the rate the tracker asks for, saturated at a stall-like bound:
        # a servo cannot be asked to work harder than that
        desired = np.clip(dq / dt, -2.0 * self.vmax, 2.0 * self.vmax)
        limit = self.vmax * dt
        clamped = bool(np.any(np.abs(dq) > limit + 1e-15))
        if clamped:
            dq = np.clip(dq, -limit, limit)
            self.clamp_events += 1
        self.q = np.clip(self.q + dq, self.lo, self.hi)
        return JointCommand(self.leg.id, self.q.copy(), dq / dt, desired,
                            clamped, ik_error)

    def tip_body(self) -> np.ndarray:
        return transforms.apply(self.leg.base_frame,
                                kin.tip_position(self.leg, self.q))


class Mode(Enum):
    PACKED = "packed"
    STARTING = "starting"
    READY = "ready"
    WALKING = "walking"
    SHUTTING_DOWN = "shutting_down"


@dataclass
class SensorFrame:
    """Per-tick sensor inputs (all optional; defaults are benign).

    contact_points are measured foot contact locations in the body's
    heading frame (z up, origin under the body, yaw removed); when absent
    the walk-plane estimate falls back to the commanded stance tips."""

    imu_roll: float = 0.0
    imu_pitch: float = 0.0
    joint_torques: dict[int, np.ndarray] | None = None
    contact_forces: dict[int, float] | None = None
    contact_points: dict[int, np.ndarray] | None = None


@dataclass
class LegSnapshot:
    leg_id: int
    q: np.ndarray
    desired_rates: np.ndarray
    tip_target: np.ndarray        # walk output, default body frame
    tip_commanded: np.ndarray     # after posing and admittance, body frame
    tip_achieved: np.ndarray      # body frame, FK of commanded q
    phase: str
    phase_t: float
    clamped: bool
    contact: bool
    force_z: float
    admittance_dz: float


@dataclass
class Snapshot:
    tick: int
    sim_time: float
    mode: str
    gait: str
    walk_state: str
    velocity_command: np.ndarray
    velocity_limited: np.ndarray
    body_pose: np.ndarray         # composed pose over the ground frame
    pose_offsets: dict[str, np.ndarray]
    legs: list[LegSnapshot]
    clamp_events: int
    legipulating: list[int]


class RobotController:
    """Ties the walk controller, pose controller and leg drivers together.

    One owner advances `tick`; commands latch into plain attributes and
    take effect per the mode machine (walking transitions happen only when
    every leg is grounded).
    """

    def __init__(self, robot: RobotSpec, gait: GaitSpec,
                 walkspace: Walkspace | None = None, tick_rate: float = 200.0,
                 start_mode: Mode = Mode.READY):
        self.robot = robot
        self.tick_rate = tick_rate
        self.dt = 1.0 / tick_rate
        self.walkspace = walkspace
        self.walk = WalkController(robot, gait, tick_rate=tick_rate)
        self.pose = posectrl.PoseController(robot)
        self.drivers = {leg.id: LegDriver(leg, robot) for leg in robot.legs}
        self.admittance = {leg.id: AdmittanceState(robot.admittance)
                           for leg in robot.legs}
        self.touchdown = {leg.id: TouchdownDetector() for leg in robot.legs}
        self.mode = start_mode
        if start_mode is Mode.PACKED:
            for leg in robot.legs:
                self.drivers[leg.id].q = leg.packed_angles()
        self.sequence: posectrl.SequenceRunner | None = None
        self.tick_count = 0
        self.velocity_command = np.zeros(3)
        self.pose_velocity = np.zeros(6)
        self.pending_mode: Mode | None = None
        self.default_pose = transforms.translation([0, 0, robot.body_clearance])
        self._last_tip_targets: dict[int, np.ndarray] = {
            leg.id: leg.default_tip.copy() for leg in robot.legs}

    # -- command intake ------------------------------------------------------

    def set_velocity(self, v_body):
        self.velocity_command = np.asarray(v_body, dtype=float).copy()

    def set_pose_velocity(self, v6):
        self.pose_velocity = np.asarray(v6, dtype=float).copy()

    def select_gait(self, gait: GaitSpec):
        self.walk.select_gait(gait)

    def set_step_frequency(self, f_s: float):
        self.walk.set_step_frequency(f_s)

    def request_mode(self, mode: str):
        wanted = Mode(mode)
        if wanted is Mode.STARTING:
            if self.mode is not Mode.PACKED:
                raise ValueError("startup is only available from the packed state")
        elif wanted is Mode.SHUTTING_DOWN:
            if self.mode not in (Mode.READY, Mode.WALKING):
                raise ValueError("shutdown is only available while standing or walking")
        else:
            raise ValueError(f"cannot request mode {mode!r} directly")
        self.pending_mode = wanted

    def set_leg_override(self, leg_id: int, override: LegOverride | None):
        """Manual manipulation of one leg; only outside the cyclic gait."""
        if override is not None and self.mode is not Mode.READY:
            raise RuntimeError("leg manipulation only available while standing")
        self.walk.set_override(leg_id, override)

    # -- mode machine --------------------------------------------------------

    def _start_sequence(self, name: str):
        seq = self.robot.sequences.get(name)
        start = {lid: d.q.copy() for lid, d in self.drivers.items()}
        if seq is None:
            # no configured sequence: interpolate straight to the target
            target = {leg.id: (leg.home_angles() if name == "startup"
                               else leg.packed_angles())
                      for leg in self.robot.legs}
            from .model import SequenceSpec
            seq = SequenceSpec(name, [({lid: list(q) for lid, q in target.items()},
                                       1.0)])
        self.sequence = posectrl.SequenceRunner(seq, self.robot, start)

    def _update_mode(self):
        if self.pending_mode is Mode.STARTING and self.mode is Mode.PACKED:
            self.mode = Mode.STARTING
            self._start_sequence("startup")
            self.pending_mode = None
        elif self.pending_mode is Mode.SHUTTING_DOWN:
            if self.mode is Mode.READY:
                self.mode = Mode.SHUTTING_DOWN
                self._start_sequence("shutdown")
                self.pending_mode = None
            elif self.mode is Mode.WALKING:
                self.velocity_command = np.zeros(3)  # stop first
        if self.mode is Mode.READY and np.any(np.abs(self.velocity_command) > 1e-9) \
                and not self.walk.overrides:
            self.mode = Mode.WALKING
        if self.mode is Mode.WALKING and self.walk.state is WalkState.STOPPED \
                and not np.any(np.abs(self.velocity_command) > 1e-9):
            self.mode = Mode.READY

    # -- tick ----------------------------------------------------------------

    def tick(self, sensors: SensorFrame | None = None) -> Snapshot:
        sensors = sensors or SensorFrame()
        dt = self.dt
        self._update_mode()

        commands: dict[int, JointCommand] = {}
        if self.mode in (Mode.STARTING, Mode.SHUTTING_DOWN):
            targets = self.sequence.step(dt)
            for lid, drv in self.drivers.items():
                commands[lid] = drv.command_angles(targets[lid], dt)
            if self.sequence.done:
                self.mode = Mode.READY if self.mode is Mode.STARTING else Mode.PACKED
            pose_state = self.pose.compose(np.eye(4), np.eye(4), np.eye(4),
                                           self.default_pose)
            v_lim = np.zeros(3)
            tip_targets = {lid: drv.tip_body() for lid, drv in self.drivers.items()}
            tips_commanded = {lid: t.copy() for lid, t in tip_targets.items()}
        elif self.mode is Mode.PACKED:
            for lid, drv in self.drivers.items():
                commands[lid] = drv.command_angles(drv.q, dt)
            pose_state = self.pose.compose(np.eye(4), np.eye(4), np.eye(4),
                                           self.default_pose)
            v_lim = np.zeros(3)
            tip_targets = {lid: drv.tip_body() for lid, drv in self.drivers.items()}
            tips_commanded = {lid: t.copy() for lid, t in tip_targets.items()}
        else:
            v_lim = self.velocity_command
            if self.walkspace is not None:
                v_lim = limit_velocity(self.velocity_command, self.walkspace,
                                       self.walk.timing.actual_frequency,
                                       self.walk.timing.gait.duty_factor,
                                       self.robot)
            self.walk.set_velocity(v_lim)
            walk_targets = self.walk.tick()
            tip_targets = {lid: t.vector for lid, t in walk_targets.items()}
            tips_commanded = {}

            # walk-plane estimate from measured contacts when available,
            # else from the commanded stance tips (flat-ground assumption)
            if sensors.contact_points:
                stance_pts = list(sensors.contact_points.values())
            else:
                stance_pts = [transforms.apply(self.default_pose, tip_targets[leg.id])
                              for i, leg in enumerate(self.robot.legs)
                              if self.walk.timing.leg_state(self.walk.tick_count - 1, i)[0]
                              is LegState.STANCE]
            phase_frac = (self.walk.tick_count % self.walk.timing.period_ticks) \
                / self.walk.timing.period_ticks
            pose_state = self.pose.update(self.pose_velocity,
                                          (sensors.imu_roll, sensors.imu_pitch),
                                          stance_pts if len(stance_pts) >= 3 else None,
                                          phase_frac, dt)
            for i, leg in enumerate(self.robot.legs):
                lid = leg.id
                # tips ride on the walk plane: the flat default layout is
                # glued to the estimated ground, and the body pose is
                # realized relative to that plane (equals the default pose
                # frame on flat ground)
                tip = posectrl.combine_tip_pose(pose_state.body,
                                                pose_state.walk_plane,
                                                tip_targets[lid],
                                                walkspace=self.walkspace,
                                                default_tip=leg.default_tip)
                force_z = self._leg_force_z(leg, sensors)
                adm = self.admittance[lid]
                if self.robot.admittance.enabled:
                    state, _ = self.walk.timing.leg_state(
                        self.walk.tick_count - 1, i)
                    dz = adm.update(force_z if state is LegState.STANCE else 0.0,
                                    dt)
                    tip = tip - np.array([0.0, 0.0, dz])
                commands[lid] = self.drivers[lid].command_tip(tip, dt)
                self.touchdown[lid].update(force_z)
                tips_commanded[lid] = tip

        leg_snaps = []
        for i, leg in enumerate(self.robot.legs):
            lid = leg.id
            drv = self.drivers[lid]
            cmd = commands[lid]
            state, t = (self.walk.timing.leg_state(self.walk.tick_count - 1, i)
                        if self.mode is Mode.WALKING else (LegState.STANCE, 0.0))
            force_z = self._leg_force_z(leg, sensors)
            leg_snaps.append(LegSnapshot(
                leg_id=lid, q=cmd.positions,
                desired_rates=cmd.desired_velocities,
                tip_target=tip_targets[lid].copy(),
                tip_commanded=tips_commanded[lid].copy(),
                tip_achieved=drv.tip_body(),
                phase=state.value, phase_t=t,
                clamped=cmd.clamped,
                contact=self.touchdown[lid].contact,
                force_z=force_z,
                admittance_dz=self.admittance[lid].delta_z))
        self._last_tip_targets = tip_targets

        offsets = {
            "manual": _offset6(pose_state.manual),
            "inclination": _offset6(pose_state.inclination),
            "imu_auto": _offset6(pose_state.imu_auto),
            "walk_plane": _offset6(pose_state.walk_plane),
            "combined": pose_state.offset6.copy(),
        }
        snap = Snapshot(
            tick=self.tick_count,
            sim_time=self.tick_count * dt,
            mode=self.mode.value,
            gait=self.walk.timing.gait.name,
            walk_state=self.walk.state.value,
            velocity_command=self.velocity_command.copy(),
            velocity_limited=np.asarray(v_lim, dtype=float).copy(),
            body_pose=pose_state.body.copy(),
            pose_offsets=offsets,
            legs=leg_snaps,
            clamp_events=sum(d.clamp_events for d in self.drivers.values()),
            legipulating=sorted(self.walk.overrides))
        self.tick_count += 1
        return snap

    def _leg_force_z(self, leg: LegSpec, sensors: SensorFrame) -> float:
        if sensors.contact_forces is not None and leg.id in sensors.contact_forces:
            return float(sensors.contact_forces[leg.id])
        if sensors.joint_torques is not None and leg.id in sensors.joint_torques:
            wrench, _ = tip_force_estimate(leg, self.drivers[leg.id].q,
                                           sensors.joint_torques[leg.id],
                                           self.robot.ik_lambda)
            return float(wrench[2])
        return 0.0


def _offset6(pose: np.ndarray) -> np.ndarray:
    xyz, rpy = transforms.to_xyz_rpy(pose)
    return np.concatenate([xyz, rpy])
