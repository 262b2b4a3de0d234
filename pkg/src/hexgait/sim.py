"""Quasi-static kinematic world closing the control loop.

Joint commands are applied instantly (ideal position servos). Grounded
stance feet are pinned: the body pose is re-solved every tick as the
rigid transform that keeps the pinned tips at their world anchor points
(weighted least-squares orthogonal fit, with a vanishing prior toward the
previous pose that only matters when fewer than three feet are pinned).
Swing feet follow the kinematics; a foot crossing the ground plane from
above generates a contact event.

Energetics are a static proxy: the body weight is split equally among the
stance legs, mapped to joint torques through the tip Jacobian, and power
is an idle draw plus torque-holding and mechanical-output terms. Absolute
watt numbers are not meaningful; trends across configurations, gaits and
step frequencies are.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kinematics as kin
from . import transforms
from .model import PowerParams, RobotSpec
from .robotctrl import Mode, RobotController, SensorFrame, Snapshot

GRAVITY = 9.81


@dataclass
class SimWorld:
    """Flat or uniformly inclined rigid ground; ideal no-slip contacts."""

    incline: float = 0.0          # rotation of the ground about +y (rad)
    gravity: float = GRAVITY
    grounded: bool = True         # False: robot held in the air (no contact)
    contact_tolerance: float = 0.01   # m; a foot this close to the plane lands

    def __post_init__(self):
        if abs(self.incline) >= np.pi / 2:
            raise ValueError("incline must be below 90 degrees")
        self.normal = transforms.rot_y(self.incline)[:3, :3] @ np.array([0.0, 0.0, 1.0])

    def plane_z(self, x: float, y: float) -> float:
        n = self.normal
        return (-(n[0] * x + n[1] * y)) / n[2]

    def snap_to_plane(self, point: np.ndarray) -> np.ndarray:
        return np.array([point[0], point[1], self.plane_z(point[0], point[1])])


def rigid_fit(body_points: np.ndarray, world_points: np.ndarray,
              weights: np.ndarray) -> np.ndarray:
    """Weighted least-squares rigid transform T with T @ b ~= w."""
    w = weights / weights.sum()
    b_bar = w @ body_points
    w_bar = w @ world_points
    h = (body_points - b_bar).T @ ((world_points - w_bar) * w[:, None])
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    r = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    t = np.eye(4)
    t[:3, :3] = r
    t[:3, 3] = w_bar - r @ b_bar
    return t


@dataclass
class EnergyRecord:
    time: float
    power: float                 # W
    speed: float                 # measured body speed, m/s
    distance: float              # cumulative planar path length, m


def cost_of_transport(records: list[EnergyRecord], mass: float,
                      gravity: float = GRAVITY) -> float:
    """Mean electrical power over weight times mean speed (dimensionless)."""
    if not records:
        raise ValueError("no energy records")
    distance = records[-1].distance - records[0].distance
    elapsed = records[-1].time - records[0].time
    if distance <= 0 or elapsed <= 0:
        raise ValueError("cost of transport undefined for zero distance")
    mean_power = float(np.mean([r.power for r in records]))
    return mean_power / (mass * gravity * (distance / elapsed))


def static_torques(robot: RobotSpec, q_by_leg: dict[int, np.ndarray],
                   stance_ids: set[int], body_rotation: np.ndarray,
                   gravity: float = GRAVITY) -> dict[int, np.ndarray]:
    """Joint torques holding the body weight, split equally across the
    stance legs (the standard quasi-static proxy; contact force
    distribution is statically indeterminate).

    With leg_link_mass = 0 airborne legs are massless and contribute
    nothing; a configured link mass hangs at the knee of every leg and
    adds its gravity holding torque (that makes fast swings cost power)."""
    out = {leg.id: np.zeros(leg.joint_count) for leg in robot.legs}
    share = robot.mass * gravity / len(stance_ids) if stance_ids else 0.0
    share_world = np.array([0.0, 0.0, share])
    for leg in robot.legs:
        q = q_by_leg[leg.id]
        tau = np.zeros(leg.joint_count)
        frames = kin.chain_frames(leg, q)
        if leg.id in stance_ids:
            # ground reaction force expressed in the leg frame
            f_body = body_rotation.T @ share_world
            f_leg = leg.base_frame_inv[:3, :3] @ f_body
            tau += kin.jacobian(leg, q, frames).T @ f_leg
        if robot.leg_link_mass > 0.0:
            point_index = min(3, leg.joint_count)
            g_world = np.array([0.0, 0.0, -robot.leg_link_mass * gravity])
            g_leg = leg.base_frame_inv[:3, :3] @ (body_rotation.T @ g_world)
            p = frames[point_index][:3, 3]
            axes = frames[:point_index, :3, 2]
            levers = p - frames[:point_index, :3, 3]
            jac_point = kin._cross_rows(axes, levers)   # point_index x 3
            tau[:point_index] += jac_point @ g_leg
        out[leg.id] = tau
    return out


def power_model(torques: dict[int, np.ndarray],
                joint_rates: dict[int, np.ndarray],
                params: PowerParams) -> float:
    """Idle draw plus holding (|tau|) and mechanical (|tau * omega|) terms."""
    p = params.idle
    for lid, tau in torques.items():
        p += params.k_hold * float(np.sum(np.abs(tau)))
        p += params.k_motion * float(np.sum(np.abs(tau * joint_rates[lid])))
    return p


def imu_sim(body_pose: np.ndarray, noise_std: float = 0.0,
            rng: np.random.Generator | None = None) -> tuple[float, float]:
    """Roll/pitch of the body relative to gravity, with optional noise."""
    _, rpy = transforms.to_xyz_rpy(body_pose)
    roll, pitch = float(rpy[0]), float(rpy[1])
    if noise_std > 0.0 and rng is not None:
        roll += rng.normal(0.0, noise_std)
        pitch += rng.normal(0.0, noise_std)
    return roll, pitch


@dataclass
class SimStepResult:
    body_pose: np.ndarray
    tips_world: dict[int, np.ndarray]
    contacts: dict[int, bool]
    pin_residual: float
    airborne: bool
    slipped: set[int] = field(default_factory=set)


class KinematicSim:
    """World state: body pose plus the pinned-foot anchor map."""

    def __init__(self, robot: RobotSpec, world: SimWorld | None = None):
        self.robot = robot
        self.world = world or SimWorld()
        n = self.world.normal
        origin = np.array([0.0, 0.0, 0.0])
        t = transforms.align_z_to(n)
        t[:3, 3] = origin + self.robot.body_clearance * n
        self.body_pose = t
        self.anchors: dict[int, np.ndarray] = {}
        self.prev_pose = self.body_pose.copy()
        self._last_tips_world: dict[int, np.ndarray] = {}
        if self.world.grounded:
            for leg in robot.legs:
                tip_b = self._tip_body(leg, leg.home_angles())
                tip_w = transforms.apply(self.body_pose, tip_b)
                self.anchors[leg.id] = self.world.snap_to_plane(tip_w)
                self._last_tips_world[leg.id] = tip_w

    def _tip_body(self, leg, q) -> np.ndarray:
        return transforms.apply(leg.base_frame, kin.tip_position(leg, q))

    def step(self, q_by_leg: dict[int, np.ndarray],
             stance_ids: set[int],
             slipping_ids: set[int] | None = None) -> SimStepResult:
        """Apply joint positions; re-solve the body pose so pinned tips
        stay on their anchors; track swing tips and contact events.

        slipping_ids marks grounded legs whose joints saturated while
        tracking: such a foot cannot hold its contact and is released for
        the tick (it re-anchors wherever it ends up once tracking
        recovers), the kinematic analogue of foot slip under clamping."""
        slipping = slipping_ids or set()
        tips_body = {leg.id: self._tip_body(leg, q_by_leg[leg.id])
                     for leg in self.robot.legs}
        for lid in slipping:
            self.anchors.pop(lid, None)
        if self.world.grounded:
            # pin legs entering stance where they stood BEFORE this tick's
            # command, so their first stance step already moves the body;
            # but only feet that actually reached the ground get pinned (a
            # leg lagging its trajectory mid-air carries no support)
            for lid in stance_ids:
                if lid in slipping:
                    continue
                if lid not in self.anchors and lid in self._last_tips_world:
                    tip = self._last_tips_world[lid]
                    gap = tip[2] - self.world.plane_z(tip[0], tip[1])
                    if gap <= self.world.contact_tolerance:
                        self.anchors[lid] = self.world.snap_to_plane(tip)
            pinned = [lid for lid in stance_ids if lid in self.anchors]
        else:
            pinned = []
        airborne = not pinned
        if pinned:
            b = np.array([tips_body[lid] for lid in pinned])
            w = np.array([self.anchors[lid] for lid in pinned])
            wt = np.ones(len(pinned))
            # vanishing prior toward the previous pose: only load-bearing
            # when fewer than three feet fix the rigid transform
            prior_b = np.array([[0.1, 0, 0], [0, 0.1, 0], [0, 0, 0.1],
                                [0.0, 0, 0]])
            prior_w = transforms.apply(self.prev_pose, prior_b)
            b = np.vstack([b, prior_b])
            w = np.vstack([w, prior_w])
            wt = np.concatenate([wt, np.full(4, 1e-6)])
            self.prev_pose = self.body_pose
            self.body_pose = rigid_fit(b, w, wt)

        tips_world = {lid: transforms.apply(self.body_pose, tb)
                      for lid, tb in tips_body.items()}
        residual = 0.0
        for lid in pinned:
            residual = max(residual, float(np.linalg.norm(
                tips_world[lid] - self.anchors[lid])))

        contacts_calc = {}
        for leg in self.robot.legs:
            lid = leg.id
            if not self.world.grounded:
                contacts_calc[lid] = False
                self.anchors.pop(lid, None)
                continue
            if lid in stance_ids:
                if lid not in self.anchors:
                    self.anchors[lid] = self.world.snap_to_plane(tips_world[lid])
                contacts_calc[lid] = True
            else:
                self.anchors.pop(lid, None)
                z_plane = self.world.plane_z(tips_world[lid][0], tips_world[lid][1])
                contacts_calc[lid] = bool(tips_world[lid][2] <= z_plane + 1e-9)
        self._last_tips_world = tips_world
        return SimStepResult(self.body_pose.copy(), tips_world,
                             contacts_calc, residual, airborne,
                             slipped=set(slipping) & stance_ids)
