"""Closed-loop runs: controller plus kinematic world plus energy metrics,
driven either programmatically or by a timed command script.

Script format (one event per line, executed when sim time reaches t):

    t=<seconds> velocity <vx> <vy> <wz>
    t=<seconds> pose_velocity <vx> <vy> <vz> <wx> <wy> <wz>
    t=<seconds> gait <name>
    t=<seconds> mode <startup|shutdown>
    t=<seconds> legipulate <leg_id> velocity <vx> <vy> <vz>
    t=<seconds> legipulate <leg_id> pose <x> <y> <z>
    t=<seconds> legipulate <leg_id> off
    t=<seconds> param <step_frequency|...> <value>

Lines starting with '#' and blank lines are ignored.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import sim as simlib
from . import transforms
from .model import GaitSpec, RobotSpec
from .robotctrl import Mode, RobotController, SensorFrame
from .walkctrl import LegOverride, LegState
from .workspace import Walkspace


@dataclass
class ScriptEvent:
    time: float
    kind: str
    args: list[str]


class ScriptError(ValueError):
    pass


def parse_script(text: str) -> list[ScriptEvent]:
    events = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if not parts[0].startswith("t="):
            raise ScriptError(f"line {lineno}: expected 't=<seconds>', got {parts[0]!r}")
        try:
            t = float(parts[0][2:])
        except ValueError:
            raise ScriptError(f"line {lineno}: bad time {parts[0]!r}") from None
        if len(parts) < 2:
            raise ScriptError(f"line {lineno}: missing event name")
        events.append(ScriptEvent(t, parts[1], parts[2:]))
    events.sort(key=lambda e: e.time)
    return events


@dataclass
class RunLog:
    times: list[float] = field(default_factory=list)
    body_xyz: list[np.ndarray] = field(default_factory=list)
    body_rpy: list[np.ndarray] = field(default_factory=list)
    powers: list[float] = field(default_factory=list)
    records: list[simlib.EnergyRecord] = field(default_factory=list)
    clamp_events: int = 0
    slip_events: int = 0
    pin_residual_max: float = 0.0
    joint_rows: list[list[float]] = field(default_factory=list)

    def distance(self) -> float:
        if len(self.body_xyz) < 2:
            return 0.0
        return float(np.linalg.norm((self.body_xyz[-1] - self.body_xyz[0])[:2]))

    def path_length(self) -> float:
        return self.records[-1].distance if self.records else 0.0


class SimRun:
    """One controller+world instance advanced tick by tick."""

    def __init__(self, robot: RobotSpec, gait: GaitSpec,
                 walkspace: Walkspace | None = None,
                 tick_rate: float = 200.0,
                 world: simlib.SimWorld | None = None,
                 gait_library: dict[str, GaitSpec] | None = None,
                 imu_noise: float = 0.0, seed: int = 0,
                 start_mode: Mode = Mode.READY):
        self.robot = robot
        self.world = world or simlib.SimWorld()
        self.controller = RobotController(robot, gait, walkspace,
                                          tick_rate=tick_rate,
                                          start_mode=start_mode)
        self.sim = simlib.KinematicSim(robot, self.world)
        self.gaits = gait_library or {}
        self.tick_rate = tick_rate
        self.dt = 1.0 / tick_rate
        self.imu_noise = imu_noise
        self.rng = np.random.default_rng(seed)
        self.time = 0.0
        self.distance = 0.0
        self.last_power = 0.0
        self._prev_xy = self.sim.body_pose[:2, 3].copy()
        self._prev_q = {leg.id: self.controller.drivers[leg.id].q.copy()
                        for leg in robot.legs}
        self._sensors = SensorFrame()

    def apply_event(self, ev: ScriptEvent):
        c = self.controller
        if ev.kind == "velocity":
            c.set_velocity([float(x) for x in ev.args[:3]])
        elif ev.kind == "pose_velocity":
            c.set_pose_velocity([float(x) for x in ev.args[:6]])
        elif ev.kind == "gait":
            name = ev.args[0]
            if name not in self.gaits:
                raise ScriptError(f"unknown gait {name!r}")
            c.select_gait(self.gaits[name])
        elif ev.kind == "mode":
            c.request_mode({"startup": "starting",
                            "shutdown": "shutting_down"}[ev.args[0]])
        elif ev.kind == "legipulate":
            leg_id = int(ev.args[0])
            if ev.args[1] == "off":
                c.set_leg_override(leg_id, None)
            elif ev.args[1] == "velocity":
                c.set_leg_override(leg_id, LegOverride(
                    "velocity", np.array([float(x) for x in ev.args[2:5]])))
            elif ev.args[1] == "pose":
                c.set_leg_override(leg_id, LegOverride(
                    "pose", np.array([float(x) for x in ev.args[2:5]])))
            else:
                raise ScriptError(f"unknown legipulate action {ev.args[1]!r}")
        elif ev.kind == "param":
            name, value = ev.args[0], float(ev.args[1])
            if name == "step_frequency":
                c.set_step_frequency(value)
            elif name == "admittance_enabled":
                self.robot.admittance.enabled = bool(value)
            else:
                raise ScriptError(f"unknown parameter {name!r}")
        else:
            raise ScriptError(f"unknown event {ev.kind!r}")

    def tick(self, log: RunLog | None = None):
        snap = self.controller.tick(self._sensors)
        q_by_leg = {ls.leg_id: ls.q for ls in snap.legs}
        if self.controller.mode is Mode.WALKING:
            stance = {ls.leg_id for ls in snap.legs if ls.phase == "stance"}
        elif self.controller.mode in (Mode.READY, Mode.SHUTTING_DOWN):
            # a manually manipulated leg is lifted out of the support set
            stance = {leg.id for leg in self.robot.legs} - set(snap.legipulating)
        else:
            stance = set()
        slipping = {ls.leg_id for ls in snap.legs
                    if ls.clamped and ls.leg_id in stance}
        result = self.sim.step(q_by_leg, stance, slipping)

        torques = simlib.static_torques(self.robot, q_by_leg,
                                        stance if self.world.grounded else set(),
                                        result.body_pose[:3, :3],
                                        self.world.gravity)
        # servo effort follows the rates the tracker ASKS for: a joint
        # pinned at its velocity limit keeps drawing effort for the motion
        # it cannot realize (commanded rates equal realized ones whenever
        # no clamping occurs)
        rates = {ls.leg_id: ls.desired_rates for ls in snap.legs}
        self._prev_q = {lid: q.copy() for lid, q in q_by_leg.items()}
        power = simlib.power_model(torques, rates, self.robot.power)
        self.last_power = power

        xy = result.body_pose[:2, 3]
        self.distance += float(np.linalg.norm(xy - self._prev_xy))
        self._prev_xy = xy.copy()
        self.time += self.dt

        roll, pitch = simlib.imu_sim(result.body_pose, self.imu_noise, self.rng)
        contact_forces = {}
        share = self.robot.mass * self.world.gravity / max(len(stance), 1)
        for leg in self.robot.legs:
            contact_forces[leg.id] = share if (leg.id in stance
                                               and self.world.grounded) else 0.0
        # contacts for the walk-plane estimate, in the body heading frame
        xyz, rpy = transforms.to_xyz_rpy(result.body_pose)
        unyaw = transforms.rot_z(-rpy[2])[:3, :3]
        contact_points = {lid: unyaw @ (result.tips_world[lid]
                                        - np.array([xyz[0], xyz[1], 0.0]))
                          for lid, hit in result.contacts.items() if hit}
        self._sensors = SensorFrame(imu_roll=roll, imu_pitch=pitch,
                                    joint_torques=torques,
                                    contact_forces=contact_forces,
                                    contact_points=contact_points)

        if log is not None:
            xyz, rpy = transforms.to_xyz_rpy(result.body_pose)
            log.times.append(self.time)
            log.body_xyz.append(xyz)
            log.body_rpy.append(rpy)
            log.powers.append(power)
            speed = float(np.linalg.norm(self.controller.velocity_command[:2]))
            log.records.append(simlib.EnergyRecord(self.time, power,
                                                   speed, self.distance))
            log.clamp_events = snap.clamp_events
            log.slip_events += len(result.slipped)
            log.pin_residual_max = max(log.pin_residual_max, result.pin_residual)
            log.joint_rows.append(
                [self.time] + [float(v) for ls in snap.legs for v in ls.q])
        return snap, result

    def run(self, duration: float, events: list[ScriptEvent] | None = None,
            log: RunLog | None = None) -> RunLog:
        log = log if log is not None else RunLog()
        events = sorted(events or [], key=lambda e: e.time)
        idx = 0
        ticks = int(round(duration * self.tick_rate))
        for _ in range(ticks):
            while idx < len(events) and events[idx].time <= self.time + 1e-12:
                self.apply_event(events[idx])
                idx += 1
            self.tick(log)
        return log


def cruise_distance(robot: RobotSpec, gait: GaitSpec, walkspace, velocity,
                    duration: float, tick_rate: float = 200.0) -> RunLog:
    """Plain cruise: command a constant velocity and run for `duration`."""
    run = SimRun(robot, gait, walkspace, tick_rate=tick_rate)
    run.controller.set_velocity(velocity)
    return run.run(duration)


def sweep_step_frequency(robot: RobotSpec, gait: GaitSpec, walkspace,
                         stride_length: float, frequencies,
                         settle_time: float = 2.0, measure_time: float = 6.0,
                         tick_rate: float = 100.0) -> list[dict]:
    """Hold the stride fixed and sweep the step frequency; the commanded
    speed follows stride * f / duty. Reports measured speed and the cost
    of transport per frequency."""
    rows = []
    for f_s in frequencies:
        v = stride_length * f_s / gait.duty_factor
        run = SimRun(robot, gait, walkspace, tick_rate=tick_rate)
        run.controller.set_step_frequency(f_s)
        run.controller.set_velocity([v, 0.0, 0.0])
        run.run(settle_time)
        log = run.run(measure_time)
        # tracked speed over the measurement window: net straight-line
        # displacement (the external-tracking view; thrash from slipped
        # contacts does not count as progress)
        elapsed = log.times[-1] - log.times[0]
        net = float(np.linalg.norm((log.body_xyz[-1] - log.body_xyz[0])[:2]))
        measured_v = net / elapsed
        mean_power = float(np.mean(log.powers))
        cot = mean_power / (robot.mass * run.world.gravity * measured_v) \
            if measured_v > 1e-9 else float("inf")
        rows.append({"step_frequency": f_s, "commanded_speed": v,
                     "measured_speed": measured_v, "cot": cot,
                     "mean_power": mean_power,
                     "clamp_events": log.clamp_events,
                     "slip_events": log.slip_events})
    return rows


# ---------------------------------------------------------------------------
# CSV export helpers (shared by the CLI and the service)

def write_run_csv(path: Path, log: RunLog, robot: RobotSpec):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        header = ["time", "x", "y", "z", "roll", "pitch", "yaw",
                  "power", "distance"]
        w.writerow(header)
        for i, t in enumerate(log.times):
            w.writerow([f"{t:.6f}",
                        *(f"{v:.9f}" for v in log.body_xyz[i]),
                        *(f"{v:.9f}" for v in log.body_rpy[i]),
                        f"{log.powers[i]:.6f}",
                        f"{log.records[i].distance:.9f}"])


def write_joint_csv(path: Path, log: RunLog, robot: RobotSpec):
    names = [f"leg{leg.id}_{j.name}" for leg in robot.legs for j in leg.joints]
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["time"] + names)
        for row in log.joint_rows:
            w.writerow([f"{v:.9f}" for v in row])


def write_sweep_csv(path: Path, rows: list[dict]):
    if not rows:
        return
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=list(rows[0]))
        w.writeheader()
        for row in rows:
            w.writerow({k: (f"{v:.9f}" if isinstance(v, float) else v)
                        for k, v in row.items()})
