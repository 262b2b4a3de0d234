"""FastAPI service hosting the live controller.

The control loop runs in its own thread at the configured tick rate;
network intake never touches controller state directly. The two meeting
points are bounded: a command queue (reject-newest on overflow) drained
at the start of every tick, and a latest-snapshot slot the broadcaster
reads at the stream rate (effectively drop-oldest). A dead-man watchdog
zeroes the commanded velocities when no command has arrived for the
configured timeout.
"""

from __future__ import annotations

import asyncio
import collections
import contextlib
import json
import queue
import threading
import time
from pathlib import Path

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import HTMLResponse
from fastapi.staticfiles import StaticFiles
from pydantic import ValidationError

from .. import runner as rn
from .. import sim as simlib
from .. import transforms
from ..model import GaitSpec, RobotSpec, default_gait_library
from ..robotctrl import Mode
from ..walkctrl import LegOverride
from ..workspace import SearchParams, Walkspace, compute_workspaces, derive_walkspace
from . import schemas

DEADMAN_TIMEOUT = 0.5      # s without commands before velocities zero
STREAM_RATE = 20.0         # Hz of the state broadcast
COMMAND_QUEUE_SIZE = 64
SEND_TIMEOUT = 0.5         # s; slower consumers are dropped


class TeleopService:
    """Owns the simulation loop thread and the client-facing state."""

    def __init__(self, robot: RobotSpec, gaits: dict[str, GaitSpec],
                 walkspace: Walkspace, tick_rate: float = 200.0,
                 stream_rate: float = STREAM_RATE,
                 deadman_timeout: float = DEADMAN_TIMEOUT,
                 realtime: bool = True, seed: int = 0):
        self.robot = robot
        self.gaits = gaits
        self.walkspace = walkspace
        self.tick_rate = tick_rate
        self.stream_rate = stream_rate
        self.deadman_timeout = deadman_timeout
        self.realtime = realtime
        self.run = rn.SimRun(robot, gaits["tripod"], walkspace,
                             tick_rate=tick_rate, gait_library=gaits, seed=seed)
        self.commands: queue.Queue = queue.Queue(maxsize=COMMAND_QUEUE_SIZE)
        self._snapshot_lock = threading.Lock()
        self._snapshot: dict | None = None
        self._snapshot_seq = 0
        self._last_command_time = None
        self._deadman_active = False
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        self._power_window: collections.deque = collections.deque(
            maxlen=int(5.0 * tick_rate))
        self._distance_window: collections.deque = collections.deque(
            maxlen=int(5.0 * tick_rate))
        self.hello = self._build_hello()

    # -- lifecycle -----------------------------------------------------------

    def start(self):
        self._thread = threading.Thread(target=self._loop, daemon=True)
        self._thread.start()

    def stop(self):
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5.0)

    # -- command intake (any thread) ------------------------------------------

    def submit(self, cmd: schemas.CommandMessage) -> bool:
        """Queue a validated command; False when the mailbox is full."""
        try:
            self.commands.put_nowait(cmd)
        except queue.Full:
            return False
        return True

    # -- tick thread -----------------------------------------------------------

    def _apply(self, cmd: schemas.CommandMessage):
        c = self.run.controller
        if cmd.type == "velocity":
            # the walk uses planar x/y and yaw rate; the rest is ignored
            c.set_velocity([cmd.linear[0], cmd.linear[1], cmd.angular[2]])
        elif cmd.type == "pose_velocity":
            c.set_pose_velocity(list(cmd.linear) + list(cmd.angular))
        elif cmd.type == "gait_select":
            if cmd.gait not in self.gaits:
                raise ValueError(f"unknown gait {cmd.gait!r}")
            c.select_gait(self.gaits[cmd.gait])
        elif cmd.type == "mode":
            c.request_mode({"startup": "starting",
                            "shutdown": "shutting_down"}[cmd.mode])
        elif cmd.type == "legipulate":
            leg = self.robot.leg_by_id(cmd.leg)
            if cmd.action == "off":
                c.set_leg_override(cmd.leg, None)
            else:
                vec = np.asarray(cmd.vector or [0.0, 0.0, 0.0])
                if cmd.frame == "leg":
                    if cmd.action == "velocity":
                        vec = transforms.rotate(leg.base_frame, vec)
                    else:
                        vec = transforms.apply(leg.base_frame, vec)
                c.set_leg_override(cmd.leg, LegOverride(cmd.action, vec))
        elif cmd.type == "params":
            for name, value in cmd.params.items():
                if name == "step_frequency":
                    c.set_step_frequency(value)
                else:
                    raise ValueError(f"unknown parameter {name!r}")

    def _loop(self):
        dt = 1.0 / self.tick_rate
        decimate = max(1, int(round(self.tick_rate / self.stream_rate)))
        next_deadline = time.monotonic()
        while not self._stop.is_set():
            # drain the command mailbox
            while True:
                try:
                    cmd = self.commands.get_nowait()
                except queue.Empty:
                    break
                try:
                    self._apply(cmd)
                    self._last_command_time = time.monotonic()
                    self._deadman_active = False
                except (ValueError, KeyError, RuntimeError):
                    pass  # already validated at intake; runtime refusals drop

            if (self._last_command_time is not None and not self._deadman_active
                    and time.monotonic() - self._last_command_time
                    > self.deadman_timeout):
                self.run.controller.set_velocity([0.0, 0.0, 0.0])
                self.run.controller.set_pose_velocity(np.zeros(6))
                self._deadman_active = True

            snap, result = self.run.tick()
            power = self._tick_power()
            if snap.tick % decimate == 0:
                payload = self._state_payload(snap, result, power)
                with self._snapshot_lock:
                    self._snapshot = payload
                    self._snapshot_seq += 1

            if self.realtime:
                next_deadline += dt
                delay = next_deadline - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
                else:
                    next_deadline = time.monotonic()

    def _tick_power(self) -> float:
        power = self.run.last_power
        self._power_window.append(power)
        self._distance_window.append((self.run.time, self.run.distance))
        return power

    def rolling_cot(self) -> float | None:
        if len(self._distance_window) < 2:
            return None
        (t0, d0), (t1, d1) = self._distance_window[0], self._distance_window[-1]
        if t1 <= t0 or d1 - d0 <= 1e-6:
            return None
        mean_power = float(np.mean(self._power_window))
        speed = (d1 - d0) / (t1 - t0)
        return mean_power / (self.robot.mass * self.run.world.gravity * speed)

    # -- snapshots -------------------------------------------------------------

    def latest(self) -> tuple[int, dict | None]:
        with self._snapshot_lock:
            return self._snapshot_seq, self._snapshot

    def _build_hello(self) -> dict:
        ws = self.walkspace
        max_stride = 2.0 * min(ws.radius_at(0.0), ws.radius_at(np.pi))
        beta = self.gaits["tripod"].duty_factor
        f_s = self.robot.step_frequency
        radius = max(float(np.hypot(*leg.default_tip[:2]))
                     for leg in self.robot.legs)
        hello = schemas.Hello(
            robot=schemas.RobotInfo(
                name=self.robot.name,
                mass=self.robot.mass,
                body_clearance=self.robot.body_clearance,
                step_clearance=self.robot.step_clearance,
                legs=[schemas.LegInfo(
                    id=leg.id,
                    joint_names=[j.name for j in leg.joints],
                    base_xy=[leg.base_xyz[0], leg.base_xyz[1]],
                    default_tip=list(leg.default_tip_position),
                ) for leg in self.robot.legs]),
            gaits=sorted(self.gaits),
            walkspace=[[float(b), float(r)]
                       for b, r in zip(ws.bearings, ws.radii)],
            limits=schemas.Limits(
                max_linear_speed=max_stride * f_s / beta,
                max_angular_speed=max_stride * f_s / beta / radius,
                max_translation=list(self.robot.max_translation),
                max_rotation=list(self.robot.max_rotation)),
            tick_rate=self.tick_rate,
            stream_rate=self.stream_rate)
        return hello.model_dump()

    def _state_payload(self, snap, result, power: float) -> dict:
        xyz, rpy = transforms.to_xyz_rpy(result.body_pose)
        speed = 0.0
        if len(self._distance_window) >= 2:
            (t0, d0), (t1, d1) = self._distance_window[0], self._distance_window[-1]
            if t1 > t0:
                speed = (d1 - d0) / (t1 - t0)
        msg = schemas.StateMessage(
            tick=snap.tick,
            sim_time=snap.sim_time,
            mode=snap.mode,
            gait=snap.gait,
            walk_state=snap.walk_state,
            body=schemas.BodyState(
                world_xyz=[float(v) for v in xyz],
                world_rpy=[float(v) for v in rpy],
                offsets={k: [float(x) for x in v]
                         for k, v in snap.pose_offsets.items()}),
            legs=[schemas.LegState(
                id=ls.leg_id,
                joints=[float(v) for v in ls.q],
                tip_body=[float(v) for v in ls.tip_achieved],
                tip_world=[float(v) for v in result.tips_world[ls.leg_id]],
                phase=ls.phase,
                phase_t=float(ls.phase_t),
                contact=bool(result.contacts.get(ls.leg_id, False)),
                clamped=bool(ls.clamped),
            ) for ls in snap.legs],
            metrics=schemas.Metrics(
                power=float(power),
                cot=self.rolling_cot(),
                commanded_velocity=[float(v) for v in snap.velocity_command],
                limited_velocity=[float(v) for v in snap.velocity_limited],
                speed=float(speed),
                distance=float(self.run.distance)),
            legipulating=list(snap.legipulating))
        return msg.model_dump()


def create_app(robot: RobotSpec, gaits: dict[str, GaitSpec] | None = None,
               tick_rate: float = 200.0, stream_rate: float = STREAM_RATE,
               deadman_timeout: float = DEADMAN_TIMEOUT,
               cache_dir: str | Path | None = None,
               ui_dir: str | Path | None = None,
               seed: int = 0,
               search: SearchParams | None = None) -> FastAPI:
    """Build the service around a loaded robot description."""
    gaits = gaits or {g.name: g for g in default_gait_library()}
    search = search or SearchParams()
    workspaces = compute_workspaces(robot, search, cache_dir=cache_dir)
    walkspace = derive_walkspace(robot, workspaces)
    service = TeleopService(robot, gaits, walkspace, tick_rate=tick_rate,
                            stream_rate=stream_rate,
                            deadman_timeout=deadman_timeout, seed=seed)

    @contextlib.asynccontextmanager
    async def lifespan(_app: FastAPI):
        service.start()
        try:
            yield
        finally:
            service.stop()

    app = FastAPI(title="hexgait teleop service", lifespan=lifespan)
    app.state.service = service

    @app.get("/state")
    def get_state():
        seq, snapshot = service.latest()
        return {"hello": service.hello, "seq": seq, "state": snapshot}

    @app.get("/healthz")
    def healthz():
        return {"ok": True, "tick": service.run.controller.tick_count}

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        await ws.send_text(json.dumps(service.hello))
        last_seq = 0
        stop = asyncio.Event()

        async def receiver():
            nonlocal last_seq
            while not stop.is_set():
                try:
                    raw = await ws.receive_text()
                except WebSocketDisconnect:
                    stop.set()
                    return
                try:
                    payload = json.loads(raw)
                except json.JSONDecodeError:
                    await ws.send_text(schemas.ErrorReply(
                        detail="malformed JSON").model_dump_json())
                    continue
                try:
                    cmd = schemas.parse_command(payload)
                except ValidationError as e:
                    await ws.send_text(schemas.ErrorReply(
                        seq=payload.get("seq") if isinstance(payload, dict) else None,
                        detail=f"invalid command: {e.errors()[0]['msg']}",
                    ).model_dump_json())
                    continue
                if cmd.seq <= last_seq:
                    await ws.send_text(schemas.ErrorReply(
                        seq=cmd.seq, detail="stale sequence number").model_dump_json())
                    continue
                last_seq = cmd.seq
                if not service.submit(cmd):
                    await ws.send_text(schemas.ErrorReply(
                        seq=cmd.seq, detail="command queue full").model_dump_json())
                    continue
                await ws.send_text(schemas.Ack(seq=cmd.seq).model_dump_json())

        async def sender():
            sent_seq = 0
            interval = 1.0 / service.stream_rate
            while not stop.is_set():
                seq, snapshot = service.latest()
                if snapshot is not None and seq != sent_seq:
                    sent_seq = seq
                    try:
                        await asyncio.wait_for(
                            ws.send_text(json.dumps(snapshot)),
                            timeout=SEND_TIMEOUT)
                    except (asyncio.TimeoutError, WebSocketDisconnect,
                            RuntimeError):
                        stop.set()
                        return
                await asyncio.sleep(interval / 2.0)

        recv_task = asyncio.create_task(receiver())
        send_task = asyncio.create_task(sender())
        try:
            await asyncio.wait({recv_task, send_task},
                               return_when=asyncio.FIRST_COMPLETED)
        finally:
            stop.set()
            for task in (recv_task, send_task):
                task.cancel()

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True),
                  name="console")
    else:
        @app.get("/", response_class=HTMLResponse)
        def index():
            return ("<html><body><h1>hexgait teleop service</h1>"
                    "<p>WebSocket endpoint at <code>/ws</code>, snapshot at "
                    "<code>/state</code>. Build the browser console under "
                    "<code>frontend/</code> and serve it with --ui-dir.</p>"
                    "</body></html>")

    return app
