"""Record authentic protocol frames from the live service into the
fixture file both test suites (server and console) validate against.

Run from the repository root:  python3 frontend/scripts/record_fixtures.py
"""

import json
import time
from pathlib import Path

import numpy as np
from fastapi.testclient import TestClient

from hexgait.model import default_gait_library, packaged_robot
from hexgait.service import create_app
from hexgait.workspace import SearchParams

OUT = Path(__file__).resolve().parent.parent / "test" / "fixtures" / "frames.json"


def collect(ws, n, predicate=lambda m: m["type"] == "state", limit=400):
    frames = []
    for _ in range(limit):
        msg = json.loads(ws.receive_text())
        if predicate(msg):
            frames.append(msg)
            if len(frames) >= n:
                break
    return frames


def main():
    robot = packaged_robot("hexapod_sprawled")
    gaits = {g.name: g for g in default_gait_library()}
    app = create_app(robot, gaits, tick_rate=100.0,
                     search=SearchParams(bearing_step=np.deg2rad(15.0)))
    doc = {"commands": [
        {"type": "velocity", "proto": 1, "seq": 1,
         "linear": [0.2, 0.0, 0.0], "angular": [0.0, 0.0, 0.0]},
        {"type": "pose_velocity", "proto": 1, "seq": 2,
         "linear": [0.0, 0.0, 0.01], "angular": [0.0, 0.0, 0.02]},
        {"type": "gait_select", "proto": 1, "seq": 3, "gait": "wave"},
        {"type": "mode", "proto": 1, "seq": 4, "mode": "startup"},
        {"type": "legipulate", "proto": 1, "seq": 5, "leg": 1,
         "action": "velocity", "vector": [0.0, 0.0, 0.05], "frame": "leg"},
        {"type": "legipulate", "proto": 1, "seq": 6, "leg": 1, "action": "off",
         "vector": None, "frame": "leg"},
        {"type": "params", "proto": 1, "seq": 7,
         "params": {"step_frequency": 1.5}},
    ]}
    with TestClient(app) as client:
        with client.websocket_connect("/ws") as ws:
            doc["hello"] = json.loads(ws.receive_text())
            seq = 0

            def stream_velocity(v, duration):
                nonlocal seq
                t0 = time.monotonic()
                frames = []
                last = 0.0
                while time.monotonic() - t0 < duration:
                    if time.monotonic() - last > 0.1:
                        seq += 1
                        ws.send_text(json.dumps(
                            {"type": "velocity", "proto": 1, "seq": seq,
                             "linear": [v, 0.0, 0.0], "angular": [0, 0, 0]}))
                        last = time.monotonic()
                    msg = json.loads(ws.receive_text())
                    if msg["type"] == "state":
                        frames.append(msg)
                return frames

            walk = stream_velocity(0.3, 3.5)
            doc["frames_walk_forward"] = walk[-16:]

            seq += 1
            ws.send_text(json.dumps({"type": "gait_select", "proto": 1,
                                     "seq": seq, "gait": "wave"}))
            wave = stream_velocity(0.1, 3.5)
            doc["frames_wave"] = wave[-16:]

            # stop, then manipulate leg 1 upward
            seq += 1
            ws.send_text(json.dumps({"type": "velocity", "proto": 1, "seq": seq,
                                     "linear": [0, 0, 0], "angular": [0, 0, 0]}))
            collect(ws, 1, lambda m: m["type"] == "state"
                    and m["mode"] == "ready", limit=1200)
            seq += 1
            ws.send_text(json.dumps({"type": "legipulate", "proto": 1,
                                     "seq": seq, "leg": 1, "action": "velocity",
                                     "vector": [0.0, 0.0, 0.04], "frame": "leg"}))
            doc["frames_legipulate"] = collect(ws, 16)

    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(doc, indent=1))
    print(f"wrote {OUT} "
          f"({len(doc['frames_walk_forward'])}/{len(doc['frames_wave'])}/"
          f"{len(doc['frames_legipulate'])} frames)")


if __name__ == "__main__":
    main()
