import json
import time
from importlib import resources

import numpy as np
import pytest
from fastapi.testclient import TestClient

from hexgait.model import packaged_robot, default_gait_library
from hexgait.service import create_app
from hexgait.service import schemas
from hexgait.workspace import SearchParams


PROTOCOL = json.loads(
    resources.files("hexgait.protocol").joinpath("teleop.json").read_text())


@pytest.fixture(scope="module")
def app(tmp_path_factory):
    robot = packaged_robot("hexapod_sprawled")
    gaits = {g.name: g for g in default_gait_library()}
    return create_app(robot, gaits, tick_rate=100.0, deadman_timeout=0.5,
                      cache_dir=tmp_path_factory.mktemp("ws_cache"),
                      search=SearchParams(bearing_step=np.deg2rad(15.0)))


@pytest.fixture(scope="module")
def client(app):
    with TestClient(app) as c:
        yield c


# ---------------------------------------------------------------------------
# schema freeze and round trips

def test_command_schemas_match_protocol_file():
    models = {"velocity": schemas.VelocityCommand,
              "pose_velocity": schemas.PoseVelocityCommand,
              "gait_select": schemas.GaitSelectCommand,
              "mode": schemas.ModeCommand,
              "legipulate": schemas.LegipulateCommand,
              "params": schemas.ParamsCommand}
    assert set(models) == set(PROTOCOL["commands"])
    for name, cls in models.items():
        assert set(cls.model_fields) == set(PROTOCOL["commands"][name]), name


def test_reply_and_state_schemas_match_protocol_file():
    assert set(schemas.Ack.model_fields) == set(PROTOCOL["replies"]["ack"])
    assert set(schemas.ErrorReply.model_fields) == set(PROTOCOL["replies"]["error"])
    assert set(schemas.Hello.model_fields) == set(PROTOCOL["hello"])
    assert set(schemas.RobotInfo.model_fields) == set(PROTOCOL["hello_robot"])
    assert set(schemas.LegInfo.model_fields) == set(PROTOCOL["hello_leg"])
    assert set(schemas.Limits.model_fields) == set(PROTOCOL["hello_limits"])
    assert set(schemas.StateMessage.model_fields) == set(PROTOCOL["state"])
    assert set(schemas.BodyState.model_fields) == set(PROTOCOL["state_body"])
    assert set(schemas.LegState.model_fields) == set(PROTOCOL["state_leg"])
    assert set(schemas.Metrics.model_fields) == set(PROTOCOL["state_metrics"])


def test_state_message_round_trip():
    msg = schemas.StateMessage(
        tick=7, sim_time=0.07, mode="walking", gait="tripod",
        walk_state="moving",
        body=schemas.BodyState(world_xyz=[0.1, 0, 0.2], world_rpy=[0, 0, 0],
                               offsets={"manual": [0.0] * 6,
                                        "inclination": [0.0] * 6,
                                        "imu_auto": [0.0] * 6,
                                        "walk_plane": [0.0] * 6,
                                        "combined": [0.0] * 6}),
        legs=[schemas.LegState(id=1, joints=[0.1, 0.2], tip_body=[0.3, 0, -0.2],
                               tip_world=[0.4, 0, 0], phase="stance",
                               phase_t=0.5, contact=True, clamped=False)],
        metrics=schemas.Metrics(power=42.0, cot=2.0,
                                commanded_velocity=[0.2, 0, 0],
                                limited_velocity=[0.2, 0, 0],
                                speed=0.2, distance=1.5))
    again = schemas.StateMessage.model_validate_json(msg.model_dump_json())
    assert again == msg


def test_command_validation_rejects_nan_and_unknown():
    with pytest.raises(Exception):
        schemas.parse_command({"type": "velocity", "seq": 1,
                               "linear": [float("nan"), 0, 0],
                               "angular": [0, 0, 0]})
    with pytest.raises(Exception):
        schemas.parse_command({"type": "warp_drive", "seq": 1})
    ok = schemas.parse_command({"type": "velocity", "seq": 1,
                                "linear": [0.1, 0, 0], "angular": [0, 0, 0]})
    assert ok.type == "velocity"


# ---------------------------------------------------------------------------
# HTTP surface

def test_get_state_and_healthz(client):
    r = client.get("/state")
    assert r.status_code == 200
    doc = r.json()
    assert doc["hello"]["type"] == "hello"
    assert set(doc["hello"]) == set(PROTOCOL["hello"])
    assert len(doc["hello"]["walkspace"]) >= 8
    assert doc["hello"]["robot"]["name"] == "hexapod_sprawled"
    assert client.get("/healthz").json()["ok"] is True


# ---------------------------------------------------------------------------
# websocket behaviour

def _recv_until(ws, predicate, timeout=5.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        msg = json.loads(ws.receive_text())
        if predicate(msg):
            return msg
    raise TimeoutError("condition not met")


def test_connect_receives_hello_then_states(client):
    with client.websocket_connect("/ws") as ws:
        hello = json.loads(ws.receive_text())
        assert hello["type"] == "hello"
        assert [leg["id"] for leg in hello["robot"]["legs"]] == [1, 2, 3, 4, 5, 6]
        state = _recv_until(ws, lambda m: m["type"] == "state")
        assert set(state) == set(PROTOCOL["state"])
        assert set(state["legs"][0]) == set(PROTOCOL["state_leg"])


def test_velocity_command_starts_walking(client):
    # velocity is streamed the way a console would (the dead-man watchdog
    # zeroes a command that is not refreshed)
    with client.websocket_connect("/ws") as ws:
        json.loads(ws.receive_text())  # hello
        seq = 0
        start = None
        moved = False
        sent_first = time.monotonic()
        last_send = 0.0
        deadline = sent_first + 4.0   # two tripod cycles is 2 s
        while time.monotonic() < deadline:
            now = time.monotonic()
            if now - last_send > 0.1:
                seq += 1
                ws.send_text(json.dumps({"type": "velocity", "proto": 1,
                                         "seq": seq,
                                         "linear": [0.2, 0.0, 0.0],
                                         "angular": [0.0, 0.0, 0.0]}))
                last_send = now
            msg = json.loads(ws.receive_text())
            if msg["type"] != "state":
                continue
            x = msg["body"]["world_xyz"][0]
            if start is None:
                start = x
            if abs(x - start) > 0.02:
                moved = True
                break
        assert moved
        assert time.monotonic() - sent_first < 4.0
        # stop again so later tests start from standstill
        seq += 1
        ws.send_text(json.dumps({"type": "velocity", "proto": 1, "seq": seq,
                                 "linear": [0, 0, 0], "angular": [0, 0, 0]}))
        _recv_until(ws, lambda m: m["type"] == "ack")


def test_malformed_and_invalid_commands_keep_session(client):
    with client.websocket_connect("/ws") as ws:
        json.loads(ws.receive_text())
        ws.send_text("this is not json{")
        err = _recv_until(ws, lambda m: m["type"] == "error")
        assert "JSON" in err["detail"]
        ws.send_text(json.dumps({"type": "velocity", "proto": 1, "seq": 1,
                                 "linear": [float("inf"), 0, 0],
                                 "angular": [0, 0, 0]}))
        err = _recv_until(ws, lambda m: m["type"] == "error")
        assert err["seq"] == 1
        # session still alive: a valid command still acks
        ws.send_text(json.dumps({"type": "gait_select", "proto": 1, "seq": 2,
                                 "gait": "wave"}))
        ack = _recv_until(ws, lambda m: m["type"] == "ack")
        assert ack["seq"] == 2
        ws.send_text(json.dumps({"type": "gait_select", "proto": 1, "seq": 3,
                                 "gait": "tripod"}))
        _recv_until(ws, lambda m: m["type"] == "ack")


def test_stale_sequence_rejected(client):
    with client.websocket_connect("/ws") as ws:
        json.loads(ws.receive_text())
        ws.send_text(json.dumps({"type": "params", "proto": 1, "seq": 5,
                                 "params": {"step_frequency": 1.0}}))
        _recv_until(ws, lambda m: m["type"] == "ack")
        ws.send_text(json.dumps({"type": "params", "proto": 1, "seq": 5,
                                 "params": {"step_frequency": 1.0}}))
        err = _recv_until(ws, lambda m: m["type"] == "error")
        assert "stale" in err["detail"]


def test_stream_rate_within_bounds(client):
    with client.websocket_connect("/ws") as ws:
        json.loads(ws.receive_text())
        _recv_until(ws, lambda m: m["type"] == "state")
        count = 0
        t0 = time.monotonic()
        while count < 30:
            msg = json.loads(ws.receive_text())
            if msg["type"] == "state":
                count += 1
        elapsed = time.monotonic() - t0
        rate = count / elapsed
        assert 18.0 <= rate <= 22.0


def test_deadman_zeroes_velocity(client):
    with client.websocket_connect("/ws") as ws:
        json.loads(ws.receive_text())
        ws.send_text(json.dumps({"type": "velocity", "proto": 1, "seq": 1,
                                 "linear": [0.15, 0.0, 0.0],
                                 "angular": [0.0, 0.0, 0.0]}))
        _recv_until(ws, lambda m: m["type"] == "ack")
        _recv_until(ws, lambda m: m["type"] == "state"
                    and m["metrics"]["commanded_velocity"][0] > 0.1)
        # silence: the watchdog must zero the command within 0.6 s
        t0 = time.monotonic()
        zeroed = _recv_until(
            ws, lambda m: m["type"] == "state"
            and abs(m["metrics"]["commanded_velocity"][0]) < 1e-9, timeout=2.0)
        assert time.monotonic() - t0 < 1.2
        assert zeroed["metrics"]["commanded_velocity"] == [0.0, 0.0, 0.0]


def test_command_queue_rejects_newest_on_overflow(app):
    service = app.state.service
    cmd = schemas.parse_command({"type": "params", "proto": 1, "seq": 999,
                                 "params": {"step_frequency": 1.0}})
    import queue as queue_mod
    full = queue_mod.Queue(maxsize=1)
    full.put_nowait(cmd)
    original = service.commands
    service.commands = full
    try:
        assert service.submit(cmd) is False
    finally:
        service.commands = original


def test_disconnect_leaves_other_sessions_running(client):
    with client.websocket_connect("/ws") as ws_a:
        json.loads(ws_a.receive_text())
        with client.websocket_connect("/ws") as ws_b:
            json.loads(ws_b.receive_text())
            _recv_until(ws_b, lambda m: m["type"] == "state")
        # b closed mid-stream; a keeps receiving fresh states
        t0 = _recv_until(ws_a, lambda m: m["type"] == "state")["tick"]
        t1 = _recv_until(ws_a, lambda m: m["type"] == "state"
                         and m["tick"] > t0)["tick"]
        assert t1 > t0
