"""The recorded protocol fixtures that drive the browser console tests
must also validate against the server's own schemas: one file, both
sides."""

import json
from pathlib import Path

import pytest

from hexgait.service import schemas

FIXTURES = Path(__file__).parent.parent / "frontend" / "test" / "fixtures" / "frames.json"


@pytest.fixture(scope="module")
def doc():
    if not FIXTURES.exists():
        pytest.skip("frontend fixtures not recorded")
    return json.loads(FIXTURES.read_text())


def test_hello_fixture_validates(doc):
    hello = schemas.Hello.model_validate(doc["hello"])
    assert len(hello.robot.legs) == 6
    assert "tripod" in hello.gaits


def test_state_fixtures_validate(doc):
    for group in ("frames_walk_forward", "frames_wave", "frames_legipulate"):
        for frame in doc[group]:
            msg = schemas.StateMessage.model_validate(frame)
            assert len(msg.legs) == 6


def test_command_fixtures_validate(doc):
    for cmd in doc["commands"]:
        parsed = schemas.parse_command(cmd)
        assert parsed.type == cmd["type"]


def test_fixture_behaviour_matches_recording(doc):
    walk = doc["frames_walk_forward"]
    assert walk[-1]["body"]["world_xyz"][0] > walk[0]["body"]["world_xyz"][0]
    assert {f["gait"] for f in doc["frames_wave"]} == {"wave"}
    lift = doc["frames_legipulate"]
    z = [next(l for l in f["legs"] if l["id"] == 1)["tip_body"][2] for f in lift]
    assert z[-1] > z[0]
