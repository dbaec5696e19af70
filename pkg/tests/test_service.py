"""Scripted WebSocket client driving the live-control service."""
import json

import pytest
from starlette.testclient import TestClient

from softsim.episode import MAX_EFFECTOR_STEP, episode_from_dict, replay_episode
from softsim.service import create_app


def scene_config():
    return {
        "seed": 2,
        "iterations": 8,
        "meshes": [
            {"id": "cloth", "kind": "garment",
             "grid": {"nx": 4, "ny": 4, "spacing": 0.05},
             "mass_per_particle": 0.005,
             "pose": {"position": [0, 0, 0.1]}},
            {"id": "ground", "kind": "rigid", "shape": {"type": "plane"}},
        ],
        "effectors": [{"grasp_radius": 0.03}],
    }


@pytest.fixture
def client():
    app = create_app(scene_config())
    with TestClient(app) as c:
        yield c


def rpc(ws, request):
    ws.send_text(json.dumps(request))
    return json.loads(ws.receive_text())


def test_hello_announces_role_and_caps(client):
    with client.websocket_connect("/ws?role=driver") as ws:
        hello = json.loads(ws.receive_text())
        assert hello["type"] == "hello"
        assert hello["role"] == "driver"
        assert hello["caps"]["max_position_step"] == MAX_EFFECTOR_STEP


def test_second_driver_demoted_to_observer(client):
    with client.websocket_connect("/ws?role=driver") as ws1:
        ws1.receive_text()
        with client.websocket_connect("/ws?role=driver") as ws2:
            taken = json.loads(ws2.receive_text())
            assert taken["ok"] is False and taken["error"]["code"] == "DriverTaken"
            hello = json.loads(ws2.receive_text())
            assert hello["role"] == "observer"
    # after the first driver disconnects, the slot frees up
    with client.websocket_connect("/ws?role=driver") as ws3:
        assert json.loads(ws3.receive_text())["role"] == "driver"


def test_observer_cannot_control_but_can_read(client):
    with client.websocket_connect("/ws?role=observer") as ws:
        ws.receive_text()
        out = rpc(ws, {"type": "step", "n": 1})
        assert out["ok"] is False and out["error"]["code"] == "NotDriver"
        out = rpc(ws, {"type": "get_metrics"})
        assert out["ok"] is True and "kinetic_energy" in out["metrics"]


def test_every_request_gets_one_response_with_id(client):
    with client.websocket_connect("/ws?role=driver") as ws:
        ws.receive_text()
        for i in range(5):
            out = rpc(ws, {"type": "get_metrics", "id": i})
            assert out["id"] == i


def test_malformed_json_yields_error_frame_not_disconnect(client):
    with client.websocket_connect("/ws?role=driver") as ws:
        ws.receive_text()
        ws.send_text("{nope")
        out = json.loads(ws.receive_text())
        assert out["ok"] is False and out["error"]["code"] == "BadJSON"
        ws.send_text(json.dumps([1, 2, 3]))  # valid JSON, wrong shape
        out = json.loads(ws.receive_text())
        assert out["error"]["code"] == "BadJSON"
        # the session is still usable afterwards
        assert rpc(ws, {"type": "get_metrics"})["ok"] is True


def test_unknown_request_type_rejected(client):
    with client.websocket_connect("/ws?role=driver") as ws:
        ws.receive_text()
        out = rpc(ws, {"type": "teleport"})
        assert out["error"]["code"] == "UnknownType"


def test_move_effector_is_rate_limited(client):
    with client.websocket_connect("/ws?role=driver") as ws:
        ws.receive_text()
        out = rpc(ws, {"type": "grasp", "point": [0.0, 0.0, 0.1]})
        assert out["ok"] is True and out["attached"] >= 1
        out = rpc(ws, {"type": "move_effector", "position": [5.0, 0.0, 0.1]})
        assert out["ok"] is True
        moved = [p - q for p, q in zip(out["position"], [0.0, 0.0, 0.1])]
        dist = sum(m * m for m in moved) ** 0.5
        assert dist == pytest.approx(MAX_EFFECTOR_STEP)


def test_grasp_miss_returns_error_payload(client):
    with client.websocket_connect("/ws?role=driver") as ws:
        ws.receive_text()
        out = rpc(ws, {"type": "grasp", "point": [9.0, 9.0, 9.0]})
        assert out["ok"] is False and out["error"]["code"] == "NoParticleInRange"


def test_subscribed_observer_receives_state_after_steps(client):
    with client.websocket_connect("/ws?role=observer") as obs:
        obs.receive_text()
        out = rpc(obs, {"type": "subscribe_state", "stride": 2})
        assert out["ok"] is True and out["stride"] == 2
        with client.websocket_connect("/ws?role=driver") as drv:
            drv.receive_text()
            rpc(drv, {"type": "step", "n": 3})
            frame = json.loads(obs.receive_text())
            assert frame["type"] == "state"
            assert frame["step"] == 3 and frame["t"] > 0
            assert len(frame["effectors"]) == 1
            rpc(drv, {"type": "step", "n": 2})
            frame2 = json.loads(obs.receive_text())
            assert frame2["t"] > frame["t"]  # timestamps increase monotonically


def test_reset_restores_initial_scene(client):
    with client.websocket_connect("/ws?role=driver") as ws:
        ws.receive_text()
        rpc(ws, {"type": "step", "n": 5})
        m1 = rpc(ws, {"type": "get_metrics"})["metrics"]
        assert m1["step"] == 5
        assert rpc(ws, {"type": "reset"})["ok"] is True
        m2 = rpc(ws, {"type": "get_metrics"})["metrics"]
        assert m2["step"] == 0 and m2["t"] == 0.0


def test_recorded_session_replays_headlessly(client):
    with client.websocket_connect("/ws?role=driver") as ws:
        ws.receive_text()
        assert rpc(ws, {"type": "record_start"})["ok"] is True
        rpc(ws, {"type": "step", "n": 5})
        rpc(ws, {"type": "grasp", "point": [0.0, 0.0, 0.1]})
        rpc(ws, {"type": "move_effector", "position": [0.0, 0.0, 0.12]})
        rpc(ws, {"type": "step", "n": 5})
        out = rpc(ws, {"type": "record_stop"})
        assert out["ok"] is True
    record = episode_from_dict(out["episode"])
    replay_episode(record)  # bit-exact replay off the wire format


def test_record_state_machine(client):
    with client.websocket_connect("/ws?role=driver") as ws:
        ws.receive_text()
        out = rpc(ws, {"type": "record_stop"})
        assert out["error"]["code"] == "NotRecording"
        assert rpc(ws, {"type": "record_start"})["ok"] is True
        out = rpc(ws, {"type": "record_start"})
        assert out["error"]["code"] == "AlreadyRecording"


def test_load_scene_replaces_config(client):
    with client.websocket_connect("/ws?role=driver") as ws:
        ws.receive_text()
        cfg = scene_config()
        cfg["meshes"][0]["grid"] = {"nx": 3, "ny": 3, "spacing": 0.05}
        out = rpc(ws, {"type": "load_scene", "config": cfg})
        assert out["ok"] is True and out["particles"] == 9
        bad = {"meshes": [{"id": "x", "kind": "garment"}], "oops": 1}
        out = rpc(ws, {"type": "load_scene", "config": bad})
        assert out["ok"] is False and out["error"]["code"] == "SchemaError"
