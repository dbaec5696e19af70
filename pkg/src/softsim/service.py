"""JSON-over-WebSocket live-control service.

One driver connection may mutate the scene; any number of observers receive
state frames.  Commands execute in arrival order against a single scene
(guarded by a lock), every request gets exactly one response, and malformed
input is answered with an error frame instead of closing the session.

Message shapes:
  request:  {"type": "...", ...payload}
  response: {"ok": true, ...payload} | {"ok": false, "error": {"code", "message"}}
  state:    {"type": "state", "t", "step", "effectors", "positions", "stride"}
"""
from __future__ import annotations

import asyncio
import json

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from . import episode as episode_mod
from .errors import SoftsimError
from .scene_io import normalize_config
from .tasks import metric_coverage

DEFAULT_STRIDE = 5

REQUEST_TYPES = ("load_scene", "step", "grasp", "move_effector", "release",
                 "reset", "subscribe_state", "record_start", "record_stop",
                 "get_metrics")


class _Session:
    def __init__(self, socket: WebSocket, driver: bool):
        self.socket = socket
        self.driver = driver
        self.subscribed = False
        self.stride = DEFAULT_STRIDE


class TeleopService:
    def __init__(self, config: dict | None = None, snapshot_interval: int = 10):
        self.snapshot_interval = snapshot_interval
        self.runner: episode_mod.EpisodeRunner | None = None
        self.flat_reference: np.ndarray | None = None
        self.recording = False
        self.driver: _Session | None = None
        self.sessions: list[_Session] = []
        self.lock = asyncio.Lock()
        if config is not None:
            self._load(config)

    # -- scene management ---------------------------------------------------

    def _load(self, config: dict) -> None:
        self.runner = episode_mod.EpisodeRunner(normalize_config(config),
                                                self.snapshot_interval)
        scene = self.runner.scene
        if scene.garments:
            g = scene.garments[0]
            self.flat_reference = scene.particles.positions[
                g.particle_range.start:g.particle_range.stop].copy()
        else:
            self.flat_reference = None
        self.recording = False

    # -- command handling ---------------------------------------------------

    def handle(self, session: _Session, request: dict) -> dict:
        """Synchronous command execution; caller holds the lock."""
        ctype = request.get("type")
        if ctype not in REQUEST_TYPES:
            return _err("UnknownType", f"unknown request type {ctype!r}")
        if ctype == "subscribe_state":
            session.subscribed = True
            session.stride = max(int(request.get("stride", DEFAULT_STRIDE)), 1)
            return {"ok": True, "stride": session.stride,
                    "caps": {"max_position_step": episode_mod.MAX_EFFECTOR_STEP,
                             "max_rotation_step": episode_mod.MAX_EFFECTOR_ROTATION}}
        if ctype == "get_metrics":
            return {"ok": True, "metrics": self.metrics()}
        if not session.driver:
            return _err("NotDriver", "observers cannot issue control commands")
        if ctype == "load_scene":
            try:
                self._load(request.get("config", {}))
            except SoftsimError as exc:
                return _err(type(exc).__name__, str(exc))
            return {"ok": True, "particles": len(self.runner.scene.particles)}
        if self.runner is None:
            return _err("NoScene", "no scene loaded")
        if ctype == "reset":
            self._load(self.runner.config)
            return {"ok": True}
        if ctype == "record_start":
            if self.recording:
                return _err("AlreadyRecording", "recording already in progress")
            # restart from the config so the record replays from a clean scene
            self._load(self.runner.config)
            self.recording = True
            return {"ok": True}
        if ctype == "record_stop":
            if not self.recording:
                return _err("NotRecording", "no recording in progress")
            self.recording = False
            record = self.runner.finish()
            return {"ok": True, "episode": episode_mod.episode_to_dict(record)}
        # step / grasp / move_effector / release run through the episode runner
        try:
            result = self.runner.apply(dict(request))
        except SoftsimError as exc:
            return _err(type(exc).__name__, str(exc))
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            return _err("BadRequest", str(exc))
        return {"ok": True, **{k: v for k, v in result.items()}}

    def metrics(self) -> dict:
        if self.runner is None:
            return {}
        scene = self.runner.scene
        out = {"t": scene.sim_time, "step": self.runner.step_count,
               "kinetic_energy": scene.kinetic_energy_per_particle()}
        if scene.garments and self.flat_reference is not None:
            g = scene.garments[0]
            lo, hi = g.particle_range.start, g.particle_range.stop
            out["coverage"] = metric_coverage(scene.particles.positions[lo:hi],
                                              g.triangles - lo, self.flat_reference)
        return out

    def state_frame(self, stride: int) -> dict:
        scene = self.runner.scene
        pos = scene.particles.positions[::stride]
        return {"type": "state", "t": scene.sim_time, "step": self.runner.step_count,
                "stride": stride,
                "effectors": [{"position": e.pose.position.tolist(),
                               "quaternion": e.pose.quaternion.tolist(),
                               "gripper": e.state.value} for e in scene.effectors],
                "positions": np.round(pos, 6).ravel().tolist()}

    async def broadcast_state(self) -> None:
        if self.runner is None:
            return
        for session in list(self.sessions):
            if not session.subscribed:
                continue
            try:
                await session.socket.send_text(json.dumps(self.state_frame(session.stride)))
            except Exception:
                self.sessions = [s for s in self.sessions if s is not session]


def _err(code: str, message: str) -> dict:
    return {"ok": False, "error": {"code": code, "message": message}}


def create_app(config: dict | None = None, snapshot_interval: int = 10) -> FastAPI:
    app = FastAPI(title="softsim teleop service")
    service = TeleopService(config, snapshot_interval)
    app.state.service = service

    @app.websocket("/ws")
    async def ws_endpoint(socket: WebSocket):
        await socket.accept()
        role = socket.query_params.get("role", "driver")
        driver = role == "driver" and service.driver is None
        if role == "driver" and not driver:
            await socket.send_text(json.dumps(
                _err("DriverTaken", "a driver is already connected") | {"role": "observer"}))
        session = _Session(socket, driver)
        service.sessions.append(session)
        if driver:
            service.driver = session
        await socket.send_text(json.dumps(
            {"ok": True, "type": "hello", "role": "driver" if driver else "observer",
             "caps": {"max_position_step": episode_mod.MAX_EFFECTOR_STEP,
                      "max_rotation_step": episode_mod.MAX_EFFECTOR_ROTATION}}))
        try:
            while True:
                raw = await socket.receive_text()
                try:
                    request = json.loads(raw)
                    if not isinstance(request, dict):
                        raise ValueError("request must be a JSON object")
                except ValueError as exc:
                    await socket.send_text(json.dumps(_err("BadJSON", str(exc))))
                    continue
                async with service.lock:
                    response = service.handle(session, request)
                    if "id" in request:
                        response = {**response, "id": request["id"]}
                    await socket.send_text(json.dumps(response))
                    if response.get("ok") and request.get("type") == "step":
                        await service.broadcast_state()
        except WebSocketDisconnect:
            pass
        finally:
            service.sessions = [s for s in service.sessions if s is not session]
            if service.driver is session:
                service.driver = None

    return app


def serve(config: dict, port: int = 8700, host: str = "127.0.0.1") -> None:
    import uvicorn

    uvicorn.run(create_app(config), host=host, port=port, log_level="warning")
