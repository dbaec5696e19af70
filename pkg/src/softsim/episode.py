"""Episode recording and deterministic replay.

An episode is a header (scene-config hash, seed, dt, engine version), an
ordered command log, and float32 position snapshots taken every k steps.
Replaying the command log on a scene built from the same config must
reproduce every snapshot bit-exactly."""
from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import engine as engine_mod
from .effector import grasp as effector_grasp, release as effector_release, rate_limit
from .errors import HashMismatch, NoParticleInRange, NotGrasping, SchemaError, SnapshotDivergence
from .scene_io import ENGINE_VERSION, build_scene, config_hash, normalize_config
from .transforms import Pose

# caps applied to every move_effector target, also advertised by the service
MAX_EFFECTOR_STEP = 0.02       # m per command
MAX_EFFECTOR_ROTATION = 0.2    # rad per command


@dataclass
class EpisodeRecord:
    header: dict
    commands: list = field(default_factory=list)      # (step_index, command dict)
    snapshots: dict = field(default_factory=dict)     # step_index -> float32 (n,3)

    @property
    def scene_hash(self) -> str:
        return self.header["scene_hash"]


def _apply_command(scene, command: dict) -> dict:
    """Execute one protocol command against the scene (no stepping for
    non-step commands).  Returns a small result payload."""
    ctype = command.get("type")
    if ctype == "grasp":
        eff = scene.effectors[command.get("effector", 0)]
        point = np.asarray(command["point"], dtype=np.float64)
        eff.pose.position = point.copy()
        count = effector_grasp(scene, eff, point)
        return {"attached": count}
    if ctype == "move_effector":
        eff = scene.effectors[command.get("effector", 0)]
        target = Pose(np.asarray(command["position"], dtype=np.float64))
        if "quaternion" in command:
            target.quaternion = np.asarray(command["quaternion"], dtype=np.float64)
        limited = rate_limit(target, eff.pose, MAX_EFFECTOR_STEP, MAX_EFFECTOR_ROTATION)
        eff.move_to(limited, scene.dt)
        return {"position": limited.position.tolist()}
    if ctype == "release":
        eff = scene.effectors[command.get("effector", 0)]
        effector_release(scene, eff)
        return {}
    raise SchemaError(f"unknown command type {ctype!r}")


class EpisodeRunner:
    """Drives one scene from a config, logging commands and snapshots."""

    def __init__(self, config: dict, snapshot_interval: int = 10,
                 check_against: EpisodeRecord | None = None):
        self.config = normalize_config(config)
        self.scene = build_scene(self.config)
        self.snapshot_interval = max(int(snapshot_interval), 1)
        self.step_count = 0
        self.commands: list = []
        self.snapshots: dict = {}
        self._reference = check_against
        self._take_snapshot()

    def _take_snapshot(self) -> None:
        snap = self.scene.particles.positions.astype(np.float32)
        self.snapshots[self.step_count] = snap
        if self._reference is not None:
            ref = self._reference.snapshots.get(self.step_count)
            if ref is not None and not np.array_equal(ref, snap):
                raise SnapshotDivergence(self.step_count)

    def apply(self, command: dict) -> dict:
        """Execute and log one command; 'step' advances the simulation."""
        self.commands.append((self.step_count, dict(command)))
        if command.get("type") == "step":
            n = int(command.get("n", 1))
            for _ in range(n):
                engine_mod.step(self.scene)
                self.step_count += 1
                if self.step_count % self.snapshot_interval == 0:
                    self._take_snapshot()
            return {"t": self.scene.sim_time, "steps": self.step_count}
        return _apply_command(self.scene, command)

    def finish(self) -> EpisodeRecord:
        if self.step_count not in self.snapshots:
            self._take_snapshot()
        header = {
            "version": ENGINE_VERSION,
            "scene_hash": config_hash(self.config),
            "config": self.config,
            "seed": self.config["seed"],
            "dt": self.config["dt"],
            "snapshot_interval": self.snapshot_interval,
        }
        return EpisodeRecord(header, list(self.commands), dict(self.snapshots))


def record_episode(config: dict, commands, snapshot_interval: int = 10) -> EpisodeRecord:
    """Run the commands on a fresh scene and return the record.  Grasp misses
    and empty releases are logged but not fatal (they replay identically)."""
    runner = EpisodeRunner(config, snapshot_interval)
    for command in commands:
        try:
            runner.apply(command)
        except (NoParticleInRange, NotGrasping):
            pass
    return runner.finish()


def replay_episode(record: EpisodeRecord) -> None:
    """Re-execute the command log and verify every snapshot.

    Raises HashMismatch when the embedded config does not match the recorded
    hash or the engine version changed, SnapshotDivergence on the first
    differing snapshot."""
    header = record.header
    if header.get("version") != ENGINE_VERSION:
        raise HashMismatch(f"engine version {header.get('version')!r} != {ENGINE_VERSION!r}")
    if config_hash(header["config"]) != header["scene_hash"]:
        raise HashMismatch("scene config does not match the recorded hash")
    runner = EpisodeRunner(header["config"], header["snapshot_interval"],
                           check_against=record)
    for _, command in record.commands:
        try:
            runner.apply(command)
        except (NoParticleInRange, NotGrasping):
            pass
    final = runner.scene.particles.positions.astype(np.float32)
    ref = record.snapshots.get(runner.step_count)
    if ref is not None and not np.array_equal(ref, final):
        raise SnapshotDivergence(runner.step_count)
    # any reference snapshot the replay never reached is a divergence too
    # (the final off-interval snapshot was just verified above)
    missing = set(record.snapshots) - set(runner.snapshots) - {runner.step_count}
    if missing:
        raise SnapshotDivergence(min(missing))


# ---------------------------------------------------------------------------
# serialization: JSON with base64-packed float32 snapshots


def _encode_snap(arr: np.ndarray) -> dict:
    arr = np.ascontiguousarray(arr, dtype="<f4")
    return {"shape": list(arr.shape),
            "data": base64.b64encode(arr.tobytes()).decode("ascii")}


def _decode_snap(obj: dict) -> np.ndarray:
    raw = base64.b64decode(obj["data"])
    return np.frombuffer(raw, dtype="<f4").reshape(obj["shape"]).copy()


def save_episode(path, record: EpisodeRecord) -> None:
    doc = {
        "header": record.header,
        "commands": [[step, cmd] for step, cmd in record.commands],
        "snapshots": {str(k): _encode_snap(v) for k, v in sorted(record.snapshots.items())},
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True, separators=(",", ":")))


def load_episode(path) -> EpisodeRecord:
    doc = json.loads(Path(path).read_text())
    return episode_from_dict(doc)


def episode_from_dict(doc: dict) -> EpisodeRecord:
    return EpisodeRecord(
        header=doc["header"],
        commands=[(int(step), cmd) for step, cmd in doc["commands"]],
        snapshots={int(k): _decode_snap(v) for k, v in doc["snapshots"].items()})


def episode_to_dict(record: EpisodeRecord) -> dict:
    return {"header": record.header,
            "commands": [[step, cmd] for step, cmd in record.commands],
            "snapshots": {str(k): _encode_snap(v) for k, v in sorted(record.snapshots.items())}}
