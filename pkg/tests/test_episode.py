"""Episode recording, bit-exact replay, tamper detection, serialization."""
import numpy as np
import pytest

from softsim.episode import (
    MAX_EFFECTOR_STEP,
    EpisodeRunner,
    episode_from_dict,
    episode_to_dict,
    load_episode,
    record_episode,
    replay_episode,
    save_episode,
)
from softsim.errors import HashMismatch, SchemaError, SnapshotDivergence


def drop_config():
    return {
        "seed": 5,
        "dt": 1.0 / 120.0,
        "iterations": 10,
        "meshes": [
            {"id": "cloth", "kind": "garment",
             "grid": {"nx": 5, "ny": 5, "spacing": 0.04},
             "mass_per_particle": 0.005,
             "pose": {"position": [0, 0, 0.15]}},
            {"id": "ground", "kind": "rigid", "shape": {"type": "plane"}},
        ],
        "effectors": [{"grasp_radius": 0.03}],
    }


def scripted_commands():
    return [
        {"type": "step", "n": 5},
        {"type": "grasp", "point": [0.0, 0.0, 0.15], "effector": 0},
        {"type": "move_effector", "position": [0.0, 0.0, 0.18]},
        {"type": "step", "n": 10},
        {"type": "release"},
        {"type": "step", "n": 10},
    ]


def test_record_and_replay_bit_exact():
    record = record_episode(drop_config(), scripted_commands(), snapshot_interval=5)
    assert len(record.snapshots) >= 3
    replay_episode(record)  # must not raise


def test_replay_detects_tampered_snapshot():
    record = record_episode(drop_config(), scripted_commands(), snapshot_interval=5)
    key = sorted(record.snapshots)[1]
    record.snapshots[key] = record.snapshots[key] + np.float32(1e-5)
    with pytest.raises(SnapshotDivergence) as exc:
        replay_episode(record)
    assert exc.value.step == key


def test_replay_detects_config_tamper():
    record = record_episode(drop_config(), [{"type": "step", "n": 2}])
    record.header["config"]["seed"] = 99  # hash no longer matches
    with pytest.raises(HashMismatch):
        replay_episode(record)


def test_replay_rejects_other_engine_version():
    record = record_episode(drop_config(), [{"type": "step", "n": 2}])
    record.header["version"] = "0.9"
    with pytest.raises(HashMismatch):
        replay_episode(record)


def test_replay_detects_truncated_command_log():
    record = record_episode(drop_config(), scripted_commands(), snapshot_interval=5)
    record.commands = record.commands[:1]  # replay never reaches later snapshots
    with pytest.raises(SnapshotDivergence):
        replay_episode(record)


def test_save_load_round_trip(tmp_path):
    record = record_episode(drop_config(), scripted_commands(), snapshot_interval=5)
    path = tmp_path / "episode.json"
    save_episode(path, record)
    back = load_episode(path)
    assert back.header == record.header
    assert back.commands == record.commands
    assert set(back.snapshots) == set(record.snapshots)
    for k in record.snapshots:
        np.testing.assert_array_equal(back.snapshots[k], record.snapshots[k])
    replay_episode(back)


def test_dict_round_trip_preserves_dtypes():
    record = record_episode(drop_config(), [{"type": "step", "n": 3}])
    back = episode_from_dict(episode_to_dict(record))
    for k in record.snapshots:
        assert back.snapshots[k].dtype == np.float32
        np.testing.assert_array_equal(back.snapshots[k], record.snapshots[k])


def test_move_commands_are_rate_limited():
    runner = EpisodeRunner(drop_config())
    runner.apply({"type": "grasp", "point": [0.0, 0.0, 0.15]})
    out = runner.apply({"type": "move_effector", "position": [1.0, 0.0, 0.15]})
    moved = np.asarray(out["position"]) - [0.0, 0.0, 0.15]
    assert np.linalg.norm(moved) == pytest.approx(MAX_EFFECTOR_STEP)


def test_unknown_command_rejected():
    runner = EpisodeRunner(drop_config())
    with pytest.raises(SchemaError):
        runner.apply({"type": "self_destruct"})


def test_grasp_miss_is_nonfatal_and_replayable():
    cmds = [{"type": "grasp", "point": [9.0, 9.0, 9.0]}, {"type": "step", "n": 3}]
    record = record_episode(drop_config(), cmds)
    assert len(record.commands) == 2  # miss still logged
    replay_episode(record)


def test_snapshot_interval_spacing():
    record = record_episode(drop_config(), [{"type": "step", "n": 20}],
                            snapshot_interval=4)
    assert sorted(record.snapshots) == [0, 4, 8, 12, 16, 20]
