"""File formats: JSON scene configs (schema-validated), OBJ meshes, binary
little-endian PLY point clouds, 16-bit PNG depth images with JSON intrinsics
sidecars, and CSV result tables."""
from __future__ import annotations

import csv
import hashlib
import json
import struct
from pathlib import Path

import jsonschema
import numpy as np
from PIL import Image

from . import fem as fem_mod
from .cloth import make_cloth_grid
from .effector import Effector
from .engine import Scene
from .errors import MeshParseError, SchemaError
from .fluid import make_fluid_box
from .params import MaterialKind, PhysicsParams, validate_params
from .rigid import Box, Capsule, Plane, RigidCollider, Sphere, WindField
from .sim2real import DepthImage, PointCloud
from .transforms import Pose

ENGINE_VERSION = "1.0"

_POSE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "position": {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3},
        "quaternion": {"type": "array", "items": {"type": "number"}, "minItems": 4, "maxItems": 4},
    },
}

_PARAMS_OVERRIDE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {name: {"type": "number"} for name in (
        "particle_contact_offset", "rest_offset", "solid_rest_offset",
        "fluid_rest_offset", "solver_position_iterations", "max_neighborhood",
        "max_depenetration_velocity", "friction", "damping", "viscosity",
        "cohesion", "surface_tension", "density", "drag", "lift")},
}

_SHAPE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["type"],
    "properties": {
        "type": {"enum": ["plane", "sphere", "box", "capsule"]},
        "normal": {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3},
        "offset": {"type": "number"},
        "radius": {"type": "number"},
        "half_extents": {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3},
        "half_height": {"type": "number"},
    },
}

_MESH_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["id", "kind"],
    "properties": {
        "id": {"type": "string"},
        "kind": {"enum": ["garment", "tetmesh", "rigid", "fluid"]},
        "path": {"type": "string"},
        "pose": _POSE_SCHEMA,
        "params": _PARAMS_OVERRIDE_SCHEMA,
        # garment
        "grid": {
            "type": "object", "additionalProperties": False,
            "required": ["nx", "ny", "spacing"],
            "properties": {"nx": {"type": "integer", "minimum": 2},
                           "ny": {"type": "integer", "minimum": 2},
                           "spacing": {"type": "number", "exclusiveMinimum": 0}},
        },
        "mass_per_particle": {"type": "number", "exclusiveMinimum": 0},
        "stretch_stiffness": {"type": "number", "minimum": 0, "maximum": 1},
        "bend_stiffness": {"type": "number", "minimum": 0, "maximum": 1},
        "pinned": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        # tetmesh
        "lattice": {
            "type": "object", "additionalProperties": False,
            "required": ["nx", "ny", "nz", "spacing"],
            "properties": {"nx": {"type": "integer", "minimum": 2},
                           "ny": {"type": "integer", "minimum": 2},
                           "nz": {"type": "integer", "minimum": 2},
                           "spacing": {"type": "number", "exclusiveMinimum": 0}},
        },
        "material": {
            "type": "object", "additionalProperties": False,
            "properties": {"young_modulus": {"type": "number"},
                           "poisson_ratio": {"type": "number"},
                           "density": {"type": "number"},
                           "elasticity_damping": {"type": "number"},
                           "vertex_velocity_damping": {"type": "number"}},
        },
        # rigid
        "shape": _SHAPE_SCHEMA,
        "dynamic": {"type": "boolean"},
        "mass": {"type": "number"},
        "friction": {"type": "number"},
        "restitution": {"type": "number"},
        "contact_offset": {"type": "number"},
        "rest_offset": {"type": "number"},
        # fluid
        "box": {
            "type": "object", "additionalProperties": False,
            "required": ["counts"],
            "properties": {"counts": {"type": "array", "items": {"type": "integer", "minimum": 1},
                                      "minItems": 3, "maxItems": 3},
                           "origin": {"type": "array", "items": {"type": "number"},
                                      "minItems": 3, "maxItems": 3}},
        },
    },
}

SCENE_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["meshes"],
    "properties": {
        "seed": {"type": "integer"},
        "dt": {"type": "number", "exclusiveMinimum": 0},
        "iterations": {"type": "integer", "minimum": 1},
        "gravity": {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3},
        "wind": {
            "type": "object", "additionalProperties": False,
            "properties": {"direction": {"type": "array", "items": {"type": "number"},
                                         "minItems": 3, "maxItems": 3},
                           "magnitude": {"type": "number", "minimum": 0},
                           "gust_amplitude": {"type": "number", "minimum": 0},
                           "gust_frequency": {"type": "number", "minimum": 0}},
        },
        "effectors": {
            "type": "array",
            "items": {"type": "object", "additionalProperties": False,
                      "properties": {"grasp_radius": {"type": "number", "exclusiveMinimum": 0},
                                     "pose": _POSE_SCHEMA}},
        },
        "meshes": {"type": "array", "items": _MESH_SCHEMA},
    },
}

_DEFAULTS = {"seed": 0, "dt": 1.0 / 120.0, "iterations": 20,
             "gravity": [0.0, 0.0, -9.81], "effectors": []}


def validate_config(config: dict) -> None:
    try:
        jsonschema.validate(config, SCENE_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise SchemaError(f"scene config invalid: {exc.message}") from exc


def normalize_config(config: dict) -> dict:
    """Schema-check and fill defaults; the result serializes canonically
    (sorted keys) so save -> load round-trips byte-identically."""
    validate_config(config)
    out = dict(_DEFAULTS)
    out.update(json.loads(canonical_json(config)))
    return out


def canonical_json(config: dict) -> str:
    return json.dumps(config, sort_keys=True, separators=(",", ":"))


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical_json(normalize_config(config)).encode()).hexdigest()


def save_config(path, config: dict) -> None:
    Path(path).write_text(canonical_json(normalize_config(config)) + "\n")


def load_config(path) -> dict:
    try:
        config = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON: {exc}") from exc
    return normalize_config(config)


def _pose_from(obj: dict | None) -> Pose:
    obj = obj or {}
    pose = Pose()
    if "position" in obj:
        pose.position = np.asarray(obj["position"], dtype=np.float64)
    if "quaternion" in obj:
        pose.quaternion = np.asarray(obj["quaternion"], dtype=np.float64)
    return pose


def _shape_from(obj: dict):
    kind = obj["type"]
    if kind == "plane":
        return Plane(np.asarray(obj.get("normal", [0, 0, 1]), float), obj.get("offset", 0.0))
    if kind == "sphere":
        return Sphere(obj["radius"])
    if kind == "box":
        return Box(np.asarray(obj["half_extents"], float))
    return Capsule(obj["radius"], obj["half_height"])


def _params_from(kind: MaterialKind, overrides: dict | None) -> PhysicsParams:
    params = PhysicsParams.defaults(kind)
    if overrides:
        fixed = {k: (int(v) if k in ("solver_position_iterations", "max_neighborhood") else v)
                 for k, v in overrides.items()}
        params = params.with_overrides(**fixed)
    validate_params(params)
    return params


def build_scene(config: dict, base_dir=".") -> Scene:
    """Construct a Scene from a normalized config dict."""
    config = normalize_config(config)
    base = Path(base_dir)
    scene = Scene(dt=config["dt"], iterations=config["iterations"],
                  gravity=np.asarray(config["gravity"], float),
                  rng_seed=config["seed"], config=config)
    if "wind" in config:
        w = config["wind"]
        scene.wind = WindField(np.asarray(w.get("direction", [1, 0, 0]), float),
                               w.get("magnitude", 0.0), w.get("gust_amplitude", 0.0),
                               w.get("gust_frequency", 0.0))
    for entry in config["meshes"]:
        kind = entry["kind"]
        pose = _pose_from(entry.get("pose"))
        if kind == "garment":
            params = _params_from(MaterialKind.Garment, entry.get("params"))
            if "grid" in entry:
                g = entry["grid"]
                pts, tris, uv = make_cloth_grid(g["nx"], g["ny"], g["spacing"])
            elif "path" in entry:
                pts, tris = load_obj(base / entry["path"])
                uv = None
            else:
                raise SchemaError(f"garment {entry['id']!r} needs a grid or a path")
            pts = pose.transform(pts)
            scene.add_garment(pts, tris, entry.get("mass_per_particle", 0.001),
                              params=params, uv=uv,
                              stretch_stiffness=entry.get("stretch_stiffness", 1.0),
                              bend_stiffness=entry.get("bend_stiffness", 0.5),
                              pinned=entry.get("pinned", ()))
        elif kind == "tetmesh":
            params = _params_from(MaterialKind.DeformableBody, entry.get("params"))
            mat_cfg = entry.get("material", {})
            material = fem_mod.ElasticMaterial(
                young_modulus=mat_cfg.get("young_modulus", 1e4),
                poisson_ratio=mat_cfg.get("poisson_ratio", 0.3),
                density=mat_cfg.get("density", 1000.0),
                elasticity_damping=mat_cfg.get("elasticity_damping", 0.01),
                vertex_velocity_damping=mat_cfg.get("vertex_velocity_damping", 0.005))
            if "lattice" in entry:
                lat = entry["lattice"]
                pts, tets = fem_mod.make_tet_lattice(lat["nx"], lat["ny"], lat["nz"], lat["spacing"])
            elif "path" in entry:
                pts, tets = fem_mod.load_tet_file(base / entry["path"])
            else:
                raise SchemaError(f"tetmesh {entry['id']!r} needs a lattice or a path")
            pts = pose.transform(pts)
            scene.add_soft_body(pts, tets, material, params=params)
        elif kind == "fluid":
            params = _params_from(MaterialKind.Fluid, entry.get("params"))
            box = entry.get("box")
            if box is None:
                raise SchemaError(f"fluid {entry['id']!r} needs a box")
            origin = np.asarray(box.get("origin", [0, 0, 0]), float)
            nx, ny, nz = box["counts"]
            pts = make_fluid_box(nx, ny, nz, 2.0 * params.fluid_rest_offset, origin)
            scene.add_fluid(pose.transform(pts), params=params)
        else:
            collider = RigidCollider(
                shape=_shape_from(entry["shape"]), pose=pose,
                dynamic=entry.get("dynamic", False), mass=entry.get("mass", 1.0),
                friction=entry.get("friction", 0.3),
                restitution=entry.get("restitution", 0.0),
                contact_offset=entry.get("contact_offset", 0.02),
                rest_offset=entry.get("rest_offset", 0.0))
            scene.colliders.append(collider)
    for eff in config["effectors"]:
        scene.effectors.append(Effector(pose=_pose_from(eff.get("pose")),
                                        grasp_radius=eff.get("grasp_radius", 0.03)))
    return scene


def load_scene(path) -> Scene:
    config = load_config(path)
    return build_scene(config, base_dir=Path(path).parent)


# ---------------------------------------------------------------------------
# OBJ


def load_obj(path):
    """Vertices and triangles from an ASCII OBJ; polygon faces are
    triangulated as fans; v/vt/vn index forms and negative indices accepted."""
    verts = []
    faces = []
    for ln, line in enumerate(Path(path).read_text().splitlines(), start=1):
        parts = line.split("#", 1)[0].split()
        if not parts:
            continue
        if parts[0] == "v":
            if len(parts) < 4:
                raise MeshParseError(f"{path}:{ln}: vertex needs 3 coordinates")
            verts.append([float(x) for x in parts[1:4]])
        elif parts[0] == "f":
            if len(parts) < 4:
                raise MeshParseError(f"{path}:{ln}: face needs at least 3 vertices")
            idx = []
            for token in parts[1:]:
                first = token.split("/")[0]
                try:
                    i = int(first)
                except ValueError as exc:
                    raise MeshParseError(f"{path}:{ln}: bad face index {token!r}") from exc
                idx.append(i - 1 if i > 0 else len(verts) + i)
            for a, b in zip(idx[1:], idx[2:]):
                faces.append([idx[0], a, b])
    if not verts:
        raise MeshParseError(f"{path}: no vertices")
    verts = np.asarray(verts, dtype=np.float64)
    faces = np.asarray(faces, dtype=np.int64) if faces else np.zeros((0, 3), np.int64)
    if faces.size and (faces.min() < 0 or faces.max() >= len(verts)):
        raise MeshParseError(f"{path}: face index out of range")
    return verts, faces


def save_obj(path, vertices, triangles) -> None:
    with open(path, "w") as fh:
        for v in np.asarray(vertices):
            fh.write(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}\n")
        for t in np.asarray(triangles, dtype=np.int64):
            fh.write(f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}\n")


# ---------------------------------------------------------------------------
# PLY (binary little-endian, x/y/z float32)


def save_ply(path, points) -> None:
    pts = np.asarray(points, dtype=np.float32).reshape(-1, 3)
    header = ("ply\nformat binary_little_endian 1.0\n"
              f"element vertex {len(pts)}\n"
              "property float x\nproperty float y\nproperty float z\n"
              "end_header\n")
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(pts.astype("<f4").tobytes())


def load_ply(path) -> PointCloud:
    data = Path(path).read_bytes()
    end = data.find(b"end_header\n")
    if not data.startswith(b"ply") or end < 0:
        raise MeshParseError(f"{path}: not a PLY file")
    header = data[:end].decode("ascii", errors="replace")
    count = None
    for line in header.splitlines():
        parts = line.split()
        if parts[:2] == ["element", "vertex"]:
            count = int(parts[2])
        if parts[:2] == ["format", "ascii"]:
            raise MeshParseError(f"{path}: only binary little-endian PLY supported")
    if count is None:
        raise MeshParseError(f"{path}: missing vertex element")
    body = data[end + len(b"end_header\n"):]
    need = count * 12
    if len(body) < need:
        raise MeshParseError(f"{path}: truncated vertex data")
    pts = np.frombuffer(body[:need], dtype="<f4").reshape(count, 3)
    return PointCloud(pts.astype(np.float64))


def save_xyz(path, points) -> None:
    np.savetxt(path, np.asarray(points).reshape(-1, 3), fmt="%.9g")


def load_xyz(path) -> PointCloud:
    return PointCloud(np.loadtxt(path, dtype=np.float64).reshape(-1, 3))


# ---------------------------------------------------------------------------
# depth images: 16-bit PNG in millimeters + JSON intrinsics sidecar


def save_depth_png(path, img: DepthImage, intrinsics: dict | None = None) -> None:
    mm = np.clip(np.round(img.as_grid() * 1000.0), 0, 65535).astype(np.uint16)
    Image.fromarray(mm).save(path)
    if intrinsics is not None:
        Path(str(path) + ".json").write_text(json.dumps(intrinsics, sort_keys=True))


def load_depth_png(path):
    """(DepthImage, intrinsics-or-None); pixel values are millimeters."""
    arr = np.asarray(Image.open(path), dtype=np.uint16)
    img = DepthImage(arr.shape[1], arr.shape[0], arr.astype(np.float64) / 1000.0)
    sidecar = Path(str(path) + ".json")
    intrinsics = json.loads(sidecar.read_text()) if sidecar.exists() else None
    return img, intrinsics


# ---------------------------------------------------------------------------
# CSV results


RESULT_FIELDS = ["task", "garment_id", "seed", "success", "hold_satisfied",
                 "frames_evaluated", "wall_time"]


def write_results_csv(path, rows: list[dict]) -> None:
    """One row per episode; metric columns are the union over rows, sorted."""
    metric_names = sorted({k for row in rows for k in row.get("metrics", {})})
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULT_FIELDS + metric_names)
        for row in rows:
            base = [row.get(k, "") for k in RESULT_FIELDS]
            base = [int(v) if isinstance(v, bool) else v for v in base]
            metrics = row.get("metrics", {})
            writer.writerow(base + [repr(float(metrics[m])) if m in metrics else ""
                                    for m in metric_names])


def read_results_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
