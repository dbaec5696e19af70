"""Sim-to-real alignment toolkit: depth-image noise augmentation, pinhole
back-projection, chamfer distance, affine point-cloud registration, and a
numerically stable InfoNCE contrastive loss over precomputed embeddings."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import Diverged, EmptyCloud


@dataclass
class DepthImage:
    width: int
    height: int
    depths: np.ndarray  # row-major, meters, 0 = invalid

    def __post_init__(self):
        self.depths = np.asarray(self.depths, dtype=np.float64).reshape(-1)
        if self.width * self.height != self.depths.size:
            raise ValueError("width*height must equal the depth array length")
        if np.any(self.depths < 0):
            raise ValueError("depths must be >= 0")

    def as_grid(self) -> np.ndarray:
        return self.depths.reshape(self.height, self.width)


@dataclass
class NoiseParams:
    sigma: float = 0.005
    p_gaussian: float = 0.0
    p_salt: float = 0.0
    p_pepper: float = 0.0
    salt_magnitude: float = 0.05
    pepper_magnitude: float = 0.05

    def __post_init__(self):
        for name in ("p_gaussian", "p_salt", "p_pepper"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if self.p_gaussian + self.p_salt + self.p_pepper > 1.0 + 1e-12:
            raise ValueError("noise probabilities must sum to <= 1")


@dataclass
class PointCloud:
    points: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(self.points)):
            raise ValueError("point cloud must be finite")

    def __len__(self):
        return len(self.points)


@dataclass
class AffineTransform:
    """x -> A @ x + t, stored as the 3x4 block [A | t]."""
    matrix: np.ndarray = field(default_factory=lambda: np.hstack([np.eye(3), np.zeros((3, 1))]))

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.float64).reshape(3, 4)
        if not np.all(np.isfinite(self.matrix)):
            raise ValueError("affine matrix must be finite")

    @property
    def linear(self) -> np.ndarray:
        return self.matrix[:, :3]

    @property
    def translation(self) -> np.ndarray:
        return self.matrix[:, 3]

    def apply(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) @ self.linear.T + self.translation

    def as_4x4(self) -> np.ndarray:
        out = np.eye(4)
        out[:3, :] = self.matrix
        return out

    @classmethod
    def from_4x4(cls, m) -> "AffineTransform":
        m = np.asarray(m, dtype=np.float64)
        if m.shape != (4, 4) or not np.allclose(m[3], [0, 0, 0, 1]):
            raise ValueError("expected a 4x4 matrix with bottom row (0,0,0,1)")
        return cls(m[:3, :])


@dataclass
class EmbeddingSet:
    vectors: np.ndarray  # n x d
    temperature: float = 0.1

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2 or self.vectors.shape[1] < 1:
            raise ValueError("vectors must be an n x d matrix with d >= 1")
        if self.temperature <= 0:
            raise ValueError("temperature must be > 0")


# ---------------------------------------------------------------------------
# depth noise


def add_depth_noise(img: DepthImage, params: NoiseParams,
                    rng_stream: np.random.Generator) -> DepthImage:
    """Per-pixel mutually exclusive perturbation: one uniform draw selects
    Gaussian / +salt / -pepper / unchanged; invalid (0) pixels untouched;
    output clamped at >= 0."""
    d = img.depths.copy()
    valid = d > 0
    u = rng_stream.uniform(size=d.size)
    gauss_noise = rng_stream.normal(0.0, params.sigma, size=d.size)
    p1 = params.p_gaussian
    p2 = p1 + params.p_salt
    p3 = p2 + params.p_pepper
    case_gauss = valid & (u < p1)
    case_salt = valid & (u >= p1) & (u < p2)
    case_pepper = valid & (u >= p2) & (u < p3)
    d[case_gauss] += gauss_noise[case_gauss]
    d[case_salt] += params.salt_magnitude
    d[case_pepper] -= params.pepper_magnitude
    np.maximum(d, 0.0, out=d)
    return DepthImage(img.width, img.height, d)


def depth_to_cloud(img: DepthImage, fx: float, fy: float,
                   cx: float, cy: float) -> PointCloud:
    """Pinhole back-projection; invalid pixels are skipped."""
    if fx <= 0 or fy <= 0:
        raise ValueError("focal lengths must be > 0")
    grid = img.as_grid()
    v, u = np.nonzero(grid > 0)
    d = grid[v, u]
    pts = np.column_stack([d * (u - cx) / fx, d * (v - cy) / fy, d])
    return PointCloud(pts)


# ---------------------------------------------------------------------------
# chamfer + affine registration


def chamfer(a: PointCloud, b: PointCloud) -> float:
    """(1/|A|) sum_a min_b ||a-b||^2 + (1/|B|) sum_b min_a ||a-b||^2."""
    if len(a) == 0 or len(b) == 0:
        raise EmptyCloud("chamfer distance needs two non-empty clouds")
    tree_a = cKDTree(a.points)
    tree_b = cKDTree(b.points)
    d_ab, _ = tree_b.query(a.points)
    d_ba, _ = tree_a.query(b.points)
    return float(np.mean(d_ab ** 2) + np.mean(d_ba ** 2))


def _surrogate_chamfer(src_t: np.ndarray, target: np.ndarray, idx_fwd, idx_bwd) -> float:
    fwd = np.mean(np.sum((src_t - target[idx_fwd]) ** 2, axis=1))
    bwd = np.mean(np.sum((target - src_t[idx_bwd]) ** 2, axis=1))
    return float(fwd + bwd)


def fit_affine(source: PointCloud, target: PointCloud,
               lr: float | None = None, max_outer: int = 60,
               inner_steps: int = 25, tol: float = 1e-12):
    """Register source onto target with a 12-parameter affine map.

    Outer loop freezes nearest-neighbor correspondences; the inner loop runs
    gradient steps on the frozen (quadratic) chamfer surrogate, each step
    sized by exact line search along the gradient (`lr` overrides with a
    fixed step).  Starts from identity plus the centroid shift.  Raises
    Diverged (carrying the best-so-far result) after 5 consecutive
    non-improving outer iterations."""
    if len(source) < 4 or len(target) < 4:
        raise EmptyCloud("fit_affine needs at least 4 points per cloud")
    src = source.points
    tgt = target.points
    a = np.eye(3)
    t = tgt.mean(axis=0) - src.mean(axis=0)
    tree_t = cKDTree(tgt)

    def current() -> AffineTransform:
        return AffineTransform(np.hstack([a, t[:, None]]))

    best = current()
    best_val = chamfer(PointCloud(src @ a.T + t), target)
    prev_val = best_val
    bad_streak = 0
    for _ in range(max_outer):
        src_t = src @ a.T + t
        if not np.all(np.isfinite(src_t)):
            raise Diverged("registration state became non-finite",
                           best=(best, best_val))
        _, idx_fwd = tree_t.query(src_t)
        tree_s = cKDTree(src_t)
        _, idx_bwd = tree_s.query(tgt)
        # the KD-tree reports the sentinel index n when distances overflow
        if np.any(idx_fwd >= len(tgt)) or np.any(idx_bwd >= len(src_t)):
            raise Diverged("registration state overflowed the neighbor search",
                           best=(best, best_val))
        for _ in range(inner_steps):
            src_t = src @ a.T + t
            if not np.all(np.isfinite(src_t)):
                break
            # gradient of the frozen surrogate w.r.t. A and t
            r_fwd = src_t - tgt[idx_fwd]                      # |S| x 3
            r_bwd = src_t[idx_bwd] - tgt                      # |T| x 3
            g_a = 2.0 * (r_fwd.T @ src) / len(src)
            g_t = 2.0 * r_fwd.sum(axis=0) / len(src)
            g_a += 2.0 * (r_bwd.T @ src[idx_bwd]) / len(tgt)
            g_t += 2.0 * r_bwd.sum(axis=0) / len(tgt)
            with np.errstate(over="ignore"):
                gnorm2 = np.sum(g_a ** 2) + np.sum(g_t ** 2)
            if not np.isfinite(gnorm2):
                break
            if gnorm2 < 1e-30:
                break
            if lr is not None:
                step = lr
            else:
                # exact line search: the surrogate is quadratic along -g
                da = src @ g_a.T + g_t                        # direction images
                q = (np.sum(da ** 2) / len(src)
                     + np.sum(da[idx_bwd] ** 2) / len(tgt))
                step = gnorm2 / (2.0 * q) if q > 1e-30 else 0.0
                if step == 0.0:
                    break
            a = a - step * g_a
            t = t - step * g_t
        val = chamfer(PointCloud(src @ a.T + t), target)
        if val < best_val:
            best, best_val = current(), val
        if val > prev_val:
            bad_streak += 1
            if bad_streak >= 5:
                raise Diverged("chamfer increased 5 consecutive outer iterations",
                               best=(best, best_val))
        else:
            bad_streak = 0
            if prev_val - val < tol:
                break
        prev_val = val
    return best, best_val


# ---------------------------------------------------------------------------
# contrastive loss


def infonce_loss(f_p: np.ndarray, positive_index: int, candidates: EmbeddingSet) -> float:
    """-log( exp(s_pos/tau) / sum_i exp(s_i/tau) ) with log-sum-exp
    stabilization; s_i are dot products against every candidate (the
    positive included in the denominator)."""
    f_p = np.asarray(f_p, dtype=np.float64)
    sims = candidates.vectors @ f_p / candidates.temperature
    if not 0 <= positive_index < len(sims):
        raise IndexError("positive_index outside the candidate set")
    m = sims.max()
    lse = m + np.log(np.sum(np.exp(sims - m)))
    return float(lse - sims[positive_index])
