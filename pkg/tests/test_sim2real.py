"""Depth noise, back-projection, chamfer, affine registration, InfoNCE."""
import numpy as np
import pytest

from conftest import brute_chamfer
from softsim.errors import Diverged, EmptyCloud
from softsim.sim2real import (
    AffineTransform,
    DepthImage,
    EmbeddingSet,
    NoiseParams,
    PointCloud,
    add_depth_noise,
    chamfer,
    depth_to_cloud,
    fit_affine,
    infonce_loss,
)


def depth_image(rng, w=40, h=30):
    d = rng.uniform(0.5, 2.0, size=w * h)
    return DepthImage(w, h, d)


# -------------------------------------------------------------------- types

def test_depth_image_shape_validation():
    with pytest.raises(ValueError):
        DepthImage(4, 4, np.zeros(15))
    with pytest.raises(ValueError):
        DepthImage(2, 2, [-1.0, 0, 0, 0])
    img = DepthImage(3, 2, np.arange(6, dtype=float))
    assert img.as_grid().shape == (2, 3)


def test_noise_params_validation():
    with pytest.raises(ValueError):
        NoiseParams(p_gaussian=1.2)
    with pytest.raises(ValueError):
        NoiseParams(p_gaussian=0.5, p_salt=0.4, p_pepper=0.2)  # sums past 1
    NoiseParams(p_gaussian=0.5, p_salt=0.3, p_pepper=0.2)  # exactly 1 is fine


def test_affine_transform_round_trip(rng):
    m = rng.normal(size=(3, 4))
    tr = AffineTransform(m)
    np.testing.assert_array_equal(AffineTransform.from_4x4(tr.as_4x4()).matrix, m)
    pts = rng.normal(size=(10, 3))
    np.testing.assert_allclose(tr.apply(pts), pts @ m[:, :3].T + m[:, 3])
    with pytest.raises(ValueError):
        AffineTransform.from_4x4(np.ones((4, 4)))


# -------------------------------------------------------------- depth noise

def test_noise_zero_probability_is_identity(rng):
    img = depth_image(rng)
    out = add_depth_noise(img, NoiseParams(), np.random.default_rng(0))
    np.testing.assert_array_equal(out.depths, img.depths)


def test_noise_salt_probability_one_shifts_everything(rng):
    img = depth_image(rng)
    p = NoiseParams(p_salt=1.0, salt_magnitude=0.07)
    out = add_depth_noise(img, p, np.random.default_rng(0))
    np.testing.assert_allclose(out.depths, img.depths + 0.07)


def test_noise_invalid_pixels_untouched(rng):
    d = rng.uniform(0.5, 2.0, size=100)
    d[::3] = 0.0
    img = DepthImage(10, 10, d)
    p = NoiseParams(sigma=0.1, p_gaussian=0.4, p_salt=0.3, p_pepper=0.3)
    out = add_depth_noise(img, p, np.random.default_rng(1))
    assert np.all(out.depths[::3] == 0.0)


def test_noise_statistics_match_probabilities():
    # 1e6 valid pixels; corruption counts must be within 3 binomial sigmas,
    # and the gaussian-perturbed pixels must show the requested variance
    n = 1_000_000
    img = DepthImage(1000, 1000, np.full(n, 5.0))
    p = NoiseParams(sigma=0.01, p_gaussian=0.2, p_salt=0.1, p_pepper=0.05,
                    salt_magnitude=1.0, pepper_magnitude=1.0)
    out = add_depth_noise(img, p, np.random.default_rng(42))
    delta = out.depths - 5.0
    n_salt = np.count_nonzero(delta == 1.0)
    n_pepper = np.count_nonzero(delta == -1.0)
    gauss = delta[(delta != 0) & (np.abs(delta) != 1.0)]
    for count, prob in ((n_salt, 0.1), (n_pepper, 0.05), (len(gauss), 0.2)):
        sigma = np.sqrt(n * prob * (1 - prob))
        assert abs(count - n * prob) < 3 * sigma
    assert gauss.std() == pytest.approx(0.01, rel=0.05)
    assert abs(gauss.mean()) < 3 * 0.01 / np.sqrt(len(gauss))


def test_noise_clamps_at_zero():
    img = DepthImage(2, 2, np.full(4, 0.01))
    p = NoiseParams(p_pepper=1.0, pepper_magnitude=0.05)
    out = add_depth_noise(img, p, np.random.default_rng(0))
    np.testing.assert_array_equal(out.depths, 0.0)


def test_noise_reproducible_by_seed(rng):
    img = depth_image(rng)
    p = NoiseParams(sigma=0.02, p_gaussian=0.5, p_salt=0.2, p_pepper=0.2)
    a = add_depth_noise(img, p, np.random.default_rng(9))
    b = add_depth_noise(img, p, np.random.default_rng(9))
    np.testing.assert_array_equal(a.depths, b.depths)


# ---------------------------------------------------------- back-projection

def test_depth_to_cloud_round_trip(rng):
    # project known 3D points through a pinhole, then back-project
    fx = fy = 100.0
    cx, cy = 20.0, 15.0
    w, h = 40, 30
    grid = np.zeros((h, w))
    pts_in = []
    for u, v, z in ((5, 7, 1.2), (30, 20, 0.8), (20, 15, 2.0)):
        grid[v, u] = z
        pts_in.append([z * (u - cx) / fx, z * (v - cy) / fy, z])
    cloud = depth_to_cloud(DepthImage(w, h, grid.ravel()), fx, fy, cx, cy)
    got = sorted(cloud.points.tolist())
    np.testing.assert_allclose(got, sorted(pts_in), atol=1e-12)


def test_depth_to_cloud_skips_invalid():
    img = DepthImage(4, 4, np.zeros(16))
    assert len(depth_to_cloud(img, 100, 100, 2, 2)) == 0
    with pytest.raises(ValueError):
        depth_to_cloud(img, 0.0, 100, 2, 2)


# ------------------------------------------------------------------ chamfer

def test_chamfer_identical_clouds_zero(rng):
    a = PointCloud(rng.normal(size=(50, 3)))
    assert chamfer(a, a) == 0.0


def test_chamfer_hand_computed():
    a = PointCloud([[0, 0, 0], [1, 0, 0]])
    b = PointCloud([[0, 0, 0], [1, 0, 1]])
    # a->b: 0 and 1 (to (1,0,1)); b->a: 0 and 1
    assert chamfer(a, b) == pytest.approx(0.5 + 0.5)


def test_chamfer_matches_brute_force(rng):
    a = rng.normal(size=(500, 3))
    b = rng.normal(size=(400, 3)) + 0.3
    got = chamfer(PointCloud(a), PointCloud(b))
    assert got == pytest.approx(brute_chamfer(a, b), abs=1e-12)


def test_chamfer_empty_raises(rng):
    with pytest.raises(EmptyCloud):
        chamfer(PointCloud(np.zeros((0, 3))), PointCloud(rng.normal(size=(5, 3))))


# ------------------------------------------------------------- registration

def test_fit_affine_recovers_known_transform(rng):
    src = rng.normal(size=(200, 3))
    a_true = np.eye(3) + 0.1 * rng.normal(size=(3, 3))
    t_true = np.array([0.3, -0.2, 0.5])
    tgt = src @ a_true.T + t_true
    tr, val = fit_affine(PointCloud(src), PointCloud(tgt))
    assert val < 1e-10
    np.testing.assert_allclose(tr.linear, a_true, atol=1e-5)
    np.testing.assert_allclose(tr.translation, t_true, atol=1e-5)


def test_fit_affine_never_increases_chamfer(rng):
    src = PointCloud(rng.normal(size=(100, 3)))
    tgt = PointCloud(rng.normal(size=(100, 3)) * 1.2 + 0.1)
    before = chamfer(src, tgt)
    tr, val = fit_affine(src, tgt)
    assert val <= before + 1e-12
    assert val == pytest.approx(chamfer(PointCloud(tr.apply(src.points)), tgt), abs=1e-9)


def test_fit_affine_diverges_with_huge_fixed_step(rng):
    src = PointCloud(rng.normal(size=(50, 3)))
    tgt = PointCloud(rng.normal(size=(50, 3)) + 2.0)
    with pytest.raises(Diverged) as exc:
        fit_affine(src, tgt, lr=10.0)
    best, best_val = exc.value.best
    assert np.isfinite(best_val)  # best-so-far still usable
    assert isinstance(best, AffineTransform)


def test_fit_affine_needs_enough_points(rng):
    with pytest.raises(EmptyCloud):
        fit_affine(PointCloud(rng.normal(size=(3, 3))),
                   PointCloud(rng.normal(size=(50, 3))))


# ------------------------------------------------------------------ InfoNCE

def test_infonce_uniform_candidates_is_log_m(rng):
    # identical similarities: loss = ln(m) regardless of temperature
    for m in (2, 10, 100):
        cands = EmbeddingSet(np.tile(rng.normal(size=3), (m, 1)), temperature=0.3)
        f = rng.normal(size=3)
        assert infonce_loss(f, 0, cands) == pytest.approx(np.log(m), abs=1e-12)


def test_infonce_decreases_as_positive_dominates():
    d = 4
    f = np.zeros(d); f[0] = 1.0
    losses = []
    for scale in (0.0, 1.0, 3.0, 10.0):
        vecs = np.zeros((5, d))
        vecs[0, 0] = scale  # positive grows more similar
        losses.append(infonce_loss(f, 0, EmbeddingSet(vecs, temperature=1.0)))
    assert losses == sorted(losses, reverse=True)


def test_infonce_dominant_positive_limit():
    # sims: positive = 10/tau in excess of the m-1 zeros -> loss ~ (m-1)e^-10
    m, tau = 6, 1.0
    vecs = np.zeros((m, 1))
    vecs[0, 0] = 10.0
    loss = infonce_loss(np.array([1.0]), 0, EmbeddingSet(vecs, temperature=tau))
    assert loss == pytest.approx((m - 1) * np.exp(-10.0), rel=1e-3)


def test_infonce_stable_for_large_similarities(rng):
    # naive exp overflows; the stabilized form must match a mpmath-free
    # reference computed with the max subtracted manually
    vecs = rng.normal(size=(8, 5)) * 500.0
    f = rng.normal(size=5)
    sims = vecs @ f / 0.1
    ref = float(np.log(np.sum(np.exp(sims - sims.max()))) + sims.max() - sims[2])
    got = infonce_loss(f, 2, EmbeddingSet(vecs, temperature=0.1))
    assert np.isfinite(got)
    assert got == pytest.approx(ref, abs=1e-9)


def test_infonce_index_validation(rng):
    cands = EmbeddingSet(rng.normal(size=(4, 3)))
    with pytest.raises(IndexError):
        infonce_loss(rng.normal(size=3), 4, cands)
    with pytest.raises(ValueError):
        EmbeddingSet(rng.normal(size=(4, 3)), temperature=0.0)
