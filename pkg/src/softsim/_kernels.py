"""Numba-compiled inner loops.

Everything here is sequential and iterates in a fixed order so results are
bit-reproducible run to run.  The pure-python reference implementations in
the sibling modules call the same per-element helpers, keeping the batch and
single-constraint paths consistent.
"""
import math

import numpy as np
from numba import njit

# ---------------------------------------------------------------------------
# neighbor search


@njit(cache=True)
def neighbor_csr(positions, sorted_indices, cell_ids, cell_starts, origin, dims, cell_size, radius, max_neighborhood):
    n = positions.shape[0]
    counts = np.zeros(n, dtype=np.int64)
    nbr = np.full((n, max_neighborhood), -1, dtype=np.int64)
    dist = np.empty((n, max_neighborhood), dtype=np.float64)
    r2 = radius * radius
    reach = int(math.ceil(radius / cell_size))
    for i in range(n):
        px, py, pz = positions[i, 0], positions[i, 1], positions[i, 2]
        cx = int(math.floor((px - origin[0]) / cell_size))
        cy = int(math.floor((py - origin[1]) / cell_size))
        cz = int(math.floor((pz - origin[2]) / cell_size))
        cnt = 0
        for dz in range(-reach, reach + 1):
            for dy in range(-reach, reach + 1):
                for dx in range(-reach, reach + 1):
                    gx, gy, gz = cx + dx, cy + dy, cz + dz
                    if gx < 0 or gy < 0 or gz < 0 or gx >= dims[0] or gy >= dims[1] or gz >= dims[2]:
                        continue
                    flat = gx + dims[0] * (gy + dims[1] * gz)
                    k = np.searchsorted(cell_ids, flat)
                    if k >= len(cell_ids) or cell_ids[k] != flat:
                        continue
                    for s in range(cell_starts[k], cell_starts[k + 1]):
                        j = sorted_indices[s]
                        if j == i:
                            continue
                        ddx = positions[j, 0] - px
                        ddy = positions[j, 1] - py
                        ddz = positions[j, 2] - pz
                        d2 = ddx * ddx + ddy * ddy + ddz * ddz
                        if d2 > r2:
                            continue
                        d = math.sqrt(d2)
                        if cnt < max_neighborhood:
                            # insertion keeping nearest-first order
                            pos = cnt
                            while pos > 0 and dist[i, pos - 1] > d:
                                dist[i, pos] = dist[i, pos - 1]
                                nbr[i, pos] = nbr[i, pos - 1]
                                pos -= 1
                            dist[i, pos] = d
                            nbr[i, pos] = j
                            cnt += 1
                        elif d < dist[i, cnt - 1]:
                            pos = cnt - 1
                            while pos > 0 and dist[i, pos - 1] > d:
                                dist[i, pos] = dist[i, pos - 1]
                                nbr[i, pos] = nbr[i, pos - 1]
                                pos -= 1
                            dist[i, pos] = d
                            nbr[i, pos] = j
        counts[i] = cnt
    starts = np.zeros(n + 1, dtype=np.int64)
    for i in range(n):
        starts[i + 1] = starts[i] + counts[i]
    out = np.empty(starts[n], dtype=np.int64)
    for i in range(n):
        for k in range(counts[i]):
            out[starts[i] + k] = nbr[i, k]
    return starts, out


# ---------------------------------------------------------------------------
# cloth constraints


@njit(cache=True)
def project_stretch_batch(pred, inv_mass, edges, rest, kprime):
    """Gauss-Seidel pass over all stretch constraints, in edge order."""
    for e in range(edges.shape[0]):
        i = edges[e, 0]
        j = edges[e, 1]
        wi = inv_mass[i]
        wj = inv_mass[j]
        wsum = wi + wj
        if wsum <= 0.0:
            continue
        dx = pred[i, 0] - pred[j, 0]
        dy = pred[i, 1] - pred[j, 1]
        dz = pred[i, 2] - pred[j, 2]
        ln = math.sqrt(dx * dx + dy * dy + dz * dz)
        if ln < 1e-12:
            continue
        s = kprime * (ln - rest[e]) / (wsum * ln)
        pred[i, 0] -= wi * s * dx
        pred[i, 1] -= wi * s * dy
        pred[i, 2] -= wi * s * dz
        pred[j, 0] += wj * s * dx
        pred[j, 1] += wj * s * dy
        pred[j, 2] += wj * s * dz


@njit(cache=True)
def bend_deltas(p1, p2, p3, p4, w, phi0, kprime):
    """Dihedral-angle bend projection for edge (p1,p2) with wings p3, p4.

    Returns a (4,3) array of position corrections.  Degenerate wings give
    zero corrections.
    """
    out = np.zeros((4, 3))
    e = p2 - p1
    u3 = p3 - p1
    u4 = p4 - p1
    c1 = np.cross(e, u3)
    c2 = np.cross(e, u4)
    l1 = math.sqrt(c1[0] ** 2 + c1[1] ** 2 + c1[2] ** 2)
    l2 = math.sqrt(c2[0] ** 2 + c2[1] ** 2 + c2[2] ** 2)
    if l1 < 1e-12 or l2 < 1e-12:
        return out
    n1 = c1 / l1
    n2 = c2 / l2
    d = n1[0] * n2[0] + n1[1] * n2[1] + n1[2] * n2[2]
    if d > 1.0:
        d = 1.0
    elif d < -1.0:
        d = -1.0
    q3 = (np.cross(e, n2) + np.cross(n1, e) * d) / l1
    q4 = (np.cross(e, n1) + np.cross(n2, e) * d) / l2
    q2 = -(np.cross(u3, n2) + np.cross(n1, u3) * d) / l1 \
         - (np.cross(u4, n1) + np.cross(n2, u4) * d) / l2
    q1 = -q2 - q3 - q4
    denom = 0.0
    denom += w[0] * (q1[0] ** 2 + q1[1] ** 2 + q1[2] ** 2)
    denom += w[1] * (q2[0] ** 2 + q2[1] ** 2 + q2[2] ** 2)
    denom += w[2] * (q3[0] ** 2 + q3[1] ** 2 + q3[2] ** 2)
    denom += w[3] * (q4[0] ** 2 + q4[1] ** 2 + q4[2] ** 2)
    if denom < 1e-18:
        return out
    sin2 = 1.0 - d * d
    if sin2 < 1e-14:
        return out
    angle = math.acos(d)
    scale = kprime * math.sqrt(sin2) * (angle - phi0) / denom
    out[0] = -w[0] * scale * q1
    out[1] = -w[1] * scale * q2
    out[2] = -w[2] * scale * q3
    out[3] = -w[3] * scale * q4
    return out


@njit(cache=True)
def project_bend_batch(pred, inv_mass, bends, phi0, kprime):
    """Gauss-Seidel pass over all bend constraints (i, j, k, l rows).

    Scalar form of bend_deltas, allocation-free for speed; the two are kept
    consistent by a dedicated test."""
    for b in range(bends.shape[0]):
        i, j, k, l = bends[b, 0], bends[b, 1], bends[b, 2], bends[b, 3]
        w1, w2, w3, w4 = inv_mass[i], inv_mass[j], inv_mass[k], inv_mass[l]
        ex = pred[j, 0] - pred[i, 0]
        ey = pred[j, 1] - pred[i, 1]
        ez = pred[j, 2] - pred[i, 2]
        u3x = pred[k, 0] - pred[i, 0]
        u3y = pred[k, 1] - pred[i, 1]
        u3z = pred[k, 2] - pred[i, 2]
        u4x = pred[l, 0] - pred[i, 0]
        u4y = pred[l, 1] - pred[i, 1]
        u4z = pred[l, 2] - pred[i, 2]
        c1x = ey * u3z - ez * u3y
        c1y = ez * u3x - ex * u3z
        c1z = ex * u3y - ey * u3x
        c2x = ey * u4z - ez * u4y
        c2y = ez * u4x - ex * u4z
        c2z = ex * u4y - ey * u4x
        l1 = math.sqrt(c1x * c1x + c1y * c1y + c1z * c1z)
        l2 = math.sqrt(c2x * c2x + c2y * c2y + c2z * c2z)
        if l1 < 1e-12 or l2 < 1e-12:
            continue
        n1x, n1y, n1z = c1x / l1, c1y / l1, c1z / l1
        n2x, n2y, n2z = c2x / l2, c2y / l2, c2z / l2
        d = n1x * n2x + n1y * n2y + n1z * n2z
        if d > 1.0:
            d = 1.0
        elif d < -1.0:
            d = -1.0
        sin2 = 1.0 - d * d
        if sin2 < 1e-14:
            continue
        # q3 = (e x n2 + (n1 x e) d) / l1
        q3x = (ey * n2z - ez * n2y + (n1y * ez - n1z * ey) * d) / l1
        q3y = (ez * n2x - ex * n2z + (n1z * ex - n1x * ez) * d) / l1
        q3z = (ex * n2y - ey * n2x + (n1x * ey - n1y * ex) * d) / l1
        # q4 = (e x n1 + (n2 x e) d) / l2
        q4x = (ey * n1z - ez * n1y + (n2y * ez - n2z * ey) * d) / l2
        q4y = (ez * n1x - ex * n1z + (n2z * ex - n2x * ez) * d) / l2
        q4z = (ex * n1y - ey * n1x + (n2x * ey - n2y * ex) * d) / l2
        # q2 = -(u3 x n2 + (n1 x u3) d)/l1 - (u4 x n1 + (n2 x u4) d)/l2
        q2x = -(u3y * n2z - u3z * n2y + (n1y * u3z - n1z * u3y) * d) / l1 \
              - (u4y * n1z - u4z * n1y + (n2y * u4z - n2z * u4y) * d) / l2
        q2y = -(u3z * n2x - u3x * n2z + (n1z * u3x - n1x * u3z) * d) / l1 \
              - (u4z * n1x - u4x * n1z + (n2z * u4x - n2x * u4z) * d) / l2
        q2z = -(u3x * n2y - u3y * n2x + (n1x * u3y - n1y * u3x) * d) / l1 \
              - (u4x * n1y - u4y * n1x + (n2x * u4y - n2y * u4x) * d) / l2
        q1x = -q2x - q3x - q4x
        q1y = -q2y - q3y - q4y
        q1z = -q2z - q3z - q4z
        denom = (w1 * (q1x * q1x + q1y * q1y + q1z * q1z)
                 + w2 * (q2x * q2x + q2y * q2y + q2z * q2z)
                 + w3 * (q3x * q3x + q3y * q3y + q3z * q3z)
                 + w4 * (q4x * q4x + q4y * q4y + q4z * q4z))
        if denom < 1e-18:
            continue
        scale = kprime * math.sqrt(sin2) * (math.acos(d) - phi0[b]) / denom
        pred[i, 0] -= w1 * scale * q1x
        pred[i, 1] -= w1 * scale * q1y
        pred[i, 2] -= w1 * scale * q1z
        pred[j, 0] -= w2 * scale * q2x
        pred[j, 1] -= w2 * scale * q2y
        pred[j, 2] -= w2 * scale * q2z
        pred[k, 0] -= w3 * scale * q3x
        pred[k, 1] -= w3 * scale * q3y
        pred[k, 2] -= w3 * scale * q3z
        pred[l, 0] -= w4 * scale * q4x
        pred[l, 1] -= w4 * scale * q4y
        pred[l, 2] -= w4 * scale * q4z


@njit(cache=True)
def project_pair_collisions(pred, inv_mass, starts, nbrs, rest_radius, detect_radius, active):
    """Push overlapping particle pairs apart to the sum of their rest radii.

    rest_radius / detect_radius are per-particle; a pair is handled once
    (i < j) when at least one side is flagged active (cloth-like groups).
    """
    n = pred.shape[0]
    for i in range(n):
        for s in range(starts[i], starts[i + 1]):
            j = nbrs[s]
            if j <= i:
                continue
            if not (active[i] or active[j]):
                continue
            detect = max(detect_radius[i], detect_radius[j])
            dx = pred[i, 0] - pred[j, 0]
            dy = pred[i, 1] - pred[j, 1]
            dz = pred[i, 2] - pred[j, 2]
            ln = math.sqrt(dx * dx + dy * dy + dz * dz)
            if ln > detect or ln < 1e-12:
                continue
            rest = rest_radius[i] + rest_radius[j]
            if ln >= rest:
                continue
            wsum = inv_mass[i] + inv_mass[j]
            if wsum <= 0.0:
                continue
            c = (ln - rest) / (wsum * ln)
            pred[i, 0] -= inv_mass[i] * c * dx
            pred[i, 1] -= inv_mass[i] * c * dy
            pred[i, 2] -= inv_mass[i] * c * dz
            pred[j, 0] += inv_mass[j] * c * dx
            pred[j, 1] += inv_mass[j] * c * dy
            pred[j, 2] += inv_mass[j] * c * dz


# ---------------------------------------------------------------------------
# position-based fluid


@njit(cache=True, inline="always")
def poly6(r, h):
    if r >= h:
        return 0.0
    x = h * h - r * r
    return 315.0 / (64.0 * math.pi * h ** 9) * x * x * x


@njit(cache=True, inline="always")
def spiky_grad_factor(r, h):
    """Scalar s such that grad W = s * rvec (rvec from j to i)."""
    if r <= 0.0 or r >= h:
        return 0.0
    x = h - r
    return -45.0 / (math.pi * h ** 6) * x * x / r


@njit(cache=True)
def fluid_densities(pred, starts, nbrs, lo, hi, mass, h):
    n = hi - lo
    rho = np.zeros(n)
    for i in range(lo, hi):
        acc = poly6(0.0, h) * mass
        for s in range(starts[i], starts[i + 1]):
            j = nbrs[s]
            if j < lo or j >= hi:
                continue
            dx = pred[i, 0] - pred[j, 0]
            dy = pred[i, 1] - pred[j, 1]
            dz = pred[i, 2] - pred[j, 2]
            r = math.sqrt(dx * dx + dy * dy + dz * dz)
            acc += mass * poly6(r, h)
        rho[i - lo] = acc
    return rho


@njit(cache=True)
def fluid_lambdas(pred, starts, nbrs, lo, hi, mass, h, rho0, rho, eps):
    n = hi - lo
    lam = np.zeros(n)
    scale = mass / rho0
    for i in range(lo, hi):
        gx = gy = gz = 0.0
        denom = 0.0
        for s in range(starts[i], starts[i + 1]):
            j = nbrs[s]
            if j < lo or j >= hi:
                continue
            dx = pred[i, 0] - pred[j, 0]
            dy = pred[i, 1] - pred[j, 1]
            dz = pred[i, 2] - pred[j, 2]
            r = math.sqrt(dx * dx + dy * dy + dz * dz)
            f = spiky_grad_factor(r, h) * scale
            gjx, gjy, gjz = -f * dx, -f * dy, -f * dz
            denom += gjx * gjx + gjy * gjy + gjz * gjz
            gx -= gjx
            gy -= gjy
            gz -= gjz
        denom += gx * gx + gy * gy + gz * gz
        c = rho[i - lo] / rho0 - 1.0
        lam[i - lo] = -c / (denom + eps)
    return lam


@njit(cache=True)
def fluid_deltas(pred, starts, nbrs, lo, hi, mass, h, rho0, lam):
    n = hi - lo
    dp = np.zeros((n, 3))
    scale = mass / rho0
    for i in range(lo, hi):
        ax = ay = az = 0.0
        for s in range(starts[i], starts[i + 1]):
            j = nbrs[s]
            if j < lo or j >= hi:
                continue
            dx = pred[i, 0] - pred[j, 0]
            dy = pred[i, 1] - pred[j, 1]
            dz = pred[i, 2] - pred[j, 2]
            r = math.sqrt(dx * dx + dy * dy + dz * dz)
            f = spiky_grad_factor(r, h) * scale * (lam[i - lo] + lam[j - lo])
            ax += f * dx
            ay += f * dy
            az += f * dz
        dp[i - lo, 0] = ax
        dp[i - lo, 1] = ay
        dp[i - lo, 2] = az
    return dp


@njit(cache=True)
def fluid_secondary(pred, vel, starts, nbrs, lo, hi, mass, h, rho0, c_visc, c_coh, c_tension, dt):
    """XSPH viscosity, pairwise cohesion, and normal-difference surface
    tension, applied as velocity increments.  Returns the increments."""
    n = hi - lo
    dv = np.zeros((n, 3))
    # surface normals from density-weighted kernel gradients
    normals = np.zeros((n, 3))
    if c_tension > 0.0:
        for i in range(lo, hi):
            for s in range(starts[i], starts[i + 1]):
                j = nbrs[s]
                if j < lo or j >= hi:
                    continue
                dx = pred[i, 0] - pred[j, 0]
                dy = pred[i, 1] - pred[j, 1]
                dz = pred[i, 2] - pred[j, 2]
                r = math.sqrt(dx * dx + dy * dy + dz * dz)
                f = spiky_grad_factor(r, h) * h * mass / rho0
                normals[i - lo, 0] -= f * dx
                normals[i - lo, 1] -= f * dy
                normals[i - lo, 2] -= f * dz
    for i in range(lo, hi):
        for s in range(starts[i], starts[i + 1]):
            j = nbrs[s]
            if j < lo or j >= hi:
                continue
            dx = pred[i, 0] - pred[j, 0]
            dy = pred[i, 1] - pred[j, 1]
            dz = pred[i, 2] - pred[j, 2]
            r = math.sqrt(dx * dx + dy * dy + dz * dz)
            w = poly6(r, h) / poly6(0.0, h)
            # XSPH: pull velocity toward neighbors
            dv[i - lo, 0] += c_visc * w * (vel[j, 0] - vel[i, 0])
            dv[i - lo, 1] += c_visc * w * (vel[j, 1] - vel[i, 1])
            dv[i - lo, 2] += c_visc * w * (vel[j, 2] - vel[i, 2])
            if r > 1e-9:
                if c_coh > 0.0:
                    # attraction along the pair axis, vanishing at the support edge
                    a = c_coh * w / r
                    dv[i - lo, 0] -= dt * a * dx
                    dv[i - lo, 1] -= dt * a * dy
                    dv[i - lo, 2] -= dt * a * dz
                if c_tension > 0.0:
                    nx = normals[i - lo, 0] - normals[j - lo, 0]
                    ny = normals[i - lo, 1] - normals[j - lo, 1]
                    nz = normals[i - lo, 2] - normals[j - lo, 2]
                    dv[i - lo, 0] -= dt * c_tension * nx
                    dv[i - lo, 1] -= dt * c_tension * ny
                    dv[i - lo, 2] -= dt * c_tension * nz
    return dv
