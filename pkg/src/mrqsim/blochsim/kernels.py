"""Per-isochromat kernels.

Each public function dispatches to a numba kernel (``_nb_*``) or a numpy
twin (``_np_*``) depending on :data:`mrqsim._accel.USE_NUMBA`. Both paths
implement the same closed-form maps; they agree to rounding, not bitwise.

Array layout: magnetisation ``m`` is ``(n, 3)`` float64 holding
``(Mx, My, Mz)`` relative to the equilibrium ``M0 = 1``.

Free precession rotates the transverse component by ``-delta_omega * t``
about +z (right-handed rotation with positive gamma).
"""

import math

import numpy as np

from .. import _accel
from .._accel import njit, prange

LEAF = 256  # block length of the pairwise reduction


def rotation_matrix(axis, angle):
    """Right-handed 3x3 rotation about ``x``, ``y`` or ``z``."""
    c, s = math.cos(angle), math.sin(angle)
    if axis == "x":
        return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    if axis == "y":
        return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    if axis == "z":
        return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    raise ValueError(f"axis must be x, y or z; got {axis!r}")


def _decay(duration, tconst):
    if math.isinf(tconst):
        return 1.0
    return math.exp(-duration / tconst)


# -- rotation ---------------------------------------------------------------

@njit(parallel=True, cache=True)
def _nb_rotate(m, r):
    out = np.empty_like(m)
    for i in prange(m.shape[0]):
        x, y, z = m[i, 0], m[i, 1], m[i, 2]
        out[i, 0] = r[0, 0] * x + r[0, 1] * y + r[0, 2] * z
        out[i, 1] = r[1, 0] * x + r[1, 1] * y + r[1, 2] * z
        out[i, 2] = r[2, 0] * x + r[2, 1] * y + r[2, 2] * z
    return out


def _np_rotate(m, r):
    return m @ r.T


def rotate(m, r):
    if _accel.USE_NUMBA:
        return _nb_rotate(m, r)
    return _np_rotate(m, r)


# -- free precession with relaxation ----------------------------------------

@njit(parallel=True, cache=True)
def _nb_free_evolve(m, dw, duration, e1, e2):
    out = np.empty_like(m)
    for i in prange(m.shape[0]):
        a = -dw[i] * duration
        c = math.cos(a)
        s = math.sin(a)
        x, y = m[i, 0], m[i, 1]
        out[i, 0] = (x * c - y * s) * e2
        out[i, 1] = (x * s + y * c) * e2
        out[i, 2] = 1.0 - (1.0 - m[i, 2]) * e1
    return out


def _np_free_evolve(m, dw, duration, e1, e2):
    a = -dw * duration
    c, s = np.cos(a), np.sin(a)
    out = np.empty_like(m)
    out[:, 0] = (m[:, 0] * c - m[:, 1] * s) * e2
    out[:, 1] = (m[:, 0] * s + m[:, 1] * c) * e2
    out[:, 2] = 1.0 - (1.0 - m[:, 2]) * e1
    return out


def free_evolve(m, dw, duration, t1, t2):
    e1, e2 = _decay(duration, t1), _decay(duration, t2)
    if _accel.USE_NUMBA:
        return _nb_free_evolve(m, dw, float(duration), e1, e2)
    return _np_free_evolve(m, dw, float(duration), e1, e2)


# -- deterministic weighted sum -----------------------------------------------
#
# The ensemble sum is reduced in a fixed tree: contiguous leaves of LEAF
# isochromats are summed left to right, then leaf sums are combined pairwise.
# The tree depends only on n, so the result is identical for any thread count.

@njit(cache=True)
def _nb_tree(partial):
    k = partial.shape[0]
    buf = partial.copy()
    while k > 1:
        half = k // 2
        for j in range(half):
            for c in range(3):
                buf[j, c] = buf[2 * j, c] + buf[2 * j + 1, c]
        if k % 2 == 1:
            for c in range(3):
                buf[half, c] = buf[k - 1, c]
            k = half + 1
        else:
            k = half
    return buf[0].copy()


@njit(parallel=True, cache=True)
def _nb_weighted_sum(m, w):
    n = m.shape[0]
    nleaf = max(1, (n + LEAF - 1) // LEAF)
    partial = np.zeros((nleaf, 3))
    for b in prange(nleaf):
        lo = b * LEAF
        hi = min(n, lo + LEAF)
        sx = 0.0
        sy = 0.0
        sz = 0.0
        for i in range(lo, hi):
            sx += w[i] * m[i, 0]
            sy += w[i] * m[i, 1]
            sz += w[i] * m[i, 2]
        partial[b, 0] = sx
        partial[b, 1] = sy
        partial[b, 2] = sz
    return _nb_tree(partial)


def _np_tree(partial):
    buf = partial.copy()
    while buf.shape[0] > 1:
        k = buf.shape[0]
        paired = buf[: k - k % 2 : 2] + buf[1 : k - k % 2 : 2]
        buf = np.concatenate([paired, buf[k - 1 :]]) if k % 2 else paired
    return buf[0].copy()


def _np_weighted_sum(m, w):
    n = m.shape[0]
    nleaf = max(1, -(-n // LEAF))
    pad = nleaf * LEAF - n
    wm = w[:, None] * m
    if pad:
        wm = np.concatenate([wm, np.zeros((pad, 3))])
    # cumulative left-to-right sum inside each leaf, matching the loop order
    leaves = wm.reshape(nleaf, LEAF, 3)
    partial = np.add.accumulate(leaves, axis=1)[:, -1, :]
    return _np_tree(partial)


def weighted_sum(m, w):
    """Weighted ensemble sum ``sum_i w_i m_i`` with a fixed reduction tree."""
    if m.shape[0] == 0:
        return np.zeros(3)
    if _accel.USE_NUMBA:
        return _nb_weighted_sum(m, w)
    return _np_weighted_sum(m, w)


@njit(cache=True)
def _nb_sum1(v):
    n = v.shape[0]
    nleaf = max(1, (n + LEAF - 1) // LEAF)
    partial = np.zeros((nleaf, 3))
    for b in range(nleaf):
        s = 0.0
        for i in range(b * LEAF, min(n, b * LEAF + LEAF)):
            s += v[i]
        partial[b, 0] = s
    return _nb_tree(partial)[0]


def total(v):
    """Sum of a 1-D array with the same fixed tree as :func:`weighted_sum`."""
    v = np.ascontiguousarray(v, dtype=float)
    if v.shape[0] == 0:
        return 0.0
    if _accel.USE_NUMBA:
        return float(_nb_sum1(v))
    return float(_np_weighted_sum(np.stack([v, v, v], axis=1), np.ones(v.shape[0]))[0])


# -- evolved weighted sum without materialising the ensemble -----------------

@njit(parallel=True, cache=True)
def _nb_evolved_sum(m, dw, w, duration, e1, e2):
    n = m.shape[0]
    nleaf = max(1, (n + LEAF - 1) // LEAF)
    partial = np.zeros((nleaf, 3))
    for b in prange(nleaf):
        sx = 0.0
        sy = 0.0
        sz = 0.0
        for i in range(b * LEAF, min(n, b * LEAF + LEAF)):
            a = -dw[i] * duration
            c = math.cos(a)
            s = math.sin(a)
            x, y = m[i, 0], m[i, 1]
            sx += w[i] * ((x * c - y * s) * e2)
            sy += w[i] * ((x * s + y * c) * e2)
            sz += w[i] * (1.0 - (1.0 - m[i, 2]) * e1)
        partial[b, 0] = sx
        partial[b, 1] = sy
        partial[b, 2] = sz
    return _nb_tree(partial)


def evolved_sum(m, dw, w, duration, t1, t2):
    """Weighted sum of the ensemble after ``free_evolve(duration)``."""
    if m.shape[0] == 0:
        return np.zeros(3)
    e1, e2 = _decay(duration, t1), _decay(duration, t2)
    if _accel.USE_NUMBA:
        return _nb_evolved_sum(m, dw, w, float(duration), e1, e2)
    return _np_weighted_sum(_np_free_evolve(m, dw, float(duration), e1, e2), w)


# -- fine-step Bloch integrator (test oracle) --------------------------------
#
# Classical RK4 on dM/dt = M x (0, 0, -dw) - relaxation, which is the
# differential form of the closed-form map above. Shares nothing with it.

@njit(cache=True)
def _rhs(x, y, z, dw, r1, r2):
    return dw * y - r2 * x, -dw * x - r2 * y, r1 * (1.0 - z)


@njit(parallel=True, cache=True)
def _nb_rk4(m, dw, duration, nsteps, r1, r2):
    out = np.empty_like(m)
    h = duration / nsteps
    for i in prange(m.shape[0]):
        x, y, z = m[i, 0], m[i, 1], m[i, 2]
        d = dw[i]
        for _ in range(nsteps):
            k1x, k1y, k1z = _rhs(x, y, z, d, r1, r2)
            k2x, k2y, k2z = _rhs(x + 0.5 * h * k1x, y + 0.5 * h * k1y, z + 0.5 * h * k1z,
                                 d, r1, r2)
            k3x, k3y, k3z = _rhs(x + 0.5 * h * k2x, y + 0.5 * h * k2y, z + 0.5 * h * k2z,
                                 d, r1, r2)
            k4x, k4y, k4z = _rhs(x + h * k3x, y + h * k3y, z + h * k3z, d, r1, r2)
            x += h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
            y += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
            z += h / 6.0 * (k1z + 2.0 * k2z + 2.0 * k3z + k4z)
        out[i, 0] = x
        out[i, 1] = y
        out[i, 2] = z
    return out


def _np_rk4(m, dw, duration, nsteps, r1, r2):
    h = duration / nsteps
    x, y, z = m[:, 0].copy(), m[:, 1].copy(), m[:, 2].copy()

    def rhs(x, y, z):
        return dw * y - r2 * x, -dw * x - r2 * y, r1 * (1.0 - z)

    for _ in range(nsteps):
        k1 = rhs(x, y, z)
        k2 = rhs(x + 0.5 * h * k1[0], y + 0.5 * h * k1[1], z + 0.5 * h * k1[2])
        k3 = rhs(x + 0.5 * h * k2[0], y + 0.5 * h * k2[1], z + 0.5 * h * k2[2])
        k4 = rhs(x + h * k3[0], y + h * k3[1], z + h * k3[2])
        x = x + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
        y = y + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
        z = z + h / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
    return np.stack([x, y, z], axis=1)


def rk4_evolve(m, dw, duration, nsteps, t1, t2):
    r1 = 0.0 if math.isinf(t1) else 1.0 / t1
    r2 = 0.0 if math.isinf(t2) else 1.0 / t2
    if duration == 0 or nsteps == 0:
        return m.copy()
    if _accel.USE_NUMBA:
        return _nb_rk4(m, dw, float(duration), int(nsteps), r1, r2)
    return _np_rk4(m, dw, float(duration), int(nsteps), r1, r2)
