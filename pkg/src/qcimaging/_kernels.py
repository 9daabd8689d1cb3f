"""Compiled velocity-Verlet kernels for batches of 1-D trajectories.

The potential is a power series, so ``V``, ``V'`` and ``V''`` are Horner
evaluations of coefficient arrays.  Alongside ``(x, p)`` each step carries

* the discrete Lagrangian ``dt p_half^2/2m - dt (V(x_n) + V(x_n+1))/2``,
  which generates the Verlet map (its endpoint derivatives are ``-p_i`` and
  ``p_f``), plus the constant-force term ``-dt^3 V'(x_n) V'(x_n+1)/24m``
  that makes the action exact for affine potentials, and
* the tangent map of the step, built from three unimodular shears.
"""

import numpy as np
from numba import config, njit, prange

config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]


@njit(cache=True, inline="always")
def _horner(c, x):
    acc = 0.0
    for k in range(c.shape[0] - 1, -1, -1):
        acc = acc * x + c[k]
    return acc


@njit(cache=True)
def _one(x, p, n, dt, c, d1, d2, m):
    v0 = _horner(c, x)
    f0 = _horner(d1, x)
    k0 = _horner(d2, x)
    e0 = 0.5 * p * p / m + v0
    scale = 0.5 * p * p / m + abs(v0)
    drift = 0.0
    s = 0.0
    m11 = 1.0
    m12 = 0.0
    m21 = 0.0
    m22 = 1.0
    for _ in range(n):
        ph = p - 0.5 * dt * f0
        a21 = m21 - 0.5 * dt * k0 * m11
        a22 = m22 - 0.5 * dt * k0 * m12
        x1 = x + dt * ph / m
        m11 = m11 + dt * a21 / m
        m12 = m12 + dt * a22 / m
        v1 = _horner(c, x1)
        f1 = _horner(d1, x1)
        k1 = _horner(d2, x1)
        p = ph - 0.5 * dt * f1
        m21 = a21 - 0.5 * dt * k1 * m11
        m22 = a22 - 0.5 * dt * k1 * m12
        s += dt * (0.5 * ph * ph / m - 0.5 * (v0 + v1)) - dt * dt * dt * f0 * f1 / (24.0 * m)
        x = x1
        v0 = v1
        f0 = f1
        k0 = k1
        kin = 0.5 * p * p / m
        d = abs(kin + v1 - e0)
        if d > drift:
            drift = d
        sc = kin + abs(v1)
        if sc > scale:
            scale = sc
    rel = drift / scale if scale > 0.0 else drift
    return x, p, s, m11, m12, m21, m22, rel


@njit(cache=True, parallel=True)
def verlet_batch(x0, p0, n, dt, c, d1, d2, m):
    """Integrate ``len(x0)`` trajectories for ``n`` steps of size ``dt``.

    Returns an ``(N, 8)`` array with columns
    ``x_f, p_f, S, M11, M12, M21, M22, relative_energy_drift``.
    """
    N = x0.shape[0]
    out = np.empty((N, 8))
    for i in prange(N):
        r = _one(x0[i], p0[i], n, dt, c, d1, d2, m)
        for j in range(8):
            out[i, j] = r[j]
    return out
