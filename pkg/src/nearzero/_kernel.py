"""Compiled RK4 loop for the Q-Learning flow in centred logit coordinates."""

import numpy as np
from numba import njit


@njit(cache=True)
def _log_softmax(z, offsets, out):
    for k in range(offsets.shape[0] - 1):
        a, b = offsets[k], offsets[k + 1]
        m = z[a]
        for i in range(a + 1, b):
            if z[i] > m:
                m = z[i]
        s = 0.0
        for i in range(a, b):
            s += np.exp(z[i] - m)
        lse = m + np.log(s)
        for i in range(a, b):
            out[i] = z[i] - lse


@njit(cache=True)
def _field(z, matrix, tf, offsets, x, out):
    # dz/dt = centre(M softmax(z)) - T z
    _log_softmax(z, offsets, x)
    for i in range(x.shape[0]):
        x[i] = np.exp(x[i])
    r = matrix @ x
    for k in range(offsets.shape[0] - 1):
        a, b = offsets[k], offsets[k + 1]
        mean = 0.0
        for i in range(a, b):
            mean += r[i]
        mean /= b - a
        for i in range(a, b):
            out[i] = r[i] - mean - tf[i] * z[i]


@njit(cache=True)
def rk4_logit(matrix, tf, offsets, z0, step, n_steps, record_every):
    """Returns ``(z_final, recorded_steps, recorded_log_probs, failed_step)``.

    ``failed_step`` is -1 on success, otherwise the step whose update was
    non-finite (integration stops there).
    """
    dim = z0.shape[0]
    n_rec = n_steps // record_every
    if n_steps % record_every != 0:
        n_rec += 1
    steps = np.empty(n_rec, dtype=np.int64)
    logs = np.empty((n_rec, dim))
    z = z0.copy()
    x = np.empty(dim)
    k1 = np.empty(dim)
    k2 = np.empty(dim)
    k3 = np.empty(dim)
    k4 = np.empty(dim)
    tmp = np.empty(dim)
    half = 0.5 * step
    j = 0
    for s in range(1, n_steps + 1):
        _field(z, matrix, tf, offsets, x, k1)
        for i in range(dim):
            tmp[i] = z[i] + half * k1[i]
        _field(tmp, matrix, tf, offsets, x, k2)
        for i in range(dim):
            tmp[i] = z[i] + half * k2[i]
        _field(tmp, matrix, tf, offsets, x, k3)
        for i in range(dim):
            tmp[i] = z[i] + step * k3[i]
        _field(tmp, matrix, tf, offsets, x, k4)
        ok = True
        for i in range(dim):
            tmp[i] = z[i] + (step / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            if not np.isfinite(tmp[i]):
                ok = False
        if not ok:
            return z, steps[:j], logs[:j], s
        z[:] = tmp
        if s % record_every == 0 or s == n_steps:
            steps[j] = s
            _log_softmax(z, offsets, logs[j])
            j += 1
    return z, steps[:j], logs[:j], -1
