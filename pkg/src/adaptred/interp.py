"""Catmull-Rom interpolation helpers shared by tables and transport code."""

from __future__ import annotations

import numpy as np


def cr_weights(s):
    """Catmull-Rom basis weights for normalized offset s in [0, 1]."""
    s2 = s * s
    s3 = s2 * s
    return np.array([-0.5 * s3 + s2 - 0.5 * s,
                     1.5 * s3 - 2.5 * s2 + 1.0,
                     -1.5 * s3 + 2.0 * s2 + 0.5 * s,
                     0.5 * s3 - 0.5 * s2])


class PeriodicColumns:
    """Periodic cubic interpolation in theta for a (K, ...) table.

    Values are assumed sampled at theta_k = 2 pi k / K. Evaluation at a node
    reproduces the stored value exactly.
    """

    def __init__(self, values):
        self.values = np.asarray(values, dtype=float)
        self.K = self.values.shape[0]

    def __call__(self, theta):
        pos = (np.mod(theta, 2.0 * np.pi)) * self.K / (2.0 * np.pi)
        k = int(pos)
        if k >= self.K:
            k = self.K - 1
        s = pos - k
        w = cr_weights(s)
        idx = [(k - 1) % self.K, k, (k + 1) % self.K, (k + 2) % self.K]
        return np.einsum("w,w...->...", w, self.values[idx])


def cr_nonuniform(xs, ys, x):
    """Catmull-Rom through (xs, ys) at scalar x; ys may be (P, ...).

    Non-uniform nodes use the centripetal-free finite-difference tangent
    form; edge intervals fall back to one-sided quadratic extrapolated ghost
    nodes. Node queries reproduce node values.
    """
    xs = np.asarray(xs, dtype=float)
    P = len(xs)
    if P == 1:
        return np.array(ys[0], copy=True)
    i = int(np.searchsorted(xs, x) - 1)
    i = min(max(i, 0), P - 2)
    h = xs[i + 1] - xs[i]
    s = (x - xs[i]) / h
    y0, y1 = np.asarray(ys[i], float), np.asarray(ys[i + 1], float)
    # tangents scaled to the local interval
    if i - 1 >= 0:
        m0 = (np.asarray(ys[i + 1], float) - np.asarray(ys[i - 1], float)) \
            / (xs[i + 1] - xs[i - 1]) * h
    else:
        m0 = (y1 - y0)
    if i + 2 < P:
        m1 = (np.asarray(ys[i + 2], float) - y0) / (xs[i + 2] - xs[i]) * h
    else:
        m1 = (y1 - y0)
    if P == 2:
        m0 = m1 = (y1 - y0)
    s2, s3 = s * s, s * s * s
    h00 = 2 * s3 - 3 * s2 + 1
    h10 = s3 - 2 * s2 + s
    h01 = -2 * s3 + 3 * s2
    h11 = s3 - s2
    return h00 * y0 + h10 * m0 + h01 * y1 + h11 * m1
