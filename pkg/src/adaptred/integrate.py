"""Thin wrappers around scipy's adaptive Runge-Kutta integration.

All trajectory integration in the package goes through `solve` so that
tolerances stay consistent (atol 1e-10, rtol 1e-9 unless overridden).
A fixed-step RK4 kernel is provided for matrix transport along an orbit,
where integration nodes must line up exactly with the stored phase grid.
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import solve_ivp

RTOL = 1e-9
ATOL = 1e-10


def solve(f, t_span, y0, t_eval=None, rtol=RTOL, atol=ATOL, events=None,
          dense_output=False, max_step=np.inf, method="RK45"):
    """Integrate y' = f(t, y); raises RuntimeError on solver failure."""
    sol = solve_ivp(f, t_span, np.asarray(y0, dtype=float), method=method,
                    t_eval=t_eval, rtol=rtol, atol=atol, events=events,
                    dense_output=dense_output, max_step=max_step)
    if sol.status == -1:
        raise RuntimeError(f"integration failed at t={sol.t[-1]:.6g}: {sol.message}")
    return sol


def flow(f, y0, t0, t1, rtol=RTOL, atol=ATOL):
    """End state of the flow map from t0 to t1."""
    if t1 == t0:
        return np.array(y0, dtype=float)
    sol = solve(f, (t0, t1), y0, rtol=rtol, atol=atol)
    return sol.y[:, -1]


def rk4_step(f, t, y, dt):
    k1 = f(t, y)
    k2 = f(t + 0.5 * dt, y + 0.5 * dt * k1)
    k3 = f(t + 0.5 * dt, y + 0.5 * dt * k2)
    k4 = f(t + dt, y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_span(f, y0, t0, t1, n_steps):
    """Fixed-step RK4 over [t0, t1]; returns the end state only."""
    y = np.array(y0, dtype=float)
    dt = (t1 - t0) / n_steps
    t = t0
    for _ in range(n_steps):
        y = rk4_step(f, t, y, dt)
        t += dt
    return y


def rk4_dense(f, y0, t_nodes, n_sub):
    """Fixed-step RK4 hitting every node in t_nodes exactly.

    Returns an array of states with shape (len(t_nodes), len(y0));
    n_sub RK4 substeps are taken inside each node interval.
    """
    t_nodes = np.asarray(t_nodes, dtype=float)
    out = np.empty((len(t_nodes), len(y0)))
    y = np.array(y0, dtype=float)
    out[0] = y
    for i in range(len(t_nodes) - 1):
        y = rk4_span(f, y, t_nodes[i], t_nodes[i + 1], n_sub)
        out[i + 1] = y
    return out
