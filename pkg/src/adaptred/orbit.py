"""Periodic orbits: single shooting, phase anchoring, parameter continuation."""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import integrate
from .errors import AnchoringError, ContinuationError, OrbitNotFoundError
from .models import AnchorSpec, ParamModel

SHOOT_TOL = 1e-9
MAX_NEWTON = 50


@dataclass
class PeriodicOrbit:
    """Stable limit cycle sampled at K uniform phases theta_k = 2 pi k / K."""

    params: np.ndarray
    period: float
    samples: np.ndarray  # (K, N), samples[0] is the theta = 0 state
    anchor: AnchorSpec | None = None

    @property
    def omega(self) -> float:
        return 2.0 * np.pi / self.period

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def thetas(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.n_samples) / self.n_samples

    def state_at(self, theta):
        """Orbit point at arbitrary phase via periodic cubic interpolation."""
        return interp_orbit(self.samples, theta)


def _cubic_weights(s):
    # Catmull-Rom weights for normalized offset s in [0, 1]
    s2, s3 = s * s, s * s * s
    return (np.array([-0.5 * s3 + s2 - 0.5 * s,
                      1.5 * s3 - 2.5 * s2 + 1.0,
                      -1.5 * s3 + 2.0 * s2 + 0.5 * s,
                      0.5 * s3 - 0.5 * s2]))


def interp_orbit(samples, theta):
    """Periodic Catmull-Rom interpolation of uniformly sampled orbit states."""
    K = samples.shape[0]
    pos = np.mod(np.asarray(theta, dtype=float), 2.0 * np.pi) * K / (2.0 * np.pi)
    k = np.floor(pos).astype(int)
    k = np.minimum(k, K - 1)  # guard pos == K from roundoff
    s = pos - k
    if np.ndim(theta) == 0:
        w = _cubic_weights(float(s))
        idx = (k + np.arange(-1, 3)) % K
        return w @ samples[idx]
    w = _cubic_weights(s[None, :]).T  # (q, 4)
    idx = (k[:, None] + np.arange(-1, 3)[None, :]) % K
    return np.einsum("qw,qwn->qn", w, samples[idx])


def _shooting_residual(model, p, x0, T, rtol, atol):
    """Flow x0 over [0, T] along with the variational matrix."""
    n = model.dim

    def rhs(t, y):
        x = y[:n]
        M = y[n:].reshape(n, n)
        dx = model.field(x, p)
        dM = model.jacobian(x, p) @ M
        return np.concatenate([dx, dM.ravel()])

    y0 = np.concatenate([x0, np.eye(n).ravel()])
    sol = integrate.solve(rhs, (0.0, T), y0, rtol=rtol, atol=atol)
    yT = sol.y[:, -1]
    return yT[:n], yT[n:].reshape(n, n)


def find_orbit(model: ParamModel, p, x_guess, T_guess, n_samples=256,
               settle_periods=0, rtol=1e-10, atol=1e-12) -> PeriodicOrbit:
    """Locate the stable periodic orbit by single-shooting Newton.

    The phase condition fixes the Newton iterate to the hyperplane through
    the (settled) initial guess, normal to the flow there. Samples are laid
    down at K uniform phases by re-integrating the converged orbit.
    """
    p = model.check_params(p)
    x0 = np.asarray(x_guess, dtype=float).copy()
    if settle_periods > 0:
        x0 = integrate.flow(lambda t, x: model.field(x, p), x0, 0.0,
                            settle_periods * T_guess, rtol=1e-9, atol=1e-11)
    T = float(T_guess)
    x_ref = x0.copy()
    f_ref = model.field(x_ref, p)
    nrm = f_ref / np.linalg.norm(f_ref)
    n = model.dim

    last_res = np.inf
    for _ in range(MAX_NEWTON):
        xT, M = _shooting_residual(model, p, x0, T, rtol, atol)
        res = np.concatenate([xT - x0, [nrm @ (x0 - x_ref)]])
        scale = max(1.0, float(np.linalg.norm(x0)))
        last_res = np.linalg.norm(res) / scale
        if last_res < SHOOT_TOL:
            break
        A = np.zeros((n + 1, n + 1))
        A[:n, :n] = M - np.eye(n)
        A[:n, n] = model.field(xT, p)
        A[n, :n] = nrm
        try:
            delta = np.linalg.solve(A, -res)
        except np.linalg.LinAlgError as exc:
            raise OrbitNotFoundError(f"singular shooting system: {exc}", residual=last_res)
        # damp large steps; the period should stay within a factor of 2
        step = 1.0
        if abs(delta[n]) > 0.25 * T:
            step = 0.25 * T / abs(delta[n])
        x0 = x0 + step * delta[:n]
        T = T + step * delta[n]
        if T <= 0:
            raise OrbitNotFoundError("period iterate became non-positive", residual=last_res)
    else:
        raise OrbitNotFoundError(
            f"shooting Newton did not converge in {MAX_NEWTON} iterations", residual=last_res)

    samples = _resample(model, p, x0, T, n_samples, rtol, atol)
    return PeriodicOrbit(params=p, period=T, samples=samples)


def _resample(model, p, x0, T, K, rtol=1e-10, atol=1e-12):
    sol = integrate.solve(lambda t, x: model.field(x, p), (0.0, T), x0,
                          t_eval=np.linspace(0.0, T, K + 1), rtol=rtol, atol=atol)
    return sol.y[:, :K].T.copy()


def _anchor_time(model, orbit: PeriodicOrbit, anchor: AnchorSpec):
    """Time offset t* in [0, T) of the anchor point, to sub-sample precision."""
    K, T = orbit.n_samples, orbit.period
    dt = T / K
    x = orbit.samples
    p = orbit.params
    if anchor.kind == "section":
        g = x @ anchor.normal - anchor.offset
        gn = np.roll(g, -1)
        for k in range(K):
            crosses = (g[k] <= 0.0 < gn[k]) if anchor.direction > 0 else (g[k] >= 0.0 > gn[k])
            if crosses:
                # refine by bisection on the local flow
                lo, hi = 0.0, dt
                xk = x[k]
                for _ in range(80):
                    mid = 0.5 * (lo + hi)
                    xm = integrate.flow(lambda t, y: model.field(y, p), xk, 0.0, mid)
                    gm = xm @ anchor.normal - anchor.offset
                    if (gm > 0) == (anchor.direction > 0):
                        hi = mid
                    else:
                        lo = mid
                    if hi - lo < 1e-13 * T:
                        break
                return (k * dt + 0.5 * (lo + hi)) % T
        raise AnchoringError("section anchor never crossed on the orbit")
    # feature_max: quadratic fit through the three samples bracketing the max
    comp = x[:, anchor.state_index]
    k = int(np.argmax(comp))
    ym, y0, yp = comp[(k - 1) % K], comp[k], comp[(k + 1) % K]
    denom = ym - 2.0 * y0 + yp
    if denom >= 0:
        raise AnchoringError("feature-max anchor is not a strict local maximum")
    delta = 0.5 * (ym - yp) / denom
    return (k + delta) * dt % T


def anchor_phase(model: ParamModel, orbit: PeriodicOrbit,
                 anchor: AnchorSpec | None = None) -> PeriodicOrbit:
    """Shift the sampling origin so theta = 0 satisfies the anchor.

    The orbit curve itself is unchanged; only the phase origin moves.
    """
    anchor = anchor if anchor is not None else model.anchor
    t_star = _anchor_time(model, orbit, anchor)
    if t_star < 1e-12 * orbit.period or orbit.period - t_star < 1e-12 * orbit.period:
        return replace(orbit, anchor=anchor)
    x_new = integrate.flow(lambda t, y: model.field(y, orbit.params),
                           orbit.samples[0], 0.0, t_star)
    samples = _resample(model, orbit.params, x_new, orbit.period, orbit.n_samples)
    return PeriodicOrbit(params=orbit.params, period=orbit.period,
                         samples=samples, anchor=anchor)


def find_anchored_orbit(model, p, x_guess, T_guess, n_samples=256, settle_periods=0):
    orb = find_orbit(model, p, x_guess, T_guess, n_samples=n_samples,
                     settle_periods=settle_periods)
    return anchor_phase(model, orb)


def continue_family(model: ParamModel, p_grid, x_guess, T_guess, n_samples=256,
                    anchor: AnchorSpec | None = None, settle_periods=0):
    """Natural-parameter continuation: each orbit seeds the next Newton solve.

    All orbits share the anchor and sample count. On failure at grid point i,
    raises ContinuationError carrying the orbits completed so far.
    """
    p_grid = [np.atleast_1d(np.asarray(p, dtype=float)) for p in p_grid]
    orbits = []
    x0, T0, settle = np.asarray(x_guess, dtype=float), float(T_guess), settle_periods
    for i, p in enumerate(p_grid):
        try:
            orb = find_orbit(model, p, x0, T0, n_samples=n_samples, settle_periods=settle)
            orb = anchor_phase(model, orb, anchor)
        except Exception as exc:
            raise ContinuationError(
                f"continuation failed at grid point {i} (p={p}): {exc}",
                completed=orbits) from exc
        orbits.append(orb)
        x0, T0, settle = orb.samples[0], orb.period, 0
    return orbits


def orbit_flow_residual(model, orbit: PeriodicOrbit, idx=None):
    """max_k |Phi_T(x_k) - x_k| / max(1, |x_k|) over the given sample indices."""
    idx = range(orbit.n_samples) if idx is None else idx
    worst = 0.0
    for k in idx:
        xk = orbit.samples[k]
        xT = integrate.flow(lambda t, y: model.field(y, orbit.params),
                            xk, 0.0, orbit.period)
        worst = max(worst, np.linalg.norm(xT - xk) / max(1.0, np.linalg.norm(xk)))
    return worst


def save_family(path, orbits, model: ParamModel):
    """Write a family as CSV per orbit plus a JSON manifest."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    manifest = {"model": model.config, "orbits": []}
    for i, orb in enumerate(orbits):
        fname = f"orbit_{i:03d}.csv"
        header = ",".join(f"x{j}" for j in range(model.dim))
        np.savetxt(path / fname, orb.samples, delimiter=",", header=header,
                   comments="", fmt="%.17g")
        manifest["orbits"].append({
            "file": fname,
            "p": [float(v) for v in orb.params],
            "T": float(orb.period),
            "omega": float(orb.omega),
            "K": orb.n_samples,
            "anchor": orb.anchor.to_dict() if orb.anchor else None,
        })
    (path / "manifest.json").write_text(json.dumps(manifest, indent=2))


def load_family(path):
    path = Path(path)
    manifest = json.loads((path / "manifest.json").read_text())
    orbits = []
    for rec in manifest["orbits"]:
        samples = np.loadtxt(path / rec["file"], delimiter=",", skiprows=1, ndmin=2)
        anchor = AnchorSpec.from_dict(rec["anchor"]) if rec["anchor"] else None
        orbits.append(PeriodicOrbit(params=np.asarray(rec["p"], float),
                                    period=rec["T"], samples=samples, anchor=anchor))
    return orbits, manifest
