"""Phase/isostable response curves, second-order terms, and direct oracles.

The biorthogonal frame (Z, g^j, I_j at every phase node) is built by
transporting monodromy eigenvectors with the segment matrices: right modes
forward, left modes backward (segment-transpose transport solves the adjoint
equation exactly), relaxing over laps until T-periodic. Components along
slower modes are projected out at every node so strongly contracting modes
stay clean.

Second-order gradient corrections B^k = H_theta g^k and C_j^k = H_psi_j g^k
come from the periodic solution of the Hessian transport equation

    dH/dt = kappa H - J^T H - H J - sum_i z_i d2F_i/dx2,   z in {Z, I_j},

solved as a one-period affine fixed point (the homogeneous propagator is
known in closed form from the monodromy). The quadratic invariant directions
(Z Z^T for the phase, sym(Z I_j^T) for isostables) are pinned by the exact
contractions H F = -J^T Z and H F = (kappa Id - J^T) I_j.

Direct oracles integrate states to the attractor and read the asymptotic
phase/isostable by matching against the orbit; they are the independent
cross-checks for everything above.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import integrate
from .errors import (AccuracyError, BasinError, ContaminationError,
                     StepSizeError, StiffnessError)
from .floquet import FloquetSet, exponents, monodromy, variational_segments
from .interp import PeriodicColumns
from .models import ParamModel, field_hessian
from .orbit import PeriodicOrbit, interp_orbit


@dataclass
class Frame:
    """Biorthogonal response frame on the orbit's phase grid."""

    omega: float
    kappa: np.ndarray          # (beta,)
    Z: np.ndarray              # (K, N)
    g: np.ndarray              # (beta, K, N)
    I: np.ndarray              # (beta, K, N)
    F: np.ndarray              # (K, N) vector field on the orbit
    closures: dict

    @property
    def beta(self) -> int:
        return len(self.kappa)


@dataclass
class ResponseSet:
    Z: np.ndarray              # (K, N)
    I: np.ndarray              # (beta, K, N)
    B: np.ndarray              # (beta, K, N)
    C: np.ndarray              # (beta, beta, K, N), C[j, k] = H_psi_j g^k


def _fix_sign(v):
    i = int(np.argmax(np.abs(v)))
    return v / np.linalg.norm(v) * (1.0 if v[i] > 0 else -1.0)


def _project_right(v, k, F, Z, gs, Is, n_slower):
    v = v - ((Z[k] @ v) / (Z[k] @ F[k])) * F[k]
    for m in range(n_slower):
        v = v - ((Is[m][k] @ v) / (Is[m][k] @ gs[m][k])) * gs[m][k]
    return v


def _project_left(v, k, F, Z, gs, Is, n_slower):
    v = v - ((v @ F[k]) / (Z[k] @ F[k])) * Z[k]
    for m in range(n_slower):
        v = v - ((v @ gs[m][k]) / (Is[m][k] @ gs[m][k])) * Is[m][k]
    return v


def _transport_left(segments, v0, kappa, dt, F, Z=None, gs=None, Is=None,
                    n_slower=0, max_laps=20, tol=1e-8):
    """Backward lap(s) of dI/dt = (kappa Id - J^T) I until T-periodic."""
    K = segments.shape[0]
    fac = np.exp(-kappa * dt)
    v = np.asarray(v0, dtype=float)
    out = np.empty((K, len(v)))
    for _ in range(max_laps):
        cur = v
        for k in reversed(range(K)):
            cur = fac * (segments[k].T @ cur)
            if Z is not None:
                cur = _project_left(cur, k, F, Z, gs, Is, n_slower)
            out[k] = cur
        defect = np.linalg.norm(out[0] - v) / max(np.linalg.norm(v), 1e-300)
        v = out[0] / np.linalg.norm(out[0]) * np.linalg.norm(v)
        if defect < tol:
            return out, defect
    return out, defect


def _transport_right(segments, v0, kappa, dt, F, Z, gs, Is, n_slower,
                     max_laps=8, tol=1e-5):
    """Forward lap(s) of the linearized flow scaled by exp(-kappa t)."""
    K = segments.shape[0]
    fac = np.exp(-kappa * dt)
    v = np.asarray(v0, dtype=float)
    out = np.empty((K, len(v)))
    for _ in range(max_laps):
        cur = _project_right(v, 0, F, Z, gs, Is, n_slower)
        cur = cur / np.linalg.norm(cur)
        out[0] = cur
        for k in range(K - 1):
            cur = fac * (segments[k] @ cur)
            cur = _project_right(cur, k + 1, F, Z, gs, Is, n_slower)
            out[k + 1] = cur
        closure = fac * (segments[K - 1] @ cur)
        closure = _project_right(closure, 0, F, Z, gs, Is, n_slower)
        defect = np.linalg.norm(closure - out[0]) / np.linalg.norm(out[0])
        v = closure
        if defect < tol:
            return out, defect
    raise AccuracyError(
        f"eigenfunction transport not periodic: defect {defect:.2e}; "
        "tighten tolerances or raise n_sub")


def build_frame(model: ParamModel, orbit: PeriodicOrbit, beta_policy,
                segments=None, collapse=False, z_tol=1e-8, g_tol=1e-5):
    """FloquetSet plus the full biorthogonal frame for one orbit."""
    if segments is None:
        segments = variational_segments(model, orbit)
    K, N = orbit.samples.shape
    dt = orbit.period / K
    omega = orbit.omega
    Phi = monodromy(model, orbit, segments=segments)
    kappa, beta, triv_res, lam, V, idx = exponents(
        Phi, orbit.period, beta_policy, segments=segments, collapse=collapse)
    lamL, W = np.linalg.eig(Phi.T)
    F = np.array([model.field(x, orbit.params) for x in orbit.samples])

    def left_vec(target):
        return np.real(W[:, int(np.argmin(np.abs(lamL - target)))])

    # trivial left mode -> phase response curve
    Z0 = left_vec(1.0)
    Z0 = Z0 * (omega / (Z0 @ F[0]))
    Z, z_defect = _transport_left(segments, Z0, 0.0, dt, F, max_laps=20, tol=z_tol)
    if z_defect > z_tol:
        raise StiffnessError(f"PRC not periodic after 20 laps: defect {z_defect:.2e}")
    Z = Z * (omega / (Z[0] @ F[0]))

    gs, Is = [], []
    closures = {"Z": z_defect, "trivial_multiplier": triv_res, "g": [], "I": []}
    for j in range(beta):
        lam_j = np.exp(kappa[j] * orbit.period)
        g0 = _fix_sign(np.real(V[:, idx[j]]))
        g_j, gd = _transport_right(segments, g0, kappa[j], dt, F, Z, gs, Is,
                                   n_slower=j, tol=g_tol)
        # restore the sign/scale convention after projection cleanup
        g_j = g_j / np.linalg.norm(g_j[0])
        i0 = int(np.argmax(np.abs(g_j[0])))
        if g_j[0][i0] < 0:
            g_j = -g_j
        gs.append(g_j)
        I0 = left_vec(lam_j)
        I_j, idf = _transport_left(segments, I0, kappa[j], dt, F, Z, gs, Is,
                                   n_slower=j, max_laps=20, tol=z_tol)
        if idf > 100 * z_tol:
            raise StiffnessError(
                f"IRC mode {j} not periodic after 20 laps: defect {idf:.2e}")
        I_j = I_j / (I_j[0] @ g_j[0])
        Is.append(I_j)
        closures["g"].append(gd)
        closures["I"].append(idf)

    F0 = F[0]
    floq = FloquetSet(exponents=kappa, n_retained=beta,
                      eigfuncs=np.array(gs) if gs else np.zeros((0, K, N)),
                      trivial_direction=F0 / np.linalg.norm(F0),
                      multiplier_residual=triv_res)
    frame = Frame(omega=omega, kappa=np.asarray(kappa[:beta], float), Z=Z,
                  g=np.array(gs) if gs else np.zeros((0, K, N)),
                  I=np.array(Is) if Is else np.zeros((0, K, N)),
                  F=F, closures=closures)
    return floq, frame


def prc_adjoint(model: ParamModel, orbit: PeriodicOrbit, frame: Frame | None = None):
    """Z(theta_k): T-periodic solution of dZ/dt = -J^T Z with Z . F = omega."""
    if frame is None:
        _, frame = build_frame(model, orbit, beta_policy=0)
    return frame.Z


def irc_adjoint(model: ParamModel, orbit: PeriodicOrbit, kappa_j, frame: Frame | None = None):
    """I_j(theta_k) for the retained exponent closest to kappa_j."""
    if frame is None:
        _, frame = build_frame(model, orbit, beta_policy="gap")
    j = int(np.argmin(np.abs(frame.kappa - kappa_j)))
    if abs(frame.kappa[j] - kappa_j) > 1e-6 * max(1.0, abs(kappa_j)):
        raise ValueError(f"kappa_j={kappa_j} is not a retained exponent of this frame")
    return frame.I[j]


# ---------------------------------------------------------------------------
# Second-order terms via the Hessian transport equation
# ---------------------------------------------------------------------------

def _node_operators(model, orbit):
    """J and d2F/dx2 tabulated on the phase grid, as interpolable columns."""
    K, N = orbit.samples.shape
    J = np.empty((K, N, N))
    S = np.empty((K, N, N, N))
    for k in range(K):
        J[k] = model.jacobian(orbit.samples[k], orbit.params)
        S[k] = field_hessian(model, orbit.samples[k], orbit.params)
    return (PeriodicColumns(J.reshape(K, -1)), PeriodicColumns(S.reshape(K, -1)), N)


def _hessian_pass(interp_J, interp_S, interp_z, kappa, omega, T, H0, K, N, n_sub=8,
                  store=False):
    """Integrate the Hessian transport ODE over one period."""
    t_nodes = np.linspace(0.0, T, K + 1)

    def rhs(t, h):
        th = omega * t
        J = interp_J(th).reshape(N, N)
        S = interp_S(th).reshape(N, N, N)
        z = interp_z(th)
        H = h.reshape(N, N)
        dH = kappa * H - J.T @ H - H @ J - np.einsum("i,iab->ab", z, S)
        return dH.ravel()

    if not store:
        return integrate.rk4_span(rhs, H0.ravel(), 0.0, T, K * n_sub).reshape(N, N)
    out = integrate.rk4_dense(rhs, H0.ravel(), t_nodes, n_sub)
    return out[:K].reshape(K, N, N)


def _solve_periodic_hessian(Phi, lam_j, Hp_T, null_dirs, constraint_vec, target):
    """Fixed point of H = e^{kappa T} Phi^-T H Phi^-1 + Hp_T.

    Rearranged as (Phi^T H Phi - lam_j H) = Phi^T Hp_T Phi so the operator
    stays bounded; the null directions (quadratic flow invariants) are fixed
    afterwards from the exact contraction H F = target.
    """
    N = Phi.shape[0]
    op = np.kron(Phi.T, Phi.T) - lam_j * np.eye(N * N)
    rhs = (Phi.T @ Hp_T @ Phi).ravel()
    h, *_ = np.linalg.lstsq(op, rhs, rcond=1e-9)
    H0 = h.reshape(N, N)
    H0 = 0.5 * (H0 + H0.T)
    # pin the invariant-family component from H F = target
    for dir_mat, dir_F in null_dirs:
        res = target - H0 @ constraint_vec
        denom = dir_F @ dir_F
        c = (dir_F @ res) / denom
        H0 = H0 + c * dir_mat
    return 0.5 * (H0 + H0.T)


def second_order_terms(model: ParamModel, orbit: PeriodicOrbit, floq: FloquetSet,
                       frame: Frame, segments=None, drop_C=False, n_sub=8,
                       asym_tol=1e-2):
    """B^k(theta) and C_j^k(theta) from periodic Hessian fields.

    drop_C zeroes the C block (used for the circadian reduction, whose
    isostable dynamics are kept first-order accurate).
    """
    K, N = orbit.samples.shape
    beta = floq.n_retained
    omega, T = orbit.omega, orbit.period
    interp_J, interp_S, _ = _node_operators(model, orbit)
    if segments is None:
        segments = variational_segments(model, orbit)
    Phi = monodromy(model, orbit, segments=segments)
    F0 = frame.F[0]
    J0 = interp_J(0.0).reshape(N, N)

    def solve_field(kappa, z_curve, null_dirs, target):
        interp_z = PeriodicColumns(z_curve)
        Hp_T = _hessian_pass(interp_J, interp_S, interp_z, kappa, omega, T,
                             np.zeros((N, N)), K, N, n_sub=n_sub)
        lam = np.exp(kappa * T)
        H0 = _solve_periodic_hessian(Phi, lam, Hp_T, null_dirs, F0, target)
        Hs = _hessian_pass(interp_J, interp_S, interp_z, kappa, omega, T,
                           H0, K, N, n_sub=n_sub, store=True)
        asym = max(np.linalg.norm(H - H.T) / max(np.linalg.norm(H), 1e-300) for H in Hs)
        if asym > asym_tol:
            raise StepSizeError(
                f"Hessian asymmetry {asym:.2e} exceeds {asym_tol}; "
                "adjust the differencing step or integration tolerance")
        return 0.5 * (Hs + np.swapaxes(Hs, 1, 2))

    Z0 = frame.Z[0]
    H_theta = solve_field(
        0.0, frame.Z,
        null_dirs=[(np.outer(Z0, Z0), omega * Z0)],
        target=-J0.T @ Z0)
    B = np.einsum("kab,jkb->jka", H_theta, frame.g)

    C = np.zeros((beta, beta, K, N))
    if not drop_C:
        for j in range(beta):
            I0 = frame.I[j]
            kap = frame.kappa[j]
            sym_zi = 0.5 * (np.outer(Z0, I0[0]) + np.outer(I0[0], Z0))
            H_psi = solve_field(
                kap, I0,
                null_dirs=[(sym_zi, 0.5 * omega * I0[0])],
                target=(kap * np.eye(N) - J0.T) @ I0[0])
            C[j] = np.einsum("kab,mkb->mka", H_psi, frame.g)
    return B, C


# ---------------------------------------------------------------------------
# Direct-method oracles
# ---------------------------------------------------------------------------

def orbit_distance(orbit: PeriodicOrbit, y):
    """(distance, theta) of the closest point on the interpolated orbit."""
    d2 = np.sum((orbit.samples - y) ** 2, axis=1)
    k = int(np.argmin(d2))
    K = orbit.n_samples
    lo = 2.0 * np.pi * (k - 1) / K
    hi = 2.0 * np.pi * (k + 1) / K
    for _ in range(60):
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        f1 = np.sum((interp_orbit(orbit.samples, m1) - y) ** 2)
        f2 = np.sum((interp_orbit(orbit.samples, m2) - y) ** 2)
        if f1 < f2:
            hi = m2
        else:
            lo = m1
        if hi - lo < 1e-13:
            break
    th = 0.5 * (lo + hi)
    dist = float(np.sqrt(np.sum((interp_orbit(orbit.samples, th) - y) ** 2)))
    return dist, float(np.mod(th, 2.0 * np.pi))


def _orbit_scale(orbit):
    return max(1.0, float(np.median(np.linalg.norm(orbit.samples, axis=1))))


def direct_phase(model: ParamModel, p, orbit: PeriodicOrbit, x,
                 conv_tol=None, max_periods=200):
    """Asymptotic phase of state x by forward integration and matching.

    Integrates until the distance to the orbit drops below conv_tol
    (default 1e-7 scaled by the orbit's size), matches the endpoint to the
    interpolated orbit, and removes the elapsed rotation.
    """
    p = model.check_params(p)
    scale = _orbit_scale(orbit)
    tol = conv_tol if conv_tol is not None else 1e-7 * scale
    T, omega = orbit.period, orbit.omega
    y = np.asarray(x, dtype=float)
    dist, _ = orbit_distance(orbit, y)
    t_done = 0.0
    periods = 0
    prev = dist
    while dist > tol:
        if periods >= max_periods:
            raise BasinError(
                f"no convergence to the orbit after {max_periods} periods "
                f"(distance {dist:.3e})")
        # guess the remaining decay from the observed per-period ratio
        chunk = 1
        if periods >= 2 and prev > 0 and dist < prev:
            rho = dist / prev
            if rho < 0.95:
                chunk = int(np.clip(np.log(tol / dist) / np.log(rho), 1, 40))
        chunk = min(chunk, max_periods - periods)
        y = integrate.flow(lambda t, s: model.field(s, p), y, 0.0, chunk * T,
                           rtol=1e-10, atol=1e-12)
        t_done += chunk * T
        periods += chunk
        prev = dist
        dist, _ = orbit_distance(orbit, y)
    _, th_end = orbit_distance(orbit, y)
    return float(np.mod(th_end - omega * t_done, 2.0 * np.pi))


def direct_isostable(model: ParamModel, p, orbit: PeriodicOrbit, frame: Frame,
                     x, mode=0, fit_floor=None, max_periods=200, residual_tol=0.05):
    """Isostable coordinate of state x for one retained mode (0-based).

    psi_j(x) = lim e^{-kappa_j t} I_j(theta(t)) . (x(t) - x_gamma(theta(t))),
    averaged over the last three periods of the approach; the scatter of the
    per-sample estimates is the fit residual.
    """
    p = model.check_params(p)
    kap = frame.kappa[mode]
    interp_I = PeriodicColumns(frame.I[mode])
    scale = _orbit_scale(orbit)
    floor = fit_floor if fit_floor is not None else 1e-5 * scale
    T = orbit.period
    n_per = 8
    y = np.asarray(x, dtype=float)
    t = 0.0
    samples = []  # (t, estimate, dist)
    dist, th = orbit_distance(orbit, y)
    for _ in range(max_periods * n_per):
        delta = y - interp_orbit(orbit.samples, th)
        est = np.exp(-kap * t) * (interp_I(th) @ delta)
        samples.append((t, est, dist))
        if dist < floor and len(samples) > 3 * n_per:
            break
        y = integrate.flow(lambda tt, s: model.field(s, p), y, 0.0, T / n_per,
                           rtol=1e-10, atol=1e-12)
        t += T / n_per
        dist, th = orbit_distance(orbit, y)
    else:
        if dist > floor:
            raise BasinError(f"no convergence for isostable fit (distance {dist:.3e})")
    window = [s for s in samples if s[0] >= samples[-1][0] - 3.0 * T]
    vals = np.array([s[1] for s in window])
    mean = float(np.mean(vals))
    ref = max(abs(mean), 1e-12 * scale)
    if np.max(np.abs(vals - mean)) > residual_tol * ref and abs(mean) > 1e-9 * scale:
        raise ContaminationError(
            f"isostable fit scatter {np.max(np.abs(vals - mean)) / ref:.2%} "
            "exceeds tolerance; faster modes not yet decayed")
    return mean


def fd_gradient(func, x, h):
    """Central-difference gradient of a scalar field, for cross-checks."""
    x = np.asarray(x, dtype=float)
    g = np.empty(len(x))
    for a in range(len(x)):
        e = np.zeros(len(x))
        e[a] = h
        g[a] = (func(x + e) - func(x - e)) / (2.0 * h)
    return g


def fd_hessian_scalar(func, x, h):
    """Central-difference Hessian of a scalar field (direct-oracle route)."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    H = np.empty((n, n))
    f0 = func(x)
    for a in range(n):
        ea = np.zeros(n)
        ea[a] = h
        H[a, a] = (func(x + ea) - 2.0 * f0 + func(x - ea)) / h ** 2
        for b in range(a + 1, n):
            eb = np.zeros(n)
            eb[b] = h
            H[a, b] = H[b, a] = (func(x + ea + eb) - func(x + ea - eb)
                                 - func(x - ea + eb) + func(x - ea - eb)) / (4.0 * h ** 2)
    return H
