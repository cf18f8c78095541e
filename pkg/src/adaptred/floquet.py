"""Floquet analysis along a periodic orbit.

The variational equation is integrated segment by segment between the
orbit's phase nodes, giving local transition matrices M_k. Everything else
is linear algebra on those segments: the monodromy matrix is their ordered
product, exponents come from its spectrum (with a QR sweep for the strongly
contracting modes, whose multipliers underflow ordinary eigensolves), and
eigenfunctions are transported node to node.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AccuracyError, UnsupportedSpectrumError
from .integrate import rk4_span
from .models import ParamModel
from .orbit import PeriodicOrbit


@dataclass
class FloquetSet:
    """Exponents and retained eigenfunctions for one orbit.

    exponents are the N-1 nontrivial Floquet exponents sorted by ascending
    |Re|; the first n_retained are the slow modes kept in the reduction.
    eigfuncs has shape (n_retained, K, N) with eigfuncs[j, 0] normalized to
    unit length and sign-fixed (largest-magnitude component positive).
    """

    exponents: np.ndarray
    n_retained: int
    eigfuncs: np.ndarray
    trivial_direction: np.ndarray
    multiplier_residual: float  # |lambda_trivial - 1|

    @property
    def kappa(self) -> np.ndarray:
        return self.exponents[: self.n_retained]


def variational_segments(model: ParamModel, orbit: PeriodicOrbit, n_sub=None):
    """Local transition matrices over each inter-node interval.

    Returns (K, N, N); segments[k] maps perturbations at node k to node k+1.
    Fixed-step RK4 keeps the endpoints exactly on the phase grid.
    """
    K, N = orbit.samples.shape
    if n_sub is None:
        n_sub = max(8, int(np.ceil(4096 / K)))
    dt = orbit.period / K
    p = orbit.params

    def rhs(t, y):
        x = y[:N]
        M = y[N:].reshape(N, N)
        return np.concatenate([model.field(x, p), (model.jacobian(x, p) @ M).ravel()])

    segs = np.empty((K, N, N))
    eye = np.eye(N).ravel()
    for k in range(K):
        y0 = np.concatenate([orbit.samples[k], eye])
        yT = rk4_span(rhs, y0, 0.0, dt, n_sub)
        segs[k] = yT[N:].reshape(N, N)
    return segs


def monodromy(model: ParamModel, orbit: PeriodicOrbit, n_sub=None, segments=None):
    """Fundamental matrix over one period, starting at theta = 0."""
    if segments is None:
        segments = variational_segments(model, orbit, n_sub)
    Phi = np.eye(orbit.samples.shape[1])
    for M in segments:
        Phi = M @ Phi
    return Phi


def qr_exponents(segments, T, laps=40, tol=1e-10):
    """All Floquet exponent real parts by a discrete QR sweep.

    Robust for strongly contracting modes whose multipliers underflow the
    monodromy spectrum. Returns exponents sorted descending (trivial ~ 0
    first). Sweeps repeat until the per-lap sums stabilize.
    """
    K, N, _ = segments.shape
    Q = np.eye(N)
    prev = None
    for _ in range(laps):
        logsum = np.zeros(N)
        for k in range(K):
            Q, R = np.linalg.qr(segments[k] @ Q)
            d = np.sign(np.diag(R))
            d[d == 0] = 1.0
            Q = Q * d
            logsum += np.log(np.abs(np.diag(R)))
        cur = logsum / T
        if prev is not None and np.max(np.abs(cur - prev)) < tol * np.maximum(1.0, np.abs(cur)).max():
            prev = cur
            break
        prev = cur
    return np.sort(prev)[::-1]


def collapse_repeats(kappas, rel_tol=1e-3):
    """Merge exponents equal within tolerance (mean-field symmetry repeats).

    Returns (unique_kappas, representative_positions) with the input order
    (ascending |Re|) preserved.
    """
    out, pos = [], []
    for i, k in enumerate(kappas):
        if not any(abs(k - o) <= rel_tol * max(1.0, abs(o)) for o in out):
            out.append(k)
            pos.append(i)
    return np.array(out), pos


def exponents(Phi, T, beta_policy="gap", segments=None, collapse=False,
              gap_ratio=10.0, trivial_tol=1e-6):
    """Floquet exponents from the monodromy spectrum, with retention policy.

    beta_policy: an int keeps that many slow modes; "gap" keeps modes up to
    the first spectral gap of at least gap_ratio between adjacent |Re kappa|.
    When segments are supplied, truncated-mode exponents are replaced by the
    QR-sweep values (reliable when e^{kappa T} underflows).

    Returns (kappa_sorted, beta, lam_trivial_residual, eigvals, eigvecs_right).
    Retained exponents must be real and negative; complex ones raise
    UnsupportedSpectrumError rather than silently taking real parts.
    """
    N = Phi.shape[0]
    lam, V = np.linalg.eig(Phi)
    i_triv = int(np.argmin(np.abs(lam - 1.0)))
    triv_res = float(np.abs(lam[i_triv] - 1.0))
    if triv_res > trivial_tol:
        raise AccuracyError(f"no unit Floquet multiplier: residual {triv_res:.2e}")
    idx = [i for i in range(N) if i != i_triv]
    # sort nontrivial by descending multiplier magnitude = ascending |Re kappa|
    idx.sort(key=lambda i: -np.abs(lam[i]))
    kap_eig = np.log(lam[idx].astype(complex)) / T

    kappa = np.real(kap_eig).astype(float)
    if segments is not None:
        kq = qr_exponents(segments, T)[1:]  # drop the trivial ~ 0 entry
        kq = np.sort(kq)[::-1]
        # trust QR for modes whose multipliers are tiny
        for j in range(len(kappa)):
            if np.abs(lam[idx[j]]) < 1e-4 and j < len(kq):
                kappa[j] = kq[j]

    if collapse:
        kap_list, reps = collapse_repeats(kappa)
        idx = [idx[r] for r in reps]
        kap_eig = kap_eig[reps]
    else:
        kap_list = kappa
    if isinstance(beta_policy, int):
        beta = beta_policy
    else:
        beta = len(kap_list)
        mags = np.abs(kap_list)
        for j in range(len(kap_list) - 1):
            if mags[j + 1] >= gap_ratio * mags[j]:
                beta = j + 1
                break
    beta = min(beta, len(kap_list))

    for j in range(beta):
        lam_j = lam[idx[j]]
        if abs(np.imag(kap_eig[j])) > 1e-6 * max(1.0, abs(np.real(kap_eig[j]))) \
                or np.real(lam_j) <= 0:
            raise UnsupportedSpectrumError(
                f"retained exponent {j + 1} is complex or has a negative multiplier: "
                f"lambda={lam_j}")
        if kap_list[j] >= 0:
            raise UnsupportedSpectrumError(f"retained exponent {j + 1} not negative: {kap_list[j]}")

    return kap_list, beta, triv_res, lam, V, idx


def _fix_sign(v):
    i = int(np.argmax(np.abs(v)))
    return v / np.linalg.norm(v) * (1.0 if v[i] > 0 else -1.0)


def eigenfunction(model: ParamModel, orbit: PeriodicOrbit, kappa, v0,
                  segments=None, periodicity_tol=1e-5):
    """Floquet eigenfunction g(theta_k) by transporting v0 with the flow.

    g(t) = exp(-kappa t) * M(t) v0, which is T-periodic when v0 is the
    monodromy eigenvector for exp(kappa T). The closure defect after one lap
    is the periodicity check.
    """
    if segments is None:
        segments = variational_segments(model, orbit)
    K, N, _ = segments.shape
    dt = orbit.period / K
    fac = np.exp(-kappa * dt)
    g = np.empty((K, N))
    v = _fix_sign(np.asarray(v0, dtype=float))
    g[0] = v
    cur = v
    for k in range(K - 1):
        cur = fac * (segments[k] @ cur)
        g[k + 1] = cur
    closure = fac * (segments[K - 1] @ cur)
    defect = np.linalg.norm(closure - g[0]) / np.linalg.norm(g[0])
    if defect > periodicity_tol:
        raise AccuracyError(
            f"eigenfunction not periodic: closure defect {defect:.2e}; "
            "tighten integration tolerance or raise n_sub")
    return g, defect


def floquet_set(model: ParamModel, orbit: PeriodicOrbit, beta_policy,
                segments=None, collapse=False) -> FloquetSet:
    """Monodromy, exponents, and retained eigenfunctions in one pass."""
    if segments is None:
        segments = variational_segments(model, orbit)
    Phi = monodromy(model, orbit, segments=segments)
    kappa, beta, triv_res, lam, V, idx = exponents(
        Phi, orbit.period, beta_policy, segments=segments, collapse=collapse)
    gs = []
    for j in range(beta):
        vj = np.real(V[:, idx[j]])
        g, _ = eigenfunction(model, orbit, kappa[j], vj, segments=segments)
        gs.append(g)
    eig = np.array(gs) if gs else np.zeros((0,) + orbit.samples.shape)
    F0 = model.field(orbit.samples[0], orbit.params)
    return FloquetSet(exponents=kappa, n_retained=beta, eigfuncs=eig,
                      trivial_direction=F0 / np.linalg.norm(F0),
                      multiplier_residual=triv_res)
