"""Parameterized vector fields and the three built-in benchmark systems.

Each model carries its drift F(x, p), an analytic Jacobian dF/dx, an input
map taking a scalar control to a state-space vector, per-parameter bounds,
and a default phase anchor. Analytic Jacobians are never trusted blindly;
tests cross-check them against central finite differences of the drift.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np

from .errors import ConfigError, NumericalDomainError, ParameterRangeError
from .inputs import InputSignal, ZERO, input_from_config


@dataclass
class AnchorSpec:
    """How theta = 0 is pinned on every orbit of a family.

    kind "section": crossing of normal . x = offset in the given direction.
    kind "feature_max": strict local maximum of the indexed state component.
    """

    kind: str
    normal: np.ndarray | None = None
    offset: float = 0.0
    direction: int = +1
    state_index: int = 0

    def __post_init__(self):
        if self.kind not in ("section", "feature_max"):
            raise ConfigError(f"unknown anchor kind {self.kind!r}")
        if self.kind == "section":
            self.normal = np.asarray(self.normal, dtype=float)

    def to_dict(self):
        if self.kind == "section":
            return {"kind": "section", "normal": list(map(float, self.normal)),
                    "offset": self.offset, "direction": self.direction}
        return {"kind": "feature_max", "state_index": self.state_index}

    @staticmethod
    def from_dict(d):
        if d["kind"] == "section":
            return AnchorSpec("section", normal=np.asarray(d["normal"], float),
                              offset=d["offset"], direction=d["direction"])
        return AnchorSpec("feature_max", state_index=d["state_index"])


@dataclass
class ParamModel:
    """Vector field F(x, p) with Jacobian access and an input map."""

    name: str
    dim: int
    n_params: int
    field: Callable  # field(x, p) -> dx/dt (drift only, no input)
    jacobian: Callable  # jacobian(x, p) -> (dim, dim) array
    input_map: Callable  # input_map(u_scalar) -> (dim,) vector
    param_bounds: np.ndarray  # (n_params, 2)
    nominal_params: np.ndarray
    working_box: np.ndarray  # (dim, 2) used for divergence reporting
    anchor: AnchorSpec | None = None
    field_hessian: Callable | None = None  # optional analytic d2F/dx2
    config: dict = dc_field(default_factory=dict)

    def check_params(self, p):
        p = np.atleast_1d(np.asarray(p, dtype=float))
        if p.shape != (self.n_params,):
            raise ParameterRangeError(
                f"{self.name}: expected {self.n_params} parameters, got shape {p.shape}")
        lo, hi = self.param_bounds[:, 0], self.param_bounds[:, 1]
        if np.any(p < lo - 1e-12) or np.any(p > hi + 1e-12):
            raise ParameterRangeError(
                f"{self.name}: parameters {p} outside bounds {self.param_bounds.tolist()}")
        return p

    def in_box(self, x):
        return bool(np.all(x >= self.working_box[:, 0]) and np.all(x <= self.working_box[:, 1]))


def eval_field(model: ParamModel, x, p, t=0.0, u: InputSignal | None = None):
    """F(x, p) + input_map(u(t)); raises on out-of-range p or non-finite output."""
    p = model.check_params(p)
    x = np.asarray(x, dtype=float)
    dx = model.field(x, p)
    if u is not None:
        dx = dx + model.input_map(u(t))
    bad = ~np.isfinite(dx)
    if np.any(bad):
        comp = int(np.flatnonzero(bad)[0])
        raise NumericalDomainError(
            f"{model.name}: non-finite derivative in component {comp} at x={x}", component=comp)
    return dx


def extended_input(model: ParamModel, x, p, t=0.0, u: InputSignal | None = None):
    """U_e = U(t) + F(x, p_0) - F(x, p), the applied input plus parameter mismatch."""
    p = model.check_params(p)
    x = np.asarray(x, dtype=float)
    ue = model.field(x, model.nominal_params) - model.field(x, p)
    if u is not None:
        ue = ue + model.input_map(u(t))
    bad = ~np.isfinite(ue)
    if np.any(bad):
        comp = int(np.flatnonzero(bad)[0])
        raise NumericalDomainError(
            f"{model.name}: non-finite extended input in component {comp}", component=comp)
    return ue


def fd_jacobian(model: ParamModel, x, p, h=None):
    """Central-difference Jacobian of the drift, for cross-checking."""
    x = np.asarray(x, dtype=float)
    n = model.dim
    J = np.empty((n, n))
    for a in range(n):
        step = h if h is not None else 1e-6 * max(1.0, abs(x[a]))
        e = np.zeros(n)
        e[a] = step
        J[:, a] = (model.field(x + e, p) - model.field(x - e, p)) / (2.0 * step)
    return J


def fd_field_hessian(model: ParamModel, x, p, h=None):
    """d2F/dx2 tensor S[i, a, b] from central differences of the analytic Jacobian."""
    x = np.asarray(x, dtype=float)
    n = model.dim
    S = np.empty((n, n, n))
    for b in range(n):
        step = h if h is not None else 1e-5 * max(1.0, abs(x[b]))
        e = np.zeros(n)
        e[b] = step
        S[:, :, b] = (model.jacobian(x + e, p) - model.jacobian(x - e, p)) / (2.0 * step)
    return 0.5 * (S + np.swapaxes(S, 1, 2))


def field_hessian(model: ParamModel, x, p):
    if model.field_hessian is not None:
        return model.field_hessian(np.asarray(x, float), np.asarray(p, float))
    return fd_field_hessian(model, x, p)


# ---------------------------------------------------------------------------
# Nonradial isochron clock
# ---------------------------------------------------------------------------

MU_CLOCK = 0.08
ZETA_CLOCK = 0.12


def make_isochron_clock(mu=MU_CLOCK, zeta=ZETA_CLOCK, r0_bounds=(0.2, 3.0)) -> ParamModel:
    """Planar oscillator whose limit cycle is a circle of radius r0.

    The rotation rate depends on radius, so isochrons wind logarithmically:
    theta = atan2(Y, X) + (zeta/mu) * log(r / r0). The input drives Xdot only.
    """

    def field(x, p):
        X, Y = x
        r0sq = p[0] * p[0]
        rsq = X * X + Y * Y
        rot = 1.0 + zeta * (rsq - r0sq)
        return np.array([mu * X * (r0sq - rsq) - Y * rot,
                         mu * Y * (r0sq - rsq) + X * rot])

    def jacobian(x, p):
        X, Y = x
        r0sq = p[0] * p[0]
        rsq = X * X + Y * Y
        rot = 1.0 + zeta * (rsq - r0sq)
        return np.array([
            [mu * (r0sq - rsq) - 2.0 * mu * X * X - 2.0 * zeta * X * Y,
             -2.0 * mu * X * Y - rot - 2.0 * zeta * Y * Y],
            [-2.0 * mu * X * Y + rot + 2.0 * zeta * X * X,
             mu * (r0sq - rsq) - 2.0 * mu * Y * Y + 2.0 * zeta * X * Y],
        ])

    def hessian(x, p):
        X, Y = x
        S = np.empty((2, 2, 2))
        S[0] = [[-6.0 * mu * X - 2.0 * zeta * Y, -2.0 * mu * Y - 2.0 * zeta * X],
                [-2.0 * mu * Y - 2.0 * zeta * X, -2.0 * mu * X - 6.0 * zeta * Y]]
        S[1] = [[-2.0 * mu * Y + 6.0 * zeta * X, -2.0 * mu * X + 2.0 * zeta * Y],
                [-2.0 * mu * X + 2.0 * zeta * Y, -6.0 * mu * Y + 2.0 * zeta * X]]
        return S

    return ParamModel(
        name="isochron_clock", dim=2, n_params=1,
        field=field, jacobian=jacobian,
        input_map=lambda u: np.array([u, 0.0]),
        param_bounds=np.array([list(r0_bounds)]),
        nominal_params=np.array([1.0]),
        working_box=np.array([[-5.0, 5.0], [-5.0, 5.0]]),
        anchor=AnchorSpec("section", normal=np.array([0.0, 1.0]), offset=0.0, direction=+1),
        field_hessian=hessian,
        config={"model": "isochron_clock", "mu": mu, "zeta": zeta,
                "r0_bounds": list(r0_bounds)},
    )


def make_clock_input_model(r0=1.0, c_bounds=(-3.9, 3.9)) -> ParamModel:
    """Clock with a constant bias on Xdot as the family parameter.

    Used by the extended reduction, whose family parameter is the input
    itself. Near |c| ~ 4 the forced clock loses its stable orbit, so the
    bounds stop short of that.
    """
    base = make_isochron_clock()
    r0_arr = np.array([r0])

    def field(x, p):
        return base.field(x, r0_arr) + np.array([p[0], 0.0])

    def hessian(x, p):
        return base.field_hessian(x, r0_arr)

    return ParamModel(
        name="clock_input_family", dim=2, n_params=1,
        field=field,
        jacobian=lambda x, p: base.jacobian(x, r0_arr),
        input_map=base.input_map,
        param_bounds=np.array([list(c_bounds)]),
        nominal_params=np.array([0.0]),
        working_box=base.working_box.copy(),
        anchor=AnchorSpec("section", normal=np.array([0.0, 1.0]), offset=0.0, direction=+1),
        field_hessian=hessian,
        config={"model": "clock_input_family", "r0": r0, "c_bounds": list(c_bounds)},
    )


# ---------------------------------------------------------------------------
# Thalamic neuron network
# ---------------------------------------------------------------------------

THALAMIC = {
    "g_L": 0.05, "g_Na": 3.0, "g_K": 5.0, "g_T": 5.0,   # mS/cm^2
    "E_L": -70.0, "E_Na": 50.0, "E_K": -90.0, "E_T": 0.0,  # mV
    "C": 1.0,                                            # uF/cm^2
    "V_syn": 0.0, "alpha": 3.0, "V_T": -20.0, "sigma_T": 0.8, "beta": 2.0,
}


def _sig(x):
    return 1.0 / (1.0 + np.exp(-x))


def _gates(V):
    m_inf = _sig((V + 37.0) / 7.0)
    h_inf = _sig(-(V + 41.0) / 4.0)
    r_inf = _sig(-(V + 84.0) / 4.0)
    p_inf = _sig((V + 60.0) / 6.2)
    a_h = 0.128 * np.exp(-(V + 46.0) / 18.0)
    b_h = 4.0 * _sig((V + 23.0) / 5.0)
    tau_h = 1.0 / (a_h + b_h)
    tau_r = 28.0 + np.exp(-(V + 25.0) / 10.5)
    return m_inf, h_inf, r_inf, p_inf, tau_h, tau_r, a_h, b_h


def make_thalamic_network(n_neur=1, g_syn=0.0, I_b0=5.0) -> ParamModel:
    """Conductance-based thalamic neurons with all-to-all synaptic coupling.

    State layout is blocked per neuron: (V_i, h_i, r_i, w_i). The adaptive
    parameter is the baseline current I_b of each neuron; a common input
    current u(t) lands on every voltage. Gating kinetics follow the cited
    thalamic-cell source; the Floquet exponent ranges validate the choice.
    """
    if n_neur < 1:
        raise ConfigError("n_neur must be >= 1")
    c = THALAMIC
    I_b0 = np.atleast_1d(np.asarray(I_b0, dtype=float))
    if I_b0.size == 1:
        I_b0 = np.full(n_neur, I_b0[0])
    if I_b0.shape != (n_neur,):
        raise ConfigError("I_b0 must be scalar or length n_neur")
    if np.any(I_b0 < 2.0) or np.any(I_b0 > 20.0):
        raise ParameterRangeError(f"I_b0={I_b0} outside [2, 20] uA/uF")

    def field(x, p):
        s = x.reshape(n_neur, 4)
        V, h, r, w = s[:, 0], s[:, 1], s[:, 2], s[:, 3]
        m_inf, h_inf, r_inf, p_inf, tau_h, tau_r, _, _ = _gates(V)
        i_L = c["g_L"] * (V - c["E_L"])
        i_Na = c["g_Na"] * m_inf ** 3 * h * (V - c["E_Na"])
        i_K = c["g_K"] * (0.75 * (1.0 - h)) ** 4 * (V - c["E_K"])
        i_T = c["g_T"] * p_inf ** 2 * r * (V - c["E_T"])
        i_syn = g_syn * np.sum(w) * (V - c["V_syn"])
        dV = (-i_L - i_Na - i_K - i_T + p - i_syn) / c["C"]
        dh = (h_inf - h) / tau_h
        dr = (r_inf - r) / tau_r
        dw = c["alpha"] * (1.0 - w) * _sig((V - c["V_T"]) / c["sigma_T"]) - c["beta"] * w
        return np.column_stack([dV, dh, dr, dw]).ravel()

    def jacobian(x, p):
        s = x.reshape(n_neur, 4)
        V, h, r, w = s[:, 0], s[:, 1], s[:, 2], s[:, 3]
        m_inf, h_inf, r_inf, p_inf, tau_h, tau_r, a_h, b_h = _gates(V)
        dm = m_inf * (1.0 - m_inf) / 7.0
        dh_inf = -h_inf * (1.0 - h_inf) / 4.0
        dr_inf = -r_inf * (1.0 - r_inf) / 4.0
        dp = p_inf * (1.0 - p_inf) / 6.2
        da_h = -a_h / 18.0
        db_h = (b_h / 5.0) * (1.0 - b_h / 4.0)
        dtau_h = -(da_h + db_h) * tau_h ** 2
        dtau_r = -np.exp(-(V + 25.0) / 10.5) / 10.5
        sw = _sig((V - c["V_T"]) / c["sigma_T"])
        dsw = sw * (1.0 - sw) / c["sigma_T"]
        w_sum = np.sum(w)

        J = np.zeros((4 * n_neur, 4 * n_neur))
        for i in range(n_neur):
            o = 4 * i
            dVdV = (-c["g_L"]
                    - c["g_Na"] * (3.0 * m_inf[i] ** 2 * dm[i] * h[i] * (V[i] - c["E_Na"])
                                   + m_inf[i] ** 3 * h[i])
                    - c["g_K"] * (0.75 * (1.0 - h[i])) ** 4
                    - c["g_T"] * (2.0 * p_inf[i] * dp[i] * r[i] * (V[i] - c["E_T"])
                                  + p_inf[i] ** 2 * r[i])
                    - g_syn * w_sum) / c["C"]
            dVdh = (-c["g_Na"] * m_inf[i] ** 3 * (V[i] - c["E_Na"])
                    + c["g_K"] * 3.0 * (0.75 * (1.0 - h[i])) ** 3 * (V[i] - c["E_K"])) / c["C"]
            dVdr = -c["g_T"] * p_inf[i] ** 2 * (V[i] - c["E_T"]) / c["C"]
            J[o, o] = dVdV
            J[o, o + 1] = dVdh
            J[o, o + 2] = dVdr
            for j in range(n_neur):
                J[o, 4 * j + 3] += -g_syn * (V[i] - c["V_syn"]) / c["C"]
            J[o + 1, o] = dh_inf[i] / tau_h[i] - (h_inf[i] - h[i]) * dtau_h[i] / tau_h[i] ** 2
            J[o + 1, o + 1] = -1.0 / tau_h[i]
            J[o + 2, o] = dr_inf[i] / tau_r[i] - (r_inf[i] - r[i]) * dtau_r[i] / tau_r[i] ** 2
            J[o + 2, o + 2] = -1.0 / tau_r[i]
            J[o + 3, o] = c["alpha"] * (1.0 - w[i]) * dsw[i]
            J[o + 3, o + 3] = -c["alpha"] * sw[i] - c["beta"]
        return J

    def input_map(u):
        v = np.zeros(4 * n_neur)
        v[0::4] = u
        return v

    box = np.tile(np.array([[-100.0, 60.0], [-0.2, 1.2], [-0.2, 1.2], [-0.2, 1.2]]),
                  (n_neur, 1))

    return ParamModel(
        name="thalamic_network", dim=4 * n_neur, n_params=n_neur,
        field=field, jacobian=jacobian, input_map=input_map,
        param_bounds=np.tile(np.array([[2.0, 20.0]]), (n_neur, 1)),
        nominal_params=I_b0.copy(),
        working_box=box,
        anchor=AnchorSpec("feature_max", state_index=0),
        config={"model": "thalamic_network", "n_neur": n_neur, "g_syn": g_syn,
                "I_b0": I_b0.tolist()},
    )


# ---------------------------------------------------------------------------
# Circadian gene-oscillator population
# ---------------------------------------------------------------------------

# Cited Figure-1 parameter set with the stated overrides n=7, h1=1.05,
# h2=0.525, hc=0.2 applied.
CIRCADIAN = {
    "h1": 1.05, "K1": 1.0, "n": 7.0,
    "h2": 0.525, "K2": 1.0,
    "h3": 0.7, "h4": 0.35, "K4": 1.0,
    "h5": 0.7, "h6": 0.35, "K6": 1.0,
    "h7": 0.35, "h8": 1.0, "K8": 1.0,
    "hc": 0.2, "Kc": 1.0, "K": 0.5,
}

L0_BOUNDS = (-0.010, 0.019)


def _circ_cell_rates(a, b, cc, d, F, L0, q):
    da = (q["h1"] * q["K1"] ** q["n"] / (q["K1"] ** q["n"] + cc ** q["n"])
          - q["h2"] * a / (q["K2"] + a)
          + q["hc"] * q["K"] * F / (q["Kc"] + q["K"] * F) + L0)
    db = q["h3"] * a - q["h4"] * b / (q["K4"] + b)
    dc = q["h5"] * b - q["h6"] * cc / (q["K6"] + cc)
    dd = q["h7"] * a - q["h8"] * d / (q["K8"] + d)
    return da, db, dc, dd


def light_sensitivities(n_cells):
    return 1.0 + np.arange(n_cells) / 45.0


def make_circadian_population(n_cells=10, l0_bounds=L0_BOUNDS) -> ParamModel:
    """Mean-field coupled gene oscillators (4 states per cell).

    The scalar input u is the light level L(t); it enters each adot with
    per-cell sensitivity S_i = 1 + (i-1)/45. The adaptive parameter L0 is an
    additive drive on every adot, shared by all cells.
    """
    if n_cells < 2:
        raise ConfigError("n_cells must be >= 2")
    q = CIRCADIAN
    S = light_sensitivities(n_cells)

    def field(x, p):
        s = x.reshape(n_cells, 4)
        a, b, cc, d = s[:, 0], s[:, 1], s[:, 2], s[:, 3]
        F = np.mean(d)
        da, db, dc, dd = _circ_cell_rates(a, b, cc, d, F, p[0], q)
        return np.column_stack([da, db, dc, dd]).ravel()

    def jacobian(x, p):
        s = x.reshape(n_cells, 4)
        a, b, cc, d = s[:, 0], s[:, 1], s[:, 2], s[:, 3]
        F = np.mean(d)
        J = np.zeros((4 * n_cells, 4 * n_cells))
        dcoup = q["hc"] * q["K"] * q["Kc"] / (q["Kc"] + q["K"] * F) ** 2 / n_cells
        for i in range(n_cells):
            o = 4 * i
            J[o, o] = -q["h2"] * q["K2"] / (q["K2"] + a[i]) ** 2
            J[o, o + 2] = (-q["h1"] * q["K1"] ** q["n"] * q["n"] * cc[i] ** (q["n"] - 1.0)
                           / (q["K1"] ** q["n"] + cc[i] ** q["n"]) ** 2)
            J[o, 3::4] += dcoup
            J[o + 1, o] = q["h3"]
            J[o + 1, o + 1] = -q["h4"] * q["K4"] / (q["K4"] + b[i]) ** 2
            J[o + 2, o + 1] = q["h5"]
            J[o + 2, o + 2] = -q["h6"] * q["K6"] / (q["K6"] + cc[i]) ** 2
            J[o + 3, o] = q["h7"]
            J[o + 3, o + 3] = -q["h8"] * q["K8"] / (q["K8"] + d[i]) ** 2
        return J

    def input_map(u):
        v = np.zeros(4 * n_cells)
        v[0::4] = S * u
        return v

    return ParamModel(
        name="circadian_population", dim=4 * n_cells, n_params=1,
        field=field, jacobian=jacobian, input_map=input_map,
        param_bounds=np.array([list(l0_bounds)]),
        nominal_params=np.array([0.0]),
        working_box=np.tile(np.array([[0.0, 10.0]]), (4 * n_cells, 1)),
        anchor=AnchorSpec("feature_max", state_index=0),
        config={"model": "circadian_population", "n_cells": n_cells,
                "l0_bounds": list(l0_bounds)},
    )


def make_circadian_mean_cell(l0_bounds=(-0.015, 0.025)) -> ParamModel:
    """Single cell with self mean-field, generating the synchronized orbit.

    With identical cells the population oscillation lives on the diagonal
    where the mean field equals the cell's own d, so this 4-state model
    carries the family tables (one phase plus three isostable coordinates)
    for any population size. Bounds are wider than the population's L0
    range because the extended reduction reuses this family with the light
    level itself as the parameter.
    """
    q = CIRCADIAN

    def field(x, p):
        a, b, cc, d = x
        da, db, dc, dd = _circ_cell_rates(a, b, cc, d, d, p[0], q)
        return np.array([da, db, dc, dd])

    def jacobian(x, p):
        a, b, cc, d = x
        J = np.zeros((4, 4))
        J[0, 0] = -q["h2"] * q["K2"] / (q["K2"] + a) ** 2
        J[0, 2] = (-q["h1"] * q["K1"] ** q["n"] * q["n"] * cc ** (q["n"] - 1.0)
                   / (q["K1"] ** q["n"] + cc ** q["n"]) ** 2)
        J[0, 3] = q["hc"] * q["K"] * q["Kc"] / (q["Kc"] + q["K"] * d) ** 2
        J[1, 0] = q["h3"]
        J[1, 1] = -q["h4"] * q["K4"] / (q["K4"] + b) ** 2
        J[2, 1] = q["h5"]
        J[2, 2] = -q["h6"] * q["K6"] / (q["K6"] + cc) ** 2
        J[3, 0] = q["h7"]
        J[3, 3] = -q["h8"] * q["K8"] / (q["K8"] + d) ** 2
        return J

    def input_map(u):
        return np.array([u, 0.0, 0.0, 0.0])

    return ParamModel(
        name="circadian_mean_cell", dim=4, n_params=1,
        field=field, jacobian=jacobian, input_map=input_map,
        param_bounds=np.array([list(l0_bounds)]),
        nominal_params=np.array([0.0]),
        working_box=np.tile(np.array([[0.0, 10.0]]), (4, 1)),
        anchor=AnchorSpec("feature_max", state_index=0),
        config={"model": "circadian_mean_cell", "l0_bounds": list(l0_bounds)},
    )


_REGISTRY = {
    "isochron_clock": make_isochron_clock,
    "clock_input_family": make_clock_input_model,
    "thalamic_network": make_thalamic_network,
    "circadian_population": make_circadian_population,
    "circadian_mean_cell": make_circadian_mean_cell,
}


def model_from_config(cfg: dict) -> ParamModel:
    """Instantiate a built-in model from a JSON-style configuration.

    Expected shape: {"model": name, ...factory kwargs...}. The stored
    model.config round-trips through this function.
    """
    cfg = dict(cfg)
    name = cfg.pop("model", None)
    if name not in _REGISTRY:
        raise ConfigError(f"unknown model {name!r}; known: {sorted(_REGISTRY)}")
    factory = _REGISTRY[name]
    kwargs = {}
    for key, val in cfg.items():
        if key in ("mu", "zeta", "r0", "I_b0", "g_syn", "n_neur", "n_cells"):
            kwargs[key] = val
        elif key in ("r0_bounds", "c_bounds", "l0_bounds"):
            kwargs[key] = tuple(val)
        else:
            raise ConfigError(f"unknown model option {key!r} for {name}")
    return factory(**kwargs)


def signal_from_config(cfg: dict) -> InputSignal:
    return input_from_config(cfg) if cfg else ZERO
