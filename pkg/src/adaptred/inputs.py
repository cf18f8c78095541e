"""Scalar input signals u(t) applied through a model's input map."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class InputSignal:
    """Scalar control signal with an analytic time derivative.

    kind: one of "zero", "constant", "sinusoid", "table", "light_dark".
      constant:    value
      sinusoid:    amplitude * sin(2*pi*(t - phase)/period)
      table:       linear interpolation through (times, values); flat outside
      light_dark:  two-sigmoid T-periodic light profile with peak L_max
    """

    kind: str = "zero"
    value: float = 0.0
    amplitude: float = 0.0
    period: float = 1.0
    phase: float = 0.0
    times: np.ndarray | None = None
    values: np.ndarray | None = None
    l_max: float = 0.0

    def __post_init__(self):
        if self.kind not in ("zero", "constant", "sinusoid", "table", "light_dark"):
            raise ConfigError(f"unknown input kind {self.kind!r}")
        if self.kind == "table":
            t = np.asarray(self.times, dtype=float)
            v = np.asarray(self.values, dtype=float)
            if t.ndim != 1 or t.shape != v.shape or len(t) < 2:
                raise ConfigError("table input needs matching 1-d times/values, >= 2 samples")
            if not np.all(np.diff(t) > 0):
                raise ConfigError("table input times must be strictly increasing")
            object.__setattr__(self, "times", t)
            object.__setattr__(self, "values", v)
        if self.kind in ("sinusoid", "light_dark") and self.period <= 0:
            raise ConfigError("period must be positive")

    def __call__(self, t):
        if self.kind == "zero":
            return np.zeros_like(np.asarray(t, dtype=float)) if np.ndim(t) else 0.0
        if self.kind == "constant":
            return self.value if np.ndim(t) == 0 else np.full(np.shape(t), self.value)
        if self.kind == "sinusoid":
            return self.amplitude * np.sin(2.0 * np.pi * (t - self.phase) / self.period)
        if self.kind == "table":
            return np.interp(t, self.times, self.values)
        return self._light(t)

    def derivative(self, t):
        if self.kind in ("zero", "constant"):
            return 0.0 if np.ndim(t) == 0 else np.zeros(np.shape(t))
        if self.kind == "sinusoid":
            w = 2.0 * np.pi / self.period
            return self.amplitude * w * np.cos(w * (t - self.phase))
        if self.kind == "table":
            # secant slope of the containing segment, zero outside the table
            idx = np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, len(self.times) - 2)
            slopes = np.diff(self.values) / np.diff(self.times)
            out = np.where((t <= self.times[0]) | (t >= self.times[-1]), 0.0, slopes[idx])
            return float(out) if np.ndim(t) == 0 else out
        return self._light_derivative(t)

    def _light(self, t):
        ts = np.mod(t, self.period)
        T = self.period
        up = 1.0 / (1.0 + np.exp(-4.0 * (ts - T / 4.0)))
        dn = 1.0 / (1.0 + np.exp(-4.0 * (ts - 3.0 * T / 4.0)))
        return self.l_max * (up - dn)

    def _light_derivative(self, t):
        ts = np.mod(t, self.period)
        T = self.period
        up = 1.0 / (1.0 + np.exp(-4.0 * (ts - T / 4.0)))
        dn = 1.0 / (1.0 + np.exp(-4.0 * (ts - 3.0 * T / 4.0)))
        return self.l_max * 4.0 * (up * (1.0 - up) - dn * (1.0 - dn))


ZERO = InputSignal("zero")


def sinusoid(amplitude, period, phase=0.0) -> InputSignal:
    return InputSignal("sinusoid", amplitude=amplitude, period=period, phase=phase)


def constant(value) -> InputSignal:
    return InputSignal("constant", value=value)


def light_dark(l_max, period) -> InputSignal:
    return InputSignal("light_dark", l_max=l_max, period=period)


def table(times, values) -> InputSignal:
    return InputSignal("table", times=np.asarray(times, float),
                       values=np.asarray(values, float))


def input_from_config(cfg: dict) -> InputSignal:
    """Build an InputSignal from a JSON-style dict, e.g. {"kind": "sinusoid", ...}."""
    kind = cfg.get("kind", "zero")
    if kind == "zero":
        return ZERO
    if kind == "constant":
        return constant(cfg["value"])
    if kind == "sinusoid":
        return sinusoid(cfg["amplitude"], cfg["period"], cfg.get("phase", 0.0))
    if kind == "table":
        return table(cfg["times"], cfg["values"])
    if kind == "light_dark":
        return light_dark(cfg["l_max"], cfg["period"])
    raise ConfigError(f"unknown input kind {kind!r}")
