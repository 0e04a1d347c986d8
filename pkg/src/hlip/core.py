"""Closed-form hybrid dynamics of the planar H-LIP.

One plane of the pendulum alternates between a single-support phase (SSP),
where the mass obeys ``xddot = lam**2 * x`` about the stance foot, and a
double-support phase (DSP), where it coasts at constant velocity. Domain
durations are fixed. Two transitions close the cycle:

* SSP -> DSP is the identity map (position and velocity continuous).
* DSP -> SSP exchanges the support leg: ``x+ = x- - l``, velocity unchanged.

Everything here is exact: flows use exponentials from :mod:`math`, never a
numerical integrator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple


class ParameterError(ValueError):
    """Raised for physically meaningless model parameters."""


@dataclass(frozen=True)
class HlipParams:
    """Pendulum constants and fixed domain durations.

    Attributes:
        g: gravitational acceleration (m/s^2).
        z0: nominal height of the point mass (m).
        t_ssp: single-support duration (s).
        t_dsp: double-support duration (s); zero gives an instantaneous exchange.
    """

    g: float = 9.81
    z0: float = 1.0
    t_ssp: float = 0.4
    t_dsp: float = 0.1

    def __post_init__(self):
        for name in ("g", "z0", "t_ssp", "t_dsp"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ParameterError(f"{name} must be finite, got {value!r}")
        if self.g <= 0 or self.z0 <= 0:
            raise ParameterError(f"g and z0 must be positive (g={self.g}, z0={self.z0})")
        if self.t_ssp < 0 or self.t_dsp < 0:
            raise ParameterError(
                f"domain durations must be non-negative (t_ssp={self.t_ssp}, t_dsp={self.t_dsp})"
            )

    @property
    def lam(self) -> float:
        return math.sqrt(self.g / self.z0)

    @property
    def period(self) -> float:
        return self.t_ssp + self.t_dsp

    def to_dict(self) -> dict:
        return {"g": self.g, "z0": self.z0, "t_ssp": self.t_ssp, "t_dsp": self.t_dsp}


class PlanarState(NamedTuple):
    """Mass position and velocity relative to the current stance foot."""

    x: float
    xdot: float

    def is_finite(self) -> bool:
        return math.isfinite(self.x) and math.isfinite(self.xdot)


class FlowCoefficients(NamedTuple):
    """Coefficients of ``x(t) = c1 exp(lam t) + c2 exp(-lam t)``."""

    c1: float
    c2: float


def lam(params: HlipParams) -> float:
    """Natural frequency ``sqrt(g / z0)`` of the pendulum (1/s)."""
    return params.lam


def flow_coefficients(state: PlanarState, params: HlipParams) -> FlowCoefficients:
    """Split an SSP initial state into its unstable and stable eigenmodes."""
    w = params.lam
    return FlowCoefficients(0.5 * (state.x + state.xdot / w), 0.5 * (state.x - state.xdot / w))


def _check_duration(t: float) -> None:
    if not t >= 0.0:
        raise ValueError(f"duration must be non-negative, got {t!r}")


def ssp_flow(state: PlanarState, t: float, params: HlipParams) -> PlanarState:
    """Exact single-support solution after time ``t``.

    Intended for ``0 <= t <= params.t_ssp`` but valid for any ``t >= 0``.
    """
    _check_duration(t)
    w = params.lam
    c1, c2 = flow_coefficients(state, params)
    ep = math.exp(w * t)
    em = math.exp(-w * t)
    return PlanarState(c1 * ep + c2 * em, w * (c1 * ep - c2 * em))


def dsp_flow(state: PlanarState, t: float) -> PlanarState:
    """Constant-velocity drift through double support."""
    _check_duration(t)
    return PlanarState(state.x + state.xdot * t, state.xdot)


def impact_s2d(state: PlanarState) -> PlanarState:
    """SSP -> DSP transition: the identity (swing foot lands, nothing jumps).

    Kept as a function so transition traces list every phase boundary.
    """
    return state


def impact_d2s(state: PlanarState, step_length: float) -> PlanarState:
    """DSP -> SSP transition: re-express the mass relative to the new stance foot."""
    return PlanarState(state.x - step_length, state.xdot)


def step_map(
    state_preimpact: PlanarState,
    step_length: float,
    params: HlipParams,
    trace: list | None = None,
) -> PlanarState:
    """Discrete step-to-step map between consecutive pre-impact (end of SSP) states.

    If ``trace`` is a list, ``(event, state)`` pairs are appended for the four
    phase boundaries: ``"ssp_end"``, ``"dsp_start"``, ``"dsp_end"``, ``"ssp_start"``.
    """
    s = state_preimpact
    d0 = impact_s2d(s)
    d1 = dsp_flow(d0, params.t_dsp)
    s0 = impact_d2s(d1, step_length)
    s1 = ssp_flow(s0, params.t_ssp, params)
    if trace is not None:
        trace.extend([("ssp_end", s), ("dsp_start", d0), ("dsp_end", d1), ("ssp_start", s0)])
    return s1


def orbital_energy(state: PlanarState, params: HlipParams) -> float:
    """Orbital energy ``xdot**2 - lam**2 x**2``; conserved along the SSP flow."""
    w = params.lam
    return state.xdot * state.xdot - (w * state.x) * (w * state.x)


def step_displacement(pre: PlanarState, step_length: float, post: PlanarState) -> float:
    """World-frame mass travel between two consecutive pre-impact states."""
    return step_length + post.x - pre.x
