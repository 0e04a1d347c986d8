"""Period-1 and period-2 orbits of the H-LIP and their 3D composition.

Boundary states of periodic walking lie on straight "orbital lines" in the
``(x, xdot)`` plane:

* P1 orbits: SSP starts on ``xdot = -sigma1 x`` and ends on ``xdot = sigma1 x``.
* P2 orbits: SSP starts on ``xdot = -sigma2 x + d2`` and ends on
  ``xdot = sigma2 x + d2``. Every point of the start line is its own orbit, so a
  desired velocity fixes ``d2`` but leaves a one-parameter family.

A P2 family member is selected by the pre-impact position at the end of left
stance (``x_boundary``). The desired pre-impact velocities of the two legs are
read off the constructed orbit; there is no separate closed form for them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Union

from hlip.core import (
    HlipParams,
    ParameterError,
    PlanarState,
    dsp_flow,
    impact_d2s,
    orbital_energy,
    ssp_flow,
    step_displacement,
    step_map,
)


class OrbitalLine(NamedTuple):
    """The line ``xdot = slope * x + offset``."""

    slope: float
    offset: float

    def residual(self, state: PlanarState) -> float:
        return state.xdot - self.slope * state.x - self.offset

    def at(self, x: float) -> PlanarState:
        return PlanarState(x, self.slope * x + self.offset)


def _half_angle(params: HlipParams) -> float:
    if params.t_ssp <= 0.0:
        raise ParameterError("t_ssp must be positive for the orbital slopes")
    return 0.5 * params.t_ssp * params.lam


def sigma1(params: HlipParams) -> float:
    """P1 orbital slope ``lam * coth(lam t_ssp / 2)``; always larger than lam."""
    return params.lam / math.tanh(_half_angle(params))


def sigma2(params: HlipParams) -> float:
    """P2 orbital slope ``lam * tanh(lam t_ssp / 2)``; always inside (0, lam)."""
    if params.t_ssp == 0.0:
        return 0.0
    return params.lam * math.tanh(_half_angle(params))


def p1_boundary_velocity(v_desired: float, params: HlipParams) -> float:
    """Pre-impact velocity of the unique P1 orbit with net velocity ``v_desired``."""
    return v_desired * params.period / (2.0 / sigma1(params) + params.t_dsp)


def d2_for_velocity(v_desired: float, params: HlipParams) -> float:
    """Offset of the P2 orbital lines giving net velocity ``v_desired``.

    Over one SSP started on the line the mass advances ``sinh(2a) d2 / lam``
    and the boundary velocities sum to ``2 cosh(a)**2 d2`` (``a = lam t_ssp / 2``),
    whatever the starting point. Equating two steps of travel with
    ``2 (t_ssp + t_dsp) v_desired`` gives the sech-squared form below.
    """
    w = params.lam
    a = _half_angle(params)
    sech = 1.0 / math.cosh(a)
    return (w * w * sech * sech * params.period * v_desired) / (
        w * w * params.t_dsp + 2.0 * sigma2(params)
    )


def p1_nominal_step(state: PlanarState, params: HlipParams) -> float:
    """P1 step length for a pre-impact state on ``xdot = sigma1 x``.

    Evaluated off the line it is the step that sends the next SSP start onto
    ``xdot = -sigma1 x``, which the stepping controllers rely on.
    """
    return state.x + state.xdot * params.t_dsp + state.xdot / sigma1(params)


def p2_nominal_step(state: PlanarState, d2: float, params: HlipParams) -> float:
    """P2 step length for a pre-impact state on ``xdot = sigma2 x + d2``."""
    return state.x + params.t_dsp * state.xdot + (state.xdot - d2) / sigma2(params)


@dataclass(frozen=True)
class P1Orbit:
    params: HlipParams
    preimpact: PlanarState
    step_length: float
    net_velocity: float
    kind: str = field(default="P1", init=False)

    @property
    def boundary_velocity(self) -> float:
        return self.preimpact.xdot

    @property
    def initial(self) -> PlanarState:
        """SSP start state; mirrors ``preimpact`` through the origin in position."""
        return impact_d2s(dsp_flow(self.preimpact, self.params.t_dsp), self.step_length)

    def lines(self) -> tuple[OrbitalLine, OrbitalLine]:
        """(start line, end line) of the SSP."""
        s = sigma1(self.params)
        return OrbitalLine(-s, 0.0), OrbitalLine(s, 0.0)

    def target(self, stance_leg: str = "L") -> PlanarState:
        return self.preimpact

    def nominal_step(self, stance_leg: str = "L") -> float:
        return self.step_length

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "params": self.params.to_dict(),
            "preimpact": list(self.preimpact),
            "initial": list(self.initial),
            "step_length": self.step_length,
            "net_velocity": self.net_velocity,
            "sigma1": sigma1(self.params),
        }


@dataclass(frozen=True)
class P2Orbit:
    params: HlipParams
    preimpact_left: PlanarState
    preimpact_right: PlanarState
    step_length_left: float
    step_length_right: float
    offset_d2: float
    net_velocity: float
    kind: str = field(default="P2", init=False)

    def target(self, stance_leg: str) -> PlanarState:
        return self.preimpact_left if _leg(stance_leg) == "L" else self.preimpact_right

    def nominal_step(self, stance_leg: str) -> float:
        return self.step_length_left if _leg(stance_leg) == "L" else self.step_length_right

    def lines(self) -> tuple[OrbitalLine, OrbitalLine]:
        s = sigma2(self.params)
        return OrbitalLine(-s, self.offset_d2), OrbitalLine(s, self.offset_d2)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "params": self.params.to_dict(),
            "preimpact_left": list(self.preimpact_left),
            "preimpact_right": list(self.preimpact_right),
            "step_length_left": self.step_length_left,
            "step_length_right": self.step_length_right,
            "offset_d2": self.offset_d2,
            "net_velocity": self.net_velocity,
            "sigma2": sigma2(self.params),
        }


Orbit = Union[P1Orbit, P2Orbit]


def _leg(stance_leg: str) -> str:
    leg = stance_leg.upper()[:1]
    if leg not in ("L", "R"):
        raise ValueError(f"stance leg must be 'L' or 'R', got {stance_leg!r}")
    return leg


def other_leg(stance_leg: str) -> str:
    return "R" if _leg(stance_leg) == "L" else "L"


def p1_orbit(v_desired: float, params: HlipParams) -> P1Orbit:
    v_pre = p1_boundary_velocity(v_desired, params)
    pre = PlanarState(v_pre / sigma1(params), v_pre)
    return P1Orbit(params, pre, p1_nominal_step(pre, params), v_desired)


def p2_orbit(v_desired: float, x_boundary: float, params: HlipParams) -> P2Orbit:
    d2 = d2_for_velocity(v_desired, params)
    left = PlanarState(x_boundary, sigma2(params) * x_boundary + d2)
    l_left = p2_nominal_step(left, d2, params)
    right = step_map(left, l_left, params)
    l_right = p2_nominal_step(right, d2, params)
    return P2Orbit(params, left, right, l_left, l_right, d2, v_desired)


class OrbitReport(NamedTuple):
    closure_residual: float
    measured_net_velocity: float
    energy_sign: int


def verify_orbit(orbit: Orbit) -> OrbitReport:
    """Numerical witness that ``orbit`` is periodic with its claimed velocity."""
    p = orbit.params
    if orbit.kind == "P1":
        legs = ["L"]
    else:
        legs = ["L", "R"]
    start = orbit.target(legs[0])
    s = start
    distance = 0.0
    for leg in legs:
        l = orbit.nominal_step(leg)
        nxt = step_map(s, l, p)
        distance += step_displacement(s, l, nxt)
        s = nxt
    residual = max(abs(s.x - start.x), abs(s.xdot - start.xdot))
    velocity = distance / (len(legs) * p.period)
    ssp_start = impact_d2s(dsp_flow(start, p.t_dsp), orbit.nominal_step(legs[0]))
    e = orbital_energy(ssp_start, p)
    energy_sign = (e > 0) - (e < 0)
    return OrbitReport(residual, velocity, energy_sign)


@dataclass(frozen=True)
class PlaneSpec:
    """Requested orbit in one plane: kind, desired velocity, P2 family member."""

    kind: str
    velocity: float
    x_boundary: float = -0.05

    def __post_init__(self):
        if self.kind.upper() not in ("P1", "P2"):
            raise ValueError(f"orbit kind must be P1 or P2, got {self.kind!r}")

    def build(self, params: HlipParams) -> Orbit:
        if self.kind.upper() == "P1":
            return p1_orbit(self.velocity, params)
        return p2_orbit(self.velocity, self.x_boundary, params)


CATEGORIES = ("sP1-cP1", "sP1-cP2", "sP2-cP1", "sP2-cP2")


@dataclass(frozen=True)
class Composition3D:
    sagittal: Orbit
    coronal: Orbit
    category: str

    def __post_init__(self):
        expected = f"s{self.sagittal.kind}-c{self.coronal.kind}"
        if self.category != expected:
            raise ValueError(f"category {self.category!r} does not match orbits ({expected})")

    def to_dict(self) -> dict:
        return {
            "category": self.category,
            "sagittal": self.sagittal.to_dict(),
            "coronal": self.coronal.to_dict(),
        }


def compose_3d(
    sagittal_spec: PlaneSpec, coronal_spec: PlaneSpec, params: HlipParams
) -> Composition3D:
    """Pair independent per-plane orbits; the planes share params but not dynamics."""
    sag = sagittal_spec.build(params)
    cor = coronal_spec.build(params)
    return Composition3D(sag, cor, f"s{sag.kind}-c{cor.kind}")


def phase_samples(orbit: Orbit, dt: float) -> dict:
    """Sample the SSP arcs of ``orbit`` as ``(t, x, xdot)`` triples.

    Returns ``{"arcs": [...], "jumps": [...]}`` where each jump joins the end of
    one arc to the start of the next (DSP plus support exchange).
    """
    if dt <= 0:
        raise ValueError("sample interval must be positive")
    p = orbit.params
    legs = ["L"] if orbit.kind == "P1" else ["L", "R"]
    arcs, jumps = [], []
    # Arc for leg i starts after the previous leg's step.
    for i, leg in enumerate(legs):
        prev = legs[i - 1]
        start = impact_d2s(dsp_flow(orbit.target(prev), p.t_dsp), orbit.nominal_step(prev))
        n = max(1, int(math.ceil(p.t_ssp / dt - 1e-9)))
        arc = []
        for k in range(n + 1):
            t = min(k * dt, p.t_ssp)
            s = ssp_flow(start, t, p)
            arc.append((t, s.x, s.xdot))
        arcs.append(arc)
        end = orbit.target(leg)
        nxt = impact_d2s(dsp_flow(end, p.t_dsp), orbit.nominal_step(leg))
        jumps.append(((end.x, end.xdot), (nxt.x, nxt.xdot)))
    return {"arcs": arcs, "jumps": jumps}
