"""Step-length feedback that stabilizes H-LIP orbits.

The controllers add velocity-error feedback to the nominal orbit step length,
where the nominal step is evaluated at the *current* pre-impact state. With
that choice the closed loop errors obey, for one step,

    ev' = c * ev,                  c  = 1 - k lam sinh(lam t_ssp)
    ex' = (1/sigma - k cosh(lam t_ssp)) * ev

whatever the position error. ``sigma`` is sigma1 for P1 targets; P2 targets
use sigma2 and flip the sign of both maps. The deadbeat gain
``k* = csch(lam t_ssp) / lam`` zeroes ``c``, so velocity settles in one step and
position in two.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

from hlip.core import HlipParams, ParameterError, PlanarState, step_map
from hlip.orbits import (
    Composition3D,
    Orbit,
    P1Orbit,
    P2Orbit,
    other_leg,
    p1_nominal_step,
    p2_nominal_step,
)


@dataclass(frozen=True)
class SteppingGain:
    k: float


def _sinh_term(params: HlipParams) -> float:
    if params.t_ssp <= 0.0:
        raise ParameterError("t_ssp must be positive; the gain formulas are singular at 0")
    return math.sinh(params.t_ssp * params.lam)


def gain_range(params: HlipParams) -> tuple[float, float]:
    """Open interval ``(0, 2 csch(lam t_ssp) / lam)`` of stabilizing gains."""
    return 0.0, 2.0 / (params.lam * _sinh_term(params))


def optimal_gain(params: HlipParams) -> SteppingGain:
    return SteppingGain(1.0 / (params.lam * _sinh_term(params)))


def contraction_factor(gain: SteppingGain, params: HlipParams) -> float:
    """One-step multiplier of the P1 velocity error."""
    return 1.0 - gain.k * params.lam * math.sinh(params.t_ssp * params.lam)


def p1_step_length(state_preimpact: PlanarState, orbit: P1Orbit, gain: SteppingGain) -> float:
    return p1_nominal_step(state_preimpact, orbit.params) + gain.k * (
        state_preimpact.xdot - orbit.boundary_velocity
    )


def p2_step_length(
    state_preimpact: PlanarState, orbit: P2Orbit, stance_leg: str, gain: SteppingGain
) -> float:
    target = orbit.target(stance_leg).xdot
    return p2_nominal_step(state_preimpact, orbit.offset_d2, orbit.params) - gain.k * (
        state_preimpact.xdot - target
    )


def step_length(state: PlanarState, orbit: Orbit, gain: SteppingGain, stance_leg: str = "L") -> float:
    """Dispatch to the P1 or P2 law."""
    if orbit.kind == "P1":
        return p1_step_length(state, orbit, gain)
    return p2_step_length(state, orbit, stance_leg, gain)


class DivergenceError(RuntimeError):
    """A rollout produced a non-finite state; ``log`` holds the steps completed."""

    def __init__(self, message: str, log=None):
        super().__init__(message)
        self.log = log


@dataclass
class StepLogRecord:
    step: int
    state: PlanarState
    stance_leg: str
    l_cmd: float  # step length that produced this state (nan for the initial record)
    ev: float
    ex: float


@dataclass
class RolloutLog:
    """Pre-impact states of a rollout; ``records[i]`` is the state after step ``i + 1``."""

    initial: StepLogRecord
    records: list[StepLogRecord] = field(default_factory=list)

    @property
    def n_steps(self) -> int:
        return len(self.records)

    def velocity_errors(self) -> list[float]:
        return [self.initial.ev] + [r.ev for r in self.records]

    def position_errors(self) -> list[float]:
        return [self.initial.ex] + [r.ex for r in self.records]

    def rows(self) -> list[tuple]:
        out = []
        for r in [self.initial] + self.records:
            out.append((r.step, r.state.x, r.state.xdot, r.l_cmd, r.ev, r.ex))
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "x", "xdot", "l_cmd", "ev", "ex"])
        for row in self.rows():
            w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])
        return buf.getvalue()

    def is_contracting(self, tol: float = 1e-9) -> bool:
        """True when the velocity error shrinks (or is already zero) over the run."""
        ev = [abs(e) for e in self.velocity_errors()]
        if ev[0] <= tol:
            return True
        return ev[-1] < ev[0] * (1.0 - tol)


def _record(step, state, leg, l_cmd, orbit) -> StepLogRecord:
    target = orbit.target(leg)
    return StepLogRecord(step, state, leg, l_cmd, state.xdot - target.xdot, state.x - target.x)


def rollout(
    initial: PlanarState,
    orbit: Orbit,
    gain: SteppingGain,
    n_steps: int,
    stance_leg: str = "L",
) -> RolloutLog:
    """Iterate the closed-loop step-to-step map from a pre-impact state.

    ``stance_leg`` is the leg in stance when ``initial`` is reached; it only
    matters for P2 targets. Errors are measured against the target pre-impact
    state of whichever leg is in stance.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    leg = stance_leg.upper()
    log = RolloutLog(_record(0, initial, leg, math.nan, orbit))
    s = initial
    for i in range(1, n_steps + 1):
        l = step_length(s, orbit, gain, leg)
        s = step_map(s, l, orbit.params)
        leg = other_leg(leg)
        if not (s.is_finite() and math.isfinite(l)):
            raise DivergenceError(f"non-finite state after step {i}", log)
        log.records.append(_record(i, s, leg, l, orbit))
    return log


def rollout_3d(
    composition: Composition3D,
    initial_sagittal: PlanarState,
    initial_coronal: PlanarState,
    n_steps: int,
    gains: tuple[SteppingGain, SteppingGain] | None = None,
) -> tuple[RolloutLog, RolloutLog]:
    """Roll both decoupled planes forward with a shared left/right stance sequence."""
    if gains is None:
        gains = (
            optimal_gain(composition.sagittal.params),
            optimal_gain(composition.coronal.params),
        )
    sag = rollout(initial_sagittal, composition.sagittal, gains[0], n_steps, "L")
    cor = rollout(initial_coronal, composition.coronal, gains[1], n_steps, "L")
    return sag, cor


def measured_velocities(log: RolloutLog, params: HlipParams, window: int = 1) -> list[float]:
    """Mean velocity over each trailing ``window`` of steps (use 2 for P2 targets)."""
    states = [log.initial.state] + [r.state for r in log.records]
    cmds = [r.l_cmd for r in log.records]
    disp = [cmds[i] + states[i + 1].x - states[i].x for i in range(len(cmds))]
    out = []
    for i in range(window - 1, len(disp)):
        out.append(sum(disp[i - window + 1 : i + 1]) / (window * params.period))
    return out
