"""Planar actuated SLIP: point mass on massless telescopic legs with series springs.

Geometry (all angles from vertical, positive toward +x)::

        mass  p = foot + r * (sin q, cos q)
         /
        /  r = compressed length, L = actuated length, s = L - r deflection
       /
    foot (on the ground, z = 0)

The actuator commands ``Lddot``; the spring carries ``F = K(L) s + D(L) sdot``
along the leg. Stiffness and damping are polynomials in ``L``.

States integrate ``(r, q, L)`` and rates; deflection is always derived as
``s = L - r`` so the holonomic relation holds by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple


class ModelDomainError(ValueError):
    """Leg length outside the admissible range, or other out-of-model input."""


class SingularityError(ValueError):
    """A leg collapsed to zero length."""


class GuardError(ValueError):
    """A transition map was applied where its guard does not hold."""


def _poly(coeffs, x):
    # ascending powers
    out = 0.0
    p = 1.0
    for c in coeffs:
        out += c * p
        p *= x
    return out


@dataclass(frozen=True)
class AslipParams:
    """Mass, gravity and the leg spring law.

    ``stiffness_coeffs`` and ``damping_coeffs`` are ascending-power polynomial
    coefficients in the actuated leg length ``L``. The default stiffness falls
    linearly with ``L`` and damping is constant.
    """

    m: float = 33.0
    g: float = 9.81
    stiffness_coeffs: tuple = (14000.0, -6000.0)
    damping_coeffs: tuple = (150.0,)
    leg_length_range: tuple = (0.5, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "stiffness_coeffs", tuple(float(c) for c in self.stiffness_coeffs))
        object.__setattr__(self, "damping_coeffs", tuple(float(c) for c in self.damping_coeffs))
        object.__setattr__(self, "leg_length_range", tuple(float(c) for c in self.leg_length_range))
        if not self.m > 0 or not self.g > 0:
            raise ModelDomainError("mass and gravity must be positive")
        lo, hi = self.leg_length_range
        if not 0 < lo < hi:
            raise ModelDomainError(f"bad leg length range {self.leg_length_range}")
        for i in range(101):
            L = lo + (hi - lo) * i / 100
            if self.stiffness(L) <= 0:
                raise ModelDomainError(f"stiffness not positive at L={L:.3f}")
            if self.damping(L) < 0:
                raise ModelDomainError(f"damping negative at L={L:.3f}")

    def stiffness(self, L: float) -> float:
        return _poly(self.stiffness_coeffs, L)

    def damping(self, L: float) -> float:
        return _poly(self.damping_coeffs, L)

    def force(self, L: float, s: float, sdot: float) -> float:
        """Raw spring force, no range check (used inside the vector fields)."""
        return _poly(self.stiffness_coeffs, L) * s + _poly(self.damping_coeffs, L) * sdot

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "g": self.g,
            "stiffness_coeffs": list(self.stiffness_coeffs),
            "damping_coeffs": list(self.damping_coeffs),
            "leg_length_range": list(self.leg_length_range),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AslipParams":
        kw = {k: d[k] for k in ("m", "g", "stiffness_coeffs", "damping_coeffs", "leg_length_range") if k in d}
        return cls(**kw)


def spring_force(leg_length: float, deflection: float, deflection_rate: float, params: AslipParams) -> float:
    lo, hi = params.leg_length_range
    if not lo <= leg_length <= hi:
        raise ModelDomainError(f"leg length {leg_length} outside [{lo}, {hi}]")
    return params.force(leg_length, deflection, deflection_rate)


@dataclass(frozen=True)
class AslipStateSSP:
    """Single support: stance leg 1 on the ground at ``foot1``.

    ``L2``/``dL2`` is the actuated length of the (massless) swing leg and
    ``swing_target`` the commanded world x of its touchdown.
    """

    r1: float
    beta1: float
    L1: float
    dr1: float
    dbeta1: float
    dL1: float
    foot1: float = 0.0
    L2: float = math.nan
    dL2: float = 0.0
    swing_target: float = math.nan

    @property
    def s1(self) -> float:
        return self.L1 - self.r1

    @property
    def ds1(self) -> float:
        return self.dL1 - self.dr1

    def mass_position(self) -> tuple[float, float]:
        return self.foot1 + self.r1 * math.sin(self.beta1), self.r1 * math.cos(self.beta1)

    def mass_velocity(self) -> tuple[float, float]:
        return _leg_velocity(self.r1, self.beta1, self.dr1, self.dbeta1)


@dataclass(frozen=True)
class AslipStateDSP:
    """Double support: both feet down. Leg 1 is the trailing (older) stance leg."""

    r1: float
    q1: float
    r2: float
    q2: float
    L1: float
    L2: float
    dr1: float
    dq1: float
    dr2: float
    dq2: float
    dL1: float
    dL2: float
    foot1: float = 0.0
    foot2: float = 0.0

    @property
    def s1(self) -> float:
        return self.L1 - self.r1

    @property
    def s2(self) -> float:
        return self.L2 - self.r2

    @property
    def ds1(self) -> float:
        return self.dL1 - self.dr1

    @property
    def ds2(self) -> float:
        return self.dL2 - self.dr2

    def mass_position(self, leg: int = 1) -> tuple[float, float]:
        if leg == 1:
            return self.foot1 + self.r1 * math.sin(self.q1), self.r1 * math.cos(self.q1)
        return self.foot2 + self.r2 * math.sin(self.q2), self.r2 * math.cos(self.q2)

    def mass_velocity(self, leg: int = 1) -> tuple[float, float]:
        if leg == 1:
            return _leg_velocity(self.r1, self.q1, self.dr1, self.dq1)
        return _leg_velocity(self.r2, self.q2, self.dr2, self.dq2)

    def closure_error(self) -> float:
        a = self.mass_position(1)
        b = self.mass_position(2)
        return math.hypot(a[0] - b[0], a[1] - b[1])


def _leg_velocity(r, q, dr, dq):
    sq, cq = math.sin(q), math.cos(q)
    return dr * sq + r * dq * cq, dr * cq - r * dq * sq


class SSPAccel(NamedTuple):
    rdd1: float
    betadd1: float
    sdd1: float
    Ldd1: float


class DSPAccel(NamedTuple):
    rdd1: float
    qdd1: float
    rdd2: float
    qdd2: float
    sdd1: float
    sdd2: float
    Ldd1: float
    Ldd2: float


def ssp_accel(r, b, dr, db, F, m, g):
    """Single-support accelerations from the leg force; scalar hot path."""
    if r <= 0.0:
        raise SingularityError(f"stance leg length {r} <= 0")
    rdd = F / m - g * math.cos(b) + r * db * db
    bdd = (-2.0 * db * dr + g * math.sin(b)) / r
    return rdd, bdd


def dsp_accel(r1, q1, r2, q2, dr1, dq1, dr2, dq2, F1, F2, m, g):
    if r1 <= 0.0 or r2 <= 0.0:
        raise SingularityError(f"leg length <= 0 (r1={r1}, r2={r2})")
    d = q1 - q2
    cd, sd = math.cos(d), math.sin(d)
    rdd1 = (F1 + F2 * cd) / m - g * math.cos(q1) + r1 * dq1 * dq1
    qdd1 = (-2.0 * dq1 * dr1 + g * math.sin(q1) - F2 / m * sd) / r1
    rdd2 = (F2 + F1 * cd) / m - g * math.cos(q2) + r2 * dq2 * dq2
    qdd2 = (-2.0 * dq2 * dr2 + g * math.sin(q2) + F1 / m * sd) / r2
    return rdd1, qdd1, rdd2, qdd2


def ssp_dynamics(state: AslipStateSSP, input_Lddot: float, params: AslipParams) -> SSPAccel:
    """Accelerations of the single-support aSLIP with ``Lddot`` as input."""
    F = params.force(state.L1, state.s1, state.ds1)
    rdd, bdd = ssp_accel(state.r1, state.beta1, state.dr1, state.dbeta1, F, params.m, params.g)
    return SSPAccel(rdd, bdd, input_Lddot - rdd, input_Lddot)


def dsp_dynamics(state: AslipStateDSP, inputs: tuple[float, float], params: AslipParams) -> DSPAccel:
    """Accelerations of the double-support aSLIP with ``(Lddot1, Lddot2)`` as inputs."""
    F1 = params.force(state.L1, state.s1, state.ds1)
    F2 = params.force(state.L2, state.s2, state.ds2)
    rdd1, qdd1, rdd2, qdd2 = dsp_accel(
        state.r1, state.q1, state.r2, state.q2, state.dr1, state.dq1, state.dr2, state.dq2,
        F1, F2, params.m, params.g,
    )
    u1, u2 = inputs
    return DSPAccel(rdd1, qdd1, rdd2, qdd2, u1 - rdd1, u2 - rdd2, u1, u2)


def leg_forces(state: AslipStateDSP, params: AslipParams) -> tuple[float, float]:
    return (
        params.force(state.L1, state.s1, state.ds1),
        params.force(state.L2, state.s2, state.ds2),
    )


@dataclass(frozen=True)
class SwingLeg:
    """Swing leg at touchdown: actuated length, its rate, and the landing point."""

    L2: float
    dL2: float
    foot2: float


def swing_foot_height(px: float, pz: float, L2: float, foot2: float) -> float:
    """Height of the swing foot tip when the leg of length ``L2`` points at ``foot2``.

    The leg is aimed at the landing point; once it is long enough to reach the
    ground there the height is ``pz - sqrt(L2**2 - dx**2)``, which is zero
    exactly when ``L2`` equals the mass-to-landing-point distance.
    """
    dx = px - foot2
    reach = L2 * L2 - dx * dx
    return pz - math.sqrt(reach) if reach > 0.0 else pz


def impact_ssp_to_dsp(state: AslipStateSSP, swing_leg: SwingLeg, tol: float = 1e-6) -> AslipStateDSP:
    """Touchdown of the swing leg.

    The mass velocity is continuous; the new leg's polar rates are the mass
    velocity projected on its radial and tangential directions, and its spring
    absorbs the jump in ``rdot`` (``Ldot`` itself is continuous).
    """
    px, pz = state.mass_position()
    h = swing_foot_height(px, pz, swing_leg.L2, swing_leg.foot2)
    if abs(h) > tol:
        raise GuardError(f"swing foot is {h:.3e} m above ground at the impact map")
    dx = px - swing_leg.foot2
    r2 = math.hypot(dx, pz)
    q2 = math.atan2(dx, pz)
    r1, q1, dr1, dq1 = state.r1, state.beta1, state.dr1, state.dbeta1
    d = q1 - q2
    dr2 = dr1 * math.cos(d) - dq1 * r1 * math.sin(d)
    dq2 = (dq1 * r1 * math.cos(d) + dr1 * math.sin(d)) / r2
    return AslipStateDSP(
        r1=r1, q1=q1, r2=r2, q2=q2, L1=state.L1, L2=swing_leg.L2,
        dr1=dr1, dq1=dq1, dr2=dr2, dq2=dq2, dL1=state.dL1, dL2=swing_leg.dL2,
        foot1=state.foot1, foot2=swing_leg.foot2,
    )


def transition_dsp_to_ssp(
    state: AslipStateDSP, params: AslipParams, lifting_leg: int = 1, tol: float = 1e-6
) -> AslipStateSSP:
    """Lift-off of ``lifting_leg`` once its spring force reaches zero.

    The loaded leg becomes leg 1 of the single-support state; the lifted leg
    keeps its actuated length as the swing leg.
    """
    F1, F2 = leg_forces(state, params)
    F = F1 if lifting_leg == 1 else F2
    if abs(F) > tol:
        raise GuardError(f"lifting leg still carries {F:.3e} N")
    if lifting_leg == 1:
        return AslipStateSSP(
            state.r2, state.q2, state.L2, state.dr2, state.dq2, state.dL2,
            foot1=state.foot2, L2=state.L1, dL2=state.dL1,
        )
    return AslipStateSSP(
        state.r1, state.q1, state.L1, state.dr1, state.dq1, state.dL1,
        foot1=state.foot1, L2=state.L2, dL2=state.dL2,
    )


def mechanical_energy(state: AslipStateSSP, params: AslipParams) -> float:
    """Kinetic + gravitational + spring energy with the actuated length frozen."""
    vx, vz = state.mass_velocity()
    _, pz = state.mass_position()
    s = state.s1
    return 0.5 * params.m * (vx * vx + vz * vz) + params.m * params.g * pz + 0.5 * params.stiffness(state.L1) * s * s
