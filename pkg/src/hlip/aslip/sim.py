"""Event-driven aSLIP walking driven by H-LIP stepping.

Both legs replay the optimized stepping-in-place length trajectory on a
global clock: one leg at phase ``t``, the other at ``t + T`` of the two-step
cycle, tracked by a PD law on ``Lddot``. Walking comes only from where the
swing foot is placed. The step length is re-evaluated every tick from the
instantaneous mass state relative to the stance foot, blended in from the
swing foot's lift-off position, and frozen at touchdown.

Domains and transitions:

* SSP ends when the swing foot reaches the ground (touchdown, armed half way
  through the nominal SSP). The impact map keeps the mass velocity.
* DSP ends when the trailing leg force reaches zero (lift-off).

Failure guards (stance leg unloading, leading leg pulling, mass dropping
too low) end the run with a divergence error carrying the partial result.
"""

from __future__ import annotations

import bisect
import csv
import hashlib
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from hlip.aslip.events import Guard, StallError, integrate_domain
from hlip.aslip.model import (
    AslipStateDSP,
    AslipStateSSP,
    GuardError,
    SwingLeg,
    dsp_accel,
    impact_ssp_to_dsp,
    ssp_accel,
    swing_foot_height,
    transition_dsp_to_ssp,
)
from hlip.core import HlipParams, PlanarState
from hlip.orbits import Orbit, other_leg, p1_orbit, p2_orbit
from hlip.stepping import DivergenceError, SteppingGain, optimal_gain, step_length

CONTROLLERS = ("P1", "P2", "raibert", "fixed")


@dataclass
class SimConfig:
    """Simulation settings.

    ``controller`` is ``"P1"``/``"P2"`` (H-LIP stepping), ``"raibert"`` (H-LIP
    P1 plus a derivative term ``kd_extra``) or ``"fixed"`` (no feedback, every
    step has length ``fixed_step``). ``gain=None`` uses the deadbeat gain of
    the gait's durations. ``velocity_schedule`` lists ``(time, v_desired)``
    pairs; the value in force at the start of a step applies to that step.
    """

    h: float = 1e-4
    event_tol_t: float = 1e-9
    event_tol_force: float = 1e-6
    event_tol_height: float = 1e-9
    max_steps: int = 30
    controller: str = "P1"
    gain: float | None = None
    kd_extra: float = 0.0
    x_boundary: float = -0.05
    fixed_step: float = 0.0
    velocity_schedule: list = field(default_factory=lambda: [(0.0, 0.0)])
    tracking_gains: tuple = (400.0, 40.0)
    blend_fraction: float = 0.8
    touchdown_arm_fraction: float = 0.5
    min_height: float = 0.3
    max_speed: float = 5.0
    max_domain_time: float = 2.0
    first_stance: str = "L"
    initial_velocity: float = 0.0
    trace_stride: int = 10
    freeze_fraction: float | None = None  # hold the step command after this fraction of T_SSP; None: update to touchdown

    def __post_init__(self):
        if not (self.h > 0 and self.event_tol_t > 0 and self.event_tol_force > 0 and self.event_tol_height > 0):
            raise ValueError("integrator step and event tolerances must be positive")
        if self.controller not in CONTROLLERS:
            raise ValueError(f"controller must be one of {CONTROLLERS}, got {self.controller!r}")
        if min(self.tracking_gains) < 0:
            raise ValueError("tracking gains must be non-negative")
        if self.freeze_fraction is not None and not self.freeze_fraction > 0:
            raise ValueError("freeze_fraction must be positive")
        if not self.velocity_schedule:
            raise ValueError("velocity schedule is empty")
        self.velocity_schedule = sorted((float(t), float(v)) for t, v in self.velocity_schedule)
        self.tracking_gains = tuple(float(k) for k in self.tracking_gains)

    def desired_velocity(self, t: float) -> float:
        v = self.velocity_schedule[0][1]
        for ts, vs in self.velocity_schedule:
            if ts <= t:
                v = vs
        return v

    def to_dict(self) -> dict:
        d = asdict(self)
        d["velocity_schedule"] = [list(p) for p in self.velocity_schedule]
        d["tracking_gains"] = list(self.tracking_gains)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        return cls(**d)


@dataclass
class StepRecord:
    """One completed step: an SSP and the DSP that follows it."""

    index: int
    stance_leg: str
    t_start: float
    t_ssp: float
    t_dsp: float
    step_length: float
    velocity: float
    v_desired: float
    pre_x: float
    pre_xdot: float
    peak_force_stance: float
    peak_force_leading: float
    touchdown_height: float = 0.0  # swing-foot height at the located touchdown
    liftoff_force: float = 0.0  # trailing-leg force at the located lift-off

    @property
    def duration(self) -> float:
        return self.t_ssp + self.t_dsp


STEP_FIELDS = [f for f in StepRecord.__dataclass_fields__]
TRACE_FIELDS = [
    "t", "domain", "stance", "r1", "q1", "s1", "L1", "r2", "q2", "s2", "L2",
    "x_mass", "xdot_mass", "z_mass", "F1", "F2",
]


@dataclass
class WalkResult:
    records: list
    trace: list
    config: SimConfig
    status: str = "ok"
    message: str = ""
    boundaries: list = field(default_factory=list)  # (x, z, xdot, zdot) at each SSP start, x from the stance foot

    def velocities(self) -> list[float]:
        return [r.velocity for r in self.records]

    def converged(self, n_last: int = 6) -> dict:
        """Averages over the last ``n_last`` steps (an even count averages P2 pairs)."""
        tail = self.records[-n_last:]
        if not tail:
            return {}
        n = len(tail)
        v = sum(r.velocity for r in tail) / n
        vd = tail[-1].v_desired
        return {
            "velocity": v,
            "v_desired": vd,
            "relative_error": abs(v - vd) / abs(vd) if vd != 0 else abs(v - vd),
            "t_ssp": sum(r.t_ssp for r in tail) / n,
            "t_dsp": sum(r.t_dsp for r in tail) / n,
            "step_length": sum(r.step_length for r in tail) / n,
        }

    def steps_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(STEP_FIELDS)
        for r in self.records:
            w.writerow([_fmt(getattr(r, f)) for f in STEP_FIELDS])
        return buf.getvalue()

    def trace_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_FIELDS)
        for row in self.trace:
            w.writerow([_fmt(v) for v in row])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "message": self.message,
            "config": self.config.to_dict(),
            "steps": [asdict(r) for r in self.records],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


def _fmt(v):
    return repr(v) if isinstance(v, float) else v


def leg_length_tracking(L: float, dL: float, desired: tuple, gains: tuple) -> float:
    """Feedforward plus PD: ``Lddot_d - Kp (L - L_d) - Kd (Ldot - Ldot_d)``."""
    Ld, dLd, ddLd = desired
    kp, kd = gains
    return ddLd - kp * (L - Ld) - kd * (dL - dLd)


def blend(t: float, t_blend: float) -> float:
    """Half-cosine ramp from 0 at ``t = 0`` to 1 at ``t = t_blend``, flat after."""
    if t <= 0.0:
        return 0.0
    if t >= t_blend:
        return 1.0
    return 0.5 - 0.5 * math.cos(math.pi * t / t_blend)


def swing_step_construction(t_in_ssp: float, l_prev: float, l_desired: float, t_blend: float) -> float:
    """Step length ``(1 - c) l_prev + c l_desired`` with the half-cosine ``c``."""
    if t_in_ssp < 0:
        raise ValueError("time into SSP must be non-negative")
    c = blend(t_in_ssp, t_blend)
    return (1.0 - c) * l_prev + c * l_desired


def hlip_step_command(mass_state: PlanarState, orbit: Orbit, gain: SteppingGain, stance_leg: str = "L") -> float:
    """H-LIP stepping law applied to the current mass state (relative to the stance foot)."""
    return step_length(mass_state, orbit, gain, stance_leg)


def raibert_augmented_command(
    mass_state: PlanarState,
    orbit: Orbit,
    gain: SteppingGain,
    kd_extra: float,
    v_prev_step: float,
    stance_leg: str = "L",
) -> float:
    """H-LIP command plus ``kd_extra * (xdot - v_prev_step)``."""
    base = hlip_step_command(mass_state, orbit, gain, stance_leg)
    if kd_extra == 0.0:
        return base
    return base + kd_extra * (mass_state.xdot - v_prev_step)


_DURATION_CACHE: dict = {}


def _gait_key(gait, cfg: SimConfig) -> str:
    h = hashlib.sha1()
    for arr in (gait.leg_t, gait.leg_L, gait.leg_dL, gait.leg_ddL, gait.mass_z, gait.mass_dz):
        h.update(np.ascontiguousarray(arr, dtype=float).tobytes())
    h.update(repr((gait.params, cfg.h, cfg.event_tol_t, cfg.event_tol_force, cfg.tracking_gains)).encode())
    return h.hexdigest()


def measured_durations(gait, config: SimConfig | None = None, n_steps: int = 4) -> tuple[float, float]:
    """Mean ``(T_SSP, T_DSP)`` of the last two steps of an in-place replay.

    The simulated touchdown and lift-off events need not land exactly on the
    optimizer's durations; the stepping law should use the ones the hybrid
    model actually produces. Results are cached per gait and integrator setup.
    """
    cfg = config or SimConfig()
    key = _gait_key(gait, cfg) + f":{n_steps}"
    if key not in _DURATION_CACHE:
        replay = SimConfig(h=cfg.h, event_tol_t=cfg.event_tol_t, event_tol_force=cfg.event_tol_force,
                           event_tol_height=cfg.event_tol_height, tracking_gains=cfg.tracking_gains,
                           blend_fraction=cfg.blend_fraction, touchdown_arm_fraction=cfg.touchdown_arm_fraction,
                           controller="fixed", max_steps=n_steps, trace_stride=10**9)
        recs = run_walking(gait, replay).records[-2:]
        _DURATION_CACHE[key] = (sum(r.t_ssp for r in recs) / 2, sum(r.t_dsp for r in recs) / 2)
    return _DURATION_CACHE[key]


def hlip_params_for_gait(gait, config: SimConfig | None = None) -> HlipParams:
    """H-LIP at the gait's mean mass height with durations measured by replay."""
    t_ssp, t_dsp = measured_durations(gait, config)
    return HlipParams(g=gait.params.g, z0=gait.mean_height(), t_ssp=t_ssp, t_dsp=t_dsp)


class _Reference:
    """Fast scalar evaluation of the gait's leg trajectory."""

    def __init__(self, gait, scale: float = 1.0):
        self.t = [float(v) for v in gait.leg_t]
        self.L = [float(v) for v in gait.leg_L]
        self.V = [float(v) for v in gait.leg_dL]
        self.A = [float(v) for v in gait.leg_ddL]
        self.cycle = 2.0 * gait.period
        self.last = len(self.t) - 2

    def __call__(self, phase: float):
        p = phase % self.cycle
        k = bisect.bisect_right(self.t, p) - 1
        if k < 0:
            k = 0
        elif k > self.last:
            k = self.last
        tk = self.t[k]
        hk = self.t[k + 1] - tk
        tau = p - tk
        a0 = self.A[k]
        da = (self.A[k + 1] - a0) / hk
        L = self.L[k] + tau * (self.V[k] + tau * (0.5 * a0 + tau * da / 6.0))
        dL = self.V[k] + tau * (a0 + 0.5 * da * tau)
        return L, dL, a0 + da * tau


class _Walker:
    def __init__(self, gait, cfg: SimConfig):
        self.gait = gait
        self.cfg = cfg
        p = gait.params
        self.m, self.g = p.m, p.g
        self.Kc, self.Dc = p.stiffness_coeffs, p.damping_coeffs
        self.ref = _Reference(gait)
        self.T = gait.period
        if cfg.controller == "fixed":
            self.hp, self.gain = None, None
        else:
            self.hp = hlip_params_for_gait(gait, cfg)
            self.gain = SteppingGain(cfg.gain) if cfg.gain is not None else optimal_gain(self.hp)
        self._orbits = {}
        first = cfg.first_stance.upper()
        if first not in ("L", "R"):
            raise ValueError("first_stance must be 'L' or 'R'")
        # phase offset of each leg: the first stance leg starts its cycle at t = 0
        self.offset = {first: 0.0, other_leg(first): self.T}
        self.records: list[StepRecord] = []
        self.trace: list = []
        self.boundaries: list = []

    # spring law
    def force(self, L, s, sd):
        k = 0.0
        pw = 1.0
        for c in self.Kc:
            k += c * pw
            pw *= L
        d = 0.0
        pw = 1.0
        for c in self.Dc:
            d += c * pw
            pw *= L
        return k * s + d * sd

    def command(self, leg, t, L, dL):
        return leg_length_tracking(L, dL, self.ref(t + self.offset[leg]), self.cfg.tracking_gains)

    def orbit(self, v: float) -> Orbit:
        kind = "P2" if self.cfg.controller == "P2" else "P1"
        key = (kind, v)
        if key not in self._orbits:
            if kind == "P1":
                self._orbits[key] = p1_orbit(v, self.hp)
            else:
                self._orbits[key] = p2_orbit(v, self.cfg.x_boundary, self.hp)
        return self._orbits[key]

    def desired_step(self, x, xd, stance, v_d, v_prev):
        cfg = self.cfg
        if cfg.controller == "fixed":
            return cfg.fixed_step
        s = PlanarState(x, xd)
        orbit = self.orbit(v_d)
        # P2 orbits are indexed by the leg in stance when the pre-impact state is reached
        if cfg.controller == "raibert":
            return raibert_augmented_command(s, orbit, self.gain, cfg.kd_extra, v_prev, stance)
        return hlip_step_command(s, orbit, self.gain, stance)

    def run(self):
        cfg, gait = self.cfg, self.gait
        b = gait.boundary_state()
        stance = cfg.first_stance.upper()
        t = 0.0
        foot = 0.0
        l_prev = 0.0  # swing foot position relative to the stance foot
        # SSP state: r, beta, dr, dbeta, L1, dL1, L2, dL2
        y = [b["z"], 0.0, b["dz"], cfg.initial_velocity / b["z"], b["L_stance"], b["dL_stance"],
             b["L_swing"], b["dL_swing"]]
        v_prev = 0.0
        for index in range(cfg.max_steps):
            self.boundaries.append(_mass_state(y))
            v_d = cfg.desired_velocity(t)
            x0 = foot + y[0] * math.sin(y[1])
            t0 = t
            y, t, foot2, pre, peaks_s = self._ssp(y, t, foot, stance, l_prev, v_d, v_prev)
            t_td = t
            ssp_state = AslipStateSSP(y[0], y[1], y[4], y[2], y[3], y[5], foot1=foot)
            try:
                dsp = impact_ssp_to_dsp(ssp_state, SwingLeg(y[6], y[7], foot2), tol=1e-6)
            except GuardError as exc:
                # the swing foot was already below ground when touchdown was armed
                raise DivergenceError(f"step {index}: {exc}") from exc
            yd, t, peaks_d = self._dsp(dsp, t, stance)
            swing = other_leg(stance)
            dsp_end = _dsp_state(yd, foot, foot2)
            new = transition_dsp_to_ssp(dsp_end, gait.params, lifting_leg=1, tol=max(cfg.event_tol_force, 1e-6))
            y = [new.r1, new.beta1, new.dr1, new.dbeta1, new.L1, new.dL1, new.L2, new.dL2]
            x1 = foot2 + y[0] * math.sin(y[1])
            rec = StepRecord(
                index=index, stance_leg=stance, t_start=t0, t_ssp=t_td - t0, t_dsp=t - t_td,
                step_length=foot2 - foot, velocity=(x1 - x0) / (t - t0), v_desired=v_d,
                pre_x=pre[0], pre_xdot=pre[1], peak_force_stance=max(peaks_s, peaks_d[0]),
                peak_force_leading=peaks_d[1], touchdown_height=self._td_height, liftoff_force=self._lo_force,
            )
            self.records.append(rec)
            if abs(rec.velocity) > cfg.max_speed:
                raise DivergenceError(f"step {index} velocity {rec.velocity:.3f} m/s exceeds limit")
            v_prev = rec.velocity
            l_prev = foot - foot2
            foot = foot2
            stance = swing
        self.boundaries.append(_mass_state(y))

    def _emit(self, row, force=False):
        self._tick += 1
        if force or self._tick % self.cfg.trace_stride == 0:
            self.trace.append(row)

    def _ssp(self, y0, t0, foot, stance, l_prev, v_d, v_prev):
        cfg = self.cfg
        swing = other_leg(stance)
        m, g = self.m, self.g
        t_blend = cfg.blend_fraction * self.gait.t_ssp
        t_freeze = math.inf if cfg.freeze_fraction is None else cfg.freeze_fraction * self.gait.t_ssp
        held = [None]
        force = self.force
        command = self.command

        def rhs(t, y):
            r, b, dr, db, L1, dL1, L2, dL2 = y
            F = force(L1, L1 - r, dL1 - dr)
            rdd, bdd = ssp_accel(r, b, dr, db, F, m, g)
            return [dr, db, rdd, bdd, dL1, command(stance, t, L1, dL1), dL2, command(swing, t, L2, dL2)]

        def target(t, y):
            r, b, dr, db = y[0], y[1], y[2], y[3]
            sb, cb = math.sin(b), math.cos(b)
            x, xd = r * sb, dr * sb + r * db * cb
            if t - t0 < t_freeze or held[0] is None:
                l_des = self.desired_step(x, xd, stance, v_d, v_prev)
                if t - t0 >= t_freeze:
                    held[0] = l_des
            else:
                l_des = held[0]
            return foot + swing_step_construction(t - t0, l_prev, l_des, t_blend), (x, xd)

        def touchdown(t, y):
            r, b = y[0], y[1]
            foot2, _ = target(t, y)
            return swing_foot_height(foot + r * math.sin(b), r * math.cos(b), y[6], foot2)

        guards = [
            Guard("touchdown", touchdown, cfg.touchdown_arm_fraction * self.gait.t_ssp, cfg.event_tol_height),
            Guard("stance_unloaded", lambda t, y: force(y[4], y[4] - y[0], y[5] - y[2])),
            Guard("mass_low", lambda t, y: y[0] * math.cos(y[1]) - cfg.min_height),
        ]
        peak = [0.0]

        def on_step(t, y):
            r, b, dr, db, L1, dL1, L2, dL2 = y
            F = force(L1, L1 - r, dL1 - dr)
            peak[0] = max(peak[0], F)
            sb, cb = math.sin(b), math.cos(b)
            self._emit([t, "SSP", stance, r, b, L1 - r, L1, math.nan, math.nan, math.nan, L2,
                        foot + r * sb, dr * sb + r * db * cb, r * cb, F, 0.0])

        self._tick = 0
        y, t, name = self._integrate(y0, t0, rhs, guards, on_step)
        if name != "touchdown":
            raise DivergenceError(f"fell in SSP ({name}) at t={t:.4f}")
        foot2, pre = target(t, y)
        self._td_height = touchdown(t, y)
        return y, t, foot2, pre, peak[0]

    def _dsp(self, s, t0, stance):
        cfg = self.cfg
        lead = other_leg(stance)
        m, g = self.m, self.g
        force = self.force
        command = self.command
        f1, f2 = s.foot1, s.foot2

        def rhs(t, y):
            r1, q1, r2, q2, dr1, dq1, dr2, dq2, L1, dL1, L2, dL2 = y
            F1 = force(L1, L1 - r1, dL1 - dr1)
            F2 = force(L2, L2 - r2, dL2 - dr2)
            a = dsp_accel(r1, q1, r2, q2, dr1, dq1, dr2, dq2, F1, F2, m, g)
            return [dr1, dq1, dr2, dq2, a[0], a[1], a[2], a[3], dL1, command(stance, t, L1, dL1), dL2,
                    command(lead, t, L2, dL2)]

        guards = [
            Guard("liftoff", lambda t, y: force(y[8], y[8] - y[0], y[9] - y[4]), 0.0, cfg.event_tol_force),
            Guard("leading_unloaded", lambda t, y: force(y[10], y[10] - y[2], y[11] - y[6])),
            Guard("mass_low", lambda t, y: y[0] * math.cos(y[1]) - cfg.min_height),
        ]
        peaks = [0.0, 0.0]

        def on_step(t, y):
            r1, q1, r2, q2, dr1, dq1, dr2, dq2, L1, dL1, L2, dL2 = y
            F1 = force(L1, L1 - r1, dL1 - dr1)
            F2 = force(L2, L2 - r2, dL2 - dr2)
            peaks[0] = max(peaks[0], F1)
            peaks[1] = max(peaks[1], F2)
            s1, c1 = math.sin(q1), math.cos(q1)
            self._emit([t, "DSP", stance, r1, q1, L1 - r1, L1, r2, q2, L2 - r2, L2,
                        f1 + r1 * s1, dr1 * s1 + r1 * dq1 * c1, r1 * c1, F1, F2])

        y0 = [s.r1, s.q1, s.r2, s.q2, s.dr1, s.dq1, s.dr2, s.dq2, s.L1, s.dL1, s.L2, s.dL2]
        self._tick = 0
        y, t, name = self._integrate(y0, t0, rhs, guards, on_step)
        if name != "liftoff":
            raise DivergenceError(f"fell in DSP ({name}) at t={t:.4f}")
        self._lo_force = force(y[8], y[8] - y[0], y[9] - y[4])
        return y, t, peaks

    def _integrate(self, y0, t0, rhs, guards, on_step):
        cfg = self.cfg
        return integrate_domain(
            y0, t0, rhs, guards, h=cfg.h, tol_t=cfg.event_tol_t, max_duration=cfg.max_domain_time,
            on_step=on_step,
        )


def _mass_state(y):
    r, b, dr, db = y[0], y[1], y[2], y[3]
    sb, cb = math.sin(b), math.cos(b)
    return (r * sb, r * cb, dr * sb + r * db * cb, dr * cb - r * db * sb)


def _dsp_state(y, foot1, foot2):
    r1, q1, r2, q2, dr1, dq1, dr2, dq2, L1, dL1, L2, dL2 = y
    return AslipStateDSP(r1, q1, r2, q2, L1, L2, dr1, dq1, dr2, dq2, dL1, dL2, foot1, foot2)


def run_walking(gait, config: SimConfig | None = None) -> WalkResult:
    """Simulate walking from the gait's boundary state.

    Raises :class:`DivergenceError` or :class:`StallError` on failure; the
    exception's ``result`` attribute holds the steps completed so far.
    """
    cfg = config or SimConfig()
    w = _Walker(gait, cfg)
    try:
        w.run()
    except (DivergenceError, StallError) as exc:
        status = "diverged" if isinstance(exc, DivergenceError) else "stalled"
        exc.result = WalkResult(w.records, w.trace, cfg, status, str(exc), w.boundaries)
        raise
    return WalkResult(w.records, w.trace, cfg, boundaries=w.boundaries)


def run_walking_safe(gait, config: SimConfig | None = None) -> WalkResult:
    """Like :func:`run_walking` but failures are reported in ``status``."""
    try:
        return run_walking(gait, config)
    except (DivergenceError, StallError) as exc:
        return exc.result
