"""Stepping-in-place gait for the aSLIP by direct collocation.

In-place stepping keeps both feet at the same x and the mass directly above
them, so the optimization runs on the vertical reduction of the planar model:

* SSP:  zddot = F(L_st, L_st - z, Ldot_st - zdot) / m - g
* DSP:  zddot = (F_lead + F_trail) / m - g

The gait is symmetric, so one leg's actuated-length signal over a two-step
cycle ``[0, 2T)`` (``T = t_ssp + t_dsp``) describes both legs; the other leg
runs the same signal shifted by ``T``. Within the cycle a leg is

    stance (SSP) -> trailing (DSP) -> swing (SSP) -> leading (DSP)

``Lddot`` is piecewise linear between nodes, and ``Ldot``/``L`` follow by exact
integration, so the leg reference can be replayed at any time without
interpolation error. The mass height uses trapezoidal collocation.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from hlip.aslip.model import AslipParams

GAIT_SCHEMA = "hlip.gait/1"


class OptimizationError(RuntimeError):
    def __init__(self, message: str, residuals: dict | None = None):
        super().__init__(message)
        self.residuals = residuals or {}


@dataclass
class GaitOptions:
    n_ssp: int = 24
    n_dsp: int = 8
    t_ssp_bounds: tuple = (0.3, 0.5)
    t_dsp_bounds: tuple = (0.05, 0.2)
    force_cap_factor: float = 3.0  # cap = factor * m * g
    leg_length_bounds: tuple | None = (0.8, 1.0)  # None uses the params range
    clearance: float = 0.04  # mid-swing foot clearance (m)
    touchdown_speed: float = 0.3  # minimum leg-extension rate relative to the mass at touchdown
    height_band: float | None = None  # max |z - z(0)| over the step; None leaves the height free
    accel_band: float | None = 1.0  # max |zddot| at the nodes; None leaves it free
    cost_weight: float = 1.0
    nominal_length: float = 0.9
    tol: float = 1e-10
    max_iter: int = 500

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d


@dataclass
class Gait:
    """Periodic stepping-in-place artifact.

    ``leg_t``/``leg_L``/``leg_dL``/``leg_ddL`` sample one leg over ``[0, 2T]``
    (node times are uniform within each of the four segments). ``mass_t``,
    ``mass_z``, ``mass_dz`` sample the mass over one step ``[0, T]``.
    """

    params: AslipParams
    t_ssp: float
    t_dsp: float
    leg_t: np.ndarray
    leg_L: np.ndarray
    leg_dL: np.ndarray
    leg_ddL: np.ndarray
    mass_t: np.ndarray
    mass_z: np.ndarray
    mass_dz: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def period(self) -> float:
        return self.t_ssp + self.t_dsp

    @property
    def n_ssp(self) -> int:
        return int(self.metadata.get("n_ssp", 0))

    def boundary_state(self) -> dict:
        """Mass and leg state at the start of SSP (stance leg = the cycle leg)."""
        L_st, dL_st, _ = self.leg_reference(0.0)
        L_sw, dL_sw, _ = self.leg_reference(self.period)
        return {
            "z": float(self.mass_z[0]),
            "dz": float(self.mass_dz[0]),
            "L_stance": L_st,
            "dL_stance": dL_st,
            "L_swing": L_sw,
            "dL_swing": dL_sw,
        }

    def mean_height(self) -> float:
        t, z = self.mass_t, self.mass_z
        return float(np.sum(0.5 * (z[1:] + z[:-1]) * np.diff(t)) / (t[-1] - t[0]))

    def leg_reference(self, phase: float) -> tuple[float, float, float]:
        """``(L, Ldot, Lddot)`` of a leg ``phase`` seconds into its two-step cycle."""
        cycle = 2.0 * self.period
        p = phase % cycle
        t = self.leg_t
        k = int(np.searchsorted(t, p, side="right")) - 1
        k = min(max(k, 0), len(t) - 2)
        h = t[k + 1] - t[k]
        tau = p - t[k]
        a0 = self.leg_ddL[k]
        da = (self.leg_ddL[k + 1] - a0) / h
        L = self.leg_L[k] + self.leg_dL[k] * tau + 0.5 * a0 * tau * tau + da * tau**3 / 6.0
        dL = self.leg_dL[k] + a0 * tau + 0.5 * da * tau * tau
        return float(L), float(dL), float(a0 + da * tau)

    def scaled(self, factor: float) -> "Gait":
        """Copy with the leg-length signal multiplied by ``factor``."""
        return Gait(
            self.params, self.t_ssp, self.t_dsp, self.leg_t.copy(), self.leg_L * factor,
            self.leg_dL * factor, self.leg_ddL * factor, self.mass_t.copy(), self.mass_z.copy(),
            self.mass_dz.copy(), dict(self.metadata, scaled=factor),
        )

    def frozen(self) -> "Gait":
        """Copy with constant leg length (no actuation at all)."""
        L0 = float(self.leg_L[0])
        n = len(self.leg_t)
        return Gait(
            self.params, self.t_ssp, self.t_dsp, self.leg_t.copy(), np.full(n, L0), np.zeros(n),
            np.zeros(n), self.mass_t.copy(), self.mass_z.copy(), self.mass_dz.copy(),
            dict(self.metadata, frozen=True),
        )

    def to_dict(self) -> dict:
        return {
            "schema": GAIT_SCHEMA,
            "params": self.params.to_dict(),
            "t_ssp": self.t_ssp,
            "t_dsp": self.t_dsp,
            "leg": {
                "t": self.leg_t.tolist(),
                "L": self.leg_L.tolist(),
                "dL": self.leg_dL.tolist(),
                "ddL": self.leg_ddL.tolist(),
            },
            "mass": {"t": self.mass_t.tolist(), "z": self.mass_z.tolist(), "dz": self.mass_dz.tolist()},
            "boundary": self.boundary_state(),
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Gait":
        if d.get("schema") != GAIT_SCHEMA:
            raise ValueError(f"unsupported gait schema {d.get('schema')!r}")
        leg, mass = d["leg"], d["mass"]
        return cls(
            AslipParams.from_dict(d["params"]), float(d["t_ssp"]), float(d["t_dsp"]),
            np.asarray(leg["t"], float), np.asarray(leg["L"], float), np.asarray(leg["dL"], float),
            np.asarray(leg["ddL"], float), np.asarray(mass["t"], float), np.asarray(mass["z"], float),
            np.asarray(mass["dz"], float), dict(d.get("metadata", {})),
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def load(cls, path) -> "Gait":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


class _Problem:
    """Decision vector layout and constraint functions."""

    def __init__(self, params: AslipParams, opts: GaitOptions):
        self.p = params
        self.o = opts
        N, M = opts.n_ssp, opts.n_dsp
        self.N, self.M = N, M
        self.n_leg = 2 * (N + M) + 1  # acceleration nodes over the two-step cycle
        self.n_mass = N + M + 1
        # layout: [t_ssp, t_dsp, L0, V0, A(n_leg), z(n_mass), dz(n_mass)]
        self.i_A = 4
        self.i_z = self.i_A + self.n_leg
        self.i_dz = self.i_z + self.n_mass
        self.n = self.i_dz + self.n_mass
        self.kst = np.polynomial.polynomial
        self.Kc = np.asarray(params.stiffness_coeffs)
        self.Dc = np.asarray(params.damping_coeffs)

    def unpack(self, v):
        return v[0], v[1], v[2], v[3], v[self.i_A : self.i_z], v[self.i_z : self.i_dz], v[self.i_dz :]

    def leg_steps(self, ts, td):
        N, M = self.N, self.M
        hs, hd = ts / N, td / M
        return np.concatenate([np.full(N, hs), np.full(M, hd), np.full(N, hs), np.full(M, hd)])

    def leg_nodes(self, v):
        ts, td, L0, V0, A, _, _ = self.unpack(v)
        h = self.leg_steps(ts, td)
        dV = h * 0.5 * (A[:-1] + A[1:])
        V = np.concatenate([[V0], V0 + np.cumsum(dV)])
        dL = h * V[:-1] + h * h * (2.0 * A[:-1] + A[1:]) / 6.0
        L = np.concatenate([[L0], L0 + np.cumsum(dL)])
        t = np.concatenate([[0.0], np.cumsum(h)])
        return t, L, V, A

    def force(self, L, s, sd):
        return np.polynomial.polynomial.polyval(L, self.Kc) * s + np.polynomial.polynomial.polyval(L, self.Dc) * sd

    def pieces(self, v):
        """Per-node forces and mass accelerations, split by domain."""
        N, M = self.N, self.M
        ts, td, _, _, _, z, dz = self.unpack(v)
        _, L, V, _ = self.leg_nodes(v)
        half = N + M  # leg node index of the cycle midpoint (phase T)
        # SSP nodes 0..N: stance = leg[0..N], swing = leg[half..half+N]
        zs, dzs = z[: N + 1], dz[: N + 1]
        F_st = self.force(L[: N + 1], L[: N + 1] - zs, V[: N + 1] - dzs)
        # DSP nodes N..N+M: trailing = leg[N..N+M], leading = leg[half+N..2*half]
        zd, dzd = z[N:], dz[N:]
        F_tr = self.force(L[N : N + M + 1], L[N : N + M + 1] - zd, V[N : N + M + 1] - dzd)
        F_ld = self.force(L[half + N :], L[half + N :] - zd, V[half + N :] - dzd)
        m, g = self.p.m, self.p.g
        acc_s = F_st / m - g
        acc_d = (F_tr + F_ld) / m - g
        return dict(L=L, V=V, F_st=F_st, F_tr=F_tr, F_ld=F_ld, acc_s=acc_s, acc_d=acc_d)

    def defects(self, v):
        N, M = self.N, self.M
        ts, td, _, _, _, z, dz = self.unpack(v)
        P = self.pieces(v)
        hs, hd = ts / N, td / M
        acc_s, acc_d = P["acc_s"], P["acc_d"]
        h = np.concatenate([np.full(N, hs), np.full(M, hd)])
        a_lo = np.concatenate([acc_s[:-1], acc_d[:-1]])
        a_hi = np.concatenate([acc_s[1:], acc_d[1:]])
        dz_def = dz[1:] - dz[:-1] - 0.5 * h * (a_lo + a_hi)
        z_def = z[1:] - z[:-1] - 0.5 * h * (dz[:-1] + dz[1:])
        return np.concatenate([z_def, dz_def])

    def equalities(self, v):
        N, M = self.N, self.M
        ts, td, L0, V0, A, z, dz = self.unpack(v)
        P = self.pieces(v)
        L, V = P["L"], P["V"]
        half = N + M
        return np.concatenate(
            [
                self.defects(v),
                [
                    z[-1] - z[0],
                    dz[-1] - dz[0],
                    L[-1] - L[0],
                    V[-1] - V[0],
                    A[-1] - A[0],
                    L[half + N] - z[N],  # swing leg reaches the ground at touchdown
                    P["F_tr"][-1] / (self.p.m * self.p.g),  # trailing leg unloaded at lift-off
                ],
            ]
        )

    def inequalities(self, v):
        N, M = self.N, self.M
        ts, td, L0, V0, A, z, dz = self.unpack(v)
        P = self.pieces(v)
        L, V = P["L"], P["V"]
        half = N + M
        mg = self.p.m * self.p.g
        cap = self.o.force_cap_factor * mg
        lo, hi = self.o.leg_length_bounds or self.p.leg_length_range
        k = np.arange(1, N)
        clearance = self.o.clearance * np.sin(np.pi * k / N) ** 2
        swing = L[half + 1 : half + N]
        F_contact = np.concatenate([P["F_st"], P["F_tr"][:-1], P["F_ld"]]) / mg
        band = []
        if self.o.height_band is not None:
            band = [self.o.height_band - (z[1:] - z[0]), self.o.height_band + (z[1:] - z[0])]
        if self.o.accel_band is not None:
            acc = np.concatenate([P["acc_s"], P["acc_d"]])
            band += [self.o.accel_band - acc, self.o.accel_band + acc]
        return np.concatenate(
            band + [
                F_contact,
                cap / mg - F_contact,
                (z[1:N] - clearance) - swing,
                [V[half + N] - dz[N] - self.o.touchdown_speed],
                L - lo,
                hi - L,
            ]
        )

    def cost(self, v):
        ts, td, _, _, A, _, _ = self.unpack(v)
        h = self.leg_steps(ts, td)
        return self.o.cost_weight * float(np.sum(0.5 * h * (A[:-1] ** 2 + A[1:] ** 2)))

    def bounds(self):
        b = [tuple(self.o.t_ssp_bounds), tuple(self.o.t_dsp_bounds)]
        lo, hi = self.o.leg_length_bounds or self.p.leg_length_range
        b += [(lo, hi), (None, None)]
        b += [(None, None)] * self.n_leg
        b += [(0.2, hi)] * self.n_mass
        b += [(None, None)] * self.n_mass
        return b

    def static_guess(self):
        """Static vertical stance at the nominal leg length, durations (0.4, 0.1)."""
        L0 = self.o.nominal_length
        mg = self.p.m * self.p.g
        z0 = L0 - mg / self.p.stiffness(L0)
        v = np.zeros(self.n)
        v[0] = min(max(0.4, self.o.t_ssp_bounds[0]), self.o.t_ssp_bounds[1])
        v[1] = min(max(0.1, self.o.t_dsp_bounds[0]), self.o.t_dsp_bounds[1])
        v[2] = L0
        v[self.i_z : self.i_dz] = z0
        return v


def collocation_residuals(problem: _Problem, v) -> dict:
    eq = problem.equalities(v)
    ineq = problem.inequalities(v)
    nd = 2 * (problem.N + problem.M)
    return {
        "max_defect": float(np.max(np.abs(eq[:nd]))),
        "max_equality": float(np.max(np.abs(eq))),
        "periodicity": float(np.max(np.abs(eq[nd : nd + 5]))),
        "min_inequality": float(np.min(ineq)),
    }


def optimize_stepping_in_place(
    params: AslipParams | None = None,
    opts: GaitOptions | None = None,
    initial_guess: np.ndarray | None = None,
) -> Gait:
    """Minimum-``sum Lddot**2`` periodic stepping-in-place gait."""
    params = params or AslipParams()
    opts = opts or GaitOptions()
    prob = _Problem(params, opts)
    v0 = prob.static_guess() if initial_guess is None else np.asarray(initial_guess, float)
    started = time.perf_counter()
    res = minimize(
        prob.cost,
        v0,
        method="SLSQP",
        bounds=prob.bounds(),
        constraints=[
            {"type": "eq", "fun": prob.equalities},
            {"type": "ineq", "fun": prob.inequalities},
        ],
        options={"maxiter": opts.max_iter, "ftol": opts.tol},
    )
    elapsed = time.perf_counter() - started
    resid = collocation_residuals(prob, res.x)
    resid.update(cost=float(res.fun), iterations=int(res.nit), message=str(res.message), seconds=elapsed)
    if not (resid["max_equality"] <= 1e-6 and resid["min_inequality"] >= -1e-6):
        raise OptimizationError(f"gait optimization did not converge: {res.message}", resid)
    return _to_gait(prob, res.x, resid)


def interpolated_guess(gait: Gait, opts: GaitOptions) -> np.ndarray:
    """Decision vector for ``opts``'s grid interpolated from an existing gait."""
    prob = _Problem(gait.params, opts)
    ts, td = gait.t_ssp, gait.t_dsp
    N, M = opts.n_ssp, opts.n_dsp
    t_leg = np.concatenate([[0.0], np.cumsum(prob.leg_steps(ts, td))])
    t_mass = np.concatenate([np.linspace(0.0, ts, N + 1), ts + np.linspace(0.0, td, M + 1)[1:]])
    v = np.empty(prob.n)
    v[:4] = ts, td, gait.leg_L[0], gait.leg_dL[0]
    v[prob.i_A : prob.i_z] = np.interp(t_leg, gait.leg_t, gait.leg_ddL)
    v[prob.i_z : prob.i_dz] = np.interp(t_mass, gait.mass_t, gait.mass_z)
    v[prob.i_dz :] = np.interp(t_mass, gait.mass_t, gait.mass_dz)
    return v


def _to_gait(prob: _Problem, v, resid: dict) -> Gait:
    ts, td, _, _, _, z, dz = prob.unpack(v)
    t, L, V, A = prob.leg_nodes(v)
    N, M = prob.N, prob.M
    mass_t = np.concatenate([np.linspace(0.0, ts, N + 1), ts + np.linspace(0.0, td, M + 1)[1:]])
    meta = dict(resid)
    meta.update(n_ssp=N, n_dsp=M, options=prob.o.to_dict(), decision_vector=np.asarray(v).tolist())
    return Gait(prob.p, float(ts), float(td), t, L, V, A, mass_t, np.asarray(z, float).copy(),
                np.asarray(dz, float).copy(), meta)


@dataclass
class GaitReport:
    """Open-loop replay of a gait with the step length held at zero.

    ``drift[k]`` is the largest change of the mass boundary state
    ``(x, z, xdot, zdot)`` over step ``k``; ``deviation[k]`` is its distance
    from the gait's own boundary state after ``k`` steps.
    """

    n_steps: int
    drift: list
    deviation: list
    durations: list
    diverged: bool
    message: str = ""
    tol: float = 1e-3

    @property
    def max_drift(self) -> float:
        return max(self.drift) if self.drift else math.inf

    @property
    def ok(self) -> bool:
        return not self.diverged and len(self.drift) == self.n_steps and self.max_drift <= self.tol

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "n_steps": self.n_steps,
            "max_drift": self.max_drift,
            "drift": list(self.drift),
            "deviation": list(self.deviation),
            "durations": [list(d) for d in self.durations],
            "diverged": self.diverged,
            "message": self.message,
            "tol": self.tol,
        }


def validate_gait(gait: Gait, params: AslipParams | None = None, n_steps: int = 10, tol: float = 1e-3) -> GaitReport:
    """Replay ``gait`` in the hybrid simulator without stepping feedback."""
    from hlip.aslip.sim import SimConfig, run_walking_safe

    if params is not None:
        gait = Gait(params, gait.t_ssp, gait.t_dsp, gait.leg_t, gait.leg_L, gait.leg_dL, gait.leg_ddL,
                    gait.mass_t, gait.mass_z, gait.mass_dz, dict(gait.metadata))
    res = run_walking_safe(gait, SimConfig(controller="fixed", max_steps=n_steps, trace_stride=10**9))
    B = np.asarray(res.boundaries, float).reshape(-1, 4)
    nominal = np.array([0.0, gait.mass_z[0], 0.0, gait.mass_dz[0]])
    drift = np.abs(np.diff(B, axis=0)).max(axis=1).tolist() if len(B) > 1 else []
    deviation = np.abs(B - nominal).max(axis=1).tolist()
    # a run that stopped mid-step leaves one boundary without a completed step
    drift = drift[: len(res.records)]
    return GaitReport(
        n_steps=n_steps,
        drift=drift,
        deviation=deviation,
        durations=[(r.t_ssp, r.t_dsp) for r in res.records],
        diverged=res.status != "ok",
        message=res.message,
        tol=tol,
    )


def resampled_defects(gait: Gait, factor: int = 4) -> float:
    """Largest trapezoidal defect of ``gait`` re-evaluated on a ``factor``-times finer grid.

    Mass height and rate between the optimizer's nodes come from cubic
    Hermite interpolation (slopes from the node dynamics); leg lengths come
    from the exact leg reference.
    """
    p = gait.params
    T, N = gait.period, gait.n_ssp
    Kc, Dc = np.asarray(p.stiffness_coeffs), np.asarray(p.damping_coeffs)
    poly = np.polynomial.polynomial.polyval

    def accel(t, z, dz, domain):
        total = 0.0
        legs = ((0.0,),) if domain == "ssp" else ((0.0,), (T,))
        for (shift,) in legs:
            L, dL, _ = gait.leg_reference(t + shift)
            total += poly(L, Kc) * (L - z) + poly(L, Dc) * (dL - dz)
        return total / p.m - p.g

    worst = 0.0
    t, z, dz = gait.mass_t, gait.mass_z, gait.mass_dz
    for k in range(len(t) - 1):
        domain = "ssp" if k < N else "dsp"
        h = t[k + 1] - t[k]
        a0, a1 = accel(t[k], z[k], dz[k], domain), accel(t[k + 1], z[k + 1], dz[k + 1], domain)
        # Hermite basis on [0, 1]
        s = np.linspace(0.0, 1.0, factor + 1)
        h00, h10 = 2 * s**3 - 3 * s**2 + 1, s**3 - 2 * s**2 + s
        h01, h11 = -2 * s**3 + 3 * s**2, s**3 - s**2
        zf = h00 * z[k] + h10 * h * dz[k] + h01 * z[k + 1] + h11 * h * dz[k + 1]
        dzf = h00 * dz[k] + h10 * h * a0 + h01 * dz[k + 1] + h11 * h * a1
        tf = t[k] + s * h
        af = np.array([accel(ti, zi, di, domain) for ti, zi, di in zip(tf, zf, dzf)])
        hf = h / factor
        d_z = zf[1:] - zf[:-1] - 0.5 * hf * (dzf[1:] + dzf[:-1])
        d_dz = dzf[1:] - dzf[:-1] - 0.5 * hf * (af[1:] + af[:-1])
        worst = max(worst, float(np.max(np.abs(d_z))), float(np.max(np.abs(d_dz))))
    return worst
