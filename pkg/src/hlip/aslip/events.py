"""Fixed-step RK4 integration of one hybrid domain with guard localization.

A guard is a scalar function of ``(t, y)`` that fires when it falls from
positive to ``<= 0``. After every step each armed guard is checked; on a sign
change the crossing is bracketed inside the step and refined by bisection on
the sub-step length, re-integrating a single RK4 step from the step start, so
the located state is exactly what the scheme would produce with that step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

from hlip.stepping import DivergenceError


class StallError(RuntimeError):
    """No guard fired within the allowed domain duration."""


@dataclass
class Guard:
    name: str
    fn: Callable[[float, list], float]
    armed_after: float = 0.0  # time into the domain before the guard is active
    tol_value: float = math.inf  # also refine until |fn| <= tol_value at the located state


def rk4_step(rhs, t, y, h):
    k1 = rhs(t, y)
    y2 = [a + 0.5 * h * b for a, b in zip(y, k1)]
    k2 = rhs(t + 0.5 * h, y2)
    y3 = [a + 0.5 * h * b for a, b in zip(y, k2)]
    k3 = rhs(t + 0.5 * h, y3)
    y4 = [a + h * b for a, b in zip(y, k3)]
    k4 = rhs(t + h, y4)
    return [a + h / 6.0 * (b + 2.0 * c + 2.0 * d + e) for a, b, c, d, e in zip(y, k1, k2, k3, k4)]


def _locate(rhs, guard, t, y, h, tol_t):
    lo, hi = 0.0, h
    y_hi = None
    val = -math.inf
    for _ in range(200):
        if hi - lo <= tol_t and -val <= guard.tol_value:
            break
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        y_mid = rk4_step(rhs, t, y, mid)
        v = guard.fn(t + mid, y_mid)
        if v <= 0.0:
            hi, y_hi, val = mid, y_mid, v
        else:
            lo = mid
    if y_hi is None:
        y_hi = rk4_step(rhs, t, y, hi)
    return t + hi, y_hi


def integrate_domain(
    y0: Sequence[float],
    t0: float,
    rhs: Callable[[float, list], list],
    guards: Sequence[Guard],
    h: float = 1e-4,
    tol_t: float = 1e-9,
    max_duration: float = 5.0,
    on_step: Callable[[float, list], None] | None = None,
):
    """Integrate until the first guard fires.

    Returns ``(y_end, t_end, guard_name)``. Raises :class:`StallError` if no
    guard fires within ``max_duration`` and :class:`DivergenceError` on a
    non-finite state.
    """
    if h <= 0 or tol_t <= 0:
        raise ValueError("step and event tolerance must be positive")
    t, y = t0, list(y0)
    prev = [g.fn(t, y) if t - t0 >= g.armed_after else None for g in guards]
    t_end = t0 + max_duration
    while t < t_end:
        try:
            y_new = rk4_step(rhs, t, y, h)
        except OverflowError as exc:
            raise DivergenceError(f"overflow at t={t:.6f}: {exc}") from exc
        t_new = t + h
        if not all(math.isfinite(v) for v in y_new):
            raise DivergenceError(f"non-finite state at t={t_new:.6f}")
        hits = []
        for i, g in enumerate(guards):
            if t_new - t0 < g.armed_after:
                continue
            val = g.fn(t_new, y_new)
            if val <= 0.0 and (prev[i] is None or prev[i] > 0.0):
                if prev[i] is None:
                    # guard armed inside this step and already negative: fire at the step end
                    hits.append((t_new, y_new, g.name))
                else:
                    te, ye = _locate(rhs, g, t, y, h, tol_t)
                    hits.append((te, ye, g.name))
            prev[i] = val
        if hits:
            te, ye, name = min(hits, key=lambda item: item[0])
            if on_step is not None:
                on_step(te, ye)
            return ye, te, name
        t, y = t_new, y_new
        if on_step is not None:
            on_step(t, y)
    raise StallError(f"no guard fired within {max_duration} s")
