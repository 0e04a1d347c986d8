"""Independent reference computations used by the tests.

Nothing here imports the closed-form flows it is checked against.
"""

import math


def rk4_lip(x, xdot, lam, t_end, h=1e-6):
    """Fixed-step RK4 for xddot = lam**2 x; returns (x, xdot) at t_end."""
    n = int(round(t_end / h))
    h = t_end / n
    w2 = lam * lam
    for _ in range(n):
        k1x, k1v = xdot, w2 * x
        k2x, k2v = xdot + 0.5 * h * k1v, w2 * (x + 0.5 * h * k1x)
        k3x, k3v = xdot + 0.5 * h * k2v, w2 * (x + 0.5 * h * k2x)
        k4x, k4v = xdot + h * k3v, w2 * (x + h * k3x)
        x += h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
        xdot += h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
    return x, xdot


def brute_step(x, xdot, l, lam, t_ssp, t_dsp, h=1e-5):
    """One H-LIP step by explicit integration: drift, exchange, RK4 stance."""
    x = x + xdot * t_dsp - l
    return rk4_lip(x, xdot, lam, t_ssp, h)


def horner(coeffs, x):
    """Polynomial with coefficients in ascending powers, evaluated by Horner."""
    acc = 0.0
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc
