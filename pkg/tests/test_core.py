import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hlip import (
    HlipParams,
    ParameterError,
    PlanarState,
    dsp_flow,
    flow_coefficients,
    impact_d2s,
    impact_s2d,
    lam,
    orbital_energy,
    ssp_flow,
    step_map,
)
from hlip.orbits import sigma1
from oracles import brute_step, rk4_lip

finite = st.floats(-2.0, 2.0, allow_nan=False)
durations = st.floats(0.0, 1.0)


def test_lambda_values():
    # 3.1320919526731650539 from a 30-digit mpmath evaluation
    assert lam(HlipParams(g=9.81, z0=1.0)) == pytest.approx(3.13209195267316505, abs=1e-15)
    assert lam(HlipParams(g=9.81, z0=9.81)) == 1.0
    assert lam(HlipParams(g=1.0, z0=4.0)) == 0.5


@pytest.mark.parametrize(
    "kwargs",
    [dict(g=0.0), dict(g=-1.0), dict(z0=0.0), dict(t_ssp=-0.1), dict(t_dsp=-1e-3), dict(z0=math.nan)],
)
def test_invalid_params(kwargs):
    with pytest.raises(ParameterError):
        HlipParams(**kwargs)


def test_zero_dsp_allowed():
    p = HlipParams(t_dsp=0.0)
    assert p.period == p.t_ssp


def test_ssp_flow_equilibrium(params):
    assert ssp_flow(PlanarState(0.0, 0.0), 0.37, params) == (0.0, 0.0)


def test_ssp_flow_unstable_mode(params):
    w = params.lam
    x0, t = 0.07, 0.3
    s = ssp_flow(PlanarState(x0, w * x0), t, params)
    assert s.x == pytest.approx(x0 * math.exp(w * t), rel=1e-14)
    assert s.xdot == pytest.approx(w * x0 * math.exp(w * t), rel=1e-14)


def test_ssp_flow_matches_rk4_and_lands_on_sigma1_line(params):
    w, s1 = params.lam, sigma1(params)
    s = ssp_flow(PlanarState(-0.1, 0.5636), 0.4, params)
    ref = rk4_lip(-0.1, 0.5636, w, 0.4)
    assert abs(s.x - ref[0]) <= 1e-8 and abs(s.xdot - ref[1]) <= 1e-8
    # 0.5636 is sigma1 * 0.1 rounded, so the end state sits on the line to that rounding
    assert abs(s.xdot - s1 * s.x) < 1e-3
    exact = ssp_flow(PlanarState(-0.1, 0.1 * s1), 0.4, params)
    assert abs(exact.xdot - s1 * exact.x) < 1e-12


def test_flow_coefficients_reconstruct(params):
    st0 = PlanarState(0.13, -0.42)
    c1, c2 = flow_coefficients(st0, params)
    assert c1 + c2 == pytest.approx(st0.x, abs=1e-15)
    assert params.lam * (c1 - c2) == pytest.approx(st0.xdot, abs=1e-15)


def test_negative_durations_rejected(params):
    with pytest.raises(ValueError):
        ssp_flow(PlanarState(0.1, 0.1), -0.1, params)
    with pytest.raises(ValueError):
        dsp_flow(PlanarState(0.1, 0.1), -1e-9)


def test_dsp_flow():
    assert dsp_flow(PlanarState(0.1, 0.5), 0.1) == pytest.approx((0.15, 0.5))
    assert dsp_flow(PlanarState(0.3, 0.0), 7.0) == (0.3, 0.0)
    assert dsp_flow(PlanarState(-0.2, 1.0), 0.0) == (-0.2, 1.0)


def test_impacts():
    assert impact_d2s(PlanarState(0.2, 0.5), 0.4) == pytest.approx((-0.2, 0.5))
    assert impact_d2s(PlanarState(0.3, -0.7), 0.0) == (0.3, -0.7)
    assert impact_d2s(PlanarState(0.0, 1.0), 0.3) == (-0.3, 1.0)
    s = PlanarState(0.11, 0.22)
    assert impact_s2d(s) is s


def test_step_map_origin_fixed_point():
    p = HlipParams(t_dsp=0.0)
    assert step_map(PlanarState(0.0, 0.0), 0.0, p) == (0.0, 0.0)


def test_step_map_trace_lists_four_boundaries(params):
    trace = []
    step_map(PlanarState(0.1, 0.4), 0.3, params, trace=trace)
    assert [e for e, _ in trace] == ["ssp_end", "dsp_start", "dsp_end", "ssp_start"]
    assert trace[0][1] == trace[1][1]


def test_step_map_matches_brute_force(params):
    out = step_map(PlanarState(0.12, 0.35), 0.27, params)
    ref = brute_step(0.12, 0.35, 0.27, params.lam, params.t_ssp, params.t_dsp)
    assert out == pytest.approx(ref, abs=1e-9)


def test_orbital_energy(params):
    assert orbital_energy(PlanarState(0.0, 0.0), params) == 0.0
    w = params.lam
    assert orbital_energy(PlanarState(0.3, w * 0.3), params) == pytest.approx(0.0, abs=1e-15)
    # 0.25 - 9.81 * 0.01, evaluated by hand
    assert orbital_energy(PlanarState(0.1, 0.5), params) == pytest.approx(0.1519, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(finite, finite, durations)
def test_energy_conserved_in_ssp(x, xd, t):
    p = HlipParams(t_ssp=1.0)
    s = PlanarState(x, xd)
    e0 = orbital_energy(s, p)
    e1 = orbital_energy(ssp_flow(s, t, p), p)
    assert abs(e1 - e0) <= 1e-10 * max(1.0, abs(e0))


@settings(max_examples=200, deadline=None)
@given(finite, finite, st.floats(0.0, 0.5), st.floats(0.0, 0.5))
def test_flow_composition(x, xd, t1, t2):
    p = HlipParams()
    s = PlanarState(x, xd)
    a = ssp_flow(s, t1 + t2, p)
    b = ssp_flow(ssp_flow(s, t1, p), t2, p)
    scale = max(1.0, abs(a.x), abs(a.xdot))
    assert abs(a.x - b.x) <= 1e-12 * scale
    assert abs(a.xdot - b.xdot) <= 1e-12 * scale


@settings(max_examples=100)
@given(finite, finite, st.floats(0.0, 2.0), st.floats(-1.0, 1.0))
def test_velocity_untouched_outside_ssp(x, xd, t, l):
    s = PlanarState(x, xd)
    assert dsp_flow(s, t).xdot == xd
    assert impact_d2s(s, l).xdot == xd


def test_step_map_is_affine(params):
    rng = random.Random(7)
    for _ in range(50):
        a = (rng.uniform(-1, 1), rng.uniform(-2, 2), rng.uniform(-0.5, 0.5))
        b = (rng.uniform(-1, 1), rng.uniform(-2, 2), rng.uniform(-0.5, 0.5))
        alpha = rng.uniform(-2, 2)

        def f(v):
            return step_map(PlanarState(v[0], v[1]), v[2], params)

        combo = tuple(ai + alpha * bi for ai, bi in zip(a, b))
        zero = f((0.0, 0.0, 0.0))
        lhs = f(combo)
        fa, fb = f(a), f(b)
        for i in range(2):
            rhs = fa[i] + alpha * (fb[i] - zero[i])
            assert abs(lhs[i] - rhs) <= 1e-10
