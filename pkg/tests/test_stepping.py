import math
import random

import pytest

from hlip import (
    DivergenceError,
    HlipParams,
    ParameterError,
    PlanarState,
    SteppingGain,
    contraction_factor,
    gain_range,
    optimal_gain,
    p1_orbit,
    p1_step_length,
    p2_orbit,
    p2_step_length,
    rollout,
    step_map,
)
from hlip.orbits import PlaneSpec, compose_3d, p1_nominal_step, sigma1, sigma2
from hlip.stepping import measured_velocities, rollout_3d

# 30-digit mpmath values for lam = sqrt(9.81), t_ssp = 0.4
K_STAR = 0.198642997032180979
K_HIGH = 0.397285994064361958


def test_gain_values(params):
    lo, hi = gain_range(params)
    assert lo == 0.0
    assert hi == pytest.approx(K_HIGH, abs=1e-12)
    assert optimal_gain(params).k == pytest.approx(K_STAR, abs=1e-12)
    assert hi == 2 * optimal_gain(params).k


def test_gain_singular_at_zero_ssp():
    with pytest.raises(ParameterError):
        gain_range(HlipParams(t_ssp=0.0))
    with pytest.raises(ParameterError):
        optimal_gain(HlipParams(t_ssp=0.0))


def test_gain_range_shrinks_with_ssp():
    highs = [gain_range(HlipParams(t_ssp=t))[1] for t in (0.1, 0.2, 0.4, 0.8, 1.6, 3.2, 6.4)]
    assert all(a > b for a, b in zip(highs, highs[1:]))
    assert highs[-1] < 1e-8


def test_paper_gain_plausible():
    # The aSLIP experiments report k* = 0.1832; reachable with plausible (z0, t_ssp).
    k = optimal_gain(HlipParams(z0=0.85, t_ssp=0.4)).k
    assert 0.15 < k < 0.22


def test_contraction_factor(params):
    assert contraction_factor(SteppingGain(0.0), params) == 1.0
    assert abs(contraction_factor(optimal_gain(params), params)) <= 1e-12
    assert contraction_factor(SteppingGain(gain_range(params)[1]), params) == pytest.approx(
        -1.0, abs=1e-12
    )


def test_p1_step_length_laws(params):
    o = p1_orbit(0.2, params)
    assert p1_step_length(o.preimpact, o, SteppingGain(0.3)) == pytest.approx(o.step_length, abs=1e-15)
    s = PlanarState(o.preimpact.x, o.preimpact.xdot + 0.1)
    l = p1_step_length(s, o, SteppingGain(0.2))
    assert l == pytest.approx(p1_nominal_step(s, params) + 0.02, abs=1e-15)


def test_p1_deadbeat_single_step(params):
    rng = random.Random(5)
    o = p1_orbit(0.2, params)
    k = optimal_gain(params)
    for _ in range(50):
        s = PlanarState(rng.uniform(-1, 1), rng.uniform(-2, 2))
        nxt = step_map(s, p1_step_length(s, o, k), params)
        assert abs(nxt.xdot - o.preimpact.xdot) <= 1e-10


def test_p2_step_length_on_orbit(params):
    o = p2_orbit(0.2, -0.05, params)
    g = SteppingGain(0.15)
    assert p2_step_length(o.preimpact_left, o, "L", g) == pytest.approx(o.step_length_left, abs=1e-14)
    assert p2_step_length(o.preimpact_right, o, "R", g) == pytest.approx(o.step_length_right, abs=1e-14)


def test_p2_in_place_law_is_mirror_symmetric(params):
    o = p2_orbit(0.0, -0.05, params)
    k = optimal_gain(params)
    rng = random.Random(2)
    for _ in range(20):
        s = PlanarState(rng.uniform(-0.3, 0.3), rng.uniform(-1, 1))
        mirrored = PlanarState(-s.x, -s.xdot)
        assert p2_step_length(mirrored, o, "R", k) == pytest.approx(-p2_step_length(s, o, "L", k), abs=1e-14)


@pytest.mark.parametrize("kind", ["P1", "P2"])
def test_rollout_deadbeat(params, kind):
    o = p1_orbit(0.2, params) if kind == "P1" else p2_orbit(0.2, -0.05, params)
    k = optimal_gain(params)
    rng = random.Random(17)
    for _ in range(100):
        log = rollout(PlanarState(rng.uniform(-1, 1), rng.uniform(-2, 2)), o, k, 4)
        assert log.n_steps == 4
        assert all(abs(r.ev) <= 1e-9 for r in log.records)
        assert all(abs(r.ex) <= 1e-9 for r in log.records[1:])


def test_rollout_on_orbit(params):
    o = p2_orbit(0.3, -0.08, params)
    log = rollout(o.preimpact_left, o, SteppingGain(0.1), 6, "L")
    assert all(abs(r.ev) <= 1e-10 and abs(r.ex) <= 1e-10 for r in log.records)
    assert [r.stance_leg for r in log.records] == ["R", "L", "R", "L", "R", "L"]
    assert measured_velocities(log, params, window=2)[-1] == pytest.approx(0.3, abs=1e-9)


@pytest.mark.parametrize("kind", ["P1", "P2"])
@pytest.mark.parametrize("frac", [0.1, 0.5, 1.3, 1.9])
def test_error_laws_exact(params, kind, frac):
    o = p1_orbit(0.4, params) if kind == "P1" else p2_orbit(0.4, 0.03, params)
    gain = SteppingGain(frac * optimal_gain(params).k)
    c = contraction_factor(gain, params)
    w = params.lam
    slope = sigma1(params) if kind == "P1" else sigma2(params)
    pos = 1.0 / slope - gain.k * math.cosh(w * params.t_ssp)
    sign = 1.0 if kind == "P1" else -1.0
    rng = random.Random(23)
    for _ in range(20):
        log = rollout(PlanarState(rng.uniform(-1, 1), rng.uniform(-2, 2)), o, gain, 1)
        ev0, ev1, ex1 = log.initial.ev, log.records[0].ev, log.records[0].ex
        assert abs(ev1 - sign * c * ev0) <= 1e-10
        assert abs(ex1 - sign * pos * ev0) <= 1e-10


def test_geometric_decay(params):
    o = p1_orbit(0.2, params)
    gain = SteppingGain(0.6 * optimal_gain(params).k)
    c = contraction_factor(gain, params)
    ev = rollout(PlanarState(0.4, -1.0), o, gain, 8).velocity_errors()
    for a, b in zip(ev, ev[1:]):
        assert abs(b / a - c) <= 1e-8


@pytest.mark.parametrize("edge", ["low", "high"])
def test_boundary_gains_do_not_contract(params, edge):
    o = p1_orbit(0.2, params)
    gain = SteppingGain(0.0 if edge == "low" else gain_range(params)[1])
    log = rollout(PlanarState(0.1, 1.3), o, gain, 10)
    ev = [abs(e) for e in log.velocity_errors()]
    assert all(abs(e - ev[0]) <= 1e-10 for e in ev)
    assert not log.is_contracting()


def test_global_stabilization_envelope(params):
    o = p1_orbit(0.3, params)
    rng = random.Random(99)
    lo, hi = gain_range(params)
    for _ in range(1000):
        gain = SteppingGain(rng.uniform(lo + 0.01 * hi, 0.99 * hi))
        c = abs(contraction_factor(gain, params))
        log = rollout(PlanarState(rng.uniform(-1, 1), rng.uniform(-2, 2)), o, gain, 12)
        ev = [abs(e) for e in log.velocity_errors()]
        for a, b in zip(ev, ev[1:]):
            assert b <= c * a + 1e-12
        assert log.is_contracting()


def test_divergence_carries_partial_log(params):
    o = p1_orbit(0.2, params)
    with pytest.raises(DivergenceError) as info:
        rollout(PlanarState(0.1, 0.1), o, SteppingGain(1e300), 5)
    assert info.value.log is not None
    assert info.value.log.n_steps < 5


def test_rollout_requires_a_step(params):
    with pytest.raises(ValueError):
        rollout(PlanarState(0, 0), p1_orbit(0.0, params), optimal_gain(params), 0)


def test_csv_columns(params):
    log = rollout(PlanarState(0.1, 0.2), p1_orbit(0.2, params), optimal_gain(params), 3)
    lines = log.to_csv().splitlines()
    assert lines[0] == "step,x,xdot,l_cmd,ev,ex"
    assert len(lines) == 5


def test_rollout_3d_converges(params):
    c = compose_3d(PlaneSpec("P2", -0.25, -0.05), PlaneSpec("P2", -0.25, -0.05), params)
    sag, cor = rollout_3d(c, PlanarState(0, 0), PlanarState(0, 0), 4)
    assert measured_velocities(sag, params, 2)[-1] == pytest.approx(-0.25, abs=1e-9)
    assert measured_velocities(cor, params, 2)[-1] == pytest.approx(-0.25, abs=1e-9)
