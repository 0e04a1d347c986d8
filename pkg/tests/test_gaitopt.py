import json

import numpy as np
import pytest
from scipy.signal import find_peaks

from hlip.aslip import AslipParams
from hlip.aslip.sim import SimConfig, run_walking
from hlip.gaitopt import (
    GAIT_SCHEMA,
    Gait,
    GaitOptions,
    OptimizationError,
    _Problem,
    collocation_residuals,
    interpolated_guess,
    optimize_stepping_in_place,
    resampled_defects,
    validate_gait,
)


def _vector(gait):
    return np.asarray(gait.metadata["decision_vector"], float)


def _problem(gait):
    opts = GaitOptions(**{k: tuple(v) if isinstance(v, list) else v for k, v in gait.metadata["options"].items()})
    return _Problem(gait.params, opts)


# --- decision vector plumbing ---------------------------------------------------


def test_leg_integration_is_exact_for_linear_acceleration():
    prob = _Problem(AslipParams(), GaitOptions(n_ssp=6, n_dsp=3))
    v = prob.static_guess()
    v[prob.i_A : prob.i_z] = np.linspace(-1.0, 2.0, prob.n_leg)
    v[3] = 0.3
    t, L, V, A = prob.leg_nodes(v)
    # A is piecewise linear; compare against a fine cumulative quadrature
    tf = np.linspace(0.0, t[-1], 200001)
    Af = np.interp(tf, t, A)
    Vf = v[3] + np.concatenate([[0.0], np.cumsum(0.5 * (Af[1:] + Af[:-1]) * np.diff(tf))])
    Lf = v[2] + np.concatenate([[0.0], np.cumsum(0.5 * (Vf[1:] + Vf[:-1]) * np.diff(tf))])
    assert np.allclose(np.interp(t, tf, Vf), V, atol=1e-8)
    assert np.allclose(np.interp(t, tf, Lf), L, atol=1e-8)


def test_static_guess_stance_is_in_equilibrium():
    prob = _Problem(AslipParams(), GaitOptions())
    P = prob.pieces(prob.static_guess())
    assert np.max(np.abs(P["acc_s"])) < 1e-12


def test_trivial_feasibility_from_static_guess():
    opts = GaitOptions(
        t_ssp_bounds=(0.1, 1.0), t_dsp_bounds=(0.01, 0.5), force_cap_factor=10.0, leg_length_bounds=None,
        accel_band=None, cost_weight=0.0,
    )
    prob = _Problem(AslipParams(), opts)
    gait = optimize_stepping_in_place(opts=opts, initial_guess=prob.static_guess())
    assert gait.metadata["max_defect"] <= 1e-6
    assert gait.metadata["min_inequality"] >= -1e-6


def test_infeasible_options_raise_with_residuals():
    # a 30 cm mid-swing clearance cannot fit inside a 5 cm leg-length window
    opts = GaitOptions(leg_length_bounds=(0.9, 0.95), clearance=0.3, max_iter=30)
    with pytest.raises(OptimizationError) as info:
        optimize_stepping_in_place(opts=opts)
    assert "max_equality" in info.value.residuals


# --- the default gait -------------------------------------------------------------


def test_default_gait_collocation_residuals(default_gait):
    m = default_gait.metadata
    assert m["max_defect"] <= 1e-6
    assert m["periodicity"] <= 1e-4
    assert m["min_inequality"] >= -1e-6
    opts = GaitOptions()
    assert opts.t_ssp_bounds[0] - 1e-9 <= default_gait.t_ssp <= opts.t_ssp_bounds[1] + 1e-9
    assert opts.t_dsp_bounds[0] - 1e-9 <= default_gait.t_dsp <= opts.t_dsp_bounds[1] + 1e-9


def test_residuals_recomputed_from_decision_vector(default_gait):
    r = collocation_residuals(_problem(default_gait), _vector(default_gait))
    assert r["max_defect"] == pytest.approx(default_gait.metadata["max_defect"], abs=1e-15)


def test_default_gait_replay_net_velocity(default_gait):
    res = run_walking(default_gait, SimConfig(controller="fixed", max_steps=10))
    assert max(abs(v) for v in res.velocities()) <= 1e-3


def test_validate_optimized_gait(default_gait):
    report = validate_gait(default_gait)
    assert not report.diverged
    assert len(report.drift) == 10
    assert report.max_drift <= 1e-3
    assert report.ok


def test_validate_scaled_gait_degrades(default_gait):
    report = validate_gait(default_gait.scaled(1.1))
    grows = len(report.deviation) > 2 and report.deviation[-1] > report.deviation[1]
    assert report.diverged or grows
    assert not report.ok


def test_validate_zero_input_gait_flags_divergence(default_gait):
    report = validate_gait(default_gait.frozen())
    assert report.diverged
    assert not report.ok
    assert report.message


def test_mirrored_replay_is_identical(default_gait):
    left = run_walking(default_gait, SimConfig(controller="fixed", max_steps=6, first_stance="L"))
    right = run_walking(default_gait, SimConfig(controller="fixed", max_steps=6, first_stance="R"))
    for a, b in zip(left.records, right.records):
        assert a.stance_leg != b.stance_leg
        for name in ("t_ssp", "t_dsp", "step_length", "velocity", "pre_x", "pre_xdot", "peak_force_stance"):
            assert abs(getattr(a, name) - getattr(b, name)) <= 1e-8


def test_leg_force_single_peak_per_step(default_gait):
    # one leg's contact: leading (DSP), stance (SSP), trailing (DSP)
    P = _problem(default_gait).pieces(_vector(default_gait))
    F = np.concatenate([P["F_ld"], P["F_st"][1:], P["F_tr"][1:]])
    mg = default_gait.params.m * default_gait.params.g
    assert F[0] < F.max() and abs(F[-1]) < 1e-6 * mg  # loads in the leading DSP, unloads in the trailing one
    peaks, _ = find_peaks(F, prominence=0.05 * mg)
    assert len(peaks) == 1


def test_leg_reference_matches_samples(default_gait):
    g = default_gait
    for k in range(0, len(g.leg_t) - 1, 7):
        L, dL, ddL = g.leg_reference(g.leg_t[k])
        assert L == pytest.approx(g.leg_L[k], abs=1e-12)
        assert dL == pytest.approx(g.leg_dL[k], abs=1e-12)
        assert ddL == pytest.approx(g.leg_ddL[k], abs=1e-12)
    # periodic over the two-step cycle
    a = g.leg_reference(0.123)
    b = g.leg_reference(0.123 + 2 * g.period)
    assert a == pytest.approx(b, abs=1e-12)


# --- discretization -------------------------------------------------------------


def test_halving_node_spacing_changes_cost_little(default_gait):
    fine = GaitOptions(n_ssp=48, n_dsp=16)
    g2 = optimize_stepping_in_place(opts=fine, initial_guess=interpolated_guess(default_gait, fine))
    c1, c2 = default_gait.metadata["cost"], g2.metadata["cost"]
    assert abs(c2 - c1) / c1 <= 0.05


def test_defects_at_four_times_resolution(default_gait):
    assert resampled_defects(default_gait, 1) <= 1e-6  # the optimizer's own grid
    assert resampled_defects(default_gait, 4) <= 10 * GaitOptions().tol


# --- artifact -------------------------------------------------------------------


def test_gait_round_trip(tmp_path, default_gait):
    path = tmp_path / "gait.json"
    default_gait.save(path)
    data = json.loads(path.read_text())
    assert data["schema"] == GAIT_SCHEMA
    loaded = Gait.load(path)
    assert loaded.t_ssp == default_gait.t_ssp and loaded.t_dsp == default_gait.t_dsp
    assert np.array_equal(loaded.leg_ddL, default_gait.leg_ddL)
    assert loaded.boundary_state() == default_gait.boundary_state()
    assert loaded.params == default_gait.params


def test_gait_rejects_unknown_schema(default_gait):
    d = default_gait.to_dict()
    d["schema"] = "something/9"
    with pytest.raises(ValueError):
        Gait.from_dict(d)


def test_optimization_is_deterministic(default_gait):
    again = optimize_stepping_in_place()
    assert np.array_equal(_vector(again), _vector(default_gait))
