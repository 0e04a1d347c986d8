"""Command-line front end.

Every subcommand writes into one output directory: its data files (CSV/JSON),
SVG plots, and ``manifest.json`` with the fully resolved configuration.

Configuration precedence is built-in defaults, then the ``--config`` JSON file,
then flags given on the command line. The config file is a JSON object whose
keys are option names (dashes or underscores), optionally grouped under a
section named after the subcommand::

    {"hlip": {"z0": 1.0, "t_ssp": 0.4, "t_dsp": 0.1},
     "orbit": {"kind": "p2", "v": 0.3, "xb": -0.05}}

Exit codes: 0 success, 1 usage error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from hlip import __version__
from hlip.core import HlipParams, ParameterError, PlanarState, lam
from hlip.orbits import CATEGORIES, PlaneSpec, compose_3d, p1_orbit, p2_orbit, phase_samples, verify_orbit
from hlip.stepping import (
    DivergenceError,
    SteppingGain,
    contraction_factor,
    gain_range,
    measured_velocities,
    optimal_gain,
    rollout,
    rollout_3d,
)
from hlip.svg import Plot

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2

# random initial pre-impact states are drawn uniformly from these boxes
STATE_RANGES = {"x": [-0.5, 0.5], "xdot": [-1.0, 1.0]}

HLIP_KEYS = ("g", "z0", "t_ssp", "t_dsp")


class UsageError(Exception):
    pass


class NumericalFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# --- option tables ---------------------------------------------------------------
# Options default to None on the parser so explicit flags can be told apart
# from defaults; the real defaults live here.

DEFAULTS = {
    "hlip": {"g": 9.81, "z0": 1.0, "t_ssp": 0.4, "t_dsp": 0.1},
    "orbit": {"kind": "p1", "v": 0.2, "xb": -0.05, "dt": 0.005},
    "stabilize": {
        "kind": "p1", "v": 0.2, "xb": -0.05, "n_init": 3, "steps": 10,
        "gain": "optimal", "gain_grid": None,
    },
    "gaitopt": {"n_ssp": 24, "n_dsp": 8, "validate_steps": 10},
    "aslip-run": {
        "gait": None, "controller": "P1", "v": 0.1, "xb": -0.05, "steps": 20, "gain": "optimal",
        "kd": "0", "kd_count": 9, "fixed_step": 0.0, "h": 1e-4,
    },
    "sweep": {"gait": None, "velocities": "0.1..0.9", "count": 9, "steps": 20, "workers": 0, "h": 1e-4},
    "compose3d": {
        "sag_kind": "p1", "sag_v": 0.2, "cor_kind": "p2", "cor_v": 0.0, "xb": -0.05, "steps": 6,
        "sag_init": None, "cor_init": None,
    },
}

# options whose values may start with a minus sign
_VALUE_FLAGS = {"--kd", "--velocities", "--v", "--sag-v", "--cor-v", "--xb", "--gain", "--gain-grid",
                "--sag-init", "--cor-init", "--fixed-step"}


def _normalize_argv(argv):
    """Join ``--flag -0.04..0.04`` into ``--flag=-0.04..0.04`` so argparse accepts it."""
    out, i = [], 0
    while i < len(argv):
        a = argv[i]
        if a in _VALUE_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"{a}={argv[i + 1]}")
            i += 2
            continue
        out.append(a)
        i += 1
    return out


def _add_hlip(p):
    g = p.add_argument_group("H-LIP parameters")
    g.add_argument("--g", type=float)
    g.add_argument("--z0", type=float)
    g.add_argument("--t-ssp", type=float)
    g.add_argument("--t-dsp", type=float)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hlip", description="H-LIP orbits, stepping control and aSLIP walking.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--out", help="output directory (default: out/<command>)")
    common.add_argument("--seed", type=int, default=None, help="seed for random initial states (default 0)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("orbit", parents=[common], help="P1/P2 orbit description and phase portrait")
    s.add_argument("--kind", choices=["p1", "p2", "P1", "P2"])
    s.add_argument("--v", type=float, help="desired velocity (m/s)")
    s.add_argument("--xb", type=float, help="P2 boundary position of the left step (m)")
    s.add_argument("--dt", type=float, help="arc sample interval (s)")
    _add_hlip(s)

    s = sub.add_parser("stabilize", parents=[common], help="stepping-controller rollouts from random states")
    s.add_argument("--kind", choices=["p1", "p2", "P1", "P2"])
    s.add_argument("--v", type=float)
    s.add_argument("--xb", type=float)
    s.add_argument("--n-init", type=int, help="number of random initial states")
    s.add_argument("--steps", type=int)
    s.add_argument("--gain", help="'optimal' or a gain value (s)")
    s.add_argument("--gain-grid", help="comma-separated multiples of the deadbeat gain")
    _add_hlip(s)

    s = sub.add_parser("gaitopt", parents=[common], help="optimize the aSLIP stepping-in-place gait")
    s.add_argument("--n-ssp", type=int)
    s.add_argument("--n-dsp", type=int)
    s.add_argument("--validate-steps", type=int)

    s = sub.add_parser("aslip-run", parents=[common], help="closed-loop aSLIP walking")
    s.add_argument("--gait", help="gait JSON written by 'gaitopt'")
    s.add_argument("--controller", choices=["P1", "P2", "raibert", "fixed"])
    s.add_argument("--v", type=float)
    s.add_argument("--xb", type=float)
    s.add_argument("--steps", type=int)
    s.add_argument("--gain", help="'optimal' or a gain value (s)")
    s.add_argument("--kd", help="derivative gain: value, list 'a,b,c' or range 'a..b'")
    s.add_argument("--kd-count", type=int, help="points in a --kd range")
    s.add_argument("--fixed-step", type=float)
    s.add_argument("--h", type=float, help="integrator step (s)")

    s = sub.add_parser("sweep", parents=[common], help="aSLIP P1 walking over a velocity grid")
    s.add_argument("--gait")
    s.add_argument("--velocities", help="list 'a,b,c' or range 'a..b'")
    s.add_argument("--count", type=int, help="points in a --velocities range")
    s.add_argument("--steps", type=int)
    s.add_argument("--workers", type=int, help="worker processes (0: up to 4)")
    s.add_argument("--h", type=float)

    s = sub.add_parser("compose3d", parents=[common], help="decoupled sagittal/coronal H-LIP walking")
    s.add_argument("--sag-kind", choices=["p1", "p2", "P1", "P2"])
    s.add_argument("--sag-v", type=float)
    s.add_argument("--cor-kind", choices=["p1", "p2", "P1", "P2"])
    s.add_argument("--cor-v", type=float)
    s.add_argument("--xb", type=float)
    s.add_argument("--steps", type=int)
    s.add_argument("--sag-init", help="'x,xdot' (default: random)")
    s.add_argument("--cor-init", help="'x,xdot' (default: random)")
    _add_hlip(s)
    return p


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError("config must be a JSON object")
    return data


def resolve(args) -> dict:
    """Merge defaults, config file and explicit flags into one flat dict."""
    cfg_file = _load_config(args.config)
    cmd = args.command
    table = dict(DEFAULTS[cmd])
    if hasattr(args, "t_ssp"):
        table.update(DEFAULTS["hlip"])
    flat = {}
    for section in ("hlip", cmd):
        if isinstance(cfg_file.get(section), dict):
            flat.update(cfg_file[section])
    flat.update({k: v for k, v in cfg_file.items() if not isinstance(v, dict)})
    for key, value in flat.items():
        key = key.replace("-", "_")
        if key in ("seed", "out"):
            table[key] = value
            continue
        if key not in table:
            raise UsageError(f"unknown config key {key!r} for '{cmd}'")
        table[key] = value
    for key in list(table):
        explicit = getattr(args, key, None)
        if explicit is not None:
            table[key] = explicit
    table["seed"] = args.seed if args.seed is not None else int(table.get("seed", 0))
    if not 0 <= table["seed"] < 2**64:
        raise UsageError("seed must be an unsigned 64-bit integer")
    table["out"] = str(args.out or table.get("out") or os.path.join("out", cmd))
    return table


# --- helpers ---------------------------------------------------------------------


def parse_values(text, count=9) -> list[float]:
    """``"a..b"`` gives ``count`` evenly spaced values; ``"a,b,c"`` a list."""
    text = str(text).strip()
    try:
        if ".." in text:
            a, b = text.split("..")
            if count < 1:
                raise UsageError("range count must be positive")
            if count == 1:
                return [float(a)]
            return [float(v) for v in np.linspace(float(a), float(b), count)]
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"cannot parse values {text!r}") from exc


def _pair(text) -> PlanarState:
    vals = parse_values(text)
    if len(vals) != 2:
        raise UsageError(f"expected 'x,xdot', got {text!r}")
    return PlanarState(*vals)


def _hlip_params(c) -> HlipParams:
    try:
        return HlipParams(*(float(c[k]) for k in HLIP_KEYS))
    except (ParameterError, TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


def _build_orbit(kind, v, xb, params):
    try:
        if not (math.isfinite(float(v)) and math.isfinite(float(xb))):
            raise ValueError(f"velocity and boundary must be finite (v={v}, xb={xb})")
        spec = PlaneSpec(str(kind).upper(), float(v), float(xb))
        return spec.build(params)
    except (ParameterError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


def _gain(spec, params) -> SteppingGain:
    if str(spec).lower() in ("optimal", "deadbeat", "k*"):
        return optimal_gain(params)
    try:
        return SteppingGain(float(spec))
    except ValueError as exc:
        raise UsageError(f"gain must be 'optimal' or a number, got {spec!r}") from exc


def random_states(seed: int, n: int) -> list[PlanarState]:
    rng = np.random.default_rng(seed)
    xs = rng.uniform(*STATE_RANGES["x"], size=n)
    vs = rng.uniform(*STATE_RANGES["xdot"], size=n)
    return [PlanarState(float(a), float(b)) for a, b in zip(xs, vs)]


def _f(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_f(v) for v in row])
    return buf.getvalue()


def _write(out: Path, name: str, text: str, written: list) -> None:
    (out / name).write_text(text)
    written.append(name)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def _dump(obj) -> str:
    return json.dumps(_jsonable(obj), indent=1, sort_keys=True) + "\n"


def _phase_plot(title, orbit, params, dt=0.005, extra=()) -> Plot:
    """Phase portrait: asymptotes, orbital lines, SSP arcs and dashed jumps."""
    plot = Plot(title=title, xlabel="x (m)", ylabel="xdot (m/s)")
    samples = phase_samples(orbit, dt)
    xs = [pt[1] for arc in samples["arcs"] for pt in arc]
    vs = [pt[2] for arc in samples["arcs"] for pt in arc]
    for traj in extra:
        xs += list(traj[0])
        vs += list(traj[1])
    span = max([0.2] + [abs(x) for x in xs]) * 1.2
    vspan = max([0.2] + [abs(v) for v in vs]) * 1.2
    plot.limits((-span, span), (-vspan, vspan))
    lm = lam(params)
    plot.line([-span, span], [-lm * span, lm * span], color="#999999", dashed=True, width=1.0, label="xdot = +lam x")
    plot.line([-span, span], [lm * span, -lm * span], color="#bbbbbb", dashed=True, width=1.0, label="xdot = -lam x")
    for i, line in enumerate(orbit.lines()):
        plot.line([-span, span], [line.slope * -span + line.offset, line.slope * span + line.offset],
                  color="#2ca02c", width=1.0, label="orbital lines" if i == 0 else None)
    for i, arc in enumerate(samples["arcs"]):
        plot.line([p[1] for p in arc], [p[2] for p in arc], color="#1f77b4", width=2.0,
                  label="SSP" if i == 0 else None)
    for i, (a, b) in enumerate(samples["jumps"]):
        plot.line([a[0], b[0]], [a[1], b[1]], color="#d62728", dashed=True, label="DSP + exchange" if i == 0 else None)
    for traj in extra:
        plot.line(traj[0], traj[1], color=traj[2], markers=True, width=1.0, label=traj[3])
    return plot


# --- commands --------------------------------------------------------------------


def cmd_orbit(c, out: Path, written: list) -> dict:
    params = _hlip_params(c)
    orbit = _build_orbit(c["kind"], c["v"], c["xb"], params)
    if not c["dt"] > 0:
        raise UsageError("--dt must be positive")
    rep = verify_orbit(orbit)
    samples = phase_samples(orbit, float(c["dt"]))
    doc = {
        "orbit": orbit.to_dict(),
        "lambda": params.lam,
        "closure_residual": rep.closure_residual,
        "measured_net_velocity": rep.measured_net_velocity,
        "energy_sign": rep.energy_sign,
        "lines": [{"slope": l.slope, "offset": l.offset} for l in orbit.lines()],
        "arcs": samples["arcs"],
        "jumps": samples["jumps"],
    }
    _write(out, "orbit.json", _dump(doc), written)
    _write(out, "phase.svg", _phase_plot(f"{orbit.kind} orbit, v = {c['v']:g} m/s", orbit, params, c["dt"]).to_svg(),
           written)
    print(f"{orbit.kind} orbit v={c['v']:g}: closure residual {rep.closure_residual:.3e}, "
          f"net velocity {rep.measured_net_velocity:.6g}")
    return {"closure_residual": rep.closure_residual}


def cmd_stabilize(c, out: Path, written: list) -> dict:
    params = _hlip_params(c)
    orbit = _build_orbit(c["kind"], c["v"], c["xb"], params)
    steps, n_init = int(c["steps"]), int(c["n_init"])
    if steps < 1 or n_init < 1:
        raise UsageError("--steps and --n-init must be positive")
    k_star = optimal_gain(params).k
    if c["gain_grid"] is not None:
        gains = [SteppingGain(f * k_star) for f in parse_values(c["gain_grid"])]
    else:
        gains = [_gain(c["gain"], params)]
    inits = random_states(c["seed"], n_init)
    lo, hi = gain_range(params)

    rows, summary, warnings = [], [], []
    plot = Plot(title="velocity error per step", xlabel="step", ylabel="|xdot - xdot*| (m/s)", logy=True)
    for gi, gain in enumerate(gains):
        predicted = contraction_factor(gain, params) if orbit.kind == "P1" else None
        for ii, s0 in enumerate(inits):
            status = "ok"
            try:
                log = rollout(s0, orbit, gain, steps)
            except DivergenceError as exc:
                log, status = exc.log, "diverged"
            ev = log.velocity_errors()
            ratios = [b / a for a, b in zip(ev, ev[1:]) if abs(a) > 1e-12]
            contracting = status == "ok" and log.is_contracting()
            if not contracting:
                status = "non_contracting" if status == "ok" else status
                warnings.append(f"gain {gain.k:.6g} init {ii}: {status}")
            for step, x, xd, l, e_v, e_x in log.rows():
                rows.append((gain.k, ii, step, x, xd, l, e_v, e_x, status))
            summary.append({
                "gain": gain.k, "init": ii, "initial_state": list(s0), "status": status,
                "final_velocity_error": ev[-1], "measured_ratio": ratios[0] if ratios else None,
                "predicted_ratio": predicted,
            })
            plot.line(list(range(len(ev))), [abs(e) for e in ev],
                      label=f"K={gain.k:.3g}" if ii == 0 else None,
                      color=["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"][gi % 5], markers=True)
    header = ["gain", "init", "step", "x", "xdot", "l_cmd", "ev", "ex", "status"]
    _write(out, "rollout.csv", _csv(header, rows), written)
    _write(out, "convergence.svg", plot.to_svg(), written)
    doc = {"orbit": orbit.to_dict(), "deadbeat_gain": k_star, "gain_range": [lo, hi], "runs": summary}
    _write(out, "summary.json", _dump(doc), written)
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"{len(summary)} rollouts, {len(warnings)} flagged")
    return {"initial_states": [list(s) for s in inits], "flagged": len(warnings)}


def _load_gait(path):
    from hlip.gaitopt import Gait

    if path is None:
        raise UsageError("--gait is required (write one with 'hlip gaitopt')")
    if not Path(path).is_file():
        raise UsageError(f"gait file {path} does not exist")
    try:
        return Gait.load(path)
    except (ValueError, KeyError) as exc:
        raise UsageError(f"cannot load gait {path}: {exc}") from exc


def cmd_gaitopt(c, out: Path, written: list) -> dict:
    from hlip.gaitopt import GaitOptions, OptimizationError, optimize_stepping_in_place, validate_gait

    opts = GaitOptions(n_ssp=int(c["n_ssp"]), n_dsp=int(c["n_dsp"]))
    try:
        gait = optimize_stepping_in_place(opts=opts)
    except OptimizationError as exc:
        _write(out, "residuals.json", _dump(exc.residuals), written)
        raise NumericalFailure(str(exc)) from exc
    gait.save(out / "gait.json")
    written.append("gait.json")
    report = validate_gait(gait, n_steps=int(c["validate_steps"]))
    _write(out, "validation.json", _dump(report.to_dict()), written)

    plot = Plot(title="leg rest length over one cycle", xlabel="t (s)", ylabel="L (m)")
    plot.line(gait.leg_t, gait.leg_L, label="L")
    _write(out, "leg.svg", plot.to_svg(), written)
    plot = Plot(title="mass height over one step", xlabel="t (s)", ylabel="z (m)")
    plot.line(gait.mass_t, gait.mass_z, label="z")
    _write(out, "height.svg", plot.to_svg(), written)
    m = gait.metadata
    print(f"gait: t_ssp={gait.t_ssp:.4f} t_dsp={gait.t_dsp:.4f} cost={m['cost']:.4g} "
          f"defect={m['max_defect']:.2e} replay drift={report.max_drift:.2e} ({'ok' if report.ok else 'FAILED'})")
    return {"options": opts.to_dict(), "validation_ok": report.ok}


def _sim_config(c, controller, v, kd=0.0):
    from hlip.aslip.sim import SimConfig

    gain = None if str(c.get("gain", "optimal")).lower() in ("optimal", "deadbeat", "k*") else float(c["gain"])
    try:
        return SimConfig(
            controller=controller, max_steps=int(c["steps"]), velocity_schedule=[(0.0, float(v))],
            x_boundary=float(c.get("xb", -0.05)), kd_extra=float(kd), gain=gain,
            fixed_step=float(c.get("fixed_step", 0.0)), h=float(c["h"]),
        )
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


def cmd_aslip_run(c, out: Path, written: list) -> dict:
    from hlip.aslip.sim import run_walking_safe

    gait = _load_gait(c["gait"])
    controller = c["controller"]
    kds = parse_values(c["kd"], int(c["kd_count"])) if controller == "raibert" else [0.0]
    if not kds:
        raise UsageError("--kd is empty")
    table, failed = [], 0
    for kd in kds:
        res = run_walking_safe(gait, _sim_config(c, controller, c["v"], kd))
        tag = "" if len(kds) == 1 else f"_kd{kd:+.4f}"
        _write(out, f"steps{tag}.csv", res.steps_csv(), written)
        if len(kds) == 1:
            _write(out, "trace.csv", res.trace_csv(), written)
            _write(out, "result.json", res.to_json() + "\n", written)
        conv = res.converged(6) if res.records else {}
        table.append((kd, res.status, len(res.records), conv.get("velocity", math.nan),
                      conv.get("relative_error", math.nan), conv.get("t_ssp", math.nan),
                      conv.get("step_length", math.nan), res.status != "ok"))
        failed += res.status != "ok"
        plot = Plot(title=f"{controller} walking, v_d = {c['v']:g} m/s", xlabel="step", ylabel="velocity (m/s)")
        plot.line([r.index for r in res.records], res.velocities(), markers=True, label="step velocity")
        plot.line([r.index for r in res.records], [r.v_desired for r in res.records], dashed=True, label="desired")
        _write(out, f"velocity{tag}.svg", plot.to_svg(), written)
    header = ["kd", "status", "steps", "velocity", "relative_error", "t_ssp", "step_length", "diverged"]
    if len(kds) > 1:
        _write(out, "raibert.csv", _csv(header, table), written)
    for row in table:
        print(" ".join(f"{h}={_f(v)}" for h, v in zip(header, row)))
    if len(kds) == 1 and failed:
        raise NumericalFailure(f"walking {table[0][1]}")
    return {"kd": kds, "failed": failed}


def _sweep_one(job):
    """Worker entry: one P1 run; failures come back as a status string."""
    from hlip.aslip.sim import run_walking_safe

    gait_path, c, v = job
    gait = _load_gait(gait_path)
    res = run_walking_safe(gait, _sim_config(c, "P1", v))
    conv = res.converged(6) if res.status == "ok" else {}
    return v, res.status, res.message, conv, res.steps_csv()


def trend_checks(rows) -> dict:
    """Error bound and monotone trends over the successful sweep cells."""
    ok = [r for r in rows if r["status"] == "ok"]
    t = [r["t_ssp"] for r in ok]
    l = [r["step_length"] for r in ok]
    return {
        "all_converged": len(ok) == len(rows),
        "errors_within_10pct": len(ok) == len(rows) and all(r["relative_error"] <= 0.10 for r in ok),
        "t_ssp_non_increasing": len(ok) == len(rows) and all(b <= a for a, b in zip(t, t[1:])),
        "step_length_non_decreasing": len(ok) == len(rows) and all(b >= a for a, b in zip(l, l[1:])),
    }


def cmd_sweep(c, out: Path, written: list) -> dict:
    gait_path = c["gait"]
    _load_gait(gait_path)  # usage errors surface before any work starts
    velocities = parse_values(c["velocities"], int(c["count"]))
    if not velocities:
        raise UsageError("--velocities is empty")
    workers = int(c["workers"]) or min(4, os.cpu_count() or 1)
    jobs = [(gait_path, c, v) for v in velocities]
    if workers == 1:
        results = [_sweep_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_one, jobs))
    results.sort(key=lambda r: r[0])
    rows = []
    for v, status, message, conv, steps_csv in results:
        _write(out, f"steps_v{v:.3f}.csv", steps_csv, written)
        rows.append({
            "v_desired": v, "status": status, "message": message,
            "velocity": conv.get("velocity", math.nan), "relative_error": conv.get("relative_error", math.nan),
            "t_ssp": conv.get("t_ssp", math.nan), "t_dsp": conv.get("t_dsp", math.nan),
            "step_length": conv.get("step_length", math.nan),
        })
    header = ["v_desired", "status", "velocity", "relative_error", "t_ssp", "t_dsp", "step_length"]
    _write(out, "sweep.csv", _csv(header, [[r[h] for h in header] for r in rows]), written)
    checks = trend_checks(rows)
    _write(out, "sweep.json", _dump({"rows": rows, "checks": checks}), written)
    vs = [r["v_desired"] for r in rows]
    for name, key in (("converged T_SSP", "t_ssp"), ("converged step length", "step_length"),
                      ("relative velocity error", "relative_error")):
        plot = Plot(title=name, xlabel="v_d (m/s)", ylabel=key)
        plot.line(vs, [r[key] for r in rows], markers=True)
        _write(out, f"sweep_{key}.svg", plot.to_svg(), written)
    for r in rows:
        mark = "" if r["status"] == "ok" else f"  FAILED ({r['status']})"
        print(f"v_d={r['v_desired']:.3f} v={r['velocity']:.4f} err={r['relative_error']:.3f} "
              f"T_ssp={r['t_ssp']:.4f} l={r['step_length']:.4f}{mark}")
    for k, v in checks.items():
        print(f"{k}: {'pass' if v else 'fail'}")
    return {"velocities": velocities, "workers": workers, "checks": checks}


def cmd_compose3d(c, out: Path, written: list) -> dict:
    params = _hlip_params(c)
    try:
        comp = compose_3d(PlaneSpec(c["sag_kind"].upper(), float(c["sag_v"]), float(c["xb"])),
                          PlaneSpec(c["cor_kind"].upper(), float(c["cor_v"]), float(c["xb"])), params)
    except (ParameterError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    assert comp.category in CATEGORIES
    steps = int(c["steps"])
    if steps < 1:
        raise UsageError("--steps must be positive")
    rand = random_states(c["seed"], 2)
    s0 = _pair(c["sag_init"]) if c["sag_init"] is not None else rand[0]
    c0 = _pair(c["cor_init"]) if c["cor_init"] is not None else rand[1]
    try:
        sag, cor = rollout_3d(comp, s0, c0, steps)
    except DivergenceError as exc:
        raise NumericalFailure(str(exc)) from exc
    rows, planes = [], {}
    for plane, log, orbit, vd in (("sagittal", sag, comp.sagittal, c["sag_v"]),
                                  ("coronal", cor, comp.coronal, c["cor_v"])):
        for row in log.rows():
            rows.append((plane,) + row)
        window = 1 if orbit.kind == "P1" else 2
        vel = measured_velocities(log, params, window)
        planes[plane] = {"kind": orbit.kind, "v_desired": vd, "measured_velocity": vel[-1] if vel else None,
                         "final_velocity_error": log.velocity_errors()[-1],
                         "final_position_error": log.position_errors()[-1]}
        states = [log.initial.state] + [r.state for r in log.records]
        plot = _phase_plot(f"{plane}: {orbit.kind}, v = {vd:g} m/s", orbit, params,
                           extra=[([s.x for s in states], [s.xdot for s in states], "#9467bd", "pre-impact states")])
        _write(out, f"{plane}.svg", plot.to_svg(), written)
    _write(out, "rollout3d.csv", _csv(["plane", "step", "x", "xdot", "l_cmd", "ev", "ex"], rows), written)
    _write(out, "summary.json", _dump({"category": comp.category, "composition": comp.to_dict(), "planes": planes}),
           written)
    print(f"{comp.category}: sagittal v={planes['sagittal']['measured_velocity']:.6g}, "
          f"coronal v={planes['coronal']['measured_velocity']:.6g}")
    return {"category": comp.category, "initial_states": {"sagittal": list(s0), "coronal": list(c0)}}


COMMANDS = {
    "orbit": cmd_orbit,
    "stabilize": cmd_stabilize,
    "gaitopt": cmd_gaitopt,
    "aslip-run": cmd_aslip_run,
    "sweep": cmd_sweep,
    "compose3d": cmd_compose3d,
}


def main(argv=None) -> int:
    argv = _normalize_argv(list(sys.argv[1:] if argv is None else argv))
    args = build_parser().parse_args(argv)
    try:
        c = resolve(args)
        out = Path(c["out"])
        out.mkdir(parents=True, exist_ok=True)
        written: list = []
        manifest = {"command": args.command, "version": __version__, "config": c,
                    "random_state_ranges": STATE_RANGES, "status": "running"}
        try:
            extra = COMMANDS[args.command](c, out, written)
            manifest.update(status="ok", results=extra)
            code = EXIT_OK
        except NumericalFailure as exc:
            manifest.update(status="numerical_failure", message=str(exc))
            print(f"error: {exc}", file=sys.stderr)
            code = EXIT_NUMERIC
        manifest["outputs"] = sorted(written)
        (out / "manifest.json").write_text(_dump(manifest))
        return code
    except UsageError as exc:
        print(f"hlip {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
