"""Experiment runner behind the command line: simulate, sweep, oracle checks, figures."""

from __future__ import annotations

import copy
import itertools
import json
import os
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from qmarket import closed_market, fock, pilotwave
from qmarket.config import (
    config_time_grid,
    set_path,
    trader_setups,
    validate_config,
)
from qmarket.discretized import LEAKAGE_LIMIT
from qmarket.errors import ConfigError
from qmarket.output import write_field_csv, write_series_csv, write_svg, write_table
from qmarket.reservoir_generated import (
    default_oracle_window as window3,
    delta_pi_model3,
    series_model3,
    solve_oracle_model3,
)
from qmarket.reservoir_info import (
    default_oracle_window as window2,
    delta_pi_density,
    series_model2,
    solve_oracle_model2,
)

FOCK_MAX_QUANTA = 8
TOLERANCES = {"model1": 1e-8, "model2": 0.05, "model3": 0.10}
DEFAULT_DECAY_TIMES = {"model2": 20.0, "model3": 12.0}


def _out_dir(cfg) -> Path:
    return Path(cfg["output"]["dir"])


def compute_series(cfg: dict):
    """``[(setup, TimeSeries), ...]`` for a validated market config."""
    t = config_time_grid(cfg)
    model = cfg["model"]
    out = []
    for s in trader_setups(cfg):
        if model == "model1":
            ts = closed_market.portfolio_series(s.params, s.init, t)
        elif model == "model2":
            ts = series_model2(s.params, s.init, t)
        else:
            ts = series_model3(s.params, s.init, t, noise_integral=cfg["model3"]["noise_integral"])
        out.append((s, ts))
    return out


def run_simulate(cfg: dict) -> list[Path]:
    """Write one CSV (and optionally one SVG) per trader; returns the written paths."""
    if cfg["model"] == "pilotwave":
        return run_pilotwave(cfg)
    out = _out_dir(cfg)
    prefix = cfg["output"]["prefix"]
    written = []
    for setup, ts in compute_series(cfg):
        written.append(write_series_csv(out / f"{prefix}{setup.name}.csv", ts))
        if cfg["output"]["svg"]:
            written.append(write_svg(out / f"{prefix}{setup.name}.svg", ts.times, ts.portfolio,
                                     title=f"portfolio, {setup.name}", ylabel="pi(t)"))
    return written


# pilot wave

def _hard_potential(pw: dict, q1, q2) -> np.ndarray:
    Q1, Q2 = np.meshgrid(q1, q2, indexing="ij")
    pot = pw["potential"]
    kind = pot["kind"]
    if kind == "zero":
        return np.zeros(Q1.shape)
    if kind == "quadratic":
        k, c = pot.get("stiffness", [0.0, 0.0]), pot.get("center", [0.0, 0.0])
        return 0.5 * k[0] * (Q1 - c[0]) ** 2 + 0.5 * k[1] * (Q2 - c[1]) ** 2
    s = pot.get("slope", [0.0, 0.0])
    return s[0] * Q1 + s[1] * Q2


def pilotwave_run(cfg: dict):
    """Evolve the configured packet; returns ``(frames, times, V, U_fields, points)``."""
    pw = cfg["pilotwave"]
    g = pw["grid"]
    q1 = pilotwave.periodic_axis(g["n1"], g["L1"])
    q2 = pilotwave.periodic_axis(g["n2"], g["L2"])
    pk = pw["packet"]
    psi = pilotwave.gaussian_packet(q1, q2, pk["center"], pk["sigma"], pk["kappa"], pw["hbar"], pw["mass"])
    V = _hard_potential(pw, q1, q2)
    stepper = pilotwave.SplitStepper(psi, V, pw["dt"])
    frames = stepper.evolve(psi, pw["n_steps"], save_every=pw["save_every"])
    times = pw["dt"] * pw["save_every"] * np.arange(len(frames))
    U_fields = [pilotwave.quantum_potential(f, pw["r_floor"], V) for f in frames]
    Vfield = pilotwave.PotentialField(q1, q2, V, np.zeros_like(V), np.ones_like(V))
    fields = U_fields if len(frames) > 1 else U_fields[0]
    points = pilotwave.integrate_portfolio(pw["pi0"], Vfield, fields, pw["q_path"], times)
    return frames, times, V, U_fields, points


def run_pilotwave(cfg: dict) -> list[Path]:
    frames, times, V, U_fields, points = pilotwave_run(cfg)
    out = _out_dir(cfg)
    prefix = cfg["output"]["prefix"]
    rows = [(p.t, p.pi1, p.pi2, p.q[0], p.q[1], f.norm()) for p, f in zip(points, frames)]
    written = [write_table(out / f"{prefix}pilotwave.csv", ("t", "pi1", "pi2", "q1", "q2", "norm"), rows)]
    if cfg["output"]["svg"]:
        written.append(write_svg(out / f"{prefix}pilotwave.svg", times, [p.pi1 for p in points],
                                 title="portfolio 1, pilot wave", ylabel="pi1(t)"))
    if cfg["pilotwave"]["dump_fields"]:
        for tag, j in (("initial", 0), ("final", len(frames) - 1)):
            f, U = frames[j], U_fields[j]
            written.append(write_field_csv(out / f"{prefix}pilotwave_{tag}_field.csv", f.q1, f.q2,
                                           psi=f.values, V=V, R=U.R, U=U.U))
    return written


# objectives and sweeps

def _delta_pis(cfg: dict) -> list[float]:
    model = cfg["model"]
    if model == "model2":
        return [delta_pi_density(s.params, s.init) for s in trader_setups(cfg)]
    if model == "model3":
        return [delta_pi_model3(s.params, s.init.loi) for s in trader_setups(cfg)]
    raise ConfigError(f"objective needs a long-time portfolio change, undefined for {model}")


def objective_values(cfg: dict, objective: str) -> dict:
    """Scalar outputs of one configuration, keyed by column name."""
    if cfg["model"] == "pilotwave":
        raise ConfigError("sweeps are defined for the market models only")
    if objective == "delta_pi":
        return {f"delta_pi_{j + 1}": v for j, v in enumerate(_delta_pis(cfg))}
    if objective == "ordering":
        d = _delta_pis(cfg)
        if len(d) != 2:
            raise ConfigError("ordering objective needs exactly two traders")
        return {"delta_pi_1": d[0], "delta_pi_2": d[1], "sign": float(np.sign(d[0] - d[1]))}
    fn = closed_market.peak_to_peak if objective == "amplitude" else closed_market.dominant_frequency
    return {f"{objective}_{j + 1}": fn(ts) for j, (_, ts) in enumerate(compute_series(cfg))}


def thread_count() -> int:
    raw = os.environ.get("QMARKET_THREADS")
    if raw is None or raw == "":
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"QMARKET_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"QMARKET_THREADS must be a positive integer, got {raw!r}")
    return n


def sweep_points(cfg: dict, sweep: dict) -> list[tuple]:
    """Grid of parameter tuples; the first parameter varies slowest."""
    axes = [np.linspace(p["min"], p["max"], p["steps"]) for p in sweep["parameters"]]
    pts = list(itertools.product(*axes))
    # reject bad names before any work starts
    probe = copy.deepcopy(cfg)
    for p, v in zip(sweep["parameters"], pts[0]):
        set_path(probe, p["name"], v)
    return pts


def _evaluate_point(cfg, names, values, objective):
    c = copy.deepcopy(cfg)
    for name, v in zip(names, values):
        set_path(c, name, v)
    return objective_values(validate_config(c), objective)


def run_sweep(cfg: dict, sweep: dict, out_path=None, threads=None) -> Path:
    """Evaluate the objective over the grid and write one table."""
    names = [p["name"] for p in sweep["parameters"]]
    pts = sweep_points(cfg, sweep)
    n = threads or thread_count()
    with ThreadPoolExecutor(max_workers=n) as pool:
        results = list(pool.map(lambda v: _evaluate_point(cfg, names, v, sweep["objective"]), pts))
    cols = list(results[0])
    rows = [list(v) + [r[c] for c in cols] for v, r in zip(pts, results)]
    if out_path is None:
        out_path = sweep.get("output") or _out_dir(cfg) / f"{cfg['output']['prefix']}sweep.csv"
    return write_table(out_path, names + cols, rows)


# oracle checks

def _decay_times(cfg):
    d = cfg["oracle"]["decay_times"]
    return DEFAULT_DECAY_TIMES[cfg["model"]] if d is None else d


def _window(cfg, default):
    orc = cfg["oracle"]
    k_min, k_max, n_k = default
    if "k_min" in orc:
        k_min, k_max = orc["k_min"], orc["k_max"]
    return (k_min, k_max, orc.get("n_k", n_k))


def _rel(a, b):
    return abs(a - b) / abs(b) if b != 0 else abs(a - b)


def _check_model1(cfg):
    t = config_time_grid(cfg)
    entries = []
    for s in trader_setups(cfg):
        if s.init.total > FOCK_MAX_QUANTA:
            raise ConfigError(f"oracle check for model1 needs at most {FOCK_MAX_QUANTA} quanta per trader, "
                              f"{s.name} has {s.init.total}")
        ana = closed_market.portfolio_series(s.params, s.init, t)
        ex = fock.exact_series(s.params, s.init, t)
        disc = max(float(np.max(np.abs(getattr(ana, c) - getattr(ex, c))))
                   for c in ("n_shares", "n_cash", "n_loi"))
        entries.append({"trader": s.name, "quantity": "occupations", "max_discrepancy": disc,
                        "tolerance": TOLERANCES["model1"], "pass": disc < TOLERANCES["model1"]})
    return entries


def _leak_entry(run, t_long, rows):
    leak = run.leakage(t_long, rows)
    return leak, leak <= LEAKAGE_LIMIT


def _check_model2(cfg):
    entries = []
    for s in trader_setups(cfg):
        p = s.params
        if p.lambda_inf == 0:
            raise ConfigError("oracle check for model2 needs lambda_inf > 0")
        t_long = _decay_times(cfg) / p.gamma_prime
        window = _window(cfg, window2(p))
        try:
            run = solve_oracle_model2(p, s.init, window)
        except ValueError as exc:
            raise ConfigError(f"oracle window: {exc}") from None
        leak, leak_ok = _leak_entry(run, t_long, [0, 1])
        occ = run.system_occupations([t_long])[0]
        oracle = float(occ.sum()) - s.init.portfolio
        ref = delta_pi_density(p, s.init)
        err = _rel(oracle, ref)
        entries.append({
            "trader": s.name, "quantity": "delta_pi", "t": t_long, "oracle": oracle, "closed_form": ref,
            "relative_error": err, "tolerance": TOLERANCES["model2"], "boundary_leakage": leak,
            "recurrence_time": run.recurrence_time,
            "pass": err <= TOLERANCES["model2"] and leak_ok and t_long < run.recurrence_time,
        })
    return entries


def _check_model3(cfg):
    entries = []
    for s in trader_setups(cfg):
        p = s.params
        if p.damping == 0:
            raise ConfigError("oracle check for model3 needs gamma > 0")
        t_long = _decay_times(cfg) / p.damping
        window = _window(cfg, window3(p))
        try:
            run = solve_oracle_model3(p, s.init, window)
        except ValueError as exc:
            raise ConfigError(f"oracle window: {exc}") from None
        leak, leak_ok = _leak_entry(run, t_long, [0, 1])
        w = run.transfer_weights(t_long, [0, 1])
        # share of the initial LoI quanta that ended up as shares or cash
        loi_gain = float((w[0, 2] + w[1, 2]) * s.init.loi)
        full = float((w.sum(axis=0) @ run.occupations0)) - s.init.portfolio
        ref = delta_pi_model3(p, s.init.loi)
        err = abs(loi_gain - ref) / abs(ref) if ref != 0 else abs(loi_gain)
        entries.append({
            "trader": s.name, "quantity": "delta_pi_from_loi", "t": t_long, "oracle": loi_gain,
            "oracle_total_change": full, "closed_form": ref, "relative_error": err,
            "tolerance": TOLERANCES["model3"], "boundary_leakage": leak,
            "recurrence_time": run.recurrence_time,
            "pass": err <= TOLERANCES["model3"] and leak_ok and t_long < run.recurrence_time,
        })
    return entries


def _plain(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (float, np.floating)):
        return float(v)
    return v


def run_oracle_check(cfg: dict):
    """Compare closed forms with the brute-force oracles.

    Writes ``oracle_report.json`` and returns ``(report, path)``; the report's
    ``pass`` field is False when any entry failed.
    """
    model = cfg["model"]
    checks = {"model1": _check_model1, "model2": _check_model2, "model3": _check_model3}
    if model not in checks:
        raise ConfigError(f"no oracle check for {model}")
    entries = checks[model](cfg)
    entries = [{k: _plain(v) for k, v in e.items()} for e in entries]
    report = {"model": model, "pass": all(e["pass"] for e in entries), "entries": entries}
    path = _out_dir(cfg) / f"{cfg['output']['prefix']}oracle_report.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return report, path


# figures

FIGURE_TIME = {"t_max": 20.0, "n_samples": 2000}
FIGURE_INIT = {"shares": 30, "cash": 15, "loi": 5}
FIGURE_LAMBDA = 0.5


def figure_configs(out_dir) -> list[dict]:
    """Market configurations of the three reference figures."""

    def trader(name, ws, wc, W):
        return {"name": name, "omega_s": ws, "omega_c": wc, "Omega": W,
                "lambda_inf": FIGURE_LAMBDA, "init": dict(FIGURE_INIT)}

    panels = [
        ("figure1_", [trader("omega20", 20.0, 20.0, 3.0), trader("omega2", 2.0, 2.0, 3.0)]),
        ("figure2_", [trader("trader1", 1.0, 2.0, 5.0), trader("trader2", 1.0, 2.0, 1.0)]),
        ("figure3_", [trader("trader1", 1.0, 2.0, 10.0), trader("trader2", 1.0, 2.0, 1.0)]),
    ]
    return [
        validate_config({"schema": 1, "model": "model1", "traders": traders, "time": dict(FIGURE_TIME),
                         "output": {"dir": str(out_dir), "prefix": prefix, "svg": True}})
        for prefix, traders in panels
    ]


def run_figures(out_dir) -> list[Path]:
    written = []
    for cfg in figure_configs(out_dir):
        written.extend(run_simulate(cfg))
    return written

