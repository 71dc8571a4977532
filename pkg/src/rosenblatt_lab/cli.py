"""Command-line surface tying the modules into reproducible experiments.

Every run is a pure function of its flags plus the optional flat config
file: payloads carry no timestamps, floats are emitted via ``repr``, CSV
uses ``.`` decimals and ``\\n`` endings unconditionally.  Exit codes:
0 success, 1 numerical-tolerance failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import cumulants, estimators, plots, regularization, rosenblatt, skorohod, spde, wiener
from .config import load_settings
from .kernels import TimeGrid, constants

__all__ = ["main", "run_cli"]

_QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)


def _write_text(out, text: str) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


def _payload(config: dict, results: dict, tolerances: dict,
             passed: bool | None) -> str:
    body = {"config": config, "results": results, "tolerances": tolerances}
    if passed is not None:
        body["pass"] = bool(passed)
    return json.dumps(body, indent=2, sort_keys=True) + "\n"


def _paths_csv(t: np.ndarray, matrix: np.ndarray) -> str:
    cols = matrix.shape[1]
    lines = ["t," + ",".join(f"path{j}" for j in range(cols))]
    for k, tv in enumerate(t):
        lines.append(repr(float(tv)) + ","
                     + ",".join(repr(float(v)) for v in matrix[k]))
    return "\n".join(lines) + "\n"


def _summary_json(t: np.ndarray, matrix: np.ndarray) -> dict:
    out = []
    for k, tv in enumerate(t):
        row = matrix[k]
        entry = {"t": float(tv), "mean": float(row.mean()),
                 "var": float(row.var(ddof=1)) if row.size > 1 else 0.0}
        for q in _QUANTILES:
            entry[f"q{int(q * 100):02d}"] = float(np.quantile(row, q))
        out.append(entry)
    return {"per_time": out}


def _plot_target(ns) -> str | None:
    if not getattr(ns, "plot", False):
        return None
    if ns.out is None:
        raise SystemExit(2)
    return str(ns.out) + ".png"


# ----------------------------------------------------------------------
# subcommands


def _cmd_simulate(ns, settings) -> int:
    grid = TimeGrid(ns.horizon, ns.grid)
    params = constants(ns.hurst)
    if ns.method == "kernel":
        matrix = rosenblatt.kernel_ensemble(params, grid, ns.seed, ns.samples)
    elif ns.method == "eps":
        matrix = rosenblatt.kernel_ensemble(params, grid, ns.seed, ns.samples,
                                            mode="wick", shift=ns.eps)
    elif ns.method == "fbm":
        matrix = rosenblatt.fbm_ensemble(params, grid, ns.seed, ns.samples)
    else:
        cfg = rosenblatt.NcltConfig(h=ns.hurst, inner_n=ns.inner_n)
        matrix = rosenblatt.nclt_partial_sum_paths(cfg, grid, ns.seed, ns.samples)
    if ns.format == "csv":
        _write_text(ns.out, _paths_csv(grid.nodes, matrix))
    else:
        cfg_dict = {"command": "simulate", "hurst": ns.hurst, "grid": ns.grid,
                    "samples": ns.samples, "seed": ns.seed, "method": ns.method}
        _write_text(ns.out, _payload(cfg_dict, _summary_json(grid.nodes, matrix),
                                     {}, None))
    target = _plot_target(ns)
    if target:
        plots.paths_figure(grid.nodes, matrix.T, target,
                           title=f"{ns.method} paths, H={ns.hurst}")
    return 0


def _cmd_cumulants(ns, settings) -> int:
    params = constants(ns.hurst)
    grid = TimeGrid(ns.horizon, ns.grid)
    k = grid.index_of(ns.t)
    theo, ierr = cumulants.cumulant_theoretical(params, ns.order, ns.t,
                                                with_error=True)
    samples = rosenblatt.values_at_ensemble(params, grid, [k], ns.seed,
                                            ns.samples)[0]
    emp, se = cumulants.cumulant_empirical(samples, ns.order)
    gap = abs(emp - theo)
    passed = gap <= 3.0 * se
    cfg = {"command": "cumulants", "order": ns.order, "t": ns.t,
           "hurst": ns.hurst, "grid": ns.grid, "samples": ns.samples,
           "seed": ns.seed}
    results = {"theoretical": theo, "empirical": emp, "se": se,
               "integration_error": ierr, "gap": gap}
    _write_text(ns.out, _payload(cfg, results, {"gap_max_se": 3.0}, passed))
    target = _plot_target(ns)
    if target:
        plots.histogram_figure(samples, target,
                               title=f"Z({ns.t}) marginal, H={ns.hurst}")
    return 0 if passed else 1


def _cmd_verify_ito_x2(ns, settings) -> int:
    params = constants(ns.hurst)
    budget = float(settings.get("budget.order4"))
    sizes = [max(8, ns.grid // 2), ns.grid]
    reports = {}
    for n in sizes:
        rep = skorohod.ito_x2_residual(params, TimeGrid(ns.horizon, n),
                                       ns.samples, ns.seed, budget=budget)
        reports[n] = rep
    ablated = skorohod.ito_x2_residual(params, TimeGrid(ns.horizon, ns.grid),
                                       ns.samples, ns.seed,
                                       include_correction=False, budget=budget)
    decreasing = reports[sizes[1]].residual_l2 < reports[sizes[0]].residual_l2
    helps = reports[ns.grid].residual_l2 < ablated.residual_l2
    passed = decreasing and helps
    cfg = {"command": "verify ito-x2", "hurst": ns.hurst, "grid": ns.grid,
           "samples": ns.samples, "seed": ns.seed}
    results = {str(n): json.loads(rep.to_json()) for n, rep in reports.items()}
    results["ablated"] = json.loads(ablated.to_json())
    _write_text(ns.out, _payload(cfg, results,
                                 {"requires": "residual decrease and correction gain"},
                                 passed))
    target = _plot_target(ns)
    if target:
        plots.series_figure(sizes, [[reports[n].residual_l2 for n in sizes]],
                            target, labels=["corrected"], logy=True,
                            xlabel="grid cells", ylabel="residual_l2",
                            title="square-identity residual")
    return 0 if passed else 1


def _cmd_verify_relation(ns, settings) -> int:
    params = constants(ns.hurst)
    sizes = [max(16, ns.grid // 4), ns.grid]
    vals = {}
    for n in sizes:
        grid = TimeGrid(ns.horizon, n)
        vals[n] = skorohod.relation_residual(params, grid, ns.eps_cells / n,
                                             ns.seed, samples=ns.samples)
    ablated = skorohod.relation_residual(params, TimeGrid(ns.horizon, ns.grid),
                                         ns.eps_cells / ns.grid, ns.seed,
                                         samples=ns.samples,
                                         include_traces=False)
    passed = vals[sizes[1]] < vals[sizes[0]] and vals[ns.grid] < ablated
    cfg = {"command": "verify relation", "hurst": ns.hurst, "grid": ns.grid,
           "samples": ns.samples, "seed": ns.seed, "eps_cells": ns.eps_cells}
    results = {"residuals": {str(n): vals[n] for n in sizes},
               "trace_ablated": ablated}
    _write_text(ns.out, _payload(cfg, results,
                                 {"requires": "decrease and trace gain"}, passed))
    return 0 if passed else 1


def _cmd_verify_pathwise(ns, settings) -> int:
    params = constants(ns.hurst)
    sizes = [ns.grid // 4, ns.grid // 2, ns.grid]
    rows = []

    def residual_at(n):
        e = ns.eps_cells
        ext = TimeGrid(ns.horizon * (n + e) / n, n + e)
        paths = rosenblatt.kernel_ensemble(params, ext, ns.seed, ns.paths)
        eps = e * ext.delta
        rel = []
        for j in range(ns.paths):
            res = regularization.pathwise_ito_residual(
                ns.function, paths[:, j], eps, t=ns.horizon, grid=ext)
            k = round(ns.horizon / ext.delta)
            scale = max(paths[k, j] ** 2, 1e-12)
            rel.append(res / scale)
        return float(np.median(rel))

    threads = int(ns.threads or settings.get("threads") or 0)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            meds = list(pool.map(residual_at, sizes))
    else:
        meds = [residual_at(n) for n in sizes]
    for n, med in zip(sizes, meds):
        rows.append({"N": n, "eps": ns.eps_cells / n, "residual": med})
    decreasing = all(rows[i + 1]["residual"] < rows[i]["residual"]
                     for i in range(len(rows) - 1))
    passed = decreasing and rows[-1]["residual"] < ns.tol
    cfg = {"command": "verify pathwise-ito", "hurst": ns.hurst,
           "grid": ns.grid, "paths": ns.paths, "seed": ns.seed,
           "function": ns.function, "eps_cells": ns.eps_cells}
    _write_text(ns.out, _payload(cfg, {"table": rows},
                                 {"relative_max": ns.tol}, passed))
    target = _plot_target(ns)
    if target:
        plots.series_figure([r["N"] for r in rows],
                            [[r["residual"] for r in rows]], target,
                            labels=["median relative residual"], logy=True,
                            xlabel="grid cells", ylabel="residual",
                            title="pathwise change-of-variables residual")
    return 0 if passed else 1


def _cmd_ou(ns, settings) -> int:
    params = constants(ns.hurst)
    grid = TimeGrid(ns.horizon, ns.grid)
    lam = ns.lam if ns.lam is not None else float(settings.get("ou.lambda"))
    sigma = ns.sigma if ns.sigma is not None else float(settings.get("ou.sigma"))
    burn = float(settings.get("ou.burn_in_factor"))
    path = wiener.ou_path(params, lam, sigma, ns.xi, grid, ns.seed,
                          stationary=ns.stationary, burn_in_factor=burn)
    lines = ["t,X"] + [f"{float(t)!r},{float(x)!r}"
             for t, x in zip(grid.nodes, path.values)]
    _write_text(ns.out, "\n".join(lines) + "\n")
    target = _plot_target(ns)
    if target:
        plots.paths_figure(grid.nodes, path.values[None, :], target,
                           title=f"Langevin path, lam={lam}, sigma={sigma}")
    return 0


def _cmd_spde(ns, settings) -> int:
    cfg = spde.circle_laplacian_config(ns.hurst, ns.modes, ns.q_power)
    grid = TimeGrid(ns.horizon, ns.grid)
    verdict = spde.trace_condition(ns.hurst, ("power", 1.0, ns.q_power))
    theo = spde.energy_theoretical(cfg, ns.horizon)
    results = {"trace_condition": json.loads(verdict.to_json()),
               "energy_theoretical": theo}
    passed: bool | None = None
    if ns.samples > 0:
        emp, se = spde.field_energy_mc(cfg, grid, ns.seed, ns.samples)
        results["energy_empirical"] = emp
        results["energy_se"] = se
        passed = abs(emp - theo) <= 3.0 * se
    if ns.field_csv:
        field = spde.mild_solution_heat(cfg, grid, ns.seed)
        field.to_csv(ns.field_csv)
        results["field_csv"] = ns.field_csv
    config = {"command": "spde", "hurst": ns.hurst, "modes": ns.modes,
              "q_power": ns.q_power, "grid": ns.grid, "seed": ns.seed,
              "samples": ns.samples}
    _write_text(ns.out, _payload(config, results, {"energy_max_se": 3.0}, passed))
    return 0 if passed in (True, None) else 1


def _cmd_estimate(ns, settings) -> int:
    results = {}
    if ns.input:
        data = np.genfromtxt(ns.input, delimiter=",", names=True)
        values = np.asarray(data["value"], dtype=float)
        results["hurst"] = estimators.hurst_estimate(values)
        if values.size >= 1025:
            results["holder"] = estimators.holder_estimate(values)
        cfg = {"command": "estimate", "input": ns.input}
    else:
        params = constants(ns.hurst)
        grid = TimeGrid(ns.horizon, ns.grid)
        matrix = rosenblatt.kernel_ensemble(params, grid, ns.seed, ns.samples)
        hh = [estimators.hurst_estimate(matrix[:, j]) for j in range(ns.samples)]
        results["hurst_mean"] = float(np.mean(hh))
        results["hurst_sd"] = float(np.std(hh, ddof=1))
        if grid.n >= 1024:
            dd = [estimators.holder_estimate(matrix[:, j])
                  for j in range(ns.samples)]
            results["holder_mean"] = float(np.mean(dd))
        cfg = {"command": "estimate", "hurst": ns.hurst, "grid": ns.grid,
               "samples": ns.samples, "seed": ns.seed}
    _write_text(ns.out, _payload(cfg, results, {}, None))
    return 0


# ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rosenblatt",
        description="Rosenblatt-process simulation and verification toolkit")
    parser.add_argument("--config", default=None, help="flat key=value file")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, hurst=True):
        p.add_argument("--out", default=None)
        p.add_argument("--format", choices=("csv", "json"), default="json")
        p.add_argument("--plot", action="store_true")
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--seed", type=int, default=42)
        p.add_argument("--horizon", type=float, default=1.0)
        if hurst:
            p.add_argument("--hurst", type=float, default=0.7)

    p = sub.add_parser("simulate", help="draw sample paths")
    common(p)
    p.add_argument("--grid", type=int, default=256)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--method", choices=("kernel", "nclt", "fbm", "eps"),
                   default="kernel")
    p.add_argument("--eps", type=float, default=0.05)
    p.add_argument("--inner-n", type=int, default=2 ** 14, dest="inner_n")
    p.set_defaults(func=_cmd_simulate, format="csv")

    p = sub.add_parser("cumulants", help="theoretical vs empirical cumulants")
    common(p)
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--grid", type=int, default=256)
    p.add_argument("--samples", type=int, default=20000)
    p.set_defaults(func=_cmd_cumulants)

    p = sub.add_parser("verify", help="numerical identity checks")
    vsub = p.add_subparsers(dest="check", required=True)

    q = vsub.add_parser("ito-x2")
    common(q)
    q.add_argument("--grid", type=int, default=64)
    q.add_argument("--samples", type=int, default=500)
    q.set_defaults(func=_cmd_verify_ito_x2)

    q = vsub.add_parser("relation")
    common(q)
    q.add_argument("--grid", type=int, default=128)
    q.add_argument("--samples", type=int, default=64)
    q.add_argument("--eps-cells", type=int, default=4, dest="eps_cells")
    q.set_defaults(func=_cmd_verify_relation)

    q = vsub.add_parser("pathwise-ito")
    common(q)
    q.add_argument("--grid", type=int, default=2048)
    q.add_argument("--paths", type=int, default=16)
    q.add_argument("--eps-cells", type=int, default=4, dest="eps_cells")
    q.add_argument("--function", choices=tuple(regularization.DERIVATIVES),
                   default="square")
    q.add_argument("--tol", type=float, default=5e-2)
    q.set_defaults(func=_cmd_verify_pathwise)

    p = sub.add_parser("ou", help="Langevin path driven by Z")
    common(p)
    p.add_argument("--grid", type=int, default=512)
    p.add_argument("--lambda", type=float, default=None, dest="lam")
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--xi", type=float, default=0.0)
    p.add_argument("--stationary", action="store_true")
    p.set_defaults(func=_cmd_ou)

    p = sub.add_parser("spde", help="spectral heat equation with Z noise")
    common(p)
    p.add_argument("--modes", type=int, default=8)
    p.add_argument("--q-power", type=float, default=0.0, dest="q_power")
    p.add_argument("--grid", type=int, default=128)
    p.add_argument("--samples", type=int, default=0)
    p.add_argument("--field-csv", default=None, dest="field_csv")
    p.set_defaults(func=_cmd_spde)

    p = sub.add_parser("estimate", help="Hurst / Hoelder estimators")
    common(p)
    p.add_argument("--grid", type=int, default=512)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--input", default=None)
    p.set_defaults(func=_cmd_estimate)

    return parser


def run_cli(argv) -> int:
    """Parse flags, load config, execute; 0 ok, 1 tolerance failure, 2 usage."""
    parser = build_parser()
    try:
        ns = parser.parse_args(list(argv))
    except SystemExit as exc:
        code = exc.code
        return 2 if code not in (0,) else 0
    try:
        settings = load_settings(ns.config)
    except (OSError, ValueError) as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return 2
    try:
        return int(ns.func(ns, settings))
    except SystemExit as exc:
        return 2 if exc.code not in (0,) else 0


def main() -> None:
    sys.exit(run_cli(sys.argv[1:]))
