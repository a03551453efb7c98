"""Command-line surface: solve, simulate, sample and export.

Subcommands: ``solve-link``, ``solve-network``, ``simulate``,
``monte-carlo``, ``sweep``, ``field``.  Every run writes CSV artifacts
plus a ``summary.json`` (status, objective, row/variable counts,
timings) into ``--out-dir``.  Exit codes: 0 success, 2 infeasible,
3 scenario parse/validation error, 4 solver iteration limit,
5 internal error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
import time

import numpy as np

from . import ctm, montecarlo
from .link_models import (
    SmoothingSpec,
    TradeoffSpec,
    build_max_outflow_lp,
    build_tradeoff_lp,
    level_of_service,
    sweep_to_csv,
    sweep_uncertainty,
)
from .lp import LinearProgram, LPSolution
from .moskowitz import density_field
from .conditions import BoundaryFlows, InitialDensityProfile
from .network import build_network_lp
from .scenario import Scenario, ScenarioError, build_network, objective_spec, parse_scenario

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_SCENARIO = 3
EXIT_ITERATION_LIMIT = 4
EXIT_INTERNAL = 5

_STATUS_EXIT = {
    "optimal": EXIT_OK,
    "infeasible": EXIT_INFEASIBLE,
    "iteration_limit": EXIT_ITERATION_LIMIT,
}


def atomic_write(path: str, text: str) -> None:
    """Write via a temp file in the same directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_summary(out_dir: str, payload: dict) -> None:
    atomic_write(os.path.join(out_dir, "summary.json"),
                 json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _solve(lp: LinearProgram, args) -> tuple[LPSolution, dict]:
    if args.lp_export:
        atomic_write(args.lp_export, lp.to_text())
    t0 = time.perf_counter()
    sol = lp.solve()
    info = dict(lp.summary())
    info["solve_seconds"] = round(time.perf_counter() - t0, 4)
    info["status"] = sol.status
    if sol.objective_value is not None:
        info["objective"] = sol.objective_value
    return sol, info


def _load(args) -> Scenario:
    with open(args.scenario, encoding="utf-8") as handle:
        return parse_scenario(handle.read())


def _link_setup(scn: Scenario, args):
    ls = scn.links[0]
    confidence = args.confidence if args.confidence is not None \
        else scn.model_float("confidence", 0.975)
    chance = ls.chance(alpha=1.0 - confidence, sigma=args.sigma)
    disc = ls.disc()
    if args.n_max is not None and args.n_max != disc.n_max:
        from .conditions import Discretization
        disc = Discretization(zeta=0.0, chi=ls.length, k_max=ls.k_max,
                              n_max=args.n_max, T=disc.t_max / args.n_max)
    return ls.fd(), disc, chance, confidence


def cmd_solve_link(args) -> int:
    scn = _load(args)
    fd, disc, chance, confidence = _link_setup(scn, args)
    lam = args.lam if args.lam is not None else (
        float(scn.model["lambda"]) if "lambda" in scn.model else None)
    if scn.kind == "tradeoff" or lam is not None:
        lp = build_tradeoff_lp(fd, chance, disc, TradeoffSpec(lam if lam is not None else 0.5))
    else:
        h = args.h if args.h is not None else scn.model_float("h", 3.0)
        lp = build_max_outflow_lp(fd, chance, disc, SmoothingSpec(h))
    sol, info = _solve(lp, args)
    info["confidence"] = confidence
    outputs = []
    if sol.optimal:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["step", "t_start_s", "q_in_veh_per_s", "q_out_veh_per_s"])
        q_in = sol.series("q_in", disc.n_max)
        q_out = sol.series("q_out", disc.n_max)
        for i in range(disc.n_max):
            writer.writerow([i + 1, i * disc.T, q_in[i], q_out[i]])
        path = os.path.join(args.out_dir, "controls.csv")
        atomic_write(path, buf.getvalue())
        outputs.append(path)
        info["total_outflow_veh"] = float(q_out.sum() * disc.T)
        if lp.name == "tradeoff":
            info["level_of_service"] = level_of_service(sol, disc)
    info["outputs"] = outputs
    _write_summary(args.out_dir, info)
    return _STATUS_EXIT.get(sol.status, EXIT_INTERNAL)


def cmd_solve_network(args) -> int:
    scn = _load(args)
    confidence = args.confidence if args.confidence is not None \
        else scn.model_float("confidence", 0.975)
    net = build_network(scn, alpha=1.0 - confidence, sigma=args.sigma,
                        n_max=args.n_max)
    lp = build_network_lp(net, objective_spec(scn, eta=args.eta))
    sol, info = _solve(lp, args)
    info["confidence"] = confidence
    outputs = []
    if sol.optimal:
        n = net.links[0].disc.n_max
        T = net.links[0].disc.T
        cols = [f"q_in[{l.id}]" for l in net.links] + \
               [f"q_out[{l.id}]" for l in net.links] + \
               [f"q_on[{r}]" for r in net.on_ramps] + \
               [f"q_off[{r}]" for r in net.off_ramps]
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["step", "t_start_s"] + [c + "_veh_per_s" for c in cols])
        for i in range(1, n + 1):
            row = [i, (i - 1) * T]
            for c in cols:
                name, lid = c.split("[")
                row.append(sol.x[f"{name}[{lid[:-1]},{i}]"])
            writer.writerow(row)
        path = os.path.join(args.out_dir, "network_controls.csv")
        atomic_write(path, buf.getvalue())
        outputs.append(path)
    info["outputs"] = outputs
    _write_summary(args.out_dir, info)
    return _STATUS_EXIT.get(sol.status, EXIT_INTERNAL)


def _network_plan(net, sol) -> ctm.ControlPlan:
    n = net.links[0].disc.n_max
    entry = {lid: np.array([sol.x[f"q_in[{lid},{i}]"] for i in range(1, n + 1)])
             for lid in ctm.entry_links(net)}
    ramps = {r: np.array([sol.x[f"q_on[{r},{i}]"] for i in range(1, n + 1)])
             for r in net.on_ramps}
    return ctm.ControlPlan(entry_inflows=entry, ramp_inflows=ramps)


def cmd_simulate(args) -> int:
    scn = _load(args)
    confidence = args.confidence if args.confidence is not None \
        else scn.model_float("confidence", 0.975)
    alpha = 1.0 - confidence
    horizon = scn.links[0].n_max * scn.links[0].T
    realized = {l.id: np.asarray(l.rho_mean) + np.asarray(l.rho_sigma)
                for l in scn.links}
    info: dict = {"confidence": confidence, "plans": {}}
    outputs = []
    for label, robust in (("robust", True), ("non_robust", False)):
        net = build_network(scn, alpha=alpha, sigma=args.sigma, robust=robust)
        sol = build_network_lp(net, objective_spec(scn, eta=args.eta)).solve()
        if not sol.optimal:
            info["plans"][label] = {"status": sol.status}
            _write_summary(args.out_dir, info)
            return _STATUS_EXIT.get(sol.status, EXIT_INTERNAL)
        res = ctm.simulate_network(net, realized, _network_plan(net, sol), horizon)
        plan_info = {
            "status": "optimal",
            "conservation_drift_veh": res.conservation_drift,
            "max_density_veh_per_m": {lid: res.max_density(lid) for lid in res.links},
            "max_density_over_jam": {
                lid: res.max_density(lid) / l.fd.rho_m
                for lid, l in ((l.id, l) for l in net.links)},
        }
        for lid, trace in res.links.items():
            path = os.path.join(args.out_dir, f"density_{label}_{lid}.csv")
            atomic_write(path, trace.to_csv())
            outputs.append(path)
        info["plans"][label] = plan_info
    info["outputs"] = outputs
    _write_summary(args.out_dir, info)
    return EXIT_OK


def cmd_monte_carlo(args) -> int:
    scn = _load(args)
    ls = scn.links[0]
    seed = args.seed if args.seed is not None else int(scn.mc.get("seed", 0))
    n_samples = int(scn.mc.get("n_samples", 1000))
    mc = montecarlo.MonteCarloSpec(n_samples=n_samples, seed=seed, alpha=0.025)
    sigmas = [args.sigma] if args.sigma is not None else [0.0, 0.003, 0.006, 0.009, 0.012]
    confidences = [args.confidence] if args.confidence is not None \
        else [0.9, 0.95, 0.975]
    cells = montecarlo.compare_relaxed_vs_mc(
        ls.fd(), ls.disc(), np.asarray(ls.rho_mean), sigmas, confidences, mc)
    path = os.path.join(args.out_dir, "mc_comparison.csv")
    atomic_write(path, montecarlo.comparison_to_csv(cells))
    errors = [c.pct_error for c in cells if c.pct_error is not None]
    _write_summary(args.out_dir, {
        "status": "optimal", "cells": len(cells), "n_samples": n_samples,
        "seed": seed, "max_pct_error": max(errors) if errors else None,
        "outputs": [path],
    })
    return EXIT_OK


def cmd_sweep(args) -> int:
    scn = _load(args)
    ls = scn.links[0]
    sigmas = [args.sigma] if args.sigma is not None else [0.003, 0.006, 0.009, 0.012]
    confidences = [args.confidence] if args.confidence is not None \
        else [0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.975]
    cells = sweep_uncertainty(ls.fd(), ls.disc(), np.asarray(ls.rho_mean),
                              sigmas, confidences)
    path = os.path.join(args.out_dir, "sweep.csv")
    atomic_write(path, sweep_to_csv(cells))
    _write_summary(args.out_dir, {
        "status": "optimal", "cells": len(cells),
        "infeasible_cells": sum(1 for c in cells if c.status != "optimal"),
        "outputs": [path],
    })
    return EXIT_OK


def cmd_field(args) -> int:
    scn = _load(args)
    fd, disc, chance, confidence = _link_setup(scn, args)
    lp = build_max_outflow_lp(fd, chance, disc)
    sol, info = _solve(lp, args)
    info["confidence"] = confidence
    if not sol.optimal:
        info["outputs"] = []
        _write_summary(args.out_dir, info)
        return _STATUS_EXIT.get(sol.status, EXIT_INTERNAL)
    flows = BoundaryFlows(sol.series("q_in", disc.n_max),
                          sol.series("q_out", disc.n_max))
    profile = InitialDensityProfile(np.asarray(chance.rho_mean))
    field, rho = density_field(fd, profile, flows, disc, nt=101, nx=101)
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["t_s"] + [f"rho_at_x={x:.1f}m_veh_per_m"
                               for x in (field.x[:-1] + field.x[1:]) / 2])
    for i, t in enumerate(field.t):
        writer.writerow([t] + list(rho[i]))
    path = os.path.join(args.out_dir, "field.csv")
    atomic_write(path, buf.getvalue())
    info["outputs"] = [path]
    _write_summary(args.out_dir, info)
    return EXIT_OK


_COMMANDS = {
    "solve-link": cmd_solve_link,
    "solve-network": cmd_solve_network,
    "simulate": cmd_simulate,
    "monte-carlo": cmd_monte_carlo,
    "sweep": cmd_sweep,
    "field": cmd_field,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="laxflow", description="Robust boundary control of LWR traffic.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("scenario", help="scenario (.scn) file")
        p.add_argument("--sigma", type=float, default=None,
                       help="uniform density std dev, veh/m")
        p.add_argument("--confidence", type=float, default=None,
                       help="chance-constraint confidence, e.g. 0.975")
        p.add_argument("--lambda", dest="lam", type=float, default=None,
                       help="throughput weight of the trade-off model")
        p.add_argument("--h", type=float, default=None,
                       help="outflow smoothing weight (> 2)")
        p.add_argument("--eta", type=float, default=None,
                       help="fairness penalty weight of the network model")
        p.add_argument("--n-max", type=int, default=None,
                       help="override the number of time steps")
        p.add_argument("--seed", type=int, default=None, help="RNG seed")
        p.add_argument("--out-dir", default=".", help="artifact directory")
        p.add_argument("--lp-export", default=None,
                       help="dump the LP in text form to this path")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_SCENARIO
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_SCENARIO
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
