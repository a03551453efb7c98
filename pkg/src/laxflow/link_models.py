"""Single-link boundary control programs.

Two models over the robust compatibility rows of one link:

* throughput maximization with outflow smoothing — objective
  h * sum(q_out) - sum |q_out(i) - q_out(i-1)|, linearized through slack
  variables q_d(i); any h > 2 leaves the optimal total outflow intact;
* throughput/congestion trade-off — minimize
  -lambda * sum(q_out) + (1 - lambda) * Q where Q bounds every cumulative
  inflow-minus-outflow surplus; the level of service is -Q*T.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .conditions import Discretization
from .constraints import ChanceSpec, ConstraintRow, Provenance, build_robust_rows
from .fd import FDParams
from .lp import LinearProgram, LPSolution


@dataclass(frozen=True)
class SmoothingSpec:
    """Outflow-smoothing weight; h > 2 keeps total outflow unaffected."""

    h: float = 3.0

    def __post_init__(self):
        if self.h <= 2:
            raise ValueError(f"smoothing weight must be > 2, got {self.h}")


@dataclass(frozen=True)
class TradeoffSpec:
    """Throughput weight lambda in [0, 1]; 1 - lambda weights congestion."""

    lam: float

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must be in [0, 1], got {self.lam}")


def _add_flow_variables(lp: LinearProgram, fd: FDParams, n_max: int) -> None:
    for i in range(1, n_max + 1):
        lp.add_variable(f"q_in[{i}]", lb=0.0, ub=fd.capacity)
    for i in range(1, n_max + 1):
        lp.add_variable(f"q_out[{i}]", lb=0.0, ub=fd.capacity)


def build_max_outflow_lp(
    fd: FDParams,
    chance: ChanceSpec,
    disc: Discretization,
    smoothing: SmoothingSpec = SmoothingSpec(),
) -> LinearProgram:
    """Maximize h*sum(q_out) - sum(q_d) over the robust feasible set."""
    n = disc.n_max
    lp = LinearProgram(name="max_outflow")
    _add_flow_variables(lp, fd, n)
    for i in range(2, n + 1):
        lp.add_variable(f"q_d[{i}]", lb=0.0, control=False)
    lp.add_rows(build_robust_rows(fd, chance, disc))
    for i in range(2, n + 1):
        lp.add_row(ConstraintRow(
            {f"q_d[{i}]": 1.0, f"q_out[{i}]": -1.0, f"q_out[{i-1}]": 1.0},
            0.0, ">=", Provenance("smoothing", n=i, branch="pos")))
        lp.add_row(ConstraintRow(
            {f"q_d[{i}]": 1.0, f"q_out[{i}]": 1.0, f"q_out[{i-1}]": -1.0},
            0.0, ">=", Provenance("smoothing", n=i, branch="neg")))
    obj = {f"q_out[{i}]": smoothing.h for i in range(1, n + 1)}
    obj.update({f"q_d[{i}]": -1.0 for i in range(2, n + 1)})
    lp.set_objective(obj, sense="max")
    return lp


def build_plain_outflow_lp(
    fd: FDParams, chance: ChanceSpec, disc: Discretization
) -> LinearProgram:
    """Maximize sum(q_out) with no smoothing term (reference optimum)."""
    n = disc.n_max
    lp = LinearProgram(name="plain_outflow")
    _add_flow_variables(lp, fd, n)
    lp.add_rows(build_robust_rows(fd, chance, disc))
    lp.set_objective({f"q_out[{i}]": 1.0 for i in range(1, n + 1)}, sense="max")
    return lp


def build_tradeoff_lp(
    fd: FDParams,
    chance: ChanceSpec,
    disc: Discretization,
    tradeoff: TradeoffSpec,
) -> LinearProgram:
    """Minimize -lambda*sum(q_out) + (1-lambda)*Q.

    Q, a decision variable, dominates every cumulative inflow surplus:
    Q >= sum_{j<=i} (q_in(j) - q_out(j)) for all i.  Q*T plus the initial
    count is the peak number of vehicles on the link.
    """
    n = disc.n_max
    lp = LinearProgram(name="tradeoff")
    _add_flow_variables(lp, fd, n)
    lp.add_variable("Q", lb=-np.inf)
    lp.add_rows(build_robust_rows(fd, chance, disc))
    for i in range(1, n + 1):
        coeffs = {"Q": 1.0}
        for j in range(1, i + 1):
            coeffs[f"q_in[{j}]"] = -1.0
            coeffs[f"q_out[{j}]"] = 1.0
        lp.add_row(ConstraintRow(coeffs, 0.0, ">=",
                                 Provenance("queue_bound", n=i)))
    lam = tradeoff.lam
    obj = {f"q_out[{i}]": -lam for i in range(1, n + 1)}
    obj["Q"] = 1.0 - lam
    lp.set_objective(obj, sense="min")
    return lp


def level_of_service(solution: LPSolution, disc: Discretization) -> float:
    """LoS = -Q*T for a solved trade-off model."""
    return -solution["Q"] * disc.T


@dataclass
class SweepCell:
    sigma: float
    confidence: float
    status: str
    avg_inflow: float | None
    total_outflow: float | None
    los: float | None = None


def sweep_uncertainty(
    fd: FDParams,
    disc: Discretization,
    rho_mean: np.ndarray,
    sigmas: list[float],
    confidences: list[float],
    smoothing: SmoothingSpec = SmoothingSpec(),
) -> list[SweepCell]:
    """Solve the max-outflow model on a (sigma, confidence) grid.

    Infeasible cells are recorded, not raised.  Average inflow is the
    plain mean over all steps.
    """
    if not sigmas or not confidences:
        raise ValueError("need nonempty sigma and confidence grids")
    cells = []
    for sigma in sigmas:
        for conf in confidences:
            chance = ChanceSpec(
                rho_mean=np.asarray(rho_mean, dtype=float),
                rho_std=np.full(len(rho_mean), float(sigma)),
                alpha=1.0 - conf,
            )
            sol = build_max_outflow_lp(fd, chance, disc, smoothing).solve()
            if sol.optimal:
                q_in = sol.series("q_in", disc.n_max)
                q_out = sol.series("q_out", disc.n_max)
                cells.append(SweepCell(sigma, conf, "optimal",
                                       float(q_in.mean()),
                                       float(q_out.sum() * disc.T)))
            else:
                cells.append(SweepCell(sigma, conf, sol.status, None, None))
    return cells


def sweep_to_csv(cells: list[SweepCell]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["sigma_veh_per_m", "confidence", "status",
                     "avg_inflow_veh_per_s", "total_outflow_veh", "los"])
    for c in cells:
        writer.writerow([c.sigma, c.confidence, c.status,
                         c.avg_inflow, c.total_outflow, c.los])
    return buf.getvalue()
