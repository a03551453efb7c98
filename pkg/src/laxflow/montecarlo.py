"""Sample-based chance-constraint rows and accuracy comparison.

The closed-form rows treat only one density segment as random per row;
the sample-based construction keeps the joint distribution: draw N
density vectors, evaluate the exact piecewise value-condition solution
per sample (minimum over all branches), sort, and keep the ceil(N*alpha)
ascending order statistic as the constraint level.  Rows facing the
downstream boundary sort the solution shifted by the sampled initial
vehicle count, which removes the count's randomness from the flow side.

Only the initial-condition families need sampling: the remaining
cumulative-count rows depend on the densities through their plain sum,
whose normal quantile is already exact.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .conditions import Discretization
from .constraints import (
    ChanceSpec,
    ConstraintRow,
    Provenance,
    build_robust_downstream_rows,
    build_robust_upstream_rows,
)
from .fd import FDParams
from .link_models import SmoothingSpec, build_max_outflow_lp
from .lp import LinearProgram
from .moskowitz import initial_component


@dataclass(frozen=True)
class MonteCarloSpec:
    """Sample count, seed and violation probability for the sampled rows."""

    n_samples: int = 1000
    seed: int = 0
    alpha: float = 0.025

    def __post_init__(self):
        if self.n_samples * self.alpha < 1:
            raise ValueError(
                f"need n_samples*alpha >= 1, got {self.n_samples * self.alpha}"
            )

    @property
    def critical_index(self) -> int:
        """1-based ascending order statistic defining the constraint level."""
        return math.ceil(self.n_samples * self.alpha)


@dataclass
class SampleSet:
    """Shared density draws (common random numbers across all rows)."""

    densities: np.ndarray  # (n_samples, k_max)
    truncation_rate: float  # fraction of draws clipped to [0, rho_m]


def draw_samples(
    fd: FDParams, chance: ChanceSpec, mc: MonteCarloSpec, seed: int | None = None
) -> SampleSet:
    """Draw joint normal density vectors, truncated to the physical range."""
    rng = np.random.default_rng(mc.seed if seed is None else seed)
    raw = rng.normal(
        chance.rho_mean, chance.rho_std, size=(mc.n_samples, len(chance.rho_mean))
    )
    clipped = np.clip(raw, 0.0, fd.rho_m)
    rate = float(np.mean(raw != clipped))
    return SampleSet(densities=clipped, truncation_rate=rate)


def _quantile(values: np.ndarray, mc: MonteCarloSpec) -> float:
    """ceil(N*alpha)-th smallest value; ties resolved by position."""
    return float(np.sort(values)[mc.critical_index - 1])


def mc_rows_vs_upstream(
    fd: FDParams,
    chance: ChanceSpec,
    disc: Discretization,
    mc: MonteCarloSpec,
    samples: SampleSet | None = None,
) -> list[ConstraintRow]:
    """Sampled counterparts of the initial-vs-upstream rows.

    One row per (segment k, step p): cumulative inflow through step p must
    stay below the sampled order statistic of segment k's solution at the
    upstream boundary.  Points where the solution is +inf for the critical
    sample are unconstrained and skipped.
    """
    if samples is None:
        samples = draw_samples(fd, chance, mc)
    rows = []
    for k in range(1, disc.k_max + 1):
        for p in range(1, disc.n_max + 1):
            vals = initial_component(
                fd, samples.densities, disc.X, k, np.float64(p * disc.T), np.float64(0.0)
            )
            rhs = _quantile(vals, mc)
            if math.isinf(rhs):
                continue
            coeffs = {f"q_in[{j}]": disc.T for j in range(1, p + 1)}
            rows.append(
                ConstraintRow(coeffs, rhs, "<=", Provenance("mc_init_up", k=k, p=p))
            )
    return rows


def mc_rows_vs_downstream(
    fd: FDParams,
    chance: ChanceSpec,
    disc: Discretization,
    mc: MonteCarloSpec,
    samples: SampleSet | None = None,
) -> list[ConstraintRow]:
    """Sampled counterparts of the initial-vs-downstream rows.

    The downstream condition carries the (random) initial vehicle count,
    so the sorted quantity is the segment solution plus the sampled count;
    the flow side then contains only the cumulative outflow.
    """
    if samples is None:
        samples = draw_samples(fd, chance, mc)
    counts = samples.densities.sum(axis=-1) * disc.X
    rows = []
    for k in range(1, disc.k_max + 1):
        for p in range(1, disc.n_max + 1):
            vals = initial_component(
                fd,
                samples.densities,
                disc.X,
                k,
                np.float64(p * disc.T),
                np.float64(disc.length),
            )
            rhs = _quantile(vals + counts, mc)
            if math.isinf(rhs):
                continue
            coeffs = {f"q_out[{j}]": disc.T for j in range(1, p + 1)}
            rows.append(
                ConstraintRow(coeffs, rhs, "<=", Provenance("mc_init_down", k=k, p=p))
            )
    return rows


def build_mc_outflow_lp(
    fd: FDParams,
    chance: ChanceSpec,
    disc: Discretization,
    mc: MonteCarloSpec,
    smoothing: SmoothingSpec = SmoothingSpec(),
    samples: SampleSet | None = None,
) -> LinearProgram:
    """Smoothed max-outflow model with sampled initial-condition rows.

    Boundary-vs-boundary rows keep their closed form (their density
    dependence is a plain sum with an exact normal quantile).
    """
    if samples is None:
        samples = draw_samples(fd, chance, mc)
    n = disc.n_max
    lp = LinearProgram(name="mc_outflow")
    for i in range(1, n + 1):
        lp.add_variable(f"q_in[{i}]", lb=0.0, ub=fd.capacity)
    for i in range(1, n + 1):
        lp.add_variable(f"q_out[{i}]", lb=0.0, ub=fd.capacity)
    for i in range(2, n + 1):
        lp.add_variable(f"q_d[{i}]", lb=0.0, control=False)
    lp.add_rows(mc_rows_vs_upstream(fd, chance, disc, mc, samples))
    lp.add_rows(mc_rows_vs_downstream(fd, chance, disc, mc, samples))
    lp.add_rows(build_robust_upstream_rows(fd, chance, disc))
    lp.add_rows(build_robust_downstream_rows(fd, chance, disc))
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


def impacted_steps(fd: FDParams, disc: Discretization) -> int:
    """Steps covered by the initial densities' influence: ceil((L/v_f)/T)."""
    return math.ceil(disc.length / fd.v_f / disc.T)


@dataclass
class ComparisonCell:
    sigma: float
    confidence: float
    relaxed_outflow: float | None  # veh/s averaged over the impacted window
    mc_outflow: float | None
    pct_error: float | None
    truncation_rate: float


def compare_relaxed_vs_mc(
    fd: FDParams,
    disc: Discretization,
    rho_mean: np.ndarray,
    sigmas: list[float],
    confidences: list[float],
    mc: MonteCarloSpec,
) -> list[ComparisonCell]:
    """Closed-form vs sampled optima over a (sigma, confidence) grid.

    Outflows are averaged over the impacted window, the time the initial
    densities need to clear the link.  Each grid cell draws its own
    sample set from a splittable child seed, so cells are reproducible
    independently of evaluation order.
    """
    rho_mean = np.asarray(rho_mean, dtype=float)
    window = impacted_steps(fd, disc)
    roots = np.random.SeedSequence(mc.seed).spawn(len(sigmas) * len(confidences))
    cells = []
    for i, sigma in enumerate(sigmas):
        for j, conf in enumerate(confidences):
            chance = ChanceSpec(
                rho_mean=rho_mean,
                rho_std=np.full(rho_mean.size, float(sigma)),
                alpha=1.0 - conf,
            )
            cell_mc = MonteCarloSpec(mc.n_samples, mc.seed, alpha=1.0 - conf)
            seed = roots[i * len(confidences) + j]
            samples = draw_samples(fd, chance, cell_mc, seed=seed)
            relaxed = build_max_outflow_lp(fd, chance, disc).solve()
            sampled = build_mc_outflow_lp(
                fd, chance, disc, cell_mc, samples=samples
            ).solve()
            if relaxed.optimal and sampled.optimal:
                avg_r = float(relaxed.series("q_out", disc.n_max)[:window].mean())
                avg_m = float(sampled.series("q_out", disc.n_max)[:window].mean())
                err = 100.0 * (avg_r - avg_m) / avg_m if avg_m else None
                cells.append(ComparisonCell(
                    sigma, conf, avg_r, avg_m, err, samples.truncation_rate))
            else:
                cells.append(ComparisonCell(
                    sigma, conf, None, None, None, samples.truncation_rate))
    return cells


def comparison_to_csv(cells: list[ComparisonCell]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["sigma", "confidence", "relaxed_opt", "mc_opt",
                     "pct_error", "truncation_rate"])
    for c in cells:
        writer.writerow([c.sigma, c.confidence, c.relaxed_outflow,
                         c.mc_outflow, c.pct_error, c.truncation_rate])
    return buf.getvalue()


def empirical_coverage(
    fd: FDParams,
    chance: ChanceSpec,
    disc: Discretization,
    q_in: np.ndarray,
    q_out: np.ndarray,
    n_draws: int = 10_000,
    seed: int = 1,
) -> float:
    """Lowest per-row satisfaction frequency of a control plan.

    Draws fresh densities and checks every initial-condition inequality
    (cumulative boundary counts below the per-sample solution values).
    """
    rng = np.random.default_rng(seed)
    draws = np.clip(
        rng.normal(chance.rho_mean, chance.rho_std, size=(n_draws, len(chance.rho_mean))),
        0.0, fd.rho_m,
    )
    counts = draws.sum(axis=-1) * disc.X
    cum_in = np.concatenate([[0.0], np.cumsum(q_in) * disc.T])
    cum_out = np.concatenate([[0.0], np.cumsum(q_out) * disc.T])
    worst = 1.0
    for k in range(1, disc.k_max + 1):
        for p in range(1, disc.n_max + 1):
            up = initial_component(
                fd, draws, disc.X, k, np.float64(p * disc.T), np.float64(0.0)
            )
            freq = float(np.mean(cum_in[p] <= up + 1e-9))
            worst = min(worst, freq)
            down = initial_component(
                fd, draws, disc.X, k, np.float64(p * disc.T), np.float64(disc.length)
            )
            freq = float(np.mean(cum_out[p] <= down + counts + 1e-9))
            worst = min(worst, freq)
    return worst
