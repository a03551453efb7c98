"""Compatibility constraints on boundary flows, deterministic and robust.

Every constraint says that the solution generated by one value condition
stays above another value condition on its domain.  With a triangular
diagram these are sparse linear rows in the boundary flows; uncertain
initial densities enter through normal quantiles (segment-level rows use
the per-segment quantile, aggregate rows the pooled one).

Row emission bookkeeping mirrors the reference tallies: the two
boundary-vs-boundary families allocate one matrix slot per (step, step)
pair, leaving slots with no reachable interaction as empty rows, while
the initial-condition families emit only rows whose time window is
reachable.  Capacity limits on individual flows are variable bounds, not
rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .conditions import Discretization
from .fd import FDParams

# time-window membership slack, seconds
_TEPS = 1e-9


# -- standard normal quantile -------------------------------------------------

# Acklam's rational approximation coefficients
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)


def _phi(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def inverse_normal_cdf(p: float) -> float:
    """Quantile of the standard normal, |Phi(z) - p| <= 1e-9.

    Rational approximation refined by one Newton step on Phi.
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must be in (0, 1), got {p}")
    p_low, p_high = 0.02425, 1 - 0.02425
    if p < p_low:
        q = math.sqrt(-2 * math.log(p))
        z = ((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5])
             / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1))
    elif p <= p_high:
        q = p - 0.5
        r = q * q
        z = ((((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
             / (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1))
    else:
        q = math.sqrt(-2 * math.log(1 - p))
        z = -((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5])
              / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1))
    # one Newton refinement: Phi is smooth and the seed is already ~1e-9
    pdf = math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
    if pdf > 0:
        z -= (_phi(z) - p) / pdf
    return z


# -- chance specification -----------------------------------------------------


@dataclass(frozen=True)
class ChanceSpec:
    """Per-segment normal density model plus confidence level.

    ``upper_offset``/``lower_offset`` default to z*sigma; supplying them
    directly admits non-normal marginals through their quantiles.
    """

    rho_mean: np.ndarray
    rho_std: np.ndarray
    alpha: float = 0.025
    upper_offset: np.ndarray | None = None
    lower_offset: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "rho_mean", np.asarray(self.rho_mean, dtype=float))
        object.__setattr__(self, "rho_std", np.asarray(self.rho_std, dtype=float))
        if not 0.0 < self.alpha <= 0.5:
            raise ValueError(f"alpha must be in (0, 0.5], got {self.alpha}")
        if np.any(self.rho_std < 0):
            raise ValueError("negative standard deviation")
        if self.rho_mean.shape != self.rho_std.shape:
            raise ValueError("rho_mean and rho_std shapes differ")

    @property
    def z(self) -> float:
        return inverse_normal_cdf(1.0 - self.alpha)

    @property
    def k_max(self) -> int:
        return len(self.rho_mean)

    def rho_upper(self, k: int) -> float:
        """Upper density quantile of segment k (1-based)."""
        if self.upper_offset is not None:
            return float(self.rho_mean[k - 1] + self.upper_offset[k - 1])
        return float(self.rho_mean[k - 1] + self.z * self.rho_std[k - 1])

    def rho_lower(self, k: int) -> float:
        if self.lower_offset is not None:
            return float(self.rho_mean[k - 1] - self.lower_offset[k - 1])
        return float(self.rho_mean[k - 1] - self.z * self.rho_std[k - 1])

    def pooled_offset(self) -> float:
        """Quantile offset of the total count: z * sqrt(sum sigma^2)."""
        return self.z * math.sqrt(float(np.sum(self.rho_std**2)))

    def deterministic(self) -> "ChanceSpec":
        return replace(
            self,
            rho_std=np.zeros_like(self.rho_std),
            upper_offset=None,
            lower_offset=None,
        )

    def uniform(self, sigma: float) -> "ChanceSpec":
        return replace(
            self,
            rho_std=np.full_like(self.rho_mean, float(sigma)),
            upper_offset=None,
            lower_offset=None,
        )


# -- constraint rows ----------------------------------------------------------


@dataclass(slots=True)
class Provenance:
    """Identifies the generating family, indices and branch of a row."""

    family: str
    k: int | None = None
    n: int | None = None
    p: int | None = None
    branch: str = ""
    note: str = ""


@dataclass(slots=True)
class ConstraintRow:
    """Sparse linear row: sum(coeffs[v] * v) sense rhs."""

    coeffs: dict[str, float]
    rhs: float
    sense: str  # '<=', '>=' or '=='
    provenance: Provenance

    def __post_init__(self):
        if self.sense not in ("<=", ">=", "=="):
            raise ValueError(f"bad sense {self.sense!r}")

    @property
    def is_empty(self) -> bool:
        return not self.coeffs


def _default_names(prefix: str) -> Callable[[int], str]:
    return lambda i: f"{prefix}[{i}]"


def _membership_step(t: float, T: float, n_max: int) -> int | None:
    """Time step p with t in [(p-1)T, pT]; ties go to the lower p."""
    if t < -_TEPS or t > n_max * T + _TEPS:
        return None
    p = math.ceil(t / T - _TEPS)
    p = max(p, 1)
    return p if p <= n_max else None


def build_robust_initial_rows(
    fd: FDParams,
    chance: ChanceSpec,
    disc: Discretization,
    qin: Callable[[int], str] | None = None,
    qout: Callable[[int], str] | None = None,
) -> list[ConstraintRow]:
    """Rows keeping the initial-condition solutions above both boundaries.

    Covers the upstream-facing, downstream-facing and characteristic-time
    families; the branch per segment follows the sign of the relevant
    density quantile against the critical density.
    """
    qin = qin or _default_names("q_in")
    qout = qout or _default_names("q_out")
    T, X, L = disc.T, disc.X, disc.length
    n_max = disc.n_max
    v, w, rc, rm = fd.v_f, fd.w, fd.rho_c, fd.rho_m
    aw = abs(w)
    mean = chance.rho_mean
    rows: list[ConstraintRow] = []

    for k in range(1, disc.k_max + 1):
        cum_below = float(np.sum(mean[: k - 1])) * X
        cum_above = float(np.sum(mean[k:])) * X
        ru = chance.rho_upper(k)
        rd = chance.rho_lower(k)

        # upstream-facing rows: cumulative inflow through step p is capped
        # by what the initial state of segment k lets through at zeta
        for p in range(1, n_max + 1):
            t = p * T
            coeffs = {qin(i): T for i in range(1, p + 1)}
            if ru <= rc:
                if t >= (k - 1) * X / aw - _TEPS:
                    rhs = -cum_below + rc * (t * v + (k - 1) * X)
                    rows.append(ConstraintRow(coeffs, rhs, "<=",
                                Provenance("init_up", k=k, p=p, branch="free")))
            else:
                if (k - 1) * X / aw - _TEPS <= t <= k * X / aw + _TEPS:
                    rhs = -cum_below + ru * (t * w + (k - 1) * X) - rm * t * w
                    rows.append(ConstraintRow(coeffs, rhs, "<=",
                                Provenance("init_up", k=k, p=p, branch="cong_fan")))
                elif t > k * X / aw + _TEPS:
                    rhs = -cum_below - ru * X + rc * (t * w + k * X) - rm * t * w
                    rows.append(ConstraintRow(coeffs, rhs, "<=",
                                Provenance("init_up", k=k, p=p, branch="cong_tail")))

        # downstream-facing rows at chi
        for p in range(1, n_max + 1):
            t = p * T
            coeffs = {qout(i): T for i in range(1, p + 1)}
            if rd <= rc:
                if (L - k * X) / v - _TEPS <= t <= (L - (k - 1) * X) / v + _TEPS:
                    rhs = cum_above + rd * (t * v + k * X - L)
                    rows.append(ConstraintRow(coeffs, rhs, "<=",
                                Provenance("init_down", k=k, p=p, branch="free_fan")))
                elif t > (L - (k - 1) * X) / v + _TEPS:
                    rhs = cum_above + rd * X + rc * (t * v + (k - 1) * X - L)
                    rows.append(ConstraintRow(coeffs, rhs, "<=",
                                Provenance("init_down", k=k, p=p, branch="free_tail")))
            else:
                if t >= (L - k * X) / v - _TEPS:
                    rhs = cum_above + rc * (t * w + k * X - L) - rm * t * w
                    rows.append(ConstraintRow(coeffs, rhs, "<=",
                                Provenance("init_down", k=k, p=p, branch="cong")))

        # characteristic-time rows at fractional times
        tstar = (k - 1) * X / aw
        p = _membership_step(tstar, T, n_max)
        if p is not None and tstar > _TEPS:
            coeffs = {qin(i): T for i in range(1, p)}
            coeffs[qin(p)] = tstar - (p - 1) * T
            if ru <= rc:
                rhs = -cum_below + rc * (tstar * v + (k - 1) * X)
                branch = "free"
            else:
                rhs = -cum_below + rm * (k - 1) * X
                branch = "cong"
            rows.append(ConstraintRow(coeffs, rhs, "<=",
                        Provenance("init_char_up", k=k, p=p, branch=branch)))
        tstar = (L - k * X) / v
        p = _membership_step(tstar, T, n_max)
        if p is not None and tstar > _TEPS:
            coeffs = {qout(i): T for i in range(1, p)}
            coeffs[qout(p)] = tstar - (p - 1) * T
            # both branch values coincide at the characteristic time:
            # the rho_c*(t*w + kX - chi) and -rho_m*t*w terms cancel exactly
            # via rho_c*v_f == (rho_m - rho_c)|w|, leaving the constant below
            branch = "free" if ru <= rc else "cong"
            rows.append(ConstraintRow(coeffs, cum_above, "<=",
                        Provenance("init_char_down", k=k, p=p, branch=branch)))
    return rows


def build_robust_upstream_rows(
    fd: FDParams,
    chance: ChanceSpec,
    disc: Discretization,
    qin: Callable[[int], str] | None = None,
    qout: Callable[[int], str] | None = None,
) -> list[ConstraintRow]:
    """Rows keeping every upstream-step solution above the downstream data.

    The aggregate initial count enters at its pooled lower quantile; this
    family carries no relaxation.  One slot per (n, p) pair plus the
    characteristic-time row of each step.
    """
    qin = qin or _default_names("q_in")
    qout = qout or _default_names("q_out")
    T, L = disc.T, disc.length
    n_max = disc.n_max
    v, rc = fd.v_f, fd.rho_c
    sh = L / v
    agg_lo = (float(np.sum(chance.rho_mean)) - chance.pooled_offset()) * disc.X
    # inflow/outflow names are disjoint by contract, so rows assemble by
    # plain assignment over these precomputed lists
    qin_n = [qin(i) for i in range(1, n_max + 1)]
    qout_n = [qout(i) for i in range(1, n_max + 1)]
    rows: list[ConstraintRow] = []

    neg = [-T] * n_max
    pos = [T] * n_max
    for n in range(1, n_max + 1):
        # running row body: all inflow terms of step <= n plus the outflow
        # terms accumulated so far; each emitted row copies its snapshot
        grow = dict(zip(qin_n, neg[:n]))
        for p in range(1, n_max + 1):
            t = p * T
            grow[qout_n[p - 1]] = T
            if (n - 1) * T + sh - _TEPS <= t <= n * T + sh + _TEPS:
                coeffs = grow.copy()
                coeffs[qin_n[n - 1]] = -(t - sh - (n - 1) * T)
                rows.append(ConstraintRow(coeffs, agg_lo, "<=",
                            Provenance("up_down", n=n, p=p, branch="transport")))
            elif t > n * T + sh + _TEPS:
                rhs = agg_lo + rc * v * (t - sh - n * T)
                rows.append(ConstraintRow(grow.copy(), rhs, "<=",
                            Provenance("up_down", n=n, p=p, branch="capacity")))
            else:
                # the step-n solution cannot reach chi by pT: slot kept empty
                rows.append(ConstraintRow({}, 0.0, "<=",
                            Provenance("up_down", n=n, p=p, branch="vacuous")))
        tstar = n * T + sh
        p = _membership_step(tstar, T, n_max)
        if p is not None:
            coeffs = dict(zip(qin_n, neg[:n]))
            coeffs.update(zip(qout_n, pos[: p - 1]))
            coeffs[qout_n[p - 1]] = tstar - (p - 1) * T
            rows.append(ConstraintRow(coeffs, agg_lo, "<=",
                        Provenance("up_down_char", n=n, p=p, branch="seam")))
    return rows


def build_robust_downstream_rows(
    fd: FDParams,
    chance: ChanceSpec,
    disc: Discretization,
    qin: Callable[[int], str] | None = None,
    qout: Callable[[int], str] | None = None,
) -> list[ConstraintRow]:
    """Rows keeping every downstream-step solution above the upstream data.

    The aggregate count enters at its pooled upper quantile.  One slot
    per (n, p) pair; back-propagation at speed w makes many slots
    unreachable on short horizons.
    """
    qin = qin or _default_names("q_in")
    qout = qout or _default_names("q_out")
    T, L = disc.T, disc.length
    n_max = disc.n_max
    v, w, rc, rm = fd.v_f, fd.w, fd.rho_c, fd.rho_m
    sh = L / abs(w)
    agg_hi = (float(np.sum(chance.rho_mean)) + chance.pooled_offset()) * disc.X
    qin_n = [qin(i) for i in range(1, n_max + 1)]
    qout_n = [qout(i) for i in range(1, n_max + 1)]
    rows: list[ConstraintRow] = []

    pos = [T] * n_max
    for n in range(1, n_max + 1):
        grow = dict(zip(qout_n, pos[:n]))
        for p in range(1, n_max + 1):
            t = p * T
            grow[qin_n[p - 1]] = -T
            if (n - 1) * T + sh - _TEPS <= t <= n * T + sh + _TEPS:
                coeffs = grow.copy()
                coeffs[qout_n[n - 1]] = t - sh - (n - 1) * T
                rhs = agg_hi - rm * L
                rows.append(ConstraintRow(coeffs, rhs, ">=",
                            Provenance("down_up", n=n, p=p, branch="transport")))
            elif t > n * T + sh + _TEPS:
                rhs = agg_hi - rc * v * (t - n * T + L / v)
                rows.append(ConstraintRow(grow.copy(), rhs, ">=",
                            Provenance("down_up", n=n, p=p, branch="capacity")))
            else:
                rows.append(ConstraintRow({}, 0.0, "<=",
                            Provenance("down_up", n=n, p=p, branch="vacuous")))
    return rows


def build_robust_rows(
    fd: FDParams,
    chance: ChanceSpec,
    disc: Discretization,
    qin: Callable[[int], str] | None = None,
    qout: Callable[[int], str] | None = None,
) -> list[ConstraintRow]:
    """All robust compatibility rows for one link, in deterministic order."""
    return (
        build_robust_initial_rows(fd, chance, disc, qin, qout)
        + build_robust_upstream_rows(fd, chance, disc, qin, qout)
        + build_robust_downstream_rows(fd, chance, disc, qin, qout)
    )


def build_deterministic_rows(
    fd: FDParams,
    chance: ChanceSpec,
    disc: Discretization,
    qin: Callable[[int], str] | None = None,
    qout: Callable[[int], str] | None = None,
) -> list[ConstraintRow]:
    """Compatibility rows with densities fixed at their means."""
    return build_robust_rows(fd, chance.deterministic(), disc, qin, qout)
