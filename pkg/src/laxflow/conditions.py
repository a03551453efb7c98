"""Discretized piecewise-affine initial and boundary value conditions.

The space-time domain [zeta, chi] x [0, t_max] is split into k_max even
spatial segments of length X and n_max even time steps of length T.  A
value condition assigns a cumulative vehicle index on its domain and +inf
elsewhere; +inf is ``math.inf``, never a large finite float, so that
min-reductions stay exact.

Positions are handled relative to zeta internally; the public functions
take absolute positions.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .fd import FDParams

INF = math.inf

# slack for closed-interval membership of float coordinates
_EPS = 1e-9


@dataclass(frozen=True)
class Discretization:
    """Uniform space-time grid for one link."""

    zeta: float   # upstream boundary position, m
    chi: float    # downstream boundary position, m
    k_max: int    # number of spatial segments
    n_max: int    # number of time steps
    T: float      # time step length, s

    def __post_init__(self):
        if self.k_max < 1 or self.n_max < 1:
            raise ValueError(f"k_max and n_max must be >= 1: {self}")
        if self.chi <= self.zeta or self.T <= 0:
            raise ValueError(f"need chi > zeta and T > 0: {self}")

    @property
    def length(self) -> float:
        return self.chi - self.zeta

    @property
    def X(self) -> float:
        """Spatial segment length; chi - zeta == k_max * X by construction."""
        return (self.chi - self.zeta) / self.k_max

    @property
    def t_max(self) -> float:
        return self.n_max * self.T


@dataclass(frozen=True)
class InitialDensityProfile:
    """Per-segment initial densities rho(k), k = 1..k_max."""

    rho: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rho", np.asarray(self.rho, dtype=float))

    def validate(self, fd: FDParams, disc: Discretization) -> None:
        if self.rho.shape != (disc.k_max,):
            raise ValueError(
                f"expected {disc.k_max} segment densities, got {self.rho.shape}"
            )
        if np.any(self.rho < 0) or np.any(self.rho > fd.rho_m):
            raise ValueError(f"densities outside [0, {fd.rho_m}]: {self.rho}")

    @property
    def total_count(self) -> float:
        """Vehicles initially on the link (needs X to be meaningful)."""
        return float(np.sum(self.rho))


@dataclass(frozen=True)
class BoundaryFlows:
    """Piecewise-constant boundary flows q_in(n), q_out(n), n = 1..n_max."""

    q_in: np.ndarray
    q_out: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q_in", np.asarray(self.q_in, dtype=float))
        object.__setattr__(self, "q_out", np.asarray(self.q_out, dtype=float))

    def validate(self, fd: FDParams, disc: Discretization) -> None:
        for name, q in (("q_in", self.q_in), ("q_out", self.q_out)):
            if q.shape != (disc.n_max,):
                raise ValueError(f"{name}: expected {disc.n_max} values")
            if np.any(q < -_EPS) or np.any(q > fd.capacity * (1 + 1e-9)):
                raise ValueError(f"{name} outside [0, capacity]: {q}")


def initial_value(
    profile: InitialDensityProfile, disc: Discretization, k: int, t: float, x: float
) -> float:
    """Initial value condition of segment k at (t, x); +inf off its domain."""
    if not 1 <= k <= disc.k_max:
        raise ValueError(f"k={k} outside 1..{disc.k_max}")
    X = disc.X
    xr = x - disc.zeta
    if t != 0.0 or xr < (k - 1) * X - _EPS or xr > k * X + _EPS:
        return INF
    rho = profile.rho
    return float(-np.sum(rho[: k - 1]) * X - rho[k - 1] * (xr - (k - 1) * X))


def upstream_value(
    flows: BoundaryFlows, disc: Discretization, n: int, t: float, x: float
) -> float:
    """Upstream boundary condition of step n at (t, x); +inf off its domain."""
    if not 1 <= n <= disc.n_max:
        raise ValueError(f"n={n} outside 1..{disc.n_max}")
    T = disc.T
    if abs(x - disc.zeta) > _EPS or t < (n - 1) * T - _EPS or t > n * T + _EPS:
        return INF
    q = flows.q_in
    return float(np.sum(q[: n - 1]) * T + q[n - 1] * (t - (n - 1) * T))


def downstream_value(
    flows: BoundaryFlows,
    profile: InitialDensityProfile,
    disc: Discretization,
    n: int,
    t: float,
    x: float,
) -> float:
    """Downstream boundary condition of step n at (t, x); +inf off its domain."""
    if not 1 <= n <= disc.n_max:
        raise ValueError(f"n={n} outside 1..{disc.n_max}")
    T = disc.T
    if abs(x - disc.chi) > _EPS or t < (n - 1) * T - _EPS or t > n * T + _EPS:
        return INF
    q = flows.q_out
    offset = float(np.sum(profile.rho)) * disc.X
    return float(np.sum(q[: n - 1]) * T + q[n - 1] * (t - (n - 1) * T) - offset)


@dataclass
class CFLDiagnostic:
    """Ratios |v_f T / X| and |w| T / X with an advisory warning flag."""

    free_flow_ratio: float
    backwave_ratio: float
    warned: bool = field(default=False)


def check_cfl(fd: FDParams, disc: Discretization) -> CFLDiagnostic:
    """Report the CFL-like ratios of the grid.

    The semi-analytic solver is exact for any step, so a ratio >= 1 only
    triggers a warning: large steps lose detail in the discretized
    boundary conditions, they do not destabilize anything.
    """
    r_free = abs(fd.v_f * disc.T / disc.X)
    r_back = abs(fd.w) * disc.T / disc.X
    diag = CFLDiagnostic(free_flow_ratio=r_free, backwave_ratio=r_back)
    if r_free >= 1.0:
        warnings.warn(
            f"|v_f T / X| = {r_free:.3f} >= 1: time step larger than the "
            "free-flow segment traversal time",
            stacklevel=2,
        )
        diag.warned = True
    return diag
