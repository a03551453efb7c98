"""Grid-free Moskowitz solutions for the triangular diagram.

Each discretized value condition (initial segment, upstream step,
downstream step) generates an explicit piecewise-affine solution; the
combined solution is the pointwise minimum over all of them.  Branches
are evaluated wherever their closed domain applies and reduced by min,
so seam points need no special casing (the branches agree there).

Evaluation is numpy-broadcast: ``t``/``x`` may be arrays, and the initial
densities may carry a leading sample axis (used by the Monte Carlo
constraint construction).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .conditions import (
    INF,
    BoundaryFlows,
    Discretization,
    InitialDensityProfile,
)
from .fd import FDParams

_EPS = 1e-9


def _min_inf(out, cond, val):
    return np.minimum(out, np.where(cond, val, INF))


def initial_component(
    fd: FDParams, rho: np.ndarray, X: float, k: int, t, x
) -> np.ndarray:
    """Solution generated by initial segment k at relative position x.

    ``rho`` has shape (..., k_max); a leading axis holds density samples.
    """
    rho = np.asarray(rho, dtype=float)
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    v, w, rc, rm = fd.v_f, fd.w, fd.rho_c, fd.rho_m
    cum_below = rho[..., : k - 1].sum(axis=-1) * X
    rk = rho[..., k - 1]

    shape = np.broadcast_shapes(t.shape, x.shape, rk.shape)
    out = np.full(shape, INF)
    valid = t >= -_EPS
    free = rk <= rc
    cong = rk >= rc

    # characteristic fan moving downstream at v_f, density rho(k)
    cond = valid & free & (x >= (k - 1) * X + v * t - _EPS) & (x <= k * X + v * t + _EPS)
    out = _min_inf(out, cond, -cum_below + rk * (t * v + (k - 1) * X - x))
    # upstream of the fan: capacity characteristic
    cond = valid & free & (x >= (k - 1) * X + w * t - _EPS) & (x <= (k - 1) * X + v * t + _EPS)
    out = _min_inf(out, cond, -cum_below + rc * (t * v + (k - 1) * X - x))
    # congested fan moving upstream at w
    cond = valid & cong & (x >= (k - 1) * X + w * t - _EPS) & (x <= k * X + w * t + _EPS)
    out = _min_inf(out, cond, -cum_below + rk * (t * w + (k - 1) * X - x) - rm * t * w)
    # downstream of the congested fan
    cond = valid & cong & (x >= k * X + w * t - _EPS) & (x <= k * X + v * t + _EPS)
    out = _min_inf(
        out, cond, -cum_below - rk * X + rc * (t * w + k * X - x) - rm * t * w
    )
    return out


def upstream_component(fd: FDParams, q_in: np.ndarray, T: float, n: int, t, x):
    """Solution generated by upstream boundary step n at relative position x."""
    q_in = np.asarray(q_in, dtype=float)
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    v, rc = fd.v_f, fd.rho_c
    cum_below = q_in[: n - 1].sum() * T
    tau = t - x / v  # departure time of the free-flow characteristic

    shape = np.broadcast_shapes(t.shape, x.shape)
    out = np.full(shape, INF)
    cond = (tau >= (n - 1) * T - _EPS) & (tau <= n * T + _EPS)
    out = _min_inf(out, cond, cum_below + q_in[n - 1] * (tau - (n - 1) * T))
    cond = tau >= n * T - _EPS
    out = _min_inf(out, cond, cum_below + q_in[n - 1] * T + rc * v * (tau - n * T))
    return out


def downstream_component(
    fd: FDParams,
    q_out: np.ndarray,
    initial_count: float,
    T: float,
    L: float,
    n: int,
    t,
    x,
):
    """Solution generated by downstream boundary step n at relative position x.

    ``initial_count`` is the total vehicle count sum(rho) * X offsetting the
    downstream condition; ``L`` is the link length chi - zeta.
    """
    q_out = np.asarray(q_out, dtype=float)
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    v, w, rc, rm = fd.v_f, fd.w, fd.rho_c, fd.rho_m
    cum_below = q_out[: n - 1].sum() * T
    sig = t - (x - L) / w  # departure time of the backward characteristic

    shape = np.broadcast_shapes(t.shape, x.shape)
    out = np.full(shape, INF)
    cond = (sig >= (n - 1) * T - _EPS) & (sig <= n * T + _EPS)
    out = _min_inf(
        out,
        cond,
        -initial_count + cum_below + q_out[n - 1] * (sig - (n - 1) * T) - rm * (x - L),
    )
    cond = sig >= n * T - _EPS
    out = _min_inf(
        out,
        cond,
        -initial_count + cum_below + q_out[n - 1] * T + rc * v * (t - n * T - (x - L) / v),
    )
    return out


def moskowitz_from_initial(
    fd: FDParams,
    profile: InitialDensityProfile,
    disc: Discretization,
    k: int,
    t: float,
    x: float,
) -> float:
    if not 1 <= k <= disc.k_max:
        raise ValueError(f"k={k} outside 1..{disc.k_max}")
    return float(initial_component(fd, profile.rho, disc.X, k, t, x - disc.zeta))


def moskowitz_from_upstream(
    fd: FDParams,
    flows: BoundaryFlows,
    disc: Discretization,
    n: int,
    t: float,
    x: float,
) -> float:
    if not 1 <= n <= disc.n_max:
        raise ValueError(f"n={n} outside 1..{disc.n_max}")
    return float(upstream_component(fd, flows.q_in, disc.T, n, t, x - disc.zeta))


def moskowitz_from_downstream(
    fd: FDParams,
    flows: BoundaryFlows,
    profile: InitialDensityProfile,
    disc: Discretization,
    n: int,
    t: float,
    x: float,
) -> float:
    if not 1 <= n <= disc.n_max:
        raise ValueError(f"n={n} outside 1..{disc.n_max}")
    count = float(np.sum(profile.rho)) * disc.X
    return float(
        downstream_component(
            fd, flows.q_out, count, disc.T, disc.length, n, t, x - disc.zeta
        )
    )


def solve_moskowitz(
    fd: FDParams,
    profile: InitialDensityProfile,
    flows: BoundaryFlows,
    disc: Discretization,
    t,
    x,
):
    """Combined solution: min over every per-condition solution.

    ``t`` and ``x`` (absolute position) may be scalars or broadcastable
    arrays; scalars return a float.
    """
    t_arr = np.asarray(t, dtype=float)
    xr = np.asarray(x, dtype=float) - disc.zeta
    count = float(np.sum(profile.rho)) * disc.X

    out = np.full(np.broadcast_shapes(t_arr.shape, xr.shape), INF)
    for k in range(1, disc.k_max + 1):
        out = np.minimum(out, initial_component(fd, profile.rho, disc.X, k, t_arr, xr))
    for n in range(1, disc.n_max + 1):
        out = np.minimum(out, upstream_component(fd, flows.q_in, disc.T, n, t_arr, xr))
        out = np.minimum(
            out,
            downstream_component(
                fd, flows.q_out, count, disc.T, disc.length, n, t_arr, xr
            ),
        )
    if np.any(np.isinf(out)):
        raise ValueError("all value-condition solutions are +inf at some point")
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class MoskowitzField:
    """Sampled cumulative vehicle index M over a regular (t, x) grid."""

    t: np.ndarray      # shape (nt,)
    x: np.ndarray      # shape (nx,), absolute positions
    grid: np.ndarray   # shape (nt, nx)
    disc: Discretization


def sample_field(
    fd: FDParams,
    profile: InitialDensityProfile,
    flows: BoundaryFlows,
    disc: Discretization,
    nt: int,
    nx: int,
) -> MoskowitzField:
    if nt < 2 or nx < 2:
        raise ValueError("need nt, nx >= 2")
    t = np.linspace(0.0, disc.t_max, nt)
    x = np.linspace(disc.zeta, disc.chi, nx)
    grid = solve_moskowitz(fd, profile, flows, disc, t[:, None], x[None, :])
    return MoskowitzField(t=t, x=x, grid=grid, disc=disc)


def density_field(
    fd: FDParams,
    profile: InitialDensityProfile,
    flows: BoundaryFlows,
    disc: Discretization,
    nt: int,
    nx: int,
) -> tuple[MoskowitzField, np.ndarray]:
    """Sample M and reconstruct density by forward differences in x.

    Returns the field and a (nt, nx-1) density matrix clamped to
    [0, rho_m]; column j covers [x_j, x_{j+1}].
    """
    field = sample_field(fd, profile, flows, disc, nt, nx)
    dx = field.x[1] - field.x[0]
    rho = -(field.grid[:, 1:] - field.grid[:, :-1]) / dx
    return field, np.clip(rho, 0.0, fd.rho_m)
